// Copyright 2026 The tbsteer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Monte-Carlo model of the time-bin steering experiment: pair emission on a
// pulse train, lossy arms, passive basis choice in each analyser, dark
// counts, and the coincidence histograms the estimators work from.
//
// Time is measured in pulse slots; one slot equals the analyser delay. A
// photon emitted in slot j arrives at j + 0 (early bin, short path),
// j + 1 (early/long or late/short) or j + 2 (late, long path). The relative
// delay tA - tB is histogrammed over bins -3..3:
//   0       both photons took the same path: phase-basis interference
//   +-1     correlated time bins (|00>, |11>)
//   +-2     anti-correlated time bins (|01>, |10>) plus accidentals
//   +-3     accidentals only; the reference for Klyshko subtraction

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbsteer/error.hpp"
#include "tbsteer/lhs_sdp.hpp"
#include "tbsteer/measurements.hpp"
#include "tbsteer/quantum_core.hpp"

namespace tbsteer {

struct LossComponent {
    std::string name;
    double db = 0.0;

    bool operator==(const LossComponent &) const = default;
};

using LossLedger = std::vector<LossComponent>;

/// Component losses quoted for Alice's arm (6.6 dB in total).
inline LossLedger default_loss_ledger() {
    return {{"on-chip", 2.0},   {"chip-fiber coupling", 1.5}, {"DWDM", 1.0}, {"transmission", 0.1},
            {"AMZI", 1.0},      {"filtering", 0.5},           {"SNSPD", 0.5}};
}

/// 10^(-sum dB / 10).
inline double total_efficiency(const LossLedger &ledger) {
    double sum = 0.0;
    for (const auto &c : ledger) {
        if (!(c.db >= 0.0) || !std::isfinite(c.db)) {
            throw InvalidArgument("total_efficiency: loss of component '" + c.name + "' must be a finite value >= 0 dB");
        }
        sum += c.db;
    }
    return std::pow(10.0, -sum / 10.0);
}

struct ExperimentConfig {
    int n_settings = 9;
    double rep_rate = 2.5e9;
    /// Mean pairs per pulse. Not quoted in the source; chosen for desk-scale runs.
    double pair_prob = 1e-3;
    /// Isotropic fraction of the emitted state.
    double p = 1.0;
    LossLedger alice_loss_db = default_loss_ledger();
    /// Not quoted in the source; defaults to Alice's ledger.
    LossLedger bob_loss_db = default_loss_ledger();
    double visibility = 0.985;
    double dark_rate_hz = 100.0;
    /// Coincidence acceptance width around each delay multiple.
    double bin_width_s = 400e-12;
    double delay_s = 400e-12;
    double duration_s = 1.0;
    std::uint64_t seed = 1;
    /// Random-walk phase noise, radians per sqrt(second).
    double phase_drift_sigma = 0.0;

    // Imperfections injected into the model and the compensations that
    // calibrate_phase searches for.
    double phase_offset_rad = 0.0;
    int schedule_slip = 0;
    double alice_phase_bias = 0.0;
    int alice_schedule_delay = 0;

    /// When non-empty, Bob cycles through these phases instead of the
    /// phase-encoding schedule (n_settings is then ignored).
    std::vector<double> bob_phases_rad;

    int settings_count() const {
        return bob_phases_rad.empty() ? n_settings : static_cast<int>(bob_phases_rad.size());
    }

    std::uint64_t pulses() const { return static_cast<std::uint64_t>(std::llround(rep_rate * duration_s)); }

    void validate() const {
        auto fail = [](const std::string &field, const std::string &why) {
            throw InvalidArgument("config field '" + field + "': " + why);
        };
        if (bob_phases_rad.empty() && n_settings < 2) {
            fail("n_settings", "must be >= 2");
        }
        if (n_settings > 64) {
            fail("n_settings", "must be <= 64");
        }
        for (double th : bob_phases_rad) {
            if (!std::isfinite(th)) {
                fail("bob_phases_rad", "phases must be finite");
            }
        }
        if (!(rep_rate > 0.0) || !std::isfinite(rep_rate)) {
            fail("rep_rate", "must be positive");
        }
        if (!(pair_prob >= 0.0 && pair_prob <= 0.1)) {
            fail("pair_prob", "must lie in [0, 0.1]");
        }
        if (!(p >= 0.0 && p <= 1.0)) {
            fail("p", "must lie in [0, 1]");
        }
        for (const auto &c : alice_loss_db) {
            if (!(c.db >= 0.0) || !std::isfinite(c.db)) {
                fail("alice_loss_db", "component '" + c.name + "' has negative or non-finite loss");
            }
        }
        for (const auto &c : bob_loss_db) {
            if (!(c.db >= 0.0) || !std::isfinite(c.db)) {
                fail("bob_loss_db", "component '" + c.name + "' has negative or non-finite loss");
            }
        }
        if (!(visibility >= 0.0 && visibility <= 1.0)) {
            fail("visibility", "must lie in [0, 1]");
        }
        if (!(dark_rate_hz >= 0.0) || !std::isfinite(dark_rate_hz)) {
            fail("dark_rate_hz", "must be >= 0");
        }
        if (!(delay_s > 0.0)) {
            fail("delay_s", "must be positive");
        }
        if (std::abs(delay_s * rep_rate - 1.0) > 1e-3) {
            fail("delay_s", "must equal 1/rep_rate (delay = pulse period)");
        }
        if (!(bin_width_s > 0.0 && bin_width_s <= delay_s * (1.0 + 1e-9))) {
            fail("bin_width_s", "must lie in (0, delay_s]");
        }
        if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
            fail("duration_s", "must be positive");
        }
        if (rep_rate * duration_s > 1e13) {
            fail("duration_s", "run exceeds 1e13 pulses");
        }
        if (!(phase_drift_sigma >= 0.0) || !std::isfinite(phase_drift_sigma)) {
            fail("phase_drift_sigma", "must be >= 0");
        }
        if (!std::isfinite(phase_offset_rad)) {
            fail("phase_offset_rad", "must be finite");
        }
        if (!std::isfinite(alice_phase_bias)) {
            fail("alice_phase_bias", "must be finite");
        }
    }
};

/// Output pairs in histogram order.
inline constexpr std::array<const char *, 4> kPairNames{"A+B+", "A+B-", "A-B+", "A-B-"};

inline int pair_index(int alice_port, int bob_port) { return 2 * alice_port + bob_port; }

/// Coincidence counts per output pair, Bob setting and relative-delay bin,
/// plus per-detector singles. Port 0 is "+", port 1 is "-".
struct HistogramSet {
    static constexpr int kHalfWidth = 3;
    static constexpr int kBins = 2 * kHalfWidth + 1;
    using Row = std::array<std::uint64_t, kBins>;

    int n = 0;
    std::array<std::vector<Row>, 4> counts;
    std::array<std::uint64_t, 2> singles_alice{};
    std::array<std::uint64_t, 2> singles_bob{};
    std::uint64_t pulses = 0;
    double duration_s = 0.0;

    HistogramSet() = default;
    explicit HistogramSet(int settings) : n(settings) {
        if (settings < 1) {
            throw InvalidArgument("HistogramSet: need at least one setting");
        }
        for (auto &c : counts) {
            c.assign(static_cast<std::size_t>(settings), Row{});
        }
    }

    std::uint64_t at(int pair, int k, int bin) const {
        check(pair, k, bin);
        return counts[static_cast<std::size_t>(pair)][static_cast<std::size_t>(k)]
                     [static_cast<std::size_t>(bin + kHalfWidth)];
    }

    void add(int pair, int k, int bin, std::uint64_t v = 1) {
        check(pair, k, bin);
        auto &slot = counts[static_cast<std::size_t>(pair)][static_cast<std::size_t>(k)]
                           [static_cast<std::size_t>(bin + kHalfWidth)];
        slot = checked_add(slot, v);
    }

    /// Sum over pairs and settings of the bins in [lo, hi].
    std::uint64_t sum_bins(int lo, int hi) const {
        std::uint64_t s = 0;
        for (const auto &pair : counts) {
            for (const auto &row : pair) {
                for (int b = lo; b <= hi; ++b) {
                    s += row[static_cast<std::size_t>(b + kHalfWidth)];
                }
            }
        }
        return s;
    }

    std::uint64_t total_coincidences() const { return sum_bins(-kHalfWidth, kHalfWidth); }
    std::uint64_t alice_singles() const { return singles_alice[0] + singles_alice[1]; }
    std::uint64_t bob_singles() const { return singles_bob[0] + singles_bob[1]; }

    /// Adds another run with the same settings count. Associative and
    /// commutative since every field is a sum.
    HistogramSet &merge(const HistogramSet &o) {
        if (o.n != n) {
            throw InvalidArgument("HistogramSet::merge: settings count differs");
        }
        for (int p = 0; p < 4; ++p) {
            for (int k = 0; k < n; ++k) {
                for (int b = 0; b < kBins; ++b) {
                    auto &dst = counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)]
                                      [static_cast<std::size_t>(b)];
                    dst = checked_add(dst, o.counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)]
                                                   [static_cast<std::size_t>(b)]);
                }
            }
        }
        for (int i = 0; i < 2; ++i) {
            singles_alice[static_cast<std::size_t>(i)] =
                checked_add(singles_alice[static_cast<std::size_t>(i)], o.singles_alice[static_cast<std::size_t>(i)]);
            singles_bob[static_cast<std::size_t>(i)] =
                checked_add(singles_bob[static_cast<std::size_t>(i)], o.singles_bob[static_cast<std::size_t>(i)]);
        }
        pulses = checked_add(pulses, o.pulses);
        duration_s += o.duration_s;
        return *this;
    }

    bool operator==(const HistogramSet &) const = default;

   private:
    static std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
        std::uint64_t r = 0;
        if (__builtin_add_overflow(a, b, &r)) {
            throw std::overflow_error("HistogramSet: counter overflow");
        }
        return r;
    }

    void check(int pair, int k, int bin) const {
        if (pair < 0 || pair > 3 || k < 0 || k >= n || bin < -kHalfWidth || bin > kHalfWidth) {
            throw InvalidArgument("HistogramSet: index out of range");
        }
    }
};

namespace detail {

struct Click {
    double t;  // slots
    std::uint64_t slot;
    int port;

    bool operator<(const Click &o) const { return t < o.t; }
};

inline int positive_mod(long long a, int n) {
    long long r = a % n;
    return static_cast<int>(r < 0 ? r + n : r);
}

/// Bob's modulator phase in each schedule position.
inline std::vector<double> bob_schedule(const ExperimentConfig &cfg) {
    if (!cfg.bob_phases_rad.empty()) {
        return cfg.bob_phases_rad;
    }
    std::vector<double> th(static_cast<std::size_t>(cfg.n_settings), 0.0);
    for (int k = 1; k < cfg.n_settings; ++k) {
        th[static_cast<std::size_t>(k)] = (k - 1) * std::numbers::pi / (cfg.n_settings - 1);
    }
    return th;
}

/// Matches clicks whose separation lies within half a window of an integer
/// delay in [-3, 3] and books them by Bob's setting.
inline void accumulate_coincidences(const std::vector<Click> &a, const std::vector<Click> &b, double half_window,
                                    int n, HistogramSet &h) {
    const double reach = HistogramSet::kHalfWidth + half_window + 1e-12;
    std::size_t lo = 0;
    for (const Click &ca : a) {
        while (lo < b.size() && b[lo].t < ca.t - reach) {
            ++lo;
        }
        for (std::size_t j = lo; j < b.size() && b[j].t <= ca.t + reach; ++j) {
            double d = ca.t - b[j].t;
            double r = std::round(d);
            if (std::abs(d - r) > half_window + 1e-12) {
                continue;
            }
            int bin = static_cast<int>(r);
            if (bin < -HistogramSet::kHalfWidth || bin > HistogramSet::kHalfWidth) {
                continue;
            }
            h.add(pair_index(ca.port, b[j].port), static_cast<int>(b[j].slot % static_cast<std::uint64_t>(n)), bin);
        }
    }
}

}  // namespace detail

/// One acquisition. Pair emission is a Poisson process on the pulse train
/// (total count Poisson, slots uniform), which is the same law as an
/// independent Poisson number per pulse. Deterministic for a given config.
inline HistogramSet simulate_run(const ExperimentConfig &cfg) {
    cfg.validate();
    const int n = cfg.settings_count();
    const std::vector<double> theta_b = detail::bob_schedule(cfg);
    const std::uint64_t slots = cfg.pulses();
    const double eta_a = total_efficiency(cfg.alice_loss_db);
    const double eta_b = total_efficiency(cfg.bob_loss_db);
    const double vp = cfg.visibility * cfg.p;
    const double slot_s = 1.0 / cfg.rep_rate;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto coin = [&] { return static_cast<int>(rng() >> 63); };

    HistogramSet h(n);
    h.pulses = slots;
    h.duration_s = cfg.duration_s;

    std::uint64_t pairs = 0;
    if (cfg.pair_prob > 0.0 && slots > 0) {
        pairs = std::poisson_distribution<std::uint64_t>(cfg.pair_prob * static_cast<double>(slots))(rng);
    }
    std::vector<std::uint64_t> emit(pairs);
    std::uniform_int_distribution<std::uint64_t> pick_slot(0, slots - 1);
    for (auto &s : emit) {
        s = pick_slot(rng);
    }
    std::sort(emit.begin(), emit.end());

    std::vector<detail::Click> ca, cb;
    ca.reserve(static_cast<std::size_t>(static_cast<double>(pairs) * eta_a * 1.1) + 16);
    cb.reserve(static_cast<std::size_t>(static_cast<double>(pairs) * eta_b * 1.1) + 16);

    // Arrival offset of a lone photon: time bin plus path, each a fair coin.
    auto lone_offset = [&] { return coin() + coin(); };

    double drift = 0.0;
    std::uint64_t last_slot = 0;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::uint64_t j : emit) {
        if (cfg.phase_drift_sigma > 0.0) {
            double dt = static_cast<double>(j - last_slot) * slot_s;
            drift += cfg.phase_drift_sigma * std::sqrt(dt) * gauss(rng);
            last_slot = j;
        }
        bool det_a = unif(rng) < eta_a;
        bool det_b = unif(rng) < eta_b;
        if (!det_a && !det_b) {
            continue;
        }
        auto js = static_cast<double>(j);
        if (det_a && det_b) {
            const int kb = static_cast<int>(j % static_cast<std::uint64_t>(n));
            const int ka = detail::positive_mod(static_cast<long long>(j % static_cast<std::uint64_t>(n)) -
                                                    cfg.schedule_slip + cfg.alice_schedule_delay,
                                                n);
            if (coin() == 0) {
                // Same path on both sides: the two time bins are indistinguishable.
                double delta = -theta_b[static_cast<std::size_t>(ka)] + cfg.alice_phase_bias +
                               theta_b[static_cast<std::size_t>(kb)] + cfg.phase_offset_rad + drift;
                double agree = 0.5 * (1.0 + vp * std::cos(delta));
                int pa = coin();
                int pb = unif(rng) < agree ? pa : 1 - pa;
                ca.push_back({js + 1.0, j, pa});
                cb.push_back({js + 1.0, j, pb});
            } else {
                // Different paths: time-bin values are resolved. The pair shares
                // the time bin with probability (1 + p) / 2 and lands in a side
                // peak; otherwise it goes to the adjacent bin on the same side, so
                // the central peak only ever carries phase-basis events.
                int path_a = coin();  // 0 short, 1 long; Bob takes the other
                int bin_a = coin();
                int bin_b = bin_a;
                if (unif(rng) >= 0.5 * (1.0 + cfg.p)) {
                    bin_a = path_a;
                    bin_b = 1 - path_a;
                }
                ca.push_back({js + bin_a + path_a, j, coin()});
                cb.push_back({js + bin_b + (1 - path_a), j, coin()});
            }
        } else if (det_a) {
            ca.push_back({js + lone_offset(), j, coin()});
        } else {
            cb.push_back({js + lone_offset(), j, coin()});
        }
    }

    const double span = static_cast<double>(slots) + 2.0;
    // dark_rate_hz is per detector; each party has two.
    auto add_darks = [&](std::vector<detail::Click> &clicks) {
        for (int port = 0; port < 2; ++port) {
            double mean = cfg.dark_rate_hz * cfg.duration_s;
            std::uint64_t m = mean > 0.0 ? std::poisson_distribution<std::uint64_t>(mean)(rng) : 0;
            for (std::uint64_t i = 0; i < m; ++i) {
                double t = unif(rng) * span;
                clicks.push_back({t, static_cast<std::uint64_t>(t), port});
            }
        }
    };
    add_darks(ca);
    add_darks(cb);
    std::stable_sort(ca.begin(), ca.end());
    std::stable_sort(cb.begin(), cb.end());

    for (const auto &c : ca) {
        ++h.singles_alice[static_cast<std::size_t>(c.port)];
    }
    for (const auto &c : cb) {
        ++h.singles_bob[static_cast<std::size_t>(c.port)];
    }
    detail::accumulate_coincidences(ca, cb, 0.5 * cfg.bin_width_s / cfg.delay_s, n, h);
    return h;
}

/// Heralding efficiencies of both arms with binomial-plus-background errors.
struct KlyshkoEstimate {
    double alice = 0.0;
    double alice_error = 0.0;
    double bob = 0.0;
    double bob_error = 0.0;
    double coincidences = 0.0;
    double accidentals = 0.0;
};

/// coincidences / opposite singles after removing `accidentals` (expected
/// background in the counted window, with its own variance).
inline KlyshkoEstimate klyshko_from_counts(double coincidences, double accidentals, double accidental_var,
                                           double singles_alice, double singles_bob) {
    if (!(singles_alice > 0.0) || !(singles_bob > 0.0)) {
        throw UndefinedEstimate("estimate_klyshko: zero singles in one arm");
    }
    KlyshkoEstimate k;
    k.coincidences = coincidences;
    k.accidentals = accidentals;
    double c = coincidences - accidentals;
    auto one = [&](double singles, double &value, double &err) {
        value = c / singles;
        double q = std::clamp(value, 0.0, 1.0);
        // The 1/singles floor keeps the error finite and nonzero at 0 or 1.
        err = std::sqrt((q * (1.0 - q) + 1.0 / singles) / singles + accidental_var / (singles * singles));
    };
    one(singles_bob, k.alice, k.alice_error);
    one(singles_alice, k.bob, k.bob_error);
    return k;
}

/// True coincidences in bins -2..2 divided by opposite singles. The +-3 bins
/// carry no true events and give the accidental rate per bin.
inline KlyshkoEstimate estimate_klyshko(const HistogramSet &h) {
    double in_window = static_cast<double>(h.sum_bins(-2, 2));
    double reference = static_cast<double>(h.sum_bins(-3, -3) + h.sum_bins(3, 3));
    double acc = 5.0 * reference / 2.0;
    double acc_var = 25.0 * reference / 4.0;
    return klyshko_from_counts(in_window, acc, acc_var, static_cast<double>(h.alice_singles()),
                               static_cast<double>(h.bob_singles()));
}

/// S_n from a phase-encoding-schedule histogram. k = 0 uses the side peaks of
/// every setting against the adjacent bins; k >= 1 uses the central peak of
/// setting k. Binomial standard errors.
inline SteeringEstimate estimate_steering(const HistogramSet &h, int n) {
    if (n != h.n) {
        throw InvalidArgument("estimate_steering: histogram covers " + std::to_string(h.n) + " settings, asked for " +
                              std::to_string(n));
    }
    if (n < 2) {
        throw InvalidArgument("estimate_steering: need n >= 2");
    }
    auto corr = [](double plus, double minus, const std::string &what) {
        double tot = plus + minus;
        if (tot <= 0.0) {
            throw UndefinedEstimate("estimate_steering: no counts for " + what);
        }
        double e = (plus - minus) / tot;
        return std::pair{e, std::sqrt(std::max(1.0 - e * e, 1.0 / tot) / tot)};
    };
    std::vector<double> c, err;
    double side = static_cast<double>(h.sum_bins(-1, -1) + h.sum_bins(1, 1));
    double adj = static_cast<double>(h.sum_bins(-2, -2) + h.sum_bins(2, 2));
    auto [ezz, szz] = corr(side, adj, "setting 0 (time basis)");
    c.push_back(ezz);
    err.push_back(szz);
    for (int k = 1; k < n; ++k) {
        double agree = static_cast<double>(h.at(0, k, 0) + h.at(3, k, 0));
        double disagree = static_cast<double>(h.at(1, k, 0) + h.at(2, k, 0));
        auto [e, s] = corr(agree, disagree, "setting " + std::to_string(k));
        c.push_back(e);
        err.push_back(s);
    }
    return SteeringEstimate::from_correlators(std::move(c), std::move(err));
}

/// Fraction of central-peak coincidences with equal outputs, pooled over
/// settings, and its binomial error.
inline std::pair<double, double> central_agreement(const HistogramSet &h) {
    double agree = 0.0, total = 0.0;
    for (int k = 0; k < h.n; ++k) {
        for (int pair = 0; pair < 4; ++pair) {
            double v = static_cast<double>(h.at(pair, k, 0));
            total += v;
            if (pair == 0 || pair == 3) {
                agree += v;
            }
        }
    }
    if (total <= 0.0) {
        throw UndefinedEstimate("central_agreement: empty central peak");
    }
    double f = agree / total;
    return {f, std::sqrt(std::max(f * (1.0 - f), 1.0 / total) / total)};
}

struct CalibrationOptions {
    /// Bisection stops when the bias bracket is narrower than this.
    double phase_tol = 1e-3;
    /// Bracket ends must differ from 1/2 by this many standard errors.
    double bracket_sigmas = 3.0;
};

struct CalibrationResult {
    double phase_offset = 0.0;
    int schedule_slip = 0;
    /// Alice bias where the agreement fraction crossed 1/2.
    double crossing_bias = 0.0;
    /// S_n at each trial schedule delay.
    std::vector<double> delay_scan;
    int runs = 0;
};

/// Two stages. (i) With Bob's modulator parked and the complementary pair
/// sigma_0 / sigma_pi, sweep Alice's bias beta until outputs agree half the
/// time; the agreement is (1 + Vp cos(beta + phi)) / 2, so phi = pi/2 - beta.
/// (ii) With that offset compensated, scan Alice's schedule delay over one
/// period and keep the one maximizing S_n. Assumes |phi| < pi/2.
inline CalibrationResult calibrate_phase(const ExperimentConfig &config, const CalibrationOptions &opt = {}) {
    config.validate();
    if (!config.bob_phases_rad.empty()) {
        throw InvalidArgument("calibrate_phase: config must use the phase-encoding schedule");
    }
    CalibrationResult res;
    ExperimentConfig stage1 = config;
    stage1.bob_phases_rad = {0.0};
    stage1.alice_schedule_delay = 0;
    auto agreement = [&](double beta) {
        stage1.alice_phase_bias = beta;
        ++res.runs;
        return central_agreement(simulate_run(stage1));
    };
    double lo = 0.0, hi = std::numbers::pi;
    auto [f_lo, s_lo] = agreement(lo);
    auto [f_hi, s_hi] = agreement(hi);
    if (!(f_lo - 0.5 > opt.bracket_sigmas * s_lo) || !(0.5 - f_hi > opt.bracket_sigmas * s_hi)) {
        throw CalibrationFailure("calibrate_phase: agreement does not cross 1/2 on [0, pi] (f(0)=" +
                                 std::to_string(f_lo) + ", f(pi)=" + std::to_string(f_hi) + ")");
    }
    while (hi - lo > opt.phase_tol) {
        double mid = 0.5 * (lo + hi);
        (agreement(mid).first > 0.5 ? lo : hi) = mid;
    }
    res.crossing_bias = 0.5 * (lo + hi);
    res.phase_offset = std::numbers::pi / 2 - res.crossing_bias;

    ExperimentConfig stage2 = config;
    stage2.alice_phase_bias = -res.phase_offset;
    const int n = config.n_settings;
    double best = -2.0;
    for (int d = 0; d < n; ++d) {
        stage2.alice_schedule_delay = d;
        ++res.runs;
        double s = estimate_steering(simulate_run(stage2), n).value;
        res.delay_scan.push_back(s);
        if (s > best) {
            best = s;
            res.schedule_slip = d;
        }
    }
    return res;
}

struct TestVerdict {
    SteeringEstimate s_n;
    double epsilon_hat = 0.0;
    double epsilon_error = 0.0;
    /// Efficiency at which p_star was evaluated (lower edge when conservative).
    double epsilon_used = 0.0;
    double p_star_at_epsilon = 1.0;
    BoundStatus bound_status = BoundStatus::failed;
    bool passed = false;
    double margin = 0.0;
    double combined_error = 0.0;
};

struct VerdictOptions {
    /// Evaluate p_star at epsilon_hat - epsilon_error.
    bool conservative = false;
    LhsOptions lhs{};
};

/// Compares S_n with the loss-counted bound at the measured efficiency. The
/// combined error propagates the efficiency error through the local slope
/// of p_star.
inline TestVerdict verdict(const SteeringEstimate &s_n, double epsilon_hat, double epsilon_error, int n,
                           const MeasurementSet &settings, const VerdictOptions &opt = {}) {
    if (!(epsilon_hat > 0.0 && epsilon_hat <= 1.0)) {
        throw InvalidArgument("verdict: epsilon_hat must lie in (0, 1], got " + std::to_string(epsilon_hat));
    }
    if (!(epsilon_error >= 0.0) || !std::isfinite(epsilon_error)) {
        throw InvalidArgument("verdict: epsilon_error must be >= 0");
    }
    if (n != settings.n() || (s_n.n != 0 && s_n.n != n)) {
        throw InvalidArgument("verdict: n disagrees with the settings or the estimate");
    }
    TestVerdict v;
    v.s_n = s_n;
    v.epsilon_hat = epsilon_hat;
    v.epsilon_error = epsilon_error;
    v.epsilon_used = opt.conservative ? std::max(epsilon_hat - epsilon_error, 1e-12) : epsilon_hat;
    auto bound = [&](double eps) {
        try {
            return critical_p(settings, eps, opt.lhs);
        } catch (const SolverFailure &e) {
            throw VerdictUnavailable(std::string("verdict: bound unavailable: ") + e.what());
        }
    };
    BoundPoint bp = bound(v.epsilon_used);
    v.p_star_at_epsilon = bp.p_star;
    v.bound_status = bp.status;
    double slope = 0.0;
    if (epsilon_error > 0.0) {
        double other = v.epsilon_used + epsilon_error <= 1.0 ? v.epsilon_used + epsilon_error
                                                             : v.epsilon_used - epsilon_error;
        if (other > 0.0) {
            slope = std::abs(bound(other).p_star - bp.p_star) / epsilon_error;
        }
    }
    v.combined_error = std::hypot(s_n.std_error, slope * epsilon_error);
    v.passed = s_n.value > v.p_star_at_epsilon;
    double diff = s_n.value - v.p_star_at_epsilon;
    v.margin = v.combined_error > 0.0 ? diff / v.combined_error
                                      : (diff > 0 ? std::numeric_limits<double>::infinity()
                                                  : -std::numeric_limits<double>::infinity());
    return v;
}

}  // namespace tbsteer
