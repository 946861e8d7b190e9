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

// tbsteer: bound curves, family comparison, lossless bounds and simulated
// steering tests. Exit codes: 0 success/pass, 1 usage or config error,
// 2 solver failure, 3 steering test failed.

#include <chrono>
#include <ctime>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tbsteer/io.hpp"
#include "tbsteer/tbsteer.hpp"

namespace {

using tbsteer::io::json;

enum Exit : int { kOk = 0, kUsage = 1, kSolver = 2, kFailed = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// "a" or "a-b", inclusive.
std::vector<int> parse_n_range(const std::string &s) {
    std::vector<int> out;
    try {
        auto dash = s.find('-');
        int lo = std::stoi(s.substr(0, dash));
        int hi = dash == std::string::npos ? lo : std::stoi(s.substr(dash + 1));
        if (hi < lo) {
            throw UsageError("--n: empty range '" + s + "'");
        }
        for (int n = lo; n <= hi; ++n) {
            out.push_back(n);
        }
    } catch (const std::logic_error &) {
        throw UsageError("--n: expected N or A-B, got '" + s + "'");
    }
    return out;
}

/// start:stop:step. Starts at start, adds step while the value stays <= stop.
std::vector<double> parse_grid(const std::string &s, const std::string &flag) {
    double v[3];
    std::stringstream in(s);
    std::string part;
    int i = 0;
    try {
        while (std::getline(in, part, ':')) {
            if (i == 3) {
                throw UsageError("");
            }
            std::size_t used = 0;
            v[i++] = std::stod(part, &used);
            if (used != part.size()) {
                throw UsageError("");
            }
        }
    } catch (const std::exception &) {
        i = -1;
    }
    if (i != 3 || !(v[2] > 0.0) || v[1] < v[0]) {
        throw UsageError(flag + ": expected start:stop:step with step > 0 and stop >= start, got '" + s + "'");
    }
    std::vector<double> out;
    for (long k = 0;; ++k) {
        double x = v[0] + static_cast<double>(k) * v[2];
        if (x > v[1] + 1e-12) {
            break;
        }
        out.push_back(std::min(x, v[1] + 0.0));
        if (out.size() > 100000) {
            throw UsageError(flag + ": grid too large");
        }
    }
    for (double x : out) {
        if (!(x > 0.0 && x <= 1.0 + 1e-12)) {
            throw UsageError(flag + ": grid values must lie in (0, 1]");
        }
    }
    for (double &x : out) {
        x = std::min(x, 1.0);
    }
    return out;
}

tbsteer::MeasurementSet family_set(const std::string &family, int n) {
    try {
        return tbsteer::make_set(tbsteer::parse_family(family), n);
    } catch (const tbsteer::InvalidArgument &e) {
        throw UsageError(e.what());
    }
}

struct Common {
    std::string out = "tbsteer_out";
    unsigned threads = 0;
    std::string method = "auto";
    std::string loss_model = "per-setting";
    double tol = 1e-8;

    tbsteer::LhsOptions options() const {
        tbsteer::LhsOptions o;
        o.tol = tol;
        o.threads = threads;
        if (method == "full") {
            o.method = tbsteer::SolveMethod::full;
        } else if (method == "colgen") {
            o.method = tbsteer::SolveMethod::column_generation;
        } else if (method != "auto") {
            throw UsageError("--method: expected auto, full or colgen");
        }
        if (loss_model == "average") {
            o.loss_model = tbsteer::LossModel::average;
        } else if (loss_model != "per-setting") {
            throw UsageError("--loss-model: expected per-setting or average");
        }
        if (!(tol > 0.0)) {
            throw UsageError("--tol: must be positive");
        }
        return o;
    }

    json to_json() const {
        return {{"out", out}, {"threads", threads}, {"method", method}, {"loss_model", loss_model}, {"tol", tol}};
    }
};

void add_common(CLI::App *cmd, Common &c, bool solver_flags = true) {
    cmd->add_option("--out", c.out, "Output path prefix")->capture_default_str();
    if (solver_flags) {
        cmd->add_option("--threads", c.threads, "Worker threads (default: TBSTEER_THREADS or hardware)");
        cmd->add_option("--method", c.method, "auto | full | colgen")->capture_default_str();
        cmd->add_option("--loss-model", c.loss_model, "per-setting | average")->capture_default_str();
        cmd->add_option("--tol", c.tol, "Decision tolerance")->capture_default_str();
    }
}

/// Runs body, maps exceptions to exit codes and always writes the manifest.
int run_command(tbsteer::io::RunManifest &m, const std::string &prefix, const std::function<int()> &body) {
    m.started = utc_now();
    int code = kOk;
    try {
        code = body();
    } catch (const UsageError &e) {
        m.message = e.what();
        code = kUsage;
    } catch (const tbsteer::InvalidArgument &e) {
        m.message = e.what();
        code = kUsage;
    } catch (const tbsteer::SolverFailure &e) {
        m.message = e.what();
        code = kSolver;
    } catch (const tbsteer::VerdictUnavailable &e) {
        m.message = e.what();
        code = kSolver;
    } catch (const std::exception &e) {
        m.message = e.what();
        code = kSolver;
    }
    if (!m.message.empty()) {
        std::cerr << "tbsteer " << m.command << ": " << m.message << "\n";
    }
    m.finished = utc_now();
    m.exit_code = code;
    std::string path = prefix + ".manifest.json";
    try {
        tbsteer::io::write_json(path, m.to_json());
    } catch (const std::exception &e) {
        std::cerr << "tbsteer: " << e.what() << "\n";
        if (code == kOk) {
            code = kUsage;
        }
    }
    return code;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Loss-counted steering bounds and simulated time-bin steering tests"};
    app.set_version_flag("--version", std::string("tbsteer ") + tbsteer::io::version());
    app.require_subcommand(1);

    // bounds
    Common bc;
    std::string b_n = "9", b_family = "phase", b_eps;
    auto *bounds = app.add_subcommand("bounds", "Critical p* versus epsilon (CSV + JSON sidecar with certificates)");
    bounds->add_option("--n", b_n, "Settings count N or range A-B")->capture_default_str();
    bounds->add_option("--family", b_family, "phase | platonic")->capture_default_str();
    bounds->add_option("--eps", b_eps, "Epsilon grid start:stop:step (inclusive start, bounded by stop)")->required();
    add_common(bounds, bc);

    // compare
    Common cc;
    int c_n = 6;
    std::string c_p, c_eps;
    auto *compare = app.add_subcommand("compare", "Phase-encoding versus Platonic settings");
    compare->add_option("--n", c_n, "Settings count")->capture_default_str();
    auto *c_popt = compare->add_option("--p", c_p, "p grid start:stop:step; reports critical epsilon");
    auto *c_eopt = compare->add_option("--eps", c_eps, "epsilon grid start:stop:step; reports critical p");
    c_popt->excludes(c_eopt);
    add_common(compare, cc);

    // lhs-bound
    int l_n = 2;
    std::string l_family = "phase", l_bloch;
    auto *lhs = app.add_subcommand("lhs-bound", "Lossless deterministic bound on S_n");
    lhs->add_option("--n", l_n, "Settings count")->capture_default_str();
    lhs->add_option("--family", l_family, "phase | platonic | custom")->capture_default_str();
    lhs->add_option("--bloch", l_bloch, "custom directions 'x,y,z;x,y,z;...'");
    Common lc;
    lc.out = "tbsteer_lhs_bound";
    add_common(lhs, lc, false);

    // simulate
    Common sc;
    std::string s_config;
    std::uint64_t s_seed = 0;
    bool s_conservative = false;
    double s_force_eps = -1.0;
    auto *sim = app.add_subcommand("simulate", "Simulate an acquisition and render the steering verdict");
    sim->add_option("--config", s_config, "Experiment config JSON (defaults when omitted)");
    auto *seed_opt = sim->add_option("--seed", s_seed, "Overrides the config seed");
    sim->add_flag("--conservative", s_conservative, "Evaluate p* at the lower edge of epsilon");
    sim->add_option("--force-epsilon", s_force_eps, "Use this efficiency instead of the Klyshko estimate");
    add_common(sim, sc);

    // calibrate
    std::string k_config;
    std::uint64_t k_seed = 0;
    auto *cal = app.add_subcommand("calibrate", "Recover phase offset and schedule slip from simulated scans");
    cal->add_option("--config", k_config, "Experiment config JSON (defaults when omitted)");
    auto *kseed_opt = cal->add_option("--seed", k_seed, "Overrides the config seed");
    Common kc;
    kc.out = "tbsteer_calibrate";
    add_common(cal, kc, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kUsage;
    }

    tbsteer::io::RunManifest m;

    if (*bounds) {
        m.command = "bounds";
        return run_command(m, bc.out, [&] {
            m.config = bc.to_json();
            m.config["n"] = b_n;
            m.config["family"] = b_family;
            m.config["eps"] = b_eps;
            auto ns = parse_n_range(b_n);
            auto grid = parse_grid(b_eps, "--eps");
            auto opt = bc.options();
            std::vector<tbsteer::MeasurementSet> sets;
            for (int n : ns) {
                sets.push_back(family_set(b_family, n));
            }
            std::string csv = tbsteer::io::bounds_csv_header() + "\n";
            json side = json::array();
            bool failed = false;
            for (const auto &set : sets) {
                auto pts = tbsteer::bound_curve(set, grid, opt);
                for (const auto &bp : pts) {
                    csv += tbsteer::io::bounds_csv_row(bp) + "\n";
                    side.push_back(tbsteer::io::to_json(bp));
                    failed = failed || bp.status == tbsteer::BoundStatus::failed;
                }
            }
            tbsteer::io::write_text(bc.out + ".csv", csv);
            tbsteer::io::write_json(bc.out + ".json", {{"manifest", bc.out + ".manifest.json"}, {"points", side}});
            m.outputs = {bc.out + ".csv", bc.out + ".json"};
            std::cout << csv;
            return failed ? kSolver : kOk;
        });
    }

    if (*compare) {
        m.command = "compare";
        return run_command(m, cc.out, [&] {
            m.config = cc.to_json();
            m.config["n"] = c_n;
            auto opt = cc.options();
            auto phase = family_set("phase", c_n);
            auto plat = family_set("platonic", c_n);
            bool by_p = c_eps.empty();
            std::string grid_text = by_p ? (c_p.empty() ? std::string("0.8:1.0:0.05") : c_p) : c_eps;
            m.config[by_p ? "p" : "eps"] = grid_text;
            auto grid = parse_grid(grid_text, by_p ? "--p" : "--eps");
            std::string csv = by_p ? "n,p,eps_star_phase,eps_star_platonic,eps_diff\n"
                                   : "n,epsilon,p_star_phase,p_star_platonic,p_diff\n";
            std::vector<std::string> rows(grid.size());
            bool failed = false;
            std::vector<int> fail_flags(grid.size(), 0);
            auto inner = opt;
            inner.threads = 1;
            tbsteer::parallel_for(
                grid.size(),
                [&](std::size_t i) {
                    double a, b;
                    try {
                        if (by_p) {
                            a = tbsteer::critical_epsilon(phase, grid[i], inner).epsilon;
                            b = tbsteer::critical_epsilon(plat, grid[i], inner).epsilon;
                        } else {
                            a = tbsteer::critical_p(phase, grid[i], inner).p_star;
                            b = tbsteer::critical_p(plat, grid[i], inner).p_star;
                        }
                    } catch (const tbsteer::SolverFailure &) {
                        a = b = std::numeric_limits<double>::quiet_NaN();
                        fail_flags[i] = 1;
                    }
                    using tbsteer::io::fmt;
                    rows[i] = std::to_string(c_n) + "," + fmt(grid[i]) + "," + fmt(a) + "," + fmt(b) + "," + fmt(b - a);
                },
                opt.threads);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                csv += rows[i] + "\n";
                failed = failed || fail_flags[i];
            }
            tbsteer::io::write_text(cc.out + ".csv", csv);
            m.outputs = {cc.out + ".csv"};
            std::cout << csv;
            return failed ? kSolver : kOk;
        });
    }

    if (*lhs) {
        m.command = "lhs-bound";
        return run_command(m, lc.out, [&] {
            m.config = {{"n", l_n}, {"family", l_family}, {"bloch", l_bloch}};
            std::optional<tbsteer::MeasurementSet> set;
            if (l_family == "custom") {
                std::vector<tbsteer::Measurement> ms;
                std::stringstream in(l_bloch);
                std::string vec;
                while (std::getline(in, vec, ';')) {
                    double x = 0, y = 0, z = 0;
                    if (std::sscanf(vec.c_str(), "%lf,%lf,%lf", &x, &y, &z) != 3) {
                        throw UsageError("--bloch: expected 'x,y,z;...', got '" + vec + "'");
                    }
                    ms.push_back(tbsteer::Measurement::general(tbsteer::Vector3(x, y, z),
                                                               "M" + std::to_string(ms.size())));
                }
                set.emplace(tbsteer::SetFamily::custom, std::move(ms));
            } else {
                set.emplace(family_set(l_family, l_n));
            }
            double v = tbsteer::lossless_lhs_bound(*set);
            std::cout << tbsteer::io::fmt(v) << "\n";
            m.config["value"] = v;
            return kOk;
        });
    }

    if (*sim) {
        m.command = "simulate";
        return run_command(m, sc.out, [&] {
            tbsteer::ExperimentConfig cfg =
                s_config.empty() ? tbsteer::ExperimentConfig{} : tbsteer::io::read_config(s_config);
            if (*seed_opt) {
                cfg.seed = s_seed;
            }
            cfg.validate();
            m.seed = cfg.seed;
            m.config = tbsteer::io::to_json(cfg);
            m.config["conservative"] = s_conservative;
            if (s_force_eps >= 0.0) {
                m.config["force_epsilon"] = s_force_eps;
            }
            if (!cfg.bob_phases_rad.empty()) {
                throw UsageError("simulate: bob_phases_rad is for calibration scans only");
            }
            auto opt = sc.options();
            auto hist = tbsteer::simulate_run(cfg);
            std::ostringstream csv;
            tbsteer::io::write_histogram_csv(csv, hist);
            tbsteer::io::write_text(sc.out + ".histograms.csv", csv.str());
            m.outputs.push_back(sc.out + ".histograms.csv");

            json report{{"manifest", sc.out + ".manifest.json"}, {"histograms", tbsteer::io::to_json(hist)}};
            int code = kFailed;
            try {
                auto kl = tbsteer::estimate_klyshko(hist);
                auto s = tbsteer::estimate_steering(hist, cfg.n_settings);
                double eps = s_force_eps >= 0.0 ? s_force_eps : kl.alice;
                double eps_err = s_force_eps >= 0.0 ? 0.0 : kl.alice_error;
                report["klyshko"] = tbsteer::io::to_json(kl);
                tbsteer::VerdictOptions vo;
                vo.conservative = s_conservative;
                vo.lhs = opt;
                auto set = tbsteer::phase_encoding_set(cfg.n_settings);
                if (!(eps > 0.0)) {
                    // No conclusive events: nothing to test against.
                    report["verdict"] = {{"passed", false}, {"reason", "non-positive efficiency estimate"}};
                } else {
                    auto v = tbsteer::verdict(s, std::min(eps, 1.0), eps_err, cfg.n_settings, set, vo);
                    report["verdict"] = tbsteer::io::to_json(v);
                    code = v.passed ? kOk : kFailed;
                    std::cout << "S_n = " << tbsteer::io::fmt(s.value) << " +- " << tbsteer::io::fmt(s.std_error)
                              << ", epsilon = " << tbsteer::io::fmt(v.epsilon_hat)
                              << ", p* = " << tbsteer::io::fmt(v.p_star_at_epsilon)
                              << ", margin = " << tbsteer::io::fmt(v.margin) << " SE: "
                              << (v.passed ? "PASSED" : "FAILED") << "\n";
                }
            } catch (const tbsteer::UndefinedEstimate &e) {
                report["verdict"] = {{"passed", false}, {"reason", e.what()}};
                m.message = e.what();
            }
            tbsteer::io::write_json(sc.out + ".verdict.json", report);
            m.outputs.push_back(sc.out + ".verdict.json");
            return code;
        });
    }

    if (*cal) {
        m.command = "calibrate";
        return run_command(m, kc.out, [&] {
            tbsteer::ExperimentConfig cfg =
                k_config.empty() ? tbsteer::ExperimentConfig{} : tbsteer::io::read_config(k_config);
            if (*kseed_opt) {
                cfg.seed = k_seed;
            }
            cfg.validate();
            m.seed = cfg.seed;
            m.config = tbsteer::io::to_json(cfg);
            tbsteer::CalibrationResult r;
            try {
                r = tbsteer::calibrate_phase(cfg);
            } catch (const tbsteer::CalibrationFailure &e) {
                throw std::runtime_error(e.what());
            }
            json out{{"phase_offset", r.phase_offset},
                     {"schedule_slip", r.schedule_slip},
                     {"crossing_bias", r.crossing_bias},
                     {"delay_scan", r.delay_scan},
                     {"runs", r.runs}};
            tbsteer::io::write_json(kc.out + ".json", out);
            m.outputs = {kc.out + ".json"};
            std::cout << out.dump(2) << "\n";
            return kOk;
        });
    }
    return kUsage;
}
