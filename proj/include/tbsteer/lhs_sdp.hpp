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

// Local-hidden-state (LHS) membership for loss-counted assemblages.
//
// An assemblage {sigma_{a|k}} over outcomes a in {+, -, null} and settings
// k = 0..n-1 admits an LHS model when
//
//     sigma_{a|k} = sum_lambda D_lambda(a|k) sigma_lambda,   sigma_lambda >= 0,
//
// with lambda ranging over the 3^n deterministic response functions. Every
// question asked here (membership, critical p, critical efficiency) is
// solved as one program of the shape
//
//     maximize t  s.t.  sum_lambda D_lambda(a|k) sigma_lambda = B_{a|k} + t G_{a|k},
//
// i.e. the largest step along an affine family of assemblages that stays
// LHS. The dual of that program is a steering functional {F_{a|k}} with
// sum_k F_{lambda(k)|k} >= 0 for every lambda and sum Tr[F (B + t G)] = t* - t,
// which certifies steering for every t > t*.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tbsteer/cone_solver.hpp"
#include "tbsteer/measurements.hpp"
#include "tbsteer/parallel.hpp"
#include "tbsteer/quantum_core.hpp"

namespace tbsteer {

enum class Outcome : std::uint8_t { plus = 0, minus = 1, null = 2 };

inline constexpr std::array<Outcome, 3> kOutcomes{Outcome::plus, Outcome::minus, Outcome::null};

inline char outcome_symbol(Outcome a) {
    switch (a) {
        case Outcome::plus:
            return '+';
        case Outcome::minus:
            return '-';
        case Outcome::null:
            return '0';
    }
    return '?';
}

inline int idx(Outcome a) { return static_cast<int>(a); }

inline constexpr int kMaxStrategySettings = 12;

using StrategyCode = std::uint32_t;

inline StrategyCode pow3(int n) {
    StrategyCode r = 1;
    for (int i = 0; i < n; ++i) {
        r *= 3;
    }
    return r;
}

/// One deterministic response function: an outcome for every setting.
/// Codes are base-3 with setting 0 as the most significant digit, so code
/// order is lexicographic order with + < - < null.
struct DeterministicStrategy {
    std::vector<Outcome> responses;

    int n() const { return static_cast<int>(responses.size()); }
    Outcome operator[](int k) const { return responses[static_cast<std::size_t>(k)]; }

    StrategyCode code() const {
        StrategyCode c = 0;
        for (Outcome a : responses) {
            c = 3 * c + static_cast<StrategyCode>(a);
        }
        return c;
    }

    static DeterministicStrategy decode(StrategyCode code, int n) {
        DeterministicStrategy s;
        s.responses.resize(static_cast<std::size_t>(n));
        for (int k = n - 1; k >= 0; --k) {
            s.responses[static_cast<std::size_t>(k)] = static_cast<Outcome>(code % 3);
            code /= 3;
        }
        return s;
    }

    std::string to_string() const {
        std::string out;
        for (Outcome a : responses) {
            out.push_back(outcome_symbol(a));
        }
        return out;
    }

    bool operator==(const DeterministicStrategy &) const = default;
};

inline void check_strategy_n(int n, const char *where) {
    if (n < 1 || n > kMaxStrategySettings) {
        throw InvalidArgument(std::string(where) + ": n must lie in [1, " +
                              std::to_string(kMaxStrategySettings) + "], got " + std::to_string(n));
    }
}

inline std::vector<DeterministicStrategy> enumerate_strategies(int n) {
    check_strategy_n(n, "enumerate_strategies");
    std::vector<DeterministicStrategy> out;
    StrategyCode total = pow3(n);
    out.reserve(total);
    for (StrategyCode c = 0; c < total; ++c) {
        out.push_back(DeterministicStrategy::decode(c, n));
    }
    return out;
}

/// Pauli coordinates (s, x, y, z) of s I + x X + y Y + z Z.
using Coords = Eigen::Vector4d;

using MemberTable = std::vector<std::array<HermitianOp, 3>>;

/// Bob's subnormalized conditional states, indexed by (outcome, setting).
class Assemblage {
   public:
    Assemblage(double epsilon, MemberTable members, double tol = 1e-9)
        : epsilon_(epsilon), members_(std::move(members)) {
        validate(tol);
    }

    int n() const { return static_cast<int>(members_.size()); }
    double epsilon() const { return epsilon_; }
    const HermitianOp &member(Outcome a, int k) const {
        return members_.at(static_cast<std::size_t>(k))[static_cast<std::size_t>(idx(a))];
    }
    Coords coords(Outcome a, int k) const { return member(a, k).pauli_coords(); }
    const MemberTable &members() const { return members_; }

    HermitianOp bob_reduced() const {
        return member(Outcome::plus, 0) + member(Outcome::minus, 0) + member(Outcome::null, 0);
    }

    double probability(Outcome a, int k) const { return member(a, k).trace(); }

    /// PSD members, no-signaling, and conclusive weight epsilon on every setting.
    void validate(double tol = 1e-9) const {
        if (members_.empty()) {
            throw InvalidArgument("Assemblage: need at least one setting");
        }
        if (!(epsilon_ >= 0.0 && epsilon_ <= 1.0)) {
            throw InvalidArgument("Assemblage: epsilon must lie in [0, 1]");
        }
        HermitianOp rho = bob_reduced();
        for (int k = 0; k < n(); ++k) {
            for (Outcome a : kOutcomes) {
                const auto &m = member(a, k);
                m.require_dim(2, "Assemblage member");
                if (m.min_eigenvalue() < -tol) {
                    throw InvalidArgument("Assemblage: member (" + std::string(1, outcome_symbol(a)) +
                                          "|" + std::to_string(k) + ") is not PSD");
                }
            }
            HermitianOp sum = member(Outcome::plus, k) + member(Outcome::minus, k) +
                              member(Outcome::null, k);
            if (sum.max_abs_diff(rho) > tol) {
                throw InvalidArgument("Assemblage: no-signaling violated at setting " +
                                      std::to_string(k));
            }
            double conclusive = probability(Outcome::plus, k) + probability(Outcome::minus, k);
            if (std::abs(conclusive - epsilon_) > tol) {
                throw InvalidArgument("Assemblage: conclusive weight at setting " +
                                      std::to_string(k) + " differs from epsilon");
            }
        }
        if (std::abs(rho.trace() - 1.0) > tol) {
            throw InvalidArgument("Assemblage: Bob's reduced state is not normalized");
        }
    }

   private:
    double epsilon_;
    MemberTable members_;
};

/// Honest assemblage of the isotropic state: Alice measures the complementary
/// settings and reports a conclusive outcome with probability epsilon; a null
/// report leaves Bob with his reduced state.
inline Assemblage build_test_assemblage(const IsotropicParams &params, double epsilon,
                                        const MeasurementSet &settings) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw InvalidArgument("build_test_assemblage: epsilon must lie in [0, 1]");
    }
    HermitianOp rho = isotropic_state(params);
    MeasurementSet alice = complementary_settings(settings);
    HermitianOp rho_b = reduced_state_b(rho);
    MemberTable members;
    for (int k = 0; k < settings.n(); ++k) {
        members.push_back({epsilon * conditional_state(rho, alice[k].projector(+1)),
                           epsilon * conditional_state(rho, alice[k].projector(-1)),
                           (1.0 - epsilon) * rho_b});
    }
    return Assemblage(epsilon, std::move(members));
}

/// Weighted deterministic-strategy decomposition sigma_lambda (= q(lambda) * state).
struct LhsModel {
    int n = 0;
    std::vector<std::pair<StrategyCode, HermitianOp>> terms;

    MemberTable reconstruct() const {
        HermitianOp zero = HermitianOp(Eigen::MatrixXcd::Zero(2, 2));
        MemberTable out(static_cast<std::size_t>(n), {zero, zero, zero});
        for (const auto &[code, sigma] : terms) {
            auto s = DeterministicStrategy::decode(code, n);
            for (int k = 0; k < n; ++k) {
                auto &slot = out[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx(s[k]))];
                slot = slot + sigma;
            }
        }
        return out;
    }

    double min_eigenvalue() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto &t : terms) {
            m = std::min(m, t.second.min_eigenvalue());
        }
        return terms.empty() ? 0.0 : m;
    }

    /// Largest elementwise deviation between the reconstruction and target.
    double residual(const Assemblage &target) const {
        if (target.n() != n) {
            throw InvalidArgument("LhsModel::residual: setting count mismatch");
        }
        MemberTable rec = reconstruct();
        double worst = 0.0;
        for (int k = 0; k < n; ++k) {
            for (Outcome a : kOutcomes) {
                worst = std::max(worst, rec[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx(a))]
                                            .max_abs_diff(target.member(a, k)));
            }
        }
        return worst;
    }
};

/// Linear witness {F_{a|k}}: nonnegative on every LHS assemblage when all
/// strategy sums sum_k F_{lambda(k)|k} are PSD.
struct SteeringFunctional {
    int n = 0;
    MemberTable F;

    const HermitianOp &at(Outcome a, int k) const {
        return F.at(static_cast<std::size_t>(k))[static_cast<std::size_t>(idx(a))];
    }

    double evaluate(const Assemblage &assemblage) const {
        if (assemblage.n() != n) {
            throw InvalidArgument("SteeringFunctional: setting count mismatch");
        }
        double v = 0.0;
        for (int k = 0; k < n; ++k) {
            for (Outcome a : kOutcomes) {
                v += (at(a, k).matrix() * assemblage.member(a, k).matrix()).trace().real();
            }
        }
        return v;
    }

    static SteeringFunctional zero(int n) {
        HermitianOp z = HermitianOp(Eigen::MatrixXcd::Zero(2, 2));
        return {n, MemberTable(static_cast<std::size_t>(n), {z, z, z})};
    }
};

struct LhsDecision {
    bool feasible = false;
    std::optional<LhsModel> model;
    std::optional<SteeringFunctional> certificate;
    /// Largest t such that tau + t (sigma - tau) is LHS, tau being the
    /// product assemblage with the same marginals (capped at 2).
    double robustness = 0.0;
    double gap = 0.0;
    std::string diagnostics;
};

enum class SolveMethod { automatic, full, column_generation };
enum class LossModel { per_setting, average };

inline std::string to_string(SolveMethod m) {
    switch (m) {
        case SolveMethod::automatic:
            return "automatic";
        case SolveMethod::full:
            return "full";
        case SolveMethod::column_generation:
            return "column_generation";
    }
    return "automatic";
}

struct LhsOptions {
    /// Certificate margin and membership decision tolerance.
    double tol = 1e-8;
    SolveMethod method = SolveMethod::automatic;
    /// automatic uses the full strategy set up to this n, column generation above.
    int full_enumeration_max_n = 7;
    LossModel loss_model = LossModel::per_setting;
    /// Optimal values within this of 1 are reported as 1 with status boundary.
    double boundary_tol = 1e-7;
    /// Pricing threshold for column generation (relative to the dual scale).
    double pricing_tol = 1e-10;
    int max_generation_rounds = 60;
    cone::Settings solver{};
    unsigned threads = 0;
};

enum class BoundStatus { optimal, boundary, trivial, failed };

inline std::string to_string(BoundStatus s) {
    switch (s) {
        case BoundStatus::optimal:
            return "optimal";
        case BoundStatus::boundary:
            return "boundary";
        case BoundStatus::trivial:
            return "trivial";
        case BoundStatus::failed:
            return "failed";
    }
    return "failed";
}

enum class BoundKind { critical_p, critical_epsilon };

/// One point of a bound curve. For critical_p the solved field is p_star at
/// the given epsilon; for critical_epsilon it is epsilon at the given p_star.
struct BoundPoint {
    BoundKind kind = BoundKind::critical_p;
    int n = 0;
    SetFamily family = SetFamily::phase_encoding;
    double epsilon = 0.0;
    double p_star = 1.0;
    BoundStatus status = BoundStatus::failed;
    double gap = 0.0;
    int iterations = 0;
    std::size_t strategies_used = 0;
    std::optional<SteeringFunctional> certificate;
    std::optional<LhsModel> model;
    std::string note;

    double solved_value() const { return kind == BoundKind::critical_p ? p_star : epsilon; }
};

namespace detail {

using MemberCoords = std::vector<std::array<Coords, 3>>;

/// maximize sum_j weight_j t_j  s.t.  sum_lambda D sigma_lambda = base + sum_j t_j slope_j.
struct AffineFamily {
    int n = 0;
    MemberCoords base;
    std::vector<MemberCoords> slopes;
    std::vector<double> weights;
    std::optional<double> cap;
};

/// Row bookkeeping. Outcomes whose member is identically zero along the
/// family are disallowed (no strategy may use them); one allowed outcome per
/// setting is dropped because it is implied by the total-state rows.
struct RowLayout {
    int n = 0;
    std::vector<std::array<bool, 3>> allowed;
    std::vector<std::array<int, 3>> row;  // first row of the block, or -1
    int total_row = 0;
    int cap_row = -1;
    int rows = 0;
};

inline RowLayout make_layout(const AffineFamily &fam) {
    RowLayout L;
    L.n = fam.n;
    L.allowed.resize(static_cast<std::size_t>(fam.n));
    L.row.resize(static_cast<std::size_t>(fam.n));
    int next = 4;
    for (int k = 0; k < fam.n; ++k) {
        auto &al = L.allowed[static_cast<std::size_t>(k)];
        auto &rw = L.row[static_cast<std::size_t>(k)];
        int last = -1;
        for (int a = 0; a < 3; ++a) {
            double mag = fam.base[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)].cwiseAbs().maxCoeff();
            for (const auto &s : fam.slopes) {
                mag = std::max(mag, s[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)].cwiseAbs().maxCoeff());
            }
            al[static_cast<std::size_t>(a)] = mag > 1e-15;
            rw[static_cast<std::size_t>(a)] = -1;
            if (al[static_cast<std::size_t>(a)]) {
                last = a;
            }
        }
        if (last < 0) {
            throw InvalidArgument("LHS program: setting " + std::to_string(k) + " has no outcomes");
        }
        int dropped = al[2] ? 2 : last;
        for (int a = 0; a < 3; ++a) {
            if (al[static_cast<std::size_t>(a)] && a != dropped) {
                rw[static_cast<std::size_t>(a)] = next;
                next += 4;
            }
        }
    }
    if (fam.cap) {
        L.cap_row = next++;
    }
    L.rows = next;
    return L;
}

/// Calls visit(code, sum of per-setting vectors) for every strategy built from
/// allowed outcomes. per[k][a] is the vector contributed by outcome a at k.
template <typename Visit>
void for_each_allowed(const RowLayout &L, const std::vector<std::array<Coords, 3>> &per,
                      const Coords &offset, Visit &&visit, unsigned threads) {
    const int n = L.n;
    // Split on the first setting's outcomes for the parallel scan.
    std::vector<int> firsts;
    for (int a = 0; a < 3; ++a) {
        if (L.allowed[0][static_cast<std::size_t>(a)]) {
            firsts.push_back(a);
        }
    }
    parallel_for(
        firsts.size(),
        [&](std::size_t i) {
            int a0 = firsts[i];
            std::vector<Coords> acc(static_cast<std::size_t>(n) + 1);
            std::vector<int> digit(static_cast<std::size_t>(n), -1);
            acc[0] = offset;
            // Iterative DFS over settings 1..n-1 with incremental sums.
            auto descend = [&](auto &&self, int k, StrategyCode code) -> void {
                if (k == n) {
                    visit(code, acc[static_cast<std::size_t>(n)]);
                    return;
                }
                for (int a = 0; a < 3; ++a) {
                    if (!L.allowed[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)]) {
                        continue;
                    }
                    acc[static_cast<std::size_t>(k) + 1] =
                        acc[static_cast<std::size_t>(k)] + per[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)];
                    self(self, k + 1, 3 * code + static_cast<StrategyCode>(a));
                }
            };
            acc[1] = acc[0] + per[0][static_cast<std::size_t>(a0)];
            descend(descend, 1, static_cast<StrategyCode>(a0));
        },
        threads);
}

inline double soc_violation(const Coords &z) { return z.tail<3>().norm() - z(0); }

struct FamilySolution {
    cone::Solution sol;
    RowLayout layout;
    std::vector<StrategyCode> strategies;
    std::vector<double> t;
    int total_iterations = 0;
    int rounds = 0;
};

inline cone::Program build_program(const AffineFamily &fam, const RowLayout &L,
                                   const std::vector<StrategyCode> &strategies) {
    const int nt = static_cast<int>(fam.slopes.size());
    cone::Program prog;
    prog.num_linear = nt + (fam.cap ? 1 : 0);
    prog.num_soc = static_cast<int>(strategies.size());
    prog.A = cone::SparseColumns(L.rows);
    prog.b = Eigen::VectorXd::Zero(L.rows);
    prog.c = Eigen::VectorXd::Zero(prog.num_vars());

    auto fill_rhs = [&](const MemberCoords &mc, auto &&sink) {
        // Total state from setting 0, then each kept block.
        Coords tot = mc[0][0] + mc[0][1] + mc[0][2];
        for (int c = 0; c < 4; ++c) {
            sink(L.total_row + c, tot(c));
        }
        for (int k = 0; k < L.n; ++k) {
            for (int a = 0; a < 3; ++a) {
                int r = L.row[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)];
                if (r < 0) {
                    continue;
                }
                for (int c = 0; c < 4; ++c) {
                    sink(r + c, mc[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)](c));
                }
            }
        }
    };
    fill_rhs(fam.base, [&](int r, double v) { prog.b(r) = v; });
    for (int j = 0; j < nt; ++j) {
        std::vector<std::pair<int, double>> entries;
        fill_rhs(fam.slopes[static_cast<std::size_t>(j)], [&](int r, double v) { entries.emplace_back(r, -v); });
        if (fam.cap) {
            entries.emplace_back(L.cap_row, 1.0);
        }
        std::sort(entries.begin(), entries.end());
        for (auto [r, v] : entries) {
            prog.A.push(r, v);
        }
        prog.A.end_column();
        prog.c(j) = -fam.weights[static_cast<std::size_t>(j)];
    }
    if (fam.cap) {
        prog.A.push(L.cap_row, 1.0);
        prog.A.end_column();
        prog.b(L.cap_row) = *fam.cap;
    }
    std::vector<int> rows;
    for (StrategyCode code : strategies) {
        rows.clear();
        StrategyCode rem = code;
        for (int k = L.n - 1; k >= 0; --k) {
            int a = static_cast<int>(rem % 3);
            rem /= 3;
            int r = L.row[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)];
            if (r >= 0) {
                rows.push_back(r);
            }
        }
        std::sort(rows.begin(), rows.end());
        for (int c = 0; c < 4; ++c) {
            prog.A.push(L.total_row + c, 1.0);
            for (int r : rows) {
                prog.A.push(r + c, 1.0);
            }
            prog.A.end_column();
        }
    }
    return prog;
}

/// Dual block of each (outcome, setting) as Pauli coordinates of
/// -y_block; the slack of strategy lambda is offset + sum_k per[k][lambda_k].
inline void dual_blocks(const RowLayout &L, const Eigen::VectorXd &y, Coords &offset,
                        std::vector<std::array<Coords, 3>> &per) {
    offset = -y.segment<4>(L.total_row);
    per.assign(static_cast<std::size_t>(L.n), {Coords::Zero(), Coords::Zero(), Coords::Zero()});
    for (int k = 0; k < L.n; ++k) {
        for (int a = 0; a < 3; ++a) {
            int r = L.row[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)];
            if (r >= 0) {
                per[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] = -y.segment<4>(r);
            }
        }
    }
}

inline std::vector<StrategyCode> all_allowed(const RowLayout &L) {
    std::vector<StrategyCode> out;
    std::vector<std::array<Coords, 3>> per(static_cast<std::size_t>(L.n),
                                           {Coords::Zero(), Coords::Zero(), Coords::Zero()});
    for_each_allowed(L, per, Coords::Zero(), [&](StrategyCode c, const Coords &) { out.push_back(c); }, 1);
    std::sort(out.begin(), out.end());
    return out;
}

/// Null-free strategies, single-setting-conclusive strategies and the all-null
/// strategy, restricted to allowed outcomes.
inline std::vector<StrategyCode> seed_strategies(const RowLayout &L) {
    std::vector<StrategyCode> out;
    for (StrategyCode c : all_allowed(L)) {
        int nulls = 0;
        StrategyCode rem = c;
        for (int k = 0; k < L.n; ++k) {
            nulls += (rem % 3) == 2 ? 1 : 0;
            rem /= 3;
        }
        if (nulls == 0 || nulls >= L.n - 1) {
            out.push_back(c);
        }
    }
    return out;
}

inline cone::Solution checked_solve(const cone::Program &prog, const cone::Settings &settings) {
    cone::Solution sol = cone::solve(prog, settings);
    if (sol.status != cone::Status::optimal && sol.status != cone::Status::near_optimal) {
        throw SolverFailure("LHS program did not converge: " + sol.diagnostics());
    }
    return sol;
}

inline FamilySolution solve_family(const AffineFamily &fam, const LhsOptions &opt) {
    check_strategy_n(fam.n, "LHS program");
    FamilySolution out;
    out.layout = make_layout(fam);
    const RowLayout &L = out.layout;
    bool full = opt.method == SolveMethod::full ||
                (opt.method == SolveMethod::automatic && fam.n <= opt.full_enumeration_max_n);
    out.strategies = full ? all_allowed(L) : seed_strategies(L);

    for (int round = 0;; ++round) {
        cone::Program prog = build_program(fam, L, out.strategies);
        out.sol = checked_solve(prog, opt.solver);
        out.total_iterations += out.sol.iterations;
        out.rounds = round + 1;
        if (full) {
            break;
        }
        // Price every strategy against the current dual.
        Coords offset;
        std::vector<std::array<Coords, 3>> per;
        dual_blocks(L, out.sol.y, offset, per);
        double scale = 1.0 + out.sol.y.cwiseAbs().maxCoeff();
        double thresh = opt.pricing_tol * scale;
        std::vector<std::vector<std::pair<double, StrategyCode>>> found(3);
        std::vector<int> first_of(3, -1);
        for_each_allowed(
            L, per, offset,
            [&](StrategyCode c, const Coords &z) {
                double v = soc_violation(z);
                if (v > thresh) {
                    found[static_cast<std::size_t>(c / pow3(L.n - 1))].emplace_back(v, c);
                }
            },
            opt.threads);
        std::vector<std::pair<double, StrategyCode>> violated;
        for (auto &f : found) {
            violated.insert(violated.end(), f.begin(), f.end());
        }
        // Drop anything already present (can happen only through round-off).
        std::vector<StrategyCode> sorted = out.strategies;
        std::sort(sorted.begin(), sorted.end());
        std::erase_if(violated, [&](const auto &p) {
            return std::binary_search(sorted.begin(), sorted.end(), p.second);
        });
        if (violated.empty()) {
            break;
        }
        if (round + 1 >= opt.max_generation_rounds) {
            throw SolverFailure("column generation did not converge after " +
                                std::to_string(round + 1) + " rounds; " +
                                std::to_string(violated.size()) + " strategies still violated");
        }
        std::sort(violated.begin(), violated.end(), [](const auto &a, const auto &b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        std::size_t add = std::min<std::size_t>(violated.size(), std::max<std::size_t>(256, out.strategies.size()));
        for (std::size_t i = 0; i < add; ++i) {
            out.strategies.push_back(violated[i].second);
        }
    }
    const int nt = static_cast<int>(fam.slopes.size());
    for (int j = 0; j < nt; ++j) {
        out.t.push_back(out.sol.x(j));
    }
    return out;
}

inline LhsModel extract_model(const FamilySolution &fs, int n) {
    LhsModel model;
    model.n = n;
    const int off = fs.sol.x.size() - 4 * static_cast<int>(fs.strategies.size());
    for (std::size_t i = 0; i < fs.strategies.size(); ++i) {
        Coords c = fs.sol.x.segment<4>(off + 4 * static_cast<int>(i));
        if (c(0) > 1e-15) {
            model.terms.emplace_back(fs.strategies[i], HermitianOp::from_pauli_coords(c));
        }
    }
    return model;
}

/// Converts the dual of a single-slope family into F_{a|k}.
inline SteeringFunctional extract_certificate(const FamilySolution &fs) {
    const RowLayout &L = fs.layout;
    const int n = L.n;
    Coords offset;
    std::vector<std::array<Coords, 3>> per;
    dual_blocks(L, fs.sol.y, offset, per);
    // Coordinates pair with Hermitian matrices through Tr(F X) = <f, x> when
    // F = from_pauli_coords(f) / 2.
    auto herm = [](const Coords &c) { return 0.5 * HermitianOp::from_pauli_coords(c); };
    auto spectral = [](const Coords &c) { return 0.5 * (std::abs(c(0)) + c.tail<3>().norm()); };
    double big = spectral(offset);
    for (int k = 0; k < n; ++k) {
        double m = 0.0;
        for (int a = 0; a < 3; ++a) {
            m = std::max(m, spectral(per[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)]));
        }
        big += m;
    }
    big = 2.0 * big + 1.0;
    SteeringFunctional F;
    F.n = n;
    for (int k = 0; k < n; ++k) {
        std::array<HermitianOp, 3> row;
        for (int a = 0; a < 3; ++a) {
            Coords c = offset / n + per[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)];
            if (!L.allowed[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)]) {
                c(0) += 2.0 * big;
            }
            row[static_cast<std::size_t>(a)] = herm(c);
        }
        F.F.push_back(std::move(row));
    }
    return F;
}

inline MemberCoords to_coords(const MemberTable &t) {
    MemberCoords out;
    for (const auto &row : t) {
        out.push_back({row[0].pauli_coords(), row[1].pauli_coords(), row[2].pauli_coords()});
    }
    return out;
}

/// Members (eps/4)(I +- p u.sigma), null (1 - eps) I/2 in Pauli coordinates.
inline MemberCoords test_family_coords(const MeasurementSet &settings, double epsilon, double p) {
    MemberCoords out;
    for (const auto &m : settings.measurements()) {
        Coords plus, minus, null;
        plus << 0.25 * epsilon, 0.25 * epsilon * p * m.bloch;
        minus << 0.25 * epsilon, -0.25 * epsilon * p * m.bloch;
        null << 0.5 * (1.0 - epsilon), 0.0, 0.0, 0.0;
        out.push_back({plus, minus, null});
    }
    return out;
}

inline MemberCoords diff(const MemberCoords &a, const MemberCoords &b) {
    MemberCoords out = a;
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (int j = 0; j < 3; ++j) {
            out[k][static_cast<std::size_t>(j)] -= b[k][static_cast<std::size_t>(j)];
        }
    }
    return out;
}

}  // namespace detail

struct CertificateCheck {
    bool valid = false;
    double min_block_eigenvalue = 0.0;
    double value = 0.0;
};

/// Exhaustive check of a steering functional against an assemblage: every one
/// of the 3^n strategy sums must be PSD up to -tol, and the functional must be
/// below -tol on the assemblage.
inline CertificateCheck check_certificate(const SteeringFunctional &cert, const Assemblage &assemblage,
                                          double tol = 1e-8, unsigned threads = 0) {
    if (cert.n != assemblage.n() || static_cast<int>(cert.F.size()) != cert.n) {
        throw InvalidArgument("verify_certificate: certificate and assemblage differ in setting count");
    }
    for (const auto &row : cert.F) {
        for (const auto &f : row) {
            f.require_dim(2, "verify_certificate");
        }
    }
    check_strategy_n(cert.n, "verify_certificate");
    detail::RowLayout L;
    L.n = cert.n;
    L.allowed.assign(static_cast<std::size_t>(cert.n), {true, true, true});
    std::vector<std::array<Coords, 3>> per;
    for (const auto &row : cert.F) {
        per.push_back({row[0].pauli_coords(), row[1].pauli_coords(), row[2].pauli_coords()});
    }
    std::vector<double> worst(3, std::numeric_limits<double>::infinity());
    const StrategyCode lead = pow3(cert.n - 1);
    detail::for_each_allowed(
        L, per, Coords::Zero(),
        [&](StrategyCode c, const Coords &s) {
            // Smallest eigenvalue of s0 I + s.sigma is s0 - |s|.
            double ev = s(0) - s.tail<3>().norm();
            double &w = worst[static_cast<std::size_t>(c / lead)];
            w = std::min(w, ev);
        },
        threads);
    CertificateCheck out;
    out.min_block_eigenvalue = *std::min_element(worst.begin(), worst.end());
    out.value = cert.evaluate(assemblage);
    out.valid = out.min_block_eigenvalue >= -tol && out.value < -tol;
    return out;
}

inline bool verify_certificate(const SteeringFunctional &cert, const Assemblage &assemblage,
                               double tol = 1e-8) {
    return check_certificate(cert, assemblage, tol).valid;
}

/// Decides whether the assemblage admits an LHS model. Returns the model when
/// it does, a verified steering functional when it does not.
inline LhsDecision lhs_membership(const Assemblage &assemblage, const LhsOptions &opt = {}) {
    if (!(opt.tol > 0.0)) {
        throw InvalidArgument("lhs_membership: tol must be positive");
    }
    const int n = assemblage.n();
    check_strategy_n(n, "lhs_membership");
    HermitianOp rho_b = assemblage.bob_reduced();

    // Product assemblage with the same marginals; it is LHS with
    // sigma_lambda = prod_k p(lambda_k|k) rho_B.
    MemberTable product;
    for (int k = 0; k < n; ++k) {
        product.push_back({assemblage.probability(Outcome::plus, k) * rho_b,
                           assemblage.probability(Outcome::minus, k) * rho_b,
                           assemblage.probability(Outcome::null, k) * rho_b});
    }
    auto product_model = [&](double weight) {
        LhsModel m;
        m.n = n;
        if (weight <= 0.0) {
            return m;
        }
        for (const auto &s : enumerate_strategies(n)) {
            double q = weight;
            for (int k = 0; k < n; ++k) {
                q *= assemblage.probability(s[k], k);
            }
            if (q > 0.0) {
                m.terms.emplace_back(s.code(), q * rho_b);
            }
        }
        return m;
    };

    detail::AffineFamily fam;
    fam.n = n;
    fam.base = detail::to_coords(product);
    fam.slopes = {detail::diff(detail::to_coords(assemblage.members()), fam.base)};
    fam.weights = {1.0};
    fam.cap = 2.0;

    double slope_size = 0.0;
    for (const auto &row : fam.slopes[0]) {
        for (const auto &c : row) {
            slope_size = std::max(slope_size, c.cwiseAbs().maxCoeff());
        }
    }
    LhsDecision d;
    if (assemblage.epsilon() == 0.0 || slope_size <= 1e-14) {
        d.feasible = true;
        d.robustness = 2.0;
        d.model = product_model(1.0);
        d.diagnostics = "trivial: assemblage has product form";
        return d;
    }

    detail::FamilySolution fs = detail::solve_family(fam, opt);
    double t = fs.t[0];
    d.robustness = t;
    d.gap = fs.sol.gap;
    d.diagnostics = fs.sol.diagnostics();
    if (t >= 1.0 - opt.tol) {
        d.feasible = true;
        LhsModel raw = detail::extract_model(fs, n);
        if (t > 1.0) {
            // sigma = (1/t) sigma(t) + (1 - 1/t) tau.
            LhsModel m = product_model(1.0 - 1.0 / t);
            for (auto &[code, sig] : raw.terms) {
                m.terms.emplace_back(code, (1.0 / t) * sig);
            }
            d.model = std::move(m);
        } else {
            d.model = std::move(raw);
        }
        return d;
    }
    d.feasible = false;
    d.certificate = detail::extract_certificate(fs);
    auto check = check_certificate(*d.certificate, assemblage, opt.tol, opt.threads);
    if (!check.valid) {
        throw SolverFailure("lhs_membership: dual certificate failed verification (min eigenvalue " +
                            std::to_string(check.min_block_eigenvalue) + ", value " +
                            std::to_string(check.value) + "); " + fs.sol.diagnostics());
    }
    return d;
}

/// max over sign vectors of |sum_k a_k u_k| / n: the largest S_n a
/// deterministic preset-state strategy reaches without losses.
inline double lossless_lhs_bound(const MeasurementSet &settings) {
    const int n = settings.n();
    if (n > 20) {
        throw InvalidArgument("lossless_lhs_bound: n > 20 is too large for enumeration");
    }
    auto u = settings.bloch_vectors();
    double best = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        Vector3 s = Vector3::Zero();
        for (int k = 0; k < n; ++k) {
            s += ((mask >> k) & 1u) ? -u[static_cast<std::size_t>(k)] : u[static_cast<std::size_t>(k)];
        }
        best = std::max(best, s.norm());
    }
    return best / n;
}

namespace detail {

inline double critical_epsilon_average(const MeasurementSet &settings, double p,
                                       const LhsOptions &opt, FamilySolution *keep = nullptr) {
    const int n = settings.n();
    AffineFamily fam;
    fam.n = n;
    fam.base = test_family_coords(settings, 0.0, p);
    MemberCoords full = test_family_coords(settings, 1.0, p);
    MemberCoords slope_all = diff(full, fam.base);
    for (int k = 0; k < n; ++k) {
        MemberCoords s(static_cast<std::size_t>(n), {Coords::Zero(), Coords::Zero(), Coords::Zero()});
        s[static_cast<std::size_t>(k)] = slope_all[static_cast<std::size_t>(k)];
        fam.slopes.push_back(std::move(s));
        fam.weights.push_back(1.0 / n);
    }
    FamilySolution fs = solve_family(fam, opt);
    double mean = 0.0;
    for (double t : fs.t) {
        mean += t / n;
    }
    if (keep) {
        *keep = std::move(fs);
    }
    return mean;
}

inline void check_epsilon_arg(double epsilon, const char *where) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw InvalidArgument(std::string(where) + ": epsilon must lie in [0, 1]");
    }
}

}  // namespace detail

/// Largest p at which the loss-counted isotropic assemblage stays LHS.
/// Above it, conclusive efficiency epsilon certifies steering.
inline BoundPoint critical_p(const MeasurementSet &settings, double epsilon, const LhsOptions &opt = {}) {
    detail::check_epsilon_arg(epsilon, "critical_p");
    const int n = settings.n();
    check_strategy_n(n, "critical_p");
    BoundPoint bp;
    bp.kind = BoundKind::critical_p;
    bp.n = n;
    bp.family = settings.family();
    bp.epsilon = epsilon;
    if (epsilon == 0.0) {
        bp.p_star = 1.0;
        bp.status = BoundStatus::trivial;
        bp.note = "all events discarded";
        return bp;
    }

    if (opt.loss_model == LossModel::average) {
        // Critical efficiency is non-increasing in p; bisect on it.
        double lo = 0.0, hi = 1.0;
        if (detail::critical_epsilon_average(settings, 1.0, opt) >= epsilon - opt.boundary_tol) {
            bp.p_star = 1.0;
            bp.status = BoundStatus::boundary;
            bp.note = "average loss model";
            return bp;
        }
        while (hi - lo > 1e-7) {
            double mid = 0.5 * (lo + hi);
            (detail::critical_epsilon_average(settings, mid, opt) >= epsilon ? lo : hi) = mid;
        }
        bp.p_star = 0.5 * (lo + hi);
        bp.status = BoundStatus::optimal;
        bp.gap = hi - lo;
        bp.note = "average loss model (bisection)";
        return bp;
    }

    detail::AffineFamily fam;
    fam.n = n;
    fam.base = detail::test_family_coords(settings, epsilon, 0.0);
    fam.slopes = {detail::diff(detail::test_family_coords(settings, epsilon, 1.0), fam.base)};
    fam.weights = {1.0};
    detail::FamilySolution fs = detail::solve_family(fam, opt);
    bp.gap = fs.sol.gap;
    bp.iterations = fs.total_iterations;
    bp.strategies_used = fs.strategies.size();
    bp.model = detail::extract_model(fs, n);
    double t = fs.t[0];
    if (t >= 1.0 - opt.boundary_tol) {
        bp.p_star = 1.0;
        bp.status = BoundStatus::boundary;
        return bp;
    }
    bp.p_star = std::max(0.0, t);
    bp.status = BoundStatus::optimal;
    bp.certificate = detail::extract_certificate(fs);
    return bp;
}

/// Largest conclusive efficiency at which the isotropic assemblage with
/// fraction p stays LHS. Stored in the epsilon field; p_star holds p.
inline BoundPoint critical_epsilon(const MeasurementSet &settings, double p, const LhsOptions &opt = {}) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidArgument("critical_epsilon: p must lie in [0, 1]");
    }
    const int n = settings.n();
    check_strategy_n(n, "critical_epsilon");
    BoundPoint bp;
    bp.kind = BoundKind::critical_epsilon;
    bp.n = n;
    bp.family = settings.family();
    bp.p_star = p;
    if (p == 0.0) {
        bp.epsilon = 1.0;
        bp.status = BoundStatus::trivial;
        bp.note = "white noise";
        return bp;
    }
    double t = 0.0;
    detail::FamilySolution fs;
    if (opt.loss_model == LossModel::average) {
        t = detail::critical_epsilon_average(settings, p, opt, &fs);
        bp.note = "average loss model";
    } else {
        detail::AffineFamily fam;
        fam.n = n;
        fam.base = detail::test_family_coords(settings, 0.0, p);
        fam.slopes = {detail::diff(detail::test_family_coords(settings, 1.0, p), fam.base)};
        fam.weights = {1.0};
        fs = detail::solve_family(fam, opt);
        t = fs.t[0];
    }
    bp.gap = fs.sol.gap;
    bp.iterations = fs.total_iterations;
    bp.strategies_used = fs.strategies.size();
    bp.model = detail::extract_model(fs, n);
    if (t >= 1.0 - opt.boundary_tol) {
        bp.epsilon = 1.0;
        bp.status = BoundStatus::boundary;
        return bp;
    }
    bp.epsilon = std::max(0.0, t);
    bp.status = BoundStatus::optimal;
    if (opt.loss_model == LossModel::per_setting) {
        bp.certificate = detail::extract_certificate(fs);
    }
    return bp;
}

/// True when successive solved p_star values never rise by more than tol.
inline bool is_non_increasing(const std::vector<BoundPoint> &pts, double tol = 1e-6) {
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].status == BoundStatus::failed || pts[i - 1].status == BoundStatus::failed) {
            continue;
        }
        if (pts[i].p_star > pts[i - 1].p_star + tol) {
            return false;
        }
    }
    return true;
}

/// critical_p over an ascending epsilon grid. Points are independent and run
/// concurrently; a failing point is marked failed without aborting the sweep.
inline std::vector<BoundPoint> bound_curve(const MeasurementSet &settings, const std::vector<double> &epsilons,
                                           const LhsOptions &opt = {}) {
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0 && epsilons[i] <= 1.0)) {
            throw InvalidArgument("bound_curve: grid values must lie in (0, 1]");
        }
        if (i > 0 && epsilons[i] < epsilons[i - 1]) {
            throw InvalidArgument("bound_curve: grid must be sorted ascending");
        }
    }
    std::vector<BoundPoint> out(epsilons.size());
    LhsOptions inner = opt;
    inner.threads = 1;
    parallel_for(
        epsilons.size(),
        [&](std::size_t i) {
            try {
                out[i] = critical_p(settings, epsilons[i], inner);
            } catch (const SolverFailure &e) {
                BoundPoint bp;
                bp.n = settings.n();
                bp.family = settings.family();
                bp.epsilon = epsilons[i];
                bp.p_star = std::numeric_limits<double>::quiet_NaN();
                bp.status = BoundStatus::failed;
                bp.note = e.what();
                out[i] = std::move(bp);
            }
        },
        opt.threads);
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].status != BoundStatus::failed && out[i - 1].status != BoundStatus::failed &&
            out[i].p_star > out[i - 1].p_star + 1e-6) {
            out[i].status = BoundStatus::failed;
            out[i].note = "p_star increased along the grid";
        }
    }
    return out;
}

}  // namespace tbsteer
