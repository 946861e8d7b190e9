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

// Primal-dual interior-point solver for
//
//     minimize  c'x   subject to  A x = b,  x in K,
//     K = R_+^l  x  Q^4 x ... x Q^4,
//
// where Q^4 = {(x0, x1, x2, x3) : x0 >= |(x1, x2, x3)|}. A 2x2 Hermitian matrix
// s I + v.sigma is PSD exactly when (s, v) lies in Q^4, so this is a
// semidefinite program over 2x2 blocks written in Pauli coordinates.
//
// Mehrotra predictor-corrector with Nesterov-Todd scaling. The normal matrix
// A W^-2 A' is assembled cone by cone from a column-sparse A, so the cost per
// iteration is linear in the number of cones.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tbsteer/error.hpp"

namespace tbsteer::cone {

/// Column-compressed sparse matrix built column by column.
class SparseColumns {
   public:
    explicit SparseColumns(int rows = 0) : rows_(rows) { ptr_.push_back(0); }

    void push(int row, double value) {
        if (value != 0.0) {
            idx_.push_back(row);
            val_.push_back(value);
        }
    }
    void end_column() { ptr_.push_back(static_cast<int>(idx_.size())); }

    int rows() const { return rows_; }
    int cols() const { return static_cast<int>(ptr_.size()) - 1; }
    int begin(int col) const { return ptr_[col]; }
    int end(int col) const { return ptr_[col + 1]; }
    int row(int k) const { return idx_[k]; }
    double value(int k) const { return val_[k]; }

    /// y += alpha * A x
    void gemv(const Eigen::VectorXd &x, Eigen::VectorXd &y, double alpha = 1.0) const {
        for (int j = 0; j < cols(); ++j) {
            double xj = alpha * x(j);
            if (xj == 0.0) {
                continue;
            }
            for (int k = ptr_[j]; k < ptr_[j + 1]; ++k) {
                y(idx_[k]) += val_[k] * xj;
            }
        }
    }

    /// x += alpha * A' y
    void gemv_t(const Eigen::VectorXd &y, Eigen::VectorXd &x, double alpha = 1.0) const {
        for (int j = 0; j < cols(); ++j) {
            double acc = 0.0;
            for (int k = ptr_[j]; k < ptr_[j + 1]; ++k) {
                acc += val_[k] * y(idx_[k]);
            }
            x(j) += alpha * acc;
        }
    }

   private:
    int rows_;
    std::vector<int> ptr_;
    std::vector<int> idx_;
    std::vector<double> val_;
};

struct Program {
    int num_linear = 0;
    int num_soc = 0;
    SparseColumns A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;

    int num_vars() const { return num_linear + 4 * num_soc; }
    int num_rows() const { return A.rows(); }
};

struct Settings {
    double feas_tol = 1e-10;
    double gap_tol = 1e-10;
    /// When progress stalls (factorization breakdown or rising residuals) a
    /// point meeting these looser bounds is returned as near_optimal.
    double fallback_tol = 1e-7;
    int max_iterations = 200;
    double step_fraction = 0.98;
    bool verbose = false;
};

enum class Status { optimal, near_optimal, max_iterations, numerical_error };

inline std::string to_string(Status s) {
    switch (s) {
        case Status::optimal:
            return "optimal";
        case Status::near_optimal:
            return "near_optimal";
        case Status::max_iterations:
            return "max_iterations";
        case Status::numerical_error:
            return "numerical_error";
    }
    return "unknown";
}

struct Solution {
    Status status = Status::numerical_error;
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;

    std::string diagnostics() const {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "status=%s iterations=%d pobj=%.12g dobj=%.12g gap=%.3g pres=%.3g dres=%.3g",
                      to_string(status).c_str(), iterations, primal_objective, dual_objective, gap,
                      primal_residual, dual_residual);
        return buf;
    }
};

namespace detail {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

inline double jnorm2(const Vec4 &v) { return v(0) * v(0) - v.tail<3>().squaredNorm(); }

/// Nesterov-Todd scaling of one second-order cone: W x = W^-1 z = lambda.
struct SocScaling {
    Mat4 W;
    Mat4 Winv;
    Vec4 lambda;
};

inline SocScaling nt_scaling(const Vec4 &x, const Vec4 &z) {
    const Mat4 J = Vec4(1, -1, -1, -1).asDiagonal();
    double xn = std::sqrt(std::max(jnorm2(x), std::numeric_limits<double>::min()));
    double zn = std::sqrt(std::max(jnorm2(z), std::numeric_limits<double>::min()));
    Vec4 xb = x / xn;
    Vec4 zb = z / zn;
    double gamma = std::sqrt(std::max(0.5 * (1.0 + xb.dot(zb)), 0.0));
    Vec4 wb = (J * xb + zb) / (2.0 * gamma);
    Vec4 e(1, 0, 0, 0);
    Vec4 v = (wb + e) / std::sqrt(2.0 * (wb(0) + 1.0));
    double beta = std::sqrt(zn / xn);
    SocScaling s;
    s.W = beta * (2.0 * v * v.transpose() - J);
    s.Winv = (1.0 / beta) * (2.0 * J * v * v.transpose() * J - J);
    s.lambda = s.W * x;
    return s;
}

/// Jordan product u o v.
inline Vec4 jprod(const Vec4 &u, const Vec4 &v) {
    Vec4 r;
    r(0) = u.dot(v);
    r.tail<3>() = u(0) * v.tail<3>() + v(0) * u.tail<3>();
    return r;
}

/// Solves lambda o u = r for u.
inline Vec4 jdiv(const Vec4 &lambda, const Vec4 &r) {
    double det = jnorm2(lambda);
    Vec4 u;
    u(0) = (lambda(0) * r(0) - lambda.tail<3>().dot(r.tail<3>())) / det;
    u.tail<3>() = (r.tail<3>() - u(0) * lambda.tail<3>()) / lambda(0);
    return u;
}

/// Largest alpha with p + alpha d in Q^4 (infinity if unbounded), p interior.
inline double soc_max_step(const Vec4 &p, const Vec4 &d) {
    double a = jnorm2(d);
    double b = 2.0 * (p(0) * d(0) - p.tail<3>().dot(d.tail<3>()));
    double c = jnorm2(p);
    const double inf = std::numeric_limits<double>::infinity();
    // The first coordinate must stay nonnegative; this also covers the
    // double-root case where round-off pushes the discriminant below zero.
    double best = d(0) < 0.0 ? -p(0) / d(0) : inf;
    double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
    if (std::abs(a) <= 1e-15 * scale) {
        return b < 0.0 ? std::min(best, -c / b) : best;
    }
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) {
        return best;
    }
    double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    for (double r : {q / a, q != 0.0 ? c / q : inf}) {
        if (r > 0.0 && r < best) {
            best = r;
        }
    }
    return best;
}

}  // namespace detail

/// Solves the program. Never returns a non-optimal solution silently: the
/// status field says how the run ended and diagnostics() summarizes it.
inline Solution solve(const Program &prog, const Settings &settings = {}) {
    using detail::Mat4;
    using detail::Vec4;

    const int m = prog.num_rows();
    const int nl = prog.num_linear;
    const int ns = prog.num_soc;
    const int nv = prog.num_vars();
    if (prog.A.cols() != nv || prog.b.size() != m || prog.c.size() != nv) {
        throw InvalidArgument("cone::solve: inconsistent program dimensions");
    }
    const double nu = nl + ns;
    const double bnorm = prog.b.norm();
    const double cnorm = prog.c.norm();
    const auto &A = prog.A;

    // Scaling state: lp_w holds the diagonal of W^-1 = sqrt(x/z); SOC cones store W, W^-1.
    Eigen::VectorXd lp_w(nl);
    std::vector<detail::SocScaling> soc(ns);
    Eigen::VectorXd lambda(nv);

    auto soc_block = [&](const Eigen::VectorXd &v, int i) -> Vec4 { return v.segment<4>(nl + 4 * i); };

    auto assemble_normal = [&](bool identity) {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
        for (int j = 0; j < nl; ++j) {
            double h = identity ? 1.0 : lp_w(j) * lp_w(j);
            for (int p = A.begin(j); p < A.end(j); ++p) {
                for (int q = A.begin(j); q < A.end(j); ++q) {
                    M(A.row(p), A.row(q)) += h * A.value(p) * A.value(q);
                }
            }
        }
        for (int i = 0; i < ns; ++i) {
            Mat4 H = identity ? Mat4(Mat4::Identity()) : Mat4(soc[i].Winv * soc[i].Winv);
            int base = nl + 4 * i;
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) {
                    double h = H(a, b);
                    if (h == 0.0) {
                        continue;
                    }
                    for (int p = A.begin(base + a); p < A.end(base + a); ++p) {
                        double hv = h * A.value(p);
                        for (int q = A.begin(base + b); q < A.end(base + b); ++q) {
                            M(A.row(p), A.row(q)) += hv * A.value(q);
                        }
                    }
                }
            }
        }
        return M;
    };

    // Cholesky with a growing diagonal shift when M is numerically singular.
    auto factor = [&](Eigen::MatrixXd M) {
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        double scale = std::max(1.0, M.diagonal().maxCoeff());
        double reg = 1e-15 * scale;
        while (llt.info() != Eigen::Success && reg < 1e-6 * scale) {
            M.diagonal().array() += reg;
            llt.compute(M);
            reg *= 10.0;
        }
        return llt;
    };

    // Blockwise product with W (power 1), W^-1 (power -1) or W^-2 (power -2).
    auto apply = [&](const Eigen::VectorXd &v, int power) {
        Eigen::VectorXd out(nv);
        for (int j = 0; j < nl; ++j) {
            double winv = lp_w(j);
            out(j) = power == -1 ? winv * v(j) : power == 1 ? v(j) / winv : winv * winv * v(j);
        }
        for (int i = 0; i < ns; ++i) {
            Vec4 blk = soc_block(v, i);
            Vec4 r = power == -1  ? Vec4(soc[i].Winv * blk)
                     : power == 1 ? Vec4(soc[i].W * blk)
                                  : Vec4(soc[i].Winv * (soc[i].Winv * blk));
            out.segment<4>(nl + 4 * i) = r;
        }
        return out;
    };

    // Initial point: least-norm x and least-squares z, shifted into the cone.
    Eigen::VectorXd x(nv), y = Eigen::VectorXd::Zero(m), z(nv);
    {
        auto llt = factor(assemble_normal(true));
        Eigen::VectorXd t = llt.solve(prog.b);
        x.setZero();
        A.gemv_t(t, x);
        Eigen::VectorXd Ac = Eigen::VectorXd::Zero(m);
        A.gemv(prog.c, Ac);
        y = llt.solve(Ac);
        z = prog.c;
        A.gemv_t(y, z, -1.0);
        auto shift = [&](Eigen::VectorXd &v) {
            double worst = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < nl; ++j) {
                worst = std::max(worst, -v(j));
            }
            for (int i = 0; i < ns; ++i) {
                Vec4 blk = soc_block(v, i);
                worst = std::max(worst, blk.tail<3>().norm() - blk(0));
            }
            double s = 1.0 + std::max(0.0, worst);
            v.head(nl).array() += s;
            for (int i = 0; i < ns; ++i) {
                v(nl + 4 * i) += s;
            }
        };
        shift(x);
        shift(z);
    }

    Solution sol;
    Eigen::VectorXd rp(m), rd(nv);
    Eigen::VectorXd best_x, best_y, best_z;
    double best_merit = std::numeric_limits<double>::infinity();
    Solution best;
    for (int iter = 0; iter <= settings.max_iterations; ++iter) {
        rp = prog.b;
        A.gemv(x, rp, -1.0);
        rd = prog.c - z;
        A.gemv_t(y, rd, -1.0);
        double pobj = prog.c.dot(x);
        double dobj = prog.b.dot(y);
        double xz = x.dot(z);
        double mu = xz / nu;

        sol.iterations = iter;
        sol.primal_objective = pobj;
        sol.dual_objective = dobj;
        sol.gap = std::max(xz, std::abs(pobj - dobj));
        sol.primal_residual = rp.norm() / (1.0 + bnorm);
        sol.dual_residual = rd.norm() / (1.0 + cnorm);
        if (settings.verbose) {
            std::fprintf(stderr, "%3d  pobj=% .10e dobj=% .10e xz=%.2e pres=%.2e dres=%.2e\n", iter,
                         pobj, dobj, xz, sol.primal_residual, sol.dual_residual);
        }
        if (!std::isfinite(sol.gap) || !std::isfinite(sol.primal_residual) ||
            !std::isfinite(sol.dual_residual)) {
            sol.status = Status::numerical_error;
            break;
        }
        if (sol.primal_residual <= settings.feas_tol && sol.dual_residual <= settings.feas_tol &&
            sol.gap <= settings.gap_tol * (1.0 + std::abs(pobj))) {
            sol.status = Status::optimal;
            break;
        }
        double merit = std::max({sol.primal_residual, sol.dual_residual,
                                 sol.gap / (1.0 + std::abs(pobj))});
        if (merit < best_merit) {
            best_merit = merit;
            best = sol;
            best_x = x;
            best_y = y;
            best_z = z;
        } else if (merit > 100.0 * best_merit && best_merit <= settings.fallback_tol) {
            break;  // diverging from an acceptable point
        }
        if (iter == settings.max_iterations) {
            sol.status = Status::max_iterations;
            break;
        }

        for (int j = 0; j < nl; ++j) {
            lp_w(j) = std::sqrt(x(j) / z(j));
            lambda(j) = std::sqrt(x(j) * z(j));
        }
        for (int i = 0; i < ns; ++i) {
            soc[i] = detail::nt_scaling(soc_block(x, i), soc_block(z, i));
            lambda.segment<4>(nl + 4 * i) = soc[i].lambda;
        }
        Eigen::MatrixXd M = assemble_normal(false);
        auto llt = factor(M);
        if (llt.info() != Eigen::Success) {
            sol.status = Status::numerical_error;
            break;
        }
        auto normal_solve = [&](const Eigen::VectorXd &rhs) {
            Eigen::VectorXd sol_dy = llt.solve(rhs);
            for (int r = 0; r < 2; ++r) {
                sol_dy += llt.solve(rhs - M * sol_dy);
            }
            return sol_dy;
        };

        // Search direction for complementarity target rc (lambda o (W dx + W^-1 dz) = rc).
        auto direction = [&](const Eigen::VectorXd &rc, Eigen::VectorXd &dx, Eigen::VectorXd &dy,
                             Eigen::VectorXd &dz) {
            Eigen::VectorXd q(nv);
            for (int j = 0; j < nl; ++j) {
                q(j) = rc(j) / lambda(j);
            }
            for (int i = 0; i < ns; ++i) {
                q.segment<4>(nl + 4 * i) =
                    detail::jdiv(lambda.segment<4>(nl + 4 * i), rc.segment<4>(nl + 4 * i));
            }
            Eigen::VectorXd winv_q = apply(q, -1);
            Eigen::VectorXd w2_rd = apply(rd, -2);
            Eigen::VectorXd rhs = rp;
            A.gemv(winv_q, rhs, -1.0);
            A.gemv(w2_rd, rhs, 1.0);
            dy = normal_solve(rhs);
            dz = rd;
            A.gemv_t(dy, dz, -1.0);
            dx = winv_q - apply(dz, -2);
        };

        auto max_step = [&](const Eigen::VectorXd &dx, const Eigen::VectorXd &dz, double &ap,
                            double &ad) {
            ap = ad = std::numeric_limits<double>::infinity();
            for (int j = 0; j < nl; ++j) {
                if (dx(j) < 0) {
                    ap = std::min(ap, -x(j) / dx(j));
                }
                if (dz(j) < 0) {
                    ad = std::min(ad, -z(j) / dz(j));
                }
            }
            for (int i = 0; i < ns; ++i) {
                const Vec4 l = lambda.segment<4>(nl + 4 * i);
                Vec4 sdx = soc[i].W * soc_block(dx, i);
                Vec4 sdz = soc[i].Winv * soc_block(dz, i);
                ap = std::min(ap, detail::soc_max_step(l, sdx));
                ad = std::min(ad, detail::soc_max_step(l, sdz));
            }
        };

        // Predictor.
        Eigen::VectorXd lsq(nv);
        for (int j = 0; j < nl; ++j) {
            lsq(j) = lambda(j) * lambda(j);
        }
        for (int i = 0; i < ns; ++i) {
            Vec4 l = lambda.segment<4>(nl + 4 * i);
            lsq.segment<4>(nl + 4 * i) = detail::jprod(l, l);
        }
        Eigen::VectorXd dxa, dya, dza;
        direction(-lsq, dxa, dya, dza);
        double ap, ad;
        max_step(dxa, dza, ap, ad);
        ap = std::min(1.0, ap);
        ad = std::min(1.0, ad);
        double mu_aff = (x + ap * dxa).dot(z + ad * dza) / nu;
        double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

        // Corrector.
        Eigen::VectorXd rc = -lsq;
        Eigen::VectorXd wdx = apply(dxa, 1);
        Eigen::VectorXd wdz = apply(dza, -1);
        for (int j = 0; j < nl; ++j) {
            rc(j) += sigma * mu - wdx(j) * wdz(j);
        }
        for (int i = 0; i < ns; ++i) {
            Vec4 corr = detail::jprod(wdx.segment<4>(nl + 4 * i), wdz.segment<4>(nl + 4 * i));
            rc.segment<4>(nl + 4 * i) -= corr;
            rc(nl + 4 * i) += sigma * mu;
        }
        Eigen::VectorXd dx, dy, dz;
        direction(rc, dx, dy, dz);
        max_step(dx, dz, ap, ad);
        ap = std::min(1.0, settings.step_fraction * ap);
        ad = std::min(1.0, settings.step_fraction * ad);
        x += ap * dx;
        y += ad * dy;
        z += ad * dz;
    }
    if (sol.status != Status::optimal && best_merit <= settings.fallback_tol) {
        best.status = Status::near_optimal;
        best.x = std::move(best_x);
        best.y = std::move(best_y);
        best.z = std::move(best_z);
        return best;
    }
    sol.x = std::move(x);
    sol.y = std::move(y);
    sol.z = std::move(z);
    return sol;
}

}  // namespace tbsteer::cone
