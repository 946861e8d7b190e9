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

// Two-qubit algebra for the isotropic-state steering test.
//
// Conventions used throughout the library:
//   * |0> is the early time bin, |1> the late one; sigma_Z is the time basis.
//   * In every two-qubit operator Alice's qubit is the first tensor factor,
//     i.e. rho acts on H_A (x) H_B and A (x) B is kron(A, B).

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tbsteer/error.hpp"

namespace tbsteer {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;
using Vector3 = Eigen::Vector3d;

inline constexpr double kAlgebraTol = 1e-10;

/// Dense Hermitian operator on one qubit (dim 2) or two qubits (dim 4).
class HermitianOp {
   public:
    HermitianOp() : m_(Eigen::MatrixXcd::Zero(2, 2)) {}

    /// Validates the dimension and hermiticity (within tol, elementwise).
    explicit HermitianOp(Eigen::MatrixXcd m, double tol = 1e-12) : m_(std::move(m)) {
        if (m_.rows() != m_.cols() || (m_.rows() != 2 && m_.rows() != 4)) {
            throw InvalidArgument("HermitianOp: dimension must be 2 or 4, got " +
                                  std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()));
        }
        for (Eigen::Index i = 0; i < m_.rows(); ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                if (std::abs(m_(i, j) - std::conj(m_(j, i))) > tol) {
                    throw InvalidArgument("HermitianOp: matrix is not Hermitian");
                }
            }
        }
        // Symmetrize so later algebra sees an exactly Hermitian matrix.
        Eigen::MatrixXcd h = 0.5 * (m_ + m_.adjoint());
        m_ = std::move(h);
    }

    static HermitianOp identity(int dim) {
        return HermitianOp(Eigen::MatrixXcd::Identity(dim, dim));
    }

    int dim() const { return static_cast<int>(m_.rows()); }
    const Eigen::MatrixXcd &matrix() const { return m_; }
    Complex operator()(int i, int j) const { return m_(i, j); }

    double trace() const { return m_.trace().real(); }

    /// Ascending real eigenvalues.
    Eigen::VectorXd eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    double min_eigenvalue() const { return eigenvalues()(0); }

    bool is_psd(double tol = 1e-12) const { return min_eigenvalue() >= -tol; }

    /// Coordinates (s, x, y, z) with op = s*I + x*X + y*Y + z*Z. Qubit only.
    Eigen::Vector4d pauli_coords() const {
        require_dim(2, "pauli_coords");
        return {0.5 * (m_(0, 0) + m_(1, 1)).real(), m_(1, 0).real(), m_(1, 0).imag(),
                0.5 * (m_(0, 0) - m_(1, 1)).real()};
    }

    static HermitianOp from_pauli_coords(const Eigen::Vector4d &c) {
        Eigen::MatrixXcd m(2, 2);
        m(0, 0) = c(0) + c(3);
        m(1, 1) = c(0) - c(3);
        m(0, 1) = Complex(c(1), -c(2));
        m(1, 0) = Complex(c(1), c(2));
        return HermitianOp(std::move(m));
    }

    HermitianOp operator+(const HermitianOp &o) const {
        check_same(o);
        return HermitianOp(Eigen::MatrixXcd(m_ + o.m_));
    }
    HermitianOp operator-(const HermitianOp &o) const {
        check_same(o);
        return HermitianOp(Eigen::MatrixXcd(m_ - o.m_));
    }
    HermitianOp operator*(double a) const { return HermitianOp(Eigen::MatrixXcd(a * m_)); }
    friend HermitianOp operator*(double a, const HermitianOp &h) { return h * a; }

    double max_abs_diff(const HermitianOp &o) const {
        check_same(o);
        return (m_ - o.m_).cwiseAbs().maxCoeff();
    }

    void require_dim(int d, const char *what) const {
        if (dim() != d) {
            throw InvalidArgument(std::string(what) + ": expected dimension " + std::to_string(d) +
                                  ", got " + std::to_string(dim()));
        }
    }

   private:
    void check_same(const HermitianOp &o) const {
        if (dim() != o.dim()) {
            throw InvalidArgument("HermitianOp: dimension mismatch");
        }
    }

    Eigen::MatrixXcd m_;
};

namespace pauli {

inline HermitianOp I() { return HermitianOp::identity(2); }
inline HermitianOp X() { return HermitianOp::from_pauli_coords({0, 1, 0, 0}); }
inline HermitianOp Y() { return HermitianOp::from_pauli_coords({0, 0, 1, 0}); }
inline HermitianOp Z() { return HermitianOp::from_pauli_coords({0, 0, 0, 1}); }

}  // namespace pauli

/// Observable n.sigma for a Bloch direction n (eigenvalues +-|n|).
inline HermitianOp bloch_observable(const Vector3 &n) {
    return HermitianOp::from_pauli_coords({0.0, n(0), n(1), n(2)});
}

/// Projector (I + a n.sigma)/2 onto the a = +-1 eigenspace of n.sigma, |n| = 1.
inline HermitianOp bloch_projector(const Vector3 &n, int sign) {
    double a = sign >= 0 ? 1.0 : -1.0;
    return HermitianOp::from_pauli_coords({0.5, 0.5 * a * n(0), 0.5 * a * n(1), 0.5 * a * n(2)});
}

inline HermitianOp kron(const HermitianOp &a, const HermitianOp &b) {
    a.require_dim(2, "kron");
    b.require_dim(2, "kron");
    Eigen::MatrixXcd out(4, 4);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            out.block(2 * i, 2 * j, 2, 2) = a(i, j) * b.matrix();
        }
    }
    return HermitianOp(std::move(out));
}

/// Equatorial observable cos(theta) X + sin(theta) Y: the AMZI measurement at
/// differential phase theta.
inline HermitianOp sigma_theta(double theta) {
    if (!std::isfinite(theta)) {
        throw InvalidArgument("sigma_theta: theta must be finite");
    }
    return HermitianOp::from_pauli_coords({0.0, std::cos(theta), std::sin(theta), 0.0});
}

/// Entangled fraction p and relative phase alpha of the state family
/// p |Psi(alpha)><Psi(alpha)| + (1 - p) I/4, |Psi(alpha)> = (|00> + e^{i alpha}|11>)/sqrt(2).
struct IsotropicParams {
    double p = 1.0;
    double alpha = 0.0;

    void validate() const {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw InvalidArgument("IsotropicParams: p must lie in [0, 1], got " + std::to_string(p));
        }
        if (!(alpha >= 0.0 && alpha <= std::numbers::pi)) {
            throw InvalidArgument("IsotropicParams: alpha must lie in [0, pi], got " +
                                  std::to_string(alpha));
        }
    }
};

inline HermitianOp isotropic_state(const IsotropicParams &params) {
    params.validate();
    Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
    psi(0) = 1.0 / std::numbers::sqrt2;
    psi(3) = std::polar(1.0 / std::numbers::sqrt2, params.alpha);
    Eigen::MatrixXcd rho = params.p * (psi * psi.adjoint());
    rho += (1.0 - params.p) * 0.25 * Eigen::MatrixXcd::Identity(4, 4);
    return HermitianOp(std::move(rho));
}

/// Tr[rho (obs_a (x) obs_b)].
inline double correlation(const HermitianOp &rho, const HermitianOp &obs_a, const HermitianOp &obs_b) {
    if (rho.dim() != 4 || obs_a.dim() != 2 || obs_b.dim() != 2) {
        throw InvalidArgument("correlation: need a 4x4 state and two 2x2 observables");
    }
    Complex v = (rho.matrix() * kron(obs_a, obs_b).matrix()).trace();
    return v.real();
}

/// Bob's subnormalized state Tr_A[(projector_a (x) I) rho] for one outcome of Alice.
inline HermitianOp conditional_state(const HermitianOp &rho, const HermitianOp &projector_a,
                                     double tol = kAlgebraTol) {
    rho.require_dim(4, "conditional_state(rho)");
    projector_a.require_dim(2, "conditional_state(projector)");
    const auto &P = projector_a.matrix();
    if ((P * P - P).cwiseAbs().maxCoeff() > tol) {
        throw InvalidArgument("conditional_state: projector is not idempotent");
    }
    Eigen::MatrixXcd weighted = kron(projector_a, pauli::I()).matrix() * rho.matrix();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(2, 2);
    for (int i = 0; i < 2; ++i) {
        out += weighted.block(2 * i, 2 * i, 2, 2);
    }
    return HermitianOp(std::move(out), 1e-10);
}

/// Bob's reduced state Tr_A[rho].
inline HermitianOp reduced_state_b(const HermitianOp &rho) {
    return conditional_state(rho, pauli::I());
}

/// Per-setting correlators <A_k sigma_k^B> and their mean S_n.
struct SteeringEstimate {
    double value = 0.0;
    std::vector<double> per_setting;
    int n = 0;
    /// Standard error of value; zero for exact (model) estimates.
    double std_error = 0.0;
    std::vector<double> per_setting_error;

    static SteeringEstimate from_correlators(std::vector<double> corr, std::vector<double> errs = {}) {
        SteeringEstimate s;
        s.n = static_cast<int>(corr.size());
        if (s.n == 0) {
            throw InvalidArgument("SteeringEstimate: need at least one correlator");
        }
        double sum = 0.0;
        double var = 0.0;
        for (double c : corr) {
            sum += c;
        }
        for (double e : errs) {
            var += e * e;
        }
        s.value = sum / s.n;
        s.std_error = std::sqrt(var) / s.n;
        s.per_setting = std::move(corr);
        s.per_setting_error = std::move(errs);
        return s;
    }
};

}  // namespace tbsteer
