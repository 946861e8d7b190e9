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

// Test-side reference computations. Everything here is written from the
// definitions with plain loops and std::complex so that it shares no code
// path with the library it checks.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using C = std::complex<double>;
using M2 = std::array<std::array<C, 2>, 2>;
using M4 = std::array<std::array<C, 4>, 4>;

inline M2 pauli_x() { return {{{0.0, 1.0}, {1.0, 0.0}}}; }
inline M2 pauli_y() { return {{{0.0, C(0, -1)}, {C(0, 1), 0.0}}}; }
inline M2 pauli_z() { return {{{1.0, 0.0}, {0.0, -1.0}}}; }

/// cos(theta) X + sin(theta) Y written out entrywise.
inline M2 equatorial(double theta) { return {{{0.0, std::polar(1.0, -theta)}, {std::polar(1.0, theta), 0.0}}}; }

inline M2 bloch_op(double x, double y, double z) { return {{{z, C(x, -y)}, {C(x, y), -z}}}; }

/// p |psi><psi| + (1 - p) I/4 with |psi> = (|00> + e^{i a}|11>)/sqrt 2.
inline M4 isotropic(double p, double alpha) {
    std::array<C, 4> psi{1.0 / std::sqrt(2.0), 0.0, 0.0, std::polar(1.0 / std::sqrt(2.0), alpha)};
    M4 r{};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            r[i][j] = p * psi[i] * std::conj(psi[j]) + (i == j ? (1.0 - p) / 4.0 : 0.0);
        }
    }
    return r;
}

/// Tr[rho (A (x) B)], index (a b) -> 2a + b.
inline double trace_ab(const M4 &rho, const M2 &A, const M2 &B) {
    C acc = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int a2 = 0; a2 < 2; ++a2)
                for (int b2 = 0; b2 < 2; ++b2) {
                    // (A (x) B)_{(a2 b2),(a b)} rho_{(a b),(a2 b2)}
                    acc += A[a2][a] * B[b2][b] * rho[2 * a + b][2 * a2 + b2];
                }
    return acc.real();
}

/// Tr_A[(P (x) I) rho].
inline M2 partial_a(const M4 &rho, const M2 &P) {
    M2 out{};
    for (int b = 0; b < 2; ++b)
        for (int b2 = 0; b2 < 2; ++b2)
            for (int a = 0; a < 2; ++a)
                for (int c = 0; c < 2; ++c) {
                    out[b][b2] += P[a][c] * rho[2 * c + b][2 * a + b2];
                }
    return out;
}

/// Largest eigenvalue of a 2x2 Hermitian matrix from its trace and determinant.
inline double max_eig(const M2 &m) {
    double t = (m[0][0] + m[1][1]).real();
    double d = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).real();
    return 0.5 * (t + std::sqrt(std::max(t * t - 4.0 * d, 0.0)));
}

/// Lossless deterministic bound: max over sign vectors a of the top eigenvalue
/// of sum_k a_k u_k . sigma / n (the best preset state for that sign choice).
inline double lossless_bound(const std::vector<std::array<double, 3>> &dirs) {
    const int n = static_cast<int>(dirs.size());
    double best = 0.0;
    for (long mask = 0; mask < (1L << n); ++mask) {
        double x = 0, y = 0, z = 0;
        for (int k = 0; k < n; ++k) {
            double s = (mask >> k) & 1 ? 1.0 : -1.0;
            x += s * dirs[k][0];
            y += s * dirs[k][1];
            z += s * dirs[k][2];
        }
        best = std::max(best, max_eig(bloch_op(x, y, z)) / n);
    }
    return best;
}

/// S_n of the honest strategy: time-basis term p, equatorial terms V p.
inline double steering_closed_form(int n, double p, double v) { return p * (1.0 + (n - 1) * v) / n; }

/// Icosahedron vertex axes from golden-ratio coordinates, one per antipodal pair.
inline std::vector<std::array<double, 3>> icosahedron_axes() {
    const double f = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<std::array<double, 3>> v{{0, 1, f}, {0, -1, f}, {1, f, 0}, {-1, f, 0}, {f, 0, 1}, {f, 0, -1}};
    for (auto &a : v) {
        double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        for (double &c : a) c /= n;
    }
    return v;
}

}  // namespace oracle
