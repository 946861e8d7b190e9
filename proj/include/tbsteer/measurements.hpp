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

// Measurement-set families for Bob's side: the phase-encoding set (one
// time-basis setting plus equatorial AMZI phases) and the Platonic-solid sets
// it is compared against.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "tbsteer/quantum_core.hpp"

namespace tbsteer {

enum class MeasurementKind { time_basis, phase_basis, general };

struct Measurement {
    Vector3 bloch{0.0, 0.0, 1.0};
    std::string label;
    MeasurementKind kind = MeasurementKind::general;
    /// Meaningful only for phase_basis.
    double theta = 0.0;

    static Measurement time_basis(std::string label = "Z") {
        return {Vector3(0.0, 0.0, 1.0), std::move(label), MeasurementKind::time_basis, 0.0};
    }

    static Measurement phase_basis(double theta, std::string label) {
        if (!std::isfinite(theta)) {
            throw InvalidArgument("Measurement: phase must be finite");
        }
        return {Vector3(std::cos(theta), std::sin(theta), 0.0), std::move(label),
                MeasurementKind::phase_basis, theta};
    }

    /// Arbitrary direction; normalized if within 1e-6 of unit length.
    static Measurement general(const Vector3 &v, std::string label) {
        double norm = v.norm();
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6) {
            throw InvalidArgument("Measurement '" + label + "': Bloch vector must have unit length");
        }
        return {v / norm, std::move(label), MeasurementKind::general, 0.0};
    }

    HermitianOp observable() const {
        if (kind == MeasurementKind::phase_basis) {
            return sigma_theta(theta);
        }
        return bloch_observable(bloch);
    }

    HermitianOp projector(int sign) const { return bloch_projector(bloch, sign); }

    bool is_equatorial_phase() const { return kind == MeasurementKind::phase_basis; }
};

enum class SetFamily { phase_encoding, platonic, custom };

inline std::string to_string(SetFamily f) {
    switch (f) {
        case SetFamily::phase_encoding:
            return "phase";
        case SetFamily::platonic:
            return "platonic";
        case SetFamily::custom:
            return "custom";
    }
    return "custom";
}

inline SetFamily parse_family(const std::string &s) {
    if (s == "phase" || s == "phase_encoding") {
        return SetFamily::phase_encoding;
    }
    if (s == "platonic") {
        return SetFamily::platonic;
    }
    if (s == "custom") {
        return SetFamily::custom;
    }
    throw InvalidArgument("unknown measurement family '" + s + "' (expected phase|platonic|custom)");
}

class MeasurementSet {
   public:
    MeasurementSet(SetFamily family, std::vector<Measurement> measurements)
        : family_(family), ms_(std::move(measurements)) {
        validate();
    }

    SetFamily family() const { return family_; }
    int n() const { return static_cast<int>(ms_.size()); }
    const std::vector<Measurement> &measurements() const { return ms_; }
    const Measurement &operator[](int k) const { return ms_.at(static_cast<std::size_t>(k)); }

    std::vector<Vector3> bloch_vectors() const {
        std::vector<Vector3> out;
        out.reserve(ms_.size());
        for (const auto &m : ms_) {
            out.push_back(m.bloch);
        }
        return out;
    }

    /// Same set with every Bloch vector mapped through R. Kinds become general
    /// unless R preserves them, so the result is tagged custom.
    MeasurementSet rotated(const Eigen::Matrix3d &R) const {
        std::vector<Measurement> out;
        for (const auto &m : ms_) {
            out.push_back(Measurement::general(R * m.bloch, m.label));
        }
        return MeasurementSet(SetFamily::custom, std::move(out));
    }

   private:
    void validate() const {
        if (ms_.empty()) {
            throw InvalidArgument("MeasurementSet: need at least one measurement");
        }
        for (std::size_t i = 0; i < ms_.size(); ++i) {
            if (std::abs(ms_[i].bloch.norm() - 1.0) > 1e-12) {
                throw InvalidArgument("MeasurementSet: measurement " + std::to_string(i) +
                                      " is not a unit vector");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (std::abs(std::abs(ms_[i].bloch.dot(ms_[j].bloch)) - 1.0) < 1e-9) {
                    throw InvalidArgument("MeasurementSet: measurements " + std::to_string(j) + " and " +
                                          std::to_string(i) + " share an axis");
                }
            }
        }
    }

    SetFamily family_;
    std::vector<Measurement> ms_;
};

/// M_0 = sigma_Z, M_j = sigma_theta with theta_j = (j - 1) pi / (n - 1), j = 1..n-1.
inline MeasurementSet phase_encoding_set(int n) {
    if (n < 2) {
        throw InvalidArgument("phase_encoding_set: n must be >= 2, got " + std::to_string(n));
    }
    std::vector<Measurement> ms;
    ms.push_back(Measurement::time_basis("M0"));
    for (int j = 1; j < n; ++j) {
        double theta = (j - 1) * std::numbers::pi / (n - 1);
        ms.push_back(Measurement::phase_basis(theta, "M" + std::to_string(j)));
    }
    return MeasurementSet(SetFamily::phase_encoding, std::move(ms));
}

inline constexpr std::array<int, 5> kPlatonicSizes{2, 3, 4, 6, 10};

namespace detail {

inline std::vector<Measurement> rotate_first_to_z(const std::vector<Vector3> &raw) {
    Vector3 first = raw.front().normalized();
    Eigen::Matrix3d R =
        Eigen::Quaterniond::FromTwoVectors(first, Vector3::UnitZ()).toRotationMatrix();
    std::vector<Measurement> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        Vector3 v = i == 0 ? Vector3::UnitZ() : Vector3((R * raw[i].normalized()).normalized());
        out.push_back(Measurement::general(v, "P" + std::to_string(i)));
    }
    return out;
}

}  // namespace detail

/// Axes through antipodal vertex pairs of an inscribed Platonic solid.
/// n = 2 is {Z, X}, matching the phase-encoding set.
inline MeasurementSet platonic_set(int n) {
    const double phi = std::numbers::phi;
    std::vector<Measurement> ms;
    switch (n) {
        case 2:
            ms = {Measurement::time_basis("Z"), Measurement::phase_basis(0.0, "X")};
            break;
        case 3:
            ms = {Measurement::time_basis("Z"), Measurement::phase_basis(0.0, "X"),
                  Measurement::phase_basis(std::numbers::pi / 2, "Y")};
            break;
        case 4: {
            const double c = 1.0 / std::sqrt(3.0);
            for (const Vector3 &v : {Vector3(1, 1, 1), Vector3(1, 1, -1), Vector3(1, -1, 1),
                                     Vector3(-1, 1, 1)}) {
                ms.push_back(Measurement::general(v * c, "P" + std::to_string(ms.size())));
            }
            break;
        }
        case 6:
            ms = detail::rotate_first_to_z({{0, 1, phi},
                                            {0, -1, phi},
                                            {1, phi, 0},
                                            {-1, phi, 0},
                                            {phi, 0, 1},
                                            {phi, 0, -1}});
            break;
        case 10: {
            const double ip = 1.0 / phi;
            ms = detail::rotate_first_to_z({{1, 1, 1},
                                            {1, 1, -1},
                                            {1, -1, 1},
                                            {-1, 1, 1},
                                            {0, ip, phi},
                                            {0, -ip, phi},
                                            {ip, phi, 0},
                                            {-ip, phi, 0},
                                            {phi, 0, ip},
                                            {phi, 0, -ip}});
            break;
        }
        default:
            throw InvalidArgument("platonic_set: unsupported n=" + std::to_string(n) +
                                  " (supported: 2, 3, 4, 6, 10)");
    }
    return MeasurementSet(SetFamily::platonic, std::move(ms));
}

inline MeasurementSet make_set(SetFamily family, int n) {
    switch (family) {
        case SetFamily::phase_encoding:
            return phase_encoding_set(n);
        case SetFamily::platonic:
            return platonic_set(n);
        case SetFamily::custom:
            break;
    }
    throw InvalidArgument("make_set: custom sets must be supplied explicitly");
}

/// Alice's settings that make every ideal correlator on |Phi+> equal +1:
/// the transpose of each observable, i.e. y -> -y on the Bloch sphere
/// (theta -> -theta for phase settings).
inline MeasurementSet complementary_settings(const MeasurementSet &settings) {
    std::vector<Measurement> out;
    for (const auto &m : settings.measurements()) {
        switch (m.kind) {
            case MeasurementKind::time_basis:
                out.push_back(Measurement::time_basis(m.label));
                break;
            case MeasurementKind::phase_basis:
                out.push_back(Measurement::phase_basis(-m.theta, m.label));
                break;
            case MeasurementKind::general:
                out.push_back(
                    Measurement::general(Vector3(m.bloch(0), -m.bloch(1), m.bloch(2)), m.label));
                break;
        }
    }
    return MeasurementSet(settings.family(), std::move(out));
}

/// Model value of S_n on an isotropic state. The visibility multiplies the
/// correlators of equatorial (phase-basis) settings only.
inline SteeringEstimate expected_steering_parameter(const IsotropicParams &params,
                                                    const MeasurementSet &settings,
                                                    const MeasurementSet &alice, double visibility) {
    if (settings.n() != alice.n()) {
        throw InvalidArgument("expected_steering_parameter: settings and alice differ in length");
    }
    if (!(visibility >= 0.0 && visibility <= 1.0)) {
        throw InvalidArgument("expected_steering_parameter: visibility must lie in [0, 1]");
    }
    HermitianOp rho = isotropic_state(params);
    std::vector<double> corr;
    for (int k = 0; k < settings.n(); ++k) {
        double c = correlation(rho, alice[k].observable(), settings[k].observable());
        if (settings[k].is_equatorial_phase()) {
            c *= visibility;
        }
        corr.push_back(c);
    }
    return SteeringEstimate::from_correlators(std::move(corr));
}

}  // namespace tbsteer
