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


#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tbsteer/measurements.hpp"

namespace {

using namespace tbsteer;
constexpr double kPi = std::numbers::pi;

TEST(PhaseEncoding, SmallSets) {
    auto s2 = phase_encoding_set(2);
    ASSERT_EQ(s2.n(), 2);
    EXPECT_LT((s2[0].bloch - Vector3(0, 0, 1)).norm(), 1e-15);
    EXPECT_LT((s2[1].bloch - Vector3(1, 0, 0)).norm(), 1e-15);
    EXPECT_EQ(s2[0].kind, MeasurementKind::time_basis);
    EXPECT_EQ(s2[1].kind, MeasurementKind::phase_basis);
    EXPECT_THROW(phase_encoding_set(1), InvalidArgument);
}

TEST(PhaseEncoding, NineSettingsMiddleIsY) {
    auto s = phase_encoding_set(9);
    EXPECT_NEAR(s[5].theta, kPi / 2, 1e-15);
    EXPECT_LT((s[5].bloch - Vector3(0, 1, 0)).norm(), 1e-15);
}

TEST(PhaseEncoding, UniformSpacingAndUnitVectors) {
    for (int n = 2; n <= 12; ++n) {
        auto s = phase_encoding_set(n);
        for (int k = 0; k < n; ++k) {
            EXPECT_NEAR(s[k].bloch.norm(), 1.0, 1e-12);
            auto o = s[k].observable();
            EXPECT_LT((o.matrix() * o.matrix() - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff(), 1e-12);
        }
        for (int k = 2; k < n; ++k) {
            double ang = std::acos(std::clamp(s[k].bloch.dot(s[k - 1].bloch), -1.0, 1.0));
            EXPECT_NEAR(ang, kPi / (n - 1), 1e-12);
            EXPECT_NEAR(s[k].bloch(2), 0.0, 1e-15);
        }
    }
}

TEST(Platonic, SupportedSizes) {
    for (int n : {2, 3, 4, 6, 10}) {
        auto s = platonic_set(n);
        EXPECT_EQ(s.n(), n);
        EXPECT_EQ(s.family(), SetFamily::platonic);
        for (int k = 0; k < n; ++k) {
            EXPECT_NEAR(s[k].bloch.norm(), 1.0, 1e-12);
            auto o = s[k].observable();
            EXPECT_LT((o.matrix() * o.matrix() - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
    for (int n : {1, 5, 7, 8, 9, 12}) {
        EXPECT_THROW(platonic_set(n), InvalidArgument);
    }
}

TEST(Platonic, IcosahedronGram) {
    auto s = platonic_set(6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < i; ++j) EXPECT_NEAR(std::abs(s[i].bloch.dot(s[j].bloch)), 1.0 / std::sqrt(5.0), 1e-12);
    // Same Gram matrix as the unrotated golden-ratio construction.
    auto ref = oracle::icosahedron_axes();
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            double d = ref[i][0] * ref[j][0] + ref[i][1] * ref[j][1] + ref[i][2] * ref[j][2];
            EXPECT_NEAR(s[i].bloch.dot(s[j].bloch), d, 1e-12);
        }
}

TEST(Platonic, DodecahedronAndCube) {
    auto cube = platonic_set(4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) EXPECT_NEAR(std::abs(cube[i].bloch.dot(cube[j].bloch)), 1.0 / 3.0, 1e-12);
    // Dodecahedron axes: |cos| takes the values sqrt5/3 and 1/3 only.
    auto d = platonic_set(10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < i; ++j) {
            double c = std::abs(d[i].bloch.dot(d[j].bloch));
            EXPECT_TRUE(std::abs(c - std::sqrt(5.0) / 3.0) < 1e-12 || std::abs(c - 1.0 / 3.0) < 1e-12) << c;
        }
}

TEST(Platonic, MatchesPhaseEncodingForTwoAndThree) {
    for (int n : {2, 3}) {
        auto a = phase_encoding_set(n), b = platonic_set(n);
        for (int k = 0; k < n; ++k) EXPECT_LT((a[k].bloch - b[k].bloch).norm(), 1e-12);
    }
}

TEST(MeasurementSet, ValidatesAxes) {
    EXPECT_THROW(MeasurementSet(SetFamily::custom, {}), InvalidArgument);
    EXPECT_THROW(MeasurementSet(SetFamily::custom, {Measurement::general(Vector3(0, 0, 1), "a"),
                                                    Measurement::general(Vector3(0, 0, -1), "b")}),
                 InvalidArgument);
    EXPECT_THROW(Measurement::general(Vector3(0, 0, 2), "x"), InvalidArgument);
    EXPECT_THROW(Measurement::phase_basis(NAN, "x"), InvalidArgument);
    EXPECT_THROW(parse_family("octagon"), InvalidArgument);
    EXPECT_EQ(parse_family("phase"), SetFamily::phase_encoding);
    EXPECT_EQ(to_string(SetFamily::platonic), "platonic");
}

TEST(Complementary, FlipsY) {
    auto s2 = phase_encoding_set(2);
    auto c2 = complementary_settings(s2);
    for (int k = 0; k < 2; ++k) EXPECT_LT((c2[k].bloch - s2[k].bloch).norm(), 1e-15);

    MeasurementSet one(SetFamily::custom, {Measurement::phase_basis(kPi / 4, "q")});
    auto c = complementary_settings(one);
    EXPECT_NEAR(c[0].theta, -kPi / 4, 1e-15);
    auto rho = isotropic_state({1.0, 0.0});
    EXPECT_NEAR(correlation(rho, c[0].observable(), one[0].observable()), 1.0, 1e-12);
}

TEST(Complementary, AllCorrelatorsEqualP) {
    for (auto fam : {SetFamily::phase_encoding, SetFamily::platonic}) {
        for (int n : {2, 3, 4, 6, 9, 10}) {
            if (fam == SetFamily::platonic && (n == 9)) continue;
            if (fam == SetFamily::phase_encoding && n == 10) continue;
            auto s = make_set(fam, n);
            auto a = complementary_settings(s);
            for (double p : {0.0, 0.4, 1.0}) {
                auto rho = isotropic_state({p, 0.0});
                for (int k = 0; k < n; ++k)
                    EXPECT_NEAR(correlation(rho, a[k].observable(), s[k].observable()), p, 1e-12);
            }
        }
    }
}

TEST(ExpectedSteering, Examples) {
    auto s3 = phase_encoding_set(3);
    EXPECT_NEAR(expected_steering_parameter({0.9, 0.0}, s3, complementary_settings(s3), 1.0).value, 0.9, 1e-12);
    auto s9 = phase_encoding_set(9);
    auto e = expected_steering_parameter({1.0, 0.0}, s9, complementary_settings(s9), 0.985);
    EXPECT_NEAR(e.value, oracle::steering_closed_form(9, 1.0, 0.985), 1e-12);
    EXPECT_NEAR(e.value, 0.98667, 1e-5);
    EXPECT_NEAR(e.per_setting[0], 1.0, 1e-12);
    for (int k = 1; k < 9; ++k) EXPECT_NEAR(e.per_setting[k], 0.985, 1e-12);
    EXPECT_NEAR(expected_steering_parameter({0.0, 0.0}, s9, complementary_settings(s9), 0.7).value, 0.0, 1e-15);
    EXPECT_THROW(expected_steering_parameter({1.0, 0.0}, s9, complementary_settings(s9), 1.2), InvalidArgument);
    EXPECT_THROW(expected_steering_parameter({1.0, 0.0}, s9, s3, 1.0), InvalidArgument);
}

TEST(ExpectedSteering, ClosedFormOnGrid) {
    for (int n = 2; n <= 9; ++n) {
        auto s = phase_encoding_set(n);
        auto a = complementary_settings(s);
        for (double p : {0.1, 0.55, 0.95})
            for (double v : {0.5, 0.9, 1.0})
                EXPECT_NEAR(expected_steering_parameter({p, 0.0}, s, a, v).value, oracle::steering_closed_form(n, p, v),
                            1e-12);
    }
}

TEST(MeasurementSet, RotationKeepsGram) {
    auto s = phase_encoding_set(5);
    Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Vector3(1, 2, 3).normalized()).toRotationMatrix();
    auto r = s.rotated(R);
    EXPECT_EQ(r.family(), SetFamily::custom);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) EXPECT_NEAR(r[i].bloch.dot(r[j].bloch), s[i].bloch.dot(s[j].bloch), 1e-12);
}

}  // namespace
