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

// JSON and CSV forms of the library's records. Operators are stored as Pauli
// coordinates [s, x, y, z] with op = s I + x X + y Y + z Z. Non-finite reals
// are written as null.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tbsteer/experiment_sim.hpp"
#include "tbsteer/lhs_sdp.hpp"
#include "tbsteer/measurements.hpp"

#ifndef TBSTEER_VERSION
#define TBSTEER_VERSION "0.1.0"
#endif

namespace tbsteer::io {

using json = nlohmann::ordered_json;

inline const char *version() { return TBSTEER_VERSION; }

inline json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Shortest round-trip text for CSV cells.
inline std::string fmt(double v) {
    if (!std::isfinite(v)) {
        return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = std::strtod(buf, nullptr);
    for (int prec = 6; prec < 17; ++prec) {
        char tmp[32];
        std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
        if (std::strtod(tmp, nullptr) == back) {
            return tmp;
        }
    }
    return buf;
}

inline json op_json(const HermitianOp &op) {
    auto c = op.pauli_coords();
    return json::array({c(0), c(1), c(2), c(3)});
}

inline json to_json(const MeasurementSet &set) {
    json ms = json::array();
    for (const auto &m : set.measurements()) {
        json j{{"label", m.label},
               {"bloch", {m.bloch(0), m.bloch(1), m.bloch(2)}},
               {"kind", m.kind == MeasurementKind::time_basis    ? "time_basis"
                        : m.kind == MeasurementKind::phase_basis ? "phase_basis"
                                                                 : "general"}};
        if (m.kind == MeasurementKind::phase_basis) {
            j["theta"] = m.theta;
        }
        ms.push_back(std::move(j));
    }
    return {{"family", to_string(set.family())}, {"n", set.n()}, {"measurements", std::move(ms)}};
}

/// Reads {family?, measurements: [{label, bloch: [x, y, z]}, ...]}; the
/// result is tagged custom unless it names a family.
inline MeasurementSet measurement_set_from_json(const json &j) {
    if (!j.is_object() || !j.contains("measurements") || !j.at("measurements").is_array()) {
        throw InvalidArgument("measurement set JSON: expected an object with a 'measurements' array");
    }
    std::vector<Measurement> ms;
    for (const auto &e : j.at("measurements")) {
        const json &b = e.at("bloch");
        if (!b.is_array() || b.size() != 3) {
            throw InvalidArgument("measurement set JSON: 'bloch' must be [x, y, z]");
        }
        std::string label = e.value("label", "M" + std::to_string(ms.size()));
        Vector3 v(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
        std::string kind = e.value("kind", std::string("general"));
        if (kind == "time_basis") {
            ms.push_back(Measurement::time_basis(label));
        } else if (kind == "phase_basis" && e.contains("theta")) {
            ms.push_back(Measurement::phase_basis(e.at("theta").get<double>(), label));
        } else {
            ms.push_back(Measurement::general(v, label));
        }
    }
    SetFamily fam = j.contains("family") ? parse_family(j.at("family").get<std::string>()) : SetFamily::custom;
    return MeasurementSet(fam, std::move(ms));
}

inline json to_json(const SteeringFunctional &f) {
    json rows = json::array();
    for (int k = 0; k < f.n; ++k) {
        rows.push_back({{"setting", k},
                        {"plus", op_json(f.at(Outcome::plus, k))},
                        {"minus", op_json(f.at(Outcome::minus, k))},
                        {"null", op_json(f.at(Outcome::null, k))}});
    }
    return {{"n", f.n}, {"F", std::move(rows)}};
}

inline SteeringFunctional functional_from_json(const json &j) {
    SteeringFunctional f;
    f.n = j.at("n").get<int>();
    auto op = [](const json &a) {
        return HermitianOp::from_pauli_coords(
            Eigen::Vector4d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>(), a.at(3).get<double>()));
    };
    for (const auto &row : j.at("F")) {
        f.F.push_back({op(row.at("plus")), op(row.at("minus")), op(row.at("null"))});
    }
    if (static_cast<int>(f.F.size()) != f.n) {
        throw InvalidArgument("certificate JSON: expected " + std::to_string(f.n) + " settings");
    }
    return f;
}

inline json to_json(const LhsModel &m) {
    json terms = json::array();
    for (const auto &[code, sigma] : m.terms) {
        terms.push_back({{"strategy", DeterministicStrategy::decode(code, m.n).to_string()}, {"sigma", op_json(sigma)}});
    }
    return {{"n", m.n}, {"terms", std::move(terms)}};
}

inline json to_json(const BoundPoint &bp, bool with_certificate = true) {
    json j{{"kind", bp.kind == BoundKind::critical_p ? "critical_p" : "critical_epsilon"},
           {"n", bp.n},
           {"family", to_string(bp.family)},
           {"epsilon", real(bp.epsilon)},
           {"p_star", real(bp.p_star)},
           {"status", to_string(bp.status)},
           {"gap", real(bp.gap)},
           {"iterations", bp.iterations},
           {"strategies_used", bp.strategies_used}};
    if (!bp.note.empty()) {
        j["note"] = bp.note;
    }
    if (with_certificate && bp.certificate) {
        j["certificate"] = to_json(*bp.certificate);
    }
    return j;
}

inline std::string bounds_csv_header() { return "n,family,epsilon,p_star,status,gap"; }

inline std::string bounds_csv_row(const BoundPoint &bp) {
    return std::to_string(bp.n) + "," + to_string(bp.family) + "," + fmt(bp.epsilon) + "," + fmt(bp.p_star) + "," +
           to_string(bp.status) + "," + fmt(bp.gap);
}

inline json to_json(const SteeringEstimate &s) {
    json per = json::array(), err = json::array();
    for (double v : s.per_setting) {
        per.push_back(real(v));
    }
    for (double v : s.per_setting_error) {
        err.push_back(real(v));
    }
    return {{"value", real(s.value)}, {"std_error", real(s.std_error)}, {"n", s.n},
            {"per_setting", std::move(per)}, {"per_setting_error", std::move(err)}};
}

inline json to_json(const KlyshkoEstimate &k) {
    return {{"alice", real(k.alice)},         {"alice_error", real(k.alice_error)}, {"bob", real(k.bob)},
            {"bob_error", real(k.bob_error)}, {"coincidences", k.coincidences},      {"accidentals", k.accidentals}};
}

inline json to_json(const TestVerdict &v) {
    return {{"s_n", to_json(v.s_n)},
            {"epsilon_hat", real(v.epsilon_hat)},
            {"epsilon_error", real(v.epsilon_error)},
            {"epsilon_used", real(v.epsilon_used)},
            {"p_star_at_epsilon", real(v.p_star_at_epsilon)},
            {"bound_status", to_string(v.bound_status)},
            {"passed", v.passed},
            {"margin", real(v.margin)},
            {"combined_error", real(v.combined_error)}};
}

inline json to_json(const LossLedger &ledger) {
    json out = json::array();
    for (const auto &c : ledger) {
        out.push_back({{"name", c.name}, {"db", c.db}});
    }
    return out;
}

inline json to_json(const ExperimentConfig &c) {
    json j{{"n_settings", c.n_settings},
           {"rep_rate", c.rep_rate},
           {"pair_prob", c.pair_prob},
           {"p", c.p},
           {"alice_loss_db", to_json(c.alice_loss_db)},
           {"bob_loss_db", to_json(c.bob_loss_db)},
           {"visibility", c.visibility},
           {"dark_rate_hz", c.dark_rate_hz},
           {"bin_width_s", c.bin_width_s},
           {"delay_s", c.delay_s},
           {"duration_s", c.duration_s},
           {"seed", c.seed},
           {"phase_drift_sigma", c.phase_drift_sigma},
           {"phase_offset_rad", c.phase_offset_rad},
           {"schedule_slip", c.schedule_slip},
           {"alice_phase_bias", c.alice_phase_bias},
           {"alice_schedule_delay", c.alice_schedule_delay}};
    if (!c.bob_phases_rad.empty()) {
        j["bob_phases_rad"] = c.bob_phases_rad;
    }
    return j;
}

/// Reads a config, starting from the defaults. Unknown keys and wrong types
/// are errors naming the field. The result is validated.
inline ExperimentConfig config_from_json(const json &j) {
    if (!j.is_object()) {
        throw InvalidArgument("config: top level must be a JSON object");
    }
    ExperimentConfig c;
    auto field = [&](const std::string &key, auto &dst) {
        if (!j.contains(key)) {
            return;
        }
        try {
            j.at(key).get_to(dst);
        } catch (const nlohmann::json::exception &) {
            throw InvalidArgument("config field '" + key + "': wrong type");
        }
    };
    auto ledger = [&](const std::string &key, LossLedger &dst) {
        if (!j.contains(key)) {
            return;
        }
        const json &arr = j.at(key);
        if (!arr.is_array()) {
            throw InvalidArgument("config field '" + key + "': must be an array of {name, db}");
        }
        dst.clear();
        for (const auto &e : arr) {
            if (!e.is_object() || !e.contains("db") || !e.at("db").is_number()) {
                throw InvalidArgument("config field '" + key + "': each entry needs a numeric 'db'");
            }
            dst.push_back({e.value("name", std::string{}), e.at("db").get<double>()});
        }
    };
    static const std::set<std::string> known{
        "n_settings",     "rep_rate",         "pair_prob",        "p",                    "alice_loss_db",
        "bob_loss_db",    "visibility",       "dark_rate_hz",     "bin_width_s",          "delay_s",
        "duration_s",     "seed",             "phase_drift_sigma", "phase_offset_rad",    "schedule_slip",
        "alice_phase_bias", "alice_schedule_delay", "bob_phases_rad"};
    for (const auto &[key, _] : j.items()) {
        if (!known.count(key)) {
            throw InvalidArgument("config field '" + key + "': unknown key");
        }
    }
    field("n_settings", c.n_settings);
    field("rep_rate", c.rep_rate);
    field("pair_prob", c.pair_prob);
    field("p", c.p);
    ledger("alice_loss_db", c.alice_loss_db);
    ledger("bob_loss_db", c.bob_loss_db);
    field("visibility", c.visibility);
    field("dark_rate_hz", c.dark_rate_hz);
    field("bin_width_s", c.bin_width_s);
    field("delay_s", c.delay_s);
    field("duration_s", c.duration_s);
    field("seed", c.seed);
    field("phase_drift_sigma", c.phase_drift_sigma);
    field("phase_offset_rad", c.phase_offset_rad);
    field("schedule_slip", c.schedule_slip);
    field("alice_phase_bias", c.alice_phase_bias);
    field("alice_schedule_delay", c.alice_schedule_delay);
    field("bob_phases_rad", c.bob_phases_rad);
    c.validate();
    return c;
}

inline ExperimentConfig read_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("config: cannot open '" + path + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw InvalidArgument("config: malformed JSON in '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

inline json to_json(const HistogramSet &h) {
    json pairs = json::object();
    for (int p = 0; p < 4; ++p) {
        json settings = json::array();
        for (int k = 0; k < h.n; ++k) {
            settings.push_back(h.counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)]);
        }
        pairs[kPairNames[static_cast<std::size_t>(p)]] = std::move(settings);
    }
    return {{"n", h.n},
            {"bins", {-HistogramSet::kHalfWidth, HistogramSet::kHalfWidth}},
            {"pulses", h.pulses},
            {"duration_s", h.duration_s},
            {"singles_alice", h.singles_alice},
            {"singles_bob", h.singles_bob},
            {"counts", std::move(pairs)}};
}

inline void write_histogram_csv(std::ostream &out, const HistogramSet &h) {
    out << "pair,setting,bin,count\n";
    for (int p = 0; p < 4; ++p) {
        for (int k = 0; k < h.n; ++k) {
            for (int b = -HistogramSet::kHalfWidth; b <= HistogramSet::kHalfWidth; ++b) {
                out << kPairNames[static_cast<std::size_t>(p)] << ',' << k << ',' << b << ',' << h.at(p, k, b) << '\n';
            }
        }
    }
}

/// Provenance record written next to every output.
struct RunManifest {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;
    int exit_code = 0;
    std::string message;

    json to_json() const {
        return {{"command", command}, {"version", version()}, {"config", config},  {"seed", seed},
                {"started", started}, {"finished", finished}, {"outputs", outputs}, {"exit_code", exit_code},
                {"message", message}};
    }
};

inline void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    out << text;
}

inline void write_json(const std::string &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace tbsteer::io
