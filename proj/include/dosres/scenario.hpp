#pragma once

// JSON scenario files for the command-line tool.
//
// {
//   "plant":    {"A": [[..]], "B": [[..]], "K": [[..]], "input_mode": "hold_last" | "zero_during_dos"},
//   "trigger":  {"kind": "pure_time", "sigma": .., "delta1": .., "delta2": .. (optional),
//                "varphi": {"kind": "zero"} | {"kind": "saturated_linear", "scale": ..},
//                "predictor": "closed_loop" | "hold_dynamics"},
//   "dos":      {"intervals": [[onset, duration], ..]}
//             | {"generator": {"kind": "periodic", "onset": .., "period": .., "duty": ..}}
//             | {"generator": {"kind": "random", "seed": .., "min_duration": ..}}
//             | {"file": "relative/or/absolute/path"},
//   "budget":   {"kappa": .., "tau": ..},
//   "sim":      {"x0": [..], "horizon": .., "record_step": .. (optional), "crossing_tol": .. (optional)},
//   "analysis": {"Q": [[..]]} (optional, identity by default)
// }

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dosres/sim_engine.hpp"

namespace dosres {

struct DosSource {
    enum class Kind { Inline, Periodic, Random, File };

    Kind kind = Kind::Inline;
    std::vector<DosInterval> intervals;  // Inline
    double onset = 0.0;                  // Periodic
    double period = 1.0;
    double duty = 0.5;
    std::uint64_t seed = 0;  // Random
    double min_duration = 0.0;
    std::string path;  // File, as written in the scenario

    friend bool operator==(const DosSource&, const DosSource&) = default;
};

struct Scenario {
    RealMatrix a, b, k;
    InputMode input_mode = InputMode::HoldLast;
    LogicKind logic = LogicKind::PureTime;
    double sigma = 0.1;
    double delta1 = 0.01;
    std::optional<double> delta2;
    Varphi varphi;
    Predictor predictor = Predictor::ClosedLoop;
    DosSource dos;
    DosBudget budget;
    RealVector x0;
    double horizon = 10.0;
    std::optional<double> record_step;
    double crossing_tol = 1e-9;
    std::optional<RealMatrix> q;
    std::filesystem::path base_dir;  // resolves relative DoS file paths; not part of equality

    friend bool operator==(const Scenario& l, const Scenario& r);
};

namespace detail {

inline bool same_matrix(const RealMatrix& l, const RealMatrix& r) {
    return l.rows() == r.rows() && l.cols() == r.cols() && l == r;
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// Semantic errors carry the line of the first occurrence of the offending key.
class ScenarioReader {
public:
    explicit ScenarioReader(std::string text) : text_(std::move(text)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        const auto pos = text_.find('"' + key + '"');
        throw ParseError(what, pos == std::string::npos ? 1 : line_of_offset(text_, pos));
    }

    const nlohmann::json& section(const nlohmann::json& parent, const std::string& key) const {
        if (!parent.is_object() || !parent.contains(key)) fail(key, "missing key '" + key + "'");
        return parent.at(key);
    }

    double number(const nlohmann::json& parent, const std::string& key) const {
        const auto& v = section(parent, key);
        if (!v.is_number()) fail(key, "'" + key + "' must be a number");
        return v.get<double>();
    }

    std::optional<double> optional_number(const nlohmann::json& parent, const std::string& key) const {
        if (!parent.contains(key)) return std::nullopt;
        return number(parent, key);
    }

    std::string string(const nlohmann::json& parent, const std::string& key) const {
        const auto& v = section(parent, key);
        if (!v.is_string()) fail(key, "'" + key + "' must be a string");
        return v.get<std::string>();
    }

    RealMatrix matrix(const nlohmann::json& parent, const std::string& key) const {
        const auto& v = section(parent, key);
        if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) {
            fail(key, "'" + key + "' must be a non-empty list of rows");
        }
        const auto rows = static_cast<Eigen::Index>(v.size());
        const auto cols = static_cast<Eigen::Index>(v[0].size());
        RealMatrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& row = v[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
                fail(key, "'" + key + "' rows must all have length " + std::to_string(cols));
            }
            for (Eigen::Index j = 0; j < cols; ++j) {
                const auto& e = row[static_cast<std::size_t>(j)];
                if (!e.is_number()) fail(key, "'" + key + "' entries must be numbers");
                m(i, j) = e.get<double>();
            }
        }
        return m;
    }

    RealVector vector(const nlohmann::json& parent, const std::string& key) const {
        const auto& v = section(parent, key);
        if (!v.is_array() || v.empty()) fail(key, "'" + key + "' must be a non-empty list");
        RealVector out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(key, "'" + key + "' entries must be numbers");
            out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
        }
        return out;
    }

private:
    std::string text_;
};

inline nlohmann::json matrix_json(const RealMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

inline bool operator==(const Scenario& l, const Scenario& r) {
    const bool q_equal = l.q.has_value() == r.q.has_value() && (!l.q || detail::same_matrix(*l.q, *r.q));
    return detail::same_matrix(l.a, r.a) && detail::same_matrix(l.b, r.b) && detail::same_matrix(l.k, r.k) &&
           l.input_mode == r.input_mode && l.logic == r.logic && l.sigma == r.sigma && l.delta1 == r.delta1 &&
           l.delta2 == r.delta2 && l.varphi == r.varphi && l.predictor == r.predictor && l.dos == r.dos &&
           l.budget.kappa == r.budget.kappa && l.budget.tau_avg == r.budget.tau_avg &&
           l.x0.size() == r.x0.size() && l.x0 == r.x0 && l.horizon == r.horizon && l.record_step == r.record_step &&
           l.crossing_tol == r.crossing_tol && q_equal;
}

inline Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {}) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), detail::line_of_offset(text, e.byte));
    }
    const detail::ScenarioReader in(text);
    if (!doc.is_object()) throw ParseError("scenario must be a JSON object", 1);

    Scenario s;
    s.base_dir = base_dir;

    const auto& plant = in.section(doc, "plant");
    s.a = in.matrix(plant, "A");
    s.b = in.matrix(plant, "B");
    s.k = in.matrix(plant, "K");
    if (plant.contains("input_mode")) {
        const auto mode = in.string(plant, "input_mode");
        if (mode == "hold_last") s.input_mode = InputMode::HoldLast;
        else if (mode == "zero_during_dos") s.input_mode = InputMode::ZeroDuringDos;
        else in.fail("input_mode", "unknown input_mode '" + mode + "'");
    }

    const auto& trig = in.section(doc, "trigger");
    const auto kind = in.string(trig, "kind");
    if (kind == "event_time") s.logic = LogicKind::EventTime;
    else if (kind == "pure_time") s.logic = LogicKind::PureTime;
    else if (kind == "self_trigger") s.logic = LogicKind::SelfTrigger;
    else if (kind == "ideal_event") s.logic = LogicKind::IdealEvent;
    else in.fail("kind", "unknown trigger kind '" + kind + "'");
    s.sigma = in.number(trig, "sigma");
    s.delta1 = in.number(trig, "delta1");
    s.delta2 = in.optional_number(trig, "delta2");
    if (trig.contains("varphi")) {
        const auto& vp = in.section(trig, "varphi");
        const auto vk = in.string(vp, "kind");
        if (vk == "zero") s.varphi = Varphi::zero();
        else if (vk == "saturated_linear") s.varphi = Varphi::saturated_linear(in.number(vp, "scale"));
        else in.fail("varphi", "unknown varphi kind '" + vk + "'");
    }
    if (trig.contains("predictor")) {
        const auto p = in.string(trig, "predictor");
        if (p == "closed_loop") s.predictor = Predictor::ClosedLoop;
        else if (p == "hold_dynamics") s.predictor = Predictor::HoldDynamics;
        else in.fail("predictor", "unknown predictor '" + p + "'");
    }

    const auto& dos = in.section(doc, "dos");
    const int sources = int{dos.contains("intervals")} + int{dos.contains("generator")} + int{dos.contains("file")};
    if (sources != 1) in.fail("dos", "dos needs exactly one of 'intervals', 'generator', 'file'");
    if (dos.contains("intervals")) {
        s.dos.kind = DosSource::Kind::Inline;
        const auto& list = in.section(dos, "intervals");
        if (!list.is_array()) in.fail("intervals", "'intervals' must be a list of [onset, duration]");
        for (const auto& pair : list) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
                in.fail("intervals", "'intervals' entries must be [onset, duration]");
            }
            s.dos.intervals.push_back({pair[0].get<double>(), pair[1].get<double>()});
        }
    } else if (dos.contains("generator")) {
        const auto& gen = in.section(dos, "generator");
        const auto gk = in.string(gen, "kind");
        if (gk == "periodic") {
            s.dos.kind = DosSource::Kind::Periodic;
            s.dos.onset = in.number(gen, "onset");
            s.dos.period = in.number(gen, "period");
            s.dos.duty = in.number(gen, "duty");
        } else if (gk == "random") {
            s.dos.kind = DosSource::Kind::Random;
            const auto& seed = in.section(gen, "seed");
            if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
                in.fail("seed", "'seed' must be a non-negative integer");
            }
            s.dos.seed = seed.get<std::uint64_t>();
            s.dos.min_duration = in.number(gen, "min_duration");
        } else {
            in.fail("generator", "unknown generator kind '" + gk + "'");
        }
    } else {
        s.dos.kind = DosSource::Kind::File;
        s.dos.path = in.string(dos, "file");
    }

    const auto& budget = in.section(doc, "budget");
    s.budget = DosBudget{in.number(budget, "kappa"), in.number(budget, "tau")};

    const auto& sim = in.section(doc, "sim");
    s.x0 = in.vector(sim, "x0");
    s.horizon = in.number(sim, "horizon");
    s.record_step = in.optional_number(sim, "record_step");
    if (auto tol = in.optional_number(sim, "crossing_tol")) s.crossing_tol = *tol;

    if (doc.contains("analysis") && doc.at("analysis").contains("Q")) s.q = in.matrix(doc.at("analysis"), "Q");
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open scenario file '" + path.string() + "'", 0);
    std::stringstream buffer;
    buffer << file.rdbuf();
    return parse_scenario(buffer.str(), path.parent_path());
}

inline nlohmann::json to_json(const Scenario& s) {
    nlohmann::json doc;
    doc["plant"] = {{"A", detail::matrix_json(s.a)},
                    {"B", detail::matrix_json(s.b)},
                    {"K", detail::matrix_json(s.k)},
                    {"input_mode", s.input_mode == InputMode::HoldLast ? "hold_last" : "zero_during_dos"}};
    nlohmann::json trig = {{"kind", to_string(s.logic)}, {"sigma", s.sigma}, {"delta1", s.delta1}};
    if (s.delta2) trig["delta2"] = *s.delta2;
    if (s.varphi.kind == Varphi::Kind::Zero) trig["varphi"] = {{"kind", "zero"}};
    else trig["varphi"] = {{"kind", "saturated_linear"}, {"scale", s.varphi.scale}};
    trig["predictor"] = s.predictor == Predictor::ClosedLoop ? "closed_loop" : "hold_dynamics";
    doc["trigger"] = std::move(trig);

    switch (s.dos.kind) {
        case DosSource::Kind::Inline: {
            nlohmann::json list = nlohmann::json::array();
            for (const auto& iv : s.dos.intervals) list.push_back({iv.onset, iv.duration});
            doc["dos"] = {{"intervals", std::move(list)}};
            break;
        }
        case DosSource::Kind::Periodic:
            doc["dos"] = {{"generator",
                           {{"kind", "periodic"}, {"onset", s.dos.onset}, {"period", s.dos.period}, {"duty", s.dos.duty}}}};
            break;
        case DosSource::Kind::Random:
            doc["dos"] = {{"generator", {{"kind", "random"}, {"seed", s.dos.seed}, {"min_duration", s.dos.min_duration}}}};
            break;
        case DosSource::Kind::File: doc["dos"] = {{"file", s.dos.path}}; break;
    }
    doc["budget"] = {{"kappa", s.budget.kappa}, {"tau", s.budget.tau_avg}};

    nlohmann::json x0 = nlohmann::json::array();
    for (Eigen::Index i = 0; i < s.x0.size(); ++i) x0.push_back(s.x0(i));
    nlohmann::json sim = {{"x0", std::move(x0)}, {"horizon", s.horizon}, {"crossing_tol", s.crossing_tol}};
    if (s.record_step) sim["record_step"] = *s.record_step;
    doc["sim"] = std::move(sim);
    if (s.q) doc["analysis"] = {{"Q", detail::matrix_json(*s.q)}};
    return doc;
}

inline std::string serialize_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

inline LtiPlant plant_of(const Scenario& s) { return LtiPlant(s.a, s.b, s.k, s.input_mode); }

/// delta2 from the file, or the Riccati bound when absent.
inline double effective_delta2(const Scenario& s, const LtiPlant& plant) {
    return s.delta2 ? *s.delta2 : riccati_delta2(plant, s.sigma);
}

inline RealMatrix effective_q(const Scenario& s) {
    return s.q ? *s.q : RealMatrix(RealMatrix::Identity(s.a.rows(), s.a.rows()));
}

inline DosSequence resolve_dos(const Scenario& s) {
    switch (s.dos.kind) {
        case DosSource::Kind::Inline: return DosSequence(s.dos.intervals);
        case DosSource::Kind::Periodic: return gen_periodic(s.dos.onset, s.dos.period, s.dos.duty, s.horizon).sequence;
        case DosSource::Kind::Random: return gen_random_budgeted(s.budget, s.dos.min_duration, s.dos.seed, s.horizon);
        case DosSource::Kind::File: {
            std::filesystem::path p(s.dos.path);
            if (p.is_relative()) p = s.base_dir / p;
            std::ifstream file(p);
            if (!file) throw ParseError("cannot open DoS file '" + p.string() + "'", 0);
            return read_dos(file).sequence;
        }
    }
    return DosSequence{};
}

inline SimConfig sim_config_of(const Scenario& s) {
    LtiPlant plant = plant_of(s);
    TriggerConfig trigger{s.sigma, s.delta1, effective_delta2(s, plant), s.varphi};
    SimConfig c{std::move(plant)};
    c.logic = s.logic;
    c.trigger = trigger;
    c.dos = resolve_dos(s);
    c.budget = s.budget;
    c.x0 = s.x0;
    c.horizon = s.horizon;
    c.record_step = s.record_step ? *s.record_step : trigger.delta1 / 4.0;
    c.crossing_tol = s.crossing_tol;
    c.predictor = s.predictor;
    return c;
}

}  // namespace dosres
