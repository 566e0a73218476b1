#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "carl/error.hpp"
#include "carl/io_util.hpp"
#include "carl/mdp.hpp"

namespace carl {

using nlohmann::json;

namespace {

json state_json(const TsState& s) {
    const StateVector v = s.to_array();
    return json(std::vector<double>(v.begin(), v.end()));
}

TsState parse_state(const json& j, std::size_t line, const std::string& field) {
    if (!j.is_array() || j.size() != kStateDim) {
        throw ParseError(line, field, "expected an array of 8 numbers");
    }
    StateVector v{};
    for (std::size_t i = 0; i < kStateDim; ++i) {
        if (!j[i].is_number()) throw ParseError(line, field + "." + feature_name(i), "not a number");
        v[i] = j[i].get<double>();
    }
    const std::string prefix = field + ".";
    if (v[kDayOfWeek] != std::floor(v[kDayOfWeek])) {
        throw ParseError(line, prefix + feature_name(kDayOfWeek), "must be an integer");
    }
    const TsState s = TsState::from_array(v);
    try {
        s.validate();
    } catch (const DomainError& e) {
        // The message starts with the feature name.
        const std::string msg = e.what();
        const std::string name = msg.substr(0, msg.find(' '));
        throw ParseError(line, prefix + name, msg);
    }
    return s;
}

std::int64_t parse_int(const json& rec, const char* key, std::size_t line) {
    if (!rec.contains(key)) throw ParseError(line, key, "missing");
    const json& j = rec[key];
    if (!j.is_number_integer()) throw ParseError(line, key, "expected an integer");
    return j.get<std::int64_t>();
}

}  // namespace

std::string encode_transition(const Transition& t) {
    json rec;
    rec["serving_cell"] = t.serving_cell_id;
    rec["target_cell"] = t.target_cell_id;
    rec["epoch"] = t.epoch_index;
    rec["state"] = state_json(t.state);
    rec["action"] = std::vector<double>(t.action.values.begin(), t.action.values.end());
    rec["reward"] = t.reward;
    rec["next_state"] = state_json(t.next_state);
    if (t.terminal) rec["terminal"] = true;
    return rec.dump();
}

Transition decode_transition(const std::string& line_text, std::size_t line) {
    json rec;
    try {
        rec = json::parse(line_text);
    } catch (const json::parse_error& e) {
        throw ParseError(line, "<record>", e.what());
    }
    if (!rec.is_object()) throw ParseError(line, "<record>", "expected a JSON object");

    Transition t;
    t.serving_cell_id = parse_int(rec, "serving_cell", line);
    t.target_cell_id = parse_int(rec, "target_cell", line);
    t.epoch_index = parse_int(rec, "epoch", line);
    for (const char* key : {"state", "action", "reward", "next_state"}) {
        if (!rec.contains(key)) throw ParseError(line, key, "missing");
    }
    t.state = parse_state(rec["state"], line, "state");
    t.next_state = parse_state(rec["next_state"], line, "next_state");

    const json& a = rec["action"];
    if (!a.is_array() || a.size() != kActionDim) throw ParseError(line, "action", "expected an array of 6 numbers");
    for (std::size_t i = 0; i < kActionDim; ++i) {
        const std::string field = std::string("action.") + knob_name(i);
        if (!a[i].is_number()) throw ParseError(line, field, "not a number");
        const double v = a[i].get<double>();
        if (!(v > 0.0 && v <= 1.0)) throw ParseError(line, field, "must lie in (0,1]");
        t.action.values[i] = v;
    }

    const json& r = rec["reward"];
    if (!r.is_number()) throw ParseError(line, "reward", "not a number");
    t.reward = r.get<double>();
    if (!std::isfinite(t.reward) || t.reward < 0.0) throw ParseError(line, "reward", "must be finite and >= 0");

    if (rec.contains("terminal")) {
        if (!rec["terminal"].is_boolean()) throw ParseError(line, "terminal", "expected a boolean");
        t.terminal = rec["terminal"].get<bool>();
    }
    return t;
}

void write_dataset(const std::filesystem::path& path, const OfflineDataset& dataset) {
    std::ostringstream out;
    json header;
    header["schema"] = kTransitionsSchema;
    header["normalization"] = {{"min", dataset.normalization.min}, {"max", dataset.normalization.max}};
    out << header.dump() << '\n';
    for (const auto& t : dataset.transitions) out << encode_transition(t) << '\n';
    write_file_atomic(path, out.str());
}

OfflineDataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset " + path.string());

    OfflineDataset ds;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!have_header) {
            json header;
            try {
                header = json::parse(text);
            } catch (const json::parse_error& e) {
                throw ParseError(line, "<header>", e.what());
            }
            if (!header.is_object() || header.value("schema", "") != kTransitionsSchema) {
                throw ParseError(line, "schema", std::string("expected ") + kTransitionsSchema);
            }
            if (header.contains("normalization")) {
                const json& n = header["normalization"];
                try {
                    ds.normalization.min = n.at("min").get<std::vector<double>>();
                    ds.normalization.max = n.at("max").get<std::vector<double>>();
                } catch (const json::exception& e) {
                    throw ParseError(line, "normalization", e.what());
                }
                if (!ds.normalization.complete()) {
                    throw ParseError(line, "normalization", "min/max must have 8 entries");
                }
            }
            have_header = true;
            continue;
        }
        ds.transitions.push_back(decode_transition(text, line));
    }
    ds.empty_warning = ds.transitions.empty();
    if (!ds.transitions.empty() && !ds.normalization.complete()) ds.refresh_normalization();
    return ds;
}

}  // namespace carl
