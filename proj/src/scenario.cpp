#include <json.hpp>

#include "carl/error.hpp"
#include "carl/io_util.hpp"
#include "carl/scenarios.hpp"
#include "carl/twin.hpp"

namespace carl::twin {

using nlohmann::json;

namespace {

constexpr const char* kKnobKeys[kActionDim] = {"offloadAllowed", "maxRC", "RCHeadroom",
                                               "deltaRC", "rsrpCMLBFilter", "cio"};

json a5_json(const A5Thresholds& t) {
    return {{"hysThres3InterFreq", t.hys_thres3_inter_freq_db},
            {"thres3InterFreq", t.thres3_inter_freq_dbm},
            {"thres3aInterFreq", t.thres3a_inter_freq_dbm}};
}

A5Thresholds a5_from(const json& j) {
    A5Thresholds t;
    t.hys_thres3_inter_freq_db = j.at("hysThres3InterFreq").get<double>();
    t.thres3_inter_freq_dbm = j.at("thres3InterFreq").get<double>();
    t.thres3a_inter_freq_dbm = j.at("thres3aInterFreq").get<double>();
    return t;
}

json knobs_json(const PairKnobs& k) {
    return {{"offloadAllowed", k.offload_allowed}, {"maxRC", k.max_rc},
            {"RCHeadroom", k.rc_headroom},         {"deltaRC", k.delta_rc},
            {"rsrpCMLBFilter", k.rsrp_cmlb_filter_dbm}, {"cio", k.cio_db}};
}

PairKnobs knobs_from(const json& j) {
    PairKnobs k;
    k.offload_allowed = j.at("offloadAllowed").get<bool>();
    k.max_rc = j.at("maxRC").get<double>();
    k.rc_headroom = j.at("RCHeadroom").get<double>();
    k.delta_rc = j.at("deltaRC").get<double>();
    k.rsrp_cmlb_filter_dbm = j.at("rsrpCMLBFilter").get<double>();
    k.cio_db = j.at("cio").get<double>();
    return k;
}

}  // namespace

std::string scenario_to_json_text(const ScenarioConfig& c) {
    json cells = json::array();
    for (const Cell& cell : c.cells) {
        cells.push_back({{"cell_id", cell.cell_id},
                         {"site_id", cell.site_id},
                         {"sector_id", cell.sector_id},
                         {"carrier_freq_mhz", cell.carrier_freq_mhz},
                         {"bandwidth_mhz", cell.bandwidth_mhz},
                         {"prb_count", cell.prb_count},
                         {"tx_power_dbm", cell.tx_power_dbm},
                         {"x", cell.position.x},
                         {"y", cell.position.y}});
    }
    json prop = json::array();
    for (const auto& [freq, m] : c.propagation) {
        prop.push_back({{"freq_mhz", freq}, {"pl0_db", m.pl0_db}, {"exponent", m.exponent},
                        {"reference_distance_m", m.reference_distance_m}});
    }
    json overrides = json::array();
    for (const auto& [s, t, th] : c.a5_overrides) {
        json o = a5_json(th);
        o["serving_freq_mhz"] = s;
        o["target_freq_mhz"] = t;
        overrides.push_back(o);
    }
    json ranges = json::object();
    for (std::size_t k = 0; k < kActionDim; ++k) {
        ranges[kKnobKeys[k]] = {c.knob_maps.ranges[k].lo, c.knob_maps.ranges[k].hi};
    }
    json groups = json::array();
    for (const UeGroup& g : c.ue_groups) {
        groups.push_back({{"count", g.count},
                          {"x", g.center.x},
                          {"y", g.center.y},
                          {"min_radius_m", g.min_radius_m},
                          {"max_radius_m", g.max_radius_m},
                          {"camp_cell", g.camp_cell},
                          {"speed_mps", g.speed_mps},
                          {"rate_mbps", g.demand.rate_mbps},
                          {"mean_on_s", g.demand.mean_on_s},
                          {"mean_off_s", g.demand.mean_off_s},
                          {"diurnal_amplitude", g.demand.diurnal_amplitude},
                          {"diurnal_peak_tod", g.demand.diurnal_peak_tod}});
    }
    json j = {
        {"name", c.name},
        {"seed", c.seed},
        {"epoch_s", c.epoch_s},
        {"horizon_epochs", c.horizon_epochs},
        {"warmup_epochs", c.warmup_epochs},
        {"start_time_of_day", c.start_time_of_day},
        {"start_day_of_week", c.start_day_of_week},
        {"check_period_ms", c.check_period_ms},
        {"ho_interruption_ms", c.ho_interruption_ms},
        {"noise_figure_db", c.noise_figure_db},
        {"interference_factor", c.interference_factor},
        {"se_cap", c.se_cap},
        {"idle_inactivity_s", c.idle_inactivity_s},
        {"intra_sector_only", c.intra_sector_only},
        {"cells", cells},
        {"propagation", prop},
        {"a5", {{"default", a5_json(c.default_a5)}, {"overrides", overrides}}},
        {"knob_ranges", ranges},
        {"baseline_knobs", knobs_json(c.baseline_knobs)},
        {"ue_groups", groups},
    };
    return j.dump(2) + "\n";
}

ScenarioConfig scenario_from_json_text(const std::string& text) {
    ScenarioConfig c;
    try {
        const json j = json::parse(text);
        c.name = j.value("name", c.name);
        c.seed = j.value("seed", c.seed);
        c.epoch_s = j.value("epoch_s", c.epoch_s);
        c.horizon_epochs = j.value("horizon_epochs", c.horizon_epochs);
        c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
        c.start_time_of_day = j.value("start_time_of_day", c.start_time_of_day);
        c.start_day_of_week = j.value("start_day_of_week", c.start_day_of_week);
        c.check_period_ms = j.value("check_period_ms", c.check_period_ms);
        c.ho_interruption_ms = j.value("ho_interruption_ms", c.ho_interruption_ms);
        c.noise_figure_db = j.value("noise_figure_db", c.noise_figure_db);
        c.interference_factor = j.value("interference_factor", c.interference_factor);
        c.se_cap = j.value("se_cap", c.se_cap);
        c.idle_inactivity_s = j.value("idle_inactivity_s", c.idle_inactivity_s);
        c.intra_sector_only = j.value("intra_sector_only", c.intra_sector_only);

        for (const json& e : j.at("cells")) {
            Cell cell;
            cell.cell_id = e.at("cell_id").get<int>();
            cell.site_id = e.value("site_id", 0);
            cell.sector_id = e.value("sector_id", 0);
            cell.carrier_freq_mhz = e.at("carrier_freq_mhz").get<double>();
            cell.bandwidth_mhz = e.value("bandwidth_mhz", 10.0);
            cell.prb_count = e.value("prb_count", static_cast<int>(std::lround(cell.bandwidth_mhz * 5.0)));
            cell.tx_power_dbm = e.value("tx_power_dbm", cell.tx_power_dbm);
            cell.position = {e.value("x", 0.0), e.value("y", 0.0)};
            c.cells.push_back(cell);
        }
        for (const json& e : j.at("propagation")) {
            PropagationModel m;
            m.pl0_db = e.at("pl0_db").get<double>();
            m.exponent = e.at("exponent").get<double>();
            m.reference_distance_m = e.value("reference_distance_m", 1.0);
            c.propagation[std::llround(e.at("freq_mhz").get<double>())] = m;
        }
        if (j.contains("a5")) {
            const json& a5 = j["a5"];
            if (a5.contains("default")) c.default_a5 = a5_from(a5["default"]);
            for (const json& o : a5.value("overrides", json::array())) {
                c.a5_overrides.emplace_back(o.at("serving_freq_mhz").get<double>(),
                                            o.at("target_freq_mhz").get<double>(), a5_from(o));
            }
        }
        if (j.contains("knob_ranges")) {
            for (std::size_t k = 0; k < kActionDim; ++k) {
                if (!j["knob_ranges"].contains(kKnobKeys[k])) continue;
                const json& r = j["knob_ranges"][kKnobKeys[k]];
                c.knob_maps.ranges[k] = {r.at(0).get<double>(), r.at(1).get<double>()};
            }
        }
        if (j.contains("baseline_knobs")) c.baseline_knobs = knobs_from(j["baseline_knobs"]);
        for (const json& e : j.at("ue_groups")) {
            UeGroup g;
            g.count = e.at("count").get<int>();
            g.center = {e.value("x", 0.0), e.value("y", 0.0)};
            g.min_radius_m = e.value("min_radius_m", g.min_radius_m);
            g.max_radius_m = e.value("max_radius_m", g.max_radius_m);
            g.camp_cell = e.value("camp_cell", -1);
            g.speed_mps = e.value("speed_mps", g.speed_mps);
            g.demand.rate_mbps = e.value("rate_mbps", g.demand.rate_mbps);
            g.demand.mean_on_s = e.value("mean_on_s", g.demand.mean_on_s);
            g.demand.mean_off_s = e.value("mean_off_s", g.demand.mean_off_s);
            g.demand.diurnal_amplitude = e.value("diurnal_amplitude", g.demand.diurnal_amplitude);
            g.demand.diurnal_peak_tod = e.value("diurnal_peak_tod", g.demand.diurnal_peak_tod);
            c.ue_groups.push_back(g);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    try {
        return scenario_from_json_text(read_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace carl::twin

namespace carl::twin {

namespace {

ScenarioConfig two_cell_hotspot(const std::string& name, double f_a, double f_b) {
    ScenarioConfig c;
    c.name = name;
    c.seed = 7;
    c.horizon_epochs = 20;
    c.warmup_epochs = 1;
    c.start_time_of_day = 0.40;
    c.cells = {
        Cell{0, 0, 0, f_a, 10.0, 50, 18.0, {0.0, 0.0}},
        Cell{1, 0, 0, f_b, 10.0, 50, 18.0, {0.0, 0.0}},
    };
    c.baseline_knobs = PairKnobs{false, 0.3, 0.5, 0.2, -110.0, 0.0};
    return c;
}

}  // namespace

ScenarioConfig hotspot_scenario() {
    ScenarioConfig c = two_cell_hotspot("hotspot", 1900.0, 2100.0);
    c.propagation[1900] = PropagationModel{38.0, 3.5, 1.0};
    c.propagation[2100] = PropagationModel{39.0, 3.5, 1.0};
    UeGroup g;
    g.count = 30;
    g.min_radius_m = 30.0;
    g.max_radius_m = 450.0;
    g.camp_cell = 0;
    g.speed_mps = 0.2;
    g.demand = DemandProfile{3.0, 60.0, 0.0, 0.0, 0.75};
    c.ue_groups = {g};
    return c;
}

ScenarioConfig shifted_hotspot_scenario() {
    ScenarioConfig c = two_cell_hotspot("shifted_hotspot", 2300.0, 2600.0);
    c.seed = 11;
    c.start_time_of_day = 0.70;
    c.propagation[2300] = PropagationModel{40.0, 3.5, 1.0};
    c.propagation[2600] = PropagationModel{41.0, 3.5, 1.0};
    UeGroup g;
    g.count = 36;
    g.min_radius_m = 30.0;
    g.max_radius_m = 400.0;
    g.camp_cell = 0;
    g.speed_mps = 0.2;
    g.demand = DemandProfile{3.2, 120.0, 30.0, 0.3, 0.8};
    c.ue_groups = {g};
    return c;
}

ScenarioConfig twelve_cell_scenario() {
    ScenarioConfig c;
    c.name = "twelve_cell";
    c.seed = 3;
    c.horizon_epochs = 30;
    c.warmup_epochs = 1;
    c.start_time_of_day = 0.30;
    c.propagation[700] = PropagationModel{30.0, 3.3, 1.0};
    c.propagation[1900] = PropagationModel{38.0, 3.5, 1.0};
    c.propagation[2100] = PropagationModel{39.0, 3.5, 1.0};
    const Position sites[3] = {{0.0, 0.0}, {700.0, 0.0}, {350.0, 600.0}};
    const double sector_freqs[2][2] = {{700.0, 1900.0}, {1900.0, 2100.0}};
    int id = 0;
    for (int s = 0; s < 3; ++s) {
        for (int sec = 0; sec < 2; ++sec) {
            for (double f : sector_freqs[sec]) c.cells.push_back(Cell{id++, s, sec, f, 10.0, 50, 18.0, sites[s]});
        }
    }
    c.baseline_knobs = PairKnobs{true, 0.3, 0.5, 0.2, -110.0, 0.0};
    for (int s = 0; s < 3; ++s) {
        UeGroup g;
        g.count = 50;
        g.center = sites[s];
        g.min_radius_m = 20.0;
        g.max_radius_m = 450.0;
        g.speed_mps = 1.0;
        g.demand = DemandProfile{1.5, 60.0, 40.0, 0.4, 0.75};
        c.ue_groups.push_back(g);
    }
    UeGroup hot;
    hot.count = 60;
    hot.center = {150.0, 100.0};
    hot.min_radius_m = 10.0;
    hot.max_radius_m = 200.0;
    hot.speed_mps = 0.5;
    hot.demand = DemandProfile{2.0, 120.0, 20.0, 0.2, 0.5};
    c.ue_groups.push_back(hot);
    return c;
}

std::vector<std::string> preset_names() { return {"hotspot", "shifted_hotspot", "twelve_cell"}; }

ScenarioConfig preset_scenario(const std::string& name) {
    if (name == "hotspot") return hotspot_scenario();
    if (name == "shifted_hotspot") return shifted_hotspot_scenario();
    if (name == "twelve_cell") return twelve_cell_scenario();
    throw ConfigError("unknown scenario preset '" + name + "'");
}

}  // namespace carl::twin
