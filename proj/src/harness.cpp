#include "carl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "carl/error.hpp"
#include "carl/feature_importance.hpp"
#include "carl/io_util.hpp"
#include "carl/scenarios.hpp"
#include "carl/svg.hpp"

namespace carl::harness {

using nlohmann::json;

namespace {

constexpr const char* kSummaryHeader =
    "scenario,controller,seeds,mean_throughput_mbps,throughput_pct,mean_total_handovers,handover_pct,"
    "ues_0_5,ues_6_10,ues_11_plus";

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    for (const auto& part : split(value, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(part, &used);
            if (used != part.size() || v == 0) throw std::invalid_argument(part);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' expects a comma-separated list of positive integers");
        }
    }
    return out;
}

double pct(double value, double reference) {
    if (reference == 0.0) return value == 0.0 ? 100.0 : std::numeric_limits<double>::infinity();
    return 100.0 * value / reference;
}

bool close(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

fs::path run_dir(const fs::path& root, const std::string& scenario, const std::string& controller,
                 std::uint64_t seed) {
    return root / scenario / controller / fmt::format("seed_{}", seed);
}

}  // namespace

twin::ScenarioConfig resolve_scenario(const std::string& ref, const fs::path& base_dir) {
    const auto presets = twin::preset_names();
    if (std::find(presets.begin(), presets.end(), ref) != presets.end()) return twin::preset_scenario(ref);
    const fs::path p = fs::path(ref).is_absolute() || base_dir.empty() ? fs::path(ref) : base_dir / ref;
    return twin::load_scenario(p);
}

twin::ScenarioConfig collection_variant(const twin::ScenarioConfig& base, int index, std::mt19937_64& rng,
                                        twin::PairKnobs& initial_knobs) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    twin::ScenarioConfig v = base;
    v.seed = base.seed + 7919ULL * static_cast<std::uint64_t>(index + 1);
    v.start_time_of_day = 0.95 * u(rng);
    v.start_day_of_week = index % 7;
    for (auto& g : v.ue_groups) {
        g.count = static_cast<int>(std::lround(g.count * (0.8 + 0.4 * u(rng))));
        g.demand.rate_mbps *= 0.85 + 0.3 * u(rng);
        if (g.camp_cell >= 0) {
            // Rotate the camped cell through its sector so either side can be the overloaded one.
            std::vector<int> sector;
            const auto& cells = v.cells;
            auto it = std::find_if(cells.begin(), cells.end(), [&](const twin::Cell& c) { return c.cell_id == g.camp_cell; });
            for (const auto& c : cells) {
                if (c.site_id == it->site_id && c.sector_id == it->sector_id) sector.push_back(c.cell_id);
            }
            g.camp_cell = sector[static_cast<std::size_t>(index) % sector.size()];
        }
    }
    const auto& r = base.knob_maps.ranges;
    auto draw = [&](std::size_t k, double span) { return r[k].lo + span * (r[k].hi - r[k].lo) * u(rng); };
    initial_knobs = base.baseline_knobs;
    initial_knobs.max_rc = draw(kMaxRc, 1.0);
    initial_knobs.rc_headroom = draw(kRcHeadroom, 1.0);
    initial_knobs.delta_rc = draw(kDeltaRc, 0.4);
    initial_knobs.rsrp_cmlb_filter_dbm = draw(kRsrpCmlbFilter, 1.0);
    initial_knobs.cio_db = draw(kCio, 1.0);
    return v;
}

OfflineDataset collect_dataset(const twin::ScenarioConfig& scenario, const CollectOptions& options,
                               std::uint64_t seed) {
    if (options.runs < 1) throw ConfigError("collect needs at least one run");
    if (options.exploration_noise < 0.0) throw ConfigError("exploration noise must be nonnegative");
    std::mt19937_64 rng(seed);
    std::vector<Transition> all;
    for (int i = 0; i < options.runs; ++i) {
        twin::PairKnobs initial = scenario.baseline_knobs;
        twin::ScenarioConfig v;
        if (options.diversify) {
            v = collection_variant(scenario, i, rng, initial);
        } else {
            v = scenario;
            v.seed = scenario.seed + static_cast<std::uint64_t>(i);
        }
        if (options.epochs) v.horizon_epochs = *options.epochs;
        HeuristicConfig hc;
        hc.exploration_noise = options.exploration_noise;
        HeuristicController controller(v.knob_maps, initial, hc, seed * 1000003ULL + static_cast<std::uint64_t>(i));
        twin::RunResult r = twin::run_scenario(v, controller);
        all.insert(all.end(), r.transitions.begin(), r.transitions.end());
    }
    OfflineDataset ds = twin::to_dataset(std::move(all));
    if (ds.empty()) ds.empty_warning = true;
    return ds;
}

TrainSpec parse_train_spec(const std::string& text) {
    TrainSpec spec;
    std::vector<std::pair<std::string, std::string>> extra;
    spec.trainer = parse_trainer_config(text, &extra);
    for (const auto& [key, value] : extra) {
        try {
            if (key == "seed") {
                spec.seed = std::stoull(value);
            } else if (key == "sub_policies") {
                spec.sub_policies = std::stoul(value);
            } else if (key == "mixing_mode") {
                spec.mixing = mixing_mode_from_string(value);
            } else if (key == "temperature") {
                spec.temperature = std::stod(value);
            } else if (key == "factorizer_hidden") {
                spec.architecture.factorizer_hidden = parse_sizes(key, value);
            } else if (key == "sub_policy_hidden") {
                spec.architecture.sub_policy_hidden = parse_sizes(key, value);
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("config key '" + key + "' has an invalid value '" + value + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("config key '" + key + "' is out of range");
        }
    }
    if (spec.sub_policies == 0) throw ConfigError("sub_policies must be at least 1");
    if (!(spec.temperature > 0.0)) throw ConfigError("temperature must be positive");
    return spec;
}

TrainSpec load_train_spec(const fs::path& path) {
    try {
        return parse_train_spec(read_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

TrainOutcome train_checkpoint(const OfflineDataset& dataset, const TrainSpec& spec) {
    dataset.check_trainable();
    CascadePolicy policy =
        CascadePolicy::create(spec.sub_policies, spec.seed, spec.architecture, spec.mixing, spec.temperature);
    CriticPair critics = CriticPair::create(spec.seed + 1, spec.trainer.critic_hidden);
    OfflineTrainer trainer(std::move(policy), std::move(critics), spec.trainer, spec.seed + 2);
    TrainOutcome out;
    if (spec.trainer.gradient_steps > 0) {
        const std::vector<Sample> samples = prepare_samples(dataset);
        out.losses = trainer.run(samples, spec.trainer.gradient_steps);
    }
    out.checkpoint = make_checkpoint(trainer, dataset.normalization);
    return out;
}

void ExperimentPlan::validate() const {
    if (scenarios.empty()) throw ConfigError("plan needs at least one scenario");
    if (controllers.empty()) throw ConfigError("plan needs at least one controller");
    if (seeds.empty()) throw ConfigError("plan needs at least one seed");
    if (epochs && *epochs < 1) throw ConfigError("plan epochs must be positive");
    std::set<std::string> names;
    static const std::set<std::string> kTypes{"baseline", "heuristic", "qtable", "policy", "online_carl"};
    for (const auto& c : controllers) {
        if (c.name.empty()) throw ConfigError("controller needs a name");
        if (!names.insert(c.name).second) throw ConfigError("duplicate controller name '" + c.name + "'");
        if (!kTypes.count(c.type)) throw ConfigError("controller '" + c.name + "' has unknown type '" + c.type + "'");
        if (c.type == "policy" && c.checkpoint.empty()) {
            throw ConfigError("controller '" + c.name + "' needs a checkpoint");
        }
        if (c.type == "qtable" && c.dataset.empty()) throw ConfigError("controller '" + c.name + "' needs a dataset");
    }
}

ExperimentPlan parse_plan(const std::string& json_text, const fs::path& base_dir) {
    ExperimentPlan plan;
    plan.base_dir = base_dir;
    try {
        const json j = json::parse(json_text);
        plan.output_dir = j.value("output_dir", plan.output_dir.string());
        if (plan.output_dir.is_relative() && !base_dir.empty()) plan.output_dir = base_dir / plan.output_dir;
        plan.scenarios = j.at("scenarios").get<std::vector<std::string>>();
        plan.seeds = j.value("seeds", plan.seeds);
        if (j.contains("epochs")) plan.epochs = j["epochs"].get<int>();
        if (j.contains("report")) {
            plan.plots = j["report"].value("plots", plan.plots);
            plan.feature_importance = j["report"].value("feature_importance", plan.feature_importance);
        }
        for (const json& c : j.at("controllers")) {
            ControllerSpec s;
            s.name = c.at("name").get<std::string>();
            s.type = c.value("type", s.name);
            s.checkpoint = c.value("checkpoint", "");
            s.dataset = c.value("dataset", "");
            s.exploration_noise = c.value("exploration_noise", 0.0);
            s.train_config = c.value("train_config", "");
            s.warmup_epochs = c.value("warmup_epochs", s.warmup_epochs);
            s.steps_per_epoch = c.value("steps_per_epoch", s.steps_per_epoch);
            plan.controllers.push_back(s);
        }
        if (j.contains("collect")) {
            const json& c = j["collect"];
            plan.collect_scenario = c.at("scenario").get<std::string>();
            plan.collect.runs = c.value("runs", plan.collect.runs);
            plan.collect.exploration_noise = c.value("noise", plan.collect.exploration_noise);
            plan.collect.diversify = c.value("diversify", plan.collect.diversify);
            if (c.contains("epochs")) plan.collect.epochs = c["epochs"].get<int>();
            plan.collect_seed = c.value("seed", plan.collect_seed);
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            plan.train_config = t.at("config").get<std::string>();
            if (t.contains("seed")) plan.train_seed = t["seed"].get<std::uint64_t>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed plan: ") + e.what());
    }
    plan.validate();
    return plan;
}

ExperimentPlan load_plan(const fs::path& path) {
    try {
        return parse_plan(read_file(path), fs::current_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

fs::path resolve_artifact(const std::string& ref, const ExperimentPlan& plan) {
    if (ref == "@dataset") return plan.output_dir / "dataset.jsonl";
    if (ref == "@checkpoint") return plan.output_dir / "checkpoint.json";
    const fs::path p(ref);
    return p.is_absolute() || plan.base_dir.empty() ? p : plan.base_dir / p;
}

std::unique_ptr<twin::Controller> make_controller(const ControllerSpec& spec, const ExperimentPlan& plan,
                                                  const twin::ScenarioConfig& scenario, std::uint64_t seed) {
    const TsAction golden = scenario.knob_maps.to_action(scenario.baseline_knobs);
    if (spec.type == "baseline") return std::make_unique<StaticController>(golden, spec.name);
    if (spec.type == "heuristic") {
        HeuristicConfig hc;
        hc.exploration_noise = spec.exploration_noise;
        return std::make_unique<HeuristicController>(scenario.knob_maps, scenario.baseline_knobs, hc, seed);
    }
    if (spec.type == "qtable") {
        const fs::path p = resolve_artifact(spec.dataset, plan);
        if (!fs::exists(p)) throw ConfigError("controller '" + spec.name + "': missing " + p.string());
        if (p.extension() == ".qtable") return std::make_unique<QTableController>(QTable::load(p));
        return std::make_unique<QTableController>(QTable::build(read_dataset(p), default_bins(), golden));
    }
    if (spec.type == "policy") {
        const fs::path p = resolve_artifact(spec.checkpoint, plan);
        if (!fs::exists(p)) throw ConfigError("controller '" + spec.name + "': missing checkpoint " + p.string());
        Checkpoint ck = load_checkpoint(p);
        return std::make_unique<PolicyController>(std::move(ck.policy), std::move(ck.normalization), spec.name);
    }
    if (spec.type == "online_carl") {
        OnlineCarlConfig oc;
        if (!spec.train_config.empty()) {
            TrainSpec ts = load_train_spec(resolve_artifact(spec.train_config, plan));
            oc.trainer = ts.trainer;
            oc.sub_policies = ts.sub_policies;
            oc.architecture = ts.architecture;
        }
        oc.warmup_epochs = spec.warmup_epochs;
        oc.steps_per_epoch = spec.steps_per_epoch;
        return std::make_unique<OnlineCarlController>(oc, seed);
    }
    throw ConfigError("unknown controller type '" + spec.type + "'");
}

std::array<int, 3> handover_histogram(const std::vector<int>& per_ue) {
    std::array<int, 3> bins{};
    for (int h : per_ue) {
        if (h < 0) throw DomainError("negative handover count");
        ++bins[h <= 5 ? 0 : (h <= 10 ? 1 : 2)];
    }
    return bins;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out = std::string(kSummaryHeader) + "\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.scenario, r.controller, r.seeds,
                           r.mean_throughput_mbps, r.throughput_pct, r.mean_total_handovers, r.handover_pct,
                           r.histogram[0], r.histogram[1], r.histogram[2]);
    }
    return out;
}

std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kSummaryHeader) throw ConfigError("summary.csv has an unexpected header");
    std::vector<SummaryRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 10) throw ParseError(line_no, "summary", "expected 10 columns");
        try {
            SummaryRow r;
            r.scenario = f[0];
            r.controller = f[1];
            r.seeds = std::stoul(f[2]);
            r.mean_throughput_mbps = std::stod(f[3]);
            r.throughput_pct = std::stod(f[4]);
            r.mean_total_handovers = std::stod(f[5]);
            r.handover_pct = std::stod(f[6]);
            r.histogram = {std::stoi(f[7]), std::stoi(f[8]), std::stoi(f[9])};
            rows.push_back(r);
        } catch (const std::exception&) {
            throw ParseError(line_no, "summary", "malformed number");
        }
    }
    return rows;
}

void normalize_to_baseline(std::vector<SummaryRow>& rows) {
    std::map<std::string, const SummaryRow*> base;
    for (const auto& r : rows) {
        if (r.controller == "baseline") base[r.scenario] = &r;
    }
    std::map<std::string, std::pair<double, double>> ref;
    for (const auto& [s, r] : base) ref[s] = {r->mean_throughput_mbps, r->mean_total_handovers};
    for (auto& r : rows) {
        auto it = ref.find(r.scenario);
        if (it == ref.end()) {
            r.throughput_pct = std::numeric_limits<double>::quiet_NaN();
            r.handover_pct = std::numeric_limits<double>::quiet_NaN();
        } else {
            r.throughput_pct = pct(r.mean_throughput_mbps, it->second.first);
            r.handover_pct = pct(r.mean_total_handovers, it->second.second);
        }
    }
}

KpiTotals totals_from_kpi_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line != "epoch,cell_id,prb_util,rc,connected_ues,served_mbits,throughput_mbps,ho_out,ho_in") {
        throw ConfigError("KPI CSV has an unexpected header");
    }
    std::map<long, double> per_epoch;
    KpiTotals t;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 9) throw ParseError(line_no, "kpi", "expected 9 columns");
        per_epoch[std::stol(f[0])] += std::stod(f[6]);
        t.total_handovers += std::stoi(f[7]);
    }
    double sum = 0.0;
    for (const auto& [e, v] : per_epoch) sum += v;
    t.epochs = static_cast<int>(per_epoch.size());
    t.mean_aggregate_throughput = t.epochs > 0 ? sum / t.epochs : 0.0;
    return t;
}

std::vector<int> handovers_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line != "ue_id,handovers") throw ConfigError("handover CSV has an unexpected header");
    std::vector<int> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 2) throw ConfigError("handover CSV row needs 2 columns");
        out.push_back(std::stoi(f[1]));
    }
    return out;
}

std::vector<SummaryRow> evaluate(const ExperimentPlan& plan) {
    plan.validate();
    std::vector<SummaryRow> rows;
    for (const auto& ref : plan.scenarios) {
        twin::ScenarioConfig scenario = resolve_scenario(ref, plan.base_dir);
        if (plan.epochs) scenario.horizon_epochs = *plan.epochs;
        for (const auto& spec : plan.controllers) {
            SummaryRow row;
            row.scenario = scenario.name;
            row.controller = spec.name;
            double thr = 0.0;
            double hos = 0.0;
            std::vector<StateVector> states;
            std::optional<Checkpoint> ck;
            if (spec.type == "policy" && plan.feature_importance) ck = load_checkpoint(resolve_artifact(spec.checkpoint, plan));
            for (std::uint64_t seed : plan.seeds) {
                twin::ScenarioConfig sc = scenario;
                sc.seed = seed;
                auto controller = make_controller(spec, plan, sc, seed);
                const twin::RunResult result = twin::run_scenario(sc, *controller);
                const fs::path dir = run_dir(plan.output_dir, scenario.name, spec.name, seed);
                const std::string kpi = twin::kpi_csv(result);
                const std::string hist = twin::ue_handover_csv(result);
                write_file_atomic(dir / "kpi.csv", kpi);
                write_file_atomic(dir / "ue_handovers.csv", hist);
                const KpiTotals totals = totals_from_kpi_csv(kpi);
                thr += totals.mean_aggregate_throughput;
                hos += totals.total_handovers;
                const auto bins = handover_histogram(handovers_from_csv(hist));
                for (std::size_t b = 0; b < 3; ++b) row.histogram[b] += bins[b];
                ++row.seeds;
                if (ck) {
                    for (const auto& t : result.transitions) states.push_back(normalize_state(t.state, ck->normalization));
                }
            }
            row.mean_throughput_mbps = thr / static_cast<double>(row.seeds);
            row.mean_total_handovers = hos / static_cast<double>(row.seeds);
            if (ck && !states.empty()) {
                const FeatureImportance fi = feature_importance(ck->policy, states);
                std::string csv = "feature,importance\n";
                for (std::size_t i = 0; i < kStateDim; ++i) csv += fmt::format("{},{}\n", feature_name(i), fi.scores[i]);
                if (fi.single_class) csv += "# single_class: the factorizer picked one sub-policy for every state\n";
                write_file_atomic(plan.output_dir / scenario.name / spec.name / "feature_importance.csv", csv);
            }
            rows.push_back(row);
        }
    }
    normalize_to_baseline(rows);
    write_file_atomic(plan.output_dir / "summary.csv", summary_csv(rows));
    return rows;
}

ReportOutcome report(const fs::path& results_dir) {
    ReportOutcome out;
    std::string md = "# Evaluation report\n\n";
    const fs::path summary_path = results_dir / "summary.csv";
    std::vector<SummaryRow> rows;
    if (!fs::exists(summary_path)) {
        out.gaps.push_back("summary.csv is missing");
    } else {
        rows = parse_summary_csv(read_file(summary_path));
    }

    if (!rows.empty()) {
        md += "| scenario | controller | seeds | throughput (Mbps) | throughput vs baseline | total HOs | HOs vs "
              "baseline | UEs 0-5 HOs | UEs 6-10 HOs | UEs 11+ HOs |\n";
        md += "|---|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& r : rows) {
            md += fmt::format("| {} | {} | {} | {:.3f} | {:.1f}% | {:.1f} | {:.1f}% | {} | {} | {} |\n", r.scenario,
                              r.controller, r.seeds, r.mean_throughput_mbps, r.throughput_pct,
                              r.mean_total_handovers, r.handover_pct, r.histogram[0], r.histogram[1],
                              r.histogram[2]);
        }
        md += "\n";
    }

    const fs::path plots = results_dir / "plots";
    std::map<std::string, std::vector<const SummaryRow*>> by_scenario;
    for (const auto& r : rows) by_scenario[r.scenario].push_back(&r);
    for (const auto& [scenario, list] : by_scenario) {
        std::vector<std::string> labels;
        std::vector<double> thr;
        std::vector<double> hos;
        std::vector<std::array<double, 3>> hist;
        for (const SummaryRow* r : list) {
            labels.push_back(r->controller);
            thr.push_back(std::isfinite(r->throughput_pct) ? r->throughput_pct : r->mean_throughput_mbps);
            hos.push_back(std::isfinite(r->handover_pct) ? r->handover_pct : r->mean_total_handovers);
            hist.push_back({double(r->histogram[0]), double(r->histogram[1]), double(r->histogram[2])});
        }
        const fs::path f1 = plots / (scenario + "_throughput.svg");
        const fs::path f2 = plots / (scenario + "_handovers.svg");
        const fs::path f3 = plots / (scenario + "_ho_histogram.svg");
        write_file_atomic(f1, svg::bar_chart(scenario + ": mean aggregate throughput (baseline = 100)", labels, thr));
        write_file_atomic(f2, svg::bar_chart(scenario + ": total handovers (baseline = 100)", labels, hos));
        write_file_atomic(f3, svg::grouped_bar_chart(scenario + ": UEs per handover-count bin", labels,
                                                     {"0-5", "6-10", "11+"}, hist));
        out.files.insert(out.files.end(), {f1, f2, f3});
        md += fmt::format("## {}\n\n![throughput](plots/{}_throughput.svg)\n![handovers](plots/{}_handovers.svg)\n"
                          "![histogram](plots/{}_ho_histogram.svg)\n\n",
                          scenario, scenario, scenario, scenario);

        for (const SummaryRow* r : list) {
            const fs::path ctrl_dir = results_dir / scenario / r->controller;
            std::vector<fs::path> seeds;
            if (fs::exists(ctrl_dir)) {
                for (const auto& e : fs::directory_iterator(ctrl_dir)) {
                    if (e.is_directory()) seeds.push_back(e.path());
                }
            }
            std::sort(seeds.begin(), seeds.end());
            if (seeds.empty()) {
                out.gaps.push_back(fmt::format("{}/{}: no per-seed results", scenario, r->controller));
                continue;
            }
            for (const auto& s : seeds) {
                if (!fs::exists(s / "ue_handovers.csv")) {
                    out.gaps.push_back(fmt::format("{}/{}/{}: ue_handovers.csv missing, histogram not verified",
                                                   scenario, r->controller, s.filename().string()));
                }
            }
            const fs::path kpi = seeds.front() / "kpi.csv";
            if (!fs::exists(kpi)) {
                out.gaps.push_back(fmt::format("{}/{}: kpi.csv missing, traces skipped", scenario, r->controller));
                continue;
            }
            std::map<int, std::pair<std::vector<double>, std::vector<double>>> connected;
            std::map<int, std::pair<std::vector<double>, std::vector<double>>> util;
            std::istringstream in(read_file(kpi));
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto f = split(line, ',');
                const int cell = std::stoi(f[1]);
                const double e = std::stod(f[0]);
                connected[cell].first.push_back(e);
                connected[cell].second.push_back(std::stod(f[4]));
                util[cell].first.push_back(e);
                util[cell].second.push_back(std::stod(f[2]));
            }
            std::vector<svg::Series> cs;
            std::vector<svg::Series> us;
            for (auto& [cell, xy] : connected) cs.push_back({fmt::format("cell {}", cell), xy.first, xy.second});
            for (auto& [cell, xy] : util) us.push_back({fmt::format("cell {}", cell), xy.first, xy.second});
            const std::string stem = scenario + "_" + r->controller;
            const fs::path f4 = plots / (stem + "_connected.svg");
            const fs::path f5 = plots / (stem + "_prb_util.svg");
            write_file_atomic(f4, svg::line_chart(stem + ": connected UEs per cell (" + seeds.front().filename().string() + ")", "epoch", cs));
            write_file_atomic(f5, svg::line_chart(stem + ": PRB utilization per cell (" + seeds.front().filename().string() + ")", "epoch", us));
            out.files.insert(out.files.end(), {f4, f5});
            md += fmt::format("![connected](plots/{}_connected.svg)\n![prb](plots/{}_prb_util.svg)\n\n", stem, stem);

            const fs::path fi = ctrl_dir / "feature_importance.csv";
            if (fs::exists(fi)) {
                md += fmt::format("Feature importance for {} on {}:\n\n```\n{}```\n\n", r->controller, scenario,
                                  read_file(fi));
            }
        }
    }
    if (!out.gaps.empty()) {
        md += "## Gaps\n\n";
        for (const auto& g : out.gaps) md += "- " + g + "\n";
    }
    write_file_atomic(results_dir / "report.md", md);
    out.files.push_back(results_dir / "report.md");
    return out;
}

CheckOutcome check(const fs::path& results_dir) {
    CheckOutcome out;
    std::vector<SummaryRow> stored = parse_summary_csv(read_file(results_dir / "summary.csv"));
    std::vector<SummaryRow> recomputed;
    for (const auto& r : stored) {
        SummaryRow x;
        x.scenario = r.scenario;
        x.controller = r.controller;
        const fs::path ctrl_dir = results_dir / r.scenario / r.controller;
        std::vector<fs::path> seeds;
        if (fs::exists(ctrl_dir)) {
            for (const auto& e : fs::directory_iterator(ctrl_dir)) {
                if (e.is_directory()) seeds.push_back(e.path());
            }
        }
        std::sort(seeds.begin(), seeds.end());
        double thr = 0.0;
        double hos = 0.0;
        for (const auto& s : seeds) {
            const KpiTotals t = totals_from_kpi_csv(read_file(s / "kpi.csv"));
            thr += t.mean_aggregate_throughput;
            hos += t.total_handovers;
            const auto bins = handover_histogram(handovers_from_csv(read_file(s / "ue_handovers.csv")));
            for (std::size_t b = 0; b < 3; ++b) x.histogram[b] += bins[b];
        }
        x.seeds = seeds.size();
        x.mean_throughput_mbps = seeds.empty() ? 0.0 : thr / static_cast<double>(seeds.size());
        x.mean_total_handovers = seeds.empty() ? 0.0 : hos / static_cast<double>(seeds.size());
        recomputed.push_back(x);
    }
    normalize_to_baseline(recomputed);
    for (std::size_t i = 0; i < stored.size(); ++i) {
        const SummaryRow& a = stored[i];
        const SummaryRow& b = recomputed[i];
        const std::string tag = a.scenario + "/" + a.controller;
        if (a.seeds != b.seeds) out.mismatches.push_back(tag + ": seed count");
        if (!close(a.mean_throughput_mbps, b.mean_throughput_mbps)) out.mismatches.push_back(tag + ": throughput");
        if (!close(a.mean_total_handovers, b.mean_total_handovers)) out.mismatches.push_back(tag + ": handovers");
        if (!close(a.throughput_pct, b.throughput_pct)) out.mismatches.push_back(tag + ": throughput_pct");
        if (!close(a.handover_pct, b.handover_pct)) out.mismatches.push_back(tag + ": handover_pct");
        if (a.histogram != b.histogram) out.mismatches.push_back(tag + ": histogram");
        ++out.rows_checked;
    }
    return out;
}

OracleResult grid_search_oracle(const twin::ScenarioConfig& scenario, const OracleGrid& grid) {
    OracleResult out;
    StaticController base(scenario.knob_maps.to_action(scenario.baseline_knobs));
    out.baseline_throughput = twin::run_scenario(scenario, base).mean_aggregate_throughput();
    out.best_knobs = scenario.baseline_knobs;
    out.best_throughput = out.baseline_throughput;
    for (double mr : grid.max_rc) {
        for (double hr : grid.rc_headroom) {
            for (double dr : grid.delta_rc) {
                for (double f : grid.rsrp_cmlb_filter_dbm) {
                    for (double cio : grid.cio_db) {
                        const twin::PairKnobs k{true, mr, hr, dr, f, cio};
                        StaticController c(scenario.knob_maps.to_action(k));
                        const double t = twin::run_scenario(scenario, c).mean_aggregate_throughput();
                        ++out.evaluated;
                        if (t > out.best_throughput) {
                            out.best_throughput = t;
                            out.best_knobs = k;
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::string oracle_to_json_text(const OracleResult& r, const std::string& scenario_name) {
    const json j = {
        {"scenario", scenario_name},
        {"evaluated", r.evaluated},
        {"baseline_throughput_mbps", r.baseline_throughput},
        {"best_throughput_mbps", r.best_throughput},
        {"best_knobs",
         {{"offloadAllowed", r.best_knobs.offload_allowed},
          {"maxRC", r.best_knobs.max_rc},
          {"RCHeadroom", r.best_knobs.rc_headroom},
          {"deltaRC", r.best_knobs.delta_rc},
          {"rsrpCMLBFilter", r.best_knobs.rsrp_cmlb_filter_dbm},
          {"cio", r.best_knobs.cio_db}}},
    };
    return j.dump(2) + "\n";
}

OracleResult oracle_from_json_text(const std::string& text) {
    try {
        const json j = json::parse(text);
        OracleResult r;
        r.evaluated = j.at("evaluated").get<std::size_t>();
        r.baseline_throughput = j.at("baseline_throughput_mbps").get<double>();
        r.best_throughput = j.at("best_throughput_mbps").get<double>();
        const json& k = j.at("best_knobs");
        r.best_knobs = {k.at("offloadAllowed").get<bool>(), k.at("maxRC").get<double>(),
                        k.at("RCHeadroom").get<double>(),   k.at("deltaRC").get<double>(),
                        k.at("rsrpCMLBFilter").get<double>(), k.at("cio").get<double>()};
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed oracle file: ") + e.what());
    }
}

std::vector<SummaryRow> run_plan(const ExperimentPlan& plan) {
    plan.validate();
    if (plan.collect_scenario) {
        const twin::ScenarioConfig sc = resolve_scenario(*plan.collect_scenario, plan.base_dir);
        write_dataset(plan.output_dir / "dataset.jsonl", collect_dataset(sc, plan.collect, plan.collect_seed));
    }
    if (plan.train_config) {
        TrainSpec spec = load_train_spec(resolve_artifact(*plan.train_config, plan));
        if (plan.train_seed) spec.seed = *plan.train_seed;
        const TrainOutcome t = train_checkpoint(read_dataset(plan.output_dir / "dataset.jsonl"), spec);
        save_checkpoint(plan.output_dir / "checkpoint.json", t.checkpoint);
        write_file_atomic(plan.output_dir / "loss.csv", loss_curve_csv(t.losses));
    }
    auto rows = evaluate(plan);
    if (plan.plots) report(plan.output_dir);
    return rows;
}

}  // namespace carl::harness
