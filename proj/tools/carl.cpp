#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "carl/checkpoint.hpp"
#include "carl/error.hpp"
#include "carl/feature_importance.hpp"
#include "carl/harness.hpp"
#include "carl/io_util.hpp"
#include "carl/scenarios.hpp"

namespace fs = std::filesystem;
using namespace carl;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
};

std::string require(const std::string& value, const char* what) {
    if (value.empty()) throw ConfigError(std::string("missing ") + what);
    return value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"carl: offline cascade RL for inter-frequency traffic steering on a RAN twin"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--config", g.config, "Config file (trainer config or experiment plan)");
    app.add_option("--out", g.out, "Output file or directory");

    auto* collect = app.add_subcommand("collect", "Run the exploratory heuristic and write a transitions dataset");
    std::string c_scenario;
    harness::CollectOptions c_opts;
    int c_epochs = 0;
    collect->add_option("--scenario", c_scenario, "Scenario file or preset name")->required();
    collect->add_option("--runs", c_opts.runs, "Number of twin runs");
    collect->add_option("--noise", c_opts.exploration_noise, "Exploration noise half-width");
    collect->add_flag("--diversify", c_opts.diversify, "Vary seed, start time, population and initial knobs per run");
    collect->add_option("--epochs", c_epochs, "Override the scenario horizon");

    auto* train = app.add_subcommand("train", "Train a cascade policy offline");
    std::string t_dataset;
    train->add_option("--dataset", t_dataset, "Transitions dataset")->required();

    auto* transfer = app.add_subcommand("transfer", "Extend a checkpoint with a sub-policy for new states");
    std::string x_checkpoint, x_states;
    transfer->add_option("--checkpoint", x_checkpoint, "Source checkpoint")->required();
    transfer->add_option("--states", x_states, "Transitions file holding the new-scenario states")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate controllers from an experiment plan");
    auto* run = app.add_subcommand("run", "Collect, train, evaluate and report from one plan");

    auto* report = app.add_subcommand("report", "Render report.md and charts from an evaluation directory");
    std::string r_results;
    report->add_option("--results", r_results, "Evaluation directory")->required();

    auto* check = app.add_subcommand("check", "Recompute summary.csv from the per-seed CSVs");
    std::string k_results;
    check->add_option("--results", k_results, "Evaluation directory")->required();

    auto* oracle = app.add_subcommand("oracle", "Grid-search constant knob settings");
    std::string o_scenario;
    oracle->add_option("--scenario", o_scenario, "Scenario file or preset name")->required();

    auto* scenario = app.add_subcommand("scenario", "Write a preset scenario as JSON");
    std::string s_preset;
    scenario->add_option("--preset", s_preset, "Preset name")->required();

    auto* importance = app.add_subcommand("importance", "Feature importance of a checkpoint's factorizer");
    std::string i_checkpoint, i_dataset;
    importance->add_option("--checkpoint", i_checkpoint, "Checkpoint")->required();
    importance->add_option("--dataset", i_dataset, "Transitions whose states are classified")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (collect->parsed()) {
            if (c_epochs > 0) c_opts.epochs = c_epochs;
            const auto sc = harness::resolve_scenario(c_scenario);
            const OfflineDataset ds = harness::collect_dataset(sc, c_opts, g.seed.value_or(1));
            const fs::path out = g.out.empty() ? fs::path("dataset.jsonl") : fs::path(g.out);
            write_dataset(out, ds);
            fmt::print("wrote {} transitions to {}\n", ds.transitions.size(), out.string());
            if (ds.empty_warning) fmt::print(stderr, "warning: dataset is empty\n");
        } else if (train->parsed()) {
            harness::TrainSpec spec = g.config.empty() ? harness::TrainSpec{} : harness::load_train_spec(g.config);
            if (g.seed) spec.seed = *g.seed;
            const OfflineDataset ds = read_dataset(t_dataset);
            const harness::TrainOutcome t = harness::train_checkpoint(ds, spec);
            const fs::path dir = g.out.empty() ? fs::path("train_out") : fs::path(g.out);
            save_checkpoint(dir / "checkpoint.json", t.checkpoint);
            write_file_atomic(dir / "loss.csv", loss_curve_csv(t.losses));
            fmt::print("trained {} steps on {} transitions; checkpoint in {}\n", t.losses.size(),
                       ds.transitions.size(), (dir / "checkpoint.json").string());
        } else if (transfer->parsed()) {
            Checkpoint ck = load_checkpoint(x_checkpoint);
            const OfflineDataset ds = read_dataset(x_states);
            if (ds.empty()) throw ConfigError("no states in " + x_states);
            std::vector<StateVector> states;
            for (const auto& t : ds.transitions) states.push_back(normalize_state(t.state, ck.normalization));
            const TransferResult init = transfer_init(ck.policy, states);
            ck.policy_optimizers.clear();
            ck.critics.reset();
            const fs::path out = g.out.empty() ? fs::path("transferred.json") : fs::path(g.out);
            save_checkpoint(out, ck);
            fmt::print("added sub-policy {} (mean factorizer weights:", init.new_index);
            for (double w : init.weights) fmt::print(" {:.4f}", w);
            fmt::print("); wrote {}\n", out.string());
        } else if (evaluate->parsed() || run->parsed()) {
            harness::ExperimentPlan plan = harness::load_plan(require(g.config, "--config plan"));
            if (!g.out.empty()) plan.output_dir = g.out;
            if (g.seed) plan.seeds = {*g.seed};
            const auto rows = run->parsed() ? harness::run_plan(plan) : harness::evaluate(plan);
            for (const auto& r : rows) {
                fmt::print("{:<18} {:<14} throughput {:8.3f} Mbps ({:6.1f}%)  handovers {:8.1f} ({:6.1f}%)\n",
                           r.scenario, r.controller, r.mean_throughput_mbps, r.throughput_pct,
                           r.mean_total_handovers, r.handover_pct);
            }
            fmt::print("results in {}\n", plan.output_dir.string());
        } else if (report->parsed()) {
            const auto out = harness::report(r_results);
            for (const auto& gap : out.gaps) fmt::print(stderr, "gap: {}\n", gap);
            fmt::print("wrote {} files\n", out.files.size());
        } else if (check->parsed()) {
            const auto out = harness::check(k_results);
            for (const auto& m : out.mismatches) fmt::print(stderr, "mismatch: {}\n", m);
            fmt::print("checked {} rows, {} mismatches\n", out.rows_checked, out.mismatches.size());
            return out.mismatches.empty() ? 0 : 3;
        } else if (oracle->parsed()) {
            auto sc = harness::resolve_scenario(o_scenario);
            if (g.seed) sc.seed = *g.seed;
            const auto r = harness::grid_search_oracle(sc, harness::OracleGrid{});
            const std::string text = harness::oracle_to_json_text(r, sc.name);
            if (g.out.empty()) {
                std::cout << text;
            } else {
                write_file_atomic(g.out, text);
            }
        } else if (scenario->parsed()) {
            const std::string text = twin::scenario_to_json_text(twin::preset_scenario(s_preset));
            if (g.out.empty()) {
                std::cout << text;
            } else {
                write_file_atomic(g.out, text);
            }
        } else if (importance->parsed()) {
            const Checkpoint ck = load_checkpoint(i_checkpoint);
            OfflineDataset ds = read_dataset(i_dataset);
            ds.normalization = ck.normalization;
            const FeatureImportance fi = feature_importance(ck.policy, ds);
            std::string csv = "feature,importance\n";
            for (std::size_t i = 0; i < kStateDim; ++i) csv += fmt::format("{},{}\n", feature_name(i), fi.scores[i]);
            if (g.out.empty()) {
                std::cout << csv;
            } else {
                write_file_atomic(g.out, csv);
            }
            if (fi.single_class) fmt::print(stderr, "note: the factorizer picks one sub-policy for every state\n");
        }
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 3;
    }
    return 0;
}
