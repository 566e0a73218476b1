#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "carl/checkpoint.hpp"
#include "carl/io_util.hpp"
#include "carl/mdp.hpp"
#include "support.hpp"

using namespace carl;
namespace fs = std::filesystem;

namespace {

// Runs the CLI inside `dir` and returns its exit status.
int carl_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" CARL_BINARY "' " + args + " > cli.log 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST_CASE("collect, train, transfer and evaluate from the command line") {
    const auto dir = test::scratch_dir("cli");
    REQUIRE(carl_cli(dir, "--seed 3 --out d.jsonl collect --scenario hotspot --epochs 4 --runs 2") == 0);
    CHECK(read_dataset(dir / "d.jsonl").size() == 2 * 2 * 4);

    write_file_atomic(dir / "t.cfg", "sub_policies = 2\nfactorizer_hidden = 8\nsub_policy_hidden = 8\n"
                                     "critic_hidden = 8\nbatch_size = 8\ngradient_steps = 5\n");
    REQUIRE(carl_cli(dir, "--config t.cfg --out tr train --dataset d.jsonl") == 0);
    CHECK(fs::exists(dir / "tr" / "loss.csv"));
    const Checkpoint ck = load_checkpoint(dir / "tr" / "checkpoint.json");
    CHECK(ck.policy.size() == 2);

    REQUIRE(carl_cli(dir, "--seed 9 --out new.jsonl collect --scenario shifted_hotspot --epochs 2") == 0);
    REQUIRE(carl_cli(dir, "--out x.json transfer --checkpoint tr/checkpoint.json --states new.jsonl") == 0);
    CHECK(load_checkpoint(dir / "x.json").policy.size() == 3);

    write_file_atomic(dir / "empty.jsonl", "");
    CHECK(carl_cli(dir, "--out y.json transfer --checkpoint tr/checkpoint.json --states empty.jsonl") != 0);
    CHECK_FALSE(fs::exists(dir / "y.json"));

    write_file_atomic(dir / "plan.json", R"({"output_dir": "res", "scenarios": ["hotspot"], "seeds": [1], "epochs": 2,
        "controllers": [{"name": "baseline"}, {"name": "carl", "type": "policy", "checkpoint": "x.json"}]})");
    REQUIRE(carl_cli(dir, "--config plan.json evaluate") == 0);
    CHECK(fs::exists(dir / "res" / "summary.csv"));
    CHECK(carl_cli(dir, "report --results res") == 0);
    CHECK(carl_cli(dir, "check --results res") == 0);
}

TEST_CASE("exit codes") {
    const auto dir = test::scratch_dir("cli_codes");
    CHECK(carl_cli(dir, "--help") == 0);
    CHECK(carl_cli(dir, "frobnicate") == 2);
    CHECK(carl_cli(dir, "collect") == 2);
    CHECK(carl_cli(dir, "collect --scenario nowhere.json") == 2);
    write_file_atomic(dir / "bad.cfg", "lambda = -1\n");
    write_file_atomic(dir / "d.jsonl", "");
    CHECK(carl_cli(dir, "--config bad.cfg train --dataset d.jsonl") == 2);
    write_file_atomic(dir / "plan.json", R"({"scenarios": [], "controllers": [{"name": "baseline"}]})");
    CHECK(carl_cli(dir, "--config plan.json evaluate") == 2);
    CHECK(carl_cli(dir, "evaluate") == 2);
    write_file_atomic(dir / "garbage.jsonl", "{\"schema\": \"carl-transitions-v1\"}\nnot json\n");
    CHECK(carl_cli(dir, "train --dataset garbage.jsonl") == 2);
}

TEST_CASE("check fails on tampered results") {
    const auto dir = test::scratch_dir("cli_check");
    write_file_atomic(dir / "plan.json", R"({"output_dir": "res", "scenarios": ["hotspot"], "seeds": [1], "epochs": 2,
        "report": {"plots": false}, "controllers": [{"name": "baseline"}, {"name": "heuristic"}]})");
    REQUIRE(carl_cli(dir, "--config plan.json evaluate") == 0);
    std::string s = read_file(dir / "res" / "summary.csv");
    s.replace(s.rfind("heuristic,1,") + 12, 1, "9");
    write_file_atomic(dir / "res" / "summary.csv", s);
    CHECK(carl_cli(dir, "check --results res") == 3);
}
