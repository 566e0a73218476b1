#include <doctest.h>

#include <filesystem>
#include <random>

#include "carl/error.hpp"
#include "carl/io_util.hpp"
#include "carl/mdp.hpp"
#include "support.hpp"

using namespace carl;
namespace fs = std::filesystem;

namespace {

NormalizationStats stats_fixture() {
    NormalizationStats s;
    s.min = {700, 700, 0, 0, 0, 0, 0, 0};
    s.max = {2600, 2600, 1, 6, 1, 1, 100, 100};
    return s;
}

}  // namespace

TEST_CASE("normalize_state maps the per-feature minimum to zeros and the maximum to ones") {
    const auto s = stats_fixture();
    const TsState lo = TsState::from_array({700, 700, 0, 0, 0, 0, 0, 0});
    const TsState hi = TsState::from_array({2600, 2600, 1, 6, 1, 1, 100, 100});
    for (double v : normalize_state(lo, s)) CHECK(v == 0.0);
    for (double v : normalize_state(hi, s)) CHECK(v == 1.0);
}

TEST_CASE("normalize_state maps a degenerate feature to one half") {
    auto s = stats_fixture();
    s.min[0] = s.max[0] = 1900;
    for (double f : {700.0, 1900.0, 2600.0}) {
        TsState st;
        st.serving_freq_mhz = f;
        CHECK(normalize_state(st, s)[0] == 0.5);
    }
}

TEST_CASE("normalize_state clamps and scales day_of_week by 1/6") {
    const auto s = stats_fixture();
    TsState st;
    st.serving_freq_mhz = 5000;
    st.serving_throughput_mbps = -1.0;
    st.day_of_week = 3;
    const auto v = normalize_state(st, s);
    CHECK(v[0] == 1.0);
    CHECK(v[6] == 0.0);
    CHECK(v[3] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalize_state rejects missing stats") {
    NormalizationStats s;
    CHECK_THROWS_AS(normalize_state(TsState{}, s), ConfigError);
}

TEST_CASE("normalization is idempotent on unit-interval inputs with unit stats") {
    NormalizationStats unit;
    unit.min.assign(kStateDim, 0.0);
    unit.max.assign(kStateDim, 1.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        StateVector x{};
        for (double& v : x) v = u(rng);
        x[kDayOfWeek] = 0.0;
        const StateVector once = normalize_state(TsState::from_array(x), unit);
        const StateVector twice = normalize_state(TsState::from_array(once), unit);
        CHECK(once == twice);
        CHECK(once == x);
    }
}

TEST_CASE("compute_reward divides volume by time") {
    CHECK(compute_reward(120, 60) == 2.0);
    CHECK(compute_reward(0, 10) == 0.0);
    CHECK(compute_reward(36000000, 7200) == 5000.0);
    CHECK_THROWS_AS(compute_reward(10, 0), DomainError);
    CHECK_THROWS_AS(compute_reward(10, -1), DomainError);
}

TEST_CASE("compute_reward is homogeneous in the volume") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    for (int i = 0; i < 500; ++i) {
        const double v = u(rng);
        const double t = 1.0 + u(rng);
        // Powers of two keep the scaling exact in floating point.
        for (double k : {0.5, 2.0, 8.0}) CHECK(compute_reward(k * v, t) == k * compute_reward(v, t));
    }
}

TEST_CASE("TsState and TsAction invariants") {
    TsState st;
    st.serving_prb_util = 1.5;
    CHECK_THROWS_AS(st.validate(), DomainError);
    st = TsState{};
    st.day_of_week = 7;
    CHECK_THROWS_AS(st.validate(), DomainError);
    st = TsState{};
    st.target_throughput_mbps = -0.1;
    CHECK_THROWS_AS(st.validate(), DomainError);
    TsAction a;
    a.values.fill(0.5);
    CHECK_NOTHROW(a.validate());
    a.values[2] = 0.0;
    CHECK_THROWS_AS(a.validate(), DomainError);
    const TsAction c = TsAction::clamped({-1, 0, 0.5, 2, 1, 1e-9});
    for (double v : c.values) {
        CHECK(v >= kActionFloor);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("dataset round trip of three transitions") {
    const fs::path dir = test::scratch_dir("mdp_rt3");
    std::mt19937_64 rng(1);
    OfflineDataset ds;
    for (int i = 0; i < 3; ++i) ds.transitions.push_back(test::random_transition(rng));
    ds.refresh_normalization();
    write_dataset(dir / "d.jsonl", ds);
    const OfflineDataset back = read_dataset(dir / "d.jsonl");
    REQUIRE(back.transitions.size() == 3);
    CHECK(back.transitions == ds.transitions);
    CHECK(back.normalization == ds.normalization);
    CHECK_FALSE(back.empty_warning);
}

TEST_CASE("dataset round trip property over 1000 random transitions") {
    const fs::path dir = test::scratch_dir("mdp_rt1000");
    std::mt19937_64 rng(77);
    OfflineDataset ds;
    for (int i = 0; i < 1000; ++i) ds.transitions.push_back(test::random_transition(rng));
    ds.refresh_normalization();
    write_dataset(dir / "d.jsonl", ds);
    const OfflineDataset back = read_dataset(dir / "d.jsonl");
    CHECK(back.transitions == ds.transitions);
    CHECK(back.normalization == ds.normalization);
}

TEST_CASE("reading an empty file yields an empty dataset with a warning") {
    const fs::path dir = test::scratch_dir("mdp_empty");
    write_file_atomic(dir / "e.jsonl", "");
    const OfflineDataset ds = read_dataset(dir / "e.jsonl");
    CHECK(ds.empty());
    CHECK(ds.empty_warning);
    CHECK_THROWS_AS(ds.check_trainable(), ConfigError);
}

TEST_CASE("a record with serving utilization 1.5 is a parse error on that field") {
    std::mt19937_64 rng(5);
    Transition t = test::random_transition(rng);
    std::string line = encode_transition(t);
    const auto pos = line.find("\"state\":[");
    REQUIRE(pos != std::string::npos);
    // Rebuild the state array with an out-of-range utilization.
    StateVector s = t.state.to_array();
    s[kServingPrbUtil] = 1.5;
    const auto end = line.find(']', pos);
    std::string arr = "\"state\":[";
    for (std::size_t i = 0; i < kStateDim; ++i) arr += (i ? "," : "") + std::to_string(s[i]);
    line = line.substr(0, pos) + arr + line.substr(end);
    try {
        decode_transition(line, 4);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
        CHECK(e.field().find("serving_prb_util") != std::string::npos);
    }
}

TEST_CASE("dataset file uses the documented schema header and field names") {
    const fs::path dir = test::scratch_dir("mdp_schema");
    std::mt19937_64 rng(2);
    OfflineDataset ds;
    ds.transitions.push_back(test::random_transition(rng));
    ds.refresh_normalization();
    write_dataset(dir / "d.jsonl", ds);
    const std::string text = read_file(dir / "d.jsonl");
    const std::string first = text.substr(0, text.find('\n'));
    CHECK(first.find("\"schema\":\"carl-transitions-v1\"") != std::string::npos);
    CHECK(first.find("\"normalization\"") != std::string::npos);
    const std::string rec = text.substr(text.find('\n') + 1);
    for (const char* key : {"\"serving_cell\"", "\"target_cell\"", "\"epoch\"", "\"state\"", "\"action\"",
                            "\"reward\"", "\"next_state\""}) {
        CHECK(rec.find(key) != std::string::npos);
    }
}

TEST_CASE("check_trainable rejects transitions outside the stored stats") {
    std::mt19937_64 rng(8);
    OfflineDataset ds;
    for (int i = 0; i < 10; ++i) ds.transitions.push_back(test::random_transition(rng));
    ds.refresh_normalization();
    CHECK_NOTHROW(ds.check_trainable());
    ds.transitions[0].state.serving_throughput_mbps = ds.normalization.max[kServingThroughput] + 1.0;
    CHECK_THROWS_AS(ds.check_trainable(), ConfigError);
}
