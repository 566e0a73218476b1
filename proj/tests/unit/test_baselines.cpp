#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "carl/controllers.hpp"
#include "carl/error.hpp"
#include "carl/harness.hpp"
#include "carl/io_util.hpp"
#include "carl/scenarios.hpp"
#include "support.hpp"

using namespace carl;

namespace {

Transition transition_with(const TsState& s, double action_value, double reward) {
    Transition t;
    t.state = s;
    t.next_state = s;
    t.action.values.fill(action_value);
    t.reward = reward;
    return t;
}

TsAction fallback_action() { return TsAction::clamped(ActionVector{0.01, 0.3, 0.5, 0.2, 0.5, 0.5}); }

std::size_t dense_params(const std::vector<std::size_t>& sizes) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) n += sizes[i] * sizes[i + 1] + sizes[i + 1];
    return n;
}

twin::ScenarioConfig short_run(twin::ScenarioConfig c, int epochs) {
    c.horizon_epochs = epochs;
    c.epoch_s = 10.0;
    return c;
}

}  // namespace

TEST_CASE("heuristic raises maxRC by two points when the serving cell is hotter") {
    const twin::KnobMaps maps;
    twin::PairKnobs prev{false, 0.3, 0.5, 0.2, -110.0, 0.0};
    const twin::PairKnobs next = heuristic_step(prev, 0.8, 0.2, HeuristicConfig{}, maps);
    CHECK(next.offload_allowed);
    CHECK(next.max_rc - prev.max_rc == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(next.rc_headroom == doctest::Approx(0.48).epsilon(1e-12));
    CHECK(next.cio_db == doctest::Approx(1.0));
    CHECK(next.delta_rc == prev.delta_rc);
    CHECK(next.rsrp_cmlb_filter_dbm == prev.rsrp_cmlb_filter_dbm);
}

TEST_CASE("heuristic holds inside the dead zone and reverses below it") {
    const twin::KnobMaps maps;
    const twin::PairKnobs prev{true, 0.3, 0.5, 0.2, -110.0, 2.0};
    CHECK(heuristic_step(prev, 0.5, 0.45, HeuristicConfig{}, maps) == prev);
    CHECK(heuristic_step(prev, 0.45, 0.5, HeuristicConfig{}, maps) == prev);
    CHECK(heuristic_step(prev, 0.6, 0.5, HeuristicConfig{}, maps) == prev);

    const twin::PairKnobs down = heuristic_step(prev, 0.1, 0.7, HeuristicConfig{}, maps);
    CHECK_FALSE(down.offload_allowed);
    CHECK(down.max_rc == doctest::Approx(0.28).epsilon(1e-12));
    CHECK(down.rc_headroom == doctest::Approx(0.52).epsilon(1e-12));
    CHECK(down.cio_db == doctest::Approx(1.0));
}

TEST_CASE("heuristic clamps at the knob ranges") {
    const twin::KnobMaps maps;
    const twin::PairKnobs top{true, 1.0, 0.0, 0.2, -110.0, 10.0};
    const twin::PairKnobs next = heuristic_step(top, 0.9, 0.1, HeuristicConfig{}, maps);
    CHECK(next.max_rc == 1.0);
    CHECK(next.rc_headroom == 0.0);
    CHECK(next.cio_db == 10.0);
}

TEST_CASE("heuristic is memory-1") {
    const twin::KnobMaps maps;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        twin::PairKnobs k{u(rng) < 0.5, u(rng), u(rng), u(rng), -140.0 + 60.0 * u(rng), -10.0 + 20.0 * u(rng)};
        const double a = u(rng);
        const double b = u(rng);
        CHECK(heuristic_step(k, a, b, HeuristicConfig{}, maps) == heuristic_step(k, a, b, HeuristicConfig{}, maps));
    }
}

TEST_CASE("heuristic controller tracks each pair and keeps noise in the box") {
    const twin::KnobMaps maps;
    const twin::PairKnobs init{false, 0.3, 0.5, 0.2, -110.0, 0.0};
    std::vector<twin::PairObservation> obs(2);
    obs[0] = {0, 1, {}};
    obs[0].state.serving_prb_util = 0.9;
    obs[0].state.target_prb_util = 0.1;
    obs[1] = {1, 0, {}};
    obs[1].state.serving_prb_util = 0.1;
    obs[1].state.target_prb_util = 0.9;

    HeuristicController plain(maps, init, HeuristicConfig{}, 1);
    for (int e = 0; e < 3; ++e) plain.decide(e, obs);
    CHECK(plain.knobs().at({0, 1}).max_rc == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(plain.knobs().at({1, 0}).max_rc == doctest::Approx(0.24).epsilon(1e-12));

    HeuristicConfig noisy_cfg;
    noisy_cfg.exploration_noise = 0.05;
    HeuristicController noisy(maps, init, noisy_cfg, 1);
    HeuristicController clean(maps, init, HeuristicConfig{}, 1);
    for (int e = 0; e < 20; ++e) {
        const auto a = noisy.decide(e, obs);
        const auto b = clean.decide(e, obs);
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK_NOTHROW(a[k].validate());
            for (std::size_t j = 0; j < kActionDim; ++j) CHECK(std::abs(a[k][j] - b[k][j]) <= 0.05 + 1e-12);
        }
    }
    HeuristicConfig bad;
    bad.margin = -0.1;
    CHECK_THROWS_AS(HeuristicController(maps, init, bad, 1), ConfigError);
}

TEST_CASE("q-table from one transition") {
    std::mt19937_64 rng(1);
    const TsState s = test::random_state(rng);
    const OfflineDataset ds = twin::to_dataset({transition_with(s, 0.4, 3.0)});
    QTable table = QTable::build(ds, default_bins(), fallback_action());
    CHECK(table.size() == 1);
    CHECK(table.act(s).values == ds.transitions[0].action.values);
    CHECK(table.misses() == 0);
}

TEST_CASE("q-table keeps the highest-reward action per bin") {
    std::mt19937_64 rng(2);
    const TsState a = test::random_state(rng);
    TsState far = test::random_state(rng);
    far.serving_freq_mhz = a.serving_freq_mhz + 1000.0;
    const OfflineDataset ds =
        twin::to_dataset({transition_with(a, 0.3, 5.0), transition_with(a, 0.7, 7.0), transition_with(far, 0.9, 1.0)});
    QTable table = QTable::build(ds, default_bins(), fallback_action());
    CHECK(table.size() == 2);
    CHECK(table.act(a).values == ds.transitions[1].action.values);

    OfflineDataset reversed = twin::to_dataset({transition_with(a, 0.7, 7.0), transition_with(a, 0.3, 5.0),
                                                transition_with(far, 0.9, 1.0)});
    CHECK(QTable::build(reversed, default_bins(), fallback_action()).act(a).values ==
          ds.transitions[1].action.values);
}

TEST_CASE("one bin per feature stores the global best action") {
    std::mt19937_64 rng(3);
    std::vector<Transition> ts;
    for (int i = 0; i < 50; ++i) ts.push_back(test::random_transition(rng));
    const auto best = std::max_element(ts.begin(), ts.end(), [](auto& x, auto& y) { return x.reward < y.reward; });
    const TsAction want = best->action;
    BinSpec ones;
    ones.fill(1);
    QTable table = QTable::build(twin::to_dataset(ts), ones, fallback_action());
    CHECK(table.size() == 1);
    CHECK(table.act(test::random_state(rng)).values == want.values);
}

TEST_CASE("q-table misses return the fallback and are counted") {
    std::mt19937_64 rng(4);
    const TsState s = test::random_state(rng);
    QTable table = QTable::build(twin::to_dataset({transition_with(s, 0.4, 3.0)}), default_bins(), fallback_action());
    TsState other = s;
    other.day_of_week = (s.day_of_week + 1) % 7;
    CHECK(table.act(other).values == fallback_action().values);
    CHECK(table.misses() == 1);
    CHECK(table.lookups() == 1);
    CHECK(table.miss_rate() == 1.0);
    CHECK_THROWS_AS(QTable::build(OfflineDataset{}, default_bins(), fallback_action()), ConfigError);
}

TEST_CASE("q-table never interpolates") {
    std::mt19937_64 rng(5);
    std::vector<Transition> ts;
    for (int i = 0; i < 300; ++i) ts.push_back(test::random_transition(rng));
    std::set<ActionVector> stored;
    for (const auto& t : ts) stored.insert(t.action.values);
    stored.insert(fallback_action().values);
    QTable table = QTable::build(twin::to_dataset(ts), default_bins(), fallback_action());
    for (int i = 0; i < 500; ++i) {
        const TsState s = i % 2 == 0 ? ts[static_cast<std::size_t>(i) % ts.size()].state : test::random_state(rng);
        CHECK(stored.count(table.act(s).values) == 1);
    }
}

TEST_CASE("q-table file round trip") {
    std::mt19937_64 rng(6);
    std::vector<Transition> ts;
    for (int i = 0; i < 40; ++i) ts.push_back(test::random_transition(rng));
    QTable table = QTable::build(twin::to_dataset(ts), default_bins(), fallback_action());
    const auto path = test::scratch_dir("qtable") / "t.qtable";
    table.save(path);
    QTable back = QTable::load(path);
    CHECK(back.size() == table.size());
    CHECK(back.bins() == table.bins());
    for (int i = 0; i < 100; ++i) {
        const TsState s = i % 2 == 0 ? ts[static_cast<std::size_t>(i) % ts.size()].state : test::random_state(rng);
        CHECK(back.act(s).values == table.act(s).values);
    }
    write_file_atomic(path, "bins 1 2\n");
    CHECK_THROWS_AS(QTable::load(path), ConfigError);
}

TEST_CASE("q-table misses more on an out-of-distribution scenario") {
    harness::CollectOptions opts;
    opts.runs = 2;
    opts.epochs = 6;
    opts.exploration_noise = 0.05;
    const OfflineDataset ds = harness::collect_dataset(short_run(twin::hotspot_scenario(), 6), opts, 9);
    const QTable table = QTable::build(ds, default_bins(), fallback_action());

    auto miss_rate = [&](const twin::ScenarioConfig& c) {
        QTableController ctrl(table);
        const auto r = twin::run_scenario(short_run(c, 6), ctrl);
        (void)r;
        return ctrl.table().miss_rate();
    };
    twin::ScenarioConfig in = twin::hotspot_scenario();
    in.seed = 99;
    const double in_rate = miss_rate(in);
    const double out_rate = miss_rate(twin::shifted_hotspot_scenario());
    MESSAGE("in-distribution miss rate " << in_rate << ", shifted " << out_rate);
    CHECK(out_rate > in_rate);
}

TEST_CASE("ddpg is CaRL with a single sub-policy") {
    const PolicyArchitecture arch;
    const CascadePolicy p = make_ddpg_policy(4, arch);
    CHECK(p.size() == 1);
    std::vector<std::size_t> sub{kStateDim};
    sub.insert(sub.end(), arch.sub_policy_hidden.begin(), arch.sub_policy_hidden.end());
    sub.push_back(kActionDim);
    std::vector<std::size_t> fac{kStateDim};
    fac.insert(fac.end(), arch.factorizer_hidden.begin(), arch.factorizer_hidden.end());
    fac.push_back(1);
    CHECK(p.parameter_count() == dense_params(sub) + dense_params(fac));

    std::mt19937_64 rng(7);
    for (int i = 0; i < 20; ++i) {
        const auto s = test::unit_vector(rng, kStateDim);
        const auto mu = p.sub_policy(0).forward(s);
        const TsAction a = p.act(s);
        for (std::size_t k = 0; k < kActionDim; ++k) CHECK(a[k] == doctest::Approx(mu[k]).epsilon(1e-15));
    }
}

TEST_CASE("online CaRL explores during warmup then follows its trained policy") {
    OnlineCarlConfig cfg;
    cfg.warmup_epochs = 2;
    cfg.steps_per_epoch = 5;
    cfg.trainer.batch_size = 8;
    cfg.architecture = PolicyArchitecture{{8}, {8}};
    cfg.trainer.critic_hidden = {8};
    OnlineCarlController ctrl(cfg, 3);
    const std::vector<double> before(ctrl.policy().sub_policy(0).params().begin(),
                                     ctrl.policy().sub_policy(0).params().end());
    const twin::ScenarioConfig c = short_run(twin::hotspot_scenario(), 4);
    const auto r = twin::run_scenario(c, ctrl);
    CHECK(ctrl.collected().size() == r.transitions.size());
    const std::vector<double> after(ctrl.policy().sub_policy(0).params().begin(),
                                    ctrl.policy().sub_policy(0).params().end());
    CHECK(before != after);
    for (const auto& t : r.transitions) CHECK_NOTHROW(t.action.validate());

    cfg.warmup_epochs = 0;
    CHECK_THROWS_AS(OnlineCarlController(cfg, 3), ConfigError);
}

TEST_CASE("every controller runs through the same twin interface") {
    const twin::ScenarioConfig c = short_run(twin::hotspot_scenario(), 3);
    std::mt19937_64 rng(8);
    std::vector<Transition> ts;
    for (int i = 0; i < 20; ++i) ts.push_back(test::random_transition(rng));
    const OfflineDataset ds = twin::to_dataset(ts);

    std::vector<std::unique_ptr<twin::Controller>> ctrls;
    ctrls.push_back(std::make_unique<StaticController>(c.knob_maps.to_action(c.baseline_knobs)));
    ctrls.push_back(std::make_unique<HeuristicController>(c.knob_maps, c.baseline_knobs, HeuristicConfig{}, 1));
    ctrls.push_back(std::make_unique<QTableController>(QTable::build(ds, default_bins(), fallback_action())));
    ctrls.push_back(std::make_unique<PolicyController>(make_ddpg_policy(1), ds.normalization, "ddpg"));
    ctrls.push_back(std::make_unique<PolicyController>(CascadePolicy::create(3, 1), ds.normalization));
    OnlineCarlConfig oc;
    oc.warmup_epochs = 1;
    oc.steps_per_epoch = 2;
    oc.trainer.batch_size = 4;
    ctrls.push_back(std::make_unique<OnlineCarlController>(oc, 1));
    for (auto& ctrl : ctrls) {
        const auto r = twin::run_scenario(c, *ctrl);
        CHECK_MESSAGE(r.epochs.size() == 3, ctrl->name());
        CHECK(r.transitions.size() == 3 * twin::neighbor_pairs(c).size());
    }
}

TEST_CASE("policy controller requires normalization stats") {
    CHECK_THROWS_AS(PolicyController(make_ddpg_policy(1), NormalizationStats{}), ConfigError);
}
