#include "procloop/error.hpp"
#include "procloop/harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace procloop;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::InvalidArgument;
}

// Deterministic simulated world: conforming instances always compile,
// hallucinated ones never do.
RunConfig noiseless() {
    RunConfig cfg;
    cfg.environment.p_true = 1.0;
    cfg.environment.p_false = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("bundled tasks cover five categories") {
    const auto& tasks = bundled_tasks();
    CHECK(tasks.size() == 25);
    for (const auto& c : task_categories())
        CHECK(std::count_if(tasks.begin(), tasks.end(), [&](const Task& t) { return t.category == c; }) == 5);
    CHECK(code_of([] { parse_tasks(R"([{"category": "game"}])"); }) == Errc::ParseError);
}

TEST_CASE("config parsing") {
    auto d = RunConfig::from_json("{}");
    CHECK(d.filter_threshold == 0.30);
    CHECK(d.rng_seed == 42);
    CHECK(d.execution == ExecutionBackend::Simulated);
    CHECK_NOTHROW(d.validate());

    auto c = RunConfig::from_json(R"({"seed": 7, "pool": {"filter_threshold": 0.5},
        "orchestrator": {"p_true": 0.8, "p_false": 0.05},
        "generation": {"temperature": 0.4, "seeds": ["DemandAnalysis -> Coding"]}})");
    CHECK(c.rng_seed == 7);
    CHECK(c.filter_threshold == 0.5);
    CHECK(c.environment.p_true == 0.8);
    CHECK(c.generator.temperature == 0.4);
    CHECK(c.seed_instances() == std::vector<Instance>{Instance{"DemandAnalysis", "Coding"}});
    CHECK(c.snapshot().at("seed") == 7);

    CHECK_THROWS_AS(RunConfig::from_json(R"({"pool": {"threshold": 0.5}})"), Error);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"bogus": 1})"), Error);
    CHECK_THROWS_AS(RunConfig::from_json("not json"), Error);
    CHECK(code_of([] { RunConfig::from_json(R"({"pool": {"filter_threshold": 1.5}})"); }) == Errc::InvalidArgument);
    RunConfig bad;
    bad.environment.p_false = 0.95;
    CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidArgument);
}

TEST_CASE("set_seed propagates to derived seeds") {
    RunConfig a, b;
    a.set_seed(5);
    b.set_seed(6);
    CHECK(a.environment.rng_seed != b.environment.rng_seed);
    CHECK(a.snapshot() != b.snapshot());
}

TEST_CASE("generate_batch produces a prompt and instances") {
    RunConfig cfg;
    auto batch = generate_batch(cfg, cfg.tasks.front(), 6);
    CHECK(batch.instances.size() == 6);
    CHECK(batch.prompt.find(cfg.tasks.front().prompt) != std::string::npos);
    auto again = generate_batch(cfg, cfg.tasks.front(), 6);
    CHECK(again.instances == batch.instances);
}

TEST_CASE("single noiseless iteration with conforming seeds succeeds everywhere") {
    auto cfg = noiseless();
    cfg.generator.temperature = 0.0;
    auto r = run_loop(cfg, 1);
    REQUIRE(r.iterations.size() == 1);
    CHECK(r.iterations[0].executions > 0);
    CHECK(r.iterations[0].success_rate() == 1.0);
    for (const auto& e : r.pool.entries()) CHECK(e.success_count == e.frequency);
    REQUIRE(r.tree);
    CHECK(r.tree->alphabet().size() == 14);
    CHECK(code_of([&] { run_loop(cfg, 0); }) == Errc::InvalidArgument);
}

TEST_CASE("loop invariants over several iterations") {
    auto cfg = noiseless();
    auto r = run_loop(cfg, 3);
    REQUIRE(r.iterations.size() == 3);
    for (std::size_t i = 1; i < r.iterations.size(); ++i) {
        CHECK(r.iterations[i].distinct_variants >= r.iterations[i - 1].distinct_variants);
        CHECK(r.iterations[i].pool_total >= r.iterations[i - 1].pool_total);
    }
    std::set<std::string> canonical;
    for (const auto& e : PhaseVocabulary::standard().entries()) canonical.insert(e.name);
    REQUIRE(r.tree);
    for (const auto& a : r.tree->alphabet()) CHECK(canonical.count(a));
    CHECK(r.log.size() == std::size_t(r.pool.total()));
    CHECK_FALSE(r.last_prompt.empty());
    CHECK(r.description);
    CHECK(to_jsonl(r.log).find("\"mode\"") != std::string::npos);
}

TEST_CASE("temperature experiment") {
    RunConfig cfg;
    auto zero = experiment_temperature(cfg, {0.0}, 50);
    REQUIRE(zero.rows.size() == 1);
    CHECK(zero.rows[0].diversity == 0.0);
    CHECK(zero.rows[0].hallucination_rate == 0.0);
    auto a = experiment_temperature(cfg, {0.0, 0.7}, 40);
    auto b = experiment_temperature(cfg, {0.0, 0.7}, 40);
    CHECK(a.report.to_csv() == b.report.to_csv());
    CHECK(a.report.columns.front() == "temperature");
}

TEST_CASE("strategies experiment") {
    RunConfig cfg;
    auto r = experiment_strategies(cfg, SyntheticPoolSpec{30, 1, 3}, 200);
    REQUIRE(r.runs.size() == 3);
    for (const auto& run : r.runs) {
        CHECK(run.pool_entries == 30);
        CHECK(run.coverage_curve.size() <= 200);
        CHECK(std::is_sorted(run.coverage_curve.begin(), run.coverage_curve.end()));
    }
    CHECK(r.report.to_csv() == experiment_strategies(cfg, SyntheticPoolSpec{30, 1, 3}, 200).report.to_csv());

    auto pool = synthetic_pool(cfg, SyntheticPoolSpec{30, 1, 3});
    CHECK(pool.size() == 30);
    for (const auto& e : pool.entries()) {
        CHECK(e.frequency >= 1);
        CHECK(e.frequency <= 3);
    }
    // Frequency replay always picks a least-visited entry first.
    const auto& freq = r.runs[2];
    CHECK(freq.kind == StrategyKind::Frequency);
    REQUIRE_FALSE(freq.first_picks.empty());
    std::int64_t min_n = pool.entries().front().frequency;
    for (const auto& e : pool.entries()) min_n = std::min(min_n, e.frequency);
    CHECK(pool.find_id(freq.first_picks.front())->frequency == min_n);
}

TEST_CASE("filtering shrinks the mined model") {
    auto cfg = noiseless();
    cfg.experiments.campaign_executions = 300;
    auto r = experiment_filtering(cfg, 0.3);
    CHECK(r.survivors <= r.pool_entries);
    CHECK(r.filtered.tasks <= r.unfiltered.tasks);
    std::size_t hist = 0;
    for (auto h : r.sr_histogram) hist += h;
    CHECK(hist == r.pool_entries);
    CHECK(r.sr_histogram.size() == 10);
}

TEST_CASE("enhancement experiment") {
    RunConfig cfg;
    cfg.experiments.campaign_executions = 200;
    cfg.experiments.instances_per_task = 5;
    auto r = experiment_enhancement(cfg, 1);
    REQUIRE(r.rows.size() == 5);
    for (const auto& row : r.rows) {
        CHECK(row.baseline.executions == 5);
        CHECK(row.enhanced.executions == 5);
    }
    CHECK(r.report.rows.size() == 6);

    // Without noise or sampling both arms reproduce conforming seeds.
    auto flat = noiseless();
    flat.generator.temperature = 0.0;
    flat.experiments.noise_fraction = 0.0;
    flat.experiments.campaign_executions = 100;
    flat.experiments.instances_per_task = 4;
    auto e = experiment_enhancement(flat, 1);
    CHECK(e.baseline_total.rate() == 1.0);
    CHECK(e.enhanced_total.rate() == e.baseline_total.rate());
    CHECK(code_of([&] { experiment_enhancement(flat, 0); }) == Errc::InvalidArgument);
}
