#include "procloop/error.hpp"
#include "procloop/pool.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

using namespace procloop;

namespace {

// The three rows of the worked pool: C->T, R->C->T, D->R->C->T.
InstancePool table_pool() {
    InstancePool pool;
    pool.insert(parse_instance("C -> T"), 14, 6);
    pool.insert(parse_instance("R -> C -> T"), 21, 13);
    pool.insert(parse_instance("D -> R -> C -> T"), 30, 21);
    return pool;
}

double uct_oracle(double q, double n, double total, double c) { return 1.0 - q / n + c * std::sqrt(std::log(total) / n); }

}  // namespace

TEST_CASE("record upserts counters") {
    InstancePool pool;
    auto inst = parse_instance("D -> C -> T");
    auto e = pool.record(inst, true);
    CHECK(e.frequency == 1);
    CHECK(e.success_count == 1);
    CHECK(e.id == 1);

    InstancePool p2;
    p2.insert(inst, 14, 6);
    auto e2 = p2.record(inst, false);
    CHECK(e2.frequency == 15);
    CHECK(e2.success_count == 6);

    InstancePool p3;
    p3.record(Instance{"A"}, false);
    p3.record(Instance{"B"}, true);
    CHECK(p3.total() == 2);
    CHECK(p3.size() == 2);
}

TEST_CASE("success rate on worked rows") {
    auto pool = table_pool();
    CHECK(success_rate(pool.entries()[0]) == doctest::Approx(0.4286).epsilon(1e-4));
    CHECK(success_rate(pool.entries()[2]) == doctest::Approx(0.7));
    CHECK(success_rate(PoolEntry{1, Instance{"A"}, 5, 0}) == 0.0);
    CHECK_THROWS_AS(success_rate(PoolEntry{1, Instance{"A"}, 0, 0}), Error);
}

TEST_CASE("uct score on worked rows") {
    auto pool = table_pool();
    REQUIRE(pool.total() == 65);
    CHECK(uct_score(pool.entries()[0], 65, 1.0) == doctest::Approx(1.1175).epsilon(1e-3));
    CHECK(uct_score(pool.entries()[1], 65, 1.0) == doctest::Approx(0.8268).epsilon(1e-3));
    CHECK(uct_score(pool.entries()[2], 65, 1.0) == doctest::Approx(0.6730).epsilon(1e-3));
    for (const auto& e : pool.entries())
        CHECK(uct_score(e, 65, 1.0) == doctest::Approx(uct_oracle(double(e.success_count), double(e.frequency), 65, 1)));
    CHECK(select_next(pool, SelectionStrategy::uct(), 1).instance == parse_instance("C -> T"));

    try {
        uct_score(PoolEntry{1, Instance{"A"}, 0, 0}, 10, 1);
        FAIL("expected ZeroFrequency");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ZeroFrequency);
    }
    try {
        uct_score(PoolEntry{1, Instance{"A"}, 1, 0}, 0, 1);
        FAIL("expected NonPositiveTotal");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NonPositiveTotal);
    }
}

TEST_CASE("uct monotonicity") {
    for (std::int64_t n = 1; n <= 20; ++n)
        for (std::int64_t q = 0; q < n; ++q)
            CHECK(uct_score({1, Instance{"A"}, n, q + 1}, 100, 1.0) < uct_score({1, Instance{"A"}, n, q}, 100, 1.0));
    // Fixed success rate, growing N.
    for (std::int64_t k = 1; k < 10; ++k)
        CHECK(uct_score({1, Instance{"A"}, 2 * (k + 1), k + 1}, 100, 1.0) <
              uct_score({1, Instance{"A"}, 2 * k, k}, 100, 1.0));
}

TEST_CASE("selection strategies") {
    InstancePool perfect;
    perfect.insert(Instance{"A"}, 3, 3);
    perfect.insert(Instance{"B"}, 3, 3);
    try {
        select_next(perfect, SelectionStrategy::failure_rate(), 1);
        FAIL("expected NoEligibleEntry");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NoEligibleEntry);
    }

    InstancePool freq;
    freq.insert(Instance{"A"}, 1, 0);
    freq.insert(Instance{"B"}, 9, 0);
    CHECK(select_next(freq, SelectionStrategy::frequency(), 3).instance == Instance{"A"});

    InstancePool empty;
    try {
        select_next(empty, SelectionStrategy::uct(), 1);
        FAIL("expected EmptyPool");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyPool);
    }

    // Failure rate never returns a perfect entry.
    InstancePool mixed;
    mixed.insert(Instance{"A"}, 4, 4);
    mixed.insert(Instance{"B"}, 4, 1);
    mixed.insert(Instance{"C"}, 4, 2);
    for (std::uint64_t s = 0; s < 50; ++s)
        CHECK(select_next(mixed, SelectionStrategy::failure_rate(), s).instance == Instance{"B"});
}

TEST_CASE("ties are broken by the seed") {
    InstancePool pool;
    for (auto n : {"A", "B", "C", "D"}) pool.insert(Instance{std::string_view(n)}, 2, 1);
    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 64; ++s) {
        auto a = select_next(pool, SelectionStrategy::uct(), s).id;
        auto b = select_next(pool, SelectionStrategy::uct(), s).id;
        CHECK(a == b);
        seen.insert(std::to_string(a));
    }
    CHECK(seen.size() == 4);
}

TEST_CASE("replay on a single entry") {
    InstancePool pool;
    pool.insert(Instance{"A"}, 1, 1);
    int calls = 0;
    auto report = replay(pool, SelectionStrategy::frequency(), [&](const Instance&) { return ++calls % 2 == 0; }, 3, 5);
    CHECK(report.rounds.size() == 3);
    for (const auto& r : report.rounds) CHECK(r.entry_id == 1);
    REQUIRE(report.coverage_attempt);
    CHECK(*report.coverage_attempt == 1);
    CHECK(pool.entries()[0].frequency == 4);
    CHECK(pool.entries()[0].success_count == 2);
    CHECK_THROWS_AS(replay(pool, SelectionStrategy::uct(), [](const Instance&) { return true; }, 0, 1), Error);
}

TEST_CASE("replay records executor failures as failed rounds") {
    InstancePool pool;
    pool.insert(Instance{"A"}, 1, 0);
    auto report = replay(
        pool, SelectionStrategy::uct(), [](const Instance&) -> bool { throw std::runtime_error("boom"); }, 2, 1);
    REQUIRE(report.rounds.size() == 2);
    CHECK_FALSE(report.rounds[0].success);
    CHECK(report.rounds[0].executor_error.find("boom") != std::string::npos);
    CHECK(pool.entries()[0].frequency == 3);
}

TEST_CASE("replay is reproducible and keeps pool invariants") {
    auto run = [](std::uint64_t seed) {
        InstancePool pool;
        for (int i = 0; i < 20; ++i) pool.insert(Instance{std::string(1, char('A' + i))}, 1 + i % 3, i % 2);
        std::mt19937_64 exec_rng(99);
        std::bernoulli_distribution coin(0.4);
        auto report = replay(pool, SelectionStrategy::uct(), [&](const Instance&) { return coin(exec_rng); }, 200, seed);
        std::int64_t sum = 0;
        for (const auto& e : pool.entries()) {
            CHECK(e.success_count <= e.frequency);
            sum += e.frequency;
        }
        CHECK(sum == pool.total());
        return std::make_pair(pool, report.coverage_curve);
    };
    auto a = run(3), b = run(3);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("failure rate replay stops once every entry is perfect") {
    InstancePool pool;
    pool.insert(Instance{"A"}, 1, 0);
    pool.insert(Instance{"B"}, 2, 2);
    // Only A is eligible and successes never make it perfect again.
    auto report = replay(pool, SelectionStrategy::failure_rate(), [](const Instance&) { return true; }, 5, 1);
    CHECK(report.rounds.size() == 5);
    for (const auto& r : report.rounds) CHECK(r.entry_id == 1);
    CHECK_FALSE(report.coverage_attempt);

    InstancePool all_perfect;
    all_perfect.insert(Instance{"A"}, 1, 1);
    auto none = replay(all_perfect, SelectionStrategy::failure_rate(), [](const Instance&) { return true; }, 5, 1);
    CHECK(none.rounds.empty());
}

TEST_CASE("filter_by_sr thresholds and ordering") {
    auto pool = table_pool();
    auto all = filter_by_sr(pool, 0.30);
    REQUIRE(all.size() == 3);
    CHECK(all[0].instance == parse_instance("D -> R -> C -> T"));
    CHECK(all[1].instance == parse_instance("R -> C -> T"));
    CHECK(all[2].instance == parse_instance("C -> T"));
    auto high = filter_by_sr(pool, 0.65);
    REQUIRE(high.size() == 1);
    CHECK(high[0].instance == parse_instance("D -> R -> C -> T"));
    CHECK(filter_by_sr(pool, 0.0).size() == 3);
    CHECK_THROWS_AS(filter_by_sr(pool, 1.5), Error);

    // Equal success rates rank by frequency.
    InstancePool ties;
    ties.insert(Instance{"A"}, 2, 1);
    ties.insert(Instance{"B"}, 8, 4);
    auto t = filter_by_sr(ties, 0.5);
    REQUIRE(t.size() == 2);
    CHECK(t[0].instance == Instance{"B"});
}

TEST_CASE("filter_by_sr is antitone in the threshold") {
    std::mt19937_64 rng(5);
    InstancePool pool;
    std::uniform_int_distribution<std::int64_t> n(1, 10);
    for (int i = 0; i < 40; ++i) {
        auto f = n(rng);
        std::uniform_int_distribution<std::int64_t> q(0, f);
        pool.insert(Instance{"P" + std::to_string(i)}, f, q(rng));
    }
    for (double t1 = 0.0; t1 <= 1.0; t1 += 0.1)
        for (double t2 = t1; t2 <= 1.0; t2 += 0.1) {
            std::set<std::int64_t> a, b;
            for (const auto& e : filter_by_sr(pool, t1)) a.insert(e.id);
            for (const auto& e : filter_by_sr(pool, t2)) b.insert(e.id);
            CHECK(std::includes(a.begin(), a.end(), b.begin(), b.end()));
        }
}

TEST_CASE("pool csv round trip and rejection") {
    auto pool = table_pool();
    pool.record(parse_instance("X → Y"), true);
    auto csv = pool.to_csv();
    CHECK(csv.rfind("id,instance,frequency,success\n", 0) == 0);
    CHECK(csv.find("4,X -> Y,1,1\n") != std::string::npos);
    CHECK(InstancePool::from_csv(csv) == pool);

    auto dir = std::filesystem::temp_directory_path() / "procloop_pool_test";
    std::filesystem::create_directories(dir);
    pool.save(dir / "pool.csv");
    CHECK(InstancePool::load(dir / "pool.csv") == pool);
    std::filesystem::remove_all(dir);

    auto reject = [](const std::string& text) {
        try {
            InstancePool::from_csv(text);
        } catch (const Error& e) {
            return e.code() == Errc::ParseError;
        }
        return false;
    };
    CHECK(reject("id,instance,frequency,success\n1,A -> B,2,3\n"));
    CHECK(reject("id,instance,frequency,success\n1,A -> B,x,0\n"));
    CHECK(reject("id,instance,frequency,success\n1,A -> B,2\n"));
    CHECK(reject("id,instance,frequency,success\n1,A,1,0\n2,A,1,0\n"));
    CHECK(reject("wrong,header\n"));
    CHECK(reject(""));
    CHECK(InstancePool::from_csv("id,instance,frequency,success\r\n7,A,3,1\r\n").find_id(7)->frequency == 3);
}
