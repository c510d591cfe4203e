// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include "procloop/bpmn.hpp"
#include "procloop/describe.hpp"
#include "procloop/error.hpp"
#include "procloop/harness.hpp"
#include "procloop/instance.hpp"
#include "procloop/mining.hpp"
#include "procloop/orchestrator.hpp"
#include "procloop/pool.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

using namespace procloop;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Runs a check, failing it when it throws or exceeds its time budget.
bool run(int id, const std::string& title, double budget_seconds, const std::function<Outcome()>& check) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = budget_seconds <= 0 || secs < budget_seconds;
    bool ok = o.pass && in_time;
    std::printf("%s criterion %d: %s | %s | %.3fs%s\n", ok ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
                secs, in_time ? "" : " (over budget)");
    std::fflush(stdout);
    return ok;
}

Outcome uct_arithmetic() {
    InstancePool pool;
    pool.insert(parse_instance("C -> T"), 14, 6);
    pool.insert(parse_instance("R -> C -> T"), 21, 13);
    pool.insert(parse_instance("D -> R -> C -> T"), 30, 21);
    const double expected[] = {1.1175, 0.8268, 0.6730};
    bool ok = pool.total() == 65;
    std::string detail;
    for (std::size_t i = 0; i < 3; ++i) {
        double s = uct_score(pool.entries()[i], 65, 1.0);
        ok = ok && std::abs(s - expected[i]) <= 1e-3;
        detail += (i ? " / " : "scores ") + fmt(s);
    }
    auto pick = select_next(pool, SelectionStrategy::uct(), 0);
    ok = ok && pick.id == pool.entries()[0].id;
    detail += ", argmax row " + std::to_string(pick.id);
    return {ok, detail};
}

Outcome strategy_traversal() {
    RunConfig cfg;
    const auto& x = cfg.experiments;
    auto r = experiment_strategies(cfg, SyntheticPoolSpec{x.synthetic_entries, x.synthetic_min_frequency,
                                                          x.synthetic_max_frequency},
                                   x.strategy_rounds);
    const auto& uct = r.runs[0];
    const auto& fr = r.runs[1];
    bool uct_ok = uct.pool_entries == 100 && uct.coverage_attempt && *uct.coverage_attempt <= 500;
    bool fr_ok = fr.perfect_entries > 0 && !fr.coverage_attempt;
    std::string detail = "uct covers " + std::to_string(uct.pool_entries) + " entries at attempt " +
                         (uct.coverage_attempt ? std::to_string(*uct.coverage_attempt) : "never") +
                         ", failure_rate final coverage " +
                         std::to_string(fr.coverage_curve.empty() ? 0 : fr.coverage_curve.back()) + " with " +
                         std::to_string(fr.perfect_entries) + " perfect entries";
    return {uct_ok && fr_ok, detail};
}

Outcome miner_fitness() {
    std::mt19937_64 rng(17);
    std::size_t misses = 0, traces_checked = 0;
    for (int i = 0; i < 200; ++i) {
        std::uniform_int_distribution<int> acts(1, 6), traces(1, 20), len(1, 8);
        int k = acts(rng);
        std::uniform_int_distribution<int> pick(0, k - 1);
        EventLog log;
        int n = traces(rng);
        for (int t = 0; t < n; ++t) {
            Trace tr;
            int l = len(rng);
            for (int j = 0; j < l; ++j) tr.push_back(std::string(1, char('A' + pick(rng))));
            log.add(tr);
        }
        auto tree = mine_tree(log);
        for (const auto& [trace, count] : log.variants()) {
            ++traces_checked;
            misses += accepts(tree, trace) ? 0 : 1;
        }
    }
    return {misses == 0, "200 logs, " + std::to_string(traces_checked) + " variants, " + std::to_string(misses) +
                             " rejected"};
}

Outcome miner_rediscovery() {
    test::TreeGenerator gen(1234);
    std::size_t mismatches = 0;
    for (int i = 0; i < 50; ++i) {
        auto tree = gen.next();
        if (tree.depth() > 3) return {false, "generator exceeded depth 3"};
        auto lang = enumerate_language(tree, 8);
        EventLog log;
        for (const auto& t : lang) log.add(t);
        mismatches += enumerate_language(mine_tree(log), 8) == lang ? 0 : 1;
    }
    return {mismatches == 0, "50 trees, " + std::to_string(mismatches) + " language mismatches"};
}

Outcome worked_example() {
    EventLog log;
    log.add(Trace{"D", "C", "T"});
    log.add(Trace{"D", "R", "C", "T"});
    auto tree = mine_tree(log);
    auto model = tree_to_bpmn(tree);
    auto c = count_elements(model);
    std::ifstream in(std::string(PROCLOOP_GOLDEN_DIR) + "/worked_description.txt");
    std::string golden;
    std::getline(in, golden);
    auto text = describe(model).text;
    bool ok = tree == parse_tree("seq(D, xor(tau, R), C, T)") && c == ElementCounts{4, 0, 2} && !golden.empty() &&
              text == golden;
    return {ok, tree.to_string() + ", tasks " + std::to_string(c.tasks) + " exclusive " +
                    std::to_string(c.exclusive_gateways) + " parallel " + std::to_string(c.parallel_gateways) +
                    ", description " + (text == golden ? "matches golden" : "differs from golden")};
}

Outcome filtering_effect() {
    RunConfig cfg;
    cfg.environment.p_false = 0.0;
    auto r = experiment_filtering(cfg, cfg.experiments.noise_fraction);
    bool ok = r.filtered.tasks == 14 && r.filtered.gateways() < r.unfiltered.gateways();
    return {ok, "filtered tasks " + std::to_string(r.filtered.tasks) + " gateways " +
                    std::to_string(r.filtered.gateways()) + " vs unfiltered tasks " +
                    std::to_string(r.unfiltered.tasks) + " gateways " + std::to_string(r.unfiltered.gateways())};
}

Outcome temperature_direction() {
    RunConfig cfg;
    std::vector<double> temps{0.0, 0.2, 0.6, 1.0, 1.4};
    auto r = experiment_temperature(cfg, temps, cfg.experiments.samples_per_temperature);
    std::vector<double> div, sr;
    for (const auto& row : r.rows) {
        div.push_back(row.diversity);
        sr.push_back(row.success_rate);
    }
    double rho_div = test::spearman(temps, div), rho_sr = test::spearman(temps, sr);
    bool ok = rho_div >= 0.9 && rho_sr <= -0.9 && div.front() == 0.0;
    return {ok, "spearman diversity " + fmt(rho_div, 3) + ", success " + fmt(rho_sr, 3) + ", diversity at 0 " +
                    fmt(div.front(), 6) + ", success " + fmt(sr.front(), 3) + " -> " + fmt(sr.back(), 3)};
}

Outcome enhancement_direction() {
    RunConfig cfg;
    auto r = experiment_enhancement(cfg, cfg.experiments.tasks_per_arm);
    double gain = r.enhanced_total.rate() - r.baseline_total.rate();
    bool ok = gain >= 0.10 - 1e-12 && r.rows.size() == 5;
    std::string worse;
    for (const auto& row : r.rows)
        if (row.enhanced.rate() < row.baseline.rate()) {
            ok = false;
            worse += " " + row.category;
        }
    return {ok, "baseline " + fmt(r.baseline_total.rate(), 3) + " enhanced " + fmt(r.enhanced_total.rate(), 3) +
                    " gain " + fmt(100 * gain, 1) + " points" + (worse.empty() ? ", no category regresses"
                                                                            : ", regressions:" + worse)};
}

Outcome diversity_identities() {
    const auto& def = PhaseVocabulary::standard().default_instance();
    std::vector<Phase> kept;
    for (const auto& p : def.phases())
        if (p.name() != "Annotation") kept.push_back(p);
    double self = diversity(def, def);
    double disjoint = diversity(Instance{"X", "Y", "Z"}, def);
    double deletion = diversity(Instance(kept), def);
    bool ok = self == 0.0 && disjoint == 1.0 && std::abs(deletion - 0.1429) <= 1e-4;
    return {ok, "self " + fmt(self) + ", disjoint " + fmt(disjoint) + ", Annotation deletion " + fmt(deletion, 6)};
}

Outcome round_trips() {
    std::mt19937_64 rng(7);
    std::vector<std::string> names;
    for (const auto& e : PhaseVocabulary::standard().entries()) names.push_back(e.name);
    names.push_back("UsernameSet");
    std::uniform_int_distribution<std::size_t> len(1, 20), pick(0, names.size() - 1);
    std::size_t instance_fail = 0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<Phase> phases;
        for (auto n = len(rng); n > 0; --n) phases.emplace_back(names[pick(rng)]);
        Instance inst(phases);
        instance_fail += parse_instance(serialize_instance(inst)) == inst ? 0 : 1;
    }

    test::TreeGenerator gen(99);
    std::size_t xml_fail = 0;
    for (int i = 0; i < 100; ++i) {
        auto m = tree_to_bpmn(gen.next());
        xml_fail += parse_xml(export_xml(m)) == m ? 0 : 1;
    }

    InstancePool pool;
    pool.insert(parse_instance("C -> T"), 14, 6);
    pool.insert(parse_instance("R -> C -> T"), 21, 13);
    pool.record(parse_instance("X → Y"), true);
    TempDir dir("procloop-acceptance");
    pool.save(dir.path() / "pool.csv");
    bool csv_ok = InstancePool::load(dir.path() / "pool.csv") == pool;
    bool rejects = false;
    try {
        InstancePool::from_csv("id,instance,frequency,success\n1,A -> B,2,3\n");
    } catch (const Error& e) {
        rejects = e.code() == Errc::ParseError;
    }
    bool ok = instance_fail == 0 && xml_fail == 0 && csv_ok && rejects;
    return {ok, "instance failures " + std::to_string(instance_fail) + "/1000, xml failures " +
                    std::to_string(xml_fail) + "/100, csv " + (csv_ok ? "identical" : "differs") + ", Q>N " +
                    (rejects ? "rejected" : "accepted")};
}

Outcome chat_chain_contract() {
    const Phase phase("Coding");
    const RolePair roles{Role::CTO, Role::Programmer};
    int calls = 0;
    ChatBackend agreeable = [&](const std::string&, const std::vector<ChatTurn>& h) {
        ++calls;
        return h.size() % 2 == 0 ? std::string("Please write it.") : std::string("<SOLUTION>x = 1</SOLUTION>");
    };
    auto a = run_chat(phase, roles, {}, agreeable);
    bool immediate = a.consensus && !a.reflected && calls == 2;

    calls = 0;
    ChatBackend reflective = [&](const std::string& system, const std::vector<ChatTurn>&) {
        ++calls;
        return system.find(kReflectionMarker) != std::string::npos ? std::string("<SOLUTION>ok</SOLUTION>")
                                                                    : std::string("Let us keep talking.");
    };
    auto b = run_chat(phase, roles, {}, reflective);
    bool reflected = b.consensus && b.reflected;

    calls = 0;
    ChatBackend silent = [&](const std::string&, const std::vector<ChatTurn>&) {
        ++calls;
        return std::string("...");
    };
    bool exhausted = false;
    ChatSettings s;
    try {
        run_chat(phase, roles, {}, silent, s);
    } catch (const Error& e) {
        exhausted = e.code() == Errc::NoConsensus && calls <= s.turn_limit + s.max_reflections;
    }
    return {immediate && reflected && exhausted, std::string("immediate ") + (immediate ? "ok" : "bad") +
                                                     ", reflection " + (reflected ? "ok" : "bad") +
                                                     ", exhaustion " + (exhausted ? "ok" : "bad") +
                                                     ", scripted backends only"};
}

}  // namespace

int main() {
    int failures = 0;
    failures += !run(1, "uct arithmetic", 0, uct_arithmetic);
    failures += !run(2, "strategy traversal", 1.0, strategy_traversal);
    failures += !run(3, "miner fitness", 10.0, miner_fitness);
    failures += !run(4, "miner rediscovery", 30.0, miner_rediscovery);
    failures += !run(5, "worked mining example", 0, worked_example);
    failures += !run(6, "filtering effect", 30.0, filtering_effect);
    failures += !run(7, "temperature direction", 30.0, temperature_direction);
    failures += !run(8, "enhancement direction", 60.0, enhancement_direction);
    failures += !run(9, "diversity identities", 0, diversity_identities);
    failures += !run(10, "round trips", 0, round_trips);
    failures += !run(11, "chat chain contract", 0, chat_chain_contract);
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
