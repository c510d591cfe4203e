#pragma once
// Run configuration, the closed generate -> execute -> filter -> mine ->
// describe loop, and the four desk-scale experiments.

#include "procloop/bpmn.hpp"
#include "procloop/describe.hpp"
#include "procloop/generation.hpp"
#include "procloop/instance.hpp"
#include "procloop/orchestrator.hpp"
#include "procloop/pool.hpp"
#include "procloop/process_tree.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace procloop {

struct Task {
    std::string category;
    std::string prompt;
};

// The bundled task list: five prompts for each of creation, game,
// education, work and life.
const std::vector<Task>& bundled_tasks();
std::vector<Task> parse_tasks(std::string_view json_text);
const std::vector<std::string>& task_categories();

enum class ExecutionBackend { Simulated, ChatChain };

struct ChatChainOptions {
    std::vector<std::string> compile_cmd{"python3", "-m", "py_compile", "{artifact}"};
    std::string artifact_name = "main.py";
    int turn_limit = 6;
    int max_reflections = 2;
};

struct LoopSettings {
    std::size_t iterations = 3;
    std::size_t tasks_per_iteration = 5;
    std::size_t instances_per_task = 4;
    std::size_t experiential_count = kDefaultExperientialCount;
    // Feed the mined model back into generation.
    bool enhance = true;
};

struct ExperimentSettings {
    std::vector<double> temperatures{0.0, 0.2, 0.6, 1.0, 1.4};
    std::size_t samples_per_temperature = 200;

    std::size_t strategy_rounds = 500;
    std::size_t synthetic_entries = 100;
    std::int64_t synthetic_min_frequency = 1;
    std::int64_t synthetic_max_frequency = 1;

    std::size_t campaign_executions = 600;
    double noise_fraction = 0.3;
    std::size_t campaign_replay_rounds = 300;

    std::size_t tasks_per_arm = 5;  // per category
    std::size_t instances_per_task = 20;
};

struct RunConfig {
    std::vector<Task> tasks = bundled_tasks();
    PhaseVocabulary vocabulary = PhaseVocabulary::standard();
    // Mock seeds default to the vocabulary's default instance.
    GeneratorConfig generator{MockBackend{{PhaseVocabulary::standard().default_instance()},
                                          default_hallucination_vocab(), 42},
                              kDefaultTemperature};

    // Experiential seeds for the llm backend; the mock keeps its own.
    std::vector<Instance> prompt_seeds{PhaseVocabulary::standard().default_instance()};

    ExecutionBackend execution = ExecutionBackend::Simulated;
    SimulatedEnvironment environment{default_hidden_model(), 0.9, 0.1, 42};
    ChatChainOptions chat_chain;

    std::optional<std::filesystem::path> pool_path;
    double filter_threshold = 0.30;
    std::size_t replay_rounds = 20;
    double uct_c = 1.0;
    std::uint64_t rng_seed = 42;

    LoopSettings loop;
    ExperimentSettings experiments;

    // Initial experiential instances of the active generator backend.
    const std::vector<Instance>& seed_instances() const;

    // Sets rng_seed and the seeds derived from it (mock generator and
    // simulated environment).
    void set_seed(std::uint64_t seed);

    // Sections: generation, orchestrator, pool, loop, experiments, plus
    // optional tasks, vocabulary and seed. Missing keys keep defaults;
    // relative file paths resolve against base_dir.
    static RunConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);
    // Everything that influences results, for report metadata.
    nlohmann::json snapshot() const;
    // Throws InvalidArgument.
    void validate() const;
};

struct ExperimentReport {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    nlohmann::json metadata;

    std::string to_csv() const;
    // Writes <dir>/<name>.csv and <dir>/<name>.meta.json.
    void write(const std::filesystem::path& dir, const std::string& name) const;
};

// Fixed six-decimal rendering used by every report.
std::string format_real(double v);

struct RunLogRecord {
    Instance instance;
    std::string mode;  // generated or replay
    bool success = false;
    double duration_seconds = 0.0;
    std::size_t iteration = 0;
};

std::string to_jsonl(const std::vector<RunLogRecord>& log);

struct IterationStats {
    std::size_t iteration = 0;
    std::size_t executions = 0;
    std::size_t successes = 0;
    std::size_t pool_total = 0;
    std::size_t distinct_variants = 0;
    std::size_t survivors = 0;
    ElementCounts counts;
    std::size_t description_sentences = 0;

    double success_rate() const { return executions ? double(successes) / double(executions) : 0.0; }
};

struct LoopResult {
    std::vector<IterationStats> iterations;
    InstancePool pool;
    std::optional<ProcessTree> tree;
    std::optional<BpmnModel> model;
    std::optional<ProcessDescription> description;
    std::vector<Instance> seeds;  // experiential instances after the last iteration
    std::string last_prompt;
    std::vector<RunLogRecord> log;
    ExperimentReport report;
};

// Executes instances through the configured backend with globally numbered
// calls. Simulated calls are numbered from the config seed.
class ExecutionEngine {
public:
    explicit ExecutionEngine(const RunConfig& cfg);
    ExecutionResult execute(const Instance& inst);
    bool conforms(const Instance& inst);
    std::uint64_t calls() const noexcept { return calls_; }

private:
    const RunConfig& cfg_;
    std::optional<SimulatedCompiler> simulated_;
    ChatChainSettings chat_;
    std::uint64_t calls_ = 0;
};

// Survivors of the success-rate filter mined into a model; nullopt when
// nothing survives.
struct MinedModel {
    std::vector<PoolEntry> survivors;
    ProcessTree tree;
    BpmnModel model;
    ProcessDescription description;
};
std::optional<MinedModel> mine_pool(const std::vector<PoolEntry>& entries);

struct GeneratedBatch {
    std::string prompt;
    std::vector<Instance> instances;
};
// One generation call for a task seeded with the config's initial seeds.
// An llm reply without parsable instances yields an empty batch.
GeneratedBatch generate_batch(const RunConfig& cfg, const Task& task, std::size_t count, std::uint64_t stream = 0);

// Throws InvalidArgument for iterations == 0; module errors are rethrown
// with the iteration number prepended.
LoopResult run_loop(const RunConfig& cfg, std::size_t iterations);

struct TemperatureRow {
    double temperature = 0.0;
    std::size_t samples = 0;
    double success_rate = 0.0;
    double diversity = 0.0;
    double hallucination_rate = 0.0;  // share with at least one unknown phase
};
struct TemperatureResult {
    std::vector<TemperatureRow> rows;
    ExperimentReport report;
};
TemperatureResult experiment_temperature(const RunConfig& cfg, const std::vector<double>& temps,
                                         std::size_t samples_per_temp);

struct SyntheticPoolSpec {
    std::size_t entries = 100;
    std::int64_t min_frequency = 1;
    std::int64_t max_frequency = 1;
};
// Distinct instances (hidden-model play-outs, then mutations) with N drawn
// from [min, max] and Q from N simulated executions.
InstancePool synthetic_pool(const RunConfig& cfg, const SyntheticPoolSpec& spec);

struct StrategyRun {
    StrategyKind kind;
    std::vector<std::size_t> coverage_curve;
    std::optional<std::size_t> coverage_attempt;
    std::size_t pool_entries = 0;
    std::size_t perfect_entries = 0;  // Q = N at the start
    std::vector<std::int64_t> first_picks;
};
struct StrategiesResult {
    std::vector<StrategyRun> runs;  // uct, failure_rate, frequency
    ExperimentReport report;
};
StrategiesResult experiment_strategies(const RunConfig& cfg, const SyntheticPoolSpec& spec, std::size_t rounds);

struct Campaign {
    InstancePool pool;
    std::size_t conforming_draws = 0;
    std::size_t mutated_draws = 0;
};
// Each execution draws a hidden-model play-out or, with probability
// noise_fraction, a mock-mutated instance at the configured temperature;
// UCT replay rounds follow.
Campaign run_campaign(const RunConfig& cfg, double noise_fraction, std::size_t executions,
                      std::size_t replay_rounds = 0);

struct FilteringResult {
    std::vector<std::size_t> sr_histogram;  // ten deciles, last one closed
    ElementCounts unfiltered;
    ElementCounts filtered;
    std::size_t pool_entries = 0;
    std::size_t survivors = 0;
    std::optional<ProcessTree> unfiltered_tree;
    std::optional<ProcessTree> filtered_tree;
    ExperimentReport report;
};
FilteringResult experiment_filtering(const RunConfig& cfg, double noise_fraction);

struct ArmStats {
    std::size_t executions = 0;
    std::size_t successes = 0;
    double rate() const { return executions ? double(successes) / double(executions) : 0.0; }
};
struct EnhancementRow {
    std::string category;
    ArmStats baseline;
    ArmStats enhanced;
};
struct EnhancementResult {
    std::vector<EnhancementRow> rows;  // one per category
    ArmStats baseline_total;
    ArmStats enhanced_total;
    std::optional<ProcessDescription> description;
    ExperimentReport report;
};
EnhancementResult experiment_enhancement(const RunConfig& cfg, std::size_t tasks_per_arm);

}  // namespace procloop
