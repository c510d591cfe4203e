#include "procloop/harness.hpp"

#include "procloop/error.hpp"
#include "procloop/mining.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace procloop {

namespace {

constexpr std::string_view kBundledTasks =
#include "bundled_tasks.inc"
    ;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream seeds derived from the run seed.
std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(seed ^ splitmix64(a ^ splitmix64(b + 0x51ED27)));
}

enum Stream : std::uint64_t {
    kMockStream = 1,
    kEnvStream,
    kTaskStream,
    kReplayStream,
    kCampaignStream,
    kSyntheticStream,
    kSeedDrawStream,
};

Instance from_trace(const Trace& t) {
    std::vector<Phase> phases;
    phases.reserve(t.size());
    for (const auto& a : t) phases.emplace_back(a);
    return Instance(std::move(phases));
}

}  // namespace

std::vector<Task> parse_tasks(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("task list: ") + e.what());
    }
    if (!doc.is_array()) throw Error(Errc::ParseError, "task list must be a JSON array");
    std::vector<Task> tasks;
    for (const auto& t : doc) {
        if (!t.is_object() || !t.contains("category") || !t.contains("prompt"))
            throw Error(Errc::ParseError, "task entries need category and prompt");
        tasks.push_back({t.at("category").get<std::string>(), t.at("prompt").get<std::string>()});
    }
    return tasks;
}

const std::vector<Task>& bundled_tasks() {
    static const std::vector<Task> tasks = parse_tasks(kBundledTasks);
    return tasks;
}

const std::vector<std::string>& task_categories() {
    static const std::vector<std::string> cats{"creation", "game", "education", "work", "life"};
    return cats;
}

// ---------------------------------------------------------------- config

void RunConfig::set_seed(std::uint64_t seed) {
    rng_seed = seed;
    environment.rng_seed = derive(seed, kEnvStream);
    if (auto* mock = std::get_if<MockBackend>(&generator.backend)) mock->rng_seed = derive(seed, kMockStream);
}

namespace {

using json = nlohmann::json;

void check_keys(const json& section, std::string_view name, std::initializer_list<std::string_view> allowed) {
    if (!section.is_object()) throw Error(Errc::ParseError, "config section '" + std::string(name) + "' must be an object");
    for (const auto& [key, _] : section.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw Error(Errc::ParseError, "unknown key '" + key + "' in config section '" + std::string(name) + "'");
}

template <typename T>
void read(const json& section, const char* key, T& out) {
    if (section.contains(key)) out = section.at(key).get<T>();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig RunConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, std::string("config: ") + e.what());
    }
    check_keys(doc, "<root>",
               {"seed", "generation", "orchestrator", "pool", "loop", "experiments", "tasks", "tasks_file",
                "vocabulary", "vocabulary_file"});

    RunConfig cfg;
    try {
        if (doc.contains("vocabulary")) cfg.vocabulary = PhaseVocabulary::from_json(doc.at("vocabulary").dump());
        if (doc.contains("vocabulary_file"))
            cfg.vocabulary = PhaseVocabulary::load(resolve(base_dir, doc.at("vocabulary_file").get<std::string>()));
        if (doc.contains("tasks")) cfg.tasks = parse_tasks(doc.at("tasks").dump());
        if (doc.contains("tasks_file"))
            cfg.tasks = parse_tasks(read_file(resolve(base_dir, doc.at("tasks_file").get<std::string>())));

        std::vector<Instance> seeds{cfg.vocabulary.default_instance()};
        if (doc.contains("generation")) {
            const auto& g = doc.at("generation");
            check_keys(g, "generation",
                       {"backend", "temperature", "seeds", "hallucination_vocab", "weights", "endpoint", "model",
                        "api_key_env", "timeout_seconds", "retries"});
            read(g, "temperature", cfg.generator.temperature);
            std::string backend = g.value("backend", "mock");
            if (g.contains("seeds")) {
                seeds.clear();
                for (const auto& s : g.at("seeds")) seeds.push_back(parse_instance(s.get<std::string>()));
            }
            if (backend == "mock") {
                MockBackend mock;
                mock.seed_instances = seeds;
                read(g, "hallucination_vocab", mock.hallucination_vocab);
                if (g.contains("weights")) {
                    const auto& w = g.at("weights");
                    check_keys(w, "generation.weights", {"insert", "swap", "delete"});
                    read(w, "insert", mock.weights.insert);
                    read(w, "swap", mock.weights.swap);
                    read(w, "delete", mock.weights.remove);
                }
                cfg.generator.backend = mock;
            } else if (backend == "llm") {
                LlmBackend llm;
                read(g, "endpoint", llm.endpoint);
                read(g, "model", llm.model);
                read(g, "api_key_env", llm.api_key_env);
                read(g, "timeout_seconds", llm.timeout_seconds);
                read(g, "retries", llm.retries);
                cfg.generator.backend = llm;
            } else {
                throw Error(Errc::ParseError, "generation.backend must be mock or llm");
            }
        }
        // Loop seeds also drive the llm prompts, so keep them for both.
        if (auto* mock = std::get_if<MockBackend>(&cfg.generator.backend)) mock->seed_instances = seeds;
        cfg.prompt_seeds = seeds;

        if (doc.contains("orchestrator")) {
            const auto& o = doc.at("orchestrator");
            check_keys(o, "orchestrator",
                       {"mode", "p_true", "p_false", "hidden_model", "hidden_model_file", "compile_cmd",
                        "artifact_name", "turn_limit", "max_reflections"});
            std::string mode = o.value("mode", "simulated");
            if (mode == "simulated")
                cfg.execution = ExecutionBackend::Simulated;
            else if (mode == "chatchain")
                cfg.execution = ExecutionBackend::ChatChain;
            else
                throw Error(Errc::ParseError, "orchestrator.mode must be simulated or chatchain");
            read(o, "p_true", cfg.environment.p_true);
            read(o, "p_false", cfg.environment.p_false);
            if (o.contains("hidden_model")) cfg.environment.hidden_model = parse_tree(o.at("hidden_model").get<std::string>());
            if (o.contains("hidden_model_file"))
                cfg.environment.hidden_model =
                    parse_tree(read_file(resolve(base_dir, o.at("hidden_model_file").get<std::string>())));
            read(o, "compile_cmd", cfg.chat_chain.compile_cmd);
            read(o, "artifact_name", cfg.chat_chain.artifact_name);
            read(o, "turn_limit", cfg.chat_chain.turn_limit);
            read(o, "max_reflections", cfg.chat_chain.max_reflections);
        }
        if (doc.contains("pool")) {
            const auto& p = doc.at("pool");
            check_keys(p, "pool", {"path", "filter_threshold", "replay_rounds", "uct_c"});
            if (p.contains("path")) cfg.pool_path = resolve(base_dir, p.at("path").get<std::string>());
            read(p, "filter_threshold", cfg.filter_threshold);
            read(p, "replay_rounds", cfg.replay_rounds);
            read(p, "uct_c", cfg.uct_c);
        }
        if (doc.contains("loop")) {
            const auto& l = doc.at("loop");
            check_keys(l, "loop",
                       {"iterations", "tasks_per_iteration", "instances_per_task", "experiential_count", "enhance"});
            read(l, "iterations", cfg.loop.iterations);
            read(l, "tasks_per_iteration", cfg.loop.tasks_per_iteration);
            read(l, "instances_per_task", cfg.loop.instances_per_task);
            read(l, "experiential_count", cfg.loop.experiential_count);
            read(l, "enhance", cfg.loop.enhance);
        }
        if (doc.contains("experiments")) {
            const auto& x = doc.at("experiments");
            check_keys(x, "experiments",
                       {"temperatures", "samples_per_temperature", "strategy_rounds", "synthetic_entries",
                        "synthetic_min_frequency", "synthetic_max_frequency", "campaign_executions",
                        "noise_fraction", "campaign_replay_rounds", "tasks_per_arm", "instances_per_task"});
            auto& e = cfg.experiments;
            read(x, "temperatures", e.temperatures);
            read(x, "samples_per_temperature", e.samples_per_temperature);
            read(x, "strategy_rounds", e.strategy_rounds);
            read(x, "synthetic_entries", e.synthetic_entries);
            read(x, "synthetic_min_frequency", e.synthetic_min_frequency);
            read(x, "synthetic_max_frequency", e.synthetic_max_frequency);
            read(x, "campaign_executions", e.campaign_executions);
            read(x, "noise_fraction", e.noise_fraction);
            read(x, "campaign_replay_rounds", e.campaign_replay_rounds);
            read(x, "tasks_per_arm", e.tasks_per_arm);
            read(x, "instances_per_task", e.instances_per_task);
        }
        cfg.set_seed(doc.value("seed", cfg.rng_seed));
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    return from_json(read_file(path), path.parent_path());
}

const std::vector<Instance>& RunConfig::seed_instances() const {
    if (auto* mock = std::get_if<MockBackend>(&generator.backend)) return mock->seed_instances;
    return prompt_seeds;
}

void RunConfig::validate() const {
    generator.validate();
    environment.validate();
    if (filter_threshold < 0.0 || filter_threshold > 1.0)
        throw Error(Errc::InvalidArgument, "filter_threshold must lie in [0, 1]");
    if (uct_c < 0.0) throw Error(Errc::InvalidArgument, "uct_c must be non-negative");
    if (tasks.empty()) throw Error(Errc::InvalidArgument, "task list is empty");
    if (loop.tasks_per_iteration == 0 || loop.instances_per_task == 0 || loop.experiential_count == 0)
        throw Error(Errc::InvalidArgument, "loop sizes must be positive");
    if (chat_chain.turn_limit < 2 || chat_chain.max_reflections < 0)
        throw Error(Errc::InvalidArgument, "chat chain needs turn_limit >= 2 and max_reflections >= 0");
    if (chat_chain.compile_cmd.empty()) throw Error(Errc::InvalidArgument, "compile_cmd is empty");
    const auto& x = experiments;
    for (double t : x.temperatures)
        if (t < kMinTemperature || t > kMaxTemperature)
            throw Error(Errc::InvalidArgument, "experiment temperatures must lie in [0, 1.5]");
    if (x.noise_fraction < 0.0 || x.noise_fraction > 1.0)
        throw Error(Errc::InvalidArgument, "noise_fraction must lie in [0, 1]");
    if (x.synthetic_min_frequency < 1 || x.synthetic_max_frequency < x.synthetic_min_frequency)
        throw Error(Errc::InvalidArgument, "synthetic frequencies need 1 <= min <= max");
}

nlohmann::json RunConfig::snapshot() const {
    json j;
    j["seed"] = rng_seed;
    j["tasks"] = tasks.size();
    json vocab = json::array();
    for (const auto& e : vocabulary.entries()) vocab.push_back(e.name);
    j["vocabulary"] = vocab;
    json g{{"temperature", generator.temperature}};
    json seeds = json::array();
    for (const auto& s : seed_instances()) seeds.push_back(serialize_instance(s));
    g["seeds"] = seeds;
    if (auto* mock = std::get_if<MockBackend>(&generator.backend)) {
        g["backend"] = "mock";
        g["rng_seed"] = mock->rng_seed;
        g["hallucination_vocab"] = mock->hallucination_vocab;
        g["weights"] = {{"insert", mock->weights.insert}, {"swap", mock->weights.swap}, {"delete", mock->weights.remove}};
    } else {
        const auto& llm = std::get<LlmBackend>(generator.backend);
        g["backend"] = "llm";
        g["endpoint"] = llm.endpoint;
        g["model"] = llm.model;
        g["timeout_seconds"] = llm.timeout_seconds;
        g["retries"] = llm.retries;
    }
    j["generation"] = g;
    j["orchestrator"] = {{"mode", execution == ExecutionBackend::Simulated ? "simulated" : "chatchain"},
                         {"p_true", environment.p_true},
                         {"p_false", environment.p_false},
                         {"env_seed", environment.rng_seed},
                         {"hidden_model", environment.hidden_model.to_string()},
                         {"compile_cmd", chat_chain.compile_cmd},
                         {"turn_limit", chat_chain.turn_limit},
                         {"max_reflections", chat_chain.max_reflections}};
    j["pool"] = {{"filter_threshold", filter_threshold}, {"replay_rounds", replay_rounds}, {"uct_c", uct_c}};
    j["loop"] = {{"iterations", loop.iterations},
                 {"tasks_per_iteration", loop.tasks_per_iteration},
                 {"instances_per_task", loop.instances_per_task},
                 {"experiential_count", loop.experiential_count},
                 {"enhance", loop.enhance}};
    const auto& x = experiments;
    j["experiments"] = {{"temperatures", x.temperatures},
                        {"samples_per_temperature", x.samples_per_temperature},
                        {"strategy_rounds", x.strategy_rounds},
                        {"synthetic_entries", x.synthetic_entries},
                        {"synthetic_min_frequency", x.synthetic_min_frequency},
                        {"synthetic_max_frequency", x.synthetic_max_frequency},
                        {"campaign_executions", x.campaign_executions},
                        {"noise_fraction", x.noise_fraction},
                        {"campaign_replay_rounds", x.campaign_replay_rounds},
                        {"tasks_per_arm", x.tasks_per_arm},
                        {"instances_per_task", x.instances_per_task}};
    return j;
}

// ---------------------------------------------------------------- reports

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v == 0.0 ? 0.0 : v);
    return buf;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

std::string ExperimentReport::to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += csv_field(fields[i]);
        }
        out += '\n';
    };
    line(columns);
    for (const auto& r : rows) line(r);
    return out;
}

void ExperimentReport::write(const std::filesystem::path& dir, const std::string& name) const {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / (name + ".csv"), std::ios::binary);
    std::ofstream meta(dir / (name + ".meta.json"), std::ios::binary);
    if (!csv || !meta) throw Error(Errc::IoError, "cannot write report " + name + " into " + dir.string());
    csv << to_csv();
    meta << metadata.dump(2) << '\n';
}

std::string to_jsonl(const std::vector<RunLogRecord>& log) {
    std::string out;
    for (const auto& r : log) {
        nlohmann::json j{{"instance", serialize_instance(r.instance)},
                         {"mode", r.mode},
                         {"success", r.success},
                         {"duration", r.duration_seconds},
                         {"iteration", r.iteration}};
        out += j.dump() + '\n';
    }
    return out;
}

// ---------------------------------------------------------------- execution

ExecutionEngine::ExecutionEngine(const RunConfig& cfg) : cfg_(cfg) {
    if (cfg.execution == ExecutionBackend::Simulated) {
        simulated_.emplace(cfg.environment);
    } else {
        const auto* llm = std::get_if<LlmBackend>(&cfg.generator.backend);
        LlmBackend backend = llm ? *llm : LlmBackend{};
        chat_.backend = make_llm_chat_backend(backend, cfg.generator.temperature);
        chat_.chat = {cfg.chat_chain.turn_limit, cfg.chat_chain.max_reflections};
        chat_.compile_cmd = cfg.chat_chain.compile_cmd;
        chat_.artifact_name = cfg.chat_chain.artifact_name;
    }
}

ExecutionResult ExecutionEngine::execute(const Instance& inst) {
    auto index = calls_++;
    if (simulated_) return execute_simulated(*simulated_, inst, index);
    return execute_chat_chain(chat_, inst);
}

bool ExecutionEngine::conforms(const Instance& inst) {
    if (simulated_) return simulated_->conforms(inst);
    return accepts(cfg_.environment.hidden_model, inst.names());
}

std::optional<MinedModel> mine_pool(const std::vector<PoolEntry>& entries) {
    EventLog log;
    std::vector<PoolEntry> used;
    for (const auto& e : entries) {
        if (e.frequency <= 0) continue;
        log.add(e.instance, static_cast<std::size_t>(e.frequency));
        used.push_back(e);
    }
    if (log.empty()) return std::nullopt;
    auto tree = mine_tree(log);
    auto model = tree_to_bpmn(tree);
    auto description = describe(model);
    return MinedModel{std::move(used), std::move(tree), std::move(model), std::move(description)};
}

// ---------------------------------------------------------------- loop

namespace {

std::vector<Instance> top_distinct(const std::vector<PoolEntry>& ranked, std::size_t k) {
    std::vector<Instance> out;
    for (const auto& e : ranked) {
        if (out.size() == k) break;
        out.push_back(e.instance);
    }
    return out;
}

std::vector<Instance> generate_for_task(const RunConfig& cfg, const Task& task, const std::vector<Instance>& seeds,
                                        const std::optional<ProcessTree>& guide,
                                        const std::optional<ProcessDescription>& description, std::uint64_t stream,
                                        std::size_t count, std::string& prompt_out) {
    PromptSpec spec;
    spec.user_task = task.prompt;
    spec.phase_explanations = cfg.vocabulary;
    for (const auto& s : seeds) {
        if (spec.experiential_instances.size() == cfg.loop.experiential_count) break;
        if (std::find(spec.experiential_instances.begin(), spec.experiential_instances.end(), s) ==
            spec.experiential_instances.end())
            spec.experiential_instances.push_back(s);
    }
    spec.process_description = description;
    prompt_out = build_prompt(spec);

    if (const auto* mock = std::get_if<MockBackend>(&cfg.generator.backend)) {
        // The mock sees exactly the experiential instances of the prompt.
        MockBackend m = *mock;
        m.seed_instances = spec.experiential_instances;
        m.rng_seed = derive(cfg.rng_seed, kMockStream, stream);
        m.guide = guide;
        return mock_generate(m, cfg.generator.temperature, count);
    }
    const auto& llm = std::get<LlmBackend>(cfg.generator.backend);
    std::vector<Instance> out;
    try {
        out = llm_generate(llm, prompt_out, cfg.generator.temperature);
    } catch (const Error& e) {
        if (e.code() != Errc::EmptyGeneration) throw;
    }
    if (out.size() > count) out.erase(out.begin() + static_cast<std::ptrdiff_t>(count), out.end());
    return out;
}

}  // namespace

GeneratedBatch generate_batch(const RunConfig& cfg, const Task& task, std::size_t count, std::uint64_t stream) {
    cfg.validate();
    GeneratedBatch batch;
    batch.instances =
        generate_for_task(cfg, task, cfg.seed_instances(), std::nullopt, std::nullopt, stream, count, batch.prompt);
    return batch;
}

LoopResult run_loop(const RunConfig& cfg, std::size_t iterations) {
    if (iterations == 0) throw Error(Errc::InvalidArgument, "run_loop needs at least one iteration");
    cfg.validate();

    LoopResult result;
    if (cfg.pool_path && std::filesystem::exists(*cfg.pool_path)) result.pool = InstancePool::load(*cfg.pool_path);
    ExecutionEngine engine(cfg);
    std::vector<Instance> seeds = cfg.seed_instances();
    std::optional<ProcessTree> guide;
    std::optional<ProcessDescription> description;

    std::mt19937_64 task_rng(derive(cfg.rng_seed, kTaskStream));
    for (std::size_t it = 1; it <= iterations; ++it) {
        try {
            IterationStats stats;
            stats.iteration = it;
            std::uniform_int_distribution<std::size_t> pick(0, cfg.tasks.size() - 1);
            for (std::size_t t = 0; t < cfg.loop.tasks_per_iteration; ++t) {
                const auto& task = cfg.tasks[pick(task_rng)];
                auto batch = generate_for_task(cfg, task, seeds, cfg.loop.enhance ? guide : std::nullopt,
                                               cfg.loop.enhance ? description : std::nullopt,
                                               it * 1000003ULL + t, cfg.loop.instances_per_task, result.last_prompt);
                for (const auto& inst : batch) {
                    auto r = engine.execute(inst);
                    result.pool.record(inst, r.success);
                    result.log.push_back({inst, "generated", r.success, r.duration_seconds, it});
                    ++stats.executions;
                    stats.successes += r.success ? 1 : 0;
                }
            }

            if (!result.pool.empty() && cfg.replay_rounds > 0) {
                Executor exec = [&](const Instance& inst) {
                    auto r = engine.execute(inst);
                    result.log.push_back({inst, "replay", r.success, r.duration_seconds, it});
                    return r.success;
                };
                replay(result.pool, SelectionStrategy::uct(cfg.uct_c), exec, cfg.replay_rounds,
                       derive(cfg.rng_seed, kReplayStream, it));
            }

            auto survivors = filter_by_sr(result.pool, cfg.filter_threshold);
            stats.survivors = survivors.size();
            if (auto mined = mine_pool(survivors)) {
                stats.counts = count_elements(mined->model);
                stats.description_sentences = mined->description.sentence_count;
                seeds = top_distinct(survivors, survivors.size());
                guide = mined->tree;
                description = mined->description;
                result.tree = mined->tree;
                result.model = mined->model;
                result.description = mined->description;
            }
            stats.pool_total = static_cast<std::size_t>(result.pool.total());
            stats.distinct_variants = result.pool.size();
            result.iterations.push_back(stats);
        } catch (const Error& e) {
            throw Error(e.code(), "iteration " + std::to_string(it) + ": " + e.detail());
        }
    }
    result.seeds = seeds;

    auto& rep = result.report;
    rep.columns = {"iteration",         "executions",  "success_rate",       "pool_total",
                   "distinct_variants", "survivors",   "tasks",              "exclusive_gateways",
                   "parallel_gateways", "gateways",    "description_sentences"};
    for (const auto& s : result.iterations)
        rep.rows.push_back({std::to_string(s.iteration), std::to_string(s.executions), format_real(s.success_rate()),
                            std::to_string(s.pool_total), std::to_string(s.distinct_variants),
                            std::to_string(s.survivors), std::to_string(s.counts.tasks),
                            std::to_string(s.counts.exclusive_gateways), std::to_string(s.counts.parallel_gateways),
                            std::to_string(s.counts.gateways()), std::to_string(s.description_sentences)});
    rep.metadata = {{"experiment", "loop"}, {"iterations", iterations}, {"config", cfg.snapshot()}};
    return result;
}

// ---------------------------------------------------------------- experiments

TemperatureResult experiment_temperature(const RunConfig& cfg, const std::vector<double>& temps,
                                         std::size_t samples_per_temp) {
    if (samples_per_temp == 0) throw Error(Errc::InvalidArgument, "samples_per_temp must be positive");
    SimulatedCompiler compiler(cfg.environment);
    const auto& reference = cfg.vocabulary.default_instance();

    MockBackend mock;
    if (const auto* m = std::get_if<MockBackend>(&cfg.generator.backend)) mock = *m;
    mock.seed_instances = {reference};
    mock.guide.reset();
    mock.rng_seed = derive(cfg.rng_seed, kMockStream, 0x7E);

    TemperatureResult result;
    for (double t : temps) {
        auto batch = mock_generate(mock, t, samples_per_temp);
        TemperatureRow row{t, batch.size()};
        std::size_t ok = 0, hallucinated = 0;
        double div = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            // Same call numbering at every temperature.
            ok += compiler.compile(batch[i], i) ? 1 : 0;
            div += diversity(batch[i], reference);
            hallucinated += unknown_phases(batch[i], cfg.vocabulary).empty() ? 0 : 1;
        }
        row.success_rate = double(ok) / double(batch.size());
        row.diversity = div / double(batch.size());
        row.hallucination_rate = double(hallucinated) / double(batch.size());
        result.rows.push_back(row);
    }
    auto& rep = result.report;
    rep.columns = {"temperature", "samples", "success_rate", "diversity", "hallucination_rate"};
    for (const auto& r : result.rows)
        rep.rows.push_back({format_real(r.temperature), std::to_string(r.samples), format_real(r.success_rate),
                            format_real(r.diversity), format_real(r.hallucination_rate)});
    rep.metadata = {{"experiment", "temperature"},
                    {"temperatures", temps},
                    {"samples_per_temperature", samples_per_temp},
                    {"config", cfg.snapshot()}};
    return result;
}

InstancePool synthetic_pool(const RunConfig& cfg, const SyntheticPoolSpec& spec) {
    if (spec.entries == 0 || spec.min_frequency < 1 || spec.max_frequency < spec.min_frequency)
        throw Error(Errc::InvalidArgument, "synthetic pool needs entries > 0 and 1 <= min <= max frequency");
    std::mt19937_64 rng(derive(cfg.rng_seed, kSyntheticStream));

    // Distinct candidates: hidden-model play-outs first, then mutations.
    std::vector<Instance> distinct;
    std::set<Instance> seen;
    auto offer = [&](const Instance& inst) {
        if (distinct.size() < spec.entries && seen.insert(inst).second) distinct.push_back(inst);
    };
    for (int i = 0; i < 64 && distinct.size() < spec.entries / 4; ++i) {
        auto t = sample_trace(cfg.environment.hidden_model, rng);
        if (!t.empty()) offer(from_trace(t));
    }
    MockBackend mock;
    if (const auto* m = std::get_if<MockBackend>(&cfg.generator.backend)) mock = *m;
    mock.seed_instances = cfg.seed_instances();
    mock.guide.reset();
    for (std::uint64_t round = 0; distinct.size() < spec.entries; ++round) {
        if (round > 1000) throw Error(Errc::InvalidArgument, "cannot find enough distinct instances");
        mock.rng_seed = derive(cfg.rng_seed, kSyntheticStream, round + 1);
        for (const auto& inst : mock_generate(mock, kMaxTemperature, spec.entries)) offer(inst);
    }

    // Counters come from simulated executions, so perfect entries are
    // mostly conforming ones plus a few lucky hallucinations.
    InstancePool pool;
    SimulatedCompiler compiler(cfg.environment);
    std::uniform_int_distribution<std::int64_t> freq(spec.min_frequency, spec.max_frequency);
    std::uint64_t calls = 0x5EED0000;
    for (const auto& inst : distinct) {
        auto n = freq(rng);
        std::int64_t q = 0;
        for (std::int64_t r = 0; r < n; ++r) q += compiler.compile(inst, calls++) ? 1 : 0;
        pool.insert(inst, n, q);
    }
    return pool;
}

StrategiesResult experiment_strategies(const RunConfig& cfg, const SyntheticPoolSpec& spec, std::size_t rounds) {
    const auto base = synthetic_pool(cfg, spec);
    std::size_t perfect = 0;
    for (const auto& e : base.entries()) perfect += e.success_count == e.frequency ? 1 : 0;

    StrategiesResult result;
    for (auto kind : {StrategyKind::Uct, StrategyKind::FailureRate, StrategyKind::Frequency}) {
        InstancePool pool = base;
        SimulatedCompiler compiler(cfg.environment);
        std::uint64_t calls = 0;
        Executor exec = [&](const Instance& inst) { return compiler.compile(inst, calls++); };
        SelectionStrategy strategy{kind, cfg.uct_c};
        auto rep = replay(pool, strategy, exec, rounds, derive(cfg.rng_seed, kReplayStream, 0x5EED));
        StrategyRun run{kind, rep.coverage_curve, rep.coverage_attempt, base.size(), perfect, {}};
        for (std::size_t i = 0; i < rep.rounds.size() && i < 10; ++i) run.first_picks.push_back(rep.rounds[i].entry_id);
        // A strategy that ran dry keeps its final coverage.
        if (!run.coverage_curve.empty())
            run.coverage_curve.resize(rounds, run.coverage_curve.back());
        else
            run.coverage_curve.assign(rounds, 0);
        result.runs.push_back(std::move(run));
    }

    auto& rep = result.report;
    rep.columns = {"attempt", "uct", "failure_rate", "frequency"};
    for (std::size_t a = 0; a < rounds; ++a) {
        std::vector<std::string> row{std::to_string(a + 1)};
        for (const auto& r : result.runs) row.push_back(format_real(double(r.coverage_curve[a]) / double(r.pool_entries)));
        rep.rows.push_back(std::move(row));
    }
    json attempts = json::object();
    for (const auto& r : result.runs)
        attempts[to_string(r.kind)] = r.coverage_attempt ? json(*r.coverage_attempt) : json(nullptr);
    rep.metadata = {{"experiment", "strategies"},
                    {"entries", base.size()},
                    {"perfect_entries", perfect},
                    {"min_frequency", spec.min_frequency},
                    {"max_frequency", spec.max_frequency},
                    {"rounds", rounds},
                    {"coverage_attempt", attempts},
                    {"config", cfg.snapshot()}};
    return result;
}

Campaign run_campaign(const RunConfig& cfg, double noise_fraction, std::size_t executions,
                      std::size_t replay_rounds) {
    if (noise_fraction < 0.0 || noise_fraction > 1.0)
        throw Error(Errc::InvalidArgument, "noise_fraction must lie in [0, 1]");
    std::mt19937_64 rng(derive(cfg.rng_seed, kCampaignStream));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    MockBackend mock;
    if (const auto* m = std::get_if<MockBackend>(&cfg.generator.backend)) mock = *m;
    mock.seed_instances = cfg.seed_instances();
    mock.guide.reset();
    mock.rng_seed = derive(cfg.rng_seed, kCampaignStream, 1);
    auto mutated = mock_generate(mock, cfg.generator.temperature, std::max<std::size_t>(executions, 1));

    SimulatedCompiler compiler(cfg.environment);
    Campaign c;
    for (std::size_t i = 0; i < executions; ++i) {
        bool noisy = unit(rng) < noise_fraction;
        std::optional<Instance> inst;
        if (!noisy) {
            auto t = sample_trace(cfg.environment.hidden_model, rng);
            if (!t.empty()) inst = from_trace(t);
        }
        if (inst) {
            ++c.conforming_draws;
        } else {
            inst = mutated[i];
            ++c.mutated_draws;
        }
        c.pool.record(*inst, compiler.compile(*inst, i));
    }
    if (replay_rounds > 0 && !c.pool.empty()) {
        std::uint64_t calls = executions;
        Executor exec = [&](const Instance& inst) { return compiler.compile(inst, calls++); };
        replay(c.pool, SelectionStrategy::uct(cfg.uct_c), exec, replay_rounds, derive(cfg.rng_seed, kReplayStream, 0xCA));
    }
    return c;
}

FilteringResult experiment_filtering(const RunConfig& cfg, double noise_fraction) {
    auto campaign = run_campaign(cfg, noise_fraction, cfg.experiments.campaign_executions,
                                 cfg.experiments.campaign_replay_rounds);
    const auto& pool = campaign.pool;

    FilteringResult result;
    result.sr_histogram.assign(10, 0);
    for (const auto& e : pool.entries()) {
        auto decile = static_cast<std::size_t>(std::floor(success_rate(e) * 10.0));
        ++result.sr_histogram[std::min<std::size_t>(decile, 9)];
    }
    result.pool_entries = pool.size();
    auto survivors = filter_by_sr(pool, cfg.filter_threshold);
    result.survivors = survivors.size();
    if (auto all = mine_pool(pool.entries())) {
        result.unfiltered = count_elements(all->model);
        result.unfiltered_tree = all->tree;
    }
    if (auto kept = mine_pool(survivors)) {
        result.filtered = count_elements(kept->model);
        result.filtered_tree = kept->tree;
    }

    auto& rep = result.report;
    rep.columns = {"section", "label", "value"};
    for (std::size_t d = 0; d < 10; ++d) {
        std::string label = format_real(d / 10.0).substr(0, 3) + "-" + format_real((d + 1) / 10.0).substr(0, 3);
        rep.rows.push_back({"sr_histogram", label, std::to_string(result.sr_histogram[d])});
    }
    for (auto [name, counts] : {std::pair{"unfiltered", result.unfiltered}, std::pair{"filtered", result.filtered}}) {
        rep.rows.push_back({name, "tasks", std::to_string(counts.tasks)});
        rep.rows.push_back({name, "exclusive_gateways", std::to_string(counts.exclusive_gateways)});
        rep.rows.push_back({name, "parallel_gateways", std::to_string(counts.parallel_gateways)});
        rep.rows.push_back({name, "gateways", std::to_string(counts.gateways())});
    }
    rep.rows.push_back({"pool", "entries", std::to_string(result.pool_entries)});
    rep.rows.push_back({"pool", "survivors", std::to_string(result.survivors)});
    rep.metadata = {{"experiment", "filtering"},
                    {"noise_fraction", noise_fraction},
                    {"executions", cfg.experiments.campaign_executions},
                    {"replay_rounds", cfg.experiments.campaign_replay_rounds},
                    {"conforming_draws", campaign.conforming_draws},
                    {"mutated_draws", campaign.mutated_draws},
                    {"threshold", cfg.filter_threshold},
                    {"unfiltered_tree", result.unfiltered_tree ? result.unfiltered_tree->to_string() : ""},
                    {"filtered_tree", result.filtered_tree ? result.filtered_tree->to_string() : ""},
                    {"config", cfg.snapshot()}};
    return result;
}

EnhancementResult experiment_enhancement(const RunConfig& cfg, std::size_t tasks_per_arm) {
    if (tasks_per_arm == 0) throw Error(Errc::InvalidArgument, "tasks_per_arm must be positive");
    auto campaign = run_campaign(cfg, cfg.experiments.noise_fraction, cfg.experiments.campaign_executions,
                                 cfg.experiments.campaign_replay_rounds);
    const auto& raw = campaign.pool;
    auto survivors = filter_by_sr(raw, cfg.filter_threshold);
    auto mined = mine_pool(survivors);

    MockBackend mock;
    if (const auto* m = std::get_if<MockBackend>(&cfg.generator.backend)) mock = *m;
    SimulatedCompiler compiler(cfg.environment);
    const std::size_t k = cfg.loop.experiential_count;
    const std::size_t per_task = cfg.experiments.instances_per_task;

    EnhancementResult result;
    if (mined) result.description = mined->description;
    std::uint64_t task_index = 0;
    for (const auto& category : task_categories()) {
        EnhancementRow row{category};
        std::size_t used = 0;
        for (const auto& task : cfg.tasks) {
            if (task.category != category || used == tasks_per_arm) continue;
            ++used;
            ++task_index;
            // Baseline seeds: uniform draws from the raw pool.
            std::mt19937_64 draw(derive(cfg.rng_seed, kSeedDrawStream, task_index));
            std::vector<Instance> baseline_seeds;
            std::uniform_int_distribution<std::size_t> pick(0, raw.size() - 1);
            for (std::size_t s = 0; s < k; ++s) baseline_seeds.push_back(raw.entries()[pick(draw)].instance);
            std::vector<Instance> enhanced_seeds =
                mined ? top_distinct(survivors, k) : baseline_seeds;

            for (int arm = 0; arm < 2; ++arm) {
                MockBackend m = mock;
                m.rng_seed = derive(cfg.rng_seed, kMockStream, task_index);
                m.seed_instances = arm == 0 ? baseline_seeds : enhanced_seeds;
                m.guide = arm == 1 && mined ? std::optional<ProcessTree>(mined->tree) : std::nullopt;
                // Keep the prompt path exercised for both arms.
                PromptSpec spec{task.prompt, cfg.vocabulary, {}, {}, arm == 1 && mined ? result.description : std::nullopt};
                for (const auto& s : m.seed_instances)
                    if (std::find(spec.experiential_instances.begin(), spec.experiential_instances.end(), s) ==
                        spec.experiential_instances.end())
                        spec.experiential_instances.push_back(s);
                (void)build_prompt(spec);

                auto batch = mock_generate(m, cfg.generator.temperature, per_task);
                auto& stats = arm == 0 ? row.baseline : row.enhanced;
                for (std::size_t j = 0; j < batch.size(); ++j) {
                    // Both arms share call numbers.
                    bool ok = compiler.compile(batch[j], task_index * 100000 + j);
                    ++stats.executions;
                    stats.successes += ok ? 1 : 0;
                }
            }
        }
        result.baseline_total.executions += row.baseline.executions;
        result.baseline_total.successes += row.baseline.successes;
        result.enhanced_total.executions += row.enhanced.executions;
        result.enhanced_total.successes += row.enhanced.successes;
        result.rows.push_back(row);
    }

    auto& rep = result.report;
    rep.columns = {"category", "baseline_executions", "baseline_success_rate", "enhanced_executions",
                   "enhanced_success_rate"};
    auto add = [&](const std::string& label, const ArmStats& b, const ArmStats& e) {
        rep.rows.push_back({label, std::to_string(b.executions), format_real(b.rate()), std::to_string(e.executions),
                            format_real(e.rate())});
    };
    for (const auto& r : result.rows) add(r.category, r.baseline, r.enhanced);
    add("all", result.baseline_total, result.enhanced_total);
    rep.metadata = {{"experiment", "enhancement"},
                    {"tasks_per_arm", tasks_per_arm},
                    {"instances_per_task", per_task},
                    {"raw_pool_entries", raw.size()},
                    {"survivors", survivors.size()},
                    {"guide", mined ? mined->tree.to_string() : ""},
                    {"description", mined ? mined->description.text : ""},
                    {"config", cfg.snapshot()}};
    return result;
}

}  // namespace procloop
