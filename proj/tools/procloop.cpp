// procloop command-line front end.

#include "procloop/bpmn.hpp"
#include "procloop/describe.hpp"
#include "procloop/error.hpp"
#include "procloop/harness.hpp"
#include "procloop/mining.hpp"
#include "procloop/pool.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace procloop;

namespace {

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
};

RunConfig load_config(const GlobalOptions& g) {
    RunConfig cfg = g.config.empty() ? RunConfig{} : RunConfig::load(g.config);
    if (g.seed) cfg.set_seed(*g.seed);
    cfg.validate();
    return cfg;
}

fs::path out_dir(const GlobalOptions& g) {
    fs::path dir = g.out;
    fs::create_directories(dir);
    return dir;
}

std::string read_text(const std::string& path) {
    if (path == "-") {
        std::stringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text, bool append = false) {
    std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    out << text;
}

// One instance per non-blank line; '#' starts a comment line.
std::vector<Instance> read_instances(const std::string& text) {
    std::vector<Instance> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        out.push_back(parse_instance(line));
    }
    return out;
}

fs::path pool_file(const RunConfig& cfg, const std::string& flag, const GlobalOptions& g) {
    if (!flag.empty()) return flag;
    if (cfg.pool_path) return *cfg.pool_path;
    return out_dir(g) / "pool.csv";
}

InstancePool load_pool_or_empty(const fs::path& path) {
    return fs::exists(path) ? InstancePool::load(path) : InstancePool{};
}

void write_model(const MinedModel& mined, const fs::path& dir) {
    write_text(dir / "model.dot", export_dot(mined.model));
    write_text(dir / "model.bpmn", export_xml(mined.model));
    write_text(dir / "description.txt", mined.description.text + "\n");
    auto c = count_elements(mined.model);
    std::cout << "tree: " << mined.tree.to_string() << "\n"
              << "tasks: " << c.tasks << " exclusive: " << c.exclusive_gateways
              << " parallel: " << c.parallel_gateways << "\n"
              << mined.description.text << "\n";
}

void emit(const ExperimentReport& report, const fs::path& dir, const std::string& name) {
    report.write(dir, name);
    std::cout << report.to_csv();
}

Task pick_task(const RunConfig& cfg, const std::string& task, std::optional<std::size_t> index) {
    if (!task.empty()) return {"custom", task};
    std::size_t i = index.value_or(0);
    if (i >= cfg.tasks.size())
        throw Error(Errc::InvalidArgument, "task index " + std::to_string(i) + " out of range");
    return cfg.tasks[i];
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Process-guided instance generation loop"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Master seed (overrides the config)");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "Generate instances for one task");
    std::string gen_task;
    std::optional<std::size_t> gen_index;
    std::size_t gen_count = 5;
    std::optional<double> gen_temp;
    bool gen_prompt = false;
    gen->add_option("--task", gen_task, "Task text (overrides --task-index)");
    gen->add_option("--task-index", gen_index, "Index into the configured task list");
    gen->add_option("--count", gen_count, "Number of instances")->check(CLI::PositiveNumber);
    gen->add_option("--temperature", gen_temp, "Sampling temperature")->check(CLI::Range(0.0, 1.5));
    gen->add_flag("--print-prompt", gen_prompt, "Print the assembled prompt first");

    // run
    auto* run = app.add_subcommand("run", "Execute instances and record them in the pool");
    std::vector<std::string> run_instances;
    std::string run_input, run_pool;
    run->add_option("--instance", run_instances, "Instance text such as 'A -> B'");
    run->add_option("--input", run_input, "File with one instance per line ('-' for stdin)");
    run->add_option("--pool", run_pool, "Pool CSV to update");

    // replay
    auto* rep = app.add_subcommand("replay", "Re-execute pool entries chosen by a selection strategy");
    std::string rep_pool, rep_strategy = "uct";
    std::optional<std::size_t> rep_rounds;
    rep->add_option("--pool", rep_pool, "Pool CSV to update");
    rep->add_option("--strategy", rep_strategy, "uct, failure_rate or frequency")->capture_default_str();
    rep->add_option("--rounds", rep_rounds, "Replay rounds (default from config)")->check(CLI::PositiveNumber);

    // filter
    auto* fil = app.add_subcommand("filter", "Print pool entries at or above the success-rate threshold");
    std::string fil_pool;
    std::optional<double> fil_threshold;
    fil->add_option("--pool", fil_pool, "Pool CSV");
    fil->add_option("--threshold", fil_threshold, "Success-rate threshold")->check(CLI::Range(0.0, 1.0));

    // mine
    auto* mine = app.add_subcommand("mine", "Mine a model from a pool or an event log");
    std::string mine_pool_path, mine_log;
    std::optional<double> mine_threshold;
    bool mine_all = false;
    mine->add_option("--pool", mine_pool_path, "Pool CSV (filtered before mining)");
    mine->add_option("--log", mine_log, "Event log file, one trace per line");
    mine->add_option("--threshold", mine_threshold, "Success-rate threshold")->check(CLI::Range(0.0, 1.0));
    mine->add_flag("--unfiltered", mine_all, "Mine every pool entry");

    // describe
    auto* desc = app.add_subcommand("describe", "Describe a BPMN-XML model in text");
    std::string desc_file;
    desc->add_option("model", desc_file, "BPMN-XML file ('-' for stdin)")->required();

    // loop
    auto* lp = app.add_subcommand("loop", "Run the closed generate-execute-filter-mine loop");
    std::optional<std::size_t> lp_iterations;
    lp->add_option("--iterations", lp_iterations, "Iterations (default from config)")->check(CLI::PositiveNumber);

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run one of the experiments");
    exp->require_subcommand(1);
    auto* ex_temp = exp->add_subcommand("temperature", "Success rate and diversity per temperature");
    auto* ex_strat = exp->add_subcommand("strategies", "Replay coverage per selection strategy");
    auto* ex_filter = exp->add_subcommand("filtering", "Model complexity with and without filtering");
    auto* ex_enh = exp->add_subcommand("enhancement", "Baseline against process-guided generation");
    std::optional<double> ex_noise;
    ex_filter->add_option("--noise", ex_noise, "Share of mutated executions")->check(CLI::Range(0.0, 1.0));

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = load_config(g);

        if (*gen) {
            if (gen_temp) cfg.generator.temperature = *gen_temp;
            auto batch = generate_batch(cfg, pick_task(cfg, gen_task, gen_index), gen_count);
            if (gen_prompt) std::cout << batch.prompt << "\n\n";
            for (const auto& inst : batch.instances) std::cout << serialize_instance(inst) << "\n";
            if (batch.instances.empty()) {
                std::cerr << "no instances generated\n";
                return 1;
            }
        } else if (*run) {
            auto insts = run_input.empty() ? std::vector<Instance>{} : read_instances(read_text(run_input));
            for (const auto& s : run_instances) insts.push_back(parse_instance(s));
            if (insts.empty()) throw Error(Errc::InvalidArgument, "no instances given (use --instance or --input)");
            auto path = pool_file(cfg, run_pool, g);
            auto pool = load_pool_or_empty(path);
            ExecutionEngine engine(cfg);
            std::vector<RunLogRecord> log;
            for (const auto& inst : insts) {
                auto r = engine.execute(inst);
                pool.record(inst, r.success);
                log.push_back({inst, "generated", r.success, r.duration_seconds, 0});
                std::cout << (r.success ? "ok   " : "fail ") << serialize_instance(inst) << "\n";
                if (!r.notes.empty()) std::cout << "     " << r.notes << "\n";
            }
            pool.save(path);
            write_text(out_dir(g) / "run_log.jsonl", to_jsonl(log), true);
        } else if (*rep) {
            auto path = pool_file(cfg, rep_pool, g);
            auto pool = InstancePool::load(path);
            auto kind = parse_strategy(rep_strategy);
            SelectionStrategy strategy{kind, cfg.uct_c};
            ExecutionEngine engine(cfg);
            std::vector<RunLogRecord> log;
            Executor exec = [&](const Instance& inst) {
                auto r = engine.execute(inst);
                log.push_back({inst, "replay", r.success, r.duration_seconds, 0});
                return r.success;
            };
            auto report = replay(pool, strategy, exec, rep_rounds.value_or(cfg.replay_rounds), cfg.rng_seed);
            for (const auto& r : report.rounds)
                std::cout << r.entry_id << (r.success ? " ok" : " fail")
                          << (r.executor_error.empty() ? "" : " " + r.executor_error) << "\n";
            std::cout << "covered " << (report.coverage_curve.empty() ? 0 : report.coverage_curve.back()) << " of "
                      << pool.size() << " entries\n";
            pool.save(path);
            write_text(out_dir(g) / "run_log.jsonl", to_jsonl(log), true);
        } else if (*fil) {
            auto pool = InstancePool::load(pool_file(cfg, fil_pool, g));
            InstancePool kept;
            for (const auto& e : filter_by_sr(pool, fil_threshold.value_or(cfg.filter_threshold)))
                kept.insert(e.instance, e.frequency, e.success_count, e.id);
            std::cout << kept.to_csv();
        } else if (*mine) {
            std::optional<MinedModel> mined;
            if (!mine_log.empty()) {
                auto log = EventLog::parse(read_text(mine_log));
                if (log.empty()) throw Error(Errc::EmptyLog, "event log has no traces");
                auto tree = mine_tree(log);
                auto model = tree_to_bpmn(tree);
                mined = MinedModel{{}, tree, model, describe(model)};
            } else {
                auto pool = InstancePool::load(pool_file(cfg, mine_pool_path, g));
                mined = mine_pool(mine_all ? pool.entries()
                                           : filter_by_sr(pool, mine_threshold.value_or(cfg.filter_threshold)));
                if (!mined) throw Error(Errc::EmptyLog, "no pool entry passes the filter");
            }
            write_model(*mined, out_dir(g));
        } else if (*desc) {
            auto model = parse_xml(read_text(desc_file));
            std::cout << describe(model).text << "\n";
        } else if (*lp) {
            auto result = run_loop(cfg, lp_iterations.value_or(cfg.loop.iterations));
            auto dir = out_dir(g);
            result.pool.save(cfg.pool_path.value_or(dir / "pool.csv"));
            write_text(dir / "run_log.jsonl", to_jsonl(result.log));
            write_text(dir / "last_prompt.txt", result.last_prompt + "\n");
            if (result.model) {
                write_text(dir / "model.dot", export_dot(*result.model));
                write_text(dir / "model.bpmn", export_xml(*result.model));
            }
            if (result.description) write_text(dir / "description.txt", result.description->text + "\n");
            emit(result.report, dir, "loop");
        } else if (*exp) {
            auto dir = out_dir(g);
            const auto& x = cfg.experiments;
            if (*ex_temp) {
                emit(experiment_temperature(cfg, x.temperatures, x.samples_per_temperature).report, dir,
                     "temperature");
            } else if (*ex_strat) {
                SyntheticPoolSpec spec{x.synthetic_entries, x.synthetic_min_frequency, x.synthetic_max_frequency};
                emit(experiment_strategies(cfg, spec, x.strategy_rounds).report, dir, "strategies");
            } else if (*ex_filter) {
                emit(experiment_filtering(cfg, ex_noise.value_or(x.noise_fraction)).report, dir, "filtering");
            } else if (*ex_enh) {
                emit(experiment_enhancement(cfg, x.tasks_per_arm).report, dir, "enhancement");
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
