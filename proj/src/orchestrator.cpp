#include "procloop/orchestrator.hpp"

#include "procloop/error.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

namespace procloop {

std::string to_string(Role role) {
    switch (role) {
        case Role::CEO: return "CEO";
        case Role::CPO: return "CPO";
        case Role::CTO: return "CTO";
        case Role::Programmer: return "Programmer";
        case Role::Reviewer: return "Reviewer";
        case Role::Designer: return "Designer";
        case Role::Tester: return "Tester";
    }
    return "?";
}

const std::vector<Role>& all_roles() {
    static const std::vector<Role> roles{Role::CEO,      Role::CPO,      Role::CTO,   Role::Programmer,
                                         Role::Reviewer, Role::Designer, Role::Tester};
    return roles;
}

const RoleMap& RoleMap::standard() {
    static const RoleMap map = [] {
        RoleMap m;
        for (auto p : {"DemandAnalysis", "LanguageChoose", "DesignReview"}) m.assign(p, {Role::CEO, Role::CTO});
        for (auto p : {"Coding", "CodeComplete", "Annotation", "CodeConclusion"})
            m.assign(p, {Role::CTO, Role::Programmer});
        for (auto p : {"CodeReviewComment", "CommentJudgement", "CodeReviewModification"})
            m.assign(p, {Role::Programmer, Role::Reviewer});
        for (auto p : {"TestErrorSummary", "TestModification"}) m.assign(p, {Role::Programmer, Role::Tester});
        for (auto p : {"EnvironmentDoc", "Manual"}) m.assign(p, {Role::CEO, Role::CPO});
        return m;
    }();
    return map;
}

RolePair RoleMap::lookup(const Phase& phase) const {
    auto it = map_.find(phase.name());
    return it == map_.end() ? RolePair{Role::CEO, Role::Programmer} : it->second;
}

std::optional<std::string> extract_solution(std::string_view u) {
    constexpr std::string_view open = "<SOLUTION>", close = "</SOLUTION>";
    auto b = u.find_first_not_of(" \t\r\n");
    auto e = u.find_last_not_of(" \t\r\n");
    if (b == std::string_view::npos) return std::nullopt;
    u = u.substr(b, e - b + 1);
    if (u.size() < open.size() + close.size() || !u.starts_with(open) || !u.ends_with(close)) return std::nullopt;
    auto body = u.substr(open.size(), u.size() - open.size() - close.size());
    if (body.find(open) != std::string_view::npos || body.find(close) != std::string_view::npos) return std::nullopt;
    return std::string(body);
}

std::string memory_stream(const std::vector<ChatRecord>& context) {
    std::ostringstream out;
    for (const auto& rec : context) {
        out << "[" << rec.phase.name() << "]\n";
        for (const auto& t : rec.turns) out << to_string(t.role) << ": " << t.utterance << '\n';
    }
    return out.str();
}

namespace {

std::string system_prompt(const Phase& phase, Role speaker, RolePair roles, const std::string& memory) {
    std::ostringstream out;
    out << "You are the " << to_string(speaker) << ". The " << to_string(roles.instructor)
        << " instructs and the " << to_string(roles.assistant) << " assists.\n"
        << "Current phase: " << phase.name() << ".\n"
        << "When the phase is complete, the " << to_string(roles.assistant)
        << " replies with exactly <SOLUTION> ... </SOLUTION>.\n";
    if (!memory.empty()) out << "Earlier phases:\n" << memory;
    return out.str();
}

}  // namespace

ChatRecord run_chat(const Phase& phase, RolePair roles, const std::vector<ChatRecord>& context,
                    const ChatBackend& backend, const ChatSettings& settings) {
    ChatRecord rec{phase, {}, false, false};
    const auto memory = memory_stream(context);
    for (int turn = 0; turn < settings.turn_limit; ++turn) {
        bool assistant = turn % 2 == 1;
        Role speaker = assistant ? roles.assistant : roles.instructor;
        auto reply = backend(system_prompt(phase, speaker, roles, memory), rec.turns);
        rec.turns.push_back({speaker, reply});
        if (assistant && extract_solution(reply)) {
            rec.consensus = true;
            return rec;
        }
    }
    for (int r = 0; r < settings.max_reflections; ++r) {
        auto prompt = system_prompt(phase, roles.assistant, roles, memory) + std::string(kReflectionMarker) +
                      " and state the agreed result as <SOLUTION> ... </SOLUTION>.\n";
        auto reply = backend(prompt, rec.turns);
        rec.turns.push_back({roles.assistant, reply});
        if (extract_solution(reply)) {
            rec.consensus = true;
            rec.reflected = true;
            return rec;
        }
    }
    throw Error(Errc::NoConsensus, "no terminal message in phase " + phase.name());
}

ChatBackend make_llm_chat_backend(LlmBackend cfg, double temperature) {
    return [cfg = std::move(cfg), temperature](const std::string& system, const std::vector<ChatTurn>& history) {
        std::vector<ChatMessage> msgs{{"system", system}};
        for (const auto& t : history) msgs.push_back({"user", to_string(t.role) + ": " + t.utterance});
        if (history.empty()) msgs.push_back({"user", "Begin the phase."});
        return llm_complete(cfg, msgs, temperature);
    };
}

ProcessTree default_hidden_model() {
    std::vector<ProcessTree> steps;
    for (const auto& e : PhaseVocabulary::standard().entries()) {
        auto leaf = ProcessTree::leaf(e.name);
        if (e.name == "Annotation" || e.name == "CodeReviewModification" || e.name == "TestModification")
            steps.push_back(ProcessTree::exclusive({ProcessTree::tau(), std::move(leaf)}));
        else
            steps.push_back(std::move(leaf));
    }
    return ProcessTree::sequence(std::move(steps));
}

void SimulatedEnvironment::validate() const {
    if (!(0.0 <= p_false && p_false < p_true && p_true <= 1.0))
        throw Error(Errc::InvalidArgument, "simulation needs 0 <= p_false < p_true <= 1");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double draw(std::uint64_t seed, std::uint64_t index) {
    auto bits = splitmix64(seed ^ splitmix64(index));
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

bool outcome(const SimulatedEnvironment& env, bool conforming, std::uint64_t call_index) {
    return draw(env.rng_seed, call_index) < (conforming ? env.p_true : env.p_false);
}

}  // namespace

bool simulated_compile(const SimulatedEnvironment& env, const Instance& inst, std::uint64_t call_index) {
    return outcome(env, accepts(env.hidden_model, inst.names()), call_index);
}

SimulatedCompiler::SimulatedCompiler(SimulatedEnvironment env) : env_(std::move(env)) { env_.validate(); }

bool SimulatedCompiler::conforms(const Instance& inst) {
    {
        std::lock_guard lock(mu_);
        if (auto it = cache_.find(inst); it != cache_.end()) return it->second;
    }
    bool ok = accepts(env_.hidden_model, inst.names());
    std::lock_guard lock(mu_);
    cache_.emplace(inst, ok);
    return ok;
}

bool SimulatedCompiler::compile(const Instance& inst, std::uint64_t call_index) {
    return outcome(env_, conforms(inst), call_index);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ExecutionResult execute_simulated(SimulatedCompiler& compiler, const Instance& inst, std::uint64_t call_index) {
    auto t0 = std::chrono::steady_clock::now();
    ExecutionResult r{inst};
    r.success = compiler.compile(inst, call_index);
    r.duration_seconds = seconds_since(t0);
    return r;
}

ExecutionResult execute_chat_chain(const ChatChainSettings& settings, const Instance& inst) {
    if (!settings.backend) throw Error(Errc::InvalidArgument, "chat chain needs a backend");
    if (settings.compile_cmd.empty()) throw Error(Errc::InvalidArgument, "empty compile command");
    auto t0 = std::chrono::steady_clock::now();
    ExecutionResult r{inst};
    TempDir workspace("procloop-ws");
    const auto artifact = workspace.path() / settings.artifact_name;

    for (const auto& phase : inst.phases()) {
        try {
            r.per_phase.push_back(
                run_chat(phase, settings.roles.lookup(phase), r.per_phase, settings.backend, settings.chat));
        } catch (const Error& e) {
            if (e.code() != Errc::NoConsensus) throw;
            r.success = false;
            r.notes = e.what();
            r.duration_seconds = seconds_since(t0);
            return r;
        }
        if (phase.name() == "Coding" || phase.name() == "CodeComplete") {
            auto code = extract_solution(r.per_phase.back().turns.back().utterance).value_or("");
            std::ofstream(artifact, std::ios::binary | std::ios::trunc) << code;
        }
    }
    if (!std::filesystem::exists(artifact)) std::ofstream(artifact, std::ios::binary).flush();

    std::vector<std::string> argv;
    for (auto arg : settings.compile_cmd) {
        for (auto pos = arg.find("{artifact}"); pos != std::string::npos; pos = arg.find("{artifact}"))
            arg.replace(pos, 10, settings.artifact_name);
        argv.push_back(std::move(arg));
    }
    int status = run_command(argv, workspace.path(), workspace.path() / "compile.log");
    r.success = status == 0;
    if (!r.success) r.notes = "compile exit status " + std::to_string(status);
    r.duration_seconds = seconds_since(t0);
    return r;
}

int run_command(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                const std::filesystem::path& log_path) {
    if (argv.empty()) throw Error(Errc::SpawnFailed, "empty command");
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    const auto cwd_s = cwd.string(), log_s = log_path.string();

    int fds[2];
    if (pipe2(fds, O_CLOEXEC) != 0) throw Error(Errc::SpawnFailed, std::string("pipe: ") + std::strerror(errno));
    pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        throw Error(Errc::SpawnFailed, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        close(fds[0]);
        int err = 0;
        if (chdir(cwd_s.c_str()) != 0) {
            err = errno;
        } else {
            int log = open(log_s.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
            if (log >= 0) {
                dup2(log, STDOUT_FILENO);
                dup2(log, STDERR_FILENO);
                close(log);
            }
            execvp(args[0], args.data());
            err = errno;
        }
        [[maybe_unused]] auto n = write(fds[1], &err, sizeof err);
        _exit(127);
    }
    close(fds[1]);
    int child_err = 0;
    ssize_t n;
    do {
        n = read(fds[0], &child_err, sizeof child_err);
    } while (n < 0 && errno == EINTR);
    close(fds[0]);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (n == static_cast<ssize_t>(sizeof child_err))
        throw Error(Errc::SpawnFailed, "cannot run " + argv[0] + ": " + std::strerror(child_err));
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

TempDir::TempDir(std::string_view prefix) {
    auto templ = (std::filesystem::temp_directory_path() / (std::string(prefix) + "-XXXXXX")).string();
    if (mkdtemp(templ.data()) == nullptr)
        throw Error(Errc::IoError, std::string("mkdtemp: ") + std::strerror(errno));
    path_ = templ;
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace procloop
