#pragma once
// Phase-by-phase execution of an instance, either against a simulated
// compiler (a hidden ground-truth model plus outcome noise) or through a
// two-agent chat chain over a pluggable backend.

#include "procloop/generation.hpp"
#include "procloop/instance.hpp"
#include "procloop/process_tree.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace procloop {

enum class Role { CEO, CPO, CTO, Programmer, Reviewer, Designer, Tester };

std::string to_string(Role role);
const std::vector<Role>& all_roles();

struct RolePair {
    Role instructor;
    Role assistant;
    friend bool operator==(const RolePair&, const RolePair&) = default;
};

class RoleMap {
public:
    RoleMap() = default;
    // Design phases go to (CEO, CTO), construction to (CTO, Programmer),
    // review to (Programmer, Reviewer), tests to (Programmer, Tester) and
    // documentation to (CEO, CPO).
    static const RoleMap& standard();

    void assign(std::string phase, RolePair roles) { map_[std::move(phase)] = roles; }
    // Unknown phases fall back to (CEO, Programmer).
    RolePair lookup(const Phase& phase) const;
    const std::map<std::string, RolePair>& entries() const noexcept { return map_; }

private:
    std::map<std::string, RolePair> map_;
};

struct ChatTurn {
    Role role;
    std::string utterance;
};

struct ChatRecord {
    Phase phase;
    std::vector<ChatTurn> turns;
    bool consensus = false;
    bool reflected = false;
};

// Body of a terminal message `<SOLUTION> ... </SOLUTION>` (surrounding
// whitespace allowed), nullopt otherwise.
std::optional<std::string> extract_solution(std::string_view utterance);

// (system prompt, dialogue so far) -> next utterance of the speaking role.
using ChatBackend = std::function<std::string(const std::string& system_prompt, const std::vector<ChatTurn>& history)>;

// Present in the system prompt of every reflection call.
inline constexpr std::string_view kReflectionMarker = "Revisit the dialogue above";

struct ChatSettings {
    int turn_limit = 6;
    int max_reflections = 2;
};

// Serialized memory stream handed to later phases.
std::string memory_stream(const std::vector<ChatRecord>& context);

// Throws NoConsensus when neither the dialogue nor any reflection yields a
// terminal message; never makes more than turn_limit + max_reflections
// backend calls.
ChatRecord run_chat(const Phase& phase, RolePair roles, const std::vector<ChatRecord>& context,
                    const ChatBackend& backend, const ChatSettings& settings = {});

ChatBackend make_llm_chat_backend(LlmBackend cfg, double temperature);

// Sequence over the 14 standard phases with Annotation,
// CodeReviewModification and TestModification optional.
ProcessTree default_hidden_model();

struct SimulatedEnvironment {
    ProcessTree hidden_model = default_hidden_model();
    double p_true = 0.9;
    double p_false = 0.1;
    std::uint64_t rng_seed = 0;

    // Throws InvalidArgument unless 0 <= p_false < p_true <= 1.
    void validate() const;
};

// Pure in (env, inst, call_index).
bool simulated_compile(const SimulatedEnvironment& env, const Instance& inst, std::uint64_t call_index);

// Thread-safe wrapper that memoizes conformance and numbers calls.
class SimulatedCompiler {
public:
    explicit SimulatedCompiler(SimulatedEnvironment env);
    const SimulatedEnvironment& environment() const noexcept { return env_; }
    bool conforms(const Instance& inst);
    bool compile(const Instance& inst, std::uint64_t call_index);

private:
    SimulatedEnvironment env_;
    std::mutex mu_;
    std::unordered_map<Instance, bool> cache_;
};

struct ChatChainSettings {
    RoleMap roles = RoleMap::standard();
    ChatBackend backend;
    ChatSettings chat;
    // argv; "{artifact}" is replaced with artifact_name. Runs inside the
    // workspace directory.
    std::vector<std::string> compile_cmd{"python3", "-m", "py_compile", "{artifact}"};
    std::string artifact_name = "main.py";
};

struct ExecutionResult {
    Instance instance;
    bool success = false;
    std::vector<ChatRecord> per_phase;
    std::string notes;
    double duration_seconds = 0.0;
};

ExecutionResult execute_simulated(SimulatedCompiler& compiler, const Instance& inst, std::uint64_t call_index);
// Throws SpawnFailed when the compile command cannot be started.
ExecutionResult execute_chat_chain(const ChatChainSettings& settings, const Instance& inst);

// Runs argv in cwd with output appended to log_path; returns the exit
// status (128 + signal for signalled children). Throws SpawnFailed.
int run_command(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                const std::filesystem::path& log_path);

// Temporary directory removed on destruction.
class TempDir {
public:
    explicit TempDir(std::string_view prefix = "procloop");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace procloop
