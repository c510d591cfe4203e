#pragma once
// Instance-generation prompts, output parsing and the two generator
// backends (a temperature-driven mutation mock and an HTTP chat-completion
// client).

#include "procloop/describe.hpp"
#include "procloop/instance.hpp"
#include "procloop/process_tree.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace procloop {

inline constexpr double kMinTemperature = 0.0;
inline constexpr double kMaxTemperature = 1.5;
inline constexpr double kDefaultTemperature = 0.6;
inline constexpr std::size_t kDefaultExperientialCount = 3;

struct PromptSpec {
    std::string user_task;
    PhaseVocabulary phase_explanations = PhaseVocabulary::standard();
    std::vector<Instance> experiential_instances;
    std::string output_format_note;  // empty selects the stock instruction
    std::optional<ProcessDescription> process_description;
};

// Throws InvalidArgument when experiential instances repeat.
std::string build_prompt(const PromptSpec& spec);

struct GenerationParse {
    std::vector<Instance> instances;
    std::size_t skipped = 0;  // arrow lines that did not parse
};

// Keeps lines that contain an arrow token; list markers such as "1. " or
// "- " and a trailing period are stripped first. Never throws.
GenerationParse parse_generation_detailed(std::string_view raw);
inline std::vector<Instance> parse_generation(std::string_view raw) {
    return parse_generation_detailed(raw).instances;
}

const std::vector<std::string>& default_hallucination_vocab();

struct MutationWeights {
    double insert = 1.0;
    double swap = 1.0;
    double remove = 1.0;
};

struct MockBackend {
    std::vector<Instance> seed_instances;
    std::vector<std::string> hallucination_vocab = default_hallucination_vocab();
    std::uint64_t rng_seed = 0;
    MutationWeights weights;
    // When set, only edits that keep the instance inside this model's
    // language are applied.
    std::optional<ProcessTree> guide;
};

struct LlmBackend {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_seconds = 60.0;
    int retries = 1;
};

struct GeneratorConfig {
    std::variant<MockBackend, LlmBackend> backend;
    double temperature = kDefaultTemperature;

    // Throws InvalidArgument (temperature range, empty mock seeds).
    void validate() const;
};

// Deterministic in (cfg.rng_seed, temperature, count). Throws
// InvalidArgument for count == 0 or no seeds.
std::vector<Instance> mock_generate(const MockBackend& cfg, double temperature, std::size_t count);

struct ChatMessage {
    std::string role;  // system, user or assistant
    std::string content;
};

// One chat-completion round trip; returns choices[0].message.content.
// Throws MissingApiKey (before any network traffic), Timeout, HttpError.
std::string llm_complete(const LlmBackend& cfg, const std::vector<ChatMessage>& messages, double temperature);

// Throws as llm_complete, plus EmptyGeneration when nothing parses.
std::vector<Instance> llm_generate(const LlmBackend& cfg, const std::string& prompt, double temperature);

}  // namespace procloop
