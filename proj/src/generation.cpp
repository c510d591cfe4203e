#include "procloop/generation.hpp"

#include "procloop/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <random>
#include <set>
#include <sstream>

namespace procloop {

namespace {

constexpr std::string_view kStockFormat =
    "Reply with one instance per line. Write each instance as phase names from the Phase "
    "Explanations joined by the symbol \"\xE2\x86\x92\", for example: DemandAnalysis \xE2\x86\x92 Coding \xE2\x86\x92 Manual.";

std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

bool has_arrow(std::string_view line) {
    return line.find("->") != std::string_view::npos || line.find("\xE2\x86\x92") != std::string_view::npos;
}

std::string_view strip_list_marker(std::string_view line) {
    if (line.size() >= 2 && (line[0] == '-' || line[0] == '*') && line[1] == ' ') return trim(line.substr(2));
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i + 1 < line.size() && (line[i] == '.' || line[i] == ')') && line[i + 1] == ' ')
        return trim(line.substr(i + 2));
    return line;
}

}  // namespace

std::string build_prompt(const PromptSpec& spec) {
    std::set<Instance> seen;
    for (const auto& inst : spec.experiential_instances)
        if (!seen.insert(inst).second)
            throw Error(Errc::InvalidArgument, "duplicate experiential instance " + serialize_instance(inst));

    std::ostringstream out;
    out << "### User Task\n" << spec.user_task << "\n\n";
    out << "### Phase Explanations\n";
    for (const auto& e : spec.phase_explanations.entries()) out << e.name << ": " << e.explanation << '\n';
    out << "\n### Experiential Instances\n";
    for (const auto& inst : spec.experiential_instances) out << serialize_instance(inst) << '\n';
    if (spec.process_description) out << "\n### Process Description\n" << spec.process_description->text << '\n';
    out << "\n### Output Format\n"
        << (spec.output_format_note.empty() ? kStockFormat : std::string_view(spec.output_format_note)) << '\n';
    return out.str();
}

GenerationParse parse_generation_detailed(std::string_view raw) {
    GenerationParse result;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto nl = raw.find('\n', pos);
        auto line = trim(raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? raw.size() + 1 : nl + 1;
        if (!has_arrow(line)) continue;
        line = strip_list_marker(line);
        while (!line.empty() && (line.back() == '.' || line.back() == '`')) line.remove_suffix(1);
        while (!line.empty() && line.front() == '`') line.remove_prefix(1);
        try {
            result.instances.push_back(parse_instance(line));
        } catch (const Error&) {
            ++result.skipped;
        }
    }
    return result;
}

const std::vector<std::string>& default_hallucination_vocab() {
    static const std::vector<std::string> vocab{"UsernameSet", "ExternalReview", "Comments", "EmailSet",
                                                "EmploymentDoc"};
    return vocab;
}

void GeneratorConfig::validate() const {
    if (!(temperature >= kMinTemperature && temperature <= kMaxTemperature))
        throw Error(Errc::InvalidArgument, "temperature must lie in [0, 1.5]");
    if (auto* mock = std::get_if<MockBackend>(&backend); mock && mock->seed_instances.empty())
        throw Error(Errc::InvalidArgument, "mock generator needs at least one seed instance");
}

namespace {

using Names = std::vector<std::string>;

// Picks one admissible candidate by `pick`; no-op when none is admissible.
bool apply_choice(Names& cur, std::vector<Names>& candidates, const std::optional<ProcessTree>& guide,
                  std::uint64_t pick) {
    if (guide)
        std::erase_if(candidates, [&](const Names& c) { return !accepts(*guide, c); });
    if (candidates.empty()) return false;
    cur = std::move(candidates[pick % candidates.size()]);
    return true;
}

}  // namespace

std::vector<Instance> mock_generate(const MockBackend& cfg, double temperature, std::size_t count) {
    if (count == 0) throw Error(Errc::InvalidArgument, "count must be at least 1");
    if (cfg.seed_instances.empty()) throw Error(Errc::InvalidArgument, "mock generator needs seed instances");
    if (!(temperature >= kMinTemperature && temperature <= kMaxTemperature))
        throw Error(Errc::InvalidArgument, "temperature must lie in [0, 1.5]");

    std::mt19937_64 rng(cfg.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto prob = [&](double w) { return std::min(1.0, temperature / kMaxTemperature * w); };

    std::vector<Instance> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        // Every random draw happens regardless of temperature so that sweeps
        // share one stream of decisions.
        auto seed_idx = std::uniform_int_distribution<std::size_t>(0, cfg.seed_instances.size() - 1)(rng);
        double u_ins = unit(rng), u_swap = unit(rng), u_del = unit(rng);
        std::uint64_t c_ins = rng(), c_swap = rng(), c_del = rng();

        Names cur = cfg.seed_instances[seed_idx].names();
        if (u_ins < prob(cfg.weights.insert) && !cfg.hallucination_vocab.empty()) {
            std::vector<Names> cands;
            for (const auto& phase : cfg.hallucination_vocab)
                for (std::size_t at = 0; at <= cur.size(); ++at) {
                    Names c = cur;
                    c.insert(c.begin() + static_cast<std::ptrdiff_t>(at), phase);
                    cands.push_back(std::move(c));
                }
            apply_choice(cur, cands, cfg.guide, c_ins);
        }
        if (u_swap < prob(cfg.weights.swap) && cur.size() >= 2) {
            std::vector<Names> cands;
            for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
                if (cur[i] == cur[i + 1]) continue;
                Names c = cur;
                std::swap(c[i], c[i + 1]);
                cands.push_back(std::move(c));
            }
            apply_choice(cur, cands, cfg.guide, c_swap);
        }
        if (u_del < prob(cfg.weights.remove) && cur.size() >= 2) {
            std::vector<Names> cands;
            for (std::size_t i = 0; i < cur.size(); ++i) {
                Names c = cur;
                c.erase(c.begin() + static_cast<std::ptrdiff_t>(i));
                cands.push_back(std::move(c));
            }
            apply_choice(cur, cands, cfg.guide, c_del);
        }
        std::vector<Phase> phases;
        for (auto& n : cur) phases.emplace_back(std::move(n));
        out.emplace_back(std::move(phases));
    }
    return out;
}

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::InvalidArgument, "endpoint needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string llm_complete(const LlmBackend& cfg, const std::vector<ChatMessage>& messages, double temperature) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw Error(Errc::MissingApiKey, "environment variable " + cfg.api_key_env + " is not set");

    nlohmann::json body{{"model", cfg.model}, {"temperature", temperature}, {"messages", nlohmann::json::array()}};
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    const auto payload = body.dump();
    const auto ep = split_url(cfg.endpoint);

    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(cfg.timeout_seconds));
    httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

    for (int attempt = 0;; ++attempt) {
        bool last = attempt >= std::max(0, cfg.retries);
        httplib::Client cli(ep.origin);
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.set_write_timeout(timeout);
        auto started = std::chrono::steady_clock::now();
        auto res = cli.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            auto elapsed = std::chrono::steady_clock::now() - started;
            bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                             (res.error() == httplib::Error::Read && elapsed >= timeout * 9 / 10);
            if (!last) continue;
            if (timed_out) throw Error(Errc::Timeout, "request to " + cfg.endpoint + " timed out");
            throw Error(Errc::HttpError, "request to " + cfg.endpoint + " failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            if (!last && res->status >= 500) continue;
            throw Error(Errc::HttpError, "HTTP " + std::to_string(res->status) + " from " + cfg.endpoint);
        }
        try {
            auto doc = nlohmann::json::parse(res->body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::HttpError, std::string("malformed completion response: ") + e.what());
        }
    }
}

std::vector<Instance> llm_generate(const LlmBackend& cfg, const std::string& prompt, double temperature) {
    auto text = llm_complete(cfg, {{"user", prompt}}, temperature);
    auto parsed = parse_generation(text);
    if (parsed.empty()) throw Error(Errc::EmptyGeneration, "no instance in the model response");
    return parsed;
}

}  // namespace procloop
