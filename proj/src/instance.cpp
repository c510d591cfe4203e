#include "procloop/instance.hpp"

#include "procloop/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace procloop {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::EmptySegment: return "EmptySegment";
        case Errc::NoPhases: return "NoPhases";
        case Errc::InvalidPhase: return "InvalidPhase";
        case Errc::ZeroFrequency: return "ZeroFrequency";
        case Errc::NonPositiveTotal: return "NonPositiveTotal";
        case Errc::EmptyPool: return "EmptyPool";
        case Errc::NoEligibleEntry: return "NoEligibleEntry";
        case Errc::EmptyTrace: return "EmptyTrace";
        case Errc::InvalidCut: return "InvalidCut";
        case Errc::EmptyLog: return "EmptyLog";
        case Errc::DepthExceeded: return "DepthExceeded";
        case Errc::UnstructuredModel: return "UnstructuredModel";
        case Errc::Timeout: return "Timeout";
        case Errc::HttpError: return "HttpError";
        case Errc::MissingApiKey: return "MissingApiKey";
        case Errc::EmptyGeneration: return "EmptyGeneration";
        case Errc::NoConsensus: return "NoConsensus";
        case Errc::SpawnFailed: return "SpawnFailed";
        case Errc::ParseError: return "ParseError";
        case Errc::IoError: return "IoError";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

namespace {

constexpr std::string_view kUnicodeArrow = "\xE2\x86\x92";
constexpr std::string_view kAsciiArrow = "->";

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

}  // namespace

Phase::Phase(std::string name) : name_(std::move(name)) {
    if (name_.empty()) throw Error(Errc::InvalidPhase, "empty phase name");
    for (char c : name_) {
        if (is_space(c) || c == ',')
            throw Error(Errc::InvalidPhase, "illegal character in phase '" + name_ + "'");
    }
    if (name_.find(kAsciiArrow) != std::string::npos ||
        name_.find(kUnicodeArrow) != std::string::npos)
        throw Error(Errc::InvalidPhase, "arrow token in phase '" + name_ + "'");
}

Instance::Instance(std::vector<Phase> phases) : phases_(std::move(phases)) {
    if (phases_.empty()) throw Error(Errc::NoPhases, "instance needs at least one phase");
}

Instance::Instance(std::initializer_list<std::string_view> names)
    : Instance([&] {
          std::vector<Phase> out;
          out.reserve(names.size());
          for (auto n : names) out.emplace_back(std::string(n));
          return out;
      }()) {}

std::vector<std::string> Instance::names() const {
    std::vector<std::string> out;
    out.reserve(phases_.size());
    for (const auto& p : phases_) out.push_back(p.name());
    return out;
}

Instance parse_instance(std::string_view text) {
    if (trim(text).empty()) throw Error(Errc::NoPhases, "no phases in '" + std::string(text) + "'");

    std::vector<Phase> phases;
    std::size_t pos = 0;
    while (true) {
        std::size_t a = text.find(kAsciiArrow, pos);
        std::size_t u = text.find(kUnicodeArrow, pos);
        std::size_t cut = std::min(a, u);
        std::size_t width = cut == a ? kAsciiArrow.size() : kUnicodeArrow.size();
        auto segment = trim(text.substr(pos, cut == std::string_view::npos ? text.npos : cut - pos));
        if (segment.empty())
            throw Error(Errc::EmptySegment, "empty phase between arrows in '" + std::string(text) + "'");
        phases.emplace_back(std::string(segment));
        if (cut == std::string_view::npos) break;
        pos = cut + width;
    }
    return Instance(std::move(phases));
}

std::string serialize_instance(const Instance& inst) {
    std::string out;
    for (std::size_t i = 0; i < inst.size(); ++i) {
        if (i) out += " -> ";
        out += inst[i].name();
    }
    return out;
}

PhaseVocabulary::PhaseVocabulary(std::vector<PhaseEntry> entries)
    : entries_(std::move(entries)), default_instance_([&] {
          std::vector<Phase> ph;
          std::set<std::string> seen;
          for (const auto& e : entries_) {
              if (!seen.insert(e.name).second)
                  throw Error(Errc::InvalidArgument, "duplicate vocabulary entry '" + e.name + "'");
              ph.emplace_back(e.name);
          }
          return Instance(std::move(ph));
      }()) {}

const PhaseVocabulary& PhaseVocabulary::standard() {
    static const PhaseVocabulary vocab({
        {"DemandAnalysis", "Agree with the customer on what kind of product to build and its modality."},
        {"LanguageChoose", "Pick the programming language and runtime libraries for the product."},
        {"DesignReview", "Review the planned architecture and module layout before any code is written."},
        {"Coding", "Write the first complete version of the source code from the design."},
        {"CodeComplete", "Fill in unimplemented functions and missing classes left after Coding."},
        {"Annotation", "Add comments and docstrings that explain the written code."},
        {"CodeConclusion", "Summarize the produced code files and their responsibilities."},
        {"CodeReviewComment", "Inspect the code and write review comments about defects."},
        {"CommentJudgement", "Decide which review comments are valid and must be addressed."},
        {"CodeReviewModification", "Change the code according to the accepted review comments."},
        {"TestErrorSummary", "Run the software, collect the errors and summarize their causes."},
        {"TestModification", "Fix the code so that the summarized test errors disappear."},
        {"EnvironmentDoc", "Document the dependencies needed to run the software."},
        {"Manual", "Write the user manual describing installation and usage."},
    });
    return vocab;
}

PhaseVocabulary PhaseVocabulary::from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("vocabulary json: ") + e.what());
    }
    if (!doc.is_array()) throw Error(Errc::ParseError, "vocabulary json must be an array");
    std::vector<PhaseEntry> entries;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("name") || !item["name"].is_string())
            throw Error(Errc::ParseError, "vocabulary entry needs a string 'name'");
        PhaseEntry e{item["name"].get<std::string>(), item.value("explanation", std::string{})};
        Phase check(e.name);
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw Error(Errc::ParseError, "vocabulary is empty");
    return PhaseVocabulary(std::move(entries));
}

PhaseVocabulary PhaseVocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

bool PhaseVocabulary::contains(std::string_view name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const PhaseEntry& e) { return e.name == name; });
}

bool PhaseVocabulary::contains(const Phase& phase) const { return contains(phase.name()); }

PhaseVocabulary PhaseVocabulary::extended(std::span<const PhaseEntry> extra) const {
    auto entries = entries_;
    for (const auto& e : extra)
        if (!contains(e.name)) entries.push_back(e);
    return PhaseVocabulary(std::move(entries));
}

std::vector<Phase> unknown_phases(const Instance& inst, const PhaseVocabulary& vocab) {
    std::vector<Phase> out;
    for (const auto& p : inst.phases()) {
        if (vocab.contains(p)) continue;
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
    return out;
}

namespace {

template <typename T>
double symmetric_change(const std::set<T>& reference, const std::set<T>& candidate) {
    std::size_t common = 0;
    for (const auto& x : candidate) common += reference.count(x);
    std::size_t uni = reference.size() + candidate.size() - common;
    if (uni == 0) return 0.0;
    std::size_t diff = (reference.size() - common) + (candidate.size() - common);
    return static_cast<double>(diff) / static_cast<double>(uni);
}

std::set<std::string> phase_set(const Instance& inst) {
    std::set<std::string> out;
    for (const auto& p : inst.phases()) out.insert(p.name());
    return out;
}

std::set<std::pair<std::string, std::string>> order_set(const Instance& inst) {
    std::set<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i + 1 < inst.size(); ++i) out.emplace(inst[i].name(), inst[i + 1].name());
    return out;
}

}  // namespace

double change_phases(const Instance& candidate, const Instance& reference) {
    return symmetric_change(phase_set(reference), phase_set(candidate));
}

// Length-1 instances have no pairs: both empty -> 0, one empty -> 1.
double change_orders(const Instance& candidate, const Instance& reference) {
    auto ref = order_set(reference);
    auto cand = order_set(candidate);
    if (ref.empty() && cand.empty()) return 0.0;
    if (ref.empty() || cand.empty()) return 1.0;
    return symmetric_change(ref, cand);
}

double diversity(const Instance& candidate, const Instance& reference) {
    return (change_phases(candidate, reference) + change_orders(candidate, reference)) / 2.0;
}

}  // namespace procloop

std::size_t std::hash<procloop::Instance>::operator()(const procloop::Instance& inst) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (const auto& p : inst.phases()) {
        h ^= std::hash<std::string>{}(p.name());
        h *= 1099511628211ULL;
    }
    return h;
}
