#pragma once
// Phases, instances and the phase vocabulary.
//
// An instance is an ordered list of phase names written as
// "DemandAnalysis -> Coding -> Manual" (the Unicode arrow is accepted on
// input). Phase comparison is exact and case-sensitive.

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace procloop {

class Phase {
public:
    // Throws Error{InvalidPhase} for empty names or names containing
    // whitespace, commas or arrow tokens.
    explicit Phase(std::string name);

    const std::string& name() const noexcept { return name_; }

    friend bool operator==(const Phase&, const Phase&) = default;
    friend auto operator<=>(const Phase&, const Phase&) = default;

private:
    std::string name_;
};

class Instance {
public:
    // Throws Error{NoPhases} when empty.
    explicit Instance(std::vector<Phase> phases);
    Instance(std::initializer_list<std::string_view> names);

    const std::vector<Phase>& phases() const noexcept { return phases_; }
    std::size_t size() const noexcept { return phases_.size(); }
    const Phase& operator[](std::size_t i) const { return phases_[i]; }
    std::vector<std::string> names() const;

    friend bool operator==(const Instance&, const Instance&) = default;
    friend auto operator<=>(const Instance&, const Instance&) = default;

private:
    std::vector<Phase> phases_;
};

struct PhaseEntry {
    std::string name;
    std::string explanation;
};

class PhaseVocabulary {
public:
    // default_instance is the entry order.
    explicit PhaseVocabulary(std::vector<PhaseEntry> entries);

    // The 14 software-lifecycle phases, ordered requirements -> design ->
    // construction -> quality -> maintenance.
    static const PhaseVocabulary& standard();

    // JSON array of {"name": ..., "explanation": ...}.
    static PhaseVocabulary from_json(std::string_view text);
    static PhaseVocabulary load(const std::filesystem::path& path);

    const std::vector<PhaseEntry>& entries() const noexcept { return entries_; }
    const Instance& default_instance() const noexcept { return default_instance_; }
    bool contains(const Phase& phase) const;
    bool contains(std::string_view name) const;

    // Copy with extra entries appended (duplicates ignored).
    PhaseVocabulary extended(std::span<const PhaseEntry> extra) const;

private:
    std::vector<PhaseEntry> entries_;
    Instance default_instance_;
};

Instance parse_instance(std::string_view text);
std::string serialize_instance(const Instance& inst);

// Phases not in the vocabulary, first-occurrence order, deduplicated.
std::vector<Phase> unknown_phases(const Instance& inst, const PhaseVocabulary& vocab);

// Symmetric-difference ratios over phase sets and adjacent-pair sets.
double change_phases(const Instance& candidate, const Instance& reference);
double change_orders(const Instance& candidate, const Instance& reference);
double diversity(const Instance& candidate, const Instance& reference);

}  // namespace procloop

template <>
struct std::hash<procloop::Instance> {
    std::size_t operator()(const procloop::Instance& inst) const noexcept;
};
