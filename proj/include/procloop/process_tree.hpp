#pragma once
// Block-structured process trees.
//
// Operators: seq (ordered), xor (choice), and (interleaving) and
// loop(body, redo...) = body (redo body)*. The silent leaf `tau` accepts
// the empty trace. Factories flatten nested operators of the same kind and
// sort the children of xor/and and the redo children of loop, so equal
// languages built the same way compare equal structurally.
//
// Text form (prefix notation): seq(D, xor(tau, R), C, T)

#include <cstddef>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace procloop {

using Trace = std::vector<std::string>;

class ProcessTree {
public:
    enum class Kind { Leaf, Tau, Sequence, Exclusive, Parallel, Loop };

    static ProcessTree leaf(std::string label);
    static ProcessTree tau();
    // Operators need at least two children after flattening; a single
    // child is returned unchanged.
    static ProcessTree sequence(std::vector<ProcessTree> children);
    static ProcessTree exclusive(std::vector<ProcessTree> children);
    static ProcessTree parallel(std::vector<ProcessTree> children);
    static ProcessTree loop(ProcessTree body, std::vector<ProcessTree> redos);

    Kind kind() const noexcept { return kind_; }
    const std::string& label() const noexcept { return label_; }
    const std::vector<ProcessTree>& children() const noexcept { return children_; }
    bool is_operator() const noexcept { return kind_ != Kind::Leaf && kind_ != Kind::Tau; }

    std::set<std::string> alphabet() const;
    std::size_t leaf_count() const;  // non-tau leaves
    std::size_t depth() const;       // a leaf has depth 0

    std::string to_string() const;

    friend bool operator==(const ProcessTree& a, const ProcessTree& b);

private:
    ProcessTree(Kind kind, std::string label, std::vector<ProcessTree> children)
        : kind_(kind), label_(std::move(label)), children_(std::move(children)) {}

    Kind kind_;
    std::string label_;
    std::vector<ProcessTree> children_;
};

// Throws Error{ParseError}.
ProcessTree parse_tree(std::string_view text);

// Language membership.
bool accepts(const ProcessTree& tree, const Trace& trace);

// Every trace of length <= max_len, built from the operator semantics.
// max_len must be <= 12; throws DepthExceeded if an intermediate set grows
// beyond node_budget traces.
std::set<Trace> enumerate_language(const ProcessTree& tree, std::size_t max_len,
                                   std::size_t node_budget = 500000);

// Random play-out: xor picks a child uniformly, and interleaves uniformly,
// loop repeats with probability repeat_p at most max_repeats times.
Trace sample_trace(const ProcessTree& tree, std::mt19937_64& rng, double repeat_p = 0.3,
                   std::size_t max_repeats = 3);

}  // namespace procloop
