#pragma once
// Directly-follows graphs and the Inductive Miner.

#include "procloop/instance.hpp"
#include "procloop/process_tree.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace procloop {

// Multiset of traces, stored as variant -> multiplicity.
class EventLog {
public:
    EventLog() = default;

    void add(const Trace& trace, std::size_t count = 1);
    void add(const Instance& inst, std::size_t count = 1) { add(inst.names(), count); }

    static EventLog from_instances(const std::vector<Instance>& instances);

    const std::map<Trace, std::size_t>& variants() const noexcept { return variants_; }
    std::size_t size() const noexcept;  // traces, counting multiplicity
    bool empty() const noexcept { return variants_.empty(); }
    bool has_empty_trace() const { return variants_.count(Trace{}) > 0; }
    std::set<std::string> alphabet() const;
    EventLog without_empty_traces() const;

    // One serialized instance per line, `#` starts a comment line.
    static EventLog parse(std::string_view text);
    static EventLog load(const std::filesystem::path& path);

    friend bool operator==(const EventLog&, const EventLog&) = default;

private:
    std::map<Trace, std::size_t> variants_;
};

struct DirectlyFollowsGraph {
    std::set<std::string> activities;
    std::map<std::string, std::size_t> start;  // edges from the virtual start
    std::map<std::string, std::size_t> end;    // edges into the virtual end
    std::map<std::pair<std::string, std::string>, std::size_t> edges;

    bool has_edge(const std::string& a, const std::string& b) const {
        return edges.count({a, b}) > 0;
    }

    // Virtual nodes are rendered as __start__ and __end__.
    std::string to_dot() const;
};

// Throws EmptyTrace if the log holds the empty trace.
DirectlyFollowsGraph build_dfg(const EventLog& log);

enum class CutKind { Exclusive, Sequence, Parallel, Loop };
std::string to_string(CutKind kind);

struct Cut {
    CutKind kind;
    // For loops the first part is the body.
    std::vector<std::set<std::string>> parts;
};

std::optional<Cut> find_exclusive_cut(const DirectlyFollowsGraph& dfg);
std::optional<Cut> find_sequence_cut(const DirectlyFollowsGraph& dfg);
std::optional<Cut> find_parallel_cut(const DirectlyFollowsGraph& dfg);
std::optional<Cut> find_loop_cut(const DirectlyFollowsGraph& dfg);

// Tries exclusive, sequence, parallel, loop in that order.
std::optional<Cut> find_cut(const DirectlyFollowsGraph& dfg);

std::vector<EventLog> split_log(const EventLog& log, const Cut& cut);

ProcessTree mine_tree(const EventLog& log);

}  // namespace procloop
