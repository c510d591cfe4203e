#pragma once
// Process tree -> BPMN (start/end events, tasks, exclusive and parallel
// gateways, sequence flows) with DOT and BPMN 2.0 XML export.

#include "procloop/process_tree.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace procloop {

enum class BpmnKind { StartEvent, EndEvent, Task, ExclusiveGateway, ParallelGateway };

struct BpmnNode {
    std::string id;
    BpmnKind kind;
    std::string label;  // task name; empty otherwise

    friend bool operator==(const BpmnNode&, const BpmnNode&) = default;
};

struct SequenceFlow {
    std::string source;
    std::string target;

    friend bool operator==(const SequenceFlow&, const SequenceFlow&) = default;
    friend auto operator<=>(const SequenceFlow&, const SequenceFlow&) = default;
};

class BpmnModel {
public:
    const std::vector<BpmnNode>& nodes() const noexcept { return nodes_; }
    const std::vector<SequenceFlow>& flows() const noexcept { return flows_; }

    const BpmnNode& add_node(BpmnKind kind, std::string label = {});
    // For parsed models with given ids.
    const BpmnNode& add_node(std::string id, BpmnKind kind, std::string label);
    void add_flow(const std::string& source, const std::string& target);

    const BpmnNode* node(std::string_view id) const;
    std::vector<std::string> successors(std::string_view id) const;
    std::vector<std::string> predecessors(std::string_view id) const;
    const BpmnNode& start_event() const;
    const BpmnNode& end_event() const;

    // Throws UnstructuredModel on violated invariants (event counts, task
    // degrees, dangling flows, nodes off every start-to-end path).
    void validate() const;

    // Same nodes and same flow set.
    friend bool operator==(const BpmnModel& a, const BpmnModel& b);

private:
    std::vector<BpmnNode> nodes_;
    std::vector<SequenceFlow> flows_;
};

struct ElementCounts {
    std::size_t tasks = 0;
    std::size_t parallel_gateways = 0;
    std::size_t exclusive_gateways = 0;

    std::size_t gateways() const { return parallel_gateways + exclusive_gateways; }
    friend bool operator==(const ElementCounts&, const ElementCounts&) = default;
};

BpmnModel tree_to_bpmn(const ProcessTree& tree);
ElementCounts count_elements(const BpmnModel& model);

std::string export_dot(const BpmnModel& model);
std::string export_xml(const BpmnModel& model);
// Reads the subset written by export_xml. Throws ParseError.
BpmnModel parse_xml(std::string_view xml);

}  // namespace procloop
