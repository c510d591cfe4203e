#pragma once
// BPMN -> natural-language process description.
//
// Text planning walks the model in control-flow order and collapses each
// gateway block into one message; realization maps every message onto a
// fixed sentence template, so the output is deterministic and can be parsed
// back.

#include "procloop/bpmn.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace procloop {

enum class MessageKind { Start, End, DoTask, OptionalTask, Choice, ParallelBlock, LoopBlock };

struct Message {
    MessageKind kind;
    std::size_t position = 0;
    std::string phase;                  // DoTask, OptionalTask
    std::vector<std::string> branches;  // Choice / ParallelBlock branches, LoopBlock redo parts
    std::string body;                   // LoopBlock body

    friend bool operator==(const Message&, const Message&) = default;
};

struct ProcessDescription {
    std::string text;
    std::size_t sentence_count = 0;
};

// Throws UnstructuredModel when gateways cannot be matched into blocks.
std::vector<Message> plan_text(const BpmnModel& model);
ProcessDescription realize_text(const std::vector<Message>& messages);

inline ProcessDescription describe(const BpmnModel& model) { return realize_text(plan_text(model)); }

}  // namespace procloop
