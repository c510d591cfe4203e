#include "procloop/describe.hpp"

#include "procloop/error.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace procloop {

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep, std::string_view last_sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += i + 1 == items.size() ? last_sep : sep;
        out += items[i];
    }
    return out;
}

std::string branch_or_nothing(const std::string& s) { return s.empty() ? "nothing" : s; }

// Compact phrase for a nested message list.
std::string summarize(const std::vector<Message>& msgs) {
    std::vector<std::string> parts;
    for (const auto& m : msgs) {
        switch (m.kind) {
            case MessageKind::DoTask: parts.push_back(m.phase); break;
            case MessageKind::OptionalTask: parts.push_back("optionally " + m.phase); break;
            case MessageKind::Choice: {
                std::vector<std::string> b;
                for (const auto& x : m.branches) b.push_back(branch_or_nothing(x));
                parts.push_back("(either " + join(b, " or ", " or ") + ")");
                break;
            }
            case MessageKind::ParallelBlock: {
                std::vector<std::string> b;
                for (const auto& x : m.branches) b.push_back(branch_or_nothing(x));
                parts.push_back("(" + join(b, " and ", " and ") + " in any order)");
                break;
            }
            case MessageKind::LoopBlock: {
                std::vector<std::string> b;
                for (const auto& x : m.branches) b.push_back(branch_or_nothing(x));
                parts.push_back("(" + branch_or_nothing(m.body) + " repeatable after " + join(b, " or ", " or ") + ")");
                break;
            }
            default: break;
        }
    }
    return join(parts, " then ", " then ");
}

class Planner {
public:
    explicit Planner(const BpmnModel& m) : model_(m) {
        model_.validate();
        const auto& nodes = model_.nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) idx_[nodes[i].id] = i;
        succ_.resize(nodes.size());
        pred_.resize(nodes.size());
        for (const auto& f : model_.flows()) {
            succ_[idx_.at(f.source)].push_back(idx_.at(f.target));
            pred_[idx_.at(f.target)].push_back(idx_.at(f.source));
        }
        compute_postdominators();
        find_loop_entries();
    }

    std::vector<Message> run() {
        auto out = walk(idx_.at(model_.start_event().id), kNone);
        for (std::size_t i = 0; i < out.size(); ++i) out[i].position = i;
        return out;
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    [[noreturn]] void fail(const std::string& why) const { throw Error(Errc::UnstructuredModel, why); }

    const BpmnNode& node(std::size_t i) const { return model_.nodes()[i]; }

    void compute_postdominators() {
        const auto n = model_.nodes().size();
        const auto end = idx_.at(model_.end_event().id);
        pdom_.assign(n, std::vector<bool>(n, true));
        pdom_[end].assign(n, false);
        pdom_[end][end] = true;
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t v = 0; v < n; ++v) {
                if (v == end) continue;
                std::vector<bool> next(n, !succ_[v].empty());
                for (auto s : succ_[v])
                    for (std::size_t k = 0; k < n; ++k) next[k] = next[k] && pdom_[s][k];
                next[v] = true;
                if (next != pdom_[v]) {
                    pdom_[v] = std::move(next);
                    changed = true;
                }
            }
        }
    }

    // Closest strict post-dominator.
    std::size_t ipdom(std::size_t v) const {
        std::size_t best = kNone, best_size = 0;
        for (std::size_t d = 0; d < pdom_.size(); ++d) {
            if (d == v || !pdom_[v][d]) continue;
            auto size = static_cast<std::size_t>(std::count(pdom_[d].begin(), pdom_[d].end(), true));
            if (best == kNone || size > best_size) {
                best = d;
                best_size = size;
            }
        }
        if (best == kNone) fail("node " + node(v).id + " has no post-dominator");
        return best;
    }

    // Back edges of a depth-first walk from the start event; their targets
    // are loop entries. Models built from trees are reducible, so the set
    // does not depend on the visiting order.
    void find_loop_entries() {
        const auto n = model_.nodes().size();
        std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
        std::vector<std::pair<std::size_t, std::size_t>> stack;
        auto start = idx_.at(model_.start_event().id);
        stack.emplace_back(start, 0);
        state[start] = 1;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (next < succ_[v].size()) {
                auto w = succ_[v][next++];
                if (state[w] == 1) {
                    back_sources_[w].push_back(v);
                } else if (state[w] == 0) {
                    state[w] = 1;
                    stack.emplace_back(w, 0);
                }
            } else {
                state[v] = 2;
                stack.pop_back();
            }
        }
    }

    std::vector<Message> walk(std::size_t cur, std::size_t stop) {
        std::vector<Message> out;
        std::size_t guard = 0;
        while (cur != stop) {
            if (++guard > 4 * model_.nodes().size() + 4) fail("control flow does not terminate");
            const auto& n = node(cur);
            switch (n.kind) {
                case BpmnKind::StartEvent:
                    out.push_back({MessageKind::Start});
                    cur = single_successor(cur);
                    break;
                case BpmnKind::EndEvent:
                    if (stop != kNone) fail("block reaches the end event before its join");
                    out.push_back({MessageKind::End});
                    return out;
                case BpmnKind::Task:
                    out.push_back({MessageKind::DoTask, 0, n.label});
                    cur = single_successor(cur);
                    break;
                case BpmnKind::ExclusiveGateway:
                case BpmnKind::ParallelGateway:
                    if (back_sources_.count(cur)) {
                        cur = loop_block(cur, out);
                    } else if (succ_[cur].size() >= 2) {
                        cur = gateway_block(cur, out);
                    } else {
                        fail("unmatched join gateway " + n.id);
                    }
                    break;
            }
        }
        return out;
    }

    std::size_t single_successor(std::size_t v) const {
        if (succ_[v].size() != 1) fail("node " + node(v).id + " must have exactly one outgoing flow");
        return succ_[v].front();
    }

    // Natural loop of `entry`: every node that reaches a back-edge source
    // without passing through the entry.
    std::set<std::size_t> natural_loop(std::size_t entry) const {
        std::set<std::size_t> loop{entry};
        std::vector<std::size_t> stack;
        for (auto src : back_sources_.at(entry))
            if (loop.insert(src).second) stack.push_back(src);
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            for (auto p : pred_[v])
                if (loop.insert(p).second) stack.push_back(p);
        }
        return loop;
    }

    std::size_t loop_block(std::size_t entry, std::vector<Message>& out) {
        if (node(entry).kind != BpmnKind::ExclusiveGateway) fail("loop entry must be an exclusive gateway");
        const auto members = natural_loop(entry);
        std::size_t exit = kNone, forward = kNone;
        for (auto v : members)
            for (auto w : succ_[v])
                if (!members.count(w)) {
                    if (exit != kNone) fail("loop at " + node(entry).id + " has more than one exit");
                    exit = v;
                    forward = w;
                }
        if (exit == kNone) fail("loop at " + node(entry).id + " has no exit");
        if (node(exit).kind != BpmnKind::ExclusiveGateway) fail("loop exit must be an exclusive gateway");

        auto body = exit == entry ? std::vector<Message>{} : walk(single_successor(entry), exit);
        Message m{MessageKind::LoopBlock};
        m.body = summarize(body);
        for (auto y : succ_[exit])
            if (y != forward) m.branches.push_back(summarize(walk(y, entry)));
        out.push_back(std::move(m));
        return forward;
    }

    std::size_t gateway_block(std::size_t split, std::vector<Message>& out) {
        auto join = ipdom(split);
        if (node(join).kind != node(split).kind)
            fail("gateway " + node(split).id + " is not closed by a gateway of the same kind");
        std::vector<std::vector<Message>> branches;
        for (auto s : succ_[split]) branches.push_back(walk(s, join));

        Message m{node(split).kind == BpmnKind::ExclusiveGateway ? MessageKind::Choice : MessageKind::ParallelBlock};
        if (m.kind == MessageKind::Choice && branches.size() == 2) {
            for (std::size_t i = 0; i < 2; ++i) {
                const auto& other = branches[1 - i];
                if (branches[i].empty() && other.size() == 1 && other.front().kind == MessageKind::DoTask) {
                    m = Message{MessageKind::OptionalTask, 0, other.front().phase};
                    break;
                }
            }
        }
        if (m.kind != MessageKind::OptionalTask)
            for (const auto& b : branches) m.branches.push_back(summarize(b));
        out.push_back(std::move(m));
        return single_successor(join);
    }

    const BpmnModel& model_;
    std::map<std::string, std::size_t> idx_;
    std::vector<std::vector<std::size_t>> succ_, pred_;
    std::vector<std::vector<bool>> pdom_;
    std::map<std::size_t, std::vector<std::size_t>> back_sources_;  // loop entry -> back-edge sources
};

}  // namespace

std::vector<Message> plan_text(const BpmnModel& model) { return Planner(model).run(); }

ProcessDescription realize_text(const std::vector<Message>& messages) {
    std::vector<std::string> sentences;
    auto list = [](const std::vector<std::string>& items, std::string_view last) {
        std::vector<std::string> b;
        for (const auto& x : items) b.push_back(branch_or_nothing(x));
        return join(b, ", ", last);
    };
    for (std::size_t i = 0; i < messages.size(); ++i) {
        const auto& m = messages[i];
        switch (m.kind) {
            case MessageKind::Start: sentences.push_back("The process starts."); break;
            case MessageKind::End: sentences.push_back("The process ends."); break;
            case MessageKind::DoTask: {
                bool first = i == 1 && messages[0].kind == MessageKind::Start;
                sentences.push_back((first ? "First, " : "Then, ") + m.phase + " is performed.");
                break;
            }
            case MessageKind::OptionalTask: sentences.push_back("Optionally, " + m.phase + " is performed."); break;
            case MessageKind::Choice:
                sentences.push_back("Next, exactly one of the following is performed: " + list(m.branches, " or ") + ".");
                break;
            case MessageKind::ParallelBlock:
                sentences.push_back("Next, the following are performed in any order: " + list(m.branches, " and ") + ".");
                break;
            case MessageKind::LoopBlock:
                sentences.push_back("Next, " + branch_or_nothing(m.body) + "; this may repeat after " +
                                    list(m.branches, " or ") + ".");
                break;
        }
    }
    ProcessDescription d;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i) d.text += ' ';
        d.text += sentences[i];
    }
    d.sentence_count = sentences.size();
    return d;
}

}  // namespace procloop
