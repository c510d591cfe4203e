#pragma once
// Independent oracles shared by the unit and acceptance tests.

#include "procloop/bpmn.hpp"
#include "procloop/describe.hpp"
#include "procloop/process_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace procloop::test {

// Average ranks (1-based) with ties sharing the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double mean = (double(i) + double(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean;
        i = j + 1;
    }
    return r;
}

// Pearson correlation of the ranks; 0 when either side is constant.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman needs paired samples");
    auto rx = ranks(x), ry = ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) mx += rx[i], my += ry[i];
    mx /= double(rx.size());
    my /= double(ry.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// First and last activities of the traces of a tree.
inline std::pair<std::set<std::string>, std::set<std::string>> start_end_activities(const ProcessTree& tree) {
    std::set<std::string> first, last;
    for (const auto& t : enumerate_language(tree, 8)) {
        if (t.empty()) continue;
        first.insert(t.front());
        last.insert(t.back());
    }
    return {first, last};
}

// Random trees with unique labels a, b, c, ... inside the inductive
// miner's rediscoverable class: tau only as an xor alternative next to
// children that reject the empty trace, loop parts and parallel branches
// never accept the empty trace, and a loop body is no loop and has
// disjoint start and end activities.
class TreeGenerator {
public:
    explicit TreeGenerator(std::uint64_t seed, std::size_t max_leaves = 6, std::size_t max_depth = 3)
        : rng_(seed), max_leaves_(max_leaves), max_depth_(max_depth) {}

    ProcessTree next() {
        next_label_ = 0;
        std::uniform_int_distribution<std::size_t> leaves(2, max_leaves_);
        return build(leaves(rng_), max_depth_);
    }

private:
    ProcessTree leaf() { return ProcessTree::leaf(std::string(1, char('a' + next_label_++))); }

    // Splits n leaves into k >= 2 non-empty groups.
    std::vector<std::size_t> split(std::size_t n, std::size_t k) {
        std::vector<std::size_t> parts(k, 1);
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        for (std::size_t i = k; i < n; ++i) ++parts[pick(rng_)];
        return parts;
    }

    static bool loop_body_ok(const ProcessTree& body) {
        if (body.kind() == ProcessTree::Kind::Loop) return false;
        auto [first, last] = start_end_activities(body);
        return std::none_of(first.begin(), first.end(), [&](const std::string& a) { return last.count(a) > 0; });
    }

    ProcessTree build(std::size_t n, std::size_t depth) {
        if (n == 1) return leaf();
        std::uniform_int_distribution<int> op(0, 3);
        int kind = op(rng_);
        std::vector<std::size_t> parts;
        if (depth <= 1) {
            parts.assign(n, 1);
        } else {
            std::uniform_int_distribution<std::size_t> kd(2, std::min<std::size_t>(n, 3));
            parts = split(n, kd(rng_));
        }
        std::vector<ProcessTree> kids;
        for (auto p : parts) kids.push_back(build(p, depth - 1));
        bool all_nonempty = std::all_of(kids.begin(), kids.end(), [](const ProcessTree& t) { return !accepts(t, {}); });
        switch (kind) {
            case 0: return ProcessTree::sequence(std::move(kids));
            case 1: {
                std::bernoulli_distribution with_tau(0.3);
                if (all_nonempty && with_tau(rng_)) kids.push_back(ProcessTree::tau());
                return ProcessTree::exclusive(std::move(kids));
            }
            case 2:
                if (!all_nonempty) return ProcessTree::sequence(std::move(kids));
                return ProcessTree::parallel(std::move(kids));
            default: {
                if (!all_nonempty || !loop_body_ok(kids.front())) return ProcessTree::sequence(std::move(kids));
                auto body = std::move(kids.front());
                kids.erase(kids.begin());
                return ProcessTree::loop(std::move(body), std::move(kids));
            }
        }
    }

    std::mt19937_64 rng_;
    std::size_t max_leaves_;
    std::size_t max_depth_;
    std::size_t next_label_ = 0;
};

// Token game over the BPMN graph: tasks and exclusive gateways move one
// token, parallel gateways synchronize all incoming flows. Returns every
// completed task-label sequence of length <= max_len.
inline std::set<Trace> bpmn_language(const BpmnModel& model, std::size_t max_len) {
    const auto& flows = model.flows();
    std::map<std::string, std::vector<std::size_t>> in, out;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        out[flows[i].source].push_back(i);
        in[flows[i].target].push_back(i);
    }
    using Marking = std::vector<int>;
    using State = std::pair<Marking, Trace>;
    const auto& start = model.start_event();
    const auto& end = model.end_event();

    Marking m0(flows.size(), 0);
    for (auto f : out[start.id]) m0[f] = 1;
    std::set<State> seen;
    std::vector<State> stack{{m0, {}}};
    std::set<Trace> lang;
    while (!stack.empty()) {
        auto [m, t] = stack.back();
        stack.pop_back();
        if (!seen.insert({m, t}).second) continue;
        int tokens = 0;
        for (int x : m) tokens += x;
        if (tokens > int(flows.size()) * 2) throw std::runtime_error("unsafe model in token game");
        if (tokens == 1 && in[end.id].size() == 1 && m[in[end.id].front()] == 1) {
            lang.insert(t);
            continue;
        }
        for (const auto& n : model.nodes()) {
            const auto& ins = in[n.id];
            const auto& outs = out[n.id];
            switch (n.kind) {
                case BpmnKind::StartEvent:
                case BpmnKind::EndEvent: break;
                case BpmnKind::Task:
                    if (m[ins.front()] > 0 && t.size() < max_len) {
                        auto m2 = m;
                        --m2[ins.front()];
                        ++m2[outs.front()];
                        auto t2 = t;
                        t2.push_back(n.label);
                        stack.push_back({std::move(m2), std::move(t2)});
                    }
                    break;
                case BpmnKind::ExclusiveGateway:
                    for (auto fi : ins) {
                        if (m[fi] == 0) continue;
                        for (auto fo : outs) {
                            auto m2 = m;
                            --m2[fi];
                            ++m2[fo];
                            stack.push_back({std::move(m2), t});
                        }
                    }
                    break;
                case BpmnKind::ParallelGateway: {
                    bool ready = std::all_of(ins.begin(), ins.end(), [&](std::size_t f) { return m[f] > 0; });
                    if (!ready) break;
                    auto m2 = m;
                    for (auto f : ins) --m2[f];
                    for (auto f : outs) ++m2[f];
                    stack.push_back({std::move(m2), t});
                    break;
                }
            }
        }
    }
    return lang;
}

// Inverse of the sentence templates: rebuilds the message list from text.
// Positions are the message indices.
inline std::vector<Message> parse_description(const std::string& text) {
    auto starts_with = [](const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; };
    auto ends_with = [](const std::string& s, const std::string& p) {
        return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
    };
    auto unnothing = [](std::string s) { return s == "nothing" ? std::string{} : s; };
    // Splits "a, b or c" at depth 0.
    auto split_list = [&](const std::string& s, const std::string& last) {
        std::vector<std::string> items;
        std::vector<std::size_t> commas;
        std::size_t last_pos = std::string::npos;
        int depth = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '(') ++depth;
            if (s[i] == ')') --depth;
            if (depth == 0 && s.compare(i, 2, ", ") == 0) commas.push_back(i);
            if (depth == 0 && s.compare(i, last.size(), last) == 0) last_pos = i;
        }
        std::size_t from = 0;
        for (auto c : commas) {
            items.push_back(unnothing(s.substr(from, c - from)));
            from = c + 2;
        }
        if (last_pos == std::string::npos || last_pos < from) {
            if (!commas.empty()) throw std::runtime_error("bad list: " + s);
            items.push_back(unnothing(s));
            return items;
        }
        items.push_back(unnothing(s.substr(from, last_pos - from)));
        items.push_back(unnothing(s.substr(last_pos + last.size())));
        return items;
    };

    std::vector<std::string> sentences;
    std::size_t from = 0;
    int depth = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(') ++depth;
        if (text[i] == ')') --depth;
        if (depth == 0 && text[i] == '.' && (i + 1 == text.size() || text[i + 1] == ' ')) {
            sentences.push_back(text.substr(from, i - from));
            from = i + 2;
        }
    }

    std::vector<Message> out;
    const std::string performed = " is performed";
    const std::string choice = "Next, exactly one of the following is performed: ";
    const std::string parallel = "Next, the following are performed in any order: ";
    for (const auto& s : sentences) {
        Message m{MessageKind::Start};
        if (s == "The process starts") {
            m.kind = MessageKind::Start;
        } else if (s == "The process ends") {
            m.kind = MessageKind::End;
        } else if ((starts_with(s, "First, ") || starts_with(s, "Then, ")) && ends_with(s, performed)) {
            auto body = s.substr(s.find(", ") + 2);
            m.kind = MessageKind::DoTask;
            m.phase = body.substr(0, body.size() - performed.size());
        } else if (starts_with(s, "Optionally, ") && ends_with(s, performed)) {
            m.kind = MessageKind::OptionalTask;
            m.phase = s.substr(12, s.size() - 12 - performed.size());
        } else if (starts_with(s, choice)) {
            m.kind = MessageKind::Choice;
            m.branches = split_list(s.substr(choice.size()), " or ");
        } else if (starts_with(s, parallel)) {
            m.kind = MessageKind::ParallelBlock;
            m.branches = split_list(s.substr(parallel.size()), " and ");
        } else if (starts_with(s, "Next, ") && s.find("; this may repeat after ") != std::string::npos) {
            const std::string repeat = "; this may repeat after ";
            auto sep = s.find(repeat);
            m.kind = MessageKind::LoopBlock;
            m.body = unnothing(s.substr(6, sep - 6));
            m.branches = split_list(s.substr(sep + repeat.size()), " or ");
        } else {
            throw std::runtime_error("unknown sentence: " + s);
        }
        m.position = out.size();
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace procloop::test
