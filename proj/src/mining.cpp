#include "procloop/mining.hpp"

#include "procloop/error.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

namespace procloop {

void EventLog::add(const Trace& trace, std::size_t count) {
    if (count == 0) return;
    variants_[trace] += count;
}

EventLog EventLog::from_instances(const std::vector<Instance>& instances) {
    EventLog log;
    for (const auto& i : instances) log.add(i);
    return log;
}

std::size_t EventLog::size() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, c] : variants_) n += c;
    return n;
}

std::set<std::string> EventLog::alphabet() const {
    std::set<std::string> out;
    for (const auto& [t, _] : variants_) out.insert(t.begin(), t.end());
    return out;
}

EventLog EventLog::without_empty_traces() const {
    EventLog out = *this;
    out.variants_.erase(Trace{});
    return out;
}

EventLog EventLog::parse(std::string_view text) {
    EventLog log;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
        pos = nl == text.npos ? text.size() : nl + 1;
        ++line_no;
        auto first = line.find_first_not_of(" \t\r");
        if (first == line.npos || line[first] == '#') continue;
        try {
            log.add(parse_instance(line));
        } catch (const Error& e) {
            throw Error(Errc::ParseError, "event log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return log;
}

EventLog EventLog::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

namespace {

std::string dot_id(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string DirectlyFollowsGraph::to_dot() const {
    std::ostringstream os;
    os << "digraph dfg {\n";
    os << "  rankdir=LR;\n";
    os << "  \"__start__\" [shape=circle];\n";
    os << "  \"__end__\" [shape=doublecircle];\n";
    for (const auto& a : activities) os << "  " << dot_id(a) << " [shape=box];\n";
    for (const auto& [a, n] : start) os << "  \"__start__\" -> " << dot_id(a) << " [label=\"" << n << "\"];\n";
    for (const auto& [e, n] : edges)
        os << "  " << dot_id(e.first) << " -> " << dot_id(e.second) << " [label=\"" << n << "\"];\n";
    for (const auto& [a, n] : end) os << "  " << dot_id(a) << " -> \"__end__\" [label=\"" << n << "\"];\n";
    os << "}\n";
    return os.str();
}

DirectlyFollowsGraph build_dfg(const EventLog& log) {
    DirectlyFollowsGraph g;
    for (const auto& [trace, count] : log.variants()) {
        if (trace.empty()) throw Error(Errc::EmptyTrace, "directly-follows graph of a log with an empty trace");
        g.activities.insert(trace.begin(), trace.end());
        g.start[trace.front()] += count;
        g.end[trace.back()] += count;
        for (std::size_t i = 0; i + 1 < trace.size(); ++i) g.edges[{trace[i], trace[i + 1]}] += count;
    }
    return g;
}

std::string to_string(CutKind kind) {
    switch (kind) {
        case CutKind::Exclusive: return "exclusive";
        case CutKind::Sequence: return "sequence";
        case CutKind::Parallel: return "parallel";
        case CutKind::Loop: return "loop";
    }
    return "?";
}

namespace {

// Dense view of the activity subgraph.
struct Graph {
    std::vector<std::string> names;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<bool>> adj;
    std::vector<bool> is_start, is_end;

    explicit Graph(const DirectlyFollowsGraph& dfg) : names(dfg.activities.begin(), dfg.activities.end()) {
        for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
        adj.assign(names.size(), std::vector<bool>(names.size(), false));
        is_start.assign(names.size(), false);
        is_end.assign(names.size(), false);
        for (const auto& [e, _] : dfg.edges) adj[index.at(e.first)][index.at(e.second)] = true;
        for (const auto& [a, _] : dfg.start) is_start[index.at(a)] = true;
        for (const auto& [a, _] : dfg.end) is_end[index.at(a)] = true;
    }

    std::size_t size() const { return names.size(); }

    std::set<std::string> to_names(const std::vector<std::size_t>& ids) const {
        std::set<std::string> out;
        for (auto i : ids) out.insert(names[i]);
        return out;
    }

    // reach[i][j]: non-empty directed path i -> j
    std::vector<std::vector<bool>> closure() const {
        auto r = adj;
        auto n = size();
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                if (r[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (r[k][j]) r[i][j] = true;
        return r;
    }
};

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    // Groups ordered by their smallest member.
    std::vector<std::vector<std::size_t>> groups() {
        std::map<std::size_t, std::vector<std::size_t>> m;
        for (std::size_t i = 0; i < parent.size(); ++i) m[find(i)].push_back(i);
        std::vector<std::vector<std::size_t>> out;
        for (auto& [_, g] : m) out.push_back(std::move(g));
        return out;
    }
};

std::vector<std::vector<std::size_t>> weak_components(const Graph& g, const std::vector<bool>& keep) {
    UnionFind uf(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            if (keep[i] && keep[j] && g.adj[i][j]) uf.unite(i, j);
    std::vector<std::vector<std::size_t>> out;
    for (auto& grp : uf.groups())
        if (keep[grp.front()]) out.push_back(std::move(grp));
    return out;
}

}  // namespace

std::optional<Cut> find_exclusive_cut(const DirectlyFollowsGraph& dfg) {
    Graph g(dfg);
    auto comps = weak_components(g, std::vector<bool>(g.size(), true));
    if (comps.size() < 2) return std::nullopt;
    Cut cut{CutKind::Exclusive, {}};
    for (const auto& c : comps) cut.parts.push_back(g.to_names(c));
    return cut;
}

std::optional<Cut> find_sequence_cut(const DirectlyFollowsGraph& dfg) {
    Graph g(dfg);
    const auto n = g.size();
    if (n < 2) return std::nullopt;
    auto reach = g.closure();

    // Start from strongly connected components, then merge any two groups
    // whose members are not uniformly ordered one way.
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (reach[i][j] && reach[j][i]) uf.unite(i, j);

    auto ordered_before = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        for (auto x : a)
            for (auto y : b)
                if (!reach[x][y] || reach[y][x]) return false;
        return true;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        auto groups = uf.groups();
        for (std::size_t i = 0; i < groups.size() && !changed; ++i)
            for (std::size_t j = i + 1; j < groups.size() && !changed; ++j)
                if (!ordered_before(groups[i], groups[j]) && !ordered_before(groups[j], groups[i])) {
                    uf.unite(groups[i].front(), groups[j].front());
                    changed = true;
                }
    }

    auto groups = uf.groups();
    if (groups.size() < 2) return std::nullopt;
    std::sort(groups.begin(), groups.end(),
              [&](const auto& a, const auto& b) { return ordered_before(a, b); });
    Cut cut{CutKind::Sequence, {}};
    for (const auto& grp : groups) cut.parts.push_back(g.to_names(grp));
    return cut;
}

std::optional<Cut> find_parallel_cut(const DirectlyFollowsGraph& dfg) {
    Graph g(dfg);
    const auto n = g.size();
    if (n < 2) return std::nullopt;

    // Components of the negated graph: a and b stay together unless both
    // a->b and b->a are present.
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!(g.adj[i][j] && g.adj[j][i])) uf.unite(i, j);
    auto comps = uf.groups();
    if (comps.size() < 2) return std::nullopt;

    auto has = [&](const std::vector<std::size_t>& c, const std::vector<bool>& flag) {
        return std::any_of(c.begin(), c.end(), [&](std::size_t i) { return flag[i]; });
    };
    std::vector<std::vector<std::size_t>> full, start_only, end_only, neither;
    for (auto& c : comps) {
        bool s = has(c, g.is_start), e = has(c, g.is_end);
        (s && e ? full : s ? start_only : e ? end_only : neither).push_back(std::move(c));
    }
    // Pair start-only with end-only parts; leftovers join the first full part.
    std::vector<std::vector<std::size_t>> parts = full;
    std::vector<std::vector<std::size_t>> leftovers;
    std::size_t pairs = std::min(start_only.size(), end_only.size());
    for (std::size_t i = 0; i < pairs; ++i) {
        auto merged = start_only[i];
        merged.insert(merged.end(), end_only[i].begin(), end_only[i].end());
        parts.push_back(std::move(merged));
    }
    for (std::size_t i = pairs; i < start_only.size(); ++i) leftovers.push_back(start_only[i]);
    for (std::size_t i = pairs; i < end_only.size(); ++i) leftovers.push_back(end_only[i]);
    for (auto& c : neither) leftovers.push_back(std::move(c));
    if (parts.empty()) return std::nullopt;
    for (const auto& c : leftovers) parts.front().insert(parts.front().end(), c.begin(), c.end());
    if (parts.size() < 2) return std::nullopt;

    for (auto& p : parts) std::sort(p.begin(), p.end());
    std::sort(parts.begin(), parts.end());
    Cut cut{CutKind::Parallel, {}};
    for (const auto& p : parts) cut.parts.push_back(g.to_names(p));
    return cut;
}

std::optional<Cut> find_loop_cut(const DirectlyFollowsGraph& dfg) {
    Graph g(dfg);
    const auto n = g.size();
    if (n < 2) return std::nullopt;

    std::vector<bool> in_body(n, false);
    for (std::size_t i = 0; i < n; ++i) in_body[i] = g.is_start[i] || g.is_end[i];
    std::vector<bool> rest(n);
    for (std::size_t i = 0; i < n; ++i) rest[i] = !in_body[i];
    auto candidates = weak_components(g, rest);

    const std::vector<bool> body_core = in_body;
    std::vector<std::vector<std::size_t>> redo;
    for (const auto& comp : candidates) {
        bool ok = true;
        for (auto c : comp) {
            for (std::size_t b = 0; b < n && ok; ++b) {
                if (!body_core[b]) continue;
                // body -> redo only from end activities
                if (g.adj[b][c] && !g.is_end[b]) ok = false;
                // redo -> body only into start activities
                if (g.adj[c][b] && !g.is_start[b]) ok = false;
            }
        }
        // The redo part must be reachable from every end activity and lead
        // back to every start activity.
        for (std::size_t b = 0; b < n && ok; ++b) {
            if (g.is_end[b] &&
                std::none_of(comp.begin(), comp.end(), [&](std::size_t c) { return g.adj[b][c]; }))
                ok = false;
            if (g.is_start[b] &&
                std::none_of(comp.begin(), comp.end(), [&](std::size_t c) { return g.adj[c][b]; }))
                ok = false;
        }
        if (ok) {
            redo.push_back(comp);
        } else {
            for (auto c : comp) in_body[c] = true;
        }
    }
    if (redo.empty()) return std::nullopt;

    std::vector<std::size_t> body;
    for (std::size_t i = 0; i < n; ++i)
        if (in_body[i]) body.push_back(i);
    Cut cut{CutKind::Loop, {g.to_names(body)}};
    for (const auto& r : redo) cut.parts.push_back(g.to_names(r));
    return cut;
}

std::optional<Cut> find_cut(const DirectlyFollowsGraph& dfg) {
    if (dfg.activities.empty()) throw Error(Errc::InvalidArgument, "cut of an empty graph");
    if (auto c = find_exclusive_cut(dfg)) return c;
    if (auto c = find_sequence_cut(dfg)) return c;
    if (auto c = find_parallel_cut(dfg)) return c;
    return find_loop_cut(dfg);
}

std::vector<EventLog> split_log(const EventLog& log, const Cut& cut) {
    std::map<std::string, std::size_t> part_of;
    for (std::size_t p = 0; p < cut.parts.size(); ++p) {
        if (cut.parts[p].empty()) throw Error(Errc::InvalidCut, "empty part in cut");
        for (const auto& a : cut.parts[p])
            if (!part_of.emplace(a, p).second) throw Error(Errc::InvalidCut, "activity '" + a + "' in two parts");
    }
    if (cut.parts.size() < 2) throw Error(Errc::InvalidCut, "cut needs at least two parts");
    for (const auto& a : log.alphabet())
        if (!part_of.count(a)) throw Error(Errc::InvalidCut, "activity '" + a + "' not covered by the cut");

    std::vector<EventLog> out(cut.parts.size());
    auto project = [&](const Trace& t, std::size_t p) {
        Trace sub;
        for (const auto& a : t)
            if (part_of.at(a) == p) sub.push_back(a);
        return sub;
    };

    for (const auto& [trace, count] : log.variants()) {
        switch (cut.kind) {
            case CutKind::Exclusive: {
                std::vector<std::size_t> hits(cut.parts.size(), 0);
                for (const auto& a : trace) ++hits[part_of.at(a)];
                auto best = static_cast<std::size_t>(std::max_element(hits.begin(), hits.end()) - hits.begin());
                out[best].add(project(trace, best), count);
                break;
            }
            case CutKind::Sequence:
                // With a valid cut the parts are visited in order, so the
                // projection equals the split at part boundaries.
            case CutKind::Parallel:
                for (std::size_t p = 0; p < cut.parts.size(); ++p) out[p].add(project(trace, p), count);
                break;
            case CutKind::Loop: {
                std::size_t i = 0;
                while (i < trace.size()) {
                    auto p = part_of.at(trace[i]);
                    Trace section;
                    while (i < trace.size() && part_of.at(trace[i]) == p) section.push_back(trace[i++]);
                    out[p].add(section, count);
                }
                break;
            }
        }
    }
    return out;
}

namespace {

ProcessTree flower(const std::set<std::string>& alphabet) {
    std::vector<ProcessTree> leaves;
    for (const auto& a : alphabet) leaves.push_back(ProcessTree::leaf(a));
    return ProcessTree::loop(ProcessTree::tau(), std::move(leaves));
}

EventLog project_log(const EventLog& log, const std::set<std::string>& keep) {
    EventLog out;
    for (const auto& [trace, count] : log.variants()) {
        Trace sub;
        for (const auto& a : trace)
            if (keep.count(a)) sub.push_back(a);
        out.add(sub, count);
    }
    return out;
}

// An activity that occurs exactly once in every trace.
std::optional<std::string> activity_once_per_trace(const EventLog& log, const std::set<std::string>& alphabet) {
    for (const auto& a : alphabet) {
        bool once = std::all_of(log.variants().begin(), log.variants().end(), [&](const auto& v) {
            return std::count(v.first.begin(), v.first.end(), a) == 1;
        });
        if (once) return a;
    }
    return std::nullopt;
}

bool is_base_case(const EventLog& log) {
    const auto& v = log.variants();
    return v.empty() || (v.size() == 1 && v.begin()->first.size() <= 1) || log.has_empty_trace();
}

// An activity whose removal leaves a log with a cut or a base case.
std::optional<std::string> activity_concurrent(const EventLog& log, const std::set<std::string>& alphabet) {
    for (const auto& a : alphabet) {
        auto rest = alphabet;
        rest.erase(a);
        auto sub = project_log(log, rest).without_empty_traces();
        if (is_base_case(sub) || find_cut(build_dfg(sub))) return a;
    }
    return std::nullopt;
}

std::set<std::string> singleton(const std::string& a) { return {a}; }

// Cuts every trace before position i > 0 where split_before(i) holds.
// Returns nullopt when no trace is cut.
template <typename Pred>
std::optional<EventLog> split_traces(const EventLog& log, Pred split_before) {
    EventLog out;
    bool changed = false;
    for (const auto& [trace, count] : log.variants()) {
        Trace piece;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            if (i > 0 && split_before(trace, i)) {
                out.add(piece, count);
                piece.clear();
                changed = true;
            }
            piece.push_back(trace[i]);
        }
        out.add(piece, count);
    }
    if (!changed) return std::nullopt;
    return out;
}

}  // namespace

ProcessTree mine_tree(const EventLog& log) {
    if (log.empty()) throw Error(Errc::EmptyLog, "cannot mine an empty log");

    const auto& variants = log.variants();
    if (variants.size() == 1 && variants.begin()->first.empty()) return ProcessTree::tau();
    if (variants.size() == 1 && variants.begin()->first.size() == 1)
        return ProcessTree::leaf(variants.begin()->first.front());
    if (log.has_empty_trace())
        return ProcessTree::exclusive({ProcessTree::tau(), mine_tree(log.without_empty_traces())});

    auto dfg = build_dfg(log);
    auto cut = find_cut(dfg);
    if (!cut) {
        // Fall-throughs, most specific first; the flower model is the last resort.
        const auto& alphabet = dfg.activities;
        if (alphabet.size() >= 2) {
            std::optional<std::string> a = activity_once_per_trace(log, alphabet);
            if (!a) a = activity_concurrent(log, alphabet);
            if (a) {
                auto rest = alphabet;
                rest.erase(*a);
                return ProcessTree::parallel(
                    {mine_tree(project_log(log, singleton(*a))), mine_tree(project_log(log, rest))});
            }
        }
        // Tau loops: cut traces where an end activity meets a start
        // activity (strict), then before any start activity.
        auto strict = split_traces(log, [&](const Trace& t, std::size_t i) {
            return dfg.end.count(t[i - 1]) && dfg.start.count(t[i]);
        });
        if (strict) return ProcessTree::loop(mine_tree(*strict), {ProcessTree::tau()});
        auto loose = split_traces(log, [&](const Trace& t, std::size_t i) { return dfg.start.count(t[i]) > 0; });
        if (loose) return ProcessTree::loop(mine_tree(*loose), {ProcessTree::tau()});
        return flower(alphabet);
    }

    auto sublogs = split_log(log, *cut);
    std::vector<ProcessTree> kids;
    kids.reserve(sublogs.size());
    for (const auto& sub : sublogs) kids.push_back(mine_tree(sub));
    switch (cut->kind) {
        case CutKind::Exclusive: return ProcessTree::exclusive(std::move(kids));
        case CutKind::Sequence: return ProcessTree::sequence(std::move(kids));
        case CutKind::Parallel: return ProcessTree::parallel(std::move(kids));
        case CutKind::Loop: {
            auto body = kids.front();
            kids.erase(kids.begin());
            return ProcessTree::loop(std::move(body), std::move(kids));
        }
    }
    return flower(dfg.activities);
}

}  // namespace procloop
