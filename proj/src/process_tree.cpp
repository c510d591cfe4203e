#include "procloop/process_tree.hpp"

#include "procloop/error.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <random>
#include <unordered_map>

namespace procloop {

namespace {

void sort_children(std::vector<ProcessTree>& v) {
    std::vector<std::pair<std::string, std::size_t>> keyed;
    keyed.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) keyed.emplace_back(v[i].to_string(), i);
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) {
                         // tau leads, the rest is lexicographic
                         bool ta = a.first == "tau", tb = b.first == "tau";
                         if (ta != tb) return ta;
                         return a.first < b.first;
                     });
    std::vector<ProcessTree> out;
    out.reserve(v.size());
    for (auto& [_, i] : keyed) out.push_back(v[i]);
    v = std::move(out);
}

std::vector<ProcessTree> flatten(ProcessTree::Kind kind, std::vector<ProcessTree> children) {
    std::vector<ProcessTree> out;
    for (auto& c : children) {
        if (c.kind() == kind) {
            for (const auto& g : c.children()) out.push_back(g);
        } else {
            out.push_back(std::move(c));
        }
    }
    return out;
}

}  // namespace

ProcessTree ProcessTree::leaf(std::string label) {
    if (label.empty() || label == "tau") throw Error(Errc::InvalidArgument, "bad leaf label '" + label + "'");
    return ProcessTree(Kind::Leaf, std::move(label), {});
}

ProcessTree ProcessTree::tau() { return ProcessTree(Kind::Tau, {}, {}); }

ProcessTree ProcessTree::sequence(std::vector<ProcessTree> children) {
    auto flat = flatten(Kind::Sequence, std::move(children));
    // tau is the unit of sequential composition
    std::erase_if(flat, [](const ProcessTree& t) { return t.kind() == Kind::Tau; });
    if (flat.empty()) return tau();
    if (flat.size() == 1) return flat.front();
    return ProcessTree(Kind::Sequence, {}, std::move(flat));
}

ProcessTree ProcessTree::exclusive(std::vector<ProcessTree> children) {
    auto flat = flatten(Kind::Exclusive, std::move(children));
    if (flat.empty()) throw Error(Errc::InvalidArgument, "xor needs children");
    sort_children(flat);
    flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
    if (flat.size() == 1) return flat.front();
    return ProcessTree(Kind::Exclusive, {}, std::move(flat));
}

ProcessTree ProcessTree::parallel(std::vector<ProcessTree> children) {
    auto flat = flatten(Kind::Parallel, std::move(children));
    std::erase_if(flat, [](const ProcessTree& t) { return t.kind() == Kind::Tau; });
    if (flat.empty()) return tau();
    if (flat.size() == 1) return flat.front();
    sort_children(flat);
    return ProcessTree(Kind::Parallel, {}, std::move(flat));
}

ProcessTree ProcessTree::loop(ProcessTree body, std::vector<ProcessTree> redos) {
    if (redos.empty()) throw Error(Errc::InvalidArgument, "loop needs at least one redo child");
    sort_children(redos);
    redos.erase(std::unique(redos.begin(), redos.end()), redos.end());
    std::vector<ProcessTree> kids;
    kids.reserve(redos.size() + 1);
    kids.push_back(std::move(body));
    for (auto& r : redos) kids.push_back(std::move(r));
    return ProcessTree(Kind::Loop, {}, std::move(kids));
}

std::set<std::string> ProcessTree::alphabet() const {
    std::set<std::string> out;
    if (kind_ == Kind::Leaf) out.insert(label_);
    for (const auto& c : children_) {
        auto sub = c.alphabet();
        out.insert(sub.begin(), sub.end());
    }
    return out;
}

std::size_t ProcessTree::leaf_count() const {
    if (kind_ == Kind::Leaf) return 1;
    std::size_t n = 0;
    for (const auto& c : children_) n += c.leaf_count();
    return n;
}

std::size_t ProcessTree::depth() const {
    std::size_t d = 0;
    for (const auto& c : children_) d = std::max(d, c.depth() + 1);
    return d;
}

std::string ProcessTree::to_string() const {
    switch (kind_) {
        case Kind::Leaf: return label_;
        case Kind::Tau: return "tau";
        default: break;
    }
    std::string out;
    switch (kind_) {
        case Kind::Sequence: out = "seq("; break;
        case Kind::Exclusive: out = "xor("; break;
        case Kind::Parallel: out = "and("; break;
        case Kind::Loop: out = "loop("; break;
        default: break;
    }
    for (std::size_t i = 0; i < children_.size(); ++i) {
        if (i) out += ", ";
        out += children_[i].to_string();
    }
    out += ')';
    return out;
}

bool operator==(const ProcessTree& a, const ProcessTree& b) {
    return a.kind_ == b.kind_ && a.label_ == b.label_ && a.children_ == b.children_;
}

// ---------------------------------------------------------------------------
// Text form

namespace {

class TreeParser {
public:
    explicit TreeParser(std::string_view text) : text_(text) {}

    ProcessTree parse() {
        auto t = node();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input");
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& msg) {
        throw Error(Errc::ParseError, "tree expression at offset " + std::to_string(pos_) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    std::string ident() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '(' || c == ')' || c == ',' || std::isspace(static_cast<unsigned char>(c))) break;
            ++pos_;
        }
        if (start == pos_) fail("expected a name");
        return std::string(text_.substr(start, pos_ - start));
    }

    ProcessTree node() {
        auto name = ident();
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            ++pos_;
            std::vector<ProcessTree> kids;
            while (true) {
                kids.push_back(node());
                skip_ws();
                if (pos_ >= text_.size()) fail("unterminated operator");
                if (text_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                if (text_[pos_] == ')') {
                    ++pos_;
                    break;
                }
                fail("expected ',' or ')'");
            }
            if (kids.size() < 2) fail("operator '" + name + "' needs at least two children");
            if (name == "seq") return ProcessTree::sequence(std::move(kids));
            if (name == "xor") return ProcessTree::exclusive(std::move(kids));
            if (name == "and") return ProcessTree::parallel(std::move(kids));
            if (name == "loop") {
                auto body = kids.front();
                kids.erase(kids.begin());
                return ProcessTree::loop(std::move(body), std::move(kids));
            }
            fail("unknown operator '" + name + "'");
        }
        if (name == "tau") return ProcessTree::tau();
        return ProcessTree::leaf(name);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

ProcessTree parse_tree(std::string_view text) { return TreeParser(text).parse(); }

// ---------------------------------------------------------------------------
// Membership via Brzozowski derivatives over a small regular-expression
// algebra with shuffle. Process-tree languages are regular, so the set of
// reachable residuals stays finite.

namespace {

struct Rx;
using RxPtr = std::shared_ptr<const Rx>;

struct Rx {
    enum K { Empty, Eps, Sym, Cat, Alt, Shuf, Star } k;
    std::string sym;
    std::vector<RxPtr> kids;
    std::string key;
    bool nullable = false;
};

RxPtr make(Rx::K k, std::string sym, std::vector<RxPtr> kids) {
    auto r = std::make_shared<Rx>();
    r->k = k;
    r->sym = std::move(sym);
    r->kids = std::move(kids);
    switch (k) {
        case Rx::Empty: r->key = "0"; r->nullable = false; break;
        case Rx::Eps: r->key = "1"; r->nullable = true; break;
        case Rx::Sym: r->key = "'" + r->sym; r->nullable = false; break;
        case Rx::Star: r->key = "*(" + r->kids[0]->key + ")"; r->nullable = true; break;
        default: {
            r->key = k == Rx::Cat ? "C(" : k == Rx::Alt ? "A(" : "S(";
            bool any = false, all = true;
            for (const auto& c : r->kids) {
                r->key += c->key;
                r->key += ',';
                any = any || c->nullable;
                all = all && c->nullable;
            }
            r->key += ')';
            r->nullable = k == Rx::Alt ? any : all;
        }
    }
    return r;
}

const RxPtr& rx_empty() {
    static const RxPtr e = make(Rx::Empty, {}, {});
    return e;
}
const RxPtr& rx_eps() {
    static const RxPtr e = make(Rx::Eps, {}, {});
    return e;
}

RxPtr rx_cat(std::vector<RxPtr> parts) {
    std::vector<RxPtr> flat;
    for (auto& p : parts) {
        if (p->k == Rx::Empty) return rx_empty();
        if (p->k == Rx::Eps) continue;
        if (p->k == Rx::Cat)
            flat.insert(flat.end(), p->kids.begin(), p->kids.end());
        else
            flat.push_back(std::move(p));
    }
    if (flat.empty()) return rx_eps();
    if (flat.size() == 1) return flat.front();
    return make(Rx::Cat, {}, std::move(flat));
}

RxPtr rx_alt(std::vector<RxPtr> parts) {
    std::map<std::string, RxPtr> uniq;
    for (auto& p : parts) {
        if (p->k == Rx::Empty) continue;
        if (p->k == Rx::Alt) {
            for (const auto& c : p->kids) uniq.emplace(c->key, c);
        } else {
            uniq.emplace(p->key, std::move(p));
        }
    }
    if (uniq.empty()) return rx_empty();
    if (uniq.size() == 1) return uniq.begin()->second;
    std::vector<RxPtr> kids;
    for (auto& [_, v] : uniq) kids.push_back(v);
    return make(Rx::Alt, {}, std::move(kids));
}

RxPtr rx_shuf(std::vector<RxPtr> parts) {
    std::vector<RxPtr> flat;
    for (auto& p : parts) {
        if (p->k == Rx::Empty) return rx_empty();
        if (p->k == Rx::Eps) continue;
        if (p->k == Rx::Shuf)
            flat.insert(flat.end(), p->kids.begin(), p->kids.end());
        else
            flat.push_back(std::move(p));
    }
    if (flat.empty()) return rx_eps();
    if (flat.size() == 1) return flat.front();
    std::sort(flat.begin(), flat.end(), [](const RxPtr& a, const RxPtr& b) { return a->key < b->key; });
    return make(Rx::Shuf, {}, std::move(flat));
}

RxPtr rx_star(RxPtr inner) {
    if (inner->k == Rx::Empty || inner->k == Rx::Eps) return rx_eps();
    if (inner->k == Rx::Star) return inner;
    return make(Rx::Star, {}, {std::move(inner)});
}

RxPtr to_rx(const ProcessTree& t) {
    using K = ProcessTree::Kind;
    std::vector<RxPtr> kids;
    for (const auto& c : t.children()) kids.push_back(to_rx(c));
    switch (t.kind()) {
        case K::Leaf: return make(Rx::Sym, t.label(), {});
        case K::Tau: return rx_eps();
        case K::Sequence: return rx_cat(std::move(kids));
        case K::Exclusive: return rx_alt(std::move(kids));
        case K::Parallel: return rx_shuf(std::move(kids));
        case K::Loop: {
            auto body = kids.front();
            std::vector<RxPtr> redos(kids.begin() + 1, kids.end());
            return rx_cat({body, rx_star(rx_cat({rx_alt(std::move(redos)), body}))});
        }
    }
    return rx_empty();
}

class Deriver {
public:
    RxPtr derive(const RxPtr& r, const std::string& a) {
        auto memo_key = r->key + '\x1f' + a;
        if (auto it = memo_.find(memo_key); it != memo_.end()) return it->second;
        RxPtr out;
        switch (r->k) {
            case Rx::Empty:
            case Rx::Eps: out = rx_empty(); break;
            case Rx::Sym: out = r->sym == a ? rx_eps() : rx_empty(); break;
            case Rx::Cat: {
                std::vector<RxPtr> rest(r->kids.begin() + 1, r->kids.end());
                auto tail = rx_cat(rest);
                std::vector<RxPtr> head{derive(r->kids[0], a)};
                head.insert(head.end(), rest.begin(), rest.end());
                std::vector<RxPtr> alts{rx_cat(std::move(head))};
                if (r->kids[0]->nullable) alts.push_back(derive(tail, a));
                out = rx_alt(std::move(alts));
                break;
            }
            case Rx::Alt: {
                std::vector<RxPtr> alts;
                for (const auto& c : r->kids) alts.push_back(derive(c, a));
                out = rx_alt(std::move(alts));
                break;
            }
            case Rx::Shuf: {
                std::vector<RxPtr> alts;
                for (std::size_t i = 0; i < r->kids.size(); ++i) {
                    auto parts = r->kids;
                    parts[i] = derive(r->kids[i], a);
                    alts.push_back(rx_shuf(std::move(parts)));
                }
                out = rx_alt(std::move(alts));
                break;
            }
            case Rx::Star: out = rx_cat({derive(r->kids[0], a), r}); break;
        }
        memo_.emplace(std::move(memo_key), out);
        return out;
    }

private:
    std::unordered_map<std::string, RxPtr> memo_;
};

}  // namespace

bool accepts(const ProcessTree& tree, const Trace& trace) {
    auto alphabet = tree.alphabet();
    for (const auto& a : trace)
        if (!alphabet.count(a)) return false;
    Deriver d;
    auto state = to_rx(tree);
    for (const auto& a : trace) {
        state = d.derive(state, a);
        if (state->k == Rx::Empty) return false;
    }
    return state->nullable;
}

// ---------------------------------------------------------------------------
// Bounded language

namespace {

struct Enumerator {
    std::size_t max_len;
    std::size_t budget;
    std::size_t produced = 0;

    void charge(std::size_t n) {
        produced += n;
        if (produced > budget)
            throw Error(Errc::DepthExceeded, "language enumeration exceeded " + std::to_string(budget) + " traces");
    }

    std::set<Trace> concat(const std::set<Trace>& a, const std::set<Trace>& b) {
        std::set<Trace> out;
        for (const auto& x : a)
            for (const auto& y : b) {
                if (x.size() + y.size() > max_len) continue;
                Trace t = x;
                t.insert(t.end(), y.begin(), y.end());
                out.insert(std::move(t));
            }
        charge(out.size());
        return out;
    }

    static void interleave(const Trace& x, std::size_t i, const Trace& y, std::size_t j, Trace& cur,
                           std::set<Trace>& out) {
        if (i == x.size() && j == y.size()) {
            out.insert(cur);
            return;
        }
        if (i < x.size()) {
            cur.push_back(x[i]);
            interleave(x, i + 1, y, j, cur, out);
            cur.pop_back();
        }
        if (j < y.size()) {
            cur.push_back(y[j]);
            interleave(x, i, y, j + 1, cur, out);
            cur.pop_back();
        }
    }

    std::set<Trace> shuffle(const std::set<Trace>& a, const std::set<Trace>& b) {
        std::set<Trace> out;
        Trace cur;
        for (const auto& x : a)
            for (const auto& y : b) {
                if (x.size() + y.size() > max_len) continue;
                interleave(x, 0, y, 0, cur, out);
                charge(0);
            }
        charge(out.size());
        return out;
    }

    std::set<Trace> run(const ProcessTree& t) {
        using K = ProcessTree::Kind;
        switch (t.kind()) {
            case K::Leaf:
                if (max_len == 0) return {};
                return {Trace{t.label()}};
            case K::Tau: return {Trace{}};
            case K::Sequence: {
                std::set<Trace> acc{Trace{}};
                for (const auto& c : t.children()) acc = concat(acc, run(c));
                return acc;
            }
            case K::Exclusive: {
                std::set<Trace> acc;
                for (const auto& c : t.children()) {
                    auto sub = run(c);
                    acc.insert(sub.begin(), sub.end());
                }
                charge(acc.size());
                return acc;
            }
            case K::Parallel: {
                std::set<Trace> acc{Trace{}};
                for (const auto& c : t.children()) acc = shuffle(acc, run(c));
                return acc;
            }
            case K::Loop: {
                auto body = run(t.children().front());
                std::set<Trace> redo;
                for (std::size_t i = 1; i < t.children().size(); ++i) {
                    auto sub = run(t.children()[i]);
                    redo.insert(sub.begin(), sub.end());
                }
                auto step = concat(redo, body);
                std::set<Trace> result = body;
                std::set<Trace> frontier = body;
                while (!frontier.empty()) {
                    std::set<Trace> next;
                    for (const auto& t2 : concat(frontier, step))
                        if (!result.count(t2)) next.insert(t2);
                    result.insert(next.begin(), next.end());
                    frontier = std::move(next);
                }
                return result;
            }
        }
        return {};
    }
};

}  // namespace

std::set<Trace> enumerate_language(const ProcessTree& tree, std::size_t max_len, std::size_t node_budget) {
    if (max_len > 12) throw Error(Errc::InvalidArgument, "max_len must not exceed 12");
    Enumerator e{max_len, node_budget};
    return e.run(tree);
}

namespace {

Trace play_out(const ProcessTree& t, std::mt19937_64& rng, double repeat_p, std::size_t max_repeats) {
    using K = ProcessTree::Kind;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto& kids = t.children();
    switch (t.kind()) {
        case K::Leaf: return {t.label()};
        case K::Tau: return {};
        case K::Sequence: {
            Trace out;
            for (const auto& c : kids) {
                auto part = play_out(c, rng, repeat_p, max_repeats);
                out.insert(out.end(), part.begin(), part.end());
            }
            return out;
        }
        case K::Exclusive:
            return play_out(kids[std::uniform_int_distribution<std::size_t>(0, kids.size() - 1)(rng)], rng,
                            repeat_p, max_repeats);
        case K::Parallel: {
            std::vector<Trace> parts;
            std::size_t total = 0;
            for (const auto& c : kids) {
                parts.push_back(play_out(c, rng, repeat_p, max_repeats));
                total += parts.back().size();
            }
            // Uniform random interleaving: pick the next source weighted by
            // its remaining length.
            std::vector<std::size_t> pos(parts.size(), 0);
            Trace out;
            for (; total > 0; --total) {
                auto r = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
                for (std::size_t i = 0; i < parts.size(); ++i) {
                    auto left = parts[i].size() - pos[i];
                    if (r < left) {
                        out.push_back(parts[i][pos[i]++]);
                        break;
                    }
                    r -= left;
                }
            }
            return out;
        }
        case K::Loop: {
            Trace out = play_out(kids[0], rng, repeat_p, max_repeats);
            for (std::size_t n = 0; n < max_repeats && unit(rng) < repeat_p; ++n) {
                auto redo = play_out(kids[1 + std::uniform_int_distribution<std::size_t>(0, kids.size() - 2)(rng)], rng,
                                     repeat_p, max_repeats);
                auto body = play_out(kids[0], rng, repeat_p, max_repeats);
                out.insert(out.end(), redo.begin(), redo.end());
                out.insert(out.end(), body.begin(), body.end());
            }
            return out;
        }
    }
    return {};
}

}  // namespace

Trace sample_trace(const ProcessTree& tree, std::mt19937_64& rng, double repeat_p, std::size_t max_repeats) {
    return play_out(tree, rng, repeat_p, max_repeats);
}

}  // namespace procloop
