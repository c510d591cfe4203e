#include "procloop/bpmn.hpp"

#include "procloop/error.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace procloop {

const BpmnNode& BpmnModel::add_node(BpmnKind kind, std::string label) {
    return add_node("n" + std::to_string(nodes_.size()), kind, std::move(label));
}

const BpmnNode& BpmnModel::add_node(std::string id, BpmnKind kind, std::string label) {
    if (node(id)) throw Error(Errc::InvalidArgument, "duplicate BPMN id '" + id + "'");
    nodes_.push_back(BpmnNode{std::move(id), kind, std::move(label)});
    return nodes_.back();
}

void BpmnModel::add_flow(const std::string& source, const std::string& target) {
    flows_.push_back(SequenceFlow{source, target});
}

const BpmnNode* BpmnModel::node(std::string_view id) const {
    for (const auto& n : nodes_)
        if (n.id == id) return &n;
    return nullptr;
}

std::vector<std::string> BpmnModel::successors(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& f : flows_)
        if (f.source == id) out.push_back(f.target);
    return out;
}

std::vector<std::string> BpmnModel::predecessors(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& f : flows_)
        if (f.target == id) out.push_back(f.source);
    return out;
}

const BpmnNode& BpmnModel::start_event() const {
    for (const auto& n : nodes_)
        if (n.kind == BpmnKind::StartEvent) return n;
    throw Error(Errc::UnstructuredModel, "model has no start event");
}

const BpmnNode& BpmnModel::end_event() const {
    for (const auto& n : nodes_)
        if (n.kind == BpmnKind::EndEvent) return n;
    throw Error(Errc::UnstructuredModel, "model has no end event");
}

void BpmnModel::validate() const {
    std::size_t starts = 0, ends = 0;
    for (const auto& n : nodes_) {
        starts += n.kind == BpmnKind::StartEvent;
        ends += n.kind == BpmnKind::EndEvent;
    }
    if (starts != 1 || ends != 1) throw Error(Errc::UnstructuredModel, "need exactly one start and one end event");
    for (const auto& f : flows_)
        if (!node(f.source) || !node(f.target))
            throw Error(Errc::UnstructuredModel, "flow " + f.source + " -> " + f.target + " references a missing node");
    for (const auto& n : nodes_) {
        auto in = predecessors(n.id).size();
        auto out = successors(n.id).size();
        if (n.kind == BpmnKind::StartEvent && (in != 0 || out != 1))
            throw Error(Errc::UnstructuredModel, "start event must have no incoming and one outgoing flow");
        if (n.kind == BpmnKind::EndEvent && (out != 0 || in != 1))
            throw Error(Errc::UnstructuredModel, "end event must have one incoming and no outgoing flow");
        if (n.kind == BpmnKind::Task && (in != 1 || out != 1))
            throw Error(Errc::UnstructuredModel, "task " + n.id + " must have one incoming and one outgoing flow");
        if (n.kind == BpmnKind::Task && n.label.empty())
            throw Error(Errc::UnstructuredModel, "task " + n.id + " has no name");
    }
    auto reach = [&](const std::string& from, bool forward) {
        std::set<std::string> seen{from};
        std::queue<std::string> q;
        q.push(from);
        while (!q.empty()) {
            auto cur = q.front();
            q.pop();
            for (const auto& nx : forward ? successors(cur) : predecessors(cur))
                if (seen.insert(nx).second) q.push(nx);
        }
        return seen;
    };
    auto fwd = reach(start_event().id, true);
    auto bwd = reach(end_event().id, false);
    for (const auto& n : nodes_)
        if (!fwd.count(n.id) || !bwd.count(n.id))
            throw Error(Errc::UnstructuredModel, "node " + n.id + " is not on a start-to-end path");
}

bool operator==(const BpmnModel& a, const BpmnModel& b) {
    auto sorted_nodes = [](const BpmnModel& m) {
        auto v = m.nodes_;
        std::sort(v.begin(), v.end(), [](const BpmnNode& x, const BpmnNode& y) { return x.id < y.id; });
        return v;
    };
    auto flow_set = [](const BpmnModel& m) { return std::multiset<SequenceFlow>(m.flows_.begin(), m.flows_.end()); };
    return sorted_nodes(a) == sorted_nodes(b) && flow_set(a) == flow_set(b);
}

namespace {

class TreeTranslator {
public:
    BpmnModel model;

    // Appends the fragment for `t` after node `from`; returns the node the
    // next flow leaves from.
    std::string translate(const ProcessTree& t, const std::string& from) {
        using K = ProcessTree::Kind;
        switch (t.kind()) {
            case K::Tau: return from;
            case K::Leaf: {
                auto id = model.add_node(BpmnKind::Task, t.label()).id;
                model.add_flow(from, id);
                return id;
            }
            case K::Sequence: {
                auto cur = from;
                for (const auto& c : t.children()) cur = translate(c, cur);
                return cur;
            }
            case K::Exclusive:
            case K::Parallel: {
                auto kind = t.kind() == K::Exclusive ? BpmnKind::ExclusiveGateway : BpmnKind::ParallelGateway;
                auto split = model.add_node(kind).id;
                model.add_flow(from, split);
                std::vector<std::string> exits;
                for (const auto& c : t.children()) exits.push_back(translate(c, split));
                auto join = model.add_node(kind).id;
                for (const auto& e : exits) model.add_flow(e, join);
                return join;
            }
            case K::Loop: {
                auto entry = model.add_node(BpmnKind::ExclusiveGateway).id;
                model.add_flow(from, entry);
                auto body_exit = translate(t.children().front(), entry);
                auto exit = model.add_node(BpmnKind::ExclusiveGateway).id;
                model.add_flow(body_exit, exit);
                for (std::size_t i = 1; i < t.children().size(); ++i) {
                    auto redo_exit = translate(t.children()[i], exit);
                    model.add_flow(redo_exit, entry);
                }
                return exit;
            }
        }
        return from;
    }
};

}  // namespace

BpmnModel tree_to_bpmn(const ProcessTree& tree) {
    TreeTranslator tr;
    auto start = tr.model.add_node(BpmnKind::StartEvent).id;
    auto last = tr.translate(tree, start);
    auto end = tr.model.add_node(BpmnKind::EndEvent).id;
    tr.model.add_flow(last, end);
    return std::move(tr.model);
}

ElementCounts count_elements(const BpmnModel& model) {
    ElementCounts c;
    for (const auto& n : model.nodes()) {
        if (n.kind == BpmnKind::Task) ++c.tasks;
        if (n.kind == BpmnKind::ParallelGateway) ++c.parallel_gateways;
        if (n.kind == BpmnKind::ExclusiveGateway) ++c.exclusive_gateways;
    }
    return c;
}

namespace {

// n12 sorts after n2.
bool id_less(const std::string& a, const std::string& b) {
    auto num = [](const std::string& s) -> long long {
        if (s.size() < 2) return -1;
        long long v = 0;
        auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), v);
        return ec == std::errc() && p == s.data() + s.size() ? v : -1;
    };
    auto na = num(a), nb = num(b);
    if (na >= 0 && nb >= 0 && a[0] == b[0]) return na < nb;
    return a < b;
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string_view xml_tag(BpmnKind k) {
    switch (k) {
        case BpmnKind::StartEvent: return "startEvent";
        case BpmnKind::EndEvent: return "endEvent";
        case BpmnKind::Task: return "task";
        case BpmnKind::ExclusiveGateway: return "exclusiveGateway";
        case BpmnKind::ParallelGateway: return "parallelGateway";
    }
    return "";
}

}  // namespace

std::string export_dot(const BpmnModel& model) {
    auto nodes = model.nodes();
    std::sort(nodes.begin(), nodes.end(), [](const BpmnNode& a, const BpmnNode& b) { return id_less(a.id, b.id); });
    auto flows = model.flows();
    std::sort(flows.begin(), flows.end(), [](const SequenceFlow& a, const SequenceFlow& b) {
        if (a.source != b.source) return id_less(a.source, b.source);
        return id_less(a.target, b.target);
    });

    std::ostringstream os;
    os << "digraph bpmn {\n  rankdir=LR;\n";
    for (const auto& n : nodes) {
        os << "  " << n.id << " [";
        switch (n.kind) {
            case BpmnKind::StartEvent: os << "shape=circle, label=\"\""; break;
            case BpmnKind::EndEvent: os << "shape=doublecircle, label=\"\""; break;
            case BpmnKind::Task: os << "shape=box, style=rounded, label=" << quoted(n.label); break;
            case BpmnKind::ExclusiveGateway: os << "shape=diamond, label=\"X\""; break;
            case BpmnKind::ParallelGateway: os << "shape=diamond, label=\"+\""; break;
        }
        os << "];\n";
    }
    for (const auto& f : flows) os << "  " << f.source << " -> " << f.target << ";\n";
    os << "}\n";
    return os.str();
}

std::string export_xml(const BpmnModel& model) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<definitions xmlns=\"http://www.omg.org/spec/BPMN/20100524/MODEL\" id=\"definitions\" "
          "targetNamespace=\"urn:procloop\">\n";
    os << "  <process id=\"process\" isExecutable=\"false\">\n";
    for (const auto& n : model.nodes()) {
        os << "    <" << xml_tag(n.kind) << " id=\"" << xml_escape(n.id) << "\"";
        if (n.kind == BpmnKind::Task) os << " name=\"" << xml_escape(n.label) << "\"";
        os << "/>\n";
    }
    std::size_t i = 0;
    for (const auto& f : model.flows()) {
        os << "    <sequenceFlow id=\"f" << i++ << "\" sourceRef=\"" << xml_escape(f.source) << "\" targetRef=\""
           << xml_escape(f.target) << "\"/>\n";
    }
    os << "  </process>\n</definitions>\n";
    return os.str();
}

BpmnModel parse_xml(std::string_view xml) {
    namespace pt = boost::property_tree;
    pt::ptree doc;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw Error(Errc::ParseError, std::string("bpmn xml: ") + e.what());
    }
    auto defs = doc.get_child_optional("definitions");
    if (!defs) throw Error(Errc::ParseError, "bpmn xml: missing <definitions>");
    auto proc = defs->get_child_optional("process");
    if (!proc) throw Error(Errc::ParseError, "bpmn xml: missing <process>");

    static const std::map<std::string, BpmnKind> kinds = {
        {"startEvent", BpmnKind::StartEvent},
        {"endEvent", BpmnKind::EndEvent},
        {"task", BpmnKind::Task},
        {"exclusiveGateway", BpmnKind::ExclusiveGateway},
        {"parallelGateway", BpmnKind::ParallelGateway},
    };

    BpmnModel model;
    std::vector<SequenceFlow> flows;
    for (const auto& [tag, child] : *proc) {
        if (tag == "<xmlattr>") continue;
        auto id = child.get_optional<std::string>("<xmlattr>.id");
        if (!id || id->empty()) throw Error(Errc::ParseError, "bpmn xml: <" + tag + "> without id");
        if (tag == "sequenceFlow") {
            auto src = child.get_optional<std::string>("<xmlattr>.sourceRef");
            auto dst = child.get_optional<std::string>("<xmlattr>.targetRef");
            if (!src || !dst) throw Error(Errc::ParseError, "bpmn xml: flow " + *id + " lacks sourceRef/targetRef");
            flows.push_back({*src, *dst});
            continue;
        }
        auto k = kinds.find(tag);
        if (k == kinds.end()) throw Error(Errc::ParseError, "bpmn xml: unsupported element <" + tag + ">");
        std::string label = k->second == BpmnKind::Task ? child.get<std::string>("<xmlattr>.name", "") : "";
        try {
            model.add_node(*id, k->second, std::move(label));
        } catch (const Error& e) {
            throw Error(Errc::ParseError, std::string("bpmn xml: ") + e.what());
        }
    }
    for (const auto& f : flows) model.add_flow(f.source, f.target);
    try {
        model.validate();
    } catch (const Error& e) {
        throw Error(Errc::ParseError, std::string("bpmn xml: ") + e.what());
    }
    return model;
}

}  // namespace procloop
