#include "procloop/bpmn.hpp"
#include "procloop/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace procloop;

namespace {

std::string read_golden(const std::string& name) {
    std::ifstream in(std::string(PROCLOOP_GOLDEN_DIR) + "/" + name, std::ios::binary);
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t count_of(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("element counts of small trees") {
    CHECK(count_elements(tree_to_bpmn(parse_tree("A"))) == ElementCounts{1, 0, 0});
    CHECK(count_elements(tree_to_bpmn(parse_tree("seq(D, xor(tau, R), C, T)"))) == ElementCounts{4, 0, 2});
    CHECK(count_elements(tree_to_bpmn(parse_tree("and(A, B)"))) == ElementCounts{2, 2, 0});
    CHECK(count_elements(tree_to_bpmn(parse_tree("loop(A, B)"))) == ElementCounts{2, 0, 2});
    CHECK(count_elements(tree_to_bpmn(parse_tree("tau"))) == ElementCounts{0, 0, 0});
}

TEST_CASE("leaf model shape") {
    auto m = tree_to_bpmn(parse_tree("A"));
    CHECK(m.nodes().size() == 3);
    CHECK(m.flows().size() == 2);
    CHECK(m.start_event().id == "n0");
    CHECK_NOTHROW(m.validate());
    auto dot = export_dot(m);
    CHECK(count_of(dot, "->") == 2);
    CHECK(dot == export_dot(tree_to_bpmn(parse_tree("A"))));
    auto xml = export_xml(m);
    CHECK(count_of(xml, "<task ") == 1);
}

TEST_CASE("worked model dot matches the frozen golden") {
    CHECK(export_dot(tree_to_bpmn(parse_tree("seq(D, xor(tau, R), C, T)"))) == read_golden("worked_model.dot"));
}

TEST_CASE("loop model contains a back edge") {
    auto m = tree_to_bpmn(parse_tree("seq(A, loop(B, C), D)"));
    auto xml = export_xml(m);
    CHECK(count_of(xml, "<sequenceFlow ") == m.flows().size());
    // The redo task C flows back to a gateway from which B is reachable.
    auto reaches = [&](const std::string& from, const std::string& label) {
        std::vector<std::string> stack{from};
        std::set<std::string> seen;
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            if (!seen.insert(v).second) continue;
            if (m.node(v)->label == label) return true;
            for (const auto& w : m.successors(v)) stack.push_back(w);
        }
        return false;
    };
    std::string redo, body;
    for (const auto& n : m.nodes()) {
        if (n.label == "C") redo = n.id;
        if (n.label == "B") body = n.id;
    }
    auto after_redo = m.successors(redo);
    REQUIRE(after_redo.size() == 1);
    CHECK(m.node(after_redo.front())->kind == BpmnKind::ExclusiveGateway);
    CHECK(reaches(after_redo.front(), "B"));
    CHECK(reaches(body, "C"));
}

TEST_CASE("properties over random trees") {
    test::TreeGenerator gen(77);
    for (int i = 0; i < 60; ++i) {
        auto tree = gen.next();
        auto m = tree_to_bpmn(tree);
        CHECK_NOTHROW(m.validate());
        auto c = count_elements(m);
        CHECK(c.tasks == tree.leaf_count());
        CHECK(c.exclusive_gateways % 2 == 0);
        CHECK(c.parallel_gateways % 2 == 0);
        // Language preservation against the token game.
        CHECK_MESSAGE(test::bpmn_language(m, 7) == enumerate_language(tree, 7), tree.to_string());
        // XML round trip.
        CHECK(parse_xml(export_xml(m)) == m);
        CHECK(export_dot(m) == export_dot(tree_to_bpmn(tree)));
    }
}

TEST_CASE("token game on hand-picked operators") {
    for (auto text : {"seq(D, xor(tau, R), C, T)", "and(A, seq(B, C))", "loop(A, B, C)", "loop(tau, A)",
                      "xor(tau, loop(seq(A, B), C))", "and(xor(tau, A), B)"}) {
        auto tree = parse_tree(text);
        CHECK_MESSAGE(test::bpmn_language(tree_to_bpmn(tree), 6) == enumerate_language(tree, 6), text);
    }
}

TEST_CASE("xml parse rejects malformed input") {
    auto bad = [](const std::string& xml) {
        try {
            parse_xml(xml);
        } catch (const Error& e) {
            return e.code() == Errc::ParseError;
        }
        return false;
    };
    CHECK(bad("not xml"));
    CHECK(bad("<definitions/>"));
    CHECK(bad(R"(<definitions><process><startEvent id="a"/><sequenceFlow id="f" sourceRef="a" targetRef="zz"/></process></definitions>)"));
    CHECK(bad(R"(<definitions><process><startEvent id="a"/><startEvent id="a"/></process></definitions>)"));
}
