#include <doctest.h>

#include <algorithm>
#include <set>

#include "treeball/io.hpp"
#include "treeball/tasks.hpp"

using namespace treeball;
using namespace treeball::tasks;

namespace {

std::vector<std::string> op_texts(const ProblemInstance& inst, const State& s) {
    std::vector<std::string> out;
    for (const Operation& op : admissible_ops(inst, s)) out.push_back(op.text);
    return out;
}

}  // namespace

TEST_CASE("rational arithmetic is exact") {
    Rational a(1, 3), b(1, 6);
    CHECK((a + b) == Rational(1, 2));
    CHECK((a - b) == Rational(1, 6));
    CHECK((a * b) == Rational(1, 18));
    CHECK((a / b) == Rational(2));
    CHECK(Rational(-4, -6) == Rational(2, 3));
    CHECK(Rational(4, -6).str() == "-2/3");
    CHECK_THROWS_AS(Rational(1) / Rational(0), std::domain_error);
    CHECK(Rational(1, 4) < Rational(1, 3));
}

TEST_CASE("g24: 1 4 4 12 solves with the canonical trace") {
    ProblemInstance inst = make_g24_instance({1, 4, 4, 12}, 24);
    Trace t = reference_solver(inst);
    CHECK(t.success);
    REQUIRE(t.ops.size() == 3);
    CHECK(t.ops[0].text == "1 - 4 = -3");
    CHECK(t.ops[1].text == "-3 * 4 = -12");
    CHECK(t.ops[2].text == "12 - (-12) = 24");
    CHECK(inst.answer_label == "1 - 4 = -3\n-3 * 4 = -12\n12 - (-12) = 24");
}

TEST_CASE("g24: admissible set of {2,12} contains the winning product") {
    ProblemInstance inst = make_g24_instance({1, 1, 2, 12}, 24);
    G24State s;
    s.pool = {Rational(2), Rational(12)};
    const auto texts = op_texts(inst, State{s});
    CHECK(std::find(texts.begin(), texts.end(), "2 * 12 = 24") != texts.end());
    CHECK(std::is_sorted(texts.begin(), texts.end()));
}

TEST_CASE("g24: transition from {4,4,6,8} via 4 + 8 = 12") {
    ProblemInstance inst = make_g24_instance({4, 4, 6, 8}, 24);
    Operation op;
    op.data = G24Op{Rational(4), Rational(8), Rational(12), '+'};
    op.text = "4 + 8 = 12";
    const State child = apply(inst, inst.init_state, op);
    const auto& pool = std::get<G24State>(child).pool;
    REQUIRE(pool.size() == 3);
    CHECK(pool[0] == Rational(4));
    CHECK(pool[1] == Rational(6));
    CHECK(pool[2] == Rational(12));
}

TEST_CASE("g24: inadmissible operand raises") {
    ProblemInstance inst = make_g24_instance({1, 4, 4, 12}, 24);
    Operation op;
    op.data = G24Op{Rational(4), Rational(8), Rational(12), '+'};
    op.text = "4 + 8 = 12";
    CHECK_THROWS_AS(apply(inst, inst.init_state, op), std::invalid_argument);
}

TEST_CASE("g24: goal test") {
    ProblemInstance inst = make_g24_instance({1, 4, 4, 12}, 24);
    G24State win;
    win.pool = {Rational(24)};
    CHECK(is_goal(inst, State{win}));
    G24State lose;
    lose.pool = {Rational(23)};
    CHECK_FALSE(is_goal(inst, State{lose}));
    // Terminal states admit no operations.
    CHECK(admissible_ops(inst, State{win}).empty());
}

TEST_CASE("nq: prefix [1,4,7,3] on a 7-board extends to the canonical solution") {
    ProblemInstance inst = make_nq_instance(7, {1, 4, 7, 3});
    Trace t = reference_solver(inst);
    CHECK(t.success);
    const auto& cols = std::get<NqState>(t.states.back()).cols;
    CHECK(cols == std::vector<int>{1, 4, 7, 3, 6, 2, 5});
}

TEST_CASE("nq: full board is terminal; 8-queens solves from scratch") {
    ProblemInstance inst = make_nq_instance(8, {});
    Trace t = reference_solver(inst);
    CHECK(t.success);
    const auto& cols = std::get<NqState>(t.states.back()).cols;
    REQUIRE(cols.size() == 8);
    CHECK(is_goal(inst, t.states.back()));
    CHECK(admissible_ops(inst, t.states.back()).empty());
}

TEST_CASE("gc: the six-vertex example coloring satisfies the goal") {
    const std::vector<std::pair<int, int>> edges = {{0, 1}, {0, 4}, {0, 5}, {1, 2}, {1, 4},
                                                    {2, 3}, {2, 5}, {3, 4}, {3, 5}, {4, 5}};
    ProblemInstance inst = make_gc_instance(6, edges);
    GcState s;
    s.colors = {0, 1, 2, 0, 2, 1};  // R G B R B G
    CHECK(is_goal(inst, State{s}));
    CHECK(admissible_ops(inst, State{s}).empty());
    GcState partial;
    partial.colors = {0, 1, -1, -1, -1, -1};
    const auto texts = op_texts(inst, State{partial});
    CHECK(std::find(texts.begin(), texts.end(), "V2 = B") != texts.end());
    // V2 is adjacent to V1=G, so G is not offered.
    CHECK(std::find(texts.begin(), texts.end(), "V2 = G") == texts.end());
}

TEST_CASE("bw: the four-block example yields an 8-step plan starting with the unstack") {
    // yellow on blue; red, blue, orange on the table; goal red-on-yellow,
    // blue-on-orange, yellow-on-blue.
    ProblemInstance inst = make_bw_instance({"red", "blue", "orange", "yellow"},
                                            {-1, -1, -1, 1}, {{0, 3}, {1, 2}, {3, 1}});
    Trace t = reference_solver(inst);
    CHECK(t.success);
    CHECK(t.ops.size() == 8);
    CHECK(t.ops[0].text == "unstack yellow from blue");
    CHECK(is_goal(inst, t.states.back()));
}

TEST_CASE("bw: transitions respect preconditions") {
    ProblemInstance inst = make_bw_instance({"red", "blue", "orange", "yellow"},
                                            {-1, -1, -1, 1}, {{0, 3}});
    Operation bad;
    bad.data = BwOp{BwAction::PickUp, 1};  // blue is under yellow: not clear
    bad.text = "pick up blue";
    CHECK_THROWS_AS(apply(inst, inst.init_state, bad), std::invalid_argument);
    Operation ok;
    ok.data = BwOp{BwAction::Unstack, 3, 1};
    ok.text = "unstack yellow from blue";
    const State next = apply(inst, inst.init_state, ok);
    CHECK(std::get<BwState>(next).holding == 3);
}

TEST_CASE("rc: the appendix example derives p14 in two steps") {
    std::vector<RcRule> rules = {
        {{2}, 9, ""},  {{9}, 14, ""}, {{7}, 5, ""},   {{5}, 9, ""},
        {{13, 8}, 3, ""}, {{10}, 11, ""}, {{11}, 12, ""}, {{6}, 1, ""},
    };
    const uint32_t facts = (1u << 10) | (1u << 2) | (1u << 3) | (1u << 6);
    ProblemInstance inst = make_rc_instance(rules, facts, 14, 2);
    Trace t = reference_solver(inst);
    CHECK(t.success);
    REQUIRE(t.ops.size() == 2);
    CHECK(t.ops[0].text == "if p2 then p9");
    CHECK(t.ops[1].text == "if p9 then p14");
    // Applying the first rule gains exactly p9.
    const State s1 = apply(inst, inst.init_state, t.ops[0]);
    CHECK(std::get<RcState>(s1).facts == (facts | (1u << 9)));
    // A state containing p14 satisfies the goal.
    RcState done;
    done.facts = facts | (1u << 14);
    CHECK(is_goal(inst, State{done}));
}

TEST_CASE("featurize: dimensions, determinism, discrimination") {
    ProblemInstance g = make_g24_instance({1, 4, 4, 12}, 24);
    const Vec f = featurize(g, g.init_state);
    CHECK(static_cast<int>(f.size()) == feature_dim(TaskId::G24));
    CHECK(f == featurize(g, g.init_state));
    G24State other;
    other.pool = {Rational(1), Rational(4), Rational(4), Rational(11)};
    CHECK(featurize(g, State{other}) != f);

    ProblemInstance rc = make_rc_instance({{{2}, 9, ""}, {{9}, 14, ""}}, (1u << 2), 14, 2);
    const Vec rf = featurize(rc, rc.init_state);
    CHECK(static_cast<int>(rf.size()) == 32);
    CHECK(rf[2] == 1.0);       // fact p2
    CHECK(rf[16 + 14] == 1.0);  // goal one-hot

    ProblemInstance nq = make_nq_instance(7, {1, 4});
    CHECK(static_cast<int>(featurize(nq, nq.init_state).size()) ==
          feature_dim(TaskId::NQueens));
}

TEST_CASE("op features have fixed dimensions") {
    ProblemInstance g = make_g24_instance({1, 4, 4, 12}, 24);
    for (const Operation& op : admissible_ops(g, g.init_state))
        CHECK(static_cast<int>(op_features(g, op).size()) == op_feature_dim(TaskId::G24));
}

TEST_CASE("generation is deterministic and instances are solvable") {
    for (TaskId task : {TaskId::G24, TaskId::NQueens, TaskId::GraphColoring,
                        TaskId::Blocksworld, TaskId::RuleChain}) {
        const Params params = default_params(task);
        for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            const ProblemInstance a = generate_instance(task, params, seed);
            const ProblemInstance b = generate_instance(task, params, seed);
            CHECK(io::instance_to_json(a).dump() == io::instance_to_json(b).dump());
            const Trace t = reference_solver(a);
            CHECK(t.success);
            CHECK(render_answer(t) == a.answer_label);
        }
    }
}

TEST_CASE("generated blocksworld plans meet the minimum length") {
    const Params params = default_params(TaskId::Blocksworld);
    for (uint64_t seed = 10; seed < 16; ++seed) {
        const ProblemInstance inst = generate_instance(TaskId::Blocksworld, params, seed);
        const auto steps = std::count(inst.answer_label.begin(), inst.answer_label.end(),
                                      '\n') +
                           1;
        CHECK(steps >= 3);
    }
}

TEST_CASE("generated rule chains use the advertised number of steps") {
    const Params params = default_params(TaskId::RuleChain);
    for (uint64_t seed = 20; seed < 30; ++seed) {
        const ProblemInstance inst = generate_instance(TaskId::RuleChain, params, seed);
        const auto& d = std::get<RcData>(inst.data);
        const auto steps =
            std::count(inst.answer_label.begin(), inst.answer_label.end(), '\n') + 1;
        CHECK(steps == d.n_steps);
        CHECK(static_cast<int>(d.rules.size()) == 18);
    }
}

TEST_CASE("instance JSON round trip is the identity") {
    for (TaskId task : {TaskId::G24, TaskId::NQueens, TaskId::GraphColoring,
                        TaskId::Blocksworld, TaskId::RuleChain}) {
        const ProblemInstance a = generate_instance(task, default_params(task), 77);
        const io::Json j = io::instance_to_json(a);
        const ProblemInstance b = io::instance_from_json(j);
        CHECK(io::instance_to_json(b).dump() == j.dump());
    }
}

TEST_CASE("apply/admissible closure: children are well-formed") {
    for (TaskId task : {TaskId::G24, TaskId::GraphColoring, TaskId::RuleChain}) {
        const ProblemInstance inst = generate_instance(task, default_params(task), 5);
        for (const Operation& op : admissible_ops(inst, inst.init_state)) {
            const State child = apply(inst, inst.init_state, op);
            CHECK_NOTHROW(admissible_ops(inst, child));
        }
    }
}
