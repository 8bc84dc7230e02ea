#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "treeball/common.hpp"

namespace treeball::tasks {

enum class TaskId { G24, NQueens, GraphColoring, Blocksworld, RuleChain };

const char* task_name(TaskId t);
TaskId task_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Exact rational arithmetic (Game of 24 pools must test division exactly).

struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n);  // NOLINT(google-explicit-constructor)
    Rational(long long n, long long d);

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator/(const Rational& o) const;  // throws on zero divisor
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator<(const Rational& o) const;
    bool is_zero() const { return num == 0; }
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;  // "n" or "n/d"
};

// ---------------------------------------------------------------------------
// Canonical states.

struct G24State {
    std::vector<Rational> pool;  // sorted ascending
    bool operator==(const G24State& o) const { return pool == o.pool; }
};

struct NqState {
    std::vector<int> cols;  // 1-based column per filled row
    bool operator==(const NqState& o) const { return cols == o.cols; }
};

struct GcState {
    std::vector<int> colors;  // -1 uncolored, otherwise 0..k-1; filled in index order
    bool operator==(const GcState& o) const { return colors == o.colors; }
};

struct BwState {
    // under[b]: -1 table, -2 in hand, otherwise index of the block b rests on.
    std::vector<int> under;
    int holding = -1;  // block in hand or -1
    bool operator==(const BwState& o) const {
        return under == o.under && holding == o.holding;
    }
};

struct RcState {
    uint32_t facts = 0;  // bitset over predicates p0..p15
    bool operator==(const RcState& o) const { return facts == o.facts; }
};

using State = std::variant<G24State, NqState, GcState, BwState, RcState>;

bool states_equal(const State& a, const State& b);

// ---------------------------------------------------------------------------
// Operations. `text` is the canonical rendering; admissible lists are sorted
// by it (byte order) and renderings are unique within a state's list.

struct G24Op {
    Rational a, b, result;
    char op;  // '+', '-', '*', '/'
};
struct NqOp {
    int row, col;  // 1-based
};
struct GcOp {
    int vertex, color;
};
enum class BwAction { PickUp, PutDown, Stack, Unstack };
struct BwOp {
    BwAction action;
    int block;
    int other = -1;  // stack target / unstack source
};
struct RcOp {
    int rule_index;
};

using OpData = std::variant<G24Op, NqOp, GcOp, BwOp, RcOp>;

struct Operation {
    OpData data;
    std::string text;
};

// ---------------------------------------------------------------------------
// Generator parameters (documented ranges from the task recipes).

struct G24Params {
    int min_operand = 1;
    int max_operand = 13;
    int n_operands = 4;
    long long target = 24;
    int max_solutions = 6;  // distinct solution schemas (see tasks.cpp)
};
struct NqParams {
    int n = 7;
    int prefix_min = 0;
    int prefix_max = 4;
};
struct GcParams {
    std::vector<int> n_choices = {7, 8};
    std::vector<double> p_choices = {0.4, 0.5, 0.6};
    int n_colors = 3;
};
struct BwParams {
    int min_blocks = 4;
    int max_blocks = 5;
    int min_plan = 3;
};
struct RcParams {
    int n_preds = 16;
    int n_rules = 18;
    std::vector<int> steps_choices = {2, 3, 4};
    int min_init_facts = 3;
    int max_init_facts = 5;
};

using Params = std::variant<G24Params, NqParams, GcParams, BwParams, RcParams>;

Params default_params(TaskId t);

// ---------------------------------------------------------------------------
// Instance payloads.

struct RcRule {
    std::vector<int> body;  // sorted predicate indices
    int head;
    std::string text;  // "if p2 then p9" / "if p8 and p13 then p3"
};

struct G24Data {
    std::vector<Rational> operands;
    Rational target;
};
struct NqData {
    int n = 0;
    std::vector<int> prefix;
};
struct GcData {
    int n = 0;
    int n_colors = 3;
    std::vector<std::pair<int, int>> edges;  // u < v, sorted
};
struct BwData {
    std::vector<std::string> names;
    std::vector<int> init_under;             // -1 table
    std::vector<std::pair<int, int>> goal_on;  // (above, below), sorted
};
struct RcData {
    int n_preds = 16;
    std::vector<RcRule> rules;
    uint32_t init_facts = 0;
    int goal_fact = 0;
    int n_steps = 0;
};

using InstanceData = std::variant<G24Data, NqData, GcData, BwData, RcData>;

struct ProblemInstance {
    TaskId task;
    uint64_t seed = 0;
    Params params;
    InstanceData data;
    State init_state;
    std::string prompt;
    std::string init_state_text;
    std::string answer_label;
};

struct Trace {
    std::vector<State> states;  // s0..sT
    std::vector<Operation> ops;  // a1..aT
    bool success = false;
};

// ---------------------------------------------------------------------------
// Task engine surface.

// Seeded, rejection-sampled, always solvable; throws GenerationError when the
// retry budget is exhausted.
struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
ProblemInstance generate_instance(TaskId task, const Params& params, uint64_t seed);

// Direct constructors (used by tests, fixtures and tree augmentation).
ProblemInstance make_g24_instance(const std::vector<long long>& operands, long long target);
ProblemInstance make_g24_instance(const std::vector<Rational>& operands, Rational target);
ProblemInstance make_nq_instance(int n, const std::vector<int>& prefix);
ProblemInstance make_gc_instance(int n, const std::vector<std::pair<int, int>>& edges,
                                 int n_colors = 3);
ProblemInstance make_bw_instance(const std::vector<std::string>& names,
                                 const std::vector<int>& init_under,
                                 const std::vector<std::pair<int, int>>& goal_on);
ProblemInstance make_rc_instance(const std::vector<RcRule>& rules, uint32_t init_facts,
                                 int goal_fact, int n_steps);

// Deterministic, lexicographically ordered by canonical rendering; empty at
// terminal states.
std::vector<Operation> admissible_ops(const ProblemInstance& inst, const State& s);

// Pure transition; throws std::invalid_argument on inadmissible operations.
State apply(const ProblemInstance& inst, const State& s, const Operation& op);

bool is_goal(const ProblemInstance& inst, const State& s);

// Fixed-dimension structural features standing in for a learned encoder.
int feature_dim(TaskId task);
Vec featurize(const ProblemInstance& inst, const State& s);

// Fixed-dimension encoding of a single operation (policy scoring input).
int op_feature_dim(TaskId task);
Vec op_features(const ProblemInstance& inst, const Operation& op);

// First solution in deterministic search order (BFS for Blocksworld and
// Rule-chaining, depth-first in lexicographic op order elsewhere). Throws
// UnsolvableError when no trace exists; never fires on generated instances.
struct UnsolvableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
Trace reference_solver(const ProblemInstance& inst);

std::string state_text(const ProblemInstance& inst, const State& s);
std::string render_answer(const Trace& trace);

// Maximum meaningful trace length (tree depth cap per task).
int task_depth(TaskId t);

}  // namespace treeball::tasks
