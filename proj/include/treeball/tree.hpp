#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "treeball/common.hpp"
#include "treeball/tasks.hpp"

namespace treeball::tree {

inline constexpr int32_t kInfinity = std::numeric_limits<int32_t>::max();
inline constexpr int64_t kDefaultNodeCap = 5'000'000;

struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TreeNode {
    tasks::State state;
    int32_t parent = -1;
    int32_t depth = 0;
    bool goal = false;
    int16_t op_count = 0;  // admissible operations (pre-merge)
    std::vector<int32_t> children;  // distinct canonical children, first-op order
};

// Search tree of one instance. Nodes are numbered in BFS order; transpositions
// reached along different paths stay distinct nodes. Sibling edges whose ops
// produce the same canonical child are merged (all such ops remain admissible
// and remain valid oracle answers).
struct SearchTree {
    tasks::ProblemInstance instance;
    std::vector<TreeNode> nodes;
    std::vector<int32_t> success_leaves;
    int64_t merged_sibling_edges = 0;  // dedup report
    int depth_cap = 0;

    bool is_leaf(int32_t id) const { return nodes[id].children.empty(); }
    int32_t size() const { return static_cast<int32_t>(nodes.size()); }
};

SearchTree enumerate(const tasks::ProblemInstance& inst, int depth_cap,
                     int64_t node_cap = kDefaultNodeCap);
SearchTree enumerate(const tasks::ProblemInstance& inst);  // task depth cap

// d(s): minimum edge distance to a successful leaf, kInfinity at dead ends.
// Backward induction over reverse BFS order.
using DistanceMap = std::vector<int32_t>;
DistanceMap distance_to_solution(const SearchTree& t);

// Shortest-path distance inside the tree: depth(i)+depth(j)-2*depth(lca).
int32_t tree_distance(const SearchTree& t, int32_t i, int32_t j);

// Ops of node `id` paired with their child node (merged ops share a child).
struct EdgeOp {
    tasks::Operation op;
    int32_t child;
};
std::vector<EdgeOp> node_edge_ops(const SearchTree& t, int32_t id);

// Closed-form oracle: admissible ops whose child still reaches a success leaf.
std::vector<tasks::Operation> oracle(const SearchTree& t, const DistanceMap& d, int32_t id);
// Lexicographically smallest oracle op, if any.
bool oracle_best(const SearchTree& t, const DistanceMap& d, int32_t id,
                 tasks::Operation* out);

struct TreeStats {
    tasks::TaskId task;
    int64_t instances = 0;
    int64_t nodes = 0;
    int64_t internal_nodes = 0;
    int64_t leaves = 0;
    int64_t edges = 0;
    double avg_branching = 0.0;  // children per internal node (RC: applicable rules)
    int max_depth = 0;           // max successful-leaf depth (RC: max gold chain length)
    double dead_end_ratio = 0.0;
    std::string dead_end_variant;  // "leaves", "edges" (RC), "off-shortest-plan" (BW)
    int64_t errored_instances = 0;
};

// Per-instance accumulation; BW trees are annotated against state-graph
// shortest plans, RC uses the dead rule-application fraction.
class StatsAccumulator {
public:
    explicit StatsAccumulator(tasks::TaskId task);
    void add(const SearchTree& t, const DistanceMap& d);
    void add_error() { ++stats_.errored_instances; }
    TreeStats finish() const;

private:
    TreeStats stats_;
    int64_t dead_num_ = 0;
    int64_t dead_den_ = 0;
};

// Blocksworld has no absorbing dead ends and its unrolled tree is intractable
// at depth 16, so its statistics come from the reachable state graph: action
// count per state, longest shortest-plan, and the fraction of actions that do
// not lie on a shortest plan to the goal.
struct BwGraphStats {
    int64_t states = 0;
    int64_t actions = 0;
    int64_t off_shortest_actions = 0;
    int max_plan_length = 0;
};
BwGraphStats bw_graph_stats(const tasks::ProblemInstance& inst);

// Tree + distance map + per-node features, the unit both training stages and
// the analysis harness consume.
struct TreeBundle {
    SearchTree t;
    DistanceMap d;
    std::vector<Vec> features;
};
TreeBundle make_bundle(const tasks::ProblemInstance& inst, int depth_cap = 0,
                       int64_t node_cap = kDefaultNodeCap);

struct ContextGoalPair {
    int32_t node = -1;
    std::string context_text;  // state plus partial trace rendering
    std::string goal_text;
    // Re-posed subproblem: context node as the new initial state, sampled
    // reachable terminal value/fact as the new goal.
    tasks::ProblemInstance derived;
};

// One pair per solution-bearing internal node; goal sampled deterministically
// from the terminal values (G24) / downstream derived facts (RC) reachable
// from that node. Other tasks keep their fixed goal and re-pose the node as a
// fresh start state. With all_nodes, every internal node with a reachable
// terminal value emits a pair.
std::vector<ContextGoalPair> augment_pairs(const SearchTree& t, const DistanceMap& d,
                                           Rng& rng, bool all_nodes = false);

}  // namespace treeball::tree
