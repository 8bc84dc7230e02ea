#include "treeball/tree.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <stdexcept>

namespace treeball::tree {

using namespace tasks;

SearchTree enumerate(const ProblemInstance& inst, int depth_cap, int64_t node_cap) {
    if (depth_cap < 1) throw std::invalid_argument("enumerate: depth_cap must be >= 1");
    SearchTree t;
    t.instance = inst;
    t.depth_cap = depth_cap;
    TreeNode root;
    root.state = inst.init_state;
    root.goal = is_goal(inst, inst.init_state);
    t.nodes.push_back(std::move(root));
    for (int32_t id = 0; id < t.size(); ++id) {
        if (t.nodes[id].goal) {
            t.success_leaves.push_back(id);
            continue;
        }
        if (t.nodes[id].depth >= depth_cap) continue;
        const std::vector<Operation> ops = admissible_ops(inst, t.nodes[id].state);
        t.nodes[id].op_count = static_cast<int16_t>(ops.size());
        std::vector<State> child_states;
        for (const Operation& op : ops) {
            State child = apply(inst, t.nodes[id].state, op);
            bool dup = false;
            for (const State& c : child_states)
                if (states_equal(c, child)) {
                    dup = true;
                    break;
                }
            if (dup) {
                ++t.merged_sibling_edges;
                continue;
            }
            if (t.size() >= node_cap)
                throw BudgetError("enumerate: node cap exceeded (" +
                                  std::to_string(node_cap) + ")");
            TreeNode node;
            node.state = child;
            node.parent = id;
            node.depth = t.nodes[id].depth + 1;
            node.goal = is_goal(inst, child);
            t.nodes[id].children.push_back(t.size());
            child_states.push_back(std::move(child));
            t.nodes.push_back(std::move(node));
        }
    }
    return t;
}

SearchTree enumerate(const ProblemInstance& inst) {
    return enumerate(inst, task_depth(inst.task));
}

DistanceMap distance_to_solution(const SearchTree& t) {
    DistanceMap d(t.nodes.size(), kInfinity);
    // Children always follow parents in BFS numbering, so one reverse sweep is
    // a full backward induction.
    for (int32_t id = t.size() - 1; id >= 0; --id) {
        const TreeNode& n = t.nodes[id];
        if (n.children.empty()) {
            d[id] = n.goal ? 0 : kInfinity;
            continue;
        }
        int32_t best = kInfinity;
        for (int32_t c : n.children)
            if (d[c] != kInfinity) best = std::min(best, d[c] + 1);
        d[id] = best;
    }
    return d;
}

int32_t tree_distance(const SearchTree& t, int32_t i, int32_t j) {
    int32_t a = i, b = j, steps = 0;
    int32_t da = t.nodes[a].depth, db = t.nodes[b].depth;
    while (da > db) {
        a = t.nodes[a].parent;
        --da;
        ++steps;
    }
    while (db > da) {
        b = t.nodes[b].parent;
        --db;
        ++steps;
    }
    while (a != b) {
        a = t.nodes[a].parent;
        b = t.nodes[b].parent;
        steps += 2;
    }
    return steps;
}

std::vector<EdgeOp> node_edge_ops(const SearchTree& t, int32_t id) {
    const TreeNode& n = t.nodes[id];
    std::vector<EdgeOp> out;
    if (n.children.empty()) return out;
    const std::vector<Operation> ops = admissible_ops(t.instance, n.state);
    out.reserve(ops.size());
    for (const Operation& op : ops) {
        const State child = apply(t.instance, n.state, op);
        int32_t child_id = -1;
        for (int32_t c : n.children)
            if (states_equal(t.nodes[c].state, child)) {
                child_id = c;
                break;
            }
        if (child_id < 0)
            throw std::logic_error("node_edge_ops: child state not found in tree");
        out.push_back(EdgeOp{op, child_id});
    }
    return out;
}

std::vector<Operation> oracle(const SearchTree& t, const DistanceMap& d, int32_t id) {
    std::vector<Operation> out;
    for (const EdgeOp& e : node_edge_ops(t, id))
        if (d[e.child] != kInfinity) out.push_back(e.op);
    return out;
}

bool oracle_best(const SearchTree& t, const DistanceMap& d, int32_t id, Operation* out) {
    // Edge ops arrive in lexicographic rendering order; first live one wins.
    for (const EdgeOp& e : node_edge_ops(t, id)) {
        if (d[e.child] != kInfinity) {
            if (out) *out = e.op;
            return true;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Statistics

StatsAccumulator::StatsAccumulator(TaskId task) {
    stats_.task = task;
    switch (task) {
        case TaskId::RuleChain: stats_.dead_end_variant = "edges"; break;
        case TaskId::Blocksworld: stats_.dead_end_variant = "off-shortest-plan"; break;
        default: stats_.dead_end_variant = "leaves"; break;
    }
}

void StatsAccumulator::add(const SearchTree& t, const DistanceMap& d) {
    const TaskId task = stats_.task;
    ++stats_.instances;
    stats_.nodes += t.size();
    for (int32_t id = 0; id < t.size(); ++id) {
        const TreeNode& n = t.nodes[id];
        if (n.children.empty()) {
            ++stats_.leaves;
            if (stats_.dead_end_variant == "leaves") {
                ++dead_den_;
                if (!n.goal) ++dead_num_;
            }
            continue;
        }
        ++stats_.internal_nodes;
        stats_.edges += static_cast<int64_t>(n.children.size());
        if (task == TaskId::RuleChain) {
            stats_.avg_branching += n.op_count;  // applicable rules
            for (const EdgeOp& e : node_edge_ops(t, id)) {
                ++dead_den_;
                if (d[e.child] == kInfinity) ++dead_num_;
            }
        } else {
            stats_.avg_branching += static_cast<double>(n.children.size());
        }
    }
    if (task == TaskId::RuleChain) {
        stats_.max_depth =
            std::max(stats_.max_depth, std::get<RcData>(t.instance.data).n_steps);
    } else {
        for (int32_t leaf : t.success_leaves)
            stats_.max_depth = std::max(stats_.max_depth, static_cast<int>(t.nodes[leaf].depth));
    }
}

TreeStats StatsAccumulator::finish() const {
    TreeStats out = stats_;
    out.avg_branching =
        out.internal_nodes > 0 ? out.avg_branching / static_cast<double>(out.internal_nodes)
                               : 0.0;
    out.dead_end_ratio =
        dead_den_ > 0 ? static_cast<double>(dead_num_) / static_cast<double>(dead_den_) : 0.0;
    return out;
}

BwGraphStats bw_graph_stats(const ProblemInstance& inst) {
    // Forward BFS enumerating the reachable state graph. Every action has an
    // inverse action, so the graph is symmetric and distance-to-goal is a BFS
    // from the goal set over the same adjacency.
    std::vector<State> states;
    std::map<std::vector<int>, int> index;
    std::vector<std::vector<int>> adj;
    const auto key_of = [](const State& s) {
        const auto& bs = std::get<BwState>(s);
        std::vector<int> k = bs.under;
        k.push_back(bs.holding);
        return k;
    };
    states.push_back(inst.init_state);
    index[key_of(inst.init_state)] = 0;
    adj.emplace_back();
    BwGraphStats out;
    for (size_t head = 0; head < states.size(); ++head) {
        const std::vector<Operation> ops = admissible_ops(inst, states[head]);
        for (const Operation& op : ops) {
            State child = apply(inst, states[head], op);
            auto [it, fresh] = index.emplace(key_of(child), static_cast<int>(states.size()));
            if (fresh) {
                states.push_back(std::move(child));
                adj.emplace_back();
            }
            adj[head].push_back(it->second);
        }
    }
    // Goal states are absorbing (no ops), so the goal-rooted BFS runs over the
    // undirected adjacency; all other actions come in inverse pairs anyway.
    std::vector<std::vector<int>> undirected(states.size());
    for (size_t u = 0; u < states.size(); ++u) {
        for (int v : adj[u]) {
            undirected[u].push_back(v);
            undirected[v].push_back(static_cast<int>(u));
        }
    }
    std::vector<int> dist(states.size(), -1);
    std::deque<int> queue;
    for (size_t i = 0; i < states.size(); ++i) {
        if (is_goal(inst, states[i])) {
            dist[i] = 0;
            queue.push_back(static_cast<int>(i));
        }
    }
    while (!queue.empty()) {
        const int at = queue.front();
        queue.pop_front();
        for (int nb : undirected[at]) {
            if (dist[nb] < 0) {
                dist[nb] = dist[at] + 1;
                queue.push_back(nb);
            }
        }
    }
    for (size_t i = 0; i < states.size(); ++i) {
        if (dist[i] == 0) continue;  // goal states contribute no actions
        ++out.states;
        out.max_plan_length = std::max(out.max_plan_length, dist[i]);
        for (int nb : adj[i]) {
            ++out.actions;
            if (dist[nb] != dist[i] - 1) ++out.off_shortest_actions;
        }
    }
    return out;
}

TreeBundle make_bundle(const ProblemInstance& inst, int depth_cap, int64_t node_cap) {
    TreeBundle b;
    b.t = enumerate(inst, depth_cap > 0 ? depth_cap : task_depth(inst.task), node_cap);
    b.d = distance_to_solution(b.t);
    b.features.reserve(b.t.nodes.size());
    for (const TreeNode& n : b.t.nodes) b.features.push_back(featurize(inst, n.state));
    return b;
}

// ---------------------------------------------------------------------------
// Augmentation

namespace {

std::string goal_text_of(const ProblemInstance& inst) {
    switch (inst.task) {
        case TaskId::G24: return std::get<G24Data>(inst.data).target.str();
        case TaskId::RuleChain:
            return "p" + std::to_string(std::get<RcData>(inst.data).goal_fact);
        case TaskId::NQueens: return "complete the board";
        case TaskId::GraphColoring: return "complete the coloring";
        case TaskId::Blocksworld: {
            const auto& d = std::get<BwData>(inst.data);
            std::string out;
            for (size_t i = 0; i < d.goal_on.size(); ++i) {
                if (i) out += ", ";
                out += d.names[d.goal_on[i].first] + " on " + d.names[d.goal_on[i].second];
            }
            return out;
        }
    }
    return "";
}

// Partial trace from the root down to `id`, rendered as "; "-joined op texts.
std::string path_text(const SearchTree& t, int32_t id) {
    std::vector<int32_t> chain;
    for (int32_t at = id; at > 0; at = t.nodes[at].parent) chain.push_back(at);
    std::reverse(chain.begin(), chain.end());
    std::string out;
    for (int32_t node : chain) {
        const int32_t parent = t.nodes[node].parent;
        for (const EdgeOp& e : node_edge_ops(t, parent)) {
            if (e.child == node) {
                if (!out.empty()) out += "; ";
                out += e.op.text;
                break;
            }
        }
    }
    return out;
}

void collect_g24_leaf_values(const SearchTree& t, int32_t id, std::set<Rational>& out) {
    const TreeNode& n = t.nodes[id];
    if (n.children.empty()) {
        const auto& pool = std::get<G24State>(n.state).pool;
        if (pool.size() == 1) out.insert(pool[0]);
        return;
    }
    for (int32_t c : n.children) collect_g24_leaf_values(t, c, out);
}

void collect_rc_downstream(const SearchTree& t, int32_t id, uint32_t base, uint32_t& out) {
    const TreeNode& n = t.nodes[id];
    out |= std::get<RcState>(n.state).facts & ~base;
    for (int32_t c : n.children) collect_rc_downstream(t, c, base, out);
}

}  // namespace

std::vector<ContextGoalPair> augment_pairs(const SearchTree& t, const DistanceMap& d,
                                           Rng& rng, bool all_nodes) {
    std::vector<ContextGoalPair> out;
    const ProblemInstance& inst = t.instance;
    for (int32_t id = 0; id < t.size(); ++id) {
        const TreeNode& n = t.nodes[id];
        if (n.children.empty()) continue;
        const bool live = d[id] != kInfinity;
        Rng node_rng = rng.derive(static_cast<uint64_t>(id));
        ContextGoalPair pair;
        pair.node = id;
        switch (inst.task) {
            case TaskId::G24: {
                if (!live && !all_nodes) continue;
                std::set<Rational> values;
                collect_g24_leaf_values(t, id, values);
                if (values.empty()) continue;
                std::vector<Rational> sorted(values.begin(), values.end());
                const Rational goal = sorted[node_rng.uniform_index(sorted.size())];
                pair.derived =
                    make_g24_instance(std::get<G24State>(n.state).pool, goal);
                pair.goal_text = goal.str();
                break;
            }
            case TaskId::RuleChain: {
                uint32_t downstream = 0;
                const uint32_t base = std::get<RcState>(n.state).facts;
                collect_rc_downstream(t, id, base, downstream);
                if (!all_nodes) {
                    // Goals restricted to facts on some live continuation.
                    if (!live) continue;
                }
                if (downstream == 0) continue;
                std::vector<int> facts;
                for (int i = 0; i < 16; ++i)
                    if (downstream & (1u << i)) facts.push_back(i);
                const int goal = facts[node_rng.uniform_index(facts.size())];
                const auto& data = std::get<RcData>(inst.data);
                pair.derived = make_rc_instance(data.rules, base, goal, 0);
                auto& derived_data = std::get<RcData>(pair.derived.data);
                derived_data.n_steps = static_cast<int>(
                    std::count(pair.derived.answer_label.begin(),
                               pair.derived.answer_label.end(), '\n')) +
                    1;
                pair.goal_text = "p" + std::to_string(goal);
                break;
            }
            case TaskId::NQueens: {
                if (!live) continue;
                pair.derived = make_nq_instance(std::get<NqData>(inst.data).n,
                                                std::get<NqState>(n.state).cols);
                pair.goal_text = goal_text_of(inst);
                break;
            }
            case TaskId::GraphColoring:
            case TaskId::Blocksworld:
                // Re-posing mid-state instances is not meaningful for these
                // engines (GC states are index-ordered prefixes; BW mid-states
                // may hold a block), so augmentation covers the other tasks.
                continue;
        }
        pair.context_text = state_text(inst, n.state);
        const std::string path = path_text(t, id);
        if (!path.empty()) pair.context_text += " | trace: " + path;
        out.push_back(std::move(pair));
    }
    return out;
}

}  // namespace treeball::tree
