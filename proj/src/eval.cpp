#include "treeball/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "treeball/math_stats.hpp"

namespace treeball::eval {

using stage1::HeadParams;
using stage2::PolicyParams;

tasks::Operation PolicySelector::select(const tasks::ProblemInstance& inst,
                                        const tasks::State& s,
                                        const std::vector<tasks::Operation>& ops) {
    const Vec feat = tasks::featurize(inst, s);
    const Vec z = stage1::embed_state(head_, feat);
    const Vec sig = stage2::lift_signal(policy_, z);
    std::vector<Vec> opf;
    opf.reserve(ops.size());
    for (const tasks::Operation& op : ops) opf.push_back(tasks::op_features(inst, op));
    const Vec scores = stage2::policy_scores(policy_, feat, sig, opf);
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return ops[best];
}

void OracleSelector::begin_instance(const tasks::ProblemInstance& inst) {
    t_ = tree::enumerate(inst, tasks::task_depth(inst.task), node_cap_);
    d_ = tree::distance_to_solution(t_);
    node_ = 0;
}

tasks::Operation OracleSelector::select(const tasks::ProblemInstance&, const tasks::State& s,
                                        const std::vector<tasks::Operation>& ops) {
    if (!tasks::states_equal(t_.nodes[node_].state, s))
        throw std::logic_error("OracleSelector: desynchronized from the tree");
    for (const tree::EdgeOp& e : tree::node_edge_ops(t_, node_)) {
        if (d_[e.child] != tree::kInfinity) {
            node_ = e.child;
            return e.op;
        }
    }
    // Dead end: fall back to the first admissible op (episode will fail).
    for (const tree::EdgeOp& e : tree::node_edge_ops(t_, node_)) {
        node_ = e.child;
        return e.op;
    }
    return ops.front();
}

EvalReport evaluate(const std::vector<tasks::ProblemInstance>& instances,
                    OpSelector& selector, int step_budget) {
    EvalReport report;
    if (!instances.empty()) report.task = tasks::task_name(instances[0].task);
    int64_t total_steps = 0;
    for (const tasks::ProblemInstance& inst : instances) {
        const int budget = step_budget > 0 ? step_budget : tasks::task_depth(inst.task);
        selector.begin_instance(inst);
        tasks::State s = inst.init_state;
        int steps = 0;
        while (steps < budget && !tasks::is_goal(inst, s)) {
            const std::vector<tasks::Operation> ops = tasks::admissible_ops(inst, s);
            if (ops.empty()) break;
            s = tasks::apply(inst, s, selector.select(inst, s, ops));
            ++steps;
        }
        ++report.instances;
        total_steps += steps;
        if (tasks::is_goal(inst, s)) ++report.successes;
    }
    report.accuracy = report.instances
                          ? static_cast<double>(report.successes) /
                                static_cast<double>(report.instances)
                          : 0.0;
    report.mean_steps = report.instances
                            ? static_cast<double>(total_steps) /
                                  static_cast<double>(report.instances)
                            : 0.0;
    return report;
}

EvalReport evaluate_policy(const std::vector<tasks::ProblemInstance>& instances,
                           const PolicyParams& policy, const HeadParams& head,
                           int step_budget) {
    PolicySelector selector(policy, head);
    return evaluate(instances, selector, step_budget);
}

std::map<int, EvalReport> depth_stratified(
    const std::vector<tasks::ProblemInstance>& instances, const PolicyParams& policy,
    const HeadParams& head) {
    std::map<int, std::vector<tasks::ProblemInstance>> strata;
    for (const tasks::ProblemInstance& inst : instances) {
        if (inst.task != tasks::TaskId::RuleChain)
            throw std::invalid_argument("depth_stratified: rule-chaining instances only");
        strata[std::get<tasks::RcData>(inst.data).n_steps].push_back(inst);
    }
    std::map<int, EvalReport> out;
    for (const auto& [n_steps, bin] : strata)
        out[n_steps] = evaluate_policy(bin, policy, head);
    return out;
}

double radial_spearman(const HeadParams& head, const std::vector<tree::TreeBundle>& trees,
                       int per_class, Rng rng) {
    // Pool (d, node) over all trees, keyed by the per-tree d value with the
    // infinity class mapped to that tree's max finite d + 1.
    std::map<int32_t, std::vector<std::pair<int32_t, int32_t>>> classes;
    for (size_t ti = 0; ti < trees.size(); ++ti) {
        const tree::TreeBundle& tb = trees[ti];
        int32_t dmax = 0;
        for (int32_t v : tb.d)
            if (v != tree::kInfinity) dmax = std::max(dmax, v);
        for (int32_t id = 0; id < tb.t.size(); ++id) {
            const int32_t cls = tb.d[id] == tree::kInfinity ? dmax + 1 : tb.d[id];
            classes[cls].emplace_back(static_cast<int32_t>(ti), id);
        }
    }
    Vec dvals, radii;
    for (auto& [cls, members] : classes) {
        Rng crng = rng.derive(static_cast<uint64_t>(cls));
        crng.shuffle(members);
        const size_t take = std::min<size_t>(members.size(), static_cast<size_t>(per_class));
        for (size_t i = 0; i < take; ++i) {
            const auto [ti, id] = members[i];
            dvals.push_back(static_cast<double>(cls));
            radii.push_back(stage1::embed_radius(
                head, stage1::embed_state(head, trees[ti].features[id])));
        }
    }
    return stats::spearman(dvals, radii).value_or(0.0);
}

AnchorSpearmanResult anchor_spearman(const HeadParams& head,
                                     const std::vector<tree::TreeBundle>& trees,
                                     int anchors_per_tree, int nodes_per_anchor, Rng rng,
                                     bool stratify) {
    AnchorSpearmanResult result;
    Vec rhos;
    for (size_t ti = 0; ti < trees.size(); ++ti) {
        const tree::TreeBundle& tb = trees[ti];
        Rng trng = rng.derive(static_cast<uint64_t>(ti));
        if (tb.t.size() < 4) continue;
        for (int a = 0; a < anchors_per_tree; ++a) {
            const int32_t anchor = static_cast<int32_t>(trng.uniform_index(tb.t.size()));
            const Vec za = stage1::embed_state(head, tb.features[anchor]);
            std::vector<int32_t> others;
            const int want = std::min<int>(nodes_per_anchor,
                                           static_cast<int>(tb.t.size()) - 1);
            if (stratify) {
                // Round-robin over d_T classes until the quota is met.
                std::map<int32_t, std::vector<int32_t>> classes;
                for (int32_t o = 0; o < tb.t.size(); ++o)
                    if (o != anchor) classes[tree::tree_distance(tb.t, anchor, o)].push_back(o);
                for (auto& [dt, members] : classes) trng.shuffle(members);
                size_t round = 0;
                while (static_cast<int>(others.size()) < want) {
                    bool any = false;
                    for (auto& [dt, members] : classes) {
                        if (round < members.size() &&
                            static_cast<int>(others.size()) < want) {
                            others.push_back(members[round]);
                            any = true;
                        }
                    }
                    if (!any) break;
                    ++round;
                }
            } else {
                int attempts = 0;
                while (static_cast<int>(others.size()) < want && attempts < want * 50) {
                    ++attempts;
                    const int32_t o = static_cast<int32_t>(trng.uniform_index(tb.t.size()));
                    if (o == anchor) continue;
                    if (std::find(others.begin(), others.end(), o) != others.end()) continue;
                    others.push_back(o);
                }
            }
            if (others.size() < 3) {
                ++result.skipped;  // fewer than 3 co-tree nodes
                continue;
            }
            Vec dt, dd;
            for (int32_t o : others) {
                dt.push_back(static_cast<double>(tree::tree_distance(tb.t, anchor, o)));
                dd.push_back(stage1::embed_distance(
                    head, za, stage1::embed_state(head, tb.features[o])));
            }
            const auto rho = stats::spearman(dt, dd);
            if (!rho) {
                ++result.skipped;  // constant ranks (e.g. collapsed embedding)
                continue;
            }
            result.anchors.push_back(
                AnchorCorrelation{static_cast<int32_t>(ti), anchor, *rho});
            rhos.push_back(*rho);
        }
    }
    result.median_rho = rhos.empty() ? 0.0 : stats::median(rhos);
    return result;
}

Vec mean_embedding(const HeadParams& head, const std::vector<tree::TreeBundle>& trees) {
    Vec sum;
    int64_t count = 0;
    for (const tree::TreeBundle& tb : trees) {
        for (const Vec& f : tb.features) {
            const Vec z = stage1::embed_state(head, f);
            if (sum.empty()) sum.assign(z.size(), 0.0);
            for (size_t i = 0; i < z.size(); ++i) sum[i] += z[i];
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("mean_embedding: no states");
    for (double& v : sum) v /= static_cast<double>(count);
    if (head.mode == stage1::GeometryMode::Hyperbolic)
        return geometry::project_to_ball(sum, geometry::Curvature(head.curvature()));
    return sum;
}

double kl_divergence(const Vec& scores_p, const Vec& scores_q, double temperature) {
    // Max-subtracted log-sum-exp on both sides; KL over the shared support.
    const auto log_softmax = [&](const Vec& s) {
        Vec out(s.size());
        double mx = s[0];
        for (double v : s) mx = std::max(mx, v);
        double sum = 0.0;
        for (size_t i = 0; i < s.size(); ++i) sum += std::exp((s[i] - mx) / temperature);
        const double lse = std::log(sum);
        for (size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - mx) / temperature - lse;
        return out;
    };
    const Vec lp = log_softmax(scores_p);
    const Vec lq = log_softmax(scores_q);
    double kl = 0.0;
    for (size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
    return kl;
}

DivergenceResult signal_divergence(const PolicyParams& policy, const HeadParams& head,
                                   const std::vector<tree::TreeBundle>& trees,
                                   const Vec& z_bar, int max_states) {
    DivergenceResult out;
    const Vec baseline_signal = stage2::lift_signal(policy, z_bar);
    for (const tree::TreeBundle& tb : trees) {
        // Step-boundary states: follow the oracle path, one state per boundary.
        int32_t node = 0;
        while (true) {
            if (max_states > 0 && static_cast<int>(out.states.size()) >= max_states) break;
            const tree::TreeNode& n = tb.t.nodes[node];
            if (n.goal || n.children.empty()) break;
            const Vec& feat = tb.features[node];
            const Vec z = stage1::embed_state(head, feat);
            std::vector<Vec> opf;
            const std::vector<tree::EdgeOp> edges = tree::node_edge_ops(tb.t, node);
            opf.reserve(edges.size());
            for (const tree::EdgeOp& e : edges)
                opf.push_back(tasks::op_features(tb.t.instance, e.op));
            const Vec sig_on = stage2::lift_signal(policy, z);
            const Vec sp = stage2::policy_scores(policy, feat, sig_on, opf);
            const Vec sq = stage2::policy_scores(policy, feat, baseline_signal, opf);
            SignalDivergence d;
            d.kl = kl_divergence(sp, sq, 1.0);
            d.d_origin = stage1::embed_radius(head, z);
            out.states.push_back(d);
            // Next step along the oracle (first live child), else stop.
            int32_t next = -1;
            for (const tree::EdgeOp& e : edges) {
                if (tb.d[e.child] != tree::kInfinity) {
                    next = e.child;
                    break;
                }
            }
            if (next < 0) break;
            node = next;
        }
        if (max_states > 0 && static_cast<int>(out.states.size()) >= max_states) break;
    }
    Vec kls, radii;
    for (const SignalDivergence& d : out.states) {
        kls.push_back(d.kl);
        radii.push_back(d.d_origin);
    }
    out.spearman_kl_radius = stats::spearman(kls, radii);
    return out;
}

}  // namespace treeball::eval
