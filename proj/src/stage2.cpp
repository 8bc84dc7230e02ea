#include "treeball/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace treeball::stage2 {

using stage1::HeadParams;
using tree::TreeBundle;

const char* signal_mode_name(SignalMode m) {
    switch (m) {
        case SignalMode::On: return "on";
        case SignalMode::Off: return "off";
        case SignalMode::MeanBaseline: return "mean-baseline";
    }
    throw std::logic_error("signal_mode_name");
}

SignalMode signal_mode_from_name(const std::string& name) {
    if (name == "on") return SignalMode::On;
    if (name == "off") return SignalMode::Off;
    if (name == "mean-baseline") return SignalMode::MeanBaseline;
    throw std::invalid_argument("unknown signal mode: " + name);
}

void PolicyConfig::validate() const {
    if (d_sig <= 0 || up_hidden <= 0 || policy_hidden <= 0)
        throw std::invalid_argument("PolicyConfig: bad dimensions");
    if (epochs <= 0 || rollouts_per_problem <= 0 || update_passes <= 0 || batch_size <= 0)
        throw std::invalid_argument("PolicyConfig: bad schedule");
    if (!(temperature > 0.0))
        throw std::invalid_argument("PolicyConfig: temperature must be positive");
}

double PolicyConfig::beta_at(int epoch) const {
    // Linear anneal: first epoch rollouts are pure oracle, last pure policy.
    if (epochs == 1) return 1.0;
    return 1.0 - static_cast<double>(epoch) / static_cast<double>(epochs - 1);
}

PolicyParams init_policy(int d_feat, int d_op, int n_embed, const PolicyConfig& cfg,
                         Rng& rng) {
    cfg.validate();
    PolicyParams p;
    p.d_feat = d_feat;
    p.d_sig = cfg.d_sig;
    p.d_op = d_op;
    p.signal = cfg.signal;
    p.up_proj = nn::MlpParams(n_embed, cfg.up_hidden, cfg.d_sig);
    p.policy = nn::MlpParams(d_feat + cfg.d_sig + d_op, cfg.policy_hidden, 1);
    nn::init_mlp(p.up_proj, rng);
    nn::init_mlp(p.policy, rng);
    return p;
}

Vec lift_signal(const PolicyParams& policy, const Vec& z) {
    if (policy.signal == SignalMode::Off) return Vec(policy.d_sig, 0.0);
    return nn::mlp_forward(policy.up_proj, z);
}

Vec policy_scores(const PolicyParams& policy, const Vec& state_features, const Vec& signal,
                  const std::vector<Vec>& op_features) {
    if (op_features.empty())
        throw std::invalid_argument("policy_scores: empty admissible set");
    Vec x(policy.policy.d_in);
    std::copy(state_features.begin(), state_features.end(), x.begin());
    std::copy(signal.begin(), signal.end(), x.begin() + policy.d_feat);
    Vec scores(op_features.size());
    for (size_t i = 0; i < op_features.size(); ++i) {
        std::copy(op_features[i].begin(), op_features[i].end(),
                  x.begin() + policy.d_feat + policy.d_sig);
        scores[i] = nn::mlp_forward(policy.policy, x)[0];
    }
    return scores;
}

Vec softmax(const Vec& scores, double temperature) {
    Vec out(scores.size());
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double sum = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - mx) / temperature);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

Vec policy_distribution(const PolicyParams& policy, const Vec& state_features,
                        const Vec& signal, const std::vector<Vec>& op_features,
                        double temperature) {
    return softmax(policy_scores(policy, state_features, signal, op_features), temperature);
}

namespace {

LabeledState make_labeled(const TreeBundle& tb, int32_t node,
                          const std::vector<tree::EdgeOp>& edges,
                          const std::vector<int>& oracle_edge_indices,
                          const HeadParams& head) {
    LabeledState ls;
    ls.state_features = tb.features[node];
    ls.z = stage1::embed_state(head, ls.state_features);
    ls.op_features.reserve(edges.size());
    ls.op_texts.reserve(edges.size());
    for (const tree::EdgeOp& e : edges) {
        ls.op_features.push_back(tasks::op_features(tb.t.instance, e.op));
        ls.op_texts.push_back(e.op.text);
    }
    // Edge ops arrive in lexicographic order, so the first live one is a*.
    ls.label = oracle_edge_indices.front();
    return ls;
}

}  // namespace

Episode rollout(const TreeBundle& tb, const PolicyParams& policy, const HeadParams& head,
                double beta, Rng& rng, const PolicyConfig& cfg) {
    Episode ep;
    int32_t node = 0;
    const int max_steps = tb.t.depth_cap;
    for (int step = 0; step <= max_steps; ++step) {
        ep.nodes.push_back(node);
        if (tb.t.nodes[node].goal) {
            ep.success = true;
            break;
        }
        const std::vector<tree::EdgeOp> edges = tree::node_edge_ops(tb.t, node);
        if (edges.empty()) break;
        std::vector<int> live;
        for (size_t i = 0; i < edges.size(); ++i)
            if (tb.d[edges[i].child] != tree::kInfinity) live.push_back(static_cast<int>(i));
        if (!live.empty()) {
            ep.labeled.push_back(make_labeled(tb, node, edges, live, head));
        } else {
            ++ep.dead_end_states;  // no oracle label; excluded from the loss
        }
        int chosen;
        if (!live.empty() && rng.uniform() < beta) {
            chosen = live.front();  // a*: lexicographic tiebreak
        } else {
            const Vec feat = tb.features[node];
            const Vec z = stage1::embed_state(head, feat);
            const Vec sig = policy.signal == SignalMode::Off ? Vec(policy.d_sig, 0.0)
                                                             : lift_signal(policy, z);
            std::vector<Vec> opf;
            opf.reserve(edges.size());
            for (const tree::EdgeOp& e : edges)
                opf.push_back(tasks::op_features(tb.t.instance, e.op));
            const Vec probs =
                policy_distribution(policy, feat, sig, opf, cfg.temperature);
            double u = rng.uniform();
            chosen = static_cast<int>(probs.size()) - 1;
            for (size_t i = 0; i < probs.size(); ++i) {
                u -= probs[i];
                if (u < 0.0) {
                    chosen = static_cast<int>(i);
                    break;
                }
            }
        }
        ep.ops.push_back(edges[chosen].op.text);
        node = edges[chosen].child;
    }
    return ep;
}

namespace {

struct PolicyOptimizer {
    nn::Adam opt;
    explicit PolicyOptimizer(PolicyParams& p, const PolicyConfig& cfg)
        : opt(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay}) {
        nn::register_mlp(opt, p.up_proj);
        nn::register_mlp(opt, p.policy);
    }
};

// Cross-entropy of a* over the admissible set; accumulates gradients for the
// policy MLP and (signal on) the up-projector. Returns the loss.
double labeled_state_loss(const PolicyParams& policy, const LabeledState& ls,
                          nn::MlpGrads* up_grads, nn::MlpGrads* policy_grads) {
    const Vec sig = lift_signal(policy, ls.z);
    nn::MlpCache sig_cache;
    if (policy.signal == SignalMode::On)
        nn::mlp_forward(policy.up_proj, ls.z, &sig_cache);

    const size_t n_ops = ls.op_features.size();
    Vec x(policy.policy.d_in);
    std::copy(ls.state_features.begin(), ls.state_features.end(), x.begin());
    std::copy(sig.begin(), sig.end(), x.begin() + policy.d_feat);
    Vec scores(n_ops);
    std::vector<nn::MlpCache> caches(n_ops);
    for (size_t i = 0; i < n_ops; ++i) {
        std::copy(ls.op_features[i].begin(), ls.op_features[i].end(),
                  x.begin() + policy.d_feat + policy.d_sig);
        scores[i] = nn::mlp_forward(policy.policy, x, &caches[i])[0];
    }
    const Vec probs = softmax(scores, 1.0);
    const double loss = -std::log(std::max(probs[ls.label], 1e-300));
    if (!policy_grads) return loss;

    Vec dsig(policy.d_sig, 0.0);
    for (size_t i = 0; i < n_ops; ++i) {
        const double dscore = probs[i] - (static_cast<int>(i) == ls.label ? 1.0 : 0.0);
        if (dscore == 0.0) continue;
        nn::MlpGrads g(policy.policy);
        nn::mlp_backward_into(policy.policy, caches[i], Vec{dscore}, g);
        policy_grads->accumulate(g);
        for (int s = 0; s < policy.d_sig; ++s) dsig[s] += g.dx[policy.d_feat + s];
    }
    if (policy.signal == SignalMode::On && up_grads)
        nn::mlp_backward_into(policy.up_proj, sig_cache, dsig, *up_grads);
    return loss;
}

double train_on_dataset(PolicyParams& policy, PolicyOptimizer& optimizer,
                        const std::vector<LabeledState>& dataset, const PolicyConfig& cfg,
                        Rng& rng) {
    if (dataset.empty()) return 0.0;
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});
    double loss_sum = 0.0;
    long loss_count = 0;
    for (int pass = 0; pass < cfg.update_passes; ++pass) {
        Rng prng = rng.derive(static_cast<uint64_t>(pass));
        prng.shuffle(order);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            nn::MlpGrads up_grads(policy.up_proj);
            nn::MlpGrads policy_grads(policy.policy);
            double batch_loss = 0.0;
            for (size_t i = start; i < end; ++i)
                batch_loss +=
                    labeled_state_loss(policy, dataset[order[i]], &up_grads, &policy_grads);
            const double inv = 1.0 / static_cast<double>(end - start);
            up_grads.scale(inv);
            policy_grads.scale(inv);
            std::vector<std::span<const double>> spans = nn::mlp_grad_spans(up_grads);
            const auto pspans = nn::mlp_grad_spans(policy_grads);
            spans.insert(spans.end(), pspans.begin(), pspans.end());
            optimizer.opt.step(spans);
            loss_sum += batch_loss * inv;
            ++loss_count;
        }
    }
    return loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
}

PolicyParams train_common(const std::vector<TreeBundle>& trees, const HeadParams& head,
                          const PolicyConfig& cfg, Rng rng, PolicyCurves* curves,
                          bool offline_sft) {
    cfg.validate();
    if (trees.empty()) throw std::invalid_argument("policy training: no trees");
    const tasks::TaskId task = trees[0].t.instance.task;
    const int d_feat = tasks::feature_dim(task);
    const int d_op = tasks::op_feature_dim(task);
    const int n_embed = head.mlp.d_out;
    const uint64_t head_checksum = head.checksum();

    Rng init_rng = rng.derive("init");
    PolicyParams policy = init_policy(d_feat, d_op, n_embed, cfg, init_rng);
    PolicyOptimizer optimizer(policy, cfg);

    std::vector<LabeledState> dataset;  // grows monotonically (aggregation)

    if (offline_sft) {
        // The state distribution is the oracle trajectories alone.
        for (const TreeBundle& tb : trees) {
            int32_t node = 0;
            while (!tb.t.nodes[node].goal) {
                const std::vector<tree::EdgeOp> edges = tree::node_edge_ops(tb.t, node);
                if (edges.empty()) break;
                std::vector<int> live;
                for (size_t i = 0; i < edges.size(); ++i)
                    if (tb.d[edges[i].child] != tree::kInfinity)
                        live.push_back(static_cast<int>(i));
                if (live.empty()) break;
                dataset.push_back(make_labeled(tb, node, edges, live, head));
                node = edges[live.front()].child;
            }
        }
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = rng.derive("epoch").derive(static_cast<uint64_t>(epoch));
        double success_sum = 0.0;
        long rollouts_done = 0;
        if (!offline_sft) {
            const double beta = cfg.beta_at(epoch);
            for (size_t ti = 0; ti < trees.size(); ++ti) {
                for (int r = 0; r < cfg.rollouts_per_problem; ++r) {
                    Rng rrng = erng.derive(trees[ti].t.instance.seed).derive(
                        static_cast<uint64_t>(r));
                    Episode ep = rollout(trees[ti], policy, head, beta, rrng, cfg);
                    success_sum += ep.success ? 1.0 : 0.0;
                    ++rollouts_done;
                    for (LabeledState& ls : ep.labeled) dataset.push_back(std::move(ls));
                }
            }
        }
        Rng trng = erng.derive("update");
        const double ce = train_on_dataset(policy, optimizer, dataset, cfg, trng);
        if (curves) {
            curves->ce_loss.push_back(ce);
            curves->rollout_success.push_back(
                rollouts_done ? success_sum / static_cast<double>(rollouts_done) : 0.0);
            curves->dataset_size.push_back(dataset.size());
        }
    }
    if (head.checksum() != head_checksum)
        throw std::logic_error("policy training mutated the frozen head");
    return policy;
}

}  // namespace

PolicyParams dagger_train(const std::vector<TreeBundle>& trees, const HeadParams& head,
                          const PolicyConfig& cfg, Rng rng, PolicyCurves* curves) {
    return train_common(trees, head, cfg, rng, curves, false);
}

PolicyParams offline_sft_train(const std::vector<TreeBundle>& trees, const HeadParams& head,
                               const PolicyConfig& cfg, Rng rng, PolicyCurves* curves) {
    return train_common(trees, head, cfg, rng, curves, true);
}

InferResult infer(const tasks::ProblemInstance& inst, const PolicyParams& policy,
                  const HeadParams& head, int step_budget) {
    InferResult out;
    tasks::State s = inst.init_state;
    out.trace.states.push_back(s);
    for (int step = 0; step < step_budget; ++step) {
        if (tasks::is_goal(inst, s)) break;
        const std::vector<tasks::Operation> ops = tasks::admissible_ops(inst, s);
        if (ops.empty()) break;
        const Vec feat = tasks::featurize(inst, s);
        const Vec z = stage1::embed_state(head, feat);
        const Vec sig = lift_signal(policy, z);
        std::vector<Vec> opf;
        opf.reserve(ops.size());
        for (const tasks::Operation& op : ops) opf.push_back(tasks::op_features(inst, op));
        const Vec scores = policy_scores(policy, feat, sig, opf);
        size_t best = 0;
        for (size_t i = 1; i < scores.size(); ++i)
            if (scores[i] > scores[best]) best = i;  // ties: first in lexicographic order
        StepDiagnostic diag;
        diag.z = z;
        diag.radius = stage1::embed_radius(head, z);
        diag.op = ops[best].text;
        out.steps.push_back(std::move(diag));
        s = tasks::apply(inst, s, ops[best]);
        out.trace.ops.push_back(ops[best]);
        out.trace.states.push_back(s);
    }
    out.trace.success = tasks::is_goal(inst, s);
    return out;
}

}  // namespace treeball::stage2
