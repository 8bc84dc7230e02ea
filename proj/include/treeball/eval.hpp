#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treeball/stage1.hpp"
#include "treeball/stage2.hpp"
#include "treeball/tree.hpp"

namespace treeball::eval {

struct EvalReport {
    std::string task;
    int64_t instances = 0;
    int64_t successes = 0;
    double accuracy = 0.0;
    double mean_steps = 0.0;
    uint64_t seed = 0;
    std::string config_hash;
};

// Pluggable per-step action choice, so the oracle upper bound and random
// baselines run through the same unrolling loop as the trained policy.
class OpSelector {
public:
    virtual ~OpSelector() = default;
    virtual void begin_instance(const tasks::ProblemInstance&) {}
    virtual tasks::Operation select(const tasks::ProblemInstance& inst,
                                    const tasks::State& s,
                                    const std::vector<tasks::Operation>& ops) = 0;
};

class PolicySelector : public OpSelector {
public:
    PolicySelector(const stage2::PolicyParams& policy, const stage1::HeadParams& head)
        : policy_(policy), head_(head) {}
    tasks::Operation select(const tasks::ProblemInstance& inst, const tasks::State& s,
                            const std::vector<tasks::Operation>& ops) override;

private:
    const stage2::PolicyParams& policy_;
    const stage1::HeadParams& head_;
};

// Follows the enumerated tree's oracle; always succeeds on solvable instances.
class OracleSelector : public OpSelector {
public:
    explicit OracleSelector(int64_t node_cap = tree::kDefaultNodeCap) : node_cap_(node_cap) {}
    void begin_instance(const tasks::ProblemInstance& inst) override;
    tasks::Operation select(const tasks::ProblemInstance& inst, const tasks::State& s,
                            const std::vector<tasks::Operation>& ops) override;

private:
    int64_t node_cap_;
    tree::SearchTree t_;
    tree::DistanceMap d_;
    int32_t node_ = 0;
};

class UniformSelector : public OpSelector {
public:
    explicit UniformSelector(Rng rng) : rng_(rng) {}
    tasks::Operation select(const tasks::ProblemInstance&, const tasks::State&,
                            const std::vector<tasks::Operation>& ops) override {
        return ops[rng_.uniform_index(ops.size())];
    }

private:
    Rng rng_;
};

EvalReport evaluate(const std::vector<tasks::ProblemInstance>& instances,
                    OpSelector& selector, int step_budget = 0);
EvalReport evaluate_policy(const std::vector<tasks::ProblemInstance>& instances,
                           const stage2::PolicyParams& policy,
                           const stage1::HeadParams& head, int step_budget = 0);

// Rule-chaining accuracy per gold chain length; absent bins are not reported.
std::map<int, EvalReport> depth_stratified(
    const std::vector<tasks::ProblemInstance>& instances,
    const stage2::PolicyParams& policy, const stage1::HeadParams& head);

// Spearman between d(s) (infinity mapped to max+1) and d(0, z) over a
// d-class-balanced state sample (up to per_class states per distance value,
// pooled across trees). Dead ends outnumber live states by orders of
// magnitude, so the unbalanced pooled Spearman is bounded near zero by the
// giant tie alone; balancing makes the statistic informative.
double radial_spearman(const stage1::HeadParams& head,
                       const std::vector<tree::TreeBundle>& trees, int per_class, Rng rng);

struct AnchorCorrelation {
    int32_t tree_index = 0;
    int32_t anchor = 0;
    double rho = 0.0;
};
struct AnchorSpearmanResult {
    std::vector<AnchorCorrelation> anchors;
    double median_rho = 0.0;
    int skipped = 0;  // anchors with degenerate rank inputs
};
// Per-anchor Spearman between d_T(anchor, .) and d(z_anchor, z_.). Co-tree
// nodes are sampled balanced across d_T values (stratify=true): tree distance
// concentrates on a single dominant value from most anchors, and that tie
// block alone caps the uniform-sampled statistic well below 1 for any
// non-degenerate embedding.
AnchorSpearmanResult anchor_spearman(const stage1::HeadParams& head,
                                     const std::vector<tree::TreeBundle>& trees,
                                     int anchors_per_tree, int nodes_per_anchor, Rng rng,
                                     bool stratify = true);

// Coordinate mean of training-state embeddings, projected into the ball.
Vec mean_embedding(const stage1::HeadParams& head,
                   const std::vector<tree::TreeBundle>& trees);

struct SignalDivergence {
    double kl = 0.0;        // D_KL(p+ || p-) over the admissible set
    double d_origin = 0.0;  // d(0, z)
};
struct DivergenceResult {
    std::vector<SignalDivergence> states;
    std::optional<double> spearman_kl_radius;
};
// p+ uses g(z); p- retains the splice position but feeds g(z_bar). States are
// collected along solution-bearing paths of the given trees.
DivergenceResult signal_divergence(const stage2::PolicyParams& policy,
                                   const stage1::HeadParams& head,
                                   const std::vector<tree::TreeBundle>& trees,
                                   const Vec& z_bar, int max_states = 0);

double kl_divergence(const Vec& scores_p, const Vec& scores_q, double temperature);

}  // namespace treeball::eval
