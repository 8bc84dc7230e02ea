#pragma once

#include <functional>
#include <optional>

#include "treeball/geometry.hpp"
#include "treeball/nn.hpp"
#include "treeball/tree.hpp"

namespace treeball::stage1 {

enum class GeometryMode { Hyperbolic, Euclidean };

const char* geometry_mode_name(GeometryMode m);
GeometryMode geometry_mode_from_name(const std::string& name);

struct HeadConfig {
    int n = 16;       // embedding dimension
    int hidden = 64;  // MLP hidden width
    double gamma = 0.1;        // radial ranking margin
    double gamma_prime = 0.1;  // metric margin
    double lambda = 1.0;       // metric loss weight
    double lr = 1e-3;
    double weight_decay = 0.01;
    int epochs = 20;
    int pairs_per_tree = 16;
    int triplets_per_tree = 16;
    int trees_per_batch = 8;
    int warmup_steps = 50;  // linear warmup, then cosine decay to zero
    double init_c = 1.0;    // curvature init (stored as log c: positivity is structural)
    GeometryMode mode = GeometryMode::Hyperbolic;
    // Distance-stratified sampling: dead ends dominate the trees (99%+ on
    // Game of 24), so uniform sampling starves the orderings among the few
    // live distance classes. Stratified draws balance the d classes.
    bool stratified = true;

    void validate() const;
};

struct HeadParams {
    nn::MlpParams mlp;  // d_feat -> hidden -> n
    double log_c = 0.0;
    GeometryMode mode = GeometryMode::Hyperbolic;

    double curvature() const { return std::exp(log_c); }
    // Checksum over all parameters; Stage 2 asserts it never changes.
    uint64_t checksum() const;
};

HeadParams init_head(int d_feat, const HeadConfig& cfg, Rng& rng);

// z = exp_map_origin(mlp(features)) projected into the ball (hyperbolic mode)
// or the raw MLP output (euclidean ablation).
Vec embed_state(const HeadParams& head, const Vec& features);

// Radius d(0, z) under the head's geometry.
double embed_radius(const HeadParams& head, const Vec& z);
// Pairwise distance under the head's geometry.
double embed_distance(const HeadParams& head, const Vec& zi, const Vec& zj);

struct PairSample {
    int32_t tree = 0;
    int32_t i = 0, j = 0;  // d(i) < d(j), infinity on the far side only
};
struct TripletSample {
    int32_t tree = 0;
    int32_t i = 0, j = 0, k = 0;  // d_T(i,j) < d_T(i,k)
    double weight = 1.0;
};

// Uniform over valid ordered pairs/triplets of one tree (rejection sampling);
// may return fewer than `count` when the tree admits few or none.
std::vector<PairSample> sample_pairs(const tree::TreeBundle& tb, int32_t tree_index,
                                     Rng& rng, int count);
std::vector<TripletSample> sample_triplets(const tree::TreeBundle& tb, int32_t tree_index,
                                           Rng& rng, int count);

// Distance-stratified variants: pairs draw two distinct d classes first, then
// members; triplet anchors are balanced over d classes.
std::vector<PairSample> sample_pairs_stratified(const tree::TreeBundle& tb,
                                                int32_t tree_index, Rng& rng, int count);
std::vector<TripletSample> sample_triplets_stratified(const tree::TreeBundle& tb,
                                                      int32_t tree_index, Rng& rng,
                                                      int count);

struct LossValue {
    double rank = 0.0;
    double metric = 0.0;
    int rank_terms = 0;
    int metric_terms = 0;
};

struct TrainCurves {
    std::vector<double> rank_loss;
    std::vector<double> metric_loss;
    std::vector<double> median_rho;  // sampled per-anchor structural fidelity
};

// Loss evaluation used both by training and by gradient-check tests: computes
// mean hinge losses over the given samples and, when grads is non-null,
// accumulates d(rank + lambda*metric)/d(params) into it.
struct HeadGrads {
    nn::MlpGrads mlp;
    double dlog_c = 0.0;
    explicit HeadGrads(const nn::MlpParams& p) : mlp(p) {}
};
// Sample indices address (group, node) in `features`: per-tree node features
// in the exact-tree mode, per-instance visited-state features in MC mode.
using FeatureGroups = std::vector<const std::vector<Vec>*>;
LossValue head_losses(const HeadParams& head, const FeatureGroups& features,
                      const std::vector<PairSample>& pairs,
                      const std::vector<TripletSample>& triplets, double lambda,
                      double gamma, double gamma_prime, HeadGrads* grads);

HeadParams train_head(const std::vector<tree::TreeBundle>& trees, const HeadConfig& cfg,
                      Rng rng, TrainCurves* curves = nullptr);

// ---------------------------------------------------------------------------
// Monte-Carlo variant (trees hidden from the estimator by interface).

using BehaviorPolicy = std::function<tasks::Operation(
    const tasks::ProblemInstance&, const tasks::State&,
    const std::vector<tasks::Operation>&, Rng&)>;

BehaviorPolicy uniform_policy();

struct McConfig {
    int k = 32;  // rollouts per instance
    int max_steps = 0;  // 0: task depth
    double eta = 0.95;  // triplet weight decay
};

struct McRolloutSet {
    std::vector<tasks::State> states;          // unique visited states
    std::vector<std::string> state_keys;       // canonical rendering per state
    Vec d_hat;                                 // Monte-Carlo value estimate per state
    std::vector<std::vector<int>> rollouts;    // state-index sequences, s0 first
    std::vector<bool> success;                 // per rollout
    int k = 0;
};

// Runs K rollouts from the initial state under the behavior policy; the
// enumerated tree is never consulted. d_hat(s) = 1 - (successful rollouts
// visiting s)/K.
McRolloutSet mc_estimate(const tasks::ProblemInstance& inst, const BehaviorPolicy& policy,
                         const McConfig& cfg, Rng& rng);

// Trajectory-local tree distance between rollout positions (r1,t) and (r2,u):
// offsets along/after the shared prefix.
int mc_tree_distance(const McRolloutSet& set, int r1, int t, int r2, int u);

struct McSamples {
    std::vector<PairSample> pairs;          // indices into set.states
    std::vector<TripletSample> triplets;    // weights eta^(dT(i,j)+dT(i,k))
};
McSamples sample_mc(const McRolloutSet& set, const McConfig& cfg, Rng& rng,
                    int pair_count, int triplet_count);

// Stage-1 training from rollouts alone (instances enumerated lazily per
// rollout, never as trees).
HeadParams train_head_mc(const std::vector<tasks::ProblemInstance>& instances,
                         const BehaviorPolicy& policy, const McConfig& mc,
                         const HeadConfig& cfg, Rng rng, TrainCurves* curves = nullptr);

}  // namespace treeball::stage1
