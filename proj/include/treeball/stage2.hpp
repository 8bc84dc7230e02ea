#pragma once

#include <string>
#include <vector>

#include "treeball/nn.hpp"
#include "treeball/stage1.hpp"
#include "treeball/tree.hpp"

namespace treeball::stage2 {

enum class SignalMode { On, Off, MeanBaseline };
const char* signal_mode_name(SignalMode m);
SignalMode signal_mode_from_name(const std::string& name);

struct PolicyConfig {
    int d_sig = 16;
    int up_hidden = 128;
    int policy_hidden = 128;
    double lr = 1e-3;
    double weight_decay = 0.0;
    int epochs = 5;                // DAgger epochs; beta annealed 1 -> 0 linearly
    int rollouts_per_problem = 8;
    double temperature = 0.7;      // rollout sampling temperature
    int update_passes = 2;         // passes over the aggregated dataset per epoch
    int batch_size = 32;
    SignalMode signal = SignalMode::On;

    void validate() const;
    double beta_at(int epoch) const;  // epoch in [0, epochs): 1 -> 0
};

struct PolicyParams {
    nn::MlpParams up_proj;  // n -> up_hidden -> d_sig (the lifted signal)
    nn::MlpParams policy;   // (d_feat + d_sig + d_op) -> hidden -> 1, applied per op
    SignalMode signal = SignalMode::On;
    int d_feat = 0, d_sig = 0, d_op = 0;
};

PolicyParams init_policy(int d_feat, int d_op, int n_embed, const PolicyConfig& cfg,
                         Rng& rng);

// g_psi(z), or the zero vector in the no-signal ablation.
Vec lift_signal(const PolicyParams& policy, const Vec& z);

// Per-op scores for the admissible list; inadmissible operations are never
// scored (their probability is exactly zero by construction).
Vec policy_scores(const PolicyParams& policy, const Vec& state_features, const Vec& signal,
                  const std::vector<Vec>& op_features);
Vec softmax(const Vec& scores, double temperature);
Vec policy_distribution(const PolicyParams& policy, const Vec& state_features,
                        const Vec& signal, const std::vector<Vec>& op_features,
                        double temperature);

// One DAgger-labeled visited state.
struct LabeledState {
    Vec state_features;
    Vec z;                       // frozen-head embedding
    std::vector<Vec> op_features;
    std::vector<std::string> op_texts;
    int label = -1;              // index of a* (lexicographic minimum of the oracle set)
};

struct Episode {
    std::vector<int32_t> nodes;     // visited tree nodes
    std::vector<std::string> ops;   // chosen op per step
    bool success = false;
    std::vector<LabeledState> labeled;  // states with a nonempty oracle set
    int dead_end_states = 0;            // visited states with an empty oracle set
};

// Mixture rollout: at each step take a* with probability beta, otherwise
// sample the policy at the configured temperature.
Episode rollout(const tree::TreeBundle& tb, const PolicyParams& policy,
                const stage1::HeadParams& head, double beta, Rng& rng,
                const PolicyConfig& cfg);

struct PolicyCurves {
    std::vector<double> ce_loss;        // per epoch
    std::vector<double> rollout_success;  // per epoch
    std::vector<size_t> dataset_size;     // aggregated, per epoch (monotone)
};

PolicyParams dagger_train(const std::vector<tree::TreeBundle>& trees,
                          const stage1::HeadParams& head, const PolicyConfig& cfg, Rng rng,
                          PolicyCurves* curves = nullptr);

// Ablation: the training distribution is the oracle trajectory states only.
PolicyParams offline_sft_train(const std::vector<tree::TreeBundle>& trees,
                               const stage1::HeadParams& head, const PolicyConfig& cfg,
                               Rng rng, PolicyCurves* curves = nullptr);

struct StepDiagnostic {
    Vec z;
    double radius = 0.0;
    std::string op;
};

struct InferResult {
    tasks::Trace trace;
    std::vector<StepDiagnostic> steps;  // exactly one per step boundary
};

// Greedy, temperature-free, tree-free inference.
InferResult infer(const tasks::ProblemInstance& inst, const PolicyParams& policy,
                  const stage1::HeadParams& head, int step_budget);

}  // namespace treeball::stage2
