#pragma once

#include <span>
#include <vector>

#include "treeball/common.hpp"

namespace treeball::nn {

struct Mat {
    int rows = 0;
    int cols = 0;
    Vec a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

double gelu(double x);
double gelu_grad(double x);

// 2-layer perceptron y = W2 * gelu(W1 x + b1) + b2.
struct MlpParams {
    int d_in = 0, d_hidden = 0, d_out = 0;
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;

    MlpParams() = default;
    MlpParams(int in, int hidden, int out);
    size_t num_params() const;
};

// Uniform Kaiming-style fan-in initialization, biases zero.
void init_mlp(MlpParams& p, Rng& rng);

struct MlpCache {
    Vec x;
    Vec pre;  // W1 x + b1
    Vec act;  // gelu(pre)
};

Vec mlp_forward(const MlpParams& p, const Vec& x, MlpCache* cache = nullptr);

struct MlpGrads {
    Mat dw1;
    Vec db1;
    Mat dw2;
    Vec db2;
    Vec dx;

    explicit MlpGrads(const MlpParams& p);
    void accumulate(const MlpGrads& other);
    void scale(double s);
};

// Exact gradients of the forward map; dy is dL/dy.
MlpGrads mlp_backward(const MlpParams& p, const MlpCache& cache, const Vec& dy);
// Variant accumulating into existing grads (skips allocation in hot loops).
void mlp_backward_into(const MlpParams& p, const MlpCache& cache, const Vec& dy,
                       MlpGrads& grads);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled-weight-decay Adam over registered parameter blocks. Blocks are
// registered once, in a fixed order; step() consumes gradients in that order.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    // decay = false exempts the block from weight decay (biases, log_c).
    void register_block(std::span<double> params, bool decay = true);
    void step(const std::vector<std::span<const double>>& grads, double lr_scale = 1.0);
    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Block {
        std::span<double> p;
        Vec m, v;
        bool decay;
    };
    AdamConfig cfg_;
    std::vector<Block> blocks_;
    long t_ = 0;
};

// Registers the four tensors of an MLP (weight decay on matrices only).
void register_mlp(Adam& opt, MlpParams& p);
std::vector<std::span<const double>> mlp_grad_spans(const MlpGrads& g);

}  // namespace treeball::nn
