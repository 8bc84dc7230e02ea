#include "treeball/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace treeball::nn {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    return phi + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

MlpParams::MlpParams(int in, int hidden, int out)
    : d_in(in), d_hidden(hidden), d_out(out),
      w1(hidden, in), b1(hidden, 0.0), w2(out, hidden), b2(out, 0.0) {
    if (in <= 0 || hidden <= 0 || out <= 0)
        throw std::invalid_argument("MlpParams: dimensions must be positive");
}

size_t MlpParams::num_params() const {
    return w1.a.size() + b1.size() + w2.a.size() + b2.size();
}

void init_mlp(MlpParams& p, Rng& rng) {
    const double bound1 = std::sqrt(6.0 / p.d_in);
    for (double& w : p.w1.a) w = rng.uniform_sym(bound1);
    const double bound2 = std::sqrt(6.0 / p.d_hidden);
    for (double& w : p.w2.a) w = rng.uniform_sym(bound2);
    for (double& b : p.b1) b = 0.0;
    for (double& b : p.b2) b = 0.0;
}

Vec mlp_forward(const MlpParams& p, const Vec& x, MlpCache* cache) {
    if (static_cast<int>(x.size()) != p.d_in)
        throw std::invalid_argument("mlp_forward: input dimension mismatch");
    Vec pre(p.d_hidden);
    for (int h = 0; h < p.d_hidden; ++h) {
        double s = p.b1[h];
        const double* row = &p.w1.a[static_cast<size_t>(h) * p.d_in];
        for (int i = 0; i < p.d_in; ++i) s += row[i] * x[i];
        pre[h] = s;
    }
    Vec act(p.d_hidden);
    for (int h = 0; h < p.d_hidden; ++h) act[h] = gelu(pre[h]);
    Vec y(p.d_out);
    for (int o = 0; o < p.d_out; ++o) {
        double s = p.b2[o];
        const double* row = &p.w2.a[static_cast<size_t>(o) * p.d_hidden];
        for (int h = 0; h < p.d_hidden; ++h) s += row[h] * act[h];
        y[o] = s;
    }
    if (cache) {
        cache->x = x;
        cache->pre = std::move(pre);
        cache->act = std::move(act);
    }
    return y;
}

MlpGrads::MlpGrads(const MlpParams& p)
    : dw1(p.d_hidden, p.d_in), db1(p.d_hidden, 0.0),
      dw2(p.d_out, p.d_hidden), db2(p.d_out, 0.0), dx(p.d_in, 0.0) {}

void MlpGrads::accumulate(const MlpGrads& other) {
    for (size_t i = 0; i < dw1.a.size(); ++i) dw1.a[i] += other.dw1.a[i];
    for (size_t i = 0; i < db1.size(); ++i) db1[i] += other.db1[i];
    for (size_t i = 0; i < dw2.a.size(); ++i) dw2.a[i] += other.dw2.a[i];
    for (size_t i = 0; i < db2.size(); ++i) db2[i] += other.db2[i];
    for (size_t i = 0; i < dx.size(); ++i) dx[i] += other.dx[i];
}

void MlpGrads::scale(double s) {
    for (double& v : dw1.a) v *= s;
    for (double& v : db1) v *= s;
    for (double& v : dw2.a) v *= s;
    for (double& v : db2) v *= s;
    for (double& v : dx) v *= s;
}

void mlp_backward_into(const MlpParams& p, const MlpCache& cache, const Vec& dy,
                       MlpGrads& grads) {
    if (static_cast<int>(dy.size()) != p.d_out)
        throw std::invalid_argument("mlp_backward: upstream dimension mismatch");
    // Layer 2.
    Vec dact(p.d_hidden, 0.0);
    for (int o = 0; o < p.d_out; ++o) {
        const double g = dy[o];
        grads.db2[o] += g;
        const double* row = &p.w2.a[static_cast<size_t>(o) * p.d_hidden];
        double* drow = &grads.dw2.a[static_cast<size_t>(o) * p.d_hidden];
        for (int h = 0; h < p.d_hidden; ++h) {
            drow[h] += g * cache.act[h];
            dact[h] += g * row[h];
        }
    }
    // Activation + layer 1.
    for (int h = 0; h < p.d_hidden; ++h) {
        const double dpre = dact[h] * gelu_grad(cache.pre[h]);
        grads.db1[h] += dpre;
        const double* row = &p.w1.a[static_cast<size_t>(h) * p.d_in];
        double* drow = &grads.dw1.a[static_cast<size_t>(h) * p.d_in];
        for (int i = 0; i < p.d_in; ++i) {
            drow[i] += dpre * cache.x[i];
            grads.dx[i] += dpre * row[i];
        }
    }
}

MlpGrads mlp_backward(const MlpParams& p, const MlpCache& cache, const Vec& dy) {
    MlpGrads g(p);
    mlp_backward_into(p, cache, dy, g);
    return g;
}

void Adam::register_block(std::span<double> params, bool decay) {
    Block b;
    b.p = params;
    b.m.assign(params.size(), 0.0);
    b.v.assign(params.size(), 0.0);
    b.decay = decay;
    blocks_.push_back(std::move(b));
}

void Adam::step(const std::vector<std::span<const double>>& grads, double lr_scale) {
    if (grads.size() != blocks_.size())
        throw std::invalid_argument("Adam::step: gradient block count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double lr = cfg_.lr * lr_scale;
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
        Block& b = blocks_[bi];
        const std::span<const double>& g = grads[bi];
        if (g.size() != b.p.size())
            throw std::invalid_argument("Adam::step: gradient size mismatch");
        for (size_t i = 0; i < b.p.size(); ++i) {
            b.m[i] = cfg_.beta1 * b.m[i] + (1.0 - cfg_.beta1) * g[i];
            b.v[i] = cfg_.beta2 * b.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = b.m[i] / bc1;
            const double vhat = b.v[i] / bc2;
            double upd = mhat / (std::sqrt(vhat) + cfg_.eps);
            if (b.decay) upd += cfg_.weight_decay * b.p[i];
            b.p[i] -= lr * upd;
        }
    }
}

void register_mlp(Adam& opt, MlpParams& p) {
    opt.register_block(std::span<double>(p.w1.a), true);
    opt.register_block(std::span<double>(p.b1), false);
    opt.register_block(std::span<double>(p.w2.a), true);
    opt.register_block(std::span<double>(p.b2), false);
}

std::vector<std::span<const double>> mlp_grad_spans(const MlpGrads& g) {
    return {std::span<const double>(g.dw1.a), std::span<const double>(g.db1),
            std::span<const double>(g.dw2.a), std::span<const double>(g.db2)};
}

}  // namespace treeball::nn
