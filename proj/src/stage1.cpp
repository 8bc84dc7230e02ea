#include "treeball/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <stdexcept>

#include "treeball/math_stats.hpp"

namespace treeball::stage1 {

using geometry::Curvature;
using tree::kInfinity;
using tree::TreeBundle;

const char* geometry_mode_name(GeometryMode m) {
    return m == GeometryMode::Hyperbolic ? "hyperbolic" : "euclidean";
}

GeometryMode geometry_mode_from_name(const std::string& name) {
    if (name == "hyperbolic") return GeometryMode::Hyperbolic;
    if (name == "euclidean") return GeometryMode::Euclidean;
    throw std::invalid_argument("unknown geometry mode: " + name);
}

void HeadConfig::validate() const {
    if (n <= 0 || hidden <= 0) throw std::invalid_argument("HeadConfig: bad dimensions");
    if (!(gamma > 0.0) || !(gamma_prime > 0.0))
        throw std::invalid_argument("HeadConfig: margins must be positive");
    if (lambda < 0.0) throw std::invalid_argument("HeadConfig: lambda must be >= 0");
    if (epochs <= 0 || trees_per_batch <= 0)
        throw std::invalid_argument("HeadConfig: bad training schedule");
    if (!(init_c > 0.0)) throw std::invalid_argument("HeadConfig: init_c must be positive");
}

uint64_t HeadParams::checksum() const {
    uint64_t h = 1469598103934665603ULL;
    const auto mix = [&h](double v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        h ^= bits;
        h *= 1099511628211ULL;
    };
    for (double v : mlp.w1.a) mix(v);
    for (double v : mlp.b1) mix(v);
    for (double v : mlp.w2.a) mix(v);
    for (double v : mlp.b2) mix(v);
    mix(log_c);
    return h;
}

HeadParams init_head(int d_feat, const HeadConfig& cfg, Rng& rng) {
    cfg.validate();
    HeadParams head;
    head.mlp = nn::MlpParams(d_feat, cfg.hidden, cfg.n);
    nn::init_mlp(head.mlp, rng);
    head.log_c = std::log(cfg.init_c);
    head.mode = cfg.mode;
    return head;
}

namespace {

struct EmbedCache {
    nn::MlpCache mlp;
    Vec u;  // MLP output (tangent vector in hyperbolic mode)
    Vec z;
};

Vec embed_with_cache(const HeadParams& head, const Vec& features, EmbedCache& cache) {
    cache.u = nn::mlp_forward(head.mlp, features, &cache.mlp);
    if (head.mode == GeometryMode::Euclidean) {
        cache.z = cache.u;
        return cache.z;
    }
    const Curvature c(head.curvature());
    cache.z = geometry::project_to_ball(geometry::exp_map_origin(cache.u, c), c);
    return cache.z;
}

// dz -> MLP grads and dL/d(log c); the curvature chain runs through both the
// exp map and the projection clamp.
void embed_backward(const HeadParams& head, const EmbedCache& cache, const Vec& dz,
                    HeadGrads& grads) {
    if (head.mode == GeometryMode::Euclidean) {
        nn::mlp_backward_into(head.mlp, cache.mlp, dz, grads.mlp);
        return;
    }
    const double cv = head.curvature();
    const Curvature c(cv);
    const Vec z0 = geometry::exp_map_origin(cache.u, c);
    double dc = geometry::project_to_ball_backward_dc(z0, c, dz);
    const Vec dz0 = geometry::project_to_ball_backward(z0, c, dz);
    const geometry::ExpMapGrad eg = geometry::exp_map_origin_backward(cache.u, c, dz0);
    dc += eg.dc;
    grads.dlog_c += dc * cv;  // d/d(log c) = c * d/dc
    nn::mlp_backward_into(head.mlp, cache.mlp, eg.dv, grads.mlp);
}

constexpr double kTinyNorm = 1e-15;

}  // namespace

Vec embed_state(const HeadParams& head, const Vec& features) {
    EmbedCache cache;
    return embed_with_cache(head, features, cache);
}

double embed_radius(const HeadParams& head, const Vec& z) {
    if (head.mode == GeometryMode::Euclidean) return geometry::norm(z);
    return geometry::distance_to_origin(z, Curvature(head.curvature()));
}

double embed_distance(const HeadParams& head, const Vec& zi, const Vec& zj) {
    if (head.mode == GeometryMode::Euclidean) {
        double s = 0.0;
        for (size_t i = 0; i < zi.size(); ++i) s += (zi[i] - zj[i]) * (zi[i] - zj[i]);
        return std::sqrt(s);
    }
    const Curvature c(head.curvature());
    return geometry::geodesic_distance(zi, zj, c);
}

std::vector<PairSample> sample_pairs(const TreeBundle& tb, int32_t tree_index, Rng& rng,
                                     int count) {
    std::vector<PairSample> out;
    const int32_t n = tb.t.size();
    if (n < 2) return out;
    const int max_attempts = count * 200;
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < count;
         ++attempt) {
        const int32_t i = static_cast<int32_t>(rng.uniform_index(n));
        const int32_t j = static_cast<int32_t>(rng.uniform_index(n));
        const int32_t di = tb.d[i], dj = tb.d[j];
        if (di == dj) continue;  // includes dead-end/dead-end pairs: no defined order
        if (di < dj) out.push_back(PairSample{tree_index, i, j});
        else out.push_back(PairSample{tree_index, j, i});
    }
    return out;
}

std::vector<TripletSample> sample_triplets(const TreeBundle& tb, int32_t tree_index,
                                           Rng& rng, int count) {
    std::vector<TripletSample> out;
    const int32_t n = tb.t.size();
    if (n < 3) return out;
    const int max_attempts = count * 200;
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < count;
         ++attempt) {
        const int32_t i = static_cast<int32_t>(rng.uniform_index(n));
        const int32_t j = static_cast<int32_t>(rng.uniform_index(n));
        const int32_t k = static_cast<int32_t>(rng.uniform_index(n));
        if (i == j || i == k || j == k) continue;
        const int32_t dij = tree::tree_distance(tb.t, i, j);
        const int32_t dik = tree::tree_distance(tb.t, i, k);
        if (dij == dik) continue;
        if (dij < dik) out.push_back(TripletSample{tree_index, i, j, k, 1.0});
        else out.push_back(TripletSample{tree_index, i, k, j, 1.0});
    }
    return out;
}

namespace {

struct DistanceClass {
    int32_t d;
    std::vector<int32_t> members;
};

// Nodes grouped by distance class, optionally subdivided by node depth: the
// dead class spans all depths, and its shallow strata differ featurally from
// the deep ones but hold a sliver of the mass.
std::vector<DistanceClass> distance_classes(const TreeBundle& tb, bool split_depth) {
    std::map<std::pair<int32_t, int32_t>, std::vector<int32_t>> classes;
    for (int32_t id = 0; id < tb.t.size(); ++id)
        classes[{tb.d[id], split_depth ? tb.t.nodes[id].depth : 0}].push_back(id);
    std::vector<DistanceClass> out;
    out.reserve(classes.size());
    for (auto& [key, members] : classes)
        out.push_back(DistanceClass{key.first, std::move(members)});
    return out;
}

void sample_pairs_from_classes(const std::vector<DistanceClass>& classes,
                               int32_t tree_index, Rng& rng, int count,
                               std::vector<PairSample>& out) {
    if (classes.size() < 2) return;
    const int max_attempts = count * 50;
    int produced = 0;
    for (int attempt = 0; attempt < max_attempts && produced < count; ++attempt) {
        const size_t ci = rng.uniform_index(classes.size());
        const size_t cj = rng.uniform_index(classes.size());
        if (classes[ci].d == classes[cj].d) continue;  // no defined order
        const size_t lo = classes[ci].d < classes[cj].d ? ci : cj;
        const size_t hi = lo == ci ? cj : ci;
        const int32_t i = classes[lo].members[rng.uniform_index(classes[lo].members.size())];
        const int32_t j = classes[hi].members[rng.uniform_index(classes[hi].members.size())];
        out.push_back(PairSample{tree_index, i, j});
        ++produced;
    }
}

}  // namespace

std::vector<PairSample> sample_pairs_stratified(const TreeBundle& tb, int32_t tree_index,
                                                Rng& rng, int count) {
    // Half balanced over plain d classes, half over (d, depth) cells.
    std::vector<PairSample> out;
    sample_pairs_from_classes(distance_classes(tb, false), tree_index, rng, count / 2, out);
    sample_pairs_from_classes(distance_classes(tb, true), tree_index, rng,
                              count - count / 2, out);
    return out;
}

std::vector<TripletSample> sample_triplets_stratified(const TreeBundle& tb,
                                                      int32_t tree_index, Rng& rng,
                                                      int count) {
    std::vector<TripletSample> out;
    const int32_t n = tb.t.size();
    if (n < 3) return out;
    const auto classes = distance_classes(tb, false);
    const int max_attempts = count * 200;
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < count;
         ++attempt) {
        const auto& cls = classes[rng.uniform_index(classes.size())].members;
        const int32_t i = cls[rng.uniform_index(cls.size())];
        const int32_t j = static_cast<int32_t>(rng.uniform_index(n));
        const int32_t k = static_cast<int32_t>(rng.uniform_index(n));
        if (i == j || i == k || j == k) continue;
        const int32_t dij = tree::tree_distance(tb.t, i, j);
        const int32_t dik = tree::tree_distance(tb.t, i, k);
        if (dij == dik) continue;
        if (dij < dik) out.push_back(TripletSample{tree_index, i, j, k, 1.0});
        else out.push_back(TripletSample{tree_index, i, k, j, 1.0});
    }
    return out;
}

LossValue head_losses(const HeadParams& head, const FeatureGroups& features,
                      const std::vector<PairSample>& pairs,
                      const std::vector<TripletSample>& triplets, double lambda,
                      double gamma, double gamma_prime, HeadGrads* grads) {
    const bool hyper = head.mode == GeometryMode::Hyperbolic;
    const double cv = head.curvature();

    // Each referenced node is embedded once; upstream dL/dz accumulates per
    // slot before a single backward pass.
    std::map<std::pair<int32_t, int32_t>, int> slot_of;
    std::vector<EmbedCache> caches;
    std::vector<Vec> dzs;
    const auto slot = [&](int32_t group, int32_t node) {
        const auto key = std::make_pair(group, node);
        auto it = slot_of.find(key);
        if (it != slot_of.end()) return it->second;
        const int idx = static_cast<int>(caches.size());
        slot_of.emplace(key, idx);
        caches.emplace_back();
        embed_with_cache(head, (*features[group])[node], caches.back());
        dzs.emplace_back(caches.back().z.size(), 0.0);
        return idx;
    };

    LossValue out;
    double dc_direct = 0.0;  // d(loss)/dc at fixed embeddings (hyperbolic only)

    // Radius and its gradient, guarded at the origin.
    const auto radius = [&](int s) {
        const Vec& z = caches[s].z;
        if (geometry::norm(z) < kTinyNorm) return 0.0;
        return hyper ? geometry::distance_to_origin(z, Curvature(cv)) : geometry::norm(z);
    };
    const auto add_radius_grad = [&](int s, double scale) {
        const Vec& z = caches[s].z;
        const double r = geometry::norm(z);
        if (r < kTinyNorm) return;
        if (hyper) {
            const Vec g = geometry::grad_distance_to_origin(z, Curvature(cv));
            for (size_t i = 0; i < z.size(); ++i) dzs[s][i] += scale * g[i];
            dc_direct += scale * geometry::grad_distance_to_origin_wrt_c(z, Curvature(cv));
        } else {
            for (size_t i = 0; i < z.size(); ++i) dzs[s][i] += scale * z[i] / r;
        }
    };

    const double pair_w = pairs.empty() ? 0.0 : 1.0 / static_cast<double>(pairs.size());
    for (const PairSample& p : pairs) {
        const int si = slot(p.tree, p.i);
        const int sj = slot(p.tree, p.j);
        const double h = radius(si) - radius(sj) + gamma;
        if (h <= 0.0) continue;
        out.rank += h * pair_w;
        ++out.rank_terms;
        if (grads) {
            add_radius_grad(si, pair_w);
            add_radius_grad(sj, -pair_w);
        }
    }

    const double trip_w =
        triplets.empty() ? 0.0 : 1.0 / static_cast<double>(triplets.size());
    const auto pair_dist_grad = [&](int sa, int sb, double scale) {
        const Vec& za = caches[sa].z;
        const Vec& zb = caches[sb].z;
        if (hyper) {
            const geometry::GeodesicGrad g =
                geometry::grad_geodesic_distance(za, zb, Curvature(cv));
            for (size_t i = 0; i < za.size(); ++i) {
                dzs[sa][i] += scale * g.dx[i];
                dzs[sb][i] += scale * g.dy[i];
            }
            dc_direct += scale * g.dc;
        } else {
            const double d = embed_distance(head, za, zb);
            for (size_t i = 0; i < za.size(); ++i) {
                const double u = (za[i] - zb[i]) / d;
                dzs[sa][i] += scale * u;
                dzs[sb][i] -= scale * u;
            }
        }
    };
    for (const TripletSample& t : triplets) {
        const int si = slot(t.tree, t.i);
        const int sj = slot(t.tree, t.j);
        const int sk = slot(t.tree, t.k);
        double dij = 0.0, dik = 0.0;
        bool gij = false, gik = false;
        {
            double sq = 0.0;
            for (size_t i = 0; i < caches[si].z.size(); ++i) {
                const double dd = caches[si].z[i] - caches[sj].z[i];
                sq += dd * dd;
            }
            if (sq > 1e-18) {
                dij = embed_distance(head, caches[si].z, caches[sj].z);
                gij = true;
            }
            sq = 0.0;
            for (size_t i = 0; i < caches[si].z.size(); ++i) {
                const double dd = caches[si].z[i] - caches[sk].z[i];
                sq += dd * dd;
            }
            if (sq > 1e-18) {
                dik = embed_distance(head, caches[si].z, caches[sk].z);
                gik = true;
            }
        }
        const double h = dij - dik + gamma_prime;
        if (h <= 0.0) continue;
        out.metric += t.weight * h * trip_w;
        ++out.metric_terms;
        if (grads) {
            const double scale = lambda * t.weight * trip_w;
            if (gij) pair_dist_grad(si, sj, scale);
            if (gik) pair_dist_grad(si, sk, -scale);
        }
    }

    if (grads) {
        for (const auto& [key, s] : slot_of) {
            bool any = false;
            for (double v : dzs[s])
                if (v != 0.0) {
                    any = true;
                    break;
                }
            if (any) embed_backward(head, caches[s], dzs[s], *grads);
        }
        if (hyper) grads->dlog_c += dc_direct * cv;
    }
    return out;
}

namespace {

double lr_scale_at(long step, long total, int warmup) {
    if (warmup > 0 && step < warmup) return static_cast<double>(step + 1) / warmup;
    if (total <= warmup) return 1.0;
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
    return 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, progress)));
}

// Sampled structural-fidelity estimate recorded in the training curves.
double sampled_median_rho(const HeadParams& head, const std::vector<TreeBundle>& trees,
                          Rng rng) {
    Vec rhos;
    const size_t n_trees = std::min<size_t>(trees.size(), 8);
    for (size_t ti = 0; ti < n_trees; ++ti) {
        const TreeBundle& tb = trees[ti];
        if (tb.t.size() < 4) continue;
        for (int a = 0; a < 2; ++a) {
            const int32_t anchor = static_cast<int32_t>(rng.uniform_index(tb.t.size()));
            const Vec za = embed_state(head, tb.features[anchor]);
            Vec dt, dd;
            const int sample = std::min<int>(30, tb.t.size() - 1);
            for (int s = 0; s < sample; ++s) {
                const int32_t other = static_cast<int32_t>(rng.uniform_index(tb.t.size()));
                if (other == anchor) continue;
                dt.push_back(static_cast<double>(tree::tree_distance(tb.t, anchor, other)));
                dd.push_back(embed_distance(head, za, embed_state(head, tb.features[other])));
            }
            if (const auto rho = stats::spearman(dt, dd)) rhos.push_back(*rho);
        }
    }
    return rhos.empty() ? 0.0 : stats::median(rhos);
}

}  // namespace

HeadParams train_head(const std::vector<TreeBundle>& trees, const HeadConfig& cfg, Rng rng,
                      TrainCurves* curves) {
    cfg.validate();
    if (trees.empty()) throw std::invalid_argument("train_head: no trees");
    const int d_feat = static_cast<int>(trees[0].features.at(0).size());
    Rng init_rng = rng.derive("init");
    HeadParams head = init_head(d_feat, cfg, init_rng);

    nn::Adam opt(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    nn::register_mlp(opt, head.mlp);
    opt.register_block(std::span<double>(&head.log_c, 1), false);

    FeatureGroups groups;
    groups.reserve(trees.size());
    for (const TreeBundle& tb : trees) groups.push_back(&tb.features);

    std::vector<int32_t> order(trees.size());
    std::iota(order.begin(), order.end(), 0);
    const long batches_per_epoch =
        (static_cast<long>(trees.size()) + cfg.trees_per_batch - 1) / cfg.trees_per_batch;
    const long total_steps = batches_per_epoch * cfg.epochs;
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = rng.derive(static_cast<uint64_t>(epoch));
        erng.shuffle(order);
        double rank_sum = 0.0, metric_sum = 0.0;
        long batches = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(cfg.trees_per_batch)) {
            std::vector<PairSample> pairs;
            std::vector<TripletSample> triplets;
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(cfg.trees_per_batch));
            for (size_t oi = start; oi < end; ++oi) {
                const int32_t ti = order[oi];
                Rng srng = erng.derive(static_cast<uint64_t>(ti));
                const auto p = cfg.stratified
                                   ? sample_pairs_stratified(trees[ti], ti, srng,
                                                             cfg.pairs_per_tree)
                                   : sample_pairs(trees[ti], ti, srng, cfg.pairs_per_tree);
                pairs.insert(pairs.end(), p.begin(), p.end());
                const auto tr = cfg.stratified
                                    ? sample_triplets_stratified(trees[ti], ti, srng,
                                                                 cfg.triplets_per_tree)
                                    : sample_triplets(trees[ti], ti, srng,
                                                      cfg.triplets_per_tree);
                triplets.insert(triplets.end(), tr.begin(), tr.end());
            }
            HeadGrads grads(head.mlp);
            const LossValue loss = head_losses(head, groups, pairs, triplets, cfg.lambda,
                                               cfg.gamma, cfg.gamma_prime, &grads);
            auto spans = nn::mlp_grad_spans(grads.mlp);
            spans.push_back(std::span<const double>(&grads.dlog_c, 1));
            opt.step(spans, lr_scale_at(step, total_steps, cfg.warmup_steps));
            ++step;
            rank_sum += loss.rank;
            metric_sum += loss.metric;
            ++batches;
        }
        if (curves) {
            curves->rank_loss.push_back(rank_sum / std::max(1L, batches));
            curves->metric_loss.push_back(metric_sum / std::max(1L, batches));
            curves->median_rho.push_back(
                sampled_median_rho(head, trees, rng.derive("rho").derive(epoch)));
        }
    }
    return head;
}

// ---------------------------------------------------------------------------
// Monte-Carlo variant

BehaviorPolicy uniform_policy() {
    return [](const tasks::ProblemInstance&, const tasks::State&,
              const std::vector<tasks::Operation>& ops, Rng& rng) {
        return ops[rng.uniform_index(ops.size())];
    };
}

McRolloutSet mc_estimate(const tasks::ProblemInstance& inst, const BehaviorPolicy& policy,
                         const McConfig& cfg, Rng& rng) {
    McRolloutSet set;
    set.k = cfg.k;
    const int max_steps = cfg.max_steps > 0 ? cfg.max_steps : tasks::task_depth(inst.task);
    std::map<std::string, int> index;
    const auto state_id = [&](const tasks::State& s) {
        std::string key = tasks::state_text(inst, s);
        auto it = index.find(key);
        if (it != index.end()) return it->second;
        const int id = static_cast<int>(set.states.size());
        index.emplace(std::move(key), id);
        set.states.push_back(s);
        set.state_keys.push_back(tasks::state_text(inst, s));
        return id;
    };
    for (int r = 0; r < cfg.k; ++r) {
        Rng rrng = rng.derive(static_cast<uint64_t>(r));
        tasks::State s = inst.init_state;
        std::vector<int> path = {state_id(s)};
        for (int step = 0; step < max_steps; ++step) {
            if (tasks::is_goal(inst, s)) break;
            const auto ops = tasks::admissible_ops(inst, s);
            if (ops.empty()) break;
            const tasks::Operation op = policy(inst, s, ops, rrng);
            s = tasks::apply(inst, s, op);
            path.push_back(state_id(s));
        }
        set.success.push_back(tasks::is_goal(inst, s));
        set.rollouts.push_back(std::move(path));
    }
    // d_hat(s) = 1 - (# successful rollouts visiting s) / K.
    std::vector<int> wins(set.states.size(), 0);
    for (size_t r = 0; r < set.rollouts.size(); ++r) {
        if (!set.success[r]) continue;
        std::vector<int> uniq = set.rollouts[r];
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (int s : uniq) ++wins[s];
    }
    set.d_hat.resize(set.states.size());
    for (size_t s = 0; s < set.states.size(); ++s)
        set.d_hat[s] = 1.0 - static_cast<double>(wins[s]) / static_cast<double>(cfg.k);
    return set;
}

int mc_tree_distance(const McRolloutSet& set, int r1, int t, int r2, int u) {
    if (r1 == r2) return std::abs(t - u);
    const std::vector<int>& a = set.rollouts[r1];
    const std::vector<int>& b = set.rollouts[r2];
    size_t q = 0;  // number of leading shared states
    while (q < a.size() && q < b.size() && a[q] == b[q]) ++q;
    const int last = static_cast<int>(q) - 1;
    if (t <= last && u <= last) return std::abs(t - u);
    if (t <= last) return u - t;
    if (u <= last) return t - u;
    return (t - last) + (u - last);
}

McSamples sample_mc(const McRolloutSet& set, const McConfig& cfg, Rng& rng, int pair_count,
                    int triplet_count) {
    McSamples out;
    const size_t n_states = set.states.size();
    if (n_states >= 2) {
        const int max_attempts = pair_count * 200;
        for (int a = 0; a < max_attempts && static_cast<int>(out.pairs.size()) < pair_count;
             ++a) {
            const int i = static_cast<int>(rng.uniform_index(n_states));
            const int j = static_cast<int>(rng.uniform_index(n_states));
            if (set.d_hat[i] == set.d_hat[j]) continue;
            if (set.d_hat[i] < set.d_hat[j]) out.pairs.push_back(PairSample{0, i, j});
            else out.pairs.push_back(PairSample{0, j, i});
        }
    }
    const size_t n_roll = set.rollouts.size();
    const int max_attempts = triplet_count * 200;
    for (int a = 0; a < max_attempts && static_cast<int>(out.triplets.size()) < triplet_count;
         ++a) {
        const int ra = static_cast<int>(rng.uniform_index(n_roll));
        const int rb = static_cast<int>(rng.uniform_index(n_roll));
        const int rc = static_cast<int>(rng.uniform_index(n_roll));
        const int pa = static_cast<int>(rng.uniform_index(set.rollouts[ra].size()));
        const int pb = static_cast<int>(rng.uniform_index(set.rollouts[rb].size()));
        const int pc = static_cast<int>(rng.uniform_index(set.rollouts[rc].size()));
        const int i = set.rollouts[ra][pa];
        int j = set.rollouts[rb][pb];
        int k = set.rollouts[rc][pc];
        if (i == j || i == k || j == k) continue;
        int dij = mc_tree_distance(set, ra, pa, rb, pb);
        int dik = mc_tree_distance(set, ra, pa, rc, pc);
        if (dij == dik) continue;
        if (dij > dik) {
            std::swap(j, k);
            std::swap(dij, dik);
        }
        const double w = std::pow(cfg.eta, static_cast<double>(dij + dik));
        out.triplets.push_back(TripletSample{0, i, j, k, w});
    }
    return out;
}

HeadParams train_head_mc(const std::vector<tasks::ProblemInstance>& instances,
                         const BehaviorPolicy& policy, const McConfig& mc,
                         const HeadConfig& cfg, Rng rng, TrainCurves* curves) {
    cfg.validate();
    if (instances.empty()) throw std::invalid_argument("train_head_mc: no instances");

    std::vector<McRolloutSet> sets;
    std::vector<std::vector<Vec>> feats;
    sets.reserve(instances.size());
    for (size_t i = 0; i < instances.size(); ++i) {
        Rng irng = rng.derive("mc").derive(i);
        sets.push_back(mc_estimate(instances[i], policy, mc, irng));
        std::vector<Vec> f;
        f.reserve(sets.back().states.size());
        for (const tasks::State& s : sets.back().states)
            f.push_back(tasks::featurize(instances[i], s));
        feats.push_back(std::move(f));
    }
    const int d_feat = static_cast<int>(feats[0].at(0).size());
    Rng init_rng = rng.derive("init");
    HeadParams head = init_head(d_feat, cfg, init_rng);

    nn::Adam opt(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    nn::register_mlp(opt, head.mlp);
    opt.register_block(std::span<double>(&head.log_c, 1), false);

    FeatureGroups groups;
    for (const auto& f : feats) groups.push_back(&f);

    std::vector<int32_t> order(instances.size());
    std::iota(order.begin(), order.end(), 0);
    const long batches_per_epoch =
        (static_cast<long>(instances.size()) + cfg.trees_per_batch - 1) / cfg.trees_per_batch;
    const long total_steps = batches_per_epoch * cfg.epochs;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = rng.derive(static_cast<uint64_t>(epoch));
        erng.shuffle(order);
        double rank_sum = 0.0, metric_sum = 0.0;
        long batches = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(cfg.trees_per_batch)) {
            std::vector<PairSample> pairs;
            std::vector<TripletSample> triplets;
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(cfg.trees_per_batch));
            for (size_t oi = start; oi < end; ++oi) {
                const int32_t ii = order[oi];
                Rng srng = erng.derive(static_cast<uint64_t>(ii));
                McSamples samples = sample_mc(sets[ii], mc, srng, cfg.pairs_per_tree,
                                              cfg.triplets_per_tree);
                for (PairSample p : samples.pairs) {
                    p.tree = ii;
                    pairs.push_back(p);
                }
                for (TripletSample t : samples.triplets) {
                    t.tree = ii;
                    triplets.push_back(t);
                }
            }
            HeadGrads grads(head.mlp);
            const LossValue loss = head_losses(head, groups, pairs, triplets, cfg.lambda,
                                               cfg.gamma, cfg.gamma_prime, &grads);
            auto spans = nn::mlp_grad_spans(grads.mlp);
            spans.push_back(std::span<const double>(&grads.dlog_c, 1));
            opt.step(spans, lr_scale_at(step, total_steps, cfg.warmup_steps));
            ++step;
            rank_sum += loss.rank;
            metric_sum += loss.metric;
            ++batches;
        }
        if (curves) {
            curves->rank_loss.push_back(rank_sum / std::max(1L, batches));
            curves->metric_loss.push_back(metric_sum / std::max(1L, batches));
            curves->median_rho.push_back(0.0);  // no tree to compare against
        }
    }
    return head;
}

}  // namespace treeball::stage1
