// Random inputs and brute-force reference implementations for the tests.
// Oracles deliberately avoid the library's helpers: plain loops, long double.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <array>
#include <map>
#include <random>
#include <set>
#include <vector>

#include <dualcomp/dualcomp.hpp>

namespace testsupport {

using dualcomp::Cell;
using dualcomp::FeatureGrid;

// Features drawn around a few prototypes so that clustering has real merges.
inline FeatureGrid random_grid(int h, int w, int d, std::uint64_t seed, int prototypes = 3, double noise = 0.15,
                               bool with_attn = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    FeatureGrid g;
    g.height = h;
    g.width = w;
    g.dim = d;
    std::vector<std::vector<double>> protos(static_cast<std::size_t>(prototypes), std::vector<double>(static_cast<std::size_t>(d)));
    for (auto& p : protos)
        for (double& v : p) v = nd(rng);
    std::uniform_int_distribution<int> pick(0, prototypes - 1);
    g.features.resize(static_cast<std::size_t>(h) * w * d);
    // Blocky prototype layout: a prototype per 3x3 tile.
    std::vector<int> tile(static_cast<std::size_t>((h + 2) / 3) * ((w + 2) / 3));
    for (int& t : tile) t = pick(rng);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const auto& p = protos[static_cast<std::size_t>(tile[static_cast<std::size_t>((r / 3) * ((w + 2) / 3) + c / 3)])];
            for (int k = 0; k < d; ++k)
                g.features[(static_cast<std::size_t>(r) * w + c) * d + k] = static_cast<float>(p[static_cast<std::size_t>(k)] + noise * nd(rng));
        }
    if (with_attn) {
        std::vector<double> a(static_cast<std::size_t>(h) * w);
        double z = 0.0;
        for (double& v : a) {
            v = std::exp(1.5 * nd(rng));
            z += v;
        }
        for (double& v : a) v /= z;
        g.cls_attn = a;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Clustering

inline long double ref_cos(const FeatureGrid& g, std::size_t i, std::size_t j) {
    long double ab = 0, aa = 0, bb = 0;
    for (int k = 0; k < g.dim; ++k) {
        const long double a = g.features[i * g.dim + k];
        const long double b = g.features[j * g.dim + k];
        ab += a * b;
        aa += a * a;
        bb += b * b;
    }
    if (aa == 0 || bb == 0) return 0;
    return ab / std::sqrt(aa * bb);
}

struct RefClusters {
    std::vector<std::size_t> parent;
    std::set<std::set<std::size_t>> partition;
};

// Scans all 8 neighbours and filters by raster index, then groups with a
// recursive root lookup.
inline RefClusters ref_cluster(const FeatureGrid& g, double tau) {
    const std::size_t n = static_cast<std::size_t>(g.height) * g.width;
    RefClusters out;
    out.parent.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int r = static_cast<int>(i) / g.width;
        const int c = static_cast<int>(i) % g.width;
        long double best = -2;
        std::size_t arg = i;
        for (int rr = r - 1; rr <= r + 1; ++rr)
            for (int cc = c - 1; cc <= c + 1; ++cc) {
                if (rr < 0 || cc < 0 || rr >= g.height || cc >= g.width) continue;
                const std::size_t j = static_cast<std::size_t>(rr) * g.width + cc;
                if (j >= i) continue;
                const long double s = ref_cos(g, i, j);
                if (s > best) {
                    best = s;
                    arg = j;
                }
            }
        out.parent[i] = (arg != i && best > tau) ? arg : i;
    }
    std::map<std::size_t, std::set<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t x = i;
        while (out.parent[x] != x) x = out.parent[x];
        groups[x].insert(i);
    }
    for (auto& [_, s] : groups) out.partition.insert(s);
    return out;
}

// BFS over 8-neighbours restricted to the member set.
inline bool eight_connected(const std::vector<std::size_t>& members, int width) {
    if (members.empty()) return true;
    std::set<std::size_t> in(members.begin(), members.end());
    std::set<std::size_t> seen{members.front()};
    std::deque<std::size_t> q{members.front()};
    while (!q.empty()) {
        const std::size_t x = q.front();
        q.pop_front();
        const int r = static_cast<int>(x) / width, c = static_cast<int>(x) % width;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || cc < 0 || cc >= width) continue;
                const std::size_t y = static_cast<std::size_t>(rr) * width + cc;
                if (in.count(y) && !seen.count(y)) {
                    seen.insert(y);
                    q.push_back(y);
                }
            }
    }
    return seen.size() == in.size();
}

// ---------------------------------------------------------------------------
// Saliency and attention

inline std::vector<double> ref_saliency(const FeatureGrid& g) {
    std::vector<double> out(static_cast<std::size_t>(g.height) * g.width);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            long double s = 0;
            for (int k = 0; k < g.dim; ++k) {
                long double sum = 0;
                int cnt = 0;
                for (int rr = std::max(0, r - 1); rr <= std::min(g.height - 1, r + 1); ++rr)
                    for (int cc = std::max(0, c - 1); cc <= std::min(g.width - 1, c + 1); ++cc) {
                        sum += g.features[(static_cast<std::size_t>(rr) * g.width + cc) * g.dim + k];
                        ++cnt;
                    }
                const long double diff = g.features[(static_cast<std::size_t>(r) * g.width + c) * g.dim + k] - sum / cnt;
                s += diff * diff;
            }
            out[static_cast<std::size_t>(r) * g.width + c] = static_cast<double>(s);
        }
    return out;
}

inline std::vector<double> ref_softmax_attention(const std::vector<float>& q, const std::vector<float>& keys, int scale_dim) {
    const std::size_t d = q.size();
    const std::size_t n = keys.size() / d;
    std::vector<long double> logit(n);
    for (std::size_t i = 0; i < n; ++i) {
        long double s = 0;
        for (std::size_t k = 0; k < d; ++k) s += static_cast<long double>(q[k]) * keys[i * d + k];
        logit[i] = s / std::sqrt(static_cast<long double>(scale_dim));
    }
    const long double mx = *std::max_element(logit.begin(), logit.end());
    long double z = 0;
    for (auto& v : logit) z += std::exp(v - mx);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(std::exp(logit[i] - mx) / z);
    return out;
}

inline std::vector<double> ref_weighted_mean(const FeatureGrid& g, const std::vector<std::size_t>& members,
                                             const std::vector<double>& attn) {
    std::vector<long double> acc(static_cast<std::size_t>(g.dim), 0);
    long double mass = 0;
    for (std::size_t i : members) mass += attn[i];
    for (std::size_t i : members)
        for (int k = 0; k < g.dim; ++k) {
            const long double w = mass > 0 ? attn[i] / mass : 1.0L / members.size();
            acc[static_cast<std::size_t>(k)] += w * g.features[i * g.dim + k];
        }
    return {acc.begin(), acc.end()};
}

inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

// Relative error with an absolute floor for values near zero.
inline double rel_err_floor(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// ---------------------------------------------------------------------------
// Router

inline dualcomp::RouterModel small_model(std::uint64_t seed, dualcomp::RouterDims dims = {8, 4, 4}) {
    auto m = dualcomp::init_router(dims, 0.01, seed);
    std::mt19937_64 rng(seed ^ 0x5a5a);
    std::normal_distribution<double> nd(0.0, 0.3);
    m.for_each_layer([&](dualcomp::DenseLayer& l) {
        for (double& b : l.bias) b = nd(rng);
    });
    return m;
}

inline dualcomp::InstructionRepr random_input(std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    dualcomp::InstructionRepr x;
    x.embedding.resize(d);
    for (double& v : x.embedding) v = nd(rng);
    return x;
}

// Five-point central difference.
inline double numeric_grad(dualcomp::RouterModel& m, double& w, const dualcomp::InstructionRepr& x, dualcomp::RouterTarget t,
                           double h = 1e-4) {
    const double orig = w;
    auto at = [&](double v) {
        w = v;
        return dualcomp::router_loss(m, x.embedding, t);
    };
    const double d = (8.0 * (at(orig + h) - at(orig - h)) - (at(orig + 2 * h) - at(orig - 2 * h))) / (12.0 * h);
    w = orig;
    return d;
}

// Worst relative error between analytic and finite-difference gradients over
// `models` random small routers.
inline double worst_gradient_error(int models) {
    double worst = 0.0;
    for (int s = 0; s < models; ++s) {
        auto m = small_model(static_cast<std::uint64_t>(100 + s));
        const auto x = random_input(8, static_cast<std::uint64_t>(s));
        std::mt19937_64 rng(static_cast<std::uint64_t>(s) + 7);
        std::uniform_real_distribution<double> u(0.01, 1.0);
        const dualcomp::RouterTarget t{u(rng), u(rng)};
        const auto g = dualcomp::router_backward(m, x, t);
        std::array<dualcomp::DenseLayer*, 4> params{&m.trunk1, &m.trunk2, &m.head_lambda, &m.head_rho};
        std::array<const dualcomp::DenseLayer*, 4> grads{&g.trunk1, &g.trunk2, &g.head_lambda, &g.head_rho};
        for (std::size_t l = 0; l < 4; ++l) {
            for (std::size_t k = 0; k < params[l]->weights.size(); ++k)
                worst = std::max(worst, rel_err_floor(grads[l]->weights[k], numeric_grad(m, params[l]->weights[k], x, t), 1e-8));
            for (std::size_t k = 0; k < params[l]->bias.size(); ++k)
                worst = std::max(worst, rel_err_floor(grads[l]->bias[k], numeric_grad(m, params[l]->bias[k], x, t), 1e-8));
        }
    }
    return worst;
}

}  // namespace testsupport
