#pragma once

// Query-sample selection over the unlabeled pool. Every selector returns
// positions into the pool span it was given; ties go to the lowest position.

#include "bal/common.hpp"
#include "bal/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bal {

enum class StrategyKind { uncertainty, uncertainty_dense, cluster_centroid, random };

struct QueryStrategy {
    StrategyKind kind = StrategyKind::uncertainty;
    /// Batch size for cluster_centroid.
    std::size_t batch = 5;
    /// Candidate count for cluster_centroid; 0 means 10 * batch.
    std::size_t candidates = 0;
    /// Density exponent for uncertainty_dense.
    double beta = 1.0;
};

inline QueryStrategy parse_strategy(std::string_view name) {
    QueryStrategy s;
    if (name == "uncertainty") {
        s.kind = StrategyKind::uncertainty;
    } else if (name == "uncertainty-dense") {
        s.kind = StrategyKind::uncertainty_dense;
    } else if (name == "random") {
        s.kind = StrategyKind::random;
    } else if (name.starts_with("cluster")) {
        s.kind = StrategyKind::cluster_centroid;
        const auto digits = name.substr(7);
        std::size_t k = 0;
        if (digits.empty() || std::from_chars(digits.data(), digits.data() + digits.size(), k).ptr !=
                                  digits.data() + digits.size() || k < 1)
            throw ConfigError("bad cluster strategy '" + std::string(name) + "'");
        s.batch = k;
    } else {
        throw ConfigError("unknown strategy '" + std::string(name) + "'");
    }
    return s;
}

inline std::string strategy_name(const QueryStrategy& s) {
    switch (s.kind) {
        case StrategyKind::uncertainty: return "uncertainty";
        case StrategyKind::uncertainty_dense: return "uncertainty-dense";
        case StrategyKind::cluster_centroid: return "cluster" + std::to_string(s.batch);
        case StrategyKind::random: return "random";
    }
    return "?";
}

/// Geometric distance to the boundary, the margin-based stand-in for
/// least confidence.
inline double boundary_distance(const Vec& z, const LinearBoundary& boundary) {
    return std::abs(boundary.w.dot(z) + boundary.b) / boundary.w.norm();
}

inline std::size_t select_uncertainty(std::span<const Vec> pool, const LinearBoundary& boundary) {
    if (pool.empty()) throw Error("pool exhausted");
    if (!(boundary.w.squaredNorm() > 0.0)) throw Error("degenerate boundary");
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double d = boundary_distance(pool[i], boundary);
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

/// Mean cosine similarity of each pool member to the whole pool (itself
/// included). Zero vectors contribute 0. Uses the identity
/// mean_j cos(z_i, z_j) = u_i . (sum_j u_j) / n with u the unit vectors.
inline std::vector<double> pool_density(std::span<const Vec> pool) {
    std::vector<double> out(pool.size(), 0.0);
    if (pool.empty()) return out;
    Vec sum = Vec::Zero(pool.front().size());
    std::vector<Vec> units;
    units.reserve(pool.size());
    for (const auto& z : pool) {
        const double n = z.norm();
        units.push_back(n > 0.0 ? Vec(z / n) : Vec::Zero(z.size()));
        sum += units.back();
    }
    const double count = static_cast<double>(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) out[i] = units[i].dot(sum) / count;
    return out;
}

inline double dense_score(double distance, double density, double beta) {
    const double uncertainty = 1.0 / (1.0 + distance);
    if (beta == 1.0) return uncertainty * density;
    // mean cosine can be negative; fractional powers need a non-negative base
    return uncertainty * std::pow(std::max(density, 0.0), beta);
}

inline std::size_t select_uncertainty_dense(std::span<const Vec> pool, const LinearBoundary& boundary,
                                            double beta = 1.0) {
    if (pool.empty()) throw Error("pool exhausted");
    if (!(boundary.w.squaredNorm() > 0.0)) throw Error("degenerate boundary");
    const auto density = pool_density(pool);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double s = dense_score(boundary_distance(pool[i], boundary), density[i], beta);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return best;
}

/// Lloyd's k-means with k-means++ seeding. Returns the centers.
inline std::vector<Vec> kmeans(std::span<const Vec> points, std::size_t k, Xoshiro256& rng, int max_iterations = 100) {
    if (points.size() < k || k == 0) throw Error("not enough points for k-means");
    std::vector<Vec> centers;
    centers.reserve(k);
    centers.push_back(points[rng.below(points.size())]);
    std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            d2[i] = std::min(d2[i], (points[i] - centers.back()).squaredNorm());
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(points.size());
        }
        centers.push_back(points[pick]);
    }

    std::vector<std::size_t> assign(points.size(), k);
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = (points[i] - centers[c]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<Vec> sums(k, Vec::Zero(points.front().size()));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            sums[assign[i]] += points[i];
            ++counts[assign[i]];
        }
        // empty clusters keep their previous center
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
    }
    return centers;
}

/// Batch of `batch` representatives: k-means over the `candidates` most
/// uncertain pool members, then the nearest distinct member to each center.
inline std::vector<std::size_t> select_cluster_centroids(std::span<const Vec> pool, const LinearBoundary& boundary,
                                                         std::size_t batch, std::size_t candidates,
                                                         Xoshiro256& rng) {
    if (batch < 1) throw Error("batch size must be at least 1");
    if (pool.size() < batch) throw Error("pool smaller than batch");
    if (!(boundary.w.squaredNorm() > 0.0)) throw Error("degenerate boundary");
    const std::size_t m = std::clamp(candidates == 0 ? 10 * batch : candidates, batch, pool.size());

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> dist(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) dist[i] = boundary_distance(pool[i], boundary);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    order.resize(m);

    std::vector<Vec> cand;
    cand.reserve(m);
    for (auto i : order) cand.push_back(pool[i]);
    const auto centers = kmeans(cand, batch, rng);

    std::vector<bool> taken(m, false);
    std::vector<std::size_t> out;
    out.reserve(batch);
    for (const auto& c : centers) {
        std::size_t best = m;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            if (taken[j]) continue;
            const double d = (cand[j] - c).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        taken[best] = true;
        out.push_back(order[best]);
    }
    return out;
}

inline std::size_t select_random(std::span<const Vec> pool, Xoshiro256& rng) {
    if (pool.empty()) throw Error("pool exhausted");
    return static_cast<std::size_t>(rng.below(pool.size()));
}

}  // namespace bal
