#pragma once

// Linear boundary model trained on labeled samples and boundary annotations.
//
//   loss = cw * mean_A max(0, 1 - y (w.z + b))
//        + rw * mean_B (w.z + b)^2
//        + lambda * ||w||^2
//
// with cw = rw = 1/2 by default. Both data terms are convex, so the objective
// is convex and a plain subgradient method reaches the global minimum.

#include "bal/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace bal {

struct LabeledSet {
    std::vector<Vec> points;
    std::vector<Label> labels;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    bool contains(const Vec& z) const {
        return std::any_of(points.begin(), points.end(),
                           [&](const Vec& p) { return p.size() == z.size() && p == z; });
    }

    void add(Vec z, Label y) {
        if (!is_label(y)) throw Error("label must be -1 or +1");
        if (!points.empty() && z.size() != points.front().size()) throw Error("dimension mismatch");
        if (contains(z)) throw Error("duplicate labeled sample");
        points.push_back(std::move(z));
        labels.push_back(y);
    }
};

struct BoundarySet {
    std::vector<Vec> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    void add(Vec z) {
        if (!points.empty() && z.size() != points.front().size()) throw Error("dimension mismatch");
        points.push_back(std::move(z));
    }
};

struct LossWeights {
    double classification = 0.5;
    double regression = 0.5;
};

struct SolverConfig {
    int max_iterations = 5000;
    /// Stop as soon as the subgradient norm drops to this value.
    double tolerance = 1e-6;
    /// Multiplies the base step 1/L, where L bounds the curvature of the smooth part.
    double step_scale = 1.0;
    LossWeights weights{};
};

inline double decision_value(const LinearBoundary& boundary, const Vec& z) {
    require_same_dim(boundary.w, z);
    return boundary.w.dot(z) + boundary.b;
}

inline Label predict(const LinearBoundary& boundary, const Vec& z) {
    return decision_value(boundary, z) >= 0.0 ? 1 : -1;
}

inline std::vector<double> decision_values(const LinearBoundary& boundary, std::span<const Vec> zs) {
    std::vector<double> out;
    out.reserve(zs.size());
    for (const auto& z : zs) out.push_back(decision_value(boundary, z));
    return out;
}

inline std::vector<Label> predict(const LinearBoundary& boundary, std::span<const Vec> zs) {
    std::vector<Label> out;
    out.reserve(zs.size());
    for (const auto& z : zs) out.push_back(predict(boundary, z));
    return out;
}

namespace detail {

/// Row-stacked copy of the training sets so each solver step is two mat-vecs.
struct Problem {
    Mat labeled;       // |A| x K
    Vec labels;        // |A|
    Mat annotations;   // |B| x K
    double lambda = 1.0;
    LossWeights weights{};

    Problem(const LabeledSet& a, const BoundarySet& b, double lam, LossWeights wts, Eigen::Index dim)
        : labeled(a.size(), dim), labels(a.size()), annotations(b.size(), dim), lambda(lam), weights(wts) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a.points[i].size() != dim) throw Error("dimension mismatch");
            labeled.row(static_cast<Eigen::Index>(i)) = a.points[i].transpose();
            labels[static_cast<Eigen::Index>(i)] = a.labels[i];
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (b.points[j].size() != dim) throw Error("dimension mismatch");
            annotations.row(static_cast<Eigen::Index>(j)) = b.points[j].transpose();
        }
    }

    double loss(const Vec& w, double b) const {
        double value = lambda * w.squaredNorm();
        const Eigen::ArrayXd margins = ((labeled * w).array() + b) * labels.array();
        value += weights.classification * (1.0 - margins).max(0.0).sum() / static_cast<double>(labels.size());
        if (annotations.rows() > 0) {
            const Vec residuals = (annotations * w).array() + b;
            value += weights.regression * residuals.squaredNorm() / static_cast<double>(annotations.rows());
        }
        return value;
    }

    /// Writes the subgradient into (gw, gb). A hinge exactly at margin 1
    /// takes the zero branch.
    void subgradient(const Vec& w, double b, Vec& gw, double& gb) const {
        gw = (2.0 * lambda) * w;
        gb = 0.0;
        const double n = static_cast<double>(labels.size());
        const Eigen::ArrayXd margins = ((labeled * w).array() + b) * labels.array();
        Vec coeff = Vec::Zero(labels.size());
        for (Eigen::Index i = 0; i < margins.size(); ++i)
            if (margins[i] < 1.0) coeff[i] = -weights.classification * labels[i] / n;
        gw.noalias() += labeled.transpose() * coeff;
        gb += coeff.sum();
        if (annotations.rows() > 0) {
            const double m = static_cast<double>(annotations.rows());
            const Vec scaled = ((annotations * w).array() + b).matrix() * (2.0 * weights.regression / m);
            gw.noalias() += annotations.transpose() * scaled;
            gb += scaled.sum();
        }
    }

    /// Upper bound on the curvature of the smooth terms.
    double curvature_bound() const {
        double bound = 2.0 * lambda;
        if (annotations.rows() > 0) {
            const double mean_sq = (annotations.rowwise().squaredNorm().array() + 1.0).mean();
            bound += 2.0 * weights.regression * mean_sq;
        }
        return std::max(bound, 1e-12);
    }
};

inline Eigen::Index infer_dim(const LabeledSet& a, const BoundarySet& b) {
    if (!a.empty()) return a.points.front().size();
    if (!b.empty()) return b.points.front().size();
    return 0;
}

inline void validate(const LabeledSet& a, const BoundarySet& b, double lambda) {
    if (a.empty()) throw Error("no labeled data");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("invalid data");
    for (const auto& z : a.points)
        if (!z.allFinite()) throw Error("invalid data");
    for (const auto& z : b.points)
        if (!z.allFinite()) throw Error("invalid data");
}

}  // namespace detail

inline double loss(const LinearBoundary& boundary, const LabeledSet& a, const BoundarySet& b, double lambda,
                   LossWeights weights = {}) {
    if (a.empty()) throw Error("no labeled data");
    const detail::Problem problem(a, b, lambda, weights, boundary.dim());
    return problem.loss(boundary.w, boundary.b);
}

struct Subgradient {
    Vec w;
    double b = 0.0;

    double norm() const { return std::sqrt(w.squaredNorm() + b * b); }
};

inline Subgradient subgradient(const LinearBoundary& boundary, const LabeledSet& a, const BoundarySet& b,
                               double lambda, LossWeights weights = {}) {
    if (a.empty()) throw Error("no labeled data");
    const detail::Problem problem(a, b, lambda, weights, boundary.dim());
    Subgradient g;
    problem.subgradient(boundary.w, boundary.b, g.w, g.b);
    return g;
}

struct TrainResult {
    LinearBoundary boundary;
    int iterations = 0;
    bool converged = false;
};

/// Full-batch subgradient descent with step step_scale / (L sqrt(k)) and
/// averaging over the second half of the iterates. Returns whichever of the
/// last iterate and the average has the lower loss.
inline TrainResult train_detailed(const LabeledSet& a, const BoundarySet& b, double lambda,
                                  const LinearBoundary& init, const SolverConfig& config = {}) {
    detail::validate(a, b, lambda);
    const Eigen::Index dim = detail::infer_dim(a, b);
    if (init.dim() != dim) throw Error("dimension mismatch");
    if (!init.w.allFinite() || !std::isfinite(init.b)) throw Error("invalid data");

    const detail::Problem problem(a, b, lambda, config.weights, dim);
    const double base_step = config.step_scale / problem.curvature_bound();

    Vec w = init.w;
    double bias = init.b;
    Vec gw(dim);
    double gb = 0.0;

    const int n = std::max(config.max_iterations, 1);
    const int average_from = n / 2 + 1;
    Vec avg_w = Vec::Zero(dim);
    double avg_b = 0.0;
    int averaged = 0;

    for (int k = 1; k <= n; ++k) {
        problem.subgradient(w, bias, gw, gb);
        if (std::sqrt(gw.squaredNorm() + gb * gb) <= config.tolerance) return {{w, bias}, k, true};
        const double step = base_step / std::sqrt(static_cast<double>(k));
        w -= step * gw;
        bias -= step * gb;
        if (k >= average_from) {
            ++averaged;
            const double frac = 1.0 / averaged;
            avg_w += frac * (w - avg_w);
            avg_b += frac * (bias - avg_b);
        }
    }
    if (averaged > 0 && problem.loss(avg_w, avg_b) <= problem.loss(w, bias)) return {{avg_w, avg_b}, n, false};
    return {{w, bias}, n, false};
}

inline LinearBoundary train(const LabeledSet& a, const BoundarySet& b, double lambda, const LinearBoundary& init,
                            const SolverConfig& config = {}) {
    return train_detailed(a, b, lambda, init, config).boundary;
}

/// Cold start from the zero boundary.
inline LinearBoundary train(const LabeledSet& a, const BoundarySet& b, double lambda, const SolverConfig& config = {}) {
    if (a.empty()) throw Error("no labeled data");
    return train(a, b, lambda, LinearBoundary::zero(a.points.front().size()), config);
}

}  // namespace bal
