#include "bal/model.hpp"
#include "bal/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace bal {
namespace {

Vec vec2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

Vec random_vec(Xoshiro256& rng, Eigen::Index k, double scale = 1.0) {
    Vec v(k);
    for (Eigen::Index i = 0; i < k; ++i) v[i] = scale * rng.gaussian();
    return v;
}

LabeledSet random_labeled(Xoshiro256& rng, int n, Eigen::Index k) {
    LabeledSet a;
    for (int i = 0; i < n; ++i) {
        const Label y = i % 2 == 0 ? 1 : -1;
        Vec z = random_vec(rng, k);
        z[0] += y;
        a.add(z, y);
    }
    return a;
}

BoundarySet random_boundary(Xoshiro256& rng, int n, Eigen::Index k) {
    BoundarySet b;
    for (int i = 0; i < n; ++i) b.add(random_vec(rng, k, 1.5));
    return b;
}

// Straightforward term-by-term evaluation of the joint objective.
double reference_loss(const Vec& w, double b, const LabeledSet& a, const BoundarySet& bs, double lambda) {
    double hinge = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double s = b;
        for (Eigen::Index k = 0; k < w.size(); ++k) s += w[k] * a.points[i][k];
        hinge += std::max(0.0, 1.0 - a.labels[i] * s);
    }
    hinge /= static_cast<double>(a.size());
    double sq = 0.0;
    for (const auto& z : bs.points) {
        double s = b;
        for (Eigen::Index k = 0; k < w.size(); ++k) s += w[k] * z[k];
        sq += s * s;
    }
    if (!bs.empty()) sq /= static_cast<double>(bs.size());
    double reg = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) reg += w[k] * w[k];
    return 0.5 * hinge + 0.5 * sq + lambda * reg;
}

TEST(Loss, ZeroWhenHingeInactive) {
    LabeledSet a;
    a.add(vec2(2, 0), 1);
    EXPECT_DOUBLE_EQ(loss({vec2(1, 0), 0.0}, a, {}, 0.0), 0.0);
}

TEST(Loss, HandEvaluated) {
    LabeledSet a;
    a.add(vec2(0.5, 0), 1);
    BoundarySet b;
    b.add(vec2(1, 0));
    EXPECT_DOUBLE_EQ(loss({vec2(1, 0), 0.0}, a, b, 1.0), 1.75);
}

TEST(Loss, MatchesReferenceOnRandomInstances) {
    Xoshiro256 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_labeled(rng, 20, 8);
        const auto b = random_boundary(rng, 5, 8);
        const LinearBoundary theta{random_vec(rng, 8), rng.gaussian()};
        const double lambda = rng.uniform() * 2.0;
        EXPECT_NEAR(loss(theta, a, b, lambda), reference_loss(theta.w, theta.b, a, b, lambda), 1e-12);
    }
}

TEST(Loss, EmptyBoundarySetIsRegularisedHinge) {
    Xoshiro256 rng(2);
    const auto a = random_labeled(rng, 15, 4);
    const LinearBoundary theta{random_vec(rng, 4), 0.3};
    double hinge = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        hinge += std::max(0.0, 1.0 - a.labels[i] * (theta.w.dot(a.points[i]) + theta.b));
    EXPECT_NEAR(loss(theta, a, {}, 1.0), 0.5 * hinge / 15.0 + theta.w.squaredNorm(), 1e-14);
}

TEST(Loss, Errors) {
    try {
        loss({vec2(1, 0), 0.0}, {}, {}, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "no labeled data");
    }
}

TEST(Loss, Convex) {
    Xoshiro256 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = random_labeled(rng, 10, 5);
        const auto b = random_boundary(rng, 4, 5);
        const LinearBoundary t1{random_vec(rng, 5), rng.gaussian()};
        const LinearBoundary t2{random_vec(rng, 5), rng.gaussian()};
        const double alpha = rng.uniform();
        const LinearBoundary mix{alpha * t1.w + (1 - alpha) * t2.w, alpha * t1.b + (1 - alpha) * t2.b};
        EXPECT_LE(loss(mix, a, b, 1.0), alpha * loss(t1, a, b, 1.0) + (1 - alpha) * loss(t2, a, b, 1.0) + 1e-9);
    }
}

TEST(Gradient, FlatRegion) {
    LabeledSet a;
    a.add(vec2(2, 0), 1);
    a.add(vec2(-3, 1), -1);
    const auto g = subgradient({vec2(1, 0), 0.0}, a, {}, 0.0);
    EXPECT_TRUE(g.w.isZero());
    EXPECT_EQ(g.b, 0.0);
}

TEST(Gradient, SingleBoundaryPoint) {
    LabeledSet a;
    a.add(vec2(5, 0), 1);
    BoundarySet b;
    const Vec z = vec2(0.7, -1.3);
    b.add(z);
    const LinearBoundary theta{vec2(1, 0.5), 0.2};
    const double r = theta.w.dot(z) + theta.b;
    const auto g = subgradient(theta, a, b, 0.0);
    EXPECT_NEAR(g.w[0], z[0] * r, 1e-15);
    EXPECT_NEAR(g.w[1], z[1] * r, 1e-15);
    EXPECT_NEAR(g.b, r, 1e-15);
}

TEST(Gradient, MatchesCentralDifferences) {
    Xoshiro256 rng(4);
    int checked = 0;
    while (checked < 200) {
        const auto a = random_labeled(rng, 12, 6);
        const auto b = random_boundary(rng, 4, 6);
        const LinearBoundary theta{random_vec(rng, 6), rng.gaussian()};
        // skip points within reach of a hinge kink
        bool near_kink = false;
        for (std::size_t i = 0; i < a.size(); ++i)
            near_kink |= std::abs(1.0 - a.labels[i] * (theta.w.dot(a.points[i]) + theta.b)) < 1e-4;
        if (near_kink) continue;
        ++checked;
        const auto g = subgradient(theta, a, b, 1.0);
        const double h = 1e-6;
        for (Eigen::Index k = 0; k <= 6; ++k) {
            LinearBoundary plus = theta, minus = theta;
            if (k < 6) {
                plus.w[k] += h;
                minus.w[k] -= h;
            } else {
                plus.b += h;
                minus.b -= h;
            }
            const double fd = (loss(plus, a, b, 1.0) - loss(minus, a, b, 1.0)) / (2 * h);
            const double an = k < 6 ? g.w[k] : g.b;
            EXPECT_LE(std::abs(fd - an), 1e-5 * std::max(1.0, std::abs(an)));
        }
    }
}

TEST(Train, SymmetricPairGivesAxisAlignedPlane) {
    LabeledSet a;
    a.add(vec2(-1, 0), -1);
    a.add(vec2(1, 0), 1);
    const auto theta = train(a, {}, 1.0);
    EXPECT_GT(theta.w[0], 0.0);
    EXPECT_NEAR(theta.w[1], 0.0, 1e-9);
    EXPECT_NEAR(theta.b, 0.0, 1e-9);
    // analytic optimum: minimise 1/2 (1 - w) + w^2 for w < 1, so w = 1/4
    EXPECT_NEAR(theta.w[0], 0.25, 1e-3);
}

TEST(Train, PlanePassesThroughBoundaryPoints) {
    LabeledSet a;
    // mirror-symmetric in both axes, so the optimum has w2 = 0 and b = 0
    a.add(vec2(-1, 1), -1);
    a.add(vec2(-1, -1), -1);
    a.add(vec2(1, 1), 1);
    a.add(vec2(1, -1), 1);
    BoundarySet b;
    // the line x = 0 through (0, 2) and (0, -2)
    b.add(vec2(0, 2));
    b.add(vec2(0, -2));
    const auto theta = train(a, b, 1.0);
    for (const auto& z : b.points) EXPECT_LE(std::abs(theta.w.dot(z) + theta.b) / theta.w.norm(), 1e-6);
    EXPECT_GT(theta.w[0], 0.0);
}

struct FrozenProblem {
    LabeledSet a;
    BoundarySet b;
};

FrozenProblem frozen_problem() {
    FrozenProblem p;
    const double za[6][2] = {{-2, 0.5}, {-1.5, -1}, {-0.5, 0.3}, {0.4, -0.2}, {1.2, 0.8}, {2.0, -0.5}};
    const Label y[6] = {-1, -1, 1, -1, 1, 1};
    for (int i = 0; i < 6; ++i) p.a.add(vec2(za[i][0], za[i][1]), y[i]);
    p.b.add(vec2(0.1, 1.0));
    p.b.add(vec2(-0.1, -1.0));
    p.b.add(vec2(0.05, 0.0));
    return p;
}

TEST(Train, ReachesGlobalMinimum) {
    // optima from an interior-point QP solver
    const auto p = frozen_problem();
    const double opt_no_b = 0.438663194444;
    const double opt_with_b = 0.440209354080;
    const auto t0 = train(p.a, {}, 1.0);
    EXPECT_NEAR(loss(t0, p.a, {}, 1.0), opt_no_b, 1e-5);
    const auto t1 = train(p.a, p.b, 1.0);
    EXPECT_NEAR(loss(t1, p.a, p.b, 1.0), opt_with_b, 1e-5);
    EXPECT_GE(loss(t1, p.a, p.b, 1.0), opt_with_b - 1e-9);
}

TEST(Train, NoCoordinateProbeImproves) {
    Xoshiro256 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_labeled(rng, 30, 4);
        const auto b = random_boundary(rng, 10, 4);
        const auto theta = train(a, b, 1.0);
        const double f = loss(theta, a, b, 1.0);
        const double eps = 1e-3;
        for (Eigen::Index k = 0; k <= 4; ++k) {
            for (double s : {-eps, eps}) {
                LinearBoundary probe = theta;
                (k < 4 ? probe.w[k] : probe.b) += s;
                EXPECT_GE(loss(probe, a, b, 1.0), f - 1e-7);
            }
        }
    }
}

TEST(Train, Deterministic) {
    Xoshiro256 rng(6);
    const auto a = random_labeled(rng, 25, 8);
    const auto b = random_boundary(rng, 7, 8);
    EXPECT_EQ(train(a, b, 1.0), train(a, b, 1.0));
}

TEST(Train, LabelSymmetry) {
    Xoshiro256 rng(7);
    const auto a = random_labeled(rng, 25, 8);
    LabeledSet flipped = a;
    for (auto& y : flipped.labels) y = -y;
    const auto t = train(a, {}, 1.0);
    const auto f = train(flipped, {}, 1.0);
    EXPECT_EQ(f.w, Vec(-t.w));
    EXPECT_EQ(f.b, -t.b);
}

TEST(Train, WarmStartReachesSameObjective) {
    Xoshiro256 rng(8);
    const auto a = random_labeled(rng, 25, 8);
    const auto b = random_boundary(rng, 7, 8);
    const auto cold = train(a, b, 1.0);
    const auto warm = train(a, b, 1.0, LinearBoundary{random_vec(rng, 8), 1.0});
    EXPECT_NEAR(loss(cold, a, b, 1.0), loss(warm, a, b, 1.0), 1e-4);
}

TEST(Train, ToleranceStopsEarly) {
    LabeledSet a;
    a.add(vec2(3, 0), 1);
    a.add(vec2(-3, 0), -1);
    SolverConfig cfg;
    cfg.tolerance = 1e-3;
    // lambda = 0 and margins already >= 1: the zero subgradient stops at once
    const auto r = train_detailed(a, {}, 0.0, {vec2(1, 0), 0.0}, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 1);
}

TEST(Train, Errors) {
    LabeledSet a;
    a.add(vec2(1, 0), 1);
    try {
        train({}, {}, 1.0, LinearBoundary::zero(2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "no labeled data");
    }
    BoundarySet bad;
    bad.add(vec2(std::nan(""), 0));
    try {
        train(a, bad, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "invalid data");
    }
    EXPECT_THROW(train(a, {}, -1.0), Error);
}

TEST(LabeledSetTest, RejectsDuplicatesAndBadLabels) {
    LabeledSet a;
    a.add(vec2(1, 0), 1);
    EXPECT_THROW(a.add(vec2(1, 0), -1), Error);
    EXPECT_THROW(a.add(vec2(2, 0), 0), Error);
    EXPECT_THROW(a.add(Vec::Zero(3), 1), Error);
}

TEST(Predict, TieGoesPositive) {
    const LinearBoundary theta{vec2(1, 0), 0.0};
    EXPECT_EQ(decision_value(theta, vec2(0, 4)), 0.0);
    EXPECT_EQ(predict(theta, vec2(0, 4)), 1);
}

TEST(Predict, HandEvaluated) {
    const LinearBoundary theta{vec2(1, 0), -1.0};
    EXPECT_DOUBLE_EQ(decision_value(theta, vec2(3, 5)), 2.0);
    EXPECT_EQ(predict(theta, vec2(3, 5)), 1);
    EXPECT_THROW(decision_value(theta, Vec::Zero(3)), Error);
}

TEST(Predict, BatchMatchesLoop) {
    Xoshiro256 rng(9);
    const LinearBoundary theta{random_vec(rng, 16), 0.1};
    std::vector<Vec> zs;
    for (int i = 0; i < 1000; ++i) zs.push_back(random_vec(rng, 16));
    const auto labels = predict(theta, zs);
    const auto values = decision_values(theta, zs);
    for (std::size_t i = 0; i < zs.size(); ++i) {
        double s = theta.b;
        for (Eigen::Index k = 0; k < 16; ++k) s += theta.w[k] * zs[i][k];
        EXPECT_NEAR(values[i], s, 1e-12);
        EXPECT_EQ(labels[i], predict(theta, zs[i]));
    }
}

}  // namespace
}  // namespace bal
