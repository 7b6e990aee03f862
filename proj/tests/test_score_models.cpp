#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ksd/score_models.hpp"
#include "oracles.hpp"

namespace ksd {
namespace {

GaussBernoulliRbm small_rbm(std::mt19937_64 &rng, Eigen::Index visible, Eigen::Index hidden) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    GaussBernoulliRbm rbm{Matrix(hidden, visible), Vector(visible), Vector(hidden)};
    for (Eigen::Index i = 0; i < rbm.B.size(); ++i) { rbm.B.data()[i] = u(rng); }
    for (Eigen::Index i = 0; i < visible; ++i) { rbm.b[i] = u(rng); }
    for (Eigen::Index i = 0; i < hidden; ++i) { rbm.c_bias[i] = u(rng); }
    return rbm;
}

TEST(Score, StandardGaussian) {
    Vector x(3);
    x << 1.0, -2.0, 0.0;
    Vector want(3);
    want << -1.0, 2.0, 0.0;
    EXPECT_EQ(score(StandardGaussian{3}, as_span(x)), want);
}

TEST(Score, RbmWithZeroCouplingIsGaussian) {
    GaussBernoulliRbm rbm{Matrix::Zero(2, 3), Vector::Zero(3), Vector::Constant(2, 0.7)};
    Vector x(3);
    x << 0.3, -1.2, 4.0;
    EXPECT_LT((score(rbm, as_span(x)) + x).norm(), 1e-15);
}

TEST(Score, RbmScalarCase) {
    GaussBernoulliRbm rbm{Matrix::Ones(1, 1), Vector::Zero(1), Vector::Zero(1)};
    const Vector x = Vector::Ones(1);
    // -1 + tanh(1)
    EXPECT_NEAR(score(rbm, as_span(x))[0], -0.23840584404423515, 1e-15);
}

TEST(Score, Errors) {
    const Vector x = Vector::Zero(2);
    EXPECT_THROW(score(StandardGaussian{3}, as_span(x)), ConfigError);
    Vector bad = x;
    bad[0] = std::nan("");
    EXPECT_THROW(score(StandardGaussian{2}, as_span(bad)), DataError);
    GaussBernoulliRbm broken{Matrix::Zero(2, 3), Vector::Zero(2), Vector::Zero(2)};
    EXPECT_THROW(validate(ScoreModel{broken}), ConfigError);
}

TEST(Score, BatchMatchesPointwise) {
    std::mt19937_64 rng(11);
    const GaussBernoulliRbm rbm = small_rbm(rng, 4, 3);
    const SampleSet x = oracle::gaussian_samples(20, 4, 5);
    const SampleSet s = score_rows(rbm, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        EXPECT_LT((s.row(i).transpose() - score(rbm, as_span(x.row(i)))).norm(), 1e-13);
    }
}

TEST(Score, RbmMatchesFiniteDifferencesOfEnumeratedDensity) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> vis(1, 4);
    std::uniform_int_distribution<int> hid(1, 3);
    for (int trial = 0; trial < 50; ++trial) {
        const GaussBernoulliRbm rbm = small_rbm(rng, vis(rng), hid(rng));
        const Vector x = oracle::gaussian_samples(1, rbm.visible(), rng()).row(0).transpose();
        const Vector s = score(rbm, as_span(x));
        const Vector fd = oracle::fd_gradient([&](const Vector &z) { return oracle::rbm_log_density(rbm, z); }, x, 1e-5);
        for (Eigen::Index i = 0; i < x.size(); ++i) { EXPECT_LT(std::abs(s[i] - fd[i]) / std::max(std::abs(s[i]), 1e-3), 1e-5); }
    }
}

TEST(DrawSamples, LaplaceVariance) {
    const SampleSet x = draw_samples(ProductLaplace{1, 1.0 / std::sqrt(2.0)}, 1'000'000, 1);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(DrawSamples, GaussianMean) {
    const SampleSet x = draw_samples(GaussianSampler{2}, 100'000, 2);
    EXPECT_NEAR(x.col(0).mean(), 0.0, 0.02);
    EXPECT_NEAR(x.col(1).mean(), 0.0, 0.02);
}

TEST(DrawSamples, StudentTVariance) {
    const SampleSet x = draw_samples(StudentT{1, 5.0}, 1'000'000, 3);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    EXPECT_NEAR(var, 5.0 / 3.0, 0.03 * 5.0 / 3.0);
}

TEST(DrawSamples, DeterministicGivenSeed) {
    const std::vector<SamplingDistribution> dists{GaussianSampler{3}, ProductLaplace{3, 0.5}, StudentT{3, 5.0},
                                                  RbmGibbs{random_rbm(3, 2, 4), 10, 2}};
    for (const auto &q : dists) {
        EXPECT_EQ(draw_samples(q, 50, 17), draw_samples(q, 50, 17));
        EXPECT_NE(draw_samples(q, 50, 17), draw_samples(q, 50, 18));
    }
}

TEST(DrawSamples, InvalidParameters) {
    EXPECT_THROW(draw_samples(GaussianSampler{2}, 0, 1), ConfigError);
    EXPECT_THROW(draw_samples(ProductLaplace{2, 0.0}, 10, 1), ConfigError);
    EXPECT_THROW(draw_samples(StudentT{2, -1.0}, 10, 1), ConfigError);
    EXPECT_THROW(draw_samples(RbmGibbs{random_rbm(2, 2, 1), 0, 0}, 10, 1), ConfigError);
}

TEST(DrawSamples, GibbsWithZeroCouplingMatchesShiftedGaussian) {
    GaussBernoulliRbm rbm{Matrix::Zero(3, 2), Vector(2), Vector::Constant(3, 0.4)};
    rbm.b << 1.5, -0.5;
    const Eigen::Index n = 20'000;
    const SampleSet x = draw_samples(RbmGibbs{rbm, 2000, 50}, n, 5);
    const double se = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index j = 0; j < 2; ++j) {
        EXPECT_NEAR(x.col(j).mean(), rbm.b[j], 5.0 * se);
        const double var = (x.col(j).array() - x.col(j).mean()).square().mean();
        EXPECT_NEAR(var, 1.0, 0.05);
    }
}

TEST(PerturbRbm, ZeroSigmaIsIdentity) {
    const GaussBernoulliRbm rbm = random_rbm(5, 4, 8);
    const GaussBernoulliRbm out = perturb_rbm(rbm, 0.0, 1);
    EXPECT_EQ(out.B, rbm.B);
    EXPECT_EQ(out.b, rbm.b);
    EXPECT_EQ(out.c_bias, rbm.c_bias);
}

TEST(PerturbRbm, NoiseScaleAndDeterminism) {
    GaussBernoulliRbm rbm{Matrix::Zero(50, 40), Vector::Zero(40), Vector::Zero(50)};
    const GaussBernoulliRbm a = perturb_rbm(rbm, 0.02, 77);
    const GaussBernoulliRbm b = perturb_rbm(rbm, 0.02, 77);
    EXPECT_EQ(a.B, b.B);
    const double mean = a.B.mean();
    const double sd = std::sqrt((a.B.array() - mean).square().sum() / static_cast<double>(a.B.size() - 1));
    EXPECT_GE(sd, 0.015);
    EXPECT_LE(sd, 0.025);
    EXPECT_EQ(a.b, rbm.b);
    EXPECT_EQ(a.c_bias, rbm.c_bias);
}

TEST(PerturbRbm, RejectsNonRbm) {
    EXPECT_THROW(perturb_rbm(ScoreModel{StandardGaussian{2}}, 0.1, 1), ConfigError);
    EXPECT_THROW(perturb_rbm(random_rbm(2, 2, 1), -0.1, 1), ConfigError);
}

}  // namespace
}  // namespace ksd
