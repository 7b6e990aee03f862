#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "ksd/common.hpp"
#include "ksd/estimators.hpp"
#include "ksd/parallel.hpp"
#include "ksd/stein_kernel.hpp"

namespace ksd {

enum class TestEstimator { FullV, FullU, Nystrom };

struct TestConfig {
    double alpha = 0.05;
    std::size_t num_bootstrap = 500;
    double flip_probability = 0.5;
    TestEstimator estimator = TestEstimator::FullV;
    /// Landmarks: explicit count if set, otherwise ceil(m_factor * sqrt(n)).
    std::optional<Eigen::Index> m;
    double m_factor = 4.0;
    double pinv_rtol = 1e-10;
    std::uint64_t seed = 0;
};

inline void validate(const TestConfig &config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) { throw ConfigError("test: alpha must lie in (0, 1)"); }
    if (config.num_bootstrap < 1) { throw ConfigError("test: need at least one bootstrap draw"); }
    if (!(config.flip_probability > 0.0 && config.flip_probability <= 1.0)) {
        throw ConfigError("test: flip_probability must lie in (0, 1]");
    }
    if (!(config.m_factor > 0.0)) { throw ConfigError("test: m_factor must be positive"); }
    if (config.m && *config.m < 1) { throw ConfigError("test: m must be positive"); }
    if (!(config.pinv_rtol > 0.0 && config.pinv_rtol < 1.0)) { throw ConfigError("test: pinv_rtol must lie in (0, 1)"); }
}

struct TestReport {
    double statistic;
    double threshold;
    double p_value;
    bool reject;
    std::vector<double> bootstrap_draws;
    std::chrono::duration<double, std::milli> wall_time;
    TestEstimator estimator;
    Eigen::Index n;
    std::optional<Eigen::Index> m;
};

/// Seed stream layout under a test's master seed.
inline std::uint64_t plan_seed(std::uint64_t master) { return derive_seed(master, 0); }
inline std::uint64_t draw_seed(std::uint64_t master, std::size_t draw) { return derive_seed(derive_seed(master, 1), draw); }

/// Markov chain of signs: w_1 uniform on {-1, +1}, then each step flips sign with
/// probability flip_probability.
inline Vector wild_weights(Eigen::Index n, double flip_probability, std::uint64_t seed) {
    if (n < 1) { throw ConfigError("wild_weights: n must be positive"); }
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) { throw ConfigError("wild_weights: flip_probability must lie in [0, 1]"); }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector w(n);
    w[0] = unif(rng) < 0.5 ? -1.0 : 1.0;
    for (Eigen::Index i = 1; i < n; ++i) { w[i] = unif(rng) < flip_probability ? -w[i - 1] : w[i - 1]; }
    return w;
}

namespace detail {

inline constexpr std::size_t kDrawChunk = 64;

inline Matrix weight_chunk(Eigen::Index n, const TestConfig &config, std::size_t first, std::size_t count) {
    Matrix w(n, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
        w.col(static_cast<Eigen::Index>(c)) = wild_weights(n, config.flip_probability, draw_seed(config.seed, first + c));
    }
    return w;
}

// Evaluates draws in column chunks of weights; chunk_draws(W) returns one draw per column.
template<class ChunkDraws>
std::vector<double> chunked_draws(Eigen::Index n, const TestConfig &config, ChunkDraws &&chunk_draws) {
    const std::size_t total = config.num_bootstrap;
    std::vector<double> draws(total);
    const std::size_t chunks = (total + kDrawChunk - 1) / kDrawChunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t first = c * kDrawChunk;
        const std::size_t count = std::min(kDrawChunk, total - first);
        const Vector vals = chunk_draws(weight_chunk(n, config, first, count));
        for (std::size_t k = 0; k < count; ++k) { draws[first + k] = vals[static_cast<Eigen::Index>(k)]; }
    });
    return draws;
}

}  // namespace detail

/// (1/n^2) w' K w for each weight column.
inline Vector bootstrap_draws(const Matrix &k_nn, const Matrix &weights) {
    const auto n = static_cast<double>(k_nn.rows());
    const Matrix kw = k_nn * weights;
    return weights.cwiseProduct(kw).colwise().sum().transpose() / (n * n);
}

/// (1/n^2) (K_mn w)' K_mm^- (K_mn w) for each weight column.
inline Vector bootstrap_draws(const NystromFactor &factor, const Matrix &weights) {
    const auto n = static_cast<double>(factor.samples());
    return factor.pinv.quadratic_forms(factor.k_nm.transpose() * weights) / (n * n);
}

/// Quadratic-time wild bootstrap of the V-statistic, reusing one Gram matrix.
inline std::vector<double> bootstrap_full(const Matrix &k_nn, const TestConfig &config) {
    validate(config);
    return detail::chunked_draws(k_nn.rows(), config, [&](const Matrix &w) { return bootstrap_draws(k_nn, w); });
}

inline std::vector<double> bootstrap_full(const SteinKernel &sk, const SampleSet &samples, const TestConfig &config) {
    return bootstrap_full(SteinGram(sk, samples).full(), config);
}

/// Wild bootstrap of the U-statistic: off-diagonal terms only, normalized by n(n-1).
inline std::vector<double> bootstrap_full_u(const Matrix &k_nn, const TestConfig &config) {
    validate(config);
    const auto n = static_cast<double>(k_nn.rows());
    const double trace = k_nn.trace();
    return detail::chunked_draws(k_nn.rows(), config, [&](const Matrix &w) {
        const Vector v = bootstrap_draws(k_nn, w);
        return ((v.array() * (n * n) - trace) / (n * (n - 1.0))).matrix().eval();
    });
}

/// Nystrom wild bootstrap with K_mn and the pseudo-inverse shared across draws.
inline std::vector<double> bootstrap_nystrom(const NystromFactor &factor, const TestConfig &config) {
    validate(config);
    return detail::chunked_draws(factor.samples(), config, [&](const Matrix &w) { return bootstrap_draws(factor, w); });
}

inline std::vector<double> bootstrap_nystrom(const SteinKernel &sk, const SampleSet &samples, const NystromPlan &plan,
                                             const TestConfig &config) {
    return bootstrap_nystrom(NystromFactor(SteinGram(sk, samples), plan), config);
}

/// Upper order statistic at rank ceil((1 - alpha) D), 1-based.
inline double bootstrap_quantile(std::vector<double> draws, double alpha) {
    if (draws.empty()) { throw ConfigError("bootstrap_quantile: no draws"); }
    if (!(alpha > 0.0 && alpha < 1.0)) { throw ConfigError("bootstrap_quantile: alpha must lie in (0, 1)"); }
    const auto d = static_cast<double>(draws.size());
    // Guard against (1 - alpha) * D landing a rounding error above an integer.
    auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * d - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, draws.size());
    std::nth_element(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(rank - 1), draws.end());
    return draws[rank - 1];
}

/// (1 + #{draws >= statistic}) / (D + 1).
inline double bootstrap_p_value(const std::vector<double> &draws, double statistic) {
    const auto exceed = std::count_if(draws.begin(), draws.end(), [statistic](double b) { return b >= statistic; });
    return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(draws.size()) + 1.0);
}

inline TestReport make_report(double statistic, std::vector<double> draws, double alpha) {
    TestReport report{};
    report.statistic = statistic;
    report.threshold = bootstrap_quantile(draws, alpha);
    report.p_value = bootstrap_p_value(draws, statistic);
    report.reject = statistic > report.threshold;
    report.bootstrap_draws = std::move(draws);
    return report;
}

/// Goodness-of-fit test: statistic, wild-bootstrap threshold, decision.
inline TestReport run_test(const SteinKernel &sk, const SampleSet &samples, const TestConfig &config) {
    validate(config);
    const auto start = std::chrono::steady_clock::now();
    const SteinGram gram(sk, samples);
    const Eigen::Index n = gram.size();

    TestReport report;
    std::optional<Eigen::Index> m;
    switch (config.estimator) {
        case TestEstimator::FullV: {
            const Matrix k = gram.full();
            const double stat = k.sum() / (static_cast<double>(n) * static_cast<double>(n));
            report = make_report(std::max(stat, 0.0), bootstrap_full(k, config), config.alpha);
            break;
        }
        case TestEstimator::FullU: {
            if (n < 2) { throw ConfigError("test: U-statistic needs at least two samples"); }
            const Matrix k = gram.full();
            const double stat = (k.sum() - k.trace()) / (static_cast<double>(n) * static_cast<double>(n - 1));
            report = make_report(stat, bootstrap_full_u(k, config), config.alpha);
            break;
        }
        case TestEstimator::Nystrom: {
            const Eigen::Index landmarks = config.m ? *config.m : nystrom_size(n, config.m_factor);
            if (landmarks > n) { throw ConfigError("test: m exceeds n"); }
            const NystromFactor factor(gram, make_nystrom_plan(n, landmarks, plan_seed(config.seed), config.pinv_rtol));
            report = make_report(nystrom_statistic(factor).squared_value, bootstrap_nystrom(factor, config), config.alpha);
            m = landmarks;
            break;
        }
    }
    report.estimator = config.estimator;
    report.n = n;
    report.m = m;
    report.wall_time = std::chrono::steady_clock::now() - start;
    return report;
}

}  // namespace ksd
