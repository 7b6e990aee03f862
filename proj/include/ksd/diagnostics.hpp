#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ksd/common.hpp"
#include "ksd/stein_kernel.hpp"

namespace ksd {

namespace detail {

inline double median_of(std::vector<double> &v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) { return upper; }
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace detail

/// gamma = 1 / (2 med) with med the median squared pairwise distance. Above
/// max_pairs distinct pairs, the median is taken over a seeded uniform subsample.
inline double median_heuristic_gamma(const SampleSet &samples, std::size_t max_pairs = 1'000'000, std::uint64_t seed = 0) {
    const Eigen::Index n = samples.rows();
    if (n < 2) { throw ConfigError("median heuristic: need at least two samples"); }
    if (max_pairs < 1) { throw ConfigError("median heuristic: max_pairs must be positive"); }
    detail::require_finite(samples, "median heuristic");
    const auto all_pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
    std::vector<double> dist;
    if (all_pairs <= max_pairs) {
        dist.reserve(all_pairs);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) { dist.push_back((samples.row(i) - samples.row(j)).squaredNorm()); }
        }
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
        std::uniform_int_distribution<Eigen::Index> other(0, n - 2);
        dist.reserve(max_pairs);
        for (std::size_t k = 0; k < max_pairs; ++k) {
            const Eigen::Index i = first(rng);
            Eigen::Index j = other(rng);
            if (j >= i) { ++j; }
            dist.push_back((samples.row(i) - samples.row(j)).squaredNorm());
        }
    }
    const double med = detail::median_of(dist);
    if (!(med > 0.0)) { throw DataError("median heuristic: median pairwise distance is zero"); }
    return 1.0 / (2.0 * med);
}

struct EffectiveDimensionCurve {
    std::vector<double> lambdas;
    std::vector<double> n_eff;
    double trace_total = 0.0;
};

/// n_eff(lambda) = sum_i mu_i / (mu_i + lambda) over a non-negative spectrum mu.
inline EffectiveDimensionCurve effective_dimension_from_spectrum(std::span<const double> spectrum, std::span<const double> lambdas) {
    EffectiveDimensionCurve curve;
    for (const double mu : spectrum) {
        if (!std::isfinite(mu)) { throw DataError("effective dimension: non-finite eigenvalue"); }
        curve.trace_total += std::max(mu, 0.0);
    }
    for (const double lambda : lambdas) {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) { throw ConfigError("effective dimension: lambdas must be positive"); }
        double acc = 0.0;
        for (const double mu : spectrum) {
            if (mu > 0.0) { acc += mu / (mu + lambda); }
        }
        curve.lambdas.push_back(lambda);
        curve.n_eff.push_back(acc);
    }
    return curve;
}

/// Eigenvalues of the doubly centered Stein Gram matrix divided by n, clamped at zero.
inline Vector centered_gram_spectrum(const SteinKernel &sk, const SampleSet &samples) {
    const Eigen::Index n = samples.rows();
    if (n < 2) { throw ConfigError("effective dimension: need at least two samples"); }
    Matrix k = SteinGram(sk, samples).full();
    if (!k.allFinite()) { throw DataError("effective dimension: non-finite Gram entry"); }
    const Vector row_mean = k.rowwise().mean();
    const double grand = row_mean.mean();
    // (I - 11'/n) K (I - 11'/n) for symmetric K
    k.colwise() -= row_mean;
    k.rowwise() -= row_mean.transpose();
    k.array() += grand;
    k /= static_cast<double>(n);
    k = 0.5 * (k + k.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) { throw DataError("effective dimension: eigendecomposition failed"); }
    return eig.eigenvalues().cwiseMax(0.0);
}

inline EffectiveDimensionCurve effective_dimension(const SteinKernel &sk, const SampleSet &samples, std::span<const double> lambdas) {
    const Vector spectrum = centered_gram_spectrum(sk, samples);
    return effective_dimension_from_spectrum(as_span(spectrum), lambdas);
}

/// Least-squares slope of log(error) against log(n).
inline double fit_rate(std::span<const double> ns, std::span<const double> mean_errors) {
    if (ns.size() != mean_errors.size()) { throw ConfigError("fit_rate: length mismatch"); }
    if (ns.size() < 3) { throw ConfigError("fit_rate: need at least three points"); }
    const std::size_t k = ns.size();
    std::vector<double> lx(k);
    std::vector<double> ly(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!(ns[i] > 0.0) || !(mean_errors[i] > 0.0) || !std::isfinite(ns[i]) || !std::isfinite(mean_errors[i])) {
            throw ConfigError("fit_rate: inputs must be positive and finite");
        }
        lx[i] = std::log(ns[i]);
        ly[i] = std::log(mean_errors[i]);
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (!(sxx > 0.0)) { throw ConfigError("fit_rate: all n are equal"); }
    return sxy / sxx;
}

}  // namespace ksd
