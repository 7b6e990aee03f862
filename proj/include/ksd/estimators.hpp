#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <lapacke.h>

#include "ksd/common.hpp"
#include "ksd/stein_kernel.hpp"

namespace ksd {

enum class EstimatorKind { V, U, Nystrom };

inline const char *to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::V: return "v";
        case EstimatorKind::U: return "u";
        case EstimatorKind::Nystrom: return "nystrom";
    }
    return "?";
}

struct KsdEstimate {
    double squared_value;
    double value;
    EstimatorKind estimator_kind;
    Eigen::Index n;
    std::optional<Eigen::Index> m;
};

namespace detail {

inline KsdEstimate make_estimate(double squared, EstimatorKind kind, Eigen::Index n, std::optional<Eigen::Index> m = std::nullopt) {
    // V and Nystrom are squared norms; rounding may leave them slightly negative.
    if (kind != EstimatorKind::U && squared < 0.0) { squared = 0.0; }
    return {squared, std::sqrt(std::max(squared, 0.0)), kind, n, m};
}

}  // namespace detail

/// Nystrom landmarks: a multiset of row indices plus the pseudo-inverse cutoff.
struct NystromPlan {
    IndexList indices;
    double pinv_rtol = 1e-10;
    std::uint64_t seed = 0;
};

/// Default landmark count ceil(factor * sqrt(n)), clamped to [1, n].
inline Eigen::Index nystrom_size(Eigen::Index n, double factor = 4.0) {
    if (n < 1) { throw ConfigError("nystrom_size: n must be positive"); }
    if (!(factor > 0.0)) { throw ConfigError("nystrom_size: factor must be positive"); }
    const auto m = static_cast<Eigen::Index>(std::ceil(factor * std::sqrt(static_cast<double>(n))));
    return std::clamp<Eigen::Index>(m, 1, n);
}

/// m indices drawn uniformly with replacement from [0, n).
inline NystromPlan make_nystrom_plan(Eigen::Index n, Eigen::Index m, std::uint64_t seed, double pinv_rtol = 1e-10) {
    if (n < 1 || m < 1 || m > n) { throw ConfigError("Nystrom plan: need 1 <= m <= n"); }
    if (!(pinv_rtol > 0.0 && pinv_rtol < 1.0)) { throw ConfigError("Nystrom plan: pinv_rtol must lie in (0, 1)"); }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    NystromPlan plan{IndexList(static_cast<std::size_t>(m)), pinv_rtol, seed};
    for (auto &idx : plan.indices) { idx = pick(rng); }
    return plan;
}

inline void validate(const NystromPlan &plan, Eigen::Index n) {
    if (plan.indices.empty()) { throw ConfigError("Nystrom plan: no landmarks"); }
    if (static_cast<Eigen::Index>(plan.indices.size()) > n) { throw ConfigError("Nystrom plan: more landmarks than samples"); }
    if (!(plan.pinv_rtol > 0.0 && plan.pinv_rtol < 1.0)) { throw ConfigError("Nystrom plan: pinv_rtol must lie in (0, 1)"); }
    for (const auto idx : plan.indices) {
        if (idx < 0 || idx >= n) { throw ConfigError("Nystrom plan: index " + std::to_string(idx) + " out of range"); }
    }
}

namespace detail {

struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};

// LAPACK divide and conquer: faster than Eigen's QR-based solver at a few hundred landmarks.
inline SymmetricEigen symmetric_eigen(const Matrix &sym) {
    const auto m = static_cast<lapack_int>(sym.rows());
    SymmetricEigen out{Vector(sym.rows()), sym};
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', m, out.vectors.data(), m, out.values.data());
    if (info != 0) { throw DataError("spectral_pinv: eigendecomposition failed (info " + std::to_string(info) + ")"); }
    return out;
}

}  // namespace detail

/// Moore-Penrose pseudo-inverse of a symmetric matrix, kept in factored form
/// pinv = V diag(1 / lambda) V' over the retained eigenpairs.
class SpectralPinv {
public:
    SpectralPinv(const Matrix &sym, double rtol) {
        if (sym.rows() != sym.cols() || sym.rows() < 1) { throw ConfigError("spectral_pinv: matrix must be square and non-empty"); }
        if (!sym.allFinite()) { throw DataError("spectral_pinv: non-finite entry"); }
        if (!(rtol > 0.0)) { throw ConfigError("spectral_pinv: rtol must be positive"); }
        const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
        if ((sym - sym.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) { throw ConfigError("spectral_pinv: matrix is not symmetric"); }

        const auto [lambda, vectors] = detail::symmetric_eigen(sym);
        const double cutoff = rtol * std::max(lambda.maxCoeff(), 0.0);
        Eigen::Index kept = 0;
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            if (lambda[i] > cutoff && lambda[i] > 0.0) { ++kept; }
        }
        vectors_.resize(sym.rows(), kept);
        inv_values_.resize(kept);
        Eigen::Index col = 0;
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            if (lambda[i] > cutoff && lambda[i] > 0.0) {
                vectors_.col(col) = vectors.col(i);
                inv_values_[col] = 1.0 / lambda[i];
                ++col;
            }
        }
    }

    [[nodiscard]] Eigen::Index size() const { return vectors_.rows(); }
    [[nodiscard]] Eigen::Index rank() const { return vectors_.cols(); }

    [[nodiscard]] Matrix matrix() const { return vectors_ * inv_values_.asDiagonal() * vectors_.transpose(); }

    [[nodiscard]] Vector apply(const Vector &v) const { return vectors_ * (inv_values_.asDiagonal() * (vectors_.transpose() * v)); }

    /// v' pinv v for every column of `v`, each non-negative by construction.
    [[nodiscard]] Vector quadratic_forms(const Matrix &v) const {
        const Matrix proj = inv_values_.cwiseSqrt().asDiagonal() * (vectors_.transpose() * v);
        return proj.colwise().squaredNorm().transpose();
    }

    [[nodiscard]] double quadratic_form(const Vector &v) const { return quadratic_forms(v)[0]; }

private:
    Matrix vectors_;
    Vector inv_values_;
};

inline Matrix spectral_pinv(const Matrix &sym, double rtol = 1e-10) { return SpectralPinv(sym, rtol).matrix(); }

inline Matrix spectral_pinv(const GramBlock &block, double rtol = 1e-10) {
    if (block.row_ids != block.col_ids) { throw ConfigError("spectral_pinv: block is not square"); }
    return spectral_pinv(block.values, rtol);
}

/// Largest deviation among the four Penrose identities, relative to the spectral norms involved.
inline double penrose_residual(const Matrix &a, const Matrix &pinv) {
    auto spectral = [](const Matrix &m) {
        return m.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(m).singularValues()[0];
    };
    const double na = std::max(spectral(a), 1e-300);
    const double np = std::max(spectral(pinv), 1e-300);
    const Matrix ap = a * pinv;
    const Matrix pa = pinv * a;
    double worst = spectral(ap * a - a) / na;
    worst = std::max(worst, spectral(pa * pinv - pinv) / np);
    worst = std::max(worst, spectral(ap - ap.transpose()) / std::max(spectral(ap), 1e-300));
    worst = std::max(worst, spectral(pa - pa.transpose()) / std::max(spectral(pa), 1e-300));
    return worst;
}

/// (1/n^2) sum_{i,j} h(x_i, x_j).
inline KsdEstimate v_statistic(const SteinGram &gram) {
    const auto n = static_cast<double>(gram.size());
    return detail::make_estimate(gram.sums().total / (n * n), EstimatorKind::V, gram.size());
}

inline KsdEstimate v_statistic(const SteinKernel &sk, const SampleSet &samples) {
    if (samples.rows() < 1) { throw ConfigError("v_statistic: empty sample set"); }
    return v_statistic(SteinGram(sk, samples));
}

/// (1/(n(n-1))) sum_{i != j} h(x_i, x_j). May be negative.
inline KsdEstimate u_statistic(const SteinGram &gram) {
    if (gram.size() < 2) { throw ConfigError("u_statistic: need at least two samples"); }
    const auto n = static_cast<double>(gram.size());
    const auto s = gram.sums();
    return detail::make_estimate((s.total - s.diagonal) / (n * (n - 1.0)), EstimatorKind::U, gram.size());
}

inline KsdEstimate u_statistic(const SteinKernel &sk, const SampleSet &samples) {
    if (samples.rows() < 2) { throw ConfigError("u_statistic: need at least two samples"); }
    return u_statistic(SteinGram(sk, samples));
}

/// K_nm and the pseudo-inverse of K_mm for one Nystrom plan. Shared by the
/// statistic and the bootstrap so each is computed once per test.
struct NystromFactor {
    /// n x m, one contiguous column per landmark.
    Matrix k_nm;
    SpectralPinv pinv;

    NystromFactor(const SteinGram &gram, const NystromPlan &plan)
        : k_nm(landmark_columns(gram, plan)), pinv(landmark_gram(gram, plan), plan.pinv_rtol) {}

    [[nodiscard]] Eigen::Index landmarks() const { return k_nm.cols(); }
    [[nodiscard]] Eigen::Index samples() const { return k_nm.rows(); }

private:
    static Matrix landmark_columns(const SteinGram &gram, const NystromPlan &plan) {
        validate(plan, gram.size());
        return gram.columns(plan.indices);
    }

    static Matrix landmark_gram(const SteinGram &gram, const NystromPlan &plan) {
        Matrix k_mm = gram.block(plan.indices, plan.indices);
#ifndef NDEBUG
        // Spot check, limited to small landmark sets because of the SVDs involved.
        if (k_mm.rows() <= 64) {
            const Matrix p = spectral_pinv(k_mm, plan.pinv_rtol);
            assert(penrose_residual(k_mm, p) < 1e-8);
        }
#endif
        return k_mm;
    }
};

/// beta' K_mm^- beta with beta = K_mn 1 / n.
inline KsdEstimate nystrom_statistic(const NystromFactor &factor) {
    const Vector beta = factor.k_nm.transpose() * Vector::Ones(factor.samples()) / static_cast<double>(factor.samples());
    return detail::make_estimate(factor.pinv.quadratic_form(beta), EstimatorKind::Nystrom, factor.samples(), factor.landmarks());
}

/// Statistic only: beta is accumulated without storing K_nm.
inline KsdEstimate nystrom_statistic(const SteinGram &gram, const NystromPlan &plan) {
    validate(plan, gram.size());
    const SpectralPinv pinv(gram.block(plan.indices, plan.indices), plan.pinv_rtol);
    const auto m = static_cast<Eigen::Index>(plan.indices.size());
    return detail::make_estimate(pinv.quadratic_form(gram.column_means(plan.indices)), EstimatorKind::Nystrom, gram.size(), m);
}

inline KsdEstimate nystrom_statistic(const SteinKernel &sk, const SampleSet &samples, const NystromPlan &plan) {
    if (samples.rows() < 1) { throw ConfigError("nystrom_statistic: empty sample set"); }
    return nystrom_statistic(SteinGram(sk, samples), plan);
}

}  // namespace ksd
