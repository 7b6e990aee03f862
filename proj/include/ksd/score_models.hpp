#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <variant>

#include "ksd/common.hpp"

namespace ksd {

/// N(0, I_d) target.
struct StandardGaussian {
    Eigen::Index d;
};

/// Gauss-Bernoulli RBM with hidden units in {-1, +1}:
///   p(x, h) ∝ exp(b'x - |x|^2 / 2 + h'(B x + c_bias)).
/// B is d_hidden x d_visible.
struct GaussBernoulliRbm {
    Matrix B;
    Vector b;
    Vector c_bias;

    [[nodiscard]] Eigen::Index visible() const { return B.cols(); }
    [[nodiscard]] Eigen::Index hidden() const { return B.rows(); }
};

using ScoreModel = std::variant<StandardGaussian, GaussBernoulliRbm>;

inline void validate(const GaussBernoulliRbm &rbm) {
    if (rbm.B.rows() < 1 || rbm.B.cols() < 1) { throw ConfigError("RBM: weight matrix must be non-empty"); }
    if (rbm.b.size() != rbm.B.cols()) { throw ConfigError("RBM: visible bias length must equal B.cols()"); }
    if (rbm.c_bias.size() != rbm.B.rows()) { throw ConfigError("RBM: hidden bias length must equal B.rows()"); }
    if (!rbm.B.allFinite() || !rbm.b.allFinite() || !rbm.c_bias.allFinite()) { throw ConfigError("RBM: non-finite parameter"); }
}

inline void validate(const ScoreModel &model) {
    if (const auto *g = std::get_if<StandardGaussian>(&model)) {
        if (g->d < 1) { throw ConfigError("StandardGaussian: d must be at least 1"); }
    } else {
        validate(std::get<GaussBernoulliRbm>(model));
    }
}

inline Eigen::Index dimension(const ScoreModel &model) {
    if (const auto *g = std::get_if<StandardGaussian>(&model)) { return g->d; }
    return std::get<GaussBernoulliRbm>(model).visible();
}

/// grad_x log p(x).
inline Vector score(const ScoreModel &model, std::span<const double> x) {
    detail::require_same_dim(static_cast<Eigen::Index>(x.size()), dimension(model), "score");
    const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    detail::require_finite(xv, "score");
    if (std::holds_alternative<StandardGaussian>(model)) { return -xv; }
    const auto &rbm = std::get<GaussBernoulliRbm>(model);
    const Vector act = (rbm.B * xv + rbm.c_bias).array().tanh().matrix();
    return rbm.b - xv + rbm.B.transpose() * act;
}

/// Scores of every row of `x`, as an n x d row-major matrix.
inline SampleSet score_rows(const ScoreModel &model, const SampleSet &x) {
    detail::require_same_dim(x.cols(), dimension(model), "score");
    detail::require_finite(x, "score");
    if (std::holds_alternative<StandardGaussian>(model)) { return -x; }
    const auto &rbm = std::get<GaussBernoulliRbm>(model);
    Matrix act = x * rbm.B.transpose();
    act.rowwise() += rbm.c_bias.transpose();
    act = act.array().tanh().matrix();
    SampleSet s = act * rbm.B;
    s.rowwise() += rbm.b.transpose();
    s -= x;
    return s;
}

// ---------------------------------------------------------------------------
// Sampling distributions

struct GaussianSampler {
    Eigen::Index d;
};

/// Product of d centered Laplace(0, scale) coordinates.
struct ProductLaplace {
    Eigen::Index d;
    double scale;
};

/// Multivariate t with identity shape: z / sqrt(chi2_dof / dof).
struct StudentT {
    Eigen::Index d;
    double dof;
};

/// Block Gibbs chain on an RBM.
struct RbmGibbs {
    GaussBernoulliRbm model;
    std::size_t burn_in = 2000;
    std::size_t thinning = 50;
};

using SamplingDistribution = std::variant<GaussianSampler, ProductLaplace, StudentT, RbmGibbs>;

inline Eigen::Index dimension(const SamplingDistribution &dist) {
    return std::visit(
        [](const auto &q) -> Eigen::Index {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, RbmGibbs>) {
                return q.model.visible();
            } else {
                return q.d;
            }
        },
        dist);
}

inline void validate(const SamplingDistribution &dist) {
    std::visit(
        [](const auto &q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, RbmGibbs>) {
                validate(q.model);
                if (q.thinning < 1) { throw ConfigError("RbmGibbs: thinning must be at least 1"); }
            } else {
                if (q.d < 1) { throw ConfigError("sampler: d must be at least 1"); }
                if constexpr (std::is_same_v<T, ProductLaplace>) {
                    if (!(q.scale > 0.0) || !std::isfinite(q.scale)) { throw ConfigError("ProductLaplace: scale must be positive"); }
                }
                if constexpr (std::is_same_v<T, StudentT>) {
                    if (!(q.dof > 0.0) || !std::isfinite(q.dof)) { throw ConfigError("StudentT: dof must be positive"); }
                }
            }
        },
        dist);
}

namespace detail {

inline void gibbs_hidden(const GaussBernoulliRbm &rbm, const Vector &x, Vector &h, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Vector act = rbm.B * x + rbm.c_bias;
    for (Eigen::Index j = 0; j < h.size(); ++j) {
        // P(h_j = +1 | x) = sigmoid(2 a_j)
        const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * act[j]));
        h[j] = unif(rng) < p_plus ? 1.0 : -1.0;
    }
}

inline void gibbs_visible(const GaussBernoulliRbm &rbm, const Vector &h, Vector &x, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal;
    x = rbm.b + rbm.B.transpose() * h;
    for (Eigen::Index i = 0; i < x.size(); ++i) { x[i] += normal(rng); }
}

}  // namespace detail

/// Draws n rows from `dist`; the output depends only on (dist, n, seed).
inline SampleSet draw_samples(const SamplingDistribution &dist, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) { throw ConfigError("draw_samples: n must be at least 1"); }
    validate(dist);
    std::mt19937_64 rng(seed);
    const Eigen::Index d = dimension(dist);
    SampleSet out(n, d);
    std::normal_distribution<double> normal;

    if (std::holds_alternative<GaussianSampler>(dist)) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) { out(i, j) = normal(rng); }
        }
    } else if (const auto *lap = std::get_if<ProductLaplace>(&dist)) {
        std::exponential_distribution<double> expo(1.0);
        std::bernoulli_distribution coin(0.5);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                const double mag = lap->scale * expo(rng);
                out(i, j) = coin(rng) ? mag : -mag;
            }
        }
    } else if (const auto *t = std::get_if<StudentT>(&dist)) {
        std::chi_squared_distribution<double> chi2(t->dof);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) { out(i, j) = normal(rng); }
            out.row(i) /= std::sqrt(chi2(rng) / t->dof);
        }
    } else {
        const auto &g = std::get<RbmGibbs>(dist);
        const auto &rbm = g.model;
        Vector h(rbm.hidden());
        std::bernoulli_distribution coin(0.5);
        for (Eigen::Index j = 0; j < h.size(); ++j) { h[j] = coin(rng) ? 1.0 : -1.0; }
        Vector x(rbm.visible());
        detail::gibbs_visible(rbm, h, x, rng);
        for (std::size_t s = 0; s < g.burn_in; ++s) {
            detail::gibbs_hidden(rbm, x, h, rng);
            detail::gibbs_visible(rbm, h, x, rng);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (std::size_t s = 0; s < g.thinning; ++s) {
                detail::gibbs_hidden(rbm, x, h, rng);
                detail::gibbs_visible(rbm, h, x, rng);
            }
            out.row(i) = x.transpose();
        }
    }
    return out;
}

/// Copy of `model` with each weight B_ij shifted by independent N(0, sigma^2) noise.
inline GaussBernoulliRbm perturb_rbm(const GaussBernoulliRbm &model, double sigma, std::uint64_t seed) {
    validate(model);
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) { throw ConfigError("perturb_rbm: sigma must be non-negative"); }
    GaussBernoulliRbm out = model;
    if (sigma == 0.0) { return out; }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < out.B.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.B.cols(); ++j) { out.B(i, j) += noise(rng); }
    }
    return out;
}

inline ScoreModel perturb_rbm(const ScoreModel &model, double sigma, std::uint64_t seed) {
    const auto *rbm = std::get_if<GaussBernoulliRbm>(&model);
    if (rbm == nullptr) { throw ConfigError("perturb_rbm: model is not an RBM"); }
    return perturb_rbm(*rbm, sigma, seed);
}

/// RBM with every parameter drawn i.i.d. N(0, 1).
inline GaussBernoulliRbm random_rbm(Eigen::Index visible, Eigen::Index hidden, std::uint64_t seed) {
    if (visible < 1 || hidden < 1) { throw ConfigError("random_rbm: dimensions must be positive"); }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    GaussBernoulliRbm rbm{Matrix(hidden, visible), Vector(visible), Vector(hidden)};
    for (Eigen::Index i = 0; i < hidden; ++i) {
        for (Eigen::Index j = 0; j < visible; ++j) { rbm.B(i, j) = normal(rng); }
    }
    for (Eigen::Index j = 0; j < visible; ++j) { rbm.b[j] = normal(rng); }
    for (Eigen::Index i = 0; i < hidden; ++i) { rbm.c_bias[i] = normal(rng); }
    return rbm;
}

}  // namespace ksd
