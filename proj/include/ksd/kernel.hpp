#pragma once

#include <cmath>
#include <span>
#include <string>
#include <variant>

#include "ksd/common.hpp"

namespace ksd {

/// Gaussian kernel k(x, y) = exp(-gamma * |x - y|^2).
struct Rbf {
    double gamma;
};

/// Inverse multiquadric k(x, y) = (c^2 + |x - y|^2)^theta with theta in (-1, 0).
struct Imq {
    double c;
    double theta;
};

using KernelParams = std::variant<Rbf, Imq>;

inline void validate(const KernelParams &params) {
    std::visit(
        [](const auto &p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Rbf>) {
                if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) { throw ConfigError("RBF kernel: gamma must be positive"); }
            } else {
                if (!(p.c > 0.0) || !std::isfinite(p.c)) { throw ConfigError("IMQ kernel: c must be positive"); }
                if (!(p.theta > -1.0 && p.theta < 0.0)) { throw ConfigError("IMQ kernel: theta must lie in (-1, 0)"); }
            }
        },
        params);
}

inline std::string describe(const KernelParams &params) {
    return std::visit(
        [](const auto &p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Rbf>) {
                return "rbf(gamma=" + std::to_string(p.gamma) + ")";
            } else {
                return "imq(c=" + std::to_string(p.c) + ",theta=" + std::to_string(p.theta) + ")";
            }
        },
        params);
}

/// Value and first two derivatives of the radial profile phi with k(x, y) = phi(|x - y|^2).
struct RadialTerms {
    double value;
    double d1;
    double d2;
};

namespace detail {

// pow(base, theta) with a fast path for the common theta = -1/2.
inline double imq_power(double base, double theta) {
    if (theta == -0.5) { return 1.0 / std::sqrt(base); }
    return std::pow(base, theta);
}

}  // namespace detail

inline RadialTerms radial_terms(const Rbf &p, double r2) {
    const double k = std::exp(-p.gamma * r2);
    return {k, -p.gamma * k, p.gamma * p.gamma * k};
}

inline RadialTerms radial_terms(const Imq &p, double r2) {
    const double base = p.c * p.c + r2;
    const double k = detail::imq_power(base, p.theta);
    const double d1 = p.theta * k / base;
    return {k, d1, (p.theta - 1.0) * d1 / base};
}

inline RadialTerms radial_terms(const KernelParams &params, double r2) {
    return std::visit([r2](const auto &p) { return radial_terms(p, r2); }, params);
}

namespace detail {

inline void check_pair(std::span<const double> x, std::span<const double> y) {
    require_same_dim(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(y.size()), "kernel");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) { throw DataError("kernel: non-finite coordinate"); }
    }
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = x[i] - y[i];
        r2 += t * t;
    }
    return r2;
}

}  // namespace detail

inline double kernel_value(const KernelParams &params, std::span<const double> x, std::span<const double> y) {
    detail::check_pair(x, y);
    return radial_terms(params, detail::squared_distance(x, y)).value;
}

/// Gradient of k(x, y) with respect to x; equals 2 phi'(r^2) (x - y).
inline Vector kernel_grad_x(const KernelParams &params, std::span<const double> x, std::span<const double> y) {
    detail::check_pair(x, y);
    const auto t = radial_terms(params, detail::squared_distance(x, y));
    Vector g(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) { g[static_cast<Eigen::Index>(i)] = 2.0 * t.d1 * (x[i] - y[i]); }
    return g;
}

/// sum_i d^2 k / dx_i dy_i = -2 d phi'(r^2) - 4 r^2 phi''(r^2).
inline double kernel_cross_trace(const KernelParams &params, std::span<const double> x, std::span<const double> y) {
    detail::check_pair(x, y);
    const double r2 = detail::squared_distance(x, y);
    const auto t = radial_terms(params, r2);
    return -2.0 * static_cast<double>(x.size()) * t.d1 - 4.0 * r2 * t.d2;
}

}  // namespace ksd
