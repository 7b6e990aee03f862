#pragma once

#include <algorithm>
#include <span>
#include <variant>

#include "ksd/common.hpp"
#include "ksd/kernel.hpp"
#include "ksd/parallel.hpp"
#include "ksd/score_models.hpp"

namespace ksd {

/// Langevin Stein kernel built from a base kernel and a target score:
///   h(x, y) = <s(x), s(y)> k + <s(y), grad_x k> + <s(x), grad_y k> + sum_i d^2 k / dx_i dy_i.
struct SteinKernel {
    KernelParams kernel;
    ScoreModel model;
};

struct GramOptions {
    /// Rows per work unit during assembly.
    Eigen::Index panel_rows = 256;
};

namespace detail {

// h(x, y) for a radial kernel given both points and their scores. With phi the
// radial profile, grad_x k = 2 phi' (x - y) = -grad_y k, so the two mixed terms
// collapse to 2 phi' <s(y) - s(x), x - y>.
template<class Kern>
inline double stein_pair(const Kern &kern, const double *x, const double *sx, const double *y, const double *sy, Eigen::Index d) {
    double r2 = 0.0;
    double ss = 0.0;
    double mixed = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double diff = x[i] - y[i];
        r2 += diff * diff;
        ss += sx[i] * sy[i];
        mixed += (sy[i] - sx[i]) * diff;
    }
    const RadialTerms t = radial_terms(kern, r2);
    return ss * t.value + 2.0 * t.d1 * mixed - 2.0 * static_cast<double>(d) * t.d1 - 4.0 * r2 * t.d2;
}

}  // namespace detail

/// h(x, y) for a single pair.
inline double stein_value(const SteinKernel &sk, std::span<const double> x, std::span<const double> y) {
    detail::check_pair(x, y);
    const Vector sx = score(sk.model, x);
    const Vector sy = score(sk.model, y);
    return std::visit(
        [&](const auto &kern) {
            return detail::stein_pair(kern, x.data(), sx.data(), y.data(), sy.data(), static_cast<Eigen::Index>(x.size()));
        },
        sk.kernel);
}

/// Block of the Stein Gram matrix with the index lists it was built from.
struct GramBlock {
    Matrix values;
    IndexList row_ids;
    IndexList col_ids;
};

/// A sample set paired with its cached scores. All Gram quantities are built from here
/// so that each score is evaluated once per sample set.
class SteinGram {
public:
    SteinGram(const SteinKernel &sk, const SampleSet &samples, GramOptions options = {})
        : kernel_(sk.kernel), samples_(samples), options_(options) {
        validate(sk.kernel);
        validate(sk.model);
        if (samples.rows() < 1) { throw ConfigError("Stein Gram: empty sample set"); }
        detail::require_same_dim(samples.cols(), dimension(sk.model), "Stein Gram");
        detail::require_finite(samples, "Stein Gram");
        if (options_.panel_rows < 1) { throw ConfigError("Stein Gram: panel_rows must be positive"); }
        scores_ = score_rows(sk.model, samples);
    }

    [[nodiscard]] Eigen::Index size() const { return samples_.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return samples_.cols(); }
    [[nodiscard]] const SampleSet &samples() const { return samples_; }
    [[nodiscard]] const SampleSet &scores() const { return scores_; }

    [[nodiscard]] double entry(Eigen::Index i, Eigen::Index j) const {
        return std::visit([&](const auto &kern) { return pair(kern, i, j); }, kernel_);
    }

    /// K[rows, cols]. When rows == cols the result is symmetrized.
    [[nodiscard]] Matrix block(const IndexList &rows, const IndexList &cols) const {
        check_ids(rows);
        check_ids(cols);
        const auto r = static_cast<Eigen::Index>(rows.size());
        const auto c = static_cast<Eigen::Index>(cols.size());
        Matrix out(r, c);
        std::visit(
            [&](const auto &kern) {
                for_panels(r, [&](Eigen::Index lo, Eigen::Index hi) {
                    for (Eigen::Index j = 0; j < c; ++j) {
                        for (Eigen::Index i = lo; i < hi; ++i) { out(i, j) = pair(kern, rows[i], cols[j]); }
                    }
                });
            },
            kernel_);
        if (rows == cols) { symmetrize(out); }
        return out;
    }

    /// K[:, ids] as an n x m matrix.
    [[nodiscard]] Matrix columns(const IndexList &ids) const {
        check_ids(ids);
        const Eigen::Index n = size();
        Matrix out(n, static_cast<Eigen::Index>(ids.size()));
        std::visit(
            [&](const auto &kern) {
                parallel_for(ids.size(), [&](std::size_t a) {
                    double *col = out.col(static_cast<Eigen::Index>(a)).data();
                    for (Eigen::Index j = 0; j < n; ++j) { col[j] = pair(kern, ids[a], j); }
                });
            },
            kernel_);
        return out;
    }

    /// Column means of K[:, ids], accumulated without storing the block.
    [[nodiscard]] Vector column_means(const IndexList &ids) const {
        check_ids(ids);
        const Eigen::Index n = size();
        Vector out(static_cast<Eigen::Index>(ids.size()));
        std::visit(
            [&](const auto &kern) {
                parallel_for(ids.size(), [&](std::size_t a) {
                    double s = 0.0;
                    for (Eigen::Index j = 0; j < n; ++j) { s += pair(kern, ids[a], j); }
                    out[static_cast<Eigen::Index>(a)] = s / static_cast<double>(n);
                });
            },
            kernel_);
        return out;
    }

    /// The full n x n Gram matrix (exactly symmetric, upper triangle mirrored).
    [[nodiscard]] Matrix full() const {
        const Eigen::Index n = size();
        Matrix out(n, n);
        std::visit(
            [&](const auto &kern) {
                for_panels(n, [&](Eigen::Index lo, Eigen::Index hi) {
                    for (Eigen::Index j = lo; j < n; ++j) {
                        const Eigen::Index top = std::min(j + 1, hi);
                        for (Eigen::Index i = lo; i < top; ++i) { out(i, j) = pair(kern, i, j); }
                    }
                });
            },
            kernel_);
        out.triangularView<Eigen::StrictlyLower>() = out.transpose();
        return out;
    }

    /// sum_{i,j} K_ij and sum_i K_ii without materializing K.
    struct Sums {
        double total;
        double diagonal;
    };

    [[nodiscard]] Sums sums() const {
        const Eigen::Index n = size();
        const auto panels = panel_count(n);
        std::vector<double> off(panels, 0.0);
        std::vector<double> diag(panels, 0.0);
        std::visit(
            [&](const auto &kern) {
                parallel_for(panels, [&](std::size_t p) {
                    const auto [lo, hi] = panel_bounds(p, n);
                    double o = 0.0;
                    double dg = 0.0;
                    for (Eigen::Index i = lo; i < hi; ++i) {
                        dg += pair(kern, i, i);
                        for (Eigen::Index j = i + 1; j < n; ++j) { o += pair(kern, i, j); }
                    }
                    off[p] = o;
                    diag[p] = dg;
                });
            },
            kernel_);
        double o = 0.0;
        double dg = 0.0;
        for (std::size_t p = 0; p < panels; ++p) {
            o += off[p];
            dg += diag[p];
        }
        return {dg + 2.0 * o, dg};
    }

private:
    template<class Kern>
    double pair(const Kern &kern, Eigen::Index i, Eigen::Index j) const {
        const Eigen::Index d = samples_.cols();
        return detail::stein_pair(kern, samples_.data() + i * d, scores_.data() + i * d, samples_.data() + j * d,
                                  scores_.data() + j * d, d);
    }

    void check_ids(const IndexList &ids) const {
        if (ids.empty()) { throw ConfigError("Stein Gram: empty index list"); }
        for (const auto id : ids) {
            if (id < 0 || id >= size()) { throw ConfigError("Stein Gram: index " + std::to_string(id) + " out of range"); }
        }
    }

    [[nodiscard]] std::size_t panel_count(Eigen::Index rows) const {
        return static_cast<std::size_t>((rows + options_.panel_rows - 1) / options_.panel_rows);
    }

    [[nodiscard]] std::pair<Eigen::Index, Eigen::Index> panel_bounds(std::size_t p, Eigen::Index rows) const {
        const Eigen::Index lo = static_cast<Eigen::Index>(p) * options_.panel_rows;
        return {lo, std::min(rows, lo + options_.panel_rows)};
    }

    template<class Body>
    void for_panels(Eigen::Index rows, Body &&body) const {
        parallel_for(panel_count(rows), [&](std::size_t p) {
            const auto [lo, hi] = panel_bounds(p, rows);
            body(lo, hi);
        });
    }

    static void symmetrize(Matrix &m) {
        const Matrix t = m.transpose();
        m = 0.5 * (m + t);
    }

    KernelParams kernel_;
    const SampleSet &samples_;
    GramOptions options_;
    SampleSet scores_;
};

inline IndexList iota_ids(Eigen::Index n) {
    IndexList ids(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) { ids[static_cast<std::size_t>(i)] = i; }
    return ids;
}

/// Gram block of `samples` restricted to the given row and column indices.
inline GramBlock gram_block(const SteinKernel &sk, const SampleSet &samples, const IndexList &row_ids, const IndexList &col_ids,
                            GramOptions options = {}) {
    const SteinGram gram(sk, samples, options);
    return {gram.block(row_ids, col_ids), row_ids, col_ids};
}

/// Gram block between two separate point sets. Symmetrized when `rows` and `cols` are the same object.
inline GramBlock gram_block(const SteinKernel &sk, const SampleSet &rows, const SampleSet &cols, GramOptions options = {}) {
    if (rows.rows() < 1 || cols.rows() < 1) { throw ConfigError("gram_block: empty slice"); }
    if (&rows == &cols) { return gram_block(sk, rows, iota_ids(rows.rows()), iota_ids(rows.rows()), options); }
    detail::require_same_dim(rows.cols(), cols.cols(), "gram_block");
    SampleSet joined(rows.rows() + cols.rows(), rows.cols());
    joined << rows, cols;
    IndexList r = iota_ids(rows.rows());
    IndexList c(static_cast<std::size_t>(cols.rows()));
    for (Eigen::Index j = 0; j < cols.rows(); ++j) { c[static_cast<std::size_t>(j)] = rows.rows() + j; }
    const SteinGram gram(sk, joined, options);
    GramBlock out{gram.block(r, c), iota_ids(rows.rows()), iota_ids(cols.rows())};
    return out;
}

}  // namespace ksd
