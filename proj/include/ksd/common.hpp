#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ksd {

/// Observations stored one per row (n x d). Row-major so that a sample is contiguous.
using SampleSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<Eigen::Index>;

/// Invalid parameters, dimension mismatches, bad configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or non-finite input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// View of a contiguous Eigen vector, row, or column as a span.
template<class Derived>
std::span<const double> as_span(const Eigen::DenseBase<Derived> &v) {
    static_assert(Derived::InnerStrideAtCompileTime == 1, "as_span needs contiguous storage");
    return {v.derived().data(), static_cast<std::size_t>(v.size())};
}

namespace detail {

template<class Derived>
void require_finite(const Eigen::DenseBase<Derived> &v, const char *what) {
    if (!v.derived().allFinite()) { throw DataError(std::string(what) + ": non-finite coordinate"); }
}

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char *what) {
    if (a != b) {
        throw ConfigError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
    if (a < 1) { throw ConfigError(std::string(what) + ": dimension must be at least 1"); }
}

}  // namespace detail

/// SplitMix64 finalizer. Used to derive independent child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for stream `stream` of `master`; distinct streams give unrelated seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix_seed(mix_seed(master) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace ksd
