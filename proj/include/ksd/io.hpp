#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ksd/common.hpp"
#include "ksd/score_models.hpp"

namespace ksd {

enum class DatasetFormat { Csv, RawF64Le };

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) { s.remove_prefix(1); }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) { s.remove_suffix(1); }
    return s;
}

inline std::uint64_t load_u64_le(const unsigned char *p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) { v = (v << 8) | p[i]; }
    return v;
}

inline void store_u64_le(std::uint64_t v, unsigned char *p) {
    for (int i = 0; i < 8; ++i) {
        p[i] = static_cast<unsigned char>(v & 0xff);
        v >>= 8;
    }
}

inline SampleSet read_csv(std::istream &in) {
    std::vector<double> values;
    Eigen::Index cols = -1;
    Eigen::Index rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty()) { continue; }
        Eigen::Index width = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = row.find(',', start);
            const std::string_view cell = trim(row.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            const std::string where = "row " + std::to_string(rows + 1) + ", column " + std::to_string(width + 1);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw DataError("CSV: malformed cell '" + std::string(cell) + "' at " + where + " (line " + std::to_string(line_no) + ")");
            }
            if (!std::isfinite(v)) { throw DataError("CSV: non-finite value at " + where); }
            values.push_back(v);
            ++width;
            if (comma == std::string_view::npos) { break; }
            start = comma + 1;
        }
        if (cols < 0) {
            cols = width;
        } else if (width != cols) {
            throw DataError("CSV: row " + std::to_string(rows + 1) + " has " + std::to_string(width) + " cells, expected " +
                            std::to_string(cols));
        }
        ++rows;
    }
    if (rows == 0) { throw DataError("CSV: empty dataset"); }
    return Eigen::Map<const SampleSet>(values.data(), rows, cols);
}

inline SampleSet read_raw(std::istream &in) {
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char *>(header), 16)) { throw DataError("raw: truncated header"); }
    const std::uint64_t n = load_u64_le(header);
    const std::uint64_t d = load_u64_le(header + 8);
    if (n == 0 || d == 0) { throw DataError("raw: empty dataset (n = " + std::to_string(n) + ", d = " + std::to_string(d) + ")"); }
    if (n > (std::uint64_t{1} << 40) / d) { throw DataError("raw: header dimensions too large"); }
    SampleSet out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<unsigned char> buf(8 * d);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (!in.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
            throw DataError("raw: truncated payload at row " + std::to_string(i + 1));
        }
        for (std::uint64_t j = 0; j < d; ++j) {
            const std::uint64_t bits = load_u64_le(buf.data() + 8 * j);
            double v;
            std::memcpy(&v, &bits, sizeof v);
            if (!std::isfinite(v)) {
                throw DataError("raw: non-finite value at row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1));
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) { throw DataError("raw: trailing bytes after payload"); }
    return out;
}

}  // namespace detail

inline DatasetFormat parse_format(std::string_view name) {
    if (name == "csv") { return DatasetFormat::Csv; }
    if (name == "raw-f64-le" || name == "raw") { return DatasetFormat::RawF64Le; }
    throw ConfigError("unknown dataset format '" + std::string(name) + "'");
}

/// Reads an n x d sample set. CSV: one observation per line, numeric cells only.
/// raw-f64-le: u64 n, u64 d, then n*d f64 values row-major, all little-endian.
inline SampleSet ingest_dataset(const std::filesystem::path &path, DatasetFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw DataError("cannot open dataset " + path.string()); }
    return format == DatasetFormat::Csv ? detail::read_csv(in) : detail::read_raw(in);
}

inline void write_raw(const std::filesystem::path &path, const SampleSet &samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) { throw DataError("cannot write " + path.string()); }
    unsigned char word[8];
    detail::store_u64_le(static_cast<std::uint64_t>(samples.rows()), word);
    out.write(reinterpret_cast<const char *>(word), 8);
    detail::store_u64_le(static_cast<std::uint64_t>(samples.cols()), word);
    out.write(reinterpret_cast<const char *>(word), 8);
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (Eigen::Index j = 0; j < samples.cols(); ++j) {
            std::uint64_t bits;
            const double v = samples(i, j);
            std::memcpy(&bits, &v, sizeof v);
            detail::store_u64_le(bits, word);
            out.write(reinterpret_cast<const char *>(word), 8);
        }
    }
    if (!out) { throw DataError("write failed for " + path.string()); }
}

inline void write_csv(const std::filesystem::path &path, const SampleSet &samples) {
    std::ofstream out(path);
    if (!out) { throw DataError("cannot write " + path.string()); }
    out.precision(17);
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (Eigen::Index j = 0; j < samples.cols(); ++j) { out << (j ? "," : "") << samples(i, j); }
        out << '\n';
    }
}

// RBM target files: {"B": [[...], ...], "b": [...], "c_bias": [...]}, B is d_hidden x d_visible.

inline nlohmann::json rbm_to_json(const GaussBernoulliRbm &rbm) {
    nlohmann::json j;
    j["B"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < rbm.B.rows(); ++r) {
        std::vector<double> row(rbm.B.row(r).begin(), rbm.B.row(r).end());
        j["B"].push_back(row);
    }
    j["b"] = std::vector<double>(rbm.b.begin(), rbm.b.end());
    j["c_bias"] = std::vector<double>(rbm.c_bias.begin(), rbm.c_bias.end());
    return j;
}

inline GaussBernoulliRbm rbm_from_json(const nlohmann::json &j) {
    try {
        const auto rows = j.at("B").get<std::vector<std::vector<double>>>();
        const auto b = j.at("b").get<std::vector<double>>();
        const auto c = j.at("c_bias").get<std::vector<double>>();
        if (rows.empty()) { throw ConfigError("RBM file: B is empty"); }
        GaussBernoulliRbm rbm{Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size())),
                              Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size())),
                              Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()))};
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows.front().size()) { throw ConfigError("RBM file: ragged B"); }
            for (std::size_t col = 0; col < rows[r].size(); ++col) {
                rbm.B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = rows[r][col];
            }
        }
        validate(rbm);
        return rbm;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("RBM file: ") + e.what());
    }
}

inline GaussBernoulliRbm load_rbm(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) { throw DataError("cannot open RBM file " + path.string()); }
    try {
        return rbm_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(std::string("RBM file: ") + e.what());
    }
}

}  // namespace ksd
