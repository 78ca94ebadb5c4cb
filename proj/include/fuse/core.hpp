#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuse {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files; carries a 1-based line number when known.
struct ParseError : Error {
    explicit ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_number(line) {}
    long line_number;
};

struct DataError : Error {
    using Error::Error;
};

// Inputs admit no meaningful estimate (all-zero spectrum, zero vector, ...).
struct DegenerateError : Error {
    using Error::Error;
};

struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double res) : Error(msg), residual(res) {}
    double residual;
};

// A baseline's prerequisites (labels, answer keys) are absent.
struct UnavailableError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Dense row-major matrix of doubles. Rows are contiguous, which is what the
// kernels layer expects.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Symmetric order-3 tensor over [m]^3, stored packed: one slot per unique
// index triple j <= k <= l. The packed layout groups entries by (j,k) pair,
// with l running contiguously over [k, m) so kernels can stream along l.
class SymTensor3 {
public:
    SymTensor3() = default;
    explicit SymTensor3(std::size_t m) : m_(m) {
        pair_offset_.resize(m * m, 0);
        std::size_t off = 0;
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = j; k < m; ++k) {
                pair_offset_[j * m + k] = off;
                off += m - k;
            }
        }
        data_.assign(off, 0.0);
    }

    std::size_t dim() const { return m_; }
    std::size_t size() const { return data_.size(); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    // Base of the run {T[j,k,l] : l in [k, m)}; requires j <= k.
    std::size_t run_offset(std::size_t j, std::size_t k) const { return pair_offset_[j * m_ + k]; }

    double& at_sorted(std::size_t j, std::size_t k, std::size_t l) {
        return data_[run_offset(j, k) + (l - k)];
    }
    double at_sorted(std::size_t j, std::size_t k, std::size_t l) const {
        return data_[run_offset(j, k) + (l - k)];
    }

    // Arbitrary index order; sorts internally.
    double operator()(std::size_t a, std::size_t b, std::size_t c) const {
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        return at_sorted(a, b, c);
    }

    bool operator==(const SymTensor3&) const = default;

private:
    std::size_t m_ = 0;
    std::vector<double> data_;
    std::vector<std::size_t> pair_offset_;
};

// Counter-based deterministic randomness: every draw is a pure function of
// the values hashed in, so generation order and thread count never matter.
namespace rng {

constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash2(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

constexpr std::uint64_t hash3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return hash2(hash2(a, b), c);
}

constexpr std::uint64_t hash4(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return hash2(hash3(a, b, c), d);
}

constexpr std::uint64_t hash5(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d,
                              std::uint64_t e) {
    return hash2(hash4(a, b, c, d), e);
}

// Uniform in [0, 1) with 53 random bits.
constexpr double u01(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace rng

// FNV-1a over bytes; used to fingerprint configs in reports.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace fuse
