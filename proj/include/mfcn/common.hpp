#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfcn {

inline std::string strprintf(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    char buf[1024];
    std::vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    return std::string(buf);
}

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

// Deterministic pairwise summation. Used for every reduction that feeds
// simulation state or output, so results do not depend on thread count.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(std::span<const double> x) { return pairwise_sum(x.data(), x.size()); }
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2sq(const double* a, int n) { return dot(a, a, n); }

// y += A x, A row-major (rows x cols)
inline void matvec_acc(const double* A, const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) y[r] += dot(A + static_cast<std::ptrdiff_t>(r) * cols, x, cols);
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

// Sample mean and standard error, deterministic reduction order.
inline MeanStderr mean_stderr(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const double m = pairwise_sum(x) / static_cast<double>(n);
    if (n == 1) return {m, 0.0};
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - m;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    return {m, std::sqrt(var / static_cast<double>(n))};
}

inline double sample_variance(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    const double m = pairwise_sum(x) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - m;
        sq[i] = d * d;
    }
    return pairwise_sum(sq) / static_cast<double>(n - 1);
}

// Upper tail of the standard normal, Phi-bar(z) = P(Z >= z).
inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace mfcn
