#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace riscap {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLog2E = 1.4426950408889634074;

// Default cap on enumerated supports (inputs, pilot blocks, phase patterns).
inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 20;

struct InvalidParameter : std::runtime_error {
    explicit InvalidParameter(const std::string& what) : std::runtime_error(what) {}
};

struct NoDataSubBlocks : InvalidParameter {
    explicit NoDataSubBlocks(const std::string& what) : InvalidParameter(what) {}
};

struct CapacityExceeded : std::runtime_error {
    explicit CapacityExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct InternalError : std::runtime_error {
    explicit InternalError(const std::string& what) : std::runtime_error(what) {}
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// Fixed-order pairwise summation tree. The result depends only on the order of
// `values`, never on thread count or chunking, so parallel reductions that fill
// a slot array first stay bit-identical.
inline double pairwise_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

struct MeanStderr {
    double mean = 0.0;
    double std_err = 0.0;
};

// Sample mean and standard error of the mean, both via pairwise reductions.
inline MeanStderr mean_and_stderr(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return {0.0, 0.0};
    MeanStderr out;
    out.mean = pairwise_sum(values) / static_cast<double>(n);
    if (n < 2) return out;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    out.std_err = std::sqrt(var / static_cast<double>(n));
    return out;
}

// Runs fn(i) for i in [0, count). Worker threads pull disjoint index blocks;
// fn must write only to per-index slots so the result is schedule independent.
inline void parallel_for_index(std::size_t count, unsigned threads,
                               const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(count));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const std::size_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = static_cast<std::size_t>(w) * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn, &failure, &failure_mutex] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// Checked a^b for support-size accounting; throws CapacityExceeded past `cap`.
inline std::size_t checked_pow(std::size_t base, std::size_t exp, std::size_t cap,
                               const std::string& what) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (base != 0 && r > cap / base) {
            throw CapacityExceeded(what + " exceeds enumeration cap of " + std::to_string(cap) +
                                   " elements");
        }
        r *= base;
        if (r > cap) {
            throw CapacityExceeded(what + " exceeds enumeration cap of " + std::to_string(cap) +
                                   " elements");
        }
    }
    return r;
}

}  // namespace riscap
