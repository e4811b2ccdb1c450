// Shared vocabulary for the dualcomp headers: error types, grid coordinates,
// small numeric helpers and a deterministic static-partition parallel_for.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dualcomp {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad data handed to an operation (shape mismatch, non-finite values, ...).
class InvalidInput : public Error {
  public:
    using Error::Error;
};

// Out-of-range or inconsistent configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

// Malformed file on disk.
class FormatError : public Error {
  public:
    using Error::Error;
};

struct Cell {
    int row = 0;
    int col = 0;

    friend constexpr bool operator==(const Cell&, const Cell&) = default;
    // Raster (row-major) order.
    friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

constexpr int chebyshev(Cell a, Cell b) noexcept {
    const int dr = a.row > b.row ? a.row - b.row : b.row - a.row;
    const int dc = a.col > b.col ? a.col - b.col : b.col - a.col;
    return dr > dc ? dr : dc;
}

// Row-major flattening for an H x W grid.
struct Shape2 {
    int height = 0;
    int width = 0;

    [[nodiscard]] constexpr std::size_t cells() const noexcept {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    [[nodiscard]] constexpr std::size_t index(Cell c) const noexcept {
        return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(c.col);
    }
    [[nodiscard]] constexpr Cell cell(std::size_t i) const noexcept {
        return {static_cast<int>(i / static_cast<std::size_t>(width)),
                static_cast<int>(i % static_cast<std::size_t>(width))};
    }
    [[nodiscard]] constexpr bool contains(Cell c) const noexcept {
        return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width;
    }
    friend constexpr bool operator==(const Shape2&, const Shape2&) = default;
};

namespace detail {

template <typename T>
[[nodiscard]] double dot_impl(std::span<const T> a, std::span<const T> b) noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    return acc;
}

template <typename T>
[[nodiscard]] double cosine_impl(std::span<const T> a, std::span<const T> b) noexcept {
    const double na = dot_impl(a, a);
    const double nb = dot_impl(b, b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot_impl(a, b) / std::sqrt(na * nb);
}

}  // namespace detail

[[nodiscard]] inline double dot(std::span<const float> a, std::span<const float> b) noexcept { return detail::dot_impl(a, b); }
[[nodiscard]] inline double dot(std::span<const double> a, std::span<const double> b) noexcept { return detail::dot_impl(a, b); }
[[nodiscard]] inline double squared_norm(std::span<const float> a) noexcept { return detail::dot_impl(a, a); }
[[nodiscard]] inline double squared_norm(std::span<const double> a) noexcept { return detail::dot_impl(a, a); }

// Cosine similarity; a zero vector on either side gives 0.
[[nodiscard]] inline double cosine(std::span<const float> a, std::span<const float> b) noexcept {
    return detail::cosine_impl(a, b);
}
[[nodiscard]] inline double cosine(std::span<const double> a, std::span<const double> b) noexcept {
    return detail::cosine_impl(a, b);
}

[[nodiscard]] inline bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

[[nodiscard]] inline bool all_finite(std::span<const float> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

// Worker cap from DUALCOMP_THREADS, falling back to hardware concurrency.
[[nodiscard]] inline unsigned default_workers() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DUALCOMP_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return std::min<unsigned>(static_cast<unsigned>(v), 1024u);
    }
    return hw;
}

// Runs body(i) for i in [0, n) over `workers` contiguous chunks. Each index is
// visited exactly once, so writing results into per-index slots gives output
// independent of the worker count.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    workers = std::max(1u, workers);
    if (workers == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t parts = std::min<std::size_t>(workers, n);
    std::vector<std::jthread> pool;
    pool.reserve(parts - 1);
    std::vector<std::exception_ptr> errors(parts);
    auto run_chunk = [&](std::size_t p) {
        const std::size_t lo = n * p / parts;
        const std::size_t hi = n * (p + 1) / parts;
        try {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        } catch (...) {
            errors[p] = std::current_exception();
        }
    };
    for (std::size_t p = 1; p < parts; ++p) pool.emplace_back(run_chunk, p);
    run_chunk(0);
    pool.clear();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace dualcomp
