#pragma once

#include "poisson_embed/errors.hpp"
#include "poisson_embed/mesh.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

namespace test_support {

using poisson_embed::Point2;
using poisson_embed::TriMesh;

inline constexpr double kPi = std::numbers::pi;

struct Uniform {
    std::mt19937_64 rng;
    explicit Uniform(unsigned long long seed) : rng(seed) {}
    double operator()(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; }
};

inline int nearest_node(const TriMesh& mesh, const Point2& p) {
    int best = 0;
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const double e = (mesh.nodes[static_cast<std::size_t>(i)] - p).squaredNorm();
        if (e < d) {
            d = e;
            best = i;
        }
    }
    return best;
}

// Code of the Error thrown by f, empty when f returns normally.
template <class F>
std::optional<poisson_embed::ErrorCode> code_of(F&& f) {
    try {
        f();
    } catch (const poisson_embed::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

} // namespace test_support
