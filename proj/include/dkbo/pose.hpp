#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "random.hpp"

namespace dkbo {

inline constexpr int kPoseDims = 6;

inline constexpr std::array<const char*, kPoseDims> kDimNames = {
    "x", "y", "f_z", "roll", "pitch", "yaw"};

// Probe control vector: positions in meters, contact force in newtons,
// orientation in radians.
struct ProbePose {
    double x = 0.0;
    double y = 0.0;
    double f_z = 0.0;
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;

    std::array<double, kPoseDims> coords() const { return {x, y, f_z, roll, pitch, yaw}; }

    static ProbePose from_coords(const std::array<double, kPoseDims>& c) {
        return {c[0], c[1], c[2], c[3], c[4], c[5]};
    }

    bool finite() const {
        for (double v : coords())
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const ProbePose&) const = default;
};

// Per-dimension closed search intervals. The force upper bound is a hard
// safety limit and may never exceed 20 N.
struct Bounds {
    std::array<double, kPoseDims> lo = {-0.05, -0.02, 5.0, -0.2, -0.2, -0.5};
    std::array<double, kPoseDims> hi = {0.05, 0.02, 20.0, 0.2, 0.2, 0.5};

    void validate() const {
        for (int d = 0; d < kPoseDims; ++d) {
            if (!std::isfinite(lo[d]) || !std::isfinite(hi[d]) || !(lo[d] < hi[d]))
                throw std::invalid_argument(std::string("Bounds: invalid interval for ") +
                                            kDimNames[d]);
        }
        if (hi[2] > 20.0) throw std::invalid_argument("Bounds: f_z upper bound exceeds 20 N");
    }

    bool contains(const ProbePose& p) const {
        const auto c = p.coords();
        for (int d = 0; d < kPoseDims; ++d)
            if (c[d] < lo[d] || c[d] > hi[d]) return false;
        return true;
    }
};

inline ProbePose clamp_pose(const ProbePose& pose, const Bounds& bounds) {
    bounds.validate();
    if (!pose.finite()) throw std::invalid_argument("clamp_pose: non-finite pose field");
    auto c = pose.coords();
    for (int d = 0; d < kPoseDims; ++d) {
        if (c[d] < bounds.lo[d]) c[d] = bounds.lo[d];
        if (c[d] > bounds.hi[d]) c[d] = bounds.hi[d];
    }
    return ProbePose::from_coords(c);
}

// Maps an in-bounds pose to the unit cube; all kernel distances and the
// network input live on this scale so mixed units cannot skew the metric.
inline std::array<double, kPoseDims> normalize(const ProbePose& pose, const Bounds& bounds) {
    const auto c = pose.coords();
    std::array<double, kPoseDims> u{};
    for (int d = 0; d < kPoseDims; ++d) {
        if (!(c[d] >= bounds.lo[d] && c[d] <= bounds.hi[d]))
            throw std::invalid_argument(std::string("normalize: pose out of bounds in ") +
                                        kDimNames[d]);
        u[d] = (c[d] - bounds.lo[d]) / (bounds.hi[d] - bounds.lo[d]);
    }
    return u;
}

inline ProbePose denormalize(const std::array<double, kPoseDims>& u, const Bounds& bounds) {
    std::array<double, kPoseDims> c{};
    for (int d = 0; d < kPoseDims; ++d) c[d] = bounds.lo[d] + u[d] * (bounds.hi[d] - bounds.lo[d]);
    return ProbePose::from_coords(c);
}

// One sample per stratum in every dimension, placed uniformly at random
// within its stratum (not at the center).
inline std::vector<std::array<double, kPoseDims>> latin_hypercube_unit(std::size_t n, Rng& rng) {
    std::vector<std::array<double, kPoseDims>> u(n);
    if (n == 0) return u;
    for (int d = 0; d < kPoseDims; ++d) {
        const auto strata = rng.permutation(n);
        for (std::size_t i = 0; i < n; ++i)
            u[i][d] = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n);
    }
    return u;
}

inline std::vector<ProbePose> latin_hypercube(std::size_t n, const Bounds& bounds,
                                              std::uint64_t seed) {
    bounds.validate();
    Rng rng(seed);
    const auto unit = latin_hypercube_unit(n, rng);
    std::vector<ProbePose> out;
    out.reserve(n);
    for (const auto& u : unit) out.push_back(denormalize(u, bounds));
    return out;
}

}  // namespace dkbo
