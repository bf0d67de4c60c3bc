#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pose.hpp"
#include "random.hpp"

namespace dkbo {

enum class Variant { P0, P1, P2 };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::P0: return "P0";
        case Variant::P1: return "P1";
        case Variant::P2: return "P2";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "P0") return Variant::P0;
    if (s == "P1") return Variant::P1;
    if (s == "P2") return Variant::P2;
    throw std::invalid_argument("unknown phantom variant: " + s);
}

struct Mask {
    int h = 0;
    int w = 0;
    std::vector<double> px;  // row-major, values in [0, 1]

    double mean() const {
        if (px.empty()) return 0.0;
        return std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());
    }
};

struct Observation {
    Mask mask;
    bool contact = false;
    double q_true = 0.0;  // noisy quality behind the mask; 0 exactly iff no contact
};

// Synthetic stand-in for phantom + ultrasound machine. The quality field is a
// separable squared exponential over unit-cube coordinates (force included,
// so the force factor is a smooth window peaking between f_min and 20 N),
// cut hard to zero below the contact force threshold.
struct PhantomModel {
    Variant variant = Variant::P0;
    std::array<double, kPoseDims> u_opt{};    // optimum, unit-cube scale
    std::array<double, kPoseDims> widths{};   // falloff widths, unit-cube scale
    double f_min = 0.0;                       // newtons
    int grid_h = 64;
    int grid_w = 64;
    double max_area_fraction = 0.35;
    double sigma_obs = 0.02;
    std::uint64_t seed = 0;
    Bounds bounds;

    ProbePose p_opt() const { return denormalize(u_opt, bounds); }
};

namespace phantom_detail {

// Geometry shared by the three variants. Calibrated so that a 1200-pose LHS
// over the default bounds lands 7-12% of samples above quality 0.8; the x
// width additionally keeps the optimum plus three widths inside the cube.
inline constexpr std::array<double, kPoseDims> kOptBase = {0.22, 0.55, 0.55, 0.45, 0.60, 0.42};
inline constexpr std::array<double, kPoseDims> kOptDelta = {0.04, 0.05, 0.05, 0.05, -0.05, 0.06};
inline constexpr double kDeltaScaleP2 = 1.66;  // thicker-layer variant shifts further
inline constexpr std::array<double, kPoseDims> kWidths = {0.25, 1.10, 0.50, 1.80, 1.80, 1.00};
inline constexpr std::array<double, 3> kContactMin = {0.10, 0.20, 0.30};  // normalized force

}  // namespace phantom_detail

inline PhantomModel make_phantom(Variant variant, std::uint64_t seed) {
    PhantomModel m;
    m.variant = variant;
    m.seed = seed;
    const int vi = static_cast<int>(variant);
    const double scale = vi == 0 ? 0.0 : (vi == 1 ? 1.0 : phantom_detail::kDeltaScaleP2);
    for (int d = 0; d < kPoseDims; ++d)
        m.u_opt[d] = phantom_detail::kOptBase[d] + scale * phantom_detail::kOptDelta[d];
    m.widths = phantom_detail::kWidths;
    m.f_min = m.bounds.lo[2] +
              phantom_detail::kContactMin[vi] * (m.bounds.hi[2] - m.bounds.lo[2]);
    return m;
}

inline double ground_truth_quality(const PhantomModel& ph, const ProbePose& pose) {
    const auto u = normalize(pose, ph.bounds);  // rejects out-of-bounds poses
    if (pose.f_z < ph.f_min) return 0.0;
    double e = 0.0;
    for (int d = 0; d < kPoseDims; ++d) {
        const double t = (u[d] - ph.u_opt[d]) / ph.widths[d];
        e += t * t;
    }
    return std::exp(-0.5 * e);
}

namespace phantom_detail {

// Pixel order of increasing elliptical distance from the grid center. Filling
// the first k pixels of this order draws a solid ellipse of exactly k pixels,
// which makes the mask mean an exact, monotone function of quality.
inline std::vector<std::size_t> ellipse_fill_order(int h, int w) {
    const double ci = 0.5 * (h - 1);
    const double cj = 0.5 * (w - 1);
    const double ai = 0.8;   // semi-axis weights; area at max fill stays inside the grid
    const double aj = 1.25;
    std::vector<double> d(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double di = (i - ci) / ai;
            const double dj = (j - cj) / aj;
            d[static_cast<std::size_t>(i) * w + j] = di * di + dj * dj;
        }
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&d](std::size_t a, std::size_t b) {
        if (d[a] != d[b]) return d[a] < d[b];
        return a < b;
    });
    return order;
}

inline Mask render_mask_at_quality(const PhantomModel& ph, double q) {
    Mask m;
    m.h = ph.grid_h;
    m.w = ph.grid_w;
    m.px.assign(static_cast<std::size_t>(m.h) * m.w, 0.0);
    const double total = static_cast<double>(m.px.size());
    auto k = static_cast<std::size_t>(
        std::llround(std::clamp(q, 0.0, 1.0) * ph.max_area_fraction * total));
    k = std::min(k, m.px.size());
    if (k == 0) return m;
    const auto order = ellipse_fill_order(m.h, m.w);
    for (std::size_t t = 0; t < k; ++t) m.px[order[t]] = 1.0;
    return m;
}

}  // namespace phantom_detail

inline Mask render_mask(const PhantomModel& ph, const ProbePose& pose) {
    return phantom_detail::render_mask_at_quality(ph, ground_truth_quality(ph, pose));
}

inline Observation observe(const PhantomModel& ph, const ProbePose& pose,
                           std::uint64_t noise_seed) {
    const double q = ground_truth_quality(ph, pose);
    Observation obs;
    obs.contact = pose.f_z >= ph.f_min;
    Rng rng(mix_seed(ph.seed, noise_seed));
    double noisy = q + ph.sigma_obs * rng.normal();
    if (!obs.contact) {
        noisy = 0.0;
    } else {
        // tiny positive floor keeps "no contact iff zero quality" exact under
        // noise clipping; it sits far below the mask quantization step
        noisy = std::clamp(noisy, 1e-9, 1.0);
    }
    obs.q_true = noisy;
    obs.mask = phantom_detail::render_mask_at_quality(ph, noisy);
    return obs;
}

}  // namespace dkbo
