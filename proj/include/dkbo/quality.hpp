#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "phantom.hpp"

namespace dkbo {

enum class Feedback { q_c, q_s };

inline const char* feedback_name(Feedback f) { return f == Feedback::q_c ? "q_c" : "q_s"; }

inline Feedback parse_feedback(const std::string& s) {
    if (s == "q_c" || s == "qc") return Feedback::q_c;
    if (s == "q_s" || s == "qs") return Feedback::q_s;
    throw std::invalid_argument("unknown feedback kind: " + s);
}

struct QualityScore {
    double value = 0.0;
    Feedback kind = Feedback::q_s;
};

// Smooth feedback: normalized mean of the mask.
inline double seg_score(const Mask& m, double max_area_fraction = 0.35) {
    if (m.px.empty()) throw std::invalid_argument("seg_score: empty mask");
    return std::clamp(m.mean() / max_area_fraction, 0.0, 1.0);
}

// Staircase feedback: five levels over the segmentation score, zero without
// probe contact, reported on the normalized 0-1 scale.
inline double class_score(const Observation& obs, double max_area_fraction = 0.35) {
    if (!obs.contact) return 0.0;
    const double s = seg_score(obs.mask, max_area_fraction);
    int level = 1;
    for (double cut : {0.2, 0.4, 0.6, 0.8})
        if (s > cut) ++level;
    return (level - 1) / 4.0;
}

namespace loss_detail {

inline void check_pair(const Mask& yt, const Mask& yp) {
    if (yt.h != yp.h || yt.w != yp.w || yt.px.size() != yp.px.size())
        throw std::invalid_argument("loss: mask shape mismatch");
    if (yt.px.empty()) throw std::invalid_argument("loss: empty mask");
}

struct Sums {
    double t = 0.0, p = 0.0, tp = 0.0;
};

inline Sums mask_sums(const Mask& yt, const Mask& yp) {
    Sums s;
    for (std::size_t i = 0; i < yt.px.size(); ++i) {
        s.t += yt.px[i];
        s.p += yp.px[i];
        s.tp += yt.px[i] * yp.px[i];
    }
    return s;
}

}  // namespace loss_detail

inline double dice_loss(const Mask& yt, const Mask& yp, double s = 1.0) {
    loss_detail::check_pair(yt, yp);
    if (s < 0.0) throw std::invalid_argument("dice_loss: negative smoothing");
    const auto m = loss_detail::mask_sums(yt, yp);
    return 1.0 - (2.0 * m.tp + s) / (m.t + m.p + s);
}

inline double jaccard_loss(const Mask& yt, const Mask& yp, double s = 1.0) {
    loss_detail::check_pair(yt, yp);
    if (s < 0.0) throw std::invalid_argument("jaccard_loss: negative smoothing");
    const auto m = loss_detail::mask_sums(yt, yp);
    return 1.0 - (m.tp + s) / (m.t + m.p - m.tp + s);
}

// Mean over pixels, predictions clipped away from {0, 1} before the logs.
inline double bce_loss(const Mask& yt, const Mask& yp) {
    loss_detail::check_pair(yt, yp);
    constexpr double eps = 1e-7;
    double acc = 0.0;
    for (std::size_t i = 0; i < yt.px.size(); ++i) {
        const double p = std::clamp(yp.px[i], eps, 1.0 - eps);
        acc += -yt.px[i] * std::log(p) - (1.0 - yt.px[i]) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(yt.px.size());
}

inline double djb_loss(const Mask& yt, const Mask& yp, double s = 1.0) {
    return dice_loss(yt, yp, s) + jaccard_loss(yt, yp, s) + bce_loss(yt, yp);
}

// Spatial grid of feature channels, channel-last layout.
struct FeatureVolume {
    int h = 0;
    int w = 0;
    int n = 0;
    std::vector<double> data;  // (h * w) rows by n channels

    static FeatureVolume zeros(int h, int w, int n) {
        FeatureVolume x;
        x.h = h;
        x.w = w;
        x.n = n;
        x.data.assign(static_cast<std::size_t>(h) * w * n, 0.0);
        return x;
    }

    double& at(int i, int j, int c) {
        return data[(static_cast<std::size_t>(i) * w + j) * n + c];
    }
    double at(int i, int j, int c) const {
        return data[(static_cast<std::size_t>(i) * w + j) * n + c];
    }
};

// Channel reduction by the caller-supplied projection, then the covariance of
// the per-pixel reduced vectors as a centered outer-product sum.
inline Eigen::MatrixXd sop_covariance(const FeatureVolume& x, const Eigen::MatrixXd& proj) {
    if (proj.cols() == 0) throw std::invalid_argument("sop_covariance: zero reduced channels");
    if (proj.rows() != x.n)
        throw std::invalid_argument("sop_covariance: projection rows must match channel count");
    for (double v : x.data)
        if (!std::isfinite(v)) throw std::invalid_argument("sop_covariance: non-finite feature");
    const Eigen::Index pixels = static_cast<Eigen::Index>(x.h) * x.w;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
        x.data.data(), pixels, x.n);
    Eigen::MatrixXd v = X * proj;  // pixels x m
    const Eigen::RowVectorXd mean = v.colwise().mean();
    v.rowwise() -= mean;
    return v.transpose() * v;
}

inline FeatureVolume sop_reweight(const FeatureVolume& x, const std::vector<double>& w) {
    if (static_cast<int>(w.size()) != x.n)
        throw std::invalid_argument("sop_reweight: weight length must match channel count");
    FeatureVolume out = x;
    const std::size_t pixels = static_cast<std::size_t>(x.h) * x.w;
    for (std::size_t p = 0; p < pixels; ++p)
        for (int c = 0; c < x.n; ++c) out.data[p * x.n + c] *= w[c];
    return out;
}

}  // namespace dkbo
