#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbfgs.hpp"
#include "net.hpp"
#include "pose.hpp"
#include "random.hpp"

namespace dkbo {

enum class KernelKind { RBF, Deep };

inline const char* kernel_name(KernelKind k) { return k == KernelKind::RBF ? "rbf" : "deep"; }

inline KernelKind parse_kernel(const std::string& s) {
    if (s == "rbf" || s == "RBF") return KernelKind::RBF;
    if (s == "deep" || s == "Deep" || s == "dk") return KernelKind::Deep;
    throw std::invalid_argument("unknown kernel kind: " + s);
}

// sigma_r and sigma_w are variances; the optimizer works on log values.
struct Hyperparams {
    double sigma_r = 1.0;
    double sigma_w = 0.1;
    double len = 0.5;
};

inline constexpr double kGpJitter = 1e-8;
inline constexpr double kGpJitterMax = 1e-4;
inline constexpr double kLogThetaLo = -6.0;
inline constexpr double kLogThetaHi = 4.0;

// Radial basis plus white noise; the white term contributes only when the two
// arguments are the same training index, never to cross covariances.
inline double kernel_rbf(const ProbePose& a, const ProbePose& b, const Hyperparams& th,
                         const Bounds& bounds, bool same_index = false) {
    const auto ua = normalize(a, bounds);
    const auto ub = normalize(b, bounds);
    double d2 = 0.0;
    for (int d = 0; d < kPoseDims; ++d) {
        const double t = ua[d] - ub[d];
        d2 += t * t;
    }
    return th.sigma_r * std::exp(-d2 / (2.0 * th.len * th.len)) +
           (same_index ? th.sigma_w : 0.0);
}

// Same form with the 6D distance replaced by the difference of the scalar
// network embeddings.
inline double kernel_deep(const ProbePose& a, const ProbePose& b, const Hyperparams& th,
                          const DeepKernelNet& net, const Bounds& bounds,
                          bool same_index = false) {
    const double fa = net_forward(net, normalize(a, bounds));
    const double fb = net_forward(net, normalize(b, bounds));
    const double d = fa - fb;
    return th.sigma_r * std::exp(-d * d / (2.0 * th.len * th.len)) +
           (same_index ? th.sigma_w : 0.0);
}

inline Eigen::MatrixXd gram(const std::vector<ProbePose>& poses, KernelKind kind,
                            const Hyperparams& th, const Bounds& bounds,
                            const DeepKernelNet* net = nullptr, double jitter = kGpJitter) {
    const auto n = static_cast<Eigen::Index>(poses.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            double v;
            if (kind == KernelKind::RBF) {
                v = kernel_rbf(poses[i], poses[j], th, bounds, i == j);
            } else {
                if (!net) throw std::invalid_argument("gram: deep kernel requires a net");
                v = kernel_deep(poses[i], poses[j], th, *net, bounds, i == j);
            }
            if (i == j) v += jitter;
            k(i, j) = v;
            k(j, i) = v;
        }
    return k;
}

struct FitReport {
    Hyperparams theta;
    double log_marginal = -std::numeric_limits<double>::infinity();
    bool ok = false;  // false means every restart failed and theta was kept
};

// GP regression over probe poses with empirical centering of the observed
// qualities. Pairwise squared distances (6D or embedding space) are cached;
// the Cholesky factor is rebuilt lazily whenever data or theta change.
class GPModel {
public:
    GPModel(KernelKind kind, const Bounds& bounds, const DeepKernelNet* net = nullptr)
        : kind_(kind), bounds_(bounds), net_(net) {
        bounds_.validate();
        if (kind_ == KernelKind::Deep && !net_)
            throw std::invalid_argument("GPModel: deep kernel requires a net");
    }

    KernelKind kind() const { return kind_; }
    const Bounds& bounds() const { return bounds_; }
    std::size_t size() const { return poses_.size(); }
    const Hyperparams& hyperparams() const { return theta_; }
    const std::vector<ProbePose>& poses() const { return poses_; }
    const std::vector<double>& observations() const { return obs_; }

    double best_observed() const {
        if (obs_.empty()) throw std::logic_error("GPModel: no observations");
        double best = obs_[0];
        for (double v : obs_) best = std::max(best, v);
        return best;
    }

    void set_hyperparams(const Hyperparams& th) {
        if (!(th.sigma_r >= 0.0) || !(th.sigma_w >= 0.0) || !(th.len > 0.0) ||
            !std::isfinite(th.sigma_r) || !std::isfinite(th.sigma_w) || !std::isfinite(th.len))
            throw std::invalid_argument("GPModel: invalid hyperparameters");
        theta_ = th;
        factor_valid_ = false;
    }

    void add(const ProbePose& p, double q) {
        const auto u = normalize(p, bounds_);  // rejects out-of-bounds poses
        const auto n = static_cast<Eigen::Index>(poses_.size());
        poses_.push_back(p);
        obs_.push_back(q);
        feats_.conservativeResize(feat_dim(), n + 1);
        if (kind_ == KernelKind::RBF) {
            for (int d = 0; d < kPoseDims; ++d) feats_(d, n) = u[d];
        } else {
            feats_(0, n) = net_forward(*net_, u);
        }
        dist2_.conservativeResize(n + 1, n + 1);
        dist2_(n, n) = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d2 = (feats_.col(i) - feats_.col(n)).squaredNorm();
            dist2_(i, n) = d2;
            dist2_(n, i) = d2;
        }
        factor_valid_ = false;
    }

    // Posterior mean and variance at a query pose; the white-noise variance
    // never enters (a query is not a training index), so variance is bounded
    // by sigma_r.
    std::pair<double, double> posterior(const ProbePose& p) const {
        Eigen::MatrixXd u(kPoseDims, 1);
        const auto nu = normalize(p, bounds_);
        for (int d = 0; d < kPoseDims; ++d) u(d, 0) = nu[d];
        Eigen::VectorXd mu(1), var(1);
        posterior_unit_batch(u, mu, var);
        return {mu(0), var(0)};
    }

    // Batched posterior over unit-cube points (one per column).
    void posterior_unit_batch(const Eigen::MatrixXd& u, Eigen::VectorXd& mu,
                              Eigen::VectorXd& var) const {
        if (poses_.empty()) throw std::logic_error("GPModel: no observations");
        ensure_factor();
        const Eigen::Index b = u.cols();
        Eigen::MatrixXd q;  // feat_dim x b query features
        if (kind_ == KernelKind::RBF) {
            q = u;
        } else {
            q.resize(1, b);
            q.row(0) = net_forward_batch(*net_, u).transpose();
        }
        // cross squared distances via the norm expansion
        const auto n = static_cast<Eigen::Index>(poses_.size());
        const Eigen::VectorXd tn = feats_.colwise().squaredNorm().transpose();
        const Eigen::VectorXd qn = q.colwise().squaredNorm().transpose();
        Eigen::MatrixXd d2 = tn.replicate(1, b) + qn.transpose().replicate(n, 1) -
                             2.0 * feats_.transpose() * q;
        const Eigen::MatrixXd kx =
            (theta_.sigma_r * (-d2 / (2.0 * theta_.len * theta_.len)).array().exp()).matrix();
        mu = ((kx.transpose() * alpha_).array() + obs_mean_).matrix();
        const Eigen::MatrixXd v = chol_.matrixL().solve(kx);
        var = (theta_.sigma_r - v.colwise().squaredNorm().transpose().array())
                  .max(0.0)
                  .matrix();
    }

    // Log evidence of the centered observations under K(theta), with the
    // analytic gradient in log-theta via the standard trace identities.
    double log_marginal(const Hyperparams& th, Eigen::Vector3d* grad_log = nullptr) const {
        const auto n = static_cast<Eigen::Index>(poses_.size());
        if (n == 0) throw std::logic_error("GPModel: no observations");
        const Eigen::MatrixXd krbf =
            th.sigma_r * (-dist2_.topLeftCorner(n, n) / (2.0 * th.len * th.len)).array().exp();
        double jitter = kGpJitter;
        Eigen::LLT<Eigen::MatrixXd> llt;
        for (;; jitter *= 10.0) {
            Eigen::MatrixXd k = krbf;
            k.diagonal().array() += th.sigma_w + jitter;
            llt.compute(k);
            if (llt.info() == Eigen::Success) break;
            if (jitter >= kGpJitterMax)
                return -std::numeric_limits<double>::infinity();
        }
        Eigen::VectorXd yc(n);
        double mean = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) mean += obs_[static_cast<std::size_t>(i)];
        mean /= static_cast<double>(n);
        for (Eigen::Index i = 0; i < n; ++i) yc(i) = obs_[static_cast<std::size_t>(i)] - mean;
        const Eigen::VectorXd alpha = llt.solve(yc);
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
        const double lml = -0.5 * yc.dot(alpha) - logdet -
                           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
        if (grad_log) {
            const Eigen::MatrixXd kinv =
                llt.solve(Eigen::MatrixXd::Identity(n, n));
            const Eigen::MatrixXd a = alpha * alpha.transpose() - kinv;
            const Eigen::MatrixXd dk_len =
                (krbf.array() * dist2_.topLeftCorner(n, n).array() / (th.len * th.len))
                    .matrix();
            (*grad_log)(0) = 0.5 * a.cwiseProduct(krbf).sum();           // d / d log sigma_r
            (*grad_log)(1) = 0.5 * th.sigma_w * a.trace();               // d / d log sigma_w
            (*grad_log)(2) = 0.5 * a.cwiseProduct(dk_len).sum();         // d / d log len
        }
        return lml;
    }

    // Multi-restart bounded quasi-Newton ascent in log-theta. The current
    // theta seeds the first restart, so the attained log evidence never drops
    // below what the previous setting achieved on the same data.
    FitReport fit(std::uint64_t seed, int restarts = 5) {
        if (poses_.size() < 2) throw std::logic_error("GPModel: fit needs >= 2 observations");
        const Eigen::Vector3d lo = Eigen::Vector3d::Constant(kLogThetaLo);
        const Eigen::Vector3d hi = Eigen::Vector3d::Constant(kLogThetaHi);
        auto objective = [this](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
            Hyperparams th{std::exp(x(0)), std::exp(x(1)), std::exp(x(2))};
            Eigen::Vector3d gl;
            const double lml = log_marginal(th, &gl);
            g = -gl;
            return -lml;
        };
        Rng rng(mix_seed(seed, 0x6f17));
        FitReport report;
        report.theta = theta_;
        for (int r = 0; r < restarts; ++r) {
            Eigen::VectorXd x0(3);
            if (r == 0) {
                x0 << std::log(std::max(theta_.sigma_r, 1e-300)),
                    std::log(std::max(theta_.sigma_w, 1e-300)),
                    std::log(std::max(theta_.len, 1e-300));
                for (int i = 0; i < 3; ++i)
                    x0(i) = std::clamp(x0(i), kLogThetaLo, kLogThetaHi);
            } else {
                x0.resize(3);
                for (int i = 0; i < 3; ++i) x0(i) = rng.uniform(kLogThetaLo, kLogThetaHi);
            }
            const LbfgsResult res = lbfgs_box(objective, x0, lo, hi);
            if (std::isfinite(res.f) && -res.f > report.log_marginal) {
                report.log_marginal = -res.f;
                report.theta = Hyperparams{std::exp(res.x(0)), std::exp(res.x(1)),
                                           std::exp(res.x(2))};
                report.ok = true;
            }
        }
        if (report.ok) set_hyperparams(report.theta);
        return report;
    }

private:
    Eigen::Index feat_dim() const { return kind_ == KernelKind::RBF ? kPoseDims : 1; }

    void ensure_factor() const {
        if (factor_valid_) return;
        const auto n = static_cast<Eigen::Index>(poses_.size());
        const Eigen::MatrixXd krbf =
            theta_.sigma_r *
            (-dist2_.topLeftCorner(n, n) / (2.0 * theta_.len * theta_.len)).array().exp();
        double jitter = kGpJitter;
        for (;; jitter *= 10.0) {
            Eigen::MatrixXd k = krbf;
            k.diagonal().array() += theta_.sigma_w + jitter;
            chol_.compute(k);
            if (chol_.info() == Eigen::Success) break;
            if (jitter >= kGpJitterMax)
                throw std::runtime_error("GPModel: Cholesky failed at maximum jitter");
        }
        obs_mean_ = 0.0;
        for (double v : obs_) obs_mean_ += v;
        obs_mean_ /= static_cast<double>(obs_.size());
        Eigen::VectorXd yc(n);
        for (Eigen::Index i = 0; i < n; ++i)
            yc(i) = obs_[static_cast<std::size_t>(i)] - obs_mean_;
        alpha_ = chol_.solve(yc);
        factor_valid_ = true;
    }

    KernelKind kind_;
    Bounds bounds_;
    const DeepKernelNet* net_;
    Hyperparams theta_;
    std::vector<ProbePose> poses_;
    std::vector<double> obs_;
    Eigen::MatrixXd feats_;  // feat_dim x n (normalized coords or embeddings)
    Eigen::MatrixXd dist2_;  // pairwise squared feature distances

    mutable bool factor_valid_ = false;
    mutable Eigen::LLT<Eigen::MatrixXd> chol_;
    mutable Eigen::VectorXd alpha_;
    mutable double obs_mean_ = 0.0;
};

}  // namespace dkbo
