#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "gp.hpp"
#include "pose.hpp"
#include "random.hpp"

namespace dkbo {

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Expected improvement over the incumbent with exploration margin xi,
// identically zero at zero variance.
inline double expected_improvement(double mean, double variance, double q_plus, double xi) {
    if (!(variance > 0.0)) return 0.0;
    const double sigma = std::sqrt(variance);
    const double d = mean - q_plus - xi;
    const double z = d / sigma;
    const double ei = d * normal_cdf(z) + sigma * normal_pdf(z);
    return ei > 0.0 ? ei : 0.0;
}

struct AcqConfig {
    double xi = 0.1;
    int restarts = 32;
    int pool = 1024;       // LHS candidate pool seeding the local searches
    int max_iters = 48;    // per-restart pattern-search iteration cap
    double init_step = 0.25;
    double min_step = 1e-3;

    void validate() const {
        if (xi < 0.0) throw std::invalid_argument("AcqConfig: xi must be >= 0");
        if (restarts < 1 || pool < 1 || max_iters < 1)
            throw std::invalid_argument("AcqConfig: counts must be >= 1");
    }
};

struct AcqResult {
    ProbePose pose;
    double ei = 0.0;
    bool exploration_fallback = false;
};

namespace acq_detail {

inline Eigen::VectorXd ei_batch(const Eigen::VectorXd& mu, const Eigen::VectorXd& var,
                                double q_plus, double xi) {
    Eigen::VectorXd out(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        out(i) = expected_improvement(mu(i), var(i), q_plus, xi);
    return out;
}

}  // namespace acq_detail

// Seeds an LHS candidate pool, then runs coordinate pattern search from the
// best candidates in lockstep so every posterior evaluation in an iteration
// is one batched solve. Falls back to the highest-variance candidate when the
// whole pool has zero expected improvement.
inline AcqResult maximize_acquisition(const GPModel& gp, const Bounds& bounds,
                                      const AcqConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    bounds.validate();
    Rng rng(seed);
    const auto pool = latin_hypercube_unit(static_cast<std::size_t>(cfg.pool), rng);
    Eigen::MatrixXd cand(kPoseDims, cfg.pool);
    for (int i = 0; i < cfg.pool; ++i)
        for (int d = 0; d < kPoseDims; ++d) cand(d, i) = pool[static_cast<std::size_t>(i)][d];

    const double q_plus = gp.best_observed();
    Eigen::VectorXd mu, var;
    gp.posterior_unit_batch(cand, mu, var);
    const Eigen::VectorXd ei = acq_detail::ei_batch(mu, var, q_plus, cfg.xi);

    Eigen::Index best_pool = 0;
    ei.maxCoeff(&best_pool);
    if (ei(best_pool) <= 0.0) {
        Eigen::Index most_uncertain = 0;
        var.maxCoeff(&most_uncertain);
        std::array<double, kPoseDims> u{};
        for (int d = 0; d < kPoseDims; ++d) u[d] = cand(d, most_uncertain);
        return {denormalize(u, bounds), 0.0, true};
    }

    const int n_restarts = std::min(cfg.restarts, cfg.pool);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(cfg.pool));
    for (Eigen::Index i = 0; i < cfg.pool; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::partial_sort(idx.begin(), idx.begin() + n_restarts, idx.end(),
                      [&ei](Eigen::Index a, Eigen::Index b) { return ei(a) > ei(b); });

    Eigen::MatrixXd xs(kPoseDims, n_restarts);
    Eigen::VectorXd fs(n_restarts);
    std::vector<double> step(static_cast<std::size_t>(n_restarts), cfg.init_step);
    std::vector<bool> active(static_cast<std::size_t>(n_restarts), true);
    for (int r = 0; r < n_restarts; ++r) {
        xs.col(r) = cand.col(idx[static_cast<std::size_t>(r)]);
        fs(r) = ei(idx[static_cast<std::size_t>(r)]);
    }

    const int probes_per = 2 * kPoseDims;
    Eigen::MatrixXd probe(kPoseDims, static_cast<Eigen::Index>(n_restarts) * probes_per);
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        int n_active = 0;
        for (int r = 0; r < n_restarts; ++r)
            if (active[static_cast<std::size_t>(r)]) ++n_active;
        if (n_active == 0) break;

        probe.resize(kPoseDims, static_cast<Eigen::Index>(n_active) * probes_per);
        std::vector<int> owner(static_cast<std::size_t>(n_active));
        int slot = 0;
        for (int r = 0; r < n_restarts; ++r) {
            if (!active[static_cast<std::size_t>(r)]) continue;
            owner[static_cast<std::size_t>(slot)] = r;
            for (int d = 0; d < kPoseDims; ++d) {
                for (int sgn = 0; sgn < 2; ++sgn) {
                    Eigen::Index c = static_cast<Eigen::Index>(slot) * probes_per + 2 * d + sgn;
                    probe.col(c) = xs.col(r);
                    const double delta = (sgn == 0 ? 1.0 : -1.0) * step[static_cast<std::size_t>(r)];
                    probe(d, c) = std::clamp(probe(d, c) + delta, 0.0, 1.0);
                }
            }
            ++slot;
        }

        Eigen::VectorXd pmu, pvar;
        gp.posterior_unit_batch(probe, pmu, pvar);
        const Eigen::VectorXd pei = acq_detail::ei_batch(pmu, pvar, q_plus, cfg.xi);

        for (int s = 0; s < n_active; ++s) {
            const int r = owner[static_cast<std::size_t>(s)];
            Eigen::Index local_best = 0;
            double best_val = -1.0;
            for (int k = 0; k < probes_per; ++k) {
                const Eigen::Index c = static_cast<Eigen::Index>(s) * probes_per + k;
                if (pei(c) > best_val) {
                    best_val = pei(c);
                    local_best = c;
                }
            }
            if (best_val > fs(r)) {
                xs.col(r) = probe.col(local_best);
                fs(r) = best_val;
            } else {
                step[static_cast<std::size_t>(r)] *= 0.5;
                if (step[static_cast<std::size_t>(r)] < cfg.min_step)
                    active[static_cast<std::size_t>(r)] = false;
            }
        }
    }

    Eigen::Index winner = 0;
    fs.maxCoeff(&winner);
    std::array<double, kPoseDims> u{};
    for (int d = 0; d < kPoseDims; ++d) u[d] = xs(d, winner);
    return {denormalize(u, bounds), fs(winner), false};
}

}  // namespace dkbo
