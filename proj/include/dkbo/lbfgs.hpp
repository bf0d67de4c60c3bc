#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace dkbo {

struct LbfgsOptions {
    int history = 10;
    int max_iters = 200;
    double grad_tol = 1e-6;  // infinity norm of the projected gradient
    double armijo_c1 = 1e-4;
    int max_line_steps = 30;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iters = 0;
};

// Box-constrained L-BFGS minimizer: two-loop recursion for the direction,
// Armijo backtracking on box-projected trial points, best-seen iterate
// returned. Small and adequate for low-dimensional smooth objectives.
inline LbfgsResult lbfgs_box(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    Eigen::VectorXd x0, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
    const LbfgsOptions& opt = {}) {
    const auto dim = x0.size();
    auto project = [&](Eigen::VectorXd v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (v(i) < lo(i)) v(i) = lo(i);
            if (v(i) > hi(i)) v(i) = hi(i);
        }
        return v;
    };

    LbfgsResult best;
    best.x = project(std::move(x0));

    Eigen::VectorXd x = best.x, g(dim);
    double f = fg(x, g);
    if (!std::isfinite(f)) {
        best.f = f;
        return best;
    }
    best.f = f;

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        best.iters = iter;

        Eigen::VectorXd pg = g;
        for (Eigen::Index i = 0; i < dim; ++i) {
            const bool at_lo = x(i) <= lo(i) && g(i) > 0.0;
            const bool at_hi = x(i) >= hi(i) && g(i) < 0.0;
            if (at_lo || at_hi) pg(i) = 0.0;
        }
        if (pg.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
            best.converged = true;
            break;
        }

        // two-loop recursion
        Eigen::VectorXd d = -g;
        if (!s_hist.empty()) {
            std::vector<double> alpha(s_hist.size());
            for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
                alpha[k] = rho_hist[k] * s_hist[k].dot(d);
                d -= alpha[k] * y_hist[k];
            }
            const double gamma =
                s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            d *= gamma;
            for (std::size_t k = 0; k < s_hist.size(); ++k) {
                const double beta = rho_hist[k] * y_hist[k].dot(d);
                d += (alpha[k] - beta) * s_hist[k];
            }
            d = -d;
        }
        if (d.dot(g) >= 0.0) d = -pg;  // fall back to steepest descent

        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd x_new, g_new(dim);
        double f_new = 0.0;
        for (int ls = 0; ls < opt.max_line_steps; ++ls) {
            x_new = project(x + step * d);
            if ((x_new - x).lpNorm<Eigen::Infinity>() == 0.0) break;
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new < best.f) {
                best.f = f_new;
                best.x = x_new;
            }
            if (std::isfinite(f_new) &&
                f_new <= f + opt.armijo_c1 * g.dot(x_new - x)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x = std::move(x_new);
        g = std::move(g_new);
        f = f_new;
    }
    return best;
}

}  // namespace dkbo
