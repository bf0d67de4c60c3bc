#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "acquisition.hpp"
#include "gp.hpp"
#include "phantom.hpp"
#include "quality.hpp"

namespace dkbo {

// Hyperparameters are refit every step early on, then on a stride once the
// model has stabilized, which bounds per-step cost.
struct RefitSchedule {
    int every_step_until = 10;
    int then_every = 2;

    bool due(int step) const { return step <= every_step_until || step % then_every == 0; }
};

struct RunConfig {
    KernelKind kernel = KernelKind::Deep;
    Feedback feedback = Feedback::q_s;
    Variant variant = Variant::P0;
    int budget = 50;
    int init_design = 3;
    double hqr_threshold = 0.8;
    std::uint64_t run_seed = 0;
    std::uint64_t noise_seed = 0;
    int fit_restarts = 5;
    AcqConfig acq;
    RefitSchedule refit;
    Bounds bounds;

    void validate() const {
        bounds.validate();
        acq.validate();
        if (budget < 1) throw std::invalid_argument("RunConfig: budget must be >= 1");
        if (init_design < 1) throw std::invalid_argument("RunConfig: init design must be >= 1");
        if (!(hqr_threshold > 0.0 && hqr_threshold < 1.0))
            throw std::invalid_argument("RunConfig: threshold must be in (0, 1)");
    }
};

struct TraceStep {
    int index = 0;   // position in the trace, 0-based
    bool init = false;
    ProbePose pose;
    double quality = 0.0;  // feedback value observed at this pose
    Hyperparams theta;     // setting in effect when the pose was chosen
    double ei = 0.0;
    bool fallback = false;
    bool fit_failed = false;
    double wall_ms = 0.0;
};

struct RunTrace {
    Variant variant = Variant::P0;
    KernelKind kernel = KernelKind::RBF;
    Feedback feedback = Feedback::q_s;
    int init_design = 0;
    double hqr_threshold = 0.8;
    bool aborted = false;
    std::vector<TraceStep> steps;
    std::vector<double> best_so_far;
};

inline double feedback_value(Feedback kind, const Observation& obs, double max_area_fraction) {
    return kind == Feedback::q_s ? seg_score(obs.mask, max_area_fraction)
                                 : class_score(obs, max_area_fraction);
}

// One full optimization run: LHS initial design, then fit / propose / observe
// until the step budget is spent.
inline RunTrace run_bo(const RunConfig& cfg, const PhantomModel& phantom,
                       const DeepKernelNet* net = nullptr) {
    cfg.validate();
    if (cfg.kernel == KernelKind::Deep && !net)
        throw std::invalid_argument("run_bo: deep kernel requires a trained net");

    RunTrace trace;
    trace.variant = cfg.variant;
    trace.kernel = cfg.kernel;
    trace.feedback = cfg.feedback;
    trace.init_design = cfg.init_design;
    trace.hqr_threshold = cfg.hqr_threshold;

    GPModel gp(cfg.kernel, cfg.bounds, net);
    std::uint64_t obs_counter = 0;
    const auto record = [&trace](TraceStep step) {
        step.index = static_cast<int>(trace.steps.size());
        const double prev = trace.best_so_far.empty()
                                ? -std::numeric_limits<double>::infinity()
                                : trace.best_so_far.back();
        trace.best_so_far.push_back(std::max(prev, step.quality));
        trace.steps.push_back(std::move(step));
    };

    const auto t_run0 = std::chrono::steady_clock::now();
    auto now_ms = [&t_run0]() {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         t_run0)
            .count();
    };

    const auto design = latin_hypercube(static_cast<std::size_t>(cfg.init_design), cfg.bounds,
                                        mix_seed(cfg.run_seed, 0));
    for (const auto& pose : design) {
        const double t0 = now_ms();
        const Observation obs = observe(phantom, pose, mix_seed(cfg.noise_seed, obs_counter++));
        TraceStep step;
        step.init = true;
        step.pose = pose;
        step.quality = feedback_value(cfg.feedback, obs, phantom.max_area_fraction);
        step.theta = gp.hyperparams();
        step.wall_ms = now_ms() - t0;
        gp.add(pose, step.quality);
        record(std::move(step));
    }

    for (int bo_step = 1; bo_step <= cfg.budget; ++bo_step) {
        const double t0 = now_ms();
        TraceStep step;
        if (cfg.refit.due(bo_step) && gp.size() >= 2) {
            const FitReport report = gp.fit(mix_seed(cfg.run_seed, 2, static_cast<std::uint64_t>(bo_step)),
                                            cfg.fit_restarts);
            step.fit_failed = !report.ok;
        }
        const AcqResult acq = maximize_acquisition(
            gp, cfg.bounds, cfg.acq, mix_seed(cfg.run_seed, 1, static_cast<std::uint64_t>(bo_step)));
        const ProbePose pose = clamp_pose(acq.pose, cfg.bounds);
        step.pose = pose;
        step.ei = acq.ei;
        step.fallback = acq.exploration_fallback;
        step.theta = gp.hyperparams();
        try {
            const Observation obs =
                observe(phantom, pose, mix_seed(cfg.noise_seed, obs_counter++));
            step.quality = feedback_value(cfg.feedback, obs, phantom.max_area_fraction);
        } catch (const std::exception&) {
            trace.aborted = true;
            break;
        }
        gp.add(pose, step.quality);
        step.wall_ms = now_ms() - t0;
        record(std::move(step));
    }
    return trace;
}

// 1-based index of the first post-design step whose observed quality exceeds
// the threshold; empty when the run never got there.
inline std::optional<int> steps_to_hqr(const RunTrace& trace, double threshold) {
    for (std::size_t i = static_cast<std::size_t>(trace.init_design); i < trace.steps.size();
         ++i) {
        if (trace.steps[i].quality > threshold)
            return static_cast<int>(i) - trace.init_design + 1;
    }
    return std::nullopt;
}

inline int hqr_count(const RunTrace& trace, double threshold) {
    int n = 0;
    for (const auto& s : trace.steps)
        if (s.quality > threshold) ++n;
    return n;
}

struct AggregateSummary {
    std::vector<double> mean_quality;
    std::vector<double> sd_quality;
    std::vector<double> mean_best;
    std::vector<double> sd_best;
    std::optional<double> median_steps_to_hqr;  // over runs that reached the HQR
    double success_rate = 0.0;
    long total_hqr = 0;
    int runs = 0;
};

inline AggregateSummary aggregate(const std::vector<RunTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
    const std::size_t len = traces[0].steps.size();
    const double threshold = traces[0].hqr_threshold;
    for (const auto& t : traces) {
        if (t.steps.size() != len)
            throw std::invalid_argument("aggregate: traces have mismatched lengths");
        if (t.hqr_threshold != threshold)
            throw std::invalid_argument("aggregate: traces have mismatched thresholds");
    }
    AggregateSummary s;
    s.runs = static_cast<int>(traces.size());
    const double n = static_cast<double>(traces.size());
    s.mean_quality.resize(len);
    s.sd_quality.resize(len);
    s.mean_best.resize(len);
    s.sd_best.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        double mq = 0.0, mb = 0.0;
        for (const auto& t : traces) {
            mq += t.steps[i].quality;
            mb += t.best_so_far[i];
        }
        mq /= n;
        mb /= n;
        double vq = 0.0, vb = 0.0;
        for (const auto& t : traces) {
            vq += (t.steps[i].quality - mq) * (t.steps[i].quality - mq);
            vb += (t.best_so_far[i] - mb) * (t.best_so_far[i] - mb);
        }
        s.mean_quality[i] = mq;
        s.sd_quality[i] = std::sqrt(vq / n);  // population SD
        s.mean_best[i] = mb;
        s.sd_best[i] = std::sqrt(vb / n);
    }
    std::vector<int> reached;
    for (const auto& t : traces) {
        if (const auto k = steps_to_hqr(t, threshold)) reached.push_back(*k);
        s.total_hqr += hqr_count(t, threshold);
    }
    s.success_rate = static_cast<double>(reached.size()) / n;
    if (!reached.empty()) {
        std::sort(reached.begin(), reached.end());
        const std::size_t m = reached.size();
        s.median_steps_to_hqr = m % 2 == 1
                                    ? static_cast<double>(reached[m / 2])
                                    : 0.5 * (reached[m / 2 - 1] + reached[m / 2]);
    }
    return s;
}

}  // namespace dkbo
