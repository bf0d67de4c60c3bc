#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bo.hpp"
#include "io.hpp"
#include "net.hpp"

namespace dkbo {

// Raised for malformed or invalid configuration and unusable input paths;
// the CLI maps it to exit code 1, everything else unexpected to 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PhantomSettings {
    int grid = 64;
    double max_area_fraction = 0.35;
    double sigma_obs = 0.02;
    std::uint64_t seed = 0;

    void apply(PhantomModel& m) const {
        m.grid_h = grid;
        m.grid_w = grid;
        m.max_area_fraction = max_area_fraction;
        m.sigma_obs = sigma_obs;
        m.seed = seed;
    }
};

struct ExperimentConfig {
    std::vector<Variant> variants;
    std::vector<KernelKind> kernels;
    std::vector<Feedback> feedbacks;
    int runs_per_condition = 10;
    RunConfig run_template;
    PhantomSettings phantom;
    std::string out_dir;
    std::string weights_path;  // required when the grid contains the deep kernel
    std::uint64_t master_seed = 0;

    bool needs_net() const {
        for (auto k : kernels)
            if (k == KernelKind::Deep) return true;
        return false;
    }
};

namespace exp_detail {

using nlohmann::json;

inline double get_num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(std::string("config: ") + key + " must be a number");
    return j[key].get<double>();
}

inline std::uint64_t get_seed(const json& j, const char* key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_unsigned() && !j[key].is_number_integer())
        throw ConfigError(std::string("config: ") + key + " must be an integer");
    return j[key].get<std::uint64_t>();
}

}  // namespace exp_detail

// JSON schema (schema_version 1); unknown kernel, feedback, or variant names
// fail validation before anything runs.
inline ExperimentConfig parse_experiment_config(const std::string& text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != 1)
        throw ConfigError("config: schema_version must be the integer 1");

    ExperimentConfig cfg;
    try {
        for (const auto& v : j.value("variants", std::vector<std::string>{"P0", "P1"}))
            cfg.variants.push_back(parse_variant(v));
        for (const auto& k : j.value("kernels", std::vector<std::string>{"deep", "rbf"}))
            cfg.kernels.push_back(parse_kernel(k));
        for (const auto& f : j.value("feedbacks", std::vector<std::string>{"q_c", "q_s"}))
            cfg.feedbacks.push_back(parse_feedback(f));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad grid lists: ") + e.what());
    }
    if (cfg.variants.empty() || cfg.kernels.empty() || cfg.feedbacks.empty())
        throw ConfigError("config: variants, kernels and feedbacks must be non-empty");

    cfg.runs_per_condition = static_cast<int>(exp_detail::get_num(j, "runs_per_condition", 10));
    if (cfg.runs_per_condition < 1) throw ConfigError("config: runs_per_condition must be >= 1");
    cfg.master_seed = exp_detail::get_seed(j, "master_seed", 0);
    cfg.out_dir = j.value("out_dir", std::string{"out"});
    cfg.weights_path = j.value("weights_path", std::string{});

    const std::string ei_form = j.value("ei_form", std::string{"standard"});
    if (ei_form != "standard")
        throw ConfigError("config: ei_form '" + ei_form + "' is not supported");

    RunConfig& run = cfg.run_template;
    if (j.contains("run")) {
        const auto& r = j["run"];
        if (!r.is_object()) throw ConfigError("config: run must be an object");
        run.budget = static_cast<int>(exp_detail::get_num(r, "budget", run.budget));
        run.init_design = static_cast<int>(exp_detail::get_num(r, "init_design", run.init_design));
        run.hqr_threshold = exp_detail::get_num(r, "hqr_threshold", run.hqr_threshold);
        run.fit_restarts = static_cast<int>(exp_detail::get_num(r, "fit_restarts", run.fit_restarts));
        if (r.contains("refit")) {
            const auto& rf = r["refit"];
            run.refit.every_step_until = static_cast<int>(
                exp_detail::get_num(rf, "every_step_until", run.refit.every_step_until));
            run.refit.then_every =
                static_cast<int>(exp_detail::get_num(rf, "then_every", run.refit.then_every));
        }
    }
    if (j.contains("acq")) {
        const auto& a = j["acq"];
        if (!a.is_object()) throw ConfigError("config: acq must be an object");
        run.acq.xi = exp_detail::get_num(a, "xi", run.acq.xi);
        run.acq.restarts = static_cast<int>(exp_detail::get_num(a, "restarts", run.acq.restarts));
        run.acq.pool = static_cast<int>(exp_detail::get_num(a, "pool", run.acq.pool));
        run.acq.max_iters = static_cast<int>(exp_detail::get_num(a, "max_iters", run.acq.max_iters));
        run.acq.init_step = exp_detail::get_num(a, "init_step", run.acq.init_step);
        run.acq.min_step = exp_detail::get_num(a, "min_step", run.acq.min_step);
    }
    if (j.contains("bounds")) {
        const auto& b = j["bounds"];
        if (!b.is_object()) throw ConfigError("config: bounds must be an object");
        for (int d = 0; d < kPoseDims; ++d) {
            if (!b.contains(kDimNames[d])) continue;
            const auto& iv = b[kDimNames[d]];
            if (!iv.is_array() || iv.size() != 2)
                throw ConfigError(std::string("config: bounds.") + kDimNames[d] +
                                  " must be [lo, hi]");
            run.bounds.lo[d] = iv[0].get<double>();
            run.bounds.hi[d] = iv[1].get<double>();
        }
    }
    if (j.contains("phantom")) {
        const auto& p = j["phantom"];
        if (!p.is_object()) throw ConfigError("config: phantom must be an object");
        cfg.phantom.grid = static_cast<int>(exp_detail::get_num(p, "grid", cfg.phantom.grid));
        cfg.phantom.max_area_fraction =
            exp_detail::get_num(p, "max_area_fraction", cfg.phantom.max_area_fraction);
        cfg.phantom.sigma_obs = exp_detail::get_num(p, "sigma_obs", cfg.phantom.sigma_obs);
        cfg.phantom.seed = exp_detail::get_seed(p, "seed", cfg.phantom.seed);
        if (cfg.phantom.grid < 1) throw ConfigError("config: phantom.grid must be >= 1");
    }
    try {
        run.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.needs_net() && cfg.weights_path.empty())
        throw ConfigError("config: weights_path is required when the deep kernel is in the grid");
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return parse_experiment_config(text);
}

struct Condition {
    Variant variant;
    KernelKind kernel;
    Feedback feedback;
};

inline std::vector<Condition> experiment_grid(const ExperimentConfig& cfg) {
    std::vector<Condition> grid;
    for (auto v : cfg.variants)
        for (auto k : cfg.kernels)
            for (auto f : cfg.feedbacks) grid.push_back({v, k, f});
    return grid;
}

// Documented derivation: the run seed hashes the master seed with the
// condition index (grid order) and run index; the observation-noise stream
// gets an offset lane of the same hash.
inline std::uint64_t derive_run_seed(std::uint64_t master, std::size_t condition_index,
                                     int run_index) {
    return mix_seed(master, condition_index, 2ULL * static_cast<std::uint64_t>(run_index));
}

inline std::uint64_t derive_noise_seed(std::uint64_t master, std::size_t condition_index,
                                       int run_index) {
    return mix_seed(master, condition_index, 2ULL * static_cast<std::uint64_t>(run_index) + 1ULL);
}

inline std::string trace_filename(const Condition& c, int run_index) {
    std::ostringstream name;
    name << variant_name(c.variant) << "_" << kernel_name(c.kernel) << "_"
         << feedback_name(c.feedback) << "_run";
    const std::string idx = std::to_string(run_index);
    for (std::size_t i = idx.size(); i < 2; ++i) name << '0';
    name << idx << ".trace.csv";
    return name.str();
}

inline constexpr const char* kTraceHeader =
    "step,phase,x,y,fz,roll,pitch,yaw,quality,sigma_r,sigma_w,length_scale,ei,fallback,fit_"
    "failed,wall_ms";

inline std::string trace_to_csv(const RunTrace& trace) {
    std::ostringstream out;
    out << kTraceHeader << "\n";
    for (const auto& s : trace.steps) {
        const auto c = s.pose.coords();
        out << s.index << ',' << (s.init ? "init" : "bo");
        for (double v : c) out << ',' << fmt_double(v);
        out << ',' << fmt_double(s.quality) << ',' << fmt_double(s.theta.sigma_r) << ','
            << fmt_double(s.theta.sigma_w) << ',' << fmt_double(s.theta.len) << ','
            << fmt_double(s.ei) << ',' << (s.fallback ? 1 : 0) << ',' << (s.fit_failed ? 1 : 0)
            << ',' << fmt_double(s.wall_ms) << "\n";
    }
    return out.str();
}

struct ParsedTraceStep {
    int index = 0;
    bool init = false;
    double quality = 0.0;
};

// Reads back the per-step fields the report needs.
inline std::vector<ParsedTraceStep> parse_trace_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines[0] != kTraceHeader)
        throw std::runtime_error("trace file has unexpected header: " + path);
    std::vector<ParsedTraceStep> steps;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 16) throw std::runtime_error("trace file has malformed row: " + path);
        ParsedTraceStep s;
        s.index = static_cast<int>(parse_double(f[0]));
        s.init = f[1] == "init";
        s.quality = parse_double(f[8]);
        steps.push_back(s);
    }
    return steps;
}

struct RunRow {
    Condition cond;
    int run = 0;
    std::optional<int> steps_to_hqr;
    int hqr_count = 0;
    double best_final = 0.0;
    double wall_ms = 0.0;
};

inline constexpr const char* kSummaryHeader =
    "variant,kernel,feedback,run,steps_to_hqr,hqr_count,best_final";

namespace exp_detail {

struct Stats {
    double mean = 0.0, sd = 0.0, median = 0.0;
    bool any = false;
};

inline Stats stats_of(std::vector<double> v) {
    Stats s;
    if (v.empty()) return s;
    s.any = true;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    s.mean = m;
    s.sd = std::sqrt(var / static_cast<double>(n));
    s.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return s;
}

}  // namespace exp_detail

// Per-run rows followed by mean, sd and median rows per condition. Unreached
// runs carry steps_to_hqr = -1 and aggregate step statistics cover only the
// runs that reached the region (-1 when none did). No wall-clock column here:
// this file is byte-stable across reruns; timings live in timings.csv.
inline std::string summary_to_csv(const std::vector<RunRow>& rows,
                                  const std::vector<Condition>& grid) {
    std::ostringstream out;
    out << kSummaryHeader << "\n";
    for (const auto& r : rows) {
        out << variant_name(r.cond.variant) << ',' << kernel_name(r.cond.kernel) << ','
            << feedback_name(r.cond.feedback) << ',' << r.run << ','
            << (r.steps_to_hqr ? fmt_int(*r.steps_to_hqr) : "-1") << ',' << r.hqr_count << ','
            << fmt_double(r.best_final) << "\n";
    }
    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        std::vector<double> steps, counts, bests;
        for (const auto& r : rows) {
            const bool same = r.cond.variant == grid[ci].variant &&
                              r.cond.kernel == grid[ci].kernel &&
                              r.cond.feedback == grid[ci].feedback;
            if (!same) continue;
            if (r.steps_to_hqr) steps.push_back(*r.steps_to_hqr);
            counts.push_back(r.hqr_count);
            bests.push_back(r.best_final);
        }
        const auto st = exp_detail::stats_of(steps);
        const auto ct = exp_detail::stats_of(counts);
        const auto bt = exp_detail::stats_of(bests);
        const auto emit = [&](const char* tag, double sv, double cv, double bv) {
            out << variant_name(grid[ci].variant) << ',' << kernel_name(grid[ci].kernel) << ','
                << feedback_name(grid[ci].feedback) << ',' << tag << ','
                << (st.any ? fmt_double(sv) : "-1") << ',' << fmt_double(cv) << ','
                << fmt_double(bv) << "\n";
        };
        emit("mean", st.mean, ct.mean, bt.mean);
        emit("sd", st.sd, ct.sd, bt.sd);
        emit("median", st.median, ct.median, bt.median);
    }
    return out.str();
}

struct ExperimentResult {
    std::vector<RunRow> rows;
    std::string summary_path;
    std::string timings_path;
};

// Executes the full grid. Runs are independent; a worker pool of the given
// size pulls them off a shared counter, each writing its own trace file.
// Summary assembly happens after all workers join, in grid order, so the
// summary bytes do not depend on scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int workers = 1) {
    namespace fs = std::filesystem;
    if (workers < 1) throw ConfigError("workers must be >= 1");
    const auto grid = experiment_grid(cfg);
    DeepKernelNet net;
    if (cfg.needs_net()) {
        try {
            net = load_net(cfg.weights_path);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("weights: ") + e.what());
        }
    }
    fs::create_directories(cfg.out_dir);

    struct Job {
        std::size_t ci;
        int run;
    };
    std::vector<Job> jobs;
    for (std::size_t ci = 0; ci < grid.size(); ++ci)
        for (int r = 0; r < cfg.runs_per_condition; ++r) jobs.push_back({ci, r});

    std::vector<RunRow> rows(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            const auto [ci, r] = jobs[j];
            const Condition& cond = grid[ci];
            try {
                RunConfig rc = cfg.run_template;
                rc.kernel = cond.kernel;
                rc.feedback = cond.feedback;
                rc.variant = cond.variant;
                rc.run_seed = derive_run_seed(cfg.master_seed, ci, r);
                rc.noise_seed = derive_noise_seed(cfg.master_seed, ci, r);
                PhantomModel phantom = make_phantom(cond.variant, cfg.phantom.seed);
                cfg.phantom.apply(phantom);
                phantom.bounds = rc.bounds;

                const auto t0 = std::chrono::steady_clock::now();
                const RunTrace trace =
                    run_bo(rc, phantom, cond.kernel == KernelKind::Deep ? &net : nullptr);
                const double wall =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              t0)
                        .count();

                RunRow row;
                row.cond = cond;
                row.run = r;
                row.steps_to_hqr = steps_to_hqr(trace, rc.hqr_threshold);
                row.hqr_count = hqr_count(trace, rc.hqr_threshold);
                row.best_final = trace.best_so_far.empty() ? 0.0 : trace.best_so_far.back();
                row.wall_ms = wall;
                rows[j] = row;

                const fs::path tpath = fs::path(cfg.out_dir) / trace_filename(cond, r);
                write_text_file(tpath.string(), trace_to_csv(trace));
            } catch (const std::exception& e) {
                errors[j] = e.what();
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t j = 0; j < jobs.size(); ++j)
        if (!errors[j].empty())
            throw std::runtime_error("run " + trace_filename(grid[jobs[j].ci], jobs[j].run) +
                                     " failed: " + errors[j]);

    ExperimentResult result;
    result.rows = rows;
    const fs::path spath = fs::path(cfg.out_dir) / "summary.csv";
    write_text_file(spath.string(), summary_to_csv(rows, grid));
    result.summary_path = spath.string();

    std::ostringstream tim;
    tim << "variant,kernel,feedback,run,wall_ms\n";
    for (const auto& r : rows)
        tim << variant_name(r.cond.variant) << ',' << kernel_name(r.cond.kernel) << ','
            << feedback_name(r.cond.feedback) << ',' << r.run << ',' << fmt_double(r.wall_ms)
            << "\n";
    const fs::path tpath = fs::path(cfg.out_dir) / "timings.csv";
    write_text_file(tpath.string(), tim.str());
    result.timings_path = tpath.string();
    return result;
}

// -------- offline dataset --------

inline constexpr const char* kDatasetHeader = "variant,x,y,fz,roll,pitch,yaw,q";

// LHS scan of each requested phantom; q is the smooth segmentation feedback
// observed at the pose (noise and mask quantization included).
inline OfflineDataset collect_dataset(const std::vector<Variant>& variants,
                                      std::size_t n_per_variant, std::uint64_t seed,
                                      const PhantomSettings& settings = {}) {
    OfflineDataset ds;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        PhantomModel phantom = make_phantom(variants[vi], settings.seed);
        settings.apply(phantom);
        ds.bounds = phantom.bounds;
        const auto poses = latin_hypercube(n_per_variant, phantom.bounds, mix_seed(seed, vi));
        for (std::size_t i = 0; i < poses.size(); ++i) {
            const Observation obs = observe(phantom, poses[i], mix_seed(seed, vi, i + 1));
            OfflineSample s;
            s.pose = poses[i];
            s.q = seg_score(obs.mask, phantom.max_area_fraction);
            s.variant = variants[vi];
            ds.samples.push_back(s);
        }
    }
    return ds;
}

inline std::string dataset_to_csv(const OfflineDataset& ds) {
    std::ostringstream out;
    out << kDatasetHeader << "\n";
    for (const auto& s : ds.samples) {
        out << variant_name(s.variant);
        for (double v : s.pose.coords()) out << ',' << fmt_double(v);
        out << ',' << fmt_double(s.q) << "\n";
    }
    return out.str();
}

inline OfflineDataset dataset_from_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines[0] != kDatasetHeader)
        throw std::runtime_error("dataset file has unexpected header: " + path);
    OfflineDataset ds;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 8) throw std::runtime_error("dataset file has malformed row: " + path);
        OfflineSample s;
        s.variant = parse_variant(f[0]);
        std::array<double, kPoseDims> c{};
        for (int d = 0; d < kPoseDims; ++d) c[d] = parse_double(f[d + 1]);
        s.pose = ProbePose::from_coords(c);
        s.q = parse_double(f[7]);
        ds.samples.push_back(s);
    }
    return ds;
}

// -------- report --------

struct SummaryData {
    std::vector<RunRow> rows;  // per-run rows only (aggregate rows skipped)
};

inline SummaryData parse_summary_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines[0] != kSummaryHeader)
        throw std::runtime_error("summary file has unexpected header: " + path);
    SummaryData data;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 7) throw std::runtime_error("summary file has malformed row: " + path);
        if (f[3] == "mean" || f[3] == "sd" || f[3] == "median") continue;
        RunRow r;
        r.cond.variant = parse_variant(f[0]);
        r.cond.kernel = parse_kernel(f[1]);
        r.cond.feedback = parse_feedback(f[2]);
        r.run = static_cast<int>(parse_double(f[3]));
        const int sth = static_cast<int>(parse_double(f[4]));
        if (sth >= 0) r.steps_to_hqr = sth;
        r.hqr_count = static_cast<int>(parse_double(f[5]));
        r.best_final = parse_double(f[6]);
        data.rows.push_back(r);
    }
    return data;
}

struct ReportResult {
    std::string table;  // DK vs RBF percentage gains per feedback
    std::vector<std::string> curve_files;
};

// Emits per-condition mean and SD curves (per-step quality and best-so-far)
// from the trace files next to the summary, plus the kernel-comparison table
// of total-HQR percentage gains.
inline ReportResult report_from_summary(const std::string& summary_path,
                                        const std::string& out_dir) {
    namespace fs = std::filesystem;
    const SummaryData data = parse_summary_csv(summary_path);
    if (data.rows.empty()) throw std::runtime_error("summary has no per-run rows");
    const fs::path trace_dir = fs::path(summary_path).parent_path();
    fs::create_directories(out_dir);

    std::map<std::string, std::vector<const RunRow*>> by_cond;
    std::vector<std::string> cond_order;
    for (const auto& r : data.rows) {
        std::string key = std::string(variant_name(r.cond.variant)) + "_" +
                          kernel_name(r.cond.kernel) + "_" + feedback_name(r.cond.feedback);
        if (!by_cond.count(key)) cond_order.push_back(key);
        by_cond[key].push_back(&r);
    }

    ReportResult result;
    for (const auto& key : cond_order) {
        const auto& rows = by_cond[key];
        std::vector<std::vector<double>> qualities;
        for (const RunRow* r : rows) {
            const fs::path tpath = trace_dir / trace_filename(r->cond, r->run);
            const auto steps = parse_trace_csv(tpath.string());  // throws when missing
            std::vector<double> q;
            for (const auto& s : steps) q.push_back(s.quality);
            qualities.push_back(std::move(q));
        }
        const std::size_t len = qualities[0].size();
        for (const auto& q : qualities)
            if (q.size() != len)
                throw std::runtime_error("trace lengths differ within condition " + key);
        std::ostringstream out;
        out << "step,mean_quality,sd_quality,mean_best,sd_best\n";
        std::vector<std::vector<double>> best_curves(qualities.size());
        for (std::size_t r = 0; r < qualities.size(); ++r) {
            double b = -1.0;
            for (double q : qualities[r]) {
                b = std::max(b, q);
                best_curves[r].push_back(b);
            }
        }
        for (std::size_t i = 0; i < len; ++i) {
            std::vector<double> q, b;
            for (std::size_t r = 0; r < qualities.size(); ++r) {
                q.push_back(qualities[r][i]);
                b.push_back(best_curves[r][i]);
            }
            const auto qs = exp_detail::stats_of(q);
            const auto bs = exp_detail::stats_of(b);
            out << i << ',' << fmt_double(qs.mean) << ',' << fmt_double(qs.sd) << ','
                << fmt_double(bs.mean) << ',' << fmt_double(bs.sd) << "\n";
        }
        const fs::path cpath = fs::path(out_dir) / ("curve_" + key + ".csv");
        write_text_file(cpath.string(), out.str());
        result.curve_files.push_back(cpath.string());
    }

    // total HQR per kernel, per feedback (pooled over variants)
    std::map<Feedback, std::map<KernelKind, long>> totals;
    for (const auto& r : data.rows) totals[r.cond.feedback][r.cond.kernel] += r.hqr_count;
    std::ostringstream tab;
    tab << "feedback,deep_hqr_total,rbf_hqr_total,gain_percent\n";
    for (const auto& [fb, per_kernel] : totals) {
        const long dk = per_kernel.count(KernelKind::Deep) ? per_kernel.at(KernelKind::Deep) : 0;
        const long rbf = per_kernel.count(KernelKind::RBF) ? per_kernel.at(KernelKind::RBF) : 0;
        tab << feedback_name(fb) << ',' << dk << ',' << rbf << ',';
        if (rbf > 0 && per_kernel.count(KernelKind::Deep)) {
            tab << fmt_double(100.0 * (static_cast<double>(dk) - rbf) / rbf);
        } else {
            tab << "n/a";
        }
        tab << "\n";
    }
    result.table = tab.str();
    write_text_file((fs::path(out_dir) / "gains.csv").string(), result.table);
    return result;
}

}  // namespace dkbo
