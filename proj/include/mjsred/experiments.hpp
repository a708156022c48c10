#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mjsred/bounds.hpp"
#include "mjsred/clustering.hpp"
#include "mjsred/error.hpp"
#include "mjsred/io.hpp"
#include "mjsred/lqr.hpp"
#include "mjsred/parallel.hpp"
#include "mjsred/synth.hpp"

namespace mjsred {

/// One experiment run. Unset grids and counts take the per-experiment defaults (desk scale, or the
/// original sizes with `full`).
struct ExperimentSpec {
    std::string name;
    std::uint64_t seed = 0;
    std::optional<int> trials;
    bool full = false;
    std::vector<int> s_grid;
    std::vector<int> r_grid;
    std::vector<double> eps_grid;
    std::vector<double> eps_t_grid;
    std::vector<int> r_hat_grid;
    std::optional<int> n_traj;
    std::optional<int> horizon;
    std::filesystem::path out_dir = ".";
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"fig2", "fig3a", "fig3b", "fig4", "table2"};
    return names;
}

namespace detail {

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        if constexpr (std::is_floating_point_v<T>)
            out += fmt_csv(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

/// Sample quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

} // namespace detail

/// Fills unset fields with the defaults of the named experiment. Raises DegenerateInput for unknown
/// names or empty grids.
inline ExperimentSpec resolve_spec(ExperimentSpec spec) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), spec.name) == names.end())
        raise(Errc::DegenerateInput, "unknown experiment \"" + spec.name + "\"");
    const bool f = spec.full;
    if (spec.name == "fig2") {
        if (!spec.trials) spec.trials = f ? 100 : 25;
        if (spec.s_grid.empty()) spec.s_grid = f ? std::vector<int>{8, 16, 32, 64} : std::vector<int>{8, 16, 32};
        if (spec.r_grid.empty()) spec.r_grid = {4};
        if (spec.eps_grid.empty()) spec.eps_grid = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
        if (spec.eps_t_grid.empty()) spec.eps_t_grid = {0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
    } else if (spec.name == "fig3a") {
        if (!spec.trials) spec.trials = f ? 20 : 5;
        if (spec.s_grid.empty()) spec.s_grid = {f ? 100 : 40};
        if (spec.r_grid.empty()) spec.r_grid = {4};
        if (spec.eps_grid.empty()) spec.eps_grid = {0.0, 0.01, 0.02, 0.05, 0.1};
        if (spec.eps_t_grid.empty()) spec.eps_t_grid = {0.0, 0.01, 0.02, 0.05, 0.1};
    } else if (spec.name == "fig3b") {
        if (!spec.trials) spec.trials = f ? 10 : 5;
        if (spec.s_grid.empty())
            spec.s_grid = f ? std::vector<int>{20, 40, 60, 80, 100} : std::vector<int>{12, 24, 36, 48, 60};
        if (spec.r_grid.empty()) spec.r_grid = {3, 6};
        if (spec.eps_grid.empty()) spec.eps_grid = {0.01};
    } else if (spec.name == "fig4") {
        if (!spec.n_traj) spec.n_traj = 500;
        if (!spec.horizon) spec.horizon = 25;
    } else if (spec.name == "table2") {
        if (!spec.trials) spec.trials = 1;
        if (spec.s_grid.empty()) spec.s_grid = {f ? 100 : 40};
        if (spec.r_grid.empty()) spec.r_grid = {f ? 30 : 12};
        if (spec.eps_grid.empty()) spec.eps_grid = {1.0};
        if (spec.r_hat_grid.empty()) {
            const int s = spec.s_grid.front();
            for (int k = 1; k <= 10; ++k) spec.r_hat_grid.push_back(s * k / 10);
        }
    }
    if (spec.trials && *spec.trials <= 0) raise(Errc::DegenerateInput, "trial count must be positive");
    if (spec.name != "fig4" && (spec.s_grid.empty() || spec.r_grid.empty() || spec.eps_grid.empty()))
        raise(Errc::DegenerateInput, "grids must be non-empty");
    if ((spec.name == "fig2" || spec.name == "fig3a") && spec.eps_t_grid.empty()) raise(Errc::DegenerateInput, "grids must be non-empty");
    if (spec.name == "table2" && spec.r_hat_grid.empty()) raise(Errc::DegenerateInput, "grids must be non-empty");
    return spec;
}

/// Canonical text of a resolved spec; its FNV-1a hash tags every CSV.
inline std::string spec_string(const ExperimentSpec& spec) {
    std::string out = "name=" + spec.name + ";seed=" + std::to_string(spec.seed) + ";full=" + (spec.full ? "1" : "0");
    if (spec.trials) out += ";trials=" + std::to_string(*spec.trials);
    if (!spec.s_grid.empty()) out += ";s=" + detail::join(spec.s_grid);
    if (!spec.r_grid.empty()) out += ";r=" + detail::join(spec.r_grid);
    if (!spec.eps_grid.empty()) out += ";eps=" + detail::join(spec.eps_grid);
    if (!spec.eps_t_grid.empty()) out += ";eps_t=" + detail::join(spec.eps_t_grid);
    if (!spec.r_hat_grid.empty()) out += ";r_hat=" + detail::join(spec.r_hat_grid);
    if (spec.n_traj) out += ";n_traj=" + std::to_string(*spec.n_traj);
    if (spec.horizon) out += ";horizon=" + std::to_string(*spec.horizon);
    return out;
}

inline std::string provenance_line(const ExperimentSpec& spec) {
    return "experiment=" + spec.name + " seed=" + std::to_string(spec.seed) + " spec_hash=" + hex64(fnv1a64(spec_string(spec)));
}

/// Instance seed shared by every grid point of one (size, trial) pair, so sweeps use common random numbers.
inline std::uint64_t trial_seed(std::uint64_t seed, int s, int r, int trial) {
    const auto key = (static_cast<std::uint64_t>(s) << 40) ^ (static_cast<std::uint64_t>(r) << 20) ^
                     static_cast<std::uint64_t>(trial);
    return derive_seed(seed, key);
}

// ---------------------------------------------------------------------------
// MR vs number of modes and perturbation level

/// Two sweeps per branch: "AB" (grid eps_grid) varies eps_A = eps_B = eps_norm s^2 with eps_T = 0.5 s^2 and the T features
/// down-weighted by 0.01; "T" (grid eps_t_grid) varies eps_T = eps_norm s^2 with eps_A = eps_B = 0.5 s^2 and the A, B features
/// down-weighted. The generator branch and the algorithm branch coincide.
inline CsvTable run_fig2(const ExperimentSpec& in) {
    const ExperimentSpec spec = resolve_spec(in);
    CsvTable table({"s", "eps_norm", "branch", "mr_median", "mr_q1", "mr_q3", "sweep"}, provenance_line(spec));
    const int trials = *spec.trials;
    const int r = spec.r_grid.front();
    for (Branch branch : {Branch::Aggregatable, Branch::Lumpable}) {
        for (const char* sweep : {"AB", "T"}) {
            const bool ab = std::string(sweep) == "AB";
            for (int s : spec.s_grid) {
                const double s2 = static_cast<double>(s) * s;
                for (double c : ab ? spec.eps_grid : spec.eps_t_grid) {
                    std::vector<double> mr(static_cast<std::size_t>(trials), 0.0);
                    parallel_for(trials, [&](int j) {
                        SynthConfig cfg;
                        cfg.r = r;
                        cfg.s = s;
                        cfg.n = 5;
                        cfg.p = 3;
                        cfg.branch = branch;
                        cfg.seed = trial_seed(spec.seed, s, r, j);
                        cfg.eps_A = cfg.eps_B = ab ? c * s2 : 0.5 * s2;
                        cfg.eps_T = ab ? 0.5 * s2 : c * s2;
                        const SynthInstance inst = generate(cfg);
                        ReduceOptions opts;
                        opts.branch = branch;
                        opts.seed = cfg.seed;
                        opts.weights = ab ? default_weights(inst.model, 1.0, 1.0, 0.01)
                                          : default_weights(inst.model, 0.01, 0.01, 1.0);
                        const ReductionResult res = reduce(inst.model, r, opts);
                        mr[static_cast<std::size_t>(j)] = misclustering_rate(res.partition, inst.truth);
                    });
                    table.add_row({std::to_string(s), fmt_csv(c), branch_name(branch), fmt_csv(detail::median(mr)),
                                   fmt_csv(detail::quantile(mr, 0.25)), fmt_csv(detail::quantile(mr, 0.75)), sweep});
                }
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// LQR experiments

namespace detail {

inline SynthConfig lqr_config(int s, int r, double eps_ab, double eps_t, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.r = r;
    cfg.s = s;
    cfg.n = 10;
    cfg.p = 5;
    cfg.branch = Branch::Aggregatable;
    cfg.eps_A = cfg.eps_B = eps_ab;
    cfg.eps_T = eps_t;
    cfg.seed = seed;
    cfg.allow_uneven = s % r != 0;
    return cfg;
}

inline constexpr double kLqrSigmaW = 0.31622776601683794;  // sigma_w^2 = 0.1

} // namespace detail

/// Median absolute suboptimality J_hat - J_star over trials on an (eps_AB, eps_T) grid; grid values are
/// multiples of s^2.
inline CsvTable run_fig3a(const ExperimentSpec& in) {
    const ExperimentSpec spec = resolve_spec(in);
    CsvTable table({"eps_AB", "eps_T", "subopt_median"}, provenance_line(spec));
    const int s = spec.s_grid.front();
    const int r = spec.r_grid.front();
    const int trials = *spec.trials;
    const double s2 = static_cast<double>(s) * s;
    const MatrixXd Q = MatrixXd::Identity(10, 10);
    const MatrixXd R = MatrixXd::Identity(5, 5);
    for (double ca : spec.eps_grid) {
        for (double ct : spec.eps_t_grid) {
            std::vector<double> gap(static_cast<std::size_t>(trials), 0.0);
            parallel_for(trials, [&](int j) {
                const auto cfg = detail::lqr_config(s, r, ca * s2, ct * s2, trial_seed(spec.seed, s, r, j));
                const SynthInstance inst = generate(cfg);
                const auto res = reduced_lqr_suboptimality(inst.model, r, Q, R, detail::kLqrSigmaW, cfg.seed);
                gap[static_cast<std::size_t>(j)] = res.gap;
            });
            table.add_row({fmt_csv(ca * s2), fmt_csv(ct * s2), fmt_csv(detail::median(gap))});
        }
    }
    return table;
}

/// Median wall-clock time of the Riccati iterations for the full and the reduced model.
inline CsvTable run_fig3b(const ExperimentSpec& in) {
    const ExperimentSpec spec = resolve_spec(in);
    CsvTable table({"s", "r", "time_full_ms", "time_reduced_ms"}, provenance_line(spec));
    const int trials = *spec.trials;
    const double c = spec.eps_grid.front();
    const MatrixXd Q = MatrixXd::Identity(10, 10);
    const MatrixXd R = MatrixXd::Identity(5, 5);
    for (int s : spec.s_grid) {
        for (int r : spec.r_grid) {
            if (r > s) continue;
            const double s2 = static_cast<double>(s) * s;
            std::vector<double> tf(static_cast<std::size_t>(trials), 0.0);
            std::vector<double> tr(static_cast<std::size_t>(trials), 0.0);
            // Sequential so the timings do not compete for cores.
            for (int j = 0; j < trials; ++j) {
                const auto cfg = detail::lqr_config(s, r, c * s2, c * s2, trial_seed(spec.seed, s, r, j));
                const SynthInstance inst = generate(cfg);
                const auto res = reduced_lqr_suboptimality(inst.model, r, Q, R, detail::kLqrSigmaW, cfg.seed);
                tf[static_cast<std::size_t>(j)] = res.time_full_ms;
                tr[static_cast<std::size_t>(j)] = res.time_reduced_ms;
            }
            table.add_row({std::to_string(s), std::to_string(r), fmt_csv(detail::median(tf)), fmt_csv(detail::median(tr))});
        }
    }
    return table;
}

/// Relative suboptimality and reduced Riccati time for a sweep over the number of reduced modes,
/// on one instance per trial with hidden r (median over trials).
inline CsvTable run_table2(const ExperimentSpec& in) {
    const ExperimentSpec spec = resolve_spec(in);
    CsvTable table({"r_hat", "rel_subopt", "time_sec"}, provenance_line(spec));
    const int s = spec.s_grid.front();
    const int r = spec.r_grid.front();
    const double eps = spec.eps_grid.front();
    const int trials = *spec.trials;
    const MatrixXd Q = MatrixXd::Identity(10, 10);
    const MatrixXd R = MatrixXd::Identity(5, 5);
    std::vector<SynthInstance> inst;
    for (int j = 0; j < trials; ++j) inst.push_back(generate(detail::lqr_config(s, r, eps, eps, trial_seed(spec.seed, s, r, j))));
    for (int rh : spec.r_hat_grid) {
        if (rh <= 0 || rh > s) raise(Errc::DegenerateInput, "r_hat must lie in [1, s]");
        std::vector<double> rel(static_cast<std::size_t>(trials), 0.0);
        std::vector<double> time(static_cast<std::size_t>(trials), 0.0);
        for (int j = 0; j < trials; ++j) {
            const auto& m = inst[static_cast<std::size_t>(j)].model;
            const auto res = reduced_lqr_suboptimality(m, rh, Q, R, detail::kLqrSigmaW, trial_seed(spec.seed, s, r, j));
            rel[static_cast<std::size_t>(j)] = res.gap / res.J_star;
            time[static_cast<std::size_t>(j)] = res.time_reduced_ms / 1000.0;
        }
        table.add_row({std::to_string(rh), fmt_csv(detail::median(rel)), fmt_csv(detail::median(time))});
    }
    return table;
}

// ---------------------------------------------------------------------------
// Trajectory difference on the fixed six-mode example

inline CsvTable run_fig4(const ExperimentSpec& in) {
    const ExperimentSpec spec = resolve_spec(in);
    CsvTable table({"t", "mean_diff", "bound", "max_diff"}, provenance_line(spec));
    const SynthInstance inst = fig4_model();
    const MjsModel reduced = reduce_with_partition(inst.model, inst.truth);
    const VectorXd x0 = VectorXd::Ones(2);
    const int H = *spec.horizon;
    BoundsConfig cfg;
    cfg.skip_uniform = true;
    const BoundInputs bi = make_bound_inputs(inst.model, inst.truth, x0, cfg);
    const TrajDiffStats st = empirical_traj_diff(inst.model, reduced, inst.truth, x0, H, *spec.n_traj, spec.seed);
    for (int t = 0; t <= H; ++t) {
        const auto u = static_cast<std::size_t>(t);
        table.add_row({std::to_string(t), fmt_csv(st.mean[u]), fmt_csv(mss_traj_bound(bi, t).value), fmt_csv(st.max[u])});
    }
    return table;
}

inline CsvTable run_experiment_table(const ExperimentSpec& spec) {
    if (spec.name == "fig2") return run_fig2(spec);
    if (spec.name == "fig3a") return run_fig3a(spec);
    if (spec.name == "fig3b") return run_fig3b(spec);
    if (spec.name == "fig4") return run_fig4(spec);
    if (spec.name == "table2") return run_table2(spec);
    raise(Errc::DegenerateInput, "unknown experiment \"" + spec.name + "\"");
}

/// Runs the experiment and writes <out_dir>/<name>.csv. Nothing is left behind on failure.
inline std::filesystem::path run_experiment(const ExperimentSpec& spec) {
    const std::filesystem::path path = spec.out_dir / (spec.name + ".csv");
    try {
        const CsvTable table = run_experiment_table(spec);
        table.write(path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(path, ec);
        throw;
    }
    return path;
}

} // namespace mjsred
