#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mjsred/error.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"
#include "mjsred/parallel.hpp"
#include "mjsred/perturbation.hpp"
#include "mjsred/simulate.hpp"
#include "mjsred/stability.hpp"

namespace mjsred {

/// Constants entering the trajectory and kernel bounds.
struct BoundInputs {
    double a_bar = 0.0;
    double b_bar = 0.0;
    double u_bar = 0.0;
    double t_bar = 0.0;
    double norm_T = 0.0;
    double rho = 0.0;
    double tau = 1.0;
    double rho0 = 0.5;
    double xi = 0.0;
    double kappa = 1.0;
    double xi0 = 0.5;
    double eps_A = 0.0;
    double eps_B = 0.0;
    double eps_T = 0.0;
    double x0_norm = 0.0;
    int n = 0;
    int p = 0;
    int s = 0;
    int r = 0;

    void set_rho(double v) {
        rho = v;
        rho0 = 0.5 * (1.0 + v);
    }
    void set_xi(double v) {
        xi = v;
        xi0 = 0.5 * (1.0 + v);
    }
};

struct BoundValue {
    double value = 0.0;
    bool premises_ok = false;
};

struct BoundsConfig {
    std::optional<double> rho;
    std::optional<double> xi;
    double u_bar = 0.0;
    int tau_k_max = 64;
    int jsr_k_max = 8;
    int kappa_k_max = 12;
    Branch branch = Branch::Lumpable;
    PairCounting counting = PairCounting::Ordered;
    /// Skip the JSR / kappa computation (MSS-only use).
    bool skip_uniform = false;
};

/// Collects every constant from the full model and the hidden partition.
inline BoundInputs make_bound_inputs(const MjsModel& model, const Partition& partition, const VectorXd& x0,
                                     const BoundsConfig& cfg = {}) {
    require_valid(model);
    BoundInputs in;
    in.n = model.n;
    in.p = model.p;
    in.s = model.s;
    in.r = partition.num_clusters();
    in.a_bar = max_spectral_norm(model.A);
    in.b_bar = max_spectral_norm(model.B);
    in.u_bar = cfg.u_bar;
    in.t_bar = model.T.maxCoeff();
    in.norm_T = spectral_norm(model.T);
    in.x0_norm = x0.norm();
    const auto eps = perturbations(model, partition, cfg.branch, cfg.counting);
    in.eps_A = eps.eps_A;
    in.eps_B = eps.eps_B;
    in.eps_T = eps.eps_T;
    const MatrixXd acal = augmented_matrix(model);
    const double rad = spectral_radius(acal);
    in.set_rho(cfg.rho ? *cfg.rho : default_rate(rad));
    in.tau = tau_estimate(acal, in.rho, cfg.tau_k_max).tau;
    if (!cfg.skip_uniform) {
        const JsrBounds jb = jsr_bounds(model.A, cfg.jsr_k_max);
        in.set_xi(cfg.xi ? *cfg.xi : default_rate(jb.upper));
        in.kappa = kappa_estimate(model.A, in.xi, cfg.kappa_k_max, 5'000'000, jb).kappa;
    }
    return in;
}

/// E||x_t - x_hat_t|| <= 4 sqrt(n sqrt(s)) tau eps_mss_t under mode synchrony.
inline BoundValue mss_traj_bound(const BoundInputs& in, int t) {
    const double c = in.a_bar * in.norm_T * in.eps_A;
    const double sr0 = std::sqrt(in.rho0);
    const double td = static_cast<double>(t);
    double eps_mss = std::pow(in.rho0, 0.5 * (td - 1.0)) * std::sqrt(td * c) * in.x0_norm;
    if (in.u_bar > 0.0)
        eps_mss += std::sqrt(in.b_bar) * in.u_bar *
                   (sr0 / ((1.0 - sr0) * (1.0 - sr0)) * std::sqrt(c) + std::sqrt(2.0) / (1.0 - sr0) * std::sqrt(in.eps_B));
    BoundValue out;
    out.value = 4.0 * std::sqrt(static_cast<double>(in.n) * std::sqrt(static_cast<double>(in.s))) * in.tau * eps_mss;
    const double cap = in.a_bar * in.norm_T > 0.0 ? (1.0 - in.rho) / (6.0 * in.tau * in.a_bar * in.norm_T)
                                                  : std::numeric_limits<double>::infinity();
    out.premises_ok = in.rho < 1.0 && in.eps_A <= std::min(in.a_bar, cap) && in.eps_B <= in.b_bar;
    return out;
}

/// ||x_t - x_hat_t|| <= eps_us_t almost surely under mode synchrony.
inline BoundValue us_traj_bound(const BoundInputs& in, int t) {
    const double td = static_cast<double>(t);
    const double k2 = in.kappa * in.kappa;
    BoundValue out;
    out.value = td * std::pow(in.xi0, td - 1.0) * k2 * in.x0_norm * in.eps_A;
    if (in.u_bar > 0.0) {
        out.value += 2.0 * (1.0 + td * std::pow(in.xi0, td)) * k2 * in.b_bar * in.u_bar / (1.0 - in.xi0) * in.eps_A;
        out.value += in.kappa * in.u_bar / (1.0 - in.xi) * in.eps_B;
    }
    out.premises_ok = in.xi < 1.0 && in.eps_A <= (1.0 - in.xi) / (2.0 * in.kappa) && in.eps_B <= in.b_bar;
    return out;
}

/// W_ell(p_t, p_hat_t) bound for the autonomous case.
inline BoundValue wasserstein_bound(const BoundInputs& in, int t, double ell) {
    const double td = static_cast<double>(t);
    const double rd = static_cast<double>(in.r);
    BoundValue out;
    out.value = td * std::pow(in.xi0, td - 1.0) * in.kappa * in.kappa * in.x0_norm * in.eps_A;
    if (in.eps_T > 0.0)
        out.value += 2.0 * rd * rd * td * in.kappa * in.x0_norm * std::pow(rd, td) *
                     std::pow(in.kappa * in.eps_A + in.xi, td) * std::pow(in.t_bar + in.eps_T, (td - 2.0) / ell) *
                     std::pow(in.eps_T, 1.0 / ell);
    out.premises_ok = in.xi < 1.0 && in.eps_A <= (1.0 - in.xi) / (2.0 * in.kappa) && in.b_bar == 0.0 && ell >= 1.0;
    return out;
}

struct SumBound {
    double value = 0.0;
    /// The stated prefactor uses sqrt(n p) whereas the per-step bound uses sqrt(n sqrt(s)).
    bool notation_mismatch = true;
};

/// Probability-(1 - delta) bound on sum_t ||x_t - x_hat_t||, evaluated exactly as stated.
inline SumBound mss_sum_bound(const BoundInputs& in, double delta) {
    SumBound out;
    const double sr0 = std::sqrt(in.rho0);
    out.value = 4.0 * std::sqrt(static_cast<double>(in.n) * static_cast<double>(in.p)) * in.tau * in.x0_norm *
                std::sqrt(in.a_bar * in.eps_A) / (delta * (1.0 - sr0) * (1.0 - sr0));
    return out;
}

struct TrajDiffStats {
    std::vector<double> mean;
    std::vector<double> max;
};

/// Per-t mean and max of ||x_t - x_hat_t|| over n_traj synchronized pairs; pair j uses derive_seed(seed, j).
inline TrajDiffStats empirical_traj_diff(const MjsModel& model, const MjsModel& reduced, const Partition& partition,
                                         const VectorXd& x0, int horizon, int n_traj, std::uint64_t seed,
                                         const InputProvider& inputs = ZeroInput{},
                                         const InitialModeDist& init = InitialModeDist::stationary()) {
    std::vector<std::vector<double>> diffs(static_cast<std::size_t>(n_traj));
    parallel_for(n_traj, [&](int j) {
        const auto pair = simulate_coupled(model, reduced, partition, x0, inputs, horizon,
                                           derive_seed(seed, static_cast<std::uint64_t>(j)), init);
        auto& d = diffs[static_cast<std::size_t>(j)];
        d.resize(static_cast<std::size_t>(horizon) + 1);
        for (int t = 0; t <= horizon; ++t)
            d[static_cast<std::size_t>(t)] =
                (pair.first.states[static_cast<std::size_t>(t)] - pair.second.states[static_cast<std::size_t>(t)]).norm();
    });
    TrajDiffStats out;
    out.mean.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
    out.max.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
    for (const auto& d : diffs)
        for (int t = 0; t <= horizon; ++t) {
            out.mean[static_cast<std::size_t>(t)] += d[static_cast<std::size_t>(t)];
            out.max[static_cast<std::size_t>(t)] = std::max(out.max[static_cast<std::size_t>(t)], d[static_cast<std::size_t>(t)]);
        }
    for (auto& v : out.mean) v /= static_cast<double>(std::max(n_traj, 1));
    return out;
}

} // namespace mjsred
