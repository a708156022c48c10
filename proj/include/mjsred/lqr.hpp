#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "mjsred/clustering.hpp"
#include "mjsred/error.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"
#include "mjsred/parallel.hpp"
#include "mjsred/simulate.hpp"
#include "mjsred/stability.hpp"

namespace mjsred {

/// phi_i(X) = sum_j T(i, j) X_j.
inline std::vector<MatrixXd> coupling(const MatrixXd& T, const std::vector<MatrixXd>& X) {
    const auto s = static_cast<Eigen::Index>(X.size());
    std::vector<MatrixXd> phi(X.size(), MatrixXd::Zero(X.front().rows(), X.front().cols()));
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = 0; j < s; ++j)
            if (T(i, j) != 0.0) phi[static_cast<std::size_t>(i)] += T(i, j) * X[static_cast<std::size_t>(j)];
    return phi;
}

struct RiccatiEval {
    std::vector<MatrixXd> phi;
    std::vector<MatrixXd> K;
    std::vector<MatrixXd> R;
};

/// Evaluates phi_i, K_i and the Riccati map R_i at X for every mode.
inline RiccatiEval riccati_operators(const MjsModel& model, const MatrixXd& Q, const MatrixXd& Rc,
                                     const std::vector<MatrixXd>& X) {
    if (static_cast<int>(X.size()) != model.s) raise(Errc::DimensionMismatch, "need one X per mode");
    if (Q.rows() != model.n || Q.cols() != model.n) raise(Errc::DimensionMismatch, "Q must be n x n");
    if (Rc.rows() != model.p || Rc.cols() != model.p) raise(Errc::DimensionMismatch, "R must be p x p");
    RiccatiEval ev;
    ev.phi = coupling(model.T, X);
    ev.K.resize(X.size());
    ev.R.resize(X.size());
    for (int i = 0; i < model.s; ++i) {
        const auto& A = model.A[static_cast<std::size_t>(i)];
        const auto& B = model.B[static_cast<std::size_t>(i)];
        const auto& phi = ev.phi[static_cast<std::size_t>(i)];
        const MatrixXd phiA = phi * A;
        MatrixXd r = Q + A.transpose() * phiA;
        if (model.p > 0) {
            const MatrixXd inner = Rc + B.transpose() * phi * B;
            Eigen::LLT<MatrixXd> llt(symmetrize(inner));
            if (llt.info() != Eigen::Success) raise(Errc::SingularInnerMatrix, "R + B^T phi B is not positive definite");
            const MatrixXd btpa = B.transpose() * phiA;
            MatrixXd k = -llt.solve(btpa);
            r += btpa.transpose() * k;
            ev.K[static_cast<std::size_t>(i)] = std::move(k);
        } else {
            ev.K[static_cast<std::size_t>(i)] = MatrixXd::Zero(0, model.n);
        }
        ev.R[static_cast<std::size_t>(i)] = symmetrize(r);
    }
    return ev;
}

struct LqrSolution {
    std::vector<MatrixXd> P;
    std::vector<MatrixXd> K;
    int iterations = 0;
    double final_gain_delta = 0.0;
    double final_p_delta = 0.0;
    bool converged = false;
    /// Last (up to 64) values of max_i ||P_i^{h+1} - P_i^h||.
    std::vector<double> p_delta_tail;
};

struct RiccatiOptions {
    double tol = 1e-12;
    /// Relative P-change guard; the gain delta alone is zero when p = 0.
    double p_rel_tol = 1e-11;
    int max_iter = 100'000;
    double divergence = 1e12;
};

/// Value iteration P^{(0)} = Q, P^{(h+1)} = R(P^{(h)}) until the gain change falls below tol.
inline LqrSolution riccati_solve(const MjsModel& model, const MatrixXd& Q, const MatrixXd& Rc,
                                 const RiccatiOptions& opts = {}) {
    require_valid(model);
    LqrSolution sol;
    std::vector<MatrixXd> P(static_cast<std::size_t>(model.s), Q);
    RiccatiEval ev = riccati_operators(model, Q, Rc, P);
    std::deque<double> tail;
    for (int h = 1; h <= opts.max_iter; ++h) {
        std::vector<MatrixXd> next = ev.R;
        RiccatiEval ev_next = riccati_operators(model, Q, Rc, next);
        double gain_delta = 0.0;
        double p_delta = 0.0;
        double p_norm = 0.0;
        for (int i = 0; i < model.s; ++i) {
            const auto u = static_cast<std::size_t>(i);
            if (model.p > 0) gain_delta = std::max(gain_delta, spectral_norm(ev_next.K[u] - ev.K[u]));
            p_delta = std::max(p_delta, spectral_norm(next[u] - P[u]));
            p_norm = std::max(p_norm, spectral_norm(next[u]));
        }
        if (!std::isfinite(p_norm) || p_norm > opts.divergence)
            raise(Errc::Diverged, "||P|| exceeded " + detail::fmt_double(opts.divergence) + " at iteration " +
                                      std::to_string(h));
        tail.push_back(p_delta);
        if (tail.size() > 64) tail.pop_front();
        P = std::move(next);
        ev = std::move(ev_next);
        sol.iterations = h;
        sol.final_gain_delta = gain_delta;
        sol.final_p_delta = p_delta;
        if (gain_delta < opts.tol && p_delta <= opts.p_rel_tol * std::max(1.0, p_norm)) {
            sol.converged = true;
            break;
        }
    }
    sol.P = std::move(P);
    sol.K = ev.K;
    sol.p_delta_tail.assign(tail.begin(), tail.end());
    return sol;
}

inline double riccati_residual(const MjsModel& model, const MatrixXd& Q, const MatrixXd& Rc,
                               const std::vector<MatrixXd>& P) {
    const RiccatiEval ev = riccati_operators(model, Q, Rc, P);
    double r = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) r = std::max(r, spectral_norm(P[i] - ev.R[i]));
    return r;
}

// ---------------------------------------------------------------------------
// Closed-loop costs

inline std::vector<MatrixXd> closed_loop_matrices(const MjsModel& model, const std::vector<MatrixXd>& K) {
    if (static_cast<int>(K.size()) != model.s) raise(Errc::DimensionMismatch, "need one gain per mode");
    std::vector<MatrixXd> acl(K.size());
    for (int i = 0; i < model.s; ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (K[u].rows() != model.p || K[u].cols() != model.n) raise(Errc::DimensionMismatch, "gain must be p x n");
        acl[u] = model.A[u];
        if (model.p > 0) acl[u] += model.B[u] * K[u];
    }
    return acl;
}

/// Spectral radius of the mean-square operator X_j -> sum_i T(i, j) A_i X_i A_i^T. Exact eigenvalues up
/// to dimension 512, otherwise power iteration on the positive cone.
inline double mss_radius(const std::vector<MatrixXd>& A, const MatrixXd& T) {
    const auto s = static_cast<Eigen::Index>(A.size());
    const Eigen::Index n = A.front().rows();
    if (s * n * n <= 512) return spectral_radius(augmented_matrix(A, T));
    std::vector<MatrixXd> X(A.size(), MatrixXd::Identity(n, n));
    double prev = 0.0;
    double ratio = 0.0;
    for (int it = 0; it < 5000; ++it) {
        std::vector<MatrixXd> Y(A.size(), MatrixXd::Zero(n, n));
        for (Eigen::Index i = 0; i < s; ++i) {
            const MatrixXd m = A[static_cast<std::size_t>(i)] * X[static_cast<std::size_t>(i)] *
                               A[static_cast<std::size_t>(i)].transpose();
            for (Eigen::Index j = 0; j < s; ++j)
                if (T(i, j) != 0.0) Y[static_cast<std::size_t>(j)] += T(i, j) * m;
        }
        double tr = 0.0;
        for (const auto& y : Y) tr += y.trace();
        double base = 0.0;
        for (const auto& x : X) base += x.trace();
        ratio = base > 0.0 ? tr / base : 0.0;
        if (tr <= 0.0) return 0.0;
        for (auto& y : Y) y /= tr;
        X = std::move(Y);
        if (it > 20 && std::abs(ratio - prev) <= 1e-12 * std::max(1.0, ratio)) break;
        prev = ratio;
    }
    return ratio;
}

enum class CostMethod { ClosedForm, MonteCarlo };

struct CostReport {
    double J_avg = 0.0;
    double J_cum = 0.0;
    CostMethod method = CostMethod::ClosedForm;
    double sigma_w = 0.0;
    double mc_stderr = 0.0;
    bool diverged = false;
    int iterations = 0;
};

/// Stationary per-mode second moments of the noisy closed loop and J = sum_i tr((Q + K_i^T R K_i) S_i).
inline CostReport closed_loop_average_cost(const MjsModel& model, const std::vector<MatrixXd>& K, const MatrixXd& Q,
                                           const MatrixXd& Rc, double sigma_w, double tol = 1e-12,
                                           int max_iter = 2'000'000) {
    require_valid(model);
    const auto acl = closed_loop_matrices(model, K);
    const double rad = mss_radius(acl, model.T);
    if (!(rad < 1.0)) raise(Errc::NotMss, "closed loop has mean-square radius " + detail::fmt_double(rad));
    CostReport rep;
    rep.method = CostMethod::ClosedForm;
    rep.sigma_w = sigma_w;
    if (sigma_w == 0.0) return rep;
    const VectorXd pi = stationary_distribution(model.T).pi;
    const auto n = model.n;
    const double s2 = sigma_w * sigma_w;
    std::vector<MatrixXd> S(static_cast<std::size_t>(model.s), MatrixXd::Zero(n, n));
    std::vector<MatrixXd> stage(static_cast<std::size_t>(model.s));
    for (int i = 0; i < model.s; ++i) {
        const auto u = static_cast<std::size_t>(i);
        stage[u] = Q;
        if (model.p > 0) stage[u] += K[u].transpose() * Rc * K[u];
    }
    for (int it = 1; it <= max_iter; ++it) {
        std::vector<MatrixXd> next(S.size(), MatrixXd::Zero(n, n));
        for (int i = 0; i < model.s; ++i) {
            const auto u = static_cast<std::size_t>(i);
            MatrixXd m = acl[u] * S[u] * acl[u].transpose();
            m.diagonal().array() += s2 * pi(i);
            for (int j = 0; j < model.s; ++j)
                if (model.T(i, j) != 0.0) next[static_cast<std::size_t>(j)] += model.T(i, j) * m;
        }
        double delta = 0.0;
        double scale = 0.0;
        for (std::size_t j = 0; j < S.size(); ++j) {
            next[j] = symmetrize(next[j]);
            delta = std::max(delta, (next[j] - S[j]).cwiseAbs().maxCoeff());
            scale = std::max(scale, next[j].cwiseAbs().maxCoeff());
        }
        S = std::move(next);
        rep.iterations = it;
        if (delta <= tol * std::max(scale, 1e-300)) break;
    }
    for (int i = 0; i < model.s; ++i)
        rep.J_avg += (stage[static_cast<std::size_t>(i)] * S[static_cast<std::size_t>(i)]).trace();
    return rep;
}

/// J = sum_i mu0_i x0^T Pt_i x0 with Pt_i = Q + K_i^T R K_i + Acl_i^T phi_i(Pt) Acl_i.
inline double cumulative_cost_noisefree(const MjsModel& model, const std::vector<MatrixXd>& K, const MatrixXd& Q,
                                        const MatrixXd& Rc, const VectorXd& x0,
                                        const InitialModeDist& init = InitialModeDist::stationary(),
                                        double tol = 1e-12, int max_iter = 2'000'000) {
    require_valid(model);
    const auto acl = closed_loop_matrices(model, K);
    const double rad = mss_radius(acl, model.T);
    if (!(rad < 1.0)) raise(Errc::NotMss, "closed loop has mean-square radius " + detail::fmt_double(rad));
    const VectorXd mu0 = initial_mode_probs(model.T, init);
    std::vector<MatrixXd> stage(static_cast<std::size_t>(model.s));
    for (int i = 0; i < model.s; ++i) {
        const auto u = static_cast<std::size_t>(i);
        stage[u] = Q;
        if (model.p > 0) stage[u] += K[u].transpose() * Rc * K[u];
    }
    std::vector<MatrixXd> P = stage;
    for (int it = 0; it < max_iter; ++it) {
        const auto phi = coupling(model.T, P);
        double delta = 0.0;
        double scale = 0.0;
        std::vector<MatrixXd> next(P.size());
        for (std::size_t i = 0; i < P.size(); ++i) {
            next[i] = symmetrize(stage[i] + acl[i].transpose() * phi[i] * acl[i]);
            delta = std::max(delta, (next[i] - P[i]).cwiseAbs().maxCoeff());
            scale = std::max(scale, next[i].cwiseAbs().maxCoeff());
        }
        P = std::move(next);
        if (delta <= tol * std::max(scale, 1e-300)) break;
    }
    double j = 0.0;
    for (int i = 0; i < model.s; ++i) j += mu0(i) * x0.dot(P[static_cast<std::size_t>(i)] * x0);
    return j;
}

/// Average stage cost after burn-in, one batch per trajectory; trajectory j uses derive_seed(seed, j).
inline CostReport monte_carlo_cost(const MjsModel& model, const std::vector<MatrixXd>& K, const MatrixXd& Q,
                                   const MatrixXd& Rc, double sigma_w, int horizon, int n_traj, int burn_in,
                                   std::uint64_t seed, std::optional<VectorXd> x0 = std::nullopt) {
    require_valid(model);
    const auto acl = closed_loop_matrices(model, K);
    const VectorXd start = x0 ? *x0 : VectorXd::Zero(model.n);
    const VectorXd pi = stationary_distribution(model.T).pi;
    std::vector<double> batch(static_cast<std::size_t>(n_traj), 0.0);
    parallel_for(n_traj, [&](int j) {
        const std::uint64_t sd = derive_seed(seed, static_cast<std::uint64_t>(j));
        Rng mode_rng = make_rng(sd, 0);
        Rng noise_rng = make_rng(sd, 1);
        std::normal_distribution<double> nd(0.0, 1.0);
        VectorXd x = start;
        int w = sample_index(pi, mode_rng);
        double acc = 0.0;
        int count = 0;
        for (int t = 0; t < horizon; ++t) {
            const auto u = static_cast<std::size_t>(w);
            if (t >= burn_in) {
                double c = x.dot(Q * x);
                if (model.p > 0) {
                    const VectorXd in = K[u] * x;
                    c += in.dot(Rc * in);
                }
                acc += c;
                ++count;
            }
            VectorXd nx = acl[u] * x;
            if (sigma_w > 0.0)
                for (Eigen::Index k = 0; k < nx.size(); ++k) nx(k) += sigma_w * nd(noise_rng);
            x = std::move(nx);
            w = sample_index(model.T.row(w).transpose(), mode_rng);
        }
        batch[static_cast<std::size_t>(j)] = count > 0 ? acc / count : 0.0;
    });
    CostReport rep;
    rep.method = CostMethod::MonteCarlo;
    rep.sigma_w = sigma_w;
    double mean = 0.0;
    for (double b : batch) mean += b;
    mean /= static_cast<double>(std::max(n_traj, 1));
    double var = 0.0;
    for (double b : batch) var += (b - mean) * (b - mean);
    if (n_traj > 1) var /= static_cast<double>(n_traj - 1);
    rep.J_avg = mean;
    rep.mc_stderr = std::sqrt(var / static_cast<double>(std::max(n_traj, 1)));
    if (!std::isfinite(mean) || mean > 1e100) {
        rep.diverged = true;
        rep.J_avg = std::numeric_limits<double>::infinity();
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Reduced controller pipeline

struct ReducedLqrOptions {
    std::optional<Branch> branch;
    /// Use this partition instead of running the clustering.
    std::optional<Partition> partition;
    int restarts = 50;
    RiccatiOptions riccati;
};

struct ReducedLqrResult {
    double J_star = 0.0;
    double J_hat = 0.0;
    double gap = 0.0;
    int iters_full = 0;
    int iters_reduced = 0;
    double time_full_ms = 0.0;
    double time_reduced_ms = 0.0;
    Partition partition;
    LqrSolution full;
    LqrSolution reduced;
    MjsModel reduced_model;
};

/// Gains of the reduced model applied by cluster membership: K_i = K_hat_k for i in cluster k.
inline std::vector<MatrixXd> lift_gains(const std::vector<MatrixXd>& K_hat, const Partition& partition) {
    std::vector<MatrixXd> K(static_cast<std::size_t>(partition.num_modes()));
    for (int i = 0; i < partition.num_modes(); ++i)
        K[static_cast<std::size_t>(i)] = K_hat[static_cast<std::size_t>(partition.cluster_of(i))];
    return K;
}

inline ReducedLqrResult reduced_lqr_suboptimality(const MjsModel& model, int r, const MatrixXd& Q, const MatrixXd& Rc,
                                                  double sigma_w, std::uint64_t seed,
                                                  const ReducedLqrOptions& opts = {}) {
    using clock = std::chrono::steady_clock;
    ReducedLqrResult out;
    if (opts.partition) {
        out.partition = *opts.partition;
        out.reduced_model = reduce_with_partition(model, out.partition);
    } else {
        ReduceOptions ro;
        ro.branch = opts.branch;
        ro.restarts = opts.restarts;
        ro.seed = seed;
        auto red = reduce(model, r, ro);
        out.partition = red.partition;
        out.reduced_model = std::move(red.reduced);
    }
    auto t0 = clock::now();
    out.reduced = riccati_solve(out.reduced_model, Q, Rc, opts.riccati);
    auto t1 = clock::now();
    out.full = riccati_solve(model, Q, Rc, opts.riccati);
    auto t2 = clock::now();
    out.time_reduced_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.time_full_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    out.iters_reduced = out.reduced.iterations;
    out.iters_full = out.full.iterations;
    out.J_star = closed_loop_average_cost(model, out.full.K, Q, Rc, sigma_w).J_avg;
    out.J_hat = closed_loop_average_cost(model, lift_gains(out.reduced.K, out.partition), Q, Rc, sigma_w).J_avg;
    out.gap = out.J_hat - out.J_star;
    return out;
}

} // namespace mjsred
