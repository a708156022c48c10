#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "mjsred/error.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"
#include "mjsred/perturbation.hpp"

namespace mjsred {

inline constexpr Eigen::Index kDefaultSizeCap = 4096;

/// Block (i, j) of size n^2 x n^2 equals T(j, i) * kron(A_j, A_j).
inline MatrixXd augmented_matrix(const std::vector<MatrixXd>& A, const MatrixXd& T,
                                 Eigen::Index cap = kDefaultSizeCap) {
    const auto s = static_cast<Eigen::Index>(A.size());
    if (s == 0) return MatrixXd();
    const Eigen::Index n = A.front().rows();
    const Eigen::Index b = n * n;
    if (s * b > cap) raise(Errc::TooLarge, "augmented matrix dimension " + std::to_string(s * b) + " exceeds cap");
    MatrixXd out = MatrixXd::Zero(s * b, s * b);
    for (Eigen::Index j = 0; j < s; ++j) {
        const MatrixXd kk = kron(A[static_cast<std::size_t>(j)], A[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < s; ++i)
            if (T(j, i) != 0.0) out.block(i * b, j * b, b, b) = T(j, i) * kk;
    }
    return out;
}

inline MatrixXd augmented_matrix(const MjsModel& model, Eigen::Index cap = kDefaultSizeCap) {
    return augmented_matrix(model.A, model.T, cap);
}

inline double spectral_radius(const MatrixXd& m, Eigen::Index cap = kDefaultSizeCap) {
    if (m.rows() != m.cols()) raise(Errc::DimensionMismatch, "spectral radius needs a square matrix");
    if (m.rows() > cap) raise(Errc::TooLarge, "matrix dimension exceeds cap");
    if (m.rows() == 0) return 0.0;
    if (m.rows() == 1) return std::abs(m(0, 0));
    return eigenvalues(m).cwiseAbs().maxCoeff();
}

/// Rate strictly above x: 1.01 x, clipped to (1 + x) / 2 when x < 1, and at least 1e-3.
inline double default_rate(double x) {
    double r = 1.01 * x;
    if (x < 1.0) r = std::min(r, 0.5 * (1.0 + x));
    return std::max(r, 1e-3);
}

struct TauEstimate {
    double tau = 1.0;
    double rho = 0.0;
    int argmax_k = 0;
    int k_max = 0;
    bool unconverged = false;
};

/// max_{k <= k_max} ||M^k|| / rho^k (spectral norm). Requires rho >= rho(M).
inline TauEstimate tau_estimate(const MatrixXd& M, double rho, int k_max = 64) {
    const double rad = spectral_radius(M);
    if (!(rho > 0.0) || rho < rad * (1.0 - 1e-12)) raise(Errc::RhoTooSmall, "rho below the spectral radius");
    TauEstimate out;
    out.rho = rho;
    out.k_max = k_max;
    out.tau = 1.0;
    MatrixXd scaled = M / rho;
    MatrixXd power = MatrixXd::Identity(M.rows(), M.cols());
    for (int k = 1; k <= k_max; ++k) {
        power = scaled * power;
        const double v = spectral_norm(power);
        if (v > out.tau) {
            out.tau = v;
            out.argmax_k = k;
        }
    }
    out.unconverged = k_max > 0 && out.argmax_k == k_max;
    return out;
}

// ---------------------------------------------------------------------------
// Joint spectral radius

struct JsrBounds {
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
    int depth_reached = 0;
    long long nodes = 0;
    bool budget_exceeded = false;
};

/// Two-sided joint spectral radius bounds by level-wise product enumeration.
/// lower: max of rho(P)^{1/k} over explored products. upper: every product is cut at the first prefix
/// in a leaf's chain, so xi <= max over leaves of min_j ||prefix_j||^{1/j}. Leaves are products at depth
/// k_max and products pruned because that value already fell below lower + tol.
inline JsrBounds jsr_bounds(const std::vector<MatrixXd>& A, int k_max = 8, double tol = 1e-9,
                            long long node_budget = 2'000'000) {
    if (k_max < 1) raise(Errc::DegenerateInput, "k_max must be at least 1");
    if (A.empty()) raise(Errc::DegenerateInput, "empty matrix family");
    struct Node {
        MatrixXd P;
        double chain = 0.0;
    };
    JsrBounds out;
    std::vector<Node> frontier{Node{MatrixXd::Identity(A.front().rows(), A.front().cols()),
                                    std::numeric_limits<double>::infinity()}};
    double leaf_max = 0.0;
    bool any_leaf = false;
    for (int k = 1; k <= k_max; ++k) {
        const long long next_count = static_cast<long long>(frontier.size()) * static_cast<long long>(A.size());
        if (out.nodes + next_count > node_budget) {
            out.budget_exceeded = true;
            break;
        }
        std::vector<Node> level;
        level.reserve(static_cast<std::size_t>(next_count));
        const double inv_k = 1.0 / static_cast<double>(k);
        for (const auto& parent : frontier) {
            for (const auto& a : A) {
                Node child;
                child.P = a * parent.P;
                const double nrm = spectral_norm(child.P);
                child.chain = std::min(parent.chain, std::pow(nrm, inv_k));
                out.lower = std::max(out.lower, std::pow(spectral_radius(child.P), inv_k));
                level.push_back(std::move(child));
            }
        }
        out.nodes += next_count;
        out.depth_reached = k;
        frontier.clear();
        for (auto& node : level) {
            if (node.chain <= out.lower + tol || k == k_max) {
                leaf_max = std::max(leaf_max, node.chain);
                any_leaf = true;
            } else {
                frontier.push_back(std::move(node));
            }
        }
        if (frontier.empty()) break;
    }
    // Unexpanded frontier nodes (budget stop) are leaves too.
    for (const auto& node : frontier) {
        if (std::isfinite(node.chain)) {
            leaf_max = std::max(leaf_max, node.chain);
            any_leaf = true;
        }
    }
    if (any_leaf) out.upper = std::max(leaf_max, out.lower);
    return out;
}

struct KappaEstimate {
    double kappa = 1.0;
    double xi = 0.0;
    int argmax_k = 0;
    int k_max = 0;
    long long nodes = 0;
    bool unconverged = false;
    bool budget_exceeded = false;
};

/// sup over k <= k_max of max_{|P| = k} ||P|| / xi^k. Subtrees are skipped when the submultiplicative
/// bound ||P|| * Mbar_m / xi^{k+m} cannot beat the running maximum, so the value is exact within budget.
inline KappaEstimate kappa_estimate(const std::vector<MatrixXd>& A, double xi, int k_max = 12,
                                    long long node_budget = 5'000'000,
                                    const std::optional<JsrBounds>& known = std::nullopt) {
    if (A.empty()) raise(Errc::DegenerateInput, "empty matrix family");
    const JsrBounds jb = known ? *known : jsr_bounds(A, std::min(k_max, 8));
    if (!(xi > 0.0) || xi < jb.upper * (1.0 - 1e-12))
        raise(Errc::XiTooSmall, "xi = " + detail::fmt_double(xi) + " below the JSR upper bound " +
                                    detail::fmt_double(jb.upper));
    const auto s = static_cast<long long>(A.size());
    KappaEstimate out;
    out.xi = xi;
    out.k_max = k_max;

    // Exact maxima for the levels that fit a small full enumeration.
    std::vector<double> mbar(static_cast<std::size_t>(k_max) + 1, 0.0);
    std::vector<bool> exact(static_cast<std::size_t>(k_max) + 1, false);
    mbar[0] = 1.0;
    exact[0] = true;
    std::vector<MatrixXd> level{MatrixXd::Identity(A.front().rows(), A.front().cols())};
    for (int k = 1; k <= k_max; ++k) {
        if (static_cast<long long>(level.size()) * s > 100'000) break;
        std::vector<MatrixXd> next;
        next.reserve(level.size() * A.size());
        double m = 0.0;
        for (const auto& p : level)
            for (const auto& a : A) {
                next.push_back(a * p);
                m = std::max(m, spectral_norm(next.back()));
            }
        out.nodes += static_cast<long long>(next.size());
        mbar[static_cast<std::size_t>(k)] = m;
        exact[static_cast<std::size_t>(k)] = true;
        level = std::move(next);
    }
    for (int k = 1; k <= k_max; ++k) {
        if (exact[static_cast<std::size_t>(k)]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int a = 1; a < k; ++a) best = std::min(best, mbar[static_cast<std::size_t>(a)] * mbar[static_cast<std::size_t>(k - a)]);
        mbar[static_cast<std::size_t>(k)] = best;
    }
    for (int k = 1; k <= k_max; ++k) {
        if (!exact[static_cast<std::size_t>(k)]) break;
        const double v = mbar[static_cast<std::size_t>(k)] / std::pow(xi, k);
        if (v > out.kappa) {
            out.kappa = v;
            out.argmax_k = k;
        }
    }
    // Bound on the best ratio reachable below a node of depth j with norm N.
    auto subtree_bound = [&](int j, double nrm) {
        double b = 0.0;
        for (int m = 0; m + j <= k_max; ++m)
            b = std::max(b, nrm * mbar[static_cast<std::size_t>(m)] / std::pow(xi, j + m));
        return b;
    };
    int first_inexact = 1;
    while (first_inexact <= k_max && exact[static_cast<std::size_t>(first_inexact)]) ++first_inexact;
    if (first_inexact <= k_max) {
        struct Frame {
            MatrixXd P;
            int depth;
        };
        std::vector<Frame> stack;
        stack.push_back({MatrixXd::Identity(A.front().rows(), A.front().cols()), 0});
        while (!stack.empty()) {
            Frame f = std::move(stack.back());
            stack.pop_back();
            if (f.depth == k_max) continue;
            for (auto it = A.rbegin(); it != A.rend(); ++it) {
                if (out.nodes >= node_budget) {
                    out.budget_exceeded = true;
                    stack.clear();
                    break;
                }
                MatrixXd child = (*it) * f.P;
                ++out.nodes;
                const int d = f.depth + 1;
                const double nrm = spectral_norm(child);
                const double ratio = nrm / std::pow(xi, d);
                if (ratio > out.kappa) {
                    out.kappa = ratio;
                    out.argmax_k = d;
                }
                if (d < k_max && subtree_bound(d, nrm) > out.kappa * (1.0 + 1e-12)) stack.push_back({std::move(child), d});
            }
        }
    }
    out.unconverged = k_max > 0 && out.argmax_k == k_max;
    return out;
}

// ---------------------------------------------------------------------------
// Reports

struct StabilityOptions {
    int tau_k_max = 64;
    int jsr_k_max = 8;
    int kappa_k_max = 12;
    double jsr_tol = 1e-9;
    long long jsr_budget = 2'000'000;
    std::optional<double> rho;
    std::optional<double> xi;
    Eigen::Index size_cap = kDefaultSizeCap;
};

struct StabilityReport {
    double rho_augmented = 0.0;
    bool is_mss = false;
    TauEstimate tau;
    JsrBounds jsr;
    KappaEstimate kappa;
    double a_bar = 0.0;
    double b_bar = 0.0;
    double t_bar = 0.0;
    double norm_T = 0.0;
};

inline double max_spectral_norm(const std::vector<MatrixXd>& mats) {
    double m = 0.0;
    for (const auto& x : mats) m = std::max(m, spectral_norm(x));
    return m;
}

inline StabilityReport stability_report(const MjsModel& model, const StabilityOptions& opts = {}) {
    require_valid(model);
    StabilityReport rep;
    const MatrixXd acal = augmented_matrix(model, opts.size_cap);
    rep.rho_augmented = spectral_radius(acal, opts.size_cap);
    rep.is_mss = rep.rho_augmented < 1.0;
    rep.tau = tau_estimate(acal, opts.rho ? *opts.rho : default_rate(rep.rho_augmented), opts.tau_k_max);
    rep.jsr = jsr_bounds(model.A, opts.jsr_k_max, opts.jsr_tol, opts.jsr_budget);
    rep.kappa = kappa_estimate(model.A, opts.xi ? *opts.xi : default_rate(rep.jsr.upper), opts.kappa_k_max,
                               5'000'000, rep.jsr);
    rep.a_bar = max_spectral_norm(model.A);
    rep.b_bar = max_spectral_norm(model.B);
    rep.t_bar = model.T.maxCoeff();
    rep.norm_T = spectral_norm(model.T);
    return rep;
}

struct StabilityComparison {
    PerturbationTriple eps;
    double a_bar = 0.0;
    double eps_rho = 0.0;
    double rho_full = 0.0;
    double rho_reduced = 0.0;
    double rho_expanded = 0.0;
    double expansion_rho_gap = 0.0;
    double rho = 0.0;
    double rho_hat = 0.0;
    TauEstimate tau;
    TauEstimate tau_bar;
    double bound_rho_upper = 0.0;
    double bound_rho_lower = 0.0;
    /// rho(A_hat) - rho(A) and rho(A) - rho(A_hat).
    double measured_rho_up = 0.0;
    double measured_rho_down = 0.0;
    double measured_gap_rho = 0.0;
    JsrBounds jsr_full;
    JsrBounds jsr_reduced;
    double xi = 0.0;
    double xi_hat = 0.0;
    KappaEstimate kappa;
    KappaEstimate kappa_bar;
    double bound_xi_upper = 0.0;
    double bound_xi_lower = 0.0;
    /// Point estimate from interval midpoints, and the widest gap the intervals allow.
    double measured_gap_xi = 0.0;
    double measured_gap_xi_max = 0.0;
    bool T0_within_ball = false;
};

struct ComparisonOptions {
    std::optional<double> rho;
    std::optional<double> rho_hat;
    std::optional<double> xi;
    std::optional<double> xi_hat;
    int tau_k_max = 64;
    int jsr_k_max = 8;
    int kappa_k_max = 12;
    Branch branch = Branch::Lumpable;
    PairCounting counting = PairCounting::Ordered;
};

/// Compares the full and reduced systems through the expanded s-mode system with T_bar from construct_T0.
inline StabilityComparison stability_comparison(const MjsModel& model, const MjsModel& reduced,
                                                const Partition& partition, const ComparisonOptions& opts = {}) {
    require_valid(model);
    require_valid(reduced);
    StabilityComparison c;
    c.eps = perturbations(model, partition, opts.branch, opts.counting);
    c.a_bar = max_spectral_norm(model.A);
    const double sq = std::sqrt(static_cast<double>(model.s));
    c.eps_rho = sq * ((2.0 * c.a_bar + c.eps.eps_A) * c.eps.eps_A + c.a_bar * c.a_bar * c.eps.eps_T);

    const T0Result t0 = construct_T0(model.T, partition, c.eps.eps_T, opts.branch);
    c.T0_within_ball = t0.within_ball;
    const MjsModel expanded = expand_reduced(reduced, partition, t0.T0);

    const MatrixXd acal = augmented_matrix(model);
    const MatrixXd acal_hat = augmented_matrix(reduced);
    const MatrixXd acal_bar = augmented_matrix(expanded);
    c.rho_full = spectral_radius(acal);
    c.rho_reduced = spectral_radius(acal_hat);
    c.rho_expanded = spectral_radius(acal_bar);
    c.expansion_rho_gap = std::abs(c.rho_reduced - c.rho_expanded);

    c.rho = opts.rho ? *opts.rho : default_rate(c.rho_full);
    c.rho_hat = opts.rho_hat ? *opts.rho_hat : default_rate(c.rho_reduced);
    c.tau = tau_estimate(acal, c.rho, opts.tau_k_max);
    // The expanded system shares its spectral radius with the reduced one.
    c.tau_bar = tau_estimate(acal_bar, std::max(c.rho_hat, c.rho_expanded), opts.tau_k_max);
    c.bound_rho_upper = c.tau.tau * c.eps_rho + (c.rho - c.rho_full);
    c.bound_rho_lower = c.tau_bar.tau * c.eps_rho + (c.rho_hat - c.rho_reduced);
    c.measured_rho_up = c.rho_reduced - c.rho_full;
    c.measured_rho_down = c.rho_full - c.rho_reduced;
    c.measured_gap_rho = std::abs(c.rho_reduced - c.rho_full);

    c.jsr_full = jsr_bounds(model.A, opts.jsr_k_max);
    c.jsr_reduced = jsr_bounds(reduced.A, opts.jsr_k_max);
    c.xi = opts.xi ? *opts.xi : default_rate(c.jsr_full.upper);
    c.xi_hat = opts.xi_hat ? *opts.xi_hat : default_rate(c.jsr_reduced.upper);
    c.kappa = kappa_estimate(model.A, c.xi, opts.kappa_k_max, 5'000'000, c.jsr_full);
    c.kappa_bar = kappa_estimate(reduced.A, c.xi_hat, opts.kappa_k_max, 5'000'000, c.jsr_reduced);
    // The unknown exact radii are replaced by their certified lower bounds.
    c.bound_xi_upper = c.kappa.kappa * c.eps.eps_A + (c.xi - c.jsr_full.lower);
    c.bound_xi_lower = c.kappa_bar.kappa * c.eps.eps_A + (c.xi_hat - c.jsr_reduced.lower);
    const double mid_full = 0.5 * (c.jsr_full.lower + c.jsr_full.upper);
    const double mid_red = 0.5 * (c.jsr_reduced.lower + c.jsr_reduced.upper);
    c.measured_gap_xi = std::abs(mid_red - mid_full);
    c.measured_gap_xi_max = std::max(c.jsr_reduced.upper - c.jsr_full.lower, c.jsr_full.upper - c.jsr_reduced.lower);
    return c;
}

} // namespace mjsred
