#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mjsred/error.hpp"
#include "mjsred/features.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"

namespace mjsred {

struct SynthConfig {
    int r = 4;
    int s = 16;
    int n = 5;
    int p = 3;
    double eps_A = 0.0;
    double eps_B = 0.0;
    double eps_T = 0.0;
    Branch branch = Branch::Aggregatable;
    double base_A_norm = 0.5;
    double base_B_norm = 1.0;
    std::uint64_t seed = 0;
    /// Accept s not divisible by r (near-uniform contiguous clusters; budgets use the largest cluster).
    bool allow_uneven = false;
    /// Lumpable only: build the unperturbed T reversible (symmetric flows with matching block margins)
    /// around a diagonally dominant reversible base chain.
    bool reversible = false;
};

struct SynthInstance {
    MjsModel model;
    Partition truth;
    MjsModel base;
};

namespace detail {

/// Nonnegative matrix with the given row and column sums (Sinkhorn scaling of a positive seed).
inline MatrixXd sinkhorn(MatrixXd m, const VectorXd& rows, const VectorXd& cols) {
    for (int it = 0; it < 10000; ++it) {
        m = (rows.array() / m.rowwise().sum().array()).matrix().asDiagonal() * m;
        m = m * (cols.array() / m.colwise().sum().transpose().array()).matrix().asDiagonal();
        const double err = (m.rowwise().sum() - rows).cwiseAbs().maxCoeff();
        if (err < 1e-16) break;
    }
    return m;
}

/// Symmetric nonnegative matrix with the given row sums (symmetric Sinkhorn).
inline MatrixXd symmetric_sinkhorn(MatrixXd m, const VectorXd& rows) {
    for (int it = 0; it < 10000; ++it) {
        const VectorXd d = (rows.array() / m.rowwise().sum().array()).sqrt().matrix();
        m = d.asDiagonal() * m * d.asDiagonal();
        const double err = (m.rowwise().sum() - rows).cwiseAbs().maxCoeff();
        if (err < 1e-16) break;
    }
    return 0.5 * (m + m.transpose());
}

inline MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = 0.05 + uniform01(rng);
    return m;
}

inline MatrixXd scaled_gaussian(Eigen::Index rows, Eigen::Index cols, double target, bool frobenius, Rng& rng) {
    MatrixXd g = gaussian_matrix(rows, cols, rng);
    if (g.size() == 0) return g;
    const double nrm = frobenius ? g.norm() : spectral_norm(g);
    return g * (target / nrm);
}

} // namespace detail

/// Random perturbed instance around an r-mode base system. Every random component has its own stream,
/// so changing a perturbation level leaves the other draws unchanged.
inline SynthInstance generate(const SynthConfig& cfg) {
    if (cfg.r <= 0 || cfg.s < cfg.r) raise(Errc::DegenerateInput, "need 0 < r <= s");
    if (cfg.n <= 0 || cfg.p < 0) raise(Errc::DegenerateInput, "need n > 0 and p >= 0");
    if (cfg.eps_A < 0.0 || cfg.eps_B < 0.0 || cfg.eps_T < 0.0) raise(Errc::DegenerateInput, "targets must be >= 0");
    if (cfg.s % cfg.r != 0 && !cfg.allow_uneven)
        raise(Errc::DegenerateInput, "s = " + std::to_string(cfg.s) + " is not divisible by r = " + std::to_string(cfg.r));
    const int r = cfg.r;
    const int s = cfg.s;
    SynthInstance out;
    out.truth = Partition::contiguous(s, r);
    const double sbar = static_cast<double>(out.truth.largest_size());
    const double unit = 2.0 * r * sbar * sbar;
    if (cfg.eps_T > unit)
        raise(Errc::DegenerateInput, "eps_T exceeds 2 r sbar^2, the mixing weight would leave [0, 1]");

    Rng base_rng = make_rng(cfg.seed, 1);
    Rng e_rng = make_rng(cfg.seed, 2);
    Rng f_rng = make_rng(cfg.seed, 3);
    Rng tbar_rng = make_rng(cfg.seed, 4);
    Rng b_rng = make_rng(cfg.seed, 5);

    // Base system.
    MjsModel& base = out.base;
    base.n = cfg.n;
    base.p = cfg.p;
    base.s = r;
    for (int k = 0; k < r; ++k) base.A.push_back(detail::scaled_gaussian(cfg.n, cfg.n, cfg.base_A_norm, false, base_rng));
    for (int k = 0; k < r; ++k) base.B.push_back(detail::scaled_gaussian(cfg.n, cfg.p, cfg.base_B_norm, false, base_rng));
    base.T.resize(r, r);
    VectorXd base_pi;
    if (cfg.reversible) {
        MatrixXd g = detail::uniform_matrix(r, r, base_rng);
        g = symmetrize(g);
        g.diagonal().array() += static_cast<double>(r);
        base_pi = g.rowwise().sum();
        base.T = base_pi.cwiseInverse().asDiagonal() * g;
        base_pi /= base_pi.sum();
    } else {
        for (int k = 0; k < r; ++k) base.T.row(k) = flat_dirichlet(r, base_rng).transpose();
    }

    // Modes.
    MjsModel& m = out.model;
    m.n = cfg.n;
    m.p = cfg.p;
    m.s = s;
    m.A.resize(static_cast<std::size_t>(s));
    m.B.resize(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) {
        const auto k = static_cast<std::size_t>(out.truth.cluster_of(i));
        MatrixXd e = detail::scaled_gaussian(cfg.n, cfg.n, 1.0, true, e_rng);
        MatrixXd f = detail::scaled_gaussian(cfg.n, cfg.p, 1.0, true, f_rng);
        m.A[static_cast<std::size_t>(i)] = base.A[k] + (cfg.eps_A / unit) * e;
        m.B[static_cast<std::size_t>(i)] = base.B[k];
        if (cfg.p > 0) m.B[static_cast<std::size_t>(i)] += (cfg.eps_B / unit) * f;
    }

    // Unperturbed Markov matrix with the block structure of the branch.
    MatrixXd tbar = MatrixXd::Zero(s, s);
    if (cfg.branch == Branch::Lumpable && cfg.reversible) {
        VectorXd pi(s);
        for (int k = 0; k < r; ++k) {
            const auto& cl = out.truth.cluster(k);
            const VectorXd v = flat_dirichlet(static_cast<Eigen::Index>(cl.size()), tbar_rng);
            for (std::size_t a = 0; a < cl.size(); ++a) pi(cl[a]) = base_pi(k) * v(static_cast<Eigen::Index>(a));
        }
        MatrixXd w = MatrixXd::Zero(s, s);
        for (int k = 0; k < r; ++k) {
            const auto& ck = out.truth.cluster(k);
            for (int l = k; l < r; ++l) {
                const auto& cl = out.truth.cluster(l);
                VectorXd rows(static_cast<Eigen::Index>(ck.size()));
                VectorXd cols(static_cast<Eigen::Index>(cl.size()));
                for (std::size_t a = 0; a < ck.size(); ++a) rows(static_cast<Eigen::Index>(a)) = pi(ck[a]) * base.T(k, l);
                for (std::size_t b = 0; b < cl.size(); ++b) cols(static_cast<Eigen::Index>(b)) = pi(cl[b]) * base.T(l, k);
                MatrixXd seed_block = detail::uniform_matrix(rows.size(), cols.size(), tbar_rng);
                MatrixXd blk;
                if (k == l) {
                    seed_block = symmetrize(seed_block);
                    blk = detail::symmetric_sinkhorn(seed_block, rows);
                } else {
                    blk = detail::sinkhorn(seed_block, rows, cols);
                }
                for (std::size_t a = 0; a < ck.size(); ++a)
                    for (std::size_t b = 0; b < cl.size(); ++b) {
                        w(ck[a], cl[b]) = blk(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                        w(cl[b], ck[a]) = blk(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                    }
            }
        }
        tbar = w.rowwise().sum().cwiseInverse().asDiagonal() * w;
    } else {
        for (int k = 0; k < r; ++k) {
            const auto& ck = out.truth.cluster(k);
            for (int l = 0; l < r; ++l) {
                const auto& cl = out.truth.cluster(l);
                const auto len = static_cast<Eigen::Index>(cl.size());
                if (cfg.branch == Branch::Aggregatable) {
                    const VectorXd a = flat_dirichlet(len, tbar_rng);
                    for (int i : ck)
                        for (std::size_t b = 0; b < cl.size(); ++b)
                            tbar(i, cl[b]) = a(static_cast<Eigen::Index>(b)) * base.T(k, l);
                } else {
                    for (int i : ck) {
                        const VectorXd a = flat_dirichlet(len, tbar_rng);
                        for (std::size_t b = 0; b < cl.size(); ++b)
                            tbar(i, cl[b]) = a(static_cast<Eigen::Index>(b)) * base.T(k, l);
                    }
                }
            }
        }
    }

    const double w = cfg.eps_T / unit;
    m.T.resize(s, s);
    for (int i = 0; i < s; ++i) {
        const VectorXd b = flat_dirichlet(s, b_rng);
        m.T.row(i) = (1.0 - w) * tbar.row(i) + w * b.transpose();
        m.T.row(i) /= m.T.row(i).sum();
    }
    return out;
}

/// Fixed six-mode autonomous example: three base matrices (a rotation, 0.8 I, 1.2 I), each split into
/// +-0.1 I variants, with identical transition rows (0.2, 0.2, 0.2, 0.2, 0.1, 0.1).
inline SynthInstance fig4_model() {
    const double th = std::numbers::pi / 16.0;
    MatrixXd rot(2, 2);
    rot << std::cos(th), std::sin(th), -std::sin(th), std::cos(th);
    const MatrixXd I = MatrixXd::Identity(2, 2);
    const std::vector<MatrixXd> base_a{rot, 0.8 * I, 1.2 * I};
    std::vector<MatrixXd> a;
    for (const auto& b : base_a) {
        a.push_back(b + 0.1 * I);
        a.push_back(b - 0.1 * I);
    }
    MatrixXd T(6, 6);
    for (int i = 0; i < 6; ++i) T.row(i) << 0.2, 0.2, 0.2, 0.2, 0.1, 0.1;
    SynthInstance out;
    out.model = MjsModel::autonomous(a, T);
    out.truth = Partition({{0, 1}, {2, 3}, {4, 5}}, 6);
    MatrixXd tb(3, 3);
    for (int k = 0; k < 3; ++k) tb.row(k) << 0.4, 0.4, 0.2;
    out.base = MjsModel::autonomous(base_a, tb);
    return out;
}

} // namespace mjsred
