#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include "mjsred/error.hpp"
#include "mjsred/features.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"

namespace mjsred {

/// How the within-cluster double sum over (i, i') is counted.
/// Ordered counts both (i, i') and (i', i); Unordered counts each pair once.
enum class PairCounting { Ordered, Unordered };

struct PerturbationTriple {
    double eps_A = 0.0;
    double eps_B = 0.0;
    double eps_T = 0.0;
    Branch branch = Branch::Aggregatable;
};

/// r x s matrix of mode-to-cluster transition mass: C(l, i) = sum_{j in cluster l} T(i, j).
inline MatrixXd cluster_mass(const MatrixXd& T, const Partition& partition) {
    MatrixXd c = MatrixXd::Zero(partition.num_clusters(), T.rows());
    for (Eigen::Index i = 0; i < T.rows(); ++i)
        for (Eigen::Index j = 0; j < T.cols(); ++j) c(partition.cluster_of(static_cast<int>(j)), i) += T(i, j);
    return c;
}

inline PerturbationTriple perturbations(const MjsModel& model, const Partition& partition, Branch branch,
                                        PairCounting counting = PairCounting::Ordered) {
    if (partition.num_modes() != model.s) raise(Errc::PartitionMismatch, "partition size differs from s");
    PerturbationTriple out;
    out.branch = branch;
    const double factor = counting == PairCounting::Ordered ? 2.0 : 1.0;
    const MatrixXd mass = branch == Branch::Lumpable ? cluster_mass(model.T, partition) : MatrixXd();
    for (const auto& cl : partition.clusters()) {
        for (std::size_t x = 0; x < cl.size(); ++x) {
            for (std::size_t y = x + 1; y < cl.size(); ++y) {
                const auto i = static_cast<std::size_t>(cl[x]);
                const auto j = static_cast<std::size_t>(cl[y]);
                out.eps_A += factor * (model.A[i] - model.A[j]).norm();
                if (model.p > 0) out.eps_B += factor * (model.B[i] - model.B[j]).norm();
                if (branch == Branch::Aggregatable)
                    out.eps_T += factor * (model.T.row(cl[x]) - model.T.row(cl[y])).lpNorm<1>();
                else
                    out.eps_T += factor * (mass.col(cl[x]) - mass.col(cl[y])).lpNorm<1>();
            }
        }
    }
    return out;
}

/// Cluster-averaged rows: Phi_bar(i,:) = mean of Phi over the cluster containing i.
struct AveragedFeatures {
    MatrixXd phi_bar;
    VectorXd singular_values;
    double sigma_r = 0.0;
};

inline AveragedFeatures averaged_feature_matrix(const MatrixXd& phi, const Partition& partition) {
    if (partition.num_modes() != phi.rows()) raise(Errc::PartitionMismatch, "partition size differs from rows");
    AveragedFeatures out;
    out.phi_bar.resize(phi.rows(), phi.cols());
    for (const auto& cl : partition.clusters()) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(phi.cols());
        for (int i : cl) mean += phi.row(i);
        mean /= static_cast<double>(cl.size());
        for (int i : cl) out.phi_bar.row(i) = mean;
    }
    out.singular_values = singular_values(out.phi_bar);
    const int r = partition.num_clusters();
    out.sigma_r = r <= out.singular_values.size() ? out.singular_values(r - 1) : 0.0;
    return out;
}

inline AveragedFeatures averaged_feature_matrix(const FeatureMatrix& f, const Partition& partition) {
    return averaged_feature_matrix(f.phi, partition);
}

// ---------------------------------------------------------------------------
// Spectral constants of the lumpable bound

/// gamma1 = sum over the non-Perron eigenvalues of 1 / |1 - lambda_i(T)|.
inline double gamma1_of(const MatrixXd& T) {
    const Eigen::VectorXcd ev = eigenvalues(T);
    std::vector<double> gaps;
    gaps.reserve(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i) gaps.push_back(std::abs(std::complex<double>(1.0, 0.0) - ev(i)));
    // The Perron root is the eigenvalue closest to 1.
    const auto perron = std::min_element(gaps.begin(), gaps.end());
    double g = 0.0;
    for (auto it = gaps.begin(); it != gaps.end(); ++it)
        if (it != perron) g += 1.0 / *it;
    return g;
}

/// gamma2 = min(sigma_r(H) - sigma_{r+1}(H), 1), with sigma_{s+1} = 0.
inline double gamma2_of(const VectorXd& h_singular_values, int r) {
    const double sr = h_singular_values(r - 1);
    const double sr1 = r < h_singular_values.size() ? h_singular_values(r) : 0.0;
    return std::min(sr - sr1, 1.0);
}

struct Gammas {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
};

inline Gammas lumpable_gammas(const MatrixXd& T, const VectorXd& h_singular_values, double pi_min, double pi_max,
                              int r) {
    Gammas g;
    g.gamma1 = gamma1_of(T);
    g.gamma2 = gamma2_of(h_singular_values, r);
    g.gamma3 = 16.0 * g.gamma1 * std::sqrt(static_cast<double>(r) * pi_max) * T.norm() / (g.gamma2 * pi_min * pi_min);
    return g;
}

struct MrBoundReport {
    Branch branch = Branch::Aggregatable;
    PerturbationTriple eps;
    double kmeans_eps = 1.0;
    double eps_combined = 0.0;
    double sigma_r_phibar = 0.0;
    double sigma_r1_phibar = 0.0;
    double threshold_nonzero = 0.0;
    double threshold_zero = 0.0;
    double bound_value = 0.0;
    bool rank_ok = false;
    bool below_threshold_nonzero = false;
    bool below_threshold_zero = false;
    bool eps_T_premise = true;
    bool applicable = false;
    /// Premises hold and either the zero threshold or bound < 1/|largest cluster| is met.
    bool predicts_zero_mr = false;
    /// Existence of a reversible T_0 with informative spectrum is never checked.
    bool reversible_premise_verified = false;
    std::optional<Gammas> gammas;
    double pi_min = 0.0;
};

/// Both misclustering-rate bounds for the given hidden partition and branch.
/// `weights` default to the normalizing weights of the model.
inline MrBoundReport mr_bound(const MjsModel& model, const Partition& partition, Branch branch,
                              double kmeans_eps = 1.0, std::optional<Weights> weights = std::nullopt,
                              PairCounting counting = PairCounting::Ordered) {
    const Weights w = weights ? *weights : default_weights(model);
    const int r = partition.num_clusters();
    const FeatureMatrix f = build_features(model, r, branch, w);
    const AveragedFeatures avg = averaged_feature_matrix(f, partition);

    MrBoundReport rep;
    rep.branch = branch;
    rep.kmeans_eps = kmeans_eps;
    rep.eps = perturbations(model, partition, branch, counting);
    rep.sigma_r_phibar = avg.sigma_r;
    rep.sigma_r1_phibar = r < avg.singular_values.size() ? avg.singular_values(r) : 0.0;
    rep.rank_ok = rep.sigma_r_phibar > 1e-10;

    double t_term = w.t * rep.eps.eps_T;
    if (branch == Branch::Lumpable) {
        const double pi_min = f.pi.minCoeff();
        const double pi_max = f.pi.maxCoeff();
        rep.pi_min = pi_min;
        rep.gammas = lumpable_gammas(model.T, f.h_singular_values, pi_min, pi_max, r);
        if (t_term > 0.0) t_term *= rep.gammas->gamma3;
        rep.eps_T_premise = rep.eps.eps_T <= pi_min / rep.gammas->gamma1;
    }
    const double a_term = w.a * rep.eps.eps_A;
    const double b_term = w.b * rep.eps.eps_B;
    rep.eps_combined = std::sqrt(a_term * a_term + b_term * b_term + t_term * t_term);

    const double big = static_cast<double>(partition.largest_size());
    const double small = static_cast<double>(partition.smallest_size());
    const double two_eps = 2.0 + kmeans_eps;
    const double s_factor = branch == Branch::Lumpable ? static_cast<double>(model.s) : 1.0;
    rep.threshold_nonzero = rep.sigma_r_phibar * std::sqrt(small + big) / (8.0 * std::sqrt(s_factor * two_eps * big));
    rep.threshold_zero = rep.sigma_r_phibar / (8.0 * std::sqrt(two_eps * big));
    if (rep.sigma_r_phibar > 0.0)
        rep.bound_value = 64.0 * two_eps * rep.eps_combined * rep.eps_combined /
                          (rep.sigma_r_phibar * rep.sigma_r_phibar);
    else
        rep.bound_value = rep.eps_combined > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;

    rep.below_threshold_nonzero = rep.eps_combined <= rep.threshold_nonzero;
    rep.below_threshold_zero = rep.eps_combined <= rep.threshold_zero;
    rep.applicable = rep.rank_ok && rep.below_threshold_nonzero && rep.eps_T_premise;
    rep.predicts_zero_mr = rep.rank_ok && rep.eps_T_premise &&
                           (rep.below_threshold_zero ||
                            (rep.applicable && rep.bound_value < 1.0 / static_cast<double>(partition.largest_size())));
    return rep;
}

// ---------------------------------------------------------------------------
// Lumpable neighbourhood element

struct T0Result {
    MatrixXd T0;
    double frobenius_distance = 0.0;
    double inf_distance = 0.0;
    /// Both distances are within eps_T (plus 1e-12 slack).
    bool within_ball = false;
};

/// Target block masses: B(k, l) = |cluster k|^{-1} sum_{i in k, j in l} T(i, j).
inline MatrixXd cluster_block_average(const MatrixXd& T, const Partition& partition) {
    const int r = partition.num_clusters();
    const MatrixXd mass = cluster_mass(T, partition);
    MatrixXd b = MatrixXd::Zero(r, r);
    for (int k = 0; k < r; ++k) {
        for (int i : partition.cluster(k)) b.row(k) += mass.col(i).transpose();
        b.row(k) /= static_cast<double>(partition.cluster(k).size());
    }
    return b;
}

/// Markov matrix close to T that is exactly lumpable for `partition`.
/// Lumpable: each (row, target block) sum is moved to the cluster average by a same-sign
/// correction spread in proportion to headroom (increase) or to the entries (decrease).
/// Aggregatable: each row is replaced by its cluster's average row.
inline T0Result construct_T0(const MatrixXd& T, const Partition& partition, double eps_T,
                             Branch branch = Branch::Lumpable) {
    if (T.rows() != partition.num_modes() || T.cols() != T.rows())
        raise(Errc::PartitionMismatch, "Markov matrix and partition sizes differ");
    const int r = partition.num_clusters();
    T0Result out;
    out.T0 = T;
    if (branch == Branch::Aggregatable) {
        for (const auto& cl : partition.clusters()) {
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(T.cols());
            for (int i : cl) mean += T.row(i);
            mean /= static_cast<double>(cl.size());
            for (int i : cl) out.T0.row(i) = mean;
        }
    } else {
        const MatrixXd target = cluster_block_average(T, partition);
        for (int i = 0; i < T.rows(); ++i) {
            const int k = partition.cluster_of(i);
            for (int l = 0; l < r; ++l) {
                const auto& cols = partition.cluster(l);
                double cur = 0.0;
                for (int j : cols) cur += T(i, j);
                const double delta = target(k, l) - cur;
                if (delta == 0.0) continue;
                if (delta > 0.0) {
                    const double room = static_cast<double>(cols.size()) - cur;
                    if (!(room > 0.0)) raise(Errc::InfeasibleBlock, "no headroom in block (" + std::to_string(i + 1) +
                                                                         ", " + std::to_string(l + 1) + ")");
                    for (int j : cols) out.T0(i, j) += delta * (1.0 - T(i, j)) / room;
                } else {
                    if (!(cur > 0.0)) raise(Errc::InfeasibleBlock, "empty block (" + std::to_string(i + 1) + ", " +
                                                                       std::to_string(l + 1) + ")");
                    for (int j : cols) out.T0(i, j) += delta * T(i, j) / cur;
                }
            }
        }
        // Clip round-off and renormalize rows; the exact construction is already stochastic.
        out.T0 = out.T0.cwiseMax(0.0).cwiseMin(1.0);
        for (int i = 0; i < T.rows(); ++i) out.T0.row(i) /= out.T0.row(i).sum();
        if (!out.T0.allFinite()) raise(Errc::InfeasibleBlock, "non-finite correction");
    }
    const MatrixXd d = out.T0 - T;
    out.frobenius_distance = d.norm();
    out.inf_distance = inf_norm(d);
    out.within_ball = out.frobenius_distance <= eps_T + 1e-12 && out.inf_distance <= eps_T + 1e-12;
    return out;
}

} // namespace mjsred
