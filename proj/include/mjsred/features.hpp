#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "mjsred/error.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"

namespace mjsred {

enum class Branch { Aggregatable, Lumpable };

inline const char* branch_name(Branch b) { return b == Branch::Aggregatable ? "aggregatable" : "lumpable"; }

/// Feature weights (alpha_A, alpha_B, alpha_T); non-negative, summing to one.
struct Weights {
    double a = 1.0 / 3.0;
    double b = 1.0 / 3.0;
    double t = 1.0 / 3.0;
};

inline void check_weights(const Weights& w) {
    if (!std::isfinite(w.a) || !std::isfinite(w.b) || !std::isfinite(w.t))
        raise(Errc::BadWeights, "weights must be finite");
    if (w.a < 0.0 || w.b < 0.0 || w.t < 0.0) raise(Errc::BadWeights, "weights must be non-negative");
    if (std::abs(w.a + w.b + w.t - 1.0) > 1e-12) raise(Errc::BadWeights, "weights must sum to 1");
}

/// Normalizing weights alpha_X proportional to 1 / max_i ||X_i|| (spectral norm), alpha_T to 1 / ||T||.
/// A feature whose norm is zero gets weight zero. The optional factors multiply the proportionality
/// constants before normalization.
inline Weights default_weights(const MjsModel& model, double factor_a = 1.0, double factor_b = 1.0,
                               double factor_t = 1.0) {
    double max_a = 0.0;
    double max_b = 0.0;
    for (const auto& a : model.A) max_a = std::max(max_a, spectral_norm(a));
    for (const auto& b : model.B) max_b = std::max(max_b, spectral_norm(b));
    const double norm_t = spectral_norm(model.T);
    const double ia = max_a > 0.0 ? factor_a / max_a : 0.0;
    const double ib = max_b > 0.0 ? factor_b / max_b : 0.0;
    const double it = norm_t > 0.0 ? factor_t / norm_t : 0.0;
    const double sum = ia + ib + it;
    if (sum <= 0.0) return {};
    return {ia / sum, ib / sum, it / sum};
}

/// Per-mode feature rows plus the spectral quantities of the lumpable branch.
struct FeatureMatrix {
    MatrixXd phi;
    Weights weights;
    Branch branch = Branch::Aggregatable;
    // Set for the lumpable branch only.
    MatrixXd H;
    MatrixXd W_r;
    MatrixXd S_r;
    VectorXd pi;
    VectorXd h_singular_values;
};

namespace detail {

inline void fill_dynamics_features(const MjsModel& model, const Weights& w, MatrixXd& phi) {
    const Eigen::Index na = static_cast<Eigen::Index>(model.n) * model.n;
    const Eigen::Index nb = static_cast<Eigen::Index>(model.n) * model.p;
    for (int i = 0; i < model.s; ++i) {
        phi.row(i).segment(0, na) = w.a * vec(model.A[static_cast<std::size_t>(i)]).transpose();
        if (nb > 0) phi.row(i).segment(na, nb) = w.b * vec(model.B[static_cast<std::size_t>(i)]).transpose();
    }
}

} // namespace detail

/// Phi(i,:) = [a vec(A_i)^T, b vec(B_i)^T, t T(i,:)].
inline FeatureMatrix build_features_aggregatable(const MjsModel& model, const Weights& weights) {
    check_weights(weights);
    require_valid(model);
    const Eigen::Index na = static_cast<Eigen::Index>(model.n) * model.n;
    const Eigen::Index nb = static_cast<Eigen::Index>(model.n) * model.p;
    FeatureMatrix f;
    f.weights = weights;
    f.branch = Branch::Aggregatable;
    f.phi.resize(model.s, na + nb + model.s);
    detail::fill_dynamics_features(model, weights, f.phi);
    f.phi.rightCols(model.s) = weights.t * model.T;
    return f;
}

/// Phi(i,:) = [a vec(A_i)^T, b vec(B_i)^T, t S_r(i,:)] with S_r = D^{-1/2} W_r and W_r the
/// leading r left singular vectors of H = D^{1/2} T D^{-1/2}, D = diag(pi).
inline FeatureMatrix build_features_lumpable(const MjsModel& model, int r, const Weights& weights) {
    check_weights(weights);
    require_valid(model);
    if (r <= 0 || r > model.s) raise(Errc::DegenerateInput, "need 0 < r <= s");
    const auto stat = stationary_distribution(model.T);
    const VectorXd sq = stat.pi.cwiseSqrt();
    const VectorXd isq = sq.cwiseInverse();

    FeatureMatrix f;
    f.weights = weights;
    f.branch = Branch::Lumpable;
    f.pi = stat.pi;
    f.H = sq.asDiagonal() * model.T * isq.asDiagonal();
    auto svd = top_left_singular_vectors(f.H, r);
    f.h_singular_values = svd.values;
    if (svd.values(r - 1) < 1e-12)
        raise(Errc::RankDeficient, "sigma_r(H) = " + detail::fmt_double(svd.values(r - 1)) + " < 1e-12");
    f.W_r = std::move(svd.vectors);
    f.S_r = isq.asDiagonal() * f.W_r;

    const Eigen::Index na = static_cast<Eigen::Index>(model.n) * model.n;
    const Eigen::Index nb = static_cast<Eigen::Index>(model.n) * model.p;
    f.phi.resize(model.s, na + nb + r);
    detail::fill_dynamics_features(model, weights, f.phi);
    f.phi.rightCols(r) = weights.t * f.S_r;
    return f;
}

inline FeatureMatrix build_features(const MjsModel& model, int r, Branch branch, const Weights& weights) {
    return branch == Branch::Aggregatable ? build_features_aggregatable(model, weights)
                                          : build_features_lumpable(model, r, weights);
}

} // namespace mjsred
