#pragma once

// Small dense helpers shared by every module. All matrices are Eigen::MatrixXd.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "mjsred/error.hpp"

namespace mjsred {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Column-major vectorization, used artifact-wide for feature rows.
inline VectorXd vec(const MatrixXd& m) {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
}

inline double spectral_norm(const MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 || m.cols() == 1) return m.norm();
    const Eigen::JacobiSVD<MatrixXd> svd(m);
    return svd.singularValues()(0);
}

inline VectorXd singular_values(const MatrixXd& m) {
    if (m.size() == 0) return VectorXd();
    if (std::min(m.rows(), m.cols()) > 64) return Eigen::BDCSVD<MatrixXd>(m).singularValues();
    return Eigen::JacobiSVD<MatrixXd>(m).singularValues();
}

/// Induced infinity norm (max absolute row sum).
inline double inf_norm(const MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline Eigen::VectorXcd eigenvalues(const MatrixXd& m) {
    if (m.rows() == 0) return Eigen::VectorXcd();
    Eigen::EigenSolver<MatrixXd> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues();
}

inline MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Leading left singular vectors (columns) and the full singular value list.
struct LeftSingular {
    MatrixXd vectors;
    VectorXd values;
};

inline LeftSingular top_left_singular_vectors(const MatrixXd& m, Eigen::Index r) {
    LeftSingular out;
    if (std::min(m.rows(), m.cols()) > 64) {
        Eigen::BDCSVD<MatrixXd> svd(m, Eigen::ComputeThinU);
        out.vectors = svd.matrixU().leftCols(std::min<Eigen::Index>(r, svd.matrixU().cols()));
        out.values = svd.singularValues();
    } else {
        Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU);
        out.vectors = svd.matrixU().leftCols(std::min<Eigen::Index>(r, svd.matrixU().cols()));
        out.values = svd.singularValues();
    }
    return out;
}

/// Square root of a symmetric PSD matrix; negative eigenvalues are clipped to 0.
inline MatrixXd psd_sqrt(const MatrixXd& s) {
    const MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    const VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// ---------------------------------------------------------------------------
// Random streams

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); equal arguments give equal streams.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6d6a7372u};
    return Rng(seq);
}

/// Child seed for work item `index` (splitmix64 finalizer over the pair).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd m(rows, cols);
    // Fill column by column so the draw order is fixed.
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
    return m;
}

/// Flat (symmetric, concentration 1) Dirichlet sample of the given length.
inline VectorXd flat_dirichlet(Eigen::Index len, Rng& rng) {
    VectorXd g(len);
    for (Eigen::Index i = 0; i < len; ++i) {
        double u = uniform01(rng);
        while (u <= 0.0) u = uniform01(rng);
        g(i) = -std::log(u);
    }
    return g / g.sum();
}

/// Index drawn from a probability vector using one uniform variate.
inline int sample_index(const VectorXd& probs, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    const auto n = static_cast<int>(probs.size());
    int last_positive = 0;
    for (int i = 0; i < n; ++i) {
        if (probs(i) > 0.0) last_positive = i;
        acc += probs(i);
        if (u < acc) return i;
    }
    return last_positive;
}

} // namespace mjsred
