#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "mjsred/error.hpp"
#include "mjsred/features.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"
#include "mjsred/parallel.hpp"
#include "mjsred/perturbation.hpp"

namespace mjsred {

// ---------------------------------------------------------------------------
// k-means (k-means++ seeding, Lloyd iterations, best of several restarts)

struct KMeansResult {
    Partition partition;
    std::vector<int> labels;
    MatrixXd centers;
    double objective = 0.0;
    int restarts_used = 0;
    int best_restart = 0;
};

namespace detail {

struct LloydRun {
    std::vector<int> labels;
    MatrixXd centers;
    double objective = 0.0;
};

inline int uniform_index(int count, Rng& rng) {
    const int i = static_cast<int>(uniform01(rng) * count);
    return std::min(i, count - 1);
}

/// Index of the nearest center; the lowest index wins exact ties.
inline int nearest_center(const MatrixXd& points, Eigen::Index i, const MatrixXd& centers, double& dist) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < centers.rows(); ++k) {
        const double d = (points.row(i) - centers.row(k)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(k);
        }
    }
    dist = best_d;
    return best;
}

inline MatrixXd kmeanspp_seed(const MatrixXd& points, int r, Rng& rng) {
    const auto s = static_cast<int>(points.rows());
    MatrixXd centers(r, points.cols());
    std::vector<bool> chosen(static_cast<std::size_t>(s), false);
    int first = uniform_index(s, rng);
    centers.row(0) = points.row(first);
    chosen[static_cast<std::size_t>(first)] = true;
    VectorXd d2(s);
    for (int i = 0; i < s; ++i) d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
    for (int k = 1; k < r; ++k) {
        int pick = -1;
        const double total = d2.sum();
        if (total > 0.0) {
            pick = sample_index(d2 / total, rng);
        } else {
            // Every point coincides with a center: take an unused index uniformly.
            std::vector<int> free;
            for (int i = 0; i < s; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
            pick = free[static_cast<std::size_t>(uniform_index(static_cast<int>(free.size()), rng))];
        }
        chosen[static_cast<std::size_t>(pick)] = true;
        centers.row(k) = points.row(pick);
        for (int i = 0; i < s; ++i) d2(i) = std::min(d2(i), (points.row(i) - centers.row(k)).squaredNorm());
    }
    return centers;
}

/// Moves the point farthest from its center (in a cluster with at least two points) into each empty cluster.
inline void repair_empty(const MatrixXd& points, std::vector<int>& labels, MatrixXd& centers) {
    const auto r = static_cast<int>(centers.rows());
    std::vector<int> counts(static_cast<std::size_t>(r), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (int k = 0; k < r; ++k) {
        if (counts[static_cast<std::size_t>(k)] > 0) continue;
        int far = -1;
        double far_d = -1.0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const int l = labels[i];
            if (counts[static_cast<std::size_t>(l)] < 2) continue;
            const double d = (points.row(static_cast<Eigen::Index>(i)) - centers.row(l)).squaredNorm();
            if (d > far_d) {
                far_d = d;
                far = static_cast<int>(i);
            }
        }
        if (far < 0) continue;
        --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
        labels[static_cast<std::size_t>(far)] = k;
        ++counts[static_cast<std::size_t>(k)];
        centers.row(k) = points.row(far);
    }
}

inline MatrixXd cluster_means(const MatrixXd& points, const std::vector<int>& labels, int r) {
    MatrixXd c = MatrixXd::Zero(r, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(r), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        c.row(labels[i]) += points.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (int k = 0; k < r; ++k)
        if (counts[static_cast<std::size_t>(k)] > 0) c.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
    return c;
}

inline double kmeans_objective(const MatrixXd& points, const std::vector<int>& labels, const MatrixXd& centers) {
    double obj = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        obj += (points.row(static_cast<Eigen::Index>(i)) - centers.row(labels[i])).squaredNorm();
    return obj;
}

inline LloydRun lloyd(const MatrixXd& points, int r, Rng& rng, int max_iter = 1000) {
    const auto s = static_cast<int>(points.rows());
    LloydRun run;
    run.centers = kmeanspp_seed(points, r, rng);
    run.labels.assign(static_cast<std::size_t>(s), 0);
    double d = 0.0;
    for (int i = 0; i < s; ++i) run.labels[static_cast<std::size_t>(i)] = nearest_center(points, i, run.centers, d);
    repair_empty(points, run.labels, run.centers);
    for (int it = 0; it < max_iter; ++it) {
        run.centers = cluster_means(points, run.labels, r);
        std::vector<int> next(static_cast<std::size_t>(s));
        for (int i = 0; i < s; ++i) next[static_cast<std::size_t>(i)] = nearest_center(points, i, run.centers, d);
        MatrixXd centers = run.centers;
        repair_empty(points, next, centers);
        if (next == run.labels) break;
        run.labels = std::move(next);
    }
    run.centers = cluster_means(points, run.labels, r);
    run.objective = kmeans_objective(points, run.labels, run.centers);
    return run;
}

} // namespace detail

/// Clusters the rows of `points` into r groups; restart j uses RNG stream (seed, j).
inline KMeansResult kmeans_partition(const MatrixXd& points, int r, int restarts = 50, std::uint64_t seed = 0) {
    const auto s = static_cast<int>(points.rows());
    if (r <= 0) raise(Errc::DegenerateInput, "r must be positive");
    if (s < r) raise(Errc::DegenerateInput, "s = " + std::to_string(s) + " < r = " + std::to_string(r));
    if (restarts < 1) raise(Errc::DegenerateInput, "restarts must be at least 1");
    std::vector<detail::LloydRun> runs(static_cast<std::size_t>(restarts));
    parallel_for(restarts, [&](int j) {
        Rng rng = make_rng(seed, 0x1000u + static_cast<std::uint64_t>(j));
        runs[static_cast<std::size_t>(j)] = detail::lloyd(points, r, rng);
    });
    int best = 0;
    for (int j = 1; j < restarts; ++j)
        if (runs[static_cast<std::size_t>(j)].objective < runs[static_cast<std::size_t>(best)].objective) best = j;
    auto& run = runs[static_cast<std::size_t>(best)];

    // Compact in case a cluster stayed empty (fewer than r distinct points).
    std::vector<int> remap(static_cast<std::size_t>(r), -1);
    int used = 0;
    for (int& l : run.labels) {
        if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = used++;
        l = remap[static_cast<std::size_t>(l)];
    }
    KMeansResult out;
    out.labels = run.labels;
    out.partition = Partition::from_labels(run.labels, used);
    out.centers = detail::cluster_means(points, run.labels, used);
    out.objective = run.objective;
    out.restarts_used = restarts;
    out.best_restart = best;
    return out;
}

// ---------------------------------------------------------------------------
// Misclustering rate

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method with potentials).
/// Returns assign[row] = column.
inline std::vector<int> hungarian_assignment(const MatrixXd& cost) {
    const auto n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<std::size_t>(j)] > 0) assign[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return assign;
}

enum class MrMethod { Auto, Exhaustive, Hungarian };

struct Matching {
    /// truth cluster k is matched with estimated cluster h[k].
    std::vector<int> h;
    double mr = 0.0;
};

/// C(k, h) = |truth_k \ est_h| / |truth_k|.
inline MatrixXd miscount_cost(const Partition& estimated, const Partition& truth) {
    const int r = truth.num_clusters();
    MatrixXd c(r, r);
    for (int k = 0; k < r; ++k) {
        const auto& tk = truth.cluster(k);
        for (int h = 0; h < r; ++h) {
            int miss = 0;
            for (int i : tk)
                if (estimated.cluster_of(i) != h) ++miss;
            c(k, h) = static_cast<double>(miss) / static_cast<double>(tk.size());
        }
    }
    return c;
}

inline Matching best_matching(const Partition& estimated, const Partition& truth, MrMethod method = MrMethod::Auto) {
    if (estimated.num_modes() != truth.num_modes())
        raise(Errc::SizeMismatch, "partitions cover different mode sets");
    if (estimated.num_clusters() != truth.num_clusters())
        raise(Errc::SizeMismatch, "partitions have different cluster counts");
    const int r = truth.num_clusters();
    const MatrixXd c = miscount_cost(estimated, truth);
    if (method == MrMethod::Auto) method = r <= 8 ? MrMethod::Exhaustive : MrMethod::Hungarian;
    Matching out;
    if (method == MrMethod::Exhaustive) {
        std::vector<int> perm(static_cast<std::size_t>(r));
        std::iota(perm.begin(), perm.end(), 0);
        out.mr = std::numeric_limits<double>::infinity();
        do {
            double total = 0.0;
            for (int k = 0; k < r; ++k) total += c(k, perm[static_cast<std::size_t>(k)]);
            if (total < out.mr) {
                out.mr = total;
                out.h = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        out.h = hungarian_assignment(c);
        out.mr = 0.0;
        for (int k = 0; k < r; ++k) out.mr += c(k, out.h[static_cast<std::size_t>(k)]);
    }
    return out;
}

inline double misclustering_rate(const Partition& estimated, const Partition& truth, MrMethod method = MrMethod::Auto) {
    return best_matching(estimated, truth, method).mr;
}

// ---------------------------------------------------------------------------
// Reduction

/// Cluster-averaged r-mode model. With `pi_weighted`, averages use stationary weights.
inline MjsModel reduce_with_partition(const MjsModel& model, const Partition& partition, bool pi_weighted = false) {
    if (partition.num_modes() != model.s) raise(Errc::PartitionMismatch, "partition size differs from s");
    const int r = partition.num_clusters();
    VectorXd w = VectorXd::Ones(model.s);
    if (pi_weighted) w = stationary_distribution(model.T).pi;
    const MatrixXd mass = cluster_mass(model.T, partition);
    MjsModel out;
    out.n = model.n;
    out.p = model.p;
    out.s = r;
    out.A.assign(static_cast<std::size_t>(r), MatrixXd::Zero(model.n, model.n));
    out.B.assign(static_cast<std::size_t>(r), MatrixXd::Zero(model.n, model.p));
    out.T = MatrixXd::Zero(r, r);
    for (int k = 0; k < r; ++k) {
        double total = 0.0;
        for (int i : partition.cluster(k)) {
            out.A[static_cast<std::size_t>(k)] += w(i) * model.A[static_cast<std::size_t>(i)];
            out.B[static_cast<std::size_t>(k)] += w(i) * model.B[static_cast<std::size_t>(i)];
            out.T.row(k) += w(i) * mass.col(i).transpose();
            total += w(i);
        }
        out.A[static_cast<std::size_t>(k)] /= total;
        out.B[static_cast<std::size_t>(k)] /= total;
        out.T.row(k) /= total;
    }
    return out;
}

struct ReduceOptions {
    /// Unset: run both branches and keep the one with smaller hindsight perturbations.
    std::optional<Branch> branch;
    /// Unset: normalizing default weights.
    std::optional<Weights> weights;
    int restarts = 50;
    std::uint64_t seed = 0;
    bool pi_weighted = false;
};

struct ReductionResult {
    Partition partition;
    MjsModel reduced;
    double kmeans_objective = 0.0;
    int restarts_used = 0;
    MatrixXd embedding;
    Branch branch = Branch::Aggregatable;
};

inline ReductionResult reduce_branch(const MjsModel& model, int r, Branch branch, const ReduceOptions& opts) {
    require_valid(model);
    if (r <= 0 || r > model.s)
        raise(Errc::DegenerateInput, "r = " + std::to_string(r) + " must satisfy 0 < r <= s = " + std::to_string(model.s));
    const Weights w = opts.weights ? *opts.weights : default_weights(model);
    const FeatureMatrix f = build_features(model, r, branch, w);
    ReductionResult out;
    out.branch = branch;
    out.embedding = top_left_singular_vectors(f.phi, r).vectors;
    const KMeansResult km = kmeans_partition(out.embedding, r, opts.restarts, opts.seed);
    out.partition = km.partition;
    out.kmeans_objective = km.objective;
    out.restarts_used = km.restarts_used;
    out.reduced = reduce_with_partition(model, out.partition, opts.pi_weighted);
    return out;
}

inline ReductionResult reduce(const MjsModel& model, int r, const ReduceOptions& opts = {}) {
    if (opts.branch) return reduce_branch(model, r, *opts.branch, opts);
    ReductionResult agg = reduce_branch(model, r, Branch::Aggregatable, opts);
    if (!is_ergodic(model.T)) return agg;
    ReductionResult lmp = reduce_branch(model, r, Branch::Lumpable, opts);
    const auto ea = perturbations(model, agg.partition, Branch::Lumpable);
    const auto el = perturbations(model, lmp.partition, Branch::Lumpable);
    if (el.eps_T < ea.eps_T) return lmp;
    if (el.eps_T == ea.eps_T && el.eps_A + el.eps_B < ea.eps_A + ea.eps_B) return lmp;
    return agg;
}

} // namespace mjsred
