#include "test_util.hpp"

using namespace mjsred;
using namespace mjsred::testing;

namespace {

/// Stabilizable reducible instance: contractive-ish A with full-rank inputs.
SynthInstance lqr_instance(int s, int r, double eps, double eps_T, std::uint64_t seed) {
    SynthConfig c;
    c.s = s;
    c.r = r;
    c.n = 3;
    c.p = 2;
    c.eps_A = eps;
    c.eps_B = eps;
    c.eps_T = eps_T;
    c.base_A_norm = 1.1;
    c.base_B_norm = 1.0;
    c.seed = seed;
    return generate(c);
}

double max_norm(const std::vector<MatrixXd>& P) {
    double m = 0.0;
    for (const auto& p : P) m = std::max(m, spectral_norm(p));
    return m;
}

} // namespace

// ---------------------------------------------------------------------------
// Operators

TEST(RiccatiOperators, SingleModeIsTextbookStep) {
    Rng rng = make_rng(1);
    const MatrixXd A = random_scaled(3, 3, 1.2, rng);
    const MatrixXd B = gaussian_matrix(3, 2, rng);
    const MjsModel m = MjsModel::with_inputs({A}, {B}, MatrixXd::Ones(1, 1));
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = 2.0 * MatrixXd::Identity(2, 2);
    const MatrixXd G = gaussian_matrix(3, 3, rng);
    const MatrixXd X = G * G.transpose();
    const auto ev = riccati_operators(m, Q, R, {X});
    const MatrixXd inner = R + B.transpose() * X * B;
    const MatrixXd want = Q + A.transpose() * X * A -
                          A.transpose() * X * B * inner.inverse() * B.transpose() * X * A;
    expect_matrix_near(ev.R[0], want, 1e-10);
    expect_matrix_near(ev.K[0], -inner.inverse() * B.transpose() * X * A, 1e-10);
    expect_matrix_near(ev.phi[0], X, 0.0);
}

TEST(RiccatiOperators, ZeroInputMatrix) {
    Rng rng = make_rng(2);
    const int s = 3;
    std::vector<MatrixXd> A;
    std::vector<MatrixXd> B;
    std::vector<MatrixXd> X;
    for (int i = 0; i < s; ++i) {
        A.push_back(gaussian_matrix(2, 2, rng));
        B.push_back(MatrixXd::Zero(2, 1));
        const MatrixXd g = gaussian_matrix(2, 2, rng);
        X.push_back(g * g.transpose());
    }
    const MatrixXd T = random_stochastic(s, rng);
    const MjsModel m = MjsModel::with_inputs(A, B, T);
    const MatrixXd Q = MatrixXd::Identity(2, 2);
    const auto ev = riccati_operators(m, Q, MatrixXd::Identity(1, 1), X);
    for (int i = 0; i < s; ++i) {
        const auto u = static_cast<std::size_t>(i);
        MatrixXd phi = MatrixXd::Zero(2, 2);
        for (int j = 0; j < s; ++j) phi += T(i, j) * X[static_cast<std::size_t>(j)];
        expect_matrix_near(ev.phi[u], phi, 1e-14);
        EXPECT_EQ(ev.K[u].norm(), 0.0);
        expect_matrix_near(ev.R[u], Q + A[u].transpose() * phi * A[u], 1e-12);
    }
}

TEST(RiccatiOperators, ZeroArgument) {
    const auto inst = lqr_instance(4, 2, 0.1, 0.1, 3);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const std::vector<MatrixXd> X(4, MatrixXd::Zero(3, 3));
    const auto ev = riccati_operators(inst.model, Q, MatrixXd::Identity(2, 2), X);
    for (int i = 0; i < 4; ++i) {
        const auto u = static_cast<std::size_t>(i);
        EXPECT_EQ(ev.phi[u].norm(), 0.0);
        EXPECT_EQ(ev.K[u].norm(), 0.0);
        expect_matrix_near(ev.R[u], Q, 0.0);
    }
}

TEST(RiccatiOperators, Errors) {
    const auto inst = lqr_instance(4, 2, 0.1, 0.1, 3);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const std::vector<MatrixXd> X(4, MatrixXd::Zero(3, 3));
    expect_errc(Errc::DimensionMismatch, [&] { riccati_operators(inst.model, Q, MatrixXd::Identity(2, 2), {X[0]}); });
    expect_errc(Errc::DimensionMismatch, [&] { riccati_operators(inst.model, Q, MatrixXd::Identity(3, 3), X); });
    expect_errc(Errc::SingularInnerMatrix, [&] { riccati_operators(inst.model, Q, -MatrixXd::Identity(2, 2), X); });
}

// ---------------------------------------------------------------------------
// Value iteration

TEST(RiccatiSolve, ScalarFixedPoint) {
    double p = 1.0;
    for (int i = 0; i < 10000; ++i) {
        const double next = 1.0 + 0.25 * p - 0.25 * p * p / (1.0 + p);
        if (std::abs(next - p) < 1e-15) {
            p = next;
            break;
        }
        p = next;
    }
    EXPECT_NEAR(p, 0.5 * (0.25 + std::sqrt(0.0625 + 4.0)), 1e-14);
    const MjsModel m = MjsModel::with_inputs({MatrixXd::Constant(1, 1, 0.5)}, {MatrixXd::Ones(1, 1)}, MatrixXd::Ones(1, 1));
    const auto sol = riccati_solve(m, MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
    ASSERT_TRUE(sol.converged);
    EXPECT_NEAR(sol.P[0](0, 0), p, 1e-12);
    EXPECT_NEAR(sol.K[0](0, 0), -0.5 * p / (1.0 + p), 1e-12);
}

TEST(RiccatiSolve, UnstabilizableDiverges) {
    const MjsModel m = MjsModel::with_inputs({2.0 * MatrixXd::Identity(2, 2)}, {MatrixXd::Zero(2, 1)}, MatrixXd::Ones(1, 1));
    expect_errc(Errc::Diverged, [&] { riccati_solve(m, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1)); });
}

TEST(RiccatiSolve, SolutionInvariants) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = lqr_instance(6, 2, 0.2, 0.2, seed);
        const MatrixXd Q = MatrixXd::Identity(3, 3);
        const MatrixXd R = MatrixXd::Identity(2, 2);
        const auto sol = riccati_solve(inst.model, Q, R);
        ASSERT_TRUE(sol.converged) << "seed " << seed;
        const double scale = max_norm(sol.P);
        for (const auto& P : sol.P) {
            EXPECT_LE((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(P).eigenvalues().minCoeff(), 0.0);
        }
        const auto ev = riccati_operators(inst.model, Q, R, sol.P);
        for (std::size_t i = 0; i < sol.K.size(); ++i) EXPECT_LE((ev.K[i] - sol.K[i]).norm(), 1e-9);
        EXPECT_LE(riccati_residual(inst.model, Q, R, sol.P), 1e-8 * scale);
        ASSERT_GE(sol.p_delta_tail.size(), 2u);
        const std::size_t window = std::min<std::size_t>(50, sol.p_delta_tail.size());
        for (std::size_t k = sol.p_delta_tail.size() - window; k + 1 < sol.p_delta_tail.size(); ++k)
            EXPECT_LE(sol.p_delta_tail[k + 1], sol.p_delta_tail[k] * (1.0 + 1e-9) + 1e-15) << "seed " << seed;
        const auto acl = closed_loop_matrices(inst.model, sol.K);
        EXPECT_LT(mss_radius(acl, inst.model.T), 1.0);
    }
}

TEST(RiccatiSolve, ExactReducibilityGivesClusterConstantSolution) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto inst = lqr_instance(8, 2, 0.0, 0.0, seed);
        const auto sol = riccati_solve(inst.model, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2));
        ASSERT_TRUE(sol.converged);
        const double scale = max_norm(sol.P);
        for (const auto& c : inst.truth.clusters())
            for (int i : c) EXPECT_LE(spectral_norm(sol.P[static_cast<std::size_t>(i)] - sol.P[static_cast<std::size_t>(c[0])]), 1e-8 * scale);
        const MjsModel red = reduce_with_partition(inst.model, inst.truth);
        const auto rs = riccati_solve(red, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2));
        for (int i = 0; i < 8; ++i)
            EXPECT_LE(spectral_norm(sol.P[static_cast<std::size_t>(i)] - rs.P[static_cast<std::size_t>(inst.truth.cluster_of(i))]), 1e-8 * scale);
    }
}

// ---------------------------------------------------------------------------
// Costs

TEST(Cost, ZeroNoiseGivesZero) {
    const auto inst = lqr_instance(6, 2, 0.2, 0.2, 4);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    const auto sol = riccati_solve(inst.model, Q, R);
    EXPECT_EQ(closed_loop_average_cost(inst.model, sol.K, Q, R, 0.0).J_avg, 0.0);
    const auto mc = monte_carlo_cost(inst.model, sol.K, Q, R, 0.0, 200, 20, 50, 1, VectorXd::Ones(3));
    EXPECT_LE(mc.J_avg, 1e-12);
}

TEST(Cost, SingleModeMatchesTraceIdentity) {
    Rng rng = make_rng(5);
    const MjsModel m = MjsModel::with_inputs({random_scaled(3, 3, 1.3, rng)}, {gaussian_matrix(3, 2, rng)}, MatrixXd::Ones(1, 1));
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    const auto sol = riccati_solve(m, Q, R);
    const double sw = 0.7;
    EXPECT_NEAR(closed_loop_average_cost(m, sol.K, Q, R, sw).J_avg, sw * sw * sol.P[0].trace(), 1e-9 * sol.P[0].trace());
}

TEST(Cost, ClosedFormMatchesMonteCarlo) {
    const auto inst = lqr_instance(6, 2, 0.2, 0.2, 6);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    const auto sol = riccati_solve(inst.model, Q, R);
    const double cf = closed_loop_average_cost(inst.model, sol.K, Q, R, 0.5).J_avg;
    const auto mc = monte_carlo_cost(inst.model, sol.K, Q, R, 0.5, 10'100, 100, 100, 77);
    EXPECT_LE(std::abs(mc.J_avg - cf), 0.02 * cf);
    EXPECT_LE(std::abs(mc.J_avg - cf), 3.0 * mc.mc_stderr);
    EXPECT_FALSE(mc.diverged);
}

TEST(Cost, MonteCarloIsSeedDeterministic) {
    const auto inst = lqr_instance(6, 2, 0.2, 0.2, 7);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    const auto sol = riccati_solve(inst.model, Q, R);
    const auto a = monte_carlo_cost(inst.model, sol.K, Q, R, 0.3, 500, 8, 50, 12);
    const auto b = monte_carlo_cost(inst.model, sol.K, Q, R, 0.3, 500, 8, 50, 12);
    const auto c = monte_carlo_cost(inst.model, sol.K, Q, R, 0.3, 500, 8, 50, 13);
    EXPECT_EQ(a.J_avg, b.J_avg);
    EXPECT_EQ(a.mc_stderr, b.mc_stderr);
    EXPECT_NE(a.J_avg, c.J_avg);
}

TEST(Cost, UnstableLoopIsRejectedOrFlagged) {
    const auto inst = lqr_instance(4, 2, 0.1, 0.1, 8);
    const std::vector<MatrixXd> K(4, MatrixXd::Zero(2, 3));
    std::vector<MatrixXd> A = inst.model.A;
    for (auto& a : A) a = 3.0 * MatrixXd::Identity(3, 3);
    const MjsModel unstable = MjsModel::with_inputs(A, inst.model.B, inst.model.T);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    expect_errc(Errc::NotMss, [&] { closed_loop_average_cost(unstable, K, Q, R, 1.0); });
    expect_errc(Errc::NotMss, [&] { cumulative_cost_noisefree(unstable, K, Q, R, VectorXd::Ones(3)); });
    EXPECT_TRUE(monte_carlo_cost(unstable, K, Q, R, 1.0, 2000, 4, 0, 1).diverged);
}

TEST(CumulativeCost, ZeroInitialState) {
    const auto inst = lqr_instance(6, 2, 0.2, 0.2, 9);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    const auto sol = riccati_solve(inst.model, Q, R);
    EXPECT_EQ(cumulative_cost_noisefree(inst.model, sol.K, Q, R, VectorXd::Zero(3)), 0.0);
}

TEST(CumulativeCost, OptimalGainIsBellmanConsistent) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto inst = lqr_instance(6, 2, 0.2, 0.2, 10 + seed);
        const MatrixXd Q = MatrixXd::Identity(3, 3);
        const MatrixXd R = MatrixXd::Identity(2, 2);
        const auto sol = riccati_solve(inst.model, Q, R);
        const VectorXd x0 = (VectorXd(3) << 1.0, -0.5, 2.0).finished();
        const VectorXd pi = stationary_distribution(inst.model.T).pi;
        double want = 0.0;
        for (int i = 0; i < 6; ++i) want += pi(i) * x0.dot(sol.P[static_cast<std::size_t>(i)] * x0);
        EXPECT_NEAR(cumulative_cost_noisefree(inst.model, sol.K, Q, R, x0), want, 1e-8 * want);
    }
}

TEST(CumulativeCost, MatchesTruncatedExpectation) {
    const auto inst = lqr_instance(5, 1, 0.3, 0.3, 20);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    const auto sol = riccati_solve(inst.model, Q, R);
    const auto acl = closed_loop_matrices(inst.model, sol.K);
    const VectorXd x0 = VectorXd::Ones(3);
    const VectorXd pi = stationary_distribution(inst.model.T).pi;
    // Exact expected stage costs via per-mode weighted second moments M_i(t) = E[x x^T 1{w_t = i}].
    std::vector<MatrixXd> M(5);
    for (int i = 0; i < 5; ++i) M[static_cast<std::size_t>(i)] = pi(i) * x0 * x0.transpose();
    double total = 0.0;
    for (int t = 0; t <= 500; ++t) {
        std::vector<MatrixXd> next(5, MatrixXd::Zero(3, 3));
        for (int i = 0; i < 5; ++i) {
            const auto u = static_cast<std::size_t>(i);
            const MatrixXd stage = Q + sol.K[u].transpose() * R * sol.K[u];
            total += (stage * M[u]).trace();
            const MatrixXd prop = acl[u] * M[u] * acl[u].transpose();
            for (int j = 0; j < 5; ++j) next[static_cast<std::size_t>(j)] += inst.model.T(i, j) * prop;
        }
        M = std::move(next);
    }
    const double j = cumulative_cost_noisefree(inst.model, sol.K, Q, R, x0);
    EXPECT_NEAR(total, j, 1e-6 * j);
}

// ---------------------------------------------------------------------------
// Reduced controller

TEST(ReducedLqr, ExactReducibilityHasNoGap) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto inst = lqr_instance(12, 3, 0.0, 0.0, seed);
        const auto res = reduced_lqr_suboptimality(inst.model, 3, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2), 0.3, seed);
        EXPECT_EQ(res.partition.canonical(), inst.truth.canonical());
        EXPECT_LE(std::abs(res.gap), 1e-9 * res.J_star);
        EXPECT_GT(res.J_star, 0.0);
    }
}

TEST(ReducedLqr, GapIsNonNegative) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto inst = lqr_instance(12, 3, 0.15, 0.15, 100 + seed);
        for (int r : {1, 2, 3, 6}) {
            const auto res = reduced_lqr_suboptimality(inst.model, r, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2), 0.3, seed);
            EXPECT_GE(res.gap, -1e-9 * res.J_star) << "seed " << seed << " r=" << r;
        }
    }
}

TEST(ReducedLqr, FullResolutionHasNoGap) {
    const auto inst = lqr_instance(8, 2, 0.2, 0.2, 30);
    ReducedLqrOptions o;
    o.partition = Partition::singletons(8);
    const auto res = reduced_lqr_suboptimality(inst.model, 8, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2), 0.3, 1, o);
    EXPECT_LE(std::abs(res.gap), 1e-9 * res.J_star);
}

TEST(ReducedLqr, ZeroNoiseZeroCost) {
    const auto inst = lqr_instance(12, 3, 0.1, 0.1, 31);
    const auto res = reduced_lqr_suboptimality(inst.model, 3, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2), 0.0, 1);
    EXPECT_LE(std::abs(res.J_star), 1e-10);
    EXPECT_LE(std::abs(res.J_hat), 1e-10);
}

TEST(ReducedLqr, GainsLiftByClusterMembership) {
    const Partition p({{0, 3}, {1, 2, 4}}, 5);
    const std::vector<MatrixXd> K_hat = {MatrixXd::Constant(1, 2, 1.0), MatrixXd::Constant(1, 2, 2.0)};
    const auto K = lift_gains(K_hat, p);
    ASSERT_EQ(K.size(), 5u);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(K[static_cast<std::size_t>(i)](0, 0), p.cluster_of(i) == 0 ? 1.0 : 2.0);
}

TEST(ReducedLqr, ReducedSolveIsFaster) {
    const auto inst = lqr_instance(100, 4, 0.1, 0.1, 5);
    const auto res = reduced_lqr_suboptimality(inst.model, 4, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2), 0.3, 5);
    EXPECT_LT(res.time_reduced_ms, res.time_full_ms);
}
