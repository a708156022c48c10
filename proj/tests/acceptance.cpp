// Acceptance checks: one PASS/FAIL line per criterion. Exit status is nonzero when any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mjsred/mjsred.hpp"

using namespace mjsred;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Timer {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

SynthConfig base_config(int s, int r, Branch b, std::uint64_t seed) {
    SynthConfig c;
    c.s = s;
    c.r = r;
    c.branch = b;
    c.seed = seed;
    return c;
}

SynthConfig lqr_config(int s, int r, double eps, std::uint64_t seed) {
    SynthConfig c = base_config(s, r, Branch::Aggregatable, seed);
    c.n = 3;
    c.p = 2;
    c.eps_A = c.eps_B = c.eps_T = eps;
    c.base_A_norm = 1.1;
    return c;
}

double max_norm(const std::vector<MatrixXd>& P) {
    double m = 0.0;
    for (const auto& p : P) m = std::max(m, spectral_norm(p));
    return m;
}

// ---------------------------------------------------------------------------

Outcome exact_round_trip() {
    Timer timer;
    Outcome o;
    int runs = 0;
    int mr_fail = 0;
    int model_fail = 0;
    int traj_fail = 0;
    double worst_model = 0.0;
    double worst_traj = 0.0;
    const int sizes[][2] = {{8, 2}, {12, 3}, {16, 4}, {24, 4}, {32, 4}};
    for (Branch b : {Branch::Aggregatable, Branch::Lumpable}) {
        for (int k = 0; k < 50; ++k) {
            const int s = sizes[k % 5][0];
            const int r = sizes[k % 5][1];
            const auto inst = generate(base_config(s, r, b, static_cast<std::uint64_t>(1000 + k)));
            ReduceOptions opts;
            opts.seed = static_cast<std::uint64_t>(k);
            const auto res = reduce(inst.model, r, opts);
            ++runs;
            const auto match = best_matching(res.partition, inst.truth);
            if (match.mr != 0.0) ++mr_fail;
            double gap = 0.0;
            for (int a = 0; a < r; ++a) {
                const auto ha = static_cast<std::size_t>(match.h[static_cast<std::size_t>(a)]);
                gap = std::max(gap, (res.reduced.A[ha] - inst.base.A[static_cast<std::size_t>(a)]).cwiseAbs().maxCoeff());
                gap = std::max(gap, (res.reduced.B[ha] - inst.base.B[static_cast<std::size_t>(a)]).cwiseAbs().maxCoeff());
                for (int l = 0; l < r; ++l)
                    gap = std::max(gap, std::abs(res.reduced.T(static_cast<Eigen::Index>(ha), match.h[static_cast<std::size_t>(l)]) -
                                                 inst.base.T(a, l)));
            }
            worst_model = std::max(worst_model, gap);
            if (gap > 1e-10) ++model_fail;
            Rng rng = make_rng(static_cast<std::uint64_t>(k), 9);
            const VectorXd x0 = gaussian_matrix(5, 1, rng);
            InputSequence u;
            for (int t = 0; t < 50; ++t) u.u.push_back(gaussian_matrix(3, 1, rng));
            const auto [full, red] = simulate_coupled(inst.model, res.reduced, res.partition, x0, u, 50,
                                                      static_cast<std::uint64_t>(k));
            double d = 0.0;
            for (int t = 0; t <= 50; ++t)
                d = std::max(d, (full.states[static_cast<std::size_t>(t)] - red.states[static_cast<std::size_t>(t)]).norm());
            worst_traj = std::max(worst_traj, d / x0.norm());
            if (d > 1e-10 * x0.norm()) ++traj_fail;
        }
    }
    const double secs = timer.seconds();
    o.pass = mr_fail == 0 && model_fail == 0 && traj_fail == 0 && secs < 60.0;
    o.detail = std::to_string(runs) + " runs, MR>0 in " + std::to_string(mr_fail) + ", model gap max " + num(worst_model) +
               ", trajectory gap max " + num(worst_traj) + " relative, " + num(secs) + " s";
    return o;
}

Outcome zero_mr_regime() {
    Outcome o;
    std::ostringstream d;
    for (Branch b : {Branch::Aggregatable, Branch::Lumpable}) {
        int qualified = 0;
        int zero = 0;
        int drawn = 0;
        double formula_err = 0.0;
        // The lumpable constant gamma_3 scales like 1 / pi_min^2, so its threshold is far smaller.
        const double level = b == Branch::Aggregatable ? 1e-4 : 1e-10;
        for (std::uint64_t seed = 0; qualified < 100 && seed < 1000; ++seed) {
            ++drawn;
            SynthConfig c = base_config(16, 4, b, 2000 + seed);
            c.eps_A = c.eps_B = c.eps_T = level;
            c.reversible = b == Branch::Lumpable;
            const auto inst = generate(c);
            const auto rep = mr_bound(inst.model, inst.truth, b);
            const double big = inst.truth.largest_size();
            const double sr = rep.sigma_r_phibar;
            const double want = 64.0 * 3.0 * rep.eps_combined * rep.eps_combined / (sr * sr);
            formula_err = std::max(formula_err, std::abs(rep.bound_value - want) / std::max(want, 1e-300));
            formula_err = std::max(formula_err, std::abs(rep.threshold_zero - sr / (8.0 * std::sqrt(3.0 * big))) / sr);
            if (!rep.below_threshold_zero) continue;
            ++qualified;
            ReduceOptions opts;
            opts.branch = b;
            opts.seed = seed;
            if (misclustering_rate(reduce(inst.model, 4, opts).partition, inst.truth) == 0.0) ++zero;
        }
        const bool ok = qualified == 100 && zero == 100 && formula_err <= 1e-12;
        o.pass = o.pass && ok;
        d << branch_name(b) << " at level " << num(level) << ": " << zero << "/" << qualified << " zero-MR among below-threshold seeds ("
          << drawn << " drawn), formula error " << num(formula_err) << "; ";
    }
    o.detail = d.str();
    return o;
}

Outcome expanded_radius() {
    Outcome o;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SynthConfig c = base_config(seed % 2 == 0 ? 12 : 8, seed % 3 == 0 ? 4 : 2, seed % 4 < 2 ? Branch::Aggregatable : Branch::Lumpable,
                                    3000 + seed);
        c.n = 1 + static_cast<int>(seed % 3);
        c.p = 1;
        c.eps_A = 0.5;
        c.eps_T = seed % 5 == 0 ? 0.0 : 2.0;
        const auto inst = generate(c);
        const MjsModel red = reduce_with_partition(inst.model, inst.truth);
        const auto t0 = construct_T0(inst.model.T, inst.truth, 1e3);
        const MjsModel expanded = expand_reduced(red, inst.truth, t0.T0);
        worst = std::max(worst, std::abs(spectral_radius(augmented_matrix(red)) - spectral_radius(augmented_matrix(expanded))));
    }
    o.pass = worst <= 1e-8;
    o.detail = "max |rho(reduced) - rho(expanded)| = " + num(worst) + " over 50 instances";
    return o;
}

Outcome lqr_sanity() {
    Outcome o;
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    double worst_p = 0.0;
    double worst_gap = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = generate(lqr_config(12, 3, 0.0, 4000 + seed));
        const auto sol = riccati_solve(inst.model, Q, R);
        const double scale = max_norm(sol.P);
        for (const auto& cl : inst.truth.clusters())
            for (int i : cl)
                worst_p = std::max(worst_p, spectral_norm(sol.P[static_cast<std::size_t>(i)] - sol.P[static_cast<std::size_t>(cl[0])]) / scale);
        ReducedLqrOptions lo;
        lo.partition = inst.truth;
        const auto res = reduced_lqr_suboptimality(inst.model, 3, Q, R, 0.1, seed, lo);
        worst_gap = std::max(worst_gap, res.gap / res.J_star);
    }
    double p = 1.0;
    for (int i = 0; i < 100000; ++i) {
        const double next = 1.0 + 0.25 * p - 0.25 * p * p / (1.0 + p);
        const bool done = std::abs(next - p) < 1e-15;
        p = next;
        if (done) break;
    }
    const MjsModel scalar = MjsModel::with_inputs({MatrixXd::Constant(1, 1, 0.5)}, {MatrixXd::Ones(1, 1)}, MatrixXd::Ones(1, 1));
    const double scalar_err = std::abs(riccati_solve(scalar, MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)).P[0](0, 0) - p);
    o.pass = worst_p <= 1e-8 && worst_gap <= 1e-9 && scalar_err <= 1e-10;
    o.detail = "cluster P spread " + num(worst_p) + " relative, max gap/J* " + num(worst_gap) + ", scalar oracle error " +
               num(scalar_err) + " (p = " + num(p) + ")";
    return o;
}

Outcome fig4_replication() {
    Timer timer;
    Outcome o;
    const auto inst = fig4_model();
    const MjsModel red = reduce_with_partition(inst.model, inst.truth);
    const VectorXd x0 = VectorXd::Ones(2);
    BoundsConfig cfg;
    cfg.skip_uniform = true;
    const auto in = make_bound_inputs(inst.model, inst.truth, x0, cfg);
    const auto st = empirical_traj_diff(inst.model, red, inst.truth, x0, 25, 500, 0);
    int violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t <= 25; ++t) {
        const double bnd = mss_traj_bound(in, t).value;
        if (st.mean[static_cast<std::size_t>(t)] > bnd) ++violations;
        if (t > 0) min_margin = std::min(min_margin, bnd / st.mean[static_cast<std::size_t>(t)]);
    }
    const double rho = spectral_radius(augmented_matrix(inst.model));
    const double jsr_lo = jsr_bounds(inst.model.A, 6).lower;
    const double secs = timer.seconds();
    o.pass = violations == 0 && rho < 1.0 && jsr_lo > 1.0 && secs < 120.0;
    o.detail = std::to_string(violations) + " violations over t <= 25, min bound/mean " + num(min_margin) + ", rho " + num(rho) +
               ", jsr lower " + num(jsr_lo) + ", " + num(secs) + " s";
    return o;
}

Outcome uniform_dominance() {
    Outcome o;
    int instances = 0;
    int tried = 0;
    int violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; instances < 100 && seed < 400; ++seed) {
        ++tried;
        SynthConfig c = base_config(6, 2, seed % 2 == 0 ? Branch::Aggregatable : Branch::Lumpable, 5000 + seed);
        c.n = 2;
        c.p = 0;
        c.base_A_norm = 0.6;
        c.eps_A = 0.02 + 0.08 * static_cast<double>(seed % 5) / 4.0;
        c.eps_T = 0.3;
        const auto inst = generate(c);
        const VectorXd x0 = VectorXd::Ones(2);
        BoundsConfig cfg;
        cfg.jsr_k_max = 6;
        const auto in = make_bound_inputs(inst.model, inst.truth, x0, cfg);
        if (!us_traj_bound(in, 1).premises_ok) continue;
        ++instances;
        const MjsModel red = reduce_with_partition(inst.model, inst.truth);
        const auto st = empirical_traj_diff(inst.model, red, inst.truth, x0, 30, 100, seed);
        for (int t = 0; t <= 30; ++t) {
            const double bnd = us_traj_bound(in, t).value;
            const double m = st.max[static_cast<std::size_t>(t)];
            if (m > bnd) ++violations;
            if (m > 0.0) min_margin = std::min(min_margin, bnd / m);
        }
    }
    o.pass = instances == 100 && violations == 0;
    o.detail = std::to_string(instances) + " premise-satisfying instances (of " + std::to_string(tried) + " tried), " +
               std::to_string(violations) + " violations, min bound/max-diff " + num(min_margin);
    return o;
}

/// Optimal transport cost by enumerating every basic feasible solution (spanning trees of the bipartite support graph).
double brute_force_transport(const KernelDistribution& p, const KernelDistribution& q, double ell) {
    const int m = static_cast<int>(p.mass.size());
    const int n = static_cast<int>(q.mass.size());
    std::vector<std::pair<int, int>> cells;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) cells.emplace_back(i, j);
    std::vector<int> chosen;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> parent(static_cast<std::size_t>(m + n));
    const auto find = [&](auto&& self, int x) -> int {
        return parent[static_cast<std::size_t>(x)] == x ? x : self(self, parent[static_cast<std::size_t>(x)]);
    };
    const auto evaluate = [&] {
        std::vector<double> rem(static_cast<std::size_t>(m + n));
        for (int i = 0; i < m; ++i) rem[static_cast<std::size_t>(i)] = p.mass[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) rem[static_cast<std::size_t>(m + j)] = q.mass[static_cast<std::size_t>(j)];
        std::vector<int> deg(static_cast<std::size_t>(m + n), 0);
        std::vector<bool> used(chosen.size(), false);
        for (int c : chosen) {
            ++deg[static_cast<std::size_t>(cells[static_cast<std::size_t>(c)].first)];
            ++deg[static_cast<std::size_t>(m + cells[static_cast<std::size_t>(c)].second)];
        }
        double cost = 0.0;
        for (std::size_t step = 0; step < chosen.size(); ++step) {
            std::size_t pick = chosen.size();
            int leaf = -1;
            for (std::size_t e = 0; e < chosen.size() && pick == chosen.size(); ++e) {
                if (used[e]) continue;
                const auto [i, j] = cells[static_cast<std::size_t>(chosen[e])];
                if (deg[static_cast<std::size_t>(i)] == 1) {
                    pick = e;
                    leaf = i;
                } else if (deg[static_cast<std::size_t>(m + j)] == 1) {
                    pick = e;
                    leaf = m + j;
                }
            }
            const auto [i, j] = cells[static_cast<std::size_t>(chosen[pick])];
            const double x = rem[static_cast<std::size_t>(leaf)];
            if (x < -1e-12) return;
            const int other = leaf == i ? m + j : i;
            rem[static_cast<std::size_t>(leaf)] = 0.0;
            rem[static_cast<std::size_t>(other)] -= x;
            --deg[static_cast<std::size_t>(i)];
            --deg[static_cast<std::size_t>(m + j)];
            used[pick] = true;
            cost += x * std::pow((p.support[static_cast<std::size_t>(i)] - q.support[static_cast<std::size_t>(j)]).norm(), ell);
        }
        best = std::min(best, cost);
    };
    const int need = m + n - 1;
    const auto dfs = [&](auto&& self, int start) -> void {
        if (static_cast<int>(chosen.size()) == need) {
            evaluate();
            return;
        }
        for (int c = start; c < static_cast<int>(cells.size()); ++c) {
            if (static_cast<int>(cells.size()) - c < need - static_cast<int>(chosen.size())) return;
            const std::vector<int> saved = parent;
            const int a = find(find, cells[static_cast<std::size_t>(c)].first);
            const int b = find(find, m + cells[static_cast<std::size_t>(c)].second);
            if (a == b) continue;
            parent[static_cast<std::size_t>(a)] = b;
            chosen.push_back(c);
            self(self, c + 1);
            chosen.pop_back();
            parent = saved;
        }
    };
    std::iota(parent.begin(), parent.end(), 0);
    dfs(dfs, 0);
    return best;
}

KernelDistribution random_kernel(int m, Rng& rng) {
    KernelDistribution k;
    const VectorXd w = flat_dirichlet(m, rng);
    for (int i = 0; i < m; ++i) {
        k.support.push_back(gaussian_matrix(2, 1, rng));
        k.mass.push_back(w(i));
    }
    return k;
}

Outcome wasserstein_checks() {
    Outcome o;
    Rng rng = make_rng(6000);
    double worst_exact = 0.0;
    int cases = 0;
    while (cases < 50) {
        const int m = 1 + static_cast<int>(uniform01(rng) * 6.0);
        const int n = 1 + static_cast<int>(uniform01(rng) * 6.0);
        if (std::pow(m, n - 1) * std::pow(n, m - 1) > 3e5) continue;
        const auto p = random_kernel(m, rng);
        const auto q = random_kernel(n, rng);
        for (double ell : {1.0, 2.0}) {
            const double bf = std::pow(brute_force_transport(p, q, ell), 1.0 / ell);
            worst_exact = std::max(worst_exact, std::abs(wasserstein_exact(p, q, ell).distance - bf));
        }
        ++cases;
    }
    int bound_checks = 0;
    int bound_fail = 0;
    double worst_zero = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (double level : {0.0, 0.1}) {
            SynthConfig c = base_config(4, 2, seed % 2 == 0 ? Branch::Aggregatable : Branch::Lumpable, 7000 + seed);
            c.n = 2;
            c.p = 0;
            c.base_A_norm = 0.6;
            c.eps_A = level;
            c.eps_T = 2.0 * level;
            const auto inst = generate(c);
            const MjsModel red = reduce_with_partition(inst.model, inst.truth);
            const VectorXd x0 = VectorXd::Ones(2);
            const VectorXd p0 = stationary_distribution(inst.model.T).pi;
            const VectorXd q0 = aggregate_distribution(p0, inst.truth);
            const auto in = make_bound_inputs(inst.model, inst.truth, x0);
            for (int t = 0; t <= 3; ++t) {
                const double w = wasserstein_exact(transition_kernel_enum(inst.model, x0, t, p0),
                                                   transition_kernel_enum(red, x0, t, q0), 1.0)
                                     .distance;
                if (level == 0.0) {
                    worst_zero = std::max(worst_zero, w);
                } else {
                    ++bound_checks;
                    if (w > wasserstein_bound(in, t, 1.0).value) ++bound_fail;
                }
            }
        }
    }
    o.pass = worst_exact <= 1e-9 && bound_fail == 0 && worst_zero <= 1e-9;
    o.detail = "exact vs vertex enumeration max error " + num(worst_exact) + " on 50 cases, bound violated " +
               std::to_string(bound_fail) + "/" + std::to_string(bound_checks) + ", max W1 at zero perturbation " + num(worst_zero);
    return o;
}

Outcome lqr_cost_cross_validation() {
    Outcome o;
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(2, 2);
    double worst = 0.0;
    int loops = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = generate(lqr_config(6, 2, 0.2, 8000 + seed));
        const auto sol = riccati_solve(inst.model, Q, R);
        const double cf = closed_loop_average_cost(inst.model, sol.K, Q, R, 0.5).J_avg;
        const auto mc = monte_carlo_cost(inst.model, sol.K, Q, R, 0.5, 10'100, 100, 100, seed);
        worst = std::max(worst, std::abs(mc.J_avg - cf) / cf);
        ++loops;
    }
    o.pass = worst <= 0.02;
    o.detail = "max relative closed-form vs Monte Carlo gap " + num(worst) + " over " + std::to_string(loops) + " loops";
    return o;
}

Outcome trend_replication() {
    Outcome o;
    std::ostringstream d;
    // (a) MR vs perturbation level.
    ExperimentSpec f2;
    f2.name = "fig2";
    const CsvData fig2 = parse_csv(run_fig2(f2).str());
    int series_bad = 0;
    int zero_bad = 0;
    std::string first_bad;
    for (std::size_t i = 0; i < fig2.rows.size(); ++i) {
        const auto& row = fig2.rows[i];
        const double eps = std::stod(row[1]);
        const double med = std::stod(row[3]);
        if (eps == 0.0 && med != 0.0) {
            ++zero_bad;
            if (first_bad.empty()) first_bad = row[2] + "/" + row[6] + " s=" + row[0] + " median " + row[3] + " at 0";
        }
        if (i > 0) {
            const auto& prev = fig2.rows[i - 1];
            const bool same = prev[0] == row[0] && prev[2] == row[2] && prev[6] == row[6];
            if (same && med < std::stod(prev[3])) {
                ++series_bad;
                if (first_bad.empty()) first_bad = row[2] + "/" + row[6] + " s=" + row[0] + " drops at " + row[1];
            }
        }
    }
    const bool a_ok = series_bad == 0 && zero_bad == 0;
    d << "(a) " << (a_ok ? "ok" : "fails") << ": " << series_bad << " decreases, " << zero_bad << " nonzero zero-columns";
    if (!first_bad.empty()) d << " [" << first_bad << "]";
    // (b) Suboptimality vs reduced size.
    ExperimentSpec t2;
    t2.name = "table2";
    const CsvData table2 = parse_csv(run_table2(t2).str());
    int argmin = -1;
    double best = std::numeric_limits<double>::infinity();
    double at_r = std::numeric_limits<double>::quiet_NaN();
    double at_s = std::numeric_limits<double>::quiet_NaN();
    for (const auto& row : table2.rows) {
        const int rh = std::stoi(row[0]);
        const double v = std::stod(row[1]);
        if (rh < 40 && v < best) {
            best = v;
            argmin = rh;
        }
        if (rh == 12) at_r = v;
        if (rh == 40) at_s = v;
    }
    const bool b_ok = argmin == 12 && std::abs(at_s) <= 1e-12;
    d << "; (b) " << (b_ok ? "ok" : "fails") << ": minimum over r_hat < s at r_hat=" << argmin << " (" << num(best)
      << "), value at r_hat=12 " << num(at_r) << ", at r_hat=40 " << num(at_s);
    // (c) Riccati timing.
    ExperimentSpec f3;
    f3.name = "fig3b";
    const CsvData fig3 = parse_csv(run_fig3b(f3).str());
    int largest = 0;
    for (const auto& row : fig3.rows) largest = std::max(largest, std::stoi(row[0]));
    bool c_ok = true;
    std::string times;
    for (const auto& row : fig3.rows) {
        if (std::stoi(row[0]) != largest) continue;
        c_ok = c_ok && std::stod(row[3]) < std::stod(row[2]);
        times += " r=" + row[1] + ": " + num(std::stod(row[3])) + " vs " + num(std::stod(row[2])) + " ms";
    }
    d << "; (c) " << (c_ok ? "ok" : "fails") << " at s=" << largest << ":" << times;
    o.pass = a_ok && b_ok && c_ok;
    o.detail = d.str();
    return o;
}

Outcome invariant_suite() {
    Timer timer;
    Outcome o;
    std::istringstream list(MJSRED_TEST_BINARIES);
    std::string bin;
    std::vector<std::string> failed;
    int count = 0;
    while (std::getline(list, bin, '|')) {
        if (bin.empty()) continue;
        ++count;
        const std::string cmd = "\"" + bin + "\" --gtest_brief=1 >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed.push_back(bin.substr(bin.find_last_of('/') + 1));
    }
    const double secs = timer.seconds();
    o.pass = failed.empty() && secs < 600.0;
    o.detail = std::to_string(count - static_cast<int>(failed.size())) + "/" + std::to_string(count) + " suites green";
    if (!failed.empty()) {
        o.detail += ", failing:";
        for (const auto& f : failed) o.detail += " " + f;
    }
    o.detail += ", " + num(secs) + " s";
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"exact-reducibility round trip", exact_round_trip},
        {"zero-misclustering regime", zero_mr_regime},
        {"reduced vs expanded spectral radius", expanded_radius},
        {"reducible LQR sanity", lqr_sanity},
        {"six-mode trajectory bound", fig4_replication},
        {"uniform-stability dominance", uniform_dominance},
        {"Wasserstein exactness and bound", wasserstein_checks},
        {"LQR cost cross-validation", lqr_cost_cross_validation},
        {"trend replication", trend_replication},
        {"invariant suite", invariant_suite},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        if (!out.pass) ++failures;
        std::cout << (out.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << out.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria pass"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
