#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mjsred/error.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"
#include "mjsred/simulate.hpp"

namespace mjsred {

/// Finite distribution of x_t over the reachable set.
struct KernelDistribution {
    std::vector<VectorXd> support;
    std::vector<double> mass;
    int horizon = 0;
};

inline constexpr long long kDefaultSequenceCap = 200'000;

/// Merges support points closer than tol (Euclidean); merged points keep the first representative
/// in lexicographic order and accumulate mass.
inline KernelDistribution merge_support(std::vector<VectorXd> pts, std::vector<double> mass, double tol) {
    const auto m = pts.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = pts[a];
        const auto& y = pts[b];
        for (Eigen::Index k = 0; k < x.size(); ++k)
            if (x(k) != y(k)) return x(k) < y(k);
        return a < b;
    });
    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t u = 0; u < m; ++u) {
        for (std::size_t v = u + 1; v < m; ++v) {
            const auto& x = pts[order[u]];
            const auto& y = pts[order[v]];
            if (x.size() > 0 && y(0) - x(0) > tol) break;
            if ((x - y).norm() <= tol) {
                const auto ru = find(u);
                const auto rv = find(v);
                if (ru != rv) parent[std::max(ru, rv)] = std::min(ru, rv);
            }
        }
    }
    KernelDistribution out;
    std::vector<long> slot(m, -1);
    for (std::size_t u = 0; u < m; ++u) {
        const auto root = find(u);
        if (slot[root] < 0) {
            slot[root] = static_cast<long>(out.support.size());
            out.support.push_back(pts[order[root]]);
            out.mass.push_back(0.0);
        }
        out.mass[static_cast<std::size_t>(slot[root])] += mass[order[u]];
    }
    return out;
}

/// Enumerates every mode path of length t and the state each one produces (autonomous dynamics).
inline KernelDistribution transition_kernel_enum(const MjsModel& model, const VectorXd& x0, int t, const VectorXd& p0,
                                                 long long cap = kDefaultSequenceCap) {
    require_valid(model);
    if (x0.size() != model.n) raise(Errc::DimensionMismatch, "x0 has wrong length");
    if (p0.size() != model.s) raise(Errc::DimensionMismatch, "initial mode distribution has wrong length");
    if (t < 0) raise(Errc::DegenerateInput, "negative horizon");
    double count = std::pow(static_cast<double>(model.s), t);
    if (count > static_cast<double>(cap))
        raise(Errc::TooManySequences, std::to_string(model.s) + "^" + std::to_string(t) + " sequences exceed the cap");
    const double tol = 1e-10 * std::max(1.0, x0.norm());
    if (t == 0) {
        KernelDistribution k;
        k.support.push_back(x0);
        k.mass.push_back(1.0);
        return k;
    }
    std::vector<VectorXd> pts;
    std::vector<double> mass;
    // Depth-first with cached prefixes; the last mode decides the next transition row.
    struct Frame {
        VectorXd x;
        double q;
        int mode;
        int depth;
    };
    std::vector<Frame> stack;
    for (int i = model.s - 1; i >= 0; --i)
        if (p0(i) > 0.0) stack.push_back({model.A[static_cast<std::size_t>(i)] * x0, p0(i), i, 1});
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (f.depth == t) {
            pts.push_back(std::move(f.x));
            mass.push_back(f.q);
            continue;
        }
        for (int j = model.s - 1; j >= 0; --j) {
            const double pj = model.T(f.mode, j);
            if (pj > 0.0) stack.push_back({model.A[static_cast<std::size_t>(j)] * f.x, f.q * pj, j, f.depth + 1});
        }
    }
    KernelDistribution k = merge_support(std::move(pts), std::move(mass), tol);
    k.horizon = t;
    return k;
}

inline KernelDistribution transition_kernel_enum(const MjsModel& model, const VectorXd& x0, int t,
                                                 const InitialModeDist& init = InitialModeDist::stationary(),
                                                 long long cap = kDefaultSequenceCap) {
    return transition_kernel_enum(model, x0, t, initial_mode_probs(model.T, init), cap);
}

/// Cluster marginals of a mode distribution.
inline VectorXd aggregate_distribution(const VectorXd& p, const Partition& partition) {
    VectorXd out = VectorXd::Zero(partition.num_clusters());
    for (int i = 0; i < p.size(); ++i) out(partition.cluster_of(i)) += p(i);
    return out;
}

struct TransportResult {
    double distance = 0.0;
    double cost = 0.0;
    MatrixXd flow;
};

/// Exact optimal transport between two finite distributions with cost ||x - y||^ell,
/// by successive shortest paths with Dijkstra potentials. Returns cost^{1/ell}.
inline TransportResult wasserstein_exact(const KernelDistribution& p, const KernelDistribution& q, double ell = 1.0) {
    if (!(ell >= 1.0)) raise(Errc::DegenerateInput, "ell must be at least 1");
    const auto m = static_cast<int>(p.support.size());
    const auto n = static_cast<int>(q.support.size());
    if (m == 0 || n == 0) raise(Errc::NotNormalized, "empty distribution");
    if (m > 5000 || n > 5000) raise(Errc::TooLarge, "support exceeds 5000 points");
    const double sp = std::accumulate(p.mass.begin(), p.mass.end(), 0.0);
    const double sq = std::accumulate(q.mass.begin(), q.mass.end(), 0.0);
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) raise(Errc::NotNormalized, "masses must sum to 1");
    for (double v : p.mass)
        if (v < 0.0) raise(Errc::NotNormalized, "negative mass");
    for (double v : q.mass)
        if (v < 0.0) raise(Errc::NotNormalized, "negative mass");

    MatrixXd cost(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = (p.support[static_cast<std::size_t>(i)] - q.support[static_cast<std::size_t>(j)]).norm();
            cost(i, j) = ell == 1.0 ? d : std::pow(d, ell);
        }

    // Supply is rescaled so both sides carry the same total.
    std::vector<double> supply(p.mass.begin(), p.mass.end());
    std::vector<double> demand(q.mass.begin(), q.mass.end());
    for (auto& v : demand) v *= sp / sq;
    const double zero = 1e-15;

    TransportResult out;
    out.flow = MatrixXd::Zero(m, n);
    // Node layout: 0..m-1 sources, m..m+n-1 sinks, m+n sink terminal. The super source is implicit.
    const int V = m + n + 1;
    const int term = m + n;
    std::vector<double> pot(static_cast<std::size_t>(V), 0.0);
    const double inf = std::numeric_limits<double>::infinity();
    double remaining = sp;
    for (int guard = 0; remaining > 1e-14 && guard < 4 * (m + n) * (m + n) + 16; ++guard) {
        std::vector<double> dist(static_cast<std::size_t>(V), inf);
        std::vector<int> prev(static_cast<std::size_t>(V), -1);
        std::vector<bool> done(static_cast<std::size_t>(V), false);
        for (int i = 0; i < m; ++i)
            if (supply[static_cast<std::size_t>(i)] > zero) dist[static_cast<std::size_t>(i)] = 0.0 - pot[static_cast<std::size_t>(i)];
        // Reduced source distances: the implicit super source has potential 0.
        for (int i = 0; i < m; ++i)
            if (dist[static_cast<std::size_t>(i)] < inf) dist[static_cast<std::size_t>(i)] = std::max(0.0, dist[static_cast<std::size_t>(i)]);
        for (;;) {
            int u = -1;
            double best = inf;
            for (int v = 0; v < V; ++v)
                if (!done[static_cast<std::size_t>(v)] && dist[static_cast<std::size_t>(v)] < best) {
                    best = dist[static_cast<std::size_t>(v)];
                    u = v;
                }
            if (u < 0) break;
            done[static_cast<std::size_t>(u)] = true;
            if (u == term) break;
            auto relax = [&](int v, double c) {
                const double rc = std::max(0.0, c + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(v)]);
                if (dist[static_cast<std::size_t>(u)] + rc < dist[static_cast<std::size_t>(v)]) {
                    dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + rc;
                    prev[static_cast<std::size_t>(v)] = u;
                }
            };
            if (u < m) {
                for (int j = 0; j < n; ++j)
                    if (!done[static_cast<std::size_t>(m + j)]) relax(m + j, cost(u, j));
            } else {
                const int j = u - m;
                for (int i = 0; i < m; ++i)
                    if (!done[static_cast<std::size_t>(i)] && out.flow(i, j) > zero) relax(i, -cost(i, j));
                if (demand[static_cast<std::size_t>(j)] > zero && !done[static_cast<std::size_t>(term)]) relax(term, 0.0);
            }
        }
        if (!(dist[static_cast<std::size_t>(term)] < inf)) break;
        const double dt = dist[static_cast<std::size_t>(term)];
        for (int v = 0; v < V; ++v)
            pot[static_cast<std::size_t>(v)] += std::min(dist[static_cast<std::size_t>(v)], dt);

        // Bottleneck along the path term <- sink <- ... <- source.
        int v = prev[static_cast<std::size_t>(term)];
        double delta = demand[static_cast<std::size_t>(v - m)];
        int w = v;
        while (prev[static_cast<std::size_t>(w)] >= 0) {
            const int u = prev[static_cast<std::size_t>(w)];
            if (u >= m) delta = std::min(delta, out.flow(w, u - m));  // backward edge sink u -> source w
            w = u;
        }
        delta = std::min(delta, supply[static_cast<std::size_t>(w)]);
        supply[static_cast<std::size_t>(w)] -= delta;
        demand[static_cast<std::size_t>(v - m)] -= delta;
        w = v;
        while (prev[static_cast<std::size_t>(w)] >= 0) {
            const int u = prev[static_cast<std::size_t>(w)];
            if (u < m)
                out.flow(u, w - m) += delta;
            else
                out.flow(w, u - m) = std::max(0.0, out.flow(w, u - m) - delta);
            w = u;
        }
        remaining -= delta;
    }
    out.cost = (out.flow.array() * cost.array()).sum();
    out.cost = std::max(out.cost, 0.0);
    out.distance = std::pow(out.cost, 1.0 / ell);
    return out;
}

inline VectorXd kernel_mean(const KernelDistribution& k) {
    VectorXd mu = VectorXd::Zero(k.support.front().size());
    for (std::size_t i = 0; i < k.support.size(); ++i) mu += k.mass[i] * k.support[i];
    return mu;
}

inline MatrixXd kernel_covariance(const KernelDistribution& k) {
    const VectorXd mu = kernel_mean(k);
    MatrixXd s = MatrixXd::Zero(mu.size(), mu.size());
    for (std::size_t i = 0; i < k.support.size(); ++i) {
        const VectorXd d = k.support[i] - mu;
        s += k.mass[i] * d * d.transpose();
    }
    return s;
}

/// Bures term tr(S + S_hat - 2 (S^{1/2} S_hat S^{1/2})^{1/2}).
inline double bures_distance_sq(const MatrixXd& s, const MatrixXd& s_hat) {
    const MatrixXd r = psd_sqrt(s);
    const MatrixXd inner = psd_sqrt(r * s_hat * r);
    return std::max(0.0, (s + s_hat - 2.0 * inner).trace());
}

} // namespace mjsred
