#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mjsred/error.hpp"
#include "mjsred/linalg.hpp"

namespace mjsred {

/// Markov jump linear system x_{t+1} = A_{w_t} x_t + B_{w_t} u_t with w_t ~ MarkovChain(T).
struct MjsModel {
    int n = 0;
    int p = 0;
    int s = 0;
    std::vector<MatrixXd> A;
    std::vector<MatrixXd> B;
    MatrixXd T;

    /// Model with zero input matrices (p = 0).
    static MjsModel autonomous(std::vector<MatrixXd> a, MatrixXd t) {
        MjsModel m;
        m.s = static_cast<int>(a.size());
        m.n = m.s > 0 ? static_cast<int>(a.front().rows()) : 0;
        m.p = 0;
        m.B.assign(a.size(), MatrixXd::Zero(m.n, 0));
        m.A = std::move(a);
        m.T = std::move(t);
        return m;
    }

    static MjsModel with_inputs(std::vector<MatrixXd> a, std::vector<MatrixXd> b, MatrixXd t) {
        MjsModel m;
        m.s = static_cast<int>(a.size());
        m.n = m.s > 0 ? static_cast<int>(a.front().rows()) : 0;
        m.p = !b.empty() ? static_cast<int>(b.front().cols()) : 0;
        m.A = std::move(a);
        m.B = std::move(b);
        m.T = std::move(t);
        return m;
    }
};

struct Violation {
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    [[nodiscard]] bool ok() const { return violations.empty(); }
    [[nodiscard]] std::string summary() const {
        std::string out;
        for (const auto& v : violations) {
            if (!out.empty()) out += "; ";
            out += v.message;
        }
        return out;
    }
};

namespace detail {
inline bool all_finite(const MatrixXd& m) { return m.size() == 0 || m.allFinite(); }

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}
} // namespace detail

/// Lists every violated model invariant. Modes and rows are reported 1-based.
inline ValidationReport validate_model(const MjsModel& model) {
    ValidationReport rep;
    auto add = [&](std::string msg) { rep.violations.push_back({std::move(msg)}); };

    if (model.n <= 0) add("n must be positive, got " + std::to_string(model.n));
    if (model.p < 0) add("p must be non-negative, got " + std::to_string(model.p));
    if (model.s <= 0) add("s must be positive, got " + std::to_string(model.s));
    if (static_cast<int>(model.A.size()) != model.s)
        add("A has " + std::to_string(model.A.size()) + " matrices, expected s = " + std::to_string(model.s));
    if (static_cast<int>(model.B.size()) != model.s)
        add("B has " + std::to_string(model.B.size()) + " matrices, expected s = " + std::to_string(model.s));

    for (std::size_t i = 0; i < model.A.size(); ++i) {
        const auto& a = model.A[i];
        const std::string name = "A_" + std::to_string(i + 1);
        if (a.rows() != model.n || a.cols() != model.n)
            add(name + " is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ", expected " +
                std::to_string(model.n) + "x" + std::to_string(model.n));
        if (!detail::all_finite(a)) add(name + " has a non-finite entry");
    }
    for (std::size_t i = 0; i < model.B.size(); ++i) {
        const auto& b = model.B[i];
        const std::string name = "B_" + std::to_string(i + 1);
        if (b.rows() != model.n || b.cols() != model.p)
            add(name + " is " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ", expected " +
                std::to_string(model.n) + "x" + std::to_string(model.p));
        if (!detail::all_finite(b)) add(name + " has a non-finite entry");
    }

    if (model.T.rows() != model.s || model.T.cols() != model.s) {
        add("T is " + std::to_string(model.T.rows()) + "x" + std::to_string(model.T.cols()) + ", expected " +
            std::to_string(model.s) + "x" + std::to_string(model.s));
        return rep;
    }
    for (Eigen::Index i = 0; i < model.T.rows(); ++i) {
        const auto row = model.T.row(i);
        if (!row.allFinite()) {
            add("T row " + std::to_string(i) + " has a non-finite entry");
            continue;
        }
        if ((row.array() < 0.0).any()) add("T row " + std::to_string(i) + " has a negative entry");
        const double sum = row.sum();
        if (std::abs(sum - 1.0) > 1e-12) add("T row " + std::to_string(i) + " sums to " + detail::fmt_double(sum));
    }
    return rep;
}

inline void require_valid(const MjsModel& model) {
    const auto rep = validate_model(model);
    if (!rep.ok()) raise(Errc::InvalidModel, rep.summary());
}

// ---------------------------------------------------------------------------
// Partitions

/// r disjoint, non-empty clusters covering {0, ..., s-1}. Members are kept sorted.
class Partition {
public:
    Partition() = default;

    Partition(std::vector<std::vector<int>> clusters, int s) : clusters_(std::move(clusters)), s_(s) {
        labels_.assign(static_cast<std::size_t>(std::max(s, 0)), -1);
        for (std::size_t k = 0; k < clusters_.size(); ++k) {
            auto& c = clusters_[k];
            if (c.empty()) raise(Errc::PartitionMismatch, "cluster " + std::to_string(k + 1) + " is empty");
            std::sort(c.begin(), c.end());
            for (int i : c) {
                if (i < 0 || i >= s) raise(Errc::PartitionMismatch, "mode index out of range: " + std::to_string(i));
                if (labels_[static_cast<std::size_t>(i)] != -1)
                    raise(Errc::PartitionMismatch, "mode " + std::to_string(i + 1) + " appears twice");
                labels_[static_cast<std::size_t>(i)] = static_cast<int>(k);
            }
        }
        for (int i = 0; i < s; ++i)
            if (labels_[static_cast<std::size_t>(i)] == -1)
                raise(Errc::PartitionMismatch, "mode " + std::to_string(i + 1) + " is not covered");
    }

    /// From per-mode labels in [0, r); every label must occur.
    static Partition from_labels(const std::vector<int>& labels, int r) {
        std::vector<std::vector<int>> cl(static_cast<std::size_t>(r));
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || labels[i] >= r) raise(Errc::PartitionMismatch, "label out of range");
            cl[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
        }
        return Partition(std::move(cl), static_cast<int>(labels.size()));
    }

    static Partition singletons(int s) {
        std::vector<std::vector<int>> cl;
        for (int i = 0; i < s; ++i) cl.push_back({i});
        return Partition(std::move(cl), s);
    }

    /// Contiguous blocks; sizes differ by at most one when r does not divide s.
    static Partition contiguous(int s, int r) {
        if (r <= 0 || r > s) raise(Errc::DegenerateInput, "need 0 < r <= s");
        std::vector<std::vector<int>> cl(static_cast<std::size_t>(r));
        const int base = s / r;
        const int extra = s % r;
        int next = 0;
        for (int k = 0; k < r; ++k) {
            const int size = base + (k < extra ? 1 : 0);
            for (int j = 0; j < size; ++j) cl[static_cast<std::size_t>(k)].push_back(next++);
        }
        return Partition(std::move(cl), s);
    }

    [[nodiscard]] int num_modes() const { return s_; }
    [[nodiscard]] int num_clusters() const { return static_cast<int>(clusters_.size()); }
    [[nodiscard]] const std::vector<std::vector<int>>& clusters() const { return clusters_; }
    [[nodiscard]] const std::vector<int>& cluster(int k) const { return clusters_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] int cluster_of(int mode) const { return labels_[static_cast<std::size_t>(mode)]; }
    [[nodiscard]] const std::vector<int>& labels() const { return labels_; }

    [[nodiscard]] int largest_size() const {
        std::size_t m = 0;
        for (const auto& c : clusters_) m = std::max(m, c.size());
        return static_cast<int>(m);
    }
    [[nodiscard]] int smallest_size() const {
        if (clusters_.empty()) return 0;
        std::size_t m = clusters_.front().size();
        for (const auto& c : clusters_) m = std::min(m, c.size());
        return static_cast<int>(m);
    }

    /// Same clusters ordered by their smallest member.
    [[nodiscard]] Partition canonical() const {
        auto cl = clusters_;
        std::sort(cl.begin(), cl.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
        return Partition(std::move(cl), s_);
    }

    friend bool operator==(const Partition& a, const Partition& b) {
        return a.s_ == b.s_ && a.canonical().clusters_ == b.canonical().clusters_;
    }

private:
    std::vector<std::vector<int>> clusters_;
    std::vector<int> labels_;
    int s_ = 0;
};

// ---------------------------------------------------------------------------
// Markov chain helpers

/// Primitivity test: some power T^m with m <= s^2 is entrywise above 1e-14.
/// Minimum entries of powers of a stochastic matrix never decrease, so it is
/// enough to inspect T^{s^2}.
inline bool is_ergodic(const MatrixXd& T) {
    const auto s = T.rows();
    if (s == 0 || T.cols() != s) return false;
    if (s == 1) return T(0, 0) > 1e-14;
    long long exponent = static_cast<long long>(s) * static_cast<long long>(s);
    MatrixXd result = MatrixXd::Identity(s, s);
    MatrixXd base = T;
    bool first = true;
    while (exponent > 0) {
        if (exponent & 1LL) {
            result = first ? base : MatrixXd(result * base);
            first = false;
        }
        exponent >>= 1;
        if (exponent > 0) base = base * base;
    }
    return result.minCoeff() > 1e-14;
}

struct StationaryDistribution {
    VectorXd pi;
    double pi_min = 0.0;
    double pi_max = 0.0;
};

inline StationaryDistribution stationary_distribution(const MatrixXd& T) {
    if (!is_ergodic(T)) raise(Errc::NotErgodic, "Markov matrix failed the primitivity test");
    const auto s = T.rows();
    MatrixXd sys(s + 1, s);
    sys.topRows(s) = T.transpose() - MatrixXd::Identity(s, s);
    sys.row(s).setOnes();
    VectorXd rhs = VectorXd::Zero(s + 1);
    rhs(s) = 1.0;
    VectorXd pi = sys.colPivHouseholderQr().solve(rhs);
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    // One refinement sweep of power iteration tightens the fixed-point residual.
    for (int it = 0; it < 2; ++it) {
        pi = (pi.transpose() * T).transpose();
        pi /= pi.sum();
    }
    StationaryDistribution out;
    out.pi = pi;
    out.pi_min = pi.minCoeff();
    out.pi_max = pi.maxCoeff();
    return out;
}

/// Expanded s-mode system: mode i in cluster k copies (A_hat_k, B_hat_k); T := T_bar.
inline MjsModel expand_reduced(const MjsModel& reduced, const Partition& partition, const MatrixXd& T_bar) {
    if (partition.num_clusters() != reduced.s)
        raise(Errc::PartitionMismatch, "partition has " + std::to_string(partition.num_clusters()) +
                                           " clusters but reduced model has " + std::to_string(reduced.s) + " modes");
    const int s = partition.num_modes();
    if (T_bar.rows() != s || T_bar.cols() != s) raise(Errc::PartitionMismatch, "T_bar must be s x s");
    MjsModel out;
    out.n = reduced.n;
    out.p = reduced.p;
    out.s = s;
    out.A.resize(static_cast<std::size_t>(s));
    out.B.resize(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) {
        const auto k = static_cast<std::size_t>(partition.cluster_of(i));
        out.A[static_cast<std::size_t>(i)] = reduced.A[k];
        out.B[static_cast<std::size_t>(i)] = reduced.B[k];
    }
    out.T = T_bar;
    return out;
}

} // namespace mjsred
