#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "mjsred/error.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/model.hpp"

namespace mjsred {

struct Trajectory {
    std::vector<VectorXd> states;
    std::vector<int> modes;
    std::vector<VectorXd> inputs;
};

/// u_t = 0 (an empty vector when p = 0).
struct ZeroInput {};

/// Fixed open-loop sequence; must cover the horizon.
struct InputSequence {
    std::vector<VectorXd> u;
};

/// u_t = K_{w_t} x_t, one gain per mode of the simulated model.
struct StateFeedback {
    std::vector<MatrixXd> K;
};

using InputProvider = std::variant<ZeroInput, InputSequence, StateFeedback>;

/// Distribution of the initial mode.
struct InitialModeDist {
    enum class Kind { Stationary, Uniform, Fixed, Explicit };
    Kind kind = Kind::Stationary;
    int mode = 0;
    VectorXd probs;

    static InitialModeDist stationary() { return {}; }
    static InitialModeDist uniform() { return {Kind::Uniform, 0, {}}; }
    static InitialModeDist fixed(int m) { return {Kind::Fixed, m, {}}; }
    static InitialModeDist explicit_probs(VectorXd p) { return {Kind::Explicit, 0, std::move(p)}; }
};

/// Probability vector of the initial mode for a chain with transition matrix T.
inline VectorXd initial_mode_probs(const MatrixXd& T, const InitialModeDist& dist) {
    const auto s = T.rows();
    switch (dist.kind) {
    case InitialModeDist::Kind::Stationary: return stationary_distribution(T).pi;
    case InitialModeDist::Kind::Uniform: return VectorXd::Constant(s, 1.0 / static_cast<double>(s));
    case InitialModeDist::Kind::Fixed: {
        if (dist.mode < 0 || dist.mode >= s) raise(Errc::DimensionMismatch, "fixed initial mode out of range");
        VectorXd p = VectorXd::Zero(s);
        p(dist.mode) = 1.0;
        return p;
    }
    case InitialModeDist::Kind::Explicit:
        if (dist.probs.size() != s) raise(Errc::DimensionMismatch, "initial mode distribution has wrong length");
        return dist.probs;
    }
    return VectorXd::Constant(s, 1.0 / static_cast<double>(s));
}

/// Mode path w_0..w_{H-1}: w_0 from `p0`, then w_{t+1} ~ T(w_t, :).
inline std::vector<int> sample_modes(const MatrixXd& T, const VectorXd& p0, int horizon, Rng& rng) {
    std::vector<int> modes;
    if (horizon <= 0) return modes;
    modes.reserve(static_cast<std::size_t>(horizon));
    int w = sample_index(p0, rng);
    modes.push_back(w);
    for (int t = 1; t < horizon; ++t) {
        w = sample_index(T.row(w).transpose(), rng);
        modes.push_back(w);
    }
    return modes;
}

namespace detail {

inline void check_x0(const MjsModel& model, const VectorXd& x0) {
    if (x0.size() != model.n)
        raise(Errc::DimensionMismatch,
              "x0 has length " + std::to_string(x0.size()) + ", expected " + std::to_string(model.n));
}

inline void check_inputs(const MjsModel& model, const InputProvider& inputs, int horizon) {
    if (const auto* seq = std::get_if<InputSequence>(&inputs)) {
        if (static_cast<int>(seq->u.size()) < horizon)
            raise(Errc::DimensionMismatch, "input sequence shorter than the horizon");
        for (int t = 0; t < horizon; ++t)
            if (seq->u[static_cast<std::size_t>(t)].size() != model.p)
                raise(Errc::DimensionMismatch, "input " + std::to_string(t) + " has wrong length");
    } else if (const auto* fb = std::get_if<StateFeedback>(&inputs)) {
        if (static_cast<int>(fb->K.size()) != model.s) raise(Errc::DimensionMismatch, "need one gain per mode");
        for (const auto& k : fb->K)
            if (k.rows() != model.p || k.cols() != model.n)
                raise(Errc::DimensionMismatch, "feedback gain must be p x n");
    }
}

inline VectorXd input_at(const MjsModel& model, const InputProvider& inputs, int t, int mode, const VectorXd& x) {
    if (const auto* seq = std::get_if<InputSequence>(&inputs)) return seq->u[static_cast<std::size_t>(t)];
    if (const auto* fb = std::get_if<StateFeedback>(&inputs)) return fb->K[static_cast<std::size_t>(mode)] * x;
    return VectorXd::Zero(model.p);
}

} // namespace detail

/// Deterministic propagation along a given mode path; `noise` (if non-empty) is added per step.
inline Trajectory propagate(const MjsModel& model, const VectorXd& x0, const std::vector<int>& modes,
                            const InputProvider& inputs, const std::vector<VectorXd>& noise = {}) {
    detail::check_x0(model, x0);
    const int horizon = static_cast<int>(modes.size());
    detail::check_inputs(model, inputs, horizon);
    if (!noise.empty() && static_cast<int>(noise.size()) < horizon)
        raise(Errc::DimensionMismatch, "noise sequence shorter than the horizon");
    Trajectory tr;
    tr.modes = modes;
    tr.states.reserve(static_cast<std::size_t>(horizon) + 1);
    tr.inputs.reserve(static_cast<std::size_t>(horizon));
    tr.states.push_back(x0);
    for (int t = 0; t < horizon; ++t) {
        const int w = modes[static_cast<std::size_t>(t)];
        if (w < 0 || w >= model.s) raise(Errc::DimensionMismatch, "mode index out of range");
        const VectorXd& x = tr.states.back();
        VectorXd u = detail::input_at(model, inputs, t, w, x);
        VectorXd next = model.A[static_cast<std::size_t>(w)] * x;
        if (model.p > 0) next += model.B[static_cast<std::size_t>(w)] * u;
        if (!noise.empty()) next += noise[static_cast<std::size_t>(t)];
        tr.inputs.push_back(std::move(u));
        tr.states.push_back(std::move(next));
    }
    return tr;
}

/// Samples a mode path from `seed` (stream 0) and Gaussian state noise (stream 1).
inline Trajectory simulate(const MjsModel& model, const VectorXd& x0, const InputProvider& inputs, int horizon,
                           double noise_std, std::uint64_t seed,
                           const InitialModeDist& init = InitialModeDist::stationary()) {
    detail::check_x0(model, x0);
    detail::check_inputs(model, inputs, horizon);
    Rng mode_rng = make_rng(seed, 0);
    const auto modes = sample_modes(model.T, initial_mode_probs(model.T, init), horizon, mode_rng);
    std::vector<VectorXd> noise;
    if (noise_std > 0.0) {
        Rng noise_rng = make_rng(seed, 1);
        noise.reserve(static_cast<std::size_t>(horizon));
        for (int t = 0; t < horizon; ++t) noise.push_back(noise_std * gaussian_matrix(model.n, 1, noise_rng));
    }
    return propagate(model, x0, modes, inputs, noise);
}

/// Mode-synchronous pair: the reduced system is in cluster k whenever the full system is in a mode of cluster k.
inline std::pair<Trajectory, Trajectory> simulate_coupled(const MjsModel& model, const MjsModel& reduced,
                                                          const Partition& partition, const VectorXd& x0,
                                                          const InputProvider& inputs, int horizon, std::uint64_t seed,
                                                          const InitialModeDist& init = InitialModeDist::stationary()) {
    if (reduced.n != model.n || reduced.p != model.p)
        raise(Errc::DimensionMismatch, "full and reduced models must share n and p");
    if (partition.num_clusters() != reduced.s || partition.num_modes() != model.s)
        raise(Errc::PartitionMismatch, "partition does not match the two models");
    if (std::holds_alternative<StateFeedback>(inputs))
        raise(Errc::DimensionMismatch, "coupled simulation takes open-loop inputs only");
    detail::check_x0(model, x0);
    detail::check_inputs(model, inputs, horizon);
    Rng mode_rng = make_rng(seed, 0);
    const auto modes = sample_modes(model.T, initial_mode_probs(model.T, init), horizon, mode_rng);
    std::vector<int> cluster_modes;
    cluster_modes.reserve(modes.size());
    for (int w : modes) cluster_modes.push_back(partition.cluster_of(w));
    return {propagate(model, x0, modes, inputs), propagate(reduced, x0, cluster_modes, inputs)};
}

} // namespace mjsred
