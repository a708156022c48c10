#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mjsred/mjsred.hpp"

namespace fs = std::filesystem;
using namespace mjsred;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotMss = 1;
constexpr int kExitInput = 2;
constexpr int kExitCompute = 3;

int exit_code_for(Errc c) {
    switch (c) {
    case Errc::ParseError:
    case Errc::InvalidModel:
    case Errc::DimensionMismatch:
    case Errc::PartitionMismatch:
    case Errc::BadWeights:
    case Errc::SizeMismatch: return kExitInput;
    default: return kExitCompute;
    }
}

struct Globals {
    std::uint64_t seed = 0;
    std::string out;
    int threads = 0;
    bool full = false;
};

std::optional<Branch> parse_branch(const std::string& b) {
    if (b == "agg" || b == "aggregatable") return Branch::Aggregatable;
    if (b == "lmp" || b == "lumpable") return Branch::Lumpable;
    if (b == "auto") return std::nullopt;
    raise(Errc::ParseError, "branch must be agg, lmp or auto");
}

Weights parse_weights(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            v.push_back(std::stod(tok));
        } catch (const std::exception&) {
            raise(Errc::BadWeights, "cannot parse weight \"" + tok + "\"");
        }
    }
    if (v.size() != 3) raise(Errc::BadWeights, "weights need three comma-separated values a,b,t");
    Weights w{v[0], v[1], v[2]};
    check_weights(w);
    return w;
}

void emit(const Json& j, const std::string& out) {
    const std::string text = j.dump(2) + "\n";
    if (out.empty())
        std::cout << text;
    else
        write_text(out, text);
}

std::optional<Partition> load_truth(const fs::path& model_path, int s) {
    const fs::path tp = truth_path(model_path);
    if (!fs::exists(tp)) return std::nullopt;
    Partition p = read_partition(tp);
    if (p.num_modes() != s) raise(Errc::PartitionMismatch, "truth sidecar has a different number of modes");
    return p;
}

Partition load_partition_or_truth(const std::string& partition_file, const fs::path& model_path, int s) {
    if (!partition_file.empty()) {
        Partition p = read_partition(partition_file);
        if (p.num_modes() != s) raise(Errc::PartitionMismatch, "partition has a different number of modes");
        return p;
    }
    auto t = load_truth(model_path, s);
    if (!t) raise(Errc::ParseError, "no --partition given and no truth sidecar " + truth_path(model_path).string());
    return *t;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mode reduction for Markov jump linear systems"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->default_val(0);
    app.add_option("--out", g.out, "Output file (or directory for experiment)");
    app.add_option("--threads", g.threads, "Worker threads (0: MJS_REDUCE_THREADS or 1)")->default_val(0);
    app.add_flag("--full", g.full, "Use the original experiment sizes");
    app.fallthrough();

    // generate
    auto* gen = app.add_subcommand("generate", "Write a random perturbed model and its truth partition");
    SynthConfig sc;
    std::string gen_branch = "agg";
    bool gen_fig4 = false;
    gen->add_option("--r", sc.r, "Number of clusters")->default_val(4);
    gen->add_option("--s", sc.s, "Number of modes")->default_val(16);
    gen->add_option("--n", sc.n, "State dimension")->default_val(5);
    gen->add_option("--p", sc.p, "Input dimension")->default_val(3);
    gen->add_option("--eps-a", sc.eps_A, "Target eps_A")->default_val(0.0);
    gen->add_option("--eps-b", sc.eps_B, "Target eps_B")->default_val(0.0);
    gen->add_option("--eps-t", sc.eps_T, "Target eps_T")->default_val(0.0);
    gen->add_option("--branch", gen_branch, "agg or lmp")->default_val("agg");
    gen->add_option("--base-a-norm", sc.base_A_norm, "Spectral norm of base A")->default_val(0.5);
    gen->add_option("--base-b-norm", sc.base_B_norm, "Spectral norm of base B")->default_val(1.0);
    gen->add_flag("--uneven", sc.allow_uneven, "Allow s not divisible by r");
    gen->add_flag("--reversible", sc.reversible, "Reversible unperturbed chain (lumpable branch)");
    gen->add_flag("--fig4", gen_fig4, "Write the fixed six-mode example instead");

    // reduce
    auto* red = app.add_subcommand("reduce", "Cluster the modes and write the reduced model");
    std::string red_model;
    int red_r = 0;
    std::string red_branch = "auto";
    std::string red_weights;
    int red_restarts = 50;
    bool red_pi = false;
    red->add_option("--model", red_model, "Model JSON")->required();
    red->add_option("--r", red_r, "Number of reduced modes")->required();
    red->add_option("--branch", red_branch, "agg, lmp or auto")->default_val("auto");
    red->add_option("--weights", red_weights, "Feature weights a,b,t");
    red->add_option("--restarts", red_restarts, "k-means restarts")->default_val(50);
    red->add_flag("--pi-weighted", red_pi, "Stationary-weighted cluster averages");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Perturbations, misclustering bound and trajectory bounds");
    std::string ev_model;
    std::string ev_partition;
    std::string ev_branch = "lmp";
    int ev_horizon = 0;
    int ev_ntraj = 500;
    std::string ev_csv;
    ev->add_option("--model", ev_model, "Model JSON")->required();
    ev->add_option("--partition", ev_partition, "Partition JSON (default: truth sidecar)");
    ev->add_option("--branch", ev_branch, "agg or lmp")->default_val("lmp");
    ev->add_option("--horizon", ev_horizon, "Trajectory horizon (0: skip trajectories)")->default_val(0);
    ev->add_option("--n-traj", ev_ntraj, "Number of coupled trajectories")->default_val(500);
    ev->add_option("--csv", ev_csv, "Trajectory CSV path");

    // stability
    auto* st = app.add_subcommand("stability", "Stability constants; exits 1 when not mean-square stable");
    std::string st_model;
    std::string st_partition;
    st->add_option("--model", st_model, "Model JSON")->required();
    st->add_option("--partition", st_partition, "Partition JSON for the reduced comparison");

    // lqr
    auto* lq = app.add_subcommand("lqr", "Optimal and reduced jump LQR costs");
    std::string lq_model;
    int lq_r = 0;
    std::string lq_branch = "auto";
    double lq_sigma = std::sqrt(0.1);
    double lq_q = 1.0;
    double lq_rs = 1.0;
    lq->add_option("--model", lq_model, "Model JSON")->required();
    lq->add_option("--r", lq_r, "Number of reduced modes")->required();
    lq->add_option("--branch", lq_branch, "agg, lmp or auto")->default_val("auto");
    lq->add_option("--sigma-w", lq_sigma, "Process noise standard deviation");
    lq->add_option("--q-scale", lq_q, "Q = q_scale I")->default_val(1.0);
    lq->add_option("--r-scale", lq_rs, "R = r_scale I")->default_val(1.0);

    // experiment
    auto* ex = app.add_subcommand("experiment", "Regenerate an experiment as CSV");
    ExperimentSpec es;
    std::optional<int> ex_trials;
    ex->add_option("name", es.name, "fig2 | fig3a | fig3b | fig4 | table2")->required();
    ex->add_option("--trials", ex_trials, "Trials per grid point");
    ex->add_option("--s-grid", es.s_grid, "Numbers of modes");
    ex->add_option("--r-grid", es.r_grid, "Numbers of clusters");
    ex->add_option("--eps-grid", es.eps_grid, "Perturbation grid");
    ex->add_option("--eps-t-grid", es.eps_t_grid, "Second perturbation grid");
    ex->add_option("--r-hat-grid", es.r_hat_grid, "Reduced mode counts");
    ex->add_option("--n-traj", es.n_traj, "Trajectories (fig4)");
    ex->add_option("--horizon", es.horizon, "Horizon (fig4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (g.threads > 0) set_num_threads(g.threads);

        if (*gen) {
            sc.seed = g.seed;
            sc.branch = parse_branch(gen_branch).value_or(Branch::Aggregatable);
            const SynthInstance inst = gen_fig4 ? fig4_model() : generate(sc);
            const fs::path out = g.out.empty() ? fs::path("model.json") : fs::path(g.out);
            write_model(out, inst.model);
            write_partition(truth_path(out), inst.truth);
            std::cout << "wrote " << out.string() << " and " << truth_path(out).string() << "\n";
            return kExitOk;
        }

        if (*red) {
            const MjsModel m = read_model(red_model);
            ReduceOptions opts;
            opts.branch = parse_branch(red_branch);
            if (!red_weights.empty()) opts.weights = parse_weights(red_weights);
            opts.restarts = red_restarts;
            opts.seed = g.seed;
            opts.pi_weighted = red_pi;
            const auto truth = load_truth(red_model, m.s);
            const ReductionResult res = reduce(m, red_r, opts);
            emit(reduction_to_json(res), g.out);
            if (truth && truth->num_clusters() == red_r)
                std::cerr << "MR " << fmt_csv(misclustering_rate(res.partition, *truth)) << "\n";
            return kExitOk;
        }

        if (*ev) {
            const MjsModel m = read_model(ev_model);
            const Partition part = load_partition_or_truth(ev_partition, ev_model, m.s);
            const Branch b = parse_branch(ev_branch).value_or(Branch::Lumpable);
            Json j;
            j["perturbations"] = perturbations_to_json(perturbations(m, part, b));
            j["mr_bound"] = mr_bound_to_json(mr_bound(m, part, b));
            if (ev_horizon > 0) {
                const MjsModel reduced = reduce_with_partition(m, part);
                const VectorXd x0 = VectorXd::Ones(m.n);
                BoundsConfig cfg;
                cfg.branch = b;
                const BoundInputs bi = make_bound_inputs(m, part, x0, cfg);
                const TrajDiffStats stats = empirical_traj_diff(m, reduced, part, x0, ev_horizon, ev_ntraj, g.seed);
                CsvTable csv({"t", "mean_diff", "max_diff", "bound_mss", "bound_us"},
                             "evaluate seed=" + std::to_string(g.seed) + " spec_hash=" +
                                 hex64(fnv1a64(ev_model + ";" + std::to_string(ev_horizon) + ";" + std::to_string(ev_ntraj))));
                for (int t = 0; t <= ev_horizon; ++t) {
                    const auto u = static_cast<std::size_t>(t);
                    csv.add_row({std::to_string(t), fmt_csv(stats.mean[u]), fmt_csv(stats.max[u]),
                                 fmt_csv(mss_traj_bound(bi, t).value), fmt_csv(us_traj_bound(bi, t).value)});
                }
                if (ev_csv.empty())
                    std::cout << csv.str();
                else
                    csv.write(ev_csv);
            }
            emit(j, g.out);
            return kExitOk;
        }

        if (*st) {
            const MjsModel m = read_model(st_model);
            const StabilityReport rep = stability_report(m);
            Json j;
            j["report"] = stability_report_to_json(rep);
            if (!st_partition.empty()) {
                const Partition part = read_partition(st_partition);
                if (part.num_modes() != m.s) raise(Errc::PartitionMismatch, "partition has a different number of modes");
                const MjsModel reduced = reduce_with_partition(m, part);
                j["comparison"] = stability_comparison_to_json(stability_comparison(m, reduced, part));
            }
            emit(j, g.out);
            return rep.is_mss ? kExitOk : kExitNotMss;
        }

        if (*lq) {
            const MjsModel m = read_model(lq_model);
            ReducedLqrOptions opts;
            opts.branch = parse_branch(lq_branch);
            const MatrixXd Q = lq_q * MatrixXd::Identity(m.n, m.n);
            const MatrixXd R = lq_rs * MatrixXd::Identity(m.p, m.p);
            const auto res = reduced_lqr_suboptimality(m, lq_r, Q, R, lq_sigma, g.seed, opts);
            Json j{{"J_star", res.J_star},
                   {"J_hat", res.J_hat},
                   {"gap", res.gap},
                   {"iters_full", res.iters_full},
                   {"iters_reduced", res.iters_reduced},
                   {"time_full_ms", res.time_full_ms},
                   {"time_reduced_ms", res.time_reduced_ms}};
            emit(j, g.out);
            return kExitOk;
        }

        if (*ex) {
            es.seed = g.seed;
            es.full = g.full;
            es.trials = ex_trials;
            es.out_dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
            const fs::path path = run_experiment(es);
            std::cout << "wrote " << path.string() << "\n";
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCompute;
    }
    return kExitOk;
}
