#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mjsred/clustering.hpp"
#include "mjsred/error.hpp"
#include "mjsred/model.hpp"
#include "mjsred/perturbation.hpp"
#include "mjsred/stability.hpp"
#include "mjsred/transport.hpp"

namespace mjsred {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Matrices and models

inline Json matrix_to_json(const MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json vector_to_json(const VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

/// Arrays of rows; `rows`/`cols` give the expected shape (used when the matrix has no rows or columns).
inline MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    if (!j.is_array()) raise(Errc::ParseError, what + " must be an array of rows");
    if (static_cast<Eigen::Index>(j.size()) != rows)
        raise(Errc::DimensionMismatch, what + " has " + std::to_string(j.size()) + " rows, expected " + std::to_string(rows));
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array()) raise(Errc::ParseError, what + " row " + std::to_string(i) + " is not an array");
        if (static_cast<Eigen::Index>(row.size()) != cols)
            raise(Errc::DimensionMismatch,
                  what + " row " + std::to_string(i) + " has " + std::to_string(row.size()) + " entries, expected " +
                      std::to_string(cols));
        for (Eigen::Index c = 0; c < cols; ++c) {
            const Json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) raise(Errc::ParseError, what + " entry is not a number");
            m(i, c) = v.get<double>();
        }
    }
    return m;
}

inline Json model_to_json(const MjsModel& m) {
    Json j;
    j["n"] = m.n;
    j["p"] = m.p;
    j["s"] = m.s;
    j["A"] = Json::array();
    j["B"] = Json::array();
    for (const auto& a : m.A) j["A"].push_back(matrix_to_json(a));
    for (const auto& b : m.B) j["B"].push_back(matrix_to_json(b));
    j["T"] = matrix_to_json(m.T);
    return j;
}

/// Parses the model schema; rejects shape errors with ParseError/DimensionMismatch and invalid models with InvalidModel.
inline MjsModel model_from_json(const Json& j) {
    if (!j.is_object()) raise(Errc::ParseError, "model must be a JSON object");
    for (const char* key : {"n", "p", "s", "A", "B", "T"})
        if (!j.contains(key)) raise(Errc::ParseError, std::string("missing field \"") + key + "\"");
    for (const char* key : {"n", "p", "s"})
        if (!j[key].is_number_integer()) raise(Errc::ParseError, std::string("field \"") + key + "\" must be an integer");
    MjsModel m;
    m.n = j["n"].get<int>();
    m.p = j["p"].get<int>();
    m.s = j["s"].get<int>();
    if (m.n <= 0 || m.p < 0 || m.s <= 0) raise(Errc::InvalidModel, "need n > 0, p >= 0, s > 0");
    if (!j["A"].is_array() || static_cast<int>(j["A"].size()) != m.s)
        raise(Errc::DimensionMismatch, "A must list s matrices");
    if (!j["B"].is_array() || static_cast<int>(j["B"].size()) != m.s)
        raise(Errc::DimensionMismatch, "B must list s matrices");
    for (int i = 0; i < m.s; ++i) {
        const auto u = static_cast<std::size_t>(i);
        m.A.push_back(matrix_from_json(j["A"][u], m.n, m.n, "A_" + std::to_string(i + 1)));
        if (m.p == 0 && j["B"][u].is_array() && j["B"][u].empty()) {
            m.B.push_back(MatrixXd::Zero(m.n, 0));
        } else if (m.p == 0) {
            // n rows of empty arrays.
            m.B.push_back(matrix_from_json(j["B"][u], m.n, 0, "B_" + std::to_string(i + 1)));
        } else {
            m.B.push_back(matrix_from_json(j["B"][u], m.n, m.p, "B_" + std::to_string(i + 1)));
        }
    }
    m.T = matrix_from_json(j["T"], m.s, m.s, "T");
    require_valid(m);
    return m;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::ParseError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parses JSON text; syntax errors carry the byte offset.
inline Json parse_json(const std::string& text, const std::string& origin) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        raise(Errc::ParseError, origin + ": byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::ParseError, "cannot write " + path.string());
    out << text;
}

inline MjsModel read_model(const std::filesystem::path& path) {
    return model_from_json(parse_json(read_text(path), path.string()));
}

inline void write_model(const std::filesystem::path& path, const MjsModel& m) {
    write_text(path, model_to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Partitions

inline Json partition_to_json(const Partition& p) {
    Json out = Json::array();
    for (const auto& c : p.clusters()) {
        Json cl = Json::array();
        for (int i : c) cl.push_back(i + 1);
        out.push_back(std::move(cl));
    }
    return out;
}

/// 1-based cluster lists over s modes.
inline Partition partition_from_json(const Json& j, int s) {
    if (!j.is_array()) raise(Errc::ParseError, "partition must be an array of clusters");
    std::vector<std::vector<int>> clusters;
    for (const auto& c : j) {
        if (!c.is_array()) raise(Errc::ParseError, "cluster must be an array of 1-based indices");
        std::vector<int> cl;
        for (const auto& v : c) {
            if (!v.is_number_integer()) raise(Errc::ParseError, "cluster entries must be integers");
            cl.push_back(v.get<int>() - 1);
        }
        clusters.push_back(std::move(cl));
    }
    return Partition(clusters, s);
}

/// Sidecar path for the hidden partition of a model file: x.json -> x.truth.json.
inline std::filesystem::path truth_path(const std::filesystem::path& model_path) {
    std::filesystem::path p = model_path;
    if (p.extension() == ".json") p.replace_extension();
    p += ".truth.json";
    return p;
}

inline void write_partition(const std::filesystem::path& path, const Partition& p) {
    Json j;
    j["s"] = p.num_modes();
    j["r"] = p.num_clusters();
    j["partition"] = partition_to_json(p);
    write_text(path, j.dump(2) + "\n");
}

inline Partition read_partition(const std::filesystem::path& path) {
    const Json j = parse_json(read_text(path), path.string());
    if (!j.is_object() || !j.contains("s") || !j.contains("partition"))
        raise(Errc::ParseError, path.string() + ": expected {\"s\", \"partition\"}");
    return partition_from_json(j["partition"], j["s"].get<int>());
}

// ---------------------------------------------------------------------------
// Reports

inline Json reduction_to_json(const ReductionResult& r) {
    Json j;
    j["partition"] = partition_to_json(r.partition);
    j["reduced"] = model_to_json(r.reduced);
    j["objective"] = r.kmeans_objective;
    j["restarts_used"] = r.restarts_used;
    j["branch"] = branch_name(r.branch);
    return j;
}

inline Json perturbations_to_json(const PerturbationTriple& e) {
    return Json{{"eps_A", e.eps_A}, {"eps_B", e.eps_B}, {"eps_T", e.eps_T}};
}

inline Json mr_bound_to_json(const MrBoundReport& r) {
    Json j;
    j["branch"] = branch_name(r.branch);
    j["eps"] = perturbations_to_json(r.eps);
    j["kmeans_eps"] = r.kmeans_eps;
    j["eps_combined"] = r.eps_combined;
    j["sigma_r_phibar"] = r.sigma_r_phibar;
    j["sigma_r1_phibar"] = r.sigma_r1_phibar;
    j["threshold_nonzero"] = r.threshold_nonzero;
    j["threshold_zero"] = r.threshold_zero;
    j["bound_value"] = r.bound_value;
    j["rank_ok"] = r.rank_ok;
    j["below_threshold_nonzero"] = r.below_threshold_nonzero;
    j["below_threshold_zero"] = r.below_threshold_zero;
    j["eps_T_premise"] = r.eps_T_premise;
    j["applicable"] = r.applicable;
    j["predicts_zero_mr"] = r.predicts_zero_mr;
    j["reversible_premise_verified"] = r.reversible_premise_verified;
    j["pi_min"] = r.pi_min;
    if (r.gammas) {
        j["gamma1"] = r.gammas->gamma1;
        j["gamma2"] = r.gammas->gamma2;
        j["gamma3"] = r.gammas->gamma3;
    }
    return j;
}

inline Json tau_to_json(const TauEstimate& t) {
    return Json{{"tau", t.tau}, {"rho", t.rho}, {"argmax_k", t.argmax_k}, {"k_max", t.k_max}, {"unconverged", t.unconverged}};
}

inline Json jsr_to_json(const JsrBounds& b) {
    return Json{{"lower", b.lower},
                {"upper", b.upper},
                {"depth_reached", b.depth_reached},
                {"nodes", b.nodes},
                {"budget_exceeded", b.budget_exceeded}};
}

inline Json kappa_to_json(const KappaEstimate& k) {
    return Json{{"kappa", k.kappa},         {"xi", k.xi},       {"argmax_k", k.argmax_k},
                {"k_max", k.k_max},         {"nodes", k.nodes}, {"unconverged", k.unconverged},
                {"budget_exceeded", k.budget_exceeded}};
}

inline Json stability_report_to_json(const StabilityReport& r) {
    Json j;
    j["rho_augmented"] = r.rho_augmented;
    j["is_mss"] = r.is_mss;
    j["tau"] = tau_to_json(r.tau);
    j["jsr"] = jsr_to_json(r.jsr);
    j["kappa"] = kappa_to_json(r.kappa);
    j["a_bar"] = r.a_bar;
    j["b_bar"] = r.b_bar;
    j["t_bar"] = r.t_bar;
    j["norm_T"] = r.norm_T;
    return j;
}

inline Json stability_comparison_to_json(const StabilityComparison& c) {
    Json j;
    j["eps"] = perturbations_to_json(c.eps);
    j["a_bar"] = c.a_bar;
    j["eps_rho"] = c.eps_rho;
    j["rho_full"] = c.rho_full;
    j["rho_reduced"] = c.rho_reduced;
    j["rho_expanded"] = c.rho_expanded;
    j["expansion_rho_gap"] = c.expansion_rho_gap;
    j["rho"] = c.rho;
    j["rho_hat"] = c.rho_hat;
    j["tau"] = tau_to_json(c.tau);
    j["tau_bar"] = tau_to_json(c.tau_bar);
    j["bound_rho_upper"] = c.bound_rho_upper;
    j["bound_rho_lower"] = c.bound_rho_lower;
    j["measured_rho_up"] = c.measured_rho_up;
    j["measured_rho_down"] = c.measured_rho_down;
    j["measured_gap_rho"] = c.measured_gap_rho;
    j["jsr_full"] = jsr_to_json(c.jsr_full);
    j["jsr_reduced"] = jsr_to_json(c.jsr_reduced);
    j["xi"] = c.xi;
    j["xi_hat"] = c.xi_hat;
    j["kappa"] = kappa_to_json(c.kappa);
    j["kappa_bar"] = kappa_to_json(c.kappa_bar);
    j["bound_xi_upper"] = c.bound_xi_upper;
    j["bound_xi_lower"] = c.bound_xi_lower;
    j["measured_gap_xi"] = c.measured_gap_xi;
    j["measured_gap_xi_max"] = c.measured_gap_xi_max;
    j["T0_within_ball"] = c.T0_within_ball;
    return j;
}

/// Kernel as an array of {state, mass}.
inline Json kernel_to_json(const KernelDistribution& k) {
    Json out = Json::array();
    for (std::size_t i = 0; i < k.support.size(); ++i)
        out.push_back(Json{{"state", vector_to_json(k.support[i])}, {"mass", k.mass[i]}});
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string fmt_csv(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV table: a provenance comment line, a header row, then data rows.
class CsvTable {
public:
    CsvTable(std::vector<std::string> header, std::string provenance)
        : header_(std::move(header)), provenance_(std::move(provenance)) {}

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != header_.size()) raise(Errc::SizeMismatch, "CSV row width differs from header");
        rows_.push_back(std::move(cells));
    }

    [[nodiscard]] const std::vector<std::string>& header() const { return header_; }
    [[nodiscard]] const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    [[nodiscard]] std::string str() const {
        std::string out = "# " + provenance_ + "\n";
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    void write(const std::filesystem::path& path) const { write_text(path, str()); }

private:
    std::vector<std::string> header_;
    std::string provenance_;
    std::vector<std::vector<std::string>> rows_;
};

/// Parsed CSV: comment lines skipped, first non-comment line is the header.
struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string provenance;

    [[nodiscard]] int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        raise(Errc::ParseError, "no column " + name);
    }
};

inline CsvData parse_csv(const std::string& text) {
    CsvData d;
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(l);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        return cells;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (d.provenance.empty()) d.provenance = line.substr(line.size() > 1 ? 2 : 1);
            continue;
        }
        if (d.header.empty())
            d.header = split(line);
        else
            d.rows.push_back(split(line));
    }
    return d;
}

} // namespace mjsred
