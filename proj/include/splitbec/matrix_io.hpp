#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "common.hpp"
#include "liouville.hpp"
#include "sector.hpp"
#include "split.hpp"

namespace splitbec {

// Matrix files are JSON objects:
//   format  "splitbec-matrix", version 1
//   kind    "two-mode" or "split-sector"
//   dim     matrix dimension
//   basis   list of occupation tuples, [k, l] or [k1, l1, k2, l2], in row order
//   data    dim * dim pairs [re, im], row-major
// two-mode files add n_max, time and params; split-sector files add n_total and prob.

inline constexpr const char* kMatrixFormat = "splitbec-matrix";
inline constexpr int kMatrixFormatVersion = 1;

namespace detail {

inline nlohmann::json matrix_data(const Matrix& m) {
    nlohmann::json data = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back({m(r, c).real(), m(r, c).imag()});
    return data;
}

inline Matrix matrix_from(const nlohmann::json& j, int dim) {
    const auto& data = j.at("data");
    if (!data.is_array() || static_cast<long>(data.size()) != static_cast<long>(dim) * dim)
        fail(ErrorKind::validation, "matrix file: data must hold dim * dim entries");
    Matrix m(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
            const auto& e = data[static_cast<std::size_t>(r * dim + c)];
            m(r, c) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
        }
    return m;
}

inline void check_header(const nlohmann::json& j, const std::string& kind) {
    if (j.value("format", "") != kMatrixFormat) fail(ErrorKind::validation, "matrix file: unknown format");
    if (j.value("version", 0) != kMatrixFormatVersion) fail(ErrorKind::validation, "matrix file: unsupported version");
    if (j.value("kind", "") != kind) fail(ErrorKind::validation, "matrix file: expected kind '" + kind + "'");
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::validation, "cannot open '" + path + "' for writing");
    out << text;
    if (!out) fail(ErrorKind::validation, "write to '" + path + "' failed");
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::validation, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

inline nlohmann::json params_to_json(const SimParams& p) {
    return {{"delta", p.delta}, {"amp", p.amp}, {"theta_a", p.theta_a}, {"theta_b", p.theta_b},
            {"u", p.u},         {"v", p.v},     {"gamma", p.gamma},     {"n_max", p.n_max}};
}

inline SimParams params_from_json(const nlohmann::json& j) {
    SimParams p;
    p.delta = j.at("delta").get<double>();
    p.amp = j.at("amp").get<double>();
    p.theta_a = j.at("theta_a").get<double>();
    p.theta_b = j.at("theta_b").get<double>();
    p.u = j.at("u").get<double>();
    p.v = j.at("v").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.n_max = j.at("n_max").get<int>();
    p.validate();
    return p;
}

inline nlohmann::json to_json(const TwoModeState& s, const SimParams& p) {
    nlohmann::json j;
    j["format"] = kMatrixFormat;
    j["version"] = kMatrixFormatVersion;
    j["kind"] = "two-mode";
    j["n_max"] = s.cutoff.n_max();
    j["time"] = s.time;
    j["params"] = params_to_json(p);
    j["dim"] = s.cutoff.dim();
    nlohmann::json basis = nlohmann::json::array();
    for (int i = 0; i < s.cutoff.dim(); ++i) {
        const FockIndex f = s.cutoff.unflatten(i);
        basis.push_back({f.k, f.l});
    }
    j["basis"] = basis;
    j["data"] = detail::matrix_data(s.rho);
    return j;
}

struct LoadedTwoModeState {
    TwoModeState state;
    SimParams params;
};

inline LoadedTwoModeState two_mode_from_json(const nlohmann::json& j) {
    detail::check_header(j, "two-mode");
    const ModeCutoff c(j.at("n_max").get<int>());
    if (j.at("dim").get<int>() != c.dim()) fail(ErrorKind::validation, "matrix file: dim does not match n_max");
    SimParams p = params_from_json(j.at("params"));
    return {TwoModeState(c, detail::matrix_from(j, c.dim()), j.at("time").get<double>()), p};
}

inline nlohmann::json to_json(const SplitSectorState& s) {
    nlohmann::json j;
    j["format"] = kMatrixFormat;
    j["version"] = kMatrixFormatVersion;
    j["kind"] = "split-sector";
    j["n_total"] = s.n_total();
    j["prob"] = s.prob;
    j["dim"] = s.dim();
    nlohmann::json basis = nlohmann::json::array();
    for (const auto& t : s.basis.states()) basis.push_back({t.k1, t.l1, t.k2, t.l2});
    j["basis"] = basis;
    j["data"] = detail::matrix_data(s.rho_sp);
    return j;
}

inline SplitSectorState split_sector_from_json(const nlohmann::json& j) {
    detail::check_header(j, "split-sector");
    SplitSectorState s;
    s.basis = SectorBasis(j.at("n_total").get<int>());
    if (j.at("dim").get<int>() != s.basis.size()) fail(ErrorKind::validation, "matrix file: dim does not match n_total");
    s.prob = j.at("prob").get<double>();
    s.rho_sp = detail::matrix_from(j, s.basis.size());
    return s;
}

inline void save_matrix_file(const std::string& path, const nlohmann::json& j) {
    detail::write_text(path, j.dump() + "\n");
}

inline nlohmann::json load_matrix_file(const std::string& path) {
    try {
        return nlohmann::json::parse(detail::read_text(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, "matrix file '" + path + "': " + e.what());
    }
}

/// Sector distribution as CSV with columns N,p_N.
inline std::string distribution_csv(const SectorDistribution& d) {
    std::string out = "N,p_N\n";
    char buf[64];
    for (const auto& [n, p] : d.probs) {
        std::snprintf(buf, sizeof buf, "%d,%.12e\n", n, p);
        out += buf;
    }
    return out;
}

} // namespace splitbec
