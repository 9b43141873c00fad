#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "gqmi/coherence.hpp"
#include "gqmi/ensemble.hpp"
#include "gqmi/estimators.hpp"

namespace gqmi {

/// Error in an input file; carries the 1-based line number.
struct IoError : std::runtime_error {
  IoError(std::string path, std::int64_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
        file(std::move(path)),
        line_number(line) {}
  std::string file;
  std::int64_t line_number;
};

/// Shortest round-trip decimal form of a double; parses back bit-exactly.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline void append_array(std::string& out, const Eigen::MatrixXd& m, std::int64_t row) {
  out += '[';
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (c) out += ',';
    out += format_double(m(row, c));
  }
  out += ']';
}

}  // namespace detail

inline nlohmann::json meta_to_json(const Ensemble& e) {
  const EnsembleMeta& meta = e.meta();
  nlohmann::json j;
  j["dim"] = e.dim();
  j["generator"] = meta.generator;
  j["params"] = meta.params;
  j["seed"] = meta.seed;
  j["n"] = e.size();
  nlohmann::json diag;
  if (!std::isnan(meta.acceptance_rate)) diag["acceptance_rate"] = meta.acceptance_rate;
  if (meta.resampled > 0) diag["resampled"] = meta.resampled;
  if (meta.drop_mass > 0.0) diag["drop_mass"] = meta.drop_mass;
  if (!meta.warnings.empty()) diag["warnings"] = meta.warnings;
  if (!diag.empty()) j["diagnostics"] = diag;
  return j;
}

/// Writes an ensemble as JSONL: one metadata record, then one record per
/// point with fields w, p, phi. Floats use shortest round-trip decimals,
/// so rereading reproduces the exact binary values.
inline void write_ensemble_jsonl(const std::string& path, const Ensemble& e) {
  if (e.block_dims().size() != 1) {
    throw std::invalid_argument("write_ensemble_jsonl: composite ensembles are not serialized");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << meta_to_json(e).dump() << '\n';
  std::string line;
  for (std::int64_t i = 0; i < e.size(); ++i) {
    line.clear();
    line += "{\"w\":";
    line += format_double(e.weight(i));
    line += ",\"p\":";
    detail::append_array(line, e.probabilities(), i);
    line += ",\"phi\":";
    detail::append_array(line, e.phases(), i);
    line += "}\n";
    out << line;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Ensemble read_ensemble_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  std::int64_t line_no = 0;

  auto parse_line = [&](const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(path, line_no, ex.what());
    }
  };

  if (!std::getline(in, line)) throw IoError(path, 1, "missing metadata record");
  ++line_no;
  const nlohmann::json meta_j = parse_line(line);
  int dim = 0;
  std::int64_t n = 0;
  EnsembleMeta meta;
  try {
    dim = meta_j.at("dim").get<int>();
    n = meta_j.at("n").get<std::int64_t>();
    meta.generator = meta_j.at("generator").get<std::string>();
    meta.seed = meta_j.at("seed").get<std::uint64_t>();
    for (const auto& [key, value] : meta_j.at("params").items()) {
      meta.params[key] = value.get<double>();
    }
    meta.n = n;
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(path, line_no, ex.what());
  }
  if (dim < 2 || n <= 0) throw IoError(path, line_no, "invalid dim or n in metadata");

  Eigen::MatrixXd p(n, dim), phi(n, dim);
  Eigen::VectorXd w(n);
  std::int64_t i = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (i >= n) throw IoError(path, line_no, "more point records than metadata n");
    const nlohmann::json j = parse_line(line);
    try {
      w[i] = j.at("w").get<double>();
      const auto& pj = j.at("p");
      const auto& fj = j.at("phi");
      if (static_cast<int>(pj.size()) != dim || static_cast<int>(fj.size()) != dim) {
        throw IoError(path, line_no, "point arity does not match dim");
      }
      for (int k = 0; k < dim; ++k) {
        p(i, k) = pj[k].get<double>();
        phi(i, k) = fj[k].get<double>();
      }
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(path, line_no, ex.what());
    }
    ++i;
  }
  if (i != n) throw IoError(path, line_no, "fewer point records than metadata n");
  return Ensemble({dim}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

// ---- report serialization ---------------------------------------------

inline nlohmann::json to_json(const ScalingReport& r) {
  nlohmann::json scales = nlohmann::json::array();
  for (std::size_t i = 0; i < r.eps.size(); ++i) {
    scales.push_back({{"eps", r.eps[i]}, {"H", r.entropy[i]}, {"included", bool(r.included[i])}});
  }
  const char* which = r.which == Marginal::joint ? "joint"
                      : r.which == Marginal::probability ? "p" : "phi";
  return {{"which", which}, {"n", r.n_points},      {"scales", scales},
          {"dimension", r.dimension}, {"intercept", r.intercept}, {"r2", r.r2}};
}

inline nlohmann::json to_json(const MIResult& r) {
  nlohmann::json scales = nlohmann::json::array();
  for (std::size_t i = 0; i < r.eps.size(); ++i) {
    scales.push_back(
        {{"eps", r.eps[i]}, {"I_eps", r.i_eps[i]}, {"included", bool(r.included[i])}});
  }
  return {{"n", r.n_points},
          {"scales", scales},
          {"D_I", r.di},
          {"I_fit", r.fitted_intercept},
          {"I", r.value},
          {"plateau_used", r.plateau_used},
          {"plateau_diag", r.plateau_diag},
          {"warnings", r.warnings}};
}

inline nlohmann::json to_json(const KlPhiReport& r) {
  nlohmann::json scales = nlohmann::json::array();
  for (std::size_t i = 0; i < r.eps.size(); ++i) {
    scales.push_back({{"eps", r.eps[i]}, {"kl", r.kl[i]}, {"included", bool(r.included[i])}});
  }
  return {{"n", r.n_points}, {"scales", scales}, {"slope", r.slope}, {"intercept", r.intercept}};
}

inline nlohmann::json to_json(const SurplusReport& r) {
  nlohmann::json per_scale = nlohmann::json::array();
  for (const auto& s : r.per_scale) {
    per_scale.push_back({{"eps", s.eps},
                         {"I_eps", s.i_eps},
                         {"kl_eps", s.kl_eps},
                         {"delta_c_eps", s.delta_c_eps}});
  }
  return {{"I", r.I},
          {"KL_phi", r.kl_phi},
          {"C", r.C},
          {"delta_C", r.delta_c},
          {"scalar_valid", r.scalar_valid},
          {"min_delta_c_eps", r.min_delta_c_eps},
          {"per_scale", per_scale},
          {"sigma", {{"estimator", "permutation-pairing"}, {"entropy", r.sigma_entropy}}},
          {"warnings", r.warnings}};
}

inline nlohmann::json to_json(const GapReport& r) {
  nlohmann::json per_scale = nlohmann::json::array();
  for (const auto& s : r.per_scale) {
    per_scale.push_back({{"eps", s.eps}, {"lhs", s.lhs}, {"rhs", s.rhs}});
  }
  return {{"lhs", r.lhs}, {"rhs", r.rhs}, {"holds", r.holds}, {"per_scale", per_scale}};
}

/// CSV writer with '.' decimals, LF line endings and shortest round-trip
/// float formatting.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }

  void header(const std::vector<std::string>& names) { write_row_text(names); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    write_row_text(cells);
  }

  void row_text(const std::vector<std::string>& cells) { write_row_text(cells); }

 private:
  void write_row_text(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    line += '\n';
    out_ << line;
    if (!out_) throw std::runtime_error("CSV write failed");
  }

  std::ofstream out_;
};

}  // namespace gqmi
