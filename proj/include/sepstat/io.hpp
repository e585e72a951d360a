#pragma once

// JSON and CSV serialization.
//
// Density matrix: {"dimA": m, "dimB": n, "re": [...], "im": [...]}, row-major.
// Stiefel point:  {"N": N, "r": r, "re": [...], "im": [...]}, row-major.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sepstat/ensembles.hpp"
#include "sepstat/statmech.hpp"

namespace sepstat::io {

using nlohmann::json;

/// %.17g: round-trips doubles exactly.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline json matrix_parts(const ComplexMatrix& m) {
  std::vector<double> re, im;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      re.push_back(m(i, j).real());
      im.push_back(m(i, j).imag());
    }
  return {{"re", re}, {"im", im}};
}

inline ComplexMatrix read_parts(const json& j, int rows, int cols, const char* what) {
  const auto n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (!j.contains("re") || !j["re"].is_array() || j["re"].size() != n)
    throw ValidationError(std::string(what) + ": \"re\" must be an array of " + std::to_string(n) + " numbers");
  const bool has_im = j.contains("im");
  if (has_im && (!j["im"].is_array() || j["im"].size() != n))
    throw ValidationError(std::string(what) + ": \"im\" must be an array of " + std::to_string(n) + " numbers");
  ComplexMatrix m(rows, cols);
  for (std::size_t k = 0; k < n; ++k) {
    const double re = j["re"][k].get<double>();
    const double im = has_im ? j["im"][k].get<double>() : 0.0;
    m(static_cast<Eigen::Index>(k) / cols, static_cast<Eigen::Index>(k) % cols) = {re, im};
  }
  return m;
}

inline int positive_int(const json& j, const char* key, const char* what) {
  if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<int>() < 1)
    throw ValidationError(std::string(what) + ": \"" + key + "\" must be a positive integer");
  return j[key].get<int>();
}

}  // namespace detail

inline json to_json(const DensityMatrix& rho) {
  json j = detail::matrix_parts(rho.matrix());
  j["dimA"] = rho.dims().m;
  j["dimB"] = rho.dims().n;
  return j;
}

inline DensityMatrix density_from_json(const json& j) {
  try {
    const int m = detail::positive_int(j, "dimA", "invalid density matrix");
    const int n = detail::positive_int(j, "dimB", "invalid density matrix");
    return {Dims{m, n}, detail::read_parts(j, m * n, m * n, "invalid density matrix")};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid density matrix: ") + e.what());
  }
}

inline json to_json(const StiefelPoint& z) {
  json j = detail::matrix_parts(z.matrix());
  j["N"] = z.length();
  j["r"] = z.rank();
  return j;
}

inline StiefelPoint stiefel_from_json(const json& j, double tol = 1e-10) {
  try {
    const int n = detail::positive_int(j, "N", "invalid Stiefel point");
    const int r = detail::positive_int(j, "r", "invalid Stiefel point");
    return StiefelPoint(detail::read_parts(j, n, r, "invalid Stiefel point"), tol);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid Stiefel point: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in " + path + ": " + e.what());
  }
}

inline DensityMatrix read_density_matrix(const std::string& path) { return density_from_json(read_json_file(path)); }

/// CSV rows: beta, mean_energy, std_error, ess, min_energy.
inline void write_estimates_csv(std::ostream& out, const std::vector<McEstimate>& rows) {
  out << "beta,mean_energy,std_error,ess,min_energy\n";
  for (const auto& e : rows)
    out << fmt(e.beta) << ',' << fmt(e.mean_energy) << ',' << fmt(e.std_error) << ',' << fmt(e.effective_sample_size)
        << ',' << fmt(e.min_energy_seen) << '\n';
}

inline void write_histogram_csv(std::ostream& out, const StateDensityEstimate& h) {
  out << "bin_lo,bin_hi,frequency,density\n";
  for (std::size_t k = 0; k < h.bins(); ++k)
    out << fmt(h.bin_edges[k]) << ',' << fmt(h.bin_edges[k + 1]) << ',' << fmt(h.counts[k]) << ','
        << fmt(h.density(k)) << '\n';
}

}  // namespace sepstat::io
