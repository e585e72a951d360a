#pragma once

// Command implementations for the sepstat CLI. Kept in a header so the tests
// can drive them in-process.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sepstat/io.hpp"
#include "sepstat/statmech.hpp"
#include "sepstat/werner.hpp"

namespace sepstat::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kInfeasible = 3, kNoConvergence = 4 };

struct RunConfig {
  std::string command;
  std::optional<double> werner;
  std::optional<std::string> state;
  std::string beta;  // "v", "v1,v2,..." or "log:a:b:n"; empty = command default
  std::string p_grid = "0.50:0.01:1.00";
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  double tol = 1e-10;
  double threshold = werner::kDefaultThreshold;
  int N = 16;
  int bins = 64;
  std::string estimator = "metropolis";
  bool self_test = false;
  int threads = 1;
  std::string out;
};

inline json to_json(const RunConfig& c) {
  json j{{"command", c.command}, {"beta", c.beta},     {"p-grid", c.p_grid},       {"samples", c.samples},
         {"seed", c.seed},       {"tol", c.tol},       {"threshold", c.threshold}, {"N", c.N},
         {"bins", c.bins},       {"estimator", c.estimator}, {"self-test", c.self_test}};
  if (c.werner) j["werner"] = *c.werner;
  if (c.state) j["state"] = *c.state;
  return j;
}

/// Copies every key present in `j` into `c`. Unknown keys are rejected.
inline void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command") c.command = v.get<std::string>();
      else if (key == "werner") c.werner = v.get<double>();
      else if (key == "state") c.state = v.get<std::string>();
      else if (key == "beta") c.beta = v.is_string() ? v.get<std::string>() : io::fmt(v.get<double>());
      else if (key == "p-grid") c.p_grid = v.get<std::string>();
      else if (key == "samples") c.samples = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "tol") c.tol = v.get<double>();
      else if (key == "threshold") c.threshold = v.get<double>();
      else if (key == "N") c.N = v.get<int>();
      else if (key == "bins") c.bins = v.get<int>();
      else if (key == "estimator") c.estimator = v.get<std::string>();
      else if (key == "self-test") c.self_test = v.get<bool>();
      else if (key == "threads") c.threads = v.get<int>();
      else if (key == "out") c.out = v.get<std::string>();
      else throw ValidationError("unknown config key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
}

inline double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("cannot parse ") + what + " value \"" + s + "\"");
  }
}

/// "10", "1,10,100" or "log:a:b:n" (n log-spaced points from a to b).
inline std::vector<double> parse_beta(const std::string& spec) {
  std::vector<double> out;
  if (spec.rfind("log:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(spec.substr(4));
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ValidationError("beta grid must be log:a:b:n");
    const double a = parse_double(parts[0], "beta"), b = parse_double(parts[1], "beta");
    const double n = parse_double(parts[2], "beta");
    if (!(a > 0) || !(b >= a) || n < 1 || n != std::floor(n)) throw ValidationError("bad log beta grid " + spec);
    const int k = static_cast<int>(n);
    for (int i = 0; i < k; ++i)
      out.push_back(i == 0 ? a : i == k - 1 ? b : std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (k - 1)));
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(parse_double(p, "beta"));
  }
  if (out.empty()) throw ValidationError("empty beta grid");
  for (double b : out)
    if (!(b >= 0) || !std::isfinite(b)) throw ValidationError("beta values must be finite and >= 0");
  return out;
}

inline std::vector<double> parse_p_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw ValidationError("p grid must be a:step:b");
  const double a = parse_double(parts[0], "p-grid"), step = parse_double(parts[1], "p-grid");
  const double b = parse_double(parts[2], "p-grid");
  if (!(step > 0) || b < a) throw ValidationError("empty p grid " + spec);
  return werner::p_grid(a, step, b);
}

struct LoadedState {
  DensityMatrix rho;
  std::optional<double> werner_p;
};

/// p if rho equals W(p) for some p in (0, 1] within 1e-10.
inline std::optional<double> werner_parameter(const DensityMatrix& rho) {
  if (!(rho.dims() == werner::kQubits)) return std::nullopt;
  const double p = 4.0 * rho.matrix()(0, 0).real();
  if (!(p > 0 && p <= 1 + 1e-12)) return std::nullopt;
  const double pc = std::min(p, 1.0);
  if (max_abs(rho.matrix() - werner::werner_state(pc).matrix()) > 1e-10) return std::nullopt;
  return pc;
}

inline LoadedState load_state(const RunConfig& c) {
  if (c.werner && c.state) throw ValidationError("give either --werner or --state, not both");
  if (c.werner) {
    werner::check_p(*c.werner, true);
    return {werner::werner_state(*c.werner), *c.werner};
  }
  if (c.state) {
    DensityMatrix rho = io::read_density_matrix(*c.state);
    return {rho, werner_parameter(rho)};
  }
  throw ValidationError("no state given (use --werner <p> or --state <path>)");
}

/// Writes `body` to c.out, or to `out` when no path was given.
inline void emit(const RunConfig& c, std::ostream& out, const std::string& body, const std::string& suffix = "") {
  if (c.out.empty()) {
    out << body;
    return;
  }
  const std::string path = c.out + suffix;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path);
  f << body;
}

inline std::string header(const RunConfig& c) { return "# config: " + to_json(c).dump() + "\n"; }

inline void require_seeded_counts(const RunConfig& c, std::size_t min_samples) {
  if (c.samples < min_samples) throw ValidationError("--samples must be >= " + std::to_string(min_samples));
  if (c.N < 2) throw ValidationError("--N must be >= 2");
  if (c.threads < 1) throw ValidationError("--threads must be >= 1");
}

// ---------------------------------------------------------------------------

inline int cmd_ppt(const RunConfig& c, std::ostream& out) {
  const LoadedState s = load_state(c);
  const double mn = min_partial_transpose_eigenvalue(s.rho);
  json j{{"dimA", s.rho.dims().m},
         {"dimB", s.rho.dims().n},
         {"min_partial_transpose_eigenvalue", mn},
         {"ppt_entangled", ppt_is_entangled(s.rho)},
         {"conclusive", ppt_is_conclusive(s.rho.dims())}};
  emit(c, out, j.dump(2) + "\n");
  return kOk;
}

inline std::vector<double> anneal_ladder(double top) {
  std::vector<double> ladder;
  for (int k = 0; k <= 20; ++k) ladder.push_back(std::pow(10.0, std::log10(top) * k / 20.0));
  return ladder;
}

inline int cmd_probe(const RunConfig& c, std::ostream& out) {
  require_seeded_counts(c, 1);
  const LoadedState s = load_state(c);
  const EigenEnsemble ens = eigen_ensemble(s.rho);
  if (c.N < ens.rank()) throw ValidationError("--N must be at least the rank " + std::to_string(ens.rank()));
  const std::vector<double> betas = parse_beta(c.beta.empty() ? "1,10,100" : c.beta);

  json j;
  j["config"] = to_json(c);
  j["dims"] = {s.rho.dims().m, s.rho.dims().n};
  j["rank"] = ens.rank();
  j["ppt_min_eigenvalue"] = min_partial_transpose_eigenvalue(s.rho);
  j["ppt_entangled"] = ppt_is_entangled(s.rho);
  j["ppt_conclusive"] = ppt_is_conclusive(s.rho.dims());

  if (ens.rank() == 1) {
    // Pure state: every ensemble is a multiple of the single vector.
    const double e = concurrence_sq(ens.vector(0));
    j["mc"] = {{"haar_min_energy", e}, {"annealed_min_energy", e}, {"min_energy", e}};
  } else {
    const CostOperator cop = cost_operator(ens);
    const EnergySample sample = sample_haar_energies(cop, c.N, c.samples, derive_seed(c.seed, 1), c.threads);
    const CanonicalRun run = mc_canonical_energy(cop, c.N, anneal_ladder(1e5), derive_seed(c.seed, 2));
    json est = json::array();
    for (double b : betas) {
      const McEstimate e = reweight(sample, b);
      est.push_back({{"beta", b},
                     {"mean_energy", e.mean_energy},
                     {"std_error", e.std_error},
                     {"ess", e.effective_sample_size}});
    }
    j["mc"] = {{"N", c.N},
               {"samples", c.samples},
               {"haar_min_energy", sample.min()},
               {"annealed_min_energy", run.min_energy_seen},
               {"min_energy", std::min(sample.min(), run.min_energy_seen)},
               {"estimates", est},
               {"best_point", io::to_json(StiefelPoint(gram_schmidt(run.best_point), 1e-10))}};
  }

  if (s.werner_p && *s.werner_p > 0) {
    const double beta = betas.back() > 0 ? betas.back() : 10.0;
    const werner::SaddleResult sr = werner::saddle_search(beta, *s.werner_p, c.tol, 16, c.seed);
    j["werner"] = {{"p", *s.werner_p},
                   {"beta", beta},
                   {"residual", sr.residual_norm},
                   {"gamma_star", sr.gamma_star},
                   {"lambda_star", sr.lambda_star},
                   {"interior", sr.interior},
                   {"in_equipartition_region", sr.residual_norm < c.threshold}};
  }
  emit(c, out, j.dump(2) + "\n");
  return kOk;
}

inline int cmd_scan(const RunConfig& c, std::ostream& out) {
  const std::vector<double> grid = parse_p_grid(c.p_grid);
  const std::vector<double> betas = parse_beta(c.beta.empty() ? "10" : c.beta);
  if (betas.size() != 1 || !(betas[0] > 0)) throw ValidationError("scan takes a single positive --beta");
  const werner::EquipartitionScan scan = werner::equipartition_scan(grid, betas[0], c.threshold, c.seed, c.threads);

  std::ostringstream csv;
  csv << header(c) << "p,residual,gamma_star,lambda_star,interior\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& s = scan.saddles[k];
    csv << io::fmt(grid[k]) << ',' << io::fmt(s.residual_norm) << ',' << io::fmt(s.gamma_star) << ','
        << io::fmt(s.lambda_star) << ',' << (s.interior ? 1 : 0) << '\n';
  }
  const std::string onset = scan.region_start ? io::fmt(*scan.region_start) : "none";
  emit(c, out, csv.str());
  out << (c.out.empty() ? "# " : "") << "region_start: " << onset << '\n';
  return kOk;
}

inline int cmd_scaling(const RunConfig& c, std::ostream& out) {
  const std::vector<double> betas = parse_beta(c.beta.empty() ? "log:10:1e4:12" : c.beta);
  std::vector<std::pair<double, double>> points;
  std::vector<int> analytic;

  if (c.self_test) {
    for (double b : betas) {
      if (!(b > 0)) throw ValidationError("beta values must be positive");
      points.emplace_back(b, 2.75 / b);
      analytic.push_back(0);
    }
  } else {
    const double p = c.werner.value_or(0.9);
    werner::check_p(p, false);
    for (double b : betas)
      if (!(b > 0)) throw ValidationError("beta values must be positive");
    // Pre-scan at the smallest beta: outside the region there is nothing to fit.
    const werner::SaddleResult pre = werner::saddle_search(betas.front(), p, c.tol, 16, c.seed);
    if (!(pre.residual_norm < c.threshold))
      throw InfeasibleError("constraints unsatisfiable at p = " + io::fmt(p) + " (residual " +
                            io::fmt(pre.residual_norm) + ")");
    for (std::size_t k = 0; k < betas.size(); ++k) {
      try {
        const double e = werner::avg_energy_werner(betas[k], p, derive_seed(c.seed, k), c.threshold);
        points.emplace_back(betas[k], e);
        analytic.push_back(1);
      } catch (const InfeasibleError&) {
        points.emplace_back(betas[k], std::numeric_limits<double>::quiet_NaN());
        analytic.push_back(0);
      }
    }
  }

  std::vector<std::pair<double, double>> fit_points;
  for (std::size_t k = 0; k < points.size(); ++k)
    if (c.self_test || analytic[k]) fit_points.push_back(points[k]);
  const ScalingFit fit = fit_energy_scaling(fit_points);

  std::ostringstream csv;
  csv << header(c) << "beta,avg_energy,analytic_flag\n";
  for (std::size_t k = 0; k < points.size(); ++k)
    csv << io::fmt(points[k].first) << ','
        << (std::isnan(points[k].second) ? std::string("N/A") : io::fmt(points[k].second)) << ',' << analytic[k]
        << '\n';
  json footer{{"slope", fit.slope},
              {"intercept", fit.intercept},
              {"amplitude", fit.amplitude},
              {"delta", fit.delta},
              {"r_squared", fit.r_squared},
              {"points", fit_points.size()}};
  csv << "# " << footer.dump() << '\n';
  emit(c, out, csv.str());
  return kOk;
}

inline int cmd_mc(const RunConfig& c, std::ostream& out) {
  require_seeded_counts(c, 100);
  if (c.estimator != "metropolis" && c.estimator != "reweight")
    throw ValidationError("--estimator must be metropolis or reweight");
  const LoadedState s = load_state(c);
  const EigenEnsemble ens = eigen_ensemble(s.rho);
  if (ens.rank() < 2) throw ValidationError("mc needs a mixed state (rank >= 2)");
  if (c.N < ens.rank()) throw ValidationError("--N must be at least the rank " + std::to_string(ens.rank()));
  std::vector<double> betas = parse_beta(c.beta.empty() ? "log:1:1e5:21" : c.beta);
  std::sort(betas.begin(), betas.end());

  const CostOperator cop = cost_operator(ens);
  const EnergySample sample = sample_haar_energies(cop, c.N, c.samples, derive_seed(c.seed, 1), c.threads);
  const StateDensityEstimate hist = histogram_from_samples(sample.energies, c.bins);

  std::vector<McEstimate> rows;
  if (c.estimator == "reweight") {
    for (double b : betas) rows.push_back(reweight(sample, b));
  } else {
    rows = mc_canonical_energy(cop, c.N, betas, derive_seed(c.seed, 2)).estimates;
  }

  std::ostringstream energy_csv, density_csv;
  energy_csv << header(c);
  io::write_estimates_csv(energy_csv, rows);
  density_csv << header(c) << "# haar_min_energy: " << io::fmt(sample.min()) << '\n';
  io::write_histogram_csv(density_csv, hist);
  if (c.out.empty()) {
    out << energy_csv.str() << '\n' << density_csv.str();
  } else {
    emit(c, out, energy_csv.str(), "_energy.csv");
    emit(c, out, density_csv.str(), "_density.csv");
  }
  return kOk;
}

inline int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    if (c.command == "probe") return cmd_probe(c, out);
    if (c.command == "scan") return cmd_scan(c, out);
    if (c.command == "scaling") return cmd_scaling(c, out);
    if (c.command == "mc") return cmd_mc(c, out);
    if (c.command == "ppt") return cmd_ppt(c, out);
    throw ValidationError("unknown command \"" + c.command + "\"");
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

/// Parses argv (flags override --config values) and runs the command.
inline int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Separability probes via ensemble statistical mechanics"};
  RunConfig flags;
  std::string config_path;
  double werner_p = 0;
  std::string state_path;

  app.add_option("command", flags.command, "probe | scan | scaling | mc | ppt")
      ->check(CLI::IsMember({"probe", "scan", "scaling", "mc", "ppt"}));
  auto* o_werner = app.add_option("--werner", werner_p, "Werner state W(p)");
  auto* o_state = app.add_option("--state", state_path, "density matrix JSON file");
  auto* o_beta = app.add_option("--beta", flags.beta, "beta value, list a,b,c or log:a:b:n");
  auto* o_grid = app.add_option("--p-grid", flags.p_grid, "p grid a:step:b");
  auto* o_samples = app.add_option("--samples", flags.samples, "Monte Carlo samples");
  auto* o_seed = app.add_option("--seed", flags.seed, "RNG seed");
  auto* o_tol = app.add_option("--tol", flags.tol, "saddle search tolerance");
  auto* o_thr = app.add_option("--threshold", flags.threshold, "equipartition residual threshold");
  auto* o_n = app.add_option("--N", flags.N, "ensemble length");
  auto* o_bins = app.add_option("--bins", flags.bins, "histogram bins");
  auto* o_est = app.add_option("--estimator", flags.estimator, "metropolis | reweight (mc command)");
  auto* o_threads = app.add_option("--threads", flags.threads, "worker threads");
  auto* o_out = app.add_option("--out", flags.out, "output path");
  auto* o_self = app.add_flag("--self-test", flags.self_test, "synthetic scaling data");
  app.add_option("--config", config_path, "JSON config file; flags take precedence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kValidation;
  }

  RunConfig c;
  try {
    if (!config_path.empty()) apply_json(c, io::read_json_file(config_path));
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  if (!flags.command.empty()) c.command = flags.command;
  if (o_werner->count()) c.werner = werner_p;
  if (o_state->count()) c.state = state_path;
  if (o_beta->count()) c.beta = flags.beta;
  if (o_grid->count()) c.p_grid = flags.p_grid;
  if (o_samples->count()) c.samples = flags.samples;
  if (o_seed->count()) c.seed = flags.seed;
  if (o_tol->count()) c.tol = flags.tol;
  if (o_thr->count()) c.threshold = flags.threshold;
  if (o_n->count()) c.N = flags.N;
  if (o_bins->count()) c.bins = flags.bins;
  if (o_est->count()) c.estimator = flags.estimator;
  if (o_threads->count()) c.threads = flags.threads;
  if (o_out->count()) c.out = flags.out;
  if (o_self->count()) c.self_test = true;
  if (c.command.empty()) {
    err << "error: no command given\n";
    return kValidation;
  }
  return run(c, out, err);
}

}  // namespace sepstat::cli
