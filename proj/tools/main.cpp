// gqmi: batch CLI for sampling probability-phase ensembles, estimating
// mutual information and information dimension, scanning parameter grids,
// running the spin-chain study and checking the built-in invariant suite.
//
// Exit codes: 0 success, 2 usage error, 3 input error, 4 verification
// failure.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gqmi/io.hpp"
#include "gqmi/reference.hpp"
#include "gqmi/samplers.hpp"
#include "gqmi/spinchain.hpp"
#include "gqmi/verify.hpp"

namespace {

using namespace gqmi;
using nlohmann::json;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

double unit_factor(const std::string& units) {
  if (units == "nats") return 1.0;
  if (units == "bits") return 1.0 / std::numbers::ln2;
  throw UsageError("--units must be nats or bits");
}

// ---- flag helpers -------------------------------------------------------

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

/// Inclusive range "start:stop:count".
struct Range {
  double start = 0.0, stop = 0.0;
  int count = 1;

  std::vector<double> values() const {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) {
      v.push_back(count == 1 ? start : start + i * (stop - start) / (count - 1));
    }
    return v;
  }
};

Range parse_range(const std::string& text, const char* flag) {
  Range r;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d", &r.start, &r.stop, &r.count) != 3 || r.count < 1) {
    throw UsageError(std::string(flag) + ": expected start:stop:count, got '" + text + "'");
  }
  return r;
}

PartitionSpec parse_scales(const std::string& dyadic_range, const std::string& eps_list) {
  if (!eps_list.empty()) {
    PartitionSpec spec;
    spec.scales = parse_list(eps_list, "--eps");
    spec.validate();
    return spec;
  }
  double k0 = 3, k1 = 10;
  if (!dyadic_range.empty() && std::sscanf(dyadic_range.c_str(), "%lf:%lf", &k0, &k1) != 2) {
    throw UsageError("--scales: expected k_min:k_max (dyadic exponents)");
  }
  if (k0 >= k1) throw UsageError("--scales: k_min must be below k_max");
  PartitionSpec spec;
  for (double k = k0; k <= k1 + 1e-9; k += 1.0) spec.scales.push_back(std::pow(2.0, -k));
  spec.validate();
  return spec;
}

// ---- sampling -----------------------------------------------------------

struct GeneratorArgs {
  std::string name;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;
  std::vector<double> p0, phi0;
  McmcConfig mcmc;
};

double require_param(const GeneratorArgs& g, const std::string& key) {
  auto it = g.params.find(key);
  if (it == g.params.end()) {
    throw UsageError("--gen " + g.name + " requires --" + key);
  }
  return it->second;
}

Ensemble run_generator(const GeneratorArgs& g) {
  if (g.n <= 0) throw UsageError("--n must be positive");
  if (g.name == "dirac") {
    if (g.p0.empty()) throw UsageError("--gen dirac requires --p0 (and optionally --phi0)");
    Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(g.p0.data(), g.p0.size());
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(p.size());
    if (!g.phi0.empty()) {
      if (g.phi0.size() != g.p0.size()) throw UsageError("--phi0 must match --p0 in length");
      phi = Eigen::Map<const Eigen::VectorXd>(g.phi0.data(), g.phi0.size());
    }
    return sample_dirac(make_state_point(p, phi), g.n);
  }
  if (g.name == "haar") {
    const auto dim = static_cast<int>(g.params.count("dim") ? g.params.at("dim") : 2);
    return sample_haar(dim, g.n, g.seed);
  }
  if (g.name == "diagonal") {
    if (g.p0.empty()) throw UsageError("--gen diagonal requires --p0 (simplex point)");
    return sample_diagonal(Eigen::Map<const Eigen::VectorXd>(g.p0.data(), g.p0.size()), g.n,
                           g.seed);
  }
  if (g.name == "naive-gaussian") {
    const double p0 = g.p0.size() == 1 ? g.p0[0] : require_param(g, "p0");
    const double phi0 = g.phi0.size() == 1 ? g.phi0[0] : require_param(g, "phi0");
    return sample_naive_gaussian(p0, phi0, require_param(g, "sigma-p"),
                                 require_param(g, "sigma-phi"), g.n, g.seed);
  }
  if (g.name == "fs-gaussian") {
    const double p0 = g.p0.size() == 1 ? g.p0[0] : 0.5;
    const double phi0 = g.phi0.size() == 1 ? g.phi0[0] : std::numbers::pi;
    StatePoint x0 = make_state_point((Eigen::VectorXd(2) << 1.0 - p0, p0).finished(),
                                     (Eigen::VectorXd(2) << 0.0, phi0).finished());
    return sample_fs_gaussian(x0, require_param(g, "sigma"), g.n, g.seed, g.mcmc);
  }
  if (g.name == "spiral") {
    const double delta = require_param(g, "delta");
    if (delta < 0.0 || delta > std::numbers::pi) {
      throw UsageError("--delta outside the valid range [0, pi]");
    }
    return sample_spiral(delta, g.n, g.seed);
  }
  if (g.name == "canonical") {
    return sample_canonical(require_param(g, "beta"), require_param(g, "g"), g.n, g.seed, g.mcmc);
  }
  throw UsageError("unknown generator '" + g.name +
                   "' (expected dirac, haar, diagonal, naive-gaussian, fs-gaussian, spiral or "
                   "canonical)");
}

// ---- estimate reports ---------------------------------------------------

json scaled(const json& j, double f) {
  // display-unit conversion applied at serialization time
  json out = j;
  for (const char* key : {"intercept", "I_fit", "I", "plateau_diag", "H", "I_eps", "kl"}) {
    if (out.contains(key) && out[key].is_number()) out[key] = out[key].get<double>() * f;
  }
  if (out.contains("scales")) {
    for (auto& s : out["scales"]) s = scaled(s, f);
  }
  return out;
}

json estimate_report(const Ensemble& e, const PartitionSpec& spec, double f) {
  HistogramAccumulator acc(spec, e.block_dims());
  acc.add(e);
  json rep;
  rep["joint"] = scaled(to_json(acc.scaling_fit(Marginal::joint)), f);
  rep["p_marginal"] = scaled(to_json(acc.scaling_fit(Marginal::probability)), f);
  rep["phi_marginal"] = scaled(to_json(acc.scaling_fit(Marginal::phase)), f);
  rep["mi"] = scaled(to_json(acc.mutual_information()), f);
  rep["kl_phi"] = scaled(to_json(acc.kl_phase_to_uniform()), f);
  return rep;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---- worker pool for scans ----------------------------------------------

int worker_count() {
  if (const char* env = std::getenv("GQMI_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs jobs indexed 0..count-1 on a bounded pool; each job writes its own
/// output slot, so emission stays in grid order.
template <typename Job>
void run_pool(int count, int threads, Job&& job) {
  std::atomic<int> next{0};
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      job(i);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = std::min(threads, count);
  pool.reserve(spawn);
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

// ---- subcommands ---------------------------------------------------------

struct CommonSampleFlags {
  GeneratorArgs gen;
  std::string p0_text, phi0_text;

  void attach(CLI::App* cmd) {
    cmd->add_option("--gen", gen.name, "generator name")->required();
    cmd->add_option("--n", gen.n, "sample count")->required();
    cmd->add_option("--seed", gen.seed, "RNG seed (required: no silent default)")->required();
    cmd->add_option("--p0", p0_text, "probability coordinate(s), comma separated");
    cmd->add_option("--phi0", phi0_text, "phase coordinate(s), comma separated");
    for (const char* key : {"delta", "beta", "g", "sigma", "sigma-p", "sigma-phi", "dim"}) {
      cmd->add_option_function<double>(
          std::string("--") + key, [this, key](double v) { gen.params[key] = v; },
          std::string("generator parameter ") + key);
    }
    cmd->add_option("--mcmc-sigma-p", gen.mcmc.sigma_p, "MH proposal step in p");
    cmd->add_option("--mcmc-sigma-phi", gen.mcmc.sigma_phi, "MH proposal step in phi");
    cmd->add_option("--burn-in", gen.mcmc.burn_in, "MH burn-in steps per chain");
    cmd->add_option("--thinning", gen.mcmc.thinning, "MH thinning stride");
    cmd->add_option("--chains", gen.mcmc.chains, "MH chain count");
  }

  void finalize() {
    if (!p0_text.empty()) gen.p0 = parse_list(p0_text, "--p0");
    if (!phi0_text.empty()) gen.phi0 = parse_list(phi0_text, "--phi0");
  }
};

int cmd_sample(CommonSampleFlags& flags, const std::string& out_path) {
  flags.finalize();
  const Ensemble e = run_generator(flags.gen);
  write_ensemble_jsonl(out_path, e);
  return 0;
}

int cmd_estimate(const std::string& in_path, const std::string& out_path,
                 const PartitionSpec& spec, const std::string& units) {
  const Ensemble e = read_ensemble_jsonl(in_path);
  json rep = estimate_report(e, spec, unit_factor(units));
  rep["config"] = {{"input", in_path}, {"scales", spec.scales}, {"units", units}};
  if (out_path.empty()) {
    std::cout << rep.dump(2) << '\n';
  } else {
    write_json(out_path, rep);
  }
  return 0;
}

int cmd_scan(CommonSampleFlags& flags, std::vector<std::string>& scan_specs,
             const std::string& out_path, const PartitionSpec& spec, const std::string& units) {
  flags.finalize();
  if (scan_specs.empty() || scan_specs.size() > 2) {
    throw UsageError("--scan takes one or two name=start:stop:count specifications");
  }
  struct Axis {
    std::string name;
    std::vector<double> values;
  };
  std::vector<Axis> axes;
  for (const auto& text : scan_specs) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw UsageError("--scan: expected name=start:stop:count");
    axes.push_back({text.substr(0, eq), parse_range(text.substr(eq + 1), "--scan").values()});
  }

  const int rows = static_cast<int>(
      axes.size() == 1 ? axes[0].values.size() : axes[0].values.size() * axes[1].values.size());
  const double f = unit_factor(units);

  std::vector<std::vector<double>> out_rows(rows);
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  run_pool(rows, worker_count(), [&](int index) {
    if (failed.load()) return;
    try {
      GeneratorArgs g = flags.gen;
      std::vector<double> coords;
      if (axes.size() == 1) {
        coords = {axes[0].values[index]};
      } else {
        const int inner = static_cast<int>(axes[1].values.size());
        coords = {axes[0].values[index / inner], axes[1].values[index % inner]};
      }
      for (std::size_t a = 0; a < axes.size(); ++a) g.params[axes[a].name] = coords[a];
      g.seed = flags.gen.seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
      const Ensemble e = run_generator(g);
      HistogramAccumulator acc(spec, e.block_dims());
      acc.add(e);
      const MIResult mi = acc.mutual_information();
      const ScalingReport joint = acc.scaling_fit(Marginal::joint);
      const ScalingReport pm = acc.scaling_fit(Marginal::probability);
      const ScalingReport fm = acc.scaling_fit(Marginal::phase);
      const KlPhiReport kl = acc.kl_phase_to_uniform();
      std::vector<double> row = coords;
      for (double v :
           {mi.value * f, mi.di, mi.plateau_diag * f, joint.dimension, joint.intercept * f,
            pm.dimension, pm.intercept * f, fm.dimension, fm.intercept * f, kl.intercept * f,
            e.meta().acceptance_rate}) {
        row.push_back(v);
      }
      out_rows[index] = std::move(row);
    } catch (const std::exception& ex) {
      std::scoped_lock lock(error_mutex);
      if (!failed.exchange(true)) first_error = ex.what();
    }
  });
  if (failed.load()) throw std::runtime_error("scan failed: " + first_error);

  CsvWriter csv(out_path);
  std::vector<std::string> header;
  for (const auto& ax : axes) header.push_back(ax.name);
  for (const char* name : {"I", "D_I", "plateau_diag", "D_joint", "H_G", "D_p", "H_p", "D_phi",
                           "H_phi", "KL_phi", "acceptance_rate"}) {
    header.push_back(name);
  }
  csv.header(header);
  for (const auto& row : out_rows) csv.row(row);

  json sidecar;
  sidecar["generator"] = flags.gen.name;
  sidecar["n"] = flags.gen.n;
  sidecar["seed"] = flags.gen.seed;
  sidecar["params"] = flags.gen.params;
  for (const auto& ax : axes) sidecar["grid"][ax.name] = ax.values;
  sidecar["scales"] = spec.scales;
  sidecar["units"] = units;
  write_json(out_path + ".config.json", sidecar);
  return 0;
}

int cmd_chain(ChainConfig cfg, int site_origin, const PartitionSpec& spec, double report_eps,
              const std::string& out_path, const std::string& units, std::uint64_t seed,
              bool seed_given) {
  if (site_origin == 1) cfg.system_site -= 1;  // 1-based site labels
  cfg.validate();
  const double f = unit_factor(units);
  const auto rows = mi_time_series(cfg, spec, report_eps);

  CsvWriter csv(out_path);
  std::vector<std::string> header = {"t", "I", "D_I", "plateau_diag", "n_points", "drop_mass"};
  for (double eps : spec.scales) header.push_back("I_eps_" + format_double(eps));
  csv.header(header);
  for (const auto& row : rows) {
    std::vector<double> cells = {row.t,
                                 row.mi * f,
                                 row.di,
                                 row.plateau_diag * f,
                                 static_cast<double>(row.points),
                                 row.drop_mass};
    for (double v : row.i_eps) cells.push_back(v * f);
    csv.row(cells);
  }

  json sidecar;
  sidecar["L"] = cfg.sites;
  sidecar["J"] = cfg.coupling;
  sidecar["alpha"] = cfg.alpha;
  sidecar["h"] = cfg.field;
  sidecar["site_index_0based"] = cfg.system_site;
  sidecar["site_label_1based"] = cfg.system_site + 1;
  sidecar["initial_state"] = cfg.initial_state;
  sidecar["t_max"] = cfg.t_max;
  sidecar["dt"] = cfg.dt;
  sidecar["scales"] = spec.scales;
  sidecar["reporting_eps"] = report_eps;
  sidecar["units"] = units;
  if (seed_given) sidecar["seed"] = seed;
  write_json(out_path + ".config.json", sidecar);
  return 0;
}

int cmd_coherence(const std::string& in_path, const std::string& out_path,
                  const PartitionSpec& spec, const std::string& units) {
  const Ensemble e = read_ensemble_jsonl(in_path);
  const double f = unit_factor(units);
  SurplusReport sr = coherence_surplus(e, spec);
  GapReport gr = entropy_gap_check(e, spec);
  json rep = to_json(sr);
  for (const char* key : {"I", "KL_phi", "C", "delta_C", "min_delta_c_eps"}) {
    if (rep[key].is_number()) rep[key] = rep[key].get<double>() * f;
  }
  for (auto& ps : rep["per_scale"]) {
    for (const char* key : {"I_eps", "kl_eps", "delta_c_eps"}) {
      ps[key] = ps[key].get<double>() * f;
    }
  }
  rep["entropy_gap"] = to_json(gr);
  rep["config"] = {{"input", in_path}, {"scales", spec.scales}, {"units", units}};
  if (out_path.empty()) {
    std::cout << rep.dump(2) << '\n';
  } else {
    write_json(out_path, rep);
  }
  return 0;
}

int cmd_verify(const std::string& only) {
  const verify::Suite suite = verify::run(only);
  for (const auto& r : suite.results()) {
    std::printf("%s %s (%s)\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  }
  const int failures = suite.failures();
  std::printf("%d/%zu checks passed\n", static_cast<int>(suite.results().size()) - failures,
              suite.results().size());
  return failures == 0 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probability-phase mutual information toolkit"};
  app.require_subcommand(1);
  // the chain subcommand owns --h (transverse field); help is --help only
  app.set_help_flag("--help", "print help");
  app.option_defaults()->ignore_case(false);

  std::string units = "nats";
  app.add_option("--units", units, "display units for entropies (nats or bits)");

  auto* sample = app.add_subcommand("sample", "draw an ensemble and write JSONL");
  CommonSampleFlags sample_flags;
  sample_flags.attach(sample);
  std::string sample_out;
  sample->add_option("--out", sample_out, "output JSONL path")->required();

  auto* estimate = app.add_subcommand("estimate", "scaling, MI and KL reports for a JSONL file");
  std::string est_in, est_out, est_scales, est_eps;
  estimate->add_option("--in", est_in, "input JSONL path")->required();
  estimate->add_option("--out", est_out, "output JSON path (stdout when omitted)");
  estimate->add_option("--scales", est_scales, "dyadic exponent range k_min:k_max (default 3:10)");
  estimate->add_option("--eps", est_eps, "explicit scale list, comma separated");

  auto* scan = app.add_subcommand("scan", "estimate over a parameter grid, write CSV");
  CommonSampleFlags scan_flags;
  scan_flags.attach(scan);
  std::vector<std::string> scan_specs;
  std::string scan_out, scan_scales, scan_eps;
  scan->add_option("--scan", scan_specs, "axis spec name=start:stop:count (repeat for 2-D)")
      ->required();
  scan->add_option("--out", scan_out, "output CSV path")->required();
  scan->add_option("--scales", scan_scales, "dyadic exponent range k_min:k_max");
  scan->add_option("--eps", scan_eps, "explicit scale list");

  auto* chain = app.add_subcommand("chain", "spin-chain projected-ensemble time series");
  chain->set_help_flag("--help", "print help");
  ChainConfig cfg;
  int site_origin = 0;
  std::string chain_out, chain_scales, chain_eps;
  double report_eps = chain_reporting_eps;
  std::uint64_t chain_seed = 0;
  chain->add_option("--L", cfg.sites, "site count (2..16)");
  chain->add_option("--J", cfg.coupling, "Ising coupling");
  chain->add_option("--alpha", cfg.alpha, "power-law exponent");
  chain->add_option("--h", cfg.field, "transverse field");
  chain->add_option("--site", cfg.system_site, "system qubit index");
  chain->add_option("--site-origin", site_origin, "0 or 1: whether --site is 0- or 1-based");
  chain->add_option("--init", cfg.initial_state,
                    "product state: up, down, neel, plus, minus or a {u,d,+,-} string");
  chain->add_option("--tmax", cfg.t_max, "final time");
  chain->add_option("--dt", cfg.dt, "time step");
  chain->add_option("--scales", chain_scales, "dyadic exponent range for the MI ladder");
  chain->add_option("--eps", chain_eps, "explicit MI scale list");
  chain->add_option("--report-eps", report_eps, "scale used for the I column");
  auto* chain_seed_opt = chain->add_option("--seed", chain_seed, "echoed in the sidecar");
  chain->add_option("--out", chain_out, "output CSV path")->required();

  auto* coherence = app.add_subcommand("coherence", "coherence surplus and entropy-gap report");
  std::string coh_in, coh_out, coh_scales, coh_eps;
  coherence->add_option("--in", coh_in, "input JSONL path")->required();
  coherence->add_option("--out", coh_out, "output JSON path (stdout when omitted)");
  coherence->add_option("--scales", coh_scales, "dyadic exponent range k_min:k_max");
  coherence->add_option("--eps", coh_eps, "explicit scale list");

  auto* verify_cmd = app.add_subcommand("verify", "run the built-in verification suite");
  std::string only = "all";
  verify_cmd->add_option("--only", only,
                         "section: all, samplers, estimators, axioms, theorem1, spinchain");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sample->parsed()) return cmd_sample(sample_flags, sample_out);
    if (estimate->parsed()) {
      return cmd_estimate(est_in, est_out, parse_scales(est_scales, est_eps), units);
    }
    if (scan->parsed()) {
      return cmd_scan(scan_flags, scan_specs, scan_out, parse_scales(scan_scales, scan_eps),
                      units);
    }
    if (chain->parsed()) {
      PartitionSpec spec = chain_scales.empty() && chain_eps.empty()
                               ? chain_partition_spec()
                               : parse_scales(chain_scales, chain_eps);
      return cmd_chain(cfg, site_origin, spec, report_eps, chain_out, units, chain_seed,
                       !chain_seed_opt->empty());
    }
    if (coherence->parsed()) {
      PartitionSpec spec = coh_scales.empty() && coh_eps.empty() ? PartitionSpec::dyadic(3, 6)
                                                                 : parse_scales(coh_scales, coh_eps);
      return cmd_coherence(coh_in, coh_out, spec, units);
    }
    if (verify_cmd->parsed()) return cmd_verify(only);
  } catch (const UsageError& ex) {
    std::cerr << "usage error: " << ex.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "usage error: " << ex.what() << '\n';
    return 2;
  } catch (const IoError& ex) {
    std::cerr << "input error: " << ex.what() << '\n';
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
