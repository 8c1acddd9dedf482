// Command-line interface for lattice-constant estimation on spectrally
// represented max-stable fields.
//
// Commands:
//   estimate   ratio or direct Monte Carlo estimate of the lattice constant
//   sweep      common-random-number sweep over decreasing delta + extrapolation
//   kernel     deterministic quadrature for kernel fields (+ quotient identity)
//   family     aggregate constant of a one-parameter variance family
//   maxstable  Poisson-mixture simulation of the associated max-stable field
//   validate   distributional self-checks (mean-one, shift invariance, identity)
//
// Output is CSV (default) or JSONL (--format jsonl), opening with the resolved
// configuration and carrying a fingerprint of everything that affects the
// numbers. Identical configurations produce byte-identical output regardless
// of --workers; elapsed times print as 0.000 unless --timings is given.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure
// (divergence suspected, non-integrable, embedding not PSD, ...),
// 4 validation tolerance exceeded.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pickands/pickands.hpp"

using nlohmann::json;
using namespace pickands;

namespace {

// ---------------------------------------------------------------------------
// variance-function and spec parsing

VarianceFunction parse_vf_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("variance json: expected an object with a \"kind\" field");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") return VarianceFunction::linear(j.at("c").get<double>());
  if (kind == "fbm")
    return VarianceFunction::fbm(j.at("alpha").get<double>(),
                                 j.value("scale", 1.0));
  if (kind == "sum") {
    const auto& terms = j.at("terms");
    if (!terms.is_array() || terms.size() < 2)
      throw ConfigError("variance json: \"sum\" needs an array of >= 2 terms");
    VarianceFunction acc = parse_vf_json(terms[0]);
    for (std::size_t i = 1; i < terms.size(); ++i)
      acc = VarianceFunction::sum(acc, parse_vf_json(terms[i]));
    return acc;
  }
  if (kind == "scaled")
    return VarianceFunction::scaled(j.at("amplitude").get<double>(),
                                    parse_vf_json(j.at("base")));
  if (kind == "normsphere") {
    const double lambda = j.at("lambda").get<double>();
    const int d = j.at("d").get<int>();
    const auto& r = j.at("r");
    const std::string rkind = r.at("kind").get<std::string>();
    if (rkind == "const") {
      const double v = r.at("value").get<double>();
      return VarianceFunction::norm_sphere(lambda, d, [v](const double*) { return v; });
    }
    if (rkind == "axis_cosine") {
      const double base = r.at("base").get<double>();
      const double amp = r.at("amp").get<double>();
      return VarianceFunction::norm_sphere(lambda, d, [base, amp](const double* u) {
        return base + amp * u[0];
      });
    }
    throw ConfigError("variance json: unknown sphere profile kind \"" + rkind + "\"");
  }
  throw ConfigError("variance json: unknown kind \"" + kind + "\"");
}

// spec string: head:key=val,... -- unknown numeric keys are hoisted into
// `extras` and act as defaults for the estimator options of the command.
struct ParsedSpec {
  FieldSpec spec = BernoulliSpec{0.5};
  std::map<std::string, double> extras;
  std::string canonical;
};

ParsedSpec parse_spec_string(const std::string& s) {
  const auto colon = s.find(':');
  const std::string head = s.substr(0, colon);
  std::vector<std::string> tokens;
  if (colon != std::string::npos) {
    std::stringstream ss(s.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) tokens.push_back(tok);
  }
  std::map<std::string, std::string> kv;
  std::vector<std::string> bare;
  for (const auto& t : tokens) {
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      bare.push_back(t);
    else
      kv[t.substr(0, eq)] = t.substr(eq + 1);
  }
  const auto num = [&kv](const std::string& key, std::optional<double> dflt =
                                                     std::nullopt) -> double {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      if (dflt) return *dflt;
      throw ConfigError("spec string: missing required key \"" + key + "\"");
    }
    try {
      const double v = std::stod(it->second);
      kv.erase(it);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("spec string: key \"" + key + "\" is not a number");
    }
  };

  ParsedSpec out;
  if (head == "linear") {
    out.spec = LogGaussianSpec{VarianceFunction::linear(num("c"))};
  } else if (head == "fbm") {
    out.spec = LogGaussianSpec{VarianceFunction::fbm(num("alpha"), num("scale", 1.0))};
  } else if (head == "bernoulli") {
    out.spec = BernoulliSpec{num("p", 0.5)};
  } else if (head == "stationary") {
    if (bare.empty() || bare[0] != "ou")
      throw ConfigError("spec string: stationary covariance must be \"ou\"");
    out.spec = StationaryLogGaussianSpec{num("theta", 1.0), num("sigma2", 1.0)};
  } else if (head == "kernel") {
    Kernel L = Kernel::gaussian();
    bool have = false;
    if (!bare.empty()) {
      if (bare[0] == "gaussian") L = Kernel::gaussian();
      else if (bare[0] == "laplace") L = Kernel::laplace();
      else if (bare[0] == "indicator") L = Kernel::indicator();
      else throw ConfigError("spec string: unknown kernel \"" + bare[0] + "\"");
      have = true;
    }
    if (const auto it = kv.find("file"); it != kv.end()) {
      L = Kernel::from_csv(it->second);
      kv.erase(it);
      have = true;
    }
    if (!have) throw ConfigError("spec string: kernel needs a shape name or file=...");
    out.spec = KernelSpec{std::move(L), num("p_sd", 1.0)};
  } else {
    throw ConfigError("spec string: unknown spectral family \"" + head + "\"");
  }

  // remaining numeric keys become estimator-option defaults
  for (const auto& [k, v] : kv) {
    try {
      out.extras[k] = std::stod(v);
    } catch (const std::exception&) {
      throw ConfigError("spec string: key \"" + k + "\" is not a number");
    }
  }
  out.canonical = describe_spec(out.spec);
  return out;
}

ParsedSpec parse_spec_json(const json& j) {
  ParsedSpec out;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "lognormal")
    out.spec = LogGaussianSpec{parse_vf_json(j.at("variance"))};
  else if (kind == "stationary")
    out.spec = StationaryLogGaussianSpec{j.value("theta", 1.0), j.value("sigma2", 1.0)};
  else if (kind == "bernoulli")
    out.spec = BernoulliSpec{j.value("p", 0.5)};
  else if (kind == "kernel") {
    Kernel L = Kernel::gaussian();
    const std::string shape = j.value("shape", std::string("gaussian"));
    if (shape == "gaussian") L = Kernel::gaussian();
    else if (shape == "laplace") L = Kernel::laplace();
    else if (shape == "indicator") L = Kernel::indicator();
    else if (shape == "file") L = Kernel::from_csv(j.at("file").get<std::string>());
    else throw ConfigError("spec json: unknown kernel shape \"" + shape + "\"");
    out.spec = KernelSpec{std::move(L), j.value("p_sd", 1.0)};
  } else {
    throw ConfigError("spec json: unknown spectral family \"" + kind + "\"");
  }
  out.canonical = describe_spec(out.spec);
  return out;
}

// ---------------------------------------------------------------------------
// option resolution: CLI > spec-string extras > config file > default

struct Resolver {
  const json* cfg = nullptr;
  const std::map<std::string, double>* extras = nullptr;

  double num(const CLI::Option* opt, double cli_value, const std::string& name,
             double dflt) const {
    if (opt && opt->count() > 0) return cli_value;
    if (extras) {
      const auto it = extras->find(name);
      if (it != extras->end()) return it->second;
    }
    if (cfg && cfg->contains(name) && (*cfg)[name].is_number())
      return (*cfg)[name].get<double>();
    return dflt;
  }
  std::uint64_t uint(const CLI::Option* opt, std::uint64_t cli_value, const std::string& name,
                     std::uint64_t dflt) const {
    return static_cast<std::uint64_t>(
        num(opt, static_cast<double>(cli_value), name, static_cast<double>(dflt)));
  }
  std::string str(const CLI::Option* opt, const std::string& cli_value, const std::string& name,
                  const std::string& dflt) const {
    if (opt && opt->count() > 0) return cli_value;
    if (cfg && cfg->contains(name) && (*cfg)[name].is_string())
      return (*cfg)[name].get<std::string>();
    return dflt;
  }
};

// ---------------------------------------------------------------------------
// output emission

struct OutputSink {
  std::string format = "csv";  // csv | jsonl
  std::string path;            // empty = stdout
  bool timings = false;

  std::ofstream file;
  std::ostream* os = &std::cout;

  void open() {
    if (!path.empty()) {
      file.open(path);
      if (!file) throw ConfigError("cannot open output file: " + path);
      os = &file;
    }
  }

  std::string elapsed(double seconds) const {
    return io::format_fixed(timings ? seconds : 0.0, 3);
  }
};

constexpr const char* kCsvHeader =
    "command,spec,delta,eta,T,R,reps,seed,estimate,stderr,elapsed_s,fingerprint";

std::string fingerprint_of(const json& cfg) {
  json canon = cfg;
  for (const char* k : {"workers", "output", "progress", "timings", "format"}) canon.erase(k);
  return io::hex16(io::fnv1a64(canon.dump()));
}

struct Row {
  std::string command, spec;
  std::optional<double> delta, eta, T, R;
  std::uint64_t reps = 0;
  std::uint64_t seed = 0;
  double estimate = 0.0, stderr_est = 0.0;
  double elapsed_s = 0.0;
};

void emit(OutputSink& sink, const json& cfg, const std::vector<Row>& rows,
          const std::vector<json>& extra_records = {}) {
  const std::string fp = fingerprint_of(cfg);
  std::ostream& os = *sink.os;
  const auto optnum = [](const std::optional<double>& v) {
    return v ? io::format_g17(*v) : std::string();
  };
  if (sink.format == "csv") {
    os << "# config: " << cfg.dump() << "\n";
    os << kCsvHeader << "\n";
    for (const auto& r : rows) {
      os << r.command << ',' << io::csv_field(r.spec) << ',' << optnum(r.delta) << ','
         << optnum(r.eta) << ',' << optnum(r.T) << ',' << optnum(r.R) << ',' << r.reps << ','
         << r.seed << ',' << io::format_g17(r.estimate) << ',' << io::format_g17(r.stderr_est)
         << ',' << sink.elapsed(r.elapsed_s) << ',' << fp << "\n";
    }
    for (const auto& rec : extra_records) os << "# " << rec.value("record", "info") << ": "
                                             << rec.dump() << "\n";
  } else {
    json head = cfg;
    head["record"] = "config";
    head["fingerprint"] = fp;
    os << head.dump() << "\n";
    for (const auto& r : rows) {
      json j;
      j["record"] = "row";
      j["command"] = r.command;
      j["spec"] = r.spec;
      if (r.delta) j["delta"] = *r.delta;
      if (r.eta) j["eta"] = *r.eta;
      if (r.T) j["T"] = *r.T;
      if (r.R) j["R"] = *r.R;
      j["reps"] = r.reps;
      j["seed"] = r.seed;
      j["estimate"] = r.estimate;
      j["stderr"] = r.stderr_est;
      j["elapsed_s"] = sink.elapsed(r.elapsed_s);
      j["fingerprint"] = fp;
      os << j.dump() << "\n";
    }
    for (const auto& rec : extra_records) os << rec.dump() << "\n";
  }
  os.flush();
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lattice-constant estimation for spectrally represented max-stable fields"};
  app.require_subcommand(1);

  // shared options (registered per subcommand)
  struct Common {
    std::string spec_str, config_path, format = "csv", output;
    std::uint64_t reps = 10000, seed = 1;
    int workers = 0, d = 1;
    bool progress = false, timings = false;
    CLI::Option *o_reps = nullptr, *o_seed = nullptr;
  };
  const auto add_common = [](CLI::App* cmd, Common& c, bool needs_spec = true) {
    auto* s = cmd->add_option("--spec", c.spec_str,
                              "spectral process, e.g. fbm:alpha=0.5,scale=2 | linear:c=1 | "
                              "kernel:indicator | bernoulli:p=0.5 | stationary:ou,theta=1");
    if (needs_spec) s->required(false);
    cmd->add_option("--config", c.config_path, "JSON config file (lowest-precedence defaults)");
    c.o_reps = cmd->add_option("--reps", c.reps, "Monte Carlo replicas");
    c.o_seed = cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--workers", c.workers, "worker threads (0 = auto, PICKANDS_WORKERS)");
    cmd->add_option("--d", c.d, "dimension of the parameter space");
    cmd->add_option("--format", c.format, "output format: csv | jsonl")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    cmd->add_option("--output", c.output, "output file (default stdout)");
    cmd->add_flag("--progress", c.progress, "progress notes on stderr");
    cmd->add_flag("--timings", c.timings, "print real elapsed seconds instead of 0.000");
  };

  // --- estimate ---
  auto* est = app.add_subcommand("estimate", "estimate the lattice constant");
  Common ec;
  add_common(est, ec);
  std::string est_method = "dy";
  double e_delta = 0.0, e_eta = 0.0, e_R = 10.0, e_h = 0.01, e_T = 10.0;
  est->add_option("--method", est_method, "dy (ratio) | direct")
      ->check(CLI::IsMember({"dy", "direct"}));
  auto* eo_delta = est->add_option("--delta", e_delta, "lattice spacing (0 = continuum)");
  auto* eo_eta = est->add_option("--eta", e_eta, "denominator lattice spacing");
  auto* eo_R = est->add_option("--R", e_R, "ratio window half-width");
  auto* eo_h = est->add_option("--mesh", e_h, "simulation mesh for continuum suprema");
  auto* eo_T = est->add_option("--T", e_T, "direct-estimator box size");

  // --- sweep ---
  auto* swp = app.add_subcommand("sweep", "constant vs delta with common random numbers");
  Common sc;
  add_common(swp, sc);
  std::string sweep_deltas = "1,0.5,0.25", sweep_method = "ratio";
  double s_eta = 0.0, s_R = 10.0, s_h = 0.01, s_T = 10.0;
  swp->add_option("--deltas", sweep_deltas, "comma-separated strictly decreasing deltas");
  swp->add_option("--method", sweep_method, "ratio | direct")
      ->check(CLI::IsMember({"ratio", "direct"}));
  auto* so_eta = swp->add_option("--eta", s_eta, "denominator lattice spacing (ratio)");
  auto* so_R = swp->add_option("--R", s_R, "ratio window half-width");
  auto* so_h = swp->add_option("--mesh", s_h, "simulation mesh");
  auto* so_T = swp->add_option("--T", s_T, "direct-estimator box size");

  // --- kernel ---
  auto* ker = app.add_subcommand("kernel", "deterministic quadrature for kernel fields");
  Common kc;
  add_common(ker, kc);
  double k_delta = 0.0, k_T = 10.0, k_tol = 1e-6, k_eta = 1.0;
  bool k_fubini = false;
  auto* ko_delta = ker->add_option("--delta", k_delta, "lattice spacing (0 = dyadic limit)");
  auto* ko_T = ker->add_option("--T", k_T, "box size");
  ker->add_option("--tol", k_tol, "quadrature tolerance");
  ker->add_flag("--fubini", k_fubini, "check the eta-lattice quotient-cell mass identity");
  auto* ko_eta = ker->add_option("--eta", k_eta, "lattice spacing for --fubini");

  // --- family ---
  auto* fam = app.add_subcommand("family", "aggregate constant of a variance family");
  Common fc;
  add_common(fam, fc, false);
  int f_nodes = 9;
  double f_delta = 0.0, f_eta = 0.0, f_R = 10.0, f_h = 0.01;
  fam->add_option("--nodes", f_nodes, "Simpson node count (odd)");
  auto* fo_delta = fam->add_option("--delta", f_delta, "lattice spacing per member");
  auto* fo_eta = fam->add_option("--eta", f_eta, "denominator lattice spacing");
  auto* fo_R = fam->add_option("--R", f_R, "ratio window half-width");
  auto* fo_h = fam->add_option("--mesh", f_h, "simulation mesh");

  // --- maxstable ---
  auto* mxs = app.add_subcommand("maxstable", "simulate the associated max-stable field");
  Common mc;
  add_common(mxs, mc);
  double m_T = 1.0, m_delta = 1.0, m_quantile = 0.9999, m_identity_x = 0.0;
  std::string m_levels = "1", m_stopping = "exact";
  std::uint64_t m_pilot = 512, m_direct_reps = 0;
  auto* mo_T = mxs->add_option("--T", m_T, "grid box size");
  auto* mo_delta = mxs->add_option("--delta", m_delta, "grid spacing");
  mxs->add_option("--levels", m_levels, "comma-separated levels for P(sup <= level)");
  mxs->add_option("--stopping", m_stopping, "exact | threshold")
      ->check(CLI::IsMember({"exact", "threshold"}));
  mxs->add_option("--quantile", m_quantile, "pilot quantile (threshold stopping)");
  mxs->add_option("--pilot", m_pilot, "pilot simulations (threshold stopping)");
  mxs->add_option("--identity-x", m_identity_x,
                  "also check -ln P(sup <= x) = E sup Z / x at this level");
  mxs->add_option("--direct-reps", m_direct_reps,
                  "direct-side replicas for --identity-x (default: reps)");

  // --- validate ---
  auto* val = app.add_subcommand("validate", "distributional self-checks of a spec");
  Common vc;
  add_common(val, vc);
  double v_T = 2.0, v_delta = 0.5, v_shift = 0.25, v_tol_z = 5.0, v_eta = 1.0;
  bool v_fubini = false;
  auto* vo_T = val->add_option("--T", v_T, "check-grid box size");
  auto* vo_delta = val->add_option("--delta", v_delta, "check-grid spacing");
  val->add_option("--shift", v_shift, "shift for the invariance check");
  val->add_option("--tol-z", v_tol_z, "max |z| accepted for Monte Carlo checks");
  val->add_flag("--fubini", v_fubini, "include the quotient-cell identity (kernel specs)");
  auto* vo_eta = val->add_option("--eta", v_eta, "lattice spacing for --fubini");

  try {
    app.parse(argc, argv);

    CLI::App* active = app.get_subcommands().front();
    Common* cm = nullptr;
    if (active == est) cm = &ec;
    else if (active == swp) cm = &sc;
    else if (active == ker) cm = &kc;
    else if (active == fam) cm = &fc;
    else if (active == mxs) cm = &mc;
    else cm = &vc;

    json cfg_file;
    if (!cm->config_path.empty()) {
      std::ifstream in(cm->config_path);
      if (!in) throw ConfigError("cannot open config file: " + cm->config_path);
      in >> cfg_file;
    }

    // spec: CLI string > config "spec" (string or object)
    ParsedSpec ps;
    bool have_spec = false;
    if (!cm->spec_str.empty()) {
      ps = parse_spec_string(cm->spec_str);
      have_spec = true;
    } else if (cfg_file.contains("spec")) {
      if (cfg_file["spec"].is_string())
        ps = parse_spec_string(cfg_file["spec"].get<std::string>());
      else
        ps = parse_spec_json(cfg_file["spec"]);
      have_spec = true;
    }
    if (!have_spec && active != fam)
      throw ConfigError("no spectral process given: pass --spec or a config with \"spec\"");

    Resolver rv;
    rv.cfg = cfg_file.is_null() ? nullptr : &cfg_file;
    rv.extras = &ps.extras;

    OutputSink sink;
    sink.format = cm->format;
    sink.path = cm->output;
    sink.timings = cm->timings;
    sink.open();

    const std::uint64_t reps = rv.uint(cm->o_reps, cm->reps, "reps", 10000);
    const std::uint64_t seed = rv.uint(cm->o_seed, cm->seed, "seed", 1);
    const int workers = cm->workers;
    const int d = cm->d;
    if (cm->progress)
      std::cerr << "running " << active->get_name() << " (reps=" << reps << ")\n";

    int exit_code = 0;

    if (active == est) {
      json cfg;
      cfg["command"] = "estimate";
      cfg["spec"] = ps.canonical;
      cfg["method"] = est_method;
      cfg["d"] = d;
      cfg["reps"] = reps;
      cfg["seed"] = seed;
      Row row;
      row.command = "estimate";
      row.spec = ps.canonical;
      row.reps = reps;
      row.seed = seed;
      if (est_method == "dy") {
        DyConfig dy;
        dy.delta = rv.num(eo_delta, e_delta, "delta", 0.0);
        dy.eta = rv.num(eo_eta, e_eta, "eta", 0.0);
        dy.R = rv.num(eo_R, e_R, "R", 10.0);
        dy.h = rv.num(eo_h, e_h, "h", 0.01);
        cfg["delta"] = dy.delta;
        cfg["eta"] = dy.eta;
        cfg["R"] = dy.R;
        cfg["h"] = dy.h;
        const auto r = estimate_H_dy(ps.spec, d, dy, reps, seed, workers);
        row.delta = dy.delta;
        row.eta = dy.eta;
        row.R = dy.R;
        row.estimate = r.estimate;
        row.stderr_est = r.stderr_est;
        row.elapsed_s = r.elapsed_s;
      } else {
        const double delta = rv.num(eo_delta, e_delta, "delta", 1.0);
        const double T = rv.num(eo_T, e_T, "T", 10.0);
        cfg["delta"] = delta;
        cfg["T"] = T;
        const auto r = estimate_H_direct(ps.spec, d, T, delta, reps, seed, workers);
        row.delta = delta;
        row.T = T;
        row.estimate = r.estimate;
        row.stderr_est = r.stderr_est;
        row.elapsed_s = r.elapsed_s;
      }
      emit(sink, cfg, {row});
    } else if (active == swp) {
      const std::vector<double> deltas = parse_list(sweep_deltas);
      DyConfig base;
      base.eta = rv.num(so_eta, s_eta, "eta", 0.0);
      base.R = rv.num(so_R, s_R, "R", 10.0);
      base.h = rv.num(so_h, s_h, "h", 0.01);
      const double T = rv.num(so_T, s_T, "T", 10.0);
      const auto how =
          sweep_method == "ratio" ? SweepEstimator::Ratio : SweepEstimator::Direct;
      json cfg;
      cfg["command"] = "sweep";
      cfg["spec"] = ps.canonical;
      cfg["method"] = sweep_method;
      cfg["deltas"] = deltas;
      cfg["d"] = d;
      cfg["reps"] = reps;
      cfg["seed"] = seed;
      if (how == SweepEstimator::Ratio) {
        cfg["eta"] = base.eta;
        cfg["R"] = base.R;
        cfg["h"] = base.h;
      } else {
        cfg["T"] = T;
      }
      const auto r = continuity_sweep(ps.spec, d, deltas, how, T, base, reps, seed, workers);
      std::vector<Row> rows;
      for (const auto& sr : r.rows) {
        Row row;
        row.command = "sweep";
        row.spec = ps.canonical;
        row.delta = sr.delta;
        if (how == SweepEstimator::Ratio) {
          row.eta = base.eta;
          row.R = base.R;
        } else {
          row.T = T;
        }
        row.reps = reps;
        row.seed = seed;
        row.estimate = sr.estimate;
        row.stderr_est = sr.stderr_est;
        row.elapsed_s = r.elapsed_s;
        rows.push_back(row);
      }
      Row lim;
      lim.command = "sweep-limit";
      lim.spec = ps.canonical;
      lim.delta = 0.0;
      lim.reps = reps;
      lim.seed = seed;
      lim.estimate = r.limit_estimate;
      lim.stderr_est = r.limit_stderr;
      lim.elapsed_s = r.elapsed_s;
      rows.push_back(lim);
      json summary;
      summary["record"] = "summary";
      summary["gaps"] = r.gaps;
      summary["gap_stderr"] = r.gap_stderr;
      summary["gaps_nonincreasing"] = r.gaps_nonincreasing;
      summary["monotonicity_violations"] = r.monotonicity_violations;
      summary["order_estimate"] = r.order_estimate;
      emit(sink, cfg, rows, {summary});
    } else if (active == ker) {
      const auto* ks = std::get_if<KernelSpec>(&ps.spec);
      if (!ks) throw ConfigError("kernel command needs a kernel:... spec");
      json cfg;
      cfg["command"] = "kernel";
      cfg["spec"] = ps.canonical;
      cfg["seed"] = seed;
      Row row;
      row.command = "kernel";
      row.spec = ps.canonical;
      row.seed = seed;
      std::vector<json> extra;
      if (k_fubini) {
        const double eta = rv.num(ko_eta, k_eta, "eta", 1.0);
        cfg["mode"] = "fubini";
        cfg["eta"] = eta;
        const auto rep = fubini_identity(ks->L, eta, k_tol);
        row.eta = eta;
        row.estimate = rep.value;
        row.stderr_est = 0.0;
      } else {
        const double delta = rv.num(ko_delta, k_delta, "delta", 0.0);
        const double T = rv.num(ko_T, k_T, "T", 10.0);
        cfg["mode"] = "constant";
        cfg["delta"] = delta;
        cfg["T"] = T;
        cfg["tol"] = k_tol;
        QuadratureConfig qc;
        qc.tol = k_tol;
        const auto rep = kernel_constant(ks->L, delta, T, qc);
        row.delta = delta;
        row.T = T;
        row.estimate = rep.value;
        row.stderr_est = rep.refine_error;
        if (!rep.ladder.empty()) {
          json lad;
          lad["record"] = "ladder";
          lad["values"] = rep.ladder;
          lad["continuum_value"] = rep.continuum_value;
          extra.push_back(lad);
        }
      }
      emit(sink, cfg, {row}, extra);
    } else if (active == fam) {
      if (!cfg_file.contains("family"))
        throw ConfigError("family command needs a config file with a \"family\" object");
      const json& fj = cfg_file["family"];
      const VarianceFunction base_vf = parse_vf_json(fj.at("base"));
      const double qa = fj.value("amplitude_a", 1.0);
      const double qb = fj.value("amplitude_b", 0.0);
      VarianceFamily family;
      family.vf_at = [base_vf, qa, qb](double z) {
        return VarianceFunction::scaled(qa + qb * z, base_vf);
      };
      FamilyConfig fcfg;
      fcfg.d = d;
      fcfg.nodes = f_nodes > 0 ? f_nodes : 9;
      fcfg.reps = reps;
      fcfg.dy.delta = rv.num(fo_delta, f_delta, "delta", 0.0);
      fcfg.dy.eta = rv.num(fo_eta, f_eta, "eta", 0.0);
      fcfg.dy.R = rv.num(fo_R, f_R, "R", 10.0);
      fcfg.dy.h = rv.num(fo_h, f_h, "h", 0.01);
      json cfg;
      cfg["command"] = "family";
      cfg["family"] = fj;
      cfg["nodes"] = fcfg.nodes;
      cfg["d"] = d;
      cfg["delta"] = fcfg.dy.delta;
      cfg["eta"] = fcfg.dy.eta;
      cfg["R"] = fcfg.dy.R;
      cfg["h"] = fcfg.dy.h;
      cfg["reps"] = reps;
      cfg["seed"] = seed;
      const auto r = estimate_family_H(family, fcfg, seed, workers);
      Row row;
      row.command = "family";
      row.spec = "family[scaled(a=" + io::format_g17(qa) + ",b=" + io::format_g17(qb) + ")]";
      row.delta = fcfg.dy.delta;
      row.eta = fcfg.dy.eta;
      row.R = fcfg.dy.R;
      row.reps = reps;
      row.seed = seed;
      row.estimate = r.estimate;
      row.stderr_est = r.stderr_est;
      row.elapsed_s = r.elapsed_s;
      std::vector<json> extra;
      json nodes;
      nodes["record"] = "nodes";
      json arr = json::array();
      for (const auto& n : r.nodes) {
        json nj;
        nj["z"] = n.z;
        nj["weight"] = n.weight;
        nj["estimate"] = n.estimate;
        nj["stderr"] = n.stderr_est;
        nj["degenerate"] = n.degenerate;
        nj["positivity_margin"] = n.positivity_margin;
        arr.push_back(nj);
      }
      nodes["nodes"] = arr;
      nodes["quad_error_estimate"] = r.quad_error_estimate;
      extra.push_back(nodes);
      emit(sink, cfg, {row}, extra);
    } else if (active == mxs) {
      MaxStableConfig mcfg;
      mcfg.d = d;
      mcfg.T = rv.num(mo_T, m_T, "T", 1.0);
      mcfg.delta = rv.num(mo_delta, m_delta, "delta", 1.0);
      mcfg.stopping =
          m_stopping == "exact" ? StoppingMode::Exact : StoppingMode::Threshold;
      mcfg.pilot_quantile = m_quantile;
      mcfg.pilot_sims = m_pilot;
      const std::vector<double> levels = parse_list(m_levels);
      json cfg;
      cfg["command"] = "maxstable";
      cfg["spec"] = ps.canonical;
      cfg["T"] = mcfg.T;
      cfg["delta"] = mcfg.delta;
      cfg["stopping"] = m_stopping;
      cfg["levels"] = levels;
      cfg["d"] = d;
      cfg["reps"] = reps;
      cfg["seed"] = seed;
      if (m_identity_x > 0.0) cfg["identity_x"] = m_identity_x;
      std::vector<Row> rows;
      std::vector<json> extra;
      if (m_identity_x > 0.0) {
        const std::uint64_t dreps = m_direct_reps > 0 ? m_direct_reps : reps;
        const auto rep =
            finite_grid_identity_check(ps.spec, mcfg, m_identity_x, reps, dreps, seed, workers);
        Row row;
        row.command = "maxstable-identity";
        row.spec = ps.canonical;
        row.delta = mcfg.delta;
        row.T = mcfg.T;
        row.reps = reps;
        row.seed = seed;
        row.estimate = rep.gap;
        row.stderr_est = rep.gap_se;
        row.elapsed_s = rep.sim.elapsed_s;
        rows.push_back(row);
        json rj;
        rj["record"] = "identity";
        rj["x"] = rep.x;
        rj["prob"] = rep.prob;
        rj["lhs"] = rep.lhs;
        rj["lhs_se"] = rep.lhs_se;
        rj["rhs"] = rep.rhs;
        rj["rhs_se"] = rep.rhs_se;
        rj["z"] = rep.z;
        rj["bound_B"] = rep.sim.bound_B;
        rj["residual_bound"] = rep.sim.residual_bound;
        rj["capped"] = rep.sim.capped;
        extra.push_back(rj);
      } else {
        const auto r = simulate_max_stable(ps.spec, mcfg, levels, reps, seed, workers);
        for (std::size_t i = 0; i < r.levels.size(); ++i) {
          Row row;
          row.command = "maxstable";
          row.spec = ps.canonical;
          row.delta = mcfg.delta;
          row.T = mcfg.T;
          row.reps = reps;
          row.seed = seed;
          row.R = r.levels[i];
          row.estimate = r.prob[i];
          row.stderr_est = r.prob_se[i];
          row.elapsed_s = r.elapsed_s;
          rows.push_back(row);
        }
        json rj;
        rj["record"] = "simulation";
        rj["bound_B"] = r.bound_B;
        rj["residual_bound"] = r.residual_bound;
        rj["gamma_over_n"] = r.gamma_over_n;
        rj["capped"] = r.capped;
        rj["mean_sup"] = r.mean_sup;
        rj["se_sup"] = r.se_sup;
        extra.push_back(rj);
      }
      emit(sink, cfg, rows, extra);
    } else if (active == val) {
      const double T = rv.num(vo_T, v_T, "T", 2.0);
      const double delta = rv.num(vo_delta, v_delta, "delta", 0.5);
      json cfg;
      cfg["command"] = "validate";
      cfg["spec"] = ps.canonical;
      cfg["T"] = T;
      cfg["delta"] = delta;
      cfg["shift"] = v_shift;
      cfg["d"] = d;
      cfg["reps"] = reps;
      cfg["seed"] = seed;
      std::vector<Row> rows;
      bool failed = false;
      const PointSet pts = enumerate_points(d, delta, T);

      const auto mean_one = check_mean_one(ps.spec, pts, reps, seed);
      double worst_z = 0.0;
      for (const auto& p : mean_one.point_z) worst_z = std::max(worst_z, std::abs(p));
      Row r1;
      r1.command = "validate-mean-one";
      r1.spec = ps.canonical;
      r1.delta = delta;
      r1.T = T;
      r1.reps = reps;
      r1.seed = seed;
      r1.estimate = worst_z;
      rows.push_back(r1);
      if (worst_z > v_tol_z) failed = true;

      const auto shift_rep = check_shift_invariance(ps.spec, T, delta, v_shift, reps, seed);
      Row r2;
      r2.command = "validate-shift";
      r2.spec = ps.canonical;
      r2.delta = delta;
      r2.T = T;
      r2.reps = reps;
      r2.seed = seed;
      r2.estimate = shift_rep.z;
      r2.stderr_est = shift_rep.se_diff;
      rows.push_back(r2);
      if (std::abs(shift_rep.z) > v_tol_z) failed = true;

      if (v_fubini) {
        const auto* ks = std::get_if<KernelSpec>(&ps.spec);
        if (!ks) throw ConfigError("--fubini requires a kernel spec");
        const double eta = rv.num(vo_eta, v_eta, "eta", 1.0);
        const auto rep = fubini_identity(ks->L, eta);
        Row r3;
        r3.command = "validate-fubini";
        r3.spec = ps.canonical;
        r3.eta = eta;
        r3.seed = seed;
        r3.estimate = rep.value;
        rows.push_back(r3);
        if (std::abs(rep.value - 1.0) > 1e-6) failed = true;
      }
      emit(sink, cfg, rows);
      exit_code = failed ? 4 : 0;
    }

    if (cm->progress) std::cerr << "done\n";
    return exit_code;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
