#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "lpamp/amp.hpp"
#include "lpamp/minimax.hpp"
#include "lpamp/prox.hpp"
#include "lpamp/se.hpp"
#include "lpamp/smooth.hpp"

using nlohmann::json;
using namespace lpamp;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- config plumbing ------------------------------------------------------

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  int quad_order = 0;
  bool seed_set = false, threads_set = false, quad_set = false, out_set = false;
  bool dump = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--seed", opts.seed, "base RNG seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--out", opts.out, "output path ('-' or empty for stdout)")
      ->each([&](const std::string&) { opts.out_set = true; });
  cmd->add_option("--threads", opts.threads, "worker threads (0 = CPU count)")
      ->each([&](const std::string&) { opts.threads_set = true; });
  cmd->add_option("--quad-order", opts.quad_order, "quadrature order (>= 8)")
      ->each([&](const std::string&) { opts.quad_set = true; });
  cmd->add_flag("--dump-config", opts.dump,
                "print the effective config as JSON and exit");
}

json load_config(const CommonOpts& opts) {
  json j = json::object();
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw IoError("cannot open config file: " + opts.config_path);
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  }
  if (opts.seed_set) j["seed"] = opts.seed;
  if (opts.out_set) j["out"] = opts.out;
  if (opts.threads_set) j["threads"] = opts.threads;
  if (opts.quad_set) j["quad_order"] = opts.quad_order;
  return j;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("missing config field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

SignalPrior parse_prior(const json& j) {
  if (!j.contains("prior")) throw ConfigError("missing config field 'prior'");
  const json& p = j.at("prior");
  const double eps = require<double>(p, "epsilon");
  const std::string kind = get_or<std::string>(p, "kind", "two_point");
  SignalPrior prior;
  if (kind == "point_mass") {
    prior = SignalPrior::point_mass(eps, get_or<double>(p, "mu", 1.0));
  } else if (kind == "two_point") {
    prior = SignalPrior::two_point(eps, get_or<double>(p, "mu", 1.0));
  } else if (kind == "gaussian") {
    prior = SignalPrior::gaussian(eps);
  } else if (kind == "atoms") {
    std::vector<std::pair<double, double>> atoms;
    for (const auto& a : require<json>(p, "atoms"))
      atoms.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    prior = SignalPrior::with_atoms(eps, std::move(atoms));
  } else {
    throw ConfigError("unknown prior kind: " + kind);
  }
  try {
    prior.check();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid prior: ") + e.what());
  }
  return prior;
}

json prior_to_json(const SignalPrior& prior) {
  json p;
  p["epsilon"] = prior.epsilon;
  switch (prior.kind) {
    case SignalPrior::Nonzero::kPointMass:
      p["kind"] = "point_mass";
      p["mu"] = prior.mu;
      break;
    case SignalPrior::Nonzero::kSymmetricTwoPoint:
      p["kind"] = "two_point";
      p["mu"] = prior.mu;
      break;
    case SignalPrior::Nonzero::kStandardGaussian:
      p["kind"] = "gaussian";
      break;
    case SignalPrior::Nonzero::kAtoms: {
      p["kind"] = "atoms";
      json atoms = json::array();
      for (const auto& [v, w] : prior.atoms) atoms.push_back({v, w});
      p["atoms"] = atoms;
      break;
    }
  }
  return p;
}

Policy parse_policy(const json& j) {
  const json pj = get_or<json>(j, "policy", json::object());
  const std::string kind = get_or<std::string>(pj, "kind", "optimal");
  if (kind == "fixed")
    return Policy::fixed_lambda(get_or<double>(pj, "p", 1.0),
                                require<double>(pj, "lambda"));
  if (kind == "power")
    return Policy::power_law(get_or<double>(pj, "p", 1.0),
                             require<double>(pj, "tau"),
                             get_or<double>(pj, "q", 1.0));
  if (kind == "optimal")
    return Policy::optimal_lambda_policy(get_or<double>(pj, "p", 1.0));
  if (kind == "adapt")
    return Policy::optimal_adapt(require<std::vector<double>>(pj, "p_grid"));
  throw ConfigError("unknown policy kind: " + kind);
}

json policy_to_json(const Policy& po) {
  json pj;
  switch (po.kind) {
    case Policy::Kind::kFixedLambda:
      pj["kind"] = "fixed";
      pj["p"] = po.p;
      pj["lambda"] = po.lambda;
      break;
    case Policy::Kind::kPowerLaw:
      pj["kind"] = "power";
      pj["p"] = po.p;
      pj["tau"] = po.tau;
      pj["q"] = po.q;
      break;
    case Policy::Kind::kOptimalLambda:
      pj["kind"] = "optimal";
      pj["p"] = po.p;
      break;
    case Policy::Kind::kOptimalAdapt:
      pj["kind"] = "adapt";
      pj["p_grid"] = po.p_grid;
      break;
  }
  return pj;
}

std::vector<double> parse_grid(const json& j, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("missing config field '") + key + "'");
  const json& g = j.at(key);
  if (g.is_array()) {
    const auto v = g.get<std::vector<double>>();
    if (v.empty()) throw ConfigError(std::string(key) + ": empty grid");
    return v;
  }
  const double lo = require<double>(g, "min");
  const double hi = require<double>(g, "max");
  const int num = require<int>(g, "num");
  if (num < 1 || !(hi >= lo)) throw ConfigError(std::string(key) + ": bad range");
  const bool logspace = get_or<bool>(g, "log", false);
  std::vector<double> v;
  for (int i = 0; i < num; ++i) {
    const double f = num == 1 ? 0.0 : double(i) / (num - 1);
    v.push_back(logspace ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
  }
  return v;
}

// ---- output plumbing ------------------------------------------------------

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::trunc);
      if (!file_) throw IoError("cannot open output file: " + path);
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }
  void finish() {
    os_->flush();
    if (file_.is_open() && !file_) throw IoError("write failure on output file");
  }

 private:
  std::ofstream file_;
  std::ostream* os_ = &std::cout;
};

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string num(double v) {
  if (std::isnan(v)) return "";
  if (v == kLambdaInf) return "inf";
  if (v == -kLambdaInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << csv_quote(fields[i]);
  }
  os << "\r\n";
}

int thread_count(const json& j) {
  int t = get_or<int>(j, "threads", 0);
  if (t <= 0) t = int(std::thread::hardware_concurrency());
  return std::max(t, 1);
}

// Run fn(i) for i in [0, count) on a bounded pool; rethrows the first error.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min(std::max(threads, 1), count);
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

int maybe_dump(const CommonOpts& opts, const json& effective) {
  if (!opts.dump) return -1;
  Output out(get_or<std::string>(effective, "out", ""));
  out.stream() << effective.dump(1) << "\n";
  out.finish();
  return 0;
}

// ---- subcommands ----------------------------------------------------------

int run_prox_eval(const CommonOpts& opts) {
  json j = load_config(opts);
  const double p = require<double>(j, "p");
  const double lambda = require<double>(j, "lambda");
  const double h = get_or<double>(j, "h", 0.0);
  const std::vector<double> us = parse_grid(j, "u");
  json effective = {{"p", p}, {"lambda", lambda}, {"h", h}, {"u", us},
                    {"out", get_or<std::string>(j, "out", "")}};
  if (int rc = maybe_dump(opts, effective); rc >= 0) return rc;

  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must be in [0, 1]");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(h >= 0.0)) throw ConfigError("h must be >= 0");

  Output out(get_or<std::string>(j, "out", ""));
  csv_row(out.stream(),
          {"u", "value", "active", "d1", "d2", "eta_tilde", "d1_eta_tilde"});
  const ProxParams params{p, lambda};
  for (double u : us) {
    const ProxEval e = eta_p(u, params);
    std::string et, det;
    if (h > 0.0) {
      const SmoothProxParams sp{params, h};
      et = num(eta_tilde(u, sp));
      det = num(d1_eta_tilde(u, sp));
    }
    csv_row(out.stream(),
            {num(u), num(e.value), e.active ? "1" : "0",
             e.d1 ? num(*e.d1) : "", e.d2 ? num(*e.d2) : "", et, det});
  }
  out.finish();
  return 0;
}

AmpPolicy parse_amp_policy(const json& j) {
  const json pj = get_or<json>(j, "policy", json::object());
  const std::string kind = get_or<std::string>(pj, "kind", "power");
  AmpPolicy policy;
  policy.h_scale = get_or<double>(j, "h_scale", 1.0);
  if (kind == "power") {
    policy.p = get_or<double>(pj, "p", 1.0);
    policy.tau = require<double>(pj, "tau");
    policy.q = get_or<double>(pj, "q", 1.0);
  } else if (kind == "tune") {
    policy.tune = true;
    policy.p_grid = get_or<std::vector<double>>(pj, "p_grid", {1.0});
    if (policy.p_grid.empty()) throw ConfigError("policy.p_grid: empty grid");
  } else {
    throw ConfigError("unknown amp policy kind: " + kind);
  }
  return policy;
}

json amp_policy_to_json(const AmpPolicy& policy) {
  json pj;
  if (policy.tune) {
    pj["kind"] = "tune";
    pj["p_grid"] = policy.p_grid;
  } else {
    pj["kind"] = "power";
    pj["p"] = policy.p;
    pj["tau"] = policy.tau;
    pj["q"] = policy.q;
  }
  return pj;
}

InstanceSpec parse_instance(const json& j) {
  InstanceSpec spec;
  spec.N = require<int>(j, "N");
  spec.delta = require<double>(j, "delta");
  spec.prior = parse_prior(j);
  spec.sigma_w = get_or<double>(j, "sigma_w", 0.0);
  spec.seed = get_or<std::uint64_t>(j, "seed", 1);
  if (spec.N < 1) throw ConfigError("N must be >= 1");
  if (!(spec.delta > 0.0 && spec.delta <= 1.0))
    throw ConfigError("delta must be in (0, 1]");
  if (!(spec.sigma_w >= 0.0)) throw ConfigError("sigma_w must be >= 0");
  return spec;
}

int run_amp_run(const CommonOpts& opts) {
  json j = load_config(opts);
  const InstanceSpec spec = parse_instance(j);
  AmpRunConfig cfg;
  cfg.policy = parse_amp_policy(j);
  cfg.max_iters = get_or<int>(j, "T", 30);
  cfg.tol = get_or<double>(j, "tol", 1e-6);
  cfg.record_sure = get_or<bool>(j, "record_sure", false);
  if (cfg.max_iters < 1) throw ConfigError("T must be >= 1");

  json effective = {{"N", spec.N},          {"delta", spec.delta},
                    {"prior", prior_to_json(spec.prior)},
                    {"sigma_w", spec.sigma_w}, {"seed", spec.seed},
                    {"policy", amp_policy_to_json(cfg.policy)},
                    {"T", cfg.max_iters},   {"tol", cfg.tol},
                    {"record_sure", cfg.record_sure},
                    {"h_scale", cfg.policy.h_scale},
                    {"out", get_or<std::string>(j, "out", "")}};
  if (int rc = maybe_dump(opts, effective); rc >= 0) return rc;

  const Instance inst = generate(spec);
  const auto history = run(inst, cfg);
  Output out(get_or<std::string>(j, "out", ""));
  csv_row(out.stream(), {"t", "sigma_hat", "lambda", "p", "mse", "sure"});
  for (const auto& rec : history)
    csv_row(out.stream(), {std::to_string(rec.t), num(rec.sigma_hat),
                           num(rec.lambda), num(rec.p), num(rec.mse),
                           num(rec.sure)});
  out.finish();
  return 0;
}

SEConfig parse_se_config(const json& j) {
  SEConfig cfg;
  cfg.delta = require<double>(j, "delta");
  cfg.sigma_w = get_or<double>(j, "sigma_w", 0.0);
  cfg.prior = parse_prior(j);
  cfg.quad_order = get_or<int>(j, "quad_order", kDefaultQuadOrder);
  try {
    cfg.check();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

json se_config_to_json(const SEConfig& cfg, const json& j) {
  return {{"delta", cfg.delta},
          {"sigma_w", cfg.sigma_w},
          {"prior", prior_to_json(cfg.prior)},
          {"quad_order", cfg.quad_order},
          {"policy", policy_to_json(parse_policy(j))},
          {"out", get_or<std::string>(j, "out", "")}};
}

int run_se_run(const CommonOpts& opts) {
  json j = load_config(opts);
  const SEConfig cfg = parse_se_config(j);
  const Policy policy = parse_policy(j);
  const double s0 = get_or<double>(j, "sigma0_sq",
                                   cfg.prior.second_moment() / cfg.delta +
                                       cfg.sigma_w * cfg.sigma_w);
  const int T = get_or<int>(j, "T", 200);
  const double tol = get_or<double>(j, "tol", 1e-12);
  if (!(s0 >= 0.0)) throw ConfigError("sigma0_sq must be >= 0");
  if (T < 1) throw ConfigError("T must be >= 1");

  json effective = se_config_to_json(cfg, j);
  effective["sigma0_sq"] = s0;
  effective["T"] = T;
  effective["tol"] = tol;
  if (int rc = maybe_dump(opts, effective); rc >= 0) return rc;

  const Trajectory traj = iterate(cfg, policy, s0, T, tol);
  Output out(get_or<std::string>(j, "out", ""));
  csv_row(out.stream(), {"t", "sigma_sq", "lambda", "p"});
  for (size_t t = 0; t < traj.sigma_sq.size(); ++t) {
    const double sigma = std::sqrt(traj.sigma_sq[t]);
    const PolicyEval pe = resolve_policy(policy, sigma, cfg.prior, cfg.quad_order);
    csv_row(out.stream(), {std::to_string(t), num(traj.sigma_sq[t]),
                           num(pe.lambda), num(pe.p)});
  }
  out.finish();
  if (!traj.converged)
    std::fprintf(stderr, "lpamp: warning: SE did not meet tol within T steps\n");
  return 0;
}

int run_se_fixed_points(const CommonOpts& opts) {
  json j = load_config(opts);
  const SEConfig cfg = parse_se_config(j);
  const Policy policy = parse_policy(j);
  const double smax = get_or<double>(j, "sigma_sq_max", 0.0);
  const int grid = get_or<int>(j, "grid_points", 2000);
  if (grid < 16) throw ConfigError("grid_points must be >= 16");

  json effective = se_config_to_json(cfg, j);
  effective["sigma_sq_max"] = smax;
  effective["grid_points"] = grid;
  if (int rc = maybe_dump(opts, effective); rc >= 0) return rc;

  const FixedPointReport rep = fixed_points(cfg, policy, smax, grid);
  json o;
  o["points"] = json::array();
  for (const auto& fp : rep.points)
    o["points"].push_back(
        {{"sigma_sq", fp.sigma_sq}, {"class", to_string(fp.cls)}});
  o["lowest_stable"] =
      std::isnan(rep.lowest_stable) ? json(nullptr) : json(rep.lowest_stable);
  o["highest_stable"] =
      std::isnan(rep.highest_stable) ? json(nullptr) : json(rep.highest_stable);
  o["warnings"] = rep.warnings;
  Output out(get_or<std::string>(j, "out", ""));
  out.stream() << o.dump(1) << "\n";
  out.finish();
  return 0;
}

int run_pt_curve(const CommonOpts& opts) {
  json j = load_config(opts);
  const std::vector<double> p_grid = parse_grid(j, "p_grid");
  const std::vector<double> delta_grid = parse_grid(j, "delta_grid");
  const int order = get_or<int>(j, "quad_order", kDefaultQuadOrder);
  const std::string side_name = get_or<std::string>(j, "side", "bar");
  if (side_name != "bar" && side_name != "under")
    throw ConfigError("side must be 'bar' or 'under'");
  const MinimaxSide side =
      side_name == "bar" ? MinimaxSide::kBar : MinimaxSide::kUnder;
  for (double d : delta_grid)
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("delta_grid values in (0, 1]");

  json effective = {{"p_grid", p_grid}, {"delta_grid", delta_grid},
                    {"quad_order", order}, {"side", side_name},
                    {"threads", get_or<int>(j, "threads", 0)},
                    {"out", get_or<std::string>(j, "out", "")}};
  if (int rc = maybe_dump(opts, effective); rc >= 0) return rc;

  struct Row { double p, delta, eps; };
  std::vector<Row> rows;
  for (double p : p_grid)
    for (double d : delta_grid) rows.push_back({p, d, 0.0});
  parallel_for(int(rows.size()), thread_count(j), [&](int i) {
    rows[i].eps = eps_star_p(rows[i].delta, rows[i].p, side, order);
  });

  Output out(get_or<std::string>(j, "out", ""));
  csv_row(out.stream(), {"p", "delta", "eps_star"});
  for (const auto& r : rows)
    csv_row(out.stream(), {num(r.p), num(r.delta), num(r.eps)});
  out.finish();
  return 0;
}

int run_noise_curve(const CommonOpts& opts) {
  json j = load_config(opts);
  SEConfig base = parse_se_config(j);
  const Policy policy = parse_policy(j);
  const std::vector<double> sw_grid = parse_grid(j, "sigma_w_grid");
  for (double sw : sw_grid)
    if (!(sw > 0.0)) throw ConfigError("sigma_w_grid values must be > 0");

  json effective = se_config_to_json(base, j);
  effective.erase("sigma_w");
  effective["sigma_w_grid"] = sw_grid;
  effective["threads"] = get_or<int>(j, "threads", 0);
  if (int rc = maybe_dump(opts, effective); rc >= 0) return rc;

  struct Row { double sw, lo, hi; };
  std::vector<Row> rows;
  for (double sw : sw_grid) rows.push_back({sw, 0.0, 0.0});
  parallel_for(int(rows.size()), thread_count(j), [&](int i) {
    SEConfig cfg = base;
    cfg.sigma_w = rows[i].sw;
    rows[i].lo = lowest_stable_fp(cfg, policy);
    rows[i].hi = highest_stable_fp(cfg, policy);
  });

  Output out(get_or<std::string>(j, "out", ""));
  csv_row(out.stream(), {"sigma_w", "sigma_sq_low", "sigma_sq_high",
                         "ratio_low", "ratio_high"});
  for (const auto& r : rows) {
    const double w2 = r.sw * r.sw;
    csv_row(out.stream(), {num(r.sw), num(r.lo), num(r.hi), num(r.lo / w2),
                           num(r.hi / w2)});
  }
  out.finish();
  return 0;
}

int run_sure_curve(const CommonOpts& opts) {
  json j = load_config(opts);
  const InstanceSpec spec = parse_instance(j);
  const AmpPolicy policy = parse_amp_policy(j);
  const int iteration = get_or<int>(j, "iteration", 3);
  const double p = get_or<double>(j, "p", policy.p);
  if (iteration < 1) throw ConfigError("iteration must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must be in [0, 1]");
  std::vector<double> lambda_grid;
  if (j.contains("lambda_grid")) lambda_grid = parse_grid(j, "lambda_grid");

  json effective = {{"N", spec.N},          {"delta", spec.delta},
                    {"prior", prior_to_json(spec.prior)},
                    {"sigma_w", spec.sigma_w}, {"seed", spec.seed},
                    {"policy", amp_policy_to_json(policy)},
                    {"iteration", iteration}, {"p", p},
                    {"out", get_or<std::string>(j, "out", "")}};
  if (int rc = maybe_dump(opts, effective); rc >= 0) return rc;

  const Instance inst = generate(spec);
  AmpState st = init(inst);
  for (int t = 0; t + 1 < iteration; ++t) st = step(st, inst, policy);
  const Eigen::VectorXd v = inst.A.transpose() * st.z + st.x;
  const double h = policy.h_scale * st.sigma_hat / std::cbrt(double(spec.N));
  const SureCurve curve = sure_curve(v, st.sigma_hat, p, h, lambda_grid);

  Output out(get_or<std::string>(j, "out", ""));
  csv_row(out.stream(), {"lambda", "sure", "true_mse", "lambda_hat"});
  const std::string lh = num(curve.lambda_hat);
  for (const auto& pt : curve.points) {
    double mse = std::numeric_limits<double>::quiet_NaN();
    if (inst.x_true) {
      mse = 0.0;
      for (int i = 0; i < inst.N(); ++i) {
        const double d = eta_tilde(v[i], {{p, pt.lambda}, h}) - (*inst.x_true)[i];
        mse += d * d;
      }
      mse /= inst.N();
    }
    csv_row(out.stream(), {num(pt.lambda), num(pt.sure), num(mse), lh});
  }
  out.finish();
  return 0;
}

int run_mc_compare(const CommonOpts& opts) {
  json j = load_config(opts);
  const InstanceSpec spec = parse_instance(j);
  const AmpPolicy policy = parse_amp_policy(j);
  if (policy.tune) throw ConfigError("mc compare requires a power policy");
  const int T = get_or<int>(j, "T", 30);
  const int seeds = get_or<int>(j, "seeds", 100);
  const int order = get_or<int>(j, "quad_order", kDefaultQuadOrder);
  if (T < 1) throw ConfigError("T must be >= 1");
  if (seeds < 1) throw ConfigError("seeds must be >= 1");

  json effective = {{"N", spec.N},          {"delta", spec.delta},
                    {"prior", prior_to_json(spec.prior)},
                    {"sigma_w", spec.sigma_w}, {"seed", spec.seed},
                    {"policy", amp_policy_to_json(policy)},
                    {"T", T},               {"seeds", seeds},
                    {"quad_order", order},
                    {"threads", get_or<int>(j, "threads", 0)},
                    {"out", get_or<std::string>(j, "out", "")}};
  if (int rc = maybe_dump(opts, effective); rc >= 0) return rc;

  // SE prediction with the algorithm's own smoothing rule h_t = sigma_t/N^{1/3}.
  std::vector<double> se_mse(T);
  {
    double s = spec.prior.second_moment() / spec.delta +
               spec.sigma_w * spec.sigma_w;
    for (int t = 0; t < T; ++t) {
      const double sigma = std::sqrt(s);
      const double lambda =
          policy.tau * (policy.q == 0.0 ? 1.0 : std::pow(sigma, policy.q));
      const double h = policy.h_scale * sigma / std::cbrt(double(spec.N));
      se_mse[t] = risk(sigma, lambda, policy.p, spec.prior, order, h);
      s = spec.sigma_w * spec.sigma_w + se_mse[t] / spec.delta;
    }
  }

  std::vector<std::vector<double>> mse(seeds, std::vector<double>(T, 0.0));
  parallel_for(seeds, thread_count(j), [&](int i) {
    InstanceSpec s = spec;
    s.seed = spec.seed + std::uint64_t(i);
    const Instance inst = generate(s);
    AmpState st = init(inst);
    for (int t = 0; t < T; ++t) {
      st = step(st, inst, policy);
      mse[i][t] = (st.x - *inst.x_true).squaredNorm() / inst.N();
    }
  });

  Output out(get_or<std::string>(j, "out", ""));
  csv_row(out.stream(), {"t", "se_mse", "mc_mean", "ci_lo", "ci_hi"});
  for (int t = 0; t < T; ++t) {
    double m = 0.0, s2 = 0.0;
    for (int i = 0; i < seeds; ++i) m += mse[i][t];
    m /= seeds;
    for (int i = 0; i < seeds; ++i) s2 += (mse[i][t] - m) * (mse[i][t] - m);
    const double stderr_ =
        seeds > 1 ? std::sqrt(s2 / (seeds - 1) / seeds) : 0.0;
    csv_row(out.stream(), {std::to_string(t + 1), num(se_mse[t]), num(m),
                           num(m - 1.96 * stderr_), num(m + 1.96 * stderr_)});
  }
  out.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lp-regularized AMP and state-evolution toolkit"};
  app.require_subcommand(1);

  struct Leaf {
    CLI::App* cmd;
    CommonOpts opts;
    int (*fn)(const CommonOpts&);
  };
  std::vector<std::unique_ptr<Leaf>> leaves;
  auto add = [&](CLI::App* parent, const char* name, const char* desc,
                 int (*fn)(const CommonOpts&)) {
    auto leaf = std::make_unique<Leaf>();
    leaf->cmd = parent->add_subcommand(name, desc);
    leaf->fn = fn;
    add_common(leaf->cmd, leaf->opts);
    leaves.push_back(std::move(leaf));
  };

  CLI::App* prox = app.add_subcommand("prox", "threshold function utilities");
  prox->require_subcommand(1);
  add(prox, "eval", "tabulate eta_p and derivatives on a grid", run_prox_eval);

  CLI::App* amp = app.add_subcommand("amp", "message passing runs");
  amp->require_subcommand(1);
  add(amp, "run", "run AMP on a generated instance", run_amp_run);

  CLI::App* se = app.add_subcommand("se", "state evolution analysis");
  se->require_subcommand(1);
  add(se, "run", "iterate the SE recursion", run_se_run);
  add(se, "fixed-points", "locate and classify SE fixed points",
      run_se_fixed_points);

  CLI::App* pt = app.add_subcommand("pt", "phase transitions");
  pt->require_subcommand(1);
  add(pt, "curve", "minimax phase-transition curve over (p, delta)",
      run_pt_curve);

  CLI::App* noise = app.add_subcommand("noise", "noise sensitivity");
  noise->require_subcommand(1);
  add(noise, "curve", "fixed points across a sigma_w sweep", run_noise_curve);

  CLI::App* sure = app.add_subcommand("sure", "risk estimation");
  sure->require_subcommand(1);
  add(sure, "curve", "SURE versus lambda at a given AMP iteration",
      run_sure_curve);

  CLI::App* mc = app.add_subcommand("mc", "Monte Carlo studies");
  mc->require_subcommand(1);
  add(mc, "compare", "mean AMP MSE with CI against the SE prediction",
      run_mc_compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto& leaf : leaves)
      if (leaf->cmd->parsed()) return leaf->fn(leaf->opts);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "lpamp: config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "lpamp: io error: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "lpamp: config error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "lpamp: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lpamp: numerical failure: %s\n", e.what());
    return 3;
  }
}
