#include "lpamp/amp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "lpamp/smooth.hpp"

namespace lpamp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double power_or_one(double base, double expo) {
  return expo == 0.0 ? 1.0 : std::pow(base, expo);
}

}  // namespace

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed) ^ splitmix64(stream * 0xda3e39cb94b95bdbULL + 1));
}

Instance generate(const InstanceSpec& spec) {
  spec.prior.check();
  if (spec.N < 1) throw std::invalid_argument("generate: N must be >= 1");
  const int n = static_cast<int>(std::floor(spec.delta * spec.N));
  if (n < 1) throw std::invalid_argument("generate: floor(delta*N) must be >= 1");

  std::mt19937_64 rng_A = make_rng(spec.seed, 1);
  std::mt19937_64 rng_x = make_rng(spec.seed, 2);
  std::mt19937_64 rng_w = make_rng(spec.seed, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Instance inst;
  inst.sigma_w = spec.sigma_w;
  inst.A.resize(n, spec.N);
  const double scale = 1.0 / std::sqrt(double(n));
  for (int j = 0; j < spec.N; ++j)
    for (int i = 0; i < n; ++i) inst.A(i, j) = scale * gauss(rng_A);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.N);
  const int k = static_cast<int>(std::lround(spec.prior.epsilon * spec.N));
  if (k == 0 && spec.prior.epsilon > 0.0)
    std::fprintf(stderr, "lpamp: warning: round(eps*N) = 0, generating a zero signal\n");
  if (k > 0) {
    std::vector<int> idx(spec.N);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {  // partial Fisher-Yates
      std::uniform_int_distribution<int> pick(i, spec.N - 1);
      std::swap(idx[i], idx[pick(rng_x)]);
    }
    const auto atoms = spec.prior.nonzero_atoms(kDefaultQuadOrder);
    std::vector<double> weights;
    for (const auto& [v, w] : atoms) weights.push_back(w);
    std::discrete_distribution<int> which(weights.begin(), weights.end());
    const bool gaussian = spec.prior.kind == SignalPrior::Nonzero::kStandardGaussian;
    for (int i = 0; i < k; ++i) {
      double v;
      if (gaussian) {
        do { v = gauss(rng_x); } while (v == 0.0);
      } else {
        v = atoms[which(rng_x)].first;
      }
      x[idx[i]] = v;
    }
  }

  inst.y = inst.A * x;
  if (spec.sigma_w > 0.0)
    for (int i = 0; i < n; ++i) inst.y[i] += spec.sigma_w * gauss(rng_w);
  inst.x_true = std::move(x);
  return inst;
}

AmpState init(const Instance& instance, const std::optional<Eigen::VectorXd>& x_init) {
  if (instance.A.rows() != instance.y.size())
    throw std::invalid_argument("init: A and y dimensions disagree");
  AmpState st;
  if (x_init) {
    if (x_init->size() != instance.A.cols())
      throw std::invalid_argument("init: warm start has wrong dimension");
    st.x = *x_init;
    st.z = instance.y - instance.A * st.x;
  } else {
    st.x = Eigen::VectorXd::Zero(instance.N());
    st.z = instance.y;
  }
  st.sigma_hat = st.z.norm() / std::sqrt(double(instance.n()));
  return st;
}

AmpState step(const AmpState& state, const Instance& instance,
              const AmpPolicy& policy) {
  const int N = instance.N(), n = instance.n();
  if (state.x.size() != N || state.z.size() != n)
    throw std::invalid_argument("step: state inconsistent with instance");
  const double delta = instance.delta();

  const Eigen::VectorXd v = instance.A.transpose() * state.z + state.x;
  const double sigma = state.sigma_hat;
  const double h =
      std::max(policy.h_scale * sigma / std::cbrt(double(N)), 1e-300);

  double p = policy.p, lambda;
  if (policy.tune) {
    std::vector<double> p_grid = policy.p_grid.empty()
                                     ? std::vector<double>{policy.p}
                                     : policy.p_grid;
    const TuneResult tr = tune(v, sigma, h, p_grid);
    p = tr.p_hat;
    lambda = tr.lambda_hat;
  } else {
    lambda = policy.tau * power_or_one(sigma, policy.q);
  }

  const SmoothProxParams sp{{p, lambda}, h};
  AmpState next;
  next.x.resize(N);
  double div_sum = 0.0;
  for (int i = 0; i < N; ++i) {
    next.x[i] = eta_tilde(v[i], sp);
    div_sum += d1_eta_tilde(v[i], sp);
  }
  next.z = instance.y - instance.A * next.x +
           state.z * (div_sum / N / delta);
  next.t = state.t + 1;
  next.sigma_hat = next.z.norm() / std::sqrt(double(n));
  next.lambda_t = lambda;
  next.p_t = p;
  next.h_t = h;
  if (!next.x.allFinite() || !next.z.allFinite() || !std::isfinite(next.sigma_hat))
    throw std::runtime_error("diverged");
  return next;
}

double sure_estimate(const Eigen::VectorXd& v_plus_x, double sigma_hat, double p,
                     double h, double lambda) {
  if (!(sigma_hat > 0.0))
    throw std::invalid_argument("sure_estimate: sigma_hat must be > 0");
  const SmoothProxParams sp{{p, lambda}, h};
  const int N = static_cast<int>(v_plus_x.size());
  double rss = 0.0, div = 0.0;
  for (int i = 0; i < N; ++i) {
    const double d = eta_tilde(v_plus_x[i], sp) - v_plus_x[i];
    rss += d * d;
    div += d1_eta_tilde(v_plus_x[i], sp);
  }
  const double s2 = sigma_hat * sigma_hat;
  return rss / N - s2 + 2.0 * s2 * div / N;
}

SureCurve sure_curve(const Eigen::VectorXd& v_plus_x, double sigma_hat, double p,
                     double h, const std::vector<double>& lambda_grid) {
  SureCurve curve;
  curve.p = p;
  std::vector<double> grid = lambda_grid;
  if (grid.empty()) {
    const double base = std::pow(sigma_hat, 2.0 - p);
    const int n = 40;
    for (int i = 0; i < n; ++i)
      grid.push_back(1e-3 * std::pow(1e4, double(i) / (n - 1)) * base);
  }
  std::sort(grid.begin(), grid.end());
  for (double lam : grid)
    curve.points.push_back({lam, sure_estimate(v_plus_x, sigma_hat, p, h, lam)});

  size_t bi = 0;
  for (size_t i = 1; i < curve.points.size(); ++i)
    if (curve.points[i].sure <= curve.points[bi].sure) bi = i;  // ties -> larger lambda
  curve.lambda_hat = curve.points[bi].lambda;

  if (bi > 0 && bi + 1 < curve.points.size()) {
    // One golden-section refinement inside the bracketing grid cells.
    const double gr = 0.6180339887498949;
    double a = std::log(curve.points[bi - 1].lambda);
    double b = std::log(curve.points[bi + 1].lambda);
    auto f = [&](double t) {
      return sure_estimate(v_plus_x, sigma_hat, p, h, std::exp(t));
    };
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 40 && b - a > 1e-6; ++it) {
      if (fc < fd) {
        b = d; d = c; fd = fc; c = b - gr * (b - a); fc = f(c);
      } else {
        a = c; c = d; fc = fd; d = a + gr * (b - a); fd = f(d);
      }
    }
    const double lam = std::exp(0.5 * (a + b));
    if (f(0.5 * (a + b)) <= curve.points[bi].sure) curve.lambda_hat = lam;
  }
  return curve;
}

TuneResult tune(const Eigen::VectorXd& v_plus_x, double sigma_hat, double h,
                const std::vector<double>& p_grid,
                const std::vector<double>& lambda_grid) {
  if (p_grid.empty()) throw std::invalid_argument("tune: empty p grid");
  TuneResult best;
  bool first = true;
  for (double p : p_grid) {
    const SureCurve c = sure_curve(v_plus_x, sigma_hat, p, h, lambda_grid);
    const double s = sure_estimate(v_plus_x, sigma_hat, p, h, c.lambda_hat);
    if (first || s < best.sure) {
      best = {c.lambda_hat, p, s};
      first = false;
    }
  }
  return best;
}

std::vector<AmpRecord> run(const Instance& instance, const AmpRunConfig& config) {
  std::vector<AmpRecord> history;
  AmpState st = init(instance);
  for (int t = 0; t < config.max_iters; ++t) {
    const double prev_sigma = st.sigma_hat;
    AmpState next = step(st, instance, config.policy);
    AmpRecord rec;
    rec.t = next.t;
    rec.sigma_hat = next.sigma_hat;
    rec.lambda = next.lambda_t;
    rec.p = next.p_t;
    if (instance.x_true)
      rec.mse = (next.x - *instance.x_true).squaredNorm() / instance.N();
    if (config.record_sure && prev_sigma > 0.0) {
      const Eigen::VectorXd v = instance.A.transpose() * st.z + st.x;
      rec.sure = sure_estimate(v, prev_sigma, next.p_t, next.h_t, next.lambda_t);
    }
    history.push_back(rec);
    const bool settled =
        std::abs(next.sigma_hat - prev_sigma) < config.tol * std::max(next.sigma_hat, 1e-300);
    st = std::move(next);
    if (settled) break;
  }
  return history;
}

}  // namespace lpamp
