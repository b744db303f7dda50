#include "ciftree/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ciftree/errors.hpp"
#include "ciftree/parallel.hpp"

namespace ciftree {

std::string to_string(Correlation c) { return c == Correlation::ar ? "ar" : "independent"; }

std::string to_string(CensoringMode c) {
  switch (c) {
    case CensoringMode::lognormal: return "lognormal";
    case CensoringMode::uniform: return "uniform";
    case CensoringMode::none: return "none";
  }
  return "none";
}

Correlation parse_correlation(const std::string& name) {
  if (name == "independent") return Correlation::independent;
  if (name == "ar") return Correlation::ar;
  throw ParameterError("unknown correlation '" + name + "' (expected independent or ar)");
}

CensoringMode parse_censoring_mode(const std::string& name) {
  if (name == "lognormal") return CensoringMode::lognormal;
  if (name == "uniform") return CensoringMode::uniform;
  if (name == "none") return CensoringMode::none;
  throw ParameterError("unknown censoring mode '" + name + "' (expected lognormal, uniform or none)");
}

void SimConfig::validate() const {
  if (n < 1) throw ParameterError("n must be at least 1");
  if (p_dim < 15) throw ParameterError("the generating model needs at least 15 covariates");
  if (!(fg.p > 0.0 && fg.p < 1.0)) throw ParameterError("p must lie in (0,1)");
  if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("rho must lie in [0,1)");
  if (censoring == CensoringMode::uniform && !(uniform_a >= 0.0 && uniform_b > uniform_a))
    throw ParameterError("uniform censoring needs 0 <= a < b");
}

std::vector<double> gen_covariate_row(const SimConfig& config, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(config.p_dim));
  if (config.correlation == Correlation::independent) {
    for (auto& x : w) x = normal(rng);
    return w;
  }
  const double s = std::sqrt(1.0 - config.rho * config.rho);
  w[0] = normal(rng);
  for (std::size_t k = 1; k < w.size(); ++k) w[k] = config.rho * w[k - 1] + s * normal(rng);
  return w;
}

namespace {

Rng subject_rng(const SimConfig& config, std::size_t i) {
  return Rng(derive_seed(config.seed, {stream::kSubject, static_cast<std::uint64_t>(i)}));
}

}  // namespace

Matrix gen_covariates(const SimConfig& config, std::size_t count) {
  config.validate();
  if (count < 1) throw ParameterError("count must be at least 1");
  Matrix out(static_cast<Eigen::Index>(count), config.p_dim);
  parallel_for(count, config.threads, [&](std::size_t i) {
    auto rng = subject_rng(config, i);
    const auto w = gen_covariate_row(config, rng);
    for (int k = 0; k < config.p_dim; ++k) out(static_cast<Eigen::Index>(i), k) = w[static_cast<std::size_t>(k)];
  });
  return out;
}

double cause1_time(const FineGrayParams& params, std::span<const double> w, double u) {
  ParametricFineGray model(params);
  const auto [lp1, lp2] = model.linear_predictors(w);
  (void)lp2;
  const double eta1 = std::exp(lp1);
  const double pi1 = model.cause1_limit(w);
  double base = 1.0 - u * pi1;
  base = std::clamp(base, 1e-15, 1.0);
  const double inner = (1.0 - std::pow(base, 1.0 / eta1)) / params.p;
  return -std::log1p(-std::min(inner, 1.0 - 1e-16));
}

EventDraw gen_event(const SimConfig& config, std::span<const double> w, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ParametricFineGray model(config.fg);
  const double pi1 = model.cause1_limit(w);
  EventDraw out;
  if (unif(rng) < pi1) {
    out.cause = 1;
    out.time = cause1_time(config.fg, w, unif(rng));
  } else {
    out.cause = 2;
    const double rate = std::exp(model.linear_predictors(w).second);
    out.time = std::exponential_distribution<double>(rate)(rng);
  }
  return out;
}

double lognormal_location(std::span<const double> w) {
  if (w.size() < 15) throw ParameterError("lognormal censoring needs at least 15 covariates");
  return 0.1 + 0.1 * std::abs(w[0] + w[2] + w[4]) + 0.1 * std::abs(w[10] + w[12] + w[14]);
}

double gen_censoring(const SimConfig& config, std::span<const double> w, Rng& rng) {
  switch (config.censoring) {
    case CensoringMode::lognormal: {
      std::normal_distribution<double> normal(lognormal_location(w), 1.0);
      return std::exp(normal(rng));
    }
    case CensoringMode::uniform:
      return std::uniform_real_distribution<double>(config.uniform_a, config.uniform_b)(rng);
    case CensoringMode::none:
      break;
  }
  return std::numeric_limits<double>::infinity();
}

SimulatedData simulate_dataset(const SimConfig& config) {
  config.validate();
  const std::size_t n = config.n;
  std::vector<ObservedRecord> records(n);
  std::vector<double> T(n), C(n);
  std::vector<int> M(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    auto rng = subject_rng(config, i);
    auto w = gen_covariate_row(config, rng);
    const auto ev = gen_event(config, w, rng);
    const double c = gen_censoring(config, w, rng);
    T[i] = ev.time;
    M[i] = ev.cause;
    C[i] = c;
    auto& r = records[i];
    r.event = ev.time <= c;
    r.time = r.event ? ev.time : c;
    r.cause = r.event ? ev.cause : 0;
    r.covariates = std::move(w);
  });
  std::vector<std::string> names;
  for (int k = 1; k <= config.p_dim; ++k) names.push_back("W" + std::to_string(k));
  return SimulatedData{Dataset(std::move(records), 2, std::move(names)), ParametricFineGray(config.fg), std::move(T),
                       std::move(M), std::move(C)};
}

std::vector<double> oracle_marginal_quantiles(const SimConfig& config, std::span<const double> probs,
                                              std::size_t sample_size) {
  config.validate();
  if (sample_size < 1) throw ParameterError("sample size must be at least 1");
  SimConfig big = config;
  big.seed = derive_seed(config.seed, {stream::kOracle});
  std::vector<double> times(sample_size);
  parallel_for(sample_size, config.threads, [&](std::size_t i) {
    auto rng = subject_rng(big, i);
    const auto w = gen_covariate_row(big, rng);
    times[i] = gen_event(big, w, rng).time;
  });
  return empirical_quantiles(std::move(times), probs);
}

LognormalCensoring::LognormalCensoring(double epsilon, std::size_t intervals)
    : CensoringModel(epsilon), intervals_(intervals) {
  if (intervals_ < 1) throw ParameterError("hazard discretisation needs at least one interval");
}

double LognormalCensoring::raw_survivor_left(double u, std::span<const double> w) const {
  if (u <= 0.0) return 1.0;
  return 0.5 * std::erfc((std::log(u) - lognormal_location(w)) / std::numbers::sqrt2);
}

double LognormalCensoring::raw_survivor_right(double u, std::span<const double> w) const {
  return raw_survivor_left(u, w);
}

std::vector<HazardStep> LognormalCensoring::hazard_path(std::span<const double> w, double horizon) const {
  std::vector<HazardStep> path;
  if (!(horizon > 0.0) || !std::isfinite(horizon)) return path;
  path.reserve(intervals_);
  const double width = horizon / static_cast<double>(intervals_);
  double prev = 1.0;
  for (std::size_t k = 0; k < intervals_; ++k) {
    const double b = k + 1 == intervals_ ? horizon : width * static_cast<double>(k + 1);
    const double g = raw_survivor_left(b, w);
    HazardStep step;
    step.time = width * (static_cast<double>(k) + 0.5);
    step.hazard = prev > 0.0 ? 1.0 - g / prev : 0.0;
    step.survivor = g;
    path.push_back(step);
    prev = g;
  }
  return path;
}

}  // namespace ciftree
