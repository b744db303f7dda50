#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ciftree/censoring.hpp"
#include "ciftree/data.hpp"
#include "ciftree/nuisance.hpp"
#include "ciftree/random.hpp"

namespace ciftree {

enum class Correlation { independent, ar };
enum class CensoringMode { lognormal, uniform, none };

std::string to_string(Correlation c);
std::string to_string(CensoringMode c);
Correlation parse_correlation(const std::string& name);
CensoringMode parse_censoring_mode(const std::string& name);

struct SimConfig {
  std::size_t n = 250;
  int p_dim = 20;
  Correlation correlation = Correlation::independent;
  double rho = 0.75;
  FineGrayParams fg;
  CensoringMode censoring = CensoringMode::lognormal;
  double uniform_a = 0.0;
  double uniform_b = 50.0;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  /// Throws ParameterError for out-of-range values.
  void validate() const;
};

/// One covariate row: independent N(0,1) or the AR(1) construction with
/// corr(W_i, W_j) = rho^|i-j|.
std::vector<double> gen_covariate_row(const SimConfig& config, Rng& rng);

/// `count` rows; row i uses the same per-subject stream as simulate_dataset.
Matrix gen_covariates(const SimConfig& config, std::size_t count);

struct EventDraw {
  double time = 0.0;
  int cause = 1;
};

EventDraw gen_event(const SimConfig& config, std::span<const double> w, Rng& rng);

/// Inverse transform on the cause-1 branch for a given uniform u.
double cause1_time(const FineGrayParams& params, std::span<const double> w, double u);

/// Censoring time; +infinity when censoring is off.
double gen_censoring(const SimConfig& config, std::span<const double> w, Rng& rng);

/// Location of log C in lognormal mode.
double lognormal_location(std::span<const double> w);

struct SimulatedData {
  Dataset data;
  ParametricFineGray oracle;
  std::vector<double> event_times;  // latent T
  std::vector<int> event_causes;    // latent M
  std::vector<double> censor_times; // latent C
};

SimulatedData simulate_dataset(const SimConfig& config);

/// Quantiles of the marginal event time from one large latent sample.
std::vector<double> oracle_marginal_quantiles(const SimConfig& config, std::span<const double> probs,
                                              std::size_t sample_size = 1000000);

/// True censoring survivor of the lognormal mode, P(C >= u | w). The hazard
/// path splits [0, horizon] into equal intervals, each carrying the exact
/// probability mass of its interval with the jump placed at the midpoint.
class LognormalCensoring final : public CensoringModel {
 public:
  explicit LognormalCensoring(double epsilon = kDefaultEpsilon, std::size_t intervals = 200);

  std::string kind() const override { return "lognormal-true"; }
  double raw_survivor_left(double u, std::span<const double> w) const override;
  double raw_survivor_right(double u, std::span<const double> w) const override;
  std::vector<HazardStep> hazard_path(std::span<const double> w, double horizon) const override;

  std::size_t intervals() const { return intervals_; }

 private:
  std::size_t intervals_;
};

}  // namespace ciftree
