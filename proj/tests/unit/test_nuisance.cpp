#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ciftree/errors.hpp"
#include "ciftree/nuisance.hpp"
#include "ciftree/random.hpp"
#include "helpers.hpp"

using namespace ciftree;
using testing::rec;

namespace {

std::vector<double> random_w(Rng& rng) {
  std::normal_distribution<double> z;
  std::vector<double> w(20);
  for (auto& x : w) x = z(rng);
  return w;
}

}  // namespace

TEST_CASE("Aalen-Johansen two-record example") {
  const auto aj = fit_aalen_johansen(Dataset({rec(1, 1), rec(2, 2)}));
  CHECK(aj.cif(1, 0.5) == 0.0);
  CHECK(aj.cif(1, 1.0) == 0.5);
  CHECK(aj.cif(1, 7.0) == 0.5);
  CHECK(aj.cif(2, 1.5) == 0.0);
  CHECK(aj.cif(2, 2.0) == 0.5);
  CHECK(aj.survival(0.5) == 1.0);
  CHECK(aj.survival(1.5) == 0.5);
  CHECK(aj.survival(2.0) == 0.0);
  CHECK(aj.survival_left(2.0) == 0.5);

  const std::vector<double> w{0.0};
  const auto y = conditional_incidence(aj, 1.5, 2.5, w, 2);
  CHECK(y.value == 1.0);
  CHECK_FALSE(y.floored);
}

TEST_CASE("single cause without censoring gives the empirical CDF") {
  const auto aj = fit_aalen_johansen(Dataset({rec(3, 1), rec(1, 1), rec(2, 1), rec(2, 1)}, 2));
  CHECK(aj.cif(1, 0.9) == 0.0);
  CHECK(aj.cif(1, 1.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(aj.cif(1, 2.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(aj.cif(1, 3.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(aj.cif(2, 10.0) == 0.0);
}

TEST_CASE("no events gives zero CIFs and unit survival") {
  const auto aj = fit_aalen_johansen(Dataset({rec(1, 0), rec(2, 0)}, 2));
  for (double t : {0.5, 1.0, 3.0}) {
    CHECK(aj.cif(1, t) == 0.0);
    CHECK(aj.cif(2, t) == 0.0);
    CHECK(aj.survival(t) == 1.0);
  }
}

TEST_CASE("Aalen-Johansen sums to one with the survival") {
  Rng rng(8);
  std::exponential_distribution<double> e(1.0), c(0.5);
  std::bernoulli_distribution coin(0.4);
  std::vector<ObservedRecord> rs;
  for (int i = 0; i < 300; ++i) {
    const double t = e(rng), cc = c(rng);
    rs.push_back(rec(std::min(t, cc), t <= cc ? (coin(rng) ? 2 : 1) : 0));
  }
  const auto aj = fit_aalen_johansen(Dataset(rs, 2));
  for (double t : aj.times()) CHECK(std::abs(aj.cif(1, t) + aj.cif(2, t) + aj.survival(t) - 1.0) <= 1e-10);
}

TEST_CASE("parametric Fine-Gray closed forms") {
  FineGrayParams zero;
  zero.p = 0.5;
  zero.beta1.fill(0.0);
  zero.beta2.fill(0.0);
  Rng rng(1);
  const auto w = random_w(rng);
  CHECK(parametric_fg_cif(zero, 1, std::log(2.0), w) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(parametric_fg_cif(zero, 2, std::log(2.0), w) == doctest::Approx(0.25).epsilon(1e-14));

  FineGrayParams def;
  for (int k = 0; k < 5; ++k) {
    const auto v = random_w(rng);
    CHECK(parametric_fg_cif(def, 1, 0.0, v) == 0.0);
    CHECK(parametric_fg_cif(def, 2, 0.0, v) == 0.0);
    ParametricFineGray model(def);
    const double eta1 = std::exp(model.linear_predictors(v).first);
    const double limit2 = std::pow(1.0 - def.p, eta1);
    CHECK(parametric_fg_cif(def, 2, 1e6, v) == doctest::Approx(limit2).epsilon(1e-12));
    CHECK(std::abs(model.cause1_limit(v) + limit2 - 1.0) <= 1e-12);
  }
  FineGrayParams bad;
  bad.p = 1.0;
  CHECK_THROWS_AS(ParametricFineGray{bad}, ParameterError);
  CHECK_THROWS_AS(parametric_fg_cif(def, 1, 1.0, std::vector<double>(10, 0.0)), ParameterError);
}

TEST_CASE("feature transform uses the stated covariates") {
  std::vector<double> w(20, 0.0);
  w[0] = 0.5;
  w[1] = 1.0;
  w[2] = 3.0;
  w[9] = -1.5;
  w[10] = 0.2;
  w[11] = 4.0;
  w[14] = 1.0;
  const auto z = fine_gray_features(w);
  CHECK(z[0] == doctest::Approx(std::sin(std::numbers::pi * 0.5)));
  CHECK(z[1] == 9.0);
  CHECK(z[2] == -1.5);
  CHECK(z[3] == 1.0);
  CHECK(z[4] == 4.0);
  CHECK(z[5] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("parametric CIFs are proper and monotone") {
  FineGrayParams def;
  ParametricFineGray model(def);
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const auto w = random_w(rng);
    double prev1 = 0, prev2 = 0;
    for (double t = 0.0; t < 8.0; t += 0.25) {
      const double a = model.cif(1, t, w), b = model.cif(2, t, w);
      CHECK(a >= prev1);
      CHECK(b >= prev2);
      CHECK(a + b <= 1.0 + 1e-12);
      prev1 = a;
      prev2 = b;
    }
  }
}

TEST_CASE("conditional incidence edge cases") {
  FineGrayParams def;
  ParametricFineGray model(def);
  Rng rng(4);
  const auto w = random_w(rng);
  CHECK(conditional_incidence(model, 2.0, 1.0, w, 1).value == 0.0);
  CHECK(conditional_incidence(model, 0.0, 1.3, w, 1).value == model.cif(1, 1.3, w));
  CHECK(conditional_incidence(model, 0.0, 1.3, w, 2).value == model.cif(2, 1.3, w));

  // nonincreasing in u on [0, t]
  for (int m = 1; m <= 2; ++m) {
    double prev = 2.0;
    for (double u = 0.0; u <= 1.5; u += 0.05) {
      const double y = conditional_incidence(model, u, 1.5, w, m).value;
      CHECK(y >= 0.0);
      CHECK(y <= 1.0);
      CHECK(y <= prev + 1e-12);
      prev = y;
    }
  }
}

TEST_CASE("survival floor flags and clamps") {
  const auto y = incidence_ratio(0.5, 1e-9, kSurvivalFloor);
  CHECK(y.floored);
  CHECK(y.value == 1.0);
  const auto n = incidence_ratio(-0.1, 0.5, kSurvivalFloor);
  CHECK(n.value == 0.0);
}
