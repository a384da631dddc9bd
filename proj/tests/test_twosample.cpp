#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>

#include "cansave/error.hpp"
#include "cansave/rng.hpp"
#include "cansave/twosample.hpp"

using namespace cansave;
using namespace cansave::stats;
using cohort::SurvivalObservation;

namespace {

std::vector<std::array<double, 2>> draw_points(Rng& rng, std::size_t n, double male_frac,
                                               double age_lo, double age_hi) {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    pts.push_back({rng.bernoulli(male_frac) ? 1.0 : 0.0, rng.uniform(age_lo, age_hi)});
  return pts;
}

std::vector<SurvivalObservation> draw_censored(Rng& rng, std::size_t n, double rate,
                                               double censor_at) {
  std::vector<SurvivalObservation> obs;
  obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = rng.exponential(rate);
    SurvivalObservation o;
    o.event = t <= censor_at ? 1 : 0;
    o.time = std::min(t, censor_at);
    obs.push_back(std::move(o));
  }
  return obs;
}

}  // namespace

TEST_CASE("energy test: identical samples are not rejected") {
  Rng rng(5);
  const auto a = draw_points(rng, 150, 0.4, 20, 80);
  EnergyTestOptions opts;
  opts.seed = 9;
  const auto res = energy_two_sample(a, a, opts);
  CHECK(res.p_value >= 0.05);
  CHECK(res.n_permutations == 1000);
}

TEST_CASE("energy test: maximally separated samples are rejected") {
  std::vector<std::array<double, 2>> a(200, {1.0, 20.0});
  std::vector<std::array<double, 2>> b(200, {0.0, 80.0});
  EnergyTestOptions opts;
  opts.seed = 9;
  const auto res = energy_two_sample(a, b, opts);
  CHECK(res.p_value < 0.01);
}

TEST_CASE("energy test: p-values roughly uniform under the null") {
  // Monte-Carlo calibration: repeated same-population draws.
  Rng rng(77);
  int below_05 = 0;
  double p_sum = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const auto a = draw_points(rng, 60, 0.4, 20, 80);
    const auto b = draw_points(rng, 60, 0.4, 20, 80);
    EnergyTestOptions opts;
    opts.n_permutations = 200;
    opts.seed = static_cast<std::uint64_t>(1000 + t);
    const auto res = energy_two_sample(a, b, opts);
    p_sum += res.p_value;
    below_05 += res.p_value < 0.05;
  }
  const double mean_p = p_sum / trials;
  CHECK(mean_p > 0.40);
  CHECK(mean_p < 0.60);
  CHECK(below_05 >= 2);   // roughly 10 expected
  CHECK(below_05 <= 25);
}

TEST_CASE("energy test: determinism and subsampling") {
  Rng rng(13);
  const auto a = draw_points(rng, 3000, 0.4, 20, 80);
  const auto b = draw_points(rng, 3000, 0.4, 20, 80);
  EnergyTestOptions opts;
  opts.seed = 4;
  opts.max_points_per_sample = 400;
  opts.n_permutations = 300;
  const auto r1 = energy_two_sample(a, b, opts);
  const auto r2 = energy_two_sample(a, b, opts);
  CHECK(r1.p_value == r2.p_value);
  CHECK(r1.statistic == r2.statistic);
  CHECK(r1.p_value > 0.01);  // same population
}

TEST_CASE("energy test input validation") {
  std::vector<std::array<double, 2>> one = {{0.0, 40.0}};
  std::vector<std::array<double, 2>> two = {{0.0, 40.0}, {1.0, 50.0}};
  CHECK_THROWS_AS(energy_two_sample(one, two, {}), NumericError);
}

TEST_CASE("logrank: identical samples accept the null") {
  Rng rng(21);
  const auto a = draw_censored(rng, 300, 0.05, 40.0);
  const auto res = logrank_two_sample(a, a);
  CHECK(res.p_value >= 0.05);
}

TEST_CASE("logrank: 5x hazard ratio on n=500 is detected") {
  Rng rng(22);
  const auto a = draw_censored(rng, 500, 0.02, 60.0);
  const auto b = draw_censored(rng, 500, 0.10, 60.0);
  const auto res = logrank_two_sample(a, b);
  CHECK(res.p_value < 0.01);
  CHECK(res.chi_square > 6.63);
}

TEST_CASE("logrank: all-censored sample is an undefined statistic") {
  Rng rng(23);
  const auto a = draw_censored(rng, 50, 0.05, 40.0);
  std::vector<SurvivalObservation> b(50);
  for (auto& o : b) {
    o.time = 30.0;
    o.event = 0;
  }
  CHECK_THROWS_AS(logrank_two_sample(a, b), NumericError);
  CHECK_THROWS_AS(logrank_two_sample({}, a), NumericError);
}

TEST_CASE("chi-square(1) survival function sanity") {
  CHECK(chisq1_sf(0.0) == doctest::Approx(1.0));
  CHECK(chisq1_sf(3.841459) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(chisq1_sf(6.634897) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(normal_two_sided_p(1.959964) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(normal_two_sided_p(2.807034) == doctest::Approx(0.005).epsilon(1e-3));
}
