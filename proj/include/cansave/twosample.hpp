#ifndef CANSAVE_TWOSAMPLE_HPP
#define CANSAVE_TWOSAMPLE_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "cansave/cohort.hpp"

namespace cansave::stats {

struct PermutationTestResult {
  std::string test;
  double statistic = 0.0;
  double p_value = 1.0;
  int n_permutations = 0;
  std::uint64_t seed = 0;
};

struct EnergyTestOptions {
  int n_permutations = 1000;
  std::uint64_t seed = 0;
  // Large inputs are subsampled (seeded) before the distance matrix is
  // built; the permutation test stays exact under the null.
  std::size_t max_points_per_sample = 1000;
};

// Multivariate two-sample permutation test on the energy-distance statistic.
// Observations are (sex, age) pairs; coordinates are standardized on the
// pooled sample before distances. Requires >= 2 points per sample.
PermutationTestResult energy_two_sample(
    const std::vector<std::array<double, 2>>& sample_a,
    const std::vector<std::array<double, 2>>& sample_b,
    const EnergyTestOptions& options = {});

struct LogRankResult {
  std::string test;
  double chi_square = 0.0;
  double p_value = 1.0;
};

// Two-sample log-rank test on right-censored times. Each sample must contain
// at least one event; otherwise the statistic is undefined (NumericError).
LogRankResult logrank_two_sample(const std::vector<cohort::SurvivalObservation>& sample_a,
                                 const std::vector<cohort::SurvivalObservation>& sample_b);

// Survival function of the chi-square distribution with 1 degree of freedom.
double chisq1_sf(double x);

// Two-sided normal p-value for a z statistic.
double normal_two_sided_p(double z);

}  // namespace cansave::stats

#endif  // CANSAVE_TWOSAMPLE_HPP
