#include "cansave/twosample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cansave/error.hpp"
#include "cansave/rng.hpp"

namespace cansave::stats {
namespace {

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= cap) return idx;
  rng.shuffle(idx);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Energy test statistic T = nm/(n+m) * (2*mean(d_AB) - mean(d_AA) - mean(d_BB))
// computed from a precomputed pooled distance matrix and a group assignment.
double energy_statistic(const std::vector<float>& dist, std::size_t total,
                        const std::vector<std::uint8_t>& in_a, std::size_t n_a,
                        std::size_t n_b) {
  double s_ab = 0.0, s_aa = 0.0, s_bb = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const std::uint8_t ai = in_a[i];
    const float* row = dist.data() + i * total;
    for (std::size_t j = i + 1; j < total; ++j) {
      const double d = row[j];
      if (ai & in_a[j])
        s_aa += d;
      else if (ai | in_a[j])
        s_ab += d;
      else
        s_bb += d;
    }
  }
  const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
  const double e = 2.0 * s_ab / (na * nb) - 2.0 * s_aa / (na * na) - 2.0 * s_bb / (nb * nb);
  return na * nb / (na + nb) * e;
}

double erfc_scaled(double x) { return std::erfc(x); }

}  // namespace

PermutationTestResult energy_two_sample(
    const std::vector<std::array<double, 2>>& sample_a,
    const std::vector<std::array<double, 2>>& sample_b,
    const EnergyTestOptions& options) {
  if (sample_a.size() < 2 || sample_b.size() < 2)
    throw NumericError("energy_two_sample: need at least 2 points per sample");
  if (options.n_permutations < 1)
    throw ConfigError("energy_two_sample: n_permutations must be >= 1");

  Rng rng(derive_seed(options.seed, 0xe4e26));
  const auto idx_a = subsample_indices(sample_a.size(), options.max_points_per_sample, rng);
  const auto idx_b = subsample_indices(sample_b.size(), options.max_points_per_sample, rng);
  const std::size_t n_a = idx_a.size(), n_b = idx_b.size();
  const std::size_t total = n_a + n_b;

  std::vector<std::array<double, 2>> pooled;
  pooled.reserve(total);
  for (auto i : idx_a) pooled.push_back(sample_a[i]);
  for (auto i : idx_b) pooled.push_back(sample_b[i]);

  // Standardize coordinates on the pooled sample so sex and age contribute
  // on comparable scales.
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (const auto& p : pooled) mean += p[c];
    mean /= static_cast<double>(total);
    double var = 0.0;
    for (const auto& p : pooled) var += (p[c] - mean) * (p[c] - mean);
    var /= static_cast<double>(total);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (auto& p : pooled) p[c] = (p[c] - mean) / sd;
  }

  std::vector<float> dist(total * total, 0.0f);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) {
      const double dx = pooled[i][0] - pooled[j][0];
      const double dy = pooled[i][1] - pooled[j][1];
      const float d = static_cast<float>(std::sqrt(dx * dx + dy * dy));
      dist[i * total + j] = d;
      dist[j * total + i] = d;
    }
  }

  std::vector<std::uint8_t> in_a(total, 0);
  std::fill(in_a.begin(), in_a.begin() + static_cast<std::ptrdiff_t>(n_a), std::uint8_t{1});
  const double observed = energy_statistic(dist, total, in_a, n_a, n_b);

  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  int at_least = 0;
  for (int rep = 0; rep < options.n_permutations; ++rep) {
    Rng perm_rng(derive_seed(options.seed, 0x9e37u + static_cast<std::uint64_t>(rep)));
    perm_rng.shuffle(perm);
    std::vector<std::uint8_t> assign(total, 0);
    for (std::size_t k = 0; k < n_a; ++k) assign[perm[k]] = 1;
    if (energy_statistic(dist, total, assign, n_a, n_b) >= observed) ++at_least;
  }

  PermutationTestResult res;
  res.test = "energy-permutation";
  res.statistic = observed;
  res.p_value = (1.0 + at_least) / (1.0 + options.n_permutations);
  res.n_permutations = options.n_permutations;
  res.seed = options.seed;
  return res;
}

LogRankResult logrank_two_sample(const std::vector<cohort::SurvivalObservation>& sample_a,
                                 const std::vector<cohort::SurvivalObservation>& sample_b) {
  if (sample_a.empty() || sample_b.empty())
    throw NumericError("logrank_two_sample: empty sample");
  const auto count_events = [](const std::vector<cohort::SurvivalObservation>& s) {
    std::size_t n = 0;
    for (const auto& o : s) n += o.event != 0;
    return n;
  };
  if (count_events(sample_a) == 0 || count_events(sample_b) == 0)
    throw NumericError("logrank_two_sample: a sample has no events; statistic undefined");

  struct Point {
    double time;
    int event;
    int group;  // 0 = A, 1 = B
  };
  std::vector<Point> pts;
  pts.reserve(sample_a.size() + sample_b.size());
  for (const auto& o : sample_a) pts.push_back({o.time, o.event, 0});
  for (const auto& o : sample_b) pts.push_back({o.time, o.event, 1});
  std::sort(pts.begin(), pts.end(),
            [](const Point& x, const Point& y) { return x.time < y.time; });

  double n_total = static_cast<double>(pts.size());
  double n_a = static_cast<double>(sample_a.size());
  double u = 0.0;   // sum of (observed_A - expected_A)
  double var = 0.0;

  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i;
    double d_total = 0.0, d_a = 0.0, removed_a = 0.0;
    while (j < pts.size() && pts[j].time == pts[i].time) {
      if (pts[j].event) {
        d_total += 1.0;
        if (pts[j].group == 0) d_a += 1.0;
      }
      if (pts[j].group == 0) removed_a += 1.0;
      ++j;
    }
    if (d_total > 0.0 && n_total > 1.0) {
      const double expected_a = d_total * n_a / n_total;
      u += d_a - expected_a;
      var += d_total * (n_a / n_total) * (1.0 - n_a / n_total) * (n_total - d_total) /
             (n_total - 1.0);
    }
    n_total -= static_cast<double>(j - i);
    n_a -= removed_a;
    i = j;
  }

  LogRankResult res;
  res.test = "logrank";
  if (var <= 0.0) {
    // All events tied at one time with everyone at risk in one group; treat
    // as no evidence against the null.
    res.chi_square = 0.0;
    res.p_value = 1.0;
    return res;
  }
  res.chi_square = u * u / var;
  res.p_value = chisq1_sf(res.chi_square);
  return res;
}

double chisq1_sf(double x) {
  if (x <= 0.0) return 1.0;
  return erfc_scaled(std::sqrt(x / 2.0));
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace cansave::stats
