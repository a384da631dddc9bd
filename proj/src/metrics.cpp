#include "cansave/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cansave/error.hpp"
#include "cansave/rng.hpp"

namespace cansave::metrics {
namespace {

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw SchemaError("metric: scores/labels length mismatch");
  if (scores.empty()) throw SchemaError("metric: empty input");
}

// Indices ordered by descending score, stable on ties.
std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += y != 0;
  if (n_pos == 0) throw NumericError("average_precision: undefined without positives");

  const auto order = ranking(scores);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(n_pos);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  // Rank-sum with midranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double n_pos = 0.0, n_neg = 0.0;
  for (int y : labels) (y ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0)
    throw NumericError("roc_auc: both classes required");

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum_pos += midrank;
    i = j;
  }
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double precision_at_top(std::span<const double> scores, std::span<const int> labels,
                        std::size_t k) {
  check_sizes(scores, labels);
  if (k < 1 || k > scores.size())
    throw ConfigError("precision_at_top: k out of range [1, n]");
  const auto order = ranking(scores);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += labels[order[i]] != 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

MetricReport bootstrap_ci(const MetricFn& metric, const std::string& metric_name,
                          std::span<const double> scores, std::span<const int> labels,
                          int n_bootstrap, double level, std::uint64_t seed) {
  check_sizes(scores, labels);
  if (level <= 0.0 || level >= 1.0) throw ConfigError("bootstrap_ci: level must be in (0,1)");

  MetricReport report;
  report.metric = metric_name;
  report.value = metric(scores, labels);
  report.level = level;
  report.n_bootstrap = n_bootstrap;
  report.seed = seed;
  report.n = scores.size();
  for (int y : labels) report.n_positive += y != 0;

  const std::size_t n = scores.size();
  std::vector<double> replicate_values;
  replicate_values.reserve(static_cast<std::size_t>(n_bootstrap));
  std::vector<double> s(n);
  std::vector<int> y(n);

  const long max_draws = 10L * n_bootstrap;
  long draws = 0;
  std::uint64_t stream = 0;
  while (replicate_values.size() < static_cast<std::size_t>(n_bootstrap)) {
    if (draws++ >= max_draws)
      throw NumericError("bootstrap_ci: resample budget exhausted without both classes");
    Rng rng(derive_seed(seed, 0xb007u + stream++));
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(rng.uniform_index(n));
      s[i] = scores[idx];
      y[i] = labels[idx];
      (y[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    replicate_values.push_back(metric(s, y));
  }

  std::sort(replicate_values.begin(), replicate_values.end());
  const double alpha = (1.0 - level) / 2.0;
  report.ci_low = quantile_sorted(replicate_values, alpha);
  report.ci_high = quantile_sorted(replicate_values, 1.0 - alpha);
  // Percentile intervals can in principle exclude the point estimate; widen
  // so the reported triple is always ordered.
  report.ci_low = std::min(report.ci_low, report.value);
  report.ci_high = std::max(report.ci_high, report.value);
  return report;
}

double paired_bootstrap_p_greater(std::span<const double> scores_a,
                                  std::span<const double> scores_b,
                                  std::span<const int> labels, const MetricFn& metric,
                                  int n_bootstrap, std::uint64_t seed) {
  check_sizes(scores_a, labels);
  check_sizes(scores_b, labels);
  const std::size_t n = labels.size();
  std::vector<double> sa(n), sb(n);
  std::vector<int> y(n);

  int not_greater = 0;
  int done = 0;
  std::uint64_t stream = 0;
  const long max_draws = 10L * n_bootstrap;
  long draws = 0;
  while (done < n_bootstrap) {
    if (draws++ >= max_draws)
      throw NumericError("paired_bootstrap_p_greater: resample budget exhausted");
    Rng rep_rng(derive_seed(seed, 0xda1du + stream++));
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(rep_rng.uniform_index(n));
      sa[i] = scores_a[idx];
      sb[i] = scores_b[idx];
      y[i] = labels[idx];
      (y[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    if (metric(sa, y) <= metric(sb, y)) ++not_greater;
    ++done;
  }
  return (1.0 + not_greater) / (1.0 + n_bootstrap);
}

std::vector<CurvePoint> precision_at_top_curve(std::span<const double> scores,
                                               std::span<const int> labels,
                                               std::span<const std::size_t> ks,
                                               int n_bootstrap, double level,
                                               std::uint64_t seed) {
  std::vector<CurvePoint> curve;
  curve.reserve(ks.size());
  for (std::size_t k : ks) {
    const auto metric = [k](std::span<const double> s, std::span<const int> y) {
      return precision_at_top(s, y, std::min(k, s.size()));
    };
    const auto report = bootstrap_ci(metric, "precision_at_top", scores, labels,
                                     n_bootstrap, level, derive_seed(seed, k));
    curve.push_back({k, report.value, report.ci_low, report.ci_high});
  }
  return curve;
}

int nns_to_rate(double nns) {
  if (!(nns > 0.0)) throw ConfigError("nns_to_rate: NNS must be positive");
  return static_cast<int>(std::floor(1000.0 / nns + 0.5));
}

}  // namespace cansave::metrics
