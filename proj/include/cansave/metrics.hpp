#ifndef CANSAVE_METRICS_HPP
#define CANSAVE_METRICS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cansave::metrics {

// Ranking metrics over (score, binary label) pairs. Ordering is by score
// descending; ties keep stable input order everywhere, so all metrics are
// deterministic functions of the input sequence.

// Mean of precision@k over the ranks k of the positives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

// Mann-Whitney form: P(random positive outranks random negative), score ties
// counted 1/2.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Positives among the k highest scores, divided by k.
double precision_at_top(std::span<const double> scores, std::span<const int> labels,
                        std::size_t k);

using MetricFn =
    std::function<double(std::span<const double>, std::span<const int>)>;

struct MetricReport {
  std::string metric;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  int n_bootstrap = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t n_positive = 0;
};

// Percentile bootstrap over seeded resamples with replacement. Resamples
// missing a class are redrawn, up to 10x the replicate budget in total draws.
MetricReport bootstrap_ci(const MetricFn& metric, const std::string& metric_name,
                          std::span<const double> scores, std::span<const int> labels,
                          int n_bootstrap = 1000, double level = 0.95,
                          std::uint64_t seed = 0);

// One-sided paired bootstrap: p-value for "metric(a) > metric(b)" computed as
// the fraction of shared resamples where the difference is <= 0.
double paired_bootstrap_p_greater(std::span<const double> scores_a,
                                  std::span<const double> scores_b,
                                  std::span<const int> labels, const MetricFn& metric,
                                  int n_bootstrap = 1000, std::uint64_t seed = 0);

struct CurvePoint {
  std::size_t k = 0;
  double precision = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Precision@TOP at each requested k with bootstrap intervals; plot-ready.
std::vector<CurvePoint> precision_at_top_curve(std::span<const double> scores,
                                               std::span<const int> labels,
                                               std::span<const std::size_t> ks,
                                               int n_bootstrap = 200, double level = 0.95,
                                               std::uint64_t seed = 0);

// Cancers detected per 1000 screened from a number-needed-to-screen value:
// round(1000 / nns), half up.
int nns_to_rate(double nns);

}  // namespace cansave::metrics

#endif  // CANSAVE_METRICS_HPP
