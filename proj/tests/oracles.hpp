// Brute-force reference implementations used only by tests. Each oracle takes
// a different computational route than the library code it checks.
#ifndef CANSAVE_TESTS_ORACLES_HPP
#define CANSAVE_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cansave/cohort.hpp"

namespace oracles {

using cansave::cohort::SurvivalObservation;

// Product-limit estimate computed directly from the definition: for each
// distinct event time, count at-risk and events by full scans, accumulate the
// product in long double.
struct KMPoint {
  double time;
  double survival;
};

inline std::vector<KMPoint> km_brute_force(const std::vector<SurvivalObservation>& obs) {
  std::vector<double> event_times;
  for (const auto& o : obs)
    if (o.event) event_times.push_back(o.time);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()),
                    event_times.end());

  std::vector<KMPoint> out;
  long double product = 1.0L;
  for (double t : event_times) {
    std::size_t at_risk = 0, events = 0;
    for (const auto& o : obs) {
      if (o.time >= t) ++at_risk;
      if (o.event && o.time == t) ++events;
    }
    product *= 1.0L - static_cast<long double>(events) / static_cast<long double>(at_risk);
    out.push_back({t, static_cast<double>(product)});
  }
  return out;
}

// Average precision by explicit precision@k evaluation at every positive's
// rank, each precision@k recomputed by counting over the ranked prefix.
inline double ap_brute_force(const std::vector<double>& scores,
                             const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!labels[order[k]]) continue;
    ++n_pos;
    std::size_t hits = 0;
    for (std::size_t i = 0; i <= k; ++i) hits += labels[order[i]] != 0;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (n_pos == 0) throw std::runtime_error("oracle: no positives");
  return sum / static_cast<double>(n_pos);
}

// ROC AUC by exhaustive positive/negative pair enumeration.
inline double auc_brute_force(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  if (pairs == 0) throw std::runtime_error("oracle: single class");
  return wins / static_cast<double>(pairs);
}

// Harrell's C by exhaustive ordered-pair enumeration.
inline double cindex_brute_force(const std::vector<double>& risks,
                                 const std::vector<SurvivalObservation>& obs) {
  double conc = 0.0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t j = 0; j < obs.size(); ++j) {
      if (i == j || !obs[i].event || !(obs[i].time < obs[j].time)) continue;
      ++comparable;
      if (risks[i] > risks[j])
        conc += 1.0;
      else if (risks[i] == risks[j])
        conc += 0.5;
    }
  }
  if (comparable == 0) throw std::runtime_error("oracle: no comparable pairs");
  return conc / static_cast<double>(comparable);
}

// Precision@k by sorting a full copy and counting.
inline double patk_brute_force(const std::vector<double>& scores,
                               const std::vector<int>& labels, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += labels[order[i]] != 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

// Intercept-only Weibull MLE for uncensored data, solved by bisection on the
// shape profile equation; an independent route to the same maximum.
struct WeibullMle {
  double lambda;
  double rho;
};

inline WeibullMle weibull_mle_uncensored(const std::vector<double>& times) {
  const auto profile = [&](double rho) {
    double s_pow = 0.0, s_pow_log = 0.0, s_log = 0.0;
    for (double t : times) {
      const double tp = std::pow(t, rho);
      s_pow += tp;
      s_pow_log += tp * std::log(t);
      s_log += std::log(t);
    }
    return s_pow_log / s_pow - 1.0 / rho - s_log / static_cast<double>(times.size());
  };
  double lo = 1e-3, hi = 64.0;
  while (profile(hi) < 0.0) hi *= 2.0;
  while (profile(lo) > 0.0) lo *= 0.5;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (profile(mid) > 0.0 ? hi : lo) = mid;
  }
  const double rho = 0.5 * (lo + hi);
  double s_pow = 0.0;
  for (double t : times) s_pow += std::pow(t, rho);
  const double lambda =
      std::pow(s_pow / static_cast<double>(times.size()), 1.0 / rho);
  return {lambda, rho};
}

// Closed-form Weibull AFT survival evaluated entirely in long double.
inline long double aft_survival_extended(long double lambda, long double rho,
                                         long double intercept,
                                         const std::vector<double>& beta,
                                         const std::vector<double>& x, long double t) {
  if (t == 0.0L) return 1.0L;
  long double lin = intercept;
  for (std::size_t j = 0; j < beta.size(); ++j)
    lin += static_cast<long double>(beta[j]) * static_cast<long double>(x[j]);
  const long double u = t * expl(lin) / lambda;
  return expl(-powl(u, rho));
}

}  // namespace oracles

#endif  // CANSAVE_TESTS_ORACLES_HPP
