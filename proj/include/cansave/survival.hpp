#ifndef CANSAVE_SURVIVAL_HPP
#define CANSAVE_SURVIVAL_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cansave/cohort.hpp"

namespace cansave::survival {

using cohort::SurvivalObservation;

// ---- Kaplan-Meier --------------------------------------------------------

// Product-limit estimate over the distinct event times of a cohort.
struct KMCurve {
  std::string cohort;              // "All", "Male", "Female", ...
  std::vector<double> times;       // ascending distinct event times
  std::vector<double> survival;    // value of the estimate at each time
  std::vector<std::int64_t> at_risk;  // n_j: at risk just before each time
  std::vector<std::int64_t> events;   // d_j: events at each time
};

KMCurve fit_kaplan_meier(std::span<const SurvivalObservation> observations,
                         std::string cohort_tag = "All");

// Right-continuous step lookup: 1 before the first event time, last value
// beyond the last.
double km_survival_at(const KMCurve& curve, double t);

void write_km_csv(std::ostream& out, const std::vector<KMCurve>& curves);
std::vector<KMCurve> read_km_csv(std::istream& in);

// ---- Weibull AFT ---------------------------------------------------------

// S(t | x) = S0(t * r(x)) with S0(u) = exp(-(u/lambda)^rho) and
// r(x) = exp(intercept + beta . x). Larger linear predictor accelerates
// time, so positive coefficients mean higher risk.
struct AFTModel {
  double lambda = 1.0;  // baseline scale, > 0
  double rho = 1.0;     // baseline shape, > 0
  double intercept = 0.0;
  std::vector<double> beta;
  std::vector<std::string> covariate_names;

  // Fit-time information (populated by fit_aft_weibull).
  std::vector<double> beta_std_errors;
  double log_likelihood = 0.0;
  int n_parameters = 0;  // free parameters in the fit
  int iterations = 0;
  bool converged = false;
  std::vector<double> ll_trace;  // log-likelihood at each accepted step
};

struct AftFitConfig {
  double gradient_tolerance = 1e-6;  // max-norm convergence threshold
  int max_iterations = 500;
};

// Maximizes the right-censored Weibull AFT log-likelihood over
// (log lambda, log rho, beta). The intercept stays 0 during fitting: a free
// intercept would duplicate the baseline scale. Standard errors come from the
// inverse observed information at the optimum.
AFTModel fit_aft_weibull(const std::vector<SurvivalObservation>& train,
                         const std::vector<std::string>& covariate_names,
                         const AftFitConfig& config = {});

double aft_survival(const AFTModel& model, double t, std::span<const double> x);

// Linear predictor intercept + beta . x; the ranking score (higher = earlier
// expected event).
double aft_risk_score(const AFTModel& model, std::span<const double> x);

// Log-likelihood of a (lambda, rho, beta) configuration, exposed for
// diagnostics and gradient checks.
double aft_log_likelihood(const AFTModel& model,
                          const std::vector<SurvivalObservation>& data);

// Gradient in the fitting parameterization (log lambda, log rho, beta).
std::vector<double> aft_log_likelihood_gradient(
    const AFTModel& model, const std::vector<SurvivalObservation>& data);

struct AftDiagnostics {
  std::vector<std::string> covariate_names;
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  std::vector<double> z_values;
  std::vector<double> p_values;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double lr_statistic = 0.0;       // 2 * (logL_full - logL_intercept_only)
  double c_index_heldout = 0.0;
};

double aic(int n_parameters, double log_likelihood);

// z-tests per coefficient, AIC, likelihood-ratio statistic against the
// no-covariate model, and C-index on held-out data.
AftDiagnostics aft_diagnostics(const AFTModel& model,
                               const std::vector<SurvivalObservation>& train,
                               const std::vector<SurvivalObservation>& heldout);

// Harrell's C: fraction of comparable pairs where the earlier event carries
// the higher risk score; score ties count 1/2, time ties are not comparable.
double concordance_index(std::span<const double> risk_scores,
                         std::span<const SurvivalObservation> observations);

// ---- model file ----------------------------------------------------------

std::string aft_model_to_json(const AFTModel& model,
                              const std::optional<AftDiagnostics>& diag = std::nullopt);
AFTModel aft_model_from_json(std::string_view json_text);
AFTModel aft_model_from_file(const std::string& path);
void aft_model_to_file(const std::string& path, const AFTModel& model,
                       const std::optional<AftDiagnostics>& diag = std::nullopt);

}  // namespace cansave::survival

#endif  // CANSAVE_SURVIVAL_HPP
