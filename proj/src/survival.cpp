#include "cansave/survival.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cansave/error.hpp"
#include "cansave/twosample.hpp"

namespace cansave::survival {
namespace {

using Json = nlohmann::ordered_json;

constexpr double kMaxLogHazard = 500.0;  // clamp for exp(w) during fitting

struct WorkingPoint {
  double log_time;
  int event;
};

// w_i = rho * (log t_i + beta.x_i - log lambda); the whole likelihood is a
// function of these per-observation values.
double working_w(double a, double b, double z, double log_t) {
  const double w = std::exp(b) * (log_t + z - a);
  return std::min(w, kMaxLogHazard);
}

void check_design_rank(const std::vector<SurvivalObservation>& train,
                       const std::vector<std::string>& names) {
  const std::size_t p = names.size();
  if (p == 0) return;
  Eigen::MatrixXd design(train.size(), p + 1);
  for (std::size_t i = 0; i < train.size(); ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;  // stands in for the baseline scale
    for (std::size_t j = 0; j < p; ++j)
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) =
          train[i].covariates[j];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == static_cast<Eigen::Index>(p + 1)) return;
  // Columns pivoted past the numerical rank are the dependent ones.
  const auto& perm = qr.colsPermutation().indices();
  std::string cols;
  for (Eigen::Index k = rank; k < perm.size(); ++k) {
    const Eigen::Index col = perm(k);
    if (!cols.empty()) cols += ", ";
    cols += col == 0 ? "baseline" : names[static_cast<std::size_t>(col - 1)];
  }
  throw NumericError("fit_aft_weibull: rank-deficient covariates (collinear: " + cols + ")");
}

}  // namespace

KMCurve fit_kaplan_meier(std::span<const SurvivalObservation> observations,
                         std::string cohort_tag) {
  if (observations.empty())
    throw NumericError("fit_kaplan_meier: empty observation set");

  std::vector<std::pair<double, int>> pts;
  pts.reserve(observations.size());
  for (const auto& o : observations) pts.emplace_back(o.time, o.event);
  std::sort(pts.begin(), pts.end());

  KMCurve curve;
  curve.cohort = std::move(cohort_tag);
  std::int64_t at_risk = static_cast<std::int64_t>(pts.size());
  double survival = 1.0;
  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i;
    std::int64_t d = 0;
    while (j < pts.size() && pts[j].first == pts[i].first) {
      d += pts[j].second != 0;
      ++j;
    }
    if (d > 0) {
      survival *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      curve.times.push_back(pts[i].first);
      curve.survival.push_back(survival);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(d);
    }
    at_risk -= static_cast<std::int64_t>(j - i);
    i = j;
  }
  return curve;
}

double km_survival_at(const KMCurve& curve, double t) {
  if (curve.times.empty()) return 1.0;
  // Right-continuous: at a step time the post-step value applies.
  auto it = std::upper_bound(curve.times.begin(), curve.times.end(), t);
  if (it == curve.times.begin()) return 1.0;
  const auto idx = static_cast<std::size_t>(std::distance(curve.times.begin(), it)) - 1;
  return curve.survival[idx];
}

void write_km_csv(std::ostream& out, const std::vector<KMCurve>& curves) {
  out << "t,survival,n_at_risk,d_events,cohort\n";
  char buf[64];
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,", c.times[i], c.survival[i]);
      out << buf << c.at_risk[i] << ',' << c.events[i] << ',' << c.cohort << '\n';
    }
  }
}

std::vector<KMCurve> read_km_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty KM curve file");
  std::vector<KMCurve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t, s, n, d, cohort;
    if (!std::getline(ss, t, ',') || !std::getline(ss, s, ',') ||
        !std::getline(ss, n, ',') || !std::getline(ss, d, ',') ||
        !std::getline(ss, cohort))
      throw ParseError("malformed KM curve row: " + line);
    if (curves.empty() || curves.back().cohort != cohort) {
      curves.emplace_back();
      curves.back().cohort = cohort;
    }
    auto& c = curves.back();
    c.times.push_back(std::stod(t));
    c.survival.push_back(std::stod(s));
    c.at_risk.push_back(std::stoll(n));
    c.events.push_back(std::stoll(d));
  }
  return curves;
}

double aft_log_likelihood(const AFTModel& model,
                          const std::vector<SurvivalObservation>& data) {
  const double a = std::log(model.lambda);
  const double b = std::log(model.rho);
  double ll = 0.0;
  for (const auto& o : data) {
    double z = model.intercept;
    for (std::size_t j = 0; j < model.beta.size(); ++j) z += model.beta[j] * o.covariates[j];
    const double log_t = std::log(o.time);
    const double w = working_w(a, b, z, log_t);
    ll -= std::exp(w);
    if (o.event) ll += b - log_t + w;
  }
  return ll;
}

std::vector<double> aft_log_likelihood_gradient(
    const AFTModel& model, const std::vector<SurvivalObservation>& data) {
  const double a = std::log(model.lambda);
  const double b = std::log(model.rho);
  const double rho = model.rho;
  const std::size_t p = model.beta.size();
  std::vector<double> grad(p + 2, 0.0);
  for (const auto& o : data) {
    double z = model.intercept;
    for (std::size_t j = 0; j < p; ++j) z += model.beta[j] * o.covariates[j];
    const double log_t = std::log(o.time);
    const double w = working_w(a, b, z, log_t);
    const double g = static_cast<double>(o.event) - std::exp(w);
    grad[0] += -rho * g;                             // d/d log lambda
    grad[1] += static_cast<double>(o.event) + g * w; // d/d log rho
    for (std::size_t j = 0; j < p; ++j) grad[2 + j] += rho * g * o.covariates[j];
  }
  return grad;
}

namespace {

// Analytic Hessian in (log lambda, log rho, beta).
Eigen::MatrixXd aft_hessian(const AFTModel& model,
                            const std::vector<SurvivalObservation>& data) {
  const double a = std::log(model.lambda);
  const double b = std::log(model.rho);
  const double rho = model.rho;
  const std::size_t p = model.beta.size();
  const Eigen::Index dim = static_cast<Eigen::Index>(p + 2);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);

  for (const auto& o : data) {
    double z = model.intercept;
    for (std::size_t j = 0; j < p; ++j) z += model.beta[j] * o.covariates[j];
    const double log_t = std::log(o.time);
    const double w = working_w(a, b, z, log_t);
    const double ew = std::exp(w);
    const double g = static_cast<double>(o.event) - ew;

    h(0, 0) += -ew * rho * rho;
    h(0, 1) += rho * (ew * w - g);
    h(1, 1) += -ew * w * w + g * w;
    for (std::size_t j = 0; j < p; ++j) {
      const double xj = o.covariates[j];
      h(0, static_cast<Eigen::Index>(2 + j)) += rho * rho * ew * xj;
      h(1, static_cast<Eigen::Index>(2 + j)) += rho * xj * (g - ew * w);
      for (std::size_t k = j; k < p; ++k)
        h(static_cast<Eigen::Index>(2 + j), static_cast<Eigen::Index>(2 + k)) +=
            -rho * rho * ew * xj * o.covariates[k];
    }
  }
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = r + 1; c < dim; ++c) h(c, r) = h(r, c);
  return h;
}

AFTModel model_from_parameters(const Eigen::VectorXd& theta,
                               const std::vector<std::string>& names) {
  AFTModel m;
  m.lambda = std::exp(theta(0));
  m.rho = std::exp(theta(1));
  m.intercept = 0.0;
  m.beta.assign(names.size(), 0.0);
  for (std::size_t j = 0; j < names.size(); ++j)
    m.beta[j] = theta(static_cast<Eigen::Index>(2 + j));
  m.covariate_names = names;
  return m;
}

}  // namespace

AFTModel fit_aft_weibull(const std::vector<SurvivalObservation>& train,
                         const std::vector<std::string>& covariate_names,
                         const AftFitConfig& config) {
  if (train.empty()) throw NumericError("fit_aft_weibull: empty training set");
  const std::size_t p = covariate_names.size();
  std::size_t n_events = 0;
  for (const auto& o : train) {
    if (o.covariates.size() != p)
      throw SchemaError("fit_aft_weibull: covariate vector length mismatch");
    if (!(o.time > 0.0)) throw SchemaError("fit_aft_weibull: non-positive time");
    n_events += o.event != 0;
  }
  if (n_events == 0) throw NumericError("fit_aft_weibull: no events in training set");
  check_design_rank(train, covariate_names);

  // Start at the exponential baseline: beta = 0, rho = 1, lambda = median time.
  std::vector<double> times;
  times.reserve(train.size());
  for (const auto& o : train) times.push_back(o.time);
  std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2),
                   times.end());
  const double median_time = times[times.size() / 2];

  const Eigen::Index dim = static_cast<Eigen::Index>(p + 2);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  theta(0) = std::log(std::max(median_time, 1e-12));
  theta(1) = 0.0;

  AFTModel current = model_from_parameters(theta, covariate_names);
  double ll = aft_log_likelihood(current, train);
  std::vector<double> trace{ll};

  int iter = 0;
  double grad_norm = std::numeric_limits<double>::infinity();
  for (; iter < config.max_iterations; ++iter) {
    const auto grad_v = aft_log_likelihood_gradient(current, train);
    Eigen::VectorXd grad = Eigen::Map<const Eigen::VectorXd>(grad_v.data(), dim);
    grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (grad_norm < config.gradient_tolerance) break;

    Eigen::MatrixXd neg_h = -aft_hessian(current, train);
    Eigen::VectorXd step;
    double damping = 0.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(
          neg_h + damping * Eigen::MatrixXd::Identity(dim, dim));
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        step = ldlt.solve(grad);
        if (step.allFinite()) break;
      }
      damping = damping == 0.0 ? 1e-8 : damping * 10.0;
      step.resize(0);
    }
    if (step.size() == 0) step = grad;  // fall back to steepest ascent

    // Backtracking line search; accepted steps never decrease the likelihood.
    double scale = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings, scale *= 0.5) {
      Eigen::VectorXd cand = theta + scale * step;
      AFTModel cand_model = model_from_parameters(cand, covariate_names);
      const double cand_ll = aft_log_likelihood(cand_model, train);
      if (std::isfinite(cand_ll) && cand_ll >= ll) {
        const bool improved = cand_ll > ll;
        theta = cand;
        current = std::move(cand_model);
        ll = cand_ll;
        trace.push_back(ll);
        accepted = improved;
        break;
      }
    }
    if (!accepted) {
      // No ascent direction made progress; re-check the gradient and stop.
      const auto g2 = aft_log_likelihood_gradient(current, train);
      grad_norm = Eigen::Map<const Eigen::VectorXd>(g2.data(), dim).lpNorm<Eigen::Infinity>();
      break;
    }
  }

  if (grad_norm >= config.gradient_tolerance) {
    std::vector<double> last(theta.data(), theta.data() + theta.size());
    throw NonConvergenceError(
        "fit_aft_weibull: no convergence after " + std::to_string(iter) +
            " iterations (gradient max-norm " + std::to_string(grad_norm) + ")",
        std::move(last), grad_norm);
  }

  // Standard errors from the inverse observed information at the optimum.
  current.beta_std_errors.assign(p, std::numeric_limits<double>::infinity());
  Eigen::MatrixXd info = -aft_hessian(current, train);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (lu.isInvertible()) {
    Eigen::MatrixXd cov = lu.inverse();
    for (std::size_t j = 0; j < p; ++j) {
      const double v = cov(static_cast<Eigen::Index>(2 + j), static_cast<Eigen::Index>(2 + j));
      current.beta_std_errors[j] =
          v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::infinity();
    }
  }
  current.log_likelihood = ll;
  current.n_parameters = static_cast<int>(p + 2);
  current.iterations = iter;
  current.converged = true;
  current.ll_trace = std::move(trace);
  return current;
}

double aft_survival(const AFTModel& model, double t, std::span<const double> x) {
  if (t < 0.0) throw SchemaError("aft_survival: t must be >= 0");
  if (x.size() != model.beta.size())
    throw SchemaError("aft_survival: covariate dimension mismatch (got " +
                      std::to_string(x.size()) + ", model has " +
                      std::to_string(model.beta.size()) + ")");
  if (t == 0.0) return 1.0;
  double z = model.intercept;
  for (std::size_t j = 0; j < model.beta.size(); ++j) z += model.beta[j] * x[j];
  // exp(-(t * e^z / lambda)^rho) evaluated through logs to avoid overflow.
  const double w = model.rho * (std::log(t) + z - std::log(model.lambda));
  if (w > kMaxLogHazard) return 0.0;
  return std::exp(-std::exp(w));
}

double aft_risk_score(const AFTModel& model, std::span<const double> x) {
  if (x.size() != model.beta.size())
    throw SchemaError("aft_risk_score: covariate dimension mismatch");
  double z = model.intercept;
  for (std::size_t j = 0; j < model.beta.size(); ++j) z += model.beta[j] * x[j];
  return z;
}

double aic(int n_parameters, double log_likelihood) {
  return 2.0 * n_parameters - 2.0 * log_likelihood;
}

AftDiagnostics aft_diagnostics(const AFTModel& model,
                               const std::vector<SurvivalObservation>& train,
                               const std::vector<SurvivalObservation>& heldout) {
  AftDiagnostics d;
  d.covariate_names = model.covariate_names;
  d.coefficients = model.beta;
  d.std_errors = model.beta_std_errors;
  for (std::size_t j = 0; j < model.beta.size(); ++j) {
    const double se = j < model.beta_std_errors.size()
                          ? model.beta_std_errors[j]
                          : std::numeric_limits<double>::infinity();
    const double z = std::isfinite(se) && se > 0.0 ? model.beta[j] / se : 0.0;
    d.z_values.push_back(z);
    d.p_values.push_back(stats::normal_two_sided_p(z));
  }
  d.log_likelihood = model.log_likelihood;
  d.aic = aic(model.n_parameters, model.log_likelihood);

  if (model.beta.empty()) {
    d.lr_statistic = 0.0;
  } else {
    std::vector<SurvivalObservation> stripped = train;
    for (auto& o : stripped) o.covariates.clear();
    const AFTModel null_model = fit_aft_weibull(stripped, {});
    d.lr_statistic = 2.0 * (model.log_likelihood - null_model.log_likelihood);
  }

  if (!heldout.empty()) {
    std::vector<double> risks;
    risks.reserve(heldout.size());
    for (const auto& o : heldout) risks.push_back(aft_risk_score(model, o.covariates));
    d.c_index_heldout = concordance_index(risks, heldout);
  }
  return d;
}

double concordance_index(std::span<const double> risk_scores,
                         std::span<const SurvivalObservation> observations) {
  if (risk_scores.size() != observations.size())
    throw SchemaError("concordance_index: length mismatch");
  double concordant = 0.0;
  std::size_t comparable = 0;
  const std::size_t n = observations.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!observations[i].event) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (observations[i].time >= observations[j].time) continue;  // ties not comparable
      ++comparable;
      if (risk_scores[i] > risk_scores[j])
        concordant += 1.0;
      else if (risk_scores[i] == risk_scores[j])
        concordant += 0.5;
    }
  }
  if (comparable == 0)
    throw NumericError("concordance_index: no comparable pairs");
  return concordant / static_cast<double>(comparable);
}

std::string aft_model_to_json(const AFTModel& model,
                              const std::optional<AftDiagnostics>& diag) {
  Json j;
  j["baseline"] = {{"lambda", model.lambda}, {"rho", model.rho}};
  Json coeffs = Json::object();
  for (std::size_t i = 0; i < model.beta.size(); ++i)
    coeffs[model.covariate_names[i]] = model.beta[i];
  j["beta"] = {{"intercept", model.intercept}, {"coefficients", std::move(coeffs)}};
  Json fit;
  fit["log_likelihood"] = model.log_likelihood;
  fit["n_parameters"] = model.n_parameters;
  fit["iterations"] = model.iterations;
  fit["converged"] = model.converged;
  if (!model.beta_std_errors.empty()) fit["beta_std_errors"] = model.beta_std_errors;
  j["fit"] = std::move(fit);
  if (diag) {
    Json dd;
    dd["aic"] = diag->aic;
    dd["lr_statistic"] = diag->lr_statistic;
    dd["c_index_heldout"] = diag->c_index_heldout;
    Json per = Json::array();
    for (std::size_t i = 0; i < diag->covariate_names.size(); ++i)
      per.push_back({{"name", diag->covariate_names[i]},
                     {"coef", diag->coefficients[i]},
                     {"std_error", diag->std_errors[i]},
                     {"z", diag->z_values[i]},
                     {"p", diag->p_values[i]}});
    dd["coefficients"] = std::move(per);
    j["diagnostics"] = std::move(dd);
  }
  return j.dump(2);
}

AFTModel aft_model_from_json(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed AFT model file: ") + e.what());
  }
  AFTModel m;
  m.lambda = j.at("baseline").at("lambda").get<double>();
  m.rho = j.at("baseline").at("rho").get<double>();
  if (!(m.lambda > 0.0) || !(m.rho > 0.0))
    throw SchemaError("AFT model file: lambda and rho must be positive");
  m.intercept = j.at("beta").at("intercept").get<double>();
  for (const auto& [name, value] : j.at("beta").at("coefficients").items()) {
    m.covariate_names.push_back(name);
    m.beta.push_back(value.get<double>());
  }
  if (j.contains("fit")) {
    const auto& fit = j["fit"];
    m.log_likelihood = fit.value("log_likelihood", 0.0);
    m.n_parameters = fit.value("n_parameters", 0);
    m.iterations = fit.value("iterations", 0);
    m.converged = fit.value("converged", false);
    if (fit.contains("beta_std_errors"))
      m.beta_std_errors = fit["beta_std_errors"].get<std::vector<double>>();
  }
  return m;
}

AFTModel aft_model_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open AFT model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return aft_model_from_json(ss.str());
}

void aft_model_to_file(const std::string& path, const AFTModel& model,
                       const std::optional<AftDiagnostics>& diag) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write AFT model file '" + path + "'");
  out << aft_model_to_json(model, diag) << '\n';
}

}  // namespace cansave::survival
