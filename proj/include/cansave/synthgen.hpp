#ifndef CANSAVE_SYNTHGEN_HPP
#define CANSAVE_SYNTHGEN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cansave/cohort.hpp"
#include "cansave/ehr.hpp"

namespace cansave::synth {

struct AgeDistribution {
  enum class Kind { Normal, Bins } kind = Kind::Normal;
  // Normal: truncated to [min_age, max_age].
  double mean = 38.5;  // truncation to [min,max] shifts the realized mean to ~41
  double sd = 16.0;
  double min_age = 18.0;
  double max_age = 90.0;
  // Bins: ages uniform within [edges[i], edges[i+1]) picked by weight.
  std::vector<double> edges;
  std::vector<double> weights;
};

// Ground truth and sampling knobs for one synthetic population. Hazard
// covariates are functions of each patient's own simulated visit behavior,
// evaluated on the observation window, so survival-derived features carry
// real signal.
struct PopulationSpec {
  std::size_t n_patients = 20000;
  double male_fraction = 0.406;
  AgeDistribution age;

  // Weibull AFT ground truth: S(t|x) = exp(-(t * exp(beta . x) / lambda)^rho).
  double lambda = 76.0;
  double rho = 5.0;
  std::map<std::string, double> beta;  // keyed by canonical covariate names

  // Visit process: piecewise-constant yearly rate, increasing with age.
  double visits_per_year = 6.0;
  double visits_age_slope = 0.03;        // relative rate change per year of age past 40
  double service_fraction_alpha = 6.0;   // Beta prior of each patient's service share
  double service_fraction_beta = 4.0;
  std::map<std::string, double> diagnosis_block_mix;  // block label -> weight
  std::map<std::string, double> service_system_mix;   // system token -> weight

  Date span_start = Date::from_ymd(2019, 1, 1);
  Date span_end = Date::from_ymd(2022, 12, 31);
  Date t_pred = Date::from_ymd(2021, 12, 31);
  int delta_obs_months = 24;
  int delta_pred_months = 12;

  double incidence_target = 0.016;      // expected in-horizon event rate at t_pred
  double incidence_rel_tolerance = 0.6; // relative feasibility band
  std::uint64_t seed = 1;

  static PopulationSpec defaults();
  static PopulationSpec from_json_text(std::string_view text);
  static PopulationSpec from_json_file(const std::string& path);
  std::string to_json_text() const;
  void validate() const;
};

struct TruthRow {
  std::string patient_id;
  double latent_event_age = 0.0;  // ground-truth age of the target event
  int event_in_span = 0;
  double true_horizon_prob = 0.0;  // P(event in horizon | no event by t_pred)
};

struct CorpusSummary {
  std::size_t n_patients = 0;
  std::size_t n_events = 0;
  double male_fraction = 0.0;
  double mean_age_at_t_pred = 0.0;
  double mean_horizon_prob = 0.0;       // among patients cancer-free at t_pred
  double horizon_event_fraction = 0.0;  // realized in-horizon event rate
  std::size_t n_cancer_in_span = 0;
};

struct GeneratedCorpus {
  std::string run_id;
  std::vector<ehr::PatientHistory> histories;
  std::vector<TruthRow> truth;
  CorpusSummary summary;
};

// Deterministic per (spec, seed); throws NumericError with a suggested lambda
// range when the realized incidence is far from the target.
GeneratedCorpus generate_population(const PopulationSpec& spec);

// Writes ehr.csv, truth.csv, and manifest.json under out_dir.
struct GenerateFiles {
  std::string corpus_path;
  std::string truth_path;
  std::string manifest_path;
  std::string run_id;
};
GenerateFiles write_population(const PopulationSpec& spec, const std::string& out_dir);

std::vector<TruthRow> read_truth_csv(const std::string& path);
void write_truth_csv(const std::string& path, const std::vector<TruthRow>& rows);

struct TruthRanking {
  std::vector<std::string> patient_ids;  // patients cancer-free at t_pred
  std::vector<int> labels;               // event inside (t_pred, t_pred + horizon]
  std::vector<double> scores;            // true conditional probabilities
  double ap_ceiling = 0.0;
};

// Ideal labels and Bayes-optimal scores for the generated population. Run ids
// must match between the corpus manifest and the truth file's manifest.
TruthRanking truth_ranking(const std::vector<TruthRow>& truth,
                           const std::map<std::string, Date>& birth_by_id, Date t_pred,
                           int horizon_months, const std::string& corpus_run_id,
                           const std::string& truth_run_id);

// Direct sampler from the Weibull AFT law with independent random censoring;
// the recovery oracle for the regression fitter and the KM estimator.
// Covariates alternate Bernoulli(1/2) and Uniform(0,1).
std::vector<cohort::SurvivalObservation> sample_weibull_aft(
    double lambda, double rho, const std::vector<double>& beta, std::size_t n,
    double censor_fraction, std::uint64_t seed);

}  // namespace cansave::synth

#endif  // CANSAVE_SYNTHGEN_HPP
