#ifndef CANSAVE_RETRO_HPP
#define CANSAVE_RETRO_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cansave/cohort.hpp"
#include "cansave/metrics.hpp"

namespace cansave::retro {

struct RetroConfig {
  Date t_pred;
  int delta_obs_months = 24;
  int delta_pred_months = 12;
  std::string target_block = "C00-C97";
  std::vector<std::size_t> top_k = {100, 1000};
  std::vector<double> age_group_edges = {35, 45, 55, 65, 75};
  std::string baseline = "age-incidence";
  std::uint64_t seed = 0;
  std::size_t curve_points = 40;  // Precision@TOP grid resolution
  int curve_bootstrap = 200;
};

// Scores computed from pre-t_pred data only; one value per eligible window,
// in order.
using Scorer = std::function<std::vector<double>(const std::vector<cohort::LabeledWindow>&)>;

struct TopKRow {
  std::size_t k = 0;
  std::size_t model_confirmed = 0;
  double model_rate = 0.0;
  std::size_t baseline_confirmed = 0;
  double baseline_rate = 0.0;
};

// Per age group: the model selects its top slice inside the group (budget
// proportional to group size at the largest k); the reference rate is the
// group's own prevalence, which is what an age-targeted examination achieves
// in expectation.
struct AgeGroupRow {
  std::string label;
  std::size_t eligible = 0;
  std::size_t budget = 0;
  std::size_t model_confirmed = 0;
  double model_rate = 0.0;
  std::size_t group_confirmed = 0;
  double prevalence = 0.0;
};

struct RetroReport {
  std::size_t eligible = 0;
  std::size_t confirmed_total = 0;
  double prevalence = 0.0;
  std::vector<TopKRow> top_k;
  std::vector<AgeGroupRow> age_groups;
  std::map<std::string, std::size_t> nosology;  // model's largest-k selection
  std::vector<metrics::CurvePoint> curve;       // model Precision@TOP
  std::string baseline_kind;

  std::string to_json_text() const;
  std::string to_text_table() const;
};

// Blind out-of-time experiment at a fixed calendar t_pred: patients with any
// prior target-block diagnosis are excluded, scores use only data <= t_pred,
// and confirmation means a target diagnosis inside (t_pred, t_pred + horizon].
RetroReport run_retro(const std::vector<ehr::PatientHistory>& corpus,
                      const Scorer& model_scorer, const RetroConfig& config);

// Default traditional-examination proxy: ranks by an age-increasing
// population incidence table, seeded shuffle inside equal-incidence bands.
std::vector<double> traditional_baseline_scores(const std::vector<double>& ages,
                                                std::uint64_t seed);

// Table of cancer nosology ranges used for the detection breakdown.
const std::vector<std::pair<std::string, std::string>>& nosology_names();

// Counts each confirmed patient once under the block of their first
// in-horizon target code.
std::map<std::string, std::size_t> nosology_breakdown(
    const std::vector<std::string>& first_codes);

void write_curve_csv(const std::string& path,
                     const std::vector<metrics::CurvePoint>& curve);

}  // namespace cansave::retro

#endif  // CANSAVE_RETRO_HPP
