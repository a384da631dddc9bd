#ifndef CANSAVE_COHORT_HPP
#define CANSAVE_COHORT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cansave/codes.hpp"
#include "cansave/ehr.hpp"

namespace cansave::cohort {

// Observation/prediction window geometry. The observation window
// [t_start, t_pred] is what the model may see; the target is verified inside
// (t_pred, t_end].
struct WindowConfig {
  int delta_obs_months = 24;    // observation window length
  int delta_pred_months = 12;   // prediction horizon length
  int target_offset_days = 30;  // anchor backoff from the target diagnosis
  std::string target_block = "C00-C97";

  void validate() const;
};

struct LabeledWindow {
  std::string patient_id;
  ehr::Sex sex = ehr::Sex::Female;
  Date birth_date;
  Date t_start, t_pred, t_end;
  int target = 0;
  double age_at_pred = 0.0;
  std::vector<ehr::EventRecord> events;  // restricted to [t_start, t_pred]
};

// Anchors the window per the labeling rule: on the first target-block
// diagnosis minus the offset when one exists (target=1), else on the last
// event minus the prediction horizon (target=0). Returns nullopt and fills
// `reason` when the window is invalid (anchor before birth, or an empty
// observation window).
std::optional<LabeledWindow> label_patient(const ehr::PatientHistory& history,
                                           const WindowConfig& config,
                                           std::string* reason = nullptr);

// Builds the window for a fixed calendar anchor (out-of-time scoring). The
// target is still verified inside (t_pred, t_end] from the full history.
LabeledWindow window_at(const ehr::PatientHistory& history, Date t_pred,
                        const WindowConfig& config);

struct SurvivalObservation {
  double time = 0.0;  // age in years at event or censoring
  int event = 0;      // 1 = target diagnosis observed
  std::vector<double> covariates;
};

// Age at first target-block diagnosis (event) or at the last recorded event
// (right-censored). Returns nullopt with `reason` when time would be <= 0.
std::optional<SurvivalObservation> to_survival_observation(
    const ehr::PatientHistory& history, const WindowConfig& config,
    std::string* reason = nullptr);

// ---- stratified splitting ----------------------------------------------

struct StratumPatient {
  std::string patient_id;
  ehr::Sex sex = ehr::Sex::Female;
  double age = 0.0;
};

struct SplitSpec {
  std::vector<std::pair<std::string, double>> fractions;  // name -> weight, sum 1
  std::vector<double> age_bin_edges = {30.0, 45.0};       // bins: <30, 30-45, >45
  std::uint64_t seed = 0;
};

// Within each (sex, age-bin) cell patients are shuffled by a seeded stream
// and allocated by largest remainder, so each cell matches the weights to
// within one patient. Output preserves shuffled order inside each sample.
std::map<std::string, std::vector<std::string>> stratified_split(
    const std::vector<StratumPatient>& patients, const SplitSpec& spec);

}  // namespace cansave::cohort

#endif  // CANSAVE_COHORT_HPP
