#include "cansave/cohort.hpp"

#include <algorithm>
#include <cmath>

#include "cansave/error.hpp"
#include "cansave/rng.hpp"

namespace cansave::cohort {
namespace {

const ehr::EventRecord* first_target_diagnosis(const ehr::PatientHistory& h,
                                               const ehr::IcdBlock& target) {
  for (const auto& e : h.events)
    if (e.type == ehr::EventType::Diagnosis && ehr::icd10_lexical_valid(e.code) &&
        target.contains(e.code))
      return &e;
  return nullptr;
}

void set_reason(std::string* reason, const char* text) {
  if (reason) *reason = text;
}

}  // namespace

void WindowConfig::validate() const {
  if (delta_obs_months <= 0) throw ConfigError("delta_obs_months must be positive");
  if (delta_pred_months <= 0) throw ConfigError("delta_pred_months must be positive");
  if (target_offset_days < 0) throw ConfigError("target_offset_days must be >= 0");
  if (target_offset_days > delta_pred_months * 31)
    throw ConfigError("target_offset_days exceeds the prediction horizon");
  ehr::block_from_label(target_block);  // validates the label
}

std::optional<LabeledWindow> label_patient(const ehr::PatientHistory& history,
                                           const WindowConfig& config,
                                           std::string* reason) {
  if (history.events.empty()) {
    set_reason(reason, "no events");
    return std::nullopt;
  }
  const ehr::IcdBlock target = ehr::block_from_label(config.target_block);
  const ehr::EventRecord* target_event = first_target_diagnosis(history, target);

  LabeledWindow w;
  w.patient_id = history.patient_id;
  w.sex = history.sex;
  w.birth_date = history.birth_date;
  if (target_event != nullptr) {
    w.target = 1;
    w.t_pred = target_event->event_date.add_days(-config.target_offset_days);
  } else {
    w.target = 0;
    w.t_pred = history.last_event_date().add_months(-config.delta_pred_months);
  }
  w.t_start = w.t_pred.add_months(-config.delta_obs_months);
  w.t_end = w.t_pred.add_months(config.delta_pred_months);

  if (w.t_pred < history.birth_date) {
    set_reason(reason, "anchor before birth");
    return std::nullopt;
  }
  w.age_at_pred = years_between(history.birth_date, w.t_pred);

  const Date target_date = target_event ? target_event->event_date : Date{};
  for (const auto& e : history.events) {
    if (e.event_date < w.t_start || e.event_date > w.t_pred) continue;
    // The target diagnosis and anything at or past it belong to the
    // verification period, never to the observation window.
    if (target_event != nullptr && e.event_date >= target_date) continue;
    w.events.push_back(e);
  }
  if (w.events.empty()) {
    set_reason(reason, "empty observation window");
    return std::nullopt;
  }
  return w;
}

LabeledWindow window_at(const ehr::PatientHistory& history, Date t_pred,
                        const WindowConfig& config) {
  const ehr::IcdBlock target = ehr::block_from_label(config.target_block);
  LabeledWindow w;
  w.patient_id = history.patient_id;
  w.sex = history.sex;
  w.birth_date = history.birth_date;
  w.t_pred = t_pred;
  w.t_start = t_pred.add_months(-config.delta_obs_months);
  w.t_end = t_pred.add_months(config.delta_pred_months);
  w.age_at_pred = years_between(history.birth_date, t_pred);
  for (const auto& e : history.events) {
    if (e.event_date < w.t_start || e.event_date > w.t_pred) continue;
    w.events.push_back(e);
  }
  w.target = 0;
  for (const auto& e : history.events) {
    if (e.type != ehr::EventType::Diagnosis) continue;
    if (e.event_date <= w.t_pred || e.event_date > w.t_end) continue;
    if (ehr::icd10_lexical_valid(e.code) && target.contains(e.code)) {
      w.target = 1;
      break;
    }
  }
  return w;
}

std::optional<SurvivalObservation> to_survival_observation(
    const ehr::PatientHistory& history, const WindowConfig& config,
    std::string* reason) {
  if (history.events.empty()) {
    set_reason(reason, "no events");
    return std::nullopt;
  }
  const ehr::IcdBlock target = ehr::block_from_label(config.target_block);
  const ehr::EventRecord* target_event = first_target_diagnosis(history, target);

  SurvivalObservation obs;
  if (target_event != nullptr) {
    obs.event = 1;
    obs.time = years_between(history.birth_date, target_event->event_date);
  } else {
    obs.event = 0;
    obs.time = years_between(history.birth_date, history.last_event_date());
  }
  if (obs.time <= 0.0) {
    set_reason(reason, "non-positive observation time");
    return std::nullopt;
  }
  return obs;
}

std::map<std::string, std::vector<std::string>> stratified_split(
    const std::vector<StratumPatient>& patients, const SplitSpec& spec) {
  if (patients.empty()) throw ConfigError("stratified_split: no patients");
  if (spec.fractions.empty()) throw ConfigError("stratified_split: no sample fractions");
  double total = 0.0;
  for (const auto& [name, w] : spec.fractions) {
    if (w <= 0.0) throw ConfigError("stratified_split: non-positive weight for '" + name + "'");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("stratified_split: weights must sum to 1");
  for (std::size_t i = 1; i < spec.age_bin_edges.size(); ++i)
    if (spec.age_bin_edges[i] <= spec.age_bin_edges[i - 1])
      throw ConfigError("stratified_split: age bin edges must be ascending");

  const auto bin_of = [&](double age) {
    std::size_t b = 0;
    while (b < spec.age_bin_edges.size() && age >= spec.age_bin_edges[b]) ++b;
    return b;
  };

  // Cell id: sex * (#bins+1) + bin. Cells are processed in ascending id order.
  const std::size_t n_bins = spec.age_bin_edges.size() + 1;
  std::map<std::size_t, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const std::size_t cell =
        static_cast<std::size_t>(patients[i].sex) * n_bins + bin_of(patients[i].age);
    cells[cell].push_back(i);
  }

  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [name, w] : spec.fractions) out[name];  // keep empty samples present

  for (auto& [cell_id, members] : cells) {
    Rng rng(derive_seed(spec.seed, 0x5e11u + cell_id));
    rng.shuffle(members);

    const std::size_t n = members.size();
    // Largest-remainder allocation: every sample within one patient of its
    // exact share in every cell.
    std::vector<std::size_t> counts(spec.fractions.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < spec.fractions.size(); ++s) {
      const double exact = spec.fractions[s].second * static_cast<double>(n);
      counts[s] = static_cast<std::size_t>(std::floor(exact));
      assigned += counts[s];
      remainders.emplace_back(exact - std::floor(exact), s);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[remainders[r % remainders.size()].second];

    std::size_t pos = 0;
    for (std::size_t s = 0; s < spec.fractions.size(); ++s) {
      auto& bucket = out[spec.fractions[s].first];
      for (std::size_t k = 0; k < counts[s]; ++k)
        bucket.push_back(patients[members[pos++]].patient_id);
    }
  }
  return out;
}

}  // namespace cansave::cohort
