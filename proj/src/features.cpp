#include "cansave/features.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "cansave/error.hpp"

namespace cansave::features {
namespace {

using Json = nlohmann::ordered_json;

constexpr double kDaysPerWeek = 7.0;

double weeks(std::int64_t days) { return static_cast<double>(days) / kDaysPerWeek; }

int season_of_month(int month) {
  if (month == 12 || month <= 2) return 0;  // winter
  if (month <= 5) return 1;                 // spring
  if (month <= 8) return 2;                 // summer
  return 3;                                 // autumn
}

std::string fmt_value(double v) {
  if (is_missing(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(defs.size());
  for (const auto& d : defs) out.push_back(d.name);
  return out;
}

bool FeatureSchema::same_names(const FeatureSchema& other) const {
  if (defs.size() != other.defs.size()) return false;
  for (std::size_t i = 0; i < defs.size(); ++i)
    if (defs[i].name != other.defs[i].name) return false;
  return true;
}

FeatureConfig FeatureConfig::defaults() {
  FeatureConfig c;
  for (const auto& b : ehr::IcdBlockTable::defaults().blocks()) c.icd_blocks.push_back(b);
  for (const auto& b : ehr::IcdBlockTable::defaults().chapters()) c.icd_blocks.push_back(b);
  for (int s = 1; s <= 30; ++s) {
    char sys[8];
    std::snprintf(sys, sizeof sys, "%02d", s);
    c.service_systems.push_back(ehr::service_group_label(sys));
  }
  c.service_systems.push_back(std::string(ehr::kOtherServiceLabel));
  return c;
}

void FeatureConfig::validate() const {
  int prev = 0;
  for (int h : recency_horizons_months) {
    if (h <= prev)
      throw ConfigError("feature config: recency horizons must be positive and ascending");
    prev = h;
  }
  std::unordered_set<std::string> seen;
  for (const auto& b : icd_blocks)
    if (!seen.insert(b.label).second)
      throw ConfigError("feature config: duplicate ICD block label '" + b.label + "'");
}

FeatureSchema build_schema(const FeatureConfig& config) {
  config.validate();
  FeatureSchema s;
  auto add = [&s](std::string name, char group, const char* type) {
    s.defs.push_back({std::move(name), group, type});
  };

  // (a) socio-demographic; bmi has no source field in the interchange schema
  // and stays an always-missing placeholder.
  add("age_at_pred", 'a', "float");
  add("sex", 'a', "binary");
  add("birth_month", 'a', "count");
  add("bmi", 'a', "float");

  // (b) visit frequency
  add("visits_total", 'b', "count");
  add("diagnose_visits_ratio", 'b', "float");
  add("service_visits_ratio", 'b', "float");
  add("unique_diagnoses", 'b', "count");
  add("unique_services", 'b', "count");
  for (int h : config.recency_horizons_months)
    add("visits_last_" + std::to_string(h) + "m", 'b', "count");

  // (c) diagnosis frequency per ICD block
  for (const auto& b : config.icd_blocks) add("count_icd_" + b.label, 'c', "count");

  // (d) service frequency per anatomical system
  for (const auto& g : config.service_systems) add("count_svc_" + g, 'd', "count");

  // (e) time between visits
  add("weeks_since_first_visit", 'e', "float");
  add("weeks_since_last_visit", 'e', "float");
  add("avg_weeks_between_visits", 'e', "float");
  for (const auto& b : config.icd_blocks) {
    add("weeks_since_first_icd_" + b.label, 'e', "float");
    add("weeks_since_last_icd_" + b.label, 'e', "float");
  }
  for (const auto& g : config.service_systems) {
    add("weeks_since_first_svc_" + g, 'e', "float");
    add("weeks_since_last_svc_" + g, 'e', "float");
  }

  // (f) seasonality; weather has no data source and stays missing.
  add("pred_month", 'f', "count");
  add("pred_season", 'f', "count");
  add("weather", 'f', "float");

  // (g) diagnosis indicators
  for (const auto& b : config.icd_blocks) add("flag_icd_" + b.label, 'g', "binary");

  // (h) service indicators
  for (const auto& g : config.service_systems) add("flag_svc_" + g, 'h', "binary");

  // (i) survival-model features
  if (config.survival_features) {
    add("skm_all_at_age", 'i', "float");
    add("skm_sex_at_age", 'i', "float");
    add("skm_all_delta_1y", 'i', "float");
    add("skm_sex_delta_1y", 'i', "float");
    add("saft_at_age", 'i', "float");
    add("saft_delta_1y", 'i', "float");
  }
  return s;
}

std::vector<double> extract_features(const cohort::LabeledWindow& window,
                                     const SurvivalFeatureInputs& inputs,
                                     const FeatureConfig& config,
                                     const FeatureSchema& schema) {
  if (config.survival_features &&
      (inputs.km_all == nullptr || inputs.km_male == nullptr ||
       inputs.km_female == nullptr || inputs.aft == nullptr))
    throw ConfigError("extract_features: survival features enabled but models missing");

  // Events after t_pred never contribute, whatever the window carries.
  std::vector<const ehr::EventRecord*> events;
  events.reserve(window.events.size());
  for (const auto& e : window.events)
    if (e.event_date <= window.t_pred) events.push_back(&e);

  std::vector<double> v;
  v.reserve(schema.size());
  auto push = [&v](double x) { v.push_back(x); };

  const double n_total = static_cast<double>(events.size());
  std::size_t n_diag = 0, n_svc = 0;
  std::unordered_set<std::string_view> uniq_diag, uniq_svc;

  struct Recency {
    std::int64_t count = 0;
    Date first, last;
  };
  std::unordered_map<std::string, Recency> icd_stats, svc_stats;
  Date first_visit, last_visit;
  bool any_visit = false;
  double sum_gap_days = 0.0;
  std::int64_t n_gaps = 0;
  Date prev_date;

  for (const auto* e : events) {
    if (!any_visit) {
      first_visit = last_visit = e->event_date;
      any_visit = true;
    } else {
      sum_gap_days += static_cast<double>(e->event_date - prev_date);
      ++n_gaps;
      if (e->event_date > last_visit) last_visit = e->event_date;
    }
    prev_date = e->event_date;

    if (e->type == ehr::EventType::Diagnosis) {
      ++n_diag;
      uniq_diag.insert(e->code);
      for (const auto& b : config.icd_blocks) {
        if (!b.contains(e->code)) continue;
        auto& r = icd_stats[b.label];
        if (r.count == 0) r.first = r.last = e->event_date;
        r.first = std::min(r.first, e->event_date);
        r.last = std::max(r.last, e->event_date);
        ++r.count;
      }
    } else {
      ++n_svc;
      uniq_svc.insert(e->code);
      auto& r = svc_stats[ehr::service_group_label(ehr::service_system_of(e->code))];
      if (r.count == 0) r.first = r.last = e->event_date;
      r.first = std::min(r.first, e->event_date);
      r.last = std::max(r.last, e->event_date);
      ++r.count;
    }
  }

  // (a)
  push(window.age_at_pred);
  push(window.sex == ehr::Sex::Male ? 1.0 : 0.0);
  push(static_cast<double>(window.birth_date.month()));
  push(kMissing);  // bmi

  // (b)
  push(n_total);
  push(n_total > 0 ? static_cast<double>(n_diag) / n_total : kMissing);
  push(n_total > 0 ? static_cast<double>(n_svc) / n_total : kMissing);
  push(static_cast<double>(uniq_diag.size()));
  push(static_cast<double>(uniq_svc.size()));
  for (int h : config.recency_horizons_months) {
    const Date cutoff = window.t_pred.add_months(-h);
    std::int64_t c = 0;
    for (const auto* e : events) c += e->event_date > cutoff;
    push(static_cast<double>(c));
  }

  // (c)
  for (const auto& b : config.icd_blocks) {
    auto it = icd_stats.find(b.label);
    push(it == icd_stats.end() ? 0.0 : static_cast<double>(it->second.count));
  }

  // (d)
  for (const auto& g : config.service_systems) {
    auto it = svc_stats.find(g);
    push(it == svc_stats.end() ? 0.0 : static_cast<double>(it->second.count));
  }

  // (e)
  push(any_visit ? weeks(window.t_pred - first_visit) : kMissing);
  push(any_visit ? weeks(window.t_pred - last_visit) : kMissing);
  push(n_gaps > 0 ? sum_gap_days / kDaysPerWeek / static_cast<double>(n_gaps) : kMissing);
  for (const auto& b : config.icd_blocks) {
    auto it = icd_stats.find(b.label);
    if (it == icd_stats.end()) {
      push(kMissing);
      push(kMissing);
    } else {
      push(weeks(window.t_pred - it->second.first));
      push(weeks(window.t_pred - it->second.last));
    }
  }
  for (const auto& g : config.service_systems) {
    auto it = svc_stats.find(g);
    if (it == svc_stats.end()) {
      push(kMissing);
      push(kMissing);
    } else {
      push(weeks(window.t_pred - it->second.first));
      push(weeks(window.t_pred - it->second.last));
    }
  }

  // (f)
  push(static_cast<double>(window.t_pred.month()));
  push(static_cast<double>(season_of_month(window.t_pred.month())));
  push(kMissing);  // weather

  // (g)
  for (const auto& b : config.icd_blocks) push(icd_stats.count(b.label) ? 1.0 : 0.0);

  // (h)
  for (const auto& g : config.service_systems) push(svc_stats.count(g) ? 1.0 : 0.0);

  // (i)
  if (config.survival_features) {
    const double age = window.age_at_pred;
    const survival::KMCurve& km_sex =
        window.sex == ehr::Sex::Male ? *inputs.km_male : *inputs.km_female;
    const double s_all = survival::km_survival_at(*inputs.km_all, age);
    const double s_sex = survival::km_survival_at(km_sex, age);
    push(s_all);
    push(s_sex);
    push(survival::km_survival_at(*inputs.km_all, age + 1.0) - s_all);
    push(survival::km_survival_at(km_sex, age + 1.0) - s_sex);
    const auto cov = aft_covariates_from_window(window);
    const double s_aft = survival::aft_survival(*inputs.aft, age, cov);
    push(s_aft);
    push(survival::aft_survival(*inputs.aft, age + 1.0, cov) - s_aft);
  }

  if (v.size() != schema.size())
    throw SchemaError("extract_features: config does not match the supplied schema");
  return v;
}

std::vector<std::string> aft_covariate_names() {
  return {"sex",
          "any_diagnosis_d00_d48",
          "any_diagnosis_i00_i99",
          "any_diagnosis_n40_n51",
          "service_visits_ratio",
          "weeks_after_first_visit",
          "avg_weeks_between_visits"};
}

std::vector<double> aft_covariates_from_window(const cohort::LabeledWindow& window) {
  static const ehr::IcdBlock d_block = ehr::block_from_label("D00-D48");
  static const ehr::IcdBlock i_block = ehr::block_from_label("I00-I99");
  static const ehr::IcdBlock n_block = ehr::block_from_label("N40-N51");

  double any_d = 0.0, any_i = 0.0, any_n = 0.0;
  std::int64_t n_total = 0, n_svc = 0, n_gaps = 0;
  double sum_gap_days = 0.0;
  Date first, last, prev;
  bool any = false;
  for (const auto& e : window.events) {
    if (e.event_date > window.t_pred) continue;
    ++n_total;
    if (!any) {
      first = last = e.event_date;
      any = true;
    } else {
      sum_gap_days += static_cast<double>(e.event_date - prev);
      ++n_gaps;
      last = std::max(last, e.event_date);
    }
    prev = e.event_date;
    if (e.type == ehr::EventType::Diagnosis) {
      if (d_block.contains(e.code)) any_d = 1.0;
      if (i_block.contains(e.code)) any_i = 1.0;
      if (n_block.contains(e.code)) any_n = 1.0;
    } else {
      ++n_svc;
    }
  }

  // Missing-prone quantities are zero-filled here: the regression has no
  // missing channel. A single visit has span 0 and gap 0.
  std::vector<double> x(7, 0.0);
  x[0] = window.sex == ehr::Sex::Male ? 1.0 : 0.0;
  x[1] = any_d;
  x[2] = any_i;
  x[3] = any_n;
  x[4] = n_total > 0 ? static_cast<double>(n_svc) / static_cast<double>(n_total) : 0.0;
  x[5] = any ? weeks(last - first) : 0.0;
  x[6] = n_gaps > 0 ? sum_gap_days / kDaysPerWeek / static_cast<double>(n_gaps) : 0.0;
  return x;
}

std::vector<std::string> select_features(
    const std::vector<std::pair<std::string, double>>& importances, double threshold,
    bool* warned_empty) {
  if (threshold < 0.0) throw ConfigError("select_features: threshold must be >= 0");
  std::vector<std::string> kept;
  for (const auto& [name, score] : importances)
    if (score >= threshold) kept.push_back(name);
  if (warned_empty) *warned_empty = kept.empty() && !importances.empty();
  return kept;
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
  out << "patient_id,target";
  for (const auto& n : m.feature_names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out << m.patient_ids[r] << ',' << m.targets[r];
    for (double x : m.rows[r]) out << ',' << fmt_value(x);
    out << '\n';
  }
}

void write_feature_csv_file(const std::string& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write feature matrix '" + path + "'");
  write_feature_csv(out, m);
}

FeatureMatrix read_feature_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open feature matrix '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty feature matrix file " + path);
  FeatureMatrix m;
  {
    std::stringstream hs(line);
    std::string cell;
    int idx = 0;
    while (std::getline(hs, cell, ',')) {
      if (idx >= 2) m.feature_names.push_back(cell);
      ++idx;
    }
    if (idx < 2) throw ParseError("feature matrix header missing patient_id,target");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    m.patient_ids.push_back(cell);
    std::getline(ls, cell, ',');
    m.targets.push_back(std::stoi(cell));
    std::vector<double> row;
    row.reserve(m.feature_names.size());
    while (std::getline(ls, cell, ',')) row.push_back(cell.empty() ? kMissing : std::stod(cell));
    if (row.size() != m.feature_names.size())
      throw ParseError("feature matrix row width mismatch in " + path);
    m.rows.push_back(std::move(row));
  }
  return m;
}

std::string schema_manifest_json(const FeatureSchema& schema) {
  Json arr = Json::array();
  for (const auto& d : schema.defs)
    arr.push_back({{"name", d.name}, {"group", std::string(1, d.group)}, {"type", d.type}});
  return arr.dump(2);
}

FeatureSchema schema_from_manifest_json(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed schema manifest: ") + e.what());
  }
  FeatureSchema s;
  for (const auto& item : doc) {
    FeatureDef d;
    d.name = item.at("name").get<std::string>();
    d.group = item.at("group").get<std::string>().at(0);
    d.type = item.at("type").get<std::string>();
    s.defs.push_back(std::move(d));
  }
  return s;
}

FeatureSchema schema_from_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema manifest '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return schema_from_manifest_json(ss.str());
}

}  // namespace cansave::features
