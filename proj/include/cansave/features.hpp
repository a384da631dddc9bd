#ifndef CANSAVE_FEATURES_HPP
#define CANSAVE_FEATURES_HPP

#include <cmath>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "cansave/cohort.hpp"
#include "cansave/survival.hpp"

namespace cansave::features {

// Missing values travel as quiet NaN through the feature matrix and into the
// classifier, which routes them per split; nothing is imputed.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

struct FeatureDef {
  std::string name;
  char group = 'a';  // feature groups 'a'..'i'
  std::string type;  // "float", "count", "binary"
};

struct FeatureSchema {
  std::vector<FeatureDef> defs;

  std::size_t size() const { return defs.size(); }
  std::vector<std::string> names() const;
  bool same_names(const FeatureSchema& other) const;
};

struct FeatureConfig {
  std::vector<ehr::IcdBlock> icd_blocks;       // defaults to IcdBlockTable::defaults()
  std::vector<std::string> service_systems;    // group labels, e.g. "sys01".."sys30", "immune"
  std::vector<int> recency_horizons_months = {3, 6, 12, 24};
  bool survival_features = true;

  static FeatureConfig defaults();
  void validate() const;
};

FeatureSchema build_schema(const FeatureConfig& config);

struct SurvivalFeatureInputs {
  const survival::KMCurve* km_all = nullptr;
  const survival::KMCurve* km_male = nullptr;
  const survival::KMCurve* km_female = nullptr;
  const survival::AFTModel* aft = nullptr;
};

// Feature vector for one window, aligned with build_schema(config). Ignores
// any event dated after t_pred regardless of what the window carries.
std::vector<double> extract_features(const cohort::LabeledWindow& window,
                                     const SurvivalFeatureInputs& survival_inputs,
                                     const FeatureConfig& config,
                                     const FeatureSchema& schema);

// The seven regression covariates, in their canonical order.
std::vector<std::string> aft_covariate_names();
std::vector<double> aft_covariates_from_window(const cohort::LabeledWindow& window);

// Names whose importance score meets the threshold, order preserved. An empty
// result is signalled through `warned_empty`, not an error.
std::vector<std::string> select_features(
    const std::vector<std::pair<std::string, double>>& importances,
    double threshold = 1.0, bool* warned_empty = nullptr);

// ---- feature matrix ------------------------------------------------------

struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::vector<char> feature_groups;
  std::vector<std::string> patient_ids;
  std::vector<int> targets;
  std::vector<std::vector<double>> rows;  // row-major, NaN = missing

  std::size_t n_rows() const { return rows.size(); }
};

void write_feature_csv(std::ostream& out, const FeatureMatrix& m);
void write_feature_csv_file(const std::string& path, const FeatureMatrix& m);
FeatureMatrix read_feature_csv_file(const std::string& path);

std::string schema_manifest_json(const FeatureSchema& schema);
FeatureSchema schema_from_manifest_json(std::string_view json_text);
FeatureSchema schema_from_manifest_file(const std::string& path);

}  // namespace cansave::features

#endif  // CANSAVE_FEATURES_HPP
