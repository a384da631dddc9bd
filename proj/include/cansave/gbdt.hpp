#ifndef CANSAVE_GBDT_HPP
#define CANSAVE_GBDT_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cansave/features.hpp"
#include "cansave/survival.hpp"

namespace cansave::boosting {

enum class MissingDir : std::uint8_t { Left, Right };

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  MissingDir missing_dir = MissingDir::Left;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;  // shrinkage already applied
  double gain = 0.0;        // loss reduction recorded at split time
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict_margin(std::span<const double> row) const;
};

// Column-major training data. NaN encodes missing.
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<char> feature_groups;            // one tag per feature; 0 if untagged
  std::vector<std::vector<double>> columns;    // [feature][row]
  std::vector<int> labels;

  std::size_t n_rows() const { return labels.size(); }
  std::size_t n_features() const { return columns.size(); }
  std::vector<double> row(std::size_t i) const;

  static Dataset from_matrix(const features::FeatureMatrix& m);
  // Keeps only the listed feature names (schema order preserved).
  Dataset select(const std::vector<std::string>& names) const;
};

struct TrainConfig {
  int max_depth = 6;
  int n_rounds = 500;
  double learning_rate = 0.05;
  double min_child_weight = 1.0;
  double subsample = 1.0;
  int early_stopping_rounds = 50;  // patience on validation AP; <=0 disables
  std::uint64_t seed = 0;
  enum class SplitMode { Auto, Exact, Histogram } split_mode = SplitMode::Auto;
  int n_bins = 256;
  std::size_t histogram_row_threshold = 50000;  // Auto: exact below, histogram above
  bool weight_classes = false;                  // loss re-weighting toggle

  void validate() const;
};

struct TrainLogRow {
  int round = 0;
  double train_loss = 0.0;
  double validate_ap = 0.0;
};

struct GBDTModel {
  double base_score = 0.0;  // prior log-odds
  double learning_rate = 0.0;
  std::vector<std::string> feature_names;
  std::vector<char> feature_groups;
  std::vector<Tree> trees;
  int best_round = -1;       // round kept by early stopping, -1 if none
  int rounds_trained = 0;
  std::uint64_t seed = 0;

  double predict_margin(std::span<const double> row) const;
  double predict_risk(std::span<const double> row) const;  // sigmoid(margin)
};

// Stagewise second-order fit of the logistic loss with greedy axis-aligned
// splits and a learned missing direction per split. Deterministic for a fixed
// seed; early stopping tracks validation average precision.
GBDTModel train_gbdt(const Dataset& train, const Dataset& validate,
                     const TrainConfig& config,
                     std::vector<TrainLogRow>* log = nullptr);

std::vector<double> predict_risk(const GBDTModel& model, const Dataset& data);

// Total split gain per feature, normalized to sum 100 (all zeros when the
// model has no splits).
std::map<std::string, double> gain_importance(const GBDTModel& model);

// Mean drop in average precision over seeded within-column shuffles.
// Features unused by every tree score exactly 0.
std::map<std::string, double> permutation_importance(const GBDTModel& model,
                                                     const Dataset& data,
                                                     int n_repeats = 5,
                                                     std::uint64_t seed = 0);

// Drops every survival-model feature (group 'i'); everything else unchanged.
features::FeatureSchema ablate_survival_features(const features::FeatureSchema& schema);
Dataset ablate_survival_features(const Dataset& data);

// Conditional in-horizon event probability from a fitted AFT model,
// 1 - S(age + horizon | x) / S(age | x), used as a ranking score.
std::vector<double> aft_as_classifier(const survival::AFTModel& model,
                                      const std::vector<cohort::LabeledWindow>& windows,
                                      double horizon_years);

std::string gbdt_to_json(const GBDTModel& model);
GBDTModel gbdt_from_json(std::string_view json_text);
GBDTModel gbdt_from_file(const std::string& path);
void gbdt_to_file(const std::string& path, const GBDTModel& model);

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log);

}  // namespace cansave::boosting

#endif  // CANSAVE_GBDT_HPP
