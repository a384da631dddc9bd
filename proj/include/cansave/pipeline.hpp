#ifndef CANSAVE_PIPELINE_HPP
#define CANSAVE_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cansave/cohort.hpp"
#include "cansave/gbdt.hpp"
#include "cansave/retro.hpp"

namespace cansave::pipeline {

struct SplitConfig {
  std::vector<std::pair<std::string, double>> fractions = {{"survival-train", 0.07},
                                                           {"survival-test", 0.07},
                                                           {"train", 0.40},
                                                           {"validate", 0.23},
                                                           {"test", 0.23}};
  std::vector<double> age_bin_edges = {30, 45};
  int homogeneity_permutations = 1000;
  std::size_t homogeneity_max_points = 1000;
};

struct EvaluateConfig {
  int n_bootstrap = 1000;
  double ci_level = 0.95;
  int permutation_repeats = 3;
  double importance_threshold = 1.0;
  bool ablation = true;
};

struct RetroStageConfig {
  bool enabled = false;
  std::string t_pred;  // ISO date; required when enabled
  std::vector<std::size_t> top_k = {100, 1000};
  std::vector<double> age_group_edges = {35, 45, 55, 65, 75};
  std::uint64_t seed = 0;
  std::size_t curve_points = 40;
  int curve_bootstrap = 200;
};

// One JSON config drives every stage; stages communicate through files in
// out_dir, so any stage can be re-run in isolation.
struct RunConfig {
  std::string corpus_path;
  std::string truth_path;  // optional
  std::string out_dir = "out";
  std::string corpus_format = "csv";  // "csv" or "jsonl"
  std::uint64_t seed = 17;
  int threads = 1;

  cohort::WindowConfig window;
  SplitConfig split;
  std::vector<int> feature_horizons_months = {3, 6, 12, 24};
  bool survival_features = true;
  std::string icd_blocks_path;  // optional custom block table
  boosting::TrainConfig train;
  EvaluateConfig evaluate;
  RetroStageConfig retro;

  static RunConfig from_json_text(std::string_view text);
  static RunConfig from_json_file(const std::string& path);
  std::string to_json_text() const;
  void validate() const;
};

// Stage names accepted by run_stage, in pipeline order.
inline constexpr const char* kStages[] = {"split", "fit-survival", "featurize",
                                          "train", "evaluate", "retro", "report"};

void cmd_generate(const std::string& spec_path, const std::string& out_dir);

// Runs one named stage; refuses to overwrite its outputs unless force.
void run_stage(const std::string& stage, const RunConfig& config, bool force);

// split -> fit-survival -> featurize -> train -> evaluate, plus a manifest
// with hashes of every artifact.
void run_pipeline(const RunConfig& config, bool force);

std::string sha256_file(const std::string& path);
std::string sha256_text(std::string_view text);

// Loads out_dir/report.txt content produced by the report stage.
std::string read_report(const std::string& out_dir);

}  // namespace cansave::pipeline

#endif  // CANSAVE_PIPELINE_HPP
