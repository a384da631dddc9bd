#include "cansave/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "cansave/error.hpp"
#include "cansave/features.hpp"
#include "cansave/metrics.hpp"
#include "cansave/rng.hpp"
#include "cansave/survival.hpp"
#include "cansave/synthgen.hpp"
#include "cansave/twosample.hpp"

namespace cansave::pipeline {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file '" + path + "'");
  out << text;
}

std::string art(const RunConfig& cfg, const char* name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void refuse_existing(const std::vector<std::string>& paths, bool force,
                     const std::string& stage) {
  if (force) return;
  for (const auto& p : paths)
    if (fs::exists(p))
      throw ConfigError("stage '" + stage + "': output '" + p +
                        "' already exists; pass force to overwrite");
}

// manifest.json accumulates sha256 per artifact; plain (sorted-key) json so
// the file is independent of write order.
void update_manifest(const RunConfig& cfg, const std::string& stage,
                     const std::vector<std::string>& artifacts) {
  const std::string path = art(cfg, "manifest.json");
  nlohmann::json m;
  if (fs::exists(path)) {
    try {
      m = nlohmann::json::parse(slurp(path));
    } catch (const nlohmann::json::exception&) {
      m = nlohmann::json::object();
    }
  }
  m["seed"] = cfg.seed;
  m["config_sha256"] = sha256_text(cfg.to_json_text());
  for (const auto& a : artifacts)
    m["artifacts"][fs::path(a).filename().string()] = sha256_file(a);
  if (!m.contains("stages")) m["stages"] = nlohmann::json::array();
  bool seen = false;
  for (const auto& s : m["stages"]) seen |= s.get<std::string>() == stage;
  if (!seen) m["stages"].push_back(stage);
  std::sort(m["stages"].begin(), m["stages"].end());
  spit(path, m.dump(2) + "\n");
}

std::vector<ehr::PatientHistory> load_corpus(const RunConfig& cfg) {
  if (cfg.corpus_format == "jsonl") return ehr::load_corpus_jsonl(cfg.corpus_path);
  return ehr::load_corpus_csv(cfg.corpus_path);
}

struct LabeledCohort {
  std::vector<cohort::LabeledWindow> windows;
  std::vector<std::pair<std::string, std::string>> excluded;  // id, reason
  std::unordered_map<std::string, std::size_t> index_of;      // patient -> window
};

LabeledCohort label_all(const std::vector<ehr::PatientHistory>& corpus,
                        const cohort::WindowConfig& wc) {
  LabeledCohort out;
  for (const auto& h : corpus) {
    std::string reason;
    auto w = cohort::label_patient(h, wc, &reason);
    if (!w) {
      out.excluded.emplace_back(h.patient_id, reason);
      continue;
    }
    out.index_of.emplace(h.patient_id, out.windows.size());
    out.windows.push_back(std::move(*w));
  }
  return out;
}

std::map<std::string, std::vector<std::string>> read_split_manifest(
    const RunConfig& cfg) {
  const std::string path = art(cfg, "split_manifest.csv");
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open split manifest '" + path + "' (run the split stage first)");
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, std::vector<std::string>> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("malformed split manifest row: " + line);
    samples[line.substr(comma + 1)].push_back(line.substr(0, comma));
  }
  return samples;
}

features::FeatureConfig feature_config(const RunConfig& cfg) {
  features::FeatureConfig fc = features::FeatureConfig::defaults();
  if (!cfg.icd_blocks_path.empty()) {
    const auto table = ehr::IcdBlockTable::from_json_file(cfg.icd_blocks_path);
    fc.icd_blocks.clear();
    for (const auto& b : table.blocks()) fc.icd_blocks.push_back(b);
    for (const auto& b : table.chapters()) fc.icd_blocks.push_back(b);
  }
  fc.recency_horizons_months = cfg.feature_horizons_months;
  fc.survival_features = cfg.survival_features;
  return fc;
}

struct SurvivalArtifacts {
  std::vector<survival::KMCurve> km;  // All, Male, Female
  survival::AFTModel aft;

  const survival::KMCurve& curve(const std::string& tag) const {
    for (const auto& c : km)
      if (c.cohort == tag) return c;
    throw ConfigError("KM curve for cohort '" + tag + "' missing from artifacts");
  }
};

SurvivalArtifacts load_survival(const RunConfig& cfg) {
  SurvivalArtifacts sa;
  std::ifstream in(art(cfg, "km_curves.csv"));
  if (!in)
    throw ConfigError("cannot open km_curves.csv (run the fit-survival stage first)");
  sa.km = survival::read_km_csv(in);
  sa.aft = survival::aft_model_from_file(art(cfg, "aft_model.json"));
  return sa;
}

features::FeatureMatrix build_matrix(const std::vector<cohort::LabeledWindow>& windows,
                                     const features::FeatureConfig& fc,
                                     const features::FeatureSchema& schema,
                                     const SurvivalArtifacts* survival_art) {
  features::SurvivalFeatureInputs inputs;
  if (fc.survival_features) {
    inputs.km_all = &survival_art->curve("All");
    inputs.km_male = &survival_art->curve("Male");
    inputs.km_female = &survival_art->curve("Female");
    inputs.aft = &survival_art->aft;
  }
  features::FeatureMatrix m;
  m.feature_names = schema.names();
  for (const auto& d : schema.defs) m.feature_groups.push_back(d.group);
  for (const auto& w : windows) {
    m.patient_ids.push_back(w.patient_id);
    m.targets.push_back(w.target);
    m.rows.push_back(features::extract_features(w, inputs, fc, schema));
  }
  return m;
}

boosting::Dataset dataset_from_file(const RunConfig& cfg, const char* file,
                                    const features::FeatureSchema& schema) {
  auto m = features::read_feature_csv_file(art(cfg, file));
  if (m.feature_names != schema.names())
    throw SchemaError(std::string(file) + ": columns do not match schema.json");
  m.feature_groups.clear();
  for (const auto& d : schema.defs) m.feature_groups.push_back(d.group);
  return boosting::Dataset::from_matrix(m);
}

std::vector<cohort::LabeledWindow> sample_windows(
    const LabeledCohort& cohort_data,
    const std::map<std::string, std::vector<std::string>>& samples,
    const std::string& name) {
  const auto it = samples.find(name);
  if (it == samples.end())
    throw ConfigError("split manifest has no sample named '" + name + "'");
  std::vector<cohort::LabeledWindow> out;
  for (const auto& id : it->second) {
    const auto w = cohort_data.index_of.find(id);
    if (w != cohort_data.index_of.end()) out.push_back(cohort_data.windows[w->second]);
  }
  return out;
}

// ---- stages ---------------------------------------------------------------

void stage_split(const RunConfig& cfg, bool force) {
  const std::vector<std::string> outputs = {art(cfg, "split_manifest.csv"),
                                            art(cfg, "homogeneity.json"),
                                            art(cfg, "excluded_patients.csv")};
  refuse_existing(outputs, force, "split");
  const auto corpus = load_corpus(cfg);
  const auto labeled = label_all(corpus, cfg.window);
  if (labeled.windows.empty()) throw NumericError("split: no labelable patients");

  std::vector<cohort::StratumPatient> strata;
  strata.reserve(labeled.windows.size());
  for (const auto& w : labeled.windows)
    strata.push_back({w.patient_id, w.sex, w.age_at_pred});

  cohort::SplitSpec spec;
  spec.fractions = cfg.split.fractions;
  spec.age_bin_edges = cfg.split.age_bin_edges;
  spec.seed = cfg.seed;
  const auto samples = cohort::stratified_split(strata, spec);

  {
    std::ofstream out(outputs[0], std::ios::binary);
    out << "patient_id,sample_name\n";
    for (const auto& [name, _] : cfg.split.fractions)
      for (const auto& id : samples.at(name)) out << id << ',' << name << '\n';
  }
  {
    std::ofstream out(outputs[2], std::ios::binary);
    out << "patient_id,reason\n";
    for (const auto& [id, reason] : labeled.excluded) out << id << ',' << reason << '\n';
  }

  // Homogeneity of every sample against the pooled set: energy test on
  // (sex, age), log-rank on censored event ages.
  std::vector<std::array<double, 2>> pooled_points;
  for (const auto& w : labeled.windows)
    pooled_points.push_back({static_cast<double>(w.sex), w.age_at_pred});
  std::unordered_map<std::string, cohort::SurvivalObservation> obs_of;
  for (const auto& h : corpus) {
    auto o = cohort::to_survival_observation(h, cfg.window);
    if (o) obs_of.emplace(h.patient_id, std::move(*o));
  }
  std::vector<cohort::SurvivalObservation> pooled_obs;
  for (const auto& w : labeled.windows) {
    const auto it = obs_of.find(w.patient_id);
    if (it != obs_of.end()) pooled_obs.push_back(it->second);
  }

  Json homo = Json::array();
  double min_p = 1.0;
  for (const auto& [name, _] : cfg.split.fractions) {
    std::vector<std::array<double, 2>> pts;
    std::vector<cohort::SurvivalObservation> obs;
    for (const auto& id : samples.at(name)) {
      const auto w = labeled.index_of.find(id);
      if (w != labeled.index_of.end()) {
        const auto& win = labeled.windows[w->second];
        pts.push_back({static_cast<double>(win.sex), win.age_at_pred});
      }
      const auto o = obs_of.find(id);
      if (o != obs_of.end()) obs.push_back(o->second);
    }
    stats::EnergyTestOptions opts;
    opts.n_permutations = cfg.split.homogeneity_permutations;
    opts.max_points_per_sample = cfg.split.homogeneity_max_points;
    opts.seed = derive_seed(cfg.seed, std::hash<std::string>{}(name));
    const auto energy = stats::energy_two_sample(pts, pooled_points, opts);
    const auto logrank = stats::logrank_two_sample(obs, pooled_obs);
    min_p = std::min({min_p, energy.p_value, logrank.p_value});
    homo.push_back({{"sample", name},
                    {"test", energy.test},
                    {"statistic", energy.statistic},
                    {"p_value", energy.p_value},
                    {"n_permutations", energy.n_permutations},
                    {"seed", opts.seed}});
    homo.push_back({{"sample", name},
                    {"test", logrank.test},
                    {"statistic", logrank.chi_square},
                    {"p_value", logrank.p_value}});
  }
  Json doc;
  doc["tests"] = std::move(homo);
  doc["min_p_value"] = min_p;
  doc["passes_gate"] = min_p > 0.05;
  spit(outputs[1], doc.dump(2) + "\n");
  update_manifest(cfg, "split", outputs);
}

void stage_fit_survival(const RunConfig& cfg, bool force) {
  const std::vector<std::string> outputs = {art(cfg, "km_curves.csv"),
                                            art(cfg, "aft_model.json")};
  refuse_existing(outputs, force, "fit-survival");
  const auto corpus = load_corpus(cfg);
  const auto labeled = label_all(corpus, cfg.window);
  const auto samples = read_split_manifest(cfg);

  const auto build_obs = [&](const std::string& sample)
      -> std::vector<cohort::SurvivalObservation> {
    std::unordered_map<std::string, const ehr::PatientHistory*> by_id;
    for (const auto& h : corpus) by_id.emplace(h.patient_id, &h);
    std::vector<cohort::SurvivalObservation> obs;
    const auto it = samples.find(sample);
    if (it == samples.end())
      throw ConfigError("split manifest has no sample named '" + sample + "'");
    for (const auto& id : it->second) {
      const auto h = by_id.find(id);
      const auto w = labeled.index_of.find(id);
      if (h == by_id.end() || w == labeled.index_of.end()) continue;
      auto o = cohort::to_survival_observation(*h->second, cfg.window);
      if (!o) continue;
      o->covariates =
          features::aft_covariates_from_window(labeled.windows[w->second]);
      obs.push_back(std::move(*o));
    }
    return obs;
  };

  const auto train_obs = build_obs("survival-train");
  const auto test_obs = build_obs("survival-test");
  if (train_obs.empty()) throw NumericError("fit-survival: empty survival-train sample");

  std::vector<cohort::SurvivalObservation> male, female;
  // Covariate slot 0 is the sex flag.
  for (const auto& o : train_obs)
    (o.covariates[0] > 0.5 ? male : female).push_back(o);

  std::vector<survival::KMCurve> curves;
  curves.push_back(survival::fit_kaplan_meier(train_obs, "All"));
  if (!male.empty()) curves.push_back(survival::fit_kaplan_meier(male, "Male"));
  if (!female.empty()) curves.push_back(survival::fit_kaplan_meier(female, "Female"));
  {
    std::ofstream out(outputs[0], std::ios::binary);
    survival::write_km_csv(out, curves);
  }

  const auto model =
      survival::fit_aft_weibull(train_obs, features::aft_covariate_names());
  const auto diag = survival::aft_diagnostics(model, train_obs, test_obs);
  survival::aft_model_to_file(outputs[1], model, diag);
  update_manifest(cfg, "fit-survival", outputs);
}

void stage_featurize(const RunConfig& cfg, bool force) {
  const std::vector<std::string> outputs = {
      art(cfg, "schema.json"), art(cfg, "features_train.csv"),
      art(cfg, "features_validate.csv"), art(cfg, "features_test.csv")};
  refuse_existing(outputs, force, "featurize");
  const auto corpus = load_corpus(cfg);
  const auto labeled = label_all(corpus, cfg.window);
  const auto samples = read_split_manifest(cfg);
  const auto fc = feature_config(cfg);
  const auto schema = features::build_schema(fc);
  SurvivalArtifacts sa;
  if (fc.survival_features) sa = load_survival(cfg);

  spit(outputs[0], features::schema_manifest_json(schema) + "\n");
  const char* names[] = {"train", "validate", "test"};
  for (int i = 0; i < 3; ++i) {
    const auto windows = sample_windows(labeled, samples, names[i]);
    const auto matrix = build_matrix(windows, fc, schema, &sa);
    features::write_feature_csv_file(outputs[static_cast<std::size_t>(i) + 1], matrix);
  }
  update_manifest(cfg, "featurize", outputs);
}

void stage_train(const RunConfig& cfg, bool force) {
  std::vector<std::string> outputs = {art(cfg, "gbdt_model.json"),
                                      art(cfg, "train_log.csv")};
  if (cfg.evaluate.ablation) {
    outputs.push_back(art(cfg, "gbdt_model_ablation.json"));
    outputs.push_back(art(cfg, "train_log_ablation.csv"));
  }
  refuse_existing(outputs, force, "train");
  const auto schema = features::schema_from_manifest_file(art(cfg, "schema.json"));
  const auto train = dataset_from_file(cfg, "features_train.csv", schema);
  const auto validate = dataset_from_file(cfg, "features_validate.csv", schema);

  auto tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 0x6bd7);
  std::vector<boosting::TrainLogRow> log;
  const auto model = boosting::train_gbdt(train, validate, tc, &log);
  boosting::gbdt_to_file(outputs[0], model);
  boosting::write_train_log_csv(outputs[1], log);

  if (cfg.evaluate.ablation) {
    const auto train_ab = boosting::ablate_survival_features(train);
    const auto validate_ab = boosting::ablate_survival_features(validate);
    std::vector<boosting::TrainLogRow> log_ab;
    const auto model_ab = boosting::train_gbdt(train_ab, validate_ab, tc, &log_ab);
    boosting::gbdt_to_file(outputs[2], model_ab);
    boosting::write_train_log_csv(outputs[3], log_ab);
  }
  update_manifest(cfg, "train", outputs);
}

void stage_evaluate(const RunConfig& cfg, bool force) {
  const std::vector<std::string> outputs = {art(cfg, "metrics_report.json"),
                                            art(cfg, "importance.csv")};
  refuse_existing(outputs, force, "evaluate");
  const auto schema = features::schema_from_manifest_file(art(cfg, "schema.json"));
  const auto test = dataset_from_file(cfg, "features_test.csv", schema);
  const auto model = boosting::gbdt_from_file(art(cfg, "gbdt_model.json"));
  const auto scores = boosting::predict_risk(model, test);

  const auto ap_fn = [](std::span<const double> s, std::span<const int> y) {
    return metrics::average_precision(s, y);
  };
  const auto auc_fn = [](std::span<const double> s, std::span<const int> y) {
    return metrics::roc_auc(s, y);
  };

  Json doc;
  const auto add_model = [&](const char* key, const std::vector<double>& sc) {
    const auto ap = metrics::bootstrap_ci(ap_fn, "average_precision", sc, test.labels,
                                          cfg.evaluate.n_bootstrap, cfg.evaluate.ci_level,
                                          derive_seed(cfg.seed, 0xa9u));
    const auto auc = metrics::bootstrap_ci(auc_fn, "roc_auc", sc, test.labels,
                                           cfg.evaluate.n_bootstrap, cfg.evaluate.ci_level,
                                           derive_seed(cfg.seed, 0xacu));
    doc[key] = {{"average_precision",
                 {{"value", ap.value}, {"ci_low", ap.ci_low}, {"ci_high", ap.ci_high}}},
                {"roc_auc",
                 {{"value", auc.value}, {"ci_low", auc.ci_low}, {"ci_high", auc.ci_high}}},
                {"n", test.labels.size()},
                {"n_positive", ap.n_positive}};
  };
  add_model("full", scores);

  std::vector<double> scores_ablation;
  if (cfg.evaluate.ablation) {
    const auto model_ab = boosting::gbdt_from_file(art(cfg, "gbdt_model_ablation.json"));
    scores_ablation = boosting::predict_risk(model_ab, boosting::ablate_survival_features(test));
    add_model("ablation", scores_ablation);
    doc["full_vs_ablation_p_one_sided"] = metrics::paired_bootstrap_p_greater(
        scores, scores_ablation, test.labels, ap_fn, cfg.evaluate.n_bootstrap,
        derive_seed(cfg.seed, 0xabab));
  }

  // AFT regression used directly as a ranking score on the test windows.
  {
    const auto corpus = load_corpus(cfg);
    const auto labeled = label_all(corpus, cfg.window);
    const auto samples = read_split_manifest(cfg);
    const auto windows = sample_windows(labeled, samples, "test");
    const auto aft = survival::aft_model_from_file(art(cfg, "aft_model.json"));
    std::vector<int> labels;
    for (const auto& w : windows) labels.push_back(w.target);
    const auto aft_scores =
        boosting::aft_as_classifier(aft, windows, cfg.window.delta_pred_months / 12.0);
    const auto ap = metrics::bootstrap_ci(ap_fn, "average_precision", aft_scores, labels,
                                          cfg.evaluate.n_bootstrap, cfg.evaluate.ci_level,
                                          derive_seed(cfg.seed, 0xaf7u));
    const auto auc = metrics::bootstrap_ci(auc_fn, "roc_auc", aft_scores, labels,
                                           cfg.evaluate.n_bootstrap, cfg.evaluate.ci_level,
                                           derive_seed(cfg.seed, 0xaf8u));
    doc["aft_as_classifier"] = {
        {"average_precision",
         {{"value", ap.value}, {"ci_low", ap.ci_low}, {"ci_high", ap.ci_high}}},
        {"roc_auc",
         {{"value", auc.value}, {"ci_low", auc.ci_low}, {"ci_high", auc.ci_high}}}};
  }

  // Importances and the threshold selection rule.
  const auto gain = boosting::gain_importance(model);
  const auto perm = boosting::permutation_importance(
      model, test, cfg.evaluate.permutation_repeats, derive_seed(cfg.seed, 0x9e99));
  std::vector<std::pair<std::string, double>> gain_ordered;
  for (const auto& name : model.feature_names) gain_ordered.emplace_back(name, gain.at(name));
  std::stable_sort(gain_ordered.begin(), gain_ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto retained =
      features::select_features(gain_ordered, cfg.evaluate.importance_threshold);
  doc["n_features"] = model.feature_names.size();
  doc["n_retained_at_threshold"] = retained.size();
  doc["importance_threshold"] = cfg.evaluate.importance_threshold;
  spit(outputs[0], doc.dump(2) + "\n");

  {
    std::ofstream out(outputs[1], std::ios::binary);
    out << "feature,group,gain_importance,permutation_importance,retained\n";
    char buf[64];
    std::map<std::string, char> group_of;
    for (const auto& d : schema.defs) group_of[d.name] = d.group;
    std::map<std::string, bool> kept;
    for (const auto& name : retained) kept[name] = true;
    for (const auto& [name, g] : gain_ordered) {
      std::snprintf(buf, sizeof buf, ",%c,%.17g,%.17g,%d\n", group_of[name], g,
                    perm.at(name), kept.count(name) ? 1 : 0);
      out << name << buf;
    }
  }
  update_manifest(cfg, "evaluate", outputs);
}

void stage_retro(const RunConfig& cfg, bool force) {
  if (!cfg.retro.enabled)
    throw ConfigError("retro stage requested but config has no retro.t_pred");
  const std::vector<std::string> outputs = {art(cfg, "retro_report.json"),
                                            art(cfg, "retro_report.txt"),
                                            art(cfg, "retro_curve.csv")};
  refuse_existing(outputs, force, "retro");
  const auto corpus = load_corpus(cfg);
  const auto schema = features::schema_from_manifest_file(art(cfg, "schema.json"));
  const auto model = boosting::gbdt_from_file(art(cfg, "gbdt_model.json"));
  const auto fc = feature_config(cfg);
  SurvivalArtifacts sa;
  if (fc.survival_features) sa = load_survival(cfg);

  retro::RetroConfig rc;
  rc.t_pred = Date::parse_iso(cfg.retro.t_pred, "retro.t_pred");
  rc.delta_obs_months = cfg.window.delta_obs_months;
  rc.delta_pred_months = cfg.window.delta_pred_months;
  rc.target_block = cfg.window.target_block;
  rc.top_k = cfg.retro.top_k;
  rc.age_group_edges = cfg.retro.age_group_edges;
  rc.seed = cfg.retro.seed ? cfg.retro.seed : cfg.seed;
  rc.curve_points = cfg.retro.curve_points;
  rc.curve_bootstrap = cfg.retro.curve_bootstrap;

  const auto scorer = [&](const std::vector<cohort::LabeledWindow>& windows) {
    const auto matrix = build_matrix(windows, fc, schema, &sa);
    std::vector<double> out;
    out.reserve(matrix.rows.size());
    for (const auto& row : matrix.rows) out.push_back(model.predict_risk(row));
    return out;
  };

  const auto report = retro::run_retro(corpus, scorer, rc);
  spit(outputs[0], report.to_json_text() + "\n");
  spit(outputs[1], report.to_text_table());
  retro::write_curve_csv(outputs[2], report.curve);
  update_manifest(cfg, "retro", outputs);
}

void stage_report(const RunConfig& cfg, bool force) {
  const std::vector<std::string> outputs = {art(cfg, "report.txt")};
  refuse_existing(outputs, force, "report");
  std::ostringstream os;
  os << "== pipeline report ==\n";

  const std::string homo_path = art(cfg, "homogeneity.json");
  if (fs::exists(homo_path)) {
    const auto doc = Json::parse(slurp(homo_path));
    os << "\n-- split homogeneity --\n";
    char buf[160];
    for (const auto& t : doc["tests"]) {
      std::snprintf(buf, sizeof buf, "  %-16s %-20s statistic %10.4f   p=%.4f\n",
                    t["sample"].get<std::string>().c_str(),
                    t["test"].get<std::string>().c_str(), t["statistic"].get<double>(),
                    t["p_value"].get<double>());
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "  min p-value: %.4f (gate %s)\n",
                  doc["min_p_value"].get<double>(),
                  doc["passes_gate"].get<bool>() ? "passed" : "FAILED");
    os << buf;
  }

  const std::string aft_path = art(cfg, "aft_model.json");
  if (fs::exists(aft_path)) {
    const auto doc = Json::parse(slurp(aft_path));
    os << "\n-- survival regression --\n";
    char buf[200];
    std::snprintf(buf, sizeof buf, "  baseline: lambda=%.4f rho=%.4f  logL=%.2f\n",
                  doc["baseline"]["lambda"].get<double>(),
                  doc["baseline"]["rho"].get<double>(),
                  doc["fit"]["log_likelihood"].get<double>());
    os << buf;
    if (doc.contains("diagnostics")) {
      std::snprintf(buf, sizeof buf, "  AIC=%.2f  LR=%.2f  heldout C-index=%.4f\n",
                    doc["diagnostics"]["aic"].get<double>(),
                    doc["diagnostics"]["lr_statistic"].get<double>(),
                    doc["diagnostics"]["c_index_heldout"].get<double>());
      os << buf;
      os << "  covariate                     coef      se        z         p\n";
      for (const auto& c : doc["diagnostics"]["coefficients"]) {
        std::snprintf(buf, sizeof buf, "  %-26s %9.4f %9.4f %9.3f  %8.2e\n",
                      c["name"].get<std::string>().c_str(), c["coef"].get<double>(),
                      c["std_error"].get<double>(), c["z"].get<double>(),
                      c["p"].get<double>());
        os << buf;
      }
    }
  }

  const std::string metrics_path = art(cfg, "metrics_report.json");
  if (fs::exists(metrics_path)) {
    const auto doc = Json::parse(slurp(metrics_path));
    os << "\n-- ranking metrics (test sample) --\n";
    char buf[160];
    for (const char* key : {"full", "ablation", "aft_as_classifier"}) {
      if (!doc.contains(key)) continue;
      const auto& m = doc[key];
      std::snprintf(buf, sizeof buf,
                    "  %-18s AP %.4f [%.4f, %.4f]   ROC AUC %.4f [%.4f, %.4f]\n", key,
                    m["average_precision"]["value"].get<double>(),
                    m["average_precision"]["ci_low"].get<double>(),
                    m["average_precision"]["ci_high"].get<double>(),
                    m["roc_auc"]["value"].get<double>(),
                    m["roc_auc"]["ci_low"].get<double>(),
                    m["roc_auc"]["ci_high"].get<double>());
      os << buf;
    }
    if (doc.contains("full_vs_ablation_p_one_sided")) {
      std::snprintf(buf, sizeof buf, "  paired bootstrap p (full > ablation): %.4f\n",
                    doc["full_vs_ablation_p_one_sided"].get<double>());
      os << buf;
    }
  }

  const std::string retro_path = art(cfg, "retro_report.txt");
  if (fs::exists(retro_path)) {
    os << "\n-- retro experiment --\n";
    os << slurp(retro_path);
  }
  spit(outputs[0], os.str());
  update_manifest(cfg, "report", outputs);
}

}  // namespace

// ---- config ---------------------------------------------------------------

RunConfig RunConfig::from_json_text(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  RunConfig c;
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    c.corpus_path = p.value("corpus", "");
    c.truth_path = p.value("truth", "");
    c.out_dir = p.value("out_dir", c.out_dir);
  }
  c.corpus_format = j.value("corpus_format", c.corpus_format);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  if (j.contains("window")) {
    const auto& w = j["window"];
    c.window.delta_obs_months = w.value("delta_obs_months", c.window.delta_obs_months);
    c.window.delta_pred_months = w.value("delta_pred_months", c.window.delta_pred_months);
    c.window.target_offset_days = w.value("target_offset_days", c.window.target_offset_days);
    c.window.target_block = w.value("target_block", c.window.target_block);
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    if (s.contains("fractions")) {
      c.split.fractions.clear();
      for (const auto& [name, w] : s["fractions"].items())
        c.split.fractions.emplace_back(name, w.get<double>());
    }
    if (s.contains("age_bin_edges"))
      c.split.age_bin_edges = s["age_bin_edges"].get<std::vector<double>>();
    c.split.homogeneity_permutations =
        s.value("homogeneity_permutations", c.split.homogeneity_permutations);
    c.split.homogeneity_max_points =
        s.value("homogeneity_max_points", c.split.homogeneity_max_points);
  }
  if (j.contains("features")) {
    const auto& f = j["features"];
    if (f.contains("recency_horizons_months"))
      c.feature_horizons_months = f["recency_horizons_months"].get<std::vector<int>>();
    c.survival_features = f.value("survival_features", c.survival_features);
    c.icd_blocks_path = f.value("icd_blocks_path", c.icd_blocks_path);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train.max_depth = t.value("max_depth", c.train.max_depth);
    c.train.n_rounds = t.value("n_rounds", c.train.n_rounds);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.min_child_weight = t.value("min_child_weight", c.train.min_child_weight);
    c.train.subsample = t.value("subsample", c.train.subsample);
    c.train.early_stopping_rounds =
        t.value("early_stopping_rounds", c.train.early_stopping_rounds);
    c.train.weight_classes = t.value("weight_classes", c.train.weight_classes);
    const std::string mode = t.value("split_mode", "auto");
    if (mode == "exact")
      c.train.split_mode = boosting::TrainConfig::SplitMode::Exact;
    else if (mode == "histogram")
      c.train.split_mode = boosting::TrainConfig::SplitMode::Histogram;
  }
  if (j.contains("evaluate")) {
    const auto& e = j["evaluate"];
    c.evaluate.n_bootstrap = e.value("n_bootstrap", c.evaluate.n_bootstrap);
    c.evaluate.ci_level = e.value("ci_level", c.evaluate.ci_level);
    c.evaluate.permutation_repeats =
        e.value("permutation_repeats", c.evaluate.permutation_repeats);
    c.evaluate.importance_threshold =
        e.value("importance_threshold", c.evaluate.importance_threshold);
    c.evaluate.ablation = e.value("ablation", c.evaluate.ablation);
  }
  if (j.contains("retro")) {
    const auto& r = j["retro"];
    c.retro.enabled = r.contains("t_pred");
    c.retro.t_pred = r.value("t_pred", "");
    if (r.contains("top_k")) c.retro.top_k = r["top_k"].get<std::vector<std::size_t>>();
    if (r.contains("age_group_edges"))
      c.retro.age_group_edges = r["age_group_edges"].get<std::vector<double>>();
    c.retro.seed = r.value("seed", c.retro.seed);
    c.retro.curve_points = r.value("curve_points", c.retro.curve_points);
    c.retro.curve_bootstrap = r.value("curve_bootstrap", c.retro.curve_bootstrap);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  return from_json_text(slurp(path));
}

std::string RunConfig::to_json_text() const {
  Json j;
  j["paths"] = {{"corpus", corpus_path}, {"truth", truth_path}, {"out_dir", out_dir}};
  j["corpus_format"] = corpus_format;
  j["seed"] = seed;
  j["threads"] = threads;
  j["window"] = {{"delta_obs_months", window.delta_obs_months},
                 {"delta_pred_months", window.delta_pred_months},
                 {"target_offset_days", window.target_offset_days},
                 {"target_block", window.target_block}};
  Json fractions = Json::object();
  for (const auto& [name, w] : split.fractions) fractions[name] = w;
  j["split"] = {{"fractions", std::move(fractions)},
                {"age_bin_edges", split.age_bin_edges},
                {"homogeneity_permutations", split.homogeneity_permutations},
                {"homogeneity_max_points", split.homogeneity_max_points}};
  j["features"] = {{"recency_horizons_months", feature_horizons_months},
                   {"survival_features", survival_features},
                   {"icd_blocks_path", icd_blocks_path}};
  const char* mode = train.split_mode == boosting::TrainConfig::SplitMode::Exact
                         ? "exact"
                         : train.split_mode == boosting::TrainConfig::SplitMode::Histogram
                               ? "histogram"
                               : "auto";
  j["train"] = {{"max_depth", train.max_depth},
                {"n_rounds", train.n_rounds},
                {"learning_rate", train.learning_rate},
                {"min_child_weight", train.min_child_weight},
                {"subsample", train.subsample},
                {"early_stopping_rounds", train.early_stopping_rounds},
                {"weight_classes", train.weight_classes},
                {"split_mode", mode}};
  j["evaluate"] = {{"n_bootstrap", evaluate.n_bootstrap},
                   {"ci_level", evaluate.ci_level},
                   {"permutation_repeats", evaluate.permutation_repeats},
                   {"importance_threshold", evaluate.importance_threshold},
                   {"ablation", evaluate.ablation}};
  if (retro.enabled) {
    j["retro"] = {{"t_pred", retro.t_pred},
                  {"top_k", retro.top_k},
                  {"age_group_edges", retro.age_group_edges},
                  {"seed", retro.seed},
                  {"curve_points", retro.curve_points},
                  {"curve_bootstrap", retro.curve_bootstrap}};
  }
  return j.dump(2);
}

void RunConfig::validate() const {
  if (corpus_path.empty()) throw ConfigError("run config: paths.corpus is required");
  if (out_dir.empty()) throw ConfigError("run config: paths.out_dir is required");
  if (corpus_format != "csv" && corpus_format != "jsonl")
    throw ConfigError("run config: corpus_format must be 'csv' or 'jsonl'");
  if (threads < 1) throw ConfigError("run config: threads must be >= 1");
  window.validate();
  train.validate();
  double total = 0.0;
  for (const auto& [name, w] : split.fractions) {
    if (w <= 0.0) throw ConfigError("run config: split fraction '" + name + "' must be > 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("run config: split fractions must sum to 1");
  for (const char* required : {"survival-train", "survival-test", "train", "validate", "test"}) {
    bool found = false;
    for (const auto& [name, _] : split.fractions) found |= name == required;
    if (!found)
      throw ConfigError(std::string("run config: split fractions must include '") +
                        required + "'");
  }
  if (retro.enabled && retro.t_pred.empty())
    throw ConfigError("run config: retro.t_pred is required when retro is configured");
}

// ---- entry points -----------------------------------------------------------

void cmd_generate(const std::string& spec_path, const std::string& out_dir) {
  const auto spec = synth::PopulationSpec::from_json_file(spec_path);
  synth::write_population(spec, out_dir);
}

void run_stage(const std::string& stage, const RunConfig& cfg, bool force) {
  fs::create_directories(cfg.out_dir);
  if (stage == "split")
    stage_split(cfg, force);
  else if (stage == "fit-survival")
    stage_fit_survival(cfg, force);
  else if (stage == "featurize")
    stage_featurize(cfg, force);
  else if (stage == "train")
    stage_train(cfg, force);
  else if (stage == "evaluate")
    stage_evaluate(cfg, force);
  else if (stage == "retro")
    stage_retro(cfg, force);
  else if (stage == "report")
    stage_report(cfg, force);
  else
    throw ConfigError("unknown stage '" + stage + "'");
}

void run_pipeline(const RunConfig& cfg, bool force) {
  for (const char* stage : {"split", "fit-survival", "featurize", "train", "evaluate"}) {
    try {
      run_stage(stage, cfg, force);
    } catch (const ConfigError& e) {
      throw ConfigError("pipeline stage '" + std::string(stage) + "' failed: " + e.what());
    } catch (const Error& e) {
      throw Error("pipeline stage '" + std::string(stage) + "' failed: " + e.what());
    }
  }
}

std::string sha256_text(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  hex.reserve(len * 2);
  static const char* alphabet = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    hex += alphabet[digest[i] >> 4];
    hex += alphabet[digest[i] & 0xf];
  }
  return hex;
}

std::string sha256_file(const std::string& path) { return sha256_text(slurp(path)); }

std::string read_report(const std::string& out_dir) {
  return slurp((fs::path(out_dir) / "report.txt").string());
}

}  // namespace cansave::pipeline
