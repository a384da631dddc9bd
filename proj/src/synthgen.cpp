#include "cansave/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cansave/error.hpp"
#include "cansave/features.hpp"
#include "cansave/metrics.hpp"
#include "cansave/rng.hpp"

namespace cansave::synth {
namespace {

using Json = nlohmann::ordered_json;

double sample_gamma(Rng& rng, double shape) {
  // Marsaglia-Tsang; shape >= 1 path with the boost for shape < 1.
  if (shape < 1.0) {
    const double u = std::max(rng.uniform01(), 1e-300);
    return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_beta(Rng& rng, double a, double b) {
  const double x = sample_gamma(rng, a);
  const double y = sample_gamma(rng, b);
  return x / (x + y);
}

double sample_age(Rng& rng, const AgeDistribution& age) {
  if (age.kind == AgeDistribution::Kind::Bins) {
    double total = 0.0;
    for (double w : age.weights) total += w;
    double u = rng.uniform01() * total;
    std::size_t bin = 0;
    for (; bin + 1 < age.weights.size(); ++bin) {
      if (u < age.weights[bin]) break;
      u -= age.weights[bin];
    }
    return rng.uniform(age.edges[bin], age.edges[bin + 1]);
  }
  for (int tries = 0; tries < 1000; ++tries) {
    const double a = age.mean + age.sd * rng.normal();
    if (a >= age.min_age && a <= age.max_age) return a;
  }
  return std::clamp(age.mean, age.min_age, age.max_age);
}

// Categorical over sorted map keys; deterministic across runs.
template <typename Map>
const std::string& pick_weighted(Rng& rng, const Map& mix, double total) {
  double u = rng.uniform01() * total;
  auto it = mix.begin();
  for (; std::next(it) != mix.end(); ++it) {
    if (u < it->second) break;
    u -= it->second;
  }
  return it->first;
}

std::string random_code_in_block(Rng& rng, const ehr::IcdBlock& block) {
  // Uniform root between the block bounds, optional one-digit subcategory.
  const char letter_lo = block.start[0], letter_hi = block.end[0];
  std::string root;
  for (int tries = 0; tries < 64; ++tries) {
    const char letter =
        static_cast<char>(letter_lo + rng.uniform_index(
                                          static_cast<std::uint64_t>(letter_hi - letter_lo + 1)));
    const int num = static_cast<int>(rng.uniform_index(100));
    char buf[8];
    std::snprintf(buf, sizeof buf, "%c%02d", letter, num);
    root = buf;
    if (root >= block.start && root <= block.end) break;
  }
  if (root.empty() || root < block.start || root > block.end) root = block.start;
  if (rng.bernoulli(0.5)) {
    root += '.';
    root += static_cast<char>('0' + rng.uniform_index(10));
  }
  return root;
}

std::string random_service_code(Rng& rng, const std::string& system) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "A%02d.%s.%03d",
                static_cast<int>(1 + rng.uniform_index(26)), system.c_str(),
                static_cast<int>(1 + rng.uniform_index(999)));
  return buf;
}

// Cancer nosology mix for inserted target events, roughly matching the
// population structure of detected neoplasms.
const std::map<std::string, double>& cancer_block_mix() {
  static const std::map<std::string, double> mix = {
      {"C00-C14", 0.03}, {"C15-C26", 0.20}, {"C30-C39", 0.16}, {"C43-C44", 0.05},
      {"C45-C49", 0.02}, {"C50", 0.09},     {"C51-C68", 0.25}, {"C69-C72", 0.03},
      {"C73-C75", 0.03}, {"C76-C80", 0.02}, {"C81-C96", 0.10}, {"C97", 0.02},
  };
  return mix;
}

double weibull_log_s(double t, double r, double lambda, double rho) {
  if (t <= 0.0) return 0.0;
  return -std::pow(t * r / lambda, rho);
}

Json age_to_json(const AgeDistribution& a) {
  Json j;
  if (a.kind == AgeDistribution::Kind::Bins) {
    j["kind"] = "bins";
    j["edges"] = a.edges;
    j["weights"] = a.weights;
  } else {
    j["kind"] = "normal";
    j["mean"] = a.mean;
    j["sd"] = a.sd;
    j["min"] = a.min_age;
    j["max"] = a.max_age;
  }
  return j;
}

AgeDistribution age_from_json(const Json& j) {
  AgeDistribution a;
  const std::string kind = j.value("kind", "normal");
  if (kind == "bins") {
    a.kind = AgeDistribution::Kind::Bins;
    a.edges = j.at("edges").get<std::vector<double>>();
    a.weights = j.at("weights").get<std::vector<double>>();
    if (a.edges.size() != a.weights.size() + 1 || a.weights.empty())
      throw ConfigError("age bins: need edges = weights + 1");
  } else if (kind == "normal") {
    a.kind = AgeDistribution::Kind::Normal;
    a.mean = j.value("mean", 41.0);
    a.sd = j.value("sd", 16.0);
    a.min_age = j.value("min", 18.0);
    a.max_age = j.value("max", 90.0);
  } else {
    throw ConfigError("age distribution kind must be 'normal' or 'bins'");
  }
  return a;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

PopulationSpec PopulationSpec::defaults() {
  PopulationSpec s;
  s.beta = {{"sex", 0.05},
            {"any_diagnosis_d00_d48", 0.06},
            {"any_diagnosis_i00_i99", 0.04},
            {"any_diagnosis_n40_n51", 0.05},
            {"service_visits_ratio", 0.10},
            {"weeks_after_first_visit", 0.0},
            {"avg_weeks_between_visits", -0.004}};
  s.diagnosis_block_mix = {{"I00-I99", 0.18}, {"J00-J99", 0.18}, {"K00-K93", 0.10},
                           {"D00-D48", 0.08}, {"E10-E14", 0.07}, {"N40-N51", 0.05},
                           {"M00-M99", 0.14}, {"R00-R99", 0.12}, {"O20-O29", 0.03},
                           {"Q00-Q99", 0.02}, {"Z00-Z99", 0.13}};
  s.service_system_mix = {{"05", 0.22}, {"06", 0.10}, {"12", 0.18},
                          {"16", 0.16}, {"26", 0.18}, {"30", 0.16}};
  return s;
}

void PopulationSpec::validate() const {
  if (n_patients == 0) throw ConfigError("population spec: n_patients must be positive");
  if (male_fraction < 0.0 || male_fraction > 1.0)
    throw ConfigError("population spec: male_fraction must be in [0,1]");
  if (!(lambda > 0.0) || !(rho > 0.0))
    throw ConfigError("population spec: lambda and rho must be positive");
  if (incidence_target < 0.0 || incidence_target >= 1.0)
    throw ConfigError("population spec: incidence_target must be in [0,1)");
  if (span_end <= span_start) throw ConfigError("population spec: empty span");
  if (t_pred < span_start || t_pred > span_end)
    throw ConfigError("population spec: t_pred outside span");
  const std::int64_t span_days = span_end - span_start;
  const std::int64_t need_days =
      static_cast<std::int64_t>((delta_obs_months + delta_pred_months) * 30);
  if (span_days < need_days)
    throw ConfigError("population spec: span shorter than observation + horizon");
  if (diagnosis_block_mix.empty() || service_system_mix.empty())
    throw ConfigError("population spec: empty code mixture");
  for (const auto& [name, _] : beta) {
    const auto names = features::aft_covariate_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw ConfigError("population spec: unknown hazard covariate '" + name + "'");
  }
}

std::string PopulationSpec::to_json_text() const {
  Json j;
  j["n_patients"] = n_patients;
  j["male_fraction"] = male_fraction;
  j["age"] = age_to_json(age);
  j["hazard"] = {{"lambda", lambda}, {"rho", rho}, {"beta", beta}};
  j["visits"] = {{"per_year", visits_per_year},
                 {"age_slope", visits_age_slope},
                 {"service_fraction_alpha", service_fraction_alpha},
                 {"service_fraction_beta", service_fraction_beta},
                 {"diagnosis_block_mix", diagnosis_block_mix},
                 {"service_system_mix", service_system_mix}};
  j["span"] = {{"start", span_start.to_iso()}, {"end", span_end.to_iso()}};
  j["window"] = {{"delta_obs_months", delta_obs_months},
                 {"delta_pred_months", delta_pred_months}};
  j["t_pred"] = t_pred.to_iso();
  j["incidence_target"] = incidence_target;
  j["incidence_rel_tolerance"] = incidence_rel_tolerance;
  j["seed"] = seed;
  return j.dump(2);
}

PopulationSpec PopulationSpec::from_json_text(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed population spec: ") + e.what());
  }
  PopulationSpec s = defaults();
  s.n_patients = j.value("n_patients", s.n_patients);
  s.male_fraction = j.value("male_fraction", s.male_fraction);
  if (j.contains("age")) s.age = age_from_json(j["age"]);
  if (j.contains("hazard")) {
    const auto& h = j["hazard"];
    s.lambda = h.value("lambda", s.lambda);
    s.rho = h.value("rho", s.rho);
    if (h.contains("beta")) s.beta = h["beta"].get<std::map<std::string, double>>();
  }
  if (j.contains("visits")) {
    const auto& v = j["visits"];
    s.visits_per_year = v.value("per_year", s.visits_per_year);
    s.visits_age_slope = v.value("age_slope", s.visits_age_slope);
    s.service_fraction_alpha = v.value("service_fraction_alpha", s.service_fraction_alpha);
    s.service_fraction_beta = v.value("service_fraction_beta", s.service_fraction_beta);
    if (v.contains("diagnosis_block_mix"))
      s.diagnosis_block_mix = v["diagnosis_block_mix"].get<std::map<std::string, double>>();
    if (v.contains("service_system_mix"))
      s.service_system_mix = v["service_system_mix"].get<std::map<std::string, double>>();
  }
  if (j.contains("span")) {
    s.span_start = Date::parse_iso(j["span"].at("start").get<std::string>(), "span.start");
    s.span_end = Date::parse_iso(j["span"].at("end").get<std::string>(), "span.end");
  }
  if (j.contains("window")) {
    s.delta_obs_months = j["window"].value("delta_obs_months", s.delta_obs_months);
    s.delta_pred_months = j["window"].value("delta_pred_months", s.delta_pred_months);
  }
  if (j.contains("t_pred"))
    s.t_pred = Date::parse_iso(j["t_pred"].get<std::string>(), "t_pred");
  else
    s.t_pred = s.span_end.add_months(-s.delta_pred_months);
  s.incidence_target = j.value("incidence_target", s.incidence_target);
  s.incidence_rel_tolerance = j.value("incidence_rel_tolerance", s.incidence_rel_tolerance);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

PopulationSpec PopulationSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open population spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

GeneratedCorpus generate_population(const PopulationSpec& spec) {
  spec.validate();
  GeneratedCorpus out;
  {
    char run[24];
    std::snprintf(run, sizeof run, "%016llx",
                  static_cast<unsigned long long>(
                      derive_seed(spec.seed, fnv1a(spec.to_json_text()))));
    out.run_id = run;
  }

  double diag_mix_total = 0.0, svc_mix_total = 0.0, cancer_mix_total = 0.0;
  for (const auto& [_, w] : spec.diagnosis_block_mix) diag_mix_total += w;
  for (const auto& [_, w] : spec.service_system_mix) svc_mix_total += w;
  for (const auto& [_, w] : cancer_block_mix()) cancer_mix_total += w;

  std::map<std::string, ehr::IcdBlock> diag_blocks;
  for (const auto& [label, _] : spec.diagnosis_block_mix)
    diag_blocks.emplace(label, ehr::block_from_label(label));
  std::map<std::string, ehr::IcdBlock> cancer_blocks;
  for (const auto& [label, _] : cancer_block_mix())
    cancer_blocks.emplace(label, ehr::block_from_label(label));

  // Hazard beta aligned with the canonical covariate order.
  const auto cov_names = features::aft_covariate_names();
  std::vector<double> beta(cov_names.size(), 0.0);
  for (std::size_t j = 0; j < cov_names.size(); ++j) {
    const auto it = spec.beta.find(cov_names[j]);
    if (it != spec.beta.end()) beta[j] = it->second;
  }

  const double horizon_years = spec.delta_pred_months / 12.0;
  const double span_years = years_between(spec.span_start, spec.span_end);
  double sum_age = 0.0, sum_male = 0.0, sum_prob = 0.0;
  std::size_t n_at_risk = 0, n_horizon_events = 0;

  out.histories.reserve(spec.n_patients);
  out.truth.reserve(spec.n_patients);

  for (std::size_t pi = 0; pi < spec.n_patients; ++pi) {
    Rng rng(derive_seed(spec.seed, pi));
    ehr::PatientHistory h;
    {
      char buf[32];
      std::snprintf(buf, sizeof buf, "p%07zu", pi);
      h.patient_id = buf;
    }
    h.sex = rng.bernoulli(spec.male_fraction) ? ehr::Sex::Male : ehr::Sex::Female;
    const double age_at_pred = sample_age(rng, spec.age);
    h.birth_date = spec.t_pred.add_days(-static_cast<std::int64_t>(std::lround(age_at_pred * 365.25)));
    sum_age += age_at_pred;
    sum_male += h.sex == ehr::Sex::Male ? 1.0 : 0.0;

    // Base visit stream over the span, yearly piecewise-constant rate.
    const double p_service = sample_beta(rng, spec.service_fraction_alpha, spec.service_fraction_beta);
    std::vector<ehr::EventRecord> events;
    const int n_years = static_cast<int>(std::ceil(span_years));
    for (int y = 0; y < n_years; ++y) {
      const Date year_start = spec.span_start.add_months(12 * y);
      const Date year_end = std::min(spec.span_start.add_months(12 * (y + 1)), spec.span_end);
      if (year_end <= year_start) break;
      const double frac = years_between(year_start, year_end);
      const double age_mid = years_between(h.birth_date, year_start) + 0.5 * frac;
      const double rate = std::max(
          0.5, spec.visits_per_year * (1.0 + spec.visits_age_slope * (age_mid - 40.0)));
      const int k = rng.poisson(rate * frac);
      for (int e = 0; e < k; ++e) {
        const std::int64_t offs = static_cast<std::int64_t>(rng.uniform_index(
            static_cast<std::uint64_t>(year_end - year_start) + 1));
        ehr::EventRecord ev;
        ev.patient_id = h.patient_id;
        ev.event_date = year_start.add_days(offs);
        if (rng.bernoulli(p_service)) {
          ev.type = ehr::EventType::MedicalService;
          ev.code = random_service_code(
              rng, pick_weighted(rng, spec.service_system_mix, svc_mix_total));
        } else {
          ev.type = ehr::EventType::Diagnosis;
          const auto& label = pick_weighted(rng, spec.diagnosis_block_mix, diag_mix_total);
          ev.code = random_code_in_block(rng, diag_blocks.at(label));
        }
        events.push_back(std::move(ev));
      }
    }
    if (events.empty()) {
      ehr::EventRecord ev;
      ev.patient_id = h.patient_id;
      ev.event_date = spec.span_start.add_days(static_cast<std::int64_t>(
          rng.uniform_index(static_cast<std::uint64_t>(spec.span_end - spec.span_start) + 1)));
      ev.type = ehr::EventType::MedicalService;
      ev.code = random_service_code(
          rng, pick_weighted(rng, spec.service_system_mix, svc_mix_total));
      events.push_back(std::move(ev));
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const ehr::EventRecord& a, const ehr::EventRecord& b) {
                       return a.event_date < b.event_date;
                     });
    h.events = std::move(events);

    // Hazard covariates from the patient's own observation window at t_pred.
    cohort::WindowConfig wc;
    wc.delta_obs_months = spec.delta_obs_months;
    wc.delta_pred_months = spec.delta_pred_months;
    const auto window = cohort::window_at(h, spec.t_pred, wc);
    const auto x = features::aft_covariates_from_window(window);
    double lin = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) lin += beta[j] * x[j];
    const double r = std::exp(lin);

    // Latent target age conditioned on being event-free at span entry.
    const double age_entry = std::max(years_between(h.birth_date, spec.span_start), 0.01);
    const double age_span_end = years_between(h.birth_date, spec.span_end);
    double u = rng.uniform01();
    while (u <= 0.0) u = rng.uniform01();
    const double log_s_entry = weibull_log_s(age_entry, r, spec.lambda, spec.rho);
    const double latent_age =
        spec.lambda / r *
        std::pow(-(std::log(u) + log_s_entry), 1.0 / spec.rho);

    TruthRow truth;
    truth.patient_id = h.patient_id;
    truth.latent_event_age = latent_age;
    truth.event_in_span = 0;

    const double age_pred_exact = years_between(h.birth_date, spec.t_pred);
    const double log_s_pred = weibull_log_s(age_pred_exact, r, spec.lambda, spec.rho);
    const double log_s_horizon =
        weibull_log_s(age_pred_exact + horizon_years, r, spec.lambda, spec.rho);
    truth.true_horizon_prob =
        spec.incidence_target == 0.0 ? 0.0 : 1.0 - std::exp(log_s_horizon - log_s_pred);

    if (spec.incidence_target > 0.0 && latent_age <= age_span_end) {
      const Date cancer_date = std::min(
          h.birth_date.add_days(static_cast<std::int64_t>(std::lround(latent_age * 365.25))),
          spec.span_end);
      truth.event_in_span = 1;
      // The record stream ends at the target diagnosis.
      std::vector<ehr::EventRecord> kept;
      for (auto& e : h.events)
        if (e.event_date <= cancer_date) kept.push_back(std::move(e));
      ehr::EventRecord cancer;
      cancer.patient_id = h.patient_id;
      cancer.event_date = cancer_date;
      cancer.type = ehr::EventType::Diagnosis;
      const auto& label = pick_weighted(rng, cancer_block_mix(), cancer_mix_total);
      cancer.code = random_code_in_block(rng, cancer_blocks.at(label));
      kept.push_back(std::move(cancer));
      h.events = std::move(kept);
    }

    if (latent_age > age_pred_exact) {
      ++n_at_risk;
      sum_prob += truth.true_horizon_prob;
      n_horizon_events += latent_age <= age_pred_exact + horizon_years ? 1 : 0;
    }
    out.summary.n_events += h.events.size();
    out.summary.n_cancer_in_span += truth.event_in_span;
    out.truth.push_back(std::move(truth));
    out.histories.push_back(std::move(h));
  }

  out.summary.n_patients = spec.n_patients;
  out.summary.male_fraction = sum_male / static_cast<double>(spec.n_patients);
  out.summary.mean_age_at_t_pred = sum_age / static_cast<double>(spec.n_patients);
  out.summary.mean_horizon_prob = n_at_risk ? sum_prob / static_cast<double>(n_at_risk) : 0.0;
  out.summary.horizon_event_fraction =
      n_at_risk ? static_cast<double>(n_horizon_events) / static_cast<double>(n_at_risk) : 0.0;

  if (spec.incidence_target > 0.0) {
    const double got = out.summary.mean_horizon_prob;
    const double band = std::max(spec.incidence_rel_tolerance * spec.incidence_target, 0.002);
    if (std::abs(got - spec.incidence_target) > band) {
      const double suggested =
          spec.lambda * std::pow(std::max(got, 1e-12) / spec.incidence_target, 1.0 / spec.rho);
      char msg[256];
      std::snprintf(msg, sizeof msg,
                    "generate_population: realized horizon incidence %.4f misses target %.4f; "
                    "try lambda in [%.1f, %.1f]",
                    got, spec.incidence_target, 0.8 * suggested, 1.25 * suggested);
      throw NumericError(msg);
    }
  }
  return out;
}

void write_truth_csv(const std::string& path, const std::vector<TruthRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write truth file '" + path + "'");
  out << "patient_id,latent_event_age,event_in_span,true_horizon_prob\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.10g,%d,%.10g\n", r.latent_event_age, r.event_in_span,
                  r.true_horizon_prob);
    out << r.patient_id << buf;
  }
}

std::vector<TruthRow> read_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open truth file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty truth file " + path);
  std::vector<TruthRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    TruthRow r;
    std::string cell;
    std::getline(ss, r.patient_id, ',');
    std::getline(ss, cell, ',');
    r.latent_event_age = std::stod(cell);
    std::getline(ss, cell, ',');
    r.event_in_span = std::stoi(cell);
    std::getline(ss, cell, ',');
    r.true_horizon_prob = std::stod(cell);
    rows.push_back(std::move(r));
  }
  return rows;
}

GenerateFiles write_population(const PopulationSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto corpus = generate_population(spec);

  GenerateFiles files;
  files.run_id = corpus.run_id;
  files.corpus_path = (fs::path(out_dir) / "ehr.csv").string();
  files.truth_path = (fs::path(out_dir) / "truth.csv").string();
  files.manifest_path = (fs::path(out_dir) / "manifest.json").string();

  ehr::write_corpus_csv_file(files.corpus_path, corpus.histories);
  write_truth_csv(files.truth_path, corpus.truth);

  Json manifest;
  manifest["run_id"] = corpus.run_id;
  manifest["seed"] = spec.seed;
  manifest["spec"] = Json::parse(spec.to_json_text());
  manifest["summary"] = {{"n_patients", corpus.summary.n_patients},
                         {"n_events", corpus.summary.n_events},
                         {"male_fraction", corpus.summary.male_fraction},
                         {"mean_age_at_t_pred", corpus.summary.mean_age_at_t_pred},
                         {"mean_horizon_prob", corpus.summary.mean_horizon_prob},
                         {"horizon_event_fraction", corpus.summary.horizon_event_fraction},
                         {"n_cancer_in_span", corpus.summary.n_cancer_in_span}};
  std::ofstream mf(files.manifest_path, std::ios::binary);
  if (!mf) throw ConfigError("cannot write manifest '" + files.manifest_path + "'");
  mf << manifest.dump(2) << '\n';
  return files;
}

TruthRanking truth_ranking(const std::vector<TruthRow>& truth,
                           const std::map<std::string, Date>& birth_by_id, Date t_pred,
                           int horizon_months, const std::string& corpus_run_id,
                           const std::string& truth_run_id) {
  if (corpus_run_id != truth_run_id)
    throw ConfigError("truth_ranking: corpus and truth come from different runs (" +
                      corpus_run_id + " vs " + truth_run_id + ")");
  const double horizon_years = horizon_months / 12.0;
  TruthRanking out;
  for (const auto& r : truth) {
    const auto it = birth_by_id.find(r.patient_id);
    if (it == birth_by_id.end()) continue;
    const double age_pred = years_between(it->second, t_pred);
    if (r.latent_event_age <= age_pred) continue;  // prevalent at t_pred
    out.patient_ids.push_back(r.patient_id);
    out.labels.push_back(r.latent_event_age <= age_pred + horizon_years ? 1 : 0);
    out.scores.push_back(r.true_horizon_prob);
  }
  bool any_pos = false;
  for (int y : out.labels) any_pos |= y != 0;
  if (any_pos) out.ap_ceiling = metrics::average_precision(out.scores, out.labels);
  return out;
}

std::vector<cohort::SurvivalObservation> sample_weibull_aft(
    double lambda, double rho, const std::vector<double>& beta, std::size_t n,
    double censor_fraction, std::uint64_t seed) {
  if (!(lambda > 0.0) || !(rho > 0.0))
    throw ConfigError("sample_weibull_aft: lambda and rho must be positive");
  if (censor_fraction < 0.0 || censor_fraction >= 1.0)
    throw ConfigError("sample_weibull_aft: censor_fraction must be in [0,1)");

  const std::size_t p = beta.size();
  const auto draw_covariates = [&](Rng& rng) {
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j)
      x[j] = (j % 2 == 0) ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.uniform01();
    return x;
  };
  const auto draw_time = [&](Rng& rng, const std::vector<double>& x) {
    double lin = 0.0;
    for (std::size_t j = 0; j < p; ++j) lin += beta[j] * x[j];
    double u = rng.uniform01();
    while (u <= 0.0) u = rng.uniform01();
    return lambda / std::exp(lin) * std::pow(-std::log(u), 1.0 / rho);
  };

  // Censoring times are an independent scaled copy of the event-time law;
  // the scale is calibrated on a pre-sample to hit the requested fraction.
  double censor_scale = std::numeric_limits<double>::infinity();
  if (censor_fraction > 0.0) {
    Rng cal(derive_seed(seed, 0xca1b));
    std::vector<double> ratios;
    const std::size_t m = 4000;
    ratios.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto xa = draw_covariates(cal);
      const auto xb = draw_covariates(cal);
      const double ta = draw_time(cal, xa);
      const double tb = draw_time(cal, xb);
      ratios.push_back(ta / tb);
    }
    std::sort(ratios.begin(), ratios.end());
    // P(censored) = P(scale * T' < T) = P(T / T' > scale).
    const std::size_t idx = static_cast<std::size_t>(
        std::min(static_cast<double>(m - 1),
                 std::floor((1.0 - censor_fraction) * static_cast<double>(m))));
    censor_scale = ratios[idx];
  }

  std::vector<cohort::SurvivalObservation> obs;
  obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, 0xab5u + i));
    cohort::SurvivalObservation o;
    o.covariates = draw_covariates(rng);
    const double t = draw_time(rng, o.covariates);
    double c = std::numeric_limits<double>::infinity();
    if (censor_fraction > 0.0) {
      const auto xc = draw_covariates(rng);
      c = censor_scale * draw_time(rng, xc);
    }
    o.event = t <= c ? 1 : 0;
    o.time = std::max(std::min(t, c), 1e-9);
    obs.push_back(std::move(o));
  }
  return obs;
}

}  // namespace cansave::synth
