#include "cansave/retro.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cansave/error.hpp"
#include "cansave/rng.hpp"

namespace cansave::retro {
namespace {

using Json = nlohmann::ordered_json;

// Coarse age-specific incidence proxy (arbitrary units, monotone in age);
// only the induced ordering matters for the baseline ranking.
double age_incidence_proxy(double age) {
  static const std::pair<double, double> table[] = {
      {35.0, 0.5}, {45.0, 1.2}, {55.0, 3.0}, {65.0, 7.0}, {75.0, 12.0}, {200.0, 18.0}};
  for (const auto& [edge, rate] : table)
    if (age < edge) return rate;
  return 18.0;
}

std::vector<std::size_t> rank_descending(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::string age_group_label(const std::vector<double>& edges, std::size_t g) {
  char buf[40];
  if (g == 0)
    std::snprintf(buf, sizeof buf, "<%g", edges.front());
  else if (g == edges.size())
    std::snprintf(buf, sizeof buf, "%g+", edges.back());
  else
    std::snprintf(buf, sizeof buf, "%g-%g", edges[g - 1], edges[g]);
  return buf;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& nosology_names() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"C00-C14", "Lip, oral cavity and pharynx"},
      {"C15-C26", "Digestive organs"},
      {"C30-C39", "Respiratory and intrathoracic organs"},
      {"C43-C44", "Skin"},
      {"C45-C49", "Mesothelial and soft tissue"},
      {"C50", "Breast"},
      {"C51-C68", "Genitourinary system"},
      {"C69-C72", "Eye, brain, CNS"},
      {"C73-C75", "Thyroid and endocrine glands"},
      {"C76-C80", "Ill-defined, secondary, unspecified"},
      {"C81-C96", "Lymphoid and haematopoietic"},
      {"C97", "Independent multiple sites"},
  };
  return table;
}

std::map<std::string, std::size_t> nosology_breakdown(
    const std::vector<std::string>& first_codes) {
  std::map<std::string, std::size_t> counts;
  std::vector<std::pair<ehr::IcdBlock, std::string>> blocks;
  for (const auto& [label, _] : nosology_names())
    blocks.emplace_back(ehr::block_from_label(label), label);
  for (const auto& [label, _] : nosology_names()) counts[label] = 0;
  for (const auto& code : first_codes) {
    bool placed = false;
    for (const auto& [block, label] : blocks) {
      if (block.contains(code)) {
        ++counts[label];
        placed = true;
        break;
      }
    }
    if (!placed) ++counts["other"];
  }
  return counts;
}

std::vector<double> traditional_baseline_scores(const std::vector<double>& ages,
                                                std::uint64_t seed) {
  std::vector<double> scores(ages.size());
  Rng rng(derive_seed(seed, 0x7e5u));
  for (std::size_t i = 0; i < ages.size(); ++i) {
    // Small seeded jitter orders patients inside one incidence band.
    scores[i] = age_incidence_proxy(ages[i]) + 1e-3 * rng.uniform01();
  }
  return scores;
}

RetroReport run_retro(const std::vector<ehr::PatientHistory>& corpus,
                      const Scorer& model_scorer, const RetroConfig& config) {
  if (corpus.empty()) throw ConfigError("run_retro: empty corpus");
  const ehr::IcdBlock target = ehr::block_from_label(config.target_block);
  const Date horizon_end = config.t_pred.add_months(config.delta_pred_months);

  Date max_event;
  bool any_event = false;
  for (const auto& h : corpus)
    for (const auto& e : h.events) {
      if (!any_event || e.event_date > max_event) max_event = e.event_date;
      any_event = true;
    }
  if (!any_event || max_event < horizon_end)
    throw ConfigError(
        "run_retro: corpus does not extend past t_pred + horizon; outcomes are not "
        "verifiable at this t_pred");

  cohort::WindowConfig wc;
  wc.delta_obs_months = config.delta_obs_months;
  wc.delta_pred_months = config.delta_pred_months;
  wc.target_block = config.target_block;

  // Eligible: seen before t_pred, no prior target diagnosis.
  std::vector<cohort::LabeledWindow> windows;
  std::vector<std::string> first_horizon_code;
  for (const auto& h : corpus) {
    bool seen_before = false;
    bool prior_cancer = false;
    for (const auto& e : h.events) {
      if (e.event_date > config.t_pred) break;
      seen_before = true;
      if (e.type == ehr::EventType::Diagnosis && ehr::icd10_lexical_valid(e.code) &&
          target.contains(e.code)) {
        prior_cancer = true;
        break;
      }
    }
    if (!seen_before || prior_cancer) continue;
    auto w = cohort::window_at(h, config.t_pred, wc);
    std::string code;
    for (const auto& e : h.events) {
      if (e.event_date <= config.t_pred || e.event_date > horizon_end) continue;
      if (e.type == ehr::EventType::Diagnosis && ehr::icd10_lexical_valid(e.code) &&
          target.contains(e.code)) {
        code = e.code;
        break;
      }
    }
    first_horizon_code.push_back(std::move(code));
    windows.push_back(std::move(w));
  }
  if (windows.empty()) throw ConfigError("run_retro: no eligible patients at t_pred");

  std::vector<int> confirmed(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i)
    confirmed[i] = first_horizon_code[i].empty() ? 0 : 1;

  const auto model_scores = model_scorer(windows);
  if (model_scores.size() != windows.size())
    throw SchemaError("run_retro: scorer returned wrong number of scores");

  std::vector<double> ages(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) ages[i] = windows[i].age_at_pred;
  const auto baseline_scores = traditional_baseline_scores(ages, config.seed);

  RetroReport report;
  report.baseline_kind = config.baseline;
  report.eligible = windows.size();
  for (int c : confirmed) report.confirmed_total += c;
  report.prevalence =
      static_cast<double>(report.confirmed_total) / static_cast<double>(report.eligible);

  const auto model_order = rank_descending(model_scores);
  const auto baseline_order = rank_descending(baseline_scores);

  for (std::size_t k : config.top_k) {
    if (k < 1 || k > windows.size())
      throw ConfigError("run_retro: top_k value " + std::to_string(k) +
                        " outside the eligible population size " +
                        std::to_string(windows.size()));
    TopKRow row;
    row.k = k;
    for (std::size_t i = 0; i < k; ++i) {
      row.model_confirmed += confirmed[model_order[i]];
      row.baseline_confirmed += confirmed[baseline_order[i]];
    }
    row.model_rate = static_cast<double>(row.model_confirmed) / static_cast<double>(k);
    row.baseline_rate =
        static_cast<double>(row.baseline_confirmed) / static_cast<double>(k);
    report.top_k.push_back(row);
  }

  // Age-group table at the largest requested k.
  const std::size_t k_main = *std::max_element(config.top_k.begin(), config.top_k.end());
  const auto& edges = config.age_group_edges;
  const auto group_of = [&edges](double age) {
    std::size_t g = 0;
    while (g < edges.size() && age >= edges[g]) ++g;
    return g;
  };
  const std::size_t n_groups = edges.size() + 1;
  std::vector<std::vector<std::size_t>> members(n_groups);
  for (std::size_t i = 0; i < windows.size(); ++i) members[group_of(ages[i])].push_back(i);

  for (std::size_t g = 0; g < n_groups; ++g) {
    AgeGroupRow row;
    row.label = age_group_label(edges, g);
    row.eligible = members[g].size();
    for (std::size_t i : members[g]) row.group_confirmed += confirmed[i];
    row.prevalence = row.eligible
                         ? static_cast<double>(row.group_confirmed) /
                               static_cast<double>(row.eligible)
                         : 0.0;
    row.budget = static_cast<std::size_t>(std::llround(
        static_cast<double>(k_main) * static_cast<double>(row.eligible) /
        static_cast<double>(windows.size())));
    row.budget = std::min(std::max<std::size_t>(row.budget, row.eligible ? 1 : 0),
                          row.eligible);
    if (row.budget > 0) {
      auto order = members[g];
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return model_scores[a] > model_scores[b];
      });
      for (std::size_t i = 0; i < row.budget; ++i) row.model_confirmed += confirmed[order[i]];
      row.model_rate =
          static_cast<double>(row.model_confirmed) / static_cast<double>(row.budget);
    }
    report.age_groups.push_back(std::move(row));
  }

  // Nosology of the model's top-k selection.
  std::vector<std::string> selected_codes;
  for (std::size_t i = 0; i < k_main; ++i) {
    const auto idx = model_order[i];
    if (!first_horizon_code[idx].empty()) selected_codes.push_back(first_horizon_code[idx]);
  }
  report.nosology = nosology_breakdown(selected_codes);

  // Precision@TOP curve on the model ranking.
  std::vector<std::size_t> ks;
  const std::size_t step = std::max<std::size_t>(windows.size() / config.curve_points, 1);
  for (std::size_t k = step; k < windows.size(); k += step) ks.push_back(k);
  ks.push_back(windows.size());
  report.curve = metrics::precision_at_top_curve(model_scores, confirmed, ks,
                                                 config.curve_bootstrap, 0.95, config.seed);
  return report;
}

std::string RetroReport::to_json_text() const {
  Json j;
  j["eligible"] = eligible;
  j["confirmed_total"] = confirmed_total;
  j["prevalence"] = prevalence;
  j["baseline"] = baseline_kind;
  Json topk = Json::array();
  for (const auto& r : top_k)
    topk.push_back({{"k", r.k},
                    {"model_confirmed", r.model_confirmed},
                    {"model_rate", r.model_rate},
                    {"baseline_confirmed", r.baseline_confirmed},
                    {"baseline_rate", r.baseline_rate}});
  j["top_k"] = std::move(topk);
  Json groups = Json::array();
  for (const auto& g : age_groups)
    groups.push_back({{"age_group", g.label},
                      {"eligible", g.eligible},
                      {"budget", g.budget},
                      {"model_confirmed", g.model_confirmed},
                      {"model_rate", g.model_rate},
                      {"group_confirmed", g.group_confirmed},
                      {"prevalence", g.prevalence}});
  j["age_groups"] = std::move(groups);
  Json nos = Json::object();
  for (const auto& [label, count] : nosology) nos[label] = count;
  j["nosology"] = std::move(nos);
  Json curve = Json::array();
  for (const auto& p : this->curve)
    curve.push_back(
        {{"k", p.k}, {"precision", p.precision}, {"ci_low", p.ci_low}, {"ci_high", p.ci_high}});
  j["precision_at_top_curve"] = std::move(curve);
  return j.dump(2);
}

std::string RetroReport::to_text_table() const {
  std::ostringstream os;
  char buf[160];
  os << "Retrospective screening experiment\n";
  std::snprintf(buf, sizeof buf, "  eligible patients: %zu, confirmed in horizon: %zu (%.2f%%)\n",
                eligible, confirmed_total, 100.0 * prevalence);
  os << buf;
  os << "\n  TOP-k detection rates (baseline: " << baseline_kind << ")\n";
  os << "      k   baseline        model\n";
  for (const auto& r : top_k) {
    std::snprintf(buf, sizeof buf, "  %5zu   %4zu (%4.1f%%)   %4zu (%4.1f%%)\n", r.k,
                  r.baseline_confirmed, 100.0 * r.baseline_rate, r.model_confirmed,
                  100.0 * r.model_rate);
    os << buf;
  }
  os << "\n  Per age group (model top slice vs group prevalence)\n";
  os << "   group     eligible  budget  confirmed  model-rate  prevalence\n";
  for (const auto& g : age_groups) {
    std::snprintf(buf, sizeof buf, "   %-8s  %8zu  %6zu  %9zu  %9.2f%%  %9.2f%%\n",
                  g.label.c_str(), g.eligible, g.budget, g.model_confirmed,
                  100.0 * g.model_rate, 100.0 * g.prevalence);
    os << buf;
  }
  os << "\n  Neoplasms detected (model top-k)\n";
  for (const auto& [label, count] : nosology) {
    if (count == 0) continue;
    std::string name = label;
    for (const auto& [range, pretty] : nosology_names())
      if (range == label) name = pretty + " (" + range + ")";
    std::snprintf(buf, sizeof buf, "   %-50s %5zu\n", name.c_str(), count);
    os << buf;
  }
  return os.str();
}

void write_curve_csv(const std::string& path,
                     const std::vector<metrics::CurvePoint>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write curve file '" + path + "'");
  out << "k,precision,ci_low,ci_high\n";
  char buf[120];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", p.k, p.precision, p.ci_low,
                  p.ci_high);
    out << buf;
  }
}

}  // namespace cansave::retro
