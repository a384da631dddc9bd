#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <map>
#include <set>

#include "cansave/cohort.hpp"
#include "cansave/error.hpp"
#include "cansave/rng.hpp"

using namespace cansave;
using namespace cansave::cohort;

namespace {

ehr::PatientHistory make_history(const std::string& id, ehr::Sex sex,
                                 const std::string& birth,
                                 const std::vector<std::pair<std::string, std::string>>& events) {
  ehr::PatientHistory h;
  h.patient_id = id;
  h.sex = sex;
  h.birth_date = Date::parse_iso(birth);
  for (const auto& [date, code] : events) {
    ehr::EventRecord e;
    e.patient_id = id;
    e.event_date = Date::parse_iso(date);
    e.type = code[0] == 'A' && code.size() > 6 ? ehr::EventType::MedicalService
                                               : ehr::EventType::Diagnosis;
    e.code = code;
    h.events.push_back(std::move(e));
  }
  return h;
}

// Independent day-count oracle via std::chrono.
double chrono_years(const std::string& from, const std::string& to) {
  using namespace std::chrono;
  const auto parse = [](const std::string& s) {
    return sys_days(year_month_day(year(std::stoi(s.substr(0, 4))),
                                   month(static_cast<unsigned>(std::stoi(s.substr(5, 2)))),
                                   day(static_cast<unsigned>(std::stoi(s.substr(8, 2))))));
  };
  return static_cast<double>((parse(to) - parse(from)).count()) / 365.25;
}

}  // namespace

TEST_CASE("label_patient anchors on the first target diagnosis") {
  const auto h = make_history("p1", ehr::Sex::Female, "1973-05-27",
                              {{"2020-01-27", "I11.9"},
                               {"2021-07-29", "I63.0"},
                               {"2021-08-27", "A09.05.023"},
                               {"2021-09-01", "K52.9"},
                               {"2021-09-13", "C50.1"}});
  WindowConfig cfg;  // 24 / 12 / 30d
  const auto w = label_patient(h, cfg);
  REQUIRE(w.has_value());
  CHECK(w->target == 1);
  CHECK(w->t_pred.to_iso() == "2021-08-14");
  CHECK(w->t_start.to_iso() == "2019-08-14");
  CHECK(w->t_end.to_iso() == "2022-08-14");
  // Prediction-period events (past t_pred) never end up in the window.
  for (const auto& e : w->events) {
    CHECK(e.event_date <= w->t_pred);
    CHECK(e.code != "C50.1");
  }
  // 2021-08-27 and 2021-09-01 fall after the anchor.
  CHECK(w->events.size() == 2);
}

TEST_CASE("label_patient negative case anchors on last event minus horizon") {
  const auto h = make_history("p2", ehr::Sex::Male, "1990-01-01",
                              {{"2019-06-01", "J06.9"}, {"2021-12-31", "I11.9"}});
  WindowConfig cfg;
  const auto w = label_patient(h, cfg);
  REQUIRE(w.has_value());
  CHECK(w->target == 0);
  CHECK(w->t_pred.to_iso() == "2020-12-31");
  CHECK(w->t_start.to_iso() == "2018-12-31");
  CHECK(w->t_end.to_iso() == "2021-12-31");
  CHECK(w->events.size() == 1);  // only the 2019 event is inside
}

TEST_CASE("label_patient rejects degenerate windows") {
  // offset 0 with the target as the first and only event: empty window.
  const auto h = make_history("p3", ehr::Sex::Female, "1970-01-01", {{"2020-06-01", "C50"}});
  WindowConfig cfg;
  cfg.target_offset_days = 0;
  std::string reason;
  const auto w = label_patient(h, cfg, &reason);
  CHECK_FALSE(w.has_value());
  CHECK(reason == "empty observation window");

  // anchor before birth
  const auto h2 = make_history("p4", ehr::Sex::Female, "2020-01-01", {{"2020-06-01", "J06.9"}});
  std::string reason2;
  const auto w2 = label_patient(h2, cfg, &reason2);
  CHECK_FALSE(w2.has_value());
  CHECK(reason2 == "anchor before birth");
}

TEST_CASE("to_survival_observation matches the day-count oracle") {
  const auto h = make_history("p5", ehr::Sex::Female, "1973-05-27",
                              {{"2020-01-27", "I11.9"}, {"2021-09-13", "C50.1"}});
  WindowConfig cfg;
  const auto obs = to_survival_observation(h, cfg);
  REQUIRE(obs.has_value());
  CHECK(obs->event == 1);
  CHECK(obs->time == doctest::Approx(chrono_years("1973-05-27", "2021-09-13")).epsilon(1e-12));
  CHECK(obs->time == doctest::Approx(48.30).epsilon(1e-3));

  const auto h2 = make_history("p6", ehr::Sex::Male, "1990-01-01",
                               {{"2019-01-01", "J06.9"}, {"2021-12-31", "I11.9"}});
  const auto obs2 = to_survival_observation(h2, cfg);
  REQUIRE(obs2.has_value());
  CHECK(obs2->event == 0);
  CHECK(obs2->time == doctest::Approx(chrono_years("1990-01-01", "2021-12-31")).epsilon(1e-12));
  CHECK(obs2->time == doctest::Approx(32.00).epsilon(1e-3));

  // target diagnosis on the birth date: non-positive time is rejected
  const auto h3 = make_history("p7", ehr::Sex::Male, "2000-01-01", {{"2000-01-01", "C50"}});
  std::string reason;
  CHECK_FALSE(to_survival_observation(h3, cfg, &reason).has_value());
  CHECK(reason == "non-positive observation time");
}

TEST_CASE("label consistency with the survival observation") {
  Rng rng(101);
  WindowConfig cfg;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::pair<std::string, std::string>> events;
    const int n = 2 + static_cast<int>(rng.uniform_index(6));
    Date d = Date::from_ymd(2019, 1, 1);
    for (int e = 0; e < n; ++e) {
      d = d.add_days(30 + static_cast<std::int64_t>(rng.uniform_index(200)));
      events.emplace_back(d.to_iso(), rng.bernoulli(0.15) ? "C34" : "J06");
    }
    const auto h = make_history("p", ehr::Sex::Female, "1960-01-01", events);
    const auto w = label_patient(h, cfg);
    const auto obs = to_survival_observation(h, cfg);
    if (!w || !obs) continue;
    CHECK(w->target == obs->event);  // offset 30d < horizon, so always consistent
  }
}

TEST_CASE("stratified_split is deterministic, exact, and proportional per cell") {
  // Synthetic population mirroring the reported sample-size table.
  Rng rng(2024);
  std::vector<StratumPatient> patients;
  patients.reserve(175441);
  for (std::size_t i = 0; i < 175441; ++i) {
    StratumPatient p;
    p.patient_id = "p" + std::to_string(i);
    p.sex = rng.bernoulli(0.406) ? ehr::Sex::Male : ehr::Sex::Female;
    p.age = rng.uniform(18.0, 90.0);
    patients.push_back(std::move(p));
  }
  SplitSpec spec;
  spec.fractions = {{"survival-train", 0.07},
                    {"survival-test", 0.07},
                    {"train", 0.40},
                    {"validate", 0.23},
                    {"test", 0.23}};
  spec.age_bin_edges = {30.0, 45.0};
  spec.seed = 7;
  const auto samples = stratified_split(patients, spec);

  // Disjoint cover.
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto& [name, ids] : samples) {
    total += ids.size();
    for (const auto& id : ids) CHECK(seen.insert(id).second);
  }
  CHECK(total == patients.size());

  // Table-scale totals match the expected sizes up to per-cell rounding
  // (6 cells, so at most +-6).
  const std::map<std::string, std::size_t> expected = {{"survival-train", 12281},
                                                       {"survival-test", 12281},
                                                       {"train", 70176},
                                                       {"validate", 40351},
                                                       {"test", 40351}};
  for (const auto& [name, size] : expected) {
    CHECK(std::llabs(static_cast<long long>(samples.at(name).size()) -
                     static_cast<long long>(size)) <= 6);
  }

  // Per-cell proportionality within one patient.
  std::map<std::string, std::size_t> cell_of_patient_count;
  std::map<std::pair<int, int>, std::size_t> cell_sizes;
  std::map<std::string, std::pair<int, int>> cell_of;
  const auto bin = [](double age) { return age < 30 ? 0 : age < 45 ? 1 : 2; };
  for (const auto& p : patients) {
    const auto cell = std::make_pair(static_cast<int>(p.sex), bin(p.age));
    ++cell_sizes[cell];
    cell_of[p.patient_id] = cell;
  }
  for (const auto& [name, weight] : spec.fractions) {
    std::map<std::pair<int, int>, std::size_t> got;
    for (const auto& id : samples.at(name)) ++got[cell_of.at(id)];
    for (const auto& [cell, n_cell] : cell_sizes) {
      const double exact = weight * static_cast<double>(n_cell);
      CHECK(std::abs(static_cast<double>(got[cell]) - exact) <= 1.0);
    }
  }

  // Determinism.
  const auto again = stratified_split(patients, spec);
  CHECK(again == samples);
}

TEST_CASE("stratified_split on a single stratum splits 5/5") {
  std::vector<StratumPatient> patients;
  for (int i = 0; i < 10; ++i)
    patients.push_back({"p" + std::to_string(i), ehr::Sex::Female, 40.0});
  SplitSpec spec;
  spec.fractions = {{"a", 0.5}, {"b", 0.5}};
  spec.seed = 3;
  const auto samples = stratified_split(patients, spec);
  CHECK(samples.at("a").size() == 5);
  CHECK(samples.at("b").size() == 5);
}

TEST_CASE("stratified_split input validation") {
  SplitSpec spec;
  spec.fractions = {{"a", 0.5}, {"b", 0.5}};
  CHECK_THROWS_AS(stratified_split({}, spec), ConfigError);
  spec.fractions = {{"a", 0.4}, {"b", 0.5}};
  CHECK_THROWS_AS(stratified_split({{"p", ehr::Sex::Female, 40.0}}, spec), ConfigError);
  spec.fractions = {{"a", -0.5}, {"b", 1.5}};
  CHECK_THROWS_AS(stratified_split({{"p", ehr::Sex::Female, 40.0}}, spec), ConfigError);
}

TEST_CASE("window config validation") {
  WindowConfig cfg;
  cfg.delta_obs_months = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = WindowConfig{};
  cfg.target_offset_days = 4000;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = WindowConfig{};
  cfg.target_block = "bogus";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(WindowConfig{}.validate());
}
