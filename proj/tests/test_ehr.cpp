#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>

#include "cansave/codes.hpp"
#include "cansave/ehr.hpp"
#include "cansave/error.hpp"
#include "cansave/rng.hpp"

using namespace cansave;
using namespace cansave::ehr;

TEST_CASE("parse_event_record accepts the canonical rows") {
  const auto row = parse_event_record("id854,Female,1973-05-27,2020-01-27,Diagnose,I11.9");
  CHECK(row.event.patient_id == "id854");
  CHECK(row.sex == Sex::Female);
  CHECK(row.birth_date.to_iso() == "1973-05-27");
  CHECK(row.event.event_date.to_iso() == "2020-01-27");
  CHECK(row.event.type == EventType::Diagnosis);
  CHECK(row.event.code == "I11.9");

  const auto svc =
      parse_event_record("id854,Female,1973-05-27,2021-08-27,Medical Service,A09.05.023");
  CHECK(svc.event.type == EventType::MedicalService);
  CHECK(svc.event.code == "A09.05.023");
}

TEST_CASE("parse_event_record rejects bad rows") {
  CHECK_THROWS_AS(parse_event_record("id1,Male,1990-01-01,1989-12-31,Diagnose,J06.9"),
                  SchemaError);  // event precedes birth
  CHECK_THROWS_WITH_AS(
      parse_event_record("id1,Male,1990-01-01,2020-13-05,Diagnose,J06.9"),
      doctest::Contains("event_date"), ParseError);
  CHECK_THROWS_AS(parse_event_record("id1,Male,1990-01-01,2020-01-05,Imaging,J06.9"),
                  SchemaError);
  CHECK_THROWS_AS(parse_event_record("id1,Male,1990-01-01,2020-01-05,Diagnose,"),
                  SchemaError);
  CHECK_THROWS_AS(parse_event_record("id1,Male,1990-01-01,2020-01-05,Diagnose"),
                  ParseError);  // five fields
  CHECK_THROWS_AS(parse_event_record("id1,Male,1990-01-01,2020-01-05,Diagnose,notacode"),
                  SchemaError);
}

TEST_CASE("icd10 lexical pattern") {
  CHECK(icd10_lexical_valid("C50"));
  CHECK(icd10_lexical_valid("I11.9"));
  CHECK(icd10_lexical_valid("M79.66"));
  CHECK_FALSE(icd10_lexical_valid("c50"));
  CHECK_FALSE(icd10_lexical_valid("C5"));
  CHECK_FALSE(icd10_lexical_valid("C50."));
  CHECK_FALSE(icd10_lexical_valid("C50.ab"));
  CHECK_FALSE(icd10_lexical_valid("A09.05.023"));  // service code shape
}

TEST_CASE("round-trip: serialize(parse(row)) is byte-stable") {
  const char* rows[] = {
      "id854,Female,1973-05-27,2020-01-27,Diagnose,I11.9",
      "id854,Female,1973-05-27,2021-08-27,Medical Service,A09.05.023",
      "x,Male,2000-02-29,2020-12-31,Diagnose,Z99",
  };
  for (const char* r : rows) CHECK(serialize_row(parse_event_record(r)) == r);

  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    ParsedRow row;
    row.sex = rng.bernoulli(0.5) ? Sex::Male : Sex::Female;
    row.birth_date = Date::from_ymd(1950 + static_cast<int>(rng.uniform_index(50)),
                                    1 + static_cast<int>(rng.uniform_index(12)),
                                    1 + static_cast<int>(rng.uniform_index(28)));
    row.event.patient_id = "p" + std::to_string(i);
    row.event.event_date =
        row.birth_date.add_days(static_cast<std::int64_t>(rng.uniform_index(20000)));
    row.event.type = rng.bernoulli(0.5) ? EventType::Diagnosis : EventType::MedicalService;
    row.event.code = row.event.type == EventType::Diagnosis ? "I63.0" : "A09.05.023";
    const auto text = serialize_row(row);
    CHECK(serialize_row(parse_event_record(text)) == text);
  }
}

TEST_CASE("build_histories sorts stably and groups by patient") {
  std::vector<ParsedRow> rows;
  rows.push_back(parse_event_record("A,Female,1980-01-01,2020-05-01,Diagnose,I11.9"));
  rows.push_back(parse_event_record("B,Male,1970-01-01,2020-02-01,Diagnose,J06.9"));
  rows.push_back(
      parse_event_record("A,Female,1980-01-01,2020-01-01,Medical Service,A09.05.023"));
  rows.push_back(parse_event_record("A,Female,1980-01-01,2020-01-01,Diagnose,K52.9"));

  const auto histories = build_histories(rows);
  REQUIRE(histories.size() == 2);
  CHECK(histories[0].patient_id == "A");
  REQUIRE(histories[0].events.size() == 3);
  CHECK(histories[0].events[0].event_date.to_iso() == "2020-01-01");
  // Stable tie: same-date events keep input order.
  CHECK(histories[0].events[0].type == EventType::MedicalService);
  CHECK(histories[0].events[1].code == "K52.9");
  CHECK(histories[0].events[2].event_date.to_iso() == "2020-05-01");
  CHECK(histories[1].patient_id == "B");
}

TEST_CASE("build_histories rejects conflicting attributes") {
  std::vector<ParsedRow> rows;
  rows.push_back(parse_event_record("A,Female,1980-01-01,2020-05-01,Diagnose,I11.9"));
  rows.push_back(parse_event_record("A,Male,1980-01-01,2020-06-01,Diagnose,I11.9"));
  CHECK_THROWS_WITH_AS(build_histories(rows), doctest::Contains("A"), SchemaError);
}

TEST_CASE("sorting idempotence: rebuilding from flattened histories is stable") {
  Rng rng(11);
  std::vector<ParsedRow> rows;
  for (int i = 0; i < 300; ++i) {
    ParsedRow row;
    row.sex = Sex::Female;
    row.birth_date = Date::from_ymd(1970, 1, 1);
    row.event.patient_id = "p" + std::to_string(rng.uniform_index(20));
    row.event.event_date =
        Date::from_ymd(2020, 1, 1).add_days(static_cast<std::int64_t>(rng.uniform_index(300)));
    row.event.type = EventType::Diagnosis;
    row.event.code = "I1" + std::to_string(rng.uniform_index(10));
    rows.push_back(row);
  }
  const auto once = build_histories(rows);
  std::vector<ParsedRow> flattened;
  for (const auto& h : once)
    for (const auto& e : h.events) flattened.push_back({h.sex, h.birth_date, e});
  const auto twice = build_histories(flattened);
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(once[i].patient_id == twice[i].patient_id);
    REQUIRE(once[i].events.size() == twice[i].events.size());
    for (std::size_t j = 0; j < once[i].events.size(); ++j) {
      CHECK(once[i].events[j].event_date == twice[i].events[j].event_date);
      CHECK(once[i].events[j].code == twice[i].events[j].code);
    }
  }
}

TEST_CASE("icd10_group returns every containing block") {
  const auto table = IcdBlockTable::defaults();
  const auto c34 = table.groups_of("C34.1");
  CHECK(std::find(c34.begin(), c34.end(), "C00-C97") != c34.end());

  const auto d40 = table.groups_of("D40");
  CHECK(std::find(d40.begin(), d40.end(), "D00-D48") != d40.end());
  CHECK(std::find(d40.begin(), d40.end(), "D37-D48") != d40.end());

  const auto i63 = table.groups_of("I63.0");
  CHECK(std::find(i63.begin(), i63.end(), "I00-I99") != i63.end());

  CHECK_THROWS_AS(table.groups_of("notacode"), SchemaError);
}

TEST_CASE("chapter grouping partitions the lexical code space") {
  const auto table = IcdBlockTable::defaults();
  CHECK(table.chapters().size() == 22);
  for (char letter = 'A'; letter <= 'Z'; ++letter) {
    for (int num = 0; num < 100; ++num) {
      char code[8];
      std::snprintf(code, sizeof code, "%c%02d", letter, num);
      int containing = 0;
      for (const auto& ch : table.chapters()) containing += ch.contains(code);
      CHECK_MESSAGE(containing == 1, "code ", code, " in ", containing, " chapters");
    }
  }
  CHECK(*table.chapter_of("C34.1") == "C00-D48");
  CHECK(*table.chapter_of("I63.0") == "I00-I99");
}

TEST_CASE("block table round-trips through JSON config") {
  const char* config = R"([
    {"label": "C00-C97", "start_code": "C00", "end_code": "C97"},
    {"label": "X10-X20", "start_code": "X10", "end_code": "X20"}
  ])";
  const auto table = IcdBlockTable::from_json_text(config);
  CHECK(table.blocks().size() == 2);
  CHECK(table.has_block("X10-X20"));
  const auto again = IcdBlockTable::from_json_text(table.to_json_text());
  CHECK(again.blocks().size() == 2);
  CHECK_THROWS_AS(IcdBlockTable::from_json_text("{\"not\": \"a list\"}"), ConfigError);
}

TEST_CASE("service_group maps anatomical systems") {
  CHECK(service_group("A12.06.001").label == "immune");
  CHECK(service_group("A09.05.023").label == "sys05");
  CHECK(service_group("ZZZ").label == "other");
  CHECK(service_system_of("A09.05.023") == "05");
  CHECK(service_system_of("B03.016.003") == "other");  // three-digit middle field
}

TEST_CASE("corpus csv round-trip") {
  std::vector<ParsedRow> rows;
  rows.push_back(parse_event_record("A,Female,1980-01-01,2020-05-01,Diagnose,I11.9"));
  rows.push_back(
      parse_event_record("A,Female,1980-01-01,2020-06-01,Medical Service,A09.05.023"));
  const auto histories = build_histories(rows);
  const std::string path = "/tmp/cansave_test_corpus.csv";
  write_corpus_csv_file(path, histories);
  const auto loaded = load_corpus_csv(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].events.size() == 2);
  CHECK(loaded[0].events[1].code == "A09.05.023");
}

TEST_CASE("jsonl corpus loads") {
  const std::string path = "/tmp/cansave_test_corpus.jsonl";
  {
    FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs(
        "{\"patient_id\":\"A\",\"sex\":\"Female\",\"birth_date\":\"1980-01-01\","
        "\"event_date\":\"2020-05-01\",\"event_type\":\"Diagnose\",\"code\":\"I11.9\"}\n",
        f);
    std::fclose(f);
  }
  const auto loaded = load_corpus_jsonl(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].events[0].code == "I11.9");
}
