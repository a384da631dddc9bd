#ifndef CANSAVE_EHR_HPP
#define CANSAVE_EHR_HPP

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cansave/date.hpp"

namespace cansave::ehr {

enum class EventType { Diagnosis, MedicalService };

enum class Sex : int { Female = 0, Male = 1 };

inline const char* sex_name(Sex s) { return s == Sex::Female ? "Female" : "Male"; }

// One coded medical event: an ICD-10 diagnosis or a medical-service code.
struct EventRecord {
  std::string patient_id;
  Date event_date;
  EventType type = EventType::Diagnosis;
  std::string code;
};

// One input row: the event plus the per-patient attributes repeated on every
// row of the interchange file.
struct ParsedRow {
  Sex sex = Sex::Female;
  Date birth_date;
  EventRecord event;
};

// A patient's chronologically ordered event stream.
struct PatientHistory {
  std::string patient_id;
  Sex sex = Sex::Female;
  Date birth_date;
  std::vector<EventRecord> events;  // non-decreasing by date, stable on ties

  Date first_event_date() const { return events.front().event_date; }
  Date last_event_date() const { return events.back().event_date; }
};

// True for codes shaped like a letter, two digits, and an optional numeric
// subcategory ("I11", "I11.9", "M79.66").
bool icd10_lexical_valid(std::string_view code);

// Canonical CSV header for the event-stream interchange format.
inline constexpr std::string_view kCsvHeader =
    "patient_id,sex,birth_date,event_date,event_type,code";

// Parses one data row of the canonical CSV. Field count, dates, event type,
// code shape, and event-after-birth are all validated here.
ParsedRow parse_event_record(std::string_view line);

// Same validation applied to one JSONL object (string-keyed fields matching
// the CSV header names).
ParsedRow parse_event_record_jsonl(std::string_view json_line);

// Canonical serialization; parse -> serialize is byte-stable.
std::string serialize_row(const ParsedRow& row);

// Groups rows by patient, sorts each stream by date (stable), and validates
// that sex/birth_date are consistent per patient id. Output is ordered by
// first appearance of each patient id in the input.
std::vector<PatientHistory> build_histories(std::vector<ParsedRow> rows);

std::vector<PatientHistory> load_corpus_csv(const std::string& path);
std::vector<PatientHistory> load_corpus_jsonl(const std::string& path);
void write_corpus_csv(std::ostream& out, const std::vector<PatientHistory>& histories);
void write_corpus_csv_file(const std::string& path, const std::vector<PatientHistory>& histories);

}  // namespace cansave::ehr

#endif  // CANSAVE_EHR_HPP
