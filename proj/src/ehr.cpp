#include "cansave/ehr.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cansave/error.hpp"

namespace cansave::ehr {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

Sex parse_sex(std::string_view s) {
  if (s == "Female" || s == "female" || s == "F" || s == "0") return Sex::Female;
  if (s == "Male" || s == "male" || s == "M" || s == "1") return Sex::Male;
  throw SchemaError("unknown sex value '" + std::string(s) + "'");
}

EventType parse_event_type(std::string_view s) {
  if (s == "Diagnose") return EventType::Diagnosis;
  if (s == "Medical Service") return EventType::MedicalService;
  throw SchemaError("unknown event_type '" + std::string(s) +
                    "' (expected 'Diagnose' or 'Medical Service')");
}

std::string_view event_type_name(EventType t) {
  return t == EventType::Diagnosis ? "Diagnose" : "Medical Service";
}

ParsedRow validate_row(std::string patient_id, Sex sex, Date birth, Date event_date,
                       EventType type, std::string code) {
  if (patient_id.empty()) throw SchemaError("empty patient_id");
  if (code.empty()) throw SchemaError("empty code for patient '" + patient_id + "'");
  if (type == EventType::Diagnosis && !icd10_lexical_valid(code))
    throw SchemaError("diagnosis code '" + code + "' is not a valid ICD-10 code");
  if (event_date < birth)
    throw SchemaError("event precedes birth for patient '" + patient_id + "' (" +
                      event_date.to_iso() + " < " + birth.to_iso() + ")");
  ParsedRow row;
  row.sex = sex;
  row.birth_date = birth;
  row.event = EventRecord{std::move(patient_id), event_date, type, std::move(code)};
  return row;
}

}  // namespace

bool icd10_lexical_valid(std::string_view code) {
  if (code.size() < 3) return false;
  if (!std::isupper(static_cast<unsigned char>(code[0]))) return false;
  if (!std::isdigit(static_cast<unsigned char>(code[1])) ||
      !std::isdigit(static_cast<unsigned char>(code[2])))
    return false;
  if (code.size() == 3) return true;
  if (code[3] != '.' || code.size() < 5 || code.size() > 6) return false;
  for (std::size_t i = 4; i < code.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(code[i]))) return false;
  return true;
}

ParsedRow parse_event_record(std::string_view line) {
  const auto f = split_fields(line);
  if (f.size() != 6)
    throw ParseError("expected 6 fields (patient_id,sex,birth_date,event_date,event_type,code), got " +
                     std::to_string(f.size()));
  return validate_row(std::string(f[0]), parse_sex(f[1]),
                      Date::parse_iso(f[2], "birth_date"),
                      Date::parse_iso(f[3], "event_date"), parse_event_type(f[4]),
                      std::string(f[5]));
}

ParsedRow parse_event_record_jsonl(std::string_view json_line) {
  nlohmann::json o;
  try {
    o = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed JSONL record: ") + e.what());
  }
  for (const char* key :
       {"patient_id", "sex", "birth_date", "event_date", "event_type", "code"})
    if (!o.contains(key)) throw ParseError(std::string("JSONL record missing field '") + key + "'");
  return validate_row(o["patient_id"].get<std::string>(),
                      parse_sex(o["sex"].get<std::string>()),
                      Date::parse_iso(o["birth_date"].get<std::string>(), "birth_date"),
                      Date::parse_iso(o["event_date"].get<std::string>(), "event_date"),
                      parse_event_type(o["event_type"].get<std::string>()),
                      o["code"].get<std::string>());
}

std::string serialize_row(const ParsedRow& row) {
  std::string out;
  out.reserve(64);
  out += row.event.patient_id;
  out += ',';
  out += sex_name(row.sex);
  out += ',';
  out += row.birth_date.to_iso();
  out += ',';
  out += row.event.event_date.to_iso();
  out += ',';
  out += event_type_name(row.event.type);
  out += ',';
  out += row.event.code;
  return out;
}

std::vector<PatientHistory> build_histories(std::vector<ParsedRow> rows) {
  std::vector<PatientHistory> histories;
  std::unordered_map<std::string, std::size_t> index_of;
  index_of.reserve(rows.size() / 4 + 1);

  for (auto& row : rows) {
    auto [it, inserted] = index_of.try_emplace(row.event.patient_id, histories.size());
    if (inserted) {
      PatientHistory h;
      h.patient_id = row.event.patient_id;
      h.sex = row.sex;
      h.birth_date = row.birth_date;
      histories.push_back(std::move(h));
    } else {
      const PatientHistory& h = histories[it->second];
      if (h.sex != row.sex || h.birth_date != row.birth_date)
        throw SchemaError("conflicting sex/birth_date for patient '" + h.patient_id + "'");
    }
    histories[it->second].events.push_back(std::move(row.event));
  }

  for (auto& h : histories) {
    std::stable_sort(h.events.begin(), h.events.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                       return a.event_date < b.event_date;
                     });
  }
  return histories;
}

std::vector<PatientHistory> load_corpus_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file '" + path + "'");
  std::string line;
  std::vector<ParsedRow> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (lineno == 1 && sv == kCsvHeader) continue;
    try {
      rows.push_back(parse_event_record(sv));
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return build_histories(std::move(rows));
}

std::vector<PatientHistory> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file '" + path + "'");
  std::string line;
  std::vector<ParsedRow> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(parse_event_record_jsonl(line));
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return build_histories(std::move(rows));
}

void write_corpus_csv(std::ostream& out, const std::vector<PatientHistory>& histories) {
  out << kCsvHeader << '\n';
  ParsedRow row;
  for (const auto& h : histories) {
    row.sex = h.sex;
    row.birth_date = h.birth_date;
    for (const auto& e : h.events) {
      row.event = e;
      out << serialize_row(row) << '\n';
    }
  }
}

void write_corpus_csv_file(const std::string& path, const std::vector<PatientHistory>& histories) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write corpus file '" + path + "'");
  write_corpus_csv(out, histories);
}

}  // namespace cansave::ehr
