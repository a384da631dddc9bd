#include "cansave/codes.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cansave/ehr.hpp"
#include "cansave/error.hpp"

namespace cansave::ehr {
namespace {

// 3-character root used for range membership ("C34.1" -> "C34").
std::string_view code_root(std::string_view code) { return code.substr(0, 3); }

bool root_valid(std::string_view root) {
  return root.size() == 3 && std::isupper(static_cast<unsigned char>(root[0])) &&
         std::isdigit(static_cast<unsigned char>(root[1])) &&
         std::isdigit(static_cast<unsigned char>(root[2]));
}

// Named risk blocks from the default configuration.
const std::vector<IcdBlock>& named_blocks() {
  static const std::vector<IcdBlock> blocks = {
      {"C00-C97", "C00", "C97"}, {"D00-D48", "D00", "D48"}, {"D37-D48", "D37", "D48"},
      {"E10-E14", "E10", "E14"}, {"I00-I99", "I00", "I99"}, {"N40-N51", "N40", "N51"},
      {"O20-O29", "O20", "O29"}, {"Q00-Q99", "Q00", "Q99"},
  };
  return blocks;
}

// The 22 ICD-10 chapters with upper bounds widened to the next chapter start,
// so every lexically valid code lands in exactly one chapter.
const std::vector<IcdBlock>& chapter_blocks() {
  static const std::vector<IcdBlock> chapters = {
      {"A00-B99", "A00", "B99"}, {"C00-D48", "C00", "D48"}, {"D50-D89", "D49", "D99"},
      {"E00-E90", "E00", "E99"}, {"F00-F99", "F00", "F99"}, {"G00-G99", "G00", "G99"},
      {"H00-H59", "H00", "H59"}, {"H60-H95", "H60", "H99"}, {"I00-I99", "I00", "I99"},
      {"J00-J99", "J00", "J99"}, {"K00-K93", "K00", "K99"}, {"L00-L99", "L00", "L99"},
      {"M00-M99", "M00", "M99"}, {"N00-N99", "N00", "N99"}, {"O00-O99", "O00", "O99"},
      {"P00-P96", "P00", "P99"}, {"Q00-Q99", "Q00", "Q99"}, {"R00-R99", "R00", "R99"},
      {"S00-T98", "S00", "T99"}, {"U00-U99", "U00", "U99"}, {"V01-Y98", "V00", "Y99"},
      {"Z00-Z99", "Z00", "Z99"},
  };
  return chapters;
}

}  // namespace

bool IcdBlock::contains(std::string_view code) const {
  const auto root = code_root(code);
  return root >= start && root <= end;
}

IcdBlock block_from_label(std::string_view label) {
  IcdBlock b;
  b.label = std::string(label);
  const auto dash = label.find('-');
  if (dash == std::string_view::npos) {
    b.start = b.end = std::string(label.substr(0, 3));
  } else {
    b.start = std::string(label.substr(0, dash));
    b.end = std::string(label.substr(dash + 1));
  }
  if (!root_valid(b.start) || !root_valid(b.end) || b.end < b.start)
    throw ConfigError("invalid ICD block label '" + std::string(label) + "'");
  return b;
}

IcdBlockTable IcdBlockTable::defaults() {
  IcdBlockTable t;
  t.blocks_ = named_blocks();
  t.chapters_ = chapter_blocks();
  return t;
}

IcdBlockTable IcdBlockTable::from_json_text(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed ICD block config: ") + e.what());
  }
  if (!doc.is_array()) throw ConfigError("ICD block config must be a JSON list");
  IcdBlockTable t;
  t.chapters_ = chapter_blocks();
  for (const auto& item : doc) {
    IcdBlock b;
    b.label = item.at("label").get<std::string>();
    b.start = item.at("start_code").get<std::string>();
    b.end = item.at("end_code").get<std::string>();
    if (!root_valid(b.start) || !root_valid(b.end) || b.end < b.start)
      throw ConfigError("invalid ICD block range for label '" + b.label + "'");
    t.blocks_.push_back(std::move(b));
  }
  return t;
}

IcdBlockTable IcdBlockTable::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ICD block config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string IcdBlockTable::to_json_text() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : blocks_)
    arr.push_back({{"label", b.label}, {"start_code", b.start}, {"end_code", b.end}});
  return arr.dump(2);
}

std::vector<std::string> IcdBlockTable::groups_of(std::string_view code) const {
  if (!icd10_lexical_valid(code))
    throw SchemaError("lexically invalid ICD-10 code '" + std::string(code) + "'");
  std::vector<std::string> out;
  for (const auto& b : blocks_)
    if (b.contains(code)) out.push_back(b.label);
  return out;
}

std::optional<std::string> IcdBlockTable::chapter_of(std::string_view code) const {
  if (!icd10_lexical_valid(code))
    throw SchemaError("lexically invalid ICD-10 code '" + std::string(code) + "'");
  for (const auto& c : chapters_)
    if (c.contains(code)) return c.label;
  return std::nullopt;
}

bool IcdBlockTable::has_block(std::string_view label) const { return find(label) != nullptr; }

const IcdBlock* IcdBlockTable::find(std::string_view label) const {
  for (const auto& b : blocks_)
    if (b.label == label) return &b;
  return nullptr;
}

std::string service_system_of(std::string_view code) {
  const auto first_dot = code.find('.');
  if (first_dot == std::string_view::npos) return std::string(kOtherServiceLabel);
  const auto rest = code.substr(first_dot + 1);
  const auto second_dot = rest.find('.');
  const auto token = second_dot == std::string_view::npos ? rest : rest.substr(0, second_dot);
  if (token.size() != 2 || !std::isdigit(static_cast<unsigned char>(token[0])) ||
      !std::isdigit(static_cast<unsigned char>(token[1])))
    return std::string(kOtherServiceLabel);
  return std::string(token);
}

std::string service_group_label(std::string_view system) {
  if (system == "06") return std::string(kImmuneServiceLabel);
  if (system == kOtherServiceLabel) return std::string(kOtherServiceLabel);
  return "sys" + std::string(system);
}

CodeGroup service_group(std::string_view code) {
  return CodeGroup{GroupKind::ServiceBlock, service_group_label(service_system_of(code))};
}

}  // namespace cansave::ehr
