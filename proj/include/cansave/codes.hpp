#ifndef CANSAVE_CODES_HPP
#define CANSAVE_CODES_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cansave::ehr {

enum class GroupKind { IcdBlock, ServiceBlock };

struct CodeGroup {
  GroupKind kind = GroupKind::IcdBlock;
  std::string label;

  bool operator==(const CodeGroup&) const = default;
};

// A contiguous ICD-10 range, closed on both ends, keyed by 3-character roots
// ("C00".."C97"). Subcategory suffixes are ignored for membership.
struct IcdBlock {
  std::string label;
  std::string start;  // e.g. "C00"
  std::string end;    // e.g. "C97"

  bool contains(std::string_view code) const;
};

// The block table is data, not code: regional sets load from a JSON list of
// {label, start_code, end_code}. The default table is the named risk blocks
// plus the 22 chapter ranges (chapter bounds widened so the chapters tile the
// whole lexical code space).
class IcdBlockTable {
 public:
  static IcdBlockTable defaults();
  static IcdBlockTable from_json_text(std::string_view json_text);
  static IcdBlockTable from_json_file(const std::string& path);

  // All configured blocks containing the code; nested blocks all match.
  // Throws SchemaError for lexically invalid codes.
  std::vector<std::string> groups_of(std::string_view code) const;

  // The unique chapter range containing the code, if chapters are configured.
  std::optional<std::string> chapter_of(std::string_view code) const;

  bool has_block(std::string_view label) const;
  const IcdBlock* find(std::string_view label) const;
  const std::vector<IcdBlock>& blocks() const { return blocks_; }
  const std::vector<IcdBlock>& chapters() const { return chapters_; }

  std::string to_json_text() const;

 private:
  std::vector<IcdBlock> blocks_;    // named blocks, in configured order
  std::vector<IcdBlock> chapters_;  // disjoint covering ranges
};

// Parses a block label of the form "C00-C97" or single-root "C50".
IcdBlock block_from_label(std::string_view label);

// Anatomical-system grouping of medical-service codes: the token after the
// first dot ("A09.05.023" -> system "05"). System "06" is the immune-system
// group; codes without a system token group as "other".
std::string service_system_of(std::string_view code);
CodeGroup service_group(std::string_view code);

inline constexpr std::string_view kImmuneServiceLabel = "immune";
inline constexpr std::string_view kOtherServiceLabel = "other";

std::string service_group_label(std::string_view system);

}  // namespace cansave::ehr

#endif  // CANSAVE_CODES_HPP
