#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sii {

enum class SetTag { A, B, C, D, Unassigned };

enum class ValueKind { free_text, boolean, numeric, delimited_list };

std::string set_tag_name(SetTag tag);
SetTag set_tag_from_name(const std::string& name);
std::string value_kind_name(ValueKind kind);
ValueKind value_kind_from_name(const std::string& name);

/// One schema element. `key` is the canonical underscored name used in
/// completions and tabular headers; `display_name` is the spaced form used
/// in zero-shot prompts. Boolean elements with an annotation render it as a
/// replacement question; other annotations append as a suffix.
struct ElementDef {
    std::string key;
    std::string display_name;
    SetTag set_tag = SetTag::Unassigned;
    std::string prompt_annotation;
    ValueKind value_kind = ValueKind::free_text;

    std::string prompt_line() const;
};

class ElementCatalog {
public:
    static ElementCatalog default_catalog();

    explicit ElementCatalog(std::vector<ElementDef> elements);

    const std::vector<ElementDef>& elements() const { return elements_; }
    size_t size() const { return elements_.size(); }
    bool has_key(const std::string& key) const;
    const ElementDef& element(const std::string& key) const;
    std::vector<std::string> keys() const;
    std::vector<std::string> keys_in_set(SetTag tag) const;

    /// Stable content hash over keys, sets, kinds and annotations.
    std::string hash() const;

private:
    std::vector<ElementDef> elements_;
    std::map<std::string, size_t> index_;
};

/// Load the built-in catalog, or a JSON override file when a path is given.
ElementCatalog load_catalog(const std::optional<std::string>& config_path = std::nullopt);

inline const char* kUnknownValue = "Unknown";

/// Trim and fold case-insensitive "unknown" to the canonical literal.
std::string normalize_value_text(const std::string& raw);
bool is_unknown(const std::string& value);

/// One device's values keyed by element key. Every catalog key is present;
/// keys the source never produced (a model completion that dropped lines)
/// are carried in `missing` and hold the Unknown literal in `values`.
struct DeviceRecord {
    std::map<std::string, std::string> values;
    std::set<std::string> missing;
    std::string source_id;

    static DeviceRecord with_defaults(const ElementCatalog& catalog, std::string source_id = "");
    const std::string& value(const std::string& key) const;
    void set(const std::string& key, const std::string& raw);
    bool key_missing(const std::string& key) const { return missing.count(key) > 0; }
};

/// Separators used for word-basis evaluation splitting.
const std::vector<std::string>& evaluation_separators();

/// Split a value into its ordered, de-duplicated word set.
std::vector<std::string> split_value_words(const std::string& value,
                                           const std::vector<std::string>& separators);
std::vector<std::string> split_value_words(const std::string& value);

/// One "key: value" line per element in catalog order.
std::string serialize_completion(const DeviceRecord& record, const ElementCatalog& catalog);

enum class ParseIssue { missing_key, unmatched_line, duplicate_key };

struct ParseDiagnostic {
    ParseIssue issue;
    std::string detail;
};

struct ParsedCompletion {
    DeviceRecord record;
    std::vector<ParseDiagnostic> diagnostics;
};

/// Tolerant inverse of serialize_completion: lines whose prefix before the
/// first ':' is a known key populate the record; everything else is reported.
/// Never throws on malformed input.
ParsedCompletion parse_completion(const std::string& text, const ElementCatalog& catalog,
                                  const std::string& source_id = "");

}  // namespace sii
