#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sii {

enum class MarkupFormat { xml, html, plain };

MarkupFormat markup_format_from_name(const std::string& name);
MarkupFormat infer_format_from_path(const std::string& path);

struct Section {
    std::string header;  // empty only for preamble before the first heading
    std::string body;
};

struct Document {
    std::string doc_id;
    std::string title;
    std::vector<Section> sections;
};

struct IngestResult {
    Document document;
    std::vector<std::string> warnings;
};

/// Split article markup into a linear header/body section list. Heading
/// elements open sections; all other markup is stripped from bodies. Plain
/// text splits on blank-line-delimited ALL-CAPS or numbered heading lines.
/// Throws on unparseable markup (with byte position) and when no content
/// at all survives.
IngestResult ingest_document(const std::string& raw, MarkupFormat format,
                             const std::string& doc_id = "");

struct ExtractedContent {
    std::string doc_id;
    std::string text;
    size_t word_count = 0;
    size_t token_estimate = 0;
};

/// tokens-per-word estimate used when no tokenizer is available
inline constexpr double kDefaultTokenRatio = 4.0 / 3.0;

const std::set<std::string>& default_section_keywords();

/// Concatenate bodies of sections whose lowercased header contains any
/// keyword as a substring. Absent when nothing matches or the matched
/// bodies are empty.
std::optional<ExtractedContent> select_experimental_sections(
    const Document& doc, const std::set<std::string>& keywords = default_section_keywords(),
    double token_ratio = kDefaultTokenRatio);

ExtractedContent make_extracted_content(const std::string& doc_id, const std::string& text,
                                        double token_ratio = kDefaultTokenRatio);

struct TokenGate {
    size_t budget = 2049;
    size_t completion_reserve = 450;
};

struct GateResult {
    bool pass = false;
    std::string reason;
};

GateResult gate_token_limit(const ExtractedContent& content, const TokenGate& gate = {});

}  // namespace sii
