#include "sii/catalog.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sii/text.hpp"

namespace sii {

namespace {

ElementDef def(const char* key, SetTag tag, ValueKind kind, const char* annotation = "") {
    ElementDef e;
    e.key = key;
    e.display_name = replace_all(key, "_", " ");
    e.set_tag = tag;
    e.value_kind = kind;
    e.prompt_annotation = annotation;
    return e;
}

std::vector<ElementDef> default_elements() {
    using K = ValueKind;
    return {
        def("Substrate_stack_sequence", SetTag::A, K::delimited_list),
        def("ETL_stack_sequence", SetTag::A, K::delimited_list),
        def("ETL_additives_compounds", SetTag::A, K::delimited_list),
        def("ETL_deposition_procedure", SetTag::C, K::delimited_list),
        def("Perovskite_composition_long_form", SetTag::A, K::free_text),
        def("Perovskite_composition_short_form", SetTag::A, K::free_text),
        def("Perovskite_additives_compounds", SetTag::A, K::delimited_list),
        def("Perovskite_deposition_solvents", SetTag::C, K::delimited_list),
        def("Perovskite_deposition_procedure", SetTag::C, K::delimited_list),
        def("Perovskite_deposition_thermal_annealing_temperature", SetTag::C, K::numeric),
        def("Perovskite_deposition_thermal_annealing_time", SetTag::C, K::numeric),
        def("HTL_stack_sequence", SetTag::A, K::delimited_list),
        def("HTL_additives_compounds", SetTag::A, K::delimited_list),
        def("HTL_deposition_procedure", SetTag::C, K::delimited_list, "(only name, not details)"),
        def("Backcontact_stack_sequence", SetTag::A, K::delimited_list),
        def("Backcontact_additives_compounds", SetTag::A, K::delimited_list),
        def("Backcontact_deposition_procedure", SetTag::C, K::delimited_list),
        def("Stability_measured", SetTag::D, K::boolean),
        def("Stability_average_over_n_number_of_cells", SetTag::D, K::numeric),
        def("Stability_temperature_range", SetTag::D, K::free_text),
        def("Stability_atmosphere", SetTag::D, K::free_text),
        def("Stability_time_total_exposure", SetTag::D, K::numeric),
        def("Stability_PCE_initial_value", SetTag::D, K::numeric),
        def("Stability_PCE_end_of_experiment", SetTag::D, K::numeric),
        def("Cell_area_measured", SetTag::B, K::numeric),
        def("Cell_number_of_cells_per_substrate", SetTag::B, K::numeric),
        def("Cell_architecture", SetTag::B, K::free_text),
        def("Cell_flexible", SetTag::B, K::boolean),
        def("Cell_semitransparent", SetTag::B, K::boolean),
        def("Cell_semitransparent_wavelength_range", SetTag::B, K::free_text),
        def("Module", SetTag::Unassigned, K::boolean, "Any Module test?"),
    };
}

constexpr size_t kCatalogSize = 31;

void validate(const std::vector<ElementDef>& elements) {
    if (elements.size() != kCatalogSize) {
        throw std::runtime_error("catalog must define 31 elements, got " +
                                 std::to_string(elements.size()));
    }
    std::set<std::string> seen;
    std::map<SetTag, size_t> sizes;
    for (const auto& e : elements) {
        if (e.key.empty()) throw std::runtime_error("catalog element with empty key");
        for (char c : e.key) {
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
                throw std::runtime_error("catalog key contains whitespace: '" + e.key + "'");
        }
        if (!seen.insert(e.key).second)
            throw std::runtime_error("duplicate catalog key: '" + e.key + "'");
        if (e.display_name.find('_') != std::string::npos)
            throw std::runtime_error("display name contains underscore: '" + e.display_name + "'");
        sizes[e.set_tag]++;
    }
    const std::map<SetTag, size_t> expected = {{SetTag::A, 10},
                                               {SetTag::B, 6},
                                               {SetTag::C, 7},
                                               {SetTag::D, 7},
                                               {SetTag::Unassigned, 1}};
    for (const auto& [tag, want] : expected) {
        size_t got = sizes.count(tag) ? sizes.at(tag) : 0;
        if (got != want) {
            throw std::runtime_error("set " + set_tag_name(tag) + " must have " +
                                     std::to_string(want) + " elements, got " +
                                     std::to_string(got));
        }
    }
}

}  // namespace

std::string set_tag_name(SetTag tag) {
    switch (tag) {
        case SetTag::A: return "A";
        case SetTag::B: return "B";
        case SetTag::C: return "C";
        case SetTag::D: return "D";
        case SetTag::Unassigned: return "Unassigned";
    }
    return "?";
}

SetTag set_tag_from_name(const std::string& name) {
    if (name == "A") return SetTag::A;
    if (name == "B") return SetTag::B;
    if (name == "C") return SetTag::C;
    if (name == "D") return SetTag::D;
    if (name == "Unassigned" || name == "U" || name.empty()) return SetTag::Unassigned;
    throw std::runtime_error("unknown set tag: '" + name + "'");
}

std::string value_kind_name(ValueKind kind) {
    switch (kind) {
        case ValueKind::free_text: return "free_text";
        case ValueKind::boolean: return "boolean";
        case ValueKind::numeric: return "numeric";
        case ValueKind::delimited_list: return "delimited_list";
    }
    return "?";
}

ValueKind value_kind_from_name(const std::string& name) {
    if (name == "free_text" || name.empty()) return ValueKind::free_text;
    if (name == "boolean") return ValueKind::boolean;
    if (name == "numeric") return ValueKind::numeric;
    if (name == "delimited_list") return ValueKind::delimited_list;
    throw std::runtime_error("unknown value kind: '" + name + "'");
}

std::string ElementDef::prompt_line() const {
    if (prompt_annotation.empty()) return display_name;
    // Boolean elements take the annotation as a replacement question.
    if (value_kind == ValueKind::boolean) return prompt_annotation;
    return display_name + " " + prompt_annotation;
}

ElementCatalog::ElementCatalog(std::vector<ElementDef> elements)
    : elements_(std::move(elements)) {
    validate(elements_);
    for (size_t i = 0; i < elements_.size(); ++i) index_[elements_[i].key] = i;
}

ElementCatalog ElementCatalog::default_catalog() { return ElementCatalog(default_elements()); }

bool ElementCatalog::has_key(const std::string& key) const { return index_.count(key) > 0; }

const ElementDef& ElementCatalog::element(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw std::runtime_error("unknown catalog key: '" + key + "'");
    return elements_[it->second];
}

std::vector<std::string> ElementCatalog::keys() const {
    std::vector<std::string> out;
    out.reserve(elements_.size());
    for (const auto& e : elements_) out.push_back(e.key);
    return out;
}

std::vector<std::string> ElementCatalog::keys_in_set(SetTag tag) const {
    std::vector<std::string> out;
    for (const auto& e : elements_) {
        if (e.set_tag == tag) out.push_back(e.key);
    }
    return out;
}

std::string ElementCatalog::hash() const {
    std::ostringstream canon;
    for (const auto& e : elements_) {
        canon << e.key << '\x1f' << e.display_name << '\x1f' << set_tag_name(e.set_tag) << '\x1f'
              << value_kind_name(e.value_kind) << '\x1f' << e.prompt_annotation << '\x1e';
    }
    return fnv1a64_hex(canon.str());
}

ElementCatalog load_catalog(const std::optional<std::string>& config_path) {
    if (!config_path) return ElementCatalog::default_catalog();

    std::ifstream in(*config_path);
    if (!in) throw std::runtime_error("cannot open catalog config: " + *config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed catalog config " + *config_path + ": " + e.what());
    }
    // "elements" is one optional section of the shared config file.
    if (!j.contains("elements")) return ElementCatalog::default_catalog();
    if (!j["elements"].is_array())
        throw std::runtime_error("config \"elements\" must be an array");

    std::vector<ElementDef> elements;
    for (const auto& je : j["elements"]) {
        ElementDef e;
        e.key = je.at("key").get<std::string>();
        e.display_name = je.value("display_name", replace_all(e.key, "_", " "));
        e.set_tag = set_tag_from_name(je.value("set_tag", std::string{}));
        e.value_kind = value_kind_from_name(je.value("value_kind", std::string{}));
        e.prompt_annotation = je.value("prompt_annotation", std::string{});
        elements.push_back(std::move(e));
    }
    return ElementCatalog(std::move(elements));
}

std::string normalize_value_text(const std::string& raw) {
    std::string t = trim(raw);
    if (iequals(t, kUnknownValue)) return kUnknownValue;
    return t;
}

bool is_unknown(const std::string& value) { return iequals(trim(value), kUnknownValue); }

DeviceRecord DeviceRecord::with_defaults(const ElementCatalog& catalog, std::string source_id) {
    DeviceRecord r;
    r.source_id = std::move(source_id);
    for (const auto& e : catalog.elements()) r.values[e.key] = kUnknownValue;
    return r;
}

const std::string& DeviceRecord::value(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw std::runtime_error("record has no value for key '" + key + "'");
    return it->second;
}

void DeviceRecord::set(const std::string& key, const std::string& raw) {
    values[key] = normalize_value_text(raw);
    missing.erase(key);
}

const std::vector<std::string>& evaluation_separators() {
    static const std::vector<std::string> seps = {";", "|", ":", ">>"};
    return seps;
}

std::vector<std::string> split_value_words(const std::string& value,
                                           const std::vector<std::string>& separators) {
    if (separators.empty()) throw std::runtime_error("separator set must be non-empty");
    return split_on_separators(value, separators);
}

std::vector<std::string> split_value_words(const std::string& value) {
    return split_value_words(value, evaluation_separators());
}

std::string serialize_completion(const DeviceRecord& record, const ElementCatalog& catalog) {
    std::ostringstream out;
    bool first = true;
    for (const auto& e : catalog.elements()) {
        auto it = record.values.find(e.key);
        if (it == record.values.end())
            throw std::runtime_error("record missing catalog key '" + e.key + "'");
        if (!first) out << '\n';
        first = false;
        out << e.key << ": " << it->second;
    }
    return out.str();
}

ParsedCompletion parse_completion(const std::string& text, const ElementCatalog& catalog,
                                  const std::string& source_id) {
    ParsedCompletion result;
    result.record = DeviceRecord::with_defaults(catalog, source_id);
    std::set<std::string> seen;

    for (const auto& raw_line : split_lines(text)) {
        std::string line = trim(raw_line);
        if (line.empty()) continue;
        size_t colon = line.find(':');
        bool matched = false;
        if (colon != std::string::npos) {
            std::string key = trim(line.substr(0, colon));
            if (catalog.has_key(key)) {
                if (!seen.insert(key).second) {
                    result.diagnostics.push_back({ParseIssue::duplicate_key, key});
                } else {
                    result.record.set(key, line.substr(colon + 1));
                }
                matched = true;
            }
        }
        if (!matched) result.diagnostics.push_back({ParseIssue::unmatched_line, line});
    }

    for (const auto& e : catalog.elements()) {
        if (!seen.count(e.key)) {
            result.record.missing.insert(e.key);
            result.diagnostics.push_back({ParseIssue::missing_key, e.key});
        }
    }
    return result;
}

}  // namespace sii
