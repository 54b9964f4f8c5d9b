#include "sii/tabular.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sii/text.hpp"

namespace sii {

size_t Table::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw std::runtime_error("table has no column '" + name + "'");
}

bool Table::has_column(const std::string& name) const {
    for (const auto& h : header) {
        if (h == name) return true;
    }
    return false;
}

Table parse_delimited(std::istream& in, char delimiter) {
    Table table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    char c;

    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
    };
    auto end_row = [&]() {
        end_field();
        if (table.header.empty()) {
            table.header = row;
        } else {
            table.rows.push_back(row);
        }
        row.clear();
        row_started = false;
    };

    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        row_started = true;
        if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == delimiter) {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_row();
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) throw std::runtime_error("unterminated quoted field");
    if (row_started || !field.empty() || !row.empty()) end_row();
    return table;
}

Table read_delimited_file(const std::string& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open table file: " + path);
    try {
        return parse_delimited(in, delimiter);
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::vector<FairRow> load_fair_rows(const std::string& path, const ElementCatalog& catalog,
                                    const FairTableOptions& options) {
    Table table = read_delimited_file(path, options.delimiter);
    if (table.header.empty()) throw std::runtime_error(path + ": empty table");
    size_t ref_col = 0;
    try {
        ref_col = table.column(options.doc_ref_column);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": missing document-reference column '" +
                                 options.doc_ref_column + "'");
    }

    std::vector<FairRow> out;
    out.reserve(table.rows.size());
    for (const auto& cells : table.rows) {
        FairRow row;
        row.record = DeviceRecord::with_defaults(catalog);
        for (size_t i = 0; i < table.header.size(); ++i) {
            const std::string& name = table.header[i];
            std::string cell = i < cells.size() ? trim(cells[i]) : std::string{};
            if (i == ref_col) {
                row.record.source_id = cell;
            } else if (catalog.has_key(name)) {
                row.record.set(name, cell.empty() ? kUnknownValue : cell);
            } else {
                row.extras[name] = cell;
            }
        }
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace sii
