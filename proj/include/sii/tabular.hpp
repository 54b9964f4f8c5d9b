#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sii/catalog.hpp"

namespace sii {

/// RFC-4180-style table: quoted fields, doubled-quote escapes, embedded
/// newlines inside quotes. Delimiter is configurable (',' default).
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    size_t column(const std::string& name) const;         // throws if absent
    bool has_column(const std::string& name) const;
};

Table parse_delimited(std::istream& in, char delimiter = ',');
Table read_delimited_file(const std::string& path, char delimiter = ',');

/// One FAIR table row: catalog values as a DeviceRecord plus every
/// non-catalog column (measurement conditions, performance targets).
struct FairRow {
    DeviceRecord record;
    std::map<std::string, std::string> extras;
};

struct FairTableOptions {
    std::string doc_ref_column = "doc_id";
    char delimiter = ',';
};

/// Project table rows onto the catalog. Cells that are empty map to the
/// Unknown literal. Throws when the document-reference column is absent.
std::vector<FairRow> load_fair_rows(const std::string& path, const ElementCatalog& catalog,
                                    const FairTableOptions& options = {});

}  // namespace sii
