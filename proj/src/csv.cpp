#include "cfvae/csv.hpp"

#include "cfvae/types.hpp"

#include <fstream>
#include <sstream>

namespace cfvae {

std::string trim(const std::string &s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool is_missing(const std::string &field) { return field.empty() || field == "?"; }

std::optional<std::size_t> CsvTable::column(const std::string &name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

static std::vector<std::string> split_line(const std::string &line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

CsvTable read_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw IngestError("CSV file has no header row: " + path);
    return table;
}

} // namespace cfvae
