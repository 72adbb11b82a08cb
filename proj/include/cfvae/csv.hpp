#ifndef CFVAE_CSV_HPP_
#define CFVAE_CSV_HPP_

#include <optional>
#include <string>
#include <vector>

namespace cfvae {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by header name, or nullopt.
    std::optional<std::size_t> column(const std::string &name) const;
};

// Reads a comma-delimited UTF-8 file with a header row. Fields are
// whitespace-trimmed; "?" and the empty string are kept verbatim and
// interpreted as missing by the callers.
CsvTable read_csv(const std::string &path);

bool is_missing(const std::string &field);

std::string trim(const std::string &s);

} // namespace cfvae

#endif
