#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metam/core.hpp"

namespace metam {

struct LoadOptions {
    std::optional<char> delimiter;  // unset -> sniffed per file (comma, tab fallback)
    std::size_t max_files = 0;      // 0 = no limit
};

struct LoadReport {
    struct Skip {
        std::string path;
        std::string reason;
    };
    std::vector<Skip> skipped;
};

struct Repository {
    std::map<std::string, Table> tables;  // id -> table, id = relative path
    std::string source_dir;

    const Table& at(const std::string& id) const;
};

char sniff_delimiter(std::string_view first_line);

// Header rule: a first row whose cells are non-numeric and whose non-empty
// cells are pairwise distinct is a header; empty header cells leave the
// column unnamed. Anything else is data and columns are named positionally
// (no names at all).
bool looks_like_header(const std::vector<Cell>& row);

// Parses delimited text into a typed table. Short rows are padded with nulls,
// empty fields become nulls. Quoted fields follow the usual CSV convention.
Table parse_delimited(std::string_view text, std::string id,
                      std::optional<char> delimiter = std::nullopt);

// Loads every *.csv / *.tsv under dir (recursive). Unparseable files are
// skipped and recorded in the report. Throws EmptyRepositoryError if nothing
// loads, IoError if dir is unreadable.
Repository load_repository(const std::filesystem::path& dir,
                           const LoadOptions& options = {},
                           LoadReport* report = nullptr);

// Serializes with a header row (generated c0..c(m-1) names when columns are
// unnamed) so reloading reproduces cell values and dtypes exactly.
void write_table(const Table& t, std::ostream& os, char delimiter = ',');
void write_table_file(const Table& t, const std::filesystem::path& path);

std::uint64_t repository_content_hash(const Repository& repo);

}  // namespace metam
