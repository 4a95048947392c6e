#include "metam/repository.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "metam/errors.hpp"

namespace metam {

namespace fs = std::filesystem;

const Table& Repository::at(const std::string& id) const {
    auto it = tables.find(id);
    if (it == tables.end()) throw IoError("unknown table id: " + id);
    return it->second;
}

char sniff_delimiter(std::string_view first_line) {
    if (first_line.find(',') == std::string_view::npos &&
        first_line.find('\t') != std::string_view::npos) {
        return '\t';
    }
    return ',';
}

namespace {

// one pass over the file, handling quoted fields (embedded delimiters,
// doubled quotes, embedded newlines)
std::vector<std::vector<std::string>> split_rows(std::string_view text, char delim) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty() && !field_was_quoted) {
            in_quotes = true;
            field_was_quoted = true;
        } else if (c == delim) {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_row();
        } else {
            field.push_back(c);
        }
    }
    if (!field.empty() || field_was_quoted || !row.empty()) end_row();

    // trailing blank lines are not rows; interior ones stay as all-null rows
    while (!rows.empty() && rows.back().size() == 1 && rows.back()[0].empty()) {
        rows.pop_back();
    }
    return rows;
}

Cell to_cell(std::string s) {
    if (s.empty()) return std::nullopt;
    return Cell(std::move(s));
}

}  // namespace

bool looks_like_header(const std::vector<Cell>& row) {
    std::unordered_set<std::string> seen;
    std::size_t non_empty = 0;
    for (const auto& c : row) {
        if (!c.has_value()) continue;
        ++non_empty;
        if (parse_real(*c).has_value()) return false;
        if (!seen.insert(*c).second) return false;
    }
    return non_empty > 0;
}

Table parse_delimited(std::string_view text, std::string id,
                      std::optional<char> delimiter) {
    const auto nl = text.find('\n');
    const char delim = delimiter.value_or(
        sniff_delimiter(text.substr(0, nl == std::string_view::npos ? text.size() : nl)));

    auto rows = split_rows(text, delim);
    if (rows.empty()) throw IoError("no rows in " + id);

    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.size());
    if (width == 0) throw IoError("no columns in " + id);

    std::vector<Cell> first;
    first.reserve(rows[0].size());
    for (auto& f : rows[0]) first.push_back(to_cell(f));
    const bool has_header = looks_like_header(first);

    Table t;
    t.id = std::move(id);
    t.row_count = rows.size() - (has_header ? 1 : 0);
    t.columns.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
        auto& col = t.columns[j];
        if (has_header && j < first.size()) col.name = first[j];
        col.values.reserve(t.row_count);
    }
    for (std::size_t r = has_header ? 1 : 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < width; ++j) {
            t.columns[j].values.push_back(
                j < rows[r].size() ? to_cell(std::move(rows[r][j])) : std::nullopt);
        }
    }
    for (auto& col : t.columns) {
        col.dtype = infer_dtype(col.values);
        col.distinct_count = count_distinct(col.values);
    }
    return t;
}

Repository load_repository(const fs::path& dir, const LoadOptions& options,
                           LoadReport* report) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw IoError("not a readable directory: " + dir.string());
    }

    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(dir, ec);
         !ec && it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file()) continue;
        auto ext = to_lower(it->path().extension().string());
        if (ext == ".csv" || ext == ".tsv") files.push_back(it->path());
    }
    std::sort(files.begin(), files.end());
    if (options.max_files > 0 && files.size() > options.max_files) {
        files.resize(options.max_files);
    }

    Repository repo;
    repo.source_dir = dir.string();
    for (const auto& path : files) {
        const std::string id = fs::relative(path, dir).generic_string();
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            if (report) report->skipped.push_back({id, "unreadable"});
            continue;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        auto delim = options.delimiter;
        if (!delim && to_lower(path.extension().string()) == ".tsv") delim = '\t';
        try {
            repo.tables.emplace(id, parse_delimited(buf.str(), id, delim));
        } catch (const std::exception& e) {
            if (report) report->skipped.push_back({id, e.what()});
        }
    }
    if (repo.tables.empty()) {
        throw EmptyRepositoryError("no parseable tables under " + dir.string());
    }
    return repo;
}

namespace {

void write_field(std::ostream& os, std::string_view s, char delim) {
    const bool needs_quotes =
        s.find(delim) != std::string_view::npos || s.find('"') != std::string_view::npos ||
        s.find('\n') != std::string_view::npos || s.find('\r') != std::string_view::npos;
    if (!needs_quotes) {
        os << s;
        return;
    }
    os << '"';
    for (char c : s) {
        if (c == '"') os << '"';
        os << c;
    }
    os << '"';
}

}  // namespace

void write_table(const Table& t, std::ostream& os, char delimiter) {
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        if (j) os << delimiter;
        const auto& name = t.columns[j].name;
        write_field(os, name ? *name : "c" + std::to_string(j), delimiter);
    }
    os << '\n';
    for (std::size_t r = 0; r < t.row_count; ++r) {
        for (std::size_t j = 0; j < t.columns.size(); ++j) {
            if (j) os << delimiter;
            const auto& cell = t.columns[j].values[r];
            if (cell) write_field(os, *cell, delimiter);
        }
        os << '\n';
    }
}

void write_table_file(const Table& t, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const char delim = to_lower(path.extension().string()) == ".tsv" ? '\t' : ',';
    write_table(t, out, delim);
}

std::uint64_t repository_content_hash(const Repository& repo) {
    std::uint64_t h = fnv1a64("repo");
    for (const auto& [id, table] : repo.tables) {
        h = fnv1a64(id, h);
        h = splitmix64(h ^ table_content_hash(table));
    }
    return h;
}

}  // namespace metam
