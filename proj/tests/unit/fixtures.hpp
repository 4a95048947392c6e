#pragma once

#include <string>
#include <vector>

#include "metam/core.hpp"

namespace metam::testing {

inline Column num_column(std::string name, const std::vector<double>& vals) {
    Column c;
    c.name = std::move(name);
    for (double v : vals) c.values.emplace_back(format_real(v));
    c.dtype = infer_dtype(c.values);
    c.distinct_count = count_distinct(c.values);
    return c;
}

inline Column str_column(std::string name, std::vector<std::string> vals) {
    Column c;
    c.name = std::move(name);
    for (auto& v : vals) c.values.emplace_back(std::move(v));
    c.dtype = infer_dtype(c.values);
    c.distinct_count = count_distinct(c.values);
    return c;
}

inline Table make_table(std::string id, std::vector<Column> cols) {
    Table t;
    t.id = std::move(id);
    t.row_count = cols.empty() ? 0 : cols[0].values.size();
    t.columns = std::move(cols);
    return t;
}

}  // namespace metam::testing
