#include "doshap/sample_table.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "doshap/errors.hpp"

namespace doshap {

std::size_t SampleTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw Error("SampleTable: no column named '" + name + "'");
}

bool SampleTable::has_col(const std::string& name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void SampleTable::write_csv(std::ostream& os, const std::vector<std::string>& comments) const {
  for (const auto& c : comments) os << "# " << c << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].find_first_of(",\"\n") != std::string::npos)
      throw Error("SampleTable: column name not CSV-safe: " + columns[i]);
    os << (i ? "," : "") << columns[i];
  }
  os << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw Error("SampleTable: ragged row");
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? "," : "") << format_double(row[i]);
    os << "\n";
  }
}

SampleTable SampleTable::read_csv(std::istream& is) {
  SampleTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      t.columns = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.columns.size()) throw Error("SampleTable: ragged CSV row");
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      double v = 0;
      const auto* begin = f.data();
      const auto* end = f.data() + f.size();
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end) throw Error("SampleTable: bad numeric field '" + f + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw Error("SampleTable: empty CSV");
  return t;
}

}  // namespace doshap
