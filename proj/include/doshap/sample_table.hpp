#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace doshap {

// Column-labelled numeric table used for sample sets and backgrounds.
// Latent draws, when recorded, use columns named "latent:<name>" so they
// are distinguishable from measured nodes.
struct SampleTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const;  // throws Error when absent
  bool has_col(const std::string& name) const;
  std::size_t row_count() const { return rows.size(); }

  // CSV with a header row; doubles are written round-trip exact.  Comment
  // lines start with '#' and are ignored by the reader.
  void write_csv(std::ostream& os, const std::vector<std::string>& comments = {}) const;
  static SampleTable read_csv(std::istream& is);
};

}  // namespace doshap
