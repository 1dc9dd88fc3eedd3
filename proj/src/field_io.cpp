#include "crstokes/field_io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace crstokes {
namespace {

void comment(std::ostream& os, std::string_view hash) {
  if (!hash.empty()) os << "# config_hash=" << hash << '\n';
}

/// Non-comment, non-header rows split on commas.
std::vector<std::vector<std::string>> rows(std::istream& is, std::string_view header) {
  std::vector<std::vector<std::string>> out;
  std::string line;
  bool seen_header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != header)
        throw std::runtime_error("line " + std::to_string(lineno) + ": expected header '" +
                                 std::string(header) + "'");
      seen_header = true;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    out.push_back(std::move(cols));
  }
  return out;
}

template <class T>
T parse(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_velocity_csv(std::ostream& os, const VelocityField& u, std::string_view hash_comment) {
  comment(os, hash_comment);
  os << "edge_id,component,value\n";
  const auto n = u.components[0].values.size();
  for (std::size_t e = 0; e < n; ++e)
    for (int c = 0; c < 2; ++c) os << e << ',' << c << ',' << format_double(u.components[c].values[e]) << '\n';
}

void write_cell_csv(std::ostream& os, const CellField& q, std::string_view hash_comment) {
  comment(os, hash_comment);
  os << "cell_id,value\n";
  for (std::size_t k = 0; k < q.values.size(); ++k) os << k << ',' << format_double(q.values[k]) << '\n';
}

VelocityField read_velocity_csv(std::istream& is, std::size_t num_edges) {
  VelocityField u;
  for (auto& c : u.components) c.values.assign(num_edges, 0.0);
  for (const auto& r : rows(is, "edge_id,component,value")) {
    if (r.size() != 3) throw std::runtime_error("velocity csv: expected 3 columns");
    const auto e = parse<std::size_t>(r[0]);
    const int c = parse<int>(r[1]);
    if (e >= num_edges || c < 0 || c > 1) throw std::runtime_error("velocity csv: index out of range");
    u.components[c].values[e] = parse<double>(r[2]);
  }
  return u;
}

CellField read_cell_csv(std::istream& is, std::size_t num_cells) {
  CellField q{std::vector<double>(num_cells, 0.0)};
  for (const auto& r : rows(is, "cell_id,value")) {
    if (r.size() != 2) throw std::runtime_error("cell csv: expected 2 columns");
    const auto k = parse<std::size_t>(r[0]);
    if (k >= num_cells) throw std::runtime_error("cell csv: index out of range");
    q.values[k] = parse<double>(r[1]);
  }
  return q;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace crstokes
