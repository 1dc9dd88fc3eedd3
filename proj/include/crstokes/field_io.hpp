#pragma once

#include "crstokes/cr_space.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace crstokes {

/// Header `edge_id,component,value`; one row per edge and component.
void write_velocity_csv(std::ostream& os, const VelocityField& u, std::string_view hash_comment = {});
/// Header `cell_id,value`.
void write_cell_csv(std::ostream& os, const CellField& q, std::string_view hash_comment = {});

VelocityField read_velocity_csv(std::istream& is, std::size_t num_edges);
CellField read_cell_csv(std::istream& is, std::size_t num_cells);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// %.17g, enough to round-trip any double.
std::string format_double(double x);

}  // namespace crstokes
