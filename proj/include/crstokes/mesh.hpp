#pragma once

#include "crstokes/types.hpp"

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace crstokes {

inline constexpr int kNoCell = -1;

/// Error raised for malformed or nonconforming mesh input.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Conforming triangulation of a polygonal domain.
///
/// Edges are stored once with sorted vertex indices. `cell_edges[K][i]` is the
/// edge opposite local vertex i of K, and `edge_cells[e] = {K, L}` with
/// L == kNoCell on the boundary. The first incident cell fixes the K -> L
/// orientation of every edge normal.
struct Mesh {
  int dimension = 2;
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> cell_edges;
  std::vector<std::array<int, 2>> edge_cells;
  std::vector<bool> boundary;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_cells() const { return cells.size(); }
  std::size_t num_edges() const { return edges.size(); }
  std::size_t num_interior_edges() const;
  bool is_boundary(int edge) const { return boundary[edge]; }

  /// The neighbour of `cell` across `edge`, or kNoCell on the boundary.
  int neighbor(int edge, int cell) const {
    const auto& ec = edge_cells[edge];
    return ec[0] == cell ? ec[1] : ec[0];
  }
  /// Local index (0..2) of `edge` in `cell`, or -1 if the edge is not on the cell.
  int local_edge_index(int cell, int edge) const;

  /// Builds edge topology from vertices and cells and validates conformity.
  /// Throws MeshError naming the offending cell.
  static Mesh from_cells(std::vector<Point> vertices, std::vector<std::array<int, 3>> cells);
};

struct Rectangle {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

/// nx x ny rectangles, each split along its (x0,y0)-(x1,y1) diagonal.
Mesh build_structured(int nx, int ny, const Rectangle& rect = {});

/// Parses the `crmesh 2` ASCII format.
Mesh read_mesh(std::string_view text);
Mesh read_mesh_file(const std::string& path);
void write_mesh(std::ostream& os, const Mesh& mesh);

/// Splits every triangle into four congruent children through edge midpoints.
Mesh refine_uniform(const Mesh& mesh);

/// Vertex coordinates of each cell, sorted lexicographically, cells sorted.
/// Two meshes describing the same triangulation compare equal.
std::vector<std::array<double, 6>> canonical_cells(const Mesh& mesh);

struct GeometryTables {
  std::vector<double> cell_measure;
  std::vector<double> cell_diameter;
  std::vector<double> inball_diameter;
  std::vector<Point> cell_centroid;
  /// Gradients of the three barycentric coordinates on each cell.
  std::vector<std::array<Vec2, 3>> barycentric_gradient;
  std::vector<double> edge_measure;
  std::vector<double> edge_diameter;
  std::vector<Point> edge_centroid;
  /// Unit normal of each edge pointing out of edge_cells[e][0] (n_KL for interior edges).
  std::vector<Vec2> edge_normal;
  double h = 0.0;
  double domain_measure = 0.0;
};

GeometryTables compute_geometry(const Mesh& mesh);

/// Barycentric coordinates of x with respect to cell K.
std::array<double, 3> barycentric(const Mesh& mesh, const GeometryTables& geo, int cell,
                                  const Point& x);

struct InequalityViolation {
  int cell;
  int edge;
  double lhs;
  double rhs;
};

struct MeshQuality {
  double theta = 0.0;
  std::vector<double> per_cell_ratio;              // xi_K / h_K
  std::vector<std::array<double, 2>> per_edge_ratios;  // {h_L/h_K, h_K/h_L}, interior edges only
  std::vector<int> interior_edges;                 // edge ids matching per_edge_ratios
  /// Pairs (K, sigma) where h_sigma |sigma| <= 2 theta^-d |K| fails.
  std::vector<InequalityViolation> measure_inequality_violations;
};

MeshQuality regularity_theta(const Mesh& mesh, const GeometryTables& geo);

/// Uniform bucket grid for point location.
class PointLocator {
 public:
  PointLocator(const Mesh& mesh, const GeometryTables& geo, int buckets_per_axis = 0);
  /// Cell containing x (closed), or kNoCell outside the mesh.
  int locate(const Point& x) const;

 private:
  const Mesh* mesh_;
  const GeometryTables* geo_;
  double xmin_, ymin_, dx_, dy_;
  int nbx_, nby_;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace crstokes
