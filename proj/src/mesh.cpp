#include "crstokes/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <cctype>
#include <charconv>
#include <limits>

namespace crstokes {

namespace {

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

std::array<int, 2> sorted_pair(int a, int b) { return a < b ? std::array{a, b} : std::array{b, a}; }

}  // namespace

std::size_t Mesh::num_interior_edges() const {
  return static_cast<std::size_t>(std::count(boundary.begin(), boundary.end(), false));
}

int Mesh::local_edge_index(int cell, int edge) const {
  for (int i = 0; i < 3; ++i)
    if (cell_edges[cell][i] == edge) return i;
  return -1;
}

Mesh Mesh::from_cells(std::vector<Point> vertices, std::vector<std::array<int, 3>> cells) {
  Mesh m;
  m.vertices = std::move(vertices);
  m.cells = std::move(cells);
  const int nv = static_cast<int>(m.vertices.size());
  if (m.cells.empty()) throw MeshError("mesh has no cells");

  std::set<std::array<int, 3>> seen;
  std::vector<bool> used(nv, false);
  for (std::size_t k = 0; k < m.cells.size(); ++k) {
    const auto& c = m.cells[k];
    for (int v : c) {
      if (v < 0 || v >= nv)
        throw MeshError("cell " + std::to_string(k) + ": vertex index " + std::to_string(v) +
                        " out of range");
      used[v] = true;
    }
    if (c[0] == c[1] || c[1] == c[2] || c[0] == c[2])
      throw MeshError("cell " + std::to_string(k) + ": repeated vertex");
    const double area = signed_area(m.vertices[c[0]], m.vertices[c[1]], m.vertices[c[2]]);
    if (!(area > 0.0))
      throw MeshError("cell " + std::to_string(k) +
                      (area < 0.0 ? ": inverted (clockwise) vertex order" : ": degenerate cell"));
    auto key = c;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) throw MeshError("cell " + std::to_string(k) + ": duplicate cell");
  }
  for (int v = 0; v < nv; ++v)
    if (!used[v]) throw MeshError("vertex " + std::to_string(v) + " is not used by any cell");

  std::map<std::array<int, 2>, int> edge_index;
  m.cell_edges.resize(m.cells.size());
  for (std::size_t k = 0; k < m.cells.size(); ++k) {
    const auto& c = m.cells[k];
    for (int i = 0; i < 3; ++i) {
      const int a = c[(i + 1) % 3], b = c[(i + 2) % 3];
      const auto key = sorted_pair(a, b);
      auto [it, inserted] = edge_index.try_emplace(key, static_cast<int>(m.edges.size()));
      const int e = it->second;
      if (inserted) {
        m.edges.push_back(key);
        m.edge_cells.push_back({static_cast<int>(k), kNoCell});
      } else {
        auto& ec = m.edge_cells[e];
        if (ec[1] != kNoCell)
          throw MeshError("cell " + std::to_string(k) + ": edge (" + std::to_string(key[0]) + ", " +
                          std::to_string(key[1]) + ") shared by more than two cells");
        // Positively oriented neighbours traverse a shared edge in opposite directions.
        const auto& first = m.cells[ec[0]];
        const int j = [&] {
          for (int l = 0; l < 3; ++l)
            if (m.cell_edges[ec[0]][l] == e) return l;
          return -1;
        }();
        if (first[(j + 1) % 3] == a)
          throw MeshError("cell " + std::to_string(k) + " overlaps cell " + std::to_string(ec[0]));
        ec[1] = static_cast<int>(k);
      }
      m.cell_edges[k][i] = e;
    }
  }
  m.boundary.resize(m.edges.size());
  for (std::size_t e = 0; e < m.edges.size(); ++e) m.boundary[e] = m.edge_cells[e][1] == kNoCell;

  // Hanging nodes show up as a boundary vertex strictly inside a boundary edge.
  std::vector<int> bverts;
  for (std::size_t e = 0; e < m.edges.size(); ++e)
    if (m.boundary[e]) bverts.insert(bverts.end(), m.edges[e].begin(), m.edges[e].end());
  std::sort(bverts.begin(), bverts.end());
  bverts.erase(std::unique(bverts.begin(), bverts.end()), bverts.end());
  for (std::size_t e = 0; e < m.edges.size(); ++e) {
    if (!m.boundary[e]) continue;
    const Point& a = m.vertices[m.edges[e][0]];
    const Point& b = m.vertices[m.edges[e][1]];
    const Vec2 t = b - a;
    const double len2 = t.squaredNorm();
    for (int v : bverts) {
      if (v == m.edges[e][0] || v == m.edges[e][1]) continue;
      const Vec2 r = m.vertices[v] - a;
      const double s = r.dot(t) / len2;
      const double dist = std::abs(t.x() * r.y() - t.y() * r.x()) / std::sqrt(len2);
      if (s > 1e-12 && s < 1 - 1e-12 && dist <= 1e-12 * std::sqrt(len2))
        throw MeshError("cell " + std::to_string(m.edge_cells[e][0]) + ": hanging vertex " +
                        std::to_string(v) + " on edge (" + std::to_string(m.edges[e][0]) + ", " +
                        std::to_string(m.edges[e][1]) + ")");
    }
  }
  return m;
}

Mesh build_structured(int nx, int ny, const Rectangle& rect) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("build_structured: nx and ny must be >= 1");
  if (!(rect.x1 > rect.x0) || !(rect.y1 > rect.y0))
    throw std::invalid_argument("build_structured: degenerate rectangle");
  std::vector<Point> verts;
  verts.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      verts.emplace_back(rect.x0 + (rect.x1 - rect.x0) * i / nx,
                         rect.y0 + (rect.y1 - rect.y0) * j / ny);
  std::vector<std::array<int, 3>> cells;
  cells.reserve(2 * static_cast<std::size_t>(nx) * ny);
  const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return Mesh::from_cells(std::move(verts), std::move(cells));
}

namespace {

struct LineReader {
  std::istringstream in;
  int line_no = 0;
  std::string line;

  explicit LineReader(std::string_view text) : in{std::string(text)} {}

  // Next non-blank, comment-stripped line; false at end of input.
  bool next(std::vector<std::string_view>& tokens) {
    while (std::getline(in, line)) {
      ++line_no;
      if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
      tokens.clear();
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) tokens.emplace_back(line.data() + i, j - i);
        i = j;
      }
      if (!tokens.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw MeshError("line " + std::to_string(line_no) + ": " + what);
  }
};

template <class T>
T parse_number(std::string_view tok, const LineReader& r) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    r.fail("cannot parse '" + std::string(tok) + "' as a number");
  return value;
}

}  // namespace

Mesh read_mesh(std::string_view text) {
  LineReader r(text);
  std::vector<std::string_view> tok;
  if (!r.next(tok)) throw MeshError("empty mesh file");
  if (tok.size() != 2 || tok[0] != "crmesh") r.fail("expected header 'crmesh 2'");
  if (parse_number<int>(tok[1], r) != 2) r.fail("only dimension 2 is supported");
  if (!r.next(tok) || tok.size() != 2) r.fail("expected '<nvertices> <ncells>'");
  const long nv = parse_number<long>(tok[0], r);
  const long nc = parse_number<long>(tok[1], r);
  if (nv < 3 || nc < 1) r.fail("need at least 3 vertices and 1 cell");
  std::vector<Point> verts;
  verts.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    if (!r.next(tok)) throw MeshError("unexpected end of file in vertex block");
    if (tok.size() != 2) r.fail("vertex line needs 2 coordinates");
    verts.emplace_back(parse_number<double>(tok[0], r), parse_number<double>(tok[1], r));
  }
  std::vector<std::array<int, 3>> cells;
  cells.reserve(nc);
  for (long k = 0; k < nc; ++k) {
    if (!r.next(tok)) throw MeshError("unexpected end of file in cell block");
    if (tok.size() != 3) r.fail("cell line needs 3 vertex indices");
    cells.push_back({parse_number<int>(tok[0], r), parse_number<int>(tok[1], r),
                     parse_number<int>(tok[2], r)});
  }
  if (r.next(tok)) r.fail("trailing content after cell block");
  return Mesh::from_cells(std::move(verts), std::move(cells));
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return read_mesh(ss.str());
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << "crmesh 2\n" << mesh.num_vertices() << ' ' << mesh.num_cells() << '\n';
  char buf[64];
  for (const auto& v : mesh.vertices) {
    for (int d = 0; d < 2; ++d) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v[d]);
      os.write(buf, p - buf);
      os << (d == 0 ? ' ' : '\n');
    }
  }
  for (const auto& c : mesh.cells) os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
}

Mesh refine_uniform(const Mesh& mesh) {
  std::vector<Point> verts = mesh.vertices;
  const int nv = static_cast<int>(verts.size());
  for (const auto& e : mesh.edges) verts.push_back(0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]]));
  std::vector<std::array<int, 3>> cells;
  cells.reserve(4 * mesh.num_cells());
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const auto& c = mesh.cells[k];
    const auto& ce = mesh.cell_edges[k];
    const int m0 = nv + ce[0], m1 = nv + ce[1], m2 = nv + ce[2];  // midpoint opposite vertex i
    cells.push_back({c[0], m2, m1});
    cells.push_back({m2, c[1], m0});
    cells.push_back({m1, m0, c[2]});
    cells.push_back({m0, m1, m2});
  }
  return Mesh::from_cells(std::move(verts), std::move(cells));
}

std::vector<std::array<double, 6>> canonical_cells(const Mesh& mesh) {
  std::vector<std::array<double, 6>> out;
  out.reserve(mesh.num_cells());
  for (const auto& c : mesh.cells) {
    std::array<std::array<double, 2>, 3> pts;
    for (int i = 0; i < 3; ++i) pts[i] = {mesh.vertices[c[i]].x(), mesh.vertices[c[i]].y()};
    std::sort(pts.begin(), pts.end());
    out.push_back({pts[0][0], pts[0][1], pts[1][0], pts[1][1], pts[2][0], pts[2][1]});
  }
  std::sort(out.begin(), out.end());
  return out;
}

GeometryTables compute_geometry(const Mesh& mesh) {
  GeometryTables g;
  const std::size_t nc = mesh.num_cells(), ne = mesh.num_edges();
  g.cell_measure.resize(nc);
  g.cell_diameter.resize(nc);
  g.inball_diameter.resize(nc);
  g.cell_centroid.resize(nc);
  g.barycentric_gradient.resize(nc);
  g.edge_measure.resize(ne);
  g.edge_diameter.resize(ne);
  g.edge_centroid.resize(ne);
  g.edge_normal.resize(ne);

  for (std::size_t e = 0; e < ne; ++e) {
    const Point& a = mesh.vertices[mesh.edges[e][0]];
    const Point& b = mesh.vertices[mesh.edges[e][1]];
    g.edge_measure[e] = (b - a).norm();
    g.edge_diameter[e] = g.edge_measure[e];
    g.edge_centroid[e] = 0.5 * (a + b);
  }
  for (std::size_t k = 0; k < nc; ++k) {
    const auto& c = mesh.cells[k];
    const Point& p0 = mesh.vertices[c[0]];
    const Point& p1 = mesh.vertices[c[1]];
    const Point& p2 = mesh.vertices[c[2]];
    const double area = signed_area(p0, p1, p2);
    if (!(area > 0.0)) throw MeshError("compute_geometry: degenerate cell " + std::to_string(k));
    g.cell_measure[k] = area;
    g.cell_centroid[k] = (p0 + p1 + p2) / 3.0;
    double perim = 0.0, diam = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double len = g.edge_measure[mesh.cell_edges[k][i]];
      perim += len;
      diam = std::max(diam, len);
    }
    g.cell_diameter[k] = diam;
    g.inball_diameter[k] = 4.0 * area / perim;  // 2 r, r = |K| / s
    // grad lambda_i = rot(p_{i+2} - p_{i+1}) / (2|K|), rotated so it points into vertex i.
    const std::array<const Point*, 3> p{&p0, &p1, &p2};
    for (int i = 0; i < 3; ++i) {
      const Vec2 t = *p[(i + 2) % 3] - *p[(i + 1) % 3];
      g.barycentric_gradient[k][i] = Vec2(-t.y(), t.x()) / (2.0 * area);
    }
    g.h = std::max(g.h, diam);
    g.domain_measure += area;
  }
  for (std::size_t e = 0; e < ne; ++e) {
    const int K = mesh.edge_cells[e][0];
    const int i = mesh.local_edge_index(K, static_cast<int>(e));
    // Outward normal of K on the edge opposite vertex i is -grad lambda_i / |grad lambda_i|.
    const Vec2 gl = g.barycentric_gradient[K][i];
    g.edge_normal[e] = -gl / gl.norm();
  }
  return g;
}

std::array<double, 3> barycentric(const Mesh& mesh, const GeometryTables& geo, int cell,
                                  const Point& x) {
  const auto& c = mesh.cells[cell];
  std::array<double, 3> lam;
  for (int i = 0; i < 3; ++i) {
    // lambda_i vanishes on the opposite edge, which contains vertex i+1.
    lam[i] = geo.barycentric_gradient[cell][i].dot(x - mesh.vertices[c[(i + 1) % 3]]);
  }
  return lam;
}

MeshQuality regularity_theta(const Mesh& mesh, const GeometryTables& geo) {
  MeshQuality q;
  q.theta = std::numeric_limits<double>::infinity();
  q.per_cell_ratio.resize(mesh.num_cells());
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    q.per_cell_ratio[k] = geo.inball_diameter[k] / geo.cell_diameter[k];
    q.theta = std::min(q.theta, q.per_cell_ratio[k]);
  }
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    if (mesh.is_boundary(static_cast<int>(e))) continue;
    const double hK = geo.cell_diameter[mesh.edge_cells[e][0]];
    const double hL = geo.cell_diameter[mesh.edge_cells[e][1]];
    q.per_edge_ratios.push_back({hL / hK, hK / hL});
    q.interior_edges.push_back(static_cast<int>(e));
    q.theta = std::min({q.theta, hL / hK, hK / hL});
  }
  const double bound_factor = 2.0 * std::pow(q.theta, -mesh.dimension);
  for (std::size_t k = 0; k < mesh.num_cells(); ++k)
    for (int e : mesh.cell_edges[k]) {
      const double lhs = geo.edge_diameter[e] * geo.edge_measure[e];
      const double rhs = bound_factor * geo.cell_measure[k];
      if (!(lhs <= rhs)) q.measure_inequality_violations.push_back({static_cast<int>(k), e, lhs, rhs});
    }
  return q;
}

PointLocator::PointLocator(const Mesh& mesh, const GeometryTables& geo, int buckets_per_axis)
    : mesh_(&mesh), geo_(&geo) {
  double xmax = -1e300, ymax = -1e300;
  xmin_ = ymin_ = 1e300;
  for (const auto& v : mesh.vertices) {
    xmin_ = std::min(xmin_, v.x());
    ymin_ = std::min(ymin_, v.y());
    xmax = std::max(xmax, v.x());
    ymax = std::max(ymax, v.y());
  }
  const int n = buckets_per_axis > 0
                    ? buckets_per_axis
                    : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_cells()))));
  nbx_ = nby_ = n;
  dx_ = (xmax - xmin_) / n;
  dy_ = (ymax - ymin_) / n;
  buckets_.resize(static_cast<std::size_t>(n) * n);
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    double bx0 = 1e300, by0 = 1e300, bx1 = -1e300, by1 = -1e300;
    for (int v : mesh.cells[k]) {
      bx0 = std::min(bx0, mesh.vertices[v].x());
      by0 = std::min(by0, mesh.vertices[v].y());
      bx1 = std::max(bx1, mesh.vertices[v].x());
      by1 = std::max(by1, mesh.vertices[v].y());
    }
    const auto clampi = [](int i, int hi) { return std::clamp(i, 0, hi - 1); };
    const int i0 = clampi(static_cast<int>(std::floor((bx0 - xmin_) / dx_)), nbx_);
    const int i1 = clampi(static_cast<int>(std::floor((bx1 - xmin_) / dx_)), nbx_);
    const int j0 = clampi(static_cast<int>(std::floor((by0 - ymin_) / dy_)), nby_);
    const int j1 = clampi(static_cast<int>(std::floor((by1 - ymin_) / dy_)), nby_);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[j * nbx_ + i].push_back(static_cast<int>(k));
  }
}

int PointLocator::locate(const Point& x) const {
  const double fx = (x.x() - xmin_) / dx_, fy = (x.y() - ymin_) / dy_;
  if (fx < -1e-12 || fy < -1e-12 || fx > nbx_ + 1e-12 || fy > nby_ + 1e-12) return kNoCell;
  const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, nbx_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, nby_ - 1);
  for (int k : buckets_[j * nbx_ + i]) {
    const auto lam = barycentric(*mesh_, *geo_, k, x);
    if (lam[0] >= -1e-12 && lam[1] >= -1e-12 && lam[2] >= -1e-12) return k;
  }
  return kNoCell;
}

}  // namespace crstokes
