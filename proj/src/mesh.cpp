#include "hemicontrol/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace hemicontrol {

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey make_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double edge_length(const Point& p, const Point& q) { return std::hypot(q.x - p.x, q.y - p.y); }

bool valid_tag_value(BoundaryTag tag) {
  const int v = static_cast<int>(tag);
  return v >= 1 && v <= 3;
}

} // namespace

const char* to_string(BoundaryTag tag) {
  switch (tag) {
  case BoundaryTag::Gamma1:
    return "Gamma1";
  case BoundaryTag::Gamma2:
    return "Gamma2";
  case BoundaryTag::Gamma3:
    return "Gamma3";
  }
  return "invalid";
}

Mesh2D generate_unit_square(int n, const TaggingScheme& tagging) {
  if (n < 2)
    throw std::invalid_argument("generate_unit_square: n must be >= 2, got " + std::to_string(n));

  Mesh2D mesh;
  const int corners = (n + 1) * (n + 1);
  mesh.vertices.reserve(static_cast<std::size_t>(corners + n * n));
  const double step = 1.0 / n;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      mesh.vertices.push_back({i * step, j * step});
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      mesh.vertices.push_back({(i + 0.5) * step, (j + 0.5) * step});

  auto corner = [n](int i, int j) { return j * (n + 1) + i; };
  mesh.triangles.reserve(static_cast<std::size_t>(4 * n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = corner(i, j), b = corner(i + 1, j);
      const int c = corner(i + 1, j + 1), d = corner(i, j + 1);
      const int m = corners + j * n + i;
      mesh.triangles.push_back({a, b, m});
      mesh.triangles.push_back({b, c, m});
      mesh.triangles.push_back({c, d, m});
      mesh.triangles.push_back({d, a, m});
    }
  }

  for (int i = 0; i < n; ++i)
    mesh.boundary_edges.push_back({{corner(i, 0), corner(i + 1, 0)}, tagging.bottom});
  for (int j = 0; j < n; ++j)
    mesh.boundary_edges.push_back({{corner(n, j), corner(n, j + 1)}, tagging.right});
  for (int i = n; i > 0; --i)
    mesh.boundary_edges.push_back({{corner(i, n), corner(i - 1, n)}, tagging.top});
  for (int j = n; j > 0; --j)
    mesh.boundary_edges.push_back({{corner(0, j), corner(0, j - 1)}, tagging.left});

  mesh.h = std::sqrt(2.0) / n;
  return mesh;
}

Mesh2D refine_uniform(const Mesh2D& mesh) {
  Mesh2D fine;
  fine.vertices = mesh.vertices;
  std::map<EdgeKey, int> midpoint;
  auto mid = [&](int a, int b) {
    auto [it, inserted] = midpoint.try_emplace(make_key(a, b), 0);
    if (inserted) {
      const Point& p = mesh.vertices[static_cast<std::size_t>(a)];
      const Point& q = mesh.vertices[static_cast<std::size_t>(b)];
      it->second = static_cast<int>(fine.vertices.size());
      fine.vertices.push_back({0.5 * (p.x + q.x), 0.5 * (p.y + q.y)});
    }
    return it->second;
  };

  fine.triangles.reserve(4 * mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
    fine.triangles.push_back({t[0], ab, ca});
    fine.triangles.push_back({ab, t[1], bc});
    fine.triangles.push_back({ca, bc, t[2]});
    fine.triangles.push_back({ab, bc, ca});
  }

  fine.boundary_edges.reserve(2 * mesh.boundary_edges.size());
  for (const auto& e : mesh.boundary_edges) {
    const int m = mid(e.v[0], e.v[1]);
    fine.boundary_edges.push_back({{e.v[0], m}, e.tag});
    fine.boundary_edges.push_back({{m, e.v[1]}, e.tag});
  }
  fine.h = 0.5 * mesh.h;
  return fine;
}

std::size_t ValidationReport::count(FindingKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(findings.begin(), findings.end(), [kind](const Finding& f) { return f.kind == kind; }));
}

ValidationReport validate(const Mesh2D& mesh) {
  ValidationReport report;
  auto add = [&report](FindingKind kind, std::vector<int> idx, std::string msg) {
    report.findings.push_back({kind, std::move(idx), std::move(msg)});
  };

  const int nv = static_cast<int>(mesh.vertices.size());
  auto in_range = [nv](int i) { return i >= 0 && i < nv; };

  std::map<EdgeKey, int> incidence;
  bool indices_ok = true;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    if (!in_range(tri[0]) || !in_range(tri[1]) || !in_range(tri[2])) {
      add(FindingKind::IndexOutOfRange, {static_cast<int>(t)},
          "triangle " + std::to_string(t) + " references a vertex outside [0, " + std::to_string(nv) + ")");
      indices_ok = false;
      continue;
    }
    if (!(signed_area(mesh, t) > 0.0))
      add(FindingKind::DegenerateOrClockwise, {static_cast<int>(t)},
          "triangle " + std::to_string(t) + " has non-positive signed area");
    for (int k = 0; k < 3; ++k)
      ++incidence[make_key(tri[static_cast<std::size_t>(k)], tri[static_cast<std::size_t>((k + 1) % 3)])];
  }

  std::map<EdgeKey, int> tagged;
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    const int ei = static_cast<int>(e);
    if (!in_range(be.v[0]) || !in_range(be.v[1])) {
      add(FindingKind::IndexOutOfRange, {ei}, "boundary edge " + std::to_string(e) + " references a missing vertex");
      continue;
    }
    if (!valid_tag_value(be.tag))
      add(FindingKind::InvalidTag, {ei},
          "boundary edge " + std::to_string(e) + " has tag " + std::to_string(static_cast<int>(be.tag)));
    const EdgeKey key = make_key(be.v[0], be.v[1]);
    if (!tagged.emplace(key, ei).second) {
      add(FindingKind::DuplicateBoundaryEdge, {tagged[key], ei},
          "boundary edge " + std::to_string(e) + " duplicates edge " + std::to_string(tagged[key]));
      continue;
    }
    auto it = incidence.find(key);
    if (it == incidence.end() || it->second != 1)
      add(FindingKind::SpuriousBoundaryEdge, {ei},
          "boundary edge " + std::to_string(e) + " does not belong to exactly one triangle");
  }

  for (const auto& [key, count] : incidence) {
    if (count > 2)
      add(FindingKind::NonManifoldEdge, {key.first, key.second},
          "edge (" + std::to_string(key.first) + "," + std::to_string(key.second) + ") is shared by " +
              std::to_string(count) + " triangles");
    if (count == 1 && !tagged.contains(key))
      add(FindingKind::UncoveredBoundaryEdge, {key.first, key.second},
          "boundary edge (" + std::to_string(key.first) + "," + std::to_string(key.second) + ") carries no tag");
  }

  for (BoundaryTag tag : {BoundaryTag::Gamma1, BoundaryTag::Gamma2, BoundaryTag::Gamma3}) {
    if (boundary_edge_count(mesh, tag) == 0)
      add(FindingKind::MissingTag, {static_cast<int>(tag)}, std::string("no boundary edge tagged ") + to_string(tag));
  }

  if (!indices_ok || nv == 0)
    return report;

  // Hanging vertices: a vertex lying strictly inside some edge. Vertices are
  // binned on a uniform grid so each edge only inspects nearby candidates.
  double xmin = mesh.vertices[0].x, xmax = xmin, ymin = mesh.vertices[0].y, ymax = ymin;
  for (const auto& p : mesh.vertices) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int bins = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(nv))));
  const double wx = std::max(xmax - xmin, 1e-300) / bins;
  const double wy = std::max(ymax - ymin, 1e-300) / bins;
  auto bin_of = [&](double v, double lo, double w) { return std::clamp(static_cast<int>((v - lo) / w), 0, bins - 1); };
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(bins * bins));
  for (int i = 0; i < nv; ++i) {
    const auto& p = mesh.vertices[static_cast<std::size_t>(i)];
    grid[static_cast<std::size_t>(bin_of(p.y, ymin, wy) * bins + bin_of(p.x, xmin, wx))].push_back(i);
  }

  for (const auto& [key, count] : incidence) {
    (void)count;
    const Point& p = mesh.vertices[static_cast<std::size_t>(key.first)];
    const Point& q = mesh.vertices[static_cast<std::size_t>(key.second)];
    const double len = edge_length(p, q);
    if (len == 0.0)
      continue;
    const double tol = 1e-10 * len;
    const int bx0 = bin_of(std::min(p.x, q.x) - tol, xmin, wx), bx1 = bin_of(std::max(p.x, q.x) + tol, xmin, wx);
    const int by0 = bin_of(std::min(p.y, q.y) - tol, ymin, wy), by1 = bin_of(std::max(p.y, q.y) + tol, ymin, wy);
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) {
        for (int v : grid[static_cast<std::size_t>(by * bins + bx)]) {
          if (v == key.first || v == key.second)
            continue;
          const Point& r = mesh.vertices[static_cast<std::size_t>(v)];
          const double s = ((r.x - p.x) * (q.x - p.x) + (r.y - p.y) * (q.y - p.y)) / (len * len);
          const double dist = std::abs((q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)) / len;
          if (s > 1e-10 && s < 1.0 - 1e-10 && dist <= tol)
            add(FindingKind::HangingVertex, {v, key.first, key.second},
                "vertex " + std::to_string(v) + " lies inside edge (" + std::to_string(key.first) + "," +
                    std::to_string(key.second) + ")");
        }
      }
    }
  }
  return report;
}

double signed_area(const Mesh2D& mesh, std::size_t triangle) {
  const auto& t = mesh.triangles[triangle];
  const Point& a = mesh.vertices[static_cast<std::size_t>(t[0])];
  const Point& b = mesh.vertices[static_cast<std::size_t>(t[1])];
  const Point& c = mesh.vertices[static_cast<std::size_t>(t[2])];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double total_area(const Mesh2D& mesh) {
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    sum += signed_area(mesh, t);
  return sum;
}

double max_edge_length(const Mesh2D& mesh) {
  double h = 0.0;
  for (const auto& t : mesh.triangles)
    for (std::size_t k = 0; k < 3; ++k)
      h = std::max(h, edge_length(mesh.vertices[static_cast<std::size_t>(t[k])],
                                  mesh.vertices[static_cast<std::size_t>(t[(k + 1) % 3])]));
  return h;
}

double boundary_length(const Mesh2D& mesh, BoundaryTag tag) {
  double len = 0.0;
  for (const auto& e : mesh.boundary_edges)
    if (e.tag == tag)
      len += edge_length(mesh.vertices[static_cast<std::size_t>(e.v[0])],
                         mesh.vertices[static_cast<std::size_t>(e.v[1])]);
  return len;
}

std::size_t boundary_edge_count(const Mesh2D& mesh, BoundaryTag tag) {
  return static_cast<std::size_t>(std::count_if(mesh.boundary_edges.begin(), mesh.boundary_edges.end(),
                                                [tag](const BoundaryEdge& e) { return e.tag == tag; }));
}

void write_mesh(std::ostream& os, const Mesh2D& mesh) {
  const auto old_precision = os.precision(17);
  os << "mesh2d v1\n";
  os << "vertices " << mesh.vertices.size() << '\n';
  for (const auto& p : mesh.vertices)
    os << p.x << ' ' << p.y << '\n';
  os << "triangles " << mesh.triangles.size() << '\n';
  for (const auto& t : mesh.triangles)
    os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "boundary " << mesh.boundary_edges.size() << '\n';
  for (const auto& e : mesh.boundary_edges)
    os << e.v[0] << ' ' << e.v[1] << ' ' << static_cast<int>(e.tag) << '\n';
  os.precision(old_precision);
}

namespace {

std::size_t read_section_header(std::istream& is, const std::string& expected) {
  std::string word;
  long long count = -1;
  if (!(is >> word >> count) || word != expected || count < 0)
    throw std::runtime_error("read_mesh: expected '" + expected + " <count>'");
  return static_cast<std::size_t>(count);
}

} // namespace

Mesh2D read_mesh(std::istream& is) {
  std::string magic, version;
  if (!(is >> magic >> version) || magic != "mesh2d" || version != "v1")
    throw std::runtime_error("read_mesh: missing 'mesh2d v1' header");

  Mesh2D mesh;
  mesh.vertices.resize(read_section_header(is, "vertices"));
  for (auto& p : mesh.vertices)
    if (!(is >> p.x >> p.y))
      throw std::runtime_error("read_mesh: truncated vertex list");

  mesh.triangles.resize(read_section_header(is, "triangles"));
  for (auto& t : mesh.triangles)
    if (!(is >> t[0] >> t[1] >> t[2]))
      throw std::runtime_error("read_mesh: truncated triangle list");

  mesh.boundary_edges.resize(read_section_header(is, "boundary"));
  for (auto& e : mesh.boundary_edges) {
    int tag = 0;
    if (!(is >> e.v[0] >> e.v[1] >> tag))
      throw std::runtime_error("read_mesh: truncated boundary list");
    e.tag = static_cast<BoundaryTag>(tag);
  }
  mesh.h = max_edge_length(mesh);
  return mesh;
}

} // namespace hemicontrol
