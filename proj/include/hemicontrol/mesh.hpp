#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace hemicontrol {

/// Boundary portion an edge belongs to.
///
/// Gamma1 carries the homogeneous Dirichlet condition, Gamma2 the prescribed
/// flux q, and Gamma3 either the Dirichlet value b (limit problem) or the
/// multivalued flux law driven by the superpotential.
enum class BoundaryTag : int { Gamma1 = 1, Gamma2 = 2, Gamma3 = 3 };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct BoundaryEdge {
  std::array<int, 2> v{};
  BoundaryTag tag = BoundaryTag::Gamma2;
};

/// Conforming triangulation of a polygon with tagged boundary edges.
///
/// Triangles are stored counterclockwise. `h` is the mesh-size parameter
/// carried through refinement; for the structured unit square it is the
/// cell diameter sqrt(2)/n.
struct Mesh2D {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  double h = 0.0;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
};

/// Tag assigned to each side of the unit square.
struct TaggingScheme {
  BoundaryTag left = BoundaryTag::Gamma1;   // x = 0
  BoundaryTag right = BoundaryTag::Gamma3;  // x = 1
  BoundaryTag bottom = BoundaryTag::Gamma2; // y = 0
  BoundaryTag top = BoundaryTag::Gamma2;    // y = 1
};

/// Crossed-triangle mesh of [0,1]^2: every cell gets a center vertex and is
/// split into four triangles. Throws std::invalid_argument for n < 2.
Mesh2D generate_unit_square(int n, const TaggingScheme& tagging = {});

/// Red refinement: each triangle is split into four through its edge
/// midpoints. Boundary tags are inherited by both halves of a split edge.
Mesh2D refine_uniform(const Mesh2D& mesh);

enum class FindingKind {
  IndexOutOfRange,
  DegenerateOrClockwise,
  NonManifoldEdge,
  UncoveredBoundaryEdge,
  SpuriousBoundaryEdge,
  DuplicateBoundaryEdge,
  InvalidTag,
  MissingTag,
  HangingVertex,
};

struct Finding {
  FindingKind kind;
  std::vector<int> indices;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
  std::size_t count(FindingKind kind) const;
};

/// Checks every Mesh2D invariant. Never throws on a malformed mesh; each
/// violation becomes a finding naming the offending indices.
ValidationReport validate(const Mesh2D& mesh);

double signed_area(const Mesh2D& mesh, std::size_t triangle);
double total_area(const Mesh2D& mesh);
double max_edge_length(const Mesh2D& mesh);
double boundary_length(const Mesh2D& mesh, BoundaryTag tag);
std::size_t boundary_edge_count(const Mesh2D& mesh, BoundaryTag tag);

const char* to_string(BoundaryTag tag);

// Plain-text `mesh2d v1` format. Coordinates are written with 17 significant
// digits so a write/read cycle reproduces them exactly. The format carries no
// mesh-size parameter; read_mesh sets h to the maximum edge length.
void write_mesh(std::ostream& os, const Mesh2D& mesh);
Mesh2D read_mesh(std::istream& is);

} // namespace hemicontrol
