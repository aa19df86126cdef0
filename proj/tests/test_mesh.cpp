#include <doctest.h>

#include "hemicontrol/mesh.hpp"

#include <cmath>
#include <sstream>

using namespace hemicontrol;

namespace {

// Unit square split along one diagonal per cell: 2x2 cells, 8 triangles.
Mesh2D diagonal_square() {
  Mesh2D m;
  for (int j = 0; j <= 2; ++j)
    for (int i = 0; i <= 2; ++i)
      m.vertices.push_back({0.5 * i, 0.5 * j});
  auto id = [](int i, int j) { return j * 3 + i; };
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  for (int i = 0; i < 2; ++i) {
    m.boundary_edges.push_back({{id(i, 0), id(i + 1, 0)}, BoundaryTag::Gamma2});
    m.boundary_edges.push_back({{id(2, i), id(2, i + 1)}, BoundaryTag::Gamma3});
    m.boundary_edges.push_back({{id(i + 1, 2), id(i, 2)}, BoundaryTag::Gamma2});
    m.boundary_edges.push_back({{id(0, i + 1), id(0, i)}, BoundaryTag::Gamma1});
  }
  m.h = std::sqrt(0.5);
  return m;
}

} // namespace

TEST_CASE("unit square n=2 counts and tags") {
  const Mesh2D m = generate_unit_square(2);
  CHECK(m.vertex_count() == 13);
  CHECK(m.triangle_count() == 16);
  CHECK(m.boundary_edges.size() == 8);
  CHECK(boundary_edge_count(m, BoundaryTag::Gamma1) == 2);
  CHECK(boundary_edge_count(m, BoundaryTag::Gamma3) == 2);
  CHECK(boundary_edge_count(m, BoundaryTag::Gamma2) == 4);
  for (std::size_t t = 0; t < m.triangle_count(); ++t)
    CHECK(signed_area(m, t) == doctest::Approx(1.0 / 16).epsilon(1e-14));
  CHECK(validate(m).ok());
}

TEST_CASE("unit square n=4 size parameter and Gamma2 edges") {
  const Mesh2D m = generate_unit_square(4);
  CHECK(m.h == doctest::Approx(std::sqrt(2.0) / 4).epsilon(1e-15));
  CHECK(boundary_edge_count(m, BoundaryTag::Gamma2) == 8);
  CHECK(max_edge_length(m) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("unit square counts hold for n in [2, 64]") {
  for (int n = 2; n <= 64; ++n) {
    const Mesh2D m = generate_unit_square(n);
    REQUIRE(m.vertex_count() == static_cast<std::size_t>((n + 1) * (n + 1) + n * n));
    REQUIRE(m.triangle_count() == static_cast<std::size_t>(4 * n * n));
    REQUIRE(std::abs(total_area(m) - 1.0) <= 1e-12);
  }
}

TEST_CASE("n below 2 is rejected") {
  CHECK_THROWS_AS(generate_unit_square(1), std::invalid_argument);
  CHECK_THROWS_AS(generate_unit_square(0), std::invalid_argument);
}

TEST_CASE("boundary lengths per tag") {
  const Mesh2D m = generate_unit_square(8);
  CHECK(boundary_length(m, BoundaryTag::Gamma1) == doctest::Approx(1.0));
  CHECK(boundary_length(m, BoundaryTag::Gamma2) == doctest::Approx(2.0));
  CHECK(boundary_length(m, BoundaryTag::Gamma3) == doctest::Approx(1.0));
}

TEST_CASE("custom tagging scheme") {
  TaggingScheme t;
  t.left = BoundaryTag::Gamma3;
  t.right = BoundaryTag::Gamma1;
  t.top = BoundaryTag::Gamma3;
  const Mesh2D m = generate_unit_square(4, t);
  CHECK(boundary_length(m, BoundaryTag::Gamma3) == doctest::Approx(2.0));
  CHECK(boundary_length(m, BoundaryTag::Gamma2) == doctest::Approx(1.0));
  CHECK(validate(m).ok());
}

TEST_CASE("refinement of the 8-triangle square") {
  const Mesh2D coarse = diagonal_square();
  REQUIRE(validate(coarse).ok());
  const Mesh2D fine = refine_uniform(coarse);
  CHECK(fine.triangle_count() == 32);
  CHECK(fine.h == doctest::Approx(coarse.h / 2).epsilon(1e-15));
  CHECK(validate(fine).ok());
  CHECK(std::abs(total_area(fine) - 1.0) <= 1e-12);
  CHECK(boundary_edge_count(fine, BoundaryTag::Gamma3) == 4);
}

TEST_CASE("refinement preserves area, halves h, and stays valid") {
  Mesh2D m = generate_unit_square(3);
  for (int level = 0; level < 3; ++level) {
    const Mesh2D child = refine_uniform(m);
    CHECK(child.triangle_count() == 4 * m.triangle_count());
    CHECK(child.h == doctest::Approx(m.h / 2).epsilon(1e-15));
    CHECK(std::abs(total_area(child) - total_area(m)) <= 1e-12);
    CHECK(max_edge_length(child) == doctest::Approx(max_edge_length(m) / 2).epsilon(1e-12));
    CHECK(validate(child).ok());
    for (auto tag : {BoundaryTag::Gamma1, BoundaryTag::Gamma2, BoundaryTag::Gamma3})
      CHECK(boundary_length(child, tag) == doctest::Approx(boundary_length(m, tag)).epsilon(1e-12));
    m = child;
  }
}

TEST_CASE("validator names a clockwise triangle") {
  Mesh2D m = generate_unit_square(3);
  std::swap(m.triangles[5][1], m.triangles[5][2]);
  const ValidationReport r = validate(m);
  REQUIRE(r.count(FindingKind::DegenerateOrClockwise) == 1);
  for (const auto& f : r.findings)
    if (f.kind == FindingKind::DegenerateOrClockwise)
      CHECK(f.indices == std::vector<int>{5});
}

TEST_CASE("validator reports an uncovered boundary edge") {
  Mesh2D m = generate_unit_square(3);
  const BoundaryEdge dropped = m.boundary_edges[2];
  m.boundary_edges.erase(m.boundary_edges.begin() + 2);
  const ValidationReport r = validate(m);
  REQUIRE(r.count(FindingKind::UncoveredBoundaryEdge) == 1);
  bool named = false;
  for (const auto& f : r.findings)
    if (f.kind == FindingKind::UncoveredBoundaryEdge)
      named = std::find(f.indices.begin(), f.indices.end(), dropped.v[0]) != f.indices.end() &&
              std::find(f.indices.begin(), f.indices.end(), dropped.v[1]) != f.indices.end();
  CHECK(named);
}

TEST_CASE("validator reports spurious, duplicate, and invalid boundary edges") {
  Mesh2D m = generate_unit_square(3);
  // An interior edge: a cell corner to its center vertex.
  const auto& t = m.triangles[0];
  m.boundary_edges.push_back({{t[0], t[2]}, BoundaryTag::Gamma2});
  m.boundary_edges.push_back(m.boundary_edges[0]);
  m.boundary_edges.push_back({{m.boundary_edges[1].v[0], m.boundary_edges[1].v[1]}, static_cast<BoundaryTag>(7)});
  const ValidationReport r = validate(m);
  CHECK(r.count(FindingKind::SpuriousBoundaryEdge) >= 1);
  CHECK(r.count(FindingKind::DuplicateBoundaryEdge) >= 1);
  CHECK(r.count(FindingKind::InvalidTag) == 1);
}

TEST_CASE("validator reports a missing tag class") {
  Mesh2D m = generate_unit_square(2);
  for (auto& e : m.boundary_edges)
    if (e.tag == BoundaryTag::Gamma3)
      e.tag = BoundaryTag::Gamma2;
  CHECK(validate(m).count(FindingKind::MissingTag) == 1);
}

TEST_CASE("validator reports out-of-range indices") {
  Mesh2D m = generate_unit_square(2);
  m.triangles[0][1] = 999;
  CHECK(validate(m).count(FindingKind::IndexOutOfRange) >= 1);
}

TEST_CASE("validator reports a hanging vertex") {
  // Two triangles over a unit square, with the lower triangle split at the
  // midpoint of the shared diagonal only on one side.
  Mesh2D m;
  m.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  m.triangles = {{0, 1, 4}, {1, 2, 4}, {0, 2, 3}};
  m.boundary_edges = {{{0, 1}, BoundaryTag::Gamma2},
                      {{1, 2}, BoundaryTag::Gamma3},
                      {{2, 3}, BoundaryTag::Gamma2},
                      {{3, 0}, BoundaryTag::Gamma1}};
  const ValidationReport r = validate(m);
  CHECK(r.count(FindingKind::HangingVertex) == 1);
  CHECK_FALSE(r.ok());
}

TEST_CASE("mesh file round trip is exact") {
  const Mesh2D m = refine_uniform(generate_unit_square(3));
  std::stringstream ss;
  write_mesh(ss, m);
  CHECK(ss.str().rfind("mesh2d v1\n", 0) == 0);
  const Mesh2D back = read_mesh(ss);
  REQUIRE(back.vertex_count() == m.vertex_count());
  for (std::size_t i = 0; i < m.vertex_count(); ++i) {
    CHECK(back.vertices[i].x == m.vertices[i].x);
    CHECK(back.vertices[i].y == m.vertices[i].y);
  }
  CHECK(back.triangles == m.triangles);
  REQUIRE(back.boundary_edges.size() == m.boundary_edges.size());
  for (std::size_t e = 0; e < m.boundary_edges.size(); ++e) {
    CHECK(back.boundary_edges[e].v == m.boundary_edges[e].v);
    CHECK(back.boundary_edges[e].tag == m.boundary_edges[e].tag);
  }
  CHECK(back.h == doctest::Approx(max_edge_length(m)));
}

TEST_CASE("malformed mesh files are rejected") {
  for (const char* text : {"mesh2d v2\nvertices 0\n", "mesh2d v1\nvertices 2\n0 0\n",
                           "mesh2d v1\nvertices 1\n0 0\ntriangles 1\n0 1\n"}) {
    std::stringstream ss(text);
    CHECK_THROWS_AS(read_mesh(ss), std::runtime_error);
  }
}
