#include <doctest.h>

#include <algorithm>
#include <set>

#include "perc/lattice.hpp"

using namespace perc;

TEST_SUITE("lattice") {

TEST_CASE("edges_in counts") {
  CHECK(edges_in(Region::box(2, 1)).size() == 12);  // 3x3 grid
  CHECK(edges_in(Region::box(3, 0)).size() == 0);
  std::vector<int> dims{3, 3};
  CHECK(edges_in(Region::rectangle(2, dims)).size() == 12);
}

TEST_CASE("edges are canonical and unique") {
  auto edges = edges_in(Region::box(2, 2));
  std::set<Edge> seen;
  for (const Edge& e : edges) {
    CHECK(e.base < e.other());  // canonical: base is the smaller endpoint
    CHECK(seen.insert(e).second);
  }
  CHECK(edges.size() == 2 * 5 * 4);
}

TEST_CASE("quarter face counts and coverage") {
  CHECK(quarter_faces(2, 1).size() == 8);   // d 2^d with d=2
  CHECK(quarter_faces(3, 1).size() == 24);  // d 2^d with d=3
  CHECK_THROWS_AS(quarter_faces(2, 0), std::invalid_argument);

  // Union of the quarter-faces covers boundary(2) exactly (overlaps allowed).
  auto faces = quarter_faces(2, 2);
  Region bdry = Region::boundary(2, 2);
  for (const Site& s : bdry.sites()) {
    bool covered = false;
    for (const Region& f : faces) covered |= f.contains(s);
    CHECK(covered);
  }
  for (const Region& f : faces)
    for (const Site& s : f.sites()) CHECK(bdry.contains(s));
}

TEST_CASE("translate") {
  Region box = Region::box(2, 1);
  CHECK(translate(box, Site{}) == box);
  Region shifted = translate(box, Site::of({5, 0}));
  CHECK(shifted.contains(Site::of({5, 0})));
  CHECK(!shifted.contains(Site::of({0, 0})));
  CHECK(translate(shifted, -Site::of({5, 0})) == box);
  for (const Site& s : box.sites()) CHECK(shifted.contains(s + Site::of({5, 0})));
}

TEST_CASE("translate preserves cardinality and adjacency") {
  Region box = Region::box(2, 2);
  Region moved = translate(box, Site::of({7, -3}));
  CHECK(box.sites().size() == moved.sites().size());
  CHECK(edges_in(box).size() == edges_in(moved).size());
}

TEST_CASE("iterated translation keeps a near-boundary edge inside") {
  // Edge within distance m^(1/4) of box(m), shift vector inside box(m^(1/4)).
  const int m = 8;
  Edge e{Site::of({9, 0}), 1};
  Site tau = Site::of({1, 0});
  const int iterations = 2;  // floor(m^(3/4) / 2)
  for (int i = 1; i <= iterations; ++i) {
    Site shift;
    for (int j = 0; j < i; ++j) shift = shift + tau;
    Region box_i = translate(Region::box(2, m), shift);
    CHECK(box_i.contains(e.base));
    CHECK(box_i.contains(e.other()));
  }
}

TEST_CASE("boundary cardinality formula") {
  for (int d = 2; d <= 3; ++d) {
    for (int n = 1; n <= 4; ++n) {
      auto count = Region::boundary(d, n).sites().size();
      auto box_size = [d](int r) {
        std::uint64_t t = 1;
        for (int i = 0; i < d; ++i) t *= static_cast<std::uint64_t>(2 * r + 1);
        return t;
      };
      CHECK(count == box_size(n) - box_size(n - 1));
      CHECK(count == Region::boundary(d, n).site_count());
    }
  }
}

TEST_CASE("boundary equals box difference") {
  Region bdry = Region::boundary(2, 3);
  Region outer = Region::box(2, 3);
  Region inner = Region::box(2, 2);
  for (const Site& s : outer.sites())
    CHECK(bdry.contains(s) == (outer.contains(s) && !inner.contains(s)));
}

TEST_CASE("sites are lexicographically sorted and counted") {
  std::vector<int> signs{1, -1};
  for (const Region& r :
       {Region::box(2, 2), Region::annulus(2, 1, 3), Region::boundary(3, 2),
        Region::truncated_slab(3, 1, 3), Region::quarter_face(3, 2, 0, 1, signs)}) {
    auto sites = r.sites();
    CHECK(std::is_sorted(sites.begin(), sites.end()));
    CHECK(sites.size() == r.site_count());
    for (const Site& s : sites) CHECK(r.contains(s));
  }
}

TEST_CASE("slab geometry") {
  Region slab = Region::truncated_slab(3, 1, 4);
  CHECK(slab.contains(Site::of({4, -4, 1})));
  CHECK(!slab.contains(Site::of({5, 0, 0})));
  CHECK(!slab.contains(Site::of({0, 0, 2})));
  CHECK_THROWS_AS(Region::truncated_slab(2, 1, 4), std::invalid_argument);
}

TEST_CASE("inner boundary") {
  Region box = Region::box(2, 2);
  CHECK(box.on_inner_boundary(Site::of({2, 0})));
  CHECK(!box.on_inner_boundary(Site::of({1, 1})));
  CHECK(!box.on_inner_boundary(Site::of({3, 0})));
}

TEST_CASE("region text round trip") {
  std::vector<int> dims{7, 3};
  std::vector<int> signs{1, -1};
  for (const Region& r :
       {Region::box(2, 3), Region::boundary(2, 2), Region::annulus(2, 1, 4),
        Region::rectangle(2, dims).translated(Site::of({-3, 1})),
        Region::custom(2, {Site::of({0, 0}), Site::of({1, 0}), Site::of({0, -2})}),
        Region::quarter_face(3, 2, 1, -1, signs),
        Region::truncated_slab(3, 2, 9).translated(Site::of({1, 2, 3}))}) {
    Region back = Region::from_text(r.to_text(), r.dim());
    CHECK(back == r);
  }
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(Region::annulus(2, 3, 3), std::invalid_argument);
  std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(Region::rectangle(2, bad), std::invalid_argument);
  CHECK_THROWS_AS(Region::box(1, 2), std::invalid_argument);
  CHECK_THROWS_AS(Region::box(7, 2), std::invalid_argument);
}

}  // TEST_SUITE
