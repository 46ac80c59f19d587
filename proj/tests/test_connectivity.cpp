#include <doctest.h>

#include <array>
#include <cmath>

#include "perc/connectivity.hpp"
#include "perc/lattice.hpp"
#include "perc/oracle.hpp"
#include "perc/sampler.hpp"

using namespace perc;

TEST_SUITE("connectivity") {

TEST_CASE("connected basics") {
  Region origin = Region::custom(2, {Site{}});
  Region within = Region::box(2, 2);
  CHECK(connected(origin, origin, within, Config(EdgeWeights{1, 0}, 0.0)));
  CHECK(!connected(origin, Region::boundary(2, 1), within, Config(EdgeWeights{1, 0}, 0.0)));
  CHECK(connected(Region::box(2, 1), Region::boundary(2, 2), within,
                  Config(EdgeWeights{1, 0}, 1.0)));
  // Empty A inside the region.
  Region far = Region::custom(2, {Site::of({9, 9})});
  CHECK(!connected(far, origin, within, Config(EdgeWeights{1, 0}, 1.0)));
}

TEST_CASE("count_crossing_clusters extremes and bound") {
  CHECK(count_crossing_clusters(2, 1, 3, Config(EdgeWeights{3, 0}, 1.0)) == 1);
  CHECK(count_crossing_clusters(2, 1, 3, Config(EdgeWeights{3, 0}, 0.0)) == 0);
  CHECK_THROWS_AS(count_crossing_clusters(2, 3, 3, Config(EdgeWeights{3, 0}, 0.5)),
                  std::invalid_argument);
  const int bdry_m = static_cast<int>(Region::boundary(2, 2).site_count());
  for (int i = 0; i < 200; ++i) {
    Config cfg(EdgeWeights{sample_seed(11, i), 0}, 0.5);
    int c = count_crossing_clusters(2, 2, 4, cfg);
    CHECK(c >= 0);
    CHECK(c <= bdry_m);
  }
}

TEST_CASE("crossing count distribution matches the oracle per value") {
  // Reduced 12-edge instance: exact probability of {count == j} versus the
  // sampled frequency, shared samples across j.
  using namespace perc::oracle;
  Region quadrant = quadrant_region_d2();
  RegionGraph g(quadrant);
  auto inner = g.indices_where([](const Site& s) { return cheb_norm(s, 2) <= 1; });
  auto outer = g.indices_where([](const Site& s) { return cheb_norm(s, 2) == 2; });
  CrossingCounter counter(g);
  const std::uint64_t samples = 20000;
  std::array<std::uint64_t, 5> freq{};
  for (std::uint64_t i = 0; i < samples; ++i) {
    Config cfg(EdgeWeights{sample_seed(4242, i), 0}, 0.5);
    int c = counter.count(cfg, inner, outer);
    REQUIRE(c >= 0);
    REQUIRE(c <= 4);
    ++freq[static_cast<std::size_t>(c)];
  }
  for (int j = 0; j <= 4; ++j) {
    OracleEval ev(from_region_crossing_count(quadrant, Region::box(2, 1),
                                             Region::boundary(2, 2), 0, j, "count==j"));
    double exact = ev.prob_at(0.5);
    double mc = static_cast<double>(freq[static_cast<std::size_t>(j)]) / samples;
    double se = std::sqrt(std::max(exact * (1 - exact), 1e-12) / samples);
    CHECK(std::abs(mc - exact) <= 3.0 * se + 1e-9);
  }

  // Full 40-edge box is beyond exact enumeration; two seeds must agree.
  std::array<std::uint64_t, 8> f1{}, f2{};
  RegionGraph full(Region::box(2, 2));
  auto inner_f = full.indices_where([](const Site& s) { return cheb_norm(s, 2) <= 1; });
  auto outer_f = full.indices_where([](const Site& s) { return cheb_norm(s, 2) == 2; });
  CrossingCounter counter_f(full);
  for (std::uint64_t i = 0; i < samples; ++i) {
    Config a(EdgeWeights{sample_seed(91, i), 0}, 0.5);
    Config b(EdgeWeights{sample_seed(92, i), 0}, 0.5);
    ++f1[std::min<std::size_t>(7, counter_f.count(a, inner_f, outer_f))];
    ++f2[std::min<std::size_t>(7, counter_f.count(b, inner_f, outer_f))];
  }
  for (std::size_t j = 0; j < 8; ++j) {
    double m1 = static_cast<double>(f1[j]) / samples;
    double m2 = static_cast<double>(f2[j]) / samples;
    double se = std::sqrt((m1 * (1 - m1) + m2 * (1 - m2)) / samples + 1e-12);
    CHECK(std::abs(m1 - m2) <= 3.5 * se + 1e-9);
  }
}

TEST_CASE("closed pivotality") {
  CHECK(!is_closed_pivotal(2, Edge{Site::of({1, 0}), 0}, 1, 2,
                           Config(EdgeWeights{5, 0}, 1.0)));
  // At p=0 with n=m+1 a single annulus edge realises the event.
  CHECK(is_closed_pivotal(2, Edge{Site::of({1, 0}), 0}, 1, 2,
                          Config(EdgeWeights{5, 0}, 0.0)));
  // One edge cannot span an annulus of width 2.
  for (const Edge& e : edges_in(Region::box(2, 3)))
    CHECK(!is_closed_pivotal(2, e, 1, 3, Config(EdgeWeights{5, 0}, 0.0)));
}

TEST_CASE("pivotality is independent of the edge state") {
  for (int i = 0; i < 50; ++i) {
    Config cfg(EdgeWeights{sample_seed(77, i), 0}, 0.45);
    Edge e{Site::of({1, 0}), 0};
    bool piv = is_pivotal(2, e, 1, 2, cfg);
    CHECK(is_pivotal(2, e, 1, 2, cfg.with_edge(e, true)) == piv);
    CHECK(is_pivotal(2, e, 1, 2, cfg.with_edge(e, false)) == piv);
    CHECK(is_closed_pivotal(2, e, 1, 2, cfg) == (piv && !cfg.open(e)));
  }
}

TEST_CASE("unique_crossing agrees with the crossing count") {
  CHECK(unique_crossing(Region::box(2, 1), Region::box(2, 2), Config(EdgeWeights{9, 0}, 1.0)));
  CHECK(!unique_crossing(Region::box(2, 1), Region::box(2, 2), Config(EdgeWeights{9, 0}, 0.0)));
  for (int i = 0; i < 10000; ++i) {
    Config cfg(EdgeWeights{sample_seed(123, i), 0}, 0.5);
    bool uniq = unique_crossing(Region::box(2, 1), Region::box(2, 2), cfg);
    CHECK(uniq == (count_crossing_clusters(2, 1, 2, cfg) == 1));
  }
}

TEST_CASE("easy way crossing extremes") {
  for (int N : {1, 2}) {
    CHECK(easy_way_crossing(2, N, Config(EdgeWeights{4, 0}, 1.0)));
    CHECK(!easy_way_crossing(2, N, Config(EdgeWeights{4, 0}, 0.0)));
  }
  CHECK(easy_way_crossing(3, 1, Config(EdgeWeights{4, 0}, 1.0)));
}

TEST_CASE("union-find forest agrees with breadth-first search") {
  // 100 random small instances, <= 10^3 sites.
  for (int i = 0; i < 100; ++i) {
    std::uint64_t s = sample_seed(2024, i);
    int n = 2 + static_cast<int>(mix64(s) % 6);  // box radius 2..7 -> <=225 sites
    double p = static_cast<double>(mix64(s ^ 1) >> 11) * 0x1.0p-53;
    RegionGraph g(Region::box(2, n));
    Config cfg(EdgeWeights{s, 0}, p);
    ClusterForest forest(g, cfg);
    Reach reach(g);
    auto origin = g.indices_where([](const Site& x) { return x == Site{}; });
    auto bdry = g.flags_where([&](const Site& x) { return cheb_norm(x, 2) == n; });
    bool by_bfs = reach.reachable(cfg, origin, bdry);
    bool by_forest = false;
    for (const Site& x : Region::boundary(2, n).sites())
      by_forest |= forest.connected_sites(Site{}, x);
    CHECK(by_bfs == by_forest);
  }
}

TEST_CASE("connectivity is pathwise monotone in p") {
  RegionGraph g(Region::box(2, 4));
  auto origin = g.indices_where([](const Site& x) { return x == Site{}; });
  auto bdry = g.flags_where([](const Site& x) { return cheb_norm(x, 2) == 4; });
  Reach reach(g);
  for (int i = 0; i < 500; ++i) {
    EdgeWeights w{sample_seed(5150, i), 0};
    bool prev = false;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      bool now = reach.reachable(Config(w, p), origin, bdry);
      CHECK((!prev || now));
      prev = now;
    }
  }
}

TEST_CASE("cluster forest fingerprint and rebuild idempotence") {
  RegionGraph g(Region::box(2, 2));
  Config cfg(EdgeWeights{31, 2}, 0.55);
  ClusterForest forest(g, cfg);
  auto fp = forest.fingerprint();
  std::vector<std::int32_t> roots;
  for (std::int32_t i = 0; i < g.site_count(); ++i) roots.push_back(forest.root(i));
  forest.rebuild(cfg);
  CHECK(forest.fingerprint() == fp);
  for (std::int32_t i = 0; i < g.site_count(); ++i)
    CHECK((forest.root(i) == roots[static_cast<std::size_t>(i)]));
}

}  // TEST_SUITE
