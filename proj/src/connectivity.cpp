#include "perc/connectivity.hpp"

#include <algorithm>
#include <stdexcept>

namespace perc {

RegionGraph::RegionGraph(Region region) : region_(std::move(region)) {
  sites_ = region_.sites();
  index_.reserve(sites_.size() * 2);
  for (std::int32_t i = 0; i < static_cast<std::int32_t>(sites_.size()); ++i)
    index_.emplace(sites_[i], i);

  edges_.reserve(sites_.size() * static_cast<std::size_t>(region_.dim()));
  for (std::int32_t i = 0; i < static_cast<std::int32_t>(sites_.size()); ++i) {
    for (int axis = 0; axis < region_.dim(); ++axis) {
      Edge e{sites_[i], static_cast<std::int8_t>(axis)};
      std::int32_t j = index_of(e.other());
      if (j >= 0) {
        edges_.push_back(e);
        ends_.emplace_back(i, j);
      }
    }
  }

  // CSR adjacency and incidence.
  const std::size_t n = sites_.size();
  std::vector<std::int32_t> deg(n, 0);
  for (const auto& [u, v] : ends_) {
    ++deg[u];
    ++deg[v];
  }
  adj_off_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) adj_off_[i + 1] = adj_off_[i] + deg[i];
  adj_.resize(static_cast<std::size_t>(adj_off_[n]));
  inc_off_ = adj_off_;
  inc_.resize(adj_.size());
  std::vector<std::int32_t> cursor(adj_off_.begin(), adj_off_.end() - 1);
  for (std::int32_t ei = 0; ei < static_cast<std::int32_t>(ends_.size()); ++ei) {
    auto [u, v] = ends_[ei];
    adj_[cursor[u]] = v;
    inc_[cursor[u]++] = ei;
    adj_[cursor[v]] = u;
    inc_[cursor[v]++] = ei;
  }
}

bool connected(const Region& A, const Region& B, const Region& within, const Config& cfg) {
  RegionGraph g(within);
  return connected(A, B, g, cfg);
}

bool connected(const Region& A, const Region& B, const Region& within,
               const SprinkledConfig& cfg) {
  RegionGraph g(within);
  return connected(A, B, g, cfg);
}

int count_crossing_clusters(int dim, int m, int n, const Config& cfg) {
  if (m < 1 || m >= n) throw std::invalid_argument("count_crossing_clusters requires 1 <= m < n");
  RegionGraph g(Region::box(dim, n));
  auto inner = g.indices_where([&](const Site& s) { return cheb_norm(s, dim) <= m; });
  auto outer = g.indices_where([&](const Site& s) { return cheb_norm(s, dim) == n; });
  CrossingCounter counter(g);
  return counter.count(cfg, inner, outer);
}

bool is_pivotal(int dim, const Edge& e, int m, int n, const Config& cfg) {
  if (m < 1 || m >= n) throw std::invalid_argument("pivotality requires 1 <= m < n");
  Region box_n = Region::box(dim, n);
  if (!box_n.contains(e.base) || !box_n.contains(e.other()))
    throw std::invalid_argument("edge endpoints must lie in box(n)");
  RegionGraph g(box_n);
  auto inner = g.indices_where([&](const Site& s) { return cheb_norm(s, dim) <= m; });
  auto target = g.flags_where([&](const Site& s) { return cheb_norm(s, dim) == n; });
  Reach reach(g);
  bool with_open = reach.reachable(cfg.with_edge(e, true), inner, target);
  bool with_closed = reach.reachable(cfg.with_edge(e, false), inner, target);
  return with_open && !with_closed;
}

bool is_closed_pivotal(int dim, const Edge& e, int m, int n, const Config& cfg) {
  return !cfg.open(e) && is_pivotal(dim, e, m, n, cfg);
}

bool unique_crossing(const Region& inner, const Region& outer, const Config& cfg) {
  RegionGraph g(outer);
  auto in_idx = g.indices_where([&](const Site& s) { return inner.contains(s); });
  auto out_idx = g.indices_where([&](const Site& s) { return outer.on_inner_boundary(s); });
  CrossingCounter counter(g);
  return counter.count(cfg, in_idx, out_idx) == 1;
}

bool easy_way_crossing(int dim, int N, const Config& cfg) {
  if (N < 1) throw std::invalid_argument("easy_way_crossing requires N >= 1");
  std::vector<int> dims(static_cast<std::size_t>(dim), 3 * N + 1);
  dims.back() = N + 1;
  RegionGraph g(Region::rectangle(dim, dims));
  int last = dim - 1;
  auto seeds = g.indices_where([&](const Site& s) { return s.c[last] == 0; });
  auto target = g.flags_where([&](const Site& s) { return s.c[last] == N; });
  Reach reach(g);
  return reach.reachable(cfg, seeds, target);
}

}  // namespace perc
