#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "perc/lattice.hpp"
#include "perc/sampler.hpp"

namespace perc {

// Site indexing, canonical edge list and CSR adjacency for one region. Built
// once per region and shared read-only across samples and workers.
class RegionGraph {
 public:
  explicit RegionGraph(Region region);

  const Region& region() const { return region_; }
  int site_count() const { return static_cast<int>(sites_.size()); }
  const std::vector<Site>& sites() const { return sites_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const std::pair<std::int32_t, std::int32_t>> edge_ends() const { return ends_; }

  // -1 when the site is not in the region.
  std::int32_t index_of(const Site& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? -1 : it->second;
  }

  std::span<const std::int32_t> neighbor_sites(std::int32_t i) const {
    return {adj_.data() + adj_off_[i], adj_.data() + adj_off_[i + 1]};
  }
  std::span<const std::int32_t> incident_edges(std::int32_t i) const {
    return {inc_.data() + inc_off_[i], inc_.data() + inc_off_[i + 1]};
  }

  template <class Pred>
  std::vector<std::int32_t> indices_where(Pred&& pred) const {
    std::vector<std::int32_t> out;
    for (std::int32_t i = 0; i < site_count(); ++i)
      if (pred(sites_[i])) out.push_back(i);
    return out;
  }
  template <class Pred>
  std::vector<std::uint8_t> flags_where(Pred&& pred) const {
    std::vector<std::uint8_t> out(sites_.size(), 0);
    for (std::int32_t i = 0; i < site_count(); ++i)
      if (pred(sites_[i])) out[i] = 1;
    return out;
  }

 private:
  Region region_;
  std::vector<Site> sites_;
  std::unordered_map<Site, std::int32_t, SiteHash> index_;
  std::vector<Edge> edges_;
  std::vector<std::pair<std::int32_t, std::int32_t>> ends_;
  std::vector<std::int32_t> adj_, inc_;
  std::vector<std::int32_t> adj_off_, inc_off_;
};

// Union by size with path halving.
class UnionFind {
 public:
  void reset(int n) {
    parent_.resize(static_cast<std::size_t>(n));
    size_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      parent_[i] = i;
      size_[i] = 1;
    }
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }
  std::int32_t component_size(std::int32_t x) { return size_[find(x)]; }

 private:
  std::vector<std::int32_t> parent_, size_;
};

// Identifies the configuration a forest was built from; rebuilding from the
// same fingerprint yields the same partition.
struct ForestFingerprint {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double p = 0.0;
  std::size_t forced_edges = 0;

  bool operator==(const ForestFingerprint&) const = default;
};

// Union-find cluster structure of one configuration restricted to a region:
// find(x) == find(y) iff x and y are joined by an open path inside the region.
class ClusterForest {
 public:
  template <class Cfg>
  ClusterForest(const RegionGraph& g, const Cfg& cfg) : g_(&g) {
    rebuild(cfg);
  }

  template <class Cfg>
  void rebuild(const Cfg& cfg) {
    uf_.reset(g_->site_count());
    const auto& edges = g_->edges();
    auto ends = g_->edge_ends();
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (cfg.open(edges[i])) uf_.unite(ends[i].first, ends[i].second);
    if constexpr (requires { cfg.weights(); cfg.p(); cfg.forced(); }) {
      fingerprint_ = ForestFingerprint{cfg.weights().seed, cfg.weights().stream, cfg.p(),
                                       cfg.forced().size()};
    } else {
      fingerprint_ = ForestFingerprint{};
    }
  }

  const RegionGraph& graph() const { return *g_; }
  const ForestFingerprint& fingerprint() const { return fingerprint_; }
  std::int32_t root(std::int32_t site_index) { return uf_.find(site_index); }
  std::int32_t cluster_size(std::int32_t site_index) { return uf_.component_size(site_index); }

  bool connected_sites(const Site& a, const Site& b) {
    std::int32_t i = g_->index_of(a), j = g_->index_of(b);
    if (i < 0 || j < 0) return false;
    return uf_.find(i) == uf_.find(j);
  }

 private:
  const RegionGraph* g_;
  UnionFind uf_;
  ForestFingerprint fingerprint_{};
};

// Reusable breadth-first reachability over a region graph. The stamp array is
// epoch-tagged so repeated samples avoid O(sites) clears.
class Reach {
 public:
  explicit Reach(const RegionGraph& g)
      : g_(&g), stamp_(static_cast<std::size_t>(g.site_count()), 0) {}

  // True iff some seed reaches a site with target_flag != 0 along open edges.
  template <class Cfg>
  bool reachable(const Cfg& cfg, std::span<const std::int32_t> seeds,
                 std::span<const std::uint8_t> target_flag) {
    ++epoch_;
    queue_.clear();
    for (std::int32_t s : seeds) {
      if (stamp_[s] == epoch_) continue;
      if (target_flag[s]) return true;
      stamp_[s] = epoch_;
      queue_.push_back(s);
    }
    for (std::size_t head = 0; head < queue_.size(); ++head) {
      std::int32_t u = queue_[head];
      for (std::int32_t ei : g_->incident_edges(u)) {
        const Edge& e = g_->edges()[ei];
        auto [a, b] = g_->edge_ends()[ei];
        std::int32_t v = (a == u) ? b : a;
        if (stamp_[v] == epoch_) continue;
        if (!cfg.open(e)) continue;
        if (target_flag[v]) return true;
        stamp_[v] = epoch_;
        queue_.push_back(v);
      }
    }
    return false;
  }

  // Visits the full open cluster of the seeds; returns visited site indices.
  template <class Cfg>
  const std::vector<std::int32_t>& cluster(const Cfg& cfg, std::span<const std::int32_t> seeds) {
    ++epoch_;
    queue_.clear();
    for (std::int32_t s : seeds) {
      if (stamp_[s] == epoch_) continue;
      stamp_[s] = epoch_;
      queue_.push_back(s);
    }
    for (std::size_t head = 0; head < queue_.size(); ++head) {
      std::int32_t u = queue_[head];
      for (std::int32_t ei : g_->incident_edges(u)) {
        const Edge& e = g_->edges()[ei];
        auto [a, b] = g_->edge_ends()[ei];
        std::int32_t v = (a == u) ? b : a;
        if (stamp_[v] == epoch_) continue;
        if (!cfg.open(e)) continue;
        stamp_[v] = epoch_;
        queue_.push_back(v);
      }
    }
    return queue_;
  }

 private:
  const RegionGraph* g_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::vector<std::int32_t> queue_;
};

// Scratch for crossing-cluster counts; reusable across samples.
class CrossingCounter {
 public:
  explicit CrossingCounter(const RegionGraph& g)
      : g_(&g),
        inner_stamp_(static_cast<std::size_t>(g.site_count()), 0),
        done_stamp_(static_cast<std::size_t>(g.site_count()), 0) {}

  // Number of distinct open clusters of the region meeting both index sets.
  template <class Cfg>
  int count(const Cfg& cfg, std::span<const std::int32_t> inner,
            std::span<const std::int32_t> outer) {
    uf_.reset(g_->site_count());
    const auto& edges = g_->edges();
    auto ends = g_->edge_ends();
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (cfg.open(edges[i])) uf_.unite(ends[i].first, ends[i].second);
    return count_prepared(inner, outer);
  }

  // Same but over an externally built union-find (already populated).
  int count_with(UnionFind& uf, std::span<const std::int32_t> inner,
                 std::span<const std::int32_t> outer) {
    ++epoch_;
    int crossings = 0;
    for (std::int32_t i : inner) inner_stamp_[uf.find(i)] = epoch_;
    for (std::int32_t i : outer) {
      std::int32_t r = uf.find(i);
      if (inner_stamp_[r] == epoch_ && done_stamp_[r] != epoch_) {
        done_stamp_[r] = epoch_;
        ++crossings;
      }
    }
    return crossings;
  }

  UnionFind& scratch_uf() { return uf_; }

 private:
  int count_prepared(std::span<const std::int32_t> inner, std::span<const std::int32_t> outer) {
    return count_with(uf_, inner, outer);
  }

  const RegionGraph* g_;
  UnionFind uf_;
  std::vector<std::uint32_t> inner_stamp_, done_stamp_;
  std::uint32_t epoch_ = 0;
};

// --- public operations (convenience forms build their graphs per call) ---

// True iff an open path inside `within` joins a site of A to a site of B.
// Sites of A or B outside `within` are ignored; empty intersections give false.
template <class Cfg>
bool connected(const Region& A, const Region& B, const RegionGraph& within, const Cfg& cfg) {
  auto seeds = within.indices_where([&](const Site& s) { return A.contains(s); });
  auto target = within.flags_where([&](const Site& s) { return B.contains(s); });
  Reach reach(within);
  return reach.reachable(cfg, seeds, target);
}

bool connected(const Region& A, const Region& B, const Region& within, const Config& cfg);
bool connected(const Region& A, const Region& B, const Region& within,
               const SprinkledConfig& cfg);

// Number of distinct clusters of the configuration restricted to box(n) that
// intersect both box(m) and boundary(n). The two-arm event A_2(m,n) is
// {count >= 2}. Requires 1 <= m < n.
int count_crossing_clusters(int dim, int m, int n, const Config& cfg);

// True iff e is closed and the event {box(m) <-> boundary(n) inside box(n)}
// holds with e forced open but not with e forced closed.
bool is_closed_pivotal(int dim, const Edge& e, int m, int n, const Config& cfg);
bool is_pivotal(int dim, const Edge& e, int m, int n, const Config& cfg);

// True iff exactly one cluster of `outer` meets both `inner` and the inner
// vertex boundary of `outer`.
bool unique_crossing(const Region& inner, const Region& outer, const Config& cfg);

// Crossing of the box with sides 3N (first d-1 axes) and N (last axis), along
// the short axis, by an open path inside the box. Side lengths count edges, so
// the vertex grid is (3N+1) x ... x (3N+1) x (N+1).
bool easy_way_crossing(int dim, int N, const Config& cfg);

}  // namespace perc
