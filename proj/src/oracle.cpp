#include "perc/oracle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "perc/estimators.hpp"

namespace perc::oracle {

namespace {

long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// counts[k] of satisfying configurations with k of m edges open, expanded to
// the monomial basis: sum_k counts[k] p^k (1-p)^(m-k).
IntPoly poly_from_counts(std::span<const std::uint64_t> counts, int m) {
  IntPoly poly;
  poly.c.assign(static_cast<std::size_t>(m) + 1, 0);
  for (int k = 0; k <= m; ++k) {
    if (!counts[k]) continue;
    for (int j = 0; j + k <= m; ++j) {
      long long term = static_cast<long long>(counts[k]) * binomial(m - k, j);
      poly.c[static_cast<std::size_t>(k + j)] += (j % 2 == 0) ? term : -term;
    }
  }
  return poly;
}

double eval_counts(std::span<const std::uint64_t> counts, int m, double p) {
  // 23 terms at most; direct double accumulation is well below 1e-12 error.
  double q = 1.0 - p;
  std::array<double, kMaxOracleEdges + 1> pk{}, qk{};
  pk[0] = qk[0] = 1.0;
  for (int k = 1; k <= m; ++k) {
    pk[k] = pk[k - 1] * p;
    qk[k] = qk[k - 1] * q;
  }
  double acc = 0.0;
  for (int k = 0; k <= m; ++k)
    if (counts[k]) acc += static_cast<double>(counts[k]) * pk[k] * qk[m - k];
  return acc;
}

}  // namespace

MaskView::MaskView(std::span<const std::pair<std::int16_t, std::int16_t>> edges, int site_count,
                   std::uint32_t mask)
    : mask_(mask), root_(static_cast<std::size_t>(site_count)) {
  // Tiny union-find, rebuilt per mask.
  for (int i = 0; i < site_count; ++i) root_[i] = static_cast<std::int16_t>(i);
  auto find = [&](std::int16_t x) {
    while (root_[x] != x) {
      root_[x] = root_[root_[x]];
      x = root_[x];
    }
    return x;
  };
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!((mask >> e) & 1u)) continue;
    std::int16_t a = find(edges[e].first), b = find(edges[e].second);
    if (a != b) root_[b] = a;
  }
  for (std::size_t i = 0; i < root_.size(); ++i)
    root_[i] = find(static_cast<std::int16_t>(i));
}

bool MaskView::any_connected(std::span<const int> A, std::span<const int> B) const {
  for (int a : A)
    for (int b : B)
      if (root_[a] == root_[b]) return true;
  return false;
}

int MaskView::count_crossing(std::span<const int> inner, std::span<const int> outer) const {
  std::array<std::int16_t, 64> seen_inner{}, counted{};
  int n = 0;
  for (int i : inner) seen_inner[root_[i]] = 1;
  for (int i : outer) {
    std::int16_t r = root_[i];
    if (seen_inner[r] && !counted[r]) {
      counted[r] = 1;
      ++n;
    }
  }
  return n;
}

bool OracleInstance::uniform() const {
  for (std::uint8_t w : multiplicity)
    if (w != 1) return false;
  return true;
}

int OracleInstance::index_of(const Site& s) const {
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (sites[i] == s) return static_cast<int>(i);
  return -1;
}

OracleEval::OracleEval(OracleInstance inst)
    : inst_(std::move(inst)), m_(static_cast<int>(inst_.edges.size())) {
  if (m_ > kMaxOracleEdges)
    throw std::invalid_argument("oracle instance '" + inst_.name + "' has " + std::to_string(m_) +
                                " edges; the cap is " + std::to_string(kMaxOracleEdges));
  if (inst_.sites.size() > 63) throw std::invalid_argument("oracle instance has too many sites");
  const std::uint32_t total = 1u << m_;
  table_.assign((total + 63) / 64, 0);
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    MaskView view(inst_.edges, static_cast<int>(inst_.sites.size()), mask);
    if (inst_.event(view)) table_[mask >> 6] |= 1ull << (mask & 63u);
  }

  const bool uni = inst_.uniform();
  if (uni) {
    sat_by_popcount_.assign(static_cast<std::size_t>(m_) + 1, 0);
    for (std::uint32_t mask = 0; mask < total; ++mask)
      if (value(mask)) ++sat_by_popcount_[static_cast<std::size_t>(std::popcount(mask))];

    plus_piv_.assign(static_cast<std::size_t>(m_) * m_, 0);
    minus_piv_.assign(static_cast<std::size_t>(m_) * m_, 0);
    for (int e = 0; e < m_; ++e) {
      const std::uint32_t bit = 1u << e;
      for (std::uint32_t mask = 0; mask < total; ++mask) {
        if (mask & bit) continue;
        bool lo = value(mask), hi = value(mask | bit);
        if (lo == hi) continue;
        int k = std::popcount(mask);
        if (hi)
          ++plus_piv_[static_cast<std::size_t>(e) * m_ + k];
        else
          ++minus_piv_[static_cast<std::size_t>(e) * m_ + k];
      }
    }
  } else {
    special_edges_.clear();
    for (int e = 0; e < m_; ++e)
      if (inst_.multiplicity[e] != 1) special_edges_.push_back(e);
    if (special_edges_.size() > 8)
      throw std::invalid_argument("too many non-unit-multiplicity edges");
    const int s = static_cast<int>(special_edges_.size());
    const int mu = m_ - s;
    sat_by_bucket_.assign(static_cast<std::size_t>(mu + 1) << s, 0);
    std::uint32_t special_mask_bits = 0;
    for (int e : special_edges_) special_mask_bits |= 1u << e;
    for (std::uint32_t mask = 0; mask < total; ++mask) {
      if (!value(mask)) continue;
      int k = std::popcount(mask & ~special_mask_bits);
      std::uint32_t sm = 0;
      for (int j = 0; j < s; ++j)
        if ((mask >> special_edges_[j]) & 1u) sm |= 1u << j;
      ++sat_by_bucket_[(static_cast<std::size_t>(k) << s) | sm];
    }
  }
}

void OracleEval::require_uniform(const char* what) const {
  if (!inst_.uniform())
    throw std::logic_error(std::string(what) + " requires a uniform-probability instance");
}

double OracleEval::prob_at(double p) const {
  if (inst_.uniform()) return eval_counts(sat_by_popcount_, m_, p);
  const int s = static_cast<int>(special_edges_.size());
  const int mu = m_ - s;
  std::array<double, 8> pe{};
  for (int j = 0; j < s; ++j)
    pe[j] = 1.0 - std::pow(1.0 - p, static_cast<double>(inst_.multiplicity[special_edges_[j]]));
  double q = 1.0 - p;
  double acc = 0.0;
  for (int k = 0; k <= mu; ++k) {
    for (std::uint32_t sm = 0; sm < (1u << s); ++sm) {
      std::uint64_t cnt = sat_by_bucket_[(static_cast<std::size_t>(k) << s) | sm];
      if (!cnt) continue;
      double w = std::pow(p, k) * std::pow(q, mu - k);
      for (int j = 0; j < s; ++j) w *= ((sm >> j) & 1u) ? pe[j] : (1.0 - pe[j]);
      acc += static_cast<double>(cnt) * w;
    }
  }
  return acc;
}

IntPoly OracleEval::prob_poly() const {
  require_uniform("prob_poly");
  if (m_ > kMaxPolyEdges) throw std::invalid_argument("polynomial expansion capped at 16 edges");
  return poly_from_counts(sat_by_popcount_, m_);
}

double OracleEval::derivative_at(double p) const {
  require_uniform("derivative_at");
  // d/dp [p^k q^(m-k)] = k p^(k-1) q^(m-k) - (m-k) p^k q^(m-k-1)
  double q = 1.0 - p;
  std::array<double, kMaxOracleEdges + 1> pk{}, qk{};
  pk[0] = qk[0] = 1.0;
  for (int k = 1; k <= m_; ++k) {
    pk[k] = pk[k - 1] * p;
    qk[k] = qk[k - 1] * q;
  }
  double acc = 0.0;
  for (int k = 0; k <= m_; ++k) {
    if (!sat_by_popcount_[k]) continue;
    double d = 0.0;
    if (k > 0) d += k * pk[k - 1] * qk[m_ - k];
    if (m_ - k > 0) d -= (m_ - k) * pk[k] * qk[m_ - k - 1];
    acc += static_cast<double>(sat_by_popcount_[k]) * d;
  }
  return acc;
}

IntPoly OracleEval::edge_pivotal_poly(int e) const {
  require_uniform("edge_pivotal_poly");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(m_), 0);
  for (int k = 0; k < m_; ++k)
    counts[k] = plus_piv_[static_cast<std::size_t>(e) * m_ + k] +
                minus_piv_[static_cast<std::size_t>(e) * m_ + k];
  return poly_from_counts(counts, m_ - 1);
}

double OracleEval::edge_pivotal_at(int e, double p) const {
  require_uniform("edge_pivotal_at");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(m_), 0);
  for (int k = 0; k < m_; ++k)
    counts[k] = plus_piv_[static_cast<std::size_t>(e) * m_ + k] +
                minus_piv_[static_cast<std::size_t>(e) * m_ + k];
  return eval_counts(counts, m_ - 1, p);
}

double OracleEval::edge_plus_pivotal_at(int e, double p) const {
  require_uniform("edge_plus_pivotal_at");
  return eval_counts({plus_piv_.data() + static_cast<std::size_t>(e) * m_,
                      static_cast<std::size_t>(m_)},
                     m_ - 1, p);
}

double OracleEval::pivotal_sum_at(double p) const {
  double acc = 0.0;
  for (int e = 0; e < m_; ++e) acc += edge_pivotal_at(e, p);
  return acc;
}

double OracleEval::signed_pivotal_sum_at(double p) const {
  require_uniform("signed_pivotal_sum_at");
  double acc = 0.0;
  for (int e = 0; e < m_; ++e) {
    acc += eval_counts({plus_piv_.data() + static_cast<std::size_t>(e) * m_,
                        static_cast<std::size_t>(m_)},
                       m_ - 1, p);
    acc -= eval_counts({minus_piv_.data() + static_cast<std::size_t>(e) * m_,
                        static_cast<std::size_t>(m_)},
                       m_ - 1, p);
  }
  return acc;
}

IntPoly OracleEval::signed_pivotal_sum_poly() const {
  require_uniform("signed_pivotal_sum_poly");
  if (m_ > kMaxPolyEdges) throw std::invalid_argument("polynomial expansion capped at 16 edges");
  IntPoly acc;
  for (int e = 0; e < m_; ++e) {
    std::span<const std::uint64_t> plus{plus_piv_.data() + static_cast<std::size_t>(e) * m_,
                                        static_cast<std::size_t>(m_)};
    std::span<const std::uint64_t> minus{minus_piv_.data() + static_cast<std::size_t>(e) * m_,
                                         static_cast<std::size_t>(m_)};
    acc = acc + poly_from_counts(plus, m_ - 1) - poly_from_counts(minus, m_ - 1);
  }
  return acc;
}

double exact_prob(const OracleEval& ev, double p) { return ev.prob_at(p); }
double exact_pivotal_sum(const OracleEval& ev, double p) { return ev.pivotal_sum_at(p); }
double exact_derivative(const OracleEval& ev, double p) { return ev.derivative_at(p); }

double exact_phi(const Region& S, double p) {
  const int dim = S.dim();
  if (!S.contains(Site{})) throw std::invalid_argument("phi requires 0 in S");
  std::vector<Site> sites = S.sites();
  std::vector<Edge> internal = edges_in(S);
  if (internal.size() > kMaxOracleEdges)
    throw std::invalid_argument("phi: set too large to enumerate exactly");
  const int m = static_cast<int>(internal.size());

  std::vector<std::pair<std::int16_t, std::int16_t>> ends;
  auto index_of = [&](const Site& s) {
    auto it = std::lower_bound(sites.begin(), sites.end(), s);
    return static_cast<int>(it - sites.begin());
  };
  ends.reserve(internal.size());
  for (const Edge& e : internal)
    ends.emplace_back(static_cast<std::int16_t>(index_of(e.base)),
                      static_cast<std::int16_t>(index_of(e.other())));

  // Boundary multiplicity: number of neighbours of x outside S.
  std::vector<int> mult(sites.size(), 0);
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (int axis = 0; axis < dim; ++axis) {
      Site u = Site::unit(axis);
      if (!S.contains(sites[i] + u)) ++mult[i];
      if (!S.contains(sites[i] - u)) ++mult[i];
    }

  const int origin = index_of(Site{});
  std::vector<std::uint64_t> counts(sites.size() * static_cast<std::size_t>(m + 1), 0);
  const std::uint32_t total = 1u << m;
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    MaskView view(ends, static_cast<int>(sites.size()), mask);
    int k = std::popcount(mask);
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (mult[i] && view.connected(origin, static_cast<int>(i)))
        ++counts[i * static_cast<std::size_t>(m + 1) + k];
  }

  double phi = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!mult[i]) continue;
    double prob = eval_counts({counts.data() + i * static_cast<std::size_t>(m + 1),
                               static_cast<std::size_t>(m + 1)},
                              m, p);
    phi += p * static_cast<double>(mult[i]) * prob;
  }
  return phi;
}

std::pair<double, Region> min_phi(int n, double p, int dim) {
  if (n != 1 || dim != 2)
    throw std::invalid_argument("min_phi is implemented for n=1, d=2 only");
  std::vector<Site> others;
  for (const Site& s : Region::box(2, 1).sites())
    if (!(s == Site{})) others.push_back(s);
  double best = 0.0;
  Region best_region = Region::custom(2, {Site{}});
  bool first = true;
  for (std::uint32_t bits = 0; bits < (1u << others.size()); ++bits) {
    std::vector<Site> members{Site{}};
    for (std::size_t j = 0; j < others.size(); ++j)
      if ((bits >> j) & 1u) members.push_back(others[j]);
    Region S = Region::custom(2, members);
    double phi = exact_phi(S, p);
    if (first || phi < best) {
      best = phi;
      best_region = S;
      first = false;
    }
  }
  return {best, best_region};
}

Eq6Report check_eq6(const Region& S, int n, int k, double p, std::uint64_t samples,
                    std::uint64_t seed, int threads) {
  if (k < 1) throw std::invalid_argument("check_eq6 requires k >= 1");
  if (!S.contains(Site{})) throw std::invalid_argument("check_eq6 requires 0 in S");
  const int dim = S.dim();
  Eq6Report rep;
  double phi = exact_phi(S, p);
  rep.rhs = std::pow(phi, k - 1);

  const int radius = n * k;
  if (dim == 2 && radius <= 2) {
    OracleInstance inst = radius == 1 ? lambda1_one_arm_d2() : box2_sink_one_arm_d2();
    OracleEval ev(inst);
    rep.lhs = ev.prob_at(p);
    rep.exact_lhs = true;
    rep.margin = 1e-12;
  } else {
    Estimate est = one_arm(dim, radius, p, samples, seed, threads);
    rep.lhs = est.mean;
    rep.lhs_std_error = est.std_error;
    rep.exact_lhs = false;
    rep.margin = 5.0 * est.std_error;
  }
  rep.holds = rep.lhs <= rep.rhs + rep.margin;
  return rep;
}

InfluenceReport influence_report(const OracleEval& ev, double p) {
  InfluenceReport rep;
  rep.total_influence = ev.pivotal_sum_at(p);
  double prob = ev.prob_at(p);
  rep.variance = prob * (1.0 - prob);
  double denom = p * (1.0 - p);
  rep.bound = denom > 0.0
                  ? std::sqrt(static_cast<double>(ev.edge_count()) * rep.variance / denom)
                  : 0.0;
  rep.bound_holds = denom > 0.0 ? rep.total_influence <= rep.bound + 1e-9 : rep.total_influence == 0.0;
  return rep;
}

namespace {

struct Indexed {
  std::vector<Site> sites;
  std::vector<std::pair<std::int16_t, std::int16_t>> ends;

  explicit Indexed(const Region& within) {
    sites = within.sites();
    std::vector<Edge> edges = edges_in(within);
    if (edges.size() > kMaxOracleEdges)
      throw std::invalid_argument("instance region exceeds the oracle edge cap");
    auto index_of = [&](const Site& s) {
      auto it = std::lower_bound(sites.begin(), sites.end(), s);
      return static_cast<std::int16_t>(it - sites.begin());
    };
    ends.reserve(edges.size());
    for (const Edge& e : edges) ends.emplace_back(index_of(e.base), index_of(e.other()));
  }

  std::vector<int> select(const Region& r) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (r.contains(sites[i])) out.push_back(static_cast<int>(i));
    return out;
  }
};

}  // namespace

OracleInstance from_region_connect(const Region& within, const Region& A, const Region& B,
                                   std::string name) {
  Indexed ix(within);
  auto a = ix.select(A);
  auto b = ix.select(B);
  OracleInstance inst;
  inst.name = std::move(name);
  inst.sites = ix.sites;
  inst.edges = ix.ends;
  inst.multiplicity.assign(inst.edges.size(), 1);
  inst.event = [a, b](const MaskView& view) { return view.any_connected(a, b); };
  return inst;
}

OracleInstance from_region_crossing_count(const Region& within, const Region& inner,
                                          const Region& outer, int min_count, int exact_count,
                                          std::string name) {
  Indexed ix(within);
  auto in_idx = ix.select(inner);
  auto out_idx = ix.select(outer);
  OracleInstance inst;
  inst.name = std::move(name);
  inst.sites = ix.sites;
  inst.edges = ix.ends;
  inst.multiplicity.assign(inst.edges.size(), 1);
  inst.event = [in_idx, out_idx, min_count, exact_count](const MaskView& view) {
    int c = view.count_crossing(in_idx, out_idx);
    return exact_count >= 0 ? c == exact_count : c >= min_count;
  };
  return inst;
}

OracleInstance lambda1_one_arm_d2() {
  return from_region_connect(Region::box(2, 1), Region::custom(2, {Site{}}),
                             Region::boundary(2, 1), "lambda1-one-arm-d2");
}

OracleInstance lambda1_two_point_d2(const Site& x) {
  return from_region_connect(Region::box(2, 1), Region::custom(2, {Site{}}),
                             Region::custom(2, {x}), "lambda1-two-point-d2");
}

OracleInstance lambda1_quarter_face_d2() {
  std::vector<int> signs{1};
  return from_region_connect(Region::box(2, 1), Region::custom(2, {Site{}}),
                             Region::quarter_face(2, 1, 0, 1, signs), "lambda1-quarter-face-d2");
}

Region quadrant_region_d2() {
  std::vector<Site> sites;
  for (int x = 0; x <= 2; ++x)
    for (int y = 0; y <= 2; ++y) sites.push_back(Site::of({x, y}));
  return Region::custom(2, sites);
}

OracleInstance quadrant_two_arm_d2() {
  return from_region_crossing_count(quadrant_region_d2(), Region::box(2, 1),
                                    Region::boundary(2, 2), 2, -1, "quadrant-two-arm-d2");
}

OracleInstance quadrant_box_to_boundary_d2() {
  return from_region_connect(quadrant_region_d2(), Region::box(2, 1), Region::boundary(2, 2),
                             "quadrant-box-to-boundary-d2");
}

OracleInstance easy_way_d2(int N) {
  std::vector<int> dims{3 * N + 1, N + 1};
  Region rect = Region::rectangle(2, dims);
  std::vector<Site> lo, hi;
  for (const Site& s : rect.sites()) {
    if (s.c[1] == 0) lo.push_back(s);
    if (s.c[1] == N) hi.push_back(s);
  }
  return from_region_connect(rect, Region::custom(2, lo), Region::custom(2, hi),
                             "easy-way-d2-N" + std::to_string(N));
}

OracleInstance rect_crossing_d2(int nx, int ny) {
  std::vector<int> dims{nx, ny};
  Region rect = Region::rectangle(2, dims);
  std::vector<Site> lo, hi;
  for (const Site& s : rect.sites()) {
    if (s.c[0] == 0) lo.push_back(s);
    if (s.c[0] == nx - 1) hi.push_back(s);
  }
  return from_region_connect(rect, Region::custom(2, lo), Region::custom(2, hi),
                             "rect-crossing-" + std::to_string(nx) + "x" + std::to_string(ny));
}

OracleInstance dictator() {
  OracleInstance inst;
  inst.name = "dictator";
  inst.sites = {Site::of({0, 0}), Site::of({1, 0})};
  inst.edges = {{0, 1}};
  inst.multiplicity = {1};
  inst.event = [](const MaskView& view) { return view.edge_open(0); };
  return inst;
}

namespace {

// box(2) with boundary(2) contracted to one sink vertex. A path confined to
// box(2) meets boundary(2) exactly when it reaches the sink, so the event is
// unchanged; edges inside boundary(2) become self-loops and are dropped, and
// the two parallel edges from each corner of box(1) merge into one edge of
// multiplicity 2.
OracleInstance box2_sink_instance(bool seeds_are_box1, std::string name) {
  Region inner = Region::box(2, 1);
  std::vector<Site> sites = inner.sites();  // 9 sites, lexicographic
  OracleInstance inst;
  inst.name = std::move(name);
  inst.sites = sites;
  const int sink = static_cast<int>(sites.size());
  inst.sites.push_back(Site::of({99, 99}));  // synthetic sink marker

  auto index_of = [&](const Site& s) {
    auto it = std::lower_bound(sites.begin(), sites.end(), s);
    return static_cast<std::int16_t>(it - sites.begin());
  };
  for (const Edge& e : edges_in(inner))
    inst.edges.emplace_back(index_of(e.base), index_of(e.other()));
  inst.multiplicity.assign(inst.edges.size(), 1);
  for (const Site& s : sites) {
    int out = 0;
    for (int axis = 0; axis < 2; ++axis) {
      Site u = Site::unit(axis);
      if (!inner.contains(s + u)) ++out;
      if (!inner.contains(s - u)) ++out;
    }
    if (out > 0) {
      inst.edges.emplace_back(index_of(s), static_cast<std::int16_t>(sink));
      inst.multiplicity.push_back(static_cast<std::uint8_t>(out));
    }
  }

  std::vector<int> seeds;
  if (seeds_are_box1) {
    for (std::size_t i = 0; i < sites.size(); ++i) seeds.push_back(static_cast<int>(i));
  } else {
    seeds.push_back(index_of(Site{}));
  }
  std::vector<int> target{sink};
  inst.event = [seeds, target](const MaskView& view) {
    return view.any_connected(seeds, target);
  };
  return inst;
}

}  // namespace

OracleInstance box2_sink_one_arm_d2() { return box2_sink_instance(false, "box2-sink-one-arm-d2"); }

OracleInstance box2_sink_box_to_boundary_d2() {
  return box2_sink_instance(true, "box2-sink-box-to-boundary-d2");
}

}  // namespace perc::oracle
