#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "perc/lattice.hpp"

namespace perc::oracle {

// Hard cap: 2^22 configurations keeps every oracle call around a second.
// Callers needing larger ground truth must restructure the instance.
inline constexpr int kMaxOracleEdges = 22;
// Up to here probabilities expand into exact integer-coefficient polynomials.
inline constexpr int kMaxPolyEdges = 16;

// Integer-coefficient polynomial in p. Expansions stay well inside int64 for
// kMaxPolyEdges edges.
struct IntPoly {
  std::vector<long long> c;  // c[i] * p^i

  double eval(double p) const {
    double acc = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * p + static_cast<double>(c[i]);
    return acc;
  }
  IntPoly derivative() const {
    IntPoly d;
    if (c.size() > 1) {
      d.c.resize(c.size() - 1);
      for (std::size_t i = 1; i < c.size(); ++i)
        d.c[i - 1] = c[i] * static_cast<long long>(i);
    }
    return d;
  }
  void trim() {
    while (!c.empty() && c.back() == 0) c.pop_back();
  }
  friend bool operator==(IntPoly a, IntPoly b) {
    a.trim();
    b.trim();
    return a.c == b.c;
  }
  friend IntPoly operator+(const IntPoly& a, const IntPoly& b) {
    IntPoly r;
    r.c.resize(std::max(a.c.size(), b.c.size()), 0);
    for (std::size_t i = 0; i < a.c.size(); ++i) r.c[i] += a.c[i];
    for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] += b.c[i];
    return r;
  }
  friend IntPoly operator-(const IntPoly& a, const IntPoly& b) {
    IntPoly r;
    r.c.resize(std::max(a.c.size(), b.c.size()), 0);
    for (std::size_t i = 0; i < a.c.size(); ++i) r.c[i] += a.c[i];
    for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] -= b.c[i];
    return r;
  }
};

// Connectivity of one enumerated configuration, exposed to event predicates.
// Deliberately self-contained: the oracle never routes through the Monte Carlo
// cluster code it is used to validate.
class MaskView {
 public:
  MaskView(std::span<const std::pair<std::int16_t, std::int16_t>> edges, int site_count,
           std::uint32_t mask);

  std::uint32_t mask() const { return mask_; }
  int site_count() const { return static_cast<int>(root_.size()); }
  bool edge_open(int e) const { return (mask_ >> e) & 1u; }

  bool connected(int a, int b) const { return root_[a] == root_[b]; }
  bool any_connected(std::span<const int> A, std::span<const int> B) const;
  // Distinct components meeting both index sets.
  int count_crossing(std::span<const int> inner, std::span<const int> outer) const;

 private:
  std::uint32_t mask_;
  std::vector<std::int16_t> root_;
};

using EventFn = std::function<bool(const MaskView&)>;

// A brute-force-enumerable percolation event: explicit edge list over an
// explicit site set, plus a predicate over open-edge subsets. Edges carry a
// multiplicity so that parallel bundles produced by contracting a target set
// stay exact: an edge of multiplicity w opens with probability 1-(1-p)^w.
struct OracleInstance {
  std::string name;
  std::vector<Site> sites;
  std::vector<std::pair<std::int16_t, std::int16_t>> edges;
  std::vector<std::uint8_t> multiplicity;  // empty means all 1 (uniform)
  EventFn event;

  bool uniform() const;
  int index_of(const Site& s) const;  // -1 if absent
};

// Truth table plus popcount-resolved counts for one instance; every exact
// quantity below is derived from these.
class OracleEval {
 public:
  explicit OracleEval(OracleInstance inst);

  const OracleInstance& instance() const { return inst_; }
  int edge_count() const { return m_; }
  bool value(std::uint32_t mask) const {
    return (table_[mask >> 6] >> (mask & 63u)) & 1u;
  }

  double prob_at(double p) const;

  // The remaining quantities require a uniform instance.
  IntPoly prob_poly() const;
  double derivative_at(double p) const;
  IntPoly edge_pivotal_poly(int e) const;              // unsigned
  double edge_pivotal_at(int e, double p) const;       // P[e pivotal]
  double edge_plus_pivotal_at(int e, double p) const;  // P[omega^e in A, omega_e not in A]
  double edge_closed_pivotal_at(int e, double p) const { return (1.0 - p) * edge_plus_pivotal_at(e, p); }
  double pivotal_sum_at(double p) const;         // total influence I(f)
  double signed_pivotal_sum_at(double p) const;  // Margulis-Russo right-hand side
  IntPoly signed_pivotal_sum_poly() const;

 private:
  void require_uniform(const char* what) const;

  OracleInstance inst_;
  int m_ = 0;
  std::vector<std::uint64_t> table_;
  std::vector<std::uint64_t> sat_by_popcount_;  // uniform path
  // Non-uniform path: counts bucketed by (uniform popcount, subset of special edges).
  std::vector<int> special_edges_;
  std::vector<std::uint64_t> sat_by_bucket_;  // [k * 2^s + special_mask]
  // Per-edge pivotality counts by popcount of the other edges (e forced closed).
  std::vector<std::uint64_t> plus_piv_, minus_piv_;  // [e * m + k]
};

double exact_prob(const OracleEval& ev, double p);
double exact_pivotal_sum(const OracleEval& ev, double p);
double exact_derivative(const OracleEval& ev, double p);

// phi_p(S) = sum over boundary edges {x~y, x in S, y notin S} of p * P_p[0 <-> x in S],
// by one exact enumeration of the edges inside S.
double exact_phi(const Region& S, double p);

// Minimum of phi_p over all S with 0 in S subset of box(1), d = 2, with an
// argmin witness. 2^8 candidate sets, each enumerable.
std::pair<double, Region> min_phi(int n, double p, int dim);

struct Eq6Report {
  double lhs = 0.0;  // P_p[0 <-> boundary(n*k) inside box(n*k)]
  double rhs = 0.0;  // phi_p(S)^(k-1)
  bool holds = false;
  bool exact_lhs = false;
  double lhs_std_error = 0.0;  // 0 when exact
  double margin = 0.0;         // tolerance applied to `holds`
};

// Checks P_p[0 <-> boundary(nk)] <= phi_p(S)^(k-1). The left side is exact for
// d=2, n=1, k<=2 (via the contracted box(2) instance); otherwise it is a Monte
// Carlo estimate and `holds` is asserted with a 5 sigma margin.
Eq6Report check_eq6(const Region& S, int n, int k, double p, std::uint64_t samples,
                    std::uint64_t seed, int threads);

struct InfluenceReport {
  double total_influence = 0.0;
  double variance = 0.0;
  double bound = 0.0;  // sqrt(|E| var / (p(1-p)))
  bool bound_holds = false;
};

InfluenceReport influence_report(const OracleEval& ev, double p);

// --- designated instances ---

// Event: (A inside within) <-> (B inside within). Throws if edges_in(within)
// exceeds the oracle cap.
OracleInstance from_region_connect(const Region& within, const Region& A, const Region& B,
                                   std::string name);

// Event: number of clusters of `within` meeting both `inner` and `outer` is
// >= min_count (or == exact_count when exact_count >= 0).
OracleInstance from_region_crossing_count(const Region& within, const Region& inner,
                                          const Region& outer, int min_count, int exact_count,
                                          std::string name);

OracleInstance lambda1_one_arm_d2();
OracleInstance lambda1_two_point_d2(const Site& x);
OracleInstance lambda1_quarter_face_d2();
// Quadrant {x>=0, y>=0} of box(2): 12 edges hosting the reduced two-arm and
// closed-pivotal ground truths for (m,n) = (1,2).
Region quadrant_region_d2();
OracleInstance quadrant_two_arm_d2();
OracleInstance quadrant_box_to_boundary_d2();
OracleInstance easy_way_d2(int N);
OracleInstance rect_crossing_d2(int nx, int ny);
OracleInstance dictator();
// box(2) one-arm with boundary(2) contracted to a sink and parallel bundles
// merged: 20 edges, exactly P_p[0 <-> boundary(2) inside box(2)].
OracleInstance box2_sink_one_arm_d2();
OracleInstance box2_sink_box_to_boundary_d2();

}  // namespace perc::oracle
