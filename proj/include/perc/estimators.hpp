#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "perc/connectivity.hpp"
#include "perc/lattice.hpp"
#include "perc/sampler.hpp"

namespace perc {

// Monte Carlo event-probability estimate. `count` successes out of `samples`;
// the standard error is the plain binomial one.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  std::string manifest;
};

inline Estimate make_estimate(std::uint64_t count, std::uint64_t samples, std::uint64_t seed,
                              std::string manifest = {}) {
  Estimate e;
  e.count = count;
  e.samples = samples;
  e.seed = seed;
  e.mean = samples ? static_cast<double>(count) / static_cast<double>(samples) : 0.0;
  e.std_error = samples ? std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(samples)) : 0.0;
  e.manifest = std::move(manifest);
  return e;
}

// Deterministic parallel sampling: [0, samples) is split into contiguous
// chunks, each worker accumulates integer counters, and the chunk sums are
// added at the end. Because every counter update depends only on the sample
// index, the result is bit-identical for any worker count.
template <class StateFactory, class Body>
std::vector<std::uint64_t> run_counters(std::uint64_t samples, int threads,
                                        std::size_t n_counters, StateFactory make_state,
                                        Body body) {
  std::vector<std::uint64_t> out(n_counters, 0);
  if (samples == 0) return out;
  int workers = std::max(1, threads);
  workers = static_cast<int>(std::min<std::uint64_t>(workers, samples));
  if (workers == 1) {
    auto state = make_state();
    for (std::uint64_t i = 0; i < samples; ++i)
      body(state, i, std::span<std::uint64_t>(out));
    return out;
  }
  std::vector<std::vector<std::uint64_t>> partial(
      static_cast<std::size_t>(workers), std::vector<std::uint64_t>(n_counters, 0));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      auto state = make_state();
      auto& acc = partial[static_cast<std::size_t>(w)];
      const std::uint64_t lo = samples * static_cast<std::uint64_t>(w) / workers;
      const std::uint64_t hi = samples * (static_cast<std::uint64_t>(w) + 1) / workers;
      for (std::uint64_t i = lo; i < hi; ++i)
        body(state, i, std::span<std::uint64_t>(acc));
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& part : partial)
    for (std::size_t j = 0; j < n_counters; ++j) out[j] += part[j];
  return out;
}

// --- event descriptors ---

struct OneArmEvent {
  int dim = 2, n = 1;
};
struct BoxToBoundaryEvent {
  int dim = 2, m = 1, n = 2;  // box(m) <-> boundary(n) inside box(n)
};
struct CrossingCountEvent {
  Region within;
  Region inner;
  Region outer;
  int min_count = 2;
};
struct CrossingEvent {
  int dim = 2;
  std::vector<int> dims;  // site extents per axis
  int axis = 0;
};
struct EasyWayEvent {
  int dim = 2, N = 1;
};
struct TwoPointEvent {
  int dim = 2, n = 1;
  Site x;
};
struct ConstEvent {
  bool value = true;
};

using EventSpec = std::variant<OneArmEvent, BoxToBoundaryEvent, CrossingCountEvent, CrossingEvent,
                               EasyWayEvent, TwoPointEvent, ConstEvent>;

std::string event_name(const EventSpec& spec);
Region event_region(const EventSpec& spec);

// Prepared evaluation context: region graph plus precomputed index sets.
// Workers carry the per-thread scratch.
class EventContext {
 public:
  explicit EventContext(EventSpec spec);

  const RegionGraph& graph() const { return graph_; }
  const EventSpec& spec() const { return spec_; }

  class Worker {
   public:
    explicit Worker(const EventContext& ctx)
        : ctx_(&ctx), reach_(ctx.graph_), counter_(ctx.graph_) {}

    template <class Cfg>
    bool eval(const Cfg& cfg) {
      switch (ctx_->kind_) {
        case Kind::constant:
          return ctx_->const_value_;
        case Kind::reach:
          return reach_.reachable(cfg, ctx_->seeds_, ctx_->target_);
        case Kind::count:
          return counter_.count(cfg, ctx_->inner_, ctx_->outer_) >= ctx_->min_count_;
      }
      return false;
    }

   private:
    const EventContext* ctx_;
    Reach reach_;
    CrossingCounter counter_;
  };

 private:
  enum class Kind { constant, reach, count };
  friend class Worker;

  EventSpec spec_;
  RegionGraph graph_;
  Kind kind_ = Kind::constant;
  bool const_value_ = false;
  std::vector<std::int32_t> seeds_;
  std::vector<std::uint8_t> target_;
  std::vector<std::int32_t> inner_, outer_;
  int min_count_ = 0;
};

// --- estimators ---

Estimate estimate_event(const EventSpec& spec, double p, std::uint64_t samples,
                        std::uint64_t seed, int threads = 1);

// P_p[0 <-> boundary(n)], paths confined to box(n).
Estimate one_arm(int dim, int n, double p, std::uint64_t samples, std::uint64_t seed,
                 int threads = 1);

// P_p[A_2(m,n)]: at least two disjoint clusters of box(n) meeting both box(m)
// and boundary(n).
Estimate two_arm(int dim, int m, int n, double p, std::uint64_t samples, std::uint64_t seed,
                 int threads = 1);

// (P[box(k) <-> boundary(N)], P[box(k) <-> F(N) inside box(N)]) on shared samples.
std::pair<Estimate, Estimate> quarter_face_prob(int dim, int k, int N, double p,
                                                std::uint64_t samples, std::uint64_t seed,
                                                int threads = 1);

// Truncation proxy for the slab theta: probability that (-n,0,...,0) reaches
// the lateral truncation boundary of {-n..n} x {-R..R}^(d-1). Requires d >= 3
// and R >= 4n; R travels with the result.
Estimate slab_theta(int dim, double p, int n, int R, std::uint64_t samples, std::uint64_t seed,
                    int threads = 1);

// P_p[0 <-> x inside box(n)].
Estimate two_point(int dim, const Site& x, int n, double p, std::uint64_t samples,
                   std::uint64_t seed, int threads = 1);

struct SweepCurve {
  std::vector<double> p_grid;
  std::vector<Estimate> estimates;  // one per grid point, same weight field
};

// Estimates the event across the p grid under one weight field per sample, so
// monotone events give exactly non-decreasing counts.
SweepCurve sweep_event(const EventSpec& spec, std::span<const double> p_grid,
                       std::uint64_t samples, std::uint64_t seed, int threads = 1);

// Returns true iff the curve's success counts never decrease along the grid.
bool pathwise_monotone(const SweepCurve& curve);

// f(p) = P_p[box(floor(n^beta)) <-> boundary(n)] under the grand coupling.
SweepCurve f_curve(int dim, int n, double beta, std::span<const double> p_grid,
                   std::uint64_t samples, std::uint64_t seed, int threads = 1);

struct EdgeEstimate {
  Edge edge;
  std::string stratum;  // "inner", "bulk", "outer"
  Estimate estimate;
};
struct PivotalScan {
  std::vector<EdgeEstimate> edges;
  int argmax = -1;
};

// Closed-pivotal probabilities for {box(m) <-> boundary(n)} over a
// deterministic stratified edge sample (near boundary(m), in the bulk of the
// annulus, near boundary(n)); returns all per-edge estimates plus the argmax.
PivotalScan max_closed_pivotal(int dim, int m, int n, double p, std::uint64_t samples,
                               std::uint64_t seed, int edge_sample, int threads = 1);

// P[e closed pivotal] for the event {inner <-> outer inside within}; ground
// truth cross-checks use this against the oracle per-edge values.
Estimate closed_pivotal_prob(const Region& within, const Region& inner, const Region& outer,
                             const Edge& e, double p, std::uint64_t samples, std::uint64_t seed,
                             int threads = 1);

struct PhiEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
};

// phi_p(S) by Monte Carlo: p times the sum over boundary edges of the
// estimated P_p[0 <-> x inside S], all on shared samples.
PhiEstimate phi_mc(const Region& S, double p, std::uint64_t samples, std::uint64_t seed,
                   int threads = 1);

struct RussoMc {
  double derivative = 0.0, derivative_std_error = 0.0;
  double pivotal_sum = 0.0, pivotal_sum_std_error = 0.0;
  double step = 0.0;
};

// Central finite difference of the event probability over p +- h under the
// grand coupling, together with the Monte Carlo estimate of sum_e P[e pivotal].
RussoMc russo_derivative_mc(const EventSpec& spec, double p, std::uint64_t samples,
                            std::uint64_t seed, double h = 0.02, int threads = 1);

// --- correlation length ---

enum class XiRegime { subcritical, supercritical };

struct XiPoint {
  int n = 0;
  double mean = 0.0, std_error = 0.0;
};

struct CorrelationLengthFit {
  double p = 0.0;
  XiRegime regime = XiRegime::subcritical;
  std::vector<XiPoint> points;
  std::vector<int> dropped;  // radii whose estimates hit 0 or 1
  double slope = 0.0, slope_std_error = 0.0;
  double xi = 0.0, xi_std_error = 0.0;
  double r2 = 0.0;
  bool ok = false;
  bool infinite = false;  // non-positive slope
  int truncation_m = 4;   // supercritical proxy: {0 <-> bd(n), 0 <-/-> bd(Mn)}
  std::string note;
};

// Weighted least squares of -log P against n; xi = 1/slope.
CorrelationLengthFit fit_xi_points(std::vector<XiPoint> points, double p, XiRegime regime,
                                   int truncation_m);
CorrelationLengthFit fit_xi(int dim, double p, std::span<const int> n_list,
                            std::uint64_t samples, std::uint64_t seed, XiRegime regime,
                            int truncation_m = 4, int threads = 1);

struct CriticalReference {
  int dim = 2;
  double p_c = 0.5;
  std::string provenance;  // "external: ..." or "fitted: ..."
};

// d=2 defaults to 1/2 (self-duality, validated by the acceptance suite);
// other dimensions must supply a value or fit one.
CriticalReference critical_reference(int dim, double user_value = 0.0);
CriticalReference fit_critical_reference(int dim, int n, double beta, double p_lo, double p_hi,
                                         int grid_points, std::uint64_t samples,
                                         std::uint64_t seed, int threads = 1);

struct PnResult {
  double p = 0.0;
  double xi = 0.0, xi_std_error = 0.0;
  bool converged = false;
  int evals = 0;
  double lo = 0.0, hi = 0.0;  // final bracket
};

// Bisection for the smallest p < p_c with xi_p = n, within tolerance*n.
// `budget` caps the number of fit_xi evaluations; when it runs out the best
// bracket is returned with converged = false.
PnResult locate_pn(int dim, int n, double tolerance, int budget, const CriticalReference& ref,
                   std::uint64_t samples, std::uint64_t seed, int threads = 1);

struct NuPoint {
  double offset = 0.0;  // p_c - p
  double xi = 0.0, xi_std_error = 0.0;
};

struct NuFit {
  double exponent = 0.0, exponent_std_error = 0.0;
  double r2 = 0.0;
  bool ok = false;
  std::vector<NuPoint> points;
  std::vector<double> dropped_offsets;
  double reference = 0.0;  // conjectured value, reported only as a diagnostic
};

// Log-log regression of xi against the offset below p_c. Diagnostic only:
// never a hard pass/fail.
NuFit fit_nu_points(std::vector<NuPoint> points, int dim);
NuFit fit_nu(int dim, std::span<const double> offsets, int n_budget, std::uint64_t samples,
             std::uint64_t seed, const CriticalReference& ref, int threads = 1);

}  // namespace perc
