#include "perc/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace perc {

namespace {

// Regions above this are rejected as effectively unbounded for sampling.
constexpr std::uint64_t kMaxEventSites = 1ull << 24;

template <class... Parts>
std::string manifest(const Parts&... parts) {
  std::ostringstream os;
  ((os << parts), ...);
  return os.str();
}

struct WeightedLine {
  double slope = 0.0, slope_se = 0.0, intercept = 0.0, r2 = 0.0;
  bool ok = false;
};

// Weighted least squares y = a + b x with per-point sigma.
WeightedLine weighted_line(std::span<const double> x, std::span<const double> y,
                           std::span<const double> sigma) {
  WeightedLine fit;
  const std::size_t n = x.size();
  if (n < 2) return fit;
  double sw = 0, swx = 0, swy = 0;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = sigma[i] > 0 ? sigma[i] : 1e-12;
    w[i] = 1.0 / (s * s);
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
  }
  const double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  if (sxx <= 0) return fit;
  fit.slope = sxy / sxx;
  fit.slope_se = std::sqrt(1.0 / sxx);
  fit.intercept = ybar - fit.slope * xbar;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = fit.intercept + fit.slope * x[i];
    ss_res += w[i] * (y[i] - pred) * (y[i] - pred);
    ss_tot += w[i] * (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.ok = true;
  return fit;
}

void check_p(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("p must be in [0,1]");
}

void check_samples(std::uint64_t samples) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
}

}  // namespace

std::string event_name(const EventSpec& spec) {
  struct Visitor {
    std::string operator()(const OneArmEvent& e) const {
      return manifest("one-arm d=", e.dim, " n=", e.n);
    }
    std::string operator()(const BoxToBoundaryEvent& e) const {
      return manifest("box-to-boundary d=", e.dim, " m=", e.m, " n=", e.n);
    }
    std::string operator()(const CrossingCountEvent& e) const {
      return manifest("crossing-count within=", e.within.to_text(), " inner=", e.inner.to_text(),
                      " outer=", e.outer.to_text(), " min=", e.min_count);
    }
    std::string operator()(const CrossingEvent& e) const {
      std::string dims;
      for (std::size_t i = 0; i < e.dims.size(); ++i)
        dims += (i ? "x" : "") + std::to_string(e.dims[i]);
      return manifest("crossing d=", e.dim, " dims=", dims, " axis=", e.axis);
    }
    std::string operator()(const EasyWayEvent& e) const {
      return manifest("easy-way d=", e.dim, " N=", e.N);
    }
    std::string operator()(const TwoPointEvent& e) const {
      return manifest("two-point d=", e.dim, " n=", e.n, " x=", to_string(e.x, e.dim));
    }
    std::string operator()(const ConstEvent& e) const {
      return manifest("const value=", e.value);
    }
  };
  return std::visit(Visitor{}, spec);
}

Region event_region(const EventSpec& spec) {
  struct Visitor {
    Region operator()(const OneArmEvent& e) const { return Region::box(e.dim, e.n); }
    Region operator()(const BoxToBoundaryEvent& e) const { return Region::box(e.dim, e.n); }
    Region operator()(const CrossingCountEvent& e) const { return e.within; }
    Region operator()(const CrossingEvent& e) const { return Region::rectangle(e.dim, e.dims); }
    Region operator()(const EasyWayEvent& e) const {
      std::vector<int> dims(static_cast<std::size_t>(e.dim), 3 * e.N + 1);
      dims.back() = e.N + 1;
      return Region::rectangle(e.dim, dims);
    }
    Region operator()(const TwoPointEvent& e) const { return Region::box(e.dim, e.n); }
    Region operator()(const ConstEvent&) const { return Region::box(2, 0); }
  };
  return std::visit(Visitor{}, spec);
}

EventContext::EventContext(EventSpec spec)
    : spec_(std::move(spec)), graph_([&] {
        Region r = event_region(spec_);
        if (r.site_count() > kMaxEventSites)
          throw std::invalid_argument("event region too large: " + r.to_text());
        return RegionGraph(r);
      }()) {
  struct Build {
    EventContext& ctx;
    void operator()(const OneArmEvent& e) {
      ctx.kind_ = Kind::reach;
      ctx.seeds_ = ctx.graph_.indices_where([](const Site& s) { return s == Site{}; });
      ctx.target_ =
          ctx.graph_.flags_where([&](const Site& s) { return cheb_norm(s, e.dim) == e.n; });
      if (e.n < 1) throw std::invalid_argument("one-arm requires n >= 1");
    }
    void operator()(const BoxToBoundaryEvent& e) {
      if (e.m < 1 || e.m >= e.n)
        throw std::invalid_argument("box-to-boundary requires 1 <= m < n");
      ctx.kind_ = Kind::reach;
      ctx.seeds_ =
          ctx.graph_.indices_where([&](const Site& s) { return cheb_norm(s, e.dim) <= e.m; });
      ctx.target_ =
          ctx.graph_.flags_where([&](const Site& s) { return cheb_norm(s, e.dim) == e.n; });
    }
    void operator()(const CrossingCountEvent& e) {
      ctx.kind_ = Kind::count;
      ctx.inner_ = ctx.graph_.indices_where([&](const Site& s) { return e.inner.contains(s); });
      ctx.outer_ = ctx.graph_.indices_where([&](const Site& s) { return e.outer.contains(s); });
      ctx.min_count_ = e.min_count;
    }
    void operator()(const CrossingEvent& e) {
      if (e.axis < 0 || e.axis >= e.dim) throw std::invalid_argument("crossing axis out of range");
      ctx.kind_ = Kind::reach;
      int hi = e.dims[static_cast<std::size_t>(e.axis)] - 1;
      ctx.seeds_ = ctx.graph_.indices_where([&](const Site& s) { return s.c[e.axis] == 0; });
      ctx.target_ = ctx.graph_.flags_where([&](const Site& s) { return s.c[e.axis] == hi; });
    }
    void operator()(const EasyWayEvent& e) {
      if (e.N < 1) throw std::invalid_argument("easy-way requires N >= 1");
      ctx.kind_ = Kind::reach;
      int last = e.dim - 1;
      ctx.seeds_ = ctx.graph_.indices_where([&](const Site& s) { return s.c[last] == 0; });
      ctx.target_ = ctx.graph_.flags_where([&](const Site& s) { return s.c[last] == e.N; });
    }
    void operator()(const TwoPointEvent& e) {
      if (cheb_norm(e.x, e.dim) > e.n)
        throw std::invalid_argument("two-point requires x in box(n)");
      ctx.kind_ = Kind::reach;
      ctx.seeds_ = ctx.graph_.indices_where([](const Site& s) { return s == Site{}; });
      ctx.target_ = ctx.graph_.flags_where([&](const Site& s) { return s == e.x; });
    }
    void operator()(const ConstEvent& e) {
      ctx.kind_ = Kind::constant;
      ctx.const_value_ = e.value;
    }
  };
  std::visit(Build{*this}, spec_);
}

Estimate estimate_event(const EventSpec& spec, double p, std::uint64_t samples,
                        std::uint64_t seed, int threads) {
  check_p(p);
  check_samples(samples);
  EventContext ctx(spec);
  auto counts = run_counters(
      samples, threads, 1, [&] { return EventContext::Worker(ctx); },
      [&](EventContext::Worker& worker, std::uint64_t i, std::span<std::uint64_t> acc) {
        Config cfg(EdgeWeights{sample_seed(seed, i), 0}, p);
        if (worker.eval(cfg)) ++acc[0];
      });
  return make_estimate(counts[0], samples, seed,
                       manifest(event_name(spec), " p=", p, " samples=", samples, " seed=", seed));
}

Estimate one_arm(int dim, int n, double p, std::uint64_t samples, std::uint64_t seed,
                 int threads) {
  return estimate_event(OneArmEvent{dim, n}, p, samples, seed, threads);
}

Estimate two_arm(int dim, int m, int n, double p, std::uint64_t samples, std::uint64_t seed,
                 int threads) {
  if (m < 1 || m >= n) throw std::invalid_argument("two_arm requires 1 <= m < n");
  CrossingCountEvent ev{Region::box(dim, n), Region::box(dim, m), Region::boundary(dim, n), 2};
  return estimate_event(EventSpec{std::move(ev)}, p, samples, seed, threads);
}

std::pair<Estimate, Estimate> quarter_face_prob(int dim, int k, int N, double p,
                                                std::uint64_t samples, std::uint64_t seed,
                                                int threads) {
  if (k < 0 || k >= N) throw std::invalid_argument("quarter_face_prob requires 0 <= k < N");
  check_p(p);
  check_samples(samples);
  RegionGraph g(Region::box(dim, N));
  auto seeds = g.indices_where([&](const Site& s) { return cheb_norm(s, dim) <= k; });
  auto bdry = g.flags_where([&](const Site& s) { return cheb_norm(s, dim) == N; });
  std::vector<int> tsigns(static_cast<std::size_t>(dim - 1), 1);
  Region face = Region::quarter_face(dim, N, 0, 1, tsigns);
  auto face_flag = g.flags_where([&](const Site& s) { return face.contains(s); });

  auto counts = run_counters(
      samples, threads, 2, [&] { return Reach(g); },
      [&](Reach& reach, std::uint64_t i, std::span<std::uint64_t> acc) {
        Config cfg(EdgeWeights{sample_seed(seed, i), 0}, p);
        const auto& cluster = reach.cluster(cfg, seeds);
        bool hit_bdry = false, hit_face = false;
        for (std::int32_t v : cluster) {
          hit_bdry |= bdry[static_cast<std::size_t>(v)] != 0;
          hit_face |= face_flag[static_cast<std::size_t>(v)] != 0;
          if (hit_bdry && hit_face) break;
        }
        if (hit_bdry) ++acc[0];
        if (hit_face) ++acc[1];
      });
  std::string base = manifest("quarter-face d=", dim, " k=", k, " N=", N, " p=", p,
                              " samples=", samples, " seed=", seed);
  return {make_estimate(counts[0], samples, seed, base + " target=boundary"),
          make_estimate(counts[1], samples, seed, base + " target=face")};
}

Estimate slab_theta(int dim, double p, int n, int R, std::uint64_t samples, std::uint64_t seed,
                    int threads) {
  if (dim < 3) throw std::invalid_argument("slab_theta requires d >= 3");
  if (n < 1) throw std::invalid_argument("slab_theta requires n >= 1");
  if (R < 4 * n) throw std::invalid_argument("slab_theta requires R >= 4n");
  check_p(p);
  check_samples(samples);
  std::vector<int> dims(static_cast<std::size_t>(dim), 2 * R + 1);
  dims[0] = 2 * n + 1;
  Site shift;
  shift.c[0] = -n;
  for (int i = 1; i < dim; ++i) shift.c[i] = -R;
  Region region = Region::rectangle(dim, dims).translated(shift);
  if (region.site_count() > kMaxEventSites)
    throw std::invalid_argument("slab too large: " + region.to_text());
  RegionGraph g(region);
  Site source;
  source.c[0] = -n;
  auto seeds = g.indices_where([&](const Site& s) { return s == source; });
  auto lateral = g.flags_where([&](const Site& s) {
    for (int i = 1; i < dim; ++i)
      if (std::abs(s.c[i]) == R) return true;
    return false;
  });
  auto counts = run_counters(
      samples, threads, 1, [&] { return Reach(g); },
      [&](Reach& reach, std::uint64_t i, std::span<std::uint64_t> acc) {
        Config cfg(EdgeWeights{sample_seed(seed, i), 0}, p);
        if (reach.reachable(cfg, seeds, lateral)) ++acc[0];
      });
  return make_estimate(counts[0], samples, seed,
                       manifest("slab-theta d=", dim, " n=", n, " R=", R, " p=", p,
                                " samples=", samples, " seed=", seed));
}

Estimate two_point(int dim, const Site& x, int n, double p, std::uint64_t samples,
                   std::uint64_t seed, int threads) {
  return estimate_event(TwoPointEvent{dim, n, x}, p, samples, seed, threads);
}

SweepCurve sweep_event(const EventSpec& spec, std::span<const double> p_grid,
                       std::uint64_t samples, std::uint64_t seed, int threads) {
  check_samples(samples);
  if (p_grid.empty()) throw std::invalid_argument("empty p grid");
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    check_p(p_grid[i]);
    if (i && p_grid[i] < p_grid[i - 1]) throw std::invalid_argument("p grid must be sorted");
  }
  EventContext ctx(spec);
  std::vector<double> grid(p_grid.begin(), p_grid.end());
  auto counts = run_counters(
      samples, threads, grid.size(), [&] { return EventContext::Worker(ctx); },
      [&](EventContext::Worker& worker, std::uint64_t i, std::span<std::uint64_t> acc) {
        EdgeWeights w{sample_seed(seed, i), 0};
        for (std::size_t j = 0; j < grid.size(); ++j) {
          Config cfg(w, grid[j]);
          if (worker.eval(cfg)) ++acc[j];
        }
      });
  SweepCurve curve;
  curve.p_grid = grid;
  curve.estimates.reserve(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    curve.estimates.push_back(make_estimate(
        counts[j], samples, seed,
        manifest(event_name(spec), " p=", grid[j], " samples=", samples, " seed=", seed,
                 " coupling=grand")));
  return curve;
}

bool pathwise_monotone(const SweepCurve& curve) {
  for (std::size_t j = 1; j < curve.estimates.size(); ++j)
    if (curve.estimates[j].count < curve.estimates[j - 1].count) return false;
  return true;
}

SweepCurve f_curve(int dim, int n, double beta, std::span<const double> p_grid,
                   std::uint64_t samples, std::uint64_t seed, int threads) {
  if (beta <= 0.0 || beta >= 1.0) throw std::invalid_argument("f_curve requires 0 < beta < 1");
  if (n < 2) throw std::invalid_argument("f_curve requires n >= 2");
  int m = std::max(1, static_cast<int>(std::floor(std::pow(n, beta))));
  return sweep_event(EventSpec{BoxToBoundaryEvent{dim, m, n}}, p_grid, samples, seed, threads);
}

namespace {

// Deterministic stratified edge sample for the pivotal scan: radial and
// transverse edges on the +x axis at depths near boundary(m), in the middle of
// the annulus, and near boundary(n). Mirrors the two cases rho >= m^(1/4) and
// rho <= m^(1/4) in the geometric argument.
std::vector<std::pair<Edge, std::string>> stratified_edges(int dim, int m, int n,
                                                           int edge_sample) {
  std::vector<std::pair<Edge, std::string>> out;
  auto add = [&](int r, const char* stratum) {
    if (r < 0 || r >= n) return;
    Site base;
    base.c[0] = static_cast<Coord>(r);
    Edge radial{base, 0};
    out.emplace_back(radial, stratum);
    if (dim >= 2) {
      Edge transverse{base, 1};
      if (r <= n - 1) out.emplace_back(transverse, stratum);
    }
  };
  add(m - 1, "inner");
  add(m, "inner");
  add(m + 1, "inner");
  int mid = (m + n) / 2;
  add(mid, "bulk");
  add(mid + 1, "bulk");
  add(n - 2, "outer");
  add(n - 1, "outer");
  // Dedupe, preserve order.
  std::vector<std::pair<Edge, std::string>> uniq;
  for (auto& item : out) {
    bool seen = false;
    for (auto& u : uniq) seen |= u.first == item.first;
    if (!seen) uniq.push_back(std::move(item));
  }
  if (edge_sample > 0 && static_cast<int>(uniq.size()) > edge_sample)
    uniq.resize(static_cast<std::size_t>(edge_sample));
  return uniq;
}

struct PivotalWorker {
  UnionFind uf;
  std::vector<std::uint8_t> root_flags;
  std::vector<std::uint32_t> stamp;
  std::uint32_t epoch = 0;
};

}  // namespace

PivotalScan max_closed_pivotal(int dim, int m, int n, double p, std::uint64_t samples,
                               std::uint64_t seed, int edge_sample, int threads) {
  if (m < 1 || m >= n) throw std::invalid_argument("max_closed_pivotal requires 1 <= m < n");
  check_p(p);
  check_samples(samples);
  RegionGraph g(Region::box(dim, n));
  if (edge_sample > static_cast<int>(g.edges().size()))
    throw std::invalid_argument("edge_sample exceeds the edge count of box(n)");
  auto sample_edges = stratified_edges(dim, m, n, edge_sample);
  auto inner = g.indices_where([&](const Site& s) { return cheb_norm(s, dim) <= m; });
  auto outer = g.indices_where([&](const Site& s) { return cheb_norm(s, dim) == n; });
  std::vector<std::pair<std::int32_t, std::int32_t>> edge_idx;
  for (const auto& [e, stratum] : sample_edges)
    edge_idx.emplace_back(g.index_of(e.base), g.index_of(e.other()));

  const std::size_t n_sites = static_cast<std::size_t>(g.site_count());
  auto counts = run_counters(
      samples, threads, sample_edges.size(),
      [&] {
        PivotalWorker w;
        w.root_flags.assign(n_sites, 0);
        w.stamp.assign(n_sites, 0);
        return w;
      },
      [&](PivotalWorker& w, std::uint64_t i, std::span<std::uint64_t> acc) {
        Config cfg(EdgeWeights{sample_seed(seed, i), 0}, p);
        w.uf.reset(g.site_count());
        const auto& edges = g.edges();
        auto ends = g.edge_ends();
        for (std::size_t ei = 0; ei < edges.size(); ++ei)
          if (cfg.open(edges[ei])) w.uf.unite(ends[ei].first, ends[ei].second);
        ++w.epoch;
        auto flag_of = [&](std::int32_t root) -> std::uint8_t& {
          auto r = static_cast<std::size_t>(root);
          if (w.stamp[r] != w.epoch) {
            w.stamp[r] = w.epoch;
            w.root_flags[r] = 0;
          }
          return w.root_flags[r];
        };
        bool event_now = false;
        for (std::int32_t v : inner) flag_of(w.uf.find(v)) |= 1;
        for (std::int32_t v : outer) {
          auto& f = flag_of(w.uf.find(v));
          f |= 2;
          event_now |= (f & 1) != 0;
        }
        // If the event already holds, forcing any closed edge open cannot make
        // it pivotal; every closed-pivotal count stays untouched this sample.
        if (event_now) return;
        for (std::size_t j = 0; j < edge_idx.size(); ++j) {
          const Edge& e = sample_edges[j].first;
          if (cfg.open(e)) continue;
          std::int32_t ru = w.uf.find(edge_idx[j].first);
          std::int32_t rv = w.uf.find(edge_idx[j].second);
          std::uint8_t fu = (w.stamp[static_cast<std::size_t>(ru)] == w.epoch)
                                ? w.root_flags[static_cast<std::size_t>(ru)]
                                : 0;
          std::uint8_t fv = (w.stamp[static_cast<std::size_t>(rv)] == w.epoch)
                                ? w.root_flags[static_cast<std::size_t>(rv)]
                                : 0;
          std::uint8_t merged = fu | fv;
          if ((merged & 1) && (merged & 2)) ++acc[j];
        }
      });

  PivotalScan scan;
  double best = -1.0;
  for (std::size_t j = 0; j < sample_edges.size(); ++j) {
    EdgeEstimate ee;
    ee.edge = sample_edges[j].first;
    ee.stratum = sample_edges[j].second;
    ee.estimate = make_estimate(counts[j], samples, seed,
                                manifest("closed-pivotal d=", dim, " m=", m, " n=", n, " p=", p,
                                         " edge=", to_string(ee.edge.base, dim), "+a",
                                         static_cast<int>(ee.edge.axis), " samples=", samples,
                                         " seed=", seed));
    if (ee.estimate.mean > best) {
      best = ee.estimate.mean;
      scan.argmax = static_cast<int>(j);
    }
    scan.edges.push_back(std::move(ee));
  }
  return scan;
}

Estimate closed_pivotal_prob(const Region& within, const Region& inner, const Region& outer,
                             const Edge& e, double p, std::uint64_t samples, std::uint64_t seed,
                             int threads) {
  check_p(p);
  check_samples(samples);
  RegionGraph g(within);
  if (g.index_of(e.base) < 0 || g.index_of(e.other()) < 0)
    throw std::invalid_argument("edge endpoints must lie in the region");
  auto seeds = g.indices_where([&](const Site& s) { return inner.contains(s); });
  auto target = g.flags_where([&](const Site& s) { return outer.contains(s); });
  auto counts = run_counters(
      samples, threads, 1, [&] { return Reach(g); },
      [&](Reach& reach, std::uint64_t i, std::span<std::uint64_t> acc) {
        Config cfg(EdgeWeights{sample_seed(seed, i), 0}, p);
        if (cfg.open(e)) return;
        bool with_open = reach.reachable(cfg.with_edge(e, true), seeds, target);
        if (!with_open) return;
        bool with_closed = reach.reachable(cfg.with_edge(e, false), seeds, target);
        if (!with_closed) ++acc[0];
      });
  return make_estimate(counts[0], samples, seed,
                       manifest("closed-pivotal within=", within.to_text(), " p=", p,
                                " samples=", samples, " seed=", seed));
}

PhiEstimate phi_mc(const Region& S, double p, std::uint64_t samples, std::uint64_t seed,
                   int threads) {
  check_p(p);
  check_samples(samples);
  if (!S.contains(Site{})) throw std::invalid_argument("phi_mc requires 0 in S");
  RegionGraph g(S);
  const int dim = S.dim();
  std::vector<std::uint32_t> mult(static_cast<std::size_t>(g.site_count()), 0);
  for (std::int32_t i = 0; i < g.site_count(); ++i) {
    const Site& s = g.sites()[static_cast<std::size_t>(i)];
    for (int axis = 0; axis < dim; ++axis) {
      Site u = Site::unit(axis);
      if (!S.contains(s + u)) ++mult[static_cast<std::size_t>(i)];
      if (!S.contains(s - u)) ++mult[static_cast<std::size_t>(i)];
    }
  }
  auto origin = g.indices_where([](const Site& s) { return s == Site{}; });

  auto counts = run_counters(
      samples, threads, 2, [&] { return Reach(g); },
      [&](Reach& reach, std::uint64_t i, std::span<std::uint64_t> acc) {
        Config cfg(EdgeWeights{sample_seed(seed, i), 0}, p);
        const auto& cluster = reach.cluster(cfg, origin);
        std::uint64_t u = 0;
        for (std::int32_t v : cluster) u += mult[static_cast<std::size_t>(v)];
        acc[0] += u;
        acc[1] += u * u;
      });

  PhiEstimate est;
  est.samples = samples;
  est.seed = seed;
  double mean_u = static_cast<double>(counts[0]) / static_cast<double>(samples);
  double var_u = static_cast<double>(counts[1]) / static_cast<double>(samples) - mean_u * mean_u;
  var_u = std::max(0.0, var_u);
  est.value = p * mean_u;
  est.std_error = p * std::sqrt(var_u / static_cast<double>(samples));
  return est;
}

RussoMc russo_derivative_mc(const EventSpec& spec, double p, std::uint64_t samples,
                            std::uint64_t seed, double h, int threads) {
  check_samples(samples);
  if (h <= 0.0) throw std::invalid_argument("finite-difference step must be positive");
  if (p - h < 0.0 || p + h > 1.0)
    throw std::invalid_argument("p +- h must stay inside [0,1]");
  EventContext ctx(spec);
  const auto& edges = ctx.graph().edges();
  if (edges.size() > 10000)
    throw std::invalid_argument("russo_derivative_mc is limited to events on <= 10^4 edges");

  // counters: ind(p+h) and not ind(p-h); ind(p-h) and not ind(p+h);
  //           sum of per-sample pivotal counts; sum of their squares.
  auto counts = run_counters(
      samples, threads, 4, [&] { return EventContext::Worker(ctx); },
      [&](EventContext::Worker& worker, std::uint64_t i, std::span<std::uint64_t> acc) {
        EdgeWeights w{sample_seed(seed, i), 0};
        bool hi = worker.eval(Config(w, p + h));
        bool lo = worker.eval(Config(w, p - h));
        if (hi && !lo) ++acc[0];
        if (lo && !hi) ++acc[1];
        Config cfg(w, p);
        std::uint64_t pivots = 0;
        for (const Edge& e : edges) {
          bool open_state = worker.eval(cfg.with_edge(e, true));
          bool closed_state = worker.eval(cfg.with_edge(e, false));
          if (open_state != closed_state) ++pivots;
        }
        acc[2] += pivots;
        acc[3] += pivots * pivots;
      });

  RussoMc out;
  out.step = h;
  const double ns = static_cast<double>(samples);
  double mean_d = (static_cast<double>(counts[0]) - static_cast<double>(counts[1])) / ns;
  double var_d = (static_cast<double>(counts[0]) + static_cast<double>(counts[1])) / ns -
                 mean_d * mean_d;
  var_d = std::max(0.0, var_d);
  out.derivative = mean_d / (2.0 * h);
  out.derivative_std_error = std::sqrt(var_d / ns) / (2.0 * h);
  double mean_piv = static_cast<double>(counts[2]) / ns;
  double var_piv = static_cast<double>(counts[3]) / ns - mean_piv * mean_piv;
  var_piv = std::max(0.0, var_piv);
  out.pivotal_sum = mean_piv;
  out.pivotal_sum_std_error = std::sqrt(var_piv / ns);
  return out;
}

CorrelationLengthFit fit_xi_points(std::vector<XiPoint> points, double p, XiRegime regime,
                                   int truncation_m) {
  CorrelationLengthFit fit;
  fit.p = p;
  fit.regime = regime;
  fit.truncation_m = truncation_m;
  std::vector<XiPoint> kept;
  for (const XiPoint& pt : points) {
    if (pt.mean <= 0.0 || pt.mean >= 1.0)
      fit.dropped.push_back(pt.n);
    else
      kept.push_back(pt);
  }
  fit.points = kept;
  if (kept.size() < 3) {
    fit.note = "fit refused: fewer than 3 usable radii";
    return fit;
  }
  std::vector<double> x, y, sig;
  for (const XiPoint& pt : kept) {
    x.push_back(static_cast<double>(pt.n));
    y.push_back(-std::log(pt.mean));
    sig.push_back(pt.std_error / pt.mean);  // delta method for -log
  }
  WeightedLine line = weighted_line(x, y, sig);
  if (!line.ok) {
    fit.note = "fit refused: degenerate design";
    return fit;
  }
  fit.slope = line.slope;
  fit.slope_std_error = line.slope_se;
  fit.r2 = line.r2;
  if (line.slope <= 0.0) {
    fit.infinite = true;
    fit.note = "non-positive decay slope: xi flagged infinite";
    return fit;
  }
  fit.xi = 1.0 / line.slope;
  fit.xi_std_error = line.slope_se / (line.slope * line.slope);
  fit.ok = true;
  return fit;
}

namespace {

// Supercritical proxy event: {0 <-> boundary(n), 0 <-/-> boundary(Mn)} inside
// box(Mn). One cluster visit decides both parts.
Estimate truncated_one_arm(int dim, int n, int M, double p, std::uint64_t samples,
                           std::uint64_t seed, int threads) {
  RegionGraph g(Region::box(dim, M * n));
  auto origin = g.indices_where([](const Site& s) { return s == Site{}; });
  auto inner_flag = g.flags_where([&](const Site& s) { return cheb_norm(s, dim) == n; });
  auto outer_flag = g.flags_where([&](const Site& s) { return cheb_norm(s, dim) == M * n; });
  auto counts = run_counters(
      samples, threads, 1, [&] { return Reach(g); },
      [&](Reach& reach, std::uint64_t i, std::span<std::uint64_t> acc) {
        Config cfg(EdgeWeights{sample_seed(seed, i), 0}, p);
        const auto& cluster = reach.cluster(cfg, origin);
        bool inner = false, outer = false;
        for (std::int32_t v : cluster) {
          inner |= inner_flag[static_cast<std::size_t>(v)] != 0;
          if (outer_flag[static_cast<std::size_t>(v)]) {
            outer = true;
            break;
          }
        }
        if (inner && !outer) ++acc[0];
      });
  return make_estimate(counts[0], samples, seed,
                       manifest("truncated-one-arm d=", dim, " n=", n, " M=", M, " p=", p,
                                " samples=", samples, " seed=", seed));
}

}  // namespace

CorrelationLengthFit fit_xi(int dim, double p, std::span<const int> n_list,
                            std::uint64_t samples, std::uint64_t seed, XiRegime regime,
                            int truncation_m, int threads) {
  check_p(p);
  if (n_list.size() < 3) throw std::invalid_argument("fit_xi requires at least 3 radii");
  if (truncation_m < 2) throw std::invalid_argument("truncation factor must be >= 2");
  std::vector<XiPoint> points;
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    int n = n_list[j];
    if (n < 1) throw std::invalid_argument("radii must be >= 1");
    // Decorrelate radii by folding the radius into the seed.
    std::uint64_t radius_seed = seed ^ mix64(0x78690000ull + static_cast<std::uint64_t>(n));
    Estimate est = (regime == XiRegime::subcritical)
                       ? one_arm(dim, n, p, samples, radius_seed, threads)
                       : truncated_one_arm(dim, n, truncation_m, p, samples, radius_seed, threads);
    points.push_back(XiPoint{n, est.mean, est.std_error});
  }
  return fit_xi_points(std::move(points), p, regime, truncation_m);
}

CriticalReference critical_reference(int dim, double user_value) {
  if (user_value > 0.0) {
    if (user_value >= 1.0) throw std::invalid_argument("p_c reference must be in (0,1)");
    return CriticalReference{dim, user_value, "external: user-supplied"};
  }
  if (dim == 2) return CriticalReference{2, 0.5, "external: planar self-duality"};
  throw std::invalid_argument(
      "no built-in p_c reference for d >= 3: supply one or fit via the f-curve midpoint");
}

CriticalReference fit_critical_reference(int dim, int n, double beta, double p_lo, double p_hi,
                                         int grid_points, std::uint64_t samples,
                                         std::uint64_t seed, int threads) {
  if (grid_points < 3) throw std::invalid_argument("need at least 3 grid points");
  if (!(0.0 <= p_lo && p_lo < p_hi && p_hi <= 1.0))
    throw std::invalid_argument("bad p bracket");
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i)
    grid[static_cast<std::size_t>(i)] = p_lo + (p_hi - p_lo) * i / (grid_points - 1);
  SweepCurve curve = f_curve(dim, n, beta, grid, samples, seed, threads);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double a = curve.estimates[i - 1].mean, b = curve.estimates[i].mean;
    if (a <= 0.5 && b >= 0.5 && b > a) {
      double t = (0.5 - a) / (b - a);
      double pc = grid[i - 1] + t * (grid[i] - grid[i - 1]);
      return CriticalReference{dim, pc, "fitted: f-curve midpoint at n=" + std::to_string(n)};
    }
  }
  throw std::runtime_error("f-curve never crosses 1/2 inside the bracket");
}

PnResult locate_pn(int dim, int n, double tolerance, int budget, const CriticalReference& ref,
                   std::uint64_t samples, std::uint64_t seed, int threads) {
  if (n < 2) throw std::invalid_argument("locate_pn requires n >= 2");
  if (tolerance <= 0.0) throw std::invalid_argument("tolerance must be positive");
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  std::vector<int> radii{std::max(2, n / 2), n, n + n / 2, 2 * n};
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  PnResult out;
  out.lo = 0.02;
  out.hi = std::min(ref.p_c - 1e-3, 0.999);
  double best_gap = -1.0;
  auto eval = [&](double p) {
    ++out.evals;
    return fit_xi(dim, p, radii, samples, seed, XiRegime::subcritical, 4, threads);
  };
  while (out.evals < budget) {
    double mid = 0.5 * (out.lo + out.hi);
    CorrelationLengthFit fit = eval(mid);
    double xi;
    if (fit.ok) {
      xi = fit.xi;
    } else if (fit.infinite) {
      xi = std::numeric_limits<double>::infinity();
    } else {
      // All estimates degenerate: zeros mean xi far below n, ones far above.
      bool any_high = false;
      for (const XiPoint& pt : fit.points) any_high |= pt.mean > 0.5;
      xi = any_high ? std::numeric_limits<double>::infinity() : 0.0;
    }
    double gap = std::abs(xi - static_cast<double>(n));
    if (best_gap < 0.0 || gap < best_gap) {
      best_gap = gap;
      out.p = mid;
      out.xi = xi;
      out.xi_std_error = fit.ok ? fit.xi_std_error : 0.0;
    }
    if (gap <= tolerance * n) {
      out.converged = true;
      break;
    }
    if (xi < n)
      out.lo = mid;
    else
      out.hi = mid;
  }
  return out;
}

NuFit fit_nu_points(std::vector<NuPoint> points, int dim) {
  NuFit fit;
  fit.reference = (dim == 2) ? 4.0 / 3.0 : 0.0;
  fit.points = points;
  if (points.size() < 3) return fit;
  std::vector<double> x, y, sig;
  for (const NuPoint& pt : points) {
    x.push_back(std::log(pt.offset));
    y.push_back(std::log(pt.xi));
    sig.push_back(pt.xi_std_error > 0 ? pt.xi_std_error / pt.xi : 1e-6);
  }
  WeightedLine line = weighted_line(x, y, sig);
  if (!line.ok) return fit;
  fit.exponent = -line.slope;
  fit.exponent_std_error = line.slope_se;
  fit.r2 = line.r2;
  fit.ok = true;
  return fit;
}

NuFit fit_nu(int dim, std::span<const double> offsets, int n_budget, std::uint64_t samples,
             std::uint64_t seed, const CriticalReference& ref, int threads) {
  if (offsets.size() < 3) throw std::invalid_argument("fit_nu requires at least 3 offsets");
  // Four radii spread evenly up to the budget.
  std::vector<int> radii;
  for (int i = 1; i <= 4; ++i) {
    int r = std::max(2, n_budget * i / 4);
    if (radii.empty() || r > radii.back()) radii.push_back(r);
  }
  if (radii.size() < 3) throw std::invalid_argument("n_budget too small for a xi ladder");
  std::vector<NuPoint> points;
  NuFit partial;
  for (double offset : offsets) {
    double p = ref.p_c - offset;
    if (p <= 0.0 || offset <= 0.0)
      throw std::invalid_argument("offsets must satisfy 0 < offset < p_c");
    std::uint64_t offset_seed =
        seed ^ mix64(0x6e750000ull ^ std::bit_cast<std::uint64_t>(offset));
    CorrelationLengthFit fit =
        fit_xi(dim, p, radii, samples, offset_seed, XiRegime::subcritical, 4, threads);
    if (fit.ok)
      points.push_back(NuPoint{offset, fit.xi, fit.xi_std_error});
    else
      partial.dropped_offsets.push_back(offset);
  }
  NuFit out = fit_nu_points(std::move(points), dim);
  out.dropped_offsets = std::move(partial.dropped_offsets);
  return out;
}

}  // namespace perc
