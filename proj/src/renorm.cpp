#include "perc/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace perc::renorm {

namespace {

using json = nlohmann::json;

int floor_div(int v, int n) { return v >= 0 ? v / n : -((-v + n - 1) / n); }

std::uint64_t pack2(int a, int b) { return pack_pair(a, b); }

}  // namespace

RenormParams RenormParams::make(int dim, double p, double epsilon, double lambda, int k, int K,
                                int n, int N) {
  if (dim < 3) throw std::invalid_argument("renormalisation runs on d >= 3 slabs");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("p must be in [0,1]");
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  if (lambda <= 0.0) throw std::invalid_argument("lambda must be positive");
  if (!(1 <= k && k <= K && K <= n && n <= N))
    throw std::invalid_argument("scales must satisfy 1 <= k <= K <= n <= N");
  if (static_cast<double>(K) > epsilon * epsilon * static_cast<double>(n))
    throw std::invalid_argument("scales must satisfy K <= epsilon^2 n");
  if (p + 25.0 * lambda * epsilon > 1.0 + 1e-12)
    throw std::invalid_argument("p + 25 lambda epsilon must stay <= 1");
  RenormParams out;
  out.dim = dim;
  out.p = p;
  out.epsilon = epsilon;
  out.lambda = lambda;
  out.k = k;
  out.K = K;
  out.n = n;
  out.N = N;
  return out;
}

RenormParams RenormParams::from_alpha(int dim, double p, double epsilon, double lambda, int N,
                                      double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("alpha must be in (0,1)");
  auto scale = [&](double expo) {
    return std::max(1, static_cast<int>(std::floor(std::pow(N, expo))));
  };
  return make(dim, p, epsilon, lambda, scale(alpha * alpha * alpha), scale(alpha * alpha),
              scale(alpha), N);
}

ConditionReport check_conditions(const RenormParams& params, std::uint64_t samples,
                                 std::uint64_t seed, int threads) {
  if (params.k >= params.K || params.n >= params.N)
    throw std::invalid_argument("check_conditions needs strict scales k < K and n < N");
  ConditionReport rep;
  rep.eps_threshold_a = params.epsilon;
  rep.threshold_b = 1.0 - std::exp(-1.0 / params.epsilon);
  rep.threshold_c = std::exp(-1.0 / params.epsilon);

  rep.a = one_arm(params.dim, params.N, params.p, samples, seed ^ mix64(0xa1), threads);
  rep.b = estimate_event(BoxToBoundaryEvent{params.dim, params.k, params.N}, params.p, samples,
                         seed ^ mix64(0xb1), threads);
  rep.c1 = two_arm(params.dim, params.k, params.K, params.p, samples, seed ^ mix64(0xc1), threads);
  rep.c2 = two_arm(params.dim, params.n, params.N, params.p, samples, seed ^ mix64(0xc2), threads);

  // One-sided with a 3 sigma margin in the lenient direction.
  rep.a_pass = rep.a.mean >= rep.eps_threshold_a - 3.0 * rep.a.std_error;
  rep.b_pass = rep.b.mean >= rep.threshold_b - 3.0 * rep.b.std_error;
  rep.c1_pass = rep.c1.mean <= rep.threshold_c + 3.0 * rep.c1.std_error;
  rep.c2_pass = rep.c2.mean <= rep.threshold_c + 3.0 * rep.c2.std_error;
  rep.all_pass = rep.a_pass && rep.b_pass && rep.c1_pass && rep.c2_pass;
  return rep;
}

Estimate connect_set_to_quarter_face(std::span<const Site> S, const RenormParams& params,
                                     std::uint64_t samples, std::uint64_t seed, int threads) {
  if (S.empty()) throw std::invalid_argument("S must be nonempty");
  const int dim = params.dim;
  bool has_origin = false;
  Site lo = S[0], hi = S[0];
  for (const Site& s : S) {
    has_origin |= s == Site{};
    if (cheb_norm(s, dim) > params.n)
      throw std::invalid_argument("S must lie inside box(n)");
    for (int i = 0; i < dim; ++i) {
      lo.c[i] = std::min(lo.c[i], s.c[i]);
      hi.c[i] = std::max(hi.c[i], s.c[i]);
    }
  }
  if (!has_origin) throw std::invalid_argument("S must contain the origin");
  int diameter = 0;
  for (int i = 0; i < dim; ++i) diameter = std::max(diameter, hi.c[i] - lo.c[i]);
  if (diameter < params.n)
    throw std::invalid_argument("S must have diameter >= n");
  // Connectedness of S as a vertex set.
  std::unordered_set<Site, SiteHash> members(S.begin(), S.end());
  std::vector<Site> queue{S[0]};
  std::unordered_set<Site, SiteHash> seen{S[0]};
  for (std::size_t head = 0; head < queue.size(); ++head) {
    Site u = queue[head];
    for (int axis = 0; axis < dim; ++axis) {
      for (Site v : {u + Site::unit(axis), u - Site::unit(axis)}) {
        if (members.contains(v) && !seen.contains(v)) {
          seen.insert(v);
          queue.push_back(v);
        }
      }
    }
  }
  if (seen.size() != members.size()) throw std::invalid_argument("S must be connected");

  RegionGraph g(Region::box(dim, params.N));
  auto seeds = g.indices_where([&](const Site& s) { return members.contains(s); });
  std::vector<int> tsigns(static_cast<std::size_t>(dim - 1), 1);
  Region face = Region::quarter_face(dim, params.N, 0, 1, tsigns);
  auto target = g.flags_where([&](const Site& s) { return face.contains(s); });
  auto counts = run_counters(
      samples, threads, 1, [&] { return Reach(g); },
      [&](Reach& reach, std::uint64_t i, std::span<std::uint64_t> acc) {
        Config cfg(EdgeWeights{sample_seed(seed, i), 0}, params.p);
        if (reach.reachable(cfg, seeds, target)) ++acc[0];
      });
  return make_estimate(counts[0], samples, seed, "connect-set-to-quarter-face");
}

SlabEnvironment SlabEnvironment::make(int dim, int N, int window, double p, double sprinkle_p,
                                      std::uint64_t seed, int slab_radius) {
  if (dim < 3) throw std::invalid_argument("the slab exploration needs d >= 3");
  if (N < 1 || window < 1) throw std::invalid_argument("N and window must be >= 1");
  if (p < 0.0 || p > 1.0 || sprinkle_p < 0.0 || sprinkle_p > 1.0)
    throw std::invalid_argument("probabilities must be in [0,1]");
  if (p + 25.0 * sprinkle_p > 1.0 + 1e-12)
    throw std::invalid_argument("p + 25 * sprinkle_p must stay <= 1");
  SlabEnvironment env;
  env.dim = dim;
  env.N = N;
  env.window = window;
  env.slab_radius = slab_radius > 0 ? slab_radius : N * (window + 2);
  if (env.slab_radius < N * (window + 1))
    throw std::invalid_argument("slab radius too small for the exploration window");
  env.p = p;
  env.sprinkle_p = sprinkle_p;
  env.seed = seed;
  return env;
}

SlabEnvironment SlabEnvironment::from_params(const RenormParams& params, int window,
                                             std::uint64_t seed) {
  return make(params.dim, params.N, window, params.p, params.sprinkle_p(), seed);
}

std::array<std::int64_t, 4> edge_order_key(const std::array<int, 2>& base, int axis) {
  std::int64_t mx = 2ll * base[0] + (axis == 0 ? 1 : 0);
  std::int64_t my = 2ll * base[1] + (axis == 1 ? 1 : 0);
  std::int64_t k0 = std::max(std::llabs(mx), std::llabs(my));
  return {k0, base[0], base[1], axis};
}

namespace {

// Fixed total order on Z^2 edges: roughly radial, ties broken lexicographically.
struct OrderedEdge {
  std::array<std::int64_t, 4> key;
  std::array<int, 2> base{};
  int axis = 0;
  friend bool operator>(const OrderedEdge& a, const OrderedEdge& b) { return a.key > b.key; }
};

using EdgeQueue = std::priority_queue<OrderedEdge, std::vector<OrderedEdge>, std::greater<>>;

void push_frontier(EdgeQueue& pq, const std::array<int, 2>& s) {
  // The four Z^2 edges incident to s, in canonical base/axis form.
  for (int axis = 0; axis < 2; ++axis) {
    std::array<int, 2> down = s;
    down[axis] -= 1;
    pq.push(OrderedEdge{edge_order_key(s, axis), s, axis});
    pq.push(OrderedEdge{edge_order_key(down, axis), down, axis});
  }
}

struct Frontier {
  std::unordered_set<std::uint64_t> asites, bsites;
  EdgeQueue pq;
  int window;

  explicit Frontier(int w) : window(w) {
    a_insert({0, 0});
  }

  void a_insert(const std::array<int, 2>& x) {
    a_sites_list.push_back(x);
    asites.insert(pack2(x[0], x[1]));
    push_frontier(pq, x);
  }
  void b_insert(const std::array<int, 2>& x) { bsites.insert(pack2(x[0], x[1])); }

  bool in_a(const std::array<int, 2>& x) const { return asites.contains(pack2(x[0], x[1])); }
  bool in_b(const std::array<int, 2>& x) const { return bsites.contains(pack2(x[0], x[1])); }
  bool in_window(const std::array<int, 2>& x) const {
    return std::max(std::abs(x[0]), std::abs(x[1])) <= window;
  }

  // Minimal valid edge from A to the unexplored window, if any; returns the
  // endpoint outside A u B.
  std::optional<std::array<int, 2>> next_candidate() {
    while (!pq.empty()) {
      OrderedEdge e = pq.top();
      std::array<int, 2> u = e.base;
      std::array<int, 2> v = e.base;
      v[e.axis] += 1;
      pq.pop();
      bool ua = in_a(u), va = in_a(v);
      if (ua == va) continue;  // both explored as A, or no A endpoint
      std::array<int, 2> x = ua ? v : u;
      if (in_a(x) || in_b(x) || !in_window(x)) continue;
      return x;
    }
    return std::nullopt;
  }

  std::vector<std::array<int, 2>> a_sites_list;
};

// Incremental cluster of the origin in the sprinkled slab. Closed boundary
// edges wait in per-bucket lists and are rechecked only when a sprinkle box
// covering them activates.
class SlabCluster {
 public:
  SlabCluster(const RegionGraph& g, const SlabEnvironment& env, std::uint64_t run_seed)
      : g_(&g),
        env_(&env),
        base_w_{run_seed, 0},
        run_seed_(run_seed),
        visited_(static_cast<std::size_t>(g.site_count()), 0),
        edge_state_(g.edges().size(), 0) {
    Site origin{};
    std::int32_t o = g_->index_of(origin);
    if (o < 0) throw std::logic_error("origin missing from slab graph");
    grow_from(o);
    conditioned_ = false;
    for (std::int32_t v : cluster_)
      conditioned_ |= cheb_norm(g_->sites()[static_cast<std::size_t>(v)], env_->dim) == env_->N;
  }

  bool conditioned() const { return conditioned_; }
  std::uint64_t size() const { return cluster_.size(); }

  void add_sprinkle(const std::array<int, 2>& x) {
    active_.insert(pack2(x[0], x[1]));
    // Recheck pending edges in the 5x5 bucket neighbourhood of x.
    for (int b0 = x[0] - 2; b0 <= x[0] + 2; ++b0) {
      for (int b1 = x[1] - 2; b1 <= x[1] + 2; ++b1) {
        auto it = pending_.find(pack2(b0, b1));
        if (it == pending_.end()) continue;
        auto& list = it->second;
        std::size_t keep = 0;
        for (std::size_t idx = 0; idx < list.size(); ++idx) {
          std::int32_t ei = list[idx];
          if (edge_state_[static_cast<std::size_t>(ei)] != 1) continue;  // already opened
          const Edge& e = g_->edges()[static_cast<std::size_t>(ei)];
          if (covered_by(x, e) && sprinkle_open(x, e)) {
            edge_state_[static_cast<std::size_t>(ei)] = 2;
            auto [a, b] = g_->edge_ends()[static_cast<std::size_t>(ei)];
            if (visited_[static_cast<std::size_t>(a)] && !visited_[static_cast<std::size_t>(b)])
              grow_from(b);
            else if (visited_[static_cast<std::size_t>(b)] &&
                     !visited_[static_cast<std::size_t>(a)])
              grow_from(a);
            continue;  // drop from the bucket
          }
          list[keep++] = ei;
        }
        list.resize(keep);
      }
    }
  }

  // Does the cluster meet N x + box(N)?
  bool touches_box(const std::array<int, 2>& x) const {
    const int N = env_->N;
    Site v;
    std::array<Coord, kMaxDim> lo{}, hi{};
    lo[0] = static_cast<Coord>(N * x[0] - N);
    hi[0] = static_cast<Coord>(N * x[0] + N);
    lo[1] = static_cast<Coord>(N * x[1] - N);
    hi[1] = static_cast<Coord>(N * x[1] + N);
    for (int i = 2; i < env_->dim; ++i) {
      lo[i] = -static_cast<Coord>(N);
      hi[i] = static_cast<Coord>(N);
    }
    for (int i = 0; i < env_->dim; ++i) v.c[i] = lo[i];
    while (true) {
      std::int32_t idx = g_->index_of(v);
      if (idx >= 0 && visited_[static_cast<std::size_t>(idx)]) return true;
      int i = env_->dim - 1;
      for (; i >= 0; --i) {
        if (v.c[i] < hi[i]) {
          ++v.c[i];
          break;
        }
        v.c[i] = lo[i];
      }
      if (i < 0) break;
    }
    return false;
  }

 private:
  bool covered_by(const std::array<int, 2>& x, const Edge& e) const {
    const int N = env_->N;
    Site a = e.base, b = e.other();
    for (int i = 0; i < 2; ++i) {
      int center = N * x[i];
      if (std::abs(a.c[i] - center) > 2 * N) return false;
      if (std::abs(b.c[i] - center) > 2 * N) return false;
    }
    return true;  // z-extent of box(2N) contains the slab thickness
  }

  bool sprinkle_open(const std::array<int, 2>& x, const Edge& e) const {
    EdgeWeights w{run_seed_, sprinkle_stream(x[0], x[1])};
    return w.weight(e) < env_->sprinkle_p;
  }

  bool open_now(std::int32_t ei) const {
    const Edge& e = g_->edges()[static_cast<std::size_t>(ei)];
    if (base_w_.weight(e) < env_->p) return true;
    if (active_.empty()) return false;
    const int N = env_->N;
    Site a = e.base, b = e.other();
    auto range = [N](Coord va, Coord vb, int& lo, int& hi) {
      int top = std::min(va, vb) + 2 * N;
      int bot = std::max(va, vb) - 2 * N;
      lo = bot >= 0 ? (bot + N - 1) / N : -((-bot) / N);
      hi = floor_div(top, N);
    };
    int l0, h0, l1, h1;
    range(a.c[0], b.c[0], l0, h0);
    range(a.c[1], b.c[1], l1, h1);
    for (int x0 = l0; x0 <= h0; ++x0)
      for (int x1 = l1; x1 <= h1; ++x1)
        if (active_.contains(pack2(x0, x1)) && sprinkle_open({x0, x1}, e)) return true;
    return false;
  }

  std::uint64_t bucket_of(const Edge& e) const {
    return pack2(floor_div(e.base.c[0], env_->N), floor_div(e.base.c[1], env_->N));
  }

  void grow_from(std::int32_t v) {
    if (visited_[static_cast<std::size_t>(v)]) return;
    visited_[static_cast<std::size_t>(v)] = 1;
    cluster_.push_back(v);
    for (std::size_t head = cluster_.size() - 1; head < cluster_.size(); ++head) {
      std::int32_t u = cluster_[head];
      for (std::int32_t ei : g_->incident_edges(u)) {
        auto [a, b] = g_->edge_ends()[static_cast<std::size_t>(ei)];
        std::int32_t w = (a == u) ? b : a;
        if (visited_[static_cast<std::size_t>(w)]) continue;
        std::uint8_t& st = edge_state_[static_cast<std::size_t>(ei)];
        if (st == 2 || open_now(ei)) {
          st = 2;
          visited_[static_cast<std::size_t>(w)] = 1;
          cluster_.push_back(w);
        } else if (st == 0) {
          st = 1;
          pending_[bucket_of(g_->edges()[static_cast<std::size_t>(ei)])].push_back(ei);
        }
      }
    }
  }

  const RegionGraph* g_;
  const SlabEnvironment* env_;
  EdgeWeights base_w_;
  std::uint64_t run_seed_;
  std::vector<std::uint8_t> visited_;
  std::vector<std::uint8_t> edge_state_;  // 0 unseen, 1 pending closed, 2 open
  std::vector<std::int32_t> cluster_;
  std::unordered_map<std::uint64_t, std::vector<std::int32_t>> pending_;
  std::unordered_set<std::uint64_t> active_;
  bool conditioned_ = false;
};

template <class AcceptFn>
ExplorationTrace drive_exploration(int window, int max_steps, AcceptFn&& accept,
                                   bool conditioned) {
  ExplorationTrace trace;
  trace.window = window;
  trace.conditioned = conditioned;
  Frontier frontier(window);
  bool percolated = false;
  bool exhausted = false;
  std::uint32_t t = 0;
  while (true) {
    if (max_steps >= 0 && t >= static_cast<std::uint32_t>(max_steps)) break;
    auto candidate = frontier.next_candidate();
    if (!candidate) {
      exhausted = true;
      break;
    }
    auto [joined, cluster_sites] = accept(*candidate, t);
    trace.steps.push_back(ExplorationStep{t, *candidate, joined, cluster_sites});
    if (joined) {
      frontier.a_insert(*candidate);
      if (std::max(std::abs((*candidate)[0]), std::abs((*candidate)[1])) == window)
        percolated = true;
    } else {
      frontier.b_insert(*candidate);
    }
    ++t;
  }
  trace.final_a = frontier.asites.size();
  trace.final_b = frontier.bsites.size();
  trace.outcome = percolated ? Outcome::percolates_window
                             : (exhausted ? Outcome::dies : Outcome::step_cap);
  return trace;
}

}  // namespace

ExplorationTrace run_exploration(const SlabEnvironment& env, int max_steps) {
  SlabEnvironment e = env;
  if (e.slab_radius <= 0) e.slab_radius = e.N * (e.window + 2);
  if (e.slab_radius < e.N * (e.window + 1))
    throw std::invalid_argument("slab radius too small for the exploration window");
  RegionGraph g(Region::truncated_slab(e.dim, 2 * e.N, e.slab_radius));
  SlabCluster cluster(g, e, e.seed);
  auto accept = [&](const std::array<int, 2>& x, std::uint32_t) {
    cluster.add_sprinkle(x);
    return std::pair<bool, std::uint64_t>{cluster.touches_box(x), cluster.size()};
  };
  return drive_exploration(e.window, max_steps, accept, cluster.conditioned());
}

std::vector<ExplorationTrace> run_exploration_batch(const SlabEnvironment& env, int traces,
                                                    int max_steps, int threads) {
  SlabEnvironment e = env;
  if (e.slab_radius <= 0) e.slab_radius = e.N * (e.window + 2);
  RegionGraph g(Region::truncated_slab(e.dim, 2 * e.N, e.slab_radius));
  std::vector<ExplorationTrace> out(static_cast<std::size_t>(traces));
  auto run_one = [&](int i) {
    SlabEnvironment local = e;
    local.seed = sample_seed(e.seed, static_cast<std::uint64_t>(i));
    SlabCluster cluster(g, local, local.seed);
    auto accept = [&](const std::array<int, 2>& x, std::uint32_t) {
      cluster.add_sprinkle(x);
      return std::pair<bool, std::uint64_t>{cluster.touches_box(x), cluster.size()};
    };
    out[static_cast<std::size_t>(i)] =
        drive_exploration(local.window, max_steps, accept, cluster.conditioned());
  };
  int workers = std::max(1, std::min(threads, traces));
  if (workers == 1) {
    for (int i = 0; i < traces; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int i = w; i < traces; i += workers) run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

ExplorationTrace run_exploration_stub(StubKind kind, double q, std::uint64_t seed, int window,
                                      int max_steps) {
  auto accept = [&](const std::array<int, 2>&, std::uint32_t t) {
    bool joined = false;
    switch (kind) {
      case StubKind::always_true:
        joined = true;
        break;
      case StubKind::always_false:
        joined = false;
        break;
      case StubKind::bernoulli: {
        double u = static_cast<double>(mix64(seed ^ mix64(t + 1)) >> 11) * 0x1.0p-53;
        joined = u < q;
        break;
      }
    }
    return std::pair<bool, std::uint64_t>{joined, 0};
  };
  return drive_exploration(window, max_steps, accept, false);
}

GmReport gm_criterion_estimate(std::span<const ExplorationTrace> traces, double q_threshold) {
  if (traces.size() < 100)
    throw std::invalid_argument("gm_criterion_estimate requires at least 100 traces");
  std::uint64_t accepted = 0, total = 0;
  std::uint32_t max_t = 0;
  for (const auto& tr : traces)
    for (const auto& step : tr.steps) {
      ++total;
      accepted += step.joined_a ? 1 : 0;
      max_t = std::max(max_t, step.t);
    }
  GmReport rep;
  rep.q_threshold = q_threshold;
  rep.traces = traces.size();
  if (total == 0) throw std::invalid_argument("no steps with a defined candidate site");
  rep.overall = make_estimate(accepted, total, 0, "gm-acceptance");
  const std::uint32_t buckets = 8;
  std::uint32_t width = std::max<std::uint32_t>(1, (max_t + buckets) / buckets);
  rep.buckets.assign(buckets, GmBucket{});
  for (std::uint32_t b = 0; b < buckets; ++b) {
    rep.buckets[b].t_lo = b * width;
    rep.buckets[b].t_hi = (b + 1) * width - 1;
  }
  for (const auto& tr : traces)
    for (const auto& step : tr.steps) {
      std::uint32_t b = std::min(step.t / width, buckets - 1);
      ++rep.buckets[b].total;
      rep.buckets[b].accepted += step.joined_a ? 1 : 0;
    }
  rep.meets_threshold = rep.overall.mean - 3.0 * rep.overall.std_error >= q_threshold;
  return rep;
}

std::string trace_to_jsonl(const ExplorationTrace& trace) {
  std::ostringstream os;
  json meta{{"schema", "perc-trace/1"},
            {"window", trace.window},
            {"conditioned", trace.conditioned}};
  os << meta.dump() << '\n';
  for (const auto& step : trace.steps) {
    json line{{"t", step.t},
              {"x", {step.x[0], step.x[1]}},
              {"join", step.joined_a ? "A" : "B"},
              {"cluster", step.cluster_sites}};
    os << line.dump() << '\n';
  }
  const char* outcome = trace.outcome == Outcome::percolates_window ? "percolates_window"
                        : trace.outcome == Outcome::dies            ? "dies"
                                                                    : "step_cap";
  json tail{{"outcome", outcome}, {"a", trace.final_a}, {"b", trace.final_b}};
  os << tail.dump() << '\n';
  return os.str();
}

ExplorationTrace trace_from_jsonl(const std::string& text) {
  ExplorationTrace trace;
  std::istringstream is(text);
  std::string line;
  bool have_meta = false, have_tail = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.contains("schema")) {
      if (j["schema"] != "perc-trace/1") throw std::invalid_argument("unknown trace schema");
      trace.window = j["window"].get<int>();
      trace.conditioned = j["conditioned"].get<bool>();
      have_meta = true;
    } else if (j.contains("outcome")) {
      std::string o = j["outcome"].get<std::string>();
      trace.outcome = o == "percolates_window" ? Outcome::percolates_window
                      : o == "dies"            ? Outcome::dies
                                               : Outcome::step_cap;
      trace.final_a = j["a"].get<std::uint64_t>();
      trace.final_b = j["b"].get<std::uint64_t>();
      have_tail = true;
    } else {
      ExplorationStep step;
      step.t = j["t"].get<std::uint32_t>();
      step.x = {j["x"][0].get<int>(), j["x"][1].get<int>()};
      step.joined_a = j["join"].get<std::string>() == "A";
      step.cluster_sites = j["cluster"].get<std::uint64_t>();
      trace.steps.push_back(step);
    }
  }
  if (!have_meta || !have_tail) throw std::invalid_argument("incomplete trace");
  return trace;
}

bool replay_matches(const ExplorationTrace& trace) {
  std::size_t cursor = 0;
  auto accept = [&](const std::array<int, 2>& x, std::uint32_t t) {
    if (cursor >= trace.steps.size())
      throw std::runtime_error("replay: transition produced an extra step");
    const ExplorationStep& step = trace.steps[cursor];
    if (step.t != t || step.x != x) throw std::runtime_error("replay: divergent step");
    ++cursor;
    return std::pair<bool, std::uint64_t>{step.joined_a, step.cluster_sites};
  };
  try {
    ExplorationTrace redo =
        drive_exploration(trace.window, static_cast<int>(trace.steps.size()), accept,
                          trace.conditioned);
    if (cursor != trace.steps.size()) return false;
    if (redo.final_a != trace.final_a || redo.final_b != trace.final_b) return false;
    // step_cap vs dies depends on the original cap, which the trace does not
    // record; percolation status must agree exactly.
    bool redo_perc = redo.outcome == Outcome::percolates_window;
    bool orig_perc = trace.outcome == Outcome::percolates_window;
    return redo_perc == orig_perc;
  } catch (const std::runtime_error&) {
    return false;
  }
}

SprinkleReport sprinkle_experiment(const Region& A, const Region& B, const Region& R, double p,
                                   double eta, double epsilon, double delta, double lambda_max,
                                   int lambda_points, std::uint64_t samples, std::uint64_t seed,
                                   int threads) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("p must be in [0,1]");
  if (eta <= 0.0 || epsilon <= 0.0 || delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("eta, epsilon must be positive and delta in (0,1)");
  if (lambda_points < 1 || lambda_max <= 0.0)
    throw std::invalid_argument("need a positive lambda grid");
  for (const Site& s : A.sites())
    if (!R.contains(s)) throw std::invalid_argument("A must be contained in R");
  for (const Site& s : B.sites())
    if (!R.contains(s)) throw std::invalid_argument("B must be contained in R");

  RegionGraph g(R);
  auto seeds = g.indices_where([&](const Site& s) { return A.contains(s); });
  auto target = g.flags_where([&](const Site& s) { return B.contains(s); });
  // delta A: edges of R with exactly one endpoint in A.
  std::vector<std::int32_t> delta_a;
  for (std::size_t ei = 0; ei < g.edges().size(); ++ei) {
    const Edge& e = g.edges()[ei];
    bool a1 = A.contains(e.base), a2 = A.contains(e.other());
    if (a1 != a2) delta_a.push_back(static_cast<std::int32_t>(ei));
  }

  std::vector<double> lambdas(static_cast<std::size_t>(lambda_points));
  for (int j = 0; j < lambda_points; ++j)
    lambdas[static_cast<std::size_t>(j)] = lambda_max * (j + 1) / lambda_points;

  struct VeeConfig {
    const Config* base;
    EdgeWeights sprinkle;
    double sprinkle_p;
    bool open(const Edge& e) const {
      return base->open(e) || sprinkle.weight(e) < sprinkle_p;
    }
  };

  // counters: [0] unconditioned successes, [1] accepted (delta A closed),
  // [2..] per-lambda conditional successes.
  auto counts = run_counters(
      samples, threads, 2 + lambdas.size(), [&] { return Reach(g); },
      [&](Reach& reach, std::uint64_t i, std::span<std::uint64_t> acc) {
        std::uint64_t s_i = sample_seed(seed, i);
        Config omega(EdgeWeights{s_i, 0}, p);
        if (reach.reachable(omega, seeds, target)) ++acc[0];
        for (std::int32_t ei : delta_a)
          if (omega.open(g.edges()[static_cast<std::size_t>(ei)])) return;
        ++acc[1];
        EdgeWeights sprinkle_w{s_i, 1};
        for (std::size_t j = 0; j < lambdas.size(); ++j) {
          VeeConfig vee{&omega, sprinkle_w, lambdas[j] * epsilon};
          if (reach.reachable(vee, seeds, target)) ++acc[2 + j];
        }
      });

  SprinkleReport rep;
  rep.delta = delta;
  rep.unconditioned = make_estimate(counts[0], samples, seed, "sprinkle-unconditioned");
  rep.hypothesis_threshold = 1.0 - 2.0 * std::exp(-eta / epsilon);
  rep.hypothesis_ok =
      rep.unconditioned.mean >= rep.hypothesis_threshold - 3.0 * rep.unconditioned.std_error;
  rep.conditioned_samples = counts[1];
  if (counts[1] * 1000 < samples)
    throw std::invalid_argument(
        "conditioning mass below 10^-3 of samples; choose a smaller delta-A or larger budget");
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    SprinklePoint pt;
    pt.lambda = lambdas[j];
    pt.conditional = make_estimate(counts[2 + j], counts[1], seed, "sprinkle-conditional");
    if (!rep.least_adequate_lambda && pt.conditional.mean >= 1.0 - delta)
      rep.least_adequate_lambda = pt.lambda;
    rep.curve.push_back(pt);
  }
  return rep;
}

DominationReport sprinkle_domination_check(int dim, int N, double p, double sprinkle_p) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (p < 0 || p > 1 || sprinkle_p < 0 || sprinkle_p > 1)
    throw std::invalid_argument("probabilities must be in [0,1]");
  DominationReport rep;
  rep.bound = p + 25.0 * sprinkle_p;
  const double cap25 = 1.0 - (1.0 - p) * std::pow(1.0 - sprinkle_p, 25.0);
  rep.holds = cap25 <= rep.bound + 1e-12;
  auto count_axis = [&](int v, int delta) {
    // x with both v and v+delta inside [Nx - 2N, Nx + 2N]
    int cnt = 0;
    for (int x = -4; x <= 4; ++x) {
      if (std::abs(v - N * x) <= 2 * N && std::abs(v + delta - N * x) <= 2 * N) ++cnt;
    }
    return cnt;
  };
  for (int b0 = 0; b0 < N; ++b0) {
    for (int b1 = 0; b1 < N; ++b1) {
      for (int axis = 0; axis < dim; ++axis) {
        int d0 = axis == 0 ? 1 : 0;
        int d1 = axis == 1 ? 1 : 0;
        EdgeClassCoverage cls;
        cls.base_mod = {b0, b1};
        cls.axis = axis;
        cls.boxes = count_axis(b0, d0) * count_axis(b1, d1);
        cls.open_prob = 1.0 - (1.0 - p) * std::pow(1.0 - sprinkle_p, cls.boxes);
        rep.max_boxes = std::max(rep.max_boxes, cls.boxes);
        rep.holds = rep.holds && cls.boxes <= 25 && cls.open_prob <= cap25 + 1e-12;
        rep.classes.push_back(cls);
      }
    }
  }
  return rep;
}

}  // namespace perc::renorm
