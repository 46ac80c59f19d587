#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perc/estimators.hpp"
#include "perc/lattice.hpp"
#include "perc/sampler.hpp"

namespace perc::renorm {

// Parameters of the renormalisation scheme: probability p, sprinkling scale
// lambda*epsilon, and the four scales k <= K <= n <= N with K <= epsilon^2 n.
struct RenormParams {
  int dim = 3;
  double p = 0.0;
  double epsilon = 0.0;
  double lambda = 0.0;
  int k = 1, K = 1, n = 1, N = 1;

  static RenormParams make(int dim, double p, double epsilon, double lambda, int k, int K, int n,
                           int N);
  // Scales derived from the exponents: (k,K,n,N) = (n^(a^3), n^(a^2), n^a, n).
  static RenormParams from_alpha(int dim, double p, double epsilon, double lambda, int N,
                                 double alpha);

  double sprinkle_p() const { return lambda * epsilon; }
};

struct ConditionReport {
  Estimate a;   // P[0 <-> boundary(N)]            >= epsilon
  Estimate b;   // P[box(k) <-> boundary(N)]       >= 1 - exp(-1/eps)
  Estimate c1;  // P[A_2(k,K)]                     <= exp(-1/eps)
  Estimate c2;  // P[A_2(n,N)]                     <= exp(-1/eps)
  double eps_threshold_a = 0.0, threshold_b = 0.0, threshold_c = 0.0;
  bool a_pass = false, b_pass = false, c1_pass = false, c2_pass = false;
  bool all_pass = false;
};

// Monte Carlo check of the three renormalisation hypotheses, one-sided with a
// 3 sigma margin in the lenient direction.
ConditionReport check_conditions(const RenormParams& params, std::uint64_t samples,
                                 std::uint64_t seed, int threads = 1);

// P[S <-> F(N) inside box(N)] for a connected set S containing 0 with
// diameter >= n, S inside box(n).
Estimate connect_set_to_quarter_face(std::span<const Site> S, const RenormParams& params,
                                     std::uint64_t samples, std::uint64_t seed, int threads = 1);

// --- exploration sequence on Z^2 coupled to the sprinkled slab ---

enum class Outcome : std::uint8_t { percolates_window, dies, step_cap };

struct ExplorationStep {
  std::uint32_t t = 0;
  std::array<int, 2> x{};  // renormalised site examined at this step
  bool joined_a = false;
  std::uint64_t cluster_sites = 0;  // |C(omega_t)| after the sprinkle, 0 for stubs
};

struct ExplorationTrace {
  std::vector<ExplorationStep> steps;
  Outcome outcome = Outcome::dies;
  bool conditioned = false;  // {0 <-> boundary(N)} held in the base configuration
  std::uint64_t final_a = 1, final_b = 0;
  int window = 0;
};

// Truncated sprinkled slab: base omega at parameter p on slab(2N, R trunc),
// one lambda*eps sprinkle stream per renormalised site of the window.
struct SlabEnvironment {
  int dim = 3;
  int N = 4;
  int window = 8;          // exploration confined to |x|_inf <= window
  int slab_radius = 0;     // in-plane truncation; defaults to N*(window+2)
  double p = 0.0;
  double sprinkle_p = 0.0; // lambda * epsilon
  std::uint64_t seed = 0;

  static SlabEnvironment make(int dim, int N, int window, double p, double sprinkle_p,
                              std::uint64_t seed, int slab_radius = 0);
  static SlabEnvironment from_params(const RenormParams& params, int window,
                                     std::uint64_t seed);
};

// The coupled exploration: X_0 = ({0}, {}), x_t the endpoint of the minimal
// edge from A_t to the unexplored window, omega_{t+1} = omega_t v omega^{x_t},
// and x_t joins A iff 0 <-> (N x_t + box(N)) inside the truncated slab.
ExplorationTrace run_exploration(const SlabEnvironment& env, int max_steps);

// Independent traces (seed folded with the trace index) over one shared slab
// graph; a single trace stays sequential.
std::vector<ExplorationTrace> run_exploration_batch(const SlabEnvironment& env, int traces,
                                                    int max_steps, int threads = 1);

enum class StubKind : std::uint8_t { always_true, always_false, bernoulli };

// Same transition rule with the slab connectivity test replaced by a stub.
ExplorationTrace run_exploration_stub(StubKind kind, double q, std::uint64_t seed, int window,
                                      int max_steps);

// Ordering of Z^2 edges used by the exploration: radial first (max-norm of the
// doubled midpoint), then lexicographic on (base, axis).
std::array<std::int64_t, 4> edge_order_key(const std::array<int, 2>& base, int axis);

struct GmBucket {
  std::uint32_t t_lo = 0, t_hi = 0;
  std::uint64_t accepted = 0, total = 0;
};

struct GmReport {
  Estimate overall;                  // P(B_{t+1} = B_t | x_t defined)
  std::vector<GmBucket> buckets;     // acceptance bucketed by step
  double q_threshold = 0.0;          // external reference, never asserted
  bool meets_threshold = false;
  std::uint64_t traces = 0;
};

// Empirical acceptance frequency over >= 100 traces, compared against a
// caller-supplied q (the Z^2 site-percolation threshold is configuration,
// not ground truth).
GmReport gm_criterion_estimate(std::span<const ExplorationTrace> traces, double q_threshold);

// --- trace export / replay ---

std::string trace_to_jsonl(const ExplorationTrace& trace);
ExplorationTrace trace_from_jsonl(const std::string& text);

// Re-runs the deterministic transition rule using the recorded accept/reject
// decisions as the oracle and checks that the examined sites and outcome
// reproduce the trace exactly.
bool replay_matches(const ExplorationTrace& trace);

// --- sprinkling ---

struct SprinklePoint {
  double lambda = 0.0;
  Estimate conditional;  // P[A <-> B in omega v omega~ | omega == 0 on delta A]
};

struct SprinkleReport {
  Estimate unconditioned;           // P[A <-> B in omega]
  double hypothesis_threshold = 0;  // 1 - 2 exp(-eta/eps)
  bool hypothesis_ok = false;
  std::vector<SprinklePoint> curve;
  std::uint64_t conditioned_samples = 0;  // rejection-sampling acceptances
  double delta = 0.0;
  std::optional<double> least_adequate_lambda;  // least sampled lambda with P >= 1-delta
};

// Lemma-style sprinkling experiment: condition {omega == 0 on delta A} by
// rejection sampling, then sweep lambda with a shared sprinkle weight field.
// Throws if the conditioning mass falls below 10^-3 of the samples.
SprinkleReport sprinkle_experiment(const Region& A, const Region& B, const Region& R, double p,
                                   double eta, double epsilon, double delta, double lambda_max,
                                   int lambda_points, std::uint64_t samples, std::uint64_t seed,
                                   int threads = 1);

// --- stochastic domination of the sprinkled union ---

struct EdgeClassCoverage {
  std::array<int, 2> base_mod{};  // in-plane base offsets mod N
  int axis = 0;
  int boxes = 0;                  // sprinkle boxes N x + box(2N) covering the edge
  double open_prob = 0.0;         // 1 - (1-p)(1-q)^boxes
};

struct DominationReport {
  int max_boxes = 0;
  double bound = 0.0;  // p + 25 lambda epsilon
  bool holds = false;  // every class satisfies open_prob <= 1-(1-p)(1-q)^25 <= bound
  std::vector<EdgeClassCoverage> classes;
};

// Exact per-edge-class coverage count and the p + 25*lambda*eps domination
// bound for the sprinkle geometry at scale N.
DominationReport sprinkle_domination_check(int dim, int N, double p, double sprinkle_p);

}  // namespace perc::renorm
