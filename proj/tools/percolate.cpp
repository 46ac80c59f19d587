// percolate: batch front door for the percolation laboratory.
//
// Every subcommand builds a manifest (the semantic parameters of the run),
// executes it, and writes a JSON record (plus CSV for curves) into an output
// directory keyed by the manifest hash. Identical manifests produce
// bit-identical outputs regardless of --threads.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "perc/crosscheck.hpp"
#include "perc/estimators.hpp"
#include "perc/oracle.hpp"
#include "perc/records.hpp"
#include "perc/renorm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace perc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPrecondition = 2;
constexpr int kExitBudget = 3;
constexpr int kExitUsage = 64;

struct BudgetExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_grid(const std::string& text) {
  // "lo:hi:count" or a comma list.
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double lo, hi;
    int count;
    char c1, c2;
    std::istringstream is(text);
    if (!(is >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 2)
      throw std::invalid_argument("bad grid '" + text + "', expected lo:hi:count");
    for (int i = 0; i < count; ++i) out.push_back(lo + (hi - lo) * i / (count - 1));
    return out;
  }
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

Site parse_site_arg(const std::string& text, int dim) {
  std::vector<int> coords = parse_int_list(text);
  if (static_cast<int>(coords.size()) != dim)
    throw std::invalid_argument("site needs exactly d coordinates");
  Site s;
  for (int i = 0; i < dim; ++i) s.c[i] = coords[static_cast<std::size_t>(i)];
  return s;
}

std::string curve_csv(const SweepCurve& curve) {
  std::ostringstream os;
  os << "p,mean,std_error,count,samples\n";
  for (std::size_t i = 0; i < curve.p_grid.size(); ++i) {
    const Estimate& e = curve.estimates[i];
    os << curve.p_grid[i] << ',' << e.mean << ',' << e.std_error << ',' << e.count << ','
       << e.samples << '\n';
  }
  return os.str();
}

json fit_to_json(const CorrelationLengthFit& fit) {
  json points = json::array();
  for (const auto& pt : fit.points)
    points.push_back({{"n", pt.n}, {"mean", pt.mean}, {"std_error", pt.std_error}});
  return json{{"p", fit.p},
              {"regime", fit.regime == XiRegime::subcritical ? "sub" : "super"},
              {"truncation_M", fit.truncation_m},
              {"points", points},
              {"dropped", fit.dropped},
              {"slope", fit.slope},
              {"slope_std_error", fit.slope_std_error},
              {"xi", fit.xi},
              {"xi_std_error", fit.xi_std_error},
              {"r2", fit.r2},
              {"ok", fit.ok},
              {"infinite", fit.infinite},
              {"note", fit.note}};
}

// Runs one manifest; returns (exit code, summary line). The manifest carries
// only semantic parameters, never the worker count.
int run_manifest(const json& m, const fs::path& outdir, int threads) {
  const std::string cmd = m.at("command").get<std::string>();
  auto u64 = [&](const char* key) { return m.at(key).get<std::uint64_t>(); };
  auto i32 = [&](const char* key) { return m.at(key).get<int>(); };
  auto f64 = [&](const char* key) { return m.at(key).get<double>(); };

  if (cmd == "one-arm") {
    Estimate e = one_arm(i32("d"), i32("n"), f64("p"), u64("samples"), u64("seed"), threads);
    auto wr = records::write_record(outdir, cmd, m, records::estimate_to_json(e));
    std::cout << "one-arm d=" << i32("d") << " n=" << i32("n") << " p=" << f64("p")
              << " mean=" << e.mean << " se=" << e.std_error << " -> " << wr.record_path.string()
              << "\n";
    return kExitOk;
  }
  if (cmd == "two-arm") {
    Estimate e =
        two_arm(i32("d"), i32("m"), i32("n"), f64("p"), u64("samples"), u64("seed"), threads);
    auto wr = records::write_record(outdir, cmd, m, records::estimate_to_json(e));
    std::cout << "two-arm d=" << i32("d") << " (m,n)=(" << i32("m") << ',' << i32("n")
              << ") p=" << f64("p") << " mean=" << e.mean << " se=" << e.std_error << " -> "
              << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "two-point") {
    Site x = parse_site_arg(m.at("x").get<std::string>(), i32("d"));
    Estimate e = two_point(i32("d"), x, i32("n"), f64("p"), u64("samples"), u64("seed"), threads);
    auto wr = records::write_record(outdir, cmd, m, records::estimate_to_json(e));
    std::cout << "two-point mean=" << e.mean << " se=" << e.std_error << " -> "
              << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "quarter-face") {
    auto [bdry, face] = quarter_face_prob(i32("d"), i32("k"), i32("N"), f64("p"), u64("samples"),
                                          u64("seed"), threads);
    json result{{"boundary", records::estimate_to_json(bdry)},
                {"face", records::estimate_to_json(face)}};
    auto wr = records::write_record(outdir, cmd, m, result);
    std::cout << "quarter-face P[bdry]=" << bdry.mean << " P[face]=" << face.mean << " -> "
              << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "slab-theta") {
    Estimate e =
        slab_theta(i32("d"), f64("p"), i32("n"), i32("R"), u64("samples"), u64("seed"), threads);
    auto wr = records::write_record(outdir, cmd, m, records::estimate_to_json(e));
    std::cout << "slab-theta d=" << i32("d") << " n=" << i32("n") << " R=" << i32("R")
              << " mean=" << e.mean << " -> " << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "f-curve") {
    std::vector<double> grid = parse_grid(m.at("p_grid").get<std::string>());
    SweepCurve curve =
        f_curve(i32("d"), i32("n"), f64("beta"), grid, u64("samples"), u64("seed"), threads);
    json result{{"monotone", pathwise_monotone(curve)},
                {"first_mean", curve.estimates.front().mean},
                {"last_mean", curve.estimates.back().mean}};
    auto wr = records::write_record(outdir, cmd, m, result, curve_csv(curve));
    std::cout << "f-curve d=" << i32("d") << " n=" << i32("n") << " points=" << grid.size()
              << " monotone=" << pathwise_monotone(curve) << " -> " << wr.curve_path->string()
              << "\n";
    return kExitOk;
  }
  if (cmd == "pivotal-scan") {
    PivotalScan scan = max_closed_pivotal(i32("d"), i32("m"), i32("n"), f64("p"), u64("samples"),
                                          u64("seed"), i32("edge_sample"), threads);
    std::ostringstream csv;
    csv << "base,axis,stratum,mean,std_error,count\n";
    json edges = json::array();
    for (const auto& ee : scan.edges) {
      csv << to_string(ee.edge.base, i32("d")) << ',' << static_cast<int>(ee.edge.axis) << ','
          << ee.stratum << ',' << ee.estimate.mean << ',' << ee.estimate.std_error << ','
          << ee.estimate.count << '\n';
      edges.push_back({{"base", to_string(ee.edge.base, i32("d"))},
                       {"axis", ee.edge.axis},
                       {"stratum", ee.stratum},
                       {"mean", ee.estimate.mean},
                       {"std_error", ee.estimate.std_error}});
    }
    const auto& best = scan.edges[static_cast<std::size_t>(scan.argmax)];
    json result{{"edges", edges},
                {"max_edge", to_string(best.edge.base, i32("d"))},
                {"max_axis", best.edge.axis},
                {"max_mean", best.estimate.mean},
                {"max_std_error", best.estimate.std_error}};
    auto wr = records::write_record(outdir, cmd, m, result, csv.str());
    std::cout << "pivotal-scan max=" << best.estimate.mean << " at "
              << to_string(best.edge.base, i32("d")) << "+a" << static_cast<int>(best.edge.axis)
              << " -> " << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "fit-xi") {
    std::vector<int> radii = parse_int_list(m.at("n_list").get<std::string>());
    XiRegime regime =
        m.at("regime").get<std::string>() == "super" ? XiRegime::supercritical
                                                     : XiRegime::subcritical;
    CorrelationLengthFit fit = fit_xi(i32("d"), f64("p"), radii, u64("samples"), u64("seed"),
                                      regime, i32("M"), threads);
    std::ostringstream csv;
    csv << "n,mean,std_error,neg_log_mean\n";
    for (const auto& pt : fit.points)
      csv << pt.n << ',' << pt.mean << ',' << pt.std_error << ',' << -std::log(pt.mean) << '\n';
    auto wr = records::write_record(outdir, cmd, m, fit_to_json(fit), csv.str());
    std::cout << "fit-xi p=" << f64("p") << " xi=" << fit.xi << " se=" << fit.xi_std_error
              << " r2=" << fit.r2 << (fit.ok ? "" : " [refused]") << " -> "
              << wr.record_path.string() << "\n";
    return fit.ok || fit.infinite ? kExitOk : kExitPrecondition;
  }
  if (cmd == "fit-nu") {
    std::vector<double> offsets = parse_grid(m.at("offsets").get<std::string>());
    CriticalReference ref = critical_reference(i32("d"), m.value("pc_ref", 0.0));
    NuFit fit = fit_nu(i32("d"), offsets, i32("n_budget"), u64("samples"), u64("seed"), ref,
                       threads);
    std::ostringstream csv;
    csv << "offset,xi,xi_std_error\n";
    for (const auto& pt : fit.points)
      csv << pt.offset << ',' << pt.xi << ',' << pt.xi_std_error << '\n';
    json result{{"exponent", fit.exponent},
                {"exponent_std_error", fit.exponent_std_error},
                {"r2", fit.r2},
                {"ok", fit.ok},
                {"reference", fit.reference},
                {"reference_note", "conjectured value, diagnostic only; never a pass/fail"},
                {"p_c", ref.p_c},
                {"p_c_provenance", ref.provenance}};
    auto wr = records::write_record(outdir, cmd, m, result, csv.str());
    std::cout << "fit-nu exponent=" << fit.exponent << " +- " << fit.exponent_std_error
              << " (reference " << fit.reference << ", diagnostic only) -> "
              << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "locate-pn") {
    CriticalReference ref = critical_reference(i32("d"), m.value("pc_ref", 0.0));
    PnResult res = locate_pn(i32("d"), i32("n"), f64("tolerance"), i32("budget"), ref,
                             u64("samples"), u64("seed"), threads);
    json result{{"p", res.p},         {"xi", res.xi},   {"xi_std_error", res.xi_std_error},
                {"converged", res.converged}, {"evals", res.evals}, {"bracket_lo", res.lo},
                {"bracket_hi", res.hi}};
    auto wr = records::write_record(outdir, cmd, m, result);
    std::cout << "locate-pn n=" << i32("n") << " p=" << res.p << " xi=" << res.xi
              << (res.converged ? "" : " [budget exhausted]") << " -> "
              << wr.record_path.string() << "\n";
    return res.converged ? kExitOk : kExitBudget;
  }
  if (cmd == "phi") {
    Region S = Region::from_text(m.at("S").get<std::string>(), i32("d"));
    PhiEstimate e = phi_mc(S, f64("p"), u64("samples"), u64("seed"), threads);
    json result{{"value", e.value},
                {"std_error", e.std_error},
                {"samples", e.samples},
                {"seed", e.seed}};
    auto wr = records::write_record(outdir, cmd, m, result);
    std::cout << "phi S=" << S.to_text() << " p=" << f64("p") << " value=" << e.value
              << " se=" << e.std_error << " -> " << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "eq6-check") {
    Region S = Region::from_text(m.at("S").get<std::string>(), i32("d"));
    oracle::Eq6Report rep = oracle::check_eq6(S, i32("n"), i32("k"), f64("p"), u64("samples"),
                                              u64("seed"), threads);
    json result{{"lhs", rep.lhs},           {"rhs", rep.rhs},
                {"holds", rep.holds},       {"exact_lhs", rep.exact_lhs},
                {"lhs_std_error", rep.lhs_std_error}, {"margin", rep.margin}};
    auto wr = records::write_record(outdir, cmd, m, result);
    std::cout << "eq6-check lhs=" << rep.lhs << " rhs=" << rep.rhs
              << " holds=" << (rep.holds ? "yes" : "NO") << " -> " << wr.record_path.string()
              << "\n";
    return rep.holds ? kExitOk : kExitError;
  }
  if (cmd == "influence") {
    std::string name = m.at("instance").get<std::string>();
    oracle::OracleInstance inst = name == "dictator"    ? oracle::dictator()
                                  : name == "rect3x3"   ? oracle::rect_crossing_d2(3, 3)
                                  : name == "easy-way-1" ? oracle::easy_way_d2(1)
                                  : name == "quadrant"
                                      ? oracle::quadrant_box_to_boundary_d2()
                                      : throw std::invalid_argument("unknown instance " + name);
    oracle::OracleEval ev(inst);
    oracle::InfluenceReport rep = oracle::influence_report(ev, f64("p"));
    json result{{"instance", name},
                {"edges", ev.edge_count()},
                {"total_influence", rep.total_influence},
                {"variance", rep.variance},
                {"bound", rep.bound},
                {"bound_holds", rep.bound_holds}};
    auto wr = records::write_record(outdir, cmd, m, result);
    std::cout << "influence " << name << " I=" << rep.total_influence << " var=" << rep.variance
              << " bound=" << rep.bound << " holds=" << (rep.bound_holds ? "yes" : "NO")
              << " -> " << wr.record_path.string() << "\n";
    return rep.bound_holds ? kExitOk : kExitError;
  }
  if (cmd == "oracle-verify") {
    auto results = crosscheck::core_suite(u64("samples"), u64("seed"), threads);
    json lines = json::array();
    bool ok = crosscheck::all_pass(results);
    for (const auto& r : results) {
      std::cout << (r.pass ? "[pass] " : "[FAIL] ") << r.name << " p=" << r.p
                << " mc=" << r.mc_mean << " exact=" << r.exact << " z=" << r.z << "\n";
      lines.push_back({{"name", r.name},
                       {"p", r.p},
                       {"mc", r.mc_mean},
                       {"std_error", r.mc_std_error},
                       {"exact", r.exact},
                       {"z", r.z},
                       {"pass", r.pass}});
    }
    json result{{"checks", lines}, {"all_pass", ok}};
    auto wr = records::write_record(outdir, cmd, m, result);
    std::cout << "oracle-verify " << (ok ? "all checks passed" : "FAILURES") << " -> "
              << wr.record_path.string() << "\n";
    return ok ? kExitOk : kExitError;
  }
  if (cmd == "renorm-conditions") {
    auto params = renorm::RenormParams::make(i32("d"), f64("p"), f64("epsilon"), f64("lambda"),
                                             i32("k"), i32("K"), i32("n"), i32("N"));
    renorm::ConditionReport rep =
        renorm::check_conditions(params, u64("samples"), u64("seed"), threads);
    json result{{"a", records::estimate_to_json(rep.a)},
                {"b", records::estimate_to_json(rep.b)},
                {"c1", records::estimate_to_json(rep.c1)},
                {"c2", records::estimate_to_json(rep.c2)},
                {"a_pass", rep.a_pass},
                {"b_pass", rep.b_pass},
                {"c1_pass", rep.c1_pass},
                {"c2_pass", rep.c2_pass},
                {"all_pass", rep.all_pass},
                {"threshold_a", rep.eps_threshold_a},
                {"threshold_b", rep.threshold_b},
                {"threshold_c", rep.threshold_c}};
    auto wr = records::write_record(outdir, cmd, m, result);
    std::cout << "renorm-conditions a=" << rep.a.mean << " b=" << rep.b.mean
              << " c1=" << rep.c1.mean << " c2=" << rep.c2.mean
              << " all_pass=" << (rep.all_pass ? "yes" : "no") << " -> "
              << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "renorm-run") {
    auto env = renorm::SlabEnvironment::make(i32("d"), i32("N"), i32("window"), f64("p"),
                                             f64("epsilon") * f64("lambda"), u64("seed"));
    int traces_n = i32("traces");
    int max_steps = i32("max_steps");
    auto traces = renorm::run_exploration_batch(env, traces_n, max_steps, threads);
    double q = m.value("q", 0.593);  // EXTERNAL-REFERENCE default, never asserted
    std::uint64_t perc = 0;
    for (const auto& tr : traces)
      perc += tr.outcome == renorm::Outcome::percolates_window ? 1 : 0;
    json result{{"traces", traces_n},
                {"percolating", perc},
                {"percolating_fraction", static_cast<double>(perc) / traces_n},
                {"q_threshold", q},
                {"q_threshold_note", "EXTERNAL-REFERENCE configuration value"}};
    if (traces.size() >= 100) {
      renorm::GmReport gm = renorm::gm_criterion_estimate(traces, q);
      result["gm_acceptance_mean"] = gm.overall.mean;
      result["gm_acceptance_std_error"] = gm.overall.std_error;
      result["gm_meets_threshold"] = gm.meets_threshold;
    }
    std::ostringstream jsonl;
    for (const auto& tr : traces) jsonl << renorm::trace_to_jsonl(tr);
    auto wr = records::write_record(outdir, cmd, m, result, jsonl.str());
    std::cout << "renorm-run traces=" << traces_n << " percolating=" << perc << " -> "
              << wr.record_path.string() << "\n";
    return kExitOk;
  }
  if (cmd == "sprinkle") {
    int d = i32("d");
    Region A = Region::from_text(m.at("A").get<std::string>(), d);
    Region B = Region::from_text(m.at("B").get<std::string>(), d);
    Region R = Region::from_text(m.at("R").get<std::string>(), d);
    renorm::SprinkleReport rep = renorm::sprinkle_experiment(
        A, B, R, f64("p"), f64("eta"), f64("epsilon"), f64("delta"), f64("lambda_max"),
        i32("lambda_points"), u64("samples"), u64("seed"), threads);
    std::ostringstream csv;
    csv << "lambda,mean,std_error,conditioned_samples\n";
    json curve = json::array();
    for (const auto& pt : rep.curve) {
      csv << pt.lambda << ',' << pt.conditional.mean << ',' << pt.conditional.std_error << ','
          << rep.conditioned_samples << '\n';
      curve.push_back({{"lambda", pt.lambda},
                       {"mean", pt.conditional.mean},
                       {"std_error", pt.conditional.std_error}});
    }
    json result{{"unconditioned", records::estimate_to_json(rep.unconditioned)},
                {"hypothesis_threshold", rep.hypothesis_threshold},
                {"hypothesis_ok", rep.hypothesis_ok},
                {"conditioned_samples", rep.conditioned_samples},
                {"curve", curve}};
    if (rep.least_adequate_lambda) result["least_adequate_lambda"] = *rep.least_adequate_lambda;
    auto wr = records::write_record(outdir, cmd, m, result, csv.str());
    std::cout << "sprinkle uncond=" << rep.unconditioned.mean << " accepted="
              << rep.conditioned_samples;
    if (rep.least_adequate_lambda) std::cout << " lambda*=" << *rep.least_adequate_lambda;
    std::cout << " -> " << wr.record_path.string() << "\n";
    return kExitOk;
  }
  throw std::invalid_argument("unknown command in manifest: " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"percolate: Monte Carlo and exact-enumeration laboratory for bond percolation"};
  app.require_subcommand(0, 1);

  std::string out_dir = [] {
    const char* env = std::getenv("PERC_OUT_DIR");
    return env ? std::string(env) : std::string("perc-out");
  }();
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  std::string replay_path;
  app.add_option("--out", out_dir, "output directory (env PERC_OUT_DIR)");
  app.add_option("--threads", threads, "worker pool size (does not affect results)");
  app.add_option("--replay", replay_path, "re-execute the manifest embedded in a record");

  // Shared parameter cells; each subcommand wires the ones it uses.
  int d = 2, n = 8, mm = 1, N = 2, k = 0, K = 1, R = 0, edge_sample = 10, budget = 20;
  int window = 8, traces_n = 1, max_steps = -1, lambda_points = 8, n_budget = 24;
  double p = 0.5, beta = 0.5, tolerance = 0.25, eps = 0.5, lambda = 0.2, eta = 1.0, delta = 0.2;
  double lambda_max = 1.0, pc_ref = 0.0, q_thresh = 0.593;
  int M = 4;
  std::uint64_t samples = 10000, seed = 1;
  std::string p_grid = "0.35:0.65:21", n_list = "8,16,24,32", offsets = "0.02,0.04,0.06,0.08";
  std::string x_arg = "1,0", S_arg = "box(n=1)", regime = "sub", suite = "core";
  std::string A_arg = "box(n=1)", B_arg = "boundary(n=4)@(0,0)", R_arg = "box(n=4)";
  std::string instance = "rect3x3";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--d", d, "dimension");
    sub->add_option("--samples", samples, "Monte Carlo samples");
    sub->add_option("--seed", seed, "base seed");
  };

  json manifest;

  auto* c_one = app.add_subcommand("one-arm", "P[0 <-> boundary(n)] inside box(n)");
  add_common(c_one);
  c_one->add_option("--n", n)->required();
  c_one->add_option("--p", p)->required();
  c_one->callback([&] {
    manifest = {{"command", "one-arm"}, {"d", d}, {"n", n}, {"p", p},
                {"samples", samples},   {"seed", seed}};
  });

  auto* c_two = app.add_subcommand("two-arm", "P[A_2(m,n)]: two disjoint crossing clusters");
  add_common(c_two);
  c_two->add_option("--m", mm)->required();
  c_two->add_option("--n", n)->required();
  c_two->add_option("--p", p)->required();
  c_two->callback([&] {
    manifest = {{"command", "two-arm"}, {"d", d}, {"m", mm}, {"n", n},
                {"p", p},               {"samples", samples}, {"seed", seed}};
  });

  auto* c_tp = app.add_subcommand("two-point", "P[0 <-> x] inside box(n)");
  add_common(c_tp);
  c_tp->add_option("--x", x_arg, "comma-separated coordinates")->required();
  c_tp->add_option("--n", n)->required();
  c_tp->add_option("--p", p)->required();
  c_tp->callback([&] {
    manifest = {{"command", "two-point"}, {"d", d}, {"x", x_arg}, {"n", n},
                {"p", p},                 {"samples", samples},   {"seed", seed}};
  });

  auto* c_qf = app.add_subcommand("quarter-face", "square-root-trick pair on shared samples");
  add_common(c_qf);
  c_qf->add_option("--k", k)->required();
  c_qf->add_option("--N", N)->required();
  c_qf->add_option("--p", p)->required();
  c_qf->callback([&] {
    manifest = {{"command", "quarter-face"}, {"d", d}, {"k", k}, {"N", N},
                {"p", p},                    {"samples", samples}, {"seed", seed}};
  });

  auto* c_st = app.add_subcommand("slab-theta", "slab connection proxy with truncation R");
  add_common(c_st);
  c_st->add_option("--n", n)->required();
  c_st->add_option("--R", R)->required();
  c_st->add_option("--p", p)->required();
  c_st->callback([&] {
    manifest = {{"command", "slab-theta"}, {"d", d}, {"n", n}, {"R", R},
                {"p", p},                  {"samples", samples}, {"seed", seed}};
  });

  auto* c_fc = app.add_subcommand("f-curve", "sweep of P[box(n^beta) <-> boundary(n)]");
  add_common(c_fc);
  c_fc->add_option("--n", n)->required();
  c_fc->add_option("--beta", beta)->required();
  c_fc->add_option("--p-grid", p_grid, "lo:hi:count or comma list");
  c_fc->callback([&] {
    manifest = {{"command", "f-curve"}, {"d", d}, {"n", n}, {"beta", beta},
                {"p_grid", p_grid},     {"samples", samples}, {"seed", seed}};
  });

  auto* c_ps = app.add_subcommand("pivotal-scan", "closed-pivotal scan over stratified edges");
  add_common(c_ps);
  c_ps->add_option("--m", mm)->required();
  c_ps->add_option("--n", n)->required();
  c_ps->add_option("--p", p)->required();
  c_ps->add_option("--edge-sample", edge_sample);
  c_ps->callback([&] {
    manifest = {{"command", "pivotal-scan"}, {"d", d}, {"m", mm}, {"n", n}, {"p", p},
                {"edge_sample", edge_sample}, {"samples", samples}, {"seed", seed}};
  });

  auto* c_fx = app.add_subcommand("fit-xi", "correlation length fit from one-arm decay");
  add_common(c_fx);
  c_fx->add_option("--p", p)->required();
  c_fx->add_option("--n", n_list, "comma-separated radii");
  c_fx->add_option("--regime", regime, "sub|super");
  c_fx->add_option("--M", M, "supercritical truncation factor");
  c_fx->callback([&] {
    manifest = {{"command", "fit-xi"}, {"d", d}, {"p", p}, {"n_list", n_list},
                {"regime", regime},    {"M", M}, {"samples", samples}, {"seed", seed}};
  });

  auto* c_fn = app.add_subcommand("fit-nu", "diagnostic critical-exponent fit (never pass/fail)");
  add_common(c_fn);
  c_fn->add_option("--offsets", offsets, "p_c - p values");
  c_fn->add_option("--n-budget", n_budget, "largest radius in the xi ladder");
  c_fn->add_option("--pc-ref", pc_ref, "critical reference (required for d >= 3)");
  c_fn->callback([&] {
    manifest = {{"command", "fit-nu"},   {"d", d},       {"offsets", offsets},
                {"n_budget", n_budget},  {"pc_ref", pc_ref}, {"samples", samples},
                {"seed", seed}};
  });

  auto* c_pn = app.add_subcommand("locate-pn", "smallest p with xi_p = n, by bisection");
  add_common(c_pn);
  c_pn->add_option("--n", n)->required();
  c_pn->add_option("--tolerance", tolerance);
  c_pn->add_option("--budget", budget, "max fit-xi evaluations");
  c_pn->add_option("--pc-ref", pc_ref);
  c_pn->callback([&] {
    manifest = {{"command", "locate-pn"}, {"d", d},       {"n", n},
                {"tolerance", tolerance}, {"budget", budget}, {"pc_ref", pc_ref},
                {"samples", samples},     {"seed", seed}};
  });

  auto* c_phi = app.add_subcommand("phi", "phi_p(S) by Monte Carlo");
  add_common(c_phi);
  c_phi->add_option("--S", S_arg, "region text, e.g. box(n=1)");
  c_phi->add_option("--p", p)->required();
  c_phi->callback([&] {
    manifest = {{"command", "phi"}, {"d", d}, {"S", S_arg}, {"p", p},
                {"samples", samples}, {"seed", seed}};
  });

  auto* c_eq6 = app.add_subcommand("eq6-check", "one-arm vs phi^(k-1) upper bound");
  add_common(c_eq6);
  c_eq6->add_option("--S", S_arg);
  c_eq6->add_option("--n", n)->required();
  c_eq6->add_option("--k", k)->required();
  c_eq6->add_option("--p", p)->required();
  c_eq6->callback([&] {
    manifest = {{"command", "eq6-check"}, {"d", d}, {"S", S_arg}, {"n", n}, {"k", k},
                {"p", p},                 {"samples", samples},   {"seed", seed}};
  });

  auto* c_inf = app.add_subcommand("influence", "exact total influence and its bound");
  c_inf->add_option("--instance", instance, "dictator|rect3x3|easy-way-1|quadrant");
  c_inf->add_option("--p", p)->required();
  c_inf->callback([&] {
    manifest = {{"command", "influence"}, {"instance", instance}, {"p", p}};
  });

  auto* c_ov = app.add_subcommand("oracle-verify", "oracle-vs-MC cross-check suite");
  add_common(c_ov);
  c_ov->add_option("--suite", suite, "core");
  c_ov->callback([&] {
    if (suite != "core") throw CLI::ValidationError("--suite", "only 'core' is defined");
    manifest = {{"command", "oracle-verify"}, {"suite", suite}, {"samples", samples},
                {"seed", seed}};
  });

  auto* c_rc = app.add_subcommand("renorm-conditions", "Monte Carlo check of conditions (a)-(c)");
  add_common(c_rc);
  c_rc->add_option("--p", p)->required();
  c_rc->add_option("--epsilon", eps)->required();
  c_rc->add_option("--lambda", lambda)->required();
  c_rc->add_option("--k", k)->required();
  c_rc->add_option("--K", K)->required();
  c_rc->add_option("--n", n)->required();
  c_rc->add_option("--N", N)->required();
  c_rc->callback([&] {
    manifest = {{"command", "renorm-conditions"}, {"d", d}, {"p", p}, {"epsilon", eps},
                {"lambda", lambda}, {"k", k}, {"K", K}, {"n", n}, {"N", N},
                {"samples", samples}, {"seed", seed}};
  });

  auto* c_rr = app.add_subcommand("renorm-run", "coupled exploration on the sprinkled slab");
  add_common(c_rr);
  c_rr->add_option("--p", p)->required();
  c_rr->add_option("--epsilon", eps)->required();
  c_rr->add_option("--lambda", lambda)->required();
  c_rr->add_option("--N", N)->required();
  c_rr->add_option("--window", window);
  c_rr->add_option("--traces", traces_n);
  c_rr->add_option("--max-steps", max_steps);
  c_rr->add_option("--q", q_thresh, "GM threshold (EXTERNAL-REFERENCE)");
  c_rr->callback([&] {
    manifest = {{"command", "renorm-run"}, {"d", d}, {"p", p}, {"epsilon", eps},
                {"lambda", lambda}, {"N", N},
                {"window", window}, {"traces", traces_n}, {"max_steps", max_steps},
                {"q", q_thresh}, {"seed", seed}};
  });

  auto* c_sp = app.add_subcommand("sprinkle", "conditional reconnection experiment");
  add_common(c_sp);
  c_sp->add_option("--A", A_arg)->required();
  c_sp->add_option("--B", B_arg)->required();
  c_sp->add_option("--R", R_arg)->required();
  c_sp->add_option("--p", p)->required();
  c_sp->add_option("--eta", eta);
  c_sp->add_option("--epsilon", eps)->required();
  c_sp->add_option("--delta", delta);
  c_sp->add_option("--lambda-max", lambda_max);
  c_sp->add_option("--lambda-points", lambda_points);
  c_sp->callback([&] {
    manifest = {{"command", "sprinkle"}, {"d", d}, {"A", A_arg}, {"B", B_arg}, {"R", R_arg},
                {"p", p}, {"eta", eta}, {"epsilon", eps}, {"delta", delta},
                {"lambda_max", lambda_max}, {"lambda_points", lambda_points},
                {"samples", samples}, {"seed", seed}};
  });

  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return kExitUsage;
  }

  try {
    if (!replay_path.empty()) {
      auto record = records::load_record(replay_path);
      json replay_manifest = record.at("manifest");
      std::cout << "replaying manifest " << record.at("manifest_hash").get<std::string>()
                << "\n";
      return run_manifest(replay_manifest, out_dir, threads);
    }
    if (manifest.empty()) {
      std::cerr << app.help() << "\n";
      return kExitUsage;
    }
    manifest["schema_version"] = 1;
    return run_manifest(manifest, out_dir, threads);
  } catch (const BudgetExhausted& e) {
    std::cerr << "budget exhausted: " << e.what() << "\n";
    return kExitBudget;
  } catch (const std::invalid_argument& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
