#include "perc/crosscheck.hpp"

#include <cmath>

#include "perc/estimators.hpp"
#include "perc/oracle.hpp"

namespace perc::crosscheck {

namespace {

constexpr double kGrid[] = {0.3, 0.5, 0.7};

CheckResult compare(std::string name, double p, double mc_mean, double mc_se, double exact,
                    double sigmas, std::uint64_t samples = 0) {
  CheckResult r;
  r.name = std::move(name);
  r.p = p;
  r.mc_mean = mc_mean;
  r.mc_std_error = mc_se;
  r.exact = exact;
  // When the empirical estimate degenerates to 0 or 1 its binomial standard
  // error vanishes; fall back to the one implied by the exact probability.
  double se = mc_se;
  if (samples > 0 && exact > 0.0 && exact < 1.0)
    se = std::max(se, std::sqrt(exact * (1.0 - exact) / static_cast<double>(samples)));
  if (se > 0.0) {
    r.z = std::abs(mc_mean - exact) / se;
    r.pass = r.z <= sigmas;
  } else {
    r.z = 0.0;
    r.pass = std::abs(mc_mean - exact) < 1e-12;
  }
  return r;
}

}  // namespace

std::vector<CheckResult> core_suite(std::uint64_t samples, std::uint64_t seed, int threads,
                                    double sigmas) {
  using namespace perc::oracle;
  std::vector<CheckResult> out;

  OracleEval one_arm_ev(lambda1_one_arm_d2());
  OracleEval two_point_ev(lambda1_two_point_d2(Site::of({1, 0})));
  OracleEval two_arm_ev(quadrant_two_arm_d2());
  OracleEval qpiv_host(quadrant_box_to_boundary_d2());
  OracleEval easy_ev(easy_way_d2(1));
  OracleEval qface_ev(lambda1_quarter_face_d2());
  OracleEval bdry_ev(lambda1_one_arm_d2());
  OracleEval sink_ev(box2_sink_box_to_boundary_d2());

  // d=3 crossing instance for the reach kernel used by slab_theta.
  std::vector<int> dims3{2, 2, 2};
  Region rect3 = Region::rectangle(3, dims3);
  std::vector<Site> lo3, hi3;
  for (const Site& s : rect3.sites()) {
    if (s.c[0] == 0) lo3.push_back(s);
    if (s.c[0] == 1) hi3.push_back(s);
  }
  OracleEval cross3_ev(from_region_connect(rect3, Region::custom(3, lo3),
                                           Region::custom(3, hi3), "rect-2x2x2-crossing-d3"));

  const Region quadrant = quadrant_region_d2();
  const OracleInstance& qinst = qpiv_host.instance();
  // Three designated quadrant edges: one touching box(1), one in the middle,
  // one at the outer rim.
  std::vector<Edge> qedges{Edge{Site::of({1, 0}), 0}, Edge{Site::of({0, 1}), 1},
                           Edge{Site::of({2, 1}), 1}};

  int check_seed = 0;
  auto next_seed = [&] { return seed ^ mix64(static_cast<std::uint64_t>(++check_seed)); };

  for (double p : kGrid) {
    {
      Estimate est = one_arm(2, 1, p, samples, next_seed(), threads);
      out.push_back(compare("one-arm n=1 d=2", p, est.mean, est.std_error,
                            one_arm_ev.prob_at(p), sigmas, samples));
    }
    {
      Estimate est = two_point(2, Site::of({1, 0}), 1, p, samples, next_seed(), threads);
      out.push_back(compare("two-point x=(1,0) n=1 d=2", p, est.mean, est.std_error,
                            two_point_ev.prob_at(p), sigmas, samples));
    }
    {
      CrossingCountEvent ev{quadrant, Region::box(2, 1), Region::boundary(2, 2), 2};
      Estimate est = estimate_event(EventSpec{ev}, p, samples, next_seed(), threads);
      out.push_back(compare("two-arm count>=2 on quadrant (m,n)=(1,2)", p, est.mean,
                            est.std_error, two_arm_ev.prob_at(p), sigmas, samples));
    }
    for (const Edge& e : qedges) {
      int ei = -1;
      for (std::size_t j = 0; j < qinst.edges.size(); ++j) {
        const auto& [u, v] = qinst.edges[j];
        if (qinst.sites[static_cast<std::size_t>(u)] == e.base &&
            qinst.sites[static_cast<std::size_t>(v)] == e.other())
          ei = static_cast<int>(j);
      }
      Estimate est = closed_pivotal_prob(quadrant, Region::box(2, 1), Region::boundary(2, 2), e,
                                         p, samples, next_seed(), threads);
      out.push_back(compare("closed-pivotal edge (" + std::to_string(e.base.c[0]) + "," +
                                std::to_string(e.base.c[1]) + ")+a" + std::to_string(e.axis) +
                                " on quadrant",
                            p, est.mean, est.std_error, qpiv_host.edge_closed_pivotal_at(ei, p),
                            sigmas, samples));
    }
    {
      Region pair = Region::custom(2, {Site{}, Site::of({1, 0})});
      PhiEstimate est = phi_mc(pair, p, samples, next_seed(), threads);
      out.push_back(compare("phi S={0,(1,0)} d=2", p, est.value, est.std_error,
                            exact_phi(pair, p), sigmas));
    }
    {
      Estimate est = estimate_event(EventSpec{EasyWayEvent{2, 1}}, p, samples, next_seed(),
                                    threads);
      out.push_back(compare("easy-way N=1 d=2", p, est.mean, est.std_error, easy_ev.prob_at(p),
                            sigmas, samples));
    }
    {
      auto [bdry, face] = quarter_face_prob(2, 0, 1, p, samples, next_seed(), threads);
      out.push_back(compare("quarter-face boundary k=0 N=1 d=2", p, bdry.mean, bdry.std_error,
                            bdry_ev.prob_at(p), sigmas, samples));
      out.push_back(compare("quarter-face F(1) k=0 N=1 d=2", p, face.mean, face.std_error,
                            qface_ev.prob_at(p), sigmas, samples));
    }
    {
      Estimate est = estimate_event(EventSpec{BoxToBoundaryEvent{2, 1, 2}}, p, samples,
                                    next_seed(), threads);
      out.push_back(compare("box(1)<->boundary(2) vs contracted sink", p, est.mean,
                            est.std_error, sink_ev.prob_at(p), sigmas, samples));
    }
    {
      std::vector<int> dims{2, 2, 2};
      Estimate est = estimate_event(EventSpec{CrossingEvent{3, dims, 0}}, p, samples,
                                    next_seed(), threads);
      out.push_back(compare("2x2x2 crossing d=3 (slab reach kernel)", p, est.mean,
                            est.std_error, cross3_ev.prob_at(p), sigmas, samples));
    }
    {
      RussoMc r = russo_derivative_mc(EventSpec{OneArmEvent{2, 1}}, p, samples, next_seed(),
                                      0.02, threads);
      // Central difference of the exact polynomial at the same step, so the
      // discretisation bias cancels and only sampling noise remains.
      double exact_fd =
          (one_arm_ev.prob_at(p + 0.02) - one_arm_ev.prob_at(p - 0.02)) / 0.04;
      out.push_back(compare("russo derivative one-arm n=1 d=2", p, r.derivative,
                            r.derivative_std_error, exact_fd, sigmas));
      out.push_back(compare("russo pivotal sum one-arm n=1 d=2", p, r.pivotal_sum,
                            r.pivotal_sum_std_error, one_arm_ev.pivotal_sum_at(p), sigmas));
    }
  }
  return out;
}

bool all_pass(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace perc::crosscheck
