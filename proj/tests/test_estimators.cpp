#include <doctest.h>

#include <cmath>

#include "perc/estimators.hpp"
#include "perc/oracle.hpp"

using namespace perc;

namespace {
constexpr std::uint64_t kSeed = 20260810;
}

TEST_SUITE("estimators") {

TEST_CASE("constant events") {
  Estimate t = estimate_event(EventSpec{ConstEvent{true}}, 0.5, 1000, kSeed, 1);
  CHECK(t.mean == doctest::Approx(1.0));
  CHECK(t.std_error == doctest::Approx(0.0));
  Estimate f = estimate_event(EventSpec{ConstEvent{false}}, 0.5, 1000, kSeed, 1);
  CHECK(f.mean == doctest::Approx(0.0));
  CHECK(f.std_error == doctest::Approx(0.0));
}

TEST_CASE("one_arm endpoints and closed form") {
  CHECK(one_arm(2, 3, 0.0, 500, kSeed, 1).mean == doctest::Approx(0.0));
  CHECK(one_arm(2, 3, 1.0, 500, kSeed, 1).mean == doctest::Approx(1.0));
  for (int d : {2, 3}) {
    double p = 0.37;
    Estimate e = one_arm(d, 1, p, 20000, kSeed, 2);
    double exact = 1.0 - std::pow(1.0 - p, 2 * d);
    CHECK(std::abs(e.mean - exact) < 3.0 * e.std_error + 1e-9);
  }
}

TEST_CASE("two_arm endpoints") {
  CHECK(two_arm(2, 2, 8, 0.0, 300, kSeed, 1).mean == doctest::Approx(0.0));
  CHECK(two_arm(2, 2, 8, 1.0, 300, kSeed, 1).mean == doctest::Approx(0.0));
  CHECK_THROWS_AS(two_arm(2, 8, 8, 0.5, 10, kSeed, 1), std::invalid_argument);
}

TEST_CASE("two_arm decays as the annulus modulus grows") {
  // Fixed inner scale, growing outer scale: the two-arm probability decays.
  // (At a fixed modulus it converges to its scaling limit instead, so the
  // decay must be probed in the ratio.)
  Estimate a = two_arm(2, 2, 8, 0.5, 20000, kSeed, 2);
  Estimate b = two_arm(2, 2, 16, 0.5, 20000, kSeed + 1, 2);
  Estimate c = two_arm(2, 2, 32, 0.5, 20000, kSeed + 2, 2);
  double se_ab = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  double se_bc = std::sqrt(b.std_error * b.std_error + c.std_error * c.std_error);
  CHECK(b.mean <= a.mean + 3.0 * se_ab);
  CHECK(c.mean <= b.mean + 3.0 * se_bc);
  CHECK(a.mean - c.mean >
        3.0 * std::sqrt(a.std_error * a.std_error + c.std_error * c.std_error));
}

TEST_CASE("determinism across runs and worker counts") {
  Estimate a = one_arm(2, 8, 0.45, 4000, 77, 1);
  Estimate b = one_arm(2, 8, 0.45, 4000, 77, 3);
  Estimate c = one_arm(2, 8, 0.45, 4000, 77, 2);
  CHECK(a.count == b.count);
  CHECK(a.count == c.count);
  Estimate again = one_arm(2, 8, 0.45, 4000, 77, 3);
  CHECK(again.count == a.count);
}

TEST_CASE("sweep curves are exactly pathwise monotone") {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
  SweepCurve curve = sweep_event(EventSpec{OneArmEvent{2, 4}}, grid, 2000, kSeed, 2);
  CHECK(pathwise_monotone(curve));
  CHECK(curve.estimates.front().mean == doctest::Approx(0.0));
  CHECK(curve.estimates.back().mean == doctest::Approx(1.0));
  CHECK_THROWS_AS(sweep_event(EventSpec{OneArmEvent{2, 4}},
                              std::vector<double>{0.5, 0.3}, 100, kSeed, 1),
                  std::invalid_argument);
}

TEST_CASE("f_curve crosses one half near the planar threshold") {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.35 + 0.3 * i / 20.0);
  SweepCurve curve = f_curve(2, 32, 0.5, grid, 3000, kSeed, 2);
  CHECK(pathwise_monotone(curve));
  double crossing = -1.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (curve.estimates[i - 1].mean <= 0.5 && curve.estimates[i].mean >= 0.5) {
      double a = curve.estimates[i - 1].mean, b = curve.estimates[i].mean;
      crossing = grid[i - 1] + (0.5 - a) / (b - a) * (grid[i] - grid[i - 1]);
      break;
    }
  }
  CHECK(crossing > 0.45);
  CHECK(crossing < 0.55);
}

TEST_CASE("larger boxes give steeper f curves") {
  std::vector<double> grid;
  for (int i = 0; i <= 12; ++i) grid.push_back(0.38 + 0.24 * i / 12.0);
  auto max_slope = [&](int n) {
    SweepCurve c = f_curve(2, n, 0.5, grid, 6000, kSeed, 2);
    double best = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      best = std::max(best, (c.estimates[i].mean - c.estimates[i - 1].mean) /
                                (grid[i] - grid[i - 1]));
    return best;
  };
  CHECK(max_slope(48) > max_slope(12));
}

TEST_CASE("quarter_face_prob endpoints and square-root trick") {
  auto [b1, f1] = quarter_face_prob(2, 2, 8, 1.0, 200, kSeed, 1);
  CHECK(b1.mean == doctest::Approx(1.0));
  CHECK(f1.mean == doctest::Approx(1.0));
  auto [b0, f0] = quarter_face_prob(2, 2, 8, 0.0, 200, kSeed, 1);
  CHECK(b0.mean == doctest::Approx(0.0));
  CHECK(f0.mean == doctest::Approx(0.0));

  auto [bdry, face] = quarter_face_prob(2, 2, 8, 0.55, 20000, kSeed, 2);
  // 1 - P[face] <= (1 - P[boundary])^(1/(d 2^d)) within noise.
  double lhs = 1.0 - face.mean;
  double rhs = std::pow(1.0 - bdry.mean, 1.0 / 8.0);
  CHECK(lhs <= rhs + 3.0 * face.std_error);
}

TEST_CASE("slab_theta endpoints, truncation stability, and rejections") {
  CHECK(slab_theta(3, 1.0, 1, 4, 100, kSeed, 1).mean == doctest::Approx(1.0));
  CHECK(slab_theta(3, 0.0, 1, 4, 100, kSeed, 1).mean == doctest::Approx(0.0));
  CHECK_THROWS_AS(slab_theta(2, 0.5, 2, 8, 10, kSeed, 1), std::invalid_argument);
  CHECK_THROWS_AS(slab_theta(3, 0.5, 2, 7, 10, kSeed, 1), std::invalid_argument);

  Estimate r8 = slab_theta(3, 0.6, 2, 8, 3000, kSeed, 2);
  Estimate r16 = slab_theta(3, 0.6, 2, 16, 3000, kSeed + 1, 2);
  double gap = std::abs(r8.mean - r16.mean);
  CHECK(gap <= 3.0 * std::sqrt(r8.std_error * r8.std_error + r16.std_error * r16.std_error));
}

TEST_CASE("two_point basics") {
  CHECK(two_point(2, Site{}, 1, 0.3, 100, kSeed, 1).mean == doctest::Approx(1.0));
  CHECK(two_point(2, Site::of({1, 0}), 1, 0.0, 100, kSeed, 1).mean == doctest::Approx(0.0));
  CHECK_THROWS_AS(two_point(2, Site::of({3, 0}), 1, 0.5, 10, kSeed, 1),
                  std::invalid_argument);
}

TEST_CASE("phi_mc on the single-site set is exact") {
  Region origin_only = Region::custom(2, {Site{}});
  PhiEstimate e = phi_mc(origin_only, 0.35, 1000, kSeed, 1);
  CHECK(e.value == doctest::Approx(4.0 * 0.35).epsilon(1e-12));
  CHECK(e.std_error == doctest::Approx(0.0));
  PhiEstimate zero = phi_mc(origin_only, 0.0, 1000, kSeed, 1);
  CHECK(zero.value == doctest::Approx(0.0));
}

TEST_CASE("russo derivative against the closed form") {
  RussoMc r = russo_derivative_mc(EventSpec{OneArmEvent{2, 1}}, 0.5, 40000, kSeed, 0.02, 2);
  oracle::OracleEval ev(oracle::lambda1_one_arm_d2());
  double exact_fd = (ev.prob_at(0.52) - ev.prob_at(0.48)) / 0.04;
  CHECK(std::abs(r.derivative - exact_fd) < 3.0 * r.derivative_std_error);
  // Derivative equals the pivotal sum within combined noise (Russo).
  double combined = std::sqrt(r.derivative_std_error * r.derivative_std_error +
                              r.pivotal_sum_std_error * r.pivotal_sum_std_error);
  CHECK(std::abs(r.derivative - r.pivotal_sum) < 3.0 * combined + 0.01);
  CHECK_THROWS_AS(russo_derivative_mc(EventSpec{OneArmEvent{2, 1}}, 0.01, 10, kSeed, 0.02, 1),
                  std::invalid_argument);
}

TEST_CASE("russo derivative is flat near the endpoints") {
  // Non-degenerate annulus event: both the derivative and the pivotal sum
  // are small when p sits at the edge of the unit interval.
  EventSpec ev{BoxToBoundaryEvent{2, 1, 4}};
  RussoMc lo = russo_derivative_mc(ev, 0.02, 8000, kSeed, 0.02, 2);
  RussoMc hi = russo_derivative_mc(ev, 0.98, 8000, kSeed, 0.02, 2);
  CHECK(std::abs(lo.derivative) < 0.35);
  CHECK(lo.pivotal_sum < 0.35);
  CHECK(std::abs(hi.derivative) < 0.35);
  CHECK(hi.pivotal_sum < 0.35);
}

TEST_CASE("fit_nu exponents agree across seeds") {
  std::vector<double> offsets{0.04, 0.06, 0.08, 0.10};
  CriticalReference ref = critical_reference(2);
  NuFit f1 = fit_nu(2, offsets, 18, 6000, 71, ref, 2);
  NuFit f2 = fit_nu(2, offsets, 18, 6000, 72, ref, 2);
  REQUIRE(f1.ok);
  REQUIRE(f2.ok);
  double combined = std::sqrt(f1.exponent_std_error * f1.exponent_std_error +
                              f2.exponent_std_error * f2.exponent_std_error);
  CHECK(std::abs(f1.exponent - f2.exponent) <= 3.0 * combined + 0.05);
}

TEST_CASE("max_closed_pivotal extremes") {
  PivotalScan at_one = max_closed_pivotal(2, 2, 8, 1.0, 500, kSeed, 10, 1);
  for (const auto& ee : at_one.edges) CHECK(ee.estimate.mean == doctest::Approx(0.0));
  CHECK_THROWS_AS(max_closed_pivotal(2, 8, 8, 0.5, 10, kSeed, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(max_closed_pivotal(2, 1, 2, 0.5, 10, kSeed, 10000, 1),
                  std::invalid_argument);

  // Per-edge agreement with the definitional estimator on a small annulus.
  PivotalScan scan = max_closed_pivotal(2, 1, 3, 0.5, 20000, kSeed, 8, 2);
  for (const auto& ee : scan.edges) {
    Estimate direct = closed_pivotal_prob(Region::box(2, 3), Region::box(2, 1),
                                          Region::boundary(2, 3), ee.edge, 0.5, 20000,
                                          kSeed + 9, 2);
    double combined = std::sqrt(ee.estimate.std_error * ee.estimate.std_error +
                                direct.std_error * direct.std_error);
    CHECK(std::abs(ee.estimate.mean - direct.mean) <= 3.0 * combined + 1e-9);
  }
}

TEST_CASE("fit_xi_points synthetic inputs") {
  SUBCASE("pure exponential recovers xi exactly") {
    std::vector<XiPoint> pts;
    for (int n : {5, 10, 15, 20})
      pts.push_back(XiPoint{n, std::exp(-n / 5.0), 1e-6 * std::exp(-n / 5.0)});
    auto fit = fit_xi_points(pts, 0.3, XiRegime::subcritical, 4);
    CHECK(fit.ok);
    CHECK(fit.xi == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("flat inputs are flagged infinite") {
    std::vector<XiPoint> pts;
    for (int n : {5, 10, 15, 20}) pts.push_back(XiPoint{n, 0.5, 1e-6});
    auto fit = fit_xi_points(pts, 0.3, XiRegime::subcritical, 4);
    CHECK(!fit.ok);
    CHECK(fit.infinite);
  }
  SUBCASE("degenerate estimates are dropped, too few points refuse") {
    std::vector<XiPoint> pts{{4, 0.5, 0.01}, {8, 0.0, 0.0}, {12, 1.0, 0.0}, {16, 0.2, 0.01}};
    auto fit = fit_xi_points(pts, 0.3, XiRegime::subcritical, 4);
    CHECK(!fit.ok);
    CHECK(fit.dropped.size() == 2);
    CHECK(fit.note.find("refused") != std::string::npos);
  }
}

TEST_CASE("fit_xi two seeds agree at desk scale") {
  std::vector<int> radii{4, 8, 12};
  auto f1 = fit_xi(2, 0.35, radii, 20000, 11, XiRegime::subcritical, 4, 2);
  auto f2 = fit_xi(2, 0.35, radii, 20000, 1234567, XiRegime::subcritical, 4, 2);
  REQUIRE(f1.ok);
  REQUIRE(f2.ok);
  double combined =
      std::sqrt(f1.xi_std_error * f1.xi_std_error + f2.xi_std_error * f2.xi_std_error);
  CHECK(std::abs(f1.xi - f2.xi) <= 3.0 * combined);
}

TEST_CASE("supercritical regime uses the truncated proxy") {
  std::vector<int> radii{2, 4, 6};
  auto fit = fit_xi(2, 0.65, radii, 20000, 5, XiRegime::supercritical, 4, 2);
  CHECK(fit.truncation_m == 4);
  // The truncated event probability decays, so a finite xi comes out.
  CHECK((fit.ok || fit.infinite));
}

TEST_CASE("fit_nu_points recovers a synthetic power law") {
  std::vector<NuPoint> pts;
  for (double off : {0.02, 0.04, 0.06, 0.08})
    pts.push_back(NuPoint{off, std::pow(off, -4.0 / 3.0), 1e-6});
  NuFit fit = fit_nu_points(pts, 2);
  CHECK(fit.ok);
  CHECK(std::abs(fit.exponent - 4.0 / 3.0) < 0.01);
  CHECK(fit.reference == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("critical reference rules") {
  CriticalReference d2 = critical_reference(2);
  CHECK(d2.p_c == doctest::Approx(0.5));
  CHECK(d2.provenance.find("duality") != std::string::npos);
  CHECK_THROWS_AS(critical_reference(3), std::invalid_argument);
  CriticalReference user = critical_reference(3, 0.2488);
  CHECK(user.provenance.find("user") != std::string::npos);
}

TEST_CASE("fitted critical reference lands near the planar threshold") {
  CriticalReference ref = fit_critical_reference(2, 24, 0.5, 0.35, 0.65, 13, 3000, 17, 2);
  CHECK(ref.p_c > 0.44);
  CHECK(ref.p_c < 0.56);
  CHECK(ref.provenance.find("fitted") != std::string::npos);
}

TEST_CASE("effectively unbounded event regions are rejected") {
  CHECK_THROWS_AS(estimate_event(EventSpec{OneArmEvent{2, 3000}}, 0.5, 1, kSeed, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_event(EventSpec{OneArmEvent{3, 200}}, 0.5, 1, kSeed, 1),
                  std::invalid_argument);
}

TEST_CASE("locate_pn sanity at desk scale") {
  CriticalReference ref = critical_reference(2);
  PnResult r4 = locate_pn(2, 4, 0.3, 12, ref, 4000, 21, 2);
  CHECK(r4.p > 0.05);
  CHECK(r4.p < 0.5);
  // Postcondition restated: the fitted xi is within tolerance when converged.
  if (r4.converged) CHECK(std::abs(r4.xi - 4.0) <= 0.3 * 4.0 + 1e-9);
  PnResult r8 = locate_pn(2, 8, 0.3, 12, ref, 4000, 22, 2);
  CHECK(r4.p <= r8.p + 0.05);  // xi_p increases in p below p_c
  CHECK(r8.p < 0.5);
  // Degenerate small target sits well below the critical reference.
  PnResult r2 = locate_pn(2, 2, 0.5, 10, ref, 3000, 23, 2);
  CHECK(r2.p < 0.45);
}

TEST_CASE("budget exhaustion returns the best bracket with a warning flag") {
  CriticalReference ref = critical_reference(2);
  PnResult r = locate_pn(2, 8, 1e-6, 2, ref, 1000, 3, 1);
  CHECK(!r.converged);
  CHECK(r.evals == 2);
  CHECK(r.lo <= r.p);
  CHECK(r.p <= r.hi);
}

TEST_CASE("estimate invariants") {
  Estimate e = one_arm(2, 2, 0.4, 5000, kSeed, 2);
  CHECK(e.std_error == doctest::Approx(std::sqrt(e.mean * (1 - e.mean) / e.samples)));
  CHECK(e.mean >= 0.0);
  CHECK(e.mean <= 1.0);
  CHECK(e.manifest.find("one-arm") != std::string::npos);
}

}  // TEST_SUITE
