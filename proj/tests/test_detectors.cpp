#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "ctm/betting.hpp"
#include "ctm/detectors.hpp"
#include "ctm/rng.hpp"

namespace {

// gamma_n = max_{0<=i<n} S_n / S_i and psi_n = sum_{0<=i<n} S_n / S_i.
double brute_gamma(const std::vector<double>& logs, std::size_t n) {
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) best = std::max(best, std::exp(logs[n] - logs[i]));
  return best;
}
double brute_psi(const std::vector<double>& logs, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(logs[n] - logs[i]);
  return sum;
}

TEST(Recursions, MatchBruteForceDefinitions) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    // Drift the p-values on odd seeds so the statistics move far from 1.
    ctm::CounterRng rng(seed);
    ctm::SimpleJumper j;
    std::vector<double> logs{0.0};
    ctm::CusumDetector cusum;
    ctm::ShiryaevRobertsDetector sr;
    ctm::CusumDetector cusum_log;
    ctm::ShiryaevRobertsDetector sr_log;
    for (std::size_t n = 1; n <= 200; ++n) {
      const double u = rng.uniform();
      const double r = j.step(seed % 2 ? u * u : u);
      logs.push_back(j.log_capital());
      const double g = cusum.step_ratio(r).value;
      const double p = sr.step_ratio(r).value;
      const double g2 = cusum_log.step(j.log_capital()).value;
      const double p2 = sr_log.step(j.log_capital()).value;
      const double bg = brute_gamma(logs, n);
      const double bp = brute_psi(logs, n);
      ASSERT_NEAR(g, bg, 1e-9 * bg);
      ASSERT_NEAR(p, bp, 1e-9 * bp);
      ASSERT_NEAR(g2, bg, 1e-9 * bg);
      ASSERT_NEAR(p2, bp, 1e-9 * bp);
    }
  }
}

TEST(Recursions, HandValues) {
  ctm::CusumDetector c;
  ctm::ShiryaevRobertsDetector s;
  // S: 1 -> 2 -> 1 -> 3
  EXPECT_DOUBLE_EQ(c.step_ratio(2.0).value, 2.0);
  EXPECT_DOUBLE_EQ(c.step_ratio(0.5).value, 1.0);
  EXPECT_DOUBLE_EQ(c.step_ratio(3.0).value, 3.0);
  EXPECT_DOUBLE_EQ(s.step_ratio(2.0).value, 2.0);
  EXPECT_DOUBLE_EQ(s.step_ratio(0.5).value, 1.5);
  EXPECT_DOUBLE_EQ(s.step_ratio(3.0).value, 7.5);  // 3/1 + 3/2 + 3/1
}

// Property: psi_n >= gamma_n, so SR never fires after CUSUM at equal thresholds.
TEST(Recursions, ShiryaevRobertsDominatesCusum) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ctm::CounterRng rng(seed);
    ctm::SimpleJumper j;
    ctm::CusumDetector c(20.0);
    ctm::ShiryaevRobertsDetector s(20.0);
    for (int n = 0; n < 3000; ++n) {
      const double u = rng.uniform();
      const double r = j.step(n > 1000 ? u * u * u : u);
      const double g = c.step_ratio(r).value;
      const double p = s.step_ratio(r).value;
      ASSERT_GE(p, g * (1.0 - 1e-15));
    }
    ASSERT_TRUE(c.fired());
    ASSERT_TRUE(s.fired());
    EXPECT_LE(*s.fire_step(), *c.fire_step());
  }
}

TEST(Ville, FiresOnceAtFirstCrossing) {
  ctm::VilleDetector v(100.0);
  EXPECT_FALSE(v.step(std::log(50.0), 1));
  const auto alarm = v.step(std::log(100.0), 2);
  ASSERT_TRUE(alarm);
  EXPECT_EQ(alarm->kind, ctm::DetectorKind::Ville);
  EXPECT_EQ(alarm->step, 2u);
  EXPECT_NEAR(alarm->statistic, 100.0, 1e-9);
  EXPECT_FALSE(v.step(std::log(1000.0), 3));
  EXPECT_EQ(*v.fire_step(), 2u);
}

TEST(Ville, RejectsBadUse) {
  EXPECT_THROW(ctm::VilleDetector(0.0), ctm::InvalidArgument);
  EXPECT_THROW(ctm::VilleDetector(std::nan("")), ctm::InvalidArgument);
  ctm::VilleDetector v(10.0);
  v.step(0.0, 1);
  EXPECT_THROW(v.step(0.0, 3), ctm::StreamError);
}

TEST(RatioDetectors, AlarmAndErrors) {
  ctm::CusumDetector c(4.0);
  EXPECT_FALSE(c.step_ratio(1.5).alarm);
  EXPECT_FALSE(c.step_ratio(1.5).alarm);  // 2.25
  const auto u = c.step_ratio(1.5);        // 3.375
  EXPECT_FALSE(u.alarm);
  const auto hit = c.step_ratio(1.5);  // 5.06
  ASSERT_TRUE(hit.alarm);
  EXPECT_EQ(hit.alarm->step, 4u);
  EXPECT_EQ(hit.alarm->kind, ctm::DetectorKind::Cusum);
  EXPECT_FALSE(c.step_ratio(1.5).alarm);
  EXPECT_THROW(c.step_ratio(std::numeric_limits<double>::infinity()), ctm::StreamError);
  EXPECT_THROW(c.step_ratio(-1.0), ctm::StreamError);
  ctm::ShiryaevRobertsDetector unarmed;
  for (int i = 0; i < 10; ++i) EXPECT_FALSE(unarmed.step_ratio(1.5).alarm);
}

TEST(MaxProcess, RunningMaximum) {
  ctm::MaxProcess m;
  EXPECT_EQ(m.update(1.0), 1.0);
  EXPECT_EQ(m.update(0.5), 1.0);
  EXPECT_EQ(m.update(3.0), 3.0);
}

TEST(Barrier, LinearBoundary) {
  ctm::BarrierDetector b(4.0);
  EXPECT_FALSE(b.step(7.9, 2));
  const auto a = b.step(12.0, 3);
  ASSERT_TRUE(a);
  EXPECT_DOUBLE_EQ(a->threshold, 12.0);
  EXPECT_EQ(a->kind, ctm::DetectorKind::Barrier);
  EXPECT_THROW(ctm::BarrierDetector(-1.0), ctm::InvalidArgument);
}

TEST(DetectorKind, Names) {
  EXPECT_EQ(ctm::to_string(ctm::DetectorKind::Ville), "ville");
  EXPECT_EQ(ctm::to_string(ctm::DetectorKind::Cusum), "cusum");
  EXPECT_EQ(ctm::to_string(ctm::DetectorKind::ShiryaevRoberts), "sr");
  EXPECT_EQ(ctm::to_string(ctm::DetectorKind::Barrier), "barrier");
}

// Independent oracle: bisection on the linear-domain equation, bracketing the
// larger root between the peak and a point where the curve is below threshold.
double boundary_oracle(double c, double slope, double decay) {
  auto f = [&](double n) { return slope * n * std::pow(10.0, -decay * n) - c; };
  double lo = 1.0 / (decay * std::log(10.0));
  double hi = lo;
  while (f(hi) > 0.0) hi *= 1.5;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(BoundarySolve, PaperExample) { EXPECT_NEAR(ctm::boundary_solve(100.0, 4.0, 0.00172), 906.7, 0.1); }

TEST(BoundarySolve, AgreesWithOracle) {
  ctm::CounterRng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double decay = 1e-4 + rng.uniform() * 1e-2;
    const double slope = 1.0 + rng.uniform() * 10.0;
    const double peak_value = slope / (decay * std::log(10.0)) * std::exp(-1.0);
    const double c = peak_value * (0.01 + 0.9 * rng.uniform());
    const double n = ctm::boundary_solve(c, slope, decay);
    EXPECT_NEAR(n, boundary_oracle(c, slope, decay), 1e-6 * n);
    EXPECT_GT(n, 1.0 / (decay * std::log(10.0)));
  }
}

TEST(BoundarySolve, TangencyAndNoRoot) {
  const double decay = 0.001;
  const double peak = 1.0 / (decay * std::log(10.0));
  const double slope = 2.0;
  const double at_peak = slope * peak * std::pow(10.0, -decay * peak);
  EXPECT_NEAR(ctm::boundary_solve(at_peak, slope, decay), peak, 1e-3 * peak);
  EXPECT_THROW(ctm::boundary_solve(at_peak * 1.01, slope, decay), ctm::NumericError);
  EXPECT_THROW(ctm::boundary_solve(100.0, 0.0, decay), ctm::InvalidArgument);
  EXPECT_THROW(ctm::boundary_solve(100.0, 4.0, -1.0), ctm::InvalidArgument);
}

TEST(LinearReference, BreaksWithoutRescalingAndHoldsWithIt) {
  ctm::CounterRng a(0);
  ctm::SimpleJumper j;
  ctm::CusumDetector cusum;
  ctm::ShiryaevRobertsDetector sr;
  ctm::LinearJumperReference naive(0.01, 0);
  ctm::LinearJumperReference rescaled(0.01, 10000);
  std::uint64_t broke_at = 0;
  for (std::uint64_t n = 1; n <= 300000; ++n) {
    const double p = a.uniform();
    const double r = j.step(p);
    const double gamma = cusum.step_ratio(r).value;
    const double psi = sr.step_ratio(r).value;
    naive.step(p);
    rescaled.step(p);
    ASSERT_NEAR(rescaled.psi(), psi, 1e-6 * psi) << "rescaled reference diverged at " << n;
    ASSERT_NEAR(rescaled.gamma(), gamma, 1e-6 * gamma);
    const double dev = std::abs(std::log(naive.psi() / psi));
    if (broke_at == 0 && !(dev <= std::log(10.0))) broke_at = n;
  }
  EXPECT_GT(broke_at, 0u);
  EXPECT_LT(broke_at, 300000u);
}

}  // namespace
