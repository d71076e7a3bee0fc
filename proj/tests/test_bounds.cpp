// Reference numbers come from tests/oracles/bounds_oracle.py (50-digit mpmath).
#include <cmath>

#include <gtest/gtest.h>

#include "plmc/bounds.hpp"

using namespace plmc;

namespace {

constexpr double kRel = 1e-9;

void expect_rel(double got, double want, const char* what) {
  EXPECT_LE(std::abs(got - want), kRel * std::abs(want)) << what << ": got " << got << " want " << want;
}

ProblemConstants consts(std::size_t d, double L, double a, double m, double lam, double w0,
                        double xs = 0.0) {
  ProblemConstants c;
  c.d = d;
  c.L = L;
  c.alpha = a;
  c.m = m;
  c.lambda = lam;
  c.w2_init = w0;
  c.x_star_norm = xs;
  return c;
}

struct StochasticRef {
  double mu, eta;
  std::uint64_t K;
  double M, sigma2, beta, C, bias;
};

void expect_stochastic(const PlanReport& r, const StochasticRef& ref) {
  expect_rel(r.mu, ref.mu, "mu");
  expect_rel(r.eta, ref.eta, "eta");
  EXPECT_EQ(r.K, ref.K);
  expect_rel(r.intermediates.M, ref.M, "M");
  expect_rel(*r.intermediates.sigma2, ref.sigma2, "sigma2");
  expect_rel(*r.intermediates.beta, ref.beta, "beta");
  expect_rel(*r.intermediates.C, ref.C, "C");
  expect_rel(*r.intermediates.bias, ref.bias, "bias");
}

struct DetRef {
  double delta, M, eta;
  std::uint64_t K;
};

void expect_det(const PlanReport& r, const DetRef& ref) {
  expect_rel(*r.delta, ref.delta, "delta");
  expect_rel(r.intermediates.M, ref.M, "M");
  expect_rel(r.eta, ref.eta, "eta");
  EXPECT_EQ(r.K, ref.K);
}

}  // namespace

TEST(SmoothApproxM, Values) {
  EXPECT_EQ(smooth_approx_M(2, 1, 0.1), 2.0);
  EXPECT_DOUBLE_EQ(smooth_approx_M(1, 0, 0.5), 2.0);
  expect_rel(smooth_approx_M(2, 0.5, 0.01), 11.696070952851464, "M");
  EXPECT_THROW(smooth_approx_M(1, 0.5, 0.0), ContractViolation);
}

TEST(SmoothApproxM, MonotoneInDelta) {
  for (double a : {0.0, 0.3, 0.7}) {
    double prev = INFINITY;
    for (double d = 1e-4; d < 10; d *= 1.7) {
      const double M = smooth_approx_M(1.3, a, d);
      EXPECT_LE(M, prev);
      prev = M;
    }
  }
  for (double d : {1e-6, 0.1, 5.0}) EXPECT_EQ(smooth_approx_M(3.5, 1.0, d), 3.5);
}

TEST(Mmu, Values) {
  EXPECT_EQ(smoothing_smoothness_Mmu(3, 1, 0.2, 7), 3.0);
  EXPECT_DOUBLE_EQ(smoothing_smoothness_Mmu(2, 0, 0.5, 4), 8.0);
  expect_rel(smoothing_smoothness_Mmu(1, 0.5, 0.1, 100), 8.1649658092772603, "M_mu");
  EXPECT_EQ(smoothing_smoothness_Mmu(3, 1, 0.0, 7), 3.0);
  EXPECT_THROW(smoothing_smoothness_Mmu(1, 0.5, 0.0, 1), ContractViolation);
}

TEST(Mmu, NonincreasingInMu) {
  double prev = INFINITY;
  for (double mu = 1e-3; mu < 5; mu *= 1.5) {
    const double v = smoothing_smoothness_Mmu(2, 0.4, mu, 3);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(SmoothingGap, Values) {
  EXPECT_DOUBLE_EQ(smoothing_gap(2, 0, 0.1, 1), 0.2);
  EXPECT_EQ(smoothing_gap(2, 0.5, 0.0, 3), 0.0);
  EXPECT_DOUBLE_EQ(smoothing_gap(1, 1, 0.5, 4), 0.5);
}

TEST(VarianceBound, Values) {
  EXPECT_DOUBLE_EQ(variance_bound(1, 1, 1, 0.1, 10), 0.08);
  EXPECT_EQ(variance_bound(1, 1, 1, 0.0, 10), 0.0);
  EXPECT_DOUBLE_EQ(variance_bound(2, 0, 1, 0.1, 4), 4.04);
  // Not tight at mu = 0 for alpha = 0: the formula gives 4 L^2 / d.
  EXPECT_DOUBLE_EQ(variance_bound(2, 0, 1, 0.0, 4), 4.0);
}

TEST(ShiftedVarianceBound, Values) {
  EXPECT_EQ(shifted_variance_bound(1, 0.5, 1, 0.0, 0.1, 3), 0.0);
  EXPECT_DOUBLE_EQ(shifted_variance_bound(0, 1, 0, 0.1, 0.01, 1), 200.0);
  EXPECT_THROW(shifted_variance_bound(1, 1, 1, 0.1, 0.0, 1), ContractViolation);
}

TEST(ShiftedVarianceBound, DominatesPerturbed) {
  for (double L : {0.0, 0.5, 3.0})
    for (double a : {0.0, 0.5, 1.0})
      for (double m : {0.0, 1.0, 4.0})
        for (std::size_t d : {1u, 10u, 100u}) {
          const double p = variance_bound(L, a, m, 0.1, d);
          const double s = shifted_variance_bound(L, a, m, 0.1, 0.01, d);
          EXPECT_GT(s, p);
          EXPECT_GE(s, 2 * p);
        }
}

TEST(BetaMu, Values) {
  EXPECT_EQ(beta_mu(2, 0.5, 1, 0.0, 3), 0.0);
  expect_rel(beta_mu(2, 0, 1, 0.1, 1), 0.1464213562373095, "beta");
  expect_rel(beta_mu(1, 1, 1, 0.5, 4), 0.85355339059327376, "beta");
}

TEST(SmoothingBias, Values) {
  const auto c = consts(1, 0, 1, 1, 1, 1);
  EXPECT_EQ(w2_smoothing_bias(c, 1.0, 0.0), 0.0);
  // lambda = 1, M + m = 2, d = 1
  expect_rel(w2_smoothing_bias(c, 1.0, 0.125), 4.4427834321559618, "bias");
  EXPECT_GT(w2_smoothing_bias(c, 1.0, 0.25), w2_smoothing_bias(c, 1.0, 0.125));
  EXPECT_THROW(w2_smoothing_bias(consts(1, 0, 1, 0.1, 0.1, 1), -0.2, 0.1), ContractViolation);
}

TEST(RecursionBound, Values) {
  expect_rel(w2_recursion_bound(2, 1, 0.1, 1, 0.0, 0, 1.0), 1.6324555320336759, "K=0");
  const double with_sigma = w2_recursion_bound(2, 1, 0.1, 1, 0.04, 0, 1.0);
  expect_rel(with_sigma - 1.6324555320336759, 0.066332495807107997, "sigma term");
  EXPECT_THROW(w2_recursion_bound(2, 1, 1.0, 1, 0, 0, 1), ContractViolation);
}

TEST(RecursionBound, NonincreasingInKWithFloor) {
  double prev = INFINITY;
  for (std::uint64_t K : {0u, 1u, 10u, 100u, 1000u, 100000u}) {
    const double b = w2_recursion_bound(2, 1, 0.1, 3, 0.04, K, 5.0);
    EXPECT_LE(b, prev);
    prev = b;
  }
  const double floor = std::sqrt(2 * 2 * 0.1 * 3) + 0.2 * std::sqrt(1.1 * 0.1 * 3);
  EXPECT_NEAR(prev, floor, 1e-12);
}

TEST(KlFromW2, Values) {
  EXPECT_EQ(kl_from_w2(3, 1, 2, 1, 0.0), 0.0);
  expect_rel(kl_from_w2(1, 1, 1, 0, 0.1), 0.17096036639747186, "kl");
  EXPECT_DOUBLE_EQ(kl_from_w2(2, 0.5, 3, 0.4, 0.2), 2 * kl_from_w2(1, 0.5, 3, 0.4, 0.2));
  EXPECT_GE(pinsker_tv(kl_from_w2(1, 1, 1, 0, 0.1)), 0.0);
}

TEST(DiscretizationBound, Values) {
  EXPECT_EQ(discretization_w2_bound(1, 1, 1, 0.3, 0.0, 2, 1), 0.0);
  expect_rel(discretization_w2_bound(0.5, 0.5, 1, 0, 0.1, 1, 0), 0.069282032302755092, "disc");
  double prev = 0;
  for (double eta = 0.01; eta < 0.5; eta += 0.05) {
    const double b = discretization_w2_bound(1, 1, 1, 0.1, eta, 2, 1);
    EXPECT_GE(b, prev);
    prev = b;
  }
  EXPECT_THROW(discretization_w2_bound(1, 1, 1, 0, 0.5, 1, 0), ContractViolation);
}

TEST(PlanW2, MatchesOracle) {
  expect_stochastic(plan_w2(0.5, consts(2, 1, 0, 1, 1, 2)),
                    {7.4726719741687165e-5, 3.3024856415733528e-9, 752435263, 18925.13905684207,
                     2.0000000223363306, 7.4732303824330522e-5, 27.760629900632698,
                     0.17176940388825581});
  expect_stochastic(plan_w2(0.1, consts(10, 2, 0.5, 2, 0.5, 5)),
                    {6.4728471071372378e-7, 5.6553265550863649e-11, 177200564647,
                     3609.4139435386546, 3.2750370723736448e-6, 2.7651920341983762e-9,
                     112.44567903053188, 0.0041814096568423564});
  expect_stochastic(plan_w2(0.8, consts(1, 1, 1, 1, 1, 3)),
                    {0.00039949115551229716, 0.00032, 7564, 1.0, 1.2767454666604031e-6,
                     1.3622130274907233e-7, 11.847422485749232, 0.0030935562565909333});
}

TEST(PlanW2, AlphaOneHandPoint) {
  // alpha = 1: eta = eps^2 lambda / (1000 (L + m) d).
  const auto r = plan_w2(0.8, consts(1, 1, 1, 1, 1, 3));
  EXPECT_DOUBLE_EQ(r.eta, 0.64 / 2000.0);
  EXPECT_EQ(r.intermediates.halvings, 0);
}

TEST(PlanW2, ContractsAndMonotonicity) {
  const auto c = consts(4, 1, 0.5, 1, 1, 2);
  EXPECT_THROW(plan_w2(0.0, c), ContractViolation);
  EXPECT_THROW(plan_w2(std::pow(4.0, 0.25), c), ContractViolation);
  EXPECT_GT(plan_w2(0.25, c).K, plan_w2(0.5, c).K);
  EXPECT_GE(plan_w2(0.5, c).K, 1u);
}

TEST(PlanTv, MatchesOracle) {
  auto r = plan_tv(0.5, consts(1, 2, 0, 1, 1, 2));
  expect_stochastic(r, {0.0625, 8.4919659751787851e-10, 9422981980, 32, 16.015625,
                        0.090341472648318441, 15.168023989460381, 4.5940236898807127});
  expect_rel(*r.eps_bar, 0.0013392173886108855, "eps_bar");
  r = plan_tv(1.0, consts(1, 1, 0.5, 1, 1, 1));
  expect_stochastic(r, {0.25, 2.6749819390172524e-5, 126885, 1.6329931618554521, 1.25,
                        0.09017556509887896, 12.213131901658309, 3.6946483194563676});
  expect_rel(*r.eps_bar, 0.067139063578905601, "eps_bar");
  r = plan_tv(0.2, consts(5, 1, 0.5, 2, 0.5, 4, 1.3));
  expect_stochastic(r, {0.038236224566586501, 4.1320789357589435e-12, 5275837221679,
                        6.2439493252405202, 0.091791179772770808, 0.019095157365307957,
                        51.198586713392314, 5.980346635338314});
  expect_rel(*r.eps_bar, 0.00014765288885337099, "eps_bar");
}

TEST(PlanTv, UnitCaseAndEpsBarCap) {
  EXPECT_EQ(plan_tv(1.0, consts(1, 1, 0.5, 1, 1, 1)).mu, 0.25);
  for (double eps : {0.1, 0.5, 1.0}) EXPECT_LE(*plan_tv(eps, consts(3, 2, 0.3, 2, 1, 2, 0.5)).eps_bar, eps * eps / 4);
  EXPECT_THROW(plan_tv(1.5, consts(1, 1, 0.5, 1, 1, 1)), ContractViolation);
}

TEST(PlanRegularized, Lambda) {
  EXPECT_DOUBLE_EQ(plan_regularized(0.1, 4, 0), 0.2);
  EXPECT_DOUBLE_EQ(plan_regularized(0.1, 4, std::sqrt(2.0)), 0.1);
  EXPECT_DOUBLE_EQ(plan_regularized(0.5, 9, 1), 0.5);
  EXPECT_LT(plan_regularized(1e-9, 4, 1), 1e-8);
  EXPECT_THROW(plan_regularized(0.0, 4, 1), ContractViolation);
  EXPECT_THROW(plan_regularized(0.5, 0, 1), ContractViolation);
}

TEST(PlanRegularized, MatchesOracle) {
  auto c = consts(2, 1, 0.5, 1, 1, 2);
  c.m4 = 9;
  const auto r = plan_regularized_tv(0.5, 1.0, c);
  expect_stochastic(r, {0.070153878019335811, 1.6488049603089227e-9, 9718361743, 3.6659456986629403,
                        0.20334669809717678, 0.017192174575295664, 33.229337089139089,
                        3.6521454309268528});
  expect_rel(*r.eps_bar, 0.0013260546650411014, "eps_bar");
  expect_rel(*r.lambda_reg, 0.5, "lambda");

  c = consts(3, 2, 0, 2, 1, 3, 0.4);
  c.m4 = 16;
  const auto b = plan_regularized_tv(0.8, 0.5, c);
  expect_stochastic(b, {0.028867513459481288, 3.3970958320513063e-13, 42909594898292, 119.99999999999999,
                        5.34357600922722, 0.072901854589242984, 33.880864170629144, 8.9385550904737482});
  expect_rel(*b.eps_bar, 0.00010269841006446833, "eps_bar");
  expect_rel(*b.lambda_reg, 0.75294117647058824, "lambda");

  c = consts(1, 1, 1, 1.5, 1, 1);
  c.m4 = 4;
  const auto d = plan_regularized_tv(0.3, 2.0, c);
  expect_stochastic(d, {0.096824583655185422, 2.0125575641156116e-9, 18771145839, 1.0, 0.055875,
                        0.0065958130368119415, 68.312302517518562, 4.3735732444068708});
  expect_rel(*d.eps_bar, 0.0010463418728498314, "eps_bar");
  expect_rel(*d.lambda_reg, 0.2, "lambda");
}

TEST(PlanDetW2, MatchesOracle) {
  expect_det(plan_det_w2(0.5, consts(2, 1, 0.5, 1, 1, 2)),
             {9.0422453703703704e-6, 48, 2.8344671201814059e-8, 391267721});
  expect_det(plan_det_w2(0.3, consts(3, 3, 1, 2, 2, 1)),
             {0.00020833333333333333, 3, 1.3333333333333333e-7, 36119185});
  expect_det(plan_det_w2(0.5, consts(1, 1, 0.25, 1, 0.5, 4)),
             {1.2264330200697659e-10, 884736, 7.8491624566898914e-13, 42388044393858});
}

TEST(PlanDetW2, AlphaOneCollapsesPower) {
  const auto r = plan_det_w2(0.3, consts(3, 3, 1, 2, 2, 1));
  EXPECT_DOUBLE_EQ(*r.intermediates.A, 3.0);
}

TEST(PlanDetW2, KGrowsAsAlphaShrinks) {
  std::uint64_t prev = 0;
  for (double a : {1.0, 0.5, 0.25}) {
    const auto K = plan_det_w2(0.5, consts(2, 1, a, 1, 1, 2)).K;
    EXPECT_GT(K, prev);
    prev = K;
  }
}

TEST(PlanDetW2, RejectsAlphaZeroAndOverflow) {
  EXPECT_THROW(plan_det_w2(0.5, consts(1, 1, 0, 1, 1, 2)), ContractViolation);
  EXPECT_THROW(plan_det_w2(0.5, consts(1, 1, 1e-3, 1, 1, 2)), std::range_error);
}

TEST(PlanDetTv, MatchesOracle) {
  expect_det(plan_det_tv(0.5, 1, consts(1, 1, 1, 1, 1, 1)),
             {0.045084220027780106, 1, 0.0028177637517362567, 66});
  expect_det(plan_det_tv(0.3, 2, consts(2, 2, 0.5, 1, 0.5, 1)),
             {2.5953281364859113e-6, 183.36195716380824, 1.7501243371718977e-9, 3376931191});
  expect_det(plan_det_tv(0.8, 1, consts(3, 1, 0.25, 2, 1, 1)),
             {5.2343995417409841e-7, 5870.5646949644393, 7.4252295083702388e-12, 876543300558});
}

TEST(PlanDetTv, Invariants) {
  for (double a : {0.25, 0.5, 1.0}) {
    const auto r = plan_det_tv(0.5, 3, consts(2, 1, a, 1, 0.5, 1));
    EXPECT_LE(*r.delta, 1.0);
    EXPECT_GE(r.K, 3u);
    EXPECT_GT(r.eta, 0.0);
  }
  EXPECT_THROW(plan_det_tv(0.5, 1, consts(1, 1, 0, 1, 1, 1)), ContractViolation);
  EXPECT_THROW(plan_det_tv(0.5, 0.5, consts(1, 1, 0.5, 1, 1, 1)), ContractViolation);
}

TEST(Plans, StepSizePreconditionHolds) {
  for (double a : {0.0, 0.5, 1.0})
    for (double eps : {0.3, 0.6, 1.0}) {
      const auto c = consts(3, 1.5, a, 2, 0.7, 3, 0.4);
      for (const auto& r : {plan_w2(eps, c), plan_tv(eps, c)}) {
        EXPECT_LT(r.eta, 2.0 / (r.intermediates.M + c.m + c.lambda));
        EXPECT_GE(r.K, 1u);
      }
    }
}

TEST(Plans, BoundaryEtaIsHalvedIntoStrictCondition) {
  // With a loose eps the det-tv minimum lands exactly on 1/(2(M + m)),
  // which the strict condition excludes.
  const auto r = plan_det_tv(5.0, 1, consts(1, 1, 1, 1, 1, 1));
  EXPECT_DOUBLE_EQ(r.intermediates.eta_formula, 0.25);
  EXPECT_EQ(r.intermediates.halvings, 1);
  EXPECT_DOUBLE_EQ(r.eta, 0.125);
}

TEST(Plans, RejectInconsistentConstants) {
  EXPECT_THROW(plan_tv(0.5, consts(1, 1, 0.5, 0.5, 1, 1)), ContractViolation);
  EXPECT_THROW(plan_w2(0.5, consts(1, 1, 1.5, 1, 1, 1)), ContractViolation);
}

TEST(TvBound, OnePass) {
  const auto c = consts(1, 2, 0, 1, 1, 2);
  const double tv = tv_bound_from_recursion(c, 3.0, 0.1, 0.5, 50);
  const double w2 = w2_recursion_bound(3.0, 1, 0.1, 1, 0.5, 50, 2);
  EXPECT_DOUBLE_EQ(tv, std::sqrt(kl_from_w2(3.0, 1, 1, 0, w2) / 2));
}
