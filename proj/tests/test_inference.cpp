#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "pedmix/inference.hpp"
#include "pedmix/relationships.hpp"
#include "pedmix/synth.hpp"

using namespace pedmix;

namespace {

Hypothesis unrelated_pair(std::string name = "H0") {
  Hypothesis h;
  h.name = std::move(name);
  h.contributors = {ContributorSlot::unrelated(), ContributorSlot::unrelated()};
  return h;
}

GenotypeProfile random_person(const AlleleFrequencyTable& freqs, std::uint64_t seed, const std::string& id = "P") {
  return simulate_profiles(IBDPatternDistribution::unrelated({id}), freqs, seed)[id];
}

MixtureParams params(double rho, double eta, double xi, std::vector<double> phi) {
  MixtureParams p;
  p.rho = rho;
  p.eta = eta;
  p.xi = xi;
  p.phi = std::move(phi);
  return p;
}

} // namespace

TEST(NelderMead, FindsMinimumOfShiftedQuadratic) {
  auto f = [](const std::vector<double>& x) {
    return 3.0 + (x[0] - 1.0) * (x[0] - 1.0) + 2.0 * (x[1] + 0.5) * (x[1] + 0.5) + 0.5 * x[0] * x[1];
  };
  auto r = nelder_mead(f, {4.0, 4.0}, {2000, 1e-14, 0.5});
  // Gradient zero: 2(x-1) + 0.5y = 0, 4(y+0.5) + 0.5x = 0.
  const double y = -2.5 / 3.875, x = 1.0 - 0.25 * y;
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], x, 1e-5);
  EXPECT_NEAR(r.x[1], y, 1e-5);
}

TEST(NelderMead, TreatsNonFiniteValuesAsWorst) {
  auto f = [](const std::vector<double>& x) {
    if (x[0] < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (x[0] - 2.0) * (x[0] - 2.0);
  };
  auto r = nelder_mead(f, {0.1});
  EXPECT_NEAR(r.x[0], 2.0, 1e-3);
  EXPECT_TRUE(std::isfinite(r.f));
}

TEST(Mle, ParameterCodingRoundTrips) {
  Hypothesis h = unrelated_pair();
  h.contributors.push_back(ContributorSlot::unrelated());
  h.zero_phi = {{}, {1}};
  detail::ParamCoder coder(h, 2);
  EXPECT_EQ(coder.dimension(), 5u + 4u);
  std::vector<MixtureParams> p{params(12, 35, 0.07, {0.6, 0.3, 0.1}), params(3, 80, 0.01, {0.2, 0.0, 0.8})};
  auto back = coder.decode(coder.encode(p));
  for (std::size_t e = 0; e < 2; ++e) {
    EXPECT_NEAR(back[e].rho, p[e].rho, 1e-12);
    EXPECT_NEAR(back[e].eta, p[e].eta, 1e-12);
    EXPECT_NEAR(back[e].xi, p[e].xi, 1e-12);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back[e].phi[i], p[e].phi[i], 1e-12);
  }
  EXPECT_EQ(back[1].phi[1], 0.0);
  // Every coordinate vector maps onto the simplex.
  auto q = coder.decode({1, 2, -3, 40, -40, 0, 0, 0, 7});
  for (const auto& x : q) EXPECT_NO_THROW(x.validate());
}

TEST(Mle, SingleContributorMatchesGridSearch) {
  auto freqs = synthetic_frequencies(6, 31);
  auto k = random_person(freqs, 5);
  auto epg = synthesize_epg({k}, {120}, freqs.markers(), SynthParams{}, 17);
  Hypothesis h;
  h.contributors = {ContributorSlot::known("K", k)};
  LikelihoodEngine eng(h, freqs, {epg});
  auto fit = mle(eng);

  // Zooming grid over (log rho, log eta, logit xi).
  auto ll = [&](double a, double b, double c) {
    return eng.loglik({params(std::exp(a), std::exp(b), detail::logistic(c), {1.0})});
  };
  double ca = std::log(10.0), cb = std::log(100.0), cc = detail::logit(0.05), width = 3.0;
  double best = kNegInf;
  for (int round = 0; round < 14; ++round) {
    double na = ca, nb = cb, nc = cc;
    for (int i = -5; i <= 5; ++i)
      for (int j = -5; j <= 5; ++j)
        for (int l = -5; l <= 5; ++l) {
          const double a = ca + width * i / 5, b = cb + width * j / 5, c = cc + width * l / 5;
          const double v = ll(a, b, c);
          if (v > best) {
            best = v;
            na = a, nb = b, nc = c;
          }
        }
    ca = na, cb = nb, cc = nc;
    width *= 0.5;
  }
  EXPECT_NEAR(fit.loglik, best, 1e-3);
  EXPECT_EQ(fit.params[0].phi, std::vector<double>{1.0});
}

TEST(Mle, RecoversParametersOfSimulatedMixture) {
  // Known psi*: 300 + 100 cells, i.e. rho = 100, eta = 40, xi = 0.05, phi = (0.75, 0.25).
  auto freqs = synthetic_frequencies(20);
  int good = 0;
  for (int seed = 1; seed <= 10; ++seed) {
    auto a = random_person(freqs, 100 + seed, "A"), b = random_person(freqs, 300 + seed, "B");
    auto epg = synthesize_epg({a, b}, {300, 100}, freqs.markers(), SynthParams{}, 200 + seed);
    MleOptions o;
    o.seed = static_cast<std::uint64_t>(seed);
    const auto t0 = std::chrono::steady_clock::now();
    auto fit = mle({epg}, unrelated_pair(), freqs, o);
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);
    const auto& p = fit.params[0];
    good += std::abs(p.phi[0] - 0.75) <= 0.05 && std::abs(p.phi[1] - 0.25) <= 0.05 && std::abs(p.xi - 0.05) <= 0.02;
  }
  EXPECT_GE(good, 8);
}

TEST(Mle, NeverWorseThanAnyStart) {
  auto freqs = synthetic_frequencies(5, 3);
  auto epg = synthesize_epg({random_person(freqs, 1), random_person(freqs, 2)}, {100, 60}, freqs.markers(),
                            SynthParams{}, 4);
  LikelihoodEngine eng(unrelated_pair(), freqs, {epg});
  MleOptions o;
  o.init = {params(3, 50, 0.1, {0.5, 0.5})};
  auto fit = mle(eng, o);
  for (double l : fit.start_logliks) EXPECT_GE(fit.loglik, l);
  EXPECT_GE(fit.loglik, eng.loglik(o.init));
  EXPECT_EQ(fit.loglik, eng.loglik(fit.params));
}

TEST(Mle, DeterministicForSeedAndThreads) {
  auto freqs = synthetic_frequencies(4, 8);
  auto epg = synthesize_epg({random_person(freqs, 1), random_person(freqs, 2)}, {100, 40}, freqs.markers(),
                            SynthParams{}, 5);
  LikelihoodEngine eng(unrelated_pair(), freqs, {epg});
  MleOptions a;
  a.seed = 9;
  MleOptions b = a;
  b.threads = 3;
  auto ra = mle(eng, a), rb = mle(eng, b);
  EXPECT_EQ(ra.loglik, rb.loglik);
  EXPECT_EQ(ra.params[0].phi, rb.params[0].phi);
  EXPECT_EQ(ra.start_logliks, rb.start_logliks);
}

TEST(Mle, ZeroProportionMatchesModelWithoutThatContributor) {
  auto freqs = synthetic_frequencies(5, 12);
  auto epg = synthesize_epg({random_person(freqs, 1), random_person(freqs, 2)}, {150, 50}, freqs.markers(),
                            SynthParams{}, 3);
  Hypothesis three;
  three.contributors = {ContributorSlot::unrelated(), ContributorSlot::unrelated(), ContributorSlot::unrelated()};
  three.zero_phi = {{1}};
  auto a = mle({epg}, three, freqs);
  auto b = mle({epg}, unrelated_pair(), freqs);
  EXPECT_EQ(a.loglik, b.loglik);
  EXPECT_EQ(a.params[0].phi[1], 0.0);
  EXPECT_EQ(a.params[0].phi[0], b.params[0].phi[0]);
  EXPECT_EQ(a.params[0].phi[2], b.params[0].phi[1]);
  EXPECT_EQ(a.params[0].rho, b.params[0].rho);
  EXPECT_EQ(a.params[0].xi, b.params[0].xi);
}

TEST(Mle, JointFitOfTwoEpgsKeepsContributorIdentity) {
  // Same two people, proportions swapped between the EPGs, one extra
  // contributor absent from the first EPG.
  auto freqs = synthetic_frequencies(8, 21);
  auto a = random_person(freqs, 1), b = random_person(freqs, 2), c = random_person(freqs, 3);
  SynthParams sp;
  auto e1 = synthesize_epg({a, b}, {300, 100}, freqs.markers(), sp, 10);
  auto e2 = synthesize_epg({a, b, c}, {80, 240, 80}, freqs.markers(), sp, 11);
  Hypothesis h;
  h.contributors = {ContributorSlot::unrelated(), ContributorSlot::unrelated(), ContributorSlot::unrelated()};
  h.zero_phi = {{2}, {}};
  MleOptions o;
  o.starts = 3;
  auto fit = mle({e1, e2}, h, freqs, o);
  ASSERT_EQ(fit.params.size(), 2u);
  EXPECT_EQ(fit.params[0].phi[2], 0.0);
  const auto& p1 = fit.params[0].phi;
  const auto& p2 = fit.params[1].phi;
  // Whichever slot took the major contributor of the first EPG is the minor one of the second.
  const std::size_t major = p1[0] > p1[1] ? 0 : 1, minor = 1 - major;
  EXPECT_NEAR(p1[major], 0.75, 0.08);
  EXPECT_NEAR(p2[major], 0.2, 0.08);
  EXPECT_NEAR(p2[minor], 0.6, 0.08);
  EXPECT_NEAR(p2[2], 0.2, 0.08);
}

TEST(Mle, EstimatesUnderCompetingHypothesesAgree) {
  auto freqs = synthetic_frequencies(15, 5);
  auto rel = named_relationship("parent-child").distribution();
  auto fam = simulate_profiles(rel, freqs, 40);
  auto other = random_person(freqs, 41);
  auto epg = synthesize_epg({fam["X2"], other}, {150, 50}, freqs.markers(), SynthParams{}, 42);
  Hypothesis hp;
  hp.relationship = rel;
  hp.contributors = {ContributorSlot::related("X2"), ContributorSlot::unrelated()};
  hp.typed["X1"] = fam["X1"];
  auto a = mle({epg}, hp, freqs), b = mle({epg}, unrelated_pair(), freqs);
  for (std::size_t i = 0; i < 2; ++i)
    EXPECT_LT(std::abs(a.params[0].phi[i] - b.params[0].phi[i]) / b.params[0].phi[i], 0.05);
}

TEST(Mle, Errors) {
  auto freqs = synthetic_frequencies(3, 1);
  EPGData empty(50.0);
  EXPECT_THROW(mle({empty}, unrelated_pair(), freqs), ValidationError);
  auto epg = synthesize_epg({random_person(freqs, 1)}, {100}, freqs.markers(), SynthParams{}, 2);
  Hypothesis h = unrelated_pair();
  h.zero_phi = {{0, 1}};
  EXPECT_THROW(mle({epg}, h, freqs), ValidationError);
  // A known contributor who cannot explain the peaks alone.
  Hypothesis wrong;
  wrong.contributors = {ContributorSlot::known("W", random_person(freqs, 99))};
  EXPECT_THROW(mle({epg}, wrong, freqs), ImpossibleEvidence);
}

namespace {

struct LrFixture {
  AlleleFrequencyTable freqs = synthetic_frequencies(8, 77);
  IBDPatternDistribution rel = named_relationship("sibs").distribution();
  std::map<std::string, GenotypeProfile> fam = simulate_profiles(rel, freqs, 3);
  EPGData epg = synthesize_epg({fam["X2"], random_person(freqs, 4)}, {150, 50}, freqs.markers(), SynthParams{}, 5);

  Hypothesis with(const std::string& relationship, const std::string& name) const {
    Hypothesis h;
    h.name = name;
    h.relationship = named_relationship(relationship).distribution();
    h.contributors = {ContributorSlot::related("X2"), ContributorSlot::unrelated()};
    h.typed["X1"] = fam.at("X1");
    return h;
  }
};

} // namespace

TEST(LikelihoodRatio, IdenticalHypothesesGiveZero) {
  LrFixture f;
  auto h = f.with("sibs", "Hp");
  for (auto policy : {LrPolicy::SharedH0Mles, LrPolicy::SeparateMles, LrPolicy::FixedParams}) {
    LrOptions o;
    o.policy = policy;
    o.params = {params(20, 40, 0.05, {0.7, 0.3})};
    o.mle.starts = 2;
    auto rep = lr({f.epg}, h, h, f.freqs, o);
    EXPECT_EQ(rep.log10_lr, 0.0) << policy_name(policy);
    for (const auto& m : rep.markers) EXPECT_EQ(m.log10_lr, 0.0);
  }
}

TEST(LikelihoodRatio, AntisymmetricAndChainConsistent) {
  LrFixture f;
  auto a = f.with("sibs", "A"), b = f.with("half-sibs", "B"), c = unrelated_pair("C");
  LrOptions o;
  o.policy = LrPolicy::FixedParams;
  o.params = {params(25, 40, 0.04, {0.72, 0.28})};
  auto ab = lr({f.epg}, a, b, f.freqs, o), ba = lr({f.epg}, b, a, f.freqs, o);
  auto bc = lr({f.epg}, b, c, f.freqs, o), ac = lr({f.epg}, a, c, f.freqs, o);
  EXPECT_EQ(ab.log10_lr, -ba.log10_lr);
  for (std::size_t m = 0; m < ab.markers.size(); ++m) EXPECT_EQ(ab.markers[m].log10_lr, -ba.markers[m].log10_lr);
  EXPECT_NEAR(ac.log10_lr, ab.log10_lr + bc.log10_lr, 1e-12 * (1 + std::abs(ac.log10_lr)));
  // Overall value is the sum of the marker values.
  double s = 0.0;
  for (const auto& m : ac.markers) s += m.log10_lr;
  EXPECT_NEAR(ac.log10_lr, s, 1e-12);
  EXPECT_EQ(ab.policy, LrPolicy::FixedParams);
  EXPECT_EQ(ab.params_p[0].phi, o.params[0].phi);
}

TEST(LikelihoodRatio, TrueRelationshipIsSupported) {
  LrFixture f;
  auto rep = lr({f.epg}, f.with("sibs", "sibs"), unrelated_pair(), f.freqs);
  EXPECT_EQ(rep.status, LrStatus::Finite);
  EXPECT_GT(rep.log10_lr, 0.0);
  EXPECT_EQ(rep.params_p[0].phi, rep.params_0[0].phi);
}

TEST(LikelihoodRatio, ContradictedTwinHypothesisIsMinusInfinity) {
  LrFixture f;
  // Two unrelated people contributed; identical twins carry at most two
  // alleles per marker between them.
  Hypothesis twins;
  twins.name = "twins";
  twins.relationship = named_relationship("mz-twins").distribution();
  twins.contributors = {ContributorSlot::related("X1"), ContributorSlot::related("X2")};
  auto rep = lr({f.epg}, twins, unrelated_pair(), f.freqs);
  EXPECT_EQ(rep.status, LrStatus::MinusInfinity);
  EXPECT_EQ(rep.log10_lr, kNegInf);
  bool some = false;
  for (const auto& m : rep.markers) some = some || m.status == LrStatus::MinusInfinity;
  EXPECT_TRUE(some);
  EXPECT_FALSE(rep.diagnostic.empty());
}

TEST(LikelihoodRatio, ZeroDenominatorIsReportedExplicitly) {
  LrFixture f;
  Hypothesis wrong;
  wrong.name = "wrong";
  wrong.contributors = {ContributorSlot::known("W", random_person(f.freqs, 1234)), ContributorSlot::unrelated()};
  LrOptions o;
  o.policy = LrPolicy::FixedParams;
  o.params = {params(20, 40, 0.05, {0.75, 0.25})};
  auto rep = lr({f.epg}, unrelated_pair(), wrong, f.freqs, o);
  EXPECT_EQ(rep.status, LrStatus::PlusInfinity);
  EXPECT_EQ(rep.log10_lr, std::numeric_limits<double>::infinity());
  auto both = lr({f.epg}, wrong, wrong, f.freqs, o);
  EXPECT_EQ(both.status, LrStatus::Indeterminate);
  EXPECT_TRUE(std::isnan(both.log10_lr));
  // Shared estimates fall back to the numerator's when the denominator is impossible everywhere.
  Hypothesis wrong_alone;
  wrong_alone.contributors = {ContributorSlot::known("W", random_person(f.freqs, 1234)), ContributorSlot::unrelated()};
  LrOptions s;
  s.mle.starts = 1;
  auto shared = lr({f.epg}, unrelated_pair(), wrong_alone, f.freqs, s);
  EXPECT_EQ(shared.status, LrStatus::PlusInfinity);
}

TEST(LikelihoodRatio, PolicyHandling) {
  LrFixture f;
  LrOptions o;
  o.policy = LrPolicy::MinimiseRatio;
  EXPECT_THROW(lr({f.epg}, unrelated_pair(), unrelated_pair(), f.freqs, o), Unsupported);
  o.policy = LrPolicy::FixedParams;
  EXPECT_THROW(lr({f.epg}, unrelated_pair(), unrelated_pair(), f.freqs, o), ValidationError);
  EXPECT_EQ(parse_policy("separate_mles"), LrPolicy::SeparateMles);
  EXPECT_THROW(parse_policy("bogus"), ValidationError);
  Hypothesis one;
  one.contributors = {ContributorSlot::unrelated()};
  EXPECT_THROW(lr({f.epg}, one, unrelated_pair(), f.freqs), ValidationError);
}
