#include <gtest/gtest.h>

#include <cmath>

#include "pedmix/simstudy.hpp"

using namespace pedmix;

namespace {

const std::vector<std::string> kTwoWay{"parent-child", "sibs", "half-sibs", "cousins", "half-cousins"};

GenotypeProfile person(const std::string& marker, const char* a, const char* b) {
  GenotypeProfile p;
  p.set(marker, Genotype::of(Allele::parse(a), Allele::parse(b)));
  return p;
}

} // namespace

TEST(Synthesizer, AbsentContributorLeavesNoPeaks) {
  const std::vector<std::string> m{"M"};
  auto a = person("M", "12", "15"), b = person("M", "19", "21");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto epg = synthesize_epg({a, b}, {100, 0}, m, SynthParams{}, seed);
    for (const auto& [allele, z] : epg.peaks("M")) {
      const int t = allele.tenths;
      EXPECT_TRUE(t == 120 || t == 150 || t == 110 || t == 140) << allele.str();
    }
  }
}

TEST(Synthesizer, MeanHeightAndCensoringFollowTheGammaModel) {
  // Shared allele 14 carries dose (1 - xi)(phi1 + phi2); its stutter position 13 has xi (phi1 + phi2).
  const std::vector<std::string> m{"M"};
  auto a = person("M", "14", "16"), b = person("M", "14", "17");
  SynthParams sp;
  sp.threshold = 0.0;
  const auto p = sp.mixture({60, 20});
  const double shape = p.rho * (1 - p.xi) * 1.0;
  const int n = 20000;
  double sum = 0.0, sumsq = 0.0;
  int below = 0;
  SynthParams censored = sp;
  censored.threshold = 50.0;
  const double stutter_shape = p.rho * p.xi * 1.0;
  for (int i = 0; i < n; ++i) {
    const double z = synthesize_epg({a, b}, {60, 20}, m, sp, static_cast<std::uint64_t>(i)).height("M", Allele::parse("14"));
    sum += z;
    sumsq += z * z;
    below += synthesize_epg({a, b}, {60, 20}, m, censored, static_cast<std::uint64_t>(i))
                 .height("M", Allele::parse("13")) == 0.0;
  }
  const double mean = sum / n, sd = std::sqrt(sumsq / n - mean * mean);
  EXPECT_NEAR(mean, shape * p.eta, 3 * sd / std::sqrt(n));
  const double pc = std::exp(log_gamma_cdf(50.0, stutter_shape, p.eta));
  EXPECT_NEAR(static_cast<double>(below) / n, pc, 3 * std::sqrt(pc * (1 - pc) / n));
}

TEST(Synthesizer, CalibratedToAboutAThousandRfuPerHundredCells) {
  SynthParams sp;
  const auto p = sp.mixture({100});
  EXPECT_DOUBLE_EQ(p.rho * p.eta, 1000.0);
  EXPECT_EQ(p.phi, std::vector<double>{1.0});
}

TEST(Study, TwoWayParentChildRowPeaksOnTheDiagonal) {
  auto cfg = two_way_study(synthetic_frequencies(10), {"parent-child"}, kTwoWay, 1);
  auto r = run_study(cfg);
  ASSERT_EQ(r.rows.size(), 16u * kTwoWay.size());
  const double pc = r.median("parent-child", "parent-child");
  for (const auto& h : kTwoWay)
    if (h != "parent-child") {
      EXPECT_GT(pc, r.median("parent-child", h)) << h;
    }
  EXPECT_GT(pc, 0.0);
}

TEST(Study, IncestAssumingNoRapeIsExactlyZeroWhenChildTyped) {
  auto cfg = incest_rape_study(synthetic_frequencies(10), 3);
  cfg.genotype_replicates = 2;
  cfg.epg_replicates = 2;
  auto r = run_study(cfg);
  int checked = 0;
  for (const auto& row : r.rows)
    if (row.test == "incest|no-rape:C" || row.test == "incest|no-rape:MC") {
      EXPECT_EQ(row.log10_lr, 0.0) << row.test;
      EXPECT_EQ(row.status, LrStatus::Finite);
      ++checked;
    }
  EXPECT_EQ(checked, 8);
  // Without the child's genotype the identity does not hold.
  bool nonzero = false;
  for (const auto& row : r.rows) nonzero = nonzero || (row.test == "incest|no-rape:none" && row.log10_lr != 0.0);
  EXPECT_TRUE(nonzero);
}

TEST(Study, TypingTheFourthBrotherStrengthensTheEvidence) {
  auto cfg = four_sibs_study(synthetic_frequencies(10), 5);
  cfg.genotype_replicates = 2;
  cfg.epg_replicates = 2;
  auto r = run_study(cfg);
  std::vector<double> diffs;
  for (std::size_t i = 0; i < r.rows.size(); i += 2) {
    ASSERT_EQ(r.rows[i].test, "without-X4");
    ASSERT_EQ(r.rows[i + 1].test, "with-X4");
    diffs.push_back(r.rows[i + 1].log10_lr - r.rows[i].log10_lr);
  }
  EXPECT_GT(detail::median_of(diffs), 0.0);
}

TEST(Study, IdenticalHypothesesGiveAllZeroTable) {
  auto cfg = two_way_study(synthetic_frequencies(6, 9), {"sibs"}, {"sibs"}, 4);
  cfg.tests[0].h0 = cfg.tests[0].hp;
  cfg.genotype_replicates = 2;
  cfg.epg_replicates = 2;
  auto r = run_study(cfg);
  for (const auto& row : r.rows) EXPECT_EQ(row.log10_lr, 0.0);
  EXPECT_EQ(r.median("sibs", "sibs"), 0.0);
}

TEST(Study, ReproducibleForSeedAndThreadCount) {
  auto cfg = two_way_study(synthetic_frequencies(5, 2), {"sibs", "cousins"}, {"sibs", "parent-child"}, 11);
  cfg.genotype_replicates = 2;
  cfg.epg_replicates = 2;
  auto a = run_study(cfg);
  cfg.threads = 3;
  auto b = run_study(cfg);
  EXPECT_EQ(a.replicates_csv(), b.replicates_csv());
  EXPECT_EQ(a.medians_csv(), b.medians_csv());
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].log10_lr, b.rows[i].log10_lr);
  cfg.seed = 12;
  EXPECT_NE(run_study(cfg).replicates_csv(), a.replicates_csv());
}

TEST(Study, OutputLayout) {
  StudyResult r;
  r.truths = {"t"};
  r.tests = {"a", "b"};
  r.medians = {{1.5, kNegInf}};
  r.rows = {{"t", "a", 1, 2, 1.5, LrStatus::Finite}, {"t", "b", 1, 2, kNegInf, LrStatus::MinusInfinity}};
  EXPECT_EQ(r.medians_csv(), "truth,a,b\nt,1.500000,-Inf\n");
  EXPECT_EQ(r.replicates_csv(),
            "truth,test,genotype_replicate,epg_replicate,log10_lr,status\nt,a,1,2,1.500000,finite\nt,b,1,2,-Inf,-inf\n");
  EXPECT_EQ(detail::median_of({kNegInf, kNegInf, 1.0, 2.0}), kNegInf);
  EXPECT_EQ(detail::median_of({1.0, 3.0}), 2.0);
  EXPECT_TRUE(std::isnan(detail::median_of({std::nan("")})));
}

TEST(Study, ConfigValidation) {
  StudyConfig cfg;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = two_way_study(synthetic_frequencies(3, 1), {"sibs"}, {"sibs"}, 1);
  cfg.truths[0].cells = {100};
  EXPECT_THROW(run_study(cfg), ValidationError);
  cfg.truths[0].cells = {100, 0};
  EXPECT_THROW(run_study(cfg), ValidationError);
  cfg = two_way_study(synthetic_frequencies(3, 1), {"sibs"}, {"trio"}, 1);
  cfg.genotype_replicates = cfg.epg_replicates = 1;
  EXPECT_THROW(run_study(cfg), ValidationError);
}
