#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "pedmix/genotype.hpp"
#include "pedmix/relationships.hpp"
#include "test_support.hpp"

using namespace pedmix;
using namespace pedmix::testing;

namespace {

AlleleFrequencyTable abc_table(double qa, double qb, double qc, double qd = 0.0) {
  std::vector<std::tuple<std::string, Allele, double>> e{
      {"M1", Allele{100}, qa}, {"M1", Allele{110}, qb}, {"M1", Allele{120}, qc}};
  if (qd > 0) e.emplace_back("M1", Allele{130}, qd);
  return AlleleFrequencyTable::from_entries(e);
}

Genotype gt(int a, int b) { return Genotype::of(Allele{a}, Allele{b}); }

} // namespace

TEST(Alleles, ParseAndFormat) {
  EXPECT_EQ(Allele::parse("15").tenths, 150);
  EXPECT_EQ(Allele::parse(" 15.3 ").tenths, 153);
  EXPECT_EQ(Allele::parse("15.3").str(), "15.3");
  EXPECT_EQ(Allele::parse("15.3").minus_one_repeat().str(), "14.3");
  EXPECT_THROW(Allele::parse("X"), ParseError);
  EXPECT_THROW(Allele::parse("15.33"), ParseError);
  EXPECT_THROW(Allele::parse(""), ParseError);
}

TEST(Alleles, FrequencyTableRenormalisesWithWarning) {
  auto t = AlleleFrequencyTable::parse("marker,allele,frequency\nD1,10,0.2\nD1,11,0.2\nD2,8,0.5\nD2,9.3,0.5\n");
  EXPECT_EQ(t.markers(), (std::vector<std::string>{"D1", "D2"}));
  EXPECT_DOUBLE_EQ(t.marker("D1").freqs[0], 0.5);
  ASSERT_EQ(t.warnings().size(), 1u);
  EXPECT_NE(t.warnings()[0].find("D1"), std::string::npos);
  EXPECT_EQ(t.index_of("D2", Allele::parse("9.3")), 1);
  EXPECT_THROW(t.index_of("D2", Allele::parse("7")), ValidationError);
  EXPECT_THROW(AlleleFrequencyTable::parse("D1,10,-0.1\n"), ValidationError);
  EXPECT_THROW(AlleleFrequencyTable::parse("D1,10\n"), ParseError);
  auto back = AlleleFrequencyTable::parse(t.to_csv());
  EXPECT_EQ(back.to_csv(), t.to_csv());
  EXPECT_TRUE(back.warnings().empty());
}

TEST(Alleles, ExtendAddsAndRenormalises) {
  auto t = abc_table(0.2, 0.3, 0.5);
  t.extend("M1", Allele{90}, 0.01);
  EXPECT_EQ(t.index_of("M1", Allele{90}), 0);
  double s = 0;
  for (double f : t.marker("M1").freqs) s += f;
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(Alleles, GenotypeCsvRoundTrip) {
  auto p = GenotypeProfile::parse("marker,allele1,allele2\nD1,12,10\nD2,9.3,9.3\n");
  EXPECT_EQ(p.at("D1"), gt(100, 120));
  EXPECT_TRUE(p.at("D2").homozygous());
  EXPECT_EQ(GenotypeProfile::parse(p.to_csv()), p);
  EXPECT_THROW(GenotypeProfile::parse("D1,10,11\nD1,10,12\n"), ValidationError);
}

TEST(JointGenotype, KappaFormulaForTwoRelatives) {
  const double qa = 0.1, qb = 0.2, qc = 0.3;
  auto t = abc_table(qa, qb, qc, 0.4);
  for (const char* name : {"half-sibs", "cousins", "parent-child", "unrelated"}) {
    auto rel = named_relationship(name);
    auto d = rel.distribution();
    double k0 = 0, k1 = 0;
    for (const auto& e : d.entries()) {
      int shared = e.pattern.distinct_labels() == 4 ? 0 : 1;
      (shared ? k1 : k0) += e.probability;
    }
    double p = joint_genotype_probability(d, t, "M1", {{"X1", gt(100, 110)}, {"X2", gt(100, 120)}});
    EXPECT_NEAR(p, k0 * 4 * qa * qa * qb * qc + k1 * qa * qb * qc, 1e-15) << name;
  }
}

TEST(JointGenotype, HardyWeinbergHomozygote) {
  auto t = abc_table(0.1, 0.2, 0.7);
  auto d = IBDPatternDistribution::unrelated({"A"});
  EXPECT_NEAR(joint_genotype_probability(d, t, "M1", {{"A", gt(110, 110)}}), 0.04, 1e-16);
  EXPECT_NEAR(joint_genotype_probability(d, t, "M1", {{"A", gt(100, 110)}}), 0.04, 1e-16);
}

TEST(JointGenotype, IncestTrioMatchesGeneDropping) {
  Pedigree ped = Pedigree::load(PEDMIX_DATA_DIR "/incest_sibs.ped");
  std::vector<std::string> ids{"F", "M", "C"};
  auto d = pattern_distribution(ped, ids);
  std::vector<double> q{0.15, 0.25, 0.6};
  auto gts = all_genotypes(3);
  for (const auto& g1 : gts)
    for (const auto& g2 : gts)
      for (const auto& g3 : gts) {
        std::vector<IndexGenotype> g{g1, g2, g3};
        EXPECT_NEAR(joint_genotype_probability(d, g, q), gene_drop_probability(ped, ids, g, q), 1e-14);
      }
}

TEST(JointGenotype, SumsToOneOverAllCombinations) {
  std::vector<double> q{0.1, 0.2, 0.3, 0.4};
  auto gts = all_genotypes(4);
  for (const char* name : {"trio", "3-cousins-star", "3-cousins-cyclic", "incest-grandfather", "mz-twins"}) {
    auto d = named_relationship(name).distribution();
    const std::size_t n = d.ids().size();
    double total = 0.0;
    std::vector<IndexGenotype> cur(n);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == n) {
        total += joint_genotype_probability(d, cur, q);
        return;
      }
      for (const auto& g : gts) {
        cur[i] = g;
        rec(i + 1);
      }
    };
    rec(0);
    EXPECT_NEAR(total, 1.0, 1e-12) << name;
  }
}

TEST(JointGenotype, RejectsUnknownIdsAndAlleles) {
  auto t = abc_table(0.2, 0.3, 0.5);
  auto d = IBDPatternDistribution::unrelated({"A"});
  EXPECT_THROW(joint_genotype_probability(d, t, "M1", {{"B", gt(100, 100)}}), ValidationError);
  EXPECT_THROW(joint_genotype_probability(d, t, "M1", {{"A", gt(100, 990)}}), ValidationError);
}

TEST(Condition, WorkedExampleRows) {
  const double qa = 0.1, qb = 0.2, qc = 0.3;
  auto t = abc_table(qa, qb, qc, 0.4);
  auto d = named_relationship("trio-grandfather").distribution();
  ConditionOptions opts;
  opts.merge = false;
  opts.keep_impossible = true;
  auto table = condition_on_typed(d, t, "M1", {"F", "M"}, {{"C", gt(100, 110)}, {"GF", gt(110, 120)}}, opts);
  ASSERT_EQ(table.rows.size(), 8u);
  const double w1 = 0.125 * qa * qb * qc, w2 = 0.125 * qa * qb * qb * qc;
  const double expected[8] = {0, w1, 0, 0, w2, w2, w2, w2};
  for (int r = 0; r < 8; ++r) EXPECT_NEAR(table.rows[r].raw_weight, expected[r], 1e-17) << "row " << r + 1;
  // Row 2: father (b,?), mother (a,?).
  const auto& r2 = table.rows[1].genes;
  EXPECT_EQ(r2[0][0], GeneSource::fixed(1));
  EXPECT_TRUE(r2[0][1].draw);
  EXPECT_EQ(r2[1][0], GeneSource::fixed(0));
  EXPECT_TRUE(r2[1][1].draw);
  // Rows 5 to 8 fix the father completely and leave one maternal draw.
  const IndexGenotype father[4] = {{0, 1}, {1, 1}, {0, 2}, {1, 2}};
  for (int r = 4; r < 8; ++r) {
    const auto& g = table.rows[r].genes;
    ASSERT_FALSE(g[0][0].draw || g[0][1].draw);
    EXPECT_EQ(IndexGenotype(std::min(g[0][0].value, g[0][1].value), std::max(g[0][0].value, g[0][1].value)),
              father[r - 4]);
    EXPECT_EQ(table.rows[r].ndraws, 1);
  }
}

TEST(Condition, PaternityTrioSingleRow) {
  const double qa = 0.1, qb = 0.2, qc = 0.3;
  auto t = abc_table(qa, qb, qc, 0.4);
  auto d = named_relationship("trio").distribution();
  auto table = condition_on_typed(d, t, "M1", {"F"}, {{"M", gt(100, 110)}, {"C", gt(110, 120)}});
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_NEAR(table.rows[0].raw_weight, 0.25 * qa * qb * qc, 1e-17);
  EXPECT_DOUBLE_EQ(table.rows[0].weight, 1.0);
  const auto& f = table.rows[0].genes[0];
  EXPECT_EQ(f[0], GeneSource::fixed(2));
  EXPECT_TRUE(f[1].draw);
}

TEST(Condition, NoTypedReproducesPatterns) {
  auto t = abc_table(0.2, 0.3, 0.5);
  auto d = named_relationship("3-cousins-cyclic").distribution();
  ConditionOptions opts;
  opts.merge = false;
  auto table = condition_on_typed(d, t, "M1", {"X1", "X2", "X3"}, {}, opts);
  ASSERT_EQ(table.rows.size(), d.size());
  for (std::size_t r = 0; r < d.size(); ++r) {
    EXPECT_EQ(table.rows[r].pattern, d.entries()[r].pattern.labels());
    EXPECT_DOUBLE_EQ(table.rows[r].weight, d.entries()[r].probability);
    EXPECT_EQ(table.rows[r].ndraws, d.entries()[r].pattern.distinct_labels());
  }
  EXPECT_DOUBLE_EQ(table.typed_probability, 1.0);
}

TEST(Condition, SharedLabelsShareDrawSlots) {
  auto t = abc_table(0.2, 0.3, 0.5);
  auto d = named_relationship("mz-twins").distribution();
  auto table = condition_on_typed(d, t, "M1", {"X1", "X2"}, {});
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.rows[0].ndraws, 2);
  EXPECT_EQ(table.rows[0].genes[0], table.rows[0].genes[1]);
}

TEST(Condition, ImpossibleEvidenceIsSignalled) {
  auto t = abc_table(0.2, 0.3, 0.5);
  auto d = named_relationship("trio").distribution();
  try {
    condition_on_typed(d, t, "M1", {"F"}, {{"M", gt(100, 100)}, {"C", gt(110, 120)}});
    FAIL() << "expected ImpossibleEvidence";
  } catch (const ImpossibleEvidence& e) {
    EXPECT_EQ(e.marker(), "M1");
  }
  EXPECT_THROW(condition_on_typed(d, t, "M1", {"F"}, {{"F", gt(100, 100)}}), ValidationError);
}

TEST(Condition, BayesConsistencyExhaustive) {
  // Every typed configuration and every contributor genotype on 3- and
  // 4-allele markers.
  struct Case {
    const char* rel;
    std::vector<std::string> contributors, typed;
  };
  const std::vector<Case> cases{{"trio-grandfather", {"F", "M"}, {"C", "GF"}},
                                {"trio", {"F"}, {"M", "C"}},
                                {"incest-sibs", {"M", "C"}, {"F"}},
                                {"incest-grandfather", {"C"}, {"GF", "M"}},
                                {"3-cousins-cyclic", {"X1", "X2"}, {"X3"}},
                                {"mz-twins", {"X1"}, {"X2"}},
                                {"4-sibs", {"X1", "X2", "X3"}, {"X4"}}};
  for (int A : {3, 4}) {
    std::vector<double> q = A == 3 ? std::vector<double>{0.2, 0.3, 0.5} : std::vector<double>{0.1, 0.2, 0.3, 0.4};
    auto gts = all_genotypes(A);
    for (const auto& c : cases) {
      auto full = named_relationship(c.rel).distribution();
      std::vector<std::string> cols = c.contributors;
      cols.insert(cols.end(), c.typed.begin(), c.typed.end());
      auto dist = marginalize(full, cols);
      auto typed_only = marginalize(full, c.typed);
      const std::size_t nc = c.contributors.size(), nt = c.typed.size();
      std::vector<IndexGenotype> typed(nt);
      std::function<void(std::size_t)> over_typed = [&](std::size_t j) {
        if (j < nt) {
          for (const auto& g : gts) {
            typed[j] = g;
            over_typed(j + 1);
          }
          return;
        }
        double pt = joint_genotype_probability(typed_only, typed, q);
        auto table = detail::condition_indices(dist, nc, typed, q);
        EXPECT_NEAR(table.typed_probability, pt, 1e-15) << c.rel;
        if (pt == 0.0) {
          EXPECT_TRUE(table.impossible());
          return;
        }
        auto implied = implied_genotypes(table, q);
        std::vector<IndexGenotype> all(nc + nt);
        std::copy(typed.begin(), typed.end(), all.begin() + static_cast<std::ptrdiff_t>(nc));
        std::function<void(std::size_t)> over_contrib = [&](std::size_t i) {
          if (i < nc) {
            for (const auto& g : gts) {
              all[i] = g;
              over_contrib(i + 1);
            }
            return;
          }
          double want = joint_genotype_probability(dist, all, q) / pt;
          std::vector<IndexGenotype> key(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(nc));
          double got = implied.contains(key) ? implied[key] : 0.0;
          EXPECT_NEAR(got, want, 1e-12) << c.rel;
        };
        over_contrib(0);
      };
      over_typed(0);
    }
  }
}

TEST(Simulate, UnrelatedIndividualIsHardyWeinberg) {
  auto t = abc_table(0.2, 0.3, 0.5);
  auto d = IBDPatternDistribution::unrelated({"A"});
  std::mt19937_64 rng(5);
  std::map<Genotype, int> counts;
  const int N = 100000;
  for (int i = 0; i < N; ++i) ++counts[simulate_profiles(d, t, rng)["A"].at("M1")];
  const auto& mf = t.marker("M1");
  double chi2 = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      double e = N * mf.freqs[a] * mf.freqs[b] * (a == b ? 1 : 2);
      double o = counts[Genotype::of(mf.alleles[a], mf.alleles[b])];
      chi2 += (o - e) * (o - e) / e;
    }
  // 5 degrees of freedom; 0.999 quantile is 20.5.
  EXPECT_LT(chi2, 20.5);
}

TEST(Simulate, ParentAndChildAlwaysShareAnAllele) {
  std::vector<std::tuple<std::string, Allele, double>> e;
  for (int m = 0; m < 20; ++m)
    for (int a = 0; a < 8; ++a) e.emplace_back("D" + std::to_string(m), Allele{80 + 10 * a}, 1.0 / 8);
  auto t = AlleleFrequencyTable::from_entries(e);
  auto d = named_relationship("parent-child").distribution();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto p = simulate_profiles(d, t, seed);
    for (const auto& m : t.markers()) {
      auto x = p["X1"].at(m), y = p["X2"].at(m);
      bool shares = x.first == y.first || x.first == y.second || x.second == y.first || x.second == y.second;
      EXPECT_TRUE(shares);
    }
  }
}

TEST(Simulate, SibsShareZeroOneTwo) {
  std::vector<std::tuple<std::string, Allele, double>> e;
  for (int a = 0; a < 1000; ++a) e.emplace_back("D1", Allele{10 * a}, 1.0);
  auto t = AlleleFrequencyTable::from_entries(e);
  auto d = named_relationship("sibs").distribution();
  std::mt19937_64 rng(17);
  const int N = 100000;
  int share[3] = {0, 0, 0};
  for (int i = 0; i < N; ++i) {
    auto p = simulate_profiles(d, t, rng);
    auto x = p["X1"].at("D1"), y = p["X2"].at("D1");
    int s = 0;
    if (x.first == y.first && x.second == y.second) s = 2;
    else if (x.first == y.first || x.first == y.second || x.second == y.first || x.second == y.second) s = 1;
    ++share[s];
  }
  EXPECT_NEAR(share[0] / double(N), 0.25, 0.01);
  EXPECT_NEAR(share[1] / double(N), 0.5, 0.01);
  EXPECT_NEAR(share[2] / double(N), 0.25, 0.01);
}

TEST(Simulate, SeedDeterminism) {
  auto t = abc_table(0.2, 0.3, 0.5);
  auto d = named_relationship("3-sibs").distribution();
  EXPECT_EQ(simulate_profiles(d, t, 42), simulate_profiles(d, t, 42));
}

TEST(SimulateConditioned, FatherAlwaysDonatesC) {
  auto t = abc_table(0.1, 0.2, 0.3, 0.4);
  auto d = named_relationship("trio").distribution();
  auto table = condition_on_typed(d, t, "M1", {"F"}, {{"M", gt(100, 110)}, {"C", gt(110, 120)}});
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    auto g = simulate_conditioned(table, t, rng)[0];
    EXPECT_TRUE(g.first == Allele{120} || g.second == Allele{120});
  }
}

TEST(SimulateConditioned, NoDrawsIsDeterministic) {
  auto t = abc_table(0.1, 0.2, 0.3, 0.4);
  auto d = named_relationship("mz-twins").distribution();
  auto table = condition_on_typed(d, t, "M1", {"X1"}, {{"X2", gt(100, 120)}});
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_EQ(simulate_conditioned(table, t, s)[0], gt(100, 120));
}

TEST(SimulateConditioned, WorkedExampleFatherCarriesB) {
  const double qa = 0.1, qb = 0.2, qc = 0.3, qd = 0.4;
  auto t = abc_table(qa, qb, qc, qd);
  auto d = named_relationship("trio-grandfather").distribution();
  auto table = condition_on_typed(d, t, "M1", {"F", "M"}, {{"C", gt(100, 110)}, {"GF", gt(110, 120)}});
  // Analytic: weights over the five surviving rows; row 2 has father (b,?)
  // which always carries b, rows 5, 6, 8 carry b, row 7 (a,c) does not.
  const double w1 = 0.125 * qa * qb * qc, w2 = 0.125 * qa * qb * qb * qc;
  const double expected = (w1 + 3 * w2) / (w1 + 4 * w2);
  std::mt19937_64 rng(8);
  const int N = 100000;
  int hits = 0;
  for (int i = 0; i < N; ++i) {
    auto g = simulate_conditioned(table, t, rng)[0];
    hits += g.first == Allele{110} || g.second == Allele{110};
  }
  double p = hits / double(N);
  EXPECT_NEAR(p, expected, 4 * std::sqrt(expected * (1 - expected) / N));
}
