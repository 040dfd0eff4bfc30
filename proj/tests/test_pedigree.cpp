#include <gtest/gtest.h>

#include <string>

#include "pedmix/coefficients.hpp"
#include "pedmix/pedigree.hpp"
#include "pedmix/relationships.hpp"
#include "test_support.hpp"

using namespace pedmix;

TEST(Pedigree, ParsesMinimalTrio) {
  Pedigree ped = Pedigree::parse("F * *\nM * *\nC F M\n");
  ASSERT_EQ(ped.size(), 3u);
  EXPECT_EQ(ped.founders().size(), 2u);
  EXPECT_FALSE(ped[ped.at("C")].is_founder());
  EXPECT_EQ(ped.children(ped.at("F")).size(), 1u);
}

TEST(Pedigree, AcceptsZeroAsMissingParentAndSexColumn) {
  Pedigree ped = Pedigree::parse("# comment\nF 0 0 M\nM 0 0 2\nC F M U  # trailing\n");
  EXPECT_EQ(ped.size(), 3u);
  EXPECT_EQ(ped[ped.at("F")].sex, Sex::Male);
  EXPECT_EQ(ped[ped.at("M")].sex, Sex::Female);
}

TEST(Pedigree, RejectsUnknownParent) {
  EXPECT_THROW(Pedigree::parse("C F M\n"), ValidationError);
}

TEST(Pedigree, RejectsSingleParent) {
  EXPECT_THROW(Pedigree::parse("F * *\nC F *\n"), ValidationError);
}

TEST(Pedigree, RejectsDuplicateIds) {
  EXPECT_THROW(Pedigree::parse("F * *\nF * *\n"), ValidationError);
}

TEST(Pedigree, RejectsCycle) {
  EXPECT_THROW(Pedigree::parse("A B M\nB A M\nM * *\n"), ValidationError);
}

TEST(Pedigree, RejectsMalformedLine) {
  EXPECT_THROW(Pedigree::parse("A *\n"), ParseError);
  EXPECT_THROW(Pedigree::parse("A * * Q\n"), ParseError);
}

TEST(Pedigree, ChildrenMayPrecedeParentsInFile) {
  Pedigree ped = Pedigree::parse("C F M\nF * *\nM * *\n");
  EXPECT_LT(ped.topological_position(ped.at("F")), ped.topological_position(ped.at("C")));
}

TEST(Pedigree, TextRoundTrip) {
  Pedigree ped = Pedigree::load(PEDMIX_DATA_DIR "/caesars.ped");
  Pedigree again = Pedigree::parse(ped.to_text());
  EXPECT_EQ(again.to_text(), ped.to_text());
}

TEST(Pedigree, CaesarsHasTwoInbredMatings) {
  Pedigree ped = Pedigree::load(PEDMIX_DATA_DIR "/caesars.ped");
  EXPECT_EQ(ped.size(), 35u);
  EXPECT_EQ(ped.founders().size(), 10u);
  auto loops = ped.inbred_matings();
  ASSERT_EQ(loops.size(), 2u);
  std::set<std::pair<std::string, std::string>> names;
  for (auto [f, m] : loops) names.emplace(ped[f].id, ped[m].id);
  EXPECT_TRUE(names.contains({"Germanicus", "AgrippinaMaior"}));
  EXPECT_TRUE(names.contains({"GnaeusDomitius", "AgrippinaMinor"}));
}

TEST(Kinship, ClassicalValues) {
  Pedigree ped = Pedigree::parse("P1 * *\nP2 * *\nA P1 P2\nB P1 P2\nX * *\nC A X\n");
  EXPECT_EQ(ped.kinship("A", "B"), Dyadic::inverse_pow2(2));
  EXPECT_EQ(ped.kinship("P1", "A"), Dyadic::inverse_pow2(2));
  EXPECT_EQ(ped.kinship("B", "C"), Dyadic::inverse_pow2(3));
  EXPECT_EQ(ped.kinship("A", "A"), Dyadic::inverse_pow2(1));
  EXPECT_TRUE(ped.kinship("P1", "P2").is_zero());
}

TEST(Jacquard, FifteenDetailedStatesFallIntoNineClasses) {
  // Every set partition of the four genes (a,b | c,d) is one detailed state.
  std::map<int, int> per_class;
  std::set<IBDPattern> canon;
  int states = 0;
  for (int b = 1; b <= 2; ++b)
    for (int c = 1; c <= std::max(1, b) + 1; ++c)
      for (int d = 1; d <= std::max({1, b, c}) + 1; ++d) {
        IBDPattern p = canonicalize({1, b, c, d});
        ++per_class[jacquard_class(p)];
        canon.insert(p);
        ++states;
      }
  EXPECT_EQ(states, 15);
  EXPECT_EQ(canon.size(), 9u);
  // Classes 3, 5 and 7 merge two detailed states each, class 8 merges four.
  std::map<int, int> expected{{1, 1}, {2, 1}, {3, 2}, {4, 1}, {5, 2}, {6, 1}, {7, 2}, {8, 4}, {9, 1}};
  EXPECT_EQ(per_class, expected);
}

struct KappaCase {
  const char* relationship;
  double k0, k1, k2;
};

class NamedKappa : public ::testing::TestWithParam<KappaCase> {};

TEST_P(NamedKappa, MatchesTabulatedKappa) {
  const auto& c = GetParam();
  Relationship rel = named_relationship(c.relationship);
  auto pc = pairwise_coefficients(*rel.pedigree, rel.members[0], rel.members[1]);
  ASSERT_TRUE(pc.kappa.has_value());
  EXPECT_DOUBLE_EQ((*pc.kappa)[0], c.k0);
  EXPECT_DOUBLE_EQ((*pc.kappa)[1], c.k1);
  EXPECT_DOUBLE_EQ((*pc.kappa)[2], c.k2);
}

INSTANTIATE_TEST_SUITE_P(Relationships, NamedKappa,
                         ::testing::Values(KappaCase{"parent-child", 0, 1, 0}, KappaCase{"sibs", 0.25, 0.5, 0.25},
                                           KappaCase{"half-sibs", 0.5, 0.5, 0},
                                           KappaCase{"cousins", 0.75, 0.25, 0},
                                           KappaCase{"half-cousins", 0.875, 0.125, 0},
                                           KappaCase{"double-first-cousins", 0.5625, 0.375, 0.0625}));

TEST(Coefficients, FoundersAreUnrelated) {
  Pedigree ped = Pedigree::parse("A * *\nB * *\n");
  auto pc = pairwise_coefficients(ped, "A", "B");
  for (int i = 0; i < 8; ++i) EXPECT_TRUE(pc.delta_exact[i].is_zero());
  EXPECT_EQ(pc.delta_exact[8], Dyadic::one());
}

TEST(Coefficients, BrotherSisterOffspringDelta) {
  Pedigree ped = Pedigree::parse("G1 * *\nG2 * *\nF G1 G2\nM G1 G2\nA F M\nB F M\n");
  auto pc = pairwise_coefficients(ped, "A", "B");
  // Numerators over 32.
  const int num[9] = {2, 1, 4, 1, 4, 1, 7, 10, 2};
  for (int i = 0; i < 9; ++i) EXPECT_EQ(pc.delta_exact[i], Dyadic::fraction(num[i], 5)) << "delta " << i + 1;
  EXPECT_FALSE(pc.kappa.has_value());
  const double expected[9] = {0.06250, 0.03125, 0.12500, 0.03125, 0.12500, 0.03125, 0.21875, 0.31250, 0.06250};
  for (int i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(pc.delta[i], expected[i]);
}

TEST(Coefficients, MotherAndSisterShareTheta) {
  Pedigree ped = Pedigree::parse("F * *\nM * *\nA F M\nB F M\n");
  auto mother = pairwise_coefficients(ped, "A", "M");
  auto sister = pairwise_coefficients(ped, "A", "B");
  EXPECT_EQ(mother.theta_exact, Dyadic::inverse_pow2(2));
  EXPECT_EQ(sister.theta_exact, Dyadic::inverse_pow2(2));
  EXPECT_NE(*mother.kappa, *sister.kappa);
}

TEST(Coefficients, UncleAndDoubleFirstCousinShareTheta) {
  Relationship dfc = named_relationship("double-first-cousins");
  auto a = pairwise_coefficients(*dfc.pedigree, "X1", "X2");
  auto b = pairwise_coefficients(*dfc.pedigree, "A2", "X1");
  EXPECT_EQ(a.theta_exact, Dyadic::inverse_pow2(3));
  EXPECT_EQ(b.theta_exact, Dyadic::inverse_pow2(3));
}

TEST(Coefficients, SelfPairCarriesInbreeding) {
  Pedigree ped = Pedigree::parse("G1 * *\nG2 * *\nF G1 G2\nM G1 G2\nA F M\n");
  auto self = pairwise_coefficients(ped, "A", "A");
  // F = 1/4: identical genes (class 1) w.p. 1/4, otherwise class 7.
  EXPECT_EQ(self.delta_exact[0], Dyadic::inverse_pow2(2));
  EXPECT_EQ(self.delta_exact[6], Dyadic::fraction(3, 2));
  EXPECT_EQ(self.theta_exact, Dyadic::fraction(5, 3));
}

TEST(Coefficients, UnknownIdThrows) {
  Pedigree ped = Pedigree::parse("A * *\nB * *\n");
  EXPECT_THROW(pairwise_coefficients(ped, "A", "Z"), ValidationError);
}

TEST(Coefficients, GermanicusAndAgrippinaMaior) {
  Pedigree ped = Pedigree::load(PEDMIX_DATA_DIR "/caesars.ped");
  auto pc = pairwise_coefficients(ped, "Germanicus", "AgrippinaMaior");
  ASSERT_TRUE(pc.kappa.has_value());
  EXPECT_EQ(pc.delta_exact[8], Dyadic::fraction(15, 4));
  EXPECT_EQ(pc.delta_exact[7], Dyadic::inverse_pow2(4));
  EXPECT_DOUBLE_EQ((*pc.kappa)[0], 0.9375);
  EXPECT_DOUBLE_EQ((*pc.kappa)[1], 0.0625);
}

TEST(Coefficients, PairwiseAgreesWithMultiPersonMarginal) {
  Pedigree ped = Pedigree::load(PEDMIX_DATA_DIR "/caesars.ped");
  std::vector<std::string> ids{"Germanicus", "AgrippinaMaior", "Caligula", "Nero"};
  auto joint = pattern_distribution(ped, ids);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      auto direct = pairwise_coefficients(ped, ids[i], ids[j]);
      auto via = coefficients_from_distribution(marginalize(joint, {ids[i], ids[j]}));
      EXPECT_EQ(direct.delta_exact, via.delta_exact) << ids[i] << "," << ids[j];
    }
}
