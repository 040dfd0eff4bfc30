#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pedmix/error.hpp"
#include "pedmix/ibd.hpp"
#include "pedmix/pedigree.hpp"

namespace pedmix {

/// A named joint relationship among `members`, given either by a pedigree or
/// directly by an IBD pattern distribution (monozygotic twins have no
/// pedigree representation under Mendelian inheritance).
struct Relationship {
  std::string name;
  std::vector<std::string> members;
  std::optional<Pedigree> pedigree;
  std::optional<IBDPatternDistribution> explicit_distribution;

  IBDPatternDistribution distribution(const IbdOptions& opts = {}) const {
    if (explicit_distribution) return *explicit_distribution;
    if (!pedigree) return IBDPatternDistribution::unrelated(members);
    return pattern_distribution(*pedigree, members, opts);
  }
};

namespace detail {

inline Relationship from_pedigree(std::string name, std::vector<std::string> members, std::string_view text) {
  return Relationship{std::move(name), std::move(members), Pedigree::parse(text), std::nullopt};
}

} // namespace detail

/// Members are named X1, X2, ... in every built-in relationship except the
/// trio-shaped ones, which use F, M, C (and GF where relevant).
inline Relationship named_relationship(std::string_view name) {
  using detail::from_pedigree;
  const std::string n(name);
  if (n == "unrelated" || n == "unrelated-2") return Relationship{n, {"X1", "X2"}, std::nullopt, std::nullopt};
  if (n == "unrelated-3") return Relationship{n, {"X1", "X2", "X3"}, std::nullopt, std::nullopt};
  if (n == "parent-child")
    return from_pedigree(n, {"X1", "X2"}, "X1 * *\nP2 * *\nX2 X1 P2\n");
  if (n == "sibs")
    return from_pedigree(n, {"X1", "X2"}, "P1 * *\nP2 * *\nX1 P1 P2\nX2 P1 P2\n");
  if (n == "half-sibs")
    return from_pedigree(n, {"X1", "X2"}, "P1 * *\nP2 * *\nP3 * *\nX1 P1 P2\nX2 P1 P3\n");
  if (n == "cousins")
    return from_pedigree(n, {"X1", "X2"},
                         "G1 * *\nG2 * *\nA1 G1 G2\nA2 G1 G2\nS1 * *\nS2 * *\nX1 A1 S1\nX2 A2 S2\n");
  if (n == "half-cousins")
    return from_pedigree(n, {"X1", "X2"},
                         "G1 * *\nG2 * *\nG3 * *\nA1 G1 G2\nA2 G1 G3\nS1 * *\nS2 * *\nX1 A1 S1\nX2 A2 S2\n");
  if (n == "double-first-cousins")
    return from_pedigree(n, {"X1", "X2"},
                         "G1 * *\nG2 * *\nG3 * *\nG4 * *\nA1 G1 G2\nA2 G1 G2\nB1 G3 G4\nB2 G3 G4\n"
                         "X1 A1 B1\nX2 B2 A2\n");
  if (n == "mz-twins")
    return Relationship{n, {"X1", "X2"}, std::nullopt,
                        IBDPatternDistribution::from_exact({"X1", "X2"}, {{canonicalize({1, 2, 1, 2}), Dyadic::one()}})};
  if (n == "trio")
    return from_pedigree(n, {"F", "M", "C"}, "F * *\nM * *\nC F M\n");
  if (n == "trio-grandfather")
    return from_pedigree(n, {"F", "M", "C", "GF"}, "GF * *\nGM * *\nF GF GM\nM * *\nC F M\n");
  if (n == "mother-2-kids")
    return from_pedigree(n, {"X1", "X2", "X3"}, "X1 * *\nP * *\nX2 P X1\nX3 P X1\n");
  if (n == "3-sibs")
    return from_pedigree(n, {"X1", "X2", "X3"}, "P1 * *\nP2 * *\nX1 P1 P2\nX2 P1 P2\nX3 P1 P2\n");
  if (n == "4-sibs")
    return from_pedigree(n, {"X1", "X2", "X3", "X4"},
                         "P1 * *\nP2 * *\nX1 P1 P2\nX2 P1 P2\nX3 P1 P2\nX4 P1 P2\n");
  if (n == "3-cousins-star")
    // The three mothers are sisters.
    return from_pedigree(n, {"X1", "X2", "X3"},
                         "G1 * *\nG2 * *\nM1 G1 G2\nM2 G1 G2\nM3 G1 G2\nF1 * *\nF2 * *\nF3 * *\n"
                         "X1 F1 M1\nX2 F2 M2\nX3 F3 M3\n");
  if (n == "3-cousins-cyclic")
    // Each pair of neighbouring cousins is linked through a different sib pair.
    return from_pedigree(n, {"X1", "X2", "X3"},
                         "A1 * *\nA2 * *\nB1 * *\nB2 * *\nD1 * *\nD2 * *\n"
                         "F1 A1 A2\nM2 A1 A2\nF2 B1 B2\nM3 B1 B2\nF3 D1 D2\nM1 D1 D2\n"
                         "X1 F1 M1\nX2 F2 M2\nX3 F3 M3\n");
  if (n == "incest-sibs")
    // Father and mother of the child are full sibs.
    return from_pedigree(n, {"F", "M", "C"}, "GF * *\nGM * *\nF GF GM\nM GF GM\nC F M\n");
  if (n == "incest-grandfather")
    // The maternal grandfather is also the father.
    return from_pedigree(n, {"GF", "M", "C"}, "GF * *\nGM * *\nM GF GM\nC GF M\n");
  if (n == "no-incest-grandfather")
    return from_pedigree(n, {"GF", "M", "C"}, "GF * *\nGM * *\nM GF GM\nF * *\nC F M\n");
  throw ValidationError("unknown relationship '" + n + "'");
}

inline std::vector<std::string> relationship_names() {
  return {"unrelated",      "parent-child",     "sibs",          "half-sibs",          "cousins",
          "half-cousins",   "double-first-cousins", "mz-twins",  "trio",               "trio-grandfather",
          "mother-2-kids",  "3-sibs",           "4-sibs",        "3-cousins-star",     "3-cousins-cyclic",
          "incest-sibs",    "incest-grandfather", "no-incest-grandfather", "unrelated-3"};
}

} // namespace pedmix
