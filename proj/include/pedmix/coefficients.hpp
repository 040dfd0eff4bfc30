#pragma once

#include <array>
#include <optional>
#include <string>

#include "pedmix/dyadic.hpp"
#include "pedmix/error.hpp"
#include "pedmix/ibd.hpp"
#include "pedmix/pedigree.hpp"

namespace pedmix {

/// Jacquard class (1..9) of a two-person IBD pattern with genes (a,b | c,d).
inline int jacquard_class(const IBDPattern& p) {
  if (p.individuals() != 2) throw ValidationError("Jacquard classes are defined for pairs only");
  auto [a, b] = p.genes(0);
  auto [c, d] = p.genes(1);
  const bool ab = a == b, cd = c == d;
  if (ab && cd) return a == c ? 1 : 2;
  if (ab) return (a == c || a == d) ? 3 : 4;
  if (cd) return (c == a || c == b) ? 5 : 6;
  int shared = (a == c || a == d) + (b == c || b == d);
  return shared == 2 ? 7 : shared == 1 ? 8 : 9;
}

/// Condensed identity coefficients of a pair.
struct PairwiseCoefficients {
  std::array<Dyadic, 9> delta_exact{};
  std::array<double, 9> delta{};
  /// (k0, k1, k2); only when the pair carries no inbreeding states.
  std::optional<std::array<double, 3>> kappa;
  Dyadic theta_exact;
  double theta = 0.0;
};

inline PairwiseCoefficients coefficients_from_distribution(const IBDPatternDistribution& dist) {
  if (dist.ids().size() != 2) throw ValidationError("pairwise coefficients need a two-person distribution");
  if (!dist.is_exact()) throw ValidationError("pairwise coefficients need an exact distribution");
  PairwiseCoefficients pc;
  for (const auto& e : dist.entries()) pc.delta_exact[jacquard_class(e.pattern) - 1] += *e.exact;
  for (int i = 0; i < 9; ++i) pc.delta[i] = pc.delta_exact[i].to_double();
  bool outbred = true;
  for (int i = 0; i < 6; ++i) outbred = outbred && pc.delta_exact[i].is_zero();
  if (outbred) pc.kappa = std::array<double, 3>{pc.delta[8], pc.delta[7], pc.delta[6]};
  const auto& d = pc.delta_exact;
  pc.theta_exact = d[0] + (d[2] + d[4] + d[6]).halved() + d[7].halved(2);
  pc.theta = pc.theta_exact.to_double();
  return pc;
}

/// Coefficients for individuals `a` and `b` (which may coincide). The Jacquard
/// vector comes from the exact two-person IBD pattern distribution and the
/// kinship coefficient is checked against the direct recursion.
inline PairwiseCoefficients pairwise_coefficients(const Pedigree& ped, const std::string& a, const std::string& b) {
  ped.at(a);
  ped.at(b);
  PairwiseCoefficients pc = coefficients_from_distribution(pattern_distribution(ped, {a, b}));
  if (pc.theta_exact != ped.kinship(a, b))
    throw NumericalError("kinship recursion disagrees with the IBD pattern distribution for " + a + ", " + b);
  return pc;
}

} // namespace pedmix
