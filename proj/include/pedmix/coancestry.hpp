#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "pedmix/error.hpp"
#include "pedmix/genotype.hpp"

namespace pedmix {

/// Ambient relatedness: alleles are drawn from a Polya urn with Dirichlet
/// pseudo-counts alpha_a = alpha_total * q_a, alpha_total = (1 - theta) / theta.
/// theta = 0 is the independent-draw limit.
struct CoancestryParams {
  double theta = 0.0;

  void validate() const {
    if (!(theta >= 0.0 && theta < 1.0)) throw ValidationError("theta must lie in [0,1)");
  }
  bool independent() const { return theta == 0.0; }
  double alpha_total() const {
    validate();
    if (theta == 0.0) throw ValidationError("alpha is infinite at theta = 0");
    return (1.0 - theta) / theta;
  }
  std::vector<double> alpha(std::span<const double> q) const {
    const double a = alpha_total();
    std::vector<double> out;
    for (double f : q) out.push_back(a * f);
    return out;
  }
};

/// x (x+1) ... (x+k-1).
inline double rising_factorial(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x + i;
  return r;
}

/// Dirichlet-multinomial probability of the count vector x (n = sum x).
inline double dm_pmf(std::span<const int> x, std::span<const double> alpha) {
  if (x.size() != alpha.size()) throw ValidationError("count and alpha vectors differ in length");
  int n = 0;
  double a = 0.0, lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0) throw ValidationError("counts must be non-negative");
    if (x[i] > 0 && alpha[i] <= 0.0) return 0.0;
    n += x[i];
    a += alpha[i];
    lp -= std::lgamma(x[i] + 1.0);
    if (x[i] > 0) lp += std::lgamma(alpha[i] + x[i]) - std::lgamma(alpha[i]);
  }
  lp += std::lgamma(n + 1.0) + std::lgamma(a) - std::lgamma(a + n);
  return std::exp(lp);
}

/// Beta-binomial probability of k successes in n trials.
inline double bb_pmf(int k, int n, double a, double b) {
  if (k < 0 || k > n) return 0.0;
  const int x[2] = {k, n - k};
  const double alpha[2] = {a, b};
  return dm_pmf(x, alpha);
}

/// Sequential genotype prior: each contributor's genotype is DM(2, alpha +
/// counts of alleles already drawn). With theta = 0 the conditionals are HWE.
class SequentialGenotypePrior {
public:
  SequentialGenotypePrior(std::vector<double> q, CoancestryParams params) : q_(std::move(q)), params_(params) {
    params_.validate();
    if (!params_.independent()) alpha_ = params_.alpha(q_);
  }

  /// Probability of genotype g for the next contributor given the genotypes
  /// already drawn (including any seed alleles).
  double conditional(IndexGenotype g, std::span<const IndexGenotype> previous) const {
    auto [a, b] = g;
    if (params_.independent()) return a == b ? q_[a] * q_[a] : 2.0 * q_[a] * q_[b];
    std::vector<double> w = alpha_;
    double total = params_.alpha_total();
    for (auto [x, y] : previous) {
      w[x] += 1.0;
      w[y] += 1.0;
      total += 2.0;
    }
    if (a == b) return w[a] * (w[a] + 1.0) / (total * (total + 1.0));
    return 2.0 * w[a] * w[b] / (total * (total + 1.0));
  }

  /// Every unordered genotype with its conditional probability.
  std::vector<std::pair<IndexGenotype, double>> distribution(std::span<const IndexGenotype> previous) const {
    std::vector<std::pair<IndexGenotype, double>> out;
    for (int a = 0; a < static_cast<int>(q_.size()); ++a)
      for (int b = a; b < static_cast<int>(q_.size()); ++b)
        out.push_back({{a, b}, conditional({a, b}, previous)});
    return out;
  }

  /// Joint probability of an ordered sequence of genotypes.
  double joint(std::span<const IndexGenotype> genotypes) const {
    double p = 1.0;
    for (std::size_t i = 0; i < genotypes.size(); ++i) p *= conditional(genotypes[i], genotypes.first(i));
    return p;
  }

private:
  std::vector<double> q_;
  CoancestryParams params_;
  std::vector<double> alpha_;
};

} // namespace pedmix
