#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pedmix/alleles.hpp"
#include "pedmix/error.hpp"
#include "pedmix/ibd.hpp"

namespace pedmix {

/// Genotype as a pair of allele indices into one marker's allele list.
using IndexGenotype = std::pair<int, int>;

namespace detail {

/// Uniform double in [0,1) from 53 random bits; portable across standard
/// libraries, unlike std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t sample_index(std::mt19937_64& rng, std::span<const double> weights, double total) {
  double u = unit_uniform(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding can leave u just above the last weight; take the last positive one.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return 0;
}

/// Sum over the orderings of each genotype of the product of q over the
/// distinct labels, given a label -> allele map that must stay consistent.
inline double pattern_genotype_probability(const LabelVector& labels, std::span<const IndexGenotype> genotypes,
                                           std::span<const double> q, std::vector<int>& allele_of,
                                           std::size_t i) {
  if (i == genotypes.size()) return 1.0;
  const int l1 = labels[2 * i], l2 = labels[2 * i + 1];
  auto [a, b] = genotypes[i];
  double total = 0.0;
  auto try_order = [&](int x, int y) {
    double f = 1.0;
    int set1 = -1, set2 = -1;
    if (allele_of[l1] < 0) {
      allele_of[l1] = x;
      set1 = l1;
      f *= q[x];
    } else if (allele_of[l1] != x) {
      return;
    }
    if (allele_of[l2] < 0) {
      allele_of[l2] = y;
      set2 = l2;
      f *= q[y];
    } else if (allele_of[l2] != y) {
      if (set1 >= 0) allele_of[set1] = -1;
      return;
    }
    total += f * pattern_genotype_probability(labels, genotypes, q, allele_of, i + 1);
    if (set1 >= 0) allele_of[set1] = -1;
    if (set2 >= 0) allele_of[set2] = -1;
  };
  try_order(a, b);
  if (a != b) try_order(b, a);
  return total;
}

} // namespace detail

/// Joint probability that the individuals of `dist` (in its column order)
/// have the given genotypes, with alleles drawn from q.
inline double joint_genotype_probability(const IBDPatternDistribution& dist, std::span<const IndexGenotype> genotypes,
                                         std::span<const double> q) {
  if (genotypes.size() != dist.ids().size())
    throw ValidationError("one genotype per individual of the IBD distribution is required");
  for (auto [a, b] : genotypes)
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= q.size() || static_cast<std::size_t>(b) >= q.size())
      throw ValidationError("allele index out of range");
  double total = 0.0;
  std::vector<int> allele_of(2 * genotypes.size() + 1, -1);
  for (const auto& e : dist.entries())
    total += e.probability * detail::pattern_genotype_probability(e.pattern.labels(), genotypes, q, allele_of, 0);
  return total;
}

/// Joint probability of the listed individuals' genotypes at `marker`.
/// Individuals of `dist` that are not listed are marginalised out.
inline double joint_genotype_probability(const IBDPatternDistribution& dist, const AlleleFrequencyTable& freqs,
                                         const std::string& marker,
                                         const std::map<std::string, Genotype>& genotypes) {
  if (genotypes.empty()) return 1.0;
  std::vector<std::string> ids;
  std::vector<IndexGenotype> gts;
  for (const auto& id : dist.ids()) {
    auto it = genotypes.find(id);
    if (it == genotypes.end()) continue;
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) continue;
    ids.push_back(id);
    gts.emplace_back(freqs.index_of(marker, it->second.first), freqs.index_of(marker, it->second.second));
  }
  for (const auto& [id, g] : genotypes)
    if (!dist.column_of(id)) throw ValidationError("individual '" + id + "' is not in the IBD pattern distribution");
  auto sub = ids.size() == dist.ids().size() ? dist : marginalize(dist, ids);
  return joint_genotype_probability(sub, gts, freqs.marker(marker).freqs);
}

/// Where one contributor gene comes from in a conditioned row: a fixed
/// allele (index into the marker's allele list) or a gene-pool draw slot.
struct GeneSource {
  bool draw = false;
  int value = 0;

  static GeneSource fixed(int allele) { return {false, allele}; }
  static GeneSource from_pool(int slot) { return {true, slot}; }
  friend bool operator==(const GeneSource&, const GeneSource&) = default;
};

struct ConditionedRow {
  /// Permuted labels over contributors then typed individuals (the first
  /// contributing permutation when rows were merged).
  LabelVector pattern;
  std::vector<std::array<GeneSource, 2>> genes;
  int ndraws = 0;
  /// Pattern probability x permutation share x product of q over the labels
  /// fixed by typed genotypes.
  double raw_weight = 0.0;
  /// raw_weight renormalised over the table.
  double weight = 0.0;
};

/// Genotype distribution of contributors given typed relatives, at one marker.
struct ConditionedPatternTable {
  std::string marker;
  std::vector<std::string> contributors;
  std::vector<std::string> typed;
  std::vector<ConditionedRow> rows;
  int ndraws = 0;
  /// Sum of raw row weights.
  double raw_total = 0.0;
  /// Probability of the typed genotypes.
  double typed_probability = 0.0;

  bool impossible() const { return rows.empty(); }
};

struct ConditionOptions {
  /// Merge rows that give contributors the same gene sources.
  bool merge = true;
  /// Keep zero-weight permutations (useful to inspect the full expansion).
  bool keep_impossible = false;
};

namespace detail {

// Fixed alleles order before draw slots.
inline constexpr int kDrawKeyOffset = 1 << 24;

inline std::vector<int> row_key(const std::vector<std::array<GeneSource, 2>>& genes) {
  std::vector<int> key;
  key.reserve(2 * genes.size());
  for (const auto& g : genes)
    for (const auto& s : g) key.push_back(s.draw ? kDrawKeyOffset + s.value : s.value);
  return key;
}

/// Renumber draw slots by first appearance after choosing, per contributor,
/// the within-pair order that gives the lexicographically smallest key.
inline std::vector<std::array<GeneSource, 2>> normalize_genes(const std::vector<std::array<GeneSource, 2>>& genes) {
  const std::size_t n = genes.size();
  std::vector<std::array<GeneSource, 2>> best;
  std::vector<int> best_key;
  const std::uint32_t combos = n < 16 ? (1u << n) : 1u;
  for (std::uint32_t mask = 0; mask < combos; ++mask) {
    auto g = genes;
    for (std::size_t i = 0; i < n; ++i)
      if ((mask >> i) & 1u) std::swap(g[i][0], g[i][1]);
    std::map<int, int> renum;
    for (auto& pair : g)
      for (auto& s : pair)
        if (s.draw) s.value = renum.try_emplace(s.value, static_cast<int>(renum.size())).first->second;
    auto key = row_key(g);
    if (best.empty() || key < best_key) {
      best = std::move(g);
      best_key = std::move(key);
    }
  }
  return best;
}

/// Core of condition_on_typed on index genotypes. `dist` columns must be the
/// contributors followed by the typed individuals.
inline ConditionedPatternTable condition_indices(const IBDPatternDistribution& dist, std::size_t ncontrib,
                                                 std::span<const IndexGenotype> typed, std::span<const double> q,
                                                 const ConditionOptions& opts = {}) {
  const std::size_t t = typed.size();
  if (dist.ids().size() != ncontrib + t) throw ValidationError("distribution columns do not match the individuals");
  if (t > 20) throw CapExceeded("too many typed individuals to expand permutations");
  ConditionedPatternTable table;
  table.contributors.assign(dist.ids().begin(), dist.ids().begin() + static_cast<std::ptrdiff_t>(ncontrib));
  table.typed.assign(dist.ids().begin() + static_cast<std::ptrdiff_t>(ncontrib), dist.ids().end());
  std::map<std::vector<int>, std::size_t> index;
  const double share = std::ldexp(1.0, -static_cast<int>(t));
  int heterozygous = 0;
  for (auto [a, b] : typed) heterozygous += a != b;

  for (const auto& entry : dist.entries()) {
    const LabelVector& base = entry.pattern.labels();
    const int max_label = entry.pattern.distinct_labels();
    for (std::uint32_t mask = 0; mask < (1u << t); ++mask) {
      LabelVector labels = base;
      for (std::size_t j = 0; j < t; ++j)
        if ((mask >> j) & 1u) std::swap(labels[2 * (ncontrib + j)], labels[2 * (ncontrib + j) + 1]);
      std::vector<int> allele_of(static_cast<std::size_t>(max_label) + 1, -1);
      double w = entry.probability * share;
      bool ok = true;
      for (std::size_t j = 0; j < t && ok; ++j) {
        const int obs[2] = {typed[j].first, typed[j].second};
        for (int g = 0; g < 2 && ok; ++g) {
          int l = labels[2 * (ncontrib + j) + g];
          if (allele_of[l] < 0) {
            allele_of[l] = obs[g];
            w *= q[obs[g]];
          } else if (allele_of[l] != obs[g]) {
            ok = false;
          }
        }
      }
      if (!ok && !opts.keep_impossible) continue;
      ConditionedRow row;
      row.pattern = labels;
      row.raw_weight = ok ? w : 0.0;
      std::map<int, int> slot_of;
      row.genes.resize(ncontrib);
      for (std::size_t i = 0; i < ncontrib; ++i)
        for (int g = 0; g < 2; ++g) {
          int l = labels[2 * i + g];
          if (ok && allele_of[l] >= 0) {
            row.genes[i][g] = GeneSource::fixed(allele_of[l]);
          } else {
            int slot = slot_of.try_emplace(l, static_cast<int>(slot_of.size())).first->second;
            row.genes[i][g] = GeneSource::from_pool(slot);
          }
        }
      row.ndraws = static_cast<int>(slot_of.size());
      if (opts.merge && ok) {
        row.genes = normalize_genes(row.genes);
        auto key = row_key(row.genes);
        auto [it, inserted] = index.try_emplace(key, table.rows.size());
        if (!inserted) {
          table.rows[it->second].raw_weight += row.raw_weight;
          continue;
        }
      }
      table.rows.push_back(std::move(row));
    }
  }
  for (const auto& r : table.rows) {
    table.raw_total += r.raw_weight;
    table.ndraws = std::max(table.ndraws, r.ndraws);
  }
  table.typed_probability = std::ldexp(table.raw_total, heterozygous);
  if (table.raw_total > 0.0) {
    for (auto& r : table.rows) r.weight = r.raw_weight / table.raw_total;
  }
  if (!opts.keep_impossible && table.raw_total <= 0.0) table.rows.clear();
  return table;
}

} // namespace detail

/// Distribution of the contributors' genotypes at `marker` given the typed
/// genotypes, as a table of rows (fixed alleles and gene-pool draws) with
/// weights. Throws ImpossibleEvidence when the typed genotypes have
/// probability zero under every pattern.
inline ConditionedPatternTable condition_on_typed(const IBDPatternDistribution& dist, const AlleleFrequencyTable& freqs,
                                                  const std::string& marker,
                                                  const std::vector<std::string>& contributors,
                                                  const std::map<std::string, Genotype>& typed,
                                                  const ConditionOptions& opts = {}) {
  std::vector<std::string> cols = contributors;
  std::vector<IndexGenotype> gts;
  for (const auto& [id, g] : typed) {
    if (std::find(contributors.begin(), contributors.end(), id) != contributors.end())
      throw ValidationError("individual '" + id + "' is both a contributor and typed");
    cols.push_back(id);
    gts.emplace_back(freqs.index_of(marker, g.first), freqs.index_of(marker, g.second));
  }
  for (const auto& id : cols)
    if (!dist.column_of(id)) throw ValidationError("individual '" + id + "' is not in the IBD pattern distribution");
  if (cols.empty()) throw ValidationError("conditioning needs at least one contributor or typed individual");
  auto sub = cols == dist.ids() ? dist : marginalize(dist, cols);
  auto table = detail::condition_indices(sub, contributors.size(), gts, freqs.marker(marker).freqs, opts);
  table.marker = marker;
  if (table.raw_total <= 0.0)
    throw ImpossibleEvidence(marker, "typed genotypes have probability zero at marker " + marker);
  return table;
}

/// Genotypes of every individual of `dist` at every marker, drawn by picking
/// a pattern, then one allele per distinct label.
inline std::map<std::string, GenotypeProfile> simulate_profiles(const IBDPatternDistribution& dist,
                                                                const AlleleFrequencyTable& freqs,
                                                                std::mt19937_64& rng) {
  std::map<std::string, GenotypeProfile> out;
  std::vector<double> pattern_weights;
  for (const auto& e : dist.entries()) pattern_weights.push_back(e.probability);
  for (const auto& marker : freqs.markers()) {
    const auto& mf = freqs.marker(marker);
    const auto& pat = dist.entries()[detail::sample_index(rng, pattern_weights, 1.0)].pattern;
    std::vector<int> allele_of(static_cast<std::size_t>(pat.distinct_labels()) + 1, -1);
    for (int l = 1; l <= pat.distinct_labels(); ++l)
      allele_of[l] = static_cast<int>(detail::sample_index(rng, mf.freqs, 1.0));
    for (std::size_t i = 0; i < dist.ids().size(); ++i) {
      auto [l1, l2] = pat.genes(i);
      out[dist.ids()[i]].set(marker, Genotype::of(mf.alleles[allele_of[l1]], mf.alleles[allele_of[l2]]));
    }
  }
  return out;
}

inline std::map<std::string, GenotypeProfile> simulate_profiles(const IBDPatternDistribution& dist,
                                                                const AlleleFrequencyTable& freqs,
                                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return simulate_profiles(dist, freqs, rng);
}

/// One draw of the contributors' genotypes from a conditioned table.
inline std::vector<Genotype> simulate_conditioned(const ConditionedPatternTable& table,
                                                  const AlleleFrequencyTable& freqs, std::mt19937_64& rng) {
  if (table.impossible())
    throw ImpossibleEvidence(table.marker, "cannot simulate from an impossible conditioned table");
  const auto& mf = freqs.marker(table.marker);
  std::vector<double> w;
  for (const auto& r : table.rows) w.push_back(r.weight);
  const auto& row = table.rows[detail::sample_index(rng, w, 1.0)];
  std::vector<int> draws(static_cast<std::size_t>(row.ndraws));
  for (int& d : draws) d = static_cast<int>(detail::sample_index(rng, mf.freqs, 1.0));
  std::vector<Genotype> out;
  for (const auto& g : row.genes) {
    auto allele = [&](const GeneSource& s) { return mf.alleles[s.draw ? draws[s.value] : s.value]; };
    out.push_back(Genotype::of(allele(g[0]), allele(g[1])));
  }
  return out;
}

inline std::vector<Genotype> simulate_conditioned(const ConditionedPatternTable& table,
                                                  const AlleleFrequencyTable& freqs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return simulate_conditioned(table, freqs, rng);
}

} // namespace pedmix
