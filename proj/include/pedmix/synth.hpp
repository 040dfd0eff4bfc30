#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "pedmix/alleles.hpp"
#include "pedmix/error.hpp"
#include "pedmix/peak_model.hpp"

namespace pedmix {

/// splitmix64 step; used to derive independent per-replicate seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(seed);
  for (auto p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ull));
  return s;
}

/// Generated STR-like frequency database: `markers` markers named SM01...,
/// each with 8-10 consecutive repeat alleles (occasionally a .2 or .3
/// micro-variant) and Dirichlet(2) frequencies.
inline AlleleFrequencyTable synthetic_frequencies(int markers, std::uint64_t seed = 2024) {
  if (markers < 1 || markers > 99) throw ValidationError("marker count must lie in 1..99");
  std::mt19937_64 rng(seed);
  std::vector<std::tuple<std::string, Allele, double>> entries;
  for (int m = 1; m <= markers; ++m) {
    std::string name = (m < 10 ? "SM0" : "SM") + std::to_string(m);
    const int n = 8 + static_cast<int>(rng() % 3);
    const int first = 6 + static_cast<int>(rng() % 10);
    std::vector<double> w;
    std::vector<Allele> alleles;
    for (int i = 0; i < n; ++i) alleles.push_back(Allele{(first + i) * 10});
    if (rng() % 3 == 0) alleles.push_back(Allele{(first + 2 + static_cast<int>(rng() % 4)) * 10 + 2 + static_cast<int>(rng() % 2)});
    std::gamma_distribution<double> g(2.0, 1.0);
    double total = 0.0;
    for (std::size_t i = 0; i < alleles.size(); ++i) {
      w.push_back(std::max(g(rng), 0.05));
      total += w.back();
    }
    for (std::size_t i = 0; i < alleles.size(); ++i) entries.emplace_back(name, alleles[i], w[i] / total);
  }
  return AlleleFrequencyTable::from_entries(entries);
}

/// EPG synthesiser settings. Mixture proportions follow the cell counts and
/// rho grows with the total amount of DNA: rho = rho_per_cell * total cells.
struct SynthParams {
  double rho_per_cell = 0.25;
  double eta = 40.0;
  double xi = 0.05;
  double threshold = 50.0;

  MixtureParams mixture(const std::vector<double>& cells) const {
    double total = 0.0;
    for (double c : cells) {
      if (!(c >= 0.0)) throw ValidationError("cell counts must be non-negative");
      total += c;
    }
    if (!(total > 0.0)) throw ValidationError("at least one cell is required");
    MixtureParams p;
    p.rho = rho_per_cell * total;
    p.eta = eta;
    p.xi = xi;
    for (double c : cells) p.phi.push_back(c / total);
    return p;
  }
};

/// Draw peak heights from the gamma model for the given genotypes and keep
/// those above the threshold.
inline EPGData synthesize_epg(const std::vector<GenotypeProfile>& profiles, const std::vector<double>& cells,
                              const std::vector<std::string>& markers, const SynthParams& sp, std::uint64_t seed) {
  if (profiles.size() != cells.size()) throw ValidationError("one cell count per profile is required");
  const MixtureParams p = sp.mixture(cells);
  std::mt19937_64 rng(seed);
  EPGData epg(sp.threshold);
  for (const auto& m : markers) {
    std::map<Allele, double> dose;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      const auto& g = profiles[i].at(m);
      for (Allele a : {g.first, g.second}) {
        dose[a] += (1.0 - p.xi) * p.phi[i];
        if (a.tenths >= 10) dose[a.minus_one_repeat()] += p.xi * p.phi[i];
      }
    }
    for (const auto& [a, d] : dose) {
      if (!(d > 0.0)) continue;
      const double z = std::gamma_distribution<double>(p.rho * d, p.eta)(rng);
      if (z > sp.threshold) epg.add_peak(m, a, z);
    }
  }
  return epg;
}

} // namespace pedmix
