#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "pedmix/alleles.hpp"
#include "pedmix/coancestry.hpp"
#include "pedmix/error.hpp"
#include "pedmix/genotype.hpp"
#include "pedmix/hypothesis.hpp"
#include "pedmix/parallel.hpp"
#include "pedmix/peak_model.hpp"

namespace pedmix {

struct EngineOptions {
  int threads = 1;
  CoancestryParams coancestry;
  /// Markers to analyse; empty means every marker of the frequency table.
  std::vector<std::string> markers;
  /// Limit on DP states per allele step (4^draws).
  std::size_t max_states = std::size_t{1} << 20;
  /// Limit on genotype combinations for the brute-force sum.
  std::size_t brute_force_cap = 1'000'000;
};

struct MarkerLikelihood {
  std::string marker;
  /// log p(z_marker | typed genotypes)
  double loglik = 0.0;
  /// log P(typed genotypes) at this marker
  double log_typed_probability = 0.0;
  std::string diagnostic;
};

struct LikelihoodResult {
  double loglik = 0.0;
  double log_typed_probability = 0.0;
  std::vector<MarkerLikelihood> markers;
  std::optional<std::string> impossible_marker;
  std::string diagnostic;

  bool impossible() const { return loglik == kNegInf; }
};

namespace detail {

/// A contributor slot after typed related contributors have been turned into
/// known ones.
struct ResolvedSlot {
  ContributorSlot::Kind kind;
  std::string id;
  const GenotypeProfile* profile = nullptr;
  std::string tag; // tie-breaker for the canonical slot order
};

inline std::vector<ResolvedSlot> resolve_slots(const Hypothesis& h) {
  std::vector<ResolvedSlot> out;
  for (const auto& s : h.contributors) {
    ResolvedSlot r{s.kind, s.id, nullptr, ""};
    auto typed = h.typed.find(s.id);
    if (s.kind == ContributorSlot::Kind::Related && typed != h.typed.end()) {
      r.kind = ContributorSlot::Kind::Known;
      r.profile = &typed->second;
    } else if (s.kind == ContributorSlot::Kind::Known) {
      r.profile = typed != h.typed.end() ? &typed->second : &s.profile;
    }
    if (r.kind == ContributorSlot::Kind::Known) r.tag = r.profile->to_csv();
    if (r.kind == ContributorSlot::Kind::Related) r.tag = r.id;
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<std::string> analysed_markers(const AlleleFrequencyTable& freqs, const std::vector<EPGData>& epgs,
                                                 const EngineOptions& opts) {
  std::vector<std::string> markers = opts.markers.empty() ? freqs.markers() : opts.markers;
  std::sort(markers.begin(), markers.end());
  markers.erase(std::unique(markers.begin(), markers.end()), markers.end());
  for (const auto& m : markers)
    if (!freqs.has_marker(m)) throw ValidationError("marker '" + m + "' is not in the frequency table");
  if (opts.markers.empty())
    for (const auto& e : epgs)
      for (const auto& m : e.markers())
        if (!freqs.has_marker(m)) throw ValidationError("EPG marker '" + m + "' is not in the frequency table");
  if (markers.empty()) throw ValidationError("no markers to analyse");
  return markers;
}

struct SweepRow {
  double log_weight = 0.0;
  int ndraws = 0;
  std::vector<int> class_of;                    // draw mask -> class
  std::vector<std::uint8_t> popcount;           // draw mask -> number of draws
  std::vector<std::vector<int>> class_counts;   // [class][slot]
  std::vector<std::vector<int>> fixed;          // [slot][grid]
  std::vector<std::vector<double>> draw_factor; // [sweep step][draws taking the allele]
};

struct SweepMarker {
  std::string marker;
  MarkerGrid grid;
  std::vector<int> order;  // sweep order of grid alleles
  std::vector<char> carry; // order[k+1] is one repeat above order[k]
  std::vector<std::vector<double>> height, log_height; // [epg][grid]
  std::vector<SweepRow> rows;
  double log_typed_probability = 0.0;
  std::string impossible;
};

struct CompiledModel {
  std::vector<int> slots; // original slot index per compiled slot
  std::vector<SweepMarker> markers;
};

/// Small open-addressing map from a dose to a cached value.
class DoseCache {
public:
  DoseCache() : keys_(64, kEmpty), values_(64) {}

  template <class Fn>
  double get(double dose, Fn&& compute) {
    std::uint64_t key;
    std::memcpy(&key, &dose, sizeof key);
    std::size_t mask = keys_.size() - 1;
    std::size_t i = static_cast<std::size_t>((key * 0x9e3779b97f4a7c15ull) >> 20) & mask;
    while (keys_[i] != kEmpty) {
      if (keys_[i] == key) return values_[i];
      i = (i + 1) & mask;
    }
    const double v = compute();
    keys_[i] = key;
    values_[i] = v;
    if (2 * ++size_ > keys_.size()) grow();
    return v;
  }

private:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

  void grow() {
    std::vector<std::uint64_t> keys(keys_.size() * 2, kEmpty);
    std::vector<double> values(keys.size());
    const std::size_t mask = keys.size() - 1;
    for (std::size_t j = 0; j < keys_.size(); ++j) {
      if (keys_[j] == kEmpty) continue;
      std::size_t i = static_cast<std::size_t>((keys_[j] * 0x9e3779b97f4a7c15ull) >> 20) & mask;
      while (keys[i] != kEmpty) i = (i + 1) & mask;
      keys[i] = keys_[j];
      values[i] = values_[j];
    }
    keys_.swap(keys);
    values_.swap(values);
  }

  std::vector<std::uint64_t> keys_;
  std::vector<double> values_;
  std::size_t size_ = 0;
};

/// Per-evaluation peak factors for one EPG; censored factors are memoised
/// by dose.
class PeakFactors {
public:
  PeakFactors(const MixtureParams& p, double threshold)
      : rho_(p.rho), eta_(p.eta), log_eta_(std::log(p.eta)), threshold_(threshold) {}

  double operator()(double z, double log_z, double dose) {
    if (dose <= 0.0) return z > 0.0 ? kNegInf : 0.0;
    const double shape = rho_ * dose;
    if (z > 0.0) return (shape - 1.0) * log_z - z / eta_ - std::lgamma(shape) - shape * log_eta_;
    return censored_.get(dose, [&] { return log_gamma_cdf(threshold_, shape, eta_); });
  }

private:
  double rho_, eta_, log_eta_, threshold_;
  DoseCache censored_;
};

struct EpgEval {
  double xi;
  std::vector<double> phi; // compiled slot order
  PeakFactors factor;
};

inline SweepMarker compile_marker(const std::string& marker, const Hypothesis& h,
                                  const std::vector<ResolvedSlot>& all_slots, const std::vector<int>& slots,
                                  const std::optional<IBDPatternDistribution>& related_dist,
                                  const AlleleFrequencyTable& freqs, const std::vector<EPGData>& epgs,
                                  const EngineOptions& opts) {
  using Kind = ContributorSlot::Kind;
  const auto& mf = freqs.marker(marker);
  SweepMarker out;
  out.marker = marker;

  std::set<Allele> observed, fixed;
  for (const auto& e : epgs)
    for (const auto& [a, z] : e.peaks(marker)) observed.insert(a);
  for (int s : slots)
    if (all_slots[s].kind == Kind::Known) {
      const auto& g = all_slots[s].profile->at(marker);
      fixed.insert(g.first);
      fixed.insert(g.second);
    }
  std::map<std::string, Genotype> typed_here;
  for (const auto& [id, p] : h.typed)
    if (p.has(marker)) {
      typed_here[id] = p.at(marker);
      fixed.insert(p.at(marker).first);
      fixed.insert(p.at(marker).second);
    }
  out.grid = MarkerGrid::build(marker, mf, observed, fixed);
  const auto& grid = out.grid;
  const std::size_t G = grid.size();

  for (const auto& e : epgs) {
    out.height.push_back(heights_on_grid(grid, e));
    std::vector<double> lh;
    for (double z : out.height.back()) lh.push_back(z > 0.0 ? std::log(z) : 0.0);
    out.log_height.push_back(std::move(lh));
  }

  for (std::size_t i = 0; i < G; ++i) out.order.push_back(static_cast<int>(i));
  std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    return std::pair(grid.alleles[a].fraction(), grid.alleles[a].tenths) <
           std::pair(grid.alleles[b].fraction(), grid.alleles[b].tenths);
  });
  for (std::size_t k = 0; k < G; ++k)
    out.carry.push_back(k + 1 < G && grid.alleles[out.order[k + 1]] == grid.alleles[out.order[k]].plus_one_repeat());

  // Contributor genes from the relationship, conditioned on typed relatives.
  const std::size_t ns = slots.size();
  std::vector<std::string> related_ids;
  std::vector<std::size_t> related_pos;
  for (std::size_t i = 0; i < ns; ++i)
    if (all_slots[slots[i]].kind == Kind::Related) {
      related_ids.push_back(all_slots[slots[i]].id);
      related_pos.push_back(i);
    }
  std::map<std::string, Genotype> conditioning;
  if (related_dist)
    for (const auto& [id, g] : typed_here)
      if (related_dist->column_of(id)) conditioning[id] = g;

  ConditionedPatternTable table;
  if (related_dist && (!related_ids.empty() || !conditioning.empty())) {
    try {
      table = condition_on_typed(*related_dist, freqs, marker, related_ids, conditioning);
    } catch (const ImpossibleEvidence&) {
      out.impossible = "typed genotypes have probability zero at marker " + marker;
      out.log_typed_probability = kNegInf;
      return out;
    }
    out.log_typed_probability = std::log(table.typed_probability);
  } else {
    ConditionedRow r;
    r.weight = 1.0;
    table.rows.push_back(r);
  }

  // Urn seeds: every typed allele plus known contributors who are not typed.
  std::vector<double> seeds(G, 0.0);
  double seed_total = 0.0;
  const bool urn = !opts.coancestry.independent();
  if (urn) {
    auto add = [&](const Genotype& g) {
      seeds[grid.index_of(g.first)] += 1.0;
      seeds[grid.index_of(g.second)] += 1.0;
      seed_total += 2.0;
    };
    for (const auto& [id, g] : typed_here) add(g);
    for (int s : slots)
      if (all_slots[s].kind == Kind::Known && !h.typed.contains(all_slots[s].id))
        add(all_slots[s].profile->at(marker));
  }
  const double alpha_total = urn ? opts.coancestry.alpha_total() : 0.0;

  for (const auto& trow : table.rows) {
    if (!(trow.weight > 0.0)) continue;
    SweepRow row;
    row.log_weight = std::log(trow.weight);
    row.fixed.assign(ns, std::vector<int>(G, 0));
    std::vector<std::vector<int>> mult(static_cast<std::size_t>(trow.ndraws), std::vector<int>(ns, 0));
    for (std::size_t r = 0; r < related_pos.size(); ++r)
      for (const auto& src : trow.genes[r]) {
        if (src.draw)
          ++mult[src.value][related_pos[r]];
        else
          ++row.fixed[related_pos[r]][grid.index_of(mf.alleles[src.value])];
      }
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& slot = all_slots[slots[i]];
      if (slot.kind == Kind::Unrelated) {
        for (int g = 0; g < 2; ++g) {
          mult.emplace_back(ns, 0);
          mult.back()[i] = 1;
        }
      } else if (slot.kind == Kind::Known) {
        const auto& g = slot.profile->at(marker);
        ++row.fixed[i][grid.index_of(g.first)];
        ++row.fixed[i][grid.index_of(g.second)];
      }
    }
    row.ndraws = static_cast<int>(mult.size());
    const std::size_t nstates = std::size_t{1} << (2 * row.ndraws);
    if (row.ndraws > 15 || nstates > opts.max_states)
      throw CapExceeded("marker " + marker + " needs " + std::to_string(row.ndraws) +
                        " gene-pool draws, beyond the state limit; use fewer untyped contributors");
    std::map<std::vector<int>, int> classes;
    const std::size_t masks = std::size_t{1} << row.ndraws;
    for (std::size_t mask = 0; mask < masks; ++mask) {
      std::vector<int> c(ns, 0);
      for (int j = 0; j < row.ndraws; ++j)
        if ((mask >> j) & 1u)
          for (std::size_t i = 0; i < ns; ++i) c[i] += mult[j][i];
      auto [it, fresh] = classes.try_emplace(c, static_cast<int>(row.class_counts.size()));
      if (fresh) row.class_counts.push_back(c);
      row.class_of.push_back(it->second);
      row.popcount.push_back(static_cast<std::uint8_t>(std::popcount(mask)));
    }
    for (std::size_t k = 0; k < G; ++k) {
      const int a = out.order[k];
      std::vector<double> f(static_cast<std::size_t>(row.ndraws) + 1, 0.0);
      f[0] = 1.0;
      for (int s = 1; s <= row.ndraws; ++s)
        f[s] = urn ? rising_factorial(alpha_total * grid.freq[a] + seeds[a], s) : std::pow(grid.freq[a], s);
      row.draw_factor.push_back(std::move(f));
    }
    if (urn) row.log_weight -= std::log(rising_factorial(alpha_total + seed_total, row.ndraws));
    out.rows.push_back(std::move(row));
  }
  return out;
}

struct SweepScratch {
  std::vector<double> S, F, own, E, cur, next, own_memo, pair_memo;
};

/// log of weight(row) * sum over draw assignments of prior x prod of peak factors.
inline double sweep_row(const SweepMarker& mk, const SweepRow& row, std::vector<EpgEval>& ev, SweepScratch& sc) {
  const int nd = row.ndraws;
  const std::size_t N = std::size_t{1} << nd;
  const unsigned full = static_cast<unsigned>(N - 1);
  const std::size_t nc = row.class_counts.size();
  const std::size_t ne = ev.size();
  const std::size_t G = mk.grid.size();
  const std::size_t ns = row.fixed.size();

  sc.S.assign(ne * nc, 0.0);
  sc.F.assign(ne * G, 0.0);
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t c = 0; c < nc; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < ns; ++i) s += ev[e].phi[i] * row.class_counts[c][i];
      sc.S[e * nc + c] = s;
    }
    for (std::size_t a = 0; a < G; ++a) {
      double f = 0.0;
      for (std::size_t i = 0; i < ns; ++i) f += ev[e].phi[i] * row.fixed[i][a];
      sc.F[e * G + a] = f;
    }
  }

  sc.own_memo.assign(ne * nc, std::numeric_limits<double>::quiet_NaN());
  sc.pair_memo.assign(ne * nc * nc, std::numeric_limits<double>::quiet_NaN());
  sc.cur.assign(N * N, 0.0);
  sc.cur[0] = 1.0;
  double log_scale = row.log_weight;
  for (std::size_t k = 0; k < G; ++k) {
    const int c = mk.order[k];
    const bool carry_in = k > 0 && mk.carry[k - 1];
    const bool carry_out = mk.carry[k];
    const bool last = k + 1 == G;
    const int p = carry_in ? mk.order[k - 1] : -1;
    const std::size_t ncp = carry_in ? nc : 1;

    // Emission table over (class of draws at the previous allele, class of
    // draws at this allele). Factors for unobserved alleles without fixed
    // genes depend only on the classes, so they are shared across steps.
    sc.own.assign(nc, 0.0);
    if (!carry_out)
      for (std::size_t e = 0; e < ne; ++e) {
        const bool shared = mk.height[e][c] == 0.0 && sc.F[e * G + c] == 0.0;
        for (std::size_t cb = 0; cb < nc; ++cb) {
          double& memo = sc.own_memo[e * nc + cb];
          if (shared && !std::isnan(memo)) {
            sc.own[cb] += memo;
            continue;
          }
          const double d = (1.0 - ev[e].xi) * (sc.S[e * nc + cb] + sc.F[e * G + c]);
          const double f = ev[e].factor(mk.height[e][c], mk.log_height[e][c], d);
          if (shared) memo = f;
          sc.own[cb] += f;
        }
      }
    sc.E.assign(ncp * nc, 0.0);
    for (std::size_t cp = 0; cp < ncp; ++cp)
      std::copy(sc.own.begin(), sc.own.end(), sc.E.begin() + static_cast<std::ptrdiff_t>(cp * nc));
    if (carry_in)
      for (std::size_t e = 0; e < ne; ++e) {
        const bool shared = mk.height[e][p] == 0.0 && sc.F[e * G + p] == 0.0 && sc.F[e * G + c] == 0.0;
        for (std::size_t cp = 0; cp < ncp; ++cp)
          for (std::size_t cb = 0; cb < nc; ++cb) {
            double& v = sc.E[cp * nc + cb];
            if (v == kNegInf) continue;
            double& memo = sc.pair_memo[(e * nc + cp) * nc + cb];
            if (shared && !std::isnan(memo)) {
              v += memo;
              continue;
            }
            const double d = (1.0 - ev[e].xi) * (sc.S[e * nc + cp] + sc.F[e * G + p]) +
                             ev[e].xi * (sc.S[e * nc + cb] + sc.F[e * G + c]);
            const double f = ev[e].factor(mk.height[e][p], mk.log_height[e][p], d);
            if (shared) memo = f;
            v += f;
          }
      }
    double emax = kNegInf;
    for (double v : sc.E) {
      if (std::isnan(v)) throw NumericalError("peak factor is NaN at marker " + mk.marker);
      emax = std::max(emax, v);
    }
    if (emax == kNegInf) return kNegInf;
    for (double& v : sc.E) v = std::exp(v - emax);

    const auto& fac = row.draw_factor[k];
    sc.next.assign(N * N, 0.0);
    for (unsigned A = 0; A <= full; ++A) {
      const unsigned rem = full & ~A;
      for (unsigned P = carry_in ? A : 0;; P = (P - 1) & A) {
        const double v = sc.cur[A * N + P];
        if (v != 0.0) {
          const double* erow = &sc.E[(carry_in ? static_cast<std::size_t>(row.class_of[P]) : 0) * nc];
          for (unsigned B = rem;; B = (B - 1) & rem) {
            const double f = fac[row.popcount[B]];
            const double em = erow[row.class_of[B]];
            if (f != 0.0 && em != 0.0) sc.next[(A | B) * N + (carry_out ? B : 0)] += v * f * em;
            if (B == 0 || last) break;
          }
        }
        if (P == 0 || !carry_in) break;
      }
    }
    const double m = *std::max_element(sc.next.begin(), sc.next.end());
    if (!(m > 0.0)) return kNegInf;
    for (double& v : sc.next) v /= m;
    log_scale += std::log(m) + emax;
    std::swap(sc.cur, sc.next);
  }
  const double v = sc.cur[static_cast<std::size_t>(full) * N];
  return v > 0.0 ? log_scale + std::log(v) : kNegInf;
}

inline double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  NeumaierSum s;
  for (double x : v) s.add(std::exp(x - m));
  return m + std::log(s.value());
}

inline double sweep_marker(const SweepMarker& mk, std::vector<EpgEval>& ev) {
  if (!mk.impossible.empty()) return kNegInf;
  thread_local SweepScratch sc;
  std::vector<double> rows;
  rows.reserve(mk.rows.size());
  for (const auto& row : mk.rows) rows.push_back(sweep_row(mk, row, ev, sc));
  return log_sum_exp(rows);
}

inline void finish_result(LikelihoodResult& res) {
  NeumaierSum total, typed;
  for (const auto& m : res.markers) {
    total.add(m.loglik);
    typed.add(m.log_typed_probability);
    if (m.loglik == kNegInf && !res.impossible_marker) {
      res.impossible_marker = m.marker;
      res.diagnostic = m.diagnostic;
    }
  }
  res.loglik = res.impossible_marker ? kNegInf : total.value();
  res.log_typed_probability = typed.value();
}

inline void check_params(const std::vector<MixtureParams>& params, std::size_t nepg, std::size_t nslots) {
  if (params.size() != nepg) throw ValidationError("one parameter set per EPG is required");
  for (const auto& p : params) {
    p.validate();
    if (p.phi.size() != nslots)
      throw ValidationError("phi has " + std::to_string(p.phi.size()) + " entries but the hypothesis has " +
                            std::to_string(nslots) + " contributors");
  }
}

} // namespace detail

/// Exact likelihood of one or more EPGs under a hypothesis, for any number
/// of parameter settings. Models are compiled once per slot arrangement and
/// reused across evaluations.
class LikelihoodEngine {
public:
  LikelihoodEngine(Hypothesis h, AlleleFrequencyTable freqs, std::vector<EPGData> epgs, EngineOptions opts = {})
      : h_(std::move(h)), freqs_(std::move(freqs)), epgs_(std::move(epgs)), opts_(std::move(opts)) {
    h_.validate();
    opts_.coancestry.validate();
    if (epgs_.empty()) throw ValidationError("at least one EPG is required");
    if (!opts_.coancestry.independent() && h_.has_relationship_structure())
      throw Unsupported("coancestry (theta > 0) together with close relationships among contributors or typed "
                        "relatives is not supported");
    markers_ = detail::analysed_markers(freqs_, epgs_, opts_);
    slots_ = detail::resolve_slots(h_);
    for (const auto& s : slots_)
      if (s.kind == ContributorSlot::Kind::Known)
        for (const auto& m : markers_) (void)s.profile->at(m);
    if (h_.relationship) {
      std::vector<std::string> cols;
      for (const auto& s : slots_)
        if (s.kind == ContributorSlot::Kind::Related) cols.push_back(s.id);
      for (const auto& [id, p] : h_.typed)
        if (h_.relationship->column_of(id)) cols.push_back(id);
      if (!cols.empty()) related_dist_ = cols == h_.relationship->ids() ? *h_.relationship : marginalize(*h_.relationship, cols);
    }
  }

  const Hypothesis& hypothesis() const noexcept { return h_; }
  const AlleleFrequencyTable& freqs() const noexcept { return freqs_; }
  const std::vector<EPGData>& epgs() const noexcept { return epgs_; }
  const std::vector<std::string>& markers() const noexcept { return markers_; }
  const EngineOptions& options() const noexcept { return opts_; }
  std::size_t slots() const noexcept { return slots_.size(); }

  LikelihoodResult evaluate(const std::vector<MixtureParams>& params) const {
    detail::check_params(params, epgs_.size(), slots_.size());
    auto order = canonical_order(params);
    auto model = model_for(order);
    LikelihoodResult res;
    res.markers.resize(model->markers.size());
    parallel_for(model->markers.size(), opts_.threads, [&](std::size_t m) {
      const auto& mk = model->markers[m];
      std::vector<detail::EpgEval> ev;
      for (std::size_t e = 0; e < epgs_.size(); ++e) {
        std::vector<double> phi;
        for (int s : order) phi.push_back(params[e].phi[s]);
        ev.push_back({params[e].xi, std::move(phi), detail::PeakFactors(params[e], epgs_[e].threshold())});
      }
      auto& out = res.markers[m];
      out.marker = mk.marker;
      out.log_typed_probability = mk.log_typed_probability;
      out.loglik = detail::sweep_marker(mk, ev);
      if (out.loglik == kNegInf)
        out.diagnostic = !mk.impossible.empty() ? mk.impossible
                                                : "no contributor genotypes can explain the peaks at marker " + mk.marker;
    });
    detail::finish_result(res);
    return res;
  }

  LikelihoodResult evaluate(const MixtureParams& params) const {
    return evaluate(std::vector<MixtureParams>{params});
  }

  double loglik(const std::vector<MixtureParams>& params) const { return evaluate(params).loglik; }

private:
  /// Slots with positive phi in some EPG, ordered by (kind, phi, tag) so
  /// that exchangeable arrangements compile to the same model.
  std::vector<int> canonical_order(const std::vector<MixtureParams>& params) const {
    std::vector<int> order;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      bool active = false;
      for (const auto& p : params) active = active || p.phi[i] > 0.0;
      if (active) order.push_back(static_cast<int>(i));
    }
    auto key = [&](int i) {
      std::vector<double> phi;
      for (const auto& p : params) phi.push_back(p.phi[i]);
      return std::tuple(static_cast<int>(slots_[i].kind), phi, slots_[i].tag);
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
    return order;
  }

  std::shared_ptr<const detail::CompiledModel> model_for(const std::vector<int>& order) const {
    {
      std::lock_guard lock(mutex_);
      auto it = cache_.find(order);
      if (it != cache_.end()) return it->second;
    }
    auto model = std::make_shared<detail::CompiledModel>();
    model->slots = order;
    model->markers.resize(markers_.size());
    parallel_for(markers_.size(), opts_.threads, [&](std::size_t m) {
      model->markers[m] =
          detail::compile_marker(markers_[m], h_, slots_, order, related_dist_, freqs_, epgs_, opts_);
    });
    std::lock_guard lock(mutex_);
    return cache_.try_emplace(order, std::move(model)).first->second;
  }

  Hypothesis h_;
  AlleleFrequencyTable freqs_;
  std::vector<EPGData> epgs_;
  EngineOptions opts_;
  std::vector<std::string> markers_;
  std::vector<detail::ResolvedSlot> slots_;
  std::optional<IBDPatternDistribution> related_dist_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<int>, std::shared_ptr<const detail::CompiledModel>> cache_;
};

inline LikelihoodResult likelihood(const std::vector<EPGData>& epgs, const Hypothesis& h,
                                   const AlleleFrequencyTable& freqs, const std::vector<MixtureParams>& params,
                                   const EngineOptions& opts = {}) {
  return LikelihoodEngine(h, freqs, epgs, opts).evaluate(params);
}

inline LikelihoodResult likelihood(const EPGData& epg, const Hypothesis& h, const AlleleFrequencyTable& freqs,
                                   const MixtureParams& params, const EngineOptions& opts = {}) {
  return likelihood(std::vector<EPGData>{epg}, h, freqs, std::vector<MixtureParams>{params}, opts);
}

/// Same as `likelihood` with theta taken from `coancestry`.
inline LikelihoodResult likelihood_with_coancestry(const EPGData& epg, const Hypothesis& h,
                                                   const AlleleFrequencyTable& freqs, const MixtureParams& params,
                                                   CoancestryParams coancestry, EngineOptions opts = {}) {
  opts.coancestry = coancestry;
  return likelihood(epg, h, freqs, params, opts);
}

/// Literal sum over every genotype combination of the untyped contributors.
/// Meant for small cases and as a check on the sweep.
inline LikelihoodResult brute_force_likelihood(const std::vector<EPGData>& epgs, const Hypothesis& h,
                                               const AlleleFrequencyTable& freqs,
                                               const std::vector<MixtureParams>& params,
                                               const EngineOptions& opts = {}) {
  using Kind = ContributorSlot::Kind;
  h.validate();
  opts.coancestry.validate();
  if (!opts.coancestry.independent() && h.has_relationship_structure())
    throw Unsupported("coancestry (theta > 0) together with close relationships is not supported");
  const auto markers = detail::analysed_markers(freqs, epgs, opts);
  const auto slots = detail::resolve_slots(h);
  detail::check_params(params, epgs.size(), slots.size());
  const bool urn = !opts.coancestry.independent();

  LikelihoodResult res;
  for (const auto& marker : markers) {
    const auto& mf = freqs.marker(marker);
    MarkerLikelihood out;
    out.marker = marker;
    std::set<Allele> observed, fixed;
    for (const auto& e : epgs)
      for (const auto& [a, z] : e.peaks(marker)) observed.insert(a);
    std::map<std::string, Genotype> typed;
    for (const auto& [id, p] : h.typed)
      if (p.has(marker)) typed[id] = p.at(marker);
    for (const auto& s : slots)
      if (s.kind == Kind::Known) {
        fixed.insert(s.profile->at(marker).first);
        fixed.insert(s.profile->at(marker).second);
      }
    for (const auto& [id, g] : typed) {
      fixed.insert(g.first);
      fixed.insert(g.second);
    }
    const auto grid = MarkerGrid::build(marker, mf, observed, fixed);
    std::vector<std::vector<double>> heights;
    for (const auto& e : epgs) heights.push_back(heights_on_grid(grid, e));

    std::vector<std::size_t> untyped;
    for (std::size_t i = 0; i < slots.size(); ++i)
      if (slots[i].kind != Kind::Known) untyped.push_back(i);
    std::vector<Genotype> genotypes;
    for (std::size_t a = 0; a < mf.size(); ++a)
      for (std::size_t b = a; b < mf.size(); ++b) genotypes.push_back(Genotype::of(mf.alleles[a], mf.alleles[b]));
    double combos = std::pow(static_cast<double>(genotypes.size()), static_cast<double>(untyped.size()));
    if (combos > static_cast<double>(opts.brute_force_cap))
      throw CapExceeded("brute-force sum at marker " + marker + " needs " + std::to_string(combos) +
                        " terms, above the cap");

    // Typed relatives in the relationship, and the probability of their genotypes.
    std::map<std::string, Genotype> typed_rel;
    if (h.relationship)
      for (const auto& [id, g] : typed)
        if (h.relationship->column_of(id)) typed_rel[id] = g;
    double p_typed = 1.0;
    if (!urn && h.relationship && !typed_rel.empty()) p_typed = joint_genotype_probability(*h.relationship, freqs, marker, typed_rel);
    out.log_typed_probability = std::log(p_typed);
    if (!(p_typed > 0.0)) {
      out.loglik = kNegInf;
      out.diagnostic = "typed genotypes have probability zero at marker " + marker;
      res.markers.push_back(out);
      continue;
    }

    // Urn prior over grid alleles, seeded with typed and known-but-untyped alleles.
    std::vector<double> qgrid = grid.freq;
    SequentialGenotypePrior urn_prior(qgrid, opts.coancestry);
    std::vector<IndexGenotype> seeds;
    if (urn) {
      auto idx = [&](const Genotype& g) { return IndexGenotype{grid.index_of(g.first), grid.index_of(g.second)}; };
      for (const auto& [id, g] : typed) seeds.push_back(idx(g));
      for (const auto& s : slots)
        if (s.kind == Kind::Known && !h.typed.contains(s.id)) seeds.push_back(idx(s.profile->at(marker)));
    }

    std::vector<double> terms;
    std::vector<std::size_t> choice(untyped.size(), 0);
    while (true) {
      double prior = 1.0;
      if (urn) {
        std::vector<IndexGenotype> seq = seeds;
        for (std::size_t u = 0; u < untyped.size(); ++u) {
          const auto& g = genotypes[choice[u]];
          IndexGenotype ig{grid.index_of(g.first), grid.index_of(g.second)};
          prior *= urn_prior.conditional(ig, seq);
          seq.push_back(ig);
        }
      } else {
        std::map<std::string, Genotype> rel = typed_rel;
        for (std::size_t u = 0; u < untyped.size(); ++u) {
          const auto& g = genotypes[choice[u]];
          if (slots[untyped[u]].kind == Kind::Related && h.relationship) {
            rel[slots[untyped[u]].id] = g;
          } else {
            const double qa = mf.freqs[*mf.index_of(g.first)], qb = mf.freqs[*mf.index_of(g.second)];
            prior *= g.homozygous() ? qa * qa : 2.0 * qa * qb;
          }
        }
        if (rel.size() > typed_rel.size())
          prior *= joint_genotype_probability(*h.relationship, freqs, marker, rel) / p_typed;
      }
      if (prior > 0.0) {
        std::vector<std::vector<int>> counts(slots.size(), std::vector<int>(grid.size(), 0));
        std::size_t u = 0;
        for (std::size_t i = 0; i < slots.size(); ++i) {
          const Genotype g = slots[i].kind == Kind::Known ? slots[i].profile->at(marker) : genotypes[choice[u++]];
          ++counts[i][grid.index_of(g.first)];
          ++counts[i][grid.index_of(g.second)];
        }
        double ll = std::log(prior);
        for (std::size_t e = 0; e < epgs.size(); ++e)
          ll += marker_loglik(grid, heights[e], counts, params[e], epgs[e].threshold());
        terms.push_back(ll);
      }
      std::size_t pos = 0;
      while (pos < choice.size() && ++choice[pos] == genotypes.size()) choice[pos++] = 0;
      if (pos == choice.size()) break;
    }
    out.loglik = detail::log_sum_exp(terms);
    if (out.loglik == kNegInf) out.diagnostic = "no contributor genotypes can explain the peaks at marker " + marker;
    res.markers.push_back(out);
  }
  detail::finish_result(res);
  return res;
}

inline LikelihoodResult brute_force_likelihood(const EPGData& epg, const Hypothesis& h,
                                               const AlleleFrequencyTable& freqs, const MixtureParams& params,
                                               const EngineOptions& opts = {}) {
  return brute_force_likelihood(std::vector<EPGData>{epg}, h, freqs, std::vector<MixtureParams>{params}, opts);
}

} // namespace pedmix
