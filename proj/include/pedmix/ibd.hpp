#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pedmix/dyadic.hpp"
#include "pedmix/error.hpp"
#include "pedmix/pedigree.hpp"

namespace pedmix {

/// Gene labels of n individuals, entries (2i, 2i+1) belonging to individual i.
/// Equal labels mean identity by descent.
using LabelVector = std::vector<int>;

namespace detail {

struct LabelVectorHash {
  std::size_t operator()(const LabelVector& v) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (int x : v) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Relabel so that labels appear as 1, 2, 3, ... in order of first occurrence.
inline void relabel_first_occurrence(LabelVector& v) {
  std::unordered_map<int, int> map;
  map.reserve(v.size());
  int next = 1;
  for (int& x : v) {
    auto [it, inserted] = map.try_emplace(x, next);
    if (inserted) ++next;
    x = it->second;
  }
}

/// Cheap normal form used to coalesce intermediate states: sort each pair,
/// then relabel by first occurrence. Always yields an equivalent labelling
/// but is not unique per equivalence class.
inline void quick_normalize(LabelVector& v) {
  for (std::size_t i = 0; i + 1 < v.size(); i += 2)
    if (v[i] > v[i + 1]) std::swap(v[i], v[i + 1]);
  relabel_first_occurrence(v);
}

} // namespace detail

/// Canonical representative of an IBD state: invariant under transposing any
/// individual's pair of genes and under any one-to-one relabelling.
class IBDPattern {
public:
  IBDPattern() = default;

  const LabelVector& labels() const noexcept { return labels_; }
  std::size_t individuals() const noexcept { return labels_.size() / 2; }
  int distinct_labels() const {
    return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
  }
  std::pair<int, int> genes(std::size_t i) const { return {labels_.at(2 * i), labels_.at(2 * i + 1)}; }

  friend bool operator==(const IBDPattern&, const IBDPattern&) = default;
  friend auto operator<=>(const IBDPattern& a, const IBDPattern& b) { return a.labels_ <=> b.labels_; }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(labels_[i]);
    }
    return s + ")";
  }

private:
  friend IBDPattern canonicalize(std::span<const int> raw);
  explicit IBDPattern(LabelVector v) : labels_(std::move(v)) {}
  LabelVector labels_;
};

inline constexpr std::size_t kMaxCanonicalIndividuals = 20;

/// The lexicographically smallest first-occurrence relabelling over all
/// 2^n choices of within-pair order. A single sort-then-relabel pass is not
/// enough: (1,2,2,3,1,3) and (1,2,1,3,2,3) are equivalent, and both are
/// fixed points of that pass.
inline IBDPattern canonicalize(std::span<const int> raw) {
  if (raw.size() % 2 != 0) throw ValidationError("IBD label vector must have even length");
  for (int x : raw)
    if (x <= 0) throw ValidationError("IBD labels must be positive integers");
  const std::size_t n = raw.size() / 2;
  if (n > kMaxCanonicalIndividuals) throw CapExceeded("too many individuals to canonicalise an IBD pattern");
  LabelVector best;
  LabelVector work(raw.begin(), raw.end());
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      bool swap = (mask >> i) & 1u;
      work[2 * i] = raw[2 * i + (swap ? 1 : 0)];
      work[2 * i + 1] = raw[2 * i + (swap ? 0 : 1)];
    }
    detail::relabel_first_occurrence(work);
    if (best.empty() || work < best) best = work;
  }
  return IBDPattern(std::move(best));
}

inline IBDPattern canonicalize(std::initializer_list<int> raw) {
  return canonicalize(std::span<const int>(raw.begin(), raw.size()));
}

struct IbdEntry {
  IBDPattern pattern;
  double probability = 0.0;
  std::optional<Dyadic> exact;
};

/// Sparse distribution over canonical IBD patterns for an ordered list of
/// individuals. Entries are distinct, have positive probability, and are
/// sorted by decreasing probability then by pattern.
class IBDPatternDistribution {
public:
  IBDPatternDistribution() = default;

  /// Build from raw (not necessarily canonical) labellings; duplicates are
  /// merged. Probabilities must sum to one within 1e-9.
  static IBDPatternDistribution from_raw(std::vector<std::string> ids,
                                         const std::vector<std::pair<LabelVector, double>>& rows) {
    std::map<IBDPattern, double> acc;
    for (const auto& [labels, p] : rows) {
      if (labels.size() != 2 * ids.size())
        throw ValidationError("IBD pattern length does not match the number of individuals");
      if (!(p >= 0.0)) throw ValidationError("IBD pattern probabilities must be non-negative");
      acc[canonicalize(labels)] += p;
    }
    std::vector<IbdEntry> entries;
    for (auto& [pat, p] : acc)
      if (p > 0.0) entries.push_back(IbdEntry{pat, p, std::nullopt});
    return IBDPatternDistribution(std::move(ids), std::move(entries));
  }

  static IBDPatternDistribution from_exact(std::vector<std::string> ids, const std::map<IBDPattern, Dyadic>& acc) {
    std::vector<IbdEntry> entries;
    for (const auto& [pat, p] : acc)
      if (!p.is_zero()) entries.push_back(IbdEntry{pat, p.to_double(), p});
    return IBDPatternDistribution(std::move(ids), std::move(entries));
  }

  /// All individuals unrelated and non-inbred.
  static IBDPatternDistribution unrelated(std::vector<std::string> ids) {
    LabelVector v(2 * ids.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i) + 1;
    std::map<IBDPattern, Dyadic> acc{{canonicalize(v), Dyadic::one()}};
    return from_exact(std::move(ids), acc);
  }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<IbdEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool is_exact() const {
    return std::all_of(entries_.begin(), entries_.end(), [](const IbdEntry& e) { return e.exact.has_value(); });
  }

  std::optional<std::size_t> column_of(std::string_view id) const {
    for (std::size_t i = 0; i < ids_.size(); ++i)
      if (ids_[i] == id) return i;
    return std::nullopt;
  }

  /// True when the single pattern has all 2n labels distinct.
  bool is_trivial() const {
    return entries_.size() == 1 &&
           entries_[0].pattern.distinct_labels() == static_cast<int>(2 * ids_.size());
  }

  double probability_of(const IBDPattern& p) const {
    for (const auto& e : entries_)
      if (e.pattern == p) return e.probability;
    return 0.0;
  }

  /// `# ids: A,B,...` line, then `pr,label_1,...,label_2n`, one row per pattern.
  std::string to_csv() const {
    std::ostringstream out;
    out << "# ids: ";
    for (std::size_t i = 0; i < ids_.size(); ++i) out << (i ? "," : "") << ids_[i];
    out << "\npr";
    for (std::size_t k = 1; k <= 2 * ids_.size(); ++k) out << ",label_" << k;
    out << '\n';
    for (const auto& e : entries_) {
      out << format_probability(e.probability);
      for (int x : e.pattern.labels()) out << ',' << x;
      out << '\n';
    }
    return out.str();
  }

  /// Inverse of to_csv. When the `# ids:` line is absent, `ids` must be given.
  static IBDPatternDistribution from_csv(std::string_view text, std::vector<std::string> ids = {}) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::vector<std::pair<LabelVector, double>> rows;
    bool header_seen = false;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line.rfind("# ids:", 0) == 0) {
        ids.clear();
        std::istringstream f(line.substr(6));
        for (std::string tok; std::getline(f, tok, ',');) {
          tok.erase(0, tok.find_first_not_of(" \t"));
          tok.erase(tok.find_last_not_of(" \t") + 1);
          if (!tok.empty()) ids.push_back(tok);
        }
        continue;
      }
      if (line[0] == '#') continue;
      if (!header_seen && line.rfind("pr", 0) == 0) {
        header_seen = true;
        continue;
      }
      std::istringstream f(line);
      std::string tok;
      std::vector<std::string> cells;
      while (std::getline(f, tok, ',')) cells.push_back(tok);
      if (cells.size() < 3) throw ParseError("IBD CSV row has too few columns: " + line);
      double p = 0.0;
      try {
        p = std::stod(cells[0]);
      } catch (const std::exception&) {
        throw ParseError("IBD CSV: bad probability '" + cells[0] + "'");
      }
      LabelVector labels;
      for (std::size_t k = 1; k < cells.size(); ++k) {
        try {
          labels.push_back(std::stoi(cells[k]));
        } catch (const std::exception&) {
          throw ParseError("IBD CSV: bad label '" + cells[k] + "'");
        }
      }
      rows.emplace_back(std::move(labels), p);
    }
    if (rows.empty()) throw ParseError("IBD CSV contains no patterns");
    if (ids.empty()) {
      for (std::size_t i = 0; i < rows[0].first.size() / 2; ++i) ids.push_back("I" + std::to_string(i + 1));
    }
    return from_raw(std::move(ids), rows);
  }

  static std::string format_probability(double p) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, p);
    return std::string(buf, res.ptr);
  }

private:
  IBDPatternDistribution(std::vector<std::string> ids, std::vector<IbdEntry> entries)
      : ids_(std::move(ids)), entries_(std::move(entries)) {
    if (ids_.empty()) throw ValidationError("IBD pattern distribution needs at least one individual");
    double total = 0.0;
    for (const auto& e : entries_) total += e.probability;
    if (entries_.empty() || std::abs(total - 1.0) > 1e-9)
      throw ValidationError("IBD pattern probabilities must sum to one");
    std::sort(entries_.begin(), entries_.end(), [](const IbdEntry& a, const IbdEntry& b) {
      if (a.probability != b.probability) return a.probability > b.probability;
      return a.pattern < b.pattern;
    });
  }

  std::vector<std::string> ids_;
  std::vector<IbdEntry> entries_;
};

enum class IbdMode { Exact, Naive, MonteCarlo };

struct IbdOptions {
  IbdMode mode = IbdMode::Exact;
  std::size_t mc_samples = 1'000'000;
  std::uint64_t seed = 1;
  /// Meiosis cap for the naive 2^m enumeration.
  int naive_meiosis_cap = 24;
  /// Abort exact mode when the number of coalesced states exceeds this.
  std::size_t state_limit = 1'000'000;
};

namespace detail {

struct RestrictedPedigree {
  std::vector<std::size_t> members; // topological order
  std::vector<int> local;           // pedigree index -> position in members, -1 if absent
  std::vector<std::size_t> targets; // pedigree indices, may repeat
};

inline RestrictedPedigree restrict_to_targets(const Pedigree& ped, const std::vector<std::string>& target_ids) {
  if (target_ids.empty()) throw ValidationError("IBD computation needs a non-empty target list");
  RestrictedPedigree r;
  for (const auto& id : target_ids) r.targets.push_back(ped.at(id));
  r.members = ped.ancestral_closure(r.targets);
  r.local.assign(ped.size(), -1);
  for (std::size_t k = 0; k < r.members.size(); ++k) r.local[r.members[k]] = static_cast<int>(k);
  return r;
}

/// Greedy elimination order for the active-set sweep: prefer individuals
/// whose addition retires the most parents; add founders only when no
/// non-founder can be placed.
inline std::vector<std::size_t> sweep_order(const Pedigree& ped, const RestrictedPedigree& r,
                                            const std::vector<char>& is_target,
                                            std::vector<int> remaining_children) {
  const std::size_t m = r.members.size();
  std::vector<char> placed(ped.size(), 0);
  std::vector<std::size_t> order;
  order.reserve(m);
  while (order.size() < m) {
    std::optional<std::size_t> best;
    int best_delta = 0;
    for (std::size_t x : r.members) {
      if (placed[x]) continue;
      const Individual& ind = ped[x];
      if (ind.is_founder()) continue;
      if (!placed[*ind.father] || !placed[*ind.mother]) continue;
      int freed = 0;
      for (std::size_t p : {*ind.father, *ind.mother}) {
        if (p == *ind.mother && *ind.mother == *ind.father && freed > 0) break;
        if (!is_target[p] && remaining_children[p] == 1) ++freed;
      }
      int delta = 1 - freed;
      if (!best || delta < best_delta) {
        best = x;
        best_delta = delta;
      }
    }
    if (!best) {
      // Pick the founder whose child is closest to becoming placeable.
      int best_missing = 0;
      for (std::size_t x : r.members) {
        if (placed[x] || !ped[x].is_founder()) continue;
        int missing = 3;
        for (std::size_t c : ped.children(x)) {
          if (r.local[c] < 0) continue;
          int miss = !placed[*ped[c].father] + !placed[*ped[c].mother];
          missing = std::min(missing, miss);
        }
        if (!best || missing < best_missing) {
          best = x;
          best_missing = missing;
        }
      }
    }
    std::size_t x = *best;
    placed[x] = 1;
    order.push_back(x);
    if (!ped[x].is_founder()) {
      --remaining_children[*ped[x].father];
      if (*ped[x].mother != *ped[x].father) --remaining_children[*ped[x].mother];
    }
  }
  return order;
}

inline std::vector<int> children_within(const Pedigree& ped, const RestrictedPedigree& r) {
  std::vector<int> count(ped.size(), 0);
  for (std::size_t x : r.members)
    for (std::size_t c : ped.children(x))
      if (r.local[c] >= 0) ++count[x];
  return count;
}

inline IBDPatternDistribution exact_active_set(const Pedigree& ped, const std::vector<std::string>& target_ids,
                                               const IbdOptions& opts) {
  RestrictedPedigree r = restrict_to_targets(ped, target_ids);
  std::vector<char> is_target(ped.size(), 0);
  for (std::size_t t : r.targets) is_target[t] = 1;
  std::vector<int> remaining = children_within(ped, r);
  const std::vector<std::size_t> order = sweep_order(ped, r, is_target, remaining);

  std::vector<std::size_t> active; // slot order of individuals currently tracked
  std::unordered_map<LabelVector, Dyadic, LabelVectorHash> states{{LabelVector{}, Dyadic::one()}};

  for (std::size_t x : order) {
    const Individual& ind = ped[x];
    std::optional<std::size_t> fslot, mslot;
    if (!ind.is_founder()) {
      for (std::size_t s = 0; s < active.size(); ++s) {
        if (active[s] == *ind.father) fslot = s;
        if (active[s] == *ind.mother) mslot = s;
      }
      --remaining[*ind.father];
      if (*ind.mother != *ind.father) --remaining[*ind.mother];
    }
    active.push_back(x);
    // Slots retired once x is in place.
    std::vector<char> drop(active.size(), 0);
    bool any_drop = false;
    for (std::size_t s = 0; s < active.size(); ++s) {
      std::size_t y = active[s];
      if (!is_target[y] && remaining[y] == 0) {
        drop[s] = 1;
        any_drop = true;
      }
    }

    std::unordered_map<LabelVector, Dyadic, LabelVectorHash> next;
    next.reserve(states.size() * 2);
    auto emit = [&](LabelVector v, const Dyadic& p) {
      if (any_drop) {
        LabelVector kept;
        kept.reserve(v.size());
        for (std::size_t s = 0; s < drop.size(); ++s)
          if (!drop[s]) {
            kept.push_back(v[2 * s]);
            kept.push_back(v[2 * s + 1]);
          }
        v = std::move(kept);
      }
      quick_normalize(v);
      next[std::move(v)] += p;
    };
    for (const auto& [state, p] : states) {
      if (ind.is_founder()) {
        int top = state.empty() ? 0 : *std::max_element(state.begin(), state.end());
        LabelVector v = state;
        v.push_back(top + 1);
        v.push_back(top + 2);
        emit(std::move(v), p);
      } else {
        Dyadic quarter = p.halved(2);
        for (int gf = 0; gf < 2; ++gf)
          for (int gm = 0; gm < 2; ++gm) {
            LabelVector v = state;
            v.push_back(state[2 * *fslot + gf]);
            v.push_back(state[2 * *mslot + gm]);
            emit(std::move(v), quarter);
          }
      }
    }
    if (next.size() > opts.state_limit)
      throw CapExceeded("exact IBD computation exceeded " + std::to_string(opts.state_limit) +
                        " coalesced states; use monte_carlo mode");
    states = std::move(next);
    if (any_drop) {
      std::vector<std::size_t> kept;
      for (std::size_t s = 0; s < active.size(); ++s)
        if (!drop[s]) kept.push_back(active[s]);
      active = std::move(kept);
    }
  }

  std::vector<std::size_t> column_slot;
  for (std::size_t t : r.targets) {
    auto it = std::find(active.begin(), active.end(), t);
    column_slot.push_back(static_cast<std::size_t>(it - active.begin()));
  }
  std::map<IBDPattern, Dyadic> acc;
  for (const auto& [state, p] : states) {
    LabelVector v;
    for (std::size_t s : column_slot) {
      v.push_back(state[2 * s]);
      v.push_back(state[2 * s + 1]);
    }
    acc[canonicalize(v)] += p;
  }
  return IBDPatternDistribution::from_exact(target_ids, acc);
}

/// Drop genes through the restricted pedigree for one meiosis outcome.
/// `bit(k)` returns the k-th meiosis indicator.
template <class BitSource>
LabelVector drop_genes(const Pedigree& ped, const RestrictedPedigree& r, BitSource&& bit) {
  std::vector<int> genes(2 * r.members.size());
  int next_label = 1;
  int meiosis = 0;
  for (std::size_t k = 0; k < r.members.size(); ++k) {
    const Individual& ind = ped[r.members[k]];
    if (ind.is_founder()) {
      genes[2 * k] = next_label++;
      genes[2 * k + 1] = next_label++;
    } else {
      int f = r.local[*ind.father];
      int m = r.local[*ind.mother];
      genes[2 * k] = genes[2 * f + bit(meiosis++)];
      genes[2 * k + 1] = genes[2 * m + bit(meiosis++)];
    }
  }
  LabelVector out;
  out.reserve(2 * r.targets.size());
  for (std::size_t t : r.targets) {
    int k = r.local[t];
    out.push_back(genes[2 * k]);
    out.push_back(genes[2 * k + 1]);
  }
  return out;
}

inline int meiosis_count(const Pedigree& ped, const RestrictedPedigree& r) {
  int n = 0;
  for (std::size_t x : r.members)
    if (!ped[x].is_founder()) n += 2;
  return n;
}

class CanonicalCache {
public:
  const IBDPattern& operator()(LabelVector raw) {
    relabel_first_occurrence(raw);
    auto it = cache_.find(raw);
    if (it == cache_.end()) it = cache_.emplace(raw, canonicalize(raw)).first;
    return it->second;
  }

private:
  std::unordered_map<LabelVector, IBDPattern, LabelVectorHash> cache_;
};

inline IBDPatternDistribution naive_enumeration(const Pedigree& ped, const std::vector<std::string>& target_ids,
                                                const IbdOptions& opts) {
  RestrictedPedigree r = restrict_to_targets(ped, target_ids);
  const int m = meiosis_count(ped, r);
  if (m > opts.naive_meiosis_cap)
    throw CapExceeded("pedigree needs " + std::to_string(m) + " meioses, above the naive enumeration cap of " +
                      std::to_string(opts.naive_meiosis_cap));
  CanonicalCache canon;
  std::map<IBDPattern, std::uint64_t> counts;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << m); ++bits) {
    auto labels = drop_genes(ped, r, [bits](int k) { return static_cast<int>((bits >> k) & 1u); });
    ++counts[canon(std::move(labels))];
  }
  std::map<IBDPattern, Dyadic> acc;
  for (const auto& [pat, c] : counts) acc[pat] = Dyadic::fraction(c, m);
  return IBDPatternDistribution::from_exact(target_ids, acc);
}

inline IBDPatternDistribution monte_carlo(const Pedigree& ped, const std::vector<std::string>& target_ids,
                                          const IbdOptions& opts) {
  if (opts.mc_samples == 0) throw ValidationError("Monte-Carlo IBD needs at least one sample");
  RestrictedPedigree r = restrict_to_targets(ped, target_ids);
  std::mt19937_64 rng(opts.seed);
  CanonicalCache canon;
  std::map<IBDPattern, std::uint64_t> counts;
  for (std::size_t s = 0; s < opts.mc_samples; ++s) {
    std::uint64_t word = 0;
    int left = 0;
    auto bit = [&](int) {
      if (left == 0) {
        word = rng();
        left = 64;
      }
      --left;
      int b = static_cast<int>(word & 1u);
      word >>= 1;
      return b;
    };
    ++counts[canon(drop_genes(ped, r, bit))];
  }
  std::vector<std::pair<LabelVector, double>> rows;
  for (const auto& [pat, c] : counts)
    rows.emplace_back(pat.labels(), static_cast<double>(c) / static_cast<double>(opts.mc_samples));
  return IBDPatternDistribution::from_raw(target_ids, rows);
}

} // namespace detail

/// IBD pattern distribution of `targets` implied by the pedigree. Founders
/// are non-inbred and mutually unrelated; all inbreeding comes from loops.
/// Targets may repeat (a self-pair yields the individual's inbreeding).
inline IBDPatternDistribution pattern_distribution(const Pedigree& ped, const std::vector<std::string>& targets,
                                                   const IbdOptions& opts = {}) {
  switch (opts.mode) {
  case IbdMode::Exact:
    return detail::exact_active_set(ped, targets, opts);
  case IbdMode::Naive:
    return detail::naive_enumeration(ped, targets, opts);
  case IbdMode::MonteCarlo:
    return detail::monte_carlo(ped, targets, opts);
  }
  throw ValidationError("unknown IBD mode");
}

/// Restrict to `subset` (in the given order), re-canonicalise and aggregate.
inline IBDPatternDistribution marginalize(const IBDPatternDistribution& dist, const std::vector<std::string>& subset) {
  if (subset.empty()) throw ValidationError("marginalisation subset is empty");
  std::vector<std::size_t> cols;
  for (const auto& id : subset) {
    auto c = dist.column_of(id);
    if (!c) throw ValidationError("individual '" + id + "' is not in the IBD pattern distribution");
    cols.push_back(*c);
  }
  auto restrict = [&](const IBDPattern& p) {
    LabelVector v;
    for (std::size_t c : cols) {
      v.push_back(p.labels()[2 * c]);
      v.push_back(p.labels()[2 * c + 1]);
    }
    return canonicalize(v);
  };
  if (dist.is_exact()) {
    std::map<IBDPattern, Dyadic> acc;
    for (const auto& e : dist.entries()) acc[restrict(e.pattern)] += *e.exact;
    return IBDPatternDistribution::from_exact(subset, acc);
  }
  std::vector<std::pair<LabelVector, double>> rows;
  for (const auto& e : dist.entries()) rows.emplace_back(restrict(e.pattern).labels(), e.probability);
  return IBDPatternDistribution::from_raw(subset, rows);
}

/// Total-variation distance between two distributions over the same ids.
inline double total_variation(const IBDPatternDistribution& a, const IBDPatternDistribution& b) {
  std::map<IBDPattern, double> diff;
  for (const auto& e : a.entries()) diff[e.pattern] += e.probability;
  for (const auto& e : b.entries()) diff[e.pattern] -= e.probability;
  double tv = 0.0;
  for (const auto& [p, d] : diff) tv += std::abs(d);
  return tv / 2.0;
}

/// Every canonical IBD state of n individuals, by enumerating set partitions
/// of the 2n genes. With `inbreeding == false`, states where an individual's
/// two genes are IBD are excluded.
inline std::vector<IBDPattern> enumerate_states(int n, bool inbreeding, int cap = 5) {
  if (n < 1) throw ValidationError("number of individuals must be at least 1");
  if (n > cap) throw CapExceeded("state enumeration for n=" + std::to_string(n) + " exceeds the cap of " +
                                 std::to_string(cap));
  const std::size_t len = 2 * static_cast<std::size_t>(n);
  std::set<IBDPattern> seen;
  // Restricted growth strings: v[0]=1, v[k] <= 1 + max(v[0..k-1]).
  LabelVector v(len, 1);
  std::vector<int> prefix_max(len, 1);
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == len) {
      if (!inbreeding)
        for (std::size_t i = 0; i < len; i += 2)
          if (v[i] == v[i + 1]) return;
      seen.insert(canonicalize(v));
      return;
    }
    int limit = prefix_max[k - 1] + 1;
    for (int x = 1; x <= limit; ++x) {
      v[k] = x;
      prefix_max[k] = std::max(prefix_max[k - 1], x);
      rec(k + 1);
    }
  };
  if (len == 1) return {};
  rec(1);
  return {seen.begin(), seen.end()};
}

inline std::size_t count_states(int n, bool inbreeding, int cap = 5) {
  return enumerate_states(n, inbreeding, cap).size();
}

} // namespace pedmix
