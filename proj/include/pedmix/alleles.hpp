#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "pedmix/error.hpp"

namespace pedmix {

/// STR allele designation such as "15" or "15.3", stored in tenths of a
/// repeat so that "+1 repeat" keeps the micro-variant fraction.
struct Allele {
  int tenths = 0;

  static Allele parse(std::string_view s) {
    auto trim = [](std::string_view v) {
      while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
      while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
      return v;
    };
    s = trim(s);
    int whole = 0, frac = 0;
    auto dot = s.find('.');
    std::string_view w = s.substr(0, dot);
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), whole);
    bool ok = ec == std::errc() && p == w.data() + w.size() && !w.empty() && whole >= 0;
    if (ok && dot != std::string_view::npos) {
      std::string_view f = s.substr(dot + 1);
      ok = f.size() == 1 && f[0] >= '0' && f[0] <= '9';
      if (ok) frac = f[0] - '0';
    }
    if (!ok) throw ParseError("invalid allele designation '" + std::string(s) + "'");
    return Allele{whole * 10 + frac};
  }

  Allele plus_one_repeat() const { return Allele{tenths + 10}; }
  Allele minus_one_repeat() const { return Allele{tenths - 10}; }
  int fraction() const { return tenths % 10; }

  std::string str() const {
    std::string s = std::to_string(tenths / 10);
    if (tenths % 10) s += "." + std::to_string(tenths % 10);
    return s;
  }

  friend bool operator==(Allele, Allele) = default;
  friend auto operator<=>(Allele, Allele) = default;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t"));
    auto end = cell.find_last_not_of(" \t\r");
    cell.erase(end == std::string::npos ? 0 : end + 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Data rows of a small CSV file: blank lines and `#` comments skipped, and a
/// first row whose first cell is `header0` treated as a header.
inline std::vector<std::vector<std::string>> read_csv_rows(std::string_view text, std::string_view header0,
                                                           std::size_t columns, std::string_view what) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (first && !cells.empty() && cells[0] == header0) {
      first = false;
      continue;
    }
    first = false;
    if (cells.size() != columns)
      throw ParseError(std::string(what) + " line " + std::to_string(line_no) + ": expected " +
                       std::to_string(columns) + " columns");
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double parse_double(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + s + "' in " + std::string(what));
  }
}

inline std::string read_file(const std::string& path, std::string_view what) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + std::string(what) + " file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

} // namespace detail

/// Alleles of one marker in ascending order with their population frequencies.
struct MarkerFrequencies {
  std::vector<Allele> alleles;
  std::vector<double> freqs;

  std::optional<int> index_of(Allele a) const {
    auto it = std::lower_bound(alleles.begin(), alleles.end(), a);
    if (it == alleles.end() || *it != a) return std::nullopt;
    return static_cast<int>(it - alleles.begin());
  }
  std::size_t size() const noexcept { return alleles.size(); }
};

class AlleleFrequencyTable {
public:
  AlleleFrequencyTable() = default;

  /// Frequencies must be positive; each marker is renormalised to sum to one,
  /// with a warning when the raw sum is off by more than 1e-6.
  static AlleleFrequencyTable from_entries(const std::vector<std::tuple<std::string, Allele, double>>& entries) {
    AlleleFrequencyTable t;
    std::map<std::string, std::map<Allele, double>> acc;
    for (const auto& [marker, allele, f] : entries) {
      if (!(f > 0.0) || !std::isfinite(f))
        throw ValidationError("frequency of allele " + allele.str() + " at " + marker + " must be positive");
      auto& m = acc[marker];
      if (m.contains(allele))
        throw ValidationError("duplicate allele " + allele.str() + " at marker " + marker);
      m[allele] = f;
    }
    for (auto& [marker, m] : acc) {
      MarkerFrequencies mf;
      double total = 0.0;
      for (auto& [a, f] : m) total += f;
      if (std::abs(total - 1.0) > 1e-6) {
        std::ostringstream w;
        w << "frequencies at marker " << marker << " sum to " << total << "; renormalised";
        t.warnings_.push_back(w.str());
      }
      for (auto& [a, f] : m) {
        mf.alleles.push_back(a);
        mf.freqs.push_back(f / total);
      }
      t.markers_.emplace(marker, std::move(mf));
    }
    return t;
  }

  /// CSV with columns `marker,allele,frequency`.
  static AlleleFrequencyTable parse(std::string_view text) {
    std::vector<std::tuple<std::string, Allele, double>> entries;
    for (auto& row : detail::read_csv_rows(text, "marker", 3, "frequency table"))
      entries.emplace_back(row[0], Allele::parse(row[1]), detail::parse_double(row[2], "frequency table"));
    if (entries.empty()) throw ParseError("frequency table is empty");
    return from_entries(entries);
  }

  static AlleleFrequencyTable load(const std::string& path) {
    return parse(detail::read_file(path, "frequency"));
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "marker,allele,frequency\n";
    for (const auto& [m, mf] : markers_)
      for (std::size_t i = 0; i < mf.size(); ++i) out << m << ',' << mf.alleles[i].str() << ',' << mf.freqs[i] << '\n';
    return out.str();
  }

  /// Marker names in ascending order; this is the canonical evaluation order.
  std::vector<std::string> markers() const {
    std::vector<std::string> out;
    for (const auto& [m, mf] : markers_) out.push_back(m);
    return out;
  }

  bool has_marker(const std::string& m) const { return markers_.contains(m); }

  const MarkerFrequencies& marker(const std::string& m) const {
    auto it = markers_.find(m);
    if (it == markers_.end()) throw ValidationError("marker '" + m + "' is not in the frequency table");
    return it->second;
  }

  int index_of(const std::string& m, Allele a) const {
    auto i = marker(m).index_of(a);
    if (!i) throw ValidationError("allele " + a.str() + " is not in the frequency table for marker " + m);
    return *i;
  }

  /// Add `a` at marker `m` with frequency `eps` and renormalise. No-op when
  /// the allele is already present.
  void extend(const std::string& m, Allele a, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("extension frequency must lie in (0,1)");
    auto& mf = markers_.at(m);
    if (mf.index_of(a)) return;
    auto pos = std::lower_bound(mf.alleles.begin(), mf.alleles.end(), a) - mf.alleles.begin();
    mf.alleles.insert(mf.alleles.begin() + pos, a);
    mf.freqs.insert(mf.freqs.begin() + pos, eps);
    double total = 0.0;
    for (double f : mf.freqs) total += f;
    for (double& f : mf.freqs) f /= total;
    warnings_.push_back("allele " + a.str() + " added to marker " + m);
  }

  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
  std::map<std::string, MarkerFrequencies> markers_;
  std::vector<std::string> warnings_;
};

/// Unordered genotype, stored with first <= second.
struct Genotype {
  Allele first, second;

  static Genotype of(Allele a, Allele b) { return a <= b ? Genotype{a, b} : Genotype{b, a}; }
  bool homozygous() const { return first == second; }
  friend bool operator==(const Genotype&, const Genotype&) = default;
  friend auto operator<=>(const Genotype&, const Genotype&) = default;
  std::string str() const { return first.str() + "/" + second.str(); }
};

/// Genotypes of one person across markers.
class GenotypeProfile {
public:
  GenotypeProfile() = default;

  void set(const std::string& marker, Genotype g) { markers_[marker] = g; }
  bool has(const std::string& marker) const { return markers_.contains(marker); }
  const Genotype& at(const std::string& marker) const {
    auto it = markers_.find(marker);
    if (it == markers_.end()) throw ValidationError("genotype profile has no entry for marker " + marker);
    return it->second;
  }
  const std::map<std::string, Genotype>& markers() const noexcept { return markers_; }

  /// CSV with columns `marker,allele1,allele2`.
  static GenotypeProfile parse(std::string_view text) {
    GenotypeProfile p;
    for (auto& row : detail::read_csv_rows(text, "marker", 3, "genotype file")) {
      if (p.has(row[0])) throw ValidationError("duplicate marker " + row[0] + " in genotype file");
      p.set(row[0], Genotype::of(Allele::parse(row[1]), Allele::parse(row[2])));
    }
    return p;
  }

  static GenotypeProfile load(const std::string& path) { return parse(detail::read_file(path, "genotype")); }

  std::string to_csv() const {
    std::string out = "marker,allele1,allele2\n";
    for (const auto& [m, g] : markers_) out += m + "," + g.first.str() + "," + g.second.str() + "\n";
    return out;
  }

  friend bool operator==(const GenotypeProfile&, const GenotypeProfile&) = default;

private:
  std::map<std::string, Genotype> markers_;
};

} // namespace pedmix
