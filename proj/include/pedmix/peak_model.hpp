#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "pedmix/alleles.hpp"
#include "pedmix/error.hpp"

namespace pedmix {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Gamma peak-height model parameters for one EPG.
struct MixtureParams {
  double rho = 1.0; ///< amplification (shape multiplier)
  double eta = 1.0; ///< gamma scale, rfu
  double xi = 0.0;  ///< mean stutter proportion
  std::vector<double> phi;

  void validate() const {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ValidationError("rho must be positive");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("eta must be positive");
    if (!(xi >= 0.0 && xi < 1.0)) throw ValidationError("xi must lie in [0,1)");
    if (phi.empty()) throw ValidationError("phi must have at least one entry");
    double s = 0.0;
    for (double f : phi) {
      if (!(f >= 0.0)) throw ValidationError("phi entries must be non-negative");
      s += f;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError("phi must sum to one");
  }

  std::string str() const {
    std::ostringstream o;
    o.precision(6);
    o << "rho=" << rho << ",eta=" << eta << ",xi=" << xi << ",phi=";
    for (std::size_t i = 0; i < phi.size(); ++i) o << (i ? "/" : "") << phi[i];
    return o.str();
  }
};

/// Log density of Gamma(shape, scale) at z > 0.
inline double log_gamma_pdf(double z, double shape, double scale) {
  return (shape - 1.0) * std::log(z) - z / scale - std::lgamma(shape) - shape * std::log(scale);
}

/// Log CDF of Gamma(shape, scale) at c. Deep in the lower tail the series
/// for P(a, x) is summed in log space so the result does not underflow.
inline double log_gamma_cdf(double c, double shape, double scale) {
  if (c <= 0.0) return kNegInf;
  namespace bp = boost::math::policies;
  const double x = c / scale;
  const double p = boost::math::gamma_p(shape, x, bp::make_policy(bp::promote_double<false>()));
  if (p > 1e-250) return std::log(p);
  // P(a,x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k)), valid for x < a + 1.
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 10000 && term > 1e-17 * sum; ++k) {
    term *= x / (shape + k);
    sum += term;
  }
  return shape * std::log(x) - x - std::lgamma(shape + 1.0) + std::log(sum);
}

/// Log of the single-allele factor: the density at an observed height, or
/// the probability of staying below the threshold when unobserved. A zero
/// dose is a point mass at zero height.
inline double log_peak_factor(double height, double dose, double rho, double eta, double threshold) {
  if (dose <= 0.0) return height > 0.0 ? kNegInf : 0.0;
  const double shape = rho * dose;
  return height > 0.0 ? log_gamma_pdf(height, shape, eta) : log_gamma_cdf(threshold, shape, eta);
}

/// Peak heights of one electropherogram. Only peaks strictly above the
/// detection threshold are kept; anything else is "not observed".
class EPGData {
public:
  EPGData() = default;
  explicit EPGData(double threshold) : threshold_(threshold) {
    if (!(threshold >= 0.0) || !std::isfinite(threshold)) throw ValidationError("threshold must be non-negative");
  }

  double threshold() const noexcept { return threshold_; }

  void add_peak(const std::string& marker, Allele a, double height) {
    if (!(height >= 0.0) || !std::isfinite(height)) throw ValidationError("peak heights must be non-negative");
    auto& m = markers_[marker];
    if (m.contains(a)) throw ValidationError("duplicate peak " + a.str() + " at marker " + marker);
    if (height > threshold_) m[a] = height;
  }

  /// Observed peaks at a marker (empty when none exceed the threshold).
  const std::map<Allele, double>& peaks(const std::string& marker) const {
    static const std::map<Allele, double> none;
    auto it = markers_.find(marker);
    return it == markers_.end() ? none : it->second;
  }

  std::vector<std::string> markers() const {
    std::vector<std::string> out;
    for (const auto& [m, p] : markers_) out.push_back(m);
    return out;
  }

  double height(const std::string& marker, Allele a) const {
    const auto& p = peaks(marker);
    auto it = p.find(a);
    return it == p.end() ? 0.0 : it->second;
  }

  /// CSV with columns `marker,allele,height`.
  static EPGData parse(std::string_view text, double threshold) {
    EPGData epg(threshold);
    for (auto& row : detail::read_csv_rows(text, "marker", 3, "EPG file"))
      epg.add_peak(row[0], Allele::parse(row[1]), detail::parse_double(row[2], "EPG file"));
    return epg;
  }

  static EPGData load(const std::string& path, double threshold) {
    return parse(detail::read_file(path, "EPG"), threshold);
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(10);
    out << "marker,allele,height\n";
    for (const auto& [m, p] : markers_)
      for (const auto& [a, h] : p) out << m << ',' << a.str() << ',' << h << '\n';
    return out.str();
  }

private:
  double threshold_ = 50.0;
  std::map<std::string, std::map<Allele, double>> markers_;
};

/// Alleles considered at one marker: database alleles, observed peaks, fixed
/// (known or typed) alleles, and the stutter position one repeat below every
/// allele that can carry DNA.
struct MarkerGrid {
  std::string marker;
  std::vector<Allele> alleles; // ascending
  std::vector<double> freq;    // database frequency, 0 when off-database
  std::vector<int> db_index;   // index in the frequency table, -1 when off-database
  std::vector<int> stutter_source; // grid index of the allele one repeat up, or -1

  std::size_t size() const noexcept { return alleles.size(); }

  int index_of(Allele a) const {
    auto it = std::lower_bound(alleles.begin(), alleles.end(), a);
    if (it == alleles.end() || *it != a) return -1;
    return static_cast<int>(it - alleles.begin());
  }

  static MarkerGrid build(const std::string& marker, const MarkerFrequencies& mf, const std::set<Allele>& observed,
                          const std::set<Allele>& fixed) {
    std::set<Allele> all(mf.alleles.begin(), mf.alleles.end());
    all.insert(observed.begin(), observed.end());
    all.insert(fixed.begin(), fixed.end());
    std::set<Allele> sources(mf.alleles.begin(), mf.alleles.end());
    sources.insert(fixed.begin(), fixed.end());
    for (Allele a : sources)
      if (a.tenths >= 10) all.insert(a.minus_one_repeat());
    MarkerGrid g;
    g.marker = marker;
    g.alleles.assign(all.begin(), all.end());
    for (Allele a : g.alleles) {
      auto i = mf.index_of(a);
      g.db_index.push_back(i ? *i : -1);
      g.freq.push_back(i ? mf.freqs[*i] : 0.0);
    }
    for (Allele a : g.alleles) g.stutter_source.push_back(g.index_of(a.plus_one_repeat()));
    return g;
  }
};

/// D_a = (1-xi) S_a + xi S_{a+1} with S_x = sum_i phi_i n_{ix}; `counts` is
/// indexed [contributor][grid allele].
inline double effective_dose(const std::vector<std::vector<int>>& counts, const MixtureParams& p,
                             const MarkerGrid& grid, std::size_t a) {
  if (counts.size() != p.phi.size()) throw ValidationError("one count array per contributor is required");
  auto S = [&](std::size_t x) {
    double s = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) s += p.phi[i] * counts[i][x];
    return s;
  };
  double d = (1.0 - p.xi) * S(a);
  if (grid.stutter_source[a] >= 0) d += p.xi * S(static_cast<std::size_t>(grid.stutter_source[a]));
  return d;
}

/// Sum over grid alleles of log L_a for one EPG at one marker.
inline double marker_loglik(const MarkerGrid& grid, const std::vector<double>& heights,
                            const std::vector<std::vector<int>>& counts, const MixtureParams& p, double threshold) {
  double total = 0.0;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    double f = log_peak_factor(heights[a], effective_dose(counts, p, grid, a), p.rho, p.eta, threshold);
    if (std::isnan(f)) throw NumericalError("peak factor is NaN at marker " + grid.marker);
    total += f;
  }
  return total;
}

/// Heights of an EPG laid out on a grid (0 = not observed). Throws when a
/// peak falls outside the grid.
inline std::vector<double> heights_on_grid(const MarkerGrid& grid, const EPGData& epg) {
  std::vector<double> h(grid.size(), 0.0);
  for (const auto& [a, z] : epg.peaks(grid.marker)) {
    int i = grid.index_of(a);
    if (i < 0) throw ValidationError("peak " + a.str() + " at " + grid.marker + " is not on the allele grid");
    h[static_cast<std::size_t>(i)] = z;
  }
  return h;
}

} // namespace pedmix
