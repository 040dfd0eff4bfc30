#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pedmix/engine.hpp"
#include "pedmix/error.hpp"
#include "pedmix/hypothesis.hpp"
#include "pedmix/parallel.hpp"
#include "pedmix/peak_model.hpp"

namespace pedmix {

struct NelderMeadOptions {
  int max_iterations = 2000;
  /// Stop once max f - min f over the simplex falls below this.
  double spread = 1e-8;
  double initial_step = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimise f from x0. Non-finite values are treated as +inf. The returned
/// point is the best one evaluated.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const NelderMeadOptions& opts = {}) {
  const std::size_t n = x0.size();
  NelderMeadResult best;
  auto eval = [&](const std::vector<double>& x) {
    double v = f(x);
    if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    ++best.evaluations;
    if (v < best.f) {
      best.f = v;
      best.x = x;
    }
    return v;
  };
  if (n == 0) {
    best.x = x0;
    eval(x0);
    best.converged = true;
    return best;
  }

  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += opts.initial_step;
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

  std::vector<std::size_t> idx(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  for (; best.iterations < opts.max_iterations; ++best.iterations) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t lo = idx.front(), hi = idx.back(), second = idx[n - 1];
    if (!std::isfinite(fv[lo])) break;
    if (fv[hi] - fv[lo] < opts.spread) {
      best.converged = true;
      break;
    }
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != hi)
        for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d] / static_cast<double>(n);

    for (std::size_t d = 0; d < n; ++d) xr[d] = centroid[d] + (centroid[d] - pts[hi][d]);
    const double fr = eval(xr);
    if (fr < fv[lo]) {
      for (std::size_t d = 0; d < n; ++d) xe[d] = centroid[d] + 2.0 * (centroid[d] - pts[hi][d]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[hi] = xe;
        fv[hi] = fe;
      } else {
        pts[hi] = xr;
        fv[hi] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[hi] = xr;
      fv[hi] = fr;
      continue;
    }
    const bool outside = fr < fv[hi];
    for (std::size_t d = 0; d < n; ++d)
      xc[d] = outside ? centroid[d] + 0.5 * (xr[d] - centroid[d]) : centroid[d] + 0.5 * (pts[hi][d] - centroid[d]);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[hi])) {
      pts[hi] = xc;
      fv[hi] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == lo) continue;
      for (std::size_t d = 0; d < n; ++d) pts[i][d] = pts[lo][d] + 0.5 * (pts[i][d] - pts[lo][d]);
      fv[i] = eval(pts[i]);
    }
  }
  return best;
}

struct MleOptions {
  int starts = 5;
  /// Fresh-simplex restarts from the end point of every start.
  int restarts = 1;
  std::uint64_t seed = 1;
  /// Starts run concurrently on this many threads.
  int threads = 1;
  NelderMeadOptions nelder_mead;
  /// Optional first starting point (one parameter set per EPG).
  std::vector<MixtureParams> init;
};

struct MleResult {
  std::vector<MixtureParams> params;
  double loglik = kNegInf;
  LikelihoodResult detail;
  /// Best log-likelihood reached from each start.
  std::vector<double> start_logliks;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

inline double logistic(double y) { return y >= 0 ? 1.0 / (1.0 + std::exp(-y)) : std::exp(y) / (1.0 + std::exp(y)); }
inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// Maps unconstrained coordinates to parameters: per EPG log rho, log eta,
/// logit xi, then stick-breaking coordinates over the contributors whose
/// proportion is free.
class ParamCoder {
public:
  ParamCoder(const Hypothesis& h, std::size_t nepg) : nslots_(h.size()) {
    for (std::size_t e = 0; e < nepg; ++e) {
      std::vector<std::size_t> f;
      for (std::size_t i = 0; i < nslots_; ++i)
        if (!h.zero_phi_for(e).contains(i)) f.push_back(i);
      if (f.empty()) throw ValidationError("every mixture proportion of EPG " + std::to_string(e) + " is fixed at zero");
      free_.push_back(std::move(f));
    }
  }

  std::size_t dimension() const {
    std::size_t d = 0;
    for (const auto& f : free_) d += 2 + f.size();
    return d;
  }

  std::vector<MixtureParams> decode(const std::vector<double>& x) const {
    std::vector<MixtureParams> out;
    std::size_t j = 0;
    for (const auto& f : free_) {
      MixtureParams p;
      p.rho = std::exp(x[j++]);
      p.eta = std::exp(x[j++]);
      p.xi = logistic(x[j++]);
      p.phi.assign(nslots_, 0.0);
      double rest = 1.0;
      const std::size_t k = f.size();
      for (std::size_t i = 0; i + 1 < k; ++i) {
        const double v = logistic(x[j++] - std::log(static_cast<double>(k - i - 1)));
        p.phi[f[i]] = rest * v;
        rest -= p.phi[f[i]];
      }
      p.phi[f[k - 1]] = std::max(rest, 0.0);
      out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<double> encode(const std::vector<MixtureParams>& params) const {
    if (params.size() != free_.size()) throw ValidationError("one starting parameter set per EPG is required");
    std::vector<double> x;
    for (std::size_t e = 0; e < free_.size(); ++e) {
      const auto& p = params[e];
      if (p.phi.size() != nslots_) throw ValidationError("starting phi has the wrong number of entries");
      x.push_back(std::log(p.rho));
      x.push_back(std::log(p.eta));
      x.push_back(logit(std::clamp(p.xi, 1e-6, 1.0 - 1e-6)));
      const auto& f = free_[e];
      double total = 0.0;
      for (std::size_t i : f) total += std::max(p.phi[i], 1e-6);
      double rest = 1.0;
      for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        const double share = std::max(p.phi[f[i]], 1e-6) / total;
        const double v = std::clamp(share / rest, 1e-9, 1.0 - 1e-9);
        x.push_back(logit(v) + std::log(static_cast<double>(f.size() - i - 1)));
        rest -= share;
      }
    }
    return x;
  }

  const std::vector<std::size_t>& free_slots(std::size_t epg) const { return free_[epg]; }

private:
  std::size_t nslots_;
  std::vector<std::vector<std::size_t>> free_;
};

/// Mean over markers of the summed peak height, per EPG.
inline std::vector<double> mean_marker_signal(const LikelihoodEngine& eng) {
  std::vector<double> out;
  for (std::size_t e = 0; e < eng.epgs().size(); ++e) {
    double total = 0.0;
    for (const auto& m : eng.markers())
      for (const auto& [a, z] : eng.epgs()[e].peaks(m)) total += z;
    if (!(total > 0.0))
      throw ValidationError("EPG " + std::to_string(e) + " has no peaks above the threshold at any analysed marker");
    out.push_back(total / static_cast<double>(eng.markers().size()));
  }
  return out;
}

/// Unrelated contributors with identical constraints are interchangeable;
/// report their proportions in decreasing order.
inline void order_exchangeable(const Hypothesis& h, std::vector<MixtureParams>& params) {
  std::map<std::vector<bool>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h.contributors[i].kind != ContributorSlot::Kind::Unrelated) continue;
    std::vector<bool> sig;
    for (std::size_t e = 0; e < params.size(); ++e) sig.push_back(h.zero_phi_for(e).contains(i));
    groups[sig].push_back(i);
  }
  for (const auto& [sig, slots] : groups) {
    if (slots.size() < 2) continue;
    std::vector<std::vector<double>> cols;
    for (std::size_t i : slots) {
      std::vector<double> c;
      for (const auto& p : params) c.push_back(p.phi[i]);
      cols.push_back(std::move(c));
    }
    std::sort(cols.begin(), cols.end(), std::greater<>());
    for (std::size_t k = 0; k < slots.size(); ++k)
      for (std::size_t e = 0; e < params.size(); ++e) params[e].phi[slots[k]] = cols[k][e];
  }
}

} // namespace detail

/// Maximum-likelihood estimate of the mixture parameters of every EPG.
inline MleResult mle(const LikelihoodEngine& eng, const MleOptions& opts = {}) {
  const Hypothesis& h = eng.hypothesis();
  const std::size_t nepg = eng.epgs().size();
  detail::ParamCoder coder(h, nepg);
  const std::vector<double> signal = detail::mean_marker_signal(eng);
  if (opts.starts < 1) throw ValidationError("at least one start is required");

  // Starting points: a data-driven one, then seeded perturbations of it.
  std::vector<std::vector<double>> starts;
  std::mt19937_64 rng(opts.seed);
  for (int s = 0; s < opts.starts; ++s) {
    std::vector<MixtureParams> init;
    if (s == 0 && !opts.init.empty()) {
      init = opts.init;
    } else {
      for (std::size_t e = 0; e < nepg; ++e) {
        MixtureParams p;
        const auto& f = coder.free_slots(e);
        p.phi.assign(h.size(), 0.0);
        if (s == 0) {
          p.rho = 4.0;
          p.xi = 0.05;
          // Decreasing proportions (k, k-1, ..., 1) so that starts are not symmetric.
          double total = 0.0;
          for (std::size_t i = 0; i < f.size(); ++i) total += static_cast<double>(f.size() - i);
          for (std::size_t i = 0; i < f.size(); ++i) p.phi[f[i]] = static_cast<double>(f.size() - i) / total;
        } else {
          p.rho = 4.0 * std::exp(std::normal_distribution<double>(0.0, 0.7)(rng));
          p.xi = std::uniform_real_distribution<double>(0.01, 0.15)(rng);
          std::gamma_distribution<double> g(1.0, 1.0);
          double total = 0.0;
          for (std::size_t i : f) total += p.phi[i] = g(rng) + 0.05;
          for (std::size_t i : f) p.phi[i] /= total;
        }
        p.eta = signal[e] / (2.0 * p.rho);
        init.push_back(std::move(p));
      }
    }
    starts.push_back(coder.encode(init));
  }

  auto objective = [&](const std::vector<double>& x) { return -eng.loglik(coder.decode(x)); };

  std::vector<NelderMeadResult> runs(starts.size());
  parallel_for(starts.size(), opts.threads, [&](std::size_t s) {
    NelderMeadResult r = nelder_mead(objective, starts[s], opts.nelder_mead);
    int evals = r.evaluations;
    for (int k = 0; k < opts.restarts && std::isfinite(r.f); ++k) {
      NelderMeadResult again = nelder_mead(objective, r.x, opts.nelder_mead);
      evals += again.evaluations;
      const bool improved = again.f < r.f - opts.nelder_mead.spread;
      if (again.f < r.f) r = std::move(again);
      if (!improved) break;
    }
    r.evaluations = evals;
    runs[s] = std::move(r);
  });

  MleResult out;
  std::size_t best = 0;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    out.start_logliks.push_back(-runs[s].f);
    out.evaluations += runs[s].evaluations;
    if (runs[s].f < runs[best].f) best = s;
  }
  if (!std::isfinite(runs[best].f)) {
    auto res = eng.evaluate(coder.decode(starts.front()));
    const std::string marker = res.impossible_marker.value_or("");
    throw ImpossibleEvidence(marker, "likelihood under hypothesis '" + h.name + "' is zero at every start" +
                                         (res.diagnostic.empty() ? "" : ": " + res.diagnostic));
  }
  out.params = coder.decode(runs[best].x);
  detail::order_exchangeable(h, out.params);
  out.detail = eng.evaluate(out.params);
  out.loglik = out.detail.loglik;
  out.converged = runs[best].converged;
  return out;
}

inline MleResult mle(const std::vector<EPGData>& epgs, const Hypothesis& h, const AlleleFrequencyTable& freqs,
                     const MleOptions& opts = {}, const EngineOptions& engine = {}) {
  return mle(LikelihoodEngine(h, freqs, epgs, engine), opts);
}

enum class LrPolicy { SharedH0Mles, SeparateMles, FixedParams, MinimiseRatio };

inline const char* policy_name(LrPolicy p) {
  switch (p) {
  case LrPolicy::SharedH0Mles: return "shared_h0_mles";
  case LrPolicy::SeparateMles: return "separate_mles";
  case LrPolicy::FixedParams: return "fixed_params";
  case LrPolicy::MinimiseRatio: return "minimise_ratio";
  }
  return "?";
}

inline LrPolicy parse_policy(const std::string& s) {
  for (auto p : {LrPolicy::SharedH0Mles, LrPolicy::SeparateMles, LrPolicy::FixedParams, LrPolicy::MinimiseRatio})
    if (s == policy_name(p)) return p;
  throw ValidationError("unknown LR policy '" + s + "'");
}

/// How a log10 LR value should be read.
enum class LrStatus { Finite, PlusInfinity, MinusInfinity, Indeterminate };

inline const char* status_name(LrStatus s) {
  switch (s) {
  case LrStatus::Finite: return "finite";
  case LrStatus::PlusInfinity: return "+inf";
  case LrStatus::MinusInfinity: return "-inf";
  case LrStatus::Indeterminate: return "indeterminate";
  }
  return "?";
}

struct MarkerLR {
  std::string marker;
  double loglik_p = 0.0;
  double loglik_0 = 0.0;
  double log10_lr = 0.0;
  LrStatus status = LrStatus::Finite;
};

struct LRReport {
  std::string hp_name, h0_name;
  LrPolicy policy = LrPolicy::SharedH0Mles;
  std::vector<MarkerLR> markers;
  double log10_lr = 0.0;
  LrStatus status = LrStatus::Finite;
  std::vector<MixtureParams> params_p, params_0;
  double loglik_p = 0.0, loglik_0 = 0.0;
  std::string diagnostic;
  double seconds = 0.0;
};

struct LrOptions {
  LrPolicy policy = LrPolicy::SharedH0Mles;
  /// Parameters for fixed_params (one set per EPG, used for both hypotheses).
  std::vector<MixtureParams> params;
  MleOptions mle;
  EngineOptions engine;
};

namespace detail {

inline LrStatus classify(double lp, double l0) {
  if (l0 == kNegInf) return lp == kNegInf ? LrStatus::Indeterminate : LrStatus::PlusInfinity;
  if (lp == kNegInf) return LrStatus::MinusInfinity;
  return LrStatus::Finite;
}

inline double status_value(LrStatus s, double v) {
  switch (s) {
  case LrStatus::PlusInfinity: return std::numeric_limits<double>::infinity();
  case LrStatus::MinusInfinity: return kNegInf;
  case LrStatus::Indeterminate: return std::numeric_limits<double>::quiet_NaN();
  case LrStatus::Finite: break;
  }
  return v;
}

} // namespace detail

/// Compare two already evaluated hypotheses marker by marker.
inline LRReport compare(const LikelihoodResult& rp, const LikelihoodResult& r0) {
  if (rp.markers.size() != r0.markers.size()) throw ValidationError("hypotheses were evaluated on different markers");
  LRReport rep;
  NeumaierSum total;
  bool plus = false, minus = false, indeterminate = false;
  for (std::size_t m = 0; m < rp.markers.size(); ++m) {
    if (rp.markers[m].marker != r0.markers[m].marker)
      throw ValidationError("hypotheses were evaluated on different markers");
    MarkerLR x;
    x.marker = rp.markers[m].marker;
    x.loglik_p = rp.markers[m].loglik;
    x.loglik_0 = r0.markers[m].loglik;
    x.status = detail::classify(x.loglik_p, x.loglik_0);
    x.log10_lr = detail::status_value(x.status, (x.loglik_p - x.loglik_0) / std::numbers::ln10);
    plus = plus || x.status == LrStatus::PlusInfinity;
    minus = minus || x.status == LrStatus::MinusInfinity;
    indeterminate = indeterminate || x.status == LrStatus::Indeterminate;
    if (x.status == LrStatus::Finite) total.add(x.log10_lr);
    rep.markers.push_back(std::move(x));
  }
  rep.status = indeterminate || (plus && minus) ? LrStatus::Indeterminate
               : plus                           ? LrStatus::PlusInfinity
               : minus                          ? LrStatus::MinusInfinity
                                                : LrStatus::Finite;
  rep.log10_lr = detail::status_value(rep.status, total.value());
  rep.loglik_p = rp.loglik;
  rep.loglik_0 = r0.loglik;
  if (rp.impossible_marker) rep.diagnostic = "numerator: " + rp.diagnostic;
  if (r0.impossible_marker)
    rep.diagnostic += (rep.diagnostic.empty() ? "" : "; ") + std::string("denominator: ") + r0.diagnostic;
  return rep;
}

/// Likelihood ratio of hp against h0 for the same EPGs.
inline LRReport lr(const LikelihoodEngine& ep, const LikelihoodEngine& e0, const LrOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (ep.markers() != e0.markers()) throw ValidationError("hypotheses must be evaluated on the same markers");
  if (ep.epgs().size() != e0.epgs().size()) throw ValidationError("hypotheses must share the same EPGs");
  std::vector<MixtureParams> pp, p0;
  switch (opts.policy) {
  case LrPolicy::FixedParams:
    if (opts.params.empty()) throw ValidationError("fixed_params needs parameter values");
    pp = p0 = opts.params;
    break;
  case LrPolicy::SharedH0Mles:
    if (ep.slots() != e0.slots())
      throw ValidationError("shared_h0_mles needs the same number of contributors under both hypotheses; use "
                            "separate_mles");
    try {
      pp = p0 = mle(e0, opts.mle).params;
    } catch (const ImpossibleEvidence&) {
      // The denominator is zero everywhere; the numerator's estimates still
      // give a meaningful (infinite) ratio.
      pp = p0 = mle(ep, opts.mle).params;
    }
    break;
  case LrPolicy::SeparateMles: {
    std::optional<std::vector<MixtureParams>> a, b;
    try {
      a = mle(ep, opts.mle).params;
    } catch (const ImpossibleEvidence&) {
    }
    try {
      b = mle(e0, opts.mle).params;
    } catch (const ImpossibleEvidence&) {
    }
    if (!a && !b) throw ImpossibleEvidence("", "both hypotheses have zero likelihood at every start");
    // A hypothesis with zero likelihood everywhere is evaluated at the
    // other's estimates when the contributor counts allow it.
    if (!a && ep.slots() == e0.slots()) a = b;
    if (!b && ep.slots() == e0.slots()) b = a;
    if (!a || !b) throw ImpossibleEvidence("", "one hypothesis has zero likelihood at every start");
    pp = *a;
    p0 = *b;
    break;
  }
  case LrPolicy::MinimiseRatio:
    throw Unsupported("the minimise_ratio policy is not implemented");
  }
  LRReport rep = compare(ep.evaluate(pp), e0.evaluate(p0));
  rep.hp_name = ep.hypothesis().name;
  rep.h0_name = e0.hypothesis().name;
  rep.policy = opts.policy;
  rep.params_p = std::move(pp);
  rep.params_0 = std::move(p0);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline LRReport lr(const std::vector<EPGData>& epgs, const Hypothesis& hp, const Hypothesis& h0,
                   const AlleleFrequencyTable& freqs, const LrOptions& opts = {}) {
  return lr(LikelihoodEngine(hp, freqs, epgs, opts.engine), LikelihoodEngine(h0, freqs, epgs, opts.engine), opts);
}

} // namespace pedmix
