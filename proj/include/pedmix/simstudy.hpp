#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pedmix/engine.hpp"
#include "pedmix/error.hpp"
#include "pedmix/genotype.hpp"
#include "pedmix/inference.hpp"
#include "pedmix/parallel.hpp"
#include "pedmix/relationships.hpp"
#include "pedmix/synth.hpp"

namespace pedmix {

/// Marker for an unrelated contributor in StudyHypothesis::contributors.
inline constexpr const char* kUnrelatedSlot = "unrelated";

/// How the data were generated: a relationship among actors, some of whom
/// contribute cells to the mixture.
struct StudyTruth {
  std::string name;
  Relationship relationship;
  std::vector<std::string> contributors;
  std::vector<double> cells;
};

/// Contributors are relationship member ids or kUnrelatedSlot. Members that
/// are typed in a test become known contributors.
struct StudyHypothesis {
  std::string name;
  std::optional<Relationship> relationship;
  std::vector<std::string> contributors;
};

/// One comparison; h0 defaults to the all-unrelated baseline.
struct StudyTest {
  std::string name;
  StudyHypothesis hp;
  std::optional<StudyHypothesis> h0;
  std::vector<std::string> typed;
};

struct StudyConfig {
  std::string name = "study";
  AlleleFrequencyTable freqs;
  std::vector<StudyTruth> truths;
  std::vector<StudyTest> tests;
  int genotype_replicates = 4;
  int epg_replicates = 4;
  std::uint64_t seed = 1;
  SynthParams synth;
  MleOptions mle = [] {
    MleOptions o;
    o.starts = 2;
    return o;
  }();
  EngineOptions engine;
  /// Replicates run concurrently on this many threads.
  int threads = 1;

  void validate() const {
    if (truths.empty()) throw ValidationError("study needs at least one true relationship");
    if (tests.empty()) throw ValidationError("study needs at least one hypothesis");
    if (genotype_replicates < 1 || epg_replicates < 1) throw ValidationError("replicate counts must be positive");
    for (const auto& t : truths) {
      if (t.contributors.empty()) throw ValidationError("truth '" + t.name + "' has no contributors");
      if (t.contributors.size() != t.cells.size())
        throw ValidationError("truth '" + t.name + "' needs one cell count per contributor");
      for (double c : t.cells)
        if (!(c > 0.0)) throw ValidationError("cell counts must be positive");
    }
  }
};

struct StudyRow {
  std::string truth, test;
  int genotype_replicate = 0, epg_replicate = 0;
  double log10_lr = 0.0;
  LrStatus status = LrStatus::Finite;
};

struct StudyResult {
  std::vector<StudyRow> rows;
  std::vector<std::string> truths, tests;
  /// Median log10 LR per (truth, test); NaN when every replicate is indeterminate.
  std::vector<std::vector<double>> medians;

  double median(const std::string& truth, const std::string& test) const {
    auto ti = std::find(truths.begin(), truths.end(), truth);
    auto hi = std::find(tests.begin(), tests.end(), test);
    if (ti == truths.end() || hi == tests.end()) throw ValidationError("no such study cell");
    return medians[static_cast<std::size_t>(ti - truths.begin())][static_cast<std::size_t>(hi - tests.begin())];
  }

  /// Long format, one row per replicate.
  std::string replicates_csv() const {
    std::ostringstream o;
    o.precision(10);
    o << "truth,test,genotype_replicate,epg_replicate,log10_lr,status\n";
    for (const auto& r : rows)
      o << r.truth << ',' << r.test << ',' << r.genotype_replicate << ',' << r.epg_replicate << ','
        << format_value(r.log10_lr) << ',' << status_name(r.status) << '\n';
    return o.str();
  }

  /// Truths down the side, tests across.
  std::string medians_csv() const {
    std::ostringstream o;
    o.precision(6);
    o << std::fixed << "truth";
    for (const auto& t : tests) o << ',' << t;
    o << '\n';
    for (std::size_t i = 0; i < truths.size(); ++i) {
      o << truths[i];
      for (double m : medians[i]) o << ',' << format_value(m);
      o << '\n';
    }
    return o.str();
  }

  static std::string format_value(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    std::ostringstream o;
    o.precision(6);
    o << std::fixed << v;
    return o.str();
  }
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2) return v[n / 2];
  const double a = v[n / 2 - 1], b = v[n / 2];
  if (a == b) return a;  // also covers equal infinities
  return a / 2 + b / 2;
}

inline Hypothesis study_hypothesis(const StudyHypothesis& sh, const std::vector<std::string>& typed,
                                   const std::map<std::string, GenotypeProfile>& genotypes) {
  Hypothesis h;
  h.name = sh.name;
  std::optional<IBDPatternDistribution> dist;
  if (sh.relationship) dist = sh.relationship->distribution();
  for (const auto& c : sh.contributors) {
    if (c == kUnrelatedSlot) {
      h.contributors.push_back(ContributorSlot::unrelated());
      continue;
    }
    if (dist && dist->column_of(c)) {
      h.contributors.push_back(ContributorSlot::related(c));
    } else if (std::find(typed.begin(), typed.end(), c) != typed.end()) {
      h.contributors.push_back(ContributorSlot::known(c, genotypes.at(c)));
    } else {
      throw ValidationError("contributor '" + c + "' of hypothesis '" + sh.name +
                            "' is neither a relationship member nor typed");
    }
  }
  h.relationship = dist;
  for (const auto& id : typed) {
    auto it = genotypes.find(id);
    if (it == genotypes.end()) throw ValidationError("typed actor '" + id + "' is not part of the true relationship");
    h.typed[id] = it->second;
  }
  return h;
}

} // namespace detail

/// Simulate, fit the all-unrelated baseline on every EPG and score every
/// test at the baseline estimates.
inline StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyResult out;
  for (const auto& t : cfg.truths) out.truths.push_back(t.name);
  for (const auto& t : cfg.tests) out.tests.push_back(t.name);
  const auto markers = cfg.freqs.markers();
  const std::size_t ng = static_cast<std::size_t>(cfg.genotype_replicates);
  const std::size_t ne = static_cast<std::size_t>(cfg.epg_replicates);
  const std::size_t per_truth = ng * ne;
  std::vector<std::vector<StudyRow>> cells(cfg.truths.size() * per_truth);

  parallel_for(cells.size(), cfg.threads, [&](std::size_t job) {
    const std::size_t ti = job / per_truth, g = (job % per_truth) / ne, e = job % ne;
    const StudyTruth& truth = cfg.truths[ti];
    auto genotypes = simulate_profiles(truth.relationship.distribution(), cfg.freqs, derive_seed(cfg.seed, {ti, g}));
    std::vector<GenotypeProfile> profiles;
    for (std::size_t c = 0; c < truth.contributors.size(); ++c) {
      const auto& id = truth.contributors[c];
      if (!genotypes.contains(id))
        genotypes[id] = simulate_profiles(IBDPatternDistribution::unrelated({id}), cfg.freqs,
                                          derive_seed(cfg.seed, {ti, g, 500 + c}))[id];
      profiles.push_back(genotypes[id]);
    }
    std::vector<EPGData> epg{
        synthesize_epg(profiles, truth.cells, markers, cfg.synth, derive_seed(cfg.seed, {ti, g, 1000 + e}))};

    EngineOptions eo = cfg.engine;
    eo.markers = markers;
    Hypothesis baseline;
    baseline.name = "baseline";
    baseline.contributors.assign(truth.contributors.size(), ContributorSlot::unrelated());
    LikelihoodEngine base(baseline, cfg.freqs, epg, eo);
    MleOptions mo = cfg.mle;
    mo.seed = derive_seed(cfg.seed, {ti, g, 2000 + e});
    mo.threads = 1;
    const auto params = mle(base, mo).params;
    const auto base_result = base.evaluate(params);

    for (const auto& test : cfg.tests) {
      const Hypothesis hp = detail::study_hypothesis(test.hp, test.typed, genotypes);
      if (hp.size() != baseline.size())
        throw ValidationError("hypothesis '" + test.hp.name + "' has " + std::to_string(hp.size()) +
                              " contributors but the truth '" + truth.name + "' has " +
                              std::to_string(baseline.size()));
      const auto rp = LikelihoodEngine(hp, cfg.freqs, epg, eo).evaluate(params);
      LikelihoodResult r0 = base_result;
      if (test.h0) {
        const Hypothesis h0 = detail::study_hypothesis(*test.h0, test.typed, genotypes);
        if (h0.size() != baseline.size())
          throw ValidationError("hypothesis '" + test.h0->name + "' has the wrong number of contributors");
        r0 = LikelihoodEngine(h0, cfg.freqs, epg, eo).evaluate(params);
      }
      const auto rep = compare(rp, r0);
      cells[job].push_back({truth.name, test.name, static_cast<int>(g) + 1, static_cast<int>(e) + 1, rep.log10_lr,
                            rep.status});
    }
  });

  for (auto& c : cells)
    for (auto& r : c) out.rows.push_back(std::move(r));
  out.medians.assign(cfg.truths.size(), std::vector<double>(cfg.tests.size()));
  for (std::size_t ti = 0; ti < cfg.truths.size(); ++ti)
    for (std::size_t hi = 0; hi < cfg.tests.size(); ++hi) {
      std::vector<double> v;
      for (const auto& r : out.rows)
        if (r.truth == cfg.truths[ti].name && r.test == cfg.tests[hi].name) v.push_back(r.log10_lr);
      out.medians[ti][hi] = detail::median_of(std::move(v));
    }
  return out;
}

/// Truth-by-hypothesis grid: two related contributors, every listed relationship
/// as truth and as hypothesis.
inline StudyConfig two_way_study(const AlleleFrequencyTable& freqs, const std::vector<std::string>& truths,
                                 const std::vector<std::string>& hypotheses, std::uint64_t seed) {
  StudyConfig cfg;
  cfg.name = "two-way";
  cfg.freqs = freqs;
  cfg.seed = seed;
  for (const auto& t : truths) cfg.truths.push_back({t, named_relationship(t), {"X1", "X2"}, {150, 50}});
  for (const auto& h : hypotheses) cfg.tests.push_back({h, {h, named_relationship(h), {"X1", "X2"}}, std::nullopt, {}});
  return cfg;
}

/// Incest and rape: the child C (200 cells) and the maternal grandfather GF
/// (100 cells) contribute; GF is also C's father. Four tests for each set
/// of typed actors.
inline StudyConfig incest_rape_study(const AlleleFrequencyTable& freqs, std::uint64_t seed) {
  StudyConfig cfg;
  cfg.name = "incest-rape";
  cfg.freqs = freqs;
  cfg.seed = seed;
  const auto incest = named_relationship("incest-grandfather");
  const auto no_incest = named_relationship("no-incest-grandfather");
  cfg.truths.push_back({"incest-rape", incest, {"C", "GF"}, {200, 100}});
  const std::vector<std::pair<std::string, std::vector<std::string>>> typed_sets = {
      {"MC", {"M", "C"}}, {"M", {"M"}}, {"C", {"C"}}, {"none", {}}};
  for (const auto& [label, typed] : typed_sets) {
    StudyHypothesis rape_i{"C+GF|incest", incest, {"C", "GF"}};
    StudyHypothesis norape_i{"C+U|incest", incest, {"C", kUnrelatedSlot}};
    StudyHypothesis rape_n{"C+GF|no-incest", no_incest, {"C", "GF"}};
    StudyHypothesis norape_n{"C+U|no-incest", no_incest, {"C", kUnrelatedSlot}};
    cfg.tests.push_back({"rape|incest:" + label, rape_i, norape_i, typed});
    cfg.tests.push_back({"incest|rape:" + label, rape_i, rape_n, typed});
    cfg.tests.push_back({"rape|no-incest:" + label, rape_n, norape_n, typed});
    cfg.tests.push_back({"incest|no-rape:" + label, norape_i, norape_n, typed});
  }
  return cfg;
}

/// Four brothers, three contribute (200/100/50 cells); three sibs against
/// three unrelated, without and with the fourth brother typed.
inline StudyConfig four_sibs_study(const AlleleFrequencyTable& freqs, std::uint64_t seed) {
  StudyConfig cfg;
  cfg.name = "four-sibs";
  cfg.freqs = freqs;
  cfg.seed = seed;
  const auto sibs = named_relationship("4-sibs");
  cfg.truths.push_back({"4-sibs", sibs, {"X1", "X2", "X3"}, {200, 100, 50}});
  StudyHypothesis hp{"3-sibs", sibs, {"X1", "X2", "X3"}};
  cfg.tests.push_back({"without-X4", hp, std::nullopt, {}});
  cfg.tests.push_back({"with-X4", hp, std::nullopt, {"X4"}});
  return cfg;
}

} // namespace pedmix
