#pragma once

// JSON configuration files and reports. Relative paths inside a config are
// resolved against the directory of the config file.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pedmix/alleles.hpp"
#include "pedmix/engine.hpp"
#include "pedmix/error.hpp"
#include "pedmix/hypothesis.hpp"
#include "pedmix/inference.hpp"
#include "pedmix/relationships.hpp"
#include "pedmix/simstudy.hpp"

namespace pedmix {

using json = nlohmann::json;

inline json load_json(const std::string& path) {
  const std::string text = detail::read_file(path, "config");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Non-finite values become the strings "Inf", "-Inf" and "NaN".
inline json json_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  return v;
}

inline double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j == "Inf") return std::numeric_limits<double>::infinity();
  if (j == "-Inf") return kNegInf;
  if (j == "NaN") return std::numeric_limits<double>::quiet_NaN();
  throw ParseError("expected a number, got " + j.dump());
}

namespace detail {

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path.string() : (base / path).string();
}

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field '" + key + "': " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

} // namespace detail

inline json to_json(const MixtureParams& p) {
  return {{"rho", p.rho}, {"eta", p.eta}, {"xi", p.xi}, {"phi", p.phi}};
}

inline MixtureParams params_from_json(const json& j) {
  MixtureParams p;
  p.rho = detail::get_field<double>(j, "rho", "parameters");
  p.eta = detail::get_field<double>(j, "eta", "parameters");
  p.xi = detail::get_field<double>(j, "xi", "parameters");
  p.phi = detail::get_field<std::vector<double>>(j, "phi", "parameters");
  p.validate();
  return p;
}

/// A single parameter object or an array with one per EPG.
inline std::vector<MixtureParams> params_list_from_json(const json& j) {
  std::vector<MixtureParams> out;
  if (j.is_array()) {
    for (const auto& x : j) out.push_back(params_from_json(x));
  } else {
    out.push_back(params_from_json(j));
  }
  return out;
}

inline json to_json(const std::vector<MixtureParams>& ps) {
  json a = json::array();
  for (const auto& p : ps) a.push_back(to_json(p));
  return a;
}

/// A built-in relationship name, or {"pedigree": path, "members": [...]}.
inline Relationship relationship_from_json(const json& j, const std::filesystem::path& base) {
  if (j.is_string()) return named_relationship(j.get<std::string>());
  const std::string path = detail::resolve(base, detail::get_field<std::string>(j, "pedigree", "relationship"));
  auto members = detail::get_field<std::vector<std::string>>(j, "members", "relationship");
  Relationship r{detail::get_or<std::string>(j, "name", path), members, Pedigree::load(path), std::nullopt};
  for (const auto& m : members)
    if (!r.pedigree->contains(m)) throw ValidationError("relationship member '" + m + "' is not in " + path);
  return r;
}

/// Contributors are "unrelated", {"unrelated": label}, {"related": id} or
/// {"known": id, "genotypes": path}; typed maps ids to genotype files.
inline Hypothesis hypothesis_from_json(const json& j, const std::filesystem::path& base) {
  Hypothesis h;
  h.name = detail::get_or<std::string>(j, "name", "hypothesis");
  const std::string where = "hypothesis '" + h.name + "'";
  if (j.contains("relationship")) h.relationship = relationship_from_json(j.at("relationship"), base).distribution();
  const json& cs = j.contains("contributors") ? j.at("contributors") : json();
  if (!cs.is_array() || cs.empty()) throw ParseError(where + ": 'contributors' must be a non-empty array");
  for (const auto& c : cs) {
    if (c == "unrelated") {
      h.contributors.push_back(ContributorSlot::unrelated());
    } else if (c.is_object() && c.contains("unrelated")) {
      h.contributors.push_back(ContributorSlot::unrelated(detail::get_field<std::string>(c, "unrelated", where)));
    } else if (c.is_object() && c.contains("related")) {
      h.contributors.push_back(ContributorSlot::related(detail::get_field<std::string>(c, "related", where)));
    } else if (c.is_object() && c.contains("known")) {
      h.contributors.push_back(ContributorSlot::known(
          detail::get_field<std::string>(c, "known", where),
          GenotypeProfile::load(detail::resolve(base, detail::get_field<std::string>(c, "genotypes", where)))));
    } else {
      throw ParseError(where + ": unrecognised contributor " + c.dump());
    }
  }
  if (j.contains("typed")) {
    if (!j.at("typed").is_object()) throw ParseError(where + ": 'typed' must map ids to genotype files");
    for (const auto& [id, path] : j.at("typed").items())
      h.typed[id] = GenotypeProfile::load(detail::resolve(base, path.get<std::string>()));
  }
  if (j.contains("zero_phi"))
    for (const auto& per_epg : j.at("zero_phi")) h.zero_phi.push_back(per_epg.get<std::set<std::size_t>>());
  h.validate();
  return h;
}

inline Hypothesis load_hypothesis(const std::string& path) {
  return hypothesis_from_json(load_json(path), std::filesystem::path(path).parent_path());
}

namespace detail {

inline StudyHypothesis study_hypothesis_from_json(const json& j, const std::filesystem::path& base) {
  StudyHypothesis h;
  h.name = get_or<std::string>(j, "name", "hypothesis");
  if (j.contains("relationship")) h.relationship = relationship_from_json(j.at("relationship"), base);
  h.contributors = get_field<std::vector<std::string>>(j, "contributors", "hypothesis '" + h.name + "'");
  return h;
}

} // namespace detail

/// Either {"preset": "two-way" | "incest-rape" | "four-sibs", ...} or a
/// full description with "truths" and "tests".
inline StudyConfig study_from_json(const json& j, const std::filesystem::path& base) {
  using detail::get_or;
  const AlleleFrequencyTable freqs = j.contains("freqs")
                                         ? AlleleFrequencyTable::load(detail::resolve(base, j.at("freqs").get<std::string>()))
                                         : synthetic_frequencies(10);
  const auto seed = get_or<std::uint64_t>(j, "seed", 1);
  StudyConfig cfg;
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "two-way") {
      const std::vector<std::string> rels{"parent-child", "sibs", "half-sibs", "cousins", "half-cousins"};
      cfg = two_way_study(freqs, get_or(j, "truths", rels), get_or(j, "hypotheses", rels), seed);
    } else if (preset == "incest-rape") {
      cfg = incest_rape_study(freqs, seed);
    } else if (preset == "four-sibs") {
      cfg = four_sibs_study(freqs, seed);
    } else {
      throw ValidationError("unknown study preset '" + preset + "'");
    }
  } else {
    cfg.freqs = freqs;
    cfg.seed = seed;
    for (const auto& t : j.value("truths", json::array())) {
      StudyTruth truth;
      truth.name = detail::get_field<std::string>(t, "name", "truth");
      truth.relationship = relationship_from_json(t.at("relationship"), base);
      truth.contributors = detail::get_field<std::vector<std::string>>(t, "contributors", "truth " + truth.name);
      truth.cells = detail::get_field<std::vector<double>>(t, "cells", "truth " + truth.name);
      cfg.truths.push_back(std::move(truth));
    }
    for (const auto& t : j.value("tests", json::array())) {
      StudyTest test;
      test.name = detail::get_field<std::string>(t, "name", "test");
      test.hp = detail::study_hypothesis_from_json(t.at("hp"), base);
      if (t.contains("h0")) test.h0 = detail::study_hypothesis_from_json(t.at("h0"), base);
      test.typed = get_or<std::vector<std::string>>(t, "typed", {});
      cfg.tests.push_back(std::move(test));
    }
  }
  cfg.name = get_or(j, "name", cfg.name);
  if (j.contains("replicates")) {
    cfg.genotype_replicates = get_or(j.at("replicates"), "genotype", cfg.genotype_replicates);
    cfg.epg_replicates = get_or(j.at("replicates"), "epg", cfg.epg_replicates);
  }
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    cfg.synth.rho_per_cell = get_or(s, "rho_per_cell", cfg.synth.rho_per_cell);
    cfg.synth.eta = get_or(s, "eta", cfg.synth.eta);
    cfg.synth.xi = get_or(s, "xi", cfg.synth.xi);
    cfg.synth.threshold = get_or(s, "threshold", cfg.synth.threshold);
  }
  if (j.contains("mle")) {
    cfg.mle.starts = get_or(j.at("mle"), "starts", cfg.mle.starts);
    cfg.mle.restarts = get_or(j.at("mle"), "restarts", cfg.mle.restarts);
  }
  cfg.validate();
  return cfg;
}

inline StudyConfig load_study(const std::string& path) {
  return study_from_json(load_json(path), std::filesystem::path(path).parent_path());
}

inline json to_json(const LikelihoodResult& r) {
  json markers = json::array();
  for (const auto& m : r.markers) {
    json x = {{"marker", m.marker}, {"loglik", json_number(m.loglik)},
              {"log_typed_probability", json_number(m.log_typed_probability)}};
    if (!m.diagnostic.empty()) x["diagnostic"] = m.diagnostic;
    markers.push_back(std::move(x));
  }
  json out = {{"loglik", json_number(r.loglik)},
              {"log10_likelihood", json_number(r.loglik / std::numbers::ln10)},
              {"log_typed_probability", json_number(r.log_typed_probability)},
              {"markers", std::move(markers)}};
  if (r.impossible_marker) {
    out["impossible_marker"] = *r.impossible_marker;
    out["diagnostic"] = r.diagnostic;
  }
  return out;
}

inline json to_json(const MleResult& r) {
  json starts = json::array();
  for (double l : r.start_logliks) starts.push_back(json_number(l));
  return {{"params", to_json(r.params)},     {"loglik", json_number(r.loglik)}, {"start_logliks", starts},
          {"evaluations", r.evaluations},     {"converged", r.converged},        {"likelihood", to_json(r.detail)}};
}

inline json to_json(const LRReport& r) {
  json markers = json::array();
  for (const auto& m : r.markers)
    markers.push_back({{"marker", m.marker},
                       {"loglik_p", json_number(m.loglik_p)},
                       {"loglik_0", json_number(m.loglik_0)},
                       {"log10_lr", json_number(m.log10_lr)},
                       {"status", status_name(m.status)}});
  json out = {{"hp", r.hp_name},
              {"h0", r.h0_name},
              {"policy", policy_name(r.policy)},
              {"log10_lr", json_number(r.log10_lr)},
              {"status", status_name(r.status)},
              {"loglik_p", json_number(r.loglik_p)},
              {"loglik_0", json_number(r.loglik_0)},
              {"params_p", to_json(r.params_p)},
              {"params_0", to_json(r.params_0)},
              {"markers", std::move(markers)},
              {"seconds", r.seconds}};
  if (!r.diagnostic.empty()) out["diagnostic"] = r.diagnostic;
  return out;
}

/// Marker-wise table: marker, log10 LR, then the overall value.
inline std::string lr_table_csv(const LRReport& r) {
  std::string out = "marker,log10_lr,status\n";
  for (const auto& m : r.markers)
    out += m.marker + "," + StudyResult::format_value(m.log10_lr) + "," + status_name(m.status) + "\n";
  out += "overall," + StudyResult::format_value(r.log10_lr) + "," + status_name(r.status) + "\n";
  return out;
}

} // namespace pedmix
