#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pedmix/alleles.hpp"
#include "pedmix/error.hpp"
#include "pedmix/ibd.hpp"

namespace pedmix {

/// One contributor to the mixture.
struct ContributorSlot {
  enum class Kind { Known, Related, Unrelated };

  Kind kind = Kind::Unrelated;
  /// Member id of the relationship for Related slots; a label otherwise.
  std::string id;
  /// Genotypes of a Known contributor.
  GenotypeProfile profile;

  static ContributorSlot known(std::string id, GenotypeProfile profile) {
    return {Kind::Known, std::move(id), std::move(profile)};
  }
  static ContributorSlot related(std::string id) { return {Kind::Related, std::move(id), {}}; }
  static ContributorSlot unrelated(std::string id = "") { return {Kind::Unrelated, std::move(id), {}}; }

  friend bool operator==(const ContributorSlot&, const ContributorSlot&) = default;
};

inline const char* kind_name(ContributorSlot::Kind k) {
  switch (k) {
  case ContributorSlot::Kind::Known: return "known";
  case ContributorSlot::Kind::Related: return "related";
  case ContributorSlot::Kind::Unrelated: return "unrelated";
  }
  return "?";
}

/// A hypothesis about who contributed to the mixture. Related contributors
/// and typed relatives are tied together by `relationship`; typed
/// individuals who are also contributors are treated as known contributors.
struct Hypothesis {
  std::string name;
  std::vector<ContributorSlot> contributors;
  std::optional<IBDPatternDistribution> relationship;
  std::map<std::string, GenotypeProfile> typed;
  /// Per EPG, contributor indices whose mixture proportion is held at zero
  /// when fitting. Missing entries mean no constraint.
  std::vector<std::set<std::size_t>> zero_phi;

  std::size_t size() const noexcept { return contributors.size(); }

  void validate() const {
    if (contributors.empty()) throw ValidationError("hypothesis '" + name + "' has no contributors");
    std::set<std::string> related;
    for (const auto& s : contributors) {
      if (s.kind != ContributorSlot::Kind::Related) continue;
      if (!relationship)
        throw ValidationError("hypothesis '" + name + "' has related contributor '" + s.id +
                              "' but no relationship");
      if (!relationship->column_of(s.id))
        throw ValidationError("related contributor '" + s.id + "' is not a member of the relationship");
      if (!related.insert(s.id).second)
        throw ValidationError("related contributor '" + s.id + "' appears twice in hypothesis '" + name + "'");
    }
    for (const auto& z : zero_phi)
      for (std::size_t i : z)
        if (i >= contributors.size())
          throw ValidationError("zero-phi constraint refers to contributor " + std::to_string(i) +
                                " of hypothesis '" + name + "'");
  }

  const std::set<std::size_t>& zero_phi_for(std::size_t epg) const {
    static const std::set<std::size_t> none;
    return epg < zero_phi.size() ? zero_phi[epg] : none;
  }

  /// True when the related contributors and typed relatives carry any
  /// non-trivial IBD structure.
  bool has_relationship_structure() const {
    if (!relationship) return false;
    std::vector<std::string> ids;
    for (const auto& s : contributors)
      if (s.kind == ContributorSlot::Kind::Related) ids.push_back(s.id);
    for (const auto& [id, p] : typed)
      if (relationship->column_of(id) && std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    if (ids.size() < 1) return false;
    return !marginalize(*relationship, ids).is_trivial();
  }
};

} // namespace pedmix
