#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pedmix/dyadic.hpp"
#include "pedmix/error.hpp"

namespace pedmix {

enum class Sex { Unknown, Male, Female };

struct Individual {
  std::string id;
  std::optional<std::size_t> father;
  std::optional<std::size_t> mother;
  Sex sex = Sex::Unknown;

  bool is_founder() const noexcept { return !father.has_value(); }
};

/// One row of a pedigree table before validation. Empty parent strings mean
/// "not in the pedigree".
struct PedigreeRow {
  std::string id;
  std::string father;
  std::string mother;
  Sex sex = Sex::Unknown;
};

/// Immutable, validated pedigree.
///
/// Invariants: ids are unique, every parent id resolves, each individual has
/// both parents or neither, and parent links are acyclic. Individuals keep
/// their input order; `topological_order()` lists parents before children.
class Pedigree {
public:
  Pedigree() = default;

  static Pedigree from_rows(const std::vector<PedigreeRow>& rows) {
    Pedigree ped;
    for (const auto& row : rows) {
      if (row.id.empty()) throw ValidationError("pedigree row with empty id");
      if (ped.index_.contains(row.id)) throw ValidationError("duplicate individual id '" + row.id + "'");
      ped.index_.emplace(row.id, ped.people_.size());
      ped.people_.push_back(Individual{row.id, std::nullopt, std::nullopt, row.sex});
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.father.empty() != row.mother.empty())
        throw ValidationError("individual '" + row.id +
                              "' has exactly one parent; both or neither must be given");
      if (row.father.empty()) continue;
      for (const std::string* parent : {&row.father, &row.mother}) {
        if (!ped.index_.contains(*parent))
          throw ValidationError("unknown parent '" + *parent + "' of individual '" + row.id + "'");
      }
      ped.people_[i].father = ped.index_.at(row.father);
      ped.people_[i].mother = ped.index_.at(row.mother);
    }
    ped.build_derived();
    return ped;
  }

  /// Parse a whitespace table `id father mother [sex]`. `0` or `*` marks an
  /// absent parent; `#` starts a comment.
  static Pedigree parse(std::string_view text) {
    std::vector<PedigreeRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      std::vector<std::string> tok;
      for (std::string t; fields >> t;) tok.push_back(t);
      if (tok.empty()) continue;
      if (tok.size() < 3 || tok.size() > 4)
        throw ParseError("pedigree line " + std::to_string(line_no) +
                         ": expected `id father mother [sex]`");
      auto parent = [](const std::string& s) { return (s == "0" || s == "*") ? std::string() : s; };
      PedigreeRow row{tok[0], parent(tok[1]), parent(tok[2]), Sex::Unknown};
      if (tok.size() == 4) row.sex = parse_sex(tok[3], line_no);
      rows.push_back(std::move(row));
    }
    return from_rows(rows);
  }

  static Pedigree load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open pedigree file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  std::string to_text() const {
    std::string out;
    for (const auto& p : people_) {
      out += p.id;
      out += ' ';
      out += p.father ? people_[*p.father].id : "*";
      out += ' ';
      out += p.mother ? people_[*p.mother].id : "*";
      if (p.sex != Sex::Unknown) out += p.sex == Sex::Male ? " M" : " F";
      out += '\n';
    }
    return out;
  }

  std::size_t size() const noexcept { return people_.size(); }
  const Individual& operator[](std::size_t i) const { return people_.at(i); }
  const std::vector<Individual>& individuals() const noexcept { return people_; }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t at(std::string_view id) const {
    auto i = find(id);
    if (!i) throw ValidationError("unknown individual '" + std::string(id) + "'");
    return *i;
  }

  bool contains(std::string_view id) const { return find(id).has_value(); }

  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  const std::vector<std::size_t>& topological_order() const noexcept { return topo_; }
  std::size_t topological_position(std::size_t i) const { return topo_pos_.at(i); }

  std::vector<std::size_t> founders() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < people_.size(); ++i)
      if (people_[i].is_founder()) out.push_back(i);
    return out;
  }

  /// The given individuals plus all of their ancestors, in topological order.
  std::vector<std::size_t> ancestral_closure(std::span<const std::size_t> seeds) const {
    std::vector<char> keep(people_.size(), 0);
    std::vector<std::size_t> stack(seeds.begin(), seeds.end());
    while (!stack.empty()) {
      std::size_t i = stack.back();
      stack.pop_back();
      if (keep.at(i)) continue;
      keep[i] = 1;
      if (people_[i].father) {
        stack.push_back(*people_[i].father);
        stack.push_back(*people_[i].mother);
      }
    }
    std::vector<std::size_t> out;
    for (std::size_t i : topo_)
      if (keep[i]) out.push_back(i);
    return out;
  }

  /// Kinship coefficient: probability that one gene drawn at random from each
  /// of `a` and `b` is identical by descent. Computed by the classical
  /// recursion over the later-born individual's parents.
  Dyadic kinship(std::size_t a, std::size_t b) const {
    std::map<std::pair<std::size_t, std::size_t>, Dyadic> memo;
    return kinship_rec(a, b, memo);
  }

  Dyadic kinship(std::string_view a, std::string_view b) const { return kinship(at(a), at(b)); }

  /// Matings between related parents, i.e. pedigree loops created by
  /// inbreeding. Each pair is (father, mother), listed once.
  std::vector<std::pair<std::size_t, std::size_t>> inbred_matings() const {
    std::map<std::pair<std::size_t, std::size_t>, Dyadic> memo;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& p : people_) {
      if (p.is_founder()) continue;
      std::pair<std::size_t, std::size_t> couple{*p.father, *p.mother};
      if (std::find(out.begin(), out.end(), couple) != out.end()) continue;
      if (!kinship_rec(couple.first, couple.second, memo).is_zero()) out.push_back(couple);
    }
    return out;
  }

private:
  static Sex parse_sex(const std::string& s, int line_no) {
    if (s == "M" || s == "m" || s == "1" || s == "male") return Sex::Male;
    if (s == "F" || s == "f" || s == "2" || s == "female") return Sex::Female;
    if (s == "U" || s == "u" || s == "0" || s == "?" || s == "*") return Sex::Unknown;
    throw ParseError("pedigree line " + std::to_string(line_no) + ": unrecognised sex '" + s + "'");
  }

  void build_derived() {
    const std::size_t n = people_.size();
    children_.assign(n, {});
    std::vector<int> pending(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (people_[i].is_founder()) continue;
      children_[*people_[i].father].push_back(i);
      if (*people_[i].mother != *people_[i].father) children_[*people_[i].mother].push_back(i);
      pending[i] = (*people_[i].mother != *people_[i].father) ? 2 : 1;
    }
    // Kahn's algorithm, stable with respect to input order.
    topo_.clear();
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
      if (pending[i] == 0) ready.push_back(i);
    std::size_t head = 0;
    while (head < ready.size()) {
      std::size_t i = ready[head++];
      topo_.push_back(i);
      for (std::size_t c : children_[i])
        if (--pending[c] == 0) ready.push_back(c);
    }
    if (topo_.size() != n) {
      for (std::size_t i = 0; i < n; ++i)
        if (pending[i] > 0)
          throw ValidationError("pedigree contains a cycle through individual '" + people_[i].id + "'");
    }
    topo_pos_.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) topo_pos_[topo_[k]] = k;
  }

  Dyadic kinship_rec(std::size_t a, std::size_t b,
                     std::map<std::pair<std::size_t, std::size_t>, Dyadic>& memo) const {
    if (topo_pos_[a] > topo_pos_[b]) std::swap(a, b);
    auto key = std::make_pair(a, b);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    Dyadic value;
    const Individual& pb = people_[b];
    if (a == b) {
      value = pb.is_founder() ? Dyadic::inverse_pow2(1)
                              : (Dyadic::one() + kinship_rec(*pb.father, *pb.mother, memo)).halved();
    } else if (!pb.is_founder()) {
      // b is not an ancestor of a, so recurse through b's parents.
      value = (kinship_rec(a, *pb.father, memo) + kinship_rec(a, *pb.mother, memo)).halved();
    }
    memo.emplace(key, value);
    return value;
  }

  std::vector<Individual> people_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
  std::vector<std::size_t> topo_pos_;
};

} // namespace pedmix
