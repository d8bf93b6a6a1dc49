#pragma once

#include "semplan/util.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace semplan {

enum class ApKind { Region, NearLandmark, UncertaintyBelow, NearLandmarkClass, Abstract };

/// Atomic predicate over robot/map state. Robots are 0-based internally
/// (mission text uses 1-based indices); landmarks, regions and classes are
/// referenced by name and resolved against a scenario later.
struct AtomicPredicate {
  ApKind kind = ApKind::Region;
  int robot = -1;  // -1 for UncertaintyBelow/Abstract (not tied to a robot)
  std::string region;  // Region name; also holds the name of Abstract atoms
  std::string landmark;
  std::string cls;
  double radius = 0.0;
  double delta = 0.0;

  static AtomicPredicate abstract(const std::string& name) {
    AtomicPredicate ap;
    ap.kind = ApKind::Abstract;
    ap.region = name;
    return ap;
  }

  bool operator==(const AtomicPredicate& o) const;
  std::string to_string() const;
  /// True for predicates that pin a robot to a location (Region, NearLandmark,
  /// NearLandmarkClass).
  bool located() const {
    return kind == ApKind::Region || kind == ApKind::NearLandmark ||
           kind == ApKind::NearLandmarkClass;
  }
};

/// Interning table for atomic predicates. Ids index into the table and double
/// as bit positions in Valuation masks, which caps the universe at 64 atoms.
class ApUniverse {
 public:
  int intern(const AtomicPredicate& ap);
  int size() const { return static_cast<int>(aps_.size()); }
  const AtomicPredicate& ap(int id) const { return aps_[static_cast<std::size_t>(id)]; }
  const std::vector<AtomicPredicate>& all() const { return aps_; }

 private:
  std::vector<AtomicPredicate> aps_;
};

/// Set of true atomic predicates, as a bitmask over ApUniverse ids.
using Valuation = std::uint64_t;

inline bool val_contains(Valuation v, int ap) { return (v >> ap) & 1u; }

using FormulaId = std::int32_t;

enum class FOp : std::uint8_t {
  False,
  True,
  Atom,
  NotAtom,
  And,
  Or,
  Next,
  Until,
  Eventually,
};

struct FNode {
  FOp op = FOp::False;
  int ap = -1;
  std::vector<FormulaId> kids;
};

/// Hash-consed store of formulas in negation normal form (negation only on
/// atoms). Construction canonicalizes: And/Or children are flattened, sorted
/// and deduplicated, constants folded, complementary literal pairs collapsed,
/// absorption applied, and the temporal identities X true = true,
/// true U f = F f, f U true = true, F true = true (etc.) rewritten. Equal
/// canonical formulas therefore share one id, which is what makes DFA states
/// out of progressions.
class FormulaStore {
 public:
  FormulaStore();

  FormulaId f_false() const { return 0; }
  FormulaId f_true() const { return 1; }
  FormulaId atom(int ap);
  FormulaId not_atom(int ap);
  FormulaId conj(std::vector<FormulaId> kids);
  FormulaId disj(std::vector<FormulaId> kids);
  FormulaId next(FormulaId f);
  FormulaId until(FormulaId lhs, FormulaId rhs);
  FormulaId eventually(FormulaId f);

  const FNode& node(FormulaId id) const { return nodes_[static_cast<std::size_t>(id)]; }

  /// NNF negation of a pure Boolean formula (literals, And, Or, constants).
  /// Throws on temporal operators.
  FormulaId negate_bool(FormulaId f);

  bool is_boolean(FormulaId f) const;

  /// Evaluates a pure Boolean formula under a valuation.
  bool eval_bool(FormulaId f, Valuation v) const;

  /// One-step formula progression: the residual obligation after observing v.
  FormulaId progress(FormulaId f, Valuation v);

  /// Sorted ids of atoms appearing in f.
  std::vector<int> atoms_of(FormulaId f) const;
  /// Bitmask of atoms appearing in f.
  Valuation atom_mask(FormulaId f) const;

  std::string to_string(FormulaId f, const ApUniverse& u) const;

 private:
  FormulaId intern(FNode n);

  std::vector<FNode> nodes_;
  std::unordered_map<std::uint64_t, std::vector<FormulaId>> index_;
  std::unordered_map<int, FormulaId> atom_ids_;
  std::unordered_map<int, FormulaId> not_atom_ids_;
};

/// Mission = co-safe core + always-invariant Boolean clauses + terminal
/// Boolean clause (the "reach and stay" condition appended behind the core).
struct Mission {
  FormulaId core = 1;
  std::vector<FormulaId> invariants;
  FormulaId terminal = 1;
};

}  // namespace semplan
