#pragma once

#include "semplan/formula.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

namespace semplan {

class DfaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DfaTransition {
  int target = -1;
  FormulaId guard = 0;  // Boolean formula over the AP universe
};

struct DfaState {
  FormulaId formula = 0;  // residual core obligation; unused for the terminal state
  bool is_terminal = false;
};

/// Deterministic finite automaton over symbolic Boolean guards. States are
/// interned canonical progressions of the core formula, plus one fresh
/// accepting terminal state reached from the discharged core under the
/// terminal clause. Outgoing guards of a state are pairwise unsatisfiable;
/// a symbol that enables no guard is a mission violation (there is no sink).
struct Dfa {
  int q0 = 0;
  int qF = 0;
  std::vector<DfaState> states;
  std::vector<std::vector<DfaTransition>> trans;  // per source state

  const std::vector<DfaTransition>& out(int q) const {
    return trans[static_cast<std::size_t>(q)];
  }
  /// Target of the unique enabled transition under v, or nullopt (violation).
  std::optional<int> step(const FormulaStore& store, int q, Valuation v) const;
};

/// Builds the DFA for a mission. Invariant clauses are conjoined into every
/// guard; the terminal state is appended last (qF). Throws DfaError if more
/// than `state_cap` states would be created.
Dfa build_dfa(FormulaStore& store, const Mission& mission, int state_cap = 10000);

/// Runs the word through the DFA; true iff every symbol enables a transition
/// and the run ends exactly in qF.
bool accepts(const Dfa& dfa, const FormulaStore& store, const std::vector<Valuation>& word);

/// Conjunction of positive (pos) and negated (neg) atoms, as bitmasks.
struct DnfTerm {
  Valuation pos = 0;
  Valuation neg = 0;
};

struct DnfResult {
  std::vector<DnfTerm> terms;
  bool truncated = false;  // enumeration hit the cap; terms is a valid prefix
};

/// Disjunctive normal form of a Boolean formula. Contradictory terms are
/// dropped. Enumeration stops at `cap` terms with truncated=true.
DnfResult dnf_terms(const FormulaStore& store, FormulaId f, std::size_t cap = 4096);

/// A term is feasible when no robot is pinned to two different locations by
/// its positive literals.
bool term_feasible(const DnfTerm& t, const ApUniverse& universe);

inline constexpr int kDfaUnreachable = std::numeric_limits<int>::max();

/// DFA with physically infeasible transitions removed and hop distances
/// precomputed. A transition is removed iff every satisfying assignment of
/// its guard needs some robot at two different locations at once (two
/// regions, two landmarks, or one of each). Guards whose DNF exceeds the
/// enumeration cap are kept conservatively.
struct PrunedDfa {
  const Dfa* dfa = nullptr;
  std::vector<std::vector<DfaTransition>> trans;
  std::vector<std::vector<int>> dist;  // hop counts; kDfaUnreachable if none
  bool disconnected = false;           // no pruned path q0 -> qF

  int distance(int from, int to) const {
    return dist[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
  }
  const std::vector<DfaTransition>& out(int q) const {
    return trans[static_cast<std::size_t>(q)];
  }
  /// Guard of the kept transition from->to, if present.
  std::optional<FormulaId> guard(int from, int to) const;
};

PrunedDfa prune(const Dfa& dfa, const FormulaStore& store, const ApUniverse& universe);

/// Same structure with no transition removed (the fallback when pruning
/// disconnects q0 from qF).
PrunedDfa unpruned(const Dfa& dfa);

/// Graphviz dot rendering (states labeled with their residual formulas,
/// edges with their guards).
void to_dot(const Dfa& dfa, const FormulaStore& store, const ApUniverse& universe,
            std::ostream& os);

}  // namespace semplan
