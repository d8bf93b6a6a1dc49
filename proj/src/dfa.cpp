#include "semplan/dfa.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

namespace semplan {

std::optional<int> Dfa::step(const FormulaStore& store, int q, Valuation v) const {
  for (const DfaTransition& t : out(q))
    if (store.eval_bool(t.guard, v)) return t.target;
  return std::nullopt;
}

namespace {

using SuccList = std::vector<std::pair<FormulaId, FormulaId>>;  // (guard, successor)

// Cap on the symbolic successor lists while folding; generous, only meant to
// stop pathological Boolean structure.
constexpr std::size_t kPairCap = 1 << 16;

class SuccBuilder {
 public:
  explicit SuccBuilder(FormulaStore& store) : store_(store) {}

  // Guards in the result are pairwise unsatisfiable and cover all valuations
  // (successor `false` encodes violation); merged by successor.
  const SuccList& successors(FormulaId f) {
    auto it = memo_.find(f);
    if (it != memo_.end()) return it->second;
    SuccList out = compute(f);
    return memo_.emplace(f, std::move(out)).first->second;
  }

 private:
  SuccList compute(FormulaId f) {
    const FNode n = store_.node(f);
    switch (n.op) {
      case FOp::False:
        return {{store_.f_true(), store_.f_false()}};
      case FOp::True:
        return {{store_.f_true(), store_.f_true()}};
      case FOp::Atom:
        return {{store_.atom(n.ap), store_.f_true()},
                {store_.not_atom(n.ap), store_.f_false()}};
      case FOp::NotAtom:
        return {{store_.not_atom(n.ap), store_.f_true()},
                {store_.atom(n.ap), store_.f_false()}};
      case FOp::Next:
        return {{store_.f_true(), n.kids[0]}};
      case FOp::And:
      case FOp::Or: {
        SuccList acc = {{store_.f_true(),
                         n.op == FOp::And ? store_.f_true() : store_.f_false()}};
        for (FormulaId k : n.kids) {
          acc = combine(acc, successors(k), n.op == FOp::And);
        }
        return acc;
      }
      case FOp::Until: {
        const SuccList a = successors(n.kids[0]);
        const SuccList b = successors(n.kids[1]);
        SuccList out;
        for (const auto& [gb, sb] : b)
          for (const auto& [ga, sa] : a) {
            const FormulaId g = store_.conj({ga, gb});
            if (g == store_.f_false()) continue;
            const FormulaId s = store_.disj({sb, store_.conj({sa, f})});
            out.emplace_back(g, s);
          }
        return merged(std::move(out));
      }
      case FOp::Eventually: {
        SuccList out;
        for (const auto& [g, s] : successors(n.kids[0]))
          out.emplace_back(g, store_.disj({s, f}));
        return merged(std::move(out));
      }
    }
    return {};
  }

  SuccList combine(const SuccList& a, const SuccList& b, bool conjunction) {
    SuccList out;
    for (const auto& [ga, sa] : a)
      for (const auto& [gb, sb] : b) {
        const FormulaId g = store_.conj({ga, gb});
        if (g == store_.f_false()) continue;
        const FormulaId s =
            conjunction ? store_.conj({sa, sb}) : store_.disj({sa, sb});
        out.emplace_back(g, s);
        if (out.size() > kPairCap)
          throw DfaError("guard enumeration exploded while building the automaton");
      }
    return merged(std::move(out));
  }

  SuccList merged(SuccList in) {
    std::map<FormulaId, std::vector<FormulaId>> by_succ;
    for (auto& [g, s] : in) by_succ[s].push_back(g);
    SuccList out;
    out.reserve(by_succ.size());
    for (auto& [s, gs] : by_succ) out.emplace_back(store_.disj(std::move(gs)), s);
    if (out.size() > kPairCap)
      throw DfaError("guard enumeration exploded while building the automaton");
    return out;
  }

  FormulaStore& store_;
  std::unordered_map<FormulaId, SuccList> memo_;
};

}  // namespace

Dfa build_dfa(FormulaStore& store, const Mission& mission, int state_cap) {
  Dfa dfa;
  const FormulaId inv = store.conj(std::vector<FormulaId>(mission.invariants));
  SuccBuilder sb(store);

  std::unordered_map<FormulaId, int> state_of;
  std::deque<FormulaId> queue;
  auto intern_state = [&](FormulaId f) {
    auto it = state_of.find(f);
    if (it != state_of.end()) return it->second;
    const int idx = static_cast<int>(dfa.states.size());
    if (idx >= state_cap)
      throw DfaError("automaton exceeds the state cap (" + std::to_string(state_cap) + ")");
    dfa.states.push_back(DfaState{f, false});
    dfa.trans.emplace_back();
    state_of.emplace(f, idx);
    queue.push_back(f);
    return idx;
  };

  dfa.q0 = intern_state(mission.core);

  // Process reachable residuals; the terminal state is appended afterwards so
  // its transitions can point at a fixed index.
  std::vector<int> discharged_states;  // states whose formula is `true`
  while (!queue.empty()) {
    const FormulaId f = queue.front();
    queue.pop_front();
    const int src = state_of.at(f);
    if (f == store.f_true()) {
      discharged_states.push_back(src);
      continue;  // handled after qF exists
    }
    if (f == store.f_false()) continue;  // unreachable in practice; no way out
    for (const auto& [g, s] : sb.successors(f)) {
      if (s == store.f_false()) continue;  // violation: no transition
      const FormulaId guard = store.conj({g, inv});
      if (guard == store.f_false()) continue;
      const int dst = intern_state(s);
      dfa.trans[static_cast<std::size_t>(src)].push_back(DfaTransition{dst, guard});
    }
  }

  const int qT = static_cast<int>(dfa.states.size());
  dfa.states.push_back(DfaState{store.f_true(), true});
  dfa.trans.emplace_back();
  dfa.qF = qT;

  for (int src : discharged_states) {
    const FormulaId hop = store.conj({mission.terminal, inv});
    if (hop != store.f_false())
      dfa.trans[static_cast<std::size_t>(src)].push_back(DfaTransition{qT, hop});
    const FormulaId stay = store.conj({store.negate_bool(mission.terminal), inv});
    if (stay != store.f_false())
      dfa.trans[static_cast<std::size_t>(src)].push_back(DfaTransition{src, stay});
  }
  return dfa;
}

bool accepts(const Dfa& dfa, const FormulaStore& store, const std::vector<Valuation>& word) {
  int q = dfa.q0;
  for (Valuation v : word) {
    const auto next = dfa.step(store, q, v);
    if (!next) return false;
    q = *next;
  }
  return q == dfa.qF;
}

DnfResult dnf_terms(const FormulaStore& store, FormulaId f, std::size_t cap) {
  DnfResult res;
  const FNode& n = store.node(f);
  switch (n.op) {
    case FOp::False:
      return res;
    case FOp::True:
      res.terms.push_back(DnfTerm{});
      return res;
    case FOp::Atom:
      res.terms.push_back(DnfTerm{Valuation{1} << n.ap, 0});
      return res;
    case FOp::NotAtom:
      res.terms.push_back(DnfTerm{0, Valuation{1} << n.ap});
      return res;
    case FOp::Or: {
      for (FormulaId k : n.kids) {
        DnfResult sub = dnf_terms(store, k, cap);
        res.truncated = res.truncated || sub.truncated;
        for (const DnfTerm& t : sub.terms) {
          if (res.terms.size() >= cap) {
            res.truncated = true;
            return res;
          }
          res.terms.push_back(t);
        }
      }
      return res;
    }
    case FOp::And: {
      res.terms.push_back(DnfTerm{});
      for (FormulaId k : n.kids) {
        DnfResult sub = dnf_terms(store, k, cap);
        res.truncated = res.truncated || sub.truncated;
        std::vector<DnfTerm> next;
        for (const DnfTerm& a : res.terms)
          for (const DnfTerm& b : sub.terms) {
            const DnfTerm t{a.pos | b.pos, a.neg | b.neg};
            if ((t.pos & t.neg) != 0) continue;  // contradictory
            if (next.size() >= cap) {
              res.truncated = true;
              res.terms = std::move(next);
              return res;
            }
            next.push_back(t);
          }
        res.terms = std::move(next);
      }
      return res;
    }
    default:
      throw std::invalid_argument("dnf_terms: formula is not purely Boolean");
  }
}

// A robot may not be required at two different locations at once.
bool term_feasible(const DnfTerm& t, const ApUniverse& universe) {
  std::map<int, std::pair<std::set<std::string>, std::set<std::string>>> spots;
  for (int id = 0; id < universe.size(); ++id) {
    if (!val_contains(t.pos, id)) continue;
    const AtomicPredicate& ap = universe.ap(id);
    if (!ap.located()) continue;
    auto& [regions, landmarks] = spots[ap.robot];
    if (ap.kind == ApKind::Region)
      regions.insert(ap.region);
    else
      landmarks.insert(ap.landmark);
    if (regions.size() + landmarks.size() > 1) return false;
  }
  return true;
}

namespace {

std::vector<std::vector<int>> hop_distances(const std::vector<std::vector<DfaTransition>>& trans) {
  const int n = static_cast<int>(trans.size());
  std::vector<std::vector<int>> dist(static_cast<std::size_t>(n),
                                     std::vector<int>(static_cast<std::size_t>(n), kDfaUnreachable));
  for (int s = 0; s < n; ++s) {
    auto& d = dist[static_cast<std::size_t>(s)];
    d[static_cast<std::size_t>(s)] = 0;
    std::deque<int> q{s};
    while (!q.empty()) {
      const int u = q.front();
      q.pop_front();
      for (const DfaTransition& t : trans[static_cast<std::size_t>(u)]) {
        auto& slot = d[static_cast<std::size_t>(t.target)];
        if (slot == kDfaUnreachable) {
          slot = d[static_cast<std::size_t>(u)] + 1;
          q.push_back(t.target);
        }
      }
    }
  }
  return dist;
}

}  // namespace

std::optional<FormulaId> PrunedDfa::guard(int from, int to) const {
  for (const DfaTransition& t : out(from))
    if (t.target == to) return t.guard;
  return std::nullopt;
}

PrunedDfa prune(const Dfa& dfa, const FormulaStore& store, const ApUniverse& universe) {
  PrunedDfa p;
  p.dfa = &dfa;
  p.trans.resize(dfa.trans.size());
  for (std::size_t s = 0; s < dfa.trans.size(); ++s) {
    for (const DfaTransition& t : dfa.trans[s]) {
      const DnfResult d = dnf_terms(store, t.guard);
      bool keep = d.truncated;
      if (!keep)
        for (const DnfTerm& term : d.terms)
          if (term_feasible(term, universe)) {
            keep = true;
            break;
          }
      if (keep) p.trans[s].push_back(t);
    }
  }
  p.dist = hop_distances(p.trans);
  p.disconnected = p.distance(dfa.q0, dfa.qF) == kDfaUnreachable;
  return p;
}

PrunedDfa unpruned(const Dfa& dfa) {
  PrunedDfa p;
  p.dfa = &dfa;
  p.trans = dfa.trans;
  p.dist = hop_distances(p.trans);
  p.disconnected = p.distance(dfa.q0, dfa.qF) == kDfaUnreachable;
  return p;
}

void to_dot(const Dfa& dfa, const FormulaStore& store, const ApUniverse& universe,
            std::ostream& os) {
  auto escape = [](std::string s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out;
  };
  os << "digraph mission {\n  rankdir=LR;\n  node [shape=circle];\n";
  for (std::size_t i = 0; i < dfa.states.size(); ++i) {
    const DfaState& st = dfa.states[i];
    os << "  q" << i << " [label=\"q" << i << "\\n"
       << escape(st.is_terminal ? std::string("accept") : store.to_string(st.formula, universe))
       << "\"";
    if (st.is_terminal) os << ", shape=doublecircle";
    if (static_cast<int>(i) == dfa.q0) os << ", style=bold";
    os << "];\n";
  }
  for (std::size_t s = 0; s < dfa.trans.size(); ++s)
    for (const DfaTransition& t : dfa.trans[s])
      os << "  q" << s << " -> q" << t.target << " [label=\""
         << escape(store.to_string(t.guard, universe)) << "\"];\n";
  os << "}\n";
}

}  // namespace semplan
