#include "semplan/formula.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace semplan {

bool AtomicPredicate::operator==(const AtomicPredicate& o) const {
  return kind == o.kind && robot == o.robot && region == o.region && landmark == o.landmark &&
         cls == o.cls && radius == o.radius && delta == o.delta;
}

std::string AtomicPredicate::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case ApKind::Region:
      os << "in(" << robot + 1 << ", " << region << ")";
      break;
    case ApKind::NearLandmark:
      os << "near(" << robot + 1 << ", " << landmark << ", " << radius << ", " << delta << ")";
      break;
    case ApKind::UncertaintyBelow:
      os << "unc(" << landmark << ", " << delta << ")";
      break;
    case ApKind::NearLandmarkClass:
      os << "nearc(" << robot + 1 << ", " << landmark << ", " << radius << ", " << delta << ", "
         << cls << ")";
      break;
    case ApKind::Abstract:
      os << region;
      break;
  }
  return os.str();
}

int ApUniverse::intern(const AtomicPredicate& ap) {
  for (std::size_t i = 0; i < aps_.size(); ++i)
    if (aps_[i] == ap) return static_cast<int>(i);
  if (aps_.size() >= 64)
    throw std::invalid_argument("ApUniverse: more than 64 atomic predicates are not supported");
  aps_.push_back(ap);
  return static_cast<int>(aps_.size()) - 1;
}

FormulaStore::FormulaStore() {
  nodes_.push_back(FNode{FOp::False, -1, {}});  // id 0
  nodes_.push_back(FNode{FOp::True, -1, {}});   // id 1
}

namespace {

std::uint64_t node_hash(const FNode& n) {
  std::size_t h = static_cast<std::size_t>(n.op) * 1315423911u;
  hash_combine(h, static_cast<std::size_t>(n.ap + 7));
  for (FormulaId k : n.kids) hash_combine(h, static_cast<std::size_t>(k));
  return h;
}

bool node_eq(const FNode& a, const FNode& b) {
  return a.op == b.op && a.ap == b.ap && a.kids == b.kids;
}

}  // namespace

FormulaId FormulaStore::intern(FNode n) {
  const std::uint64_t h = node_hash(n);
  auto& bucket = index_[h];
  for (FormulaId id : bucket)
    if (node_eq(nodes_[static_cast<std::size_t>(id)], n)) return id;
  nodes_.push_back(std::move(n));
  const FormulaId id = static_cast<FormulaId>(nodes_.size()) - 1;
  bucket.push_back(id);
  return id;
}

FormulaId FormulaStore::atom(int ap) {
  auto it = atom_ids_.find(ap);
  if (it != atom_ids_.end()) return it->second;
  const FormulaId id = intern(FNode{FOp::Atom, ap, {}});
  atom_ids_[ap] = id;
  return id;
}

FormulaId FormulaStore::not_atom(int ap) {
  auto it = not_atom_ids_.find(ap);
  if (it != not_atom_ids_.end()) return it->second;
  const FormulaId id = intern(FNode{FOp::NotAtom, ap, {}});
  not_atom_ids_[ap] = id;
  return id;
}

FormulaId FormulaStore::conj(std::vector<FormulaId> kids) {
  std::vector<FormulaId> flat;
  for (FormulaId k : kids) {
    const FNode& n = node(k);
    if (n.op == FOp::False) return f_false();
    if (n.op == FOp::True) continue;
    if (n.op == FOp::And)
      flat.insert(flat.end(), n.kids.begin(), n.kids.end());
    else
      flat.push_back(k);
  }
  std::sort(flat.begin(), flat.end());
  flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
  // Complementary literals annihilate.
  for (FormulaId k : flat) {
    const FOp op = node(k).op;
    const int ap = node(k).ap;
    if (op == FOp::Atom && std::binary_search(flat.begin(), flat.end(), not_atom(ap)))
      return f_false();
  }
  // Absorption: drop any Or child that contains another conjunct.
  std::vector<FormulaId> kept;
  for (FormulaId k : flat) {
    const FNode& n = node(k);
    bool absorbed = false;
    if (n.op == FOp::Or) {
      for (FormulaId d : n.kids)
        if (std::binary_search(flat.begin(), flat.end(), d)) {
          absorbed = true;
          break;
        }
    }
    if (!absorbed) kept.push_back(k);
  }
  if (kept.empty()) return f_true();
  if (kept.size() == 1) return kept[0];
  return intern(FNode{FOp::And, -1, std::move(kept)});
}

FormulaId FormulaStore::disj(std::vector<FormulaId> kids) {
  std::vector<FormulaId> flat;
  for (FormulaId k : kids) {
    const FNode& n = node(k);
    if (n.op == FOp::True) return f_true();
    if (n.op == FOp::False) continue;
    if (n.op == FOp::Or)
      flat.insert(flat.end(), n.kids.begin(), n.kids.end());
    else
      flat.push_back(k);
  }
  std::sort(flat.begin(), flat.end());
  flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
  for (FormulaId k : flat) {
    const FOp op = node(k).op;
    const int ap = node(k).ap;
    if (op == FOp::Atom && std::binary_search(flat.begin(), flat.end(), not_atom(ap)))
      return f_true();
  }
  // Absorption: drop any And child that contains another disjunct.
  std::vector<FormulaId> kept;
  for (FormulaId k : flat) {
    const FNode& n = node(k);
    bool absorbed = false;
    if (n.op == FOp::And) {
      for (FormulaId c : n.kids)
        if (std::binary_search(flat.begin(), flat.end(), c)) {
          absorbed = true;
          break;
        }
    }
    if (!absorbed) kept.push_back(k);
  }
  if (kept.empty()) return f_false();
  if (kept.size() == 1) return kept[0];
  return intern(FNode{FOp::Or, -1, std::move(kept)});
}

FormulaId FormulaStore::next(FormulaId f) {
  if (f == f_true() || f == f_false()) return f;
  return intern(FNode{FOp::Next, -1, {f}});
}

FormulaId FormulaStore::until(FormulaId lhs, FormulaId rhs) {
  if (rhs == f_true()) return f_true();
  if (rhs == f_false()) return f_false();
  if (lhs == f_false()) return rhs;  // false U g holds only where g holds now
  if (lhs == f_true()) return eventually(rhs);
  return intern(FNode{FOp::Until, -1, {lhs, rhs}});
}

FormulaId FormulaStore::eventually(FormulaId f) {
  if (f == f_true() || f == f_false()) return f;
  if (node(f).op == FOp::Eventually) return f;
  return intern(FNode{FOp::Eventually, -1, {f}});
}

FormulaId FormulaStore::negate_bool(FormulaId f) {
  const FNode n = node(f);  // copy: recursion may reallocate nodes_
  switch (n.op) {
    case FOp::False:
      return f_true();
    case FOp::True:
      return f_false();
    case FOp::Atom:
      return not_atom(n.ap);
    case FOp::NotAtom:
      return atom(n.ap);
    case FOp::And: {
      std::vector<FormulaId> ks;
      ks.reserve(n.kids.size());
      for (FormulaId k : n.kids) ks.push_back(negate_bool(k));
      return disj(std::move(ks));
    }
    case FOp::Or: {
      std::vector<FormulaId> ks;
      ks.reserve(n.kids.size());
      for (FormulaId k : n.kids) ks.push_back(negate_bool(k));
      return conj(std::move(ks));
    }
    default:
      throw std::invalid_argument("negate_bool: formula is not purely Boolean");
  }
}

bool FormulaStore::is_boolean(FormulaId f) const {
  const FNode& n = node(f);
  switch (n.op) {
    case FOp::False:
    case FOp::True:
    case FOp::Atom:
    case FOp::NotAtom:
      return true;
    case FOp::And:
    case FOp::Or:
      for (FormulaId k : n.kids)
        if (!is_boolean(k)) return false;
      return true;
    default:
      return false;
  }
}

bool FormulaStore::eval_bool(FormulaId f, Valuation v) const {
  const FNode& n = node(f);
  switch (n.op) {
    case FOp::False:
      return false;
    case FOp::True:
      return true;
    case FOp::Atom:
      return val_contains(v, n.ap);
    case FOp::NotAtom:
      return !val_contains(v, n.ap);
    case FOp::And:
      for (FormulaId k : n.kids)
        if (!eval_bool(k, v)) return false;
      return true;
    case FOp::Or:
      for (FormulaId k : n.kids)
        if (eval_bool(k, v)) return true;
      return false;
    default:
      throw std::invalid_argument("eval_bool: formula is not purely Boolean");
  }
}

FormulaId FormulaStore::progress(FormulaId f, Valuation v) {
  const FNode n = node(f);  // copy: recursion may reallocate nodes_
  switch (n.op) {
    case FOp::False:
      return f_false();
    case FOp::True:
      return f_true();
    case FOp::Atom:
      return val_contains(v, n.ap) ? f_true() : f_false();
    case FOp::NotAtom:
      return val_contains(v, n.ap) ? f_false() : f_true();
    case FOp::And: {
      std::vector<FormulaId> ks;
      ks.reserve(n.kids.size());
      for (FormulaId k : n.kids) ks.push_back(progress(k, v));
      return conj(std::move(ks));
    }
    case FOp::Or: {
      std::vector<FormulaId> ks;
      ks.reserve(n.kids.size());
      for (FormulaId k : n.kids) ks.push_back(progress(k, v));
      return disj(std::move(ks));
    }
    case FOp::Next:
      return n.kids[0];
    case FOp::Until: {
      const FormulaId pl = progress(n.kids[0], v);
      const FormulaId pr = progress(n.kids[1], v);
      return disj({pr, conj({pl, f})});
    }
    case FOp::Eventually:
      return disj({progress(n.kids[0], v), f});
  }
  return f_false();
}

std::vector<int> FormulaStore::atoms_of(FormulaId f) const {
  std::set<int> out;
  std::vector<FormulaId> stack{f};
  while (!stack.empty()) {
    const FNode& n = node(stack.back());
    stack.pop_back();
    if (n.op == FOp::Atom || n.op == FOp::NotAtom) out.insert(n.ap);
    for (FormulaId k : n.kids) stack.push_back(k);
  }
  return {out.begin(), out.end()};
}

Valuation FormulaStore::atom_mask(FormulaId f) const {
  Valuation m = 0;
  for (int a : atoms_of(f)) m |= (Valuation{1} << a);
  return m;
}

std::string FormulaStore::to_string(FormulaId f, const ApUniverse& u) const {
  const FNode& n = node(f);
  auto joined = [&](const char* sep) {
    std::string s = "(";
    for (std::size_t i = 0; i < n.kids.size(); ++i) {
      if (i) s += sep;
      s += to_string(n.kids[i], u);
    }
    return s + ")";
  };
  switch (n.op) {
    case FOp::False:
      return "false";
    case FOp::True:
      return "true";
    case FOp::Atom:
      return u.ap(n.ap).to_string();
    case FOp::NotAtom:
      return "!" + u.ap(n.ap).to_string();
    case FOp::And:
      return joined(" & ");
    case FOp::Or:
      return joined(" | ");
    case FOp::Next:
      return "X " + to_string(n.kids[0], u);
    case FOp::Until:
      return "(" + to_string(n.kids[0], u) + " U " + to_string(n.kids[1], u) + ")";
    case FOp::Eventually:
      return "F " + to_string(n.kids[0], u);
  }
  return "?";
}

}  // namespace semplan
