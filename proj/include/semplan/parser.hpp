#pragma once

#include "semplan/formula.hpp"

#include <memory>
#include <stdexcept>
#include <string>

namespace semplan {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error("mission parse error at " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  int line;
  int col;
};

/// A parsed mission together with the structures it lives in.
struct MissionSpec {
  std::shared_ptr<FormulaStore> store;
  ApUniverse universe;
  Mission mission;
};

/// Parses mission text.
///
/// Top-level clauses, one per line:
///   core: <co-safe formula>           (exactly one, or the whole text if no
///                                      clause keywords are present)
///   always: <boolean formula>         (zero or more)
///   finally_stay: <boolean formula>   (at most one; defaults to true)
///
/// Formulas: `true`, `false`, atoms, `!` (Boolean negation, pushed to
/// literals), `&`, `|`, `U` (right-assoc, binds tighter than `&`), prefix `F`
/// and `X`, parentheses. Atoms:
///   in(j, REGION)                     robot j inside a named region
///   near(j, LMK, r, delta)            P(robot j within r of LMK) >= 1-delta
///   unc(LMK, delta)                   det of LMK's covariance <= delta
///   nearc(j, LMK, r, delta, CLASS)    near, weighted by class probability
/// plus bare identifiers as abstract atoms (test harness use; a scenario
/// rejects them at load time). `G` and negated temporal operators are
/// rejected: the core must be co-safe, invariants belong in always-clauses.
MissionSpec parse_mission(const std::string& text);

}  // namespace semplan
