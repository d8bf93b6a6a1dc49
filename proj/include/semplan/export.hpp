#pragma once

#include <iosfwd>
#include <string>

#include "semplan/planner.hpp"
#include "semplan/scenario.hpp"
#include "semplan/sim.hpp"

namespace semplan {

// Scalable vector drawing of a planned run: workspace frame, obstacles,
// named regions, the 90% confidence ellipses of every landmark estimate at
// the start and end of the plan, and one polyline per robot.
void write_plan_svg(const Scenario& scenario, const Plan& plan, std::ostream& os);

// Graphviz rendering of the scenario's mission automaton.
void write_mission_dot(const Scenario& scenario, std::ostream& os);

// Covariance determinant of every landmark at every plan step, one row per
// step.
void write_plan_det_csv(const Scenario& scenario, const Plan& plan, std::ostream& os);

}  // namespace semplan
