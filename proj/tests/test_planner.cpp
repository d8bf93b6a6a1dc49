#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "semplan/planner.hpp"
#include "semplan/scenario.hpp"

using namespace semplan;

namespace {

Json base(const std::string& mission) {
  return Json{
      {"format", "semplan-scenario-v1"},
      {"workspace",
       {{"bounds", {{0.0, 0.0}, {4.0, 4.0}}},
        {"resolution", 0.1},
        {"regions",
         {{"goal", {{3.0, 3.0}, {4.0, 3.0}, {4.0, 4.0}, {3.0, 4.0}}},
          {"home", {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}}}}}},
      {"classes", {"chair", "table"}},
      {"robots",
       {{{"start", {0.5, 0.5, 0.0}},
         {"primitives", {{"u", {0.0, 1.0}}, {"omega_deg", {0.0, 90.0, -90.0}}}},
         {"sensor",
          {{"range", 1.0}, {"fov_deg", 360.0}, {"noise_slope", 0.5},
           {"line_of_sight", true}}}}}},
      {"landmarks",
       {{{"id", "a"}, {"mean", {3.0, 3.0}}, {"cov", {0.09, 0.0, 0.0, 0.09}}}}},
      {"mission", mission},
      {"planner",
       {{"n_max", 8000}, {"tau", 0.5}, {"seed", 7}, {"stop_on_first", true}}},
  };
}

Scenario scen(const std::string& mission) { return parse_scenario(base(mission)); }

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
  return std::any_of(issues.begin(), issues.end(), [&](const std::string& s) {
    return s.find(needle) != std::string::npos;
  });
}

int discharged_state(const Dfa& dfa, const FormulaStore& st) {
  for (int q = 0; q < static_cast<int>(dfa.states.size()); ++q)
    if (dfa.states[q].formula == st.f_true() && !dfa.states[q].is_terminal) return q;
  return -1;
}

}  // namespace

TEST_CASE("unicycle steps follow straight lines, exact arcs and near-straight shortcuts") {
  const Pose o{0.0, 0.0, 0.0};

  SUBCASE("straight motion") {
    const Pose p = unicycle_step(o, 1.0, 0.0, 0.5);
    CHECK(p.x == 0.5);
    CHECK(p.y == 0.0);
    CHECK(p.theta == 0.0);
  }

  SUBCASE("quarter arc of unit radius") {
    const Pose p = unicycle_step(o, kPi / 2.0, kPi / 2.0, 1.0);
    CHECK(p.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.theta == doctest::Approx(kPi / 2.0).epsilon(1e-12));
  }

  SUBCASE("tiny turn rates use the midpoint heading") {
    const double omega = 1e-3;
    const double tau = 0.5;
    const Pose p = unicycle_step(o, 1.0, omega, tau);
    const double w = omega * tau;
    CHECK(p.x == doctest::Approx(tau * std::cos(0.5 * w)).epsilon(1e-15));
    CHECK(p.y == doctest::Approx(tau * std::sin(0.5 * w)).epsilon(1e-15));
    CHECK(p.theta == doctest::Approx(w).epsilon(1e-15));
  }

  SUBCASE("midpoint branch tracks the exact arc at the switching point") {
    const double tau = 0.5;
    const double omega = 0.000999 / tau;  // turn angle just below the switch
    const Pose p = unicycle_step(o, 1.0, omega, tau);
    const double w = omega * tau;
    const double r = 1.0 / omega;
    // Midpoint-heading error terms: u*tau*w^2/24 along, u*tau*w^3/48 across.
    CHECK(std::abs(p.x - r * std::sin(w)) <= 5e-8);
    CHECK(std::abs(p.y - r * (1.0 - std::cos(w))) <= 1e-10);
  }

  SUBCASE("turning in place moves nothing") {
    const Pose start{1.5, -0.25, 0.5};
    const Pose p = unicycle_step(start, 0.0, kPi, 1.0);
    CHECK(p.x == 1.5);
    CHECK(p.y == -0.25);
    CHECK(p.theta == doctest::Approx(normalize_angle(0.5 + kPi)).epsilon(1e-15));
  }

  SUBCASE("headings stay wrapped to (-pi, pi]") {
    const Pose start{0.0, 0.0, 3.0 * kPi / 4.0};
    const Pose p = unicycle_step(start, 0.0, kPi / 2.0, 1.0);
    CHECK(p.theta == doctest::Approx(-3.0 * kPi / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("planning is deterministic for a fixed seed") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner a(s, s.planner);
  Planner b(s, s.planner);
  const PlanResult ra = a.plan();
  const PlanResult rb = b.plan();
  REQUIRE(ra.status == PlanStatus::Found);
  REQUIRE(rb.status == PlanStatus::Found);
  CHECK(ra.stats.iterations == rb.stats.iterations);
  CHECK(ra.stats.nodes == rb.stats.nodes);
  CHECK(plan_to_json(*ra.plan).dump() == plan_to_json(*rb.plan).dump());
}

TEST_CASE("plans survive the json round trip and replay cleanly") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner pl(s, s.planner);
  const PlanResult r = pl.plan();
  REQUIRE(r.status == PlanStatus::Found);
  const Plan& p = *r.plan;

  CHECK(p.steps.size() == static_cast<std::size_t>(p.horizon) + 1);
  CHECK(p.controls.size() == static_cast<std::size_t>(p.horizon));
  CHECK(p.tau == s.planner.tau);
  CHECK(p.steps.front().q == pl.dfa().q0);
  CHECK(p.steps.back().q == pl.dfa().qF);
  CHECK(p.cost > 0.0);

  const Json j = plan_to_json(p);
  const Plan back = plan_from_json(j);
  CHECK(plan_to_json(back).dump() == j.dump());
  CHECK_FALSE(replay_validate(back, s).has_value());

  const std::string path = "/tmp/semplan_plan_roundtrip.json";
  save_plan(p, path);
  const Plan loaded = load_plan(path);
  CHECK(plan_to_json(loaded).dump() == j.dump());
  CHECK_FALSE(replay_validate(loaded, s).has_value());
  std::remove(path.c_str());
}

TEST_CASE("plan() matches plan_from() on the scenario's own start") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner a(s, s.planner);
  Planner b(s, s.planner);
  const PlanResult ra = a.plan();
  PlanStart start;
  start.poses = s.start_poses();
  start.map = s.initial_map();
  const PlanResult rb = b.plan_from(start);
  REQUIRE(ra.status == PlanStatus::Found);
  REQUIRE(rb.status == PlanStatus::Found);
  CHECK(plan_to_json(*ra.plan).dump() == plan_to_json(*rb.plan).dump());
}

TEST_CASE("tampered plans are rejected with a reason") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner pl(s, s.planner);
  const PlanResult r = pl.plan();
  REQUIRE(r.status == PlanStatus::Found);
  REQUIRE(r.plan->horizon >= 2);

  auto expect = [&](const Plan& p, const std::string& needle) {
    const auto err = replay_validate(p, s);
    REQUIRE(err.has_value());
    CHECK(err->find(needle) != std::string::npos);
  };

  SUBCASE("cost") {
    Plan p = *r.plan;
    p.cost += 1e-9;
    expect(p, "cost diverges");
  }
  SUBCASE("pose") {
    Plan p = *r.plan;
    p.steps[1].poses[0].x += 1e-9;
    expect(p, "diverges at step 1");
  }
  SUBCASE("covariance") {
    Plan p = *r.plan;
    p.steps[1].covs[0](0, 0) += 1e-9;
    expect(p, "covariance of landmark a diverges");
  }
  SUBCASE("control outside the primitive menu") {
    Plan p = *r.plan;
    p.controls[0][0] = Primitive{0.123, 45.0};
    expect(p, "not a primitive of robot 1");
  }
  SUBCASE("control swapped for a different valid primitive") {
    Plan p = *r.plan;
    const Primitive& other =
        (p.controls[0][0].u == 0.0) ? Primitive{1.0, 0.0} : Primitive{0.0, 0.0};
    p.controls[0][0] = other;
    expect(p, "diverges at step 1");
  }
  SUBCASE("truncated steps") {
    Plan p = *r.plan;
    p.steps.pop_back();
    expect(p, "step count does not match horizon");
  }
  SUBCASE("automaton state") {
    Plan p = *r.plan;
    p.steps[0].q = 123;
    expect(p, "automaton state diverges at step 0");
  }
  SUBCASE("nonpositive tau") {
    Plan p = *r.plan;
    p.tau = 0.0;
    expect(p, "nonpositive tau");
  }
}

TEST_CASE("an initially discharged mission yields an empty plan") {
  const Scenario s = scen("true");
  Planner pl(s, s.planner);
  const PlanResult r = pl.plan();
  REQUIRE(r.status == PlanStatus::Found);
  CHECK(r.plan->horizon == 0);
  CHECK(r.plan->steps.size() == 1);
  CHECK(r.plan->controls.empty());
  CHECK(r.plan->cost == 0.0);
  CHECK(r.stats.iterations == 0);
  CHECK_FALSE(replay_validate(*r.plan, s).has_value());

  const Json j = plan_to_json(*r.plan);
  CHECK(plan_to_json(plan_from_json(j)).dump() == j.dump());
}

TEST_CASE("starting at an already discharged automaton state accepts immediately") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner pl(s, s.planner);
  const int disch = discharged_state(pl.dfa(), pl.store());
  REQUIRE(disch >= 0);

  PlanStart start;
  start.poses = s.start_poses();
  start.map = s.initial_map();
  start.q = disch;
  const PlanResult r = pl.plan_from(start);
  REQUIRE(r.status == PlanStatus::Found);
  CHECK(r.plan->horizon == 0);
  CHECK(r.plan->steps.front().q == disch);

  CHECK_FALSE(replay_validate(*r.plan, s, &start).has_value());
  const auto wrong_start = replay_validate(*r.plan, s);
  REQUIRE(wrong_start.has_value());
  CHECK(wrong_start->find("automaton state diverges at step 0") != std::string::npos);
}

TEST_CASE("search reports not found when the budget is too small") {
  Json j = base("F near(1,a,0.3,0.2)");
  j["planner"]["n_max"] = 1;
  const Scenario s = parse_scenario(j);
  Planner pl(s, s.planner);
  const PlanResult r = pl.plan();
  CHECK(r.status == PlanStatus::NotFound);
  CHECK_FALSE(r.plan.has_value());
  CHECK(r.stats.iterations == 1);
  CHECK(r.stats.first_solution_iteration == -1);
  CHECK(pl.tree().size() >= 1);
}

TEST_CASE("degenerate starts are rejected up front") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");

  SUBCASE("start violating an invariant") {
    const Scenario v = scen("core: F near(1,a,0.3,0.2)\nalways: ! in(1,home)\n");
    Planner pl(v, v.planner);
    bool threw = false;
    try {
      pl.plan();
    } catch (const ScenarioError& e) {
      threw = true;
      CHECK(mentions(e.issues(), "violates the mission invariants"));
    }
    CHECK(threw);
  }

  SUBCASE("start outside free space") {
    Planner pl(s, s.planner);
    PlanStart start;
    start.poses = {Pose{-1.0, -1.0, 0.0}};
    start.map = s.initial_map();
    bool threw = false;
    try {
      pl.plan_from(start);
    } catch (const ScenarioError& e) {
      threw = true;
      CHECK(mentions(e.issues(), "not in free space"));
    }
    CHECK(threw);
  }

  SUBCASE("start with a different landmark set") {
    Planner pl(s, s.planner);
    PlanStart start;
    start.poses = s.start_poses();
    bool threw = false;
    try {
      pl.plan_from(start);
    } catch (const ScenarioError& e) {
      threw = true;
      CHECK(mentions(e.issues(), "different landmark set"));
    }
    CHECK(threw);
  }
}

TEST_CASE("bucket probabilities form the advertised two-level distribution") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner pl(s, s.planner);
  REQUIRE(pl.plan().status == PlanStatus::Found);

  const std::vector<double> p = pl.bucket_probabilities();
  REQUIRE(p.size() == pl.bucket_count());
  REQUIRE(p.size() >= 2);

  double sum = 0.0;
  for (double v : p) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) <= 1e-12);

  std::set<double> levels(p.begin(), p.end());
  REQUIRE(levels.size() <= 2);
  if (levels.size() == 2) {
    const double hi = *levels.rbegin();
    double hi_mass = 0.0;
    for (double v : p)
      if (v == hi) hi_mass += v;
    CHECK(std::abs(hi_mass - s.planner.p_rand) <= 1e-12);
  }
}

TEST_CASE("disabling the bias flattens every sampling density") {
  Json j = base("F near(1,a,0.3,0.2)");
  j["planner"]["n_max"] = 300;
  j["planner"]["bias"] = false;
  j["planner"]["stop_on_first"] = false;
  const Scenario s = parse_scenario(j);
  Planner pl(s, s.planner);
  pl.plan();

  const std::vector<double> p = pl.bucket_probabilities();
  REQUIRE(p.size() >= 2);
  const double uniform = 1.0 / static_cast<double>(p.size());
  for (double v : p) CHECK(v == uniform);

  const auto d = pl.control_densities(0);
  REQUIRE(d.size() == 1);
  REQUIRE(d[0].size() == 6);
  for (double v : d[0]) CHECK(v == 1.0 / 6.0);
}

TEST_CASE("control densities at a far-from-goal node concentrate on one primitive") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner pl(s, s.planner);
  REQUIRE(pl.plan().status == PlanStatus::Found);

  const auto d = pl.control_densities(0);
  REQUIRE(d.size() == 1);
  REQUIRE(d[0].size() == 6);
  double sum = 0.0;
  for (double v : d[0]) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) <= 1e-12);

  const auto best = std::max_element(d[0].begin(), d[0].end());
  CHECK(*best == doctest::Approx(s.planner.p_new).epsilon(1e-15));
  for (auto it = d[0].begin(); it != d[0].end(); ++it)
    if (it != best)
      CHECK(*it == doctest::Approx((1.0 - s.planner.p_new) / 5.0).epsilon(1e-12));

  // Density is stable across peeks: no generator state leaks out.
  const auto again = pl.control_densities(0);
  CHECK(again == d);
}

TEST_CASE("empirical draw frequencies track the reported densities") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner pl(s, s.planner);
  REQUIRE(pl.plan().status == PlanStatus::Found);

  SUBCASE("bucket draws") {
    const std::vector<double> p = pl.bucket_probabilities();
    const int n = 40000;
    std::vector<int> counts(p.size(), 0);
    for (int i = 0; i < n; ++i) {
      const int b = pl.sample_bucket_probe();
      REQUIRE(b >= 0);
      REQUIRE(b < static_cast<int>(p.size()));
      ++counts[static_cast<std::size_t>(b)];
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double f = static_cast<double>(counts[k]) / n;
      const double sigma = std::sqrt(p[k] * (1.0 - p[k]) / n);
      CHECK(std::abs(f - p[k]) <= 4.0 * sigma + 2.0 / n);
    }
  }

  SUBCASE("control draws at the root") {
    const auto d = pl.control_densities(0);
    const int n = 30000;
    std::vector<int> counts(d[0].size(), 0);
    for (int i = 0; i < n; ++i) {
      const Control u = pl.sample_control_probe(0);
      REQUIRE(u.size() == 1);
      REQUIRE(u[0] >= 0);
      REQUIRE(u[0] < static_cast<int>(d[0].size()));
      ++counts[static_cast<std::size_t>(u[0])];
    }
    for (std::size_t k = 0; k < d[0].size(); ++k) {
      const double f = static_cast<double>(counts[k]) / n;
      const double sigma = std::sqrt(d[0][k] * (1.0 - d[0][k]) / n);
      CHECK(std::abs(f - d[0][k]) <= 4.0 * sigma + 2.0 / n);
    }
  }
}

TEST_CASE("continued search only improves the incumbent cost") {
  Json j = base("F near(1,a,0.3,0.2)");
  j["planner"]["stop_on_first"] = false;
  j["planner"]["n_max"] = 4000;
  const Scenario s = parse_scenario(j);
  Planner pl(s, s.planner);
  const PlanResult r = pl.plan();
  REQUIRE(r.status == PlanStatus::Found);

  const auto& hist = r.stats.best_cost_history;
  REQUIRE_FALSE(hist.empty());
  CHECK(hist.front().first == r.stats.first_solution_iteration);
  for (std::size_t i = 1; i < hist.size(); ++i) {
    CHECK(hist[i].first > hist[i - 1].first);
    CHECK(hist[i].second < hist[i - 1].second);
  }
  CHECK(r.plan->cost == hist.back().second);
  CHECK(r.stats.accepting_nodes >= 1);
  CHECK(r.stats.iterations == 4000);

  CHECK(r.stats.epsilon_min > 0.0);
  CHECK(r.stats.epsilon_min <= 1.0);
  CHECK(r.stats.zeta_min > 0.0);
  CHECK(r.stats.zeta_min <= 1.0);
  CHECK(r.stats.wall_seconds >= 0.0);
}

TEST_CASE("tree bookkeeping stays consistent after a search") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner pl(s, s.planner);
  const PlanResult r = pl.plan();
  REQUIRE(r.status == PlanStatus::Found);

  const auto& nodes = pl.tree();
  REQUIRE_FALSE(nodes.empty());
  CHECK(r.stats.nodes == static_cast<long long>(nodes.size()));
  CHECK(r.stats.buckets == static_cast<long long>(pl.bucket_count()));

  CHECK(nodes[0].parent == -1);
  CHECK(nodes[0].t == 0);
  CHECK(nodes[0].cost == 0.0);
  CHECK(nodes[0].q == pl.dfa().q0);

  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    REQUIRE(n.parent >= 0);
    REQUIRE(n.parent < static_cast<int>(i));
    const TreeNode& par = nodes[static_cast<std::size_t>(n.parent)];
    CHECK(n.t == par.t + 1);
    CHECK(n.cost >= par.cost);
    CHECK(n.control.size() == 1);
    REQUIRE(n.bucket >= 0);
    REQUIRE(n.bucket < static_cast<int>(pl.bucket_count()));
    const auto& members = pl.bucket_members(n.bucket);
    CHECK(std::find(members.begin(), members.end(), static_cast<int>(i)) !=
          members.end());
  }
}

TEST_CASE("static landmarks keep their mean across the schedule") {
  const Scenario s = scen("F near(1,a,0.3,0.2)");
  Planner pl(s, s.planner);
  pl.plan();
  const Vec2 m0 = pl.means_at(0)[0];
  const Vec2 m7 = pl.means_at(7)[0];
  CHECK(m0.x() == 3.0);
  CHECK(m0.y() == 3.0);
  CHECK(m7.x() == 3.0);
  CHECK(m7.y() == 3.0);
}
