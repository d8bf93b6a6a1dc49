#include "semplan/sim.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace semplan {

GroundTruth::GroundTruth(const Scenario& scenario)
    : scenario_(scenario), rng_(0) {
  if (!scenario.ground_truth)
    throw ScenarioError({"simulation requires a ground_truth section in the scenario"});
  spec_ = *scenario.ground_truth;
  rng_ = Rng(spec_.seed);
  std::vector<Vec2> p0;
  for (const Landmark& lm : scenario.landmarks) {
    p0.push_back(spec_.positions.at(lm.id));
    int cls = 0;
    auto it = spec_.classes.find(lm.id);
    if (it != spec_.classes.end()) {
      const auto pos = std::find(scenario.classes.begin(), scenario.classes.end(), it->second);
      cls = static_cast<int>(pos - scenario.classes.begin());
    }
    true_classes_.push_back(cls);
  }
  schedule_.push_back(std::move(p0));
}

const std::vector<Vec2>& GroundTruth::positions_at(int t) {
  while (static_cast<int>(schedule_.size()) <= t) {
    const int tcur = static_cast<int>(schedule_.size()) - 1;
    const std::vector<Vec2>& cur = schedule_.back();
    std::vector<Vec2> next(cur.size());
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const Landmark& lm = scenario_.landmarks[k];
      if (!lm.dynamics) {
        next[k] = cur[k];
        continue;
      }
      const LinearDynamics& dyn = *lm.dynamics;
      next[k] = dyn.A * cur[k] + dyn.B * dyn.control_at(tcur);
      if (!spec_.zero_noise) {
        // Sample process noise from Q through its eigendecomposition so
        // singular Q (deterministic directions) stays exact.
        Eigen::SelfAdjointEigenSolver<Mat2> es(dyn.Q);
        const Vec2 s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        const Vec2 n(rng_.normal(), rng_.normal());
        next[k] += es.eigenvectors() * (s.cwiseProduct(n));
      }
    }
    schedule_.push_back(std::move(next));
  }
  return schedule_[static_cast<std::size_t>(t)];
}

std::vector<RangeMeasurement> synth_measurements(GroundTruth& truth,
                                                 const std::vector<Pose>& poses,
                                                 const std::vector<SensorModel>& sensors,
                                                 const Workspace* workspace,
                                                 int t, bool zero_noise, Rng& rng) {
  std::vector<RangeMeasurement> out;
  const std::vector<Vec2>& world = truth.positions_at(t);
  for (std::size_t j = 0; j < poses.size(); ++j) {
    const auto* rs = std::get_if<RangeSensorModel>(&sensors[j]);
    if (rs == nullptr) continue;
    for (std::size_t k = 0; k < world.size(); ++k) {
      if (!range_sensor_sees(*rs, poses[j], world[k], workspace)) continue;
      const double dist = (world[k] - poses[j].position()).norm();
      double value = dist;
      if (!zero_noise) value += rs->noise_slope * dist * rng.normal();
      out.push_back(RangeMeasurement{static_cast<int>(j), static_cast<int>(k), value});
    }
  }
  return out;
}

const char* exec_status_name(ExecStatus s) {
  switch (s) {
    case ExecStatus::Satisfied: return "satisfied";
    case ExecStatus::FailedMaxReplans: return "failed-max-replans";
    case ExecStatus::FailedViolation: return "failed-violation";
  }
  return "unknown";
}

namespace {

TraceStep make_step(int t, const std::vector<Pose>& poses, int q, const SemanticMap& map,
                    int measurements, int class_obs, bool replanned) {
  TraceStep s;
  s.t = t;
  s.poses = poses;
  s.q = q;
  s.measurements = measurements;
  s.class_observations = class_obs;
  s.replanned = replanned;
  for (const Landmark& lm : map.landmarks) s.det_cov.push_back(lm.cov.determinant());
  return s;
}

}  // namespace

ExecutionTrace execute(const Plan& plan, const Scenario& scenario, GroundTruth& truth,
                       int max_replans, std::uint64_t seed) {
  const std::size_t N = scenario.robots.size();
  const std::size_t M = scenario.landmarks.size();
  const std::vector<SensorModel> sensors = scenario.sensor_models();
  Dfa dfa = build_dfa(*scenario.mission.store, scenario.mission.mission,
                      scenario.planner.dfa_state_cap);
  Rng rng(seed);

  ExecutionTrace trace;
  std::vector<Pose> poses = scenario.start_poses();
  SemanticMap map = scenario.initial_map();
  int q = dfa.q0;
  int t = 0;

  Plan active = plan;
  int s = 0;  // index into active.steps

  trace.steps.push_back(make_step(0, poses, q, map, 0, 0, false));

  // A generous hard stop: executions are finite because every active plan has
  // a finite horizon and replans are bounded, but a defensive cap keeps a
  // logic bug from spinning forever.
  const long long step_limit =
      2000000LL + static_cast<long long>(plan.horizon) * (max_replans + 2LL);

  for (long long guard = 0; guard < step_limit; ++guard) {
    if (q == dfa.qF) {
      trace.status = ExecStatus::Satisfied;
      trace.final_map = map;
      return trace;
    }

    const Valuation lab = label(scenario.mission.universe, scenario.bindings, poses, map);
    const std::optional<int> next = dfa.step(*scenario.mission.store, q, lab);
    if (!next) {
      trace.status = ExecStatus::FailedViolation;
      trace.final_map = map;
      return trace;
    }

    const bool plan_exhausted = s >= active.horizon;
    const int planned_next = plan_exhausted ? dfa.qF : active.steps[static_cast<std::size_t>(s) + 1].q;
    if (*next != planned_next) {
      // The live map no longer supports the plan's next transition: grow a
      // fresh plan from the current belief.
      if (trace.replans >= max_replans) {
        trace.status = ExecStatus::FailedMaxReplans;
        trace.final_map = map;
        return trace;
      }
      ++trace.replans;
      trace.replan_steps.push_back(t);
      if (!trace.steps.empty()) trace.steps.back().replanned = true;
      PlanStart from;
      from.poses = poses;
      from.map = map;
      from.q = q;
      Planner planner(scenario, scenario.planner);
      PlanResult result = planner.plan_from(from);
      if (result.status != PlanStatus::Found) {
        trace.status = ExecStatus::FailedViolation;
        trace.final_map = map;
        return trace;
      }
      active = *result.plan;
      s = 0;
      continue;
    }

    if (plan_exhausted) {
      // The current label already discharges the mission; acceptance needs no
      // further motion.
      q = dfa.qF;
      trace.steps.push_back(make_step(t, poses, q, map, 0, 0, false));
      continue;
    }

    // Advance one step along the active plan.
    const std::vector<Primitive>& ctrl = active.controls[static_cast<std::size_t>(s)];
    std::vector<Pose> moved(N);
    for (std::size_t j = 0; j < N; ++j)
      moved[j] = unicycle_step(poses[j], ctrl[j].u, ctrl[j].omega_rad(), active.tau);
    double step_cost = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double dx = moved[j].x - poses[j].x;
      const double dy = moved[j].y - poses[j].y;
      step_cost += std::sqrt(dx * dx + dy * dy);
    }
    trace.realized_cost += step_cost;
    poses = std::move(moved);
    q = *next;
    s += 1;
    t += 1;

    for (std::size_t k = 0; k < M; ++k) predict_landmark(map.landmarks[k], t - 1);
    const std::vector<RangeMeasurement> meas = synth_measurements(
        truth, poses, sensors, &scenario.workspace, t, truth.zero_noise(), rng);
    ekf_update(map, meas, poses, sensors);

    int class_obs = 0;
    if (truth.detection_prob() > 0.0 && truth.confusion().rows() > 0) {
      const std::vector<Vec2>& world = truth.positions_at(t);
      for (std::size_t j = 0; j < N; ++j) {
        const auto* rs = std::get_if<RangeSensorModel>(&sensors[j]);
        if (rs == nullptr) continue;
        for (std::size_t k = 0; k < M; ++k) {
          if (!range_sensor_sees(*rs, poses[j], world[k], &scenario.workspace)) continue;
          if (rng.uniform() >= truth.detection_prob()) continue;
          const int true_cls = truth.true_class(static_cast<int>(k));
          std::vector<double> row(static_cast<std::size_t>(truth.confusion().cols()));
          for (std::size_t c = 0; c < row.size(); ++c)
            row[c] = truth.confusion()(true_cls, static_cast<Eigen::Index>(c));
          const int observed = static_cast<int>(rng.categorical(row));
          class_update(map.landmarks[k].class_dist, observed, truth.confusion());
          ++class_obs;
        }
      }
    }

    trace.steps.push_back(
        make_step(t, poses, q, map, static_cast<int>(meas.size()), class_obs, false));
  }

  trace.status = ExecStatus::FailedViolation;
  trace.final_map = map;
  return trace;
}

void write_trace_csv(const ExecutionTrace& trace, const Scenario& scenario, std::ostream& os) {
  os << "step,q,measurements,class_observations,replanned";
  for (std::size_t j = 0; j < scenario.robots.size(); ++j)
    os << ",x" << (j + 1) << ",y" << (j + 1) << ",theta" << (j + 1);
  for (const Landmark& lm : scenario.landmarks) os << ",det_" << lm.id;
  os << "\n";
  for (const TraceStep& s : trace.steps) {
    os << s.t << ',' << s.q << ',' << s.measurements << ',' << s.class_observations << ','
       << (s.replanned ? 1 : 0);
    for (const Pose& p : s.poses) os << ',' << p.x << ',' << p.y << ',' << p.theta;
    for (double d : s.det_cov) os << ',' << d;
    os << "\n";
  }
}

Json trace_summary(const ExecutionTrace& trace, const Scenario& scenario) {
  Json j;
  j["status"] = exec_status_name(trace.status);
  j["replans"] = trace.replans;
  j["replan_steps"] = trace.replan_steps;
  j["steps"] = trace.steps.empty() ? 0 : trace.steps.back().t;
  j["realized_cost"] = trace.realized_cost;
  Json dets = Json::object();
  for (const Landmark& lm : trace.final_map.landmarks)
    dets[lm.id] = lm.cov.determinant();
  j["final_det_cov"] = dets;
  Json classes = Json::object();
  for (const Landmark& lm : trace.final_map.landmarks) {
    Json d = Json::object();
    for (std::size_t c = 0; c < lm.class_dist.size(); ++c)
      d[scenario.classes[c]] = lm.class_dist[c];
    classes[lm.id] = d;
  }
  j["final_class_dist"] = classes;
  return j;
}

}  // namespace semplan
