#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "semplan/planner.hpp"
#include "semplan/scenario.hpp"

namespace semplan {

// The world as it actually is, visible only to the simulator. Mobile
// landmarks follow their declared dynamics plus process noise; all noise is
// drawn once per world step from the ground-truth seed so the trajectory does
// not change when the executive replans.
class GroundTruth {
 public:
  explicit GroundTruth(const Scenario& scenario);

  const std::vector<Vec2>& positions_at(int t);
  int true_class(int landmark) const { return true_classes_[static_cast<std::size_t>(landmark)]; }
  const Eigen::MatrixXd& confusion() const { return spec_.confusion; }
  double detection_prob() const { return spec_.detection_prob; }
  bool zero_noise() const { return spec_.zero_noise; }

 private:
  const Scenario& scenario_;
  GroundTruthSpec spec_;
  std::vector<int> true_classes_;
  std::vector<std::vector<Vec2>> schedule_;
  Rng rng_;
};

// Range readings the robots would collect from the given poses against the
// true world. A landmark outside a robot's range, field of view, or line of
// sight yields no reading. Noise is Gaussian with a standard deviation
// proportional to the true distance; zero-noise worlds return the exact
// distance.
std::vector<RangeMeasurement> synth_measurements(GroundTruth& truth,
                                                 const std::vector<Pose>& poses,
                                                 const std::vector<SensorModel>& sensors,
                                                 const Workspace* workspace,
                                                 int t, bool zero_noise, Rng& rng);

enum class ExecStatus { Satisfied, FailedMaxReplans, FailedViolation };

const char* exec_status_name(ExecStatus s);

struct TraceStep {
  int t = 0;
  std::vector<Pose> poses;
  int q = 0;
  int measurements = 0;
  int class_observations = 0;
  std::vector<double> det_cov;  // online map, one per landmark
  bool replanned = false;
};

struct ExecutionTrace {
  std::vector<TraceStep> steps;
  ExecStatus status = ExecStatus::FailedViolation;
  int replans = 0;
  double realized_cost = 0.0;
  SemanticMap final_map;
  std::vector<int> replan_steps;
};

// Follows the plan against the true world: at each step the online map is
// refreshed from synthesized measurements, and the plan's next automaton
// transition is taken only if the online label still enables it. Otherwise a
// fresh plan is grown from the current state, charged against `max_replans`.
ExecutionTrace execute(const Plan& plan, const Scenario& scenario, GroundTruth& truth,
                       int max_replans, std::uint64_t seed);

// One row per step: time, poses, automaton state, measurement counts, replan
// flag and the per-landmark covariance determinants.
void write_trace_csv(const ExecutionTrace& trace, const Scenario& scenario, std::ostream& os);

Json trace_summary(const ExecutionTrace& trace, const Scenario& scenario);

}  // namespace semplan
