#pragma once

#include "semplan/estimation.hpp"
#include "semplan/geometry.hpp"
#include "semplan/parser.hpp"
#include "semplan/semantic_map.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace semplan {

using Json = nlohmann::ordered_json;

/// One motion primitive of the unicycle model: forward speed and turn rate.
/// The turn rate is kept in degrees per second so files round-trip exactly.
struct Primitive {
  double u = 0.0;
  double omega_deg = 0.0;

  double omega_rad() const { return omega_deg * kPi / 180.0; }
};

struct RobotSpec {
  Pose start;
  std::vector<Primitive> primitives;
  RangeSensorModel sensor;
};

struct PlannerConfig {
  int n_max = 2000;
  double tau = 1.0;
  double p_rand = 0.9;
  double p_new = 0.9;
  bool bias = true;
  std::uint64_t seed = 1;
  double position_quantum = 0.1;
  int angle_bins = 8;
  int dfa_state_cap = 10000;
  int dnf_term_cap = 4096;
  long long node_cap = 2000000;  // tree-size safety valve; search stops early when hit
  bool stop_on_first = false;
  int max_replans = 10;
};

/// True world used only by the simulator: actual landmark positions and
/// classes, plus how class observations are corrupted.
struct GroundTruthSpec {
  std::map<std::string, Vec2> positions;
  std::map<std::string, std::string> classes;
  Eigen::MatrixXd confusion;  // 0x0 when absent
  double detection_prob = 0.0;
  bool zero_noise = false;
  std::uint64_t seed = 0;
};

struct Scenario {
  Workspace workspace;
  double resolution = 0.0;  // occupancy grid resolution, resolved at load
  std::vector<std::string> classes;
  std::vector<RobotSpec> robots;
  std::vector<Landmark> landmarks;
  std::string mission_text;
  MissionSpec mission;
  std::vector<ApBinding> bindings;  // parallel to mission.universe
  PlannerConfig planner;
  std::optional<GroundTruthSpec> ground_truth;

  SemanticMap initial_map() const;
  std::vector<SensorModel> sensor_models() const;
  std::vector<Pose> start_poses() const;
};

/// Raised on any scenario problem; `issues` lists every violation found.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

Scenario parse_scenario(const Json& j);
Scenario load_scenario(const std::string& path);
Json scenario_to_json(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

/// Resolves mission atoms against a scenario's landmarks, regions, classes and
/// robot count. Appends problems to `issues`; bindings for broken atoms are
/// left empty.
std::vector<ApBinding> bind_universe(const ApUniverse& universe, const Scenario& s,
                                     std::vector<std::string>& issues);

extern const char* const kScenarioFormatTag;  // "semplan-scenario-v1"

}  // namespace semplan
