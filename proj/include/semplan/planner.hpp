#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "semplan/dfa.hpp"
#include "semplan/estimation.hpp"
#include "semplan/geometry.hpp"
#include "semplan/scenario.hpp"
#include "semplan/semantic_map.hpp"

namespace semplan {

// One motion-primitive step of the unicycle model. Near-zero turn rates use a
// midpoint heading; otherwise the exact arc. The resulting heading is
// normalized to (-pi, pi].
Pose unicycle_step(const Pose& p, double u, double omega_rad, double tau);

// Per-robot primitive indices applied in one step.
using Control = std::vector<int>;

// Confidence level of the landmark ellipses treated as virtual obstacles
// while steering toward a sampled transition.
inline constexpr double kVirtualObstacleConfidence = 0.9;

struct TreeNode {
  std::vector<Pose> poses;
  std::vector<Mat2> covs;   // one per landmark, after the measurement update
  int q = 0;                // automaton state reached by this node
  int t = 0;                // depth = discrete time
  int parent = -1;
  Control control;          // primitive indices that produced this node
  double cost = 0.0;        // accumulated travelled distance, all robots
  Valuation lab = 0;        // label of this node's own state
  std::optional<int> q_next;  // delta(q, lab); empty means no extension possible
  int bucket = -1;
};

// Where the sampled transition wants each robot to go, plus the cells that
// robot must treat as blocked while getting there.
struct Assignment {
  enum class Kind { None, Landmark, Region };
  struct PerRobot {
    Kind kind = Kind::None;
    int landmark = -1;
    std::string region;
    std::vector<int> avoid_cells;  // sorted grid indices
  };
  std::vector<PerRobot> robots;
  int q_min = -1;
  Valuation symbol = 0;
  bool active = false;
};

struct PlannerStats {
  long long iterations = 0;
  long long nodes = 0;
  long long buckets = 0;
  long long accepting_nodes = 0;
  long long first_solution_iteration = -1;
  std::vector<std::pair<long long, double>> best_cost_history;
  double epsilon_min = kInfD;  // smallest bucket probability ever used
  double zeta_min = kInfD;     // smallest control probability ever used
  bool node_cap_hit = false;
  bool prune_fallback = false;
  double wall_seconds = 0.0;
};

struct PlanStep {
  std::vector<Pose> poses;
  int q = 0;
  std::vector<Vec2> means;
  std::vector<Mat2> covs;
};

struct Plan {
  int horizon = 0;
  double cost = 0.0;
  double tau = 1.0;
  std::vector<PlanStep> steps;                   // horizon + 1 entries
  std::vector<std::vector<Primitive>> controls;  // horizon entries
};

enum class PlanStatus { Found, NotFound };

struct PlanResult {
  PlanStatus status = PlanStatus::NotFound;
  std::optional<Plan> plan;
  PlannerStats stats;
};

// Belief to plan from: robot poses, the current landmark estimates, and the
// automaton state already reached. q < 0 means "the automaton's start state".
struct PlanStart {
  std::vector<Pose> poses;
  SemanticMap map;
  int q = -1;
};

extern const char* const kPlanFormatTag;

Json plan_to_json(const Plan& plan);
Plan plan_from_json(const Json& j);
void save_plan(const Plan& plan, const std::string& path);
Plan load_plan(const std::string& path);

// Re-executes the plan through the motion and estimation models and checks
// every stored quantity bit for bit, then that the label sequence drives the
// automaton into its accepting state. Returns an explanation on failure,
// std::nullopt when the plan is valid. `start` overrides the scenario's
// initial belief (used when validating replans).
std::optional<std::string> replay_validate(const Plan& plan, const Scenario& scenario,
                                           const PlanStart* start = nullptr);

// Sampling-based tree search over joint robot poses, landmark covariances and
// automaton states. Biased sampling steers extension toward automaton
// transitions that shorten the remaining distance to acceptance.
class Planner {
 public:
  Planner(const Scenario& scenario, const PlannerConfig& config);

  PlanResult plan();
  PlanResult plan_from(const PlanStart& start);

  const Dfa& dfa() const { return dfa_; }
  const PrunedDfa& pruned() const { return pruned_; }
  const FormulaStore& store() const { return *store_; }
  const OccupancyGrid& grid() const { return grid_; }
  const std::vector<TreeNode>& tree() const { return nodes_; }
  std::size_t bucket_count() const { return buckets_.size(); }
  const std::vector<int>& bucket_members(int bucket_id) const {
    return buckets_[static_cast<std::size_t>(bucket_id)].members;
  }

  // Probability of each bucket under the next sampling draw.
  std::vector<double> bucket_probabilities() const;
  // Per-robot primitive densities that a draw at this node would use. Does
  // not advance the generator.
  std::vector<std::vector<double>> control_densities(int node_id);
  // Draws from the current bucket density without growing the tree; advances
  // the generator. Calibration hook for verifying empirical frequencies.
  int sample_bucket_probe() { return sample_bucket(); }
  // One joint control draw at a node, exactly as the search would make it,
  // without extending the tree.
  Control sample_control_probe(int node_id);
  Assignment assignment_for(int node_id);
  // Landmark means at step t under their open-loop dynamics (extends the
  // cached schedule on demand).
  const std::vector<Vec2>& means_at(int t);

 private:
  struct Bucket {
    std::vector<int> key;
    std::vector<int> members;
    int q = 0;
    int dist = 0;
  };
  struct SymbolChoice {
    bool usable = false;
    int q_min = -1;
    Valuation symbol = 0;
    FormulaId guard = 0;
    std::vector<Assignment::PerRobot> robots;    // kind/landmark/region only
    std::vector<std::vector<int>> obstacle_atoms;  // per robot, atom ids
  };

  void reset(const PlanStart& start);
  PlanResult run();
  Valuation label_of(const std::vector<Pose>& poses, int t, const std::vector<Mat2>& covs);
  double prob_near(const Vec2& pos, const Vec2& mean, const Mat2& cov, double r);
  int insert_node(TreeNode&& node);
  int sample_bucket();
  const SymbolChoice& symbol_choice(int q_next);
  std::vector<int> ellipse_cells(int landmark, int t, const Mat2& cov);
  std::vector<int> region_cells(const std::string& name);
  const DistanceField& field_for(const std::string& goal_tag,
                                 const std::vector<int>& goal_cells,
                                 const std::vector<int>& avoid);
  Control sample_control(int node_id, const Assignment& asg,
                         std::vector<std::vector<double>>* densities_out);
  int extend(int node_id, const Control& u);
  Plan extract_plan(int node_id) const;

  const Scenario& scenario_;
  PlannerConfig config_;
  std::shared_ptr<FormulaStore> store_;
  Dfa dfa_;
  PrunedDfa pruned_;
  OccupancyGrid grid_;
  Rng rng_;
  bool prune_fallback_ = false;
  bool immediate_accept_ = false;
  PlanStart start_;
  std::vector<SensorModel> sensors_;

  std::vector<std::vector<double>> class_dists_;  // per landmark, over classes
  std::vector<std::vector<Vec2>> mean_schedule_;

  std::vector<TreeNode> nodes_;
  std::vector<Bucket> buckets_;
  std::unordered_map<std::size_t, std::vector<int>> bucket_index_;
  std::map<int, std::vector<int>> buckets_by_dist_;
  std::vector<int> accepting_;

  std::map<int, SymbolChoice> symbol_cache_;
  std::unordered_map<std::size_t, std::vector<int>> ellipse_cache_;
  std::unordered_map<std::string, std::vector<int>> region_cell_cache_;
  std::unordered_map<std::string, std::unique_ptr<DistanceField>> field_cache_;
  std::unordered_map<std::string, double> prob_cache_;

  PlannerStats stats_;
};

}  // namespace semplan
