#include "semplan/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace semplan {

const char* const kPlanFormatTag = "semplan-plan-v1";

Pose unicycle_step(const Pose& p, double u, double omega_rad, double tau) {
  const double w = omega_rad * tau;
  Pose out;
  if (std::abs(w) < 0.001) {
    // Near-straight step: midpoint heading keeps second-order accuracy and
    // avoids dividing by a tiny turn rate.
    const double mid = p.theta + 0.5 * w;
    out.x = p.x + u * tau * std::cos(mid);
    out.y = p.y + u * tau * std::sin(mid);
  } else {
    const double r = u / omega_rad;
    out.x = p.x + r * (std::sin(p.theta + w) - std::sin(p.theta));
    out.y = p.y - r * (std::cos(p.theta + w) - std::cos(p.theta));
  }
  out.theta = normalize_angle(p.theta + w);
  return out;
}

namespace {

// Shared between tree construction and replay validation so both follow the
// exact same floating-point paths.

Vec2 advance_mean(const LinearDynamics& dyn, const Vec2& mean, int t) {
  return dyn.A * mean + dyn.B * dyn.control_at(t);
}

Mat2 predict_cov(const LinearDynamics& dyn, const Mat2& cov) {
  Mat2 out = dyn.A * cov * dyn.A.transpose() + dyn.Q;
  return 0.5 * (out + out.transpose());
}

double edge_cost(const std::vector<Pose>& from, const std::vector<Pose>& to) {
  double c = 0.0;
  for (std::size_t j = 0; j < from.size(); ++j) {
    const double dx = to[j].x - from[j].x;
    const double dy = to[j].y - from[j].y;
    c += std::sqrt(dx * dx + dy * dy);
  }
  return c;
}

bool pose_valid(const Workspace& ws, const Pose& p) {
  const Vec2 v(p.x, p.y);
  return ws.bounds.contains(v) && !ws.point_in_obstacle(v);
}

void append_bits(std::string& key, double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof(b));
  key.append(reinterpret_cast<const char*>(&b), sizeof(b));
}

void append_int(std::string& key, int v) {
  key.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace

// ---------------------------------------------------------------------------
// Plan document
// ---------------------------------------------------------------------------

Json plan_to_json(const Plan& plan) {
  Json j;
  j["format"] = kPlanFormatTag;
  j["horizon"] = plan.horizon;
  j["cost"] = plan.cost;
  j["tau"] = plan.tau;
  Json steps = Json::array();
  for (const PlanStep& s : plan.steps) {
    Json sj;
    Json poses = Json::array();
    for (const Pose& p : s.poses) poses.push_back(Json::array({p.x, p.y, p.theta}));
    sj["poses"] = poses;
    sj["q"] = s.q;
    Json lms = Json::array();
    for (std::size_t k = 0; k < s.means.size(); ++k) {
      const Mat2& c = s.covs[k];
      lms.push_back(Json{{"mean", Json::array({s.means[k].x(), s.means[k].y()})},
                         {"cov", Json::array({c(0, 0), c(0, 1), c(1, 0), c(1, 1)})}});
    }
    sj["landmarks"] = lms;
    steps.push_back(sj);
  }
  j["steps"] = steps;
  Json controls = Json::array();
  for (const auto& step : plan.controls) {
    Json cj = Json::array();
    for (const Primitive& p : step) cj.push_back(Json::array({p.u, p.omega_deg}));
    controls.push_back(cj);
  }
  j["controls"] = controls;
  return j;
}

Plan plan_from_json(const Json& j) {
  auto fail = [](const std::string& why) -> Plan {
    throw std::runtime_error("plan: " + why);
  };
  if (!j.is_object()) return fail("top level must be an object");
  if (!j.contains("format") || j["format"] != kPlanFormatTag)
    return fail(std::string("missing or unsupported format tag (expected \"") + kPlanFormatTag +
                "\")");
  Plan plan;
  if (!j.contains("horizon") || !j["horizon"].is_number_integer() ||
      j["horizon"].get<int>() < 0)
    return fail("horizon must be a nonnegative integer");
  plan.horizon = j["horizon"].get<int>();
  if (!j.contains("cost") || !j["cost"].is_number()) return fail("cost must be a number");
  plan.cost = j["cost"].get<double>();
  if (!j.contains("tau") || !j["tau"].is_number() || !(j["tau"].get<double>() > 0))
    return fail("tau must be positive");
  plan.tau = j["tau"].get<double>();
  if (!j.contains("steps") || !j["steps"].is_array() ||
      static_cast<int>(j["steps"].size()) != plan.horizon + 1)
    return fail("steps must be an array of horizon + 1 entries");
  for (const Json& sj : j["steps"]) {
    PlanStep s;
    if (!sj.is_object() || !sj.contains("poses") || !sj["poses"].is_array() ||
        !sj.contains("q") || !sj["q"].is_number_integer())
      return fail("each step needs poses and q");
    for (const Json& pj : sj["poses"]) {
      if (!pj.is_array() || pj.size() != 3 || !pj[0].is_number() || !pj[1].is_number() ||
          !pj[2].is_number())
        return fail("poses must be [x, y, theta] triples");
      s.poses.push_back(Pose{pj[0].get<double>(), pj[1].get<double>(), pj[2].get<double>()});
    }
    s.q = sj["q"].get<int>();
    if (sj.contains("landmarks")) {
      for (const Json& lj : sj["landmarks"]) {
        if (!lj.is_object() || !lj.contains("mean") || !lj.contains("cov") ||
            !lj["mean"].is_array() || lj["mean"].size() != 2 || !lj["cov"].is_array() ||
            lj["cov"].size() != 4)
          return fail("each landmark needs mean [x, y] and cov [4 numbers]");
        s.means.emplace_back(lj["mean"][0].get<double>(), lj["mean"][1].get<double>());
        Mat2 c;
        c << lj["cov"][0].get<double>(), lj["cov"][1].get<double>(), lj["cov"][2].get<double>(),
            lj["cov"][3].get<double>();
        s.covs.push_back(c);
      }
    }
    plan.steps.push_back(std::move(s));
  }
  if (!j.contains("controls") || !j["controls"].is_array() ||
      static_cast<int>(j["controls"].size()) != plan.horizon)
    return fail("controls must be an array of horizon entries");
  for (const Json& cj : j["controls"]) {
    std::vector<Primitive> step;
    if (!cj.is_array()) return fail("each control step must be an array");
    for (const Json& pj : cj) {
      if (!pj.is_array() || pj.size() != 2 || !pj[0].is_number() || !pj[1].is_number())
        return fail("controls must be [u, omega_deg] pairs");
      step.push_back(Primitive{pj[0].get<double>(), pj[1].get<double>()});
    }
    plan.controls.push_back(std::move(step));
  }
  return plan;
}

void save_plan(const Plan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("plan: cannot write file: " + path);
  out << plan_to_json(plan).dump(2) << "\n";
}

Plan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("plan: cannot open file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("plan: parse error: ") + e.what());
  }
  return plan_from_json(j);
}

// ---------------------------------------------------------------------------
// Replay validation
// ---------------------------------------------------------------------------

std::optional<std::string> replay_validate(const Plan& plan, const Scenario& scenario,
                                           const PlanStart* start) {
  const std::size_t N = scenario.robots.size();
  const std::size_t M = scenario.landmarks.size();
  auto err = [](const std::string& why) { return std::optional<std::string>(why); };

  if (plan.steps.size() != static_cast<std::size_t>(plan.horizon) + 1)
    return err("step count does not match horizon");
  if (plan.controls.size() != static_cast<std::size_t>(plan.horizon))
    return err("control count does not match horizon");
  if (!(plan.tau > 0)) return err("nonpositive tau");

  SemanticMap map = start ? start->map : scenario.initial_map();
  std::vector<Pose> poses = start ? start->poses : scenario.start_poses();
  if (map.landmarks.size() != M || poses.size() != N)
    return err("start state does not match the scenario shape");

  Dfa dfa = build_dfa(*scenario.mission.store, scenario.mission.mission,
                      scenario.planner.dfa_state_cap);
  const std::vector<SensorModel> sensors = scenario.sensor_models();
  int q = start ? start->q : dfa.q0;

  auto check_step = [&](std::size_t t) -> std::optional<std::string> {
    const PlanStep& s = plan.steps[t];
    if (s.poses.size() != N || s.means.size() != M || s.covs.size() != M)
      return err("step shape mismatch");
    for (std::size_t j = 0; j < N; ++j) {
      if (s.poses[j].x != poses[j].x || s.poses[j].y != poses[j].y ||
          s.poses[j].theta != poses[j].theta) {
        std::ostringstream os;
        os << "pose of robot " << (j + 1) << " diverges at step " << t;
        return err(os.str());
      }
      if (!pose_valid(scenario.workspace, s.poses[j])) {
        std::ostringstream os;
        os << "robot " << (j + 1) << " leaves free space at step " << t;
        return err(os.str());
      }
    }
    for (std::size_t k = 0; k < M; ++k) {
      if (s.means[k] != map.landmarks[k].mean) {
        std::ostringstream os;
        os << "mean of landmark " << map.landmarks[k].id << " diverges at step " << t;
        return err(os.str());
      }
      if (s.covs[k] != map.landmarks[k].cov) {
        std::ostringstream os;
        os << "covariance of landmark " << map.landmarks[k].id << " diverges at step " << t;
        return err(os.str());
      }
    }
    if (s.q != q) {
      std::ostringstream os;
      os << "automaton state diverges at step " << t;
      return err(os.str());
    }
    return std::nullopt;
  };

  if (auto e = check_step(0)) return e;

  double cost = 0.0;
  for (int t = 0; t <= plan.horizon; ++t) {
    const Valuation lab = label(scenario.mission.universe, scenario.bindings, poses, map);
    const std::optional<int> next = dfa.step(*scenario.mission.store, q, lab);
    const bool last = t == plan.horizon;
    if (last) {
      if (cost != plan.cost) return err("cost diverges");
      if (plan.horizon == 0)
        return (next && *next == dfa.qF)
                   ? std::nullopt
                   : err("empty plan does not discharge the mission at the start state");
      return q == dfa.qF ? std::nullopt : err("plan does not end in the accepting state");
    }
    if (!next) {
      std::ostringstream os;
      os << "label at step " << t << " violates the mission";
      return err(os.str());
    }
    q = *next;

    const std::vector<Primitive>& ctrl = plan.controls[static_cast<std::size_t>(t)];
    if (ctrl.size() != N) return err("control shape mismatch");
    std::vector<Pose> next_poses(N);
    for (std::size_t j = 0; j < N; ++j) {
      const auto& prims = scenario.robots[j].primitives;
      const bool known = std::any_of(prims.begin(), prims.end(), [&](const Primitive& p) {
        return p.u == ctrl[j].u && p.omega_deg == ctrl[j].omega_deg;
      });
      if (!known) {
        std::ostringstream os;
        os << "control at step " << t << " is not a primitive of robot " << (j + 1);
        return err(os.str());
      }
      next_poses[j] = unicycle_step(poses[j], ctrl[j].u, ctrl[j].omega_rad(), plan.tau);
    }
    cost += edge_cost(poses, next_poses);
    poses = std::move(next_poses);
    for (std::size_t k = 0; k < M; ++k) {
      Landmark& lm = map.landmarks[k];
      if (lm.dynamics) {
        lm.mean = advance_mean(*lm.dynamics, lm.mean, t);
        lm.cov = predict_cov(*lm.dynamics, lm.cov);
      }
      lm.cov = riccati_update(lm.cov, lm.mean, poses, sensors, &scenario.workspace);
    }
    if (auto e = check_step(static_cast<std::size_t>(t) + 1)) return e;
  }
  return std::nullopt;  // unreachable; the loop returns at the final step
}

// ---------------------------------------------------------------------------
// Planner
// ---------------------------------------------------------------------------

Planner::Planner(const Scenario& scenario, const PlannerConfig& config)
    : scenario_(scenario),
      config_(config),
      store_(scenario.mission.store),
      grid_(rasterize(scenario.workspace, scenario.resolution)),
      rng_(config.seed) {
  sensors_ = scenario_.sensor_models();
  dfa_ = build_dfa(*store_, scenario_.mission.mission, config_.dfa_state_cap);
  pruned_ = prune(dfa_, *store_, scenario_.mission.universe);
  if (pruned_.disconnected) {
    pruned_ = unpruned(dfa_);
    prune_fallback_ = true;
  }
}

PlanResult Planner::plan() {
  PlanStart start;
  start.poses = scenario_.start_poses();
  start.map = scenario_.initial_map();
  start.q = -1;  // marker: use dfa_.q0
  return plan_from(start);
}

PlanResult Planner::plan_from(const PlanStart& start) {
  reset(start);
  return run();
}

void Planner::reset(const PlanStart& start) {
  nodes_.clear();
  buckets_.clear();
  bucket_index_.clear();
  buckets_by_dist_.clear();
  symbol_cache_.clear();
  ellipse_cache_.clear();
  region_cell_cache_.clear();
  field_cache_.clear();
  prob_cache_.clear();
  accepting_.clear();
  stats_ = PlannerStats{};
  stats_.prune_fallback = prune_fallback_;
  immediate_accept_ = false;
  rng_ = Rng(config_.seed);
  start_ = start;
  if (start_.q < 0) start_.q = dfa_.q0;
  for (Pose& p : start_.poses) p.theta = normalize_angle(p.theta);

  const std::size_t M = scenario_.landmarks.size();
  if (start_.map.landmarks.size() != M)
    throw ScenarioError({"planning start carries a different landmark set than the scenario"});
  class_dists_.clear();
  for (const Landmark& lm : start_.map.landmarks) class_dists_.push_back(lm.class_dist);
  mean_schedule_.clear();
  std::vector<Vec2> m0;
  m0.reserve(M);
  for (const Landmark& lm : start_.map.landmarks) m0.push_back(lm.mean);
  mean_schedule_.push_back(std::move(m0));

  TreeNode root;
  root.poses = start_.poses;
  for (const Pose& p : root.poses)
    if (!pose_valid(scenario_.workspace, p))
      throw ScenarioError({"initial robot configuration is not in free space"});
  root.covs.clear();
  for (const Landmark& lm : start_.map.landmarks) root.covs.push_back(lm.cov);
  root.q = start_.q;
  root.t = 0;
  root.lab = label_of(root.poses, 0, root.covs);
  root.q_next = dfa_.step(*store_, root.q, root.lab);
  if (!root.q_next)
    throw ScenarioError({"initial configuration violates the mission invariants"});
  if (*root.q_next == dfa_.qF) immediate_accept_ = true;
  insert_node(std::move(root));
}

const std::vector<Vec2>& Planner::means_at(int t) {
  while (static_cast<int>(mean_schedule_.size()) <= t) {
    const int tcur = static_cast<int>(mean_schedule_.size()) - 1;
    const std::vector<Vec2>& cur = mean_schedule_.back();
    std::vector<Vec2> next(cur.size());
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const Landmark& lm = scenario_.landmarks[k];
      next[k] = lm.dynamics ? advance_mean(*lm.dynamics, cur[k], tcur) : cur[k];
    }
    mean_schedule_.push_back(std::move(next));
  }
  return mean_schedule_[static_cast<std::size_t>(t)];
}

double Planner::prob_near(const Vec2& pos, const Vec2& mean, const Mat2& cov, double r) {
  std::string key;
  key.reserve(8 * 8);
  append_bits(key, pos.x());
  append_bits(key, pos.y());
  append_bits(key, mean.x());
  append_bits(key, mean.y());
  append_bits(key, cov(0, 0));
  append_bits(key, cov(0, 1));
  append_bits(key, cov(1, 1));
  append_bits(key, r);
  auto it = prob_cache_.find(key);
  if (it != prob_cache_.end()) return it->second;
  const double p = prob_within_ball(pos, mean, cov, r);
  if (prob_cache_.size() >= (1u << 20)) prob_cache_.clear();
  prob_cache_.emplace(std::move(key), p);
  return p;
}

Valuation Planner::label_of(const std::vector<Pose>& poses, int t,
                            const std::vector<Mat2>& covs) {
  const std::vector<Vec2>& means = means_at(t);
  const ApUniverse& universe = scenario_.mission.universe;
  Valuation v = 0;
  for (int i = 0; i < universe.size(); ++i) {
    const AtomicPredicate& ap = universe.ap(i);
    const ApBinding& b = scenario_.bindings[static_cast<std::size_t>(i)];
    bool truth = false;
    switch (ap.kind) {
      case ApKind::Region:
        truth = b.region->contains(poses[static_cast<std::size_t>(ap.robot)].position());
        break;
      case ApKind::NearLandmark: {
        const auto k = static_cast<std::size_t>(b.landmark);
        const double pr = prob_near(poses[static_cast<std::size_t>(ap.robot)].position(),
                                    means[k], covs[k], ap.radius);
        truth = pr >= 1.0 - ap.delta;
        break;
      }
      case ApKind::UncertaintyBelow:
        truth = covs[static_cast<std::size_t>(b.landmark)].determinant() <= ap.delta;
        break;
      case ApKind::NearLandmarkClass: {
        const auto k = static_cast<std::size_t>(b.landmark);
        const double pr = prob_near(poses[static_cast<std::size_t>(ap.robot)].position(),
                                    means[k], covs[k], ap.radius);
        truth = pr * class_dists_[k][static_cast<std::size_t>(b.cls)] >= 1.0 - ap.delta;
        break;
      }
      case ApKind::Abstract:
        throw std::logic_error("planner: abstract proposition in a scenario mission");
    }
    if (truth) v |= Valuation{1} << i;
  }
  return v;
}

int Planner::insert_node(TreeNode&& node) {
  const int id = static_cast<int>(nodes_.size());

  std::size_t h = 0x9e3779b97f4a7c15ULL;
  std::vector<int> key;
  key.reserve(1 + 3 * node.poses.size());
  key.push_back(node.q);
  const double quant = config_.position_quantum;
  const double bin_width = 2.0 * kPi / config_.angle_bins;
  for (const Pose& p : node.poses) {
    key.push_back(static_cast<int>(std::floor(p.x / quant)));
    key.push_back(static_cast<int>(std::floor(p.y / quant)));
    int b = static_cast<int>(std::floor((normalize_angle(p.theta) + kPi) / bin_width));
    if (b >= config_.angle_bins) b = config_.angle_bins - 1;
    if (b < 0) b = 0;
    key.push_back(b);
  }
  for (int v : key) hash_combine(h, std::hash<int>{}(v));

  int bucket_id = -1;
  for (int cand : bucket_index_[h]) {
    if (buckets_[static_cast<std::size_t>(cand)].key == key) {
      bucket_id = cand;
      break;
    }
  }
  if (bucket_id < 0) {
    bucket_id = static_cast<int>(buckets_.size());
    Bucket b;
    b.key = std::move(key);
    b.q = node.q;
    b.dist = pruned_.distance(node.q, dfa_.qF);
    buckets_.push_back(std::move(b));
    bucket_index_[h].push_back(bucket_id);
    buckets_by_dist_[buckets_.back().dist].push_back(bucket_id);
  }
  node.bucket = bucket_id;
  buckets_[static_cast<std::size_t>(bucket_id)].members.push_back(id);
  nodes_.push_back(std::move(node));
  return id;
}

std::vector<double> Planner::bucket_probabilities() const {
  const std::size_t K = buckets_.size();
  std::vector<double> p(K, 0.0);
  std::size_t kmin = 0;
  const std::vector<int>* min_group = nullptr;
  for (const auto& [dist, group] : buckets_by_dist_) {
    if (dist > 0 && dist != kDfaUnreachable) {
      min_group = &group;
      kmin = group.size();
      break;
    }
  }
  if (!config_.bias || min_group == nullptr || kmin == K) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(K));
    return p;
  }
  const double in_min = config_.p_rand / static_cast<double>(kmin);
  const double out_min = (1.0 - config_.p_rand) / static_cast<double>(K - kmin);
  std::fill(p.begin(), p.end(), out_min);
  for (int b : *min_group) p[static_cast<std::size_t>(b)] = in_min;
  return p;
}

int Planner::sample_bucket() {
  const std::size_t K = buckets_.size();
  std::size_t kmin = 0;
  const std::vector<int>* min_group = nullptr;
  int min_dist = -1;
  for (const auto& [dist, group] : buckets_by_dist_) {
    if (dist > 0 && dist != kDfaUnreachable) {
      min_group = &group;
      kmin = group.size();
      min_dist = dist;
      break;
    }
  }
  if (!config_.bias || min_group == nullptr || kmin == K) {
    stats_.epsilon_min = std::min(stats_.epsilon_min, 1.0 / static_cast<double>(K));
    return static_cast<int>(rng_.index(K));
  }
  const double in_min = config_.p_rand / static_cast<double>(kmin);
  const double out_min = (1.0 - config_.p_rand) / static_cast<double>(K - kmin);
  stats_.epsilon_min = std::min(stats_.epsilon_min, std::min(in_min, out_min));
  if (rng_.uniform() < config_.p_rand) return (*min_group)[rng_.index(kmin)];
  std::size_t r = rng_.index(K - kmin);
  for (const auto& [dist, group] : buckets_by_dist_) {
    if (dist == min_dist) continue;
    if (r < group.size()) return group[r];
    r -= group.size();
  }
  // The group walk always covers K - kmin buckets; keep the compiler happy.
  return (*min_group)[0];
}

const Planner::SymbolChoice& Planner::symbol_choice(int q_next) {
  auto it = symbol_cache_.find(q_next);
  if (it != symbol_cache_.end()) return it->second;
  SymbolChoice sc;
  sc.robots.resize(scenario_.robots.size());
  sc.obstacle_atoms.resize(scenario_.robots.size());

  const auto& outs = pruned_.out(q_next);
  if (!outs.empty()) {
    int best = -1;
    int best_dist = 0;
    for (const DfaTransition& tr : outs) {
      const int d = pruned_.distance(tr.target, dfa_.qF);
      if (best < 0 || d < best_dist || (d == best_dist && tr.target < best)) {
        best = tr.target;
        best_dist = d;
      }
    }
    sc.q_min = best;
    sc.guard = *pruned_.guard(q_next, best);

    const DnfResult dnf = dnf_terms(*store_, sc.guard, config_.dnf_term_cap);
    const ApUniverse& universe = scenario_.mission.universe;
    std::vector<int> best_atoms;
    bool have = false;
    Valuation best_mask = 0;
    for (const DnfTerm& term : dnf.terms) {
      if (!term_feasible(term, universe)) continue;
      std::vector<int> atoms;
      for (int i = 0; i < universe.size(); ++i)
        if (val_contains(term.pos, i)) atoms.push_back(i);
      if (!have || atoms.size() < best_atoms.size() ||
          (atoms.size() == best_atoms.size() && atoms < best_atoms)) {
        have = true;
        best_atoms = std::move(atoms);
        best_mask = term.pos;
      }
    }
    if (have) {
      sc.usable = true;
      sc.symbol = best_mask;
      for (int id : best_atoms) {
        const AtomicPredicate& ap = universe.ap(id);
        if (!ap.located()) continue;
        auto& slot = sc.robots[static_cast<std::size_t>(ap.robot)];
        if (ap.kind == ApKind::Region) {
          slot.kind = Assignment::Kind::Region;
          slot.region = ap.region;
        } else {
          slot.kind = Assignment::Kind::Landmark;
          slot.landmark = scenario_.bindings[static_cast<std::size_t>(id)].landmark;
        }
      }
      // Negated located atoms whose truth would break the chosen transition
      // become per-robot virtual obstacles. Atoms that only matter jointly
      // with other robots' presence do not trip this test and are ignored.
      const Valuation guard_atoms = store_->atom_mask(sc.guard);
      for (int id = 0; id < universe.size(); ++id) {
        if (!val_contains(guard_atoms, id) || val_contains(sc.symbol, id)) continue;
        const AtomicPredicate& ap = universe.ap(id);
        if (!ap.located()) continue;
        if (!store_->eval_bool(sc.guard, sc.symbol | (Valuation{1} << id)))
          sc.obstacle_atoms[static_cast<std::size_t>(ap.robot)].push_back(id);
      }
    }
  }
  return symbol_cache_.emplace(q_next, std::move(sc)).first->second;
}

std::vector<int> Planner::ellipse_cells(int landmark, int t, const Mat2& cov) {
  const Vec2 mean = means_at(t)[static_cast<std::size_t>(landmark)];
  std::string key;
  key.reserve(48);
  append_int(key, landmark);
  append_bits(key, mean.x());
  append_bits(key, mean.y());
  append_bits(key, cov(0, 0));
  append_bits(key, cov(0, 1));
  append_bits(key, cov(1, 1));
  const std::size_t h = std::hash<std::string>{}(key);
  auto it = ellipse_cache_.find(h);
  if (it == ellipse_cache_.end()) {
    it = ellipse_cache_
             .emplace(h, confidence_ellipse_cells(mean, cov, kVirtualObstacleConfidence, grid_))
             .first;
  }
  return it->second;
}

std::vector<int> Planner::region_cells(const std::string& name) {
  auto it = region_cell_cache_.find(name);
  if (it != region_cell_cache_.end()) return it->second;
  std::vector<int> cells;
  const ConvexPolygon& poly = scenario_.workspace.regions.at(name);
  for (int y = 0; y < grid_.ny; ++y)
    for (int x = 0; x < grid_.nx; ++x) {
      const Cell c{x, y};
      if (poly.contains(grid_.center(c))) cells.push_back(grid_.index(c));
    }
  if (cells.empty()) {
    // A region smaller than one cell: fall back to the cell under its centroid.
    const Cell c = grid_.cell_of(poly.centroid());
    if (grid_.inside(c)) cells.push_back(grid_.index(c));
  }
  region_cell_cache_.emplace(name, cells);
  return cells;
}

Assignment Planner::assignment_for(int node_id) {
  const TreeNode& node = nodes_[static_cast<std::size_t>(node_id)];
  Assignment a;
  a.robots.resize(scenario_.robots.size());
  if (!node.q_next) return a;
  const SymbolChoice& sc = symbol_choice(*node.q_next);
  if (!sc.usable) return a;
  a.active = true;
  a.q_min = sc.q_min;
  a.symbol = sc.symbol;
  for (std::size_t j = 0; j < a.robots.size(); ++j) {
    a.robots[j].kind = sc.robots[j].kind;
    a.robots[j].landmark = sc.robots[j].landmark;
    a.robots[j].region = sc.robots[j].region;
    std::vector<int>& avoid = a.robots[j].avoid_cells;
    for (int id : sc.obstacle_atoms[j]) {
      const AtomicPredicate& ap = scenario_.mission.universe.ap(id);
      std::vector<int> cells;
      if (ap.kind == ApKind::Region) {
        cells = region_cells(ap.region);
      } else {
        const int k = scenario_.bindings[static_cast<std::size_t>(id)].landmark;
        const Landmark& lm = scenario_.landmarks[static_cast<std::size_t>(k)];
        Mat2 cov = node.covs[static_cast<std::size_t>(k)];
        if (lm.dynamics) cov = predict_cov(*lm.dynamics, cov);
        cells = ellipse_cells(k, node.t + 1, cov);
      }
      avoid.insert(avoid.end(), cells.begin(), cells.end());
    }
    std::sort(avoid.begin(), avoid.end());
    avoid.erase(std::unique(avoid.begin(), avoid.end()), avoid.end());
  }
  return a;
}

const DistanceField& Planner::field_for(const std::string& goal_tag,
                                        const std::vector<int>& goal_cells,
                                        const std::vector<int>& avoid) {
  std::string key = goal_tag;
  key.push_back('|');
  for (int c : avoid) append_int(key, c);
  auto it = field_cache_.find(key);
  if (it != field_cache_.end()) return *it->second;
  std::vector<Cell> goals;
  goals.reserve(goal_cells.size());
  for (int idx : goal_cells) goals.push_back(Cell{idx % grid_.nx, idx / grid_.nx});
  std::unordered_set<int> extra(avoid.begin(), avoid.end());
  auto field = std::make_unique<DistanceField>(distance_field_multi(grid_, goals, extra));
  const DistanceField& ref = *field;
  field_cache_.emplace(std::move(key), std::move(field));
  return ref;
}

Control Planner::sample_control(int node_id, const Assignment& asg,
                                std::vector<std::vector<double>>* densities_out) {
  const TreeNode& node = nodes_[static_cast<std::size_t>(node_id)];
  const std::size_t N = scenario_.robots.size();
  Control ctrl(N, 0);
  for (std::size_t j = 0; j < N; ++j) {
    const auto& prims = scenario_.robots[j].primitives;
    const std::size_t U = prims.size();
    std::vector<double> density(U, 1.0 / static_cast<double>(U));
    const Assignment::PerRobot* pr =
        (asg.active && j < asg.robots.size()) ? &asg.robots[j] : nullptr;
    if (pr != nullptr && pr->kind != Assignment::Kind::None && U > 1) {
      // Endpoint of every primitive, then the geodesic field decides u*.
      std::vector<Pose> ends(U);
      for (std::size_t u = 0; u < U; ++u)
        ends[u] = unicycle_step(node.poses[j], prims[u].u, prims[u].omega_rad(), config_.tau);

      const DistanceField* field = nullptr;
      const std::vector<Vec2>& next_means = means_at(node.t + 1);
      if (pr->kind == Assignment::Kind::Landmark) {
        const Vec2 goal = next_means[static_cast<std::size_t>(pr->landmark)];
        const Cell gc = grid_.cell_of(goal);
        std::string tag = "L";
        append_int(tag, grid_.inside(gc) ? grid_.index(gc) : -1);
        std::vector<int> goal_cells;
        if (grid_.inside(gc)) goal_cells.push_back(grid_.index(gc));
        field = &field_for(tag, goal_cells, pr->avoid_cells);
      } else {
        field = &field_for("R" + pr->region, region_cells(pr->region), pr->avoid_cells);
      }

      std::size_t best = 0;
      double best_val = kInfD;
      bool any_finite = false;
      for (std::size_t u = 0; u < U; ++u) {
        const double v = field->at_point(Vec2(ends[u].x, ends[u].y));
        if (v < best_val) {
          best_val = v;
          best = u;
        }
        if (std::isfinite(v)) any_finite = true;
      }
      bool biased = any_finite;
      if (biased && pr->kind == Assignment::Kind::Landmark) {
        const Vec2 goal = next_means[static_cast<std::size_t>(pr->landmark)];
        const double dj = (goal - Vec2(ends[best].x, ends[best].y)).norm();
        if (dj < scenario_.robots[j].sensor.range) biased = false;  // already in range
      }
      if (biased) {
        const double rest = (1.0 - config_.p_new) / static_cast<double>(U - 1);
        std::fill(density.begin(), density.end(), rest);
        density[best] = config_.p_new;
      }
    }
    ctrl[j] = static_cast<int>(rng_.categorical(density));
    stats_.zeta_min =
        std::min(stats_.zeta_min, *std::min_element(density.begin(), density.end()));
    if (densities_out) densities_out->push_back(std::move(density));
  }
  return ctrl;
}

std::vector<std::vector<double>> Planner::control_densities(int node_id) {
  // Densities are what sample_control would use; the draw itself is skipped
  // by restoring the generator afterwards.
  const Rng saved = rng_;
  std::vector<std::vector<double>> out;
  const Assignment asg = config_.bias ? assignment_for(node_id) : Assignment{};
  sample_control(node_id, asg, &out);
  rng_ = saved;
  return out;
}

Control Planner::sample_control_probe(int node_id) {
  const Assignment asg = config_.bias ? assignment_for(node_id) : Assignment{};
  return sample_control(node_id, asg, nullptr);
}

int Planner::extend(int node_id, const Control& u) {
  const TreeNode& parent = nodes_[static_cast<std::size_t>(node_id)];
  if (!parent.q_next) return -1;
  const std::size_t N = scenario_.robots.size();
  const std::size_t M = scenario_.landmarks.size();

  TreeNode child;
  child.poses.resize(N);
  for (std::size_t j = 0; j < N; ++j) {
    const Primitive& p = scenario_.robots[j].primitives[static_cast<std::size_t>(u[j])];
    child.poses[j] = unicycle_step(parent.poses[j], p.u, p.omega_rad(), config_.tau);
    if (!pose_valid(scenario_.workspace, child.poses[j])) return -1;
  }
  child.t = parent.t + 1;
  const std::vector<Vec2>& means = means_at(child.t);
  child.covs.resize(M);
  for (std::size_t k = 0; k < M; ++k) {
    const Landmark& lm = scenario_.landmarks[k];
    Mat2 prior = parent.covs[k];
    if (lm.dynamics) prior = predict_cov(*lm.dynamics, prior);
    child.covs[k] =
        riccati_update(prior, means[k], child.poses, sensors_, &scenario_.workspace);
  }
  child.q = *parent.q_next;
  child.lab = label_of(child.poses, child.t, child.covs);
  child.q_next = dfa_.step(*store_, child.q, child.lab);
  child.parent = node_id;
  child.control = u;
  child.cost = parent.cost + edge_cost(parent.poses, child.poses);
  return insert_node(std::move(child));
}

Plan Planner::extract_plan(int node_id) const {
  std::vector<int> path;
  for (int cur = node_id; cur >= 0; cur = nodes_[static_cast<std::size_t>(cur)].parent)
    path.push_back(cur);
  std::reverse(path.begin(), path.end());

  Plan plan;
  plan.horizon = nodes_[static_cast<std::size_t>(node_id)].t;
  plan.cost = nodes_[static_cast<std::size_t>(node_id)].cost;
  plan.tau = config_.tau;
  for (int id : path) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(id)];
    PlanStep s;
    s.poses = n.poses;
    s.q = n.q;
    s.means = mean_schedule_[static_cast<std::size_t>(n.t)];
    s.covs = n.covs;
    plan.steps.push_back(std::move(s));
    if (n.parent >= 0) {
      std::vector<Primitive> applied;
      for (std::size_t j = 0; j < n.control.size(); ++j)
        applied.push_back(
            scenario_.robots[j].primitives[static_cast<std::size_t>(n.control[j])]);
      plan.controls.push_back(std::move(applied));
    }
  }
  return plan;
}

PlanResult Planner::run() {
  const auto t0 = std::chrono::steady_clock::now();
  double best_cost = kInfD;
  int best_node = -1;

  auto note_accepting = [&](int id, long long iteration) {
    accepting_.push_back(id);
    stats_.accepting_nodes = static_cast<long long>(accepting_.size());
    if (stats_.first_solution_iteration < 0) stats_.first_solution_iteration = iteration;
    const double c = nodes_[static_cast<std::size_t>(id)].cost;
    if (c < best_cost) {
      best_cost = c;
      best_node = id;
      stats_.best_cost_history.emplace_back(iteration, c);
    }
  };

  if (!immediate_accept_) {
    for (long long n = 1; n <= config_.n_max; ++n) {
      stats_.iterations = n;
      if (static_cast<long long>(nodes_.size()) >= config_.node_cap) {
        stats_.node_cap_hit = true;
        break;
      }
      const int b = sample_bucket();
      const std::vector<int> members = buckets_[static_cast<std::size_t>(b)].members;
      for (int m : members) {
        if (!nodes_[static_cast<std::size_t>(m)].q_next) continue;
        const Assignment asg = config_.bias ? assignment_for(m) : Assignment{};
        const Control u = sample_control(m, asg, nullptr);
        const int child = extend(m, u);
        if (child >= 0 && nodes_[static_cast<std::size_t>(child)].q == dfa_.qF)
          note_accepting(child, n);
      }
      if (config_.stop_on_first && !accepting_.empty()) break;
    }
  }

  stats_.nodes = static_cast<long long>(nodes_.size());
  stats_.buckets = static_cast<long long>(buckets_.size());
  stats_.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  PlanResult result;
  result.stats = stats_;
  if (immediate_accept_) {
    result.status = PlanStatus::Found;
    result.plan = extract_plan(0);
  } else if (best_node >= 0) {
    result.status = PlanStatus::Found;
    result.plan = extract_plan(best_node);
  } else {
    result.status = PlanStatus::NotFound;
    return result;
  }
  if (auto err = replay_validate(*result.plan, scenario_, &start_))
    throw std::logic_error("planner produced a plan that fails replay validation: " + *err);
  return result;
}

}  // namespace semplan
