// End-to-end acceptance gate. Each check prints exactly one PASS/FAIL line
// with a short evidence summary; the process exits 0 only if every check
// passes. An optional list of 1-based indices on the command line restricts
// the run to those checks (development convenience).

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "semplan/dfa.hpp"
#include "semplan/estimation.hpp"
#include "semplan/formula.hpp"
#include "semplan/geometry.hpp"
#include "semplan/parser.hpp"
#include "semplan/planner.hpp"
#include "semplan/scenario.hpp"
#include "semplan/semantic_map.hpp"
#include "semplan/sim.hpp"
#include "semplan/util.hpp"

using namespace semplan;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt_seconds(double s) {
  std::ostringstream os;
  os.precision(2);
  os << std::fixed << s << "s";
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Automaton language versus direct clause-by-clause evaluation
// ---------------------------------------------------------------------------

// Reference acceptance run straight on the mission clauses: progress the core
// until it discharges, then wait and end exactly on a symbol satisfying the
// terminal clause, with every symbol satisfying the invariants.
bool reference_accepts(FormulaStore& st, const Mission& m, const std::vector<Valuation>& w) {
  FormulaId inv = st.f_true();
  for (FormulaId i : m.invariants) inv = st.conj({inv, i});
  FormulaId residual = m.core;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!st.eval_bool(inv, w[i])) return false;
    if (residual == st.f_true()) {
      if (st.eval_bool(m.terminal, w[i])) return i + 1 == w.size();
      continue;
    }
    residual = st.progress(residual, w[i]);
    if (residual == st.f_false()) return false;
  }
  return false;
}

FormulaId random_core(FormulaStore& st, Rng& rng, int depth, int n_atoms) {
  if (depth <= 0) {
    switch (rng.index(4)) {
      case 0: return st.atom(static_cast<int>(rng.index(static_cast<std::size_t>(n_atoms))));
      case 1: return st.not_atom(static_cast<int>(rng.index(static_cast<std::size_t>(n_atoms))));
      case 2: return st.f_true();
      default: return st.f_false();
    }
  }
  switch (rng.index(7)) {
    case 0: return st.atom(static_cast<int>(rng.index(static_cast<std::size_t>(n_atoms))));
    case 1: return st.not_atom(static_cast<int>(rng.index(static_cast<std::size_t>(n_atoms))));
    case 2:
      return st.conj({random_core(st, rng, depth - 1, n_atoms),
                      random_core(st, rng, depth - 1, n_atoms)});
    case 3:
      return st.disj({random_core(st, rng, depth - 1, n_atoms),
                      random_core(st, rng, depth - 1, n_atoms)});
    case 4: return st.next(random_core(st, rng, depth - 1, n_atoms));
    case 5:
      return st.until(random_core(st, rng, depth - 1, n_atoms),
                      random_core(st, rng, depth - 1, n_atoms));
    default: return st.eventually(random_core(st, rng, depth - 1, n_atoms));
  }
}

FormulaId random_boolean(FormulaStore& st, Rng& rng, int n_atoms) {
  const int lit1 = static_cast<int>(rng.index(static_cast<std::size_t>(n_atoms)));
  const int lit2 = static_cast<int>(rng.index(static_cast<std::size_t>(n_atoms)));
  switch (rng.index(4)) {
    case 0: return st.not_atom(lit1);
    case 1: return st.disj({st.not_atom(lit1), st.not_atom(lit2)});
    case 2: return st.atom(lit1);
    default: return st.disj({st.atom(lit1), st.not_atom(lit2)});
  }
}

Outcome check_automaton_language() {
  const auto t0 = std::chrono::steady_clock::now();
  FormulaStore st;
  Rng rng(20260822);
  long long formulas = 0, words = 0, mismatches = 0, oversize = 0;

  for (int i = 0; formulas < 520; ++i) {
    const int n_atoms = 1 + (i % 4);
    const int n_symbols = 1 << n_atoms;
    Mission m;
    m.core = random_core(st, rng, 3, n_atoms);
    if (rng.uniform() < 0.3) m.invariants.push_back(random_boolean(st, rng, n_atoms));
    if (rng.uniform() < 0.3) m.terminal = random_boolean(st, rng, n_atoms);
    Dfa dfa;
    try {
      dfa = build_dfa(st, m, 20000);
    } catch (const DfaError&) {
      ++oversize;  // resample; the language check needs buildable automata
      continue;
    }
    ++formulas;

    auto check_word = [&](const std::vector<Valuation>& w) {
      ++words;
      if (accepts(dfa, st, w) != reference_accepts(st, m, w)) ++mismatches;
    };

    if (n_atoms <= 2) {
      // Every word up to length 4 (length 5 for the single-atom universe).
      const int max_len = n_atoms == 1 ? 5 : 4;
      for (int len = 0; len <= max_len; ++len) {
        std::vector<Valuation> w(static_cast<std::size_t>(len), 0);
        while (true) {
          check_word(w);
          int pos = len - 1;
          while (pos >= 0) {
            if (++w[static_cast<std::size_t>(pos)] < static_cast<Valuation>(n_symbols)) break;
            w[static_cast<std::size_t>(pos)] = 0;
            --pos;
          }
          if (pos < 0) break;
        }
      }
    }
    const int random_words = n_atoms <= 2 ? 60 : 140;
    for (int r = 0; r < random_words; ++r) {
      std::vector<Valuation> w(rng.index(9));
      for (Valuation& v : w) v = rng.index(static_cast<std::size_t>(n_symbols));
      check_word(w);
    }
  }

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << formulas << " formulas (" << oversize << " oversize skipped), " << words
     << " words, " << mismatches << " mismatches, " << fmt_seconds(dt);
  return {formulas >= 500 && mismatches == 0 && dt < 60.0, os.str()};
}

// ---------------------------------------------------------------------------
// 2. Covariance schedule does not depend on measurement values
// ---------------------------------------------------------------------------

Mat2 random_spd(Rng& rng, double ridge) {
  Mat2 a;
  a << rng.normal(), rng.normal(), rng.normal(), rng.normal();
  return a * a.transpose() + ridge * Mat2::Identity();
}

Outcome check_value_independence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(91521);
  double worst = 0.0;
  int instances = 0;

  for (int inst = 0; inst < 100; ++inst) {
    const int n_robots = 1 + inst % 3;
    const int steps = 10;
    const Mat2 prior = random_spd(rng, 0.05);
    const Vec2 mean(rng.uniform(-1, 1), rng.uniform(-1, 1));

    std::vector<SensorModel> sensors;
    std::vector<Eigen::MatrixXd> Ms, Rs;
    for (int j = 0; j < n_robots; ++j) {
      const int rows = 1 + static_cast<int>(rng.index(3));
      Eigen::MatrixXd M(rows, 2);
      for (int r = 0; r < rows; ++r) {
        M(r, 0) = rng.normal();
        M(r, 1) = rng.normal();
      }
      Eigen::MatrixXd L = Eigen::MatrixXd::Zero(rows, rows);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c <= r; ++c) L(r, c) = rng.normal();
      Eigen::MatrixXd R = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(rows, rows);
      Ms.push_back(M);
      Rs.push_back(R);
      sensors.push_back(LinearSensorModel{[M](const Pose&) { return M; },
                                          [R](const Pose&) { return R; }});
    }

    // Offline covariance-only recursion.
    std::vector<Mat2> offline{prior};
    std::vector<std::vector<Pose>> pose_log;
    for (int t = 0; t < steps; ++t) {
      std::vector<Pose> poses;
      for (int j = 0; j < n_robots; ++j)
        poses.push_back(Pose{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)});
      pose_log.push_back(poses);
      offline.push_back(riccati_update(offline.back(), mean, poses, sensors, nullptr));
    }

    // Full filter fed arbitrary measurement values; only the mean may react.
    Vec2 x_est = mean + Vec2(rng.normal(), rng.normal());
    Mat2 cov = prior;
    for (int t = 0; t < steps; ++t) {
      for (int j = 0; j < n_robots; ++j) {
        const Eigen::MatrixXd& H = Ms[static_cast<std::size_t>(j)];
        const Eigen::MatrixXd& R = Rs[static_cast<std::size_t>(j)];
        const Eigen::MatrixXd S = H * cov * H.transpose() + R;
        const Eigen::MatrixXd K = cov * H.transpose() * S.inverse();
        Eigen::VectorXd y(H.rows());
        for (int r = 0; r < y.size(); ++r) y(r) = 10.0 * rng.normal();
        x_est = x_est + K * (y - H * x_est);
        Mat2 next = (Mat2::Identity() - K * H) * cov;
        cov = 0.5 * (next + next.transpose());
      }
      worst = std::max(worst, (cov - offline[static_cast<std::size_t>(t + 1)]).norm());
    }
    ++instances;
  }

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << instances << " instances, max covariance gap " << worst << ", " << fmt_seconds(dt);
  return {instances >= 100 && worst <= 1e-9 && dt < 10.0, os.str()};
}

// ---------------------------------------------------------------------------
// Shared desk-scale instance
// ---------------------------------------------------------------------------

Json desk_json() {
  return Json{
      {"format", "semplan-scenario-v1"},
      {"workspace",
       {{"bounds", {{0.0, 0.0}, {4.0, 4.0}}},
        {"resolution", 0.1},
        {"regions", Json::object()}}},
      {"classes", Json::array()},
      {"robots",
       {{{"start", {0.5, 0.5, 0.0}},
         {"primitives", {{"u", {0.0, 1.0}}, {"omega_deg", {0.0, 90.0, -90.0}}}},
         {"sensor",
          {{"range", 1.0}, {"fov_deg", 360.0}, {"noise_slope", 0.5},
           {"line_of_sight", true}}}}}},
      {"landmarks",
       {{{"id", "a"}, {"mean", {3.0, 3.0}}, {"cov", {0.01, 0.0, 0.0, 0.01}}}}},
      {"mission", "F ( near(1,a,0.45,0.3) & unc(a,9e-5) )"},
      {"planner",
       {{"n_max", 5000}, {"tau", 0.5}, {"seed", 1}, {"stop_on_first", true}}},
  };
}

// Same instance restricted to lattice-preserving primitives: one straight
// step of half a metre and quarter-turns in place, so every reachable pose
// sits on a half-metre grid with four headings and the search space is small
// enough to enumerate.
Json desk_lattice_json() {
  Json j = desk_json();
  j["robots"][0]["primitives"] = Json{{"pairs", {{1.0, 0.0}, {0.0, 180.0}, {0.0, -180.0}}}};
  j["planner"] = Json{{"n_max", 50000},       {"tau", 0.5},
                      {"seed", 1},            {"stop_on_first", false},
                      {"position_quantum", 0.5}, {"angle_bins", 4},
                      {"node_cap", 1000000}};
  return j;
}

// ---------------------------------------------------------------------------
// 3. Tree covariances stay PSD and determinants never grow along edges
// ---------------------------------------------------------------------------

Outcome check_tree_covariances() {
  const auto t0 = std::chrono::steady_clock::now();
  Json j = desk_json();
  j["landmarks"].push_back(
      Json{{"id", "b"}, {"mean", {1.0, 3.0}}, {"cov", {0.05, 0.02, 0.02, 0.08}}});
  j["planner"] = Json{{"n_max", 3000}, {"tau", 0.5}, {"seed", 3}, {"stop_on_first", false}};
  const Scenario scn = parse_scenario(j);
  Planner planner(scn, scn.planner);
  planner.plan();

  const auto& tree = planner.tree();
  long long psd_violations = 0, det_violations = 0;
  for (const TreeNode& n : tree) {
    for (std::size_t k = 0; k < n.covs.size(); ++k) {
      const Mat2& c = n.covs[k];
      Eigen::SelfAdjointEigenSolver<Mat2> es(c);
      const double floor_tol = -1e-12 * std::max(1.0, es.eigenvalues()(1));
      if (es.eigenvalues()(0) < floor_tol) ++psd_violations;
      if (n.parent >= 0) {
        const double dp = tree[static_cast<std::size_t>(n.parent)].covs[k].determinant();
        if (c.determinant() > dp * (1.0 + 1e-12)) ++det_violations;
      }
    }
  }

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << tree.size() << " nodes, " << psd_violations << " indefinite, " << det_violations
     << " growing determinants, " << fmt_seconds(dt);
  return {tree.size() >= 500 && psd_violations == 0 && det_violations == 0, os.str()};
}

// ---------------------------------------------------------------------------
// 4. Ball-mass quadrature against Monte Carlo and the isotropic closed form
// ---------------------------------------------------------------------------

double mc_ball_mass(const Vec2& p, const Vec2& mean, const Mat2& cov, double r, int n,
                    std::uint64_t seed) {
  const double l11 = std::sqrt(cov(0, 0));
  const double l21 = cov(1, 0) / l11;
  const double l22 = std::sqrt(cov(1, 1) - l21 * l21);
  Rng rng(seed);
  long long inside = 0;
  for (int i = 0; i < n; ++i) {
    const double n1 = rng.normal();
    const double n2 = rng.normal();
    const Vec2 x(mean.x() + l11 * n1, mean.y() + l21 * n1 + l22 * n2);
    if ((x - p).norm() <= r) ++inside;
  }
  return static_cast<double>(inside) / n;
}

Outcome check_ball_quadrature() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(5150);
  double worst_mc = 0.0, worst_closed = 0.0;
  int mc_cases = 0, closed_cases = 0;

  for (int i = 0; i < 50; ++i) {
    const Vec2 p(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec2 mean(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Mat2 a;
    a << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    const Mat2 cov = 0.16 * a * a.transpose() + 0.02 * Mat2::Identity();
    const double r = rng.uniform(0.2, 1.5);
    const double got = prob_within_ball(p, mean, cov, r);
    const double want = mc_ball_mass(p, mean, cov, r, 1000000, 9000 + i);
    worst_mc = std::max(worst_mc, std::abs(got - want));
    ++mc_cases;
  }

  for (int i = 0; i < 20; ++i) {
    const double sigma = 0.05 + 0.1 * i;
    const double r = sigma * (0.4 + 0.17 * i);
    const Vec2 c(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double got = prob_within_ball(c, c, sigma * sigma * Mat2::Identity(), r);
    const double want = 1.0 - std::exp(-r * r / (2.0 * sigma * sigma));
    worst_closed = std::max(worst_closed, std::abs(got - want));
    ++closed_cases;
  }

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << mc_cases << " sampled cases (worst " << worst_mc << "), " << closed_cases
     << " closed-form cases (worst " << worst_closed << "), " << fmt_seconds(dt);
  return {worst_mc <= 1e-3 && worst_closed <= 1e-6, os.str()};
}

// ---------------------------------------------------------------------------
// 5. A feasible plan is found within the iteration budget on nearly all seeds
// ---------------------------------------------------------------------------

Outcome check_budget_completeness() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario scn = parse_scenario(desk_json());
  int found = 0;
  long long worst_iters = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PlannerConfig cfg = scn.planner;
    cfg.seed = seed;
    Planner planner(scn, cfg);
    const PlanResult res = planner.plan();
    if (res.status == PlanStatus::Found) {
      ++found;
      worst_iters = std::max(worst_iters, res.stats.first_solution_iteration);
    }
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << found << "/20 seeds solved within 5000 iterations (slowest "
     << worst_iters << "), " << fmt_seconds(dt);
  return {found >= 19 && dt < 120.0, os.str()};
}

// ---------------------------------------------------------------------------
// 6. Returned cost approaches the enumerated optimum and improves with budget
// ---------------------------------------------------------------------------

// Uniform-cost search over every reachable (pose, automaton state, covariance)
// tuple of the lattice instance. Poses live on an exact half-metre grid with
// four headings, so keying positions at micrometre resolution and covariance
// entries at 1e-6 makes the space finite while the exact covariance carried in
// each node keeps label evaluation honest. Zero-cost turn chains terminate
// once the covariance stops moving at key resolution.
double enumerate_optimum(const Scenario& scn, std::string* note) {
  FormulaStore& st = *scn.mission.store;
  const Dfa dfa = build_dfa(st, scn.mission.mission, 10000);
  const std::vector<SensorModel> sensors = scn.sensor_models();
  const Vec2 mean = scn.landmarks[0].mean;
  SemanticMap map = scn.initial_map();
  const double tau = scn.planner.tau;

  std::unordered_map<std::string, Valuation> lab_cache;
  auto label_at = [&](const Pose& p, const Mat2& cov) {
    std::string key(5 * sizeof(double), '\0');
    const double raw[5] = {p.x, p.y, cov(0, 0), cov(0, 1), cov(1, 1)};
    std::memcpy(key.data(), raw, sizeof(raw));
    auto it = lab_cache.find(key);
    if (it != lab_cache.end()) return it->second;
    map.landmarks[0].cov = cov;
    const std::vector<Pose> robots{p};
    const Valuation v = label(scn.mission.universe, scn.bindings, robots, map);
    lab_cache.emplace(std::move(key), v);
    return v;
  };

  struct Node {
    Pose pose;
    Mat2 cov;
    int q = 0;
  };
  auto key_of = [](const Pose& p, const Mat2& cov, int q) {
    const long long heading = ((std::llround(p.theta / (kPi / 2)) % 4) + 4) % 4;
    std::array<long long, 7> k{std::llround(p.x * 1e6), std::llround(p.y * 1e6),
                               heading,
                               q,
                               std::llround(cov(0, 0) * 1e6),
                               std::llround(cov(0, 1) * 1e6),
                               std::llround(cov(1, 1) * 1e6)};
    std::string s(sizeof(k), '\0');
    std::memcpy(s.data(), k.data(), sizeof(k));
    return s;
  };

  std::vector<Node> arena;
  std::unordered_map<std::string, double> best;
  using QEntry = std::pair<double, std::size_t>;
  std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> frontier;

  Node root;
  root.pose = scn.robots[0].start;
  root.cov = scn.landmarks[0].cov;
  root.q = dfa.q0;
  best[key_of(root.pose, root.cov, root.q)] = 0.0;
  arena.push_back(root);
  frontier.emplace(0.0, 0);

  long long expanded = 0;
  while (!frontier.empty()) {
    const auto [cost, idx] = frontier.top();
    frontier.pop();
    const Node cur = arena[idx];
    const auto bit = best.find(key_of(cur.pose, cur.cov, cur.q));
    if (bit == best.end() || cost > bit->second + 1e-12) continue;
    if (cur.q == dfa.qF) {
      if (note) {
        std::ostringstream os;
        os << expanded << " expansions";
        *note = os.str();
      }
      return cost;
    }
    if (++expanded > 5000000) break;

    const std::optional<int> q_next = dfa.step(st, cur.q, label_at(cur.pose, cur.cov));
    if (!q_next) continue;
    for (const Primitive& prim : scn.robots[0].primitives) {
      const Pose np = unicycle_step(cur.pose, prim.u, prim.omega_rad(), tau);
      const Vec2 npos(np.x, np.y);
      if (!scn.workspace.bounds.contains(npos) || scn.workspace.point_in_obstacle(npos))
        continue;
      Node child;
      child.pose = np;
      child.cov = riccati_update(cur.cov, mean, {np}, sensors, &scn.workspace);
      child.q = *q_next;
      const double ncost =
          cost + std::hypot(np.x - cur.pose.x, np.y - cur.pose.y);
      const std::string k = key_of(child.pose, child.cov, child.q);
      auto it = best.find(k);
      if (it != best.end() && it->second <= ncost + 1e-12) continue;
      best[k] = ncost;
      arena.push_back(child);
      frontier.emplace(ncost, arena.size() - 1);
    }
  }
  if (note) *note = "frontier exhausted";
  return kInfD;
}

double cost_at_budget(const PlannerStats& stats, long long budget) {
  double c = kInfD;
  for (const auto& [it, cost] : stats.best_cost_history)
    if (it <= budget) c = cost;
  return c;
}

Outcome check_cost_optimality() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario scn = parse_scenario(desk_lattice_json());

  std::string note;
  const double optimum = enumerate_optimum(scn, &note);
  if (!std::isfinite(optimum))
    return {false, "enumeration found no accepting run (" + note + ")"};

  std::vector<double> final_costs;
  bool monotone = true;
  bool oracle_consistent = true;
  double seed1_at_5000 = kInfD;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PlannerConfig cfg = scn.planner;
    cfg.seed = seed;
    Planner planner(scn, cfg);
    const PlanResult res = planner.plan();
    const double c5k = cost_at_budget(res.stats, 5000);
    const double c15k = cost_at_budget(res.stats, 15000);
    const double c50k = cost_at_budget(res.stats, 50000);
    if (seed == 1) seed1_at_5000 = c5k;
    if (c5k < c15k - 1e-12 || c15k < c50k - 1e-12) monotone = false;
    if (res.status == PlanStatus::Found) {
      final_costs.push_back(res.plan->cost);
      if (res.plan->cost < optimum - 1e-9) oracle_consistent = false;
    } else {
      final_costs.push_back(kInfD);
    }
  }

  // The history-derived value at a smaller budget must equal an actual run at
  // that budget, the search being deterministic in its seed.
  PlannerConfig small = scn.planner;
  small.seed = 1;
  small.n_max = 5000;
  Planner direct(scn, small);
  const PlanResult dres = direct.plan();
  const double direct_cost = dres.status == PlanStatus::Found ? dres.plan->cost : kInfD;
  const bool replay_equal =
      (std::isinf(direct_cost) && std::isinf(seed1_at_5000)) ||
      std::abs(direct_cost - seed1_at_5000) <= 1e-12;

  const double med = median_of(final_costs);
  const bool med_ok = std::isfinite(med) && med <= 1.05 * optimum;
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << "optimum " << optimum << " (" << note << "), median cost " << med
     << ", budget-monotone " << (monotone ? "yes" : "no") << ", " << fmt_seconds(dt);
  if (!replay_equal) os << ", history/rerun mismatch";
  if (!oracle_consistent) os << ", planner beat the enumeration";
  return {med_ok && monotone && replay_equal && oracle_consistent, os.str()};
}

// ---------------------------------------------------------------------------
// 7. Sampling densities are normalized, positive, and empirically honored
// ---------------------------------------------------------------------------

Outcome check_sampling_densities() {
  const auto t0 = std::chrono::steady_clock::now();
  Json j = desk_lattice_json();
  j["planner"]["seed"] = 11;

  // Replay the same seeded run at every prefix length; the tree after k
  // iterations is the state in which draw k+1 would be made, so checking the
  // densities there covers every draw of the longest run.
  const Scenario scn = parse_scenario(j);
  double worst_bucket_gap = 0.0, worst_control_gap = 0.0;
  double min_bucket = 1.0, min_control = 1.0;
  const int full = 400;
  for (int k = 1; k <= full; k += 1) {
    PlannerConfig cfg = scn.planner;
    cfg.n_max = k;
    Planner planner(scn, cfg);
    planner.plan();
    const std::vector<double> bp = planner.bucket_probabilities();
    double sum = 0.0;
    for (double p : bp) {
      sum += p;
      min_bucket = std::min(min_bucket, p);
    }
    worst_bucket_gap = std::max(worst_bucket_gap, std::abs(sum - 1.0));
    const int node = static_cast<int>(static_cast<std::size_t>(k) % planner.tree().size());
    if (planner.tree()[static_cast<std::size_t>(node)].q_next) {
      for (const std::vector<double>& row : planner.control_densities(node)) {
        double s = 0.0;
        for (double p : row) {
          s += p;
          min_control = std::min(min_control, p);
        }
        worst_control_gap = std::max(worst_control_gap, std::abs(s - 1.0));
      }
    }
  }

  PlannerConfig cfg = scn.planner;
  cfg.n_max = full;
  Planner planner(scn, cfg);
  const PlanResult res = planner.plan();
  const bool minima_ok = res.stats.epsilon_min > 0.0 && res.stats.zeta_min > 0.0;

  // Empirical bucket frequencies against the declared density.
  const std::vector<double> bp = planner.bucket_probabilities();
  std::vector<long long> bucket_counts(bp.size(), 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++bucket_counts[static_cast<std::size_t>(planner.sample_bucket_probe())];
  int bucket_outliers = 0;
  for (std::size_t b = 0; b < bp.size(); ++b) {
    const double exp_count = draws * bp[b];
    const double sd = std::sqrt(draws * bp[b] * (1.0 - bp[b]));
    if (std::abs(bucket_counts[b] - exp_count) > 3.0 * sd) ++bucket_outliers;
  }

  // Empirical control frequencies at the root.
  const std::vector<std::vector<double>> cd = planner.control_densities(0);
  std::vector<long long> control_counts(cd[0].size(), 0);
  for (int i = 0; i < draws; ++i) ++control_counts[static_cast<std::size_t>(planner.sample_control_probe(0)[0])];
  int control_outliers = 0;
  for (std::size_t u = 0; u < cd[0].size(); ++u) {
    const double exp_count = draws * cd[0][u];
    const double sd = std::sqrt(draws * cd[0][u] * (1.0 - cd[0][u]));
    if (std::abs(control_counts[u] - exp_count) > 3.0 * sd) ++control_outliers;
  }

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << full << " prefixes, worst sum gaps " << worst_bucket_gap << "/" << worst_control_gap
     << ", minima " << min_bucket << "/" << min_control << " (logged "
     << res.stats.epsilon_min << "/" << res.stats.zeta_min << "), outliers "
     << bucket_outliers << "+" << control_outliers << " at 3 sigma over " << draws
     << " draws, " << fmt_seconds(dt);
  const bool pass = worst_bucket_gap <= 1e-12 && worst_control_gap <= 1e-12 &&
                    min_bucket > 0.0 && min_control > 0.0 && minima_ok &&
                    bucket_outliers == 0 && control_outliers == 0;
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 8. Goal-biased sampling dominates uniform sampling on a sequencing task
// ---------------------------------------------------------------------------

Json sequencing_json() {
  return Json{
      {"format", "semplan-scenario-v1"},
      {"workspace",
       {{"bounds", {{0.0, 0.0}, {8.0, 8.0}}},
        {"resolution", 0.1},
        {"regions", Json::object()}}},
      {"classes", Json::array()},
      {"robots",
       {{{"start", {1.0, 1.0, 0.0}},
         {"primitives", {{"u", {0.0, 1.0}}, {"omega_deg", {0.0, 180.0, -180.0}}}},
         {"sensor",
          {{"range", 1.0}, {"fov_deg", 360.0}, {"noise_slope", 0.5},
           {"line_of_sight", true}}}},
        {{"start", {2.0, 1.0, 0.0}},
         {"primitives", {{"u", {0.0, 1.0}}, {"omega_deg", {0.0, 180.0, -180.0}}}},
         {"sensor",
          {{"range", 1.0}, {"fov_deg", 360.0}, {"noise_slope", 0.5},
           {"line_of_sight", true}}}}}},
      {"landmarks",
       {{{"id", "l1"}, {"mean", {6.5, 1.5}}, {"cov", {0.04, 0.0, 0.0, 0.04}}},
        {{"id", "l2"}, {"mean", {6.5, 6.5}}, {"cov", {0.04, 0.0, 0.0, 0.04}}},
        {{"id", "l3"}, {"mean", {1.5, 6.5}}, {"cov", {0.04, 0.0, 0.0, 0.04}}}}},
      {"mission",
       "( F ( near(1,l1,0.4,0.25) & F near(1,l2,0.4,0.25) ) ) & F near(2,l3,0.4,0.25)"},
      {"planner",
       {{"n_max", 50000}, {"tau", 0.5}, {"seed", 1}, {"stop_on_first", true},
        {"node_cap", 1000000}}},
  };
}

Outcome check_bias_dominates_uniform() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario scn = parse_scenario(sequencing_json());
  std::vector<double> biased_iters, uniform_iters;
  int biased_solved = 0, uniform_solved = 0;

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PlannerConfig cfg = scn.planner;
    cfg.seed = seed;
    {
      Planner planner(scn, cfg);
      const PlanResult res = planner.plan();
      if (res.status == PlanStatus::Found) {
        ++biased_solved;
        biased_iters.push_back(static_cast<double>(res.stats.first_solution_iteration));
      } else {
        biased_iters.push_back(static_cast<double>(cfg.n_max));
      }
    }
    {
      PlannerConfig uni = cfg;
      uni.bias = false;
      Planner planner(scn, uni);
      const PlanResult res = planner.plan();
      if (res.status == PlanStatus::Found) {
        ++uniform_solved;
        uniform_iters.push_back(static_cast<double>(res.stats.first_solution_iteration));
      } else {
        // An unsolved run is charged the iterations it actually completed
        // (the full cap unless the node budget ended it early).
        uniform_iters.push_back(static_cast<double>(res.stats.iterations));
      }
    }
  }

  const double med_b = median_of(biased_iters);
  const double med_u = median_of(uniform_iters);
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << "biased median " << med_b << " iterations (" << biased_solved
     << "/10 solved), uniform median " << med_u << " (" << uniform_solved
     << "/10 solved), " << fmt_seconds(dt);
  return {med_b <= 0.1 * med_u, os.str()};
}

// ---------------------------------------------------------------------------
// 9. A larger timestep yields proportionally shorter horizons
// ---------------------------------------------------------------------------

Outcome check_timestep_horizon_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  // Close-range task so the fine timestep stays within the node budget, and
  // no early stop so both plans converge toward their short routes instead of
  // returning the first wandering solution.
  Json j = desk_json();
  j["workspace"]["bounds"] = {{0.0, 0.0}, {3.0, 3.0}};
  j["robots"][0]["start"] = {0.8, 0.8, 0.0};
  j["landmarks"][0]["mean"] = {1.5, 1.5};
  j["landmarks"][0]["cov"] = {0.09, 0.0, 0.0, 0.09};
  j["mission"] = "F ( near(1,a,0.3,0.2) & unc(a,1e-4) )";
  j["planner"] = Json{{"n_max", 10000}, {"tau", 0.5}, {"seed", 1}, {"stop_on_first", false}};
  const Scenario scn = parse_scenario(j);

  int shorter = 0;
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PlannerConfig coarse = scn.planner;
    coarse.seed = seed;
    coarse.tau = 0.5;
    PlannerConfig fine = coarse;
    fine.tau = 0.1;
    Planner pc(scn, coarse);
    const PlanResult rc = pc.plan();
    Planner pf(scn, fine);
    const PlanResult rf = pf.plan();
    if (rc.status == PlanStatus::Found && rf.status == PlanStatus::Found) {
      const double hc = rc.plan->horizon, hf = rf.plan->horizon;
      if (hc < hf) ++shorter;
      ratios.push_back(hc / hf);
    }
  }

  const double med_ratio = median_of(ratios);
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << shorter << "/10 seeds shorter at the larger step, median ratio " << med_ratio
     << ", " << fmt_seconds(dt);
  return {shorter >= 9 && med_ratio >= 0.15 && med_ratio <= 0.5, os.str()};
}

// ---------------------------------------------------------------------------
// 10. Execution replans after displacement and tracks offline covariances
// ---------------------------------------------------------------------------

Json execution_json(const Vec2& true_pos) {
  Json j = desk_json();
  j["landmarks"][0]["cov"] = {0.09, 0.0, 0.0, 0.09};
  j["mission"] = "F ( near(1,a,0.3,0.2) & unc(a,1e-4) )";
  j["planner"] = Json{{"n_max", 8000}, {"tau", 0.5}, {"seed", 7}, {"stop_on_first", true}};
  j["ground_truth"] = Json{{"positions", {{"a", {true_pos.x(), true_pos.y()}}}},
                           {"zero_noise", true},
                           {"seed", 5}};
  return j;
}

Outcome check_replanning_loop() {
  const auto t0 = std::chrono::steady_clock::now();

  // A displaced world must force at least one replan and still finish.
  const Scenario displaced = parse_scenario(execution_json(Vec2(3.5, 2.5)));
  Planner dp(displaced, displaced.planner);
  const PlanResult dres = dp.plan();
  if (dres.status != PlanStatus::Found) return {false, "no offline plan for the displaced world"};
  GroundTruth dtruth(displaced);
  const ExecutionTrace dtrace = execute(*dres.plan, displaced, dtruth, 10, 42);
  const bool displaced_ok =
      dtrace.status == ExecStatus::Satisfied && dtrace.replans >= 1;

  // A world matching the prior exactly, with no noise, must execute the plan
  // untouched and reproduce the planned covariances.
  const Scenario exact = parse_scenario(execution_json(Vec2(3.0, 3.0)));
  Planner ep(exact, exact.planner);
  const PlanResult eres = ep.plan();
  if (eres.status != PlanStatus::Found) return {false, "no offline plan for the exact world"};
  GroundTruth etruth(exact);
  const ExecutionTrace etrace = execute(*eres.plan, exact, etruth, 10, 42);
  bool exact_ok = etrace.status == ExecStatus::Satisfied && etrace.replans == 0;
  double worst_det_gap = 0.0, final_gap = 0.0;
  if (exact_ok) {
    const Plan& plan = *eres.plan;
    for (std::size_t t = 0; t < etrace.steps.size() && t < plan.steps.size(); ++t) {
      const double planned = plan.steps[t].covs[0].determinant();
      const double live = etrace.steps[t].det_cov[0];
      worst_det_gap =
          std::max(worst_det_gap, std::abs(live - planned) / std::max(1e-12, planned));
    }
    final_gap = (etrace.final_map.landmarks[0].cov - plan.steps.back().covs[0]).norm();
    exact_ok = worst_det_gap <= 1e-9 && final_gap <= 1e-9;
  }

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << "displaced: " << exec_status_name(dtrace.status) << " after " << dtrace.replans
     << " replans; exact: " << etrace.replans << " replans, det gap " << worst_det_gap
     << ", final covariance gap " << final_gap << ", " << fmt_seconds(dt);
  return {displaced_ok && exact_ok, os.str()};
}

// ---------------------------------------------------------------------------
// 11. Physically impossible transitions are pruned with hop distances intact
// ---------------------------------------------------------------------------

int discharged_state(const Dfa& dfa, const FormulaStore& st) {
  for (int q = 0; q < static_cast<int>(dfa.states.size()); ++q)
    if (dfa.states[q].formula == st.f_true() && !dfa.states[q].is_terminal) return q;
  return -1;
}

Outcome check_transition_pruning() {
  const auto t0 = std::chrono::steady_clock::now();

  // Visiting two disjoint regions: the single-shot transition that needs the
  // robot in both at once must disappear, leaving the two-hop route.
  MissionSpec both = parse_mission("F in(1,RA) & F in(1,RB)");
  const Dfa dfa = build_dfa(*both.store, both.mission, 1000);
  const PrunedDfa pruned = prune(dfa, *both.store, both.universe);
  const int mid = discharged_state(dfa, *both.store);
  bool shortcut_present_raw = false;
  for (const DfaTransition& tr : dfa.out(dfa.q0))
    if (tr.target == mid) shortcut_present_raw = true;
  const bool shortcut_removed = !pruned.guard(dfa.q0, mid).has_value();
  const bool distances_ok = mid >= 0 && pruned.distance(dfa.q0, mid) == 2 &&
                            pruned.distance(dfa.q0, dfa.qF) == 3 && !pruned.disconnected;

  // Pruning must keep start connected to acceptance on a spread of feasible
  // missions.
  const std::vector<std::string> feasible = {
      "F in(1,RA)",
      "F in(2,RB)",
      "F in(1,RA) & F in(1,RB)",
      "F in(1,RA) & F in(1,RB) & F in(1,RC)",
      "F ( in(1,RA) & F in(1,RB) )",
      "F ( in(1,RA) & F ( in(1,RB) & F in(1,RC) ) )",
      "F ( in(1,RA) & in(2,RB) )",
      "F ( in(1,RA) & in(2,RA) )",
      "F in(1,RA) | F in(1,RB)",
      "F ( in(1,RA) & X in(1,RB) )",
      "F near(1,L1,0.3,0.2)",
      "F ( near(1,L1,0.3,0.2) & near(2,L2,0.3,0.2) )",
      "F ( near(1,L1,0.3,0.2) & F near(1,L2,0.3,0.2) )",
      "F ( near(1,L1,0.3,0.2) & in(2,RC) )",
      "( ! in(1,RB) ) U in(1,RA)",
      "( ! near(1,L2,0.3,0.2) ) U near(1,L1,0.3,0.2)",
      "core: F in(1,RA)\nalways: ! in(1,RC)\n",
      "core: F ( in(1,RA) & F in(1,RB) )\nalways: ! near(2,L1,0.4,0.3)\n",
      "core: F near(1,L1,0.3,0.2)\nfinally_stay: in(1,RA)\n",
      "F ( in(1,RA) & F in(2,RB) ) & F in(2,RC)",
  };
  int connected = 0;
  for (const std::string& text : feasible) {
    MissionSpec ms = parse_mission(text);
    const Dfa d = build_dfa(*ms.store, ms.mission, 2000);
    const PrunedDfa p = prune(d, *ms.store, ms.universe);
    if (!p.disconnected && p.distance(d.q0, d.qF) < kDfaUnreachable) ++connected;
  }

  // One engineered impossibility: every accepting route needs the same robot
  // in two disjoint regions at the same instant, so pruning disconnects and
  // the planner must fall back to the unpruned automaton.
  Json j = desk_json();
  j["workspace"]["regions"] =
      Json{{"RA", {{0.5, 0.5}, {1.5, 0.5}, {1.5, 1.5}, {0.5, 1.5}}},
           {"RB", {{2.5, 2.5}, {3.5, 2.5}, {3.5, 3.5}, {2.5, 3.5}}}};
  j["mission"] = "F ( in(1,RA) & in(1,RB) )";
  j["planner"] = Json{{"n_max", 30}, {"tau", 0.5}, {"seed", 1}, {"stop_on_first", true}};
  const Scenario scn = parse_scenario(j);
  Planner planner(scn, scn.planner);
  const PlanResult res = planner.plan();
  const bool fallback_ok =
      res.stats.prune_fallback && res.status == PlanStatus::NotFound;

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << "shortcut removed " << (shortcut_removed && shortcut_present_raw ? "yes" : "no")
     << ", two-hop distance " << (distances_ok ? "yes" : "no") << ", " << connected
     << "/20 feasible missions stay connected, fallback "
     << (fallback_ok ? "exercised" : "missed") << ", " << fmt_seconds(dt);
  const bool pass = shortcut_present_raw && shortcut_removed && distances_ok &&
                    connected == 20 && fallback_ok;
  return {pass, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  struct Check {
    const char* name;
    Outcome (*fn)();
  };
  const std::vector<Check> checks = {
      {"automaton acceptance matches reference semantics", check_automaton_language},
      {"posterior covariance ignores measurement values", check_value_independence},
      {"tree covariances stay positive with shrinking determinants", check_tree_covariances},
      {"ball-mass quadrature matches Monte Carlo and closed form", check_ball_quadrature},
      {"plan found within budget on nearly all seeds", check_budget_completeness},
      {"best cost tracks the enumerated optimum and the budget", check_cost_optimality},
      {"sampling densities normalized, positive, empirically honored", check_sampling_densities},
      {"goal-biased sampling dominates uniform sampling", check_bias_dominates_uniform},
      {"larger timestep yields proportionally shorter horizons", check_timestep_horizon_trend},
      {"execution replans after displacement, tracks offline covariances", check_replanning_loop},
      {"impossible transitions pruned with hop distances intact", check_transition_pruning},
  };

  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), static_cast<int>(i) + 1) == wanted.end())
      continue;
    Outcome out;
    try {
      out = checks[i].fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++failures;
    std::printf("%s  %2zu. %s (%s)\n", out.pass ? "PASS" : "FAIL", i + 1, checks[i].name,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
