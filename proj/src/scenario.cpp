#include "semplan/scenario.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace semplan {

const char* const kScenarioFormatTag = "semplan-scenario-v1";

ScenarioError::ScenarioError(std::vector<std::string> issues)
    : std::runtime_error([&issues] {
        std::ostringstream os;
        os << "scenario has " << issues.size() << " problem(s):";
        for (const std::string& s : issues) os << "\n  - " << s;
        return os.str();
      }()),
      issues_(std::move(issues)) {}

SemanticMap Scenario::initial_map() const {
  SemanticMap m;
  m.classes = classes;
  m.landmarks = landmarks;
  return m;
}

std::vector<SensorModel> Scenario::sensor_models() const {
  std::vector<SensorModel> out;
  out.reserve(robots.size());
  for (const RobotSpec& r : robots) out.emplace_back(r.sensor);
  return out;
}

std::vector<Pose> Scenario::start_poses() const {
  std::vector<Pose> out;
  out.reserve(robots.size());
  for (const RobotSpec& r : robots) out.push_back(r.start);
  return out;
}

namespace {

struct Issues {
  std::vector<std::string> v;
  void add(const std::string& s) { v.push_back(s); }
};

bool finite_number(const Json& j, double& out) {
  if (!j.is_number()) return false;
  out = j.get<double>();
  return std::isfinite(out);
}

bool parse_vec2(const Json& j, Vec2& out) {
  double x, y;
  if (!j.is_array() || j.size() != 2 || !finite_number(j[0], x) || !finite_number(j[1], y))
    return false;
  out = Vec2(x, y);
  return true;
}

// Matrices with a fixed 2x2 shape are stored flat, row-major.
bool parse_mat2_flat(const Json& j, Mat2& out) {
  if (!j.is_array() || j.size() != 4) return false;
  double v[4];
  for (int i = 0; i < 4; ++i)
    if (!finite_number(j[i], v[i])) return false;
  out << v[0], v[1], v[2], v[3];
  return true;
}

bool parse_polygon(const Json& j, ConvexPolygon& poly, std::string& why) {
  if (!j.is_array() || j.size() < 3) {
    why = "needs at least 3 vertices";
    return false;
  }
  poly.pts.clear();
  for (const Json& pj : j) {
    Vec2 p;
    if (!parse_vec2(pj, p)) {
      why = "vertices must be [x, y] number pairs";
      return false;
    }
    poly.pts.push_back(p);
  }
  if (!poly.normalize()) {
    why = "degenerate polygon (no area)";
    return false;
  }
  if (!poly.is_convex()) {
    why = "polygon is not convex";
    return false;
  }
  return true;
}

// Check symmetry then clean up tiny asymmetry; reject indefinite matrices.
bool check_cov(const Mat2& in, Mat2& out, std::string& why) {
  if (std::abs(in(0, 1) - in(1, 0)) > 1e-9) {
    why = "covariance is not symmetric";
    return false;
  }
  out = 0.5 * (in + in.transpose());
  Eigen::SelfAdjointEigenSolver<Mat2> es(out);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(1);
  if (lo < -1e-12 * std::max(1.0, std::abs(hi))) {
    std::ostringstream os;
    os << "covariance is not positive semidefinite (eigenvalues " << lo << ", " << hi << ")";
    why = os.str();
    return false;
  }
  return true;
}

std::vector<Primitive> default_primitives() {
  std::vector<Primitive> out;
  const double us[] = {0.0, 1.0};
  const double ws[] = {0.0, 30.0, -30.0, 90.0, -90.0, 180.0, -180.0};
  for (double u : us)
    for (double w : ws) out.push_back({u, w});
  return out;
}

void parse_workspace(const Json& j, Scenario& s, Issues& issues) {
  if (!j.is_object()) {
    issues.add("workspace: must be an object");
    return;
  }
  bool bounds_ok = false;
  if (!j.contains("bounds")) {
    issues.add("workspace.bounds: missing");
  } else {
    const Json& b = j["bounds"];
    Vec2 lo, hi;
    if (!b.is_array() || b.size() != 2 || !parse_vec2(b[0], lo) || !parse_vec2(b[1], hi)) {
      issues.add("workspace.bounds: must be [[x0, y0], [x1, y1]]");
    } else if (!(lo.x() < hi.x()) || !(lo.y() < hi.y())) {
      issues.add("workspace.bounds: lower corner must be strictly below upper corner");
    } else {
      s.workspace.bounds = Rect{lo, hi};
      bounds_ok = true;
    }
  }
  if (j.contains("obstacles")) {
    const Json& obs = j["obstacles"];
    if (!obs.is_array()) {
      issues.add("workspace.obstacles: must be an array of polygons");
    } else {
      for (std::size_t i = 0; i < obs.size(); ++i) {
        ConvexPolygon poly;
        std::string why;
        if (!parse_polygon(obs[i], poly, why)) {
          std::ostringstream os;
          os << "workspace.obstacles[" << i << "]: " << why;
          issues.add(os.str());
        } else {
          s.workspace.obstacles.push_back(poly);
        }
      }
    }
  }
  if (j.contains("regions")) {
    const Json& regions = j["regions"];
    if (!regions.is_object()) {
      issues.add("workspace.regions: must be an object of name -> polygon");
    } else {
      for (const auto& [name, rj] : regions.items()) {
        if (name.empty()) {
          issues.add("workspace.regions: empty region name");
          continue;
        }
        ConvexPolygon poly;
        std::string why;
        if (!parse_polygon(rj, poly, why)) {
          issues.add("workspace.regions[\"" + name + "\"]: " + why);
        } else {
          s.workspace.regions[name] = poly;
        }
      }
    }
  }
  if (j.contains("resolution")) {
    double res;
    if (!finite_number(j["resolution"], res) || !(res > 0)) {
      issues.add("workspace.resolution: must be a positive number");
    } else {
      s.resolution = res;
    }
  } else if (bounds_ok) {
    s.resolution = default_resolution(s.workspace);
  }
}

void parse_robot(const Json& j, std::size_t idx, const Scenario& s, RobotSpec& r,
                 Issues& issues) {
  std::ostringstream prefix_os;
  prefix_os << "robots[" << idx << "]";
  const std::string prefix = prefix_os.str();
  if (!j.is_object()) {
    issues.add(prefix + ": must be an object");
    return;
  }
  if (!j.contains("start")) {
    issues.add(prefix + ".start: missing");
  } else {
    const Json& st = j["start"];
    double x, y, th;
    if (!st.is_array() || st.size() != 3 || !finite_number(st[0], x) ||
        !finite_number(st[1], y) || !finite_number(st[2], th)) {
      issues.add(prefix + ".start: must be [x, y, theta] (theta in radians)");
    } else {
      r.start = Pose{x, y, normalize_angle(th)};
      if (!s.workspace.bounds.contains(Vec2(x, y)))
        issues.add(prefix + ".start: outside workspace bounds");
      else if (s.workspace.point_in_obstacle(Vec2(x, y)))
        issues.add(prefix + ".start: inside an obstacle");
    }
  }
  if (!j.contains("primitives")) {
    r.primitives = default_primitives();
  } else {
    const Json& pj = j["primitives"];
    auto bad = [&](const std::string& why) { issues.add(prefix + ".primitives: " + why); };
    if (!pj.is_object()) {
      bad("must be an object with either \"pairs\" or \"u\" + \"omega_deg\"");
    } else if (pj.contains("pairs")) {
      const Json& pairs = pj["pairs"];
      if (!pairs.is_array() || pairs.empty()) {
        bad("\"pairs\" must be a nonempty array");
      } else {
        for (const Json& pr : pairs) {
          double u, w;
          if (!pr.is_array() || pr.size() != 2 || !finite_number(pr[0], u) ||
              !finite_number(pr[1], w)) {
            bad("each pair must be [u, omega_deg]");
            r.primitives.clear();
            break;
          }
          r.primitives.push_back({u, w});
        }
      }
    } else if (pj.contains("u") && pj.contains("omega_deg")) {
      std::vector<double> us, ws;
      bool ok = true;
      for (const Json& uj : pj["u"]) {
        double u;
        if (!finite_number(uj, u)) ok = false;
        us.push_back(u);
      }
      for (const Json& wj : pj["omega_deg"]) {
        double w;
        if (!finite_number(wj, w)) ok = false;
        ws.push_back(w);
      }
      if (!ok || us.empty() || ws.empty()) {
        bad("\"u\" and \"omega_deg\" must be nonempty number arrays");
      } else {
        for (double u : us)
          for (double w : ws) r.primitives.push_back({u, w});
      }
    } else {
      bad("must contain either \"pairs\" or both \"u\" and \"omega_deg\"");
    }
  }
  if (j.contains("sensor")) {
    const Json& sj = j["sensor"];
    if (!sj.is_object()) {
      issues.add(prefix + ".sensor: must be an object");
    } else {
      double v;
      if (sj.contains("range")) {
        if (!finite_number(sj["range"], v) || !(v > 0))
          issues.add(prefix + ".sensor.range: must be positive");
        else
          r.sensor.range = v;
      }
      if (sj.contains("fov_deg")) {
        if (!finite_number(sj["fov_deg"], v) || !(v > 0) || v > 360.0)
          issues.add(prefix + ".sensor.fov_deg: must be in (0, 360]");
        else
          r.sensor.fov_deg = v;
      }
      if (sj.contains("noise_slope")) {
        if (!finite_number(sj["noise_slope"], v) || !(v > 0))
          issues.add(prefix + ".sensor.noise_slope: must be positive");
        else
          r.sensor.noise_slope = v;
      }
      if (sj.contains("line_of_sight")) {
        if (!sj["line_of_sight"].is_boolean())
          issues.add(prefix + ".sensor.line_of_sight: must be a boolean");
        else
          r.sensor.line_of_sight = sj["line_of_sight"].get<bool>();
      }
    }
  }
}

void parse_landmark(const Json& j, std::size_t idx, const Scenario& s, Landmark& lm,
                    Issues& issues) {
  std::ostringstream prefix_os;
  prefix_os << "landmarks[" << idx << "]";
  std::string prefix = prefix_os.str();
  if (!j.is_object()) {
    issues.add(prefix + ": must be an object");
    return;
  }
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
    issues.add(prefix + ".id: missing or empty");
  } else {
    lm.id = j["id"].get<std::string>();
    prefix = "landmark \"" + lm.id + "\"";
  }
  if (!j.contains("mean") || !parse_vec2(j["mean"], lm.mean))
    issues.add(prefix + ".mean: must be [x, y]");
  if (!j.contains("cov")) {
    issues.add(prefix + ".cov: missing");
  } else {
    Mat2 raw;
    std::string why;
    if (!parse_mat2_flat(j["cov"], raw))
      issues.add(prefix + ".cov: must be 4 numbers, row-major");
    else if (!check_cov(raw, lm.cov, why))
      issues.add(prefix + ".cov: " + why);
  }
  lm.class_dist.assign(s.classes.size(),
                       s.classes.empty() ? 0.0 : 1.0 / static_cast<double>(s.classes.size()));
  if (j.contains("class_dist")) {
    const Json& cd = j["class_dist"];
    if (!cd.is_object()) {
      issues.add(prefix + ".class_dist: must be an object of class -> probability");
    } else {
      std::fill(lm.class_dist.begin(), lm.class_dist.end(), 0.0);
      double total = 0.0;
      bool ok = true;
      for (const auto& [name, vj] : cd.items()) {
        const auto it = std::find(s.classes.begin(), s.classes.end(), name);
        double v;
        if (it == s.classes.end()) {
          issues.add(prefix + ".class_dist: unknown class \"" + name + "\"");
          ok = false;
        } else if (!finite_number(vj, v) || v < 0.0) {
          issues.add(prefix + ".class_dist[\"" + name + "\"]: must be a probability");
          ok = false;
        } else {
          lm.class_dist[it - s.classes.begin()] = v;
          total += v;
        }
      }
      if (ok && std::abs(total - 1.0) > 1e-9)
        issues.add(prefix + ".class_dist: probabilities must sum to 1");
    }
  }
  if (j.contains("dynamics")) {
    const Json& dj = j["dynamics"];
    LinearDynamics dyn;
    bool ok = true;
    auto bad = [&](const std::string& why) {
      issues.add(prefix + ".dynamics: " + why);
      ok = false;
    };
    if (!dj.is_object()) {
      bad("must be an object");
    } else {
      if (!dj.contains("A") || !parse_mat2_flat(dj["A"], dyn.A)) bad("A must be 4 numbers");
      Mat2 rawQ = Mat2::Zero();
      std::string why;
      if (dj.contains("Q")) {
        if (!parse_mat2_flat(dj["Q"], rawQ))
          bad("Q must be 4 numbers");
        else if (!check_cov(rawQ, dyn.Q, why))
          bad("Q " + why);
      }
      int m = 0;
      if (dj.contains("B")) {
        const Json& bj = dj["B"];
        if (!bj.is_array() || bj.size() != 2 || !bj[0].is_array() ||
            bj[0].size() != bj[1].size()) {
          bad("B must be two equal-length rows");
        } else {
          m = static_cast<int>(bj[0].size());
          dyn.B.resize(2, m);
          for (int row = 0; row < 2; ++row)
            for (int col = 0; col < m; ++col) {
              double v;
              if (!finite_number(bj[row][col], v)) {
                bad("B entries must be numbers");
                row = 2;
                break;
              }
              dyn.B(row, col) = v;
            }
        }
      } else {
        dyn.B.resize(2, 0);
      }
      if (dj.contains("controls")) {
        for (const Json& cj : dj["controls"]) {
          if (!cj.is_array() || static_cast<int>(cj.size()) != m) {
            bad("each control must have one entry per column of B");
            break;
          }
          Eigen::VectorXd a(m);
          for (int k = 0; k < m; ++k) {
            double v;
            if (!finite_number(cj[k], v)) {
              bad("control entries must be numbers");
              break;
            }
            a(k) = v;
          }
          dyn.controls.push_back(a);
        }
      }
    }
    if (ok) lm.dynamics = dyn;
  }
}

void parse_planner(const Json& j, PlannerConfig& c, Issues& issues) {
  if (!j.is_object()) {
    issues.add("planner: must be an object");
    return;
  }
  auto want_num = [&](const char* key, double lo, double hi, bool lo_open, bool hi_open,
                      double& out) {
    if (!j.contains(key)) return;
    double v;
    if (!finite_number(j[key], v) || (lo_open ? !(v > lo) : !(v >= lo)) ||
        (hi_open ? !(v < hi) : !(v <= hi))) {
      std::ostringstream os;
      os << "planner." << key << ": must be in " << (lo_open ? "(" : "[") << lo << ", " << hi
         << (hi_open ? ")" : "]");
      issues.add(os.str());
    } else {
      out = v;
    }
  };
  auto want_int = [&](const char* key, long long lo, long long& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer() || j[key].get<long long>() < lo) {
      std::ostringstream os;
      os << "planner." << key << ": must be an integer >= " << lo;
      issues.add(os.str());
    } else {
      out = j[key].get<long long>();
    }
  };
  long long tmp;
  tmp = c.n_max;
  want_int("n_max", 1, tmp);
  c.n_max = static_cast<int>(tmp);
  want_num("tau", 0.0, kInfD, true, true, c.tau);
  want_num("p_rand", 0.5, 1.0, true, true, c.p_rand);
  want_num("p_new", 0.5, 1.0, true, true, c.p_new);
  if (j.contains("bias")) {
    if (!j["bias"].is_boolean())
      issues.add("planner.bias: must be a boolean");
    else
      c.bias = j["bias"].get<bool>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      issues.add("planner.seed: must be an integer");
    else
      c.seed = j["seed"].get<std::uint64_t>();
  }
  want_num("position_quantum", 0.0, kInfD, true, true, c.position_quantum);
  tmp = c.angle_bins;
  want_int("angle_bins", 1, tmp);
  c.angle_bins = static_cast<int>(tmp);
  tmp = c.dfa_state_cap;
  want_int("dfa_state_cap", 1, tmp);
  c.dfa_state_cap = static_cast<int>(tmp);
  tmp = c.dnf_term_cap;
  want_int("dnf_term_cap", 1, tmp);
  c.dnf_term_cap = static_cast<int>(tmp);
  want_int("node_cap", 1, c.node_cap);
  if (j.contains("stop_on_first")) {
    if (!j["stop_on_first"].is_boolean())
      issues.add("planner.stop_on_first: must be a boolean");
    else
      c.stop_on_first = j["stop_on_first"].get<bool>();
  }
  tmp = c.max_replans;
  want_int("max_replans", 0, tmp);
  c.max_replans = static_cast<int>(tmp);
}

void parse_ground_truth(const Json& j, Scenario& s, Issues& issues) {
  if (!j.is_object()) {
    issues.add("ground_truth: must be an object");
    return;
  }
  GroundTruthSpec gt;
  std::set<std::string> known_ids;
  for (const Landmark& lm : s.landmarks) known_ids.insert(lm.id);
  if (j.contains("positions") && j["positions"].is_object()) {
    for (const auto& [id, pj] : j["positions"].items()) {
      Vec2 p;
      if (!known_ids.count(id))
        issues.add("ground_truth.positions: unknown landmark \"" + id + "\"");
      else if (!parse_vec2(pj, p))
        issues.add("ground_truth.positions[\"" + id + "\"]: must be [x, y]");
      else
        gt.positions[id] = p;
    }
  } else {
    issues.add("ground_truth.positions: missing");
  }
  for (const std::string& id : known_ids)
    if (!gt.positions.count(id))
      issues.add("ground_truth.positions: no entry for landmark \"" + id + "\"");
  if (j.contains("classes")) {
    if (!j["classes"].is_object()) {
      issues.add("ground_truth.classes: must be an object of landmark -> class");
    } else {
      for (const auto& [id, cj] : j["classes"].items()) {
        if (!known_ids.count(id)) {
          issues.add("ground_truth.classes: unknown landmark \"" + id + "\"");
        } else if (!cj.is_string() ||
                   std::find(s.classes.begin(), s.classes.end(), cj.get<std::string>()) ==
                       s.classes.end()) {
          issues.add("ground_truth.classes[\"" + id + "\"]: must name a declared class");
        } else {
          gt.classes[id] = cj.get<std::string>();
        }
      }
    }
  }
  if (j.contains("detection_prob")) {
    double v;
    if (!finite_number(j["detection_prob"], v) || v < 0.0 || v > 1.0)
      issues.add("ground_truth.detection_prob: must be in [0, 1]");
    else
      gt.detection_prob = v;
  }
  if (j.contains("confusion")) {
    const Json& cj = j["confusion"];
    const int n = static_cast<int>(s.classes.size());
    bool ok = cj.is_array() && static_cast<int>(cj.size()) == n;
    if (ok) {
      gt.confusion.resize(n, n);
      for (int r = 0; r < n && ok; ++r) {
        ok = cj[r].is_array() && static_cast<int>(cj[r].size()) == n;
        double sum = 0.0;
        for (int c = 0; c < n && ok; ++c) {
          double v;
          ok = finite_number(cj[r][c], v) && v >= 0.0;
          if (ok) {
            gt.confusion(r, c) = v;
            sum += v;
          }
        }
        if (ok && std::abs(sum - 1.0) > 1e-9) {
          std::ostringstream os;
          os << "ground_truth.confusion: row " << r << " must sum to 1";
          issues.add(os.str());
        }
      }
    }
    if (!ok)
      issues.add("ground_truth.confusion: must be a class-by-class matrix of probabilities");
  }
  if (gt.detection_prob > 0.0) {
    if (gt.confusion.rows() == 0)
      issues.add("ground_truth.confusion: required when detection_prob > 0");
    for (const std::string& id : known_ids)
      if (!gt.classes.count(id))
        issues.add("ground_truth.classes: entry for \"" + id +
                   "\" required when detection_prob > 0");
  }
  if (j.contains("zero_noise")) {
    if (!j["zero_noise"].is_boolean())
      issues.add("ground_truth.zero_noise: must be a boolean");
    else
      gt.zero_noise = j["zero_noise"].get<bool>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned())
      issues.add("ground_truth.seed: must be an integer");
    else
      gt.seed = j["seed"].get<std::uint64_t>();
  }
  s.ground_truth = gt;
}

}  // namespace

std::vector<ApBinding> bind_universe(const ApUniverse& universe, const Scenario& s,
                                     std::vector<std::string>& issues) {
  SemanticMap map = s.initial_map();
  std::vector<ApBinding> out(universe.size());
  for (int i = 0; i < universe.size(); ++i) {
    const AtomicPredicate& ap = universe.ap(i);
    ApBinding& b = out[i];
    if (ap.kind == ApKind::Abstract) {
      issues.push_back("mission: unknown proposition \"" + ap.region + "\"");
      continue;
    }
    if (ap.robot >= 0 && ap.robot >= static_cast<int>(s.robots.size())) {
      std::ostringstream os;
      os << "mission: predicate " << ap.to_string() << " refers to robot " << (ap.robot + 1)
         << " but the scenario has " << s.robots.size();
      issues.push_back(os.str());
      continue;
    }
    switch (ap.kind) {
      case ApKind::Region: {
        auto it = s.workspace.regions.find(ap.region);
        if (it == s.workspace.regions.end())
          issues.push_back("mission: unknown region \"" + ap.region + "\"");
        else
          b.region = it->second;
        break;
      }
      case ApKind::NearLandmark:
      case ApKind::UncertaintyBelow:
      case ApKind::NearLandmarkClass: {
        b.landmark = map.landmark_index(ap.landmark);
        if (b.landmark < 0)
          issues.push_back("mission: unknown landmark \"" + ap.landmark + "\"");
        if (ap.kind == ApKind::NearLandmarkClass) {
          b.cls = map.class_index(ap.cls);
          if (b.cls < 0) issues.push_back("mission: unknown class \"" + ap.cls + "\"");
        }
        break;
      }
      default:
        break;
    }
  }
  return out;
}

Scenario parse_scenario(const Json& j) {
  Issues issues;
  Scenario s;
  if (!j.is_object()) {
    issues.add("top level: must be an object");
    throw ScenarioError(issues.v);
  }
  if (!j.contains("format") || !j["format"].is_string() ||
      j["format"].get<std::string>() != kScenarioFormatTag) {
    std::ostringstream os;
    os << "format: missing or unsupported (expected \"" << kScenarioFormatTag << "\")";
    issues.add(os.str());
  }
  if (j.contains("workspace"))
    parse_workspace(j["workspace"], s, issues);
  else
    issues.add("workspace: missing");

  if (j.contains("classes")) {
    if (!j["classes"].is_array()) {
      issues.add("classes: must be an array of names");
    } else {
      std::set<std::string> seen;
      for (const Json& cj : j["classes"]) {
        if (!cj.is_string() || cj.get<std::string>().empty())
          issues.add("classes: names must be nonempty strings");
        else if (!seen.insert(cj.get<std::string>()).second)
          issues.add("classes: duplicate name \"" + cj.get<std::string>() + "\"");
        else
          s.classes.push_back(cj.get<std::string>());
      }
    }
  }

  if (!j.contains("robots") || !j["robots"].is_array() || j["robots"].empty()) {
    issues.add("robots: at least one robot is required");
  } else {
    for (std::size_t i = 0; i < j["robots"].size(); ++i) {
      RobotSpec r;
      parse_robot(j["robots"][i], i, s, r, issues);
      s.robots.push_back(r);
    }
  }

  if (j.contains("landmarks")) {
    if (!j["landmarks"].is_array()) {
      issues.add("landmarks: must be an array");
    } else {
      std::set<std::string> ids;
      for (std::size_t i = 0; i < j["landmarks"].size(); ++i) {
        Landmark lm;
        parse_landmark(j["landmarks"][i], i, s, lm, issues);
        if (!lm.id.empty() && !ids.insert(lm.id).second)
          issues.add("landmarks: duplicate id \"" + lm.id + "\"");
        s.landmarks.push_back(lm);
      }
    }
  }

  if (!j.contains("mission") || (!j["mission"].is_string() && !j["mission"].is_array())) {
    issues.add("mission: missing (string or array of lines)");
  } else if (j["mission"].is_string()) {
    s.mission_text = j["mission"].get<std::string>();
  } else {
    std::ostringstream os;
    bool first = true;
    for (const Json& line : j["mission"]) {
      if (!line.is_string()) {
        issues.add("mission: lines must be strings");
        break;
      }
      if (!first) os << "\n";
      os << line.get<std::string>();
      first = false;
    }
    s.mission_text = os.str();
  }
  if (!s.mission_text.empty()) {
    try {
      s.mission = parse_mission(s.mission_text);
      s.bindings = bind_universe(s.mission.universe, s, issues.v);
    } catch (const ParseError& e) {
      std::ostringstream os;
      os << "mission: " << e.what();
      issues.add(os.str());
    } catch (const std::exception& e) {
      issues.add(std::string("mission: ") + e.what());
    }
  } else if (j.contains("mission")) {
    issues.add("mission: empty");
  }

  if (j.contains("planner")) parse_planner(j["planner"], s.planner, issues);
  if (j.contains("ground_truth") && !s.landmarks.empty())
    parse_ground_truth(j["ground_truth"], s, issues);

  if (!issues.v.empty()) throw ScenarioError(issues.v);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({"cannot open file: " + path});
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError({std::string("parse error: ") + e.what()});
  }
  return parse_scenario(j);
}

namespace {

Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Json mat2_flat_json(const Mat2& m) { return Json::array({m(0, 0), m(0, 1), m(1, 0), m(1, 1)}); }

Json polygon_json(const ConvexPolygon& p) {
  Json out = Json::array();
  for (const Vec2& v : p.pts) out.push_back(vec2_json(v));
  return out;
}

}  // namespace

Json scenario_to_json(const Scenario& s) {
  Json j;
  j["format"] = kScenarioFormatTag;
  Json ws;
  ws["bounds"] = Json::array({vec2_json(s.workspace.bounds.lo), vec2_json(s.workspace.bounds.hi)});
  ws["resolution"] = s.resolution;
  Json obs = Json::array();
  for (const ConvexPolygon& p : s.workspace.obstacles) obs.push_back(polygon_json(p));
  ws["obstacles"] = obs;
  Json regions = Json::object();
  for (const auto& [name, poly] : s.workspace.regions) regions[name] = polygon_json(poly);
  ws["regions"] = regions;
  j["workspace"] = ws;
  j["classes"] = s.classes;
  Json robots = Json::array();
  for (const RobotSpec& r : s.robots) {
    Json rj;
    rj["start"] = Json::array({r.start.x, r.start.y, r.start.theta});
    Json pairs = Json::array();
    for (const Primitive& p : r.primitives) pairs.push_back(Json::array({p.u, p.omega_deg}));
    rj["primitives"] = Json{{"pairs", pairs}};
    rj["sensor"] = Json{{"range", r.sensor.range},
                        {"fov_deg", r.sensor.fov_deg},
                        {"noise_slope", r.sensor.noise_slope},
                        {"line_of_sight", r.sensor.line_of_sight}};
    robots.push_back(rj);
  }
  j["robots"] = robots;
  Json lms = Json::array();
  for (const Landmark& lm : s.landmarks) {
    Json lj;
    lj["id"] = lm.id;
    lj["mean"] = vec2_json(lm.mean);
    lj["cov"] = mat2_flat_json(lm.cov);
    Json cd = Json::object();
    for (std::size_t c = 0; c < s.classes.size(); ++c) cd[s.classes[c]] = lm.class_dist[c];
    lj["class_dist"] = cd;
    if (lm.dynamics) {
      const LinearDynamics& dyn = *lm.dynamics;
      Json dj;
      dj["A"] = mat2_flat_json(dyn.A);
      Json brows = Json::array();
      for (int r = 0; r < 2; ++r) {
        Json row = Json::array();
        for (int c = 0; c < dyn.B.cols(); ++c) row.push_back(dyn.B(r, c));
        brows.push_back(row);
      }
      dj["B"] = brows;
      dj["Q"] = mat2_flat_json(dyn.Q);
      Json ctrls = Json::array();
      for (const Eigen::VectorXd& a : dyn.controls) {
        Json row = Json::array();
        for (int k = 0; k < a.size(); ++k) row.push_back(a(k));
        ctrls.push_back(row);
      }
      dj["controls"] = ctrls;
      lj["dynamics"] = dj;
    }
    lms.push_back(lj);
  }
  j["landmarks"] = lms;
  j["mission"] = s.mission_text;
  const PlannerConfig& c = s.planner;
  j["planner"] = Json{{"n_max", c.n_max},
                      {"tau", c.tau},
                      {"p_rand", c.p_rand},
                      {"p_new", c.p_new},
                      {"bias", c.bias},
                      {"seed", c.seed},
                      {"position_quantum", c.position_quantum},
                      {"angle_bins", c.angle_bins},
                      {"dfa_state_cap", c.dfa_state_cap},
                      {"dnf_term_cap", c.dnf_term_cap},
                      {"node_cap", c.node_cap},
                      {"stop_on_first", c.stop_on_first},
                      {"max_replans", c.max_replans}};
  if (s.ground_truth) {
    const GroundTruthSpec& gt = *s.ground_truth;
    Json gj;
    Json pos = Json::object();
    for (const auto& [id, p] : gt.positions) pos[id] = vec2_json(p);
    gj["positions"] = pos;
    Json cls = Json::object();
    for (const auto& [id, name] : gt.classes) cls[id] = name;
    gj["classes"] = cls;
    if (gt.confusion.rows() > 0) {
      Json conf = Json::array();
      for (int r = 0; r < gt.confusion.rows(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < gt.confusion.cols(); ++c) row.push_back(gt.confusion(r, c));
        conf.push_back(row);
      }
      gj["confusion"] = conf;
    }
    gj["detection_prob"] = gt.detection_prob;
    gj["zero_noise"] = gt.zero_noise;
    gj["seed"] = gt.seed;
    j["ground_truth"] = gj;
  }
  return j;
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError({"cannot write file: " + path});
  out << scenario_to_json(s).dump(2) << "\n";
}

}  // namespace semplan
