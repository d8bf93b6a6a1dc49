#pragma once

#include "semplan/formula.hpp"
#include "semplan/geometry.hpp"
#include "semplan/util.hpp"

#include <optional>
#include <string>
#include <vector>

namespace semplan {

/// Robot pose: position plus heading, heading kept in (-pi, pi].
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return Vec2(x, y); }
};

/// Known linear dynamics of a mobile landmark:
///   x(t+1) = A x(t) + B a(t) + w,  w ~ N(0, Q),
/// with a published control schedule a(0), a(1), ... An exhausted schedule
/// holds its last control (an empty schedule means zero input).
struct LinearDynamics {
  Mat2 A = Mat2::Identity();
  Eigen::MatrixXd B;  // 2 x m
  std::vector<Eigen::VectorXd> controls;
  Mat2 Q = Mat2::Zero();

  Eigen::VectorXd control_at(int t) const;
};

struct Landmark {
  std::string id;
  Vec2 mean{0, 0};
  Mat2 cov = Mat2::Zero();
  std::vector<double> class_dist;  // over the scenario's class list, sums to 1
  std::optional<LinearDynamics> dynamics;  // nullopt = static

  bool is_static() const { return !dynamics.has_value(); }
};

/// Gaussian semantic map estimate: per-landmark position distributions plus
/// discrete class distributions, landmarks mutually independent.
struct SemanticMap {
  std::vector<std::string> classes;
  std::vector<Landmark> landmarks;

  int landmark_index(const std::string& id) const;
  int class_index(const std::string& name) const;
};

/// P(||p - x|| <= r) for x ~ N(mean, cov). Evaluated by deterministic
/// adaptive quadrature in whitened coordinates (the ball maps to an ellipse),
/// absolute tolerance 1e-6. Singular covariances reduce to the 1D/point-mass
/// limits analytically. Throws on r <= 0 or a non-PSD covariance.
double prob_within_ball(const Vec2& p, const Vec2& mean, const Mat2& cov, double r);

/// Names in an atomic predicate resolved against a scenario. The region
/// polygon is stored by value so bindings survive copies.
struct ApBinding {
  int landmark = -1;
  int cls = -1;
  std::optional<ConvexPolygon> region;
};

/// Truth value of one predicate against robot positions and the map.
bool eval_predicate(const AtomicPredicate& ap, const ApBinding& binding,
                    const std::vector<Pose>& robots, const SemanticMap& map);

/// The label L(p, M): bitmask of all true predicates in the universe.
Valuation label(const ApUniverse& universe, const std::vector<ApBinding>& bindings,
                const std::vector<Pose>& robots, const SemanticMap& map);

}  // namespace semplan
