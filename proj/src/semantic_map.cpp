#include "semplan/semantic_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace semplan {

Eigen::VectorXd LinearDynamics::control_at(int t) const {
  if (controls.empty()) return Eigen::VectorXd::Zero(B.cols());
  const std::size_t i = std::min<std::size_t>(t < 0 ? 0 : t, controls.size() - 1);
  return controls[i];
}

int SemanticMap::landmark_index(const std::string& id) const {
  for (std::size_t i = 0; i < landmarks.size(); ++i)
    if (landmarks[i].id == id) return static_cast<int>(i);
  return -1;
}

int SemanticMap::class_index(const std::string& name) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrtHalfPi = 1.2533141373155003;  // sqrt(pi/2)

// Mass collected along the ray from z0 in direction (cos th, sin th) out to
// radius R, for a standard 2D normal:
//   integral_0^R s * exp(-(|z0|^2 + 2 b s + s^2)/2) ds
// with b the component of z0 along the ray and perp2 the squared distance of
// the ray's supporting line from the origin. perp2 is passed in rather than
// recovered as |z0|^2 - b^2, which cancels catastrophically far from the
// origin. The closed form keeps every exponent nonpositive, so it cannot
// overflow.
double ray_mass(double c, double b, double perp2, double R) {
  if (R <= 0) return 0.0;
  const double first = std::exp(-0.5 * c);
  const double rb = R + b;
  const double second = std::exp(-0.5 * (rb * rb + perp2));
  const double erf_hi = std::erf(rb / kSqrt2);
  const double erf_lo = std::erf(b / kSqrt2);
  const double third = b * kSqrtHalfPi * std::exp(-0.5 * perp2) * (erf_hi - erf_lo);
  return first - second - third;
}

struct BallIntegrand {
  double z0x, z0y;  // ball centre in whitened coordinates
  double s1, s2;    // covariance eigenvalues (ellipse axis scales)
  double r;

  double operator()(double th) const {
    const double ct = std::cos(th);
    const double st = std::sin(th);
    const double denom = s1 * ct * ct + s2 * st * st;
    const double R = r / std::sqrt(denom);
    const double b = z0x * ct + z0y * st;
    const double cross = z0x * st - z0y * ct;
    const double c = z0x * z0x + z0y * z0y;
    return ray_mass(c, b, cross * cross, R);
  }
};

double simpson(double fa, double fm, double fb, double h) {
  return h / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const BallIntegrand& f, double a, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(fa, flm, fm, m - a);
  const double right = simpson(fm, frm, fb, b - m);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate_ball(const BallIntegrand& f, double lo, double hi) {
  // Split the angular window into eight panels so narrow ellipse lobes are
  // seen even at the first refinement level. The result is normalized by the
  // full circle regardless of the window.
  const int panels = 8;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double a = lo + (hi - lo) * i / panels;
    const double b = lo + (hi - lo) * (i + 1) / panels;
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    const double whole = simpson(fa, fm, fb, b - a);
    total += adaptive_simpson(f, a, b, fa, fm, fb, whole, 1e-8 / panels, 40);
  }
  return total / (2.0 * kPi);
}

}  // namespace

double prob_within_ball(const Vec2& p, const Vec2& mean, const Mat2& cov, double r) {
  if (!(r > 0)) throw std::invalid_argument("prob_within_ball: radius must be positive");
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (cov + cov.transpose()));
  const double s_small = es.eigenvalues()(0);
  const double s_big = es.eigenvalues()(1);
  const double tol = 1e-12 * std::max(1.0, std::abs(s_big));
  if (s_small < -tol)
    throw std::invalid_argument("prob_within_ball: covariance is not positive semidefinite");

  const Vec2 d = p - mean;
  if (s_big <= tol) {
    // Point mass at the mean.
    return d.norm() <= r ? 1.0 : 0.0;
  }
  if (s_small <= 1e-13 * s_big) {
    // Mass concentrated on the line mean + t * v_big. Split the offset into
    // components along and across that line; the ball intersects it in a
    // segment (possibly empty).
    const Vec2 axis = es.eigenvectors().col(1);
    const Vec2 perp = es.eigenvectors().col(0);
    const double alpha = d.dot(axis);
    const double beta = d.dot(perp);
    const double under = r * r - beta * beta;
    if (under <= 0) return 0.0;
    const double w = std::sqrt(under);
    const double sd = std::sqrt(s_big);
    return normal_cdf((alpha + w) / sd) - normal_cdf((alpha - w) / sd);
  }

  const double sq1 = std::sqrt(s_small);
  const double sq2 = std::sqrt(s_big);
  // Whitened offset z0 = S^{-1/2} V^T d.
  const double z1 = es.eigenvectors().col(0).dot(d) / sq1;
  const double z2 = es.eigenvectors().col(1).dot(d) / sq2;
  const double znorm = std::hypot(z1, z2);
  // The ball maps to an ellipse with semi-axes r/sqrt(s) centred on z0, so
  // every point of it lies at least znorm - r/sq1 whitened units out. Past 8
  // the enclosed mass is under 2e-14, far below the advertised tolerance, and
  // skipping the quadrature keeps distant evaluations cheap.
  if (znorm - r / sq1 > 8.0) return 0.0;

  BallIntegrand f{z1, z2, s_small, s_big, r};
  double lo = 0.0, hi = 2.0 * kPi;
  if (znorm > 8.0) {
    // Far-away centre: every ray that ever comes within 12 whitened units of
    // the origin (density 2e-32 outside) lies in a narrow cone around the
    // direction pointing back at it. Integrating only that cone keeps the
    // panels aligned with the visible lobe; everything outside contributes
    // less than 1e-13.
    const double th_star = std::atan2(-z2, -z1);
    const double phi = std::asin(std::min(1.0, 12.0 / znorm));
    lo = th_star - phi;
    hi = th_star + phi;
  }
  const double val = integrate_ball(f, lo, hi);
  return std::clamp(val, 0.0, 1.0);
}

bool eval_predicate(const AtomicPredicate& ap, const ApBinding& binding,
                    const std::vector<Pose>& robots, const SemanticMap& map) {
  auto robot_pos = [&](int j) -> Vec2 {
    if (j < 0 || j >= static_cast<int>(robots.size()))
      throw std::out_of_range("eval_predicate: robot index out of range");
    return robots[j].position();
  };
  switch (ap.kind) {
    case ApKind::Region: {
      if (!binding.region) throw std::logic_error("eval_predicate: unbound region predicate");
      return binding.region->contains(robot_pos(ap.robot));
    }
    case ApKind::NearLandmark: {
      const Landmark& lm = map.landmarks.at(binding.landmark);
      const double pr = prob_within_ball(robot_pos(ap.robot), lm.mean, lm.cov, ap.radius);
      return pr >= 1.0 - ap.delta;
    }
    case ApKind::UncertaintyBelow: {
      const Landmark& lm = map.landmarks.at(binding.landmark);
      return lm.cov.determinant() <= ap.delta;
    }
    case ApKind::NearLandmarkClass: {
      const Landmark& lm = map.landmarks.at(binding.landmark);
      const double pr = prob_within_ball(robot_pos(ap.robot), lm.mean, lm.cov, ap.radius);
      const double pc = lm.class_dist.at(binding.cls);
      return pr * pc >= 1.0 - ap.delta;
    }
    case ApKind::Abstract:
      throw std::logic_error("eval_predicate: abstract proposition has no map semantics");
  }
  throw std::logic_error("eval_predicate: unknown predicate kind");
}

Valuation label(const ApUniverse& universe, const std::vector<ApBinding>& bindings,
                const std::vector<Pose>& robots, const SemanticMap& map) {
  Valuation v = 0;
  for (int i = 0; i < universe.size(); ++i) {
    if (eval_predicate(universe.ap(i), bindings.at(i), robots, map))
      v |= Valuation{1} << i;
  }
  return v;
}

}  // namespace semplan
