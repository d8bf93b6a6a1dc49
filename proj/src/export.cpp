#include "semplan/export.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "semplan/dfa.hpp"

namespace semplan {

namespace {

const char* kRobotColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                              "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

struct SvgFrame {
  double x0, y0, x1, y1, scale, margin;

  double px(double x) const { return margin + (x - x0) * scale; }
  double py(double y) const { return margin + (y1 - y) * scale; }  // y grows upward
  double width() const { return 2 * margin + (x1 - x0) * scale; }
  double height() const { return 2 * margin + (y1 - y0) * scale; }
};

void polygon_path(const ConvexPolygon& poly, const SvgFrame& f, std::ostream& os) {
  os << "M ";
  for (std::size_t i = 0; i < poly.pts.size(); ++i) {
    if (i > 0) os << " L ";
    os << f.px(poly.pts[i].x()) << ' ' << f.py(poly.pts[i].y());
  }
  os << " Z";
}

void ellipse_svg(const Vec2& mean, const Mat2& cov, double confidence, const SvgFrame& f,
                 const std::string& style, std::ostream& os) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
  const double chi = chi2_quantile_2dof(confidence);
  const double a = std::sqrt(std::max(es.eigenvalues()(1), 0.0) * chi);
  const double b = std::sqrt(std::max(es.eigenvalues()(0), 0.0) * chi);
  const Vec2 axis = es.eigenvectors().col(1);
  const double angle = -std::atan2(axis.y(), axis.x()) * 180.0 / kPi;  // screen y is flipped
  os << "  <ellipse cx=\"" << f.px(mean.x()) << "\" cy=\"" << f.py(mean.y()) << "\" rx=\""
     << std::max(a * f.scale, 1.0) << "\" ry=\"" << std::max(b * f.scale, 1.0)
     << "\" transform=\"rotate(" << angle << ' ' << f.px(mean.x()) << ' ' << f.py(mean.y())
     << ")\" " << style << "/>\n";
}

}  // namespace

void write_plan_svg(const Scenario& scenario, const Plan& plan, std::ostream& os) {
  const Rect& b = scenario.workspace.bounds;
  SvgFrame f{};
  f.x0 = b.lo.x();
  f.y0 = b.lo.y();
  f.x1 = b.hi.x();
  f.y1 = b.hi.y();
  f.margin = 20.0;
  f.scale = 760.0 / std::max(b.width(), b.height());

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width() << "\" height=\""
     << f.height() << "\" viewBox=\"0 0 " << f.width() << ' ' << f.height() << "\">\n";
  os << "  <rect x=\"" << f.px(f.x0) << "\" y=\"" << f.py(f.y1) << "\" width=\""
     << (f.x1 - f.x0) * f.scale << "\" height=\"" << (f.y1 - f.y0) * f.scale
     << "\" fill=\"#fcfcfa\" stroke=\"#333\" stroke-width=\"1.5\"/>\n";

  for (const ConvexPolygon& poly : scenario.workspace.obstacles) {
    os << "  <path d=\"";
    polygon_path(poly, f, os);
    os << "\" fill=\"#9a9a9a\" stroke=\"#555\" stroke-width=\"1\"/>\n";
  }
  for (const auto& [name, poly] : scenario.workspace.regions) {
    os << "  <path d=\"";
    polygon_path(poly, f, os);
    os << "\" fill=\"#7fbf7f\" fill-opacity=\"0.25\" stroke=\"#2d7f2d\" "
          "stroke-width=\"1\" stroke-dasharray=\"5 3\"/>\n";
    const Vec2 c = poly.centroid();
    os << "  <text x=\"" << f.px(c.x()) << "\" y=\"" << f.py(c.y())
       << "\" font-size=\"12\" fill=\"#2d7f2d\" text-anchor=\"middle\">" << name
       << "</text>\n";
  }

  if (!plan.steps.empty()) {
    const PlanStep& first = plan.steps.front();
    const PlanStep& last = plan.steps.back();
    for (std::size_t k = 0; k < first.means.size(); ++k) {
      ellipse_svg(first.means[k], first.covs[k], 0.9, f,
                  "fill=\"#6b8cc9\" fill-opacity=\"0.15\" stroke=\"#6b8cc9\" "
                  "stroke-width=\"1\" stroke-dasharray=\"3 3\"",
                  os);
      ellipse_svg(last.means[k], last.covs[k], 0.9, f,
                  "fill=\"none\" stroke=\"#27408b\" stroke-width=\"1.5\"", os);
      os << "  <circle cx=\"" << f.px(last.means[k].x()) << "\" cy=\""
         << f.py(last.means[k].y()) << "\" r=\"2.5\" fill=\"#27408b\"/>\n";
      os << "  <text x=\"" << f.px(last.means[k].x()) + 5 << "\" y=\""
         << f.py(last.means[k].y()) - 5 << "\" font-size=\"11\" fill=\"#27408b\">"
         << scenario.landmarks[k].id << "</text>\n";
    }
  }

  const std::size_t N = scenario.robots.size();
  for (std::size_t j = 0; j < N; ++j) {
    const char* color = kRobotColors[j % (sizeof(kRobotColors) / sizeof(kRobotColors[0]))];
    os << "  <polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"";
    for (const PlanStep& s : plan.steps)
      os << f.px(s.poses[j].x) << ',' << f.py(s.poses[j].y) << ' ';
    os << "\"/>\n";
    if (!plan.steps.empty()) {
      const Pose& start = plan.steps.front().poses[j];
      const Pose& end = plan.steps.back().poses[j];
      os << "  <circle cx=\"" << f.px(start.x) << "\" cy=\"" << f.py(start.y)
         << "\" r=\"4\" fill=\"" << color << "\"/>\n";
      os << "  <rect x=\"" << f.px(end.x) - 3.5 << "\" y=\"" << f.py(end.y) - 3.5
         << "\" width=\"7\" height=\"7\" fill=\"" << color << "\"/>\n";
    }
  }
  os << "</svg>\n";
}

void write_mission_dot(const Scenario& scenario, std::ostream& os) {
  Dfa dfa = build_dfa(*scenario.mission.store, scenario.mission.mission,
                      scenario.planner.dfa_state_cap);
  to_dot(dfa, *scenario.mission.store, scenario.mission.universe, os);
}

void write_plan_det_csv(const Scenario& scenario, const Plan& plan, std::ostream& os) {
  os << "step";
  for (const Landmark& lm : scenario.landmarks) os << ",det_" << lm.id;
  os << "\n";
  for (std::size_t t = 0; t < plan.steps.size(); ++t) {
    os << t;
    for (const Mat2& c : plan.steps[t].covs) os << ',' << c.determinant();
    os << "\n";
  }
}

}  // namespace semplan
