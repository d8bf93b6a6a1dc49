#include "semplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <sstream>

namespace semplan {

ConvexPolygon ConvexPolygon::rect(const Rect& r) {
  ConvexPolygon p;
  p.pts = {r.lo, Vec2(r.hi.x(), r.lo.y()), r.hi, Vec2(r.lo.x(), r.hi.y())};
  return p;
}

double ConvexPolygon::signed_area() const {
  double a = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = pts[i];
    const Vec2& q = pts[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

bool ConvexPolygon::normalize() {
  if (pts.size() < 3) return false;
  const double a = signed_area();
  if (std::abs(a) < 1e-12) return false;
  if (a < 0.0) std::reverse(pts.begin(), pts.end());
  return is_convex();
}

bool ConvexPolygon::is_convex() const {
  const std::size_t n = pts.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e1 = pts[(i + 1) % n] - pts[i];
    const Vec2 e2 = pts[(i + 2) % n] - pts[(i + 1) % n];
    const double cross = e1.x() * e2.y() - e1.y() * e2.x();
    if (cross < -1e-12) return false;
  }
  return true;
}

bool ConvexPolygon::contains(const Vec2& p) const {
  const std::size_t n = pts.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = pts[(i + 1) % n] - pts[i];
    const Vec2 w = p - pts[i];
    if (e.x() * w.y() - e.y() * w.x() < -1e-12) return false;
  }
  return true;
}

Vec2 ConvexPolygon::centroid() const {
  Vec2 c(0, 0);
  double a = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = pts[i];
    const Vec2& q = pts[(i + 1) % n];
    const double w = p.x() * q.y() - q.x() * p.y();
    a += w;
    c += (p + q) * w;
  }
  if (std::abs(a) < 1e-15) return pts.empty() ? Vec2(0, 0) : pts[0];
  return c / (3.0 * a);
}

std::vector<std::string> Workspace::validate() const {
  std::vector<std::string> issues;
  if (!bounds.valid()) issues.push_back("workspace bounds are degenerate");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    ConvexPolygon p = obstacles[i];
    if (!p.normalize())
      issues.push_back("obstacle " + std::to_string(i) + " is degenerate or non-convex");
  }
  for (const auto& [name, poly] : regions) {
    ConvexPolygon p = poly;
    if (!p.normalize()) {
      issues.push_back("region '" + name + "' is degenerate or non-convex");
      continue;
    }
    bool touches = false;
    for (const Vec2& v : p.pts)
      if (bounds.contains(v)) touches = true;
    if (bounds.valid() && p.contains(Vec2(bounds.lo) + Vec2(bounds.width() / 2, bounds.height() / 2)))
      touches = true;
    if (!touches) issues.push_back("region '" + name + "' does not intersect the workspace bounds");
  }
  return issues;
}

bool Workspace::point_in_obstacle(const Vec2& p) const {
  for (const ConvexPolygon& poly : obstacles)
    if (poly.contains(p)) return true;
  return false;
}

namespace {

// Proper/boundary intersection of segments ab and cd.
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
  };
  auto on_seg = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x(), q.x()) - 1e-12 <= r.x() && r.x() <= std::max(p.x(), q.x()) + 1e-12 &&
           std::min(p.y(), q.y()) - 1e-12 <= r.y() && r.y() <= std::max(p.y(), q.y()) + 1e-12;
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_seg(a, b, c)) return true;
  if (o2 == 0 && on_seg(a, b, d)) return true;
  if (o3 == 0 && on_seg(c, d, a)) return true;
  if (o4 == 0 && on_seg(c, d, b)) return true;
  return false;
}

}  // namespace

bool Workspace::segment_blocked(const Vec2& a, const Vec2& b) const {
  for (const ConvexPolygon& poly : obstacles) {
    if (poly.contains(a) || poly.contains(b)) return true;
    const std::size_t n = poly.pts.size();
    for (std::size_t i = 0; i < n; ++i)
      if (segments_intersect(a, b, poly.pts[i], poly.pts[(i + 1) % n])) return true;
  }
  return false;
}

double default_resolution(const Workspace& ws) {
  return std::min(ws.bounds.width(), ws.bounds.height()) / 64.0;
}

OccupancyGrid rasterize(const Workspace& ws, double resolution) {
  if (resolution <= 0.0) throw std::invalid_argument("rasterize: resolution must be positive");
  if (!ws.bounds.valid()) throw std::invalid_argument("rasterize: degenerate workspace bounds");
  OccupancyGrid g;
  g.resolution = resolution;
  g.origin = ws.bounds.lo;
  g.nx = static_cast<int>(std::ceil(ws.bounds.width() / resolution - 1e-9));
  g.ny = static_cast<int>(std::ceil(ws.bounds.height() / resolution - 1e-9));
  g.nx = std::max(g.nx, 1);
  g.ny = std::max(g.ny, 1);
  g.occ.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x) {
      const Cell c{x, y};
      if (ws.point_in_obstacle(g.center(c))) g.occ[static_cast<std::size_t>(g.index(c))] = 1;
    }
  return g;
}

namespace {

DistanceField dijkstra_field(const OccupancyGrid& grid, const std::vector<Cell>& seeds,
                             const std::unordered_set<int>& extra_obstacles) {
  auto blocked = [&](const Cell& c) {
    return grid.occupied(c) || extra_obstacles.count(grid.index(c)) > 0;
  };
  DistanceField f;
  f.nx = grid.nx;
  f.ny = grid.ny;
  f.resolution = grid.resolution;
  f.origin = grid.origin;
  f.d.assign(static_cast<std::size_t>(grid.nx) * grid.ny, kInfD);

  using QItem = std::pair<double, int>;  // (distance, cell index)
  std::priority_queue<QItem, std::vector<QItem>, std::greater<>> pq;
  for (const Cell& goal : seeds) {
    if (!grid.inside(goal)) continue;
    f.goal = goal;
    f.d[static_cast<std::size_t>(grid.index(goal))] = 0.0;
    pq.emplace(0.0, grid.index(goal));
  }

  const double diag = std::sqrt(2.0) * grid.resolution;
  while (!pq.empty()) {
    const auto [dist, idx] = pq.top();
    pq.pop();
    if (dist > f.d[static_cast<std::size_t>(idx)] + 1e-15) continue;
    const Cell c{idx % grid.nx, idx / grid.nx};
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell n{c.x + dx, c.y + dy};
        if (!grid.inside(n) || blocked(n)) continue;
        const double w = (dx != 0 && dy != 0) ? diag : grid.resolution;
        const double nd = dist + w;
        auto& slot = f.d[static_cast<std::size_t>(grid.index(n))];
        if (nd < slot - 1e-15) {
          slot = nd;
          pq.emplace(nd, grid.index(n));
        }
      }
  }
  return f;
}

}  // namespace

DistanceField distance_field(const OccupancyGrid& grid, const Cell& goal,
                             const std::unordered_set<int>& extra_obstacles) {
  if (!grid.inside(goal)) throw std::invalid_argument("distance_field: goal outside grid");
  if (grid.occupied(goal) || extra_obstacles.count(grid.index(goal)) > 0)
    throw std::invalid_argument("distance_field: goal cell is occupied");
  return dijkstra_field(grid, {goal}, extra_obstacles);
}

DistanceField distance_field_multi(const OccupancyGrid& grid, const std::vector<Cell>& goals,
                                   const std::unordered_set<int>& extra_obstacles) {
  return dijkstra_field(grid, goals, extra_obstacles);
}

double chi2_quantile_2dof(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("chi2_quantile_2dof: epsilon must be in (0, 1)");
  return -2.0 * std::log(1.0 - epsilon);
}

std::vector<int> confidence_ellipse_cells(const Vec2& mean, const Mat2& cov, double epsilon,
                                          const OccupancyGrid& grid) {
  const double chi2 = chi2_quantile_2dof(epsilon);

  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (cov + cov.transpose()));
  const Vec2 evals = es.eigenvalues();
  const Mat2 evecs = es.eigenvectors();
  const double lmax = std::max(evals(1), 0.0);
  const double degenerate_tol = std::max(lmax, 1.0) * 1e-12;

  // Quadratic form via pseudo-inverse: components along near-zero axes must
  // vanish for membership, the rest use 1/lambda.
  auto inside = [&](const Vec2& p) {
    const Vec2 w = evecs.transpose() * (p - mean);
    double q = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double lam = evals(i);
      if (lam <= degenerate_tol) {
        if (sq(w(i)) > degenerate_tol * chi2) return false;
      } else {
        q += sq(w(i)) / lam;
      }
    }
    return q <= chi2;
  };

  std::vector<int> cells;
  const Cell mean_cell = grid.cell_of(mean);
  if (grid.inside(mean_cell)) cells.push_back(grid.index(mean_cell));

  // Bounding box of the ellipse in world coordinates.
  const double r = std::sqrt(std::max(lmax * chi2, 0.0)) + grid.resolution;
  const Cell lo = grid.cell_of(mean - Vec2(r, r));
  const Cell hi = grid.cell_of(mean + Vec2(r, r));
  for (int y = std::max(lo.y, 0); y <= std::min(hi.y, grid.ny - 1); ++y)
    for (int x = std::max(lo.x, 0); x <= std::min(hi.x, grid.nx - 1); ++x) {
      const Cell c{x, y};
      if (c == mean_cell) continue;
      if (inside(grid.center(c))) cells.push_back(grid.index(c));
    }
  std::sort(cells.begin(), cells.end());
  return cells;
}

void write_csv(const DistanceField& f, std::ostream& os) {
  for (int y = 0; y < f.ny; ++y) {
    for (int x = 0; x < f.nx; ++x) {
      if (x) os << ',';
      const double v = f.d[static_cast<std::size_t>(y * f.nx + x)];
      if (std::isinf(v))
        os << "inf";
      else
        os << v;
    }
    os << '\n';
  }
}

}  // namespace semplan
