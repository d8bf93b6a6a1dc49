#pragma once

#include "semplan/util.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace semplan {

struct Rect {
  Vec2 lo{0, 0};
  Vec2 hi{0, 0};

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  bool valid() const { return width() > 0.0 && height() > 0.0; }
  bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }
};

/// Convex polygon with vertices stored counter-clockwise. Containment is
/// closed (boundary points count as inside).
struct ConvexPolygon {
  std::vector<Vec2> pts;

  static ConvexPolygon rect(const Rect& r);

  /// Signed area (positive for CCW ordering).
  double signed_area() const;
  /// Reorders to CCW if needed; returns false if the polygon is degenerate
  /// (fewer than 3 vertices or near-zero area).
  bool normalize();
  bool is_convex() const;
  bool contains(const Vec2& p) const;
  Vec2 centroid() const;
};

struct Workspace {
  Rect bounds;
  std::vector<ConvexPolygon> obstacles;
  // Ordered by name so serialization is canonical.
  std::map<std::string, ConvexPolygon> regions;

  /// Collects every structural problem (empty result means valid):
  /// degenerate bounds, non-convex/degenerate polygons, regions that do not
  /// intersect the bounds.
  std::vector<std::string> validate() const;

  bool point_in_obstacle(const Vec2& p) const;
  /// True if the open segment a->b crosses any obstacle (used for
  /// line-of-sight checks).
  bool segment_blocked(const Vec2& a, const Vec2& b) const;
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell& o) const { return x == o.x && y == o.y; }
};

struct OccupancyGrid {
  double resolution = 0.0;
  Vec2 origin{0, 0};  // world position of the (0,0) cell's lower-left corner
  int nx = 0;
  int ny = 0;
  std::vector<std::uint8_t> occ;  // row-major, y*nx + x

  bool inside(const Cell& c) const { return c.x >= 0 && c.x < nx && c.y >= 0 && c.y < ny; }
  int index(const Cell& c) const { return c.y * nx + c.x; }
  bool occupied(const Cell& c) const { return occ[static_cast<std::size_t>(index(c))] != 0; }
  Vec2 center(const Cell& c) const {
    return origin + Vec2((c.x + 0.5) * resolution, (c.y + 0.5) * resolution);
  }
  /// Cell containing a world point (may be outside the grid).
  Cell cell_of(const Vec2& p) const {
    return Cell{static_cast<int>(std::floor((p.x() - origin.x()) / resolution)),
                static_cast<int>(std::floor((p.y() - origin.y()) / resolution))};
  }
};

/// Grid distance-to-goal field in meters; unreachable/blocked cells hold +inf.
struct DistanceField {
  int nx = 0;
  int ny = 0;
  double resolution = 0.0;
  Vec2 origin{0, 0};
  Cell goal{0, 0};
  std::vector<double> d;

  double at_cell(const Cell& c) const {
    if (c.x < 0 || c.x >= nx || c.y < 0 || c.y >= ny) return kInfD;
    return d[static_cast<std::size_t>(c.y * nx + c.x)];
  }
  double at_point(const Vec2& p) const {
    return at_cell(Cell{static_cast<int>(std::floor((p.x() - origin.x()) / resolution)),
                        static_cast<int>(std::floor((p.y() - origin.y()) / resolution))});
  }
};

/// Rasterizes the workspace onto a grid of the given resolution. The grid
/// covers the bounds exactly, with ceil-division cell counts; a cell is
/// occupied iff its center lies inside some obstacle. Throws on non-positive
/// resolution or invalid bounds.
OccupancyGrid rasterize(const Workspace& ws, double resolution);

/// Default grid resolution for a workspace: min(side) / 64.
double default_resolution(const Workspace& ws);

/// 8-connected Dijkstra distance-to-goal over free cells; diagonal steps cost
/// sqrt(2) * resolution, straight steps cost resolution. Cells in
/// `extra_obstacles` (by grid index) are treated as occupied. Throws if the
/// goal is outside the grid, occupied, or blocked by an extra obstacle.
DistanceField distance_field(const OccupancyGrid& grid, const Cell& goal,
                             const std::unordered_set<int>& extra_obstacles = {});

/// Multi-source variant used for steering: every in-grid goal cell is seeded
/// at distance 0 even if occupied (expansion still only crosses free cells),
/// and nothing throws — with no usable goal the field is +inf everywhere.
DistanceField distance_field_multi(const OccupancyGrid& grid, const std::vector<Cell>& goals,
                                   const std::unordered_set<int>& extra_obstacles = {});

/// Chi-square quantile with 2 degrees of freedom.
double chi2_quantile_2dof(double epsilon);

/// Grid cells whose centers fall inside the epsilon-confidence ellipse
/// {x : (x-mean)' cov^-1 (x-mean) <= chi2_2(epsilon)}. The cell containing
/// the mean is always included, so the set stays nonempty as cov -> 0.
/// Singular covariances are handled with a pseudo-inverse along the
/// degenerate axis. Throws unless epsilon is in (0, 1).
std::vector<int> confidence_ellipse_cells(const Vec2& mean, const Mat2& cov, double epsilon,
                                          const OccupancyGrid& grid);

/// Writes the field as a CSV matrix (row y=0 first); +inf prints as "inf".
void write_csv(const DistanceField& f, std::ostream& os);

}  // namespace semplan
