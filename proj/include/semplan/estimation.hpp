#pragma once

#include "semplan/geometry.hpp"
#include "semplan/semantic_map.hpp"
#include "semplan/util.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace semplan {

/// Range sensor: measures distance to a landmark when it lies within range,
/// inside the angular field of view, and (optionally) in line of sight.
/// Measurement noise is zero-mean Gaussian with sigma = noise_slope * distance.
/// The aperture is kept in degrees so scenario files round-trip exactly.
struct RangeSensorModel {
  double range = 1.0;
  double fov_deg = 360.0;      // total aperture, centred on the heading
  double noise_slope = 0.5;
  bool line_of_sight = true;
};

/// General linear observation model y = M(p) x + v, v ~ N(0, R(p)).
struct LinearSensorModel {
  std::function<Eigen::MatrixXd(const Pose&)> M;
  std::function<Eigen::MatrixXd(const Pose&)> R;
};

using SensorModel = std::variant<RangeSensorModel, LinearSensorModel>;

/// True when a point target passes a range sensor's visibility gates from the
/// given pose. Workspace may be null to skip occlusion checks.
bool range_sensor_sees(const RangeSensorModel& s, const Pose& pose, const Vec2& target,
                       const Workspace* ws);

/// One robot's contribution to a landmark update: linearized observation
/// matrix and measurement noise.
struct ObservationBlock {
  Eigen::MatrixXd H;  // k x 2
  Eigen::MatrixXd R;  // k x k
};

/// Covariance-only measurement update for one landmark given the whole team's
/// poses. Visibility is decided against the landmark's estimated mean. Each
/// visible robot's block is fused sequentially in Joseph form; no visible
/// robot leaves the covariance unchanged. Degenerate geometry (a robot
/// standing on the mean) is skipped and reported through `diagnostics`.
Mat2 riccati_update(const Mat2& cov, const Vec2& mean, const std::vector<Pose>& robots,
                    const std::vector<SensorModel>& sensors, const Workspace* ws,
                    std::vector<std::string>* diagnostics = nullptr);

/// Open-loop propagation of a landmark estimate from time t to t+1.
/// Static landmarks are unchanged; mobile ones follow their linear dynamics.
void predict_landmark(Landmark& lm, int t);

struct RangeMeasurement {
  int robot = 0;
  int landmark = 0;
  double value = 0.0;
};

/// Joint mean-and-covariance EKF update from realized range measurements.
/// Innovation uses the estimated mean; the covariance update is Joseph form
/// and the result is symmetrized. Ill-posed rows (robot on the estimated
/// mean, non-finite value, non-range sensor) are skipped with a diagnostic.
void ekf_update(SemanticMap& map, const std::vector<RangeMeasurement>& measurements,
                const std::vector<Pose>& robots, const std::vector<SensorModel>& sensors,
                std::vector<std::string>* diagnostics = nullptr);

/// Bayes update of a discrete class distribution from one observed class.
/// `confusion(i, j)` = P(observe class j | true class i). A zero-likelihood
/// observation leaves the distribution unchanged and reports a diagnostic.
void class_update(std::vector<double>& dist, int observed_class,
                  const Eigen::MatrixXd& confusion,
                  std::vector<std::string>* diagnostics = nullptr);

}  // namespace semplan
