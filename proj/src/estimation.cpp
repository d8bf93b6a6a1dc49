#include "semplan/estimation.hpp"

#include <cmath>
#include <sstream>

namespace semplan {

bool range_sensor_sees(const RangeSensorModel& s, const Pose& pose, const Vec2& target,
                       const Workspace* ws) {
  const Vec2 pos = pose.position();
  const Vec2 d = target - pos;
  const double dist = d.norm();
  if (dist > s.range) return false;
  if (s.fov_deg < 360.0 - 1e-9 && dist > 1e-12) {
    const double bearing = std::atan2(d.y(), d.x());
    const double half = 0.5 * s.fov_deg * kPi / 180.0;
    if (std::abs(normalize_angle(bearing - pose.theta)) > half + 1e-12) return false;
  }
  if (s.line_of_sight && ws != nullptr && ws->segment_blocked(pos, target)) return false;
  return true;
}

namespace {

Mat2 joseph_update(const Mat2& cov, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd S = H * cov * H.transpose() + R;
  const Eigen::MatrixXd K = cov * H.transpose() * S.inverse();
  const Mat2 IKH = Mat2::Identity() - K * H;
  Mat2 out = IKH * cov * IKH.transpose() + K * R * K.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

Mat2 riccati_update(const Mat2& cov, const Vec2& mean, const std::vector<Pose>& robots,
                    const std::vector<SensorModel>& sensors, const Workspace* ws,
                    std::vector<std::string>* diagnostics) {
  Mat2 out = cov;
  for (std::size_t j = 0; j < robots.size(); ++j) {
    const Pose& pose = robots[j];
    const SensorModel& sm = sensors.at(j);
    if (const auto* rs = std::get_if<RangeSensorModel>(&sm)) {
      const Vec2 d = mean - pose.position();
      const double dist = d.norm();
      if (dist < 1e-9) {
        if (diagnostics) {
          std::ostringstream os;
          os << "robot " << (j + 1) << " coincides with a landmark mean; observation skipped";
          diagnostics->push_back(os.str());
        }
        continue;
      }
      if (!range_sensor_sees(*rs, pose, mean, ws)) continue;
      Eigen::MatrixXd H(1, 2);
      H << d.x() / dist, d.y() / dist;
      const double sigma = rs->noise_slope * dist;
      if (!(sigma > 0)) {
        if (diagnostics) {
          std::ostringstream os;
          os << "robot " << (j + 1) << " has nonpositive measurement noise; observation skipped";
          diagnostics->push_back(os.str());
        }
        continue;
      }
      Eigen::MatrixXd R(1, 1);
      R << sigma * sigma;
      out = joseph_update(out, H, R);
    } else {
      const auto& ls = std::get<LinearSensorModel>(sm);
      const Eigen::MatrixXd H = ls.M(pose);
      const Eigen::MatrixXd R = ls.R(pose);
      if (H.rows() == 0) continue;
      out = joseph_update(out, H, R);
    }
  }
  return out;
}

void predict_landmark(Landmark& lm, int t) {
  if (!lm.dynamics) return;
  const LinearDynamics& dyn = *lm.dynamics;
  const Eigen::VectorXd a = dyn.control_at(t);
  lm.mean = dyn.A * lm.mean + dyn.B * a;
  Mat2 cov = dyn.A * lm.cov * dyn.A.transpose() + dyn.Q;
  lm.cov = 0.5 * (cov + cov.transpose());
}

void ekf_update(SemanticMap& map, const std::vector<RangeMeasurement>& measurements,
                const std::vector<Pose>& robots, const std::vector<SensorModel>& sensors,
                std::vector<std::string>* diagnostics) {
  auto note = [&](const std::string& msg) {
    if (diagnostics) diagnostics->push_back(msg);
  };
  for (const RangeMeasurement& m : measurements) {
    if (m.landmark < 0 || m.landmark >= static_cast<int>(map.landmarks.size())) {
      note("measurement refers to an unknown landmark; skipped");
      continue;
    }
    if (m.robot < 0 || m.robot >= static_cast<int>(robots.size())) {
      note("measurement refers to an unknown robot; skipped");
      continue;
    }
    const auto* rs = std::get_if<RangeSensorModel>(&sensors.at(m.robot));
    if (rs == nullptr) {
      std::ostringstream os;
      os << "robot " << (m.robot + 1) << " is not a range sensor; measurement skipped";
      note(os.str());
      continue;
    }
    if (!std::isfinite(m.value)) {
      std::ostringstream os;
      os << "non-finite range from robot " << (m.robot + 1) << "; measurement skipped";
      note(os.str());
      continue;
    }
    Landmark& lm = map.landmarks[m.landmark];
    const Vec2 pos = robots[m.robot].position();
    const Vec2 d = lm.mean - pos;
    const double dist = d.norm();
    if (dist < 1e-9) {
      std::ostringstream os;
      os << "robot " << (m.robot + 1) << " coincides with landmark " << lm.id
         << " mean; measurement skipped";
      note(os.str());
      continue;
    }
    Eigen::MatrixXd H(1, 2);
    H << d.x() / dist, d.y() / dist;
    const double sigma = rs->noise_slope * dist;
    if (!(sigma > 0)) {
      std::ostringstream os;
      os << "robot " << (m.robot + 1) << " has nonpositive measurement noise; skipped";
      note(os.str());
      continue;
    }
    const double S = (H * lm.cov * H.transpose())(0, 0) + sigma * sigma;
    const Eigen::Vector2d K = lm.cov * H.transpose() / S;
    const double innovation = m.value - dist;
    lm.mean += K * innovation;
    Eigen::MatrixXd R(1, 1);
    R << sigma * sigma;
    lm.cov = joseph_update(lm.cov, H, R);
  }
}

void class_update(std::vector<double>& dist, int observed_class,
                  const Eigen::MatrixXd& confusion,
                  std::vector<std::string>* diagnostics) {
  const int n = static_cast<int>(dist.size());
  if (observed_class < 0 || observed_class >= confusion.cols() || confusion.rows() < n) {
    if (diagnostics)
      diagnostics->push_back("class observation outside the confusion matrix; ignored");
    return;
  }
  std::vector<double> post(dist.size());
  double total = 0.0;
  for (int c = 0; c < n; ++c) {
    post[c] = confusion(c, observed_class) * dist[c];
    total += post[c];
  }
  if (total <= 1e-300) {
    if (diagnostics)
      diagnostics->push_back("class observation has zero likelihood under the prior; ignored");
    return;
  }
  for (int c = 0; c < n; ++c) dist[c] = post[c] / total;
}

}  // namespace semplan
