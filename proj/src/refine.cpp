#include "storey/refine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "storey/error.hpp"

namespace storey {

QualityFeatures quality_features(const WifiProfile& profile, double area_m2) {
  if (profile.empty()) throw Error(ErrorKind::NoVisibleAps, "quality features need a non-empty profile");
  QualityFeatures f;
  double sum = 0.0;
  double strongest = -std::numeric_limits<double>::infinity();
  for (const auto& [mac, rss] : profile.rss) {
    sum += rss;
    strongest = std::max(strongest, rss);
  }
  f.ap_count = static_cast<double>(profile.size());
  f.mean_rss = sum / f.ap_count;
  f.max_rss = strongest;
  f.area_m2 = area_m2;
  return f;
}

QualityFeatures quality_features(const WifiProfile& profile, const LocationPdf& pdf, double threshold) {
  std::size_t cells = 0;
  for (double v : pdf.values) cells += v >= threshold ? 1 : 0;
  return quality_features(profile, static_cast<double>(cells) * pdf.resolution * pdf.resolution);
}

double QualityModel::predict(const QualityFeatures& features) const {
  const auto x = features.values();
  double y = intercept;
  for (std::size_t i = 0; i < x.size(); ++i) y += weights[i] * x[i];
  return std::max(y, 0.0);
}

double predict_quality(const QualityModel& model, const WifiProfile& profile, const LocationPdf& pdf,
                       double threshold) {
  return model.predict(quality_features(profile, pdf, threshold));
}

QualityModel fit_quality_model(std::span<const QualitySample> samples) {
  if (samples.size() < kMinQualitySamples) {
    throw Error(ErrorKind::InvalidArgument, "quality regression needs at least " +
                                                std::to_string(kMinQualitySamples) + " samples, got " +
                                                std::to_string(samples.size()));
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, 5);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto x = samples[static_cast<std::size_t>(i)].features.values();
    design(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < 4; ++j) design(i, j + 1) = x[static_cast<std::size_t>(j)];
    target(i) = samples[static_cast<std::size_t>(i)].error_m;
  }
  // Column scaling keeps the rank decision independent of feature units.
  const Eigen::VectorXd scale = design.colwise().norm().transpose().cwiseMax(1e-300);
  const Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < 5) {
    throw Error(ErrorKind::InvalidArgument,
                "quality regression design is rank deficient; collect samples with more varied features");
  }
  const Eigen::VectorXd beta = qr.solve(target).cwiseQuotient(scale);
  QualityModel model;
  model.intercept = beta(0);
  for (std::size_t j = 0; j < 4; ++j) model.weights[j] = beta(static_cast<Eigen::Index>(j + 1));
  return model;
}

void kf_predict(AxisState& s, double dt, const KfParams& params) {
  s.position += dt * s.velocity;
  // P = A P A^T with A = [[1, dt], [0, 1]].
  const double p00 = s.p00 + 2.0 * dt * s.p01 + dt * dt * s.p11;
  const double p01 = s.p01 + dt * s.p11;
  s.p00 = p00;
  s.p01 = p01;
  // Process noise G diag(s1^2, s2^2) G^T with G = diag(dt^2 / 2, dt).
  const double g0 = dt * dt / 2.0;
  s.p00 += g0 * g0 * params.sigma_position * params.sigma_position;
  s.p11 += dt * dt * params.sigma_velocity * params.sigma_velocity;
}

void kf_update(AxisState& s, double z_position, double z_velocity, double r_position, double r_velocity) {
  using Mat2 = Eigen::Matrix2d;
  Mat2 p;
  p << s.p00, s.p01, s.p01, s.p11;
  Mat2 r = Mat2::Zero();
  r(0, 0) = r_position;
  r(1, 1) = r_velocity;
  // A singular innovation covariance is regularized on the prior side, so
  // R = 0 still yields unit gain.
  if (std::abs((p + r).determinant()) < 1e-24) p += 1e-12 * Mat2::Identity();
  const Mat2 innovation_cov = p + r;
  const Mat2 gain = p * innovation_cov.inverse();
  const Eigen::Vector2d state(s.position, s.velocity);
  const Eigen::Vector2d updated = state + gain * (Eigen::Vector2d(z_position, z_velocity) - state);
  // Joseph form stays symmetric positive semidefinite.
  const Mat2 i_k = Mat2::Identity() - gain;
  Mat2 post = i_k * p * i_k.transpose() + gain * r * gain.transpose();
  post = 0.5 * (post + post.transpose());
  s.position = updated(0);
  s.velocity = updated(1);
  s.p00 = post(0, 0);
  s.p01 = post(0, 1);
  s.p11 = post(1, 1);
}

FixWindow::FixWindow(double span_s) : span_s_(span_s) {
  if (!(span_s > 0.0)) throw Error(ErrorKind::InvalidArgument, "KF window must be positive");
}

bool FixWindow::push(const QualifiedFix& fix) {
  bool reset = false;
  if (!fixes_.empty() && fixes_.back().fix.floor != fix.fix.floor) {
    fixes_.clear();
    reset = true;
  }
  if (!fixes_.empty() && !(fix.fix.t > fixes_.back().fix.t)) {
    throw Error(ErrorKind::InvalidArgument, "fix timestamps must strictly increase");
  }
  if (!(fix.quality_m >= 0.0)) throw Error(ErrorKind::InvalidArgument, "quality radius must be non-negative");
  fixes_.push_back(fix);
  while (fixes_.front().fix.t < fix.fix.t - span_s_) fixes_.pop_front();
  return reset;
}

LocationFix kf_refine(const FixWindow& window, const LocalFrame& frame, const KfParams& params, KfState* final_state) {
  const auto& fixes = window.fixes();
  if (fixes.empty()) throw Error(ErrorKind::InvalidArgument, "KF refinement needs at least one fix");
  const LocationFix& first = fixes.front().fix;
  KfState st;
  st.x = {first.local.x, 0.0, params.initial_variance, 0.0, params.initial_variance};
  st.y = {first.local.y, 0.0, params.initial_variance, 0.0, params.initial_variance};

  for (std::size_t i = 1; i < fixes.size(); ++i) {
    const QualifiedFix& prev = fixes[i - 1];
    const QualifiedFix& cur = fixes[i];
    const double dt = cur.fix.t - prev.fix.t;
    // Quality radius read as a 2-sigma circle.
    const double var_cur = (cur.quality_m / 2.0) * (cur.quality_m / 2.0);
    const double var_prev = (prev.quality_m / 2.0) * (prev.quality_m / 2.0);
    const double var_velocity = (var_cur + var_prev) / (dt * dt);
    kf_predict(st.x, dt, params);
    kf_predict(st.y, dt, params);
    kf_update(st.x, cur.fix.local.x, (cur.fix.local.x - prev.fix.local.x) / dt, var_cur, var_velocity);
    kf_update(st.y, cur.fix.local.y, (cur.fix.local.y - prev.fix.local.y) / dt, var_cur, var_velocity);
  }
  if (final_state) *final_state = st;
  if (fixes.size() == 1) return first;

  LocationFix out = fixes.back().fix;
  out.local = {st.x.position, st.y.position};
  out.point = frame.to_geo(out.local);
  return out;
}

}  // namespace storey
