#pragma once

#include <array>
#include <deque>
#include <span>

#include "storey/loc2d.hpp"
#include "storey/scan.hpp"

namespace storey {

inline constexpr double kDefaultKfWindowS = 60.0;

struct QualityFeatures {
  double ap_count = 0.0;
  double mean_rss = 0.0;  // dBm
  double max_rss = 0.0;   // dBm
  double area_m2 = 0.0;   // |T|

  std::array<double, 4> values() const { return {ap_count, mean_rss, max_rss, area_m2}; }
};

// Throws Error(NoVisibleAps) for an empty profile.
QualityFeatures quality_features(const WifiProfile& profile, double area_m2);
QualityFeatures quality_features(const WifiProfile& profile, const LocationPdf& pdf,
                                 double threshold = kDefaultLikelihoodThreshold);

// Linear predictor of the error radius in meters, clamped at zero.
struct QualityModel {
  std::array<double, 4> weights{};
  double intercept = 5.0;

  double predict(const QualityFeatures& features) const;

  friend bool operator==(const QualityModel&, const QualityModel&) = default;
};

double predict_quality(const QualityModel& model, const WifiProfile& profile, const LocationPdf& pdf,
                       double threshold = kDefaultLikelihoodThreshold);

struct QualitySample {
  QualityFeatures features;
  double error_m = 0.0;
};

inline constexpr std::size_t kMinQualitySamples = 50;

// Ordinary least squares. Throws Error(InvalidArgument) for fewer than 50
// samples or a rank-deficient design.
QualityModel fit_quality_model(std::span<const QualitySample> samples);

struct KfParams {
  double initial_variance = 100.0;
  double sigma_position = 0.0;  // process noise terms, zero by default
  double sigma_velocity = 0.0;
};

// Position/velocity along one local axis with covariance [[p00, p01], [p01, p11]].
struct AxisState {
  double position = 0.0;
  double velocity = 0.0;
  double p00 = 0.0;
  double p01 = 0.0;
  double p11 = 0.0;
};

struct KfState {
  AxisState x;
  AxisState y;
};

void kf_predict(AxisState& s, double dt, const KfParams& params);
// Measurement of both position and velocity with diagonal noise.
void kf_update(AxisState& s, double z_position, double z_velocity, double r_position, double r_velocity);

struct QualifiedFix {
  LocationFix fix;
  double quality_m = 0.0;
};

// Successive fixes on one floor spanning at most `span_s` seconds.
class FixWindow {
 public:
  explicit FixWindow(double span_s = kDefaultKfWindowS);

  // Throws Error(InvalidArgument) when the timestamp does not increase.
  // A floor change clears the window first; returns true in that case.
  bool push(const QualifiedFix& fix);
  void clear() { fixes_.clear(); }

  const std::deque<QualifiedFix>& fixes() const noexcept { return fixes_; }
  double span() const noexcept { return span_s_; }

 private:
  double span_s_;
  std::deque<QualifiedFix> fixes_;
};

// Runs the constant-velocity filter over the window and returns the last
// filtered position; the floor and timestamp of the last fix are kept.
LocationFix kf_refine(const FixWindow& window, const LocalFrame& frame, const KfParams& params = {},
                      KfState* final_state = nullptr);

}  // namespace storey
