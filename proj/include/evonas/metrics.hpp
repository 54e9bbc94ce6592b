#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace evonas {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline constexpr double kDefaultThreshold = 0.5;

// Pixel i is predicted positive iff probs[i] >= threshold. Pixels whose mask
// value is 0 are skipped. An empty mask span means "no mask".
ConfusionCounts confusion(std::span<const double> probs, std::span<const std::uint8_t> gt,
                          std::span<const std::uint8_t> mask = {},
                          double threshold = kDefaultThreshold);

struct MetricReport {
  ConfusionCounts counts;
  double acc = 0.0;
  double se = 0.0;
  double sp = 0.0;
  double f1 = 0.0;
  std::optional<double> auroc;
  double threshold = kDefaultThreshold;
  // Set when some ratio had a zero denominator and was reported as 0.
  bool degenerate = false;
};

MetricReport report(const ConfusionCounts& counts, std::optional<double> auroc = std::nullopt,
                    double threshold = kDefaultThreshold);

// Threshold sweep with trapezoidal integration; equals the Mann-Whitney
// statistic with ties counted 1/2. Throws if only one class is present.
double auroc(std::span<const double> probs, std::span<const std::uint8_t> gt,
             std::span<const std::uint8_t> mask = {});

struct FocalLoss {
  double sum = 0.0;
  double mean = 0.0;
};

inline constexpr double kFocalAlpha = 0.55;
inline constexpr double kFocalGamma = 2.0;
inline constexpr double kProbabilityEpsilon = 1e-7;

// L = -sum[ a*y*(1-p)^w*ln p + (1-a)*(1-y)*p^w*ln(1-p) ], p clamped to [eps, 1-eps].
FocalLoss focal_loss(std::span<const double> probs, std::span<const std::uint8_t> gt,
                     double alpha = kFocalAlpha, double omega = kFocalGamma);

struct CurvePoints {
  std::vector<std::pair<double, double>> roc;  // (fpr, tpr)
  std::vector<std::pair<double, double>> pr;   // (recall, precision)
};

// One point per distinct score, starting at (0,0) for ROC and (0,1) for PR.
CurvePoints curve_points(std::span<const double> probs, std::span<const std::uint8_t> gt,
                         std::span<const std::uint8_t> mask = {});

// Trapezoidal area under a polyline given as (x, y) points.
double trapezoid_area(const std::vector<std::pair<double, double>>& points);

}  // namespace evonas
