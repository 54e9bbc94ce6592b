#include "evonas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evonas/error.hpp"

namespace evonas {

namespace {

void check_inputs(std::span<const double> probs, std::span<const std::uint8_t> gt,
                  std::span<const std::uint8_t> mask) {
  if (probs.size() != gt.size()) {
    throw ValidationError("shape mismatch: " + std::to_string(probs.size()) + " predictions vs " +
                          std::to_string(gt.size()) + " labels");
  }
  if (!mask.empty() && mask.size() != gt.size()) {
    throw ValidationError("shape mismatch: mask has " + std::to_string(mask.size()) + " pixels");
  }
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0, 1]");
  }
  for (auto y : gt) {
    if (y > 1) throw ValidationError("ground truth must be 0 or 1");
  }
  for (auto m : mask) {
    if (m > 1) throw ValidationError("mask must be 0 or 1");
  }
}

struct Scored {
  double score;
  bool positive;
};

// In-mask pixels sorted by descending score.
std::vector<Scored> ranked(std::span<const double> probs, std::span<const std::uint8_t> gt,
                           std::span<const std::uint8_t> mask, std::uint64_t& positives,
                           std::uint64_t& negatives) {
  check_inputs(probs, gt, mask);
  std::vector<Scored> out;
  out.reserve(probs.size());
  positives = negatives = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    out.push_back({probs[i], gt[i] != 0});
    (gt[i] ? positives : negatives)++;
  }
  if (positives == 0 || negatives == 0) {
    throw ValidationError("ranking metrics need both classes present");
  }
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  return out;
}

double ratio(std::uint64_t num, std::uint64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion(std::span<const double> probs, std::span<const std::uint8_t> gt,
                          std::span<const std::uint8_t> mask, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  check_inputs(probs, gt, mask);
  ConfusionCounts c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    const bool predicted = probs[i] >= threshold;
    if (gt[i]) {
      (predicted ? c.tp : c.fn)++;
    } else {
      (predicted ? c.fp : c.tn)++;
    }
  }
  return c;
}

MetricReport report(const ConfusionCounts& counts, std::optional<double> auroc, double threshold) {
  if (counts.total() == 0) throw ValidationError("no pixels to score");
  MetricReport r;
  r.counts = counts;
  r.threshold = threshold;
  r.auroc = auroc;
  r.acc = ratio(counts.tp + counts.tn, counts.total(), r.degenerate);
  r.se = ratio(counts.tp, counts.tp + counts.fn, r.degenerate);
  r.sp = ratio(counts.tn, counts.tn + counts.fp, r.degenerate);
  r.f1 = ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn, r.degenerate);
  return r;
}

double auroc(std::span<const double> probs, std::span<const std::uint8_t> gt,
             std::span<const std::uint8_t> mask) {
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  const auto scored = ranked(probs, gt, mask, positives, negatives);

  // Area in count units: sum over groups of dFP * (TP_before + TP_after) / 2.
  double area = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (std::size_t i = 0; i < scored.size();) {
    std::uint64_t dtp = 0;
    std::uint64_t dfp = 0;
    const double s = scored[i].score;
    for (; i < scored.size() && scored[i].score == s; ++i) (scored[i].positive ? dtp : dfp)++;
    area += static_cast<double>(dfp) * (static_cast<double>(tp) + 0.5 * static_cast<double>(dtp));
    tp += dtp;
    fp += dfp;
  }
  return area / (static_cast<double>(positives) * static_cast<double>(negatives));
}

FocalLoss focal_loss(std::span<const double> probs, std::span<const std::uint8_t> gt, double alpha,
                     double omega) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("focal alpha must lie in (0, 1)");
  if (!(omega >= 0.0)) throw ValidationError("focal exponent must be >= 0");
  check_inputs(probs, gt, {});
  FocalLoss loss;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    if (gt[i]) {
      loss.sum -= alpha * std::pow(1.0 - p, omega) * std::log(p);
    } else {
      loss.sum -= (1.0 - alpha) * std::pow(p, omega) * std::log(1.0 - p);
    }
  }
  loss.mean = probs.empty() ? 0.0 : loss.sum / static_cast<double>(probs.size());
  return loss;
}

CurvePoints curve_points(std::span<const double> probs, std::span<const std::uint8_t> gt,
                         std::span<const std::uint8_t> mask) {
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  const auto scored = ranked(probs, gt, mask, positives, negatives);
  const auto P = static_cast<double>(positives);
  const auto N = static_cast<double>(negatives);

  CurvePoints out;
  out.roc.emplace_back(0.0, 0.0);
  out.pr.emplace_back(0.0, 1.0);
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (std::size_t i = 0; i < scored.size();) {
    const double s = scored[i].score;
    for (; i < scored.size() && scored[i].score == s; ++i) (scored[i].positive ? tp : fp)++;
    out.roc.emplace_back(static_cast<double>(fp) / N, static_cast<double>(tp) / P);
    out.pr.emplace_back(static_cast<double>(tp) / P,
                        static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return out;
}

double trapezoid_area(const std::vector<std::pair<double, double>>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].first - points[i - 1].first) * (points[i].second + points[i - 1].second) / 2.0;
  }
  return area;
}

}  // namespace evonas
