#pragma once

#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "drivesim/harness.hpp"

namespace drivesim
{

/// A scenario is predicted positive (bad) when its statistic is at or below `threshold`.
struct RocPoint
{
  double threshold{0.0};
  double true_positive_rate{0.0};
  double false_positive_rate{0.0};
};

struct RocSample
{
  std::string scenario_id;
  /// Minimum predicted aggregate over the episode.
  double statistic{0.0};
  double ground_truth{0.0};
};

struct RocResult
{
  double gt_threshold{0.0};
  std::vector<RocSample> samples;
  /// Ascending threshold. The first point is the (0, 0) anchor with threshold -inf.
  std::vector<RocPoint> points;
  double auc{0.0};
};

/// Labels positive iff ground truth < gt_threshold. Throws std::invalid_argument
/// when every label is the same (the curve is undefined).
RocResult roc_curve(std::vector<RocSample> samples, double gt_threshold);
/// Uses each log's final aggregate as ground truth and its min predicted aggregate as statistic.
RocResult roc_analysis(std::span<const EpisodeLog> logs, double gt_threshold);
double trapezoid_auc(std::span<const RocPoint> points);

/// The -inf anchor threshold is written as null.
nlohmann::json roc_to_json(const RocResult & result);

}  // namespace drivesim
