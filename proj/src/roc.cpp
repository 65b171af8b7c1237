#include "drivesim/roc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drivesim
{

double trapezoid_auc(std::span<const RocPoint> points)
{
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double width = points[i].false_positive_rate - points[i - 1].false_positive_rate;
    area += 0.5 * width * (points[i].true_positive_rate + points[i - 1].true_positive_rate);
  }
  return area;
}

RocResult roc_curve(std::vector<RocSample> samples, double gt_threshold)
{
  if (!(gt_threshold >= 0.0 && gt_threshold <= 1.0)) {
    throw std::invalid_argument("ground-truth threshold must lie in [0, 1]");
  }
  std::size_t positives = 0;
  for (const RocSample & s : samples) {
    if (!std::isfinite(s.statistic) || !std::isfinite(s.ground_truth)) {
      throw std::invalid_argument("non-finite score for scenario " + s.scenario_id);
    }
    positives += s.ground_truth < gt_threshold ? 1 : 0;
  }
  const std::size_t negatives = samples.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("ROC undefined: every scenario has the same label");
  }

  std::vector<double> thresholds;
  for (const RocSample & s : samples) {
    thresholds.push_back(s.statistic);
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocResult result;
  result.gt_threshold = gt_threshold;
  result.points.push_back({-std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (const double tau : thresholds) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const RocSample & s : samples) {
      if (s.statistic <= tau) {
        (s.ground_truth < gt_threshold ? tp : fp)++;
      }
    }
    result.points.push_back(
      {tau, static_cast<double>(tp) / static_cast<double>(positives),
       static_cast<double>(fp) / static_cast<double>(negatives)});
  }
  result.auc = trapezoid_auc(result.points);
  result.samples = std::move(samples);
  return result;
}

RocResult roc_analysis(std::span<const EpisodeLog> logs, double gt_threshold)
{
  std::vector<RocSample> samples;
  for (const EpisodeLog & log : logs) {
    const auto stat = log.min_predicted_aggregate();
    if (!stat) {
      throw std::invalid_argument("episode " + log.scenario.id + " has no predicted scores");
    }
    samples.push_back({log.scenario.id, *stat, log.report.aggregate});
  }
  return roc_curve(std::move(samples), gt_threshold);
}

nlohmann::json roc_to_json(const RocResult & result)
{
  nlohmann::json points = nlohmann::json::array();
  for (const RocPoint & p : result.points) {
    points.push_back(
      {{"threshold", std::isfinite(p.threshold) ? nlohmann::json(p.threshold) : nlohmann::json(nullptr)},
       {"tpr", p.true_positive_rate},
       {"fpr", p.false_positive_rate}});
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const RocSample & s : result.samples) {
    samples.push_back({{"scenario", s.scenario_id}, {"min_predicted", s.statistic}, {"ground_truth", s.ground_truth}});
  }
  return {{"gt_threshold", result.gt_threshold}, {"auc", result.auc}, {"points", points}, {"samples", samples}};
}

}  // namespace drivesim
