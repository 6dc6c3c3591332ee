#include "headline_forge/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "headline_forge/error.hpp"

namespace hf {

using nlohmann::json;

double raw_dwell(const EngagementAggregate& aggregate) {
  require(aggregate.click_count >= 1, ErrorCode::domain,
          "article " + aggregate.article_id + " has no clicks");
  return aggregate.total_dwell_seconds / static_cast<double>(aggregate.click_count);
}

double percentile(std::span<const double> values, double pct) {
  require(!values.empty(), ErrorCode::domain, "percentile of an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> normalize(std::span<const double> values, double clip_percentile) {
  require(!values.empty(), ErrorCode::domain, "normalize: empty list");
  require(clip_percentile > 0.0 && clip_percentile <= 100.0, ErrorCode::config,
          "normalize: clip percentile must lie in (0, 100]");
  const double hi = clip_percentile == 100.0
                        ? *std::max_element(values.begin(), values.end())
                        : percentile(values, clip_percentile);
  const double lo = std::min(*std::min_element(values.begin(), values.end()), hi);
  std::vector<double> out(values.size());
  if (!(hi > lo)) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::clamp((std::min(values[i], hi) - lo) / span, 0.0, 1.0);
  }
  return out;
}

QualityDistribution indicator_distribution(double c_norm, double d_norm) {
  if (!(c_norm >= 0.0 && c_norm <= 1.0 && d_norm >= 0.0 && d_norm <= 1.0)) {
    fail(ErrorCode::domain, "indicator_distribution: (" + std::to_string(c_norm) + ", " +
                                std::to_string(d_norm) + ") outside the unit square");
  }
  std::array<double, kIndicators> score{};
  for (std::size_t i = 0; i < kIndicators; ++i) {
    const double dc = c_norm - kIndicatorCorners[i][0];
    const double dd = d_norm - kIndicatorCorners[i][1];
    score[i] = std::sqrt(2.0) - std::sqrt(dc * dc + dd * dd);
  }
  const double peak = *std::max_element(score.begin(), score.end());
  QualityDistribution dist;
  double total = 0.0;
  for (std::size_t i = 0; i < kIndicators; ++i) {
    dist.p[i] = std::exp(score[i] - peak);
    total += dist.p[i];
  }
  for (double& p : dist.p) p /= total;
  return dist;
}

int hard_label(const QualityDistribution& dist) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kIndicators; ++i)
    if (dist.p[i] > dist.p[best]) best = i;
  return static_cast<int>(best) + 1;
}

std::vector<LabeledExample> label_corpus(const AggregateMap& aggregates, double clip_percentile) {
  require(!aggregates.empty(), ErrorCode::domain, "label_corpus: no aggregates");
  std::vector<double> clicks, dwell;
  clicks.reserve(aggregates.size());
  dwell.reserve(aggregates.size());
  for (const auto& [id, agg] : aggregates) {
    clicks.push_back(static_cast<double>(agg.click_count));
    dwell.push_back(raw_dwell(agg));
  }
  const auto c_norm = normalize(clicks, clip_percentile);
  const auto d_norm = normalize(dwell, clip_percentile);
  std::vector<LabeledExample> out;
  out.reserve(aggregates.size());
  std::size_t i = 0;
  for (const auto& [id, agg] : aggregates) {
    LabeledExample ex;
    ex.article_id = id;
    ex.engagement = {id, c_norm[i], d_norm[i]};
    ex.target = indicator_distribution(c_norm[i], d_norm[i]);
    ex.hard_label = hard_label(ex.target);
    out.push_back(std::move(ex));
    ++i;
  }
  return out;
}

void write_labels(std::ostream& out, std::span<const LabeledExample> labels) {
  for (const auto& l : labels) {
    json record = {{"article_id", l.article_id},   {"c_norm", l.engagement.c_norm},
                   {"d_norm", l.engagement.d_norm}, {"p1", l.target.p[0]},
                   {"p2", l.target.p[1]},           {"p3", l.target.p[2]},
                   {"p4", l.target.p[3]},           {"hard_label", l.hard_label}};
    out << record.dump() << '\n';
  }
}

std::vector<LabeledExample> read_labels(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json r = json::parse(line, nullptr, false);
    if (r.is_discarded() || !r.is_object()) {
      fail(ErrorCode::parse, "labels line " + std::to_string(line_number) + " is not an object");
    }
    try {
      LabeledExample ex;
      ex.article_id = r.at("article_id").get<std::string>();
      ex.engagement = {ex.article_id, r.at("c_norm").get<double>(), r.at("d_norm").get<double>()};
      ex.target.p = {r.at("p1").get<double>(), r.at("p2").get<double>(), r.at("p3").get<double>(),
                     r.at("p4").get<double>()};
      ex.hard_label = r.contains("hard_label") ? r["hard_label"].get<int>() : hard_label(ex.target);
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      fail(ErrorCode::parse, "labels line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace hf
