#pragma once

// Turns engagement aggregates into soft four-indicator quality targets.
//
// Each article is a point (c, d) in the unit square: normalized click count
// and normalized mean dwell. The four indicators are the square's corners
//   1: (0, 1)  loyal but unclicked     2: (1, 1)  clicked and read
//   3: (1, 0)  clicked then abandoned  4: (0, 0)  ignored
// and the target is softmax_i(sqrt(2) - ||(c, d) - corner_i||).

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "headline_forge/ingest.hpp"

namespace hf {

inline constexpr std::size_t kIndicators = 4;

inline constexpr std::array<std::array<double, 2>, kIndicators> kIndicatorCorners = {{
    {0.0, 1.0},
    {1.0, 1.0},
    {1.0, 0.0},
    {0.0, 0.0},
}};

struct EngagementPoint {
  std::string article_id;
  double c_norm = 0.0;
  double d_norm = 0.0;
};

struct QualityDistribution {
  std::array<double, kIndicators> p{};
};

struct LabeledExample {
  std::string article_id;
  EngagementPoint engagement;
  QualityDistribution target;
  int hard_label = 1;  // 1..4
};

// Mean dwell per click.
double raw_dwell(const EngagementAggregate& aggregate);

// Percentile with linear interpolation between order statistics.
double percentile(std::span<const double> values, double pct);

// Clip at the given upper percentile, then min-max map to [0, 1]. A
// degenerate range maps every value to 0.5.
std::vector<double> normalize(std::span<const double> values, double clip_percentile);

QualityDistribution indicator_distribution(double c_norm, double d_norm);

// 1-based index of the largest probability; ties go to the lowest index.
int hard_label(const QualityDistribution& dist);

// Normalizes click counts and raw dwell independently over the whole map.
std::vector<LabeledExample> label_corpus(const AggregateMap& aggregates,
                                         double clip_percentile = 99.0);

void write_labels(std::ostream& out, std::span<const LabeledExample> labels);
std::vector<LabeledExample> read_labels(std::istream& in);

}  // namespace hf
