#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "headline_forge/checkpoint.hpp"
#include "headline_forge/labeler.hpp"

namespace hf {

inline constexpr std::size_t kMaxCandidates = 32;

struct CandidateScore {
  std::string headline;
  std::array<double, kIndicators> p{};
  int label = 1;  // 1..4
  int rank = 1;   // 1 = highest P(indicator 2)
};

struct ScoreResponse {
  std::vector<CandidateScore> scores;  // request order
};

// Body features are computed once; each candidate is then scored on its own,
// so a candidate's numbers never depend on what else is in the request.
// Ranks order candidates by P(indicator 2), ties by request order.
ScoreResponse score(const TrainedModel& trained, std::string_view body,
                    std::span<const std::string> candidates);

nlohmann::json to_json(const ScoreResponse& response);

}  // namespace hf
