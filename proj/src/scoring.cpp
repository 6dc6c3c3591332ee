#include "headline_forge/scoring.hpp"

#include <algorithm>
#include <numeric>

#include "headline_forge/error.hpp"

namespace hf {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

ScoreResponse score(const TrainedModel& trained, std::string_view body,
                    std::span<const std::string> candidates) {
  require(!candidates.empty(), ErrorCode::request, "at least one candidate headline is required");
  require(candidates.size() <= kMaxCandidates, ErrorCode::request,
          "at most " + std::to_string(kMaxCandidates) + " candidates per request");
  for (std::size_t i = 0; i < candidates.size(); ++i)
    require(!blank(candidates[i]), ErrorCode::request, "candidate " + std::to_string(i + 1) + " is empty");
  require(trained.model && trained.features, ErrorCode::model_mismatch, "no model loaded");

  const BodyFeatures shared = trained.features->featurize_body(body);
  ScoreResponse response;
  for (const std::string& headline : candidates) {
    const ModelInput input = trained.features->with_headline(shared, headline);
    const ModelInput* batch[] = {&input};
    Tensor p;
    try {
      p = trained.model->predict(batch);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::domain) fail(ErrorCode::request, e.what());
      fail(ErrorCode::model_mismatch, e.what());
    }
    CandidateScore s;
    s.headline = headline;
    QualityDistribution q;
    for (std::size_t k = 0; k < kIndicators; ++k) q.p[k] = s.p[k] = p[k];
    s.label = hard_label(q);
    response.scores.push_back(std::move(s));
  }
  std::vector<std::size_t> order(response.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return response.scores[a].p[1] > response.scores[b].p[1];
  });
  for (std::size_t r = 0; r < order.size(); ++r) response.scores[order[r]].rank = static_cast<int>(r + 1);
  return response;
}

nlohmann::json to_json(const ScoreResponse& response) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& s : response.scores)
    scores.push_back({{"headline", s.headline}, {"p", s.p}, {"label", s.label}, {"rank", s.rank}});
  return {{"scores", scores}};
}

}  // namespace hf
