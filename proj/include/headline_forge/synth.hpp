#pragma once

// A planted-truth world for end-to-end checks. Each article gets a latent
// (c*, d*) in the unit square. Headlines use more lure words as c* grows and
// share more words with their body as d* grows; the click count scales with
// c* and per-visit dwell with d*.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "headline_forge/ingest.hpp"
#include "headline_forge/labeler.hpp"
#include "headline_forge/textprep.hpp"

namespace hf {

struct PlantedArticle {
  std::string article_id;
  double c_star = 0.0;
  double d_star = 0.0;
  QualityDistribution planted;
};

struct SyntheticWorld {
  std::size_t n_articles = 0;
  double events_per_article_mean = 0.0;
  std::uint64_t seed = 0;
  std::vector<Document> corpus;
  std::vector<PlantedArticle> planted;
};

SyntheticWorld generate_synthetic(std::size_t n_articles, double events_per_article_mean,
                                  std::uint64_t seed);

// Deterministic click count for one article: max(1, round(mean * (0.2 + 1.6 c*))).
std::uint64_t synthetic_click_count(const SyntheticWorld& world, std::size_t article);

// Page views of one article, regenerated from the world's seed. A small share
// are sub-second bounces and abandoned open tabs, which the noise filter is
// meant to remove or clamp.
std::vector<PageViewEvent> synthetic_events(const SyntheticWorld& world, std::size_t article);

void for_each_article_events(const SyntheticWorld& world,
                             const std::function<void(std::span<const PageViewEvent>)>& visit);

// Writes corpus.jsonl, logs.jsonl and planted_labels.jsonl into `dir`.
void write_synthetic(const SyntheticWorld& world, const std::filesystem::path& dir);

}  // namespace hf
