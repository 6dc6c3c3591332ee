#include "headline_forge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "headline_forge/error.hpp"
#include "headline_forge/rng.hpp"

namespace hf {

namespace {

constexpr std::size_t kTopics = 12;
constexpr std::size_t kWordsPerTopic = 80;
constexpr std::size_t kBodySubset = 40;
constexpr double kDwellSigma = 0.35;
constexpr std::int64_t kWindowStart = 1546300800;  // 2019-01-01T00:00:00Z
constexpr std::int64_t kWindowSeconds = 30 * 24 * 3600;
constexpr std::uint64_t kUserPool = 50000;

const std::vector<std::string> kLureWords = {
    "shocking", "unbelievable", "secret", "amazing", "you",     "wont",  "believe",
    "revealed", "insane",       "epic",   "stunning", "viral",  "hack",  "trick",
    "weird",    "crazy",        "must",   "see",     "truth",   "finally",
};

const std::vector<std::string> kGeneralWords = {
    "the", "a",    "of",    "to",   "in",    "and",  "on",    "for",  "with", "at",
    "by",  "from", "new",   "says", "after", "over", "about", "into", "more", "as",
    "is",  "are",  "its",   "their", "first", "last", "year", "city", "report", "week",
};

struct Lexicon {
  std::vector<std::vector<std::string>> topics;
};

Lexicon make_lexicon(std::uint64_t seed) {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                  "s", "t", "v", "z", "br", "tr", "st", "pl", "gr", "sh"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  Rng rng(derive_seed(seed, "lexicon"));
  std::set<std::string> taken(kLureWords.begin(), kLureWords.end());
  taken.insert(kGeneralWords.begin(), kGeneralWords.end());
  Lexicon lex;
  lex.topics.resize(kTopics);
  for (auto& words : lex.topics) {
    while (words.size() < kWordsPerTopic) {
      std::string w;
      const std::size_t syllables = 2 + rng.below(2);
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kOnsets[rng.below(std::size(kOnsets))];
        w += kVowels[rng.below(std::size(kVowels))];
      }
      if (taken.insert(w).second) words.push_back(std::move(w));
    }
  }
  return lex;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.below(items.size())];
}

std::string join_words(const std::vector<std::string>& words, bool sentences) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += (sentences && i % 12 == 0) ? ". " : " ";
    out += words[i];
  }
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  if (sentences && !out.empty()) out += ".";
  return out;
}

std::string article_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "a%06zu", index + 1);
  return buf;
}

}  // namespace

SyntheticWorld generate_synthetic(std::size_t n_articles, double events_per_article_mean,
                                  std::uint64_t seed) {
  require(n_articles >= 10, ErrorCode::config, "a synthetic world needs at least 10 articles");
  require(events_per_article_mean >= 1.0, ErrorCode::config,
          "events per article must be at least 1");
  SyntheticWorld world;
  world.n_articles = n_articles;
  world.events_per_article_mean = events_per_article_mean;
  world.seed = seed;
  const Lexicon lex = make_lexicon(seed);

  for (std::size_t a = 0; a < n_articles; ++a) {
    Rng rng(derive_seed(seed, "article:" + std::to_string(a)));
    PlantedArticle p;
    p.article_id = article_id(a);
    p.c_star = rng.uniform();
    p.d_star = rng.uniform();
    p.planted = indicator_distribution(p.c_star, p.d_star);

    const auto& topic = lex.topics[rng.below(kTopics)];
    std::vector<std::string> shuffled = topic;
    rng.shuffle(std::span<std::string>(shuffled));
    const std::vector<std::string> subset(shuffled.begin(), shuffled.begin() + kBodySubset);
    const std::vector<std::string> rest(shuffled.begin() + kBodySubset, shuffled.end());

    std::vector<std::string> body;
    const std::size_t body_len = 60 + rng.below(81);
    for (std::size_t i = 0; i < body_len; ++i)
      body.push_back(rng.bernoulli(0.2) ? pick(kGeneralWords, rng) : pick(subset, rng));

    std::vector<std::string> headline;
    const std::size_t headline_len = 8 + rng.below(7);
    const double lure_p = 0.05 + 0.5 * p.c_star;
    const double overlap_p = 0.05 + 0.85 * p.d_star;
    for (std::size_t i = 0; i < headline_len; ++i) {
      if (rng.bernoulli(0.1)) headline.push_back(pick(kGeneralWords, rng));
      else if (rng.bernoulli(lure_p)) headline.push_back(pick(kLureWords, rng));
      else if (rng.bernoulli(overlap_p)) headline.push_back(pick(subset, rng));
      else headline.push_back(pick(rest, rng));
    }

    world.corpus.push_back({p.article_id, join_words(headline, false), join_words(body, true)});
    world.planted.push_back(std::move(p));
  }
  return world;
}

std::uint64_t synthetic_click_count(const SyntheticWorld& world, std::size_t article) {
  const double c = world.planted.at(article).c_star;
  const double expected = world.events_per_article_mean * (0.2 + 1.6 * c);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(expected)));
}

std::vector<PageViewEvent> synthetic_events(const SyntheticWorld& world, std::size_t article) {
  const PlantedArticle& p = world.planted.at(article);
  Rng rng(derive_seed(world.seed, "events:" + std::to_string(article)));
  const std::uint64_t clicks = synthetic_click_count(world, article);
  const double mean = 10.0 + 240.0 * p.d_star;
  const double mu = std::log(mean) - 0.5 * kDwellSigma * kDwellSigma;
  std::vector<PageViewEvent> events;
  events.reserve(clicks);
  for (std::uint64_t i = 0; i < clicks; ++i) {
    PageViewEvent e;
    e.event_id = p.article_id + "-" + std::to_string(i + 1);
    e.user_id = "u" + std::to_string(rng.below(kUserPool));
    e.article_id = p.article_id;
    e.timestamp = kWindowStart + static_cast<std::int64_t>(rng.below(kWindowSeconds));
    const double u = rng.uniform();
    if (u < 0.005) {
      e.dwell_seconds = 0.5 * rng.uniform();  // bounce
    } else if (u < 0.007) {
      e.dwell_seconds = 3600.0 + 3600.0 * rng.uniform();  // abandoned tab
    } else {
      const double v = std::exp(mu + kDwellSigma * rng.normal());
      e.dwell_seconds = std::clamp(std::round(v * 10.0) / 10.0, 1.0, 600.0);
    }
    events.push_back(std::move(e));
  }
  return events;
}

void for_each_article_events(const SyntheticWorld& world,
                             const std::function<void(std::span<const PageViewEvent>)>& visit) {
  for (std::size_t a = 0; a < world.n_articles; ++a) {
    auto events = synthetic_events(world, a);
    visit(events);
  }
}

void write_synthetic(const SyntheticWorld& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "corpus.jsonl");
    if (!out) fail(ErrorCode::io, "cannot write " + (dir / "corpus.jsonl").string());
    write_corpus(out, world.corpus);
  }
  {
    std::ofstream out(dir / "logs.jsonl");
    if (!out) fail(ErrorCode::io, "cannot write " + (dir / "logs.jsonl").string());
    for_each_article_events(world, [&](std::span<const PageViewEvent> events) { write_events(out, events); });
  }
  std::ofstream out(dir / "planted_labels.jsonl");
  if (!out) fail(ErrorCode::io, "cannot write " + (dir / "planted_labels.jsonl").string());
  // Same schema as the labeler's output, with the planted point as (c_norm, d_norm).
  std::vector<LabeledExample> planted;
  for (const PlantedArticle& p : world.planted)
    planted.push_back({p.article_id, {p.article_id, p.c_star, p.d_star}, p.planted, hard_label(p.planted)});
  write_labels(out, planted);
}

}  // namespace hf
