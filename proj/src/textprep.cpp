#include "headline_forge/textprep.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "headline_forge/error.hpp"
#include "headline_forge/rng.hpp"

namespace hf {

using nlohmann::json;

std::vector<Document> read_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json r = json::parse(line, nullptr, false);
    if (r.is_discarded() || !r.is_object() || !r.contains("article_id") || !r.contains("headline")) {
      fail(ErrorCode::parse, "corpus line " + std::to_string(line_number) +
                                 " needs article_id and headline");
    }
    Document d{r["article_id"].get<std::string>(), r["headline"].get<std::string>(),
               r.value("body", std::string())};
    require(!d.headline.empty(), ErrorCode::domain,
            "corpus line " + std::to_string(line_number) + ": empty headline");
    docs.push_back(std::move(d));
  }
  return docs;
}

void write_corpus(std::ostream& out, std::span<const Document> docs) {
  for (const auto& d : docs) {
    out << json{{"article_id", d.article_id}, {"headline", d.headline}, {"body", d.body}}.dump()
        << '\n';
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  enum class Kind { none, word, digits };
  std::vector<std::string> tokens;
  std::string current;
  Kind kind = Kind::none;
  auto flush = [&] {
    if (kind == Kind::word) tokens.push_back(std::move(current));
    if (kind == Kind::digits) tokens.emplace_back(kNumberToken);
    current.clear();
    kind = Kind::none;
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    Kind k = Kind::none;
    if (c >= '0' && c <= '9') {
      k = Kind::digits;
    } else if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80) {
      k = Kind::word;
    }
    if (k != kind) flush();
    kind = k;
    if (k == Kind::word) current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> documents,
                             std::size_t min_count, std::size_t max_size) {
  require(max_size >= 2, ErrorCode::config, "vocabulary max_size must cover the reserved ids");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : documents)
    for (const auto& t : doc) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, count] : counts)
    if (count >= min_count && token != "<pad>" && token != "<unk>") ranked.emplace_back(token, count);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size - 2) ranked.resize(max_size - 2);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [token, count] : ranked) tokens.push_back(token);
  return from_tokens(tokens);
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    require(!v.index_.contains(t) && t != "<pad>" && t != "<unk>", ErrorCode::domain,
            "vocabulary token '" + t + "' repeated or reserved");
    v.index_.emplace(t, static_cast<std::int32_t>(v.tokens_.size()));
    v.tokens_.push_back(t);
  }
  return v;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::string> Vocabulary::regular_tokens() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64(std::string_view("\n", 1), h);
  }
  return h;
}

EncodedText encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len) {
  EncodedText out{std::vector<std::int32_t>(max_len, Vocabulary::kPad),
                  std::vector<std::uint8_t>(max_len, 0)};
  const std::size_t n = std::min(max_len, tokens.size());
  for (std::size_t i = 0; i < n; ++i) {
    out.ids[i] = vocab.id(tokens[i]);
    out.mask[i] = 1;
  }
  return out;
}

std::vector<std::int32_t> to_ids(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return std::sqrt(s);
}

TfidfModel TfidfModel::fit(std::span<const std::vector<std::int32_t>> documents,
                           std::size_t vocab_size) {
  require(!documents.empty(), ErrorCode::domain, "tfidf_fit: empty corpus");
  std::vector<std::size_t> df(vocab_size, 0);
  std::vector<std::uint32_t> seen;
  for (const auto& doc : documents) {
    seen.clear();
    for (std::int32_t id : doc) {
      require(id >= 0 && static_cast<std::size_t>(id) < vocab_size, ErrorCode::domain,
              "tfidf_fit: token id out of range");
      seen.push_back(static_cast<std::uint32_t>(id));
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto id : seen) ++df[id];
  }
  const double n = static_cast<double>(documents.size());
  std::vector<double> idf(vocab_size);
  for (std::size_t w = 0; w < vocab_size; ++w)
    idf[w] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[w]))) + 1.0;
  return TfidfModel(std::move(idf), documents.size());
}

SparseVector TfidfModel::transform(std::span<const std::int32_t> ids) const {
  std::map<std::uint32_t, double> counts;
  for (std::int32_t id : ids) {
    if (id <= Vocabulary::kUnk) continue;
    require(static_cast<std::size_t>(id) < idf_.size(), ErrorCode::shape,
            "tfidf_transform: token id beyond fitted vocabulary");
    counts[static_cast<std::uint32_t>(id)] += 1.0;
  }
  SparseVector out;
  for (auto& [id, tf] : counts) {
    out.index.push_back(id);
    out.value.push_back(tf * idf_[id]);
  }
  const double norm = out.norm();
  if (norm > 0.0)
    for (double& v : out.value) v /= norm;
  return out;
}

CorpusSplit split_corpus(std::span<const std::string> article_ids, std::uint64_t seed,
                         std::array<double, 3> ratios) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::config, "split ratios must sum to 1");
  require(ratios[0] >= 0 && ratios[1] >= 0 && ratios[2] >= 0, ErrorCode::config,
          "split ratios must be nonnegative");
  require(article_ids.size() >= 10, ErrorCode::domain, "split_corpus needs at least 10 documents");
  std::vector<std::string> ids(article_ids.begin(), article_ids.end());
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(std::span<std::string>(ids));
  const double n = static_cast<double>(ids.size());
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * n));
  const auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * n));
  CorpusSplit split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
  split.validation.assign(ids.begin() + static_cast<long>(n_train),
                          ids.begin() + static_cast<long>(n_train + n_val));
  split.test.assign(ids.begin() + static_cast<long>(n_train + n_val), ids.end());
  return split;
}

}  // namespace hf
