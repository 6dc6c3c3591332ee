#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hf {

struct Document {
  std::string article_id;
  std::string headline;
  std::string body;
};

std::vector<Document> read_corpus(std::istream& in);
void write_corpus(std::ostream& out, std::span<const Document> docs);

inline constexpr std::string_view kNumberToken = "<num>";

// Lowercases ASCII, splits on anything that is not a letter or digit, and
// replaces each digit run with "<num>". Non-ASCII bytes count as letters so
// UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

// Token <-> id map. Id 0 is padding and id 1 stands for unknown tokens;
// remaining ids are ordered by descending count, ties broken by token.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  Vocabulary();

  static Vocabulary build(std::span<const std::vector<std::string>> documents,
                          std::size_t min_count = 2, std::size_t max_size = 50000);
  // `tokens` excludes the two reserved entries.
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  // Regular tokens in id order (ids 2..size-1).
  std::vector<std::string> regular_tokens() const;
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct EncodedText {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
};

// Truncates to max_len, pads with id 0; unknown tokens map to id 1.
EncodedText encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len);
// Every token, no truncation or padding.
std::vector<std::int32_t> to_ids(std::span<const std::string> tokens, const Vocabulary& vocab);

struct SparseVector {
  std::vector<std::uint32_t> index;  // ascending
  std::vector<double> value;

  double norm() const;
};

// Smoothed inverse document frequency, idf = ln((1 + n) / (1 + df)) + 1, and
// raw-count term frequency; transformed vectors are L2-normalized.
class TfidfModel {
 public:
  TfidfModel() = default;
  TfidfModel(std::vector<double> idf, std::size_t documents)
      : idf_(std::move(idf)), documents_(documents) {}

  static TfidfModel fit(std::span<const std::vector<std::int32_t>> documents, std::size_t vocab_size);

  // Ids 0 and 1 carry no weight.
  SparseVector transform(std::span<const std::int32_t> ids) const;

  const std::vector<double>& idf() const { return idf_; }
  std::size_t vocab_size() const { return idf_.size(); }
  std::size_t documents() const { return documents_; }

 private:
  std::vector<double> idf_;
  std::size_t documents_ = 0;
};

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

// Seeded uniform partition. Train and validation sizes are the rounded
// proportions; the remainder goes to test.
CorpusSplit split_corpus(std::span<const std::string> article_ids, std::uint64_t seed,
                         std::array<double, 3> ratios = {0.7, 0.1, 0.2});

}  // namespace hf
