#pragma once

// Fixed-length document vectors for the doc-vector branches. An external
// encoder's output can be supplied as a file; otherwise (and for any text the
// file does not cover) vectors are the L2-normalized mean of frozen word
// vectors over the text's known tokens.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "headline_forge/tensor.hpp"
#include "headline_forge/textprep.hpp"

namespace hf {

enum class TextField { headline, body };

struct WordVectors {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

// Whitespace-separated "token v1 ... vd" lines.
WordVectors load_word_vectors(const std::filesystem::path& path);

class DocVectorProvider {
 public:
  virtual ~DocVectorProvider() = default;
  virtual std::size_t dimension() const = 0;
  // `article_id` is empty for text that has never been seen (serving).
  virtual std::vector<double> vector_for(std::string_view article_id, TextField field,
                                         std::span<const std::int32_t> ids) const = 0;
  virtual std::string descriptor() const = 0;
};

class MeanEmbeddingProvider final : public DocVectorProvider {
 public:
  explicit MeanEmbeddingProvider(Tensor table) : table_(std::move(table)) {}

  // Rows come from `pretrained` where the token matches, else seeded
  // uniform(-0.05, 0.05). Row 0 (padding) is zero.
  static MeanEmbeddingProvider create(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed,
                                      const WordVectors* pretrained = nullptr);

  std::size_t dimension() const override { return table_.dim(1); }
  std::vector<double> vector_for(std::string_view article_id, TextField field,
                                 std::span<const std::int32_t> ids) const override;
  std::string descriptor() const override { return "mean_embedding"; }

  const Tensor& table() const { return table_; }
  Tensor& table() { return table_; }

 private:
  Tensor table_;
};

// Precomputed vectors keyed by article id, from lines of
// {"article_id": ..., "headline": [...], "body": [...]}.
class FileDocVectorProvider final : public DocVectorProvider {
 public:
  FileDocVectorProvider(const std::filesystem::path& path,
                        std::shared_ptr<const MeanEmbeddingProvider> fallback);

  std::size_t dimension() const override { return dim_; }
  std::vector<double> vector_for(std::string_view article_id, TextField field,
                                 std::span<const std::int32_t> ids) const override;
  std::string descriptor() const override { return "file:" + path_.string(); }

  std::size_t size() const { return vectors_.size(); }
  // Dimension declared by the first record of a vector file.
  static std::size_t peek_dimension(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::pair<std::vector<double>, std::vector<double>>> vectors_;
  std::shared_ptr<const MeanEmbeddingProvider> fallback_;
};

}  // namespace hf
