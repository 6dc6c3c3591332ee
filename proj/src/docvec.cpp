#include "headline_forge/docvec.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "headline_forge/error.hpp"
#include "headline_forge/rng.hpp"

namespace hf {

using nlohmann::json;

WordVectors load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open word vectors " + path.string());
  WordVectors wv;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> v;
    double x;
    while (fields >> x) v.push_back(x);
    if (wv.dim == 0) wv.dim = v.size();
    if (v.size() != wv.dim || v.empty()) {
      fail(ErrorCode::parse, path.string() + ":" + std::to_string(line_number) +
                                 ": expected " + std::to_string(wv.dim) + " components");
    }
    wv.vectors.emplace(std::move(token), std::move(v));
  }
  return wv;
}

MeanEmbeddingProvider MeanEmbeddingProvider::create(const Vocabulary& vocab, std::size_t dim,
                                                    std::uint64_t seed,
                                                    const WordVectors* pretrained) {
  require(dim >= 1, ErrorCode::config, "doc-vector dimension must be positive");
  if (pretrained && !pretrained->vectors.empty() && pretrained->dim != dim) {
    fail(ErrorCode::config, "word vectors have dimension " + std::to_string(pretrained->dim) +
                                ", doc-vector provider expects " + std::to_string(dim));
  }
  Rng rng(derive_seed(seed, "docvec"));
  Tensor table({vocab.size(), dim});
  for (std::size_t r = 1; r < vocab.size(); ++r) {
    auto row = table.row(r);
    for (double& v : row) v = rng.uniform(-0.05, 0.05);
    if (pretrained) {
      auto it = pretrained->vectors.find(vocab.token(static_cast<std::int32_t>(r)));
      if (it != pretrained->vectors.end()) std::copy(it->second.begin(), it->second.end(), row.begin());
    }
  }
  return MeanEmbeddingProvider(std::move(table));
}

std::vector<double> MeanEmbeddingProvider::vector_for(std::string_view, TextField,
                                                      std::span<const std::int32_t> ids) const {
  const std::size_t dim = dimension();
  std::vector<double> out(dim, 0.0);
  std::size_t used = 0;
  for (std::int32_t id : ids) {
    if (id <= Vocabulary::kUnk) continue;
    require(static_cast<std::size_t>(id) < table_.dim(0), ErrorCode::shape,
            "doc vector: token id beyond provider vocabulary");
    auto row = table_.row(static_cast<std::size_t>(id));
    for (std::size_t j = 0; j < dim; ++j) out[j] += row[j];
    ++used;
  }
  double norm = 0.0;
  for (double v : out) norm += v * v;
  norm = std::sqrt(norm);
  if (used == 0 || norm == 0.0) return out;
  for (double& v : out) v /= norm;
  return out;
}

std::size_t FileDocVectorProvider::peek_dimension(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open doc vectors " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json r = json::parse(line, nullptr, false);
    if (r.is_discarded() || !r.contains("headline")) {
      fail(ErrorCode::parse, path.string() + ": first record is malformed");
    }
    return r["headline"].size();
  }
  fail(ErrorCode::parse, path.string() + " holds no vectors");
}

FileDocVectorProvider::FileDocVectorProvider(const std::filesystem::path& path,
                                             std::shared_ptr<const MeanEmbeddingProvider> fallback)
    : path_(path), fallback_(std::move(fallback)) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open doc vectors " + path.string());
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json r = json::parse(line, nullptr, false);
    const std::string where = path.string() + ":" + std::to_string(line_number);
    if (r.is_discarded() || !r.is_object() || !r.contains("article_id") ||
        !r.contains("headline") || !r.contains("body")) {
      fail(ErrorCode::parse, where + ": expected article_id, headline and body");
    }
    auto h = r["headline"].get<std::vector<double>>();
    auto b = r["body"].get<std::vector<double>>();
    if (dim_ == 0) dim_ = h.size();
    require(h.size() == dim_ && b.size() == dim_ && dim_ > 0, ErrorCode::shape,
            where + ": vector dimension differs from " + std::to_string(dim_));
    vectors_[r["article_id"].get<std::string>()] = {std::move(h), std::move(b)};
  }
  require(dim_ > 0, ErrorCode::parse, path.string() + " holds no vectors");
  require(fallback_ && fallback_->dimension() == dim_, ErrorCode::config,
          "doc-vector fallback must match the file dimension " + std::to_string(dim_));
}

std::vector<double> FileDocVectorProvider::vector_for(std::string_view article_id, TextField field,
                                                      std::span<const std::int32_t> ids) const {
  if (!article_id.empty()) {
    auto it = vectors_.find(std::string(article_id));
    if (it != vectors_.end()) return field == TextField::headline ? it->second.first : it->second.second;
  }
  return fallback_->vector_for(article_id, field, ids);
}

}  // namespace hf
