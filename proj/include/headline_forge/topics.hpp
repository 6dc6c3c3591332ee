#pragma once

// Nonnegative matrix factorization A ~ W H of a document-term TF-IDF matrix
// by Frobenius-loss multiplicative updates. Rows of W are the per-document
// topic features; H (topics x vocabulary) is the fitted model.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "headline_forge/textprep.hpp"

namespace hf {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct NnmfOptions {
  std::size_t topics = 50;
  std::size_t max_iters = 200;
  // Stop once the relative loss decrease falls below this; 0 disables.
  double tolerance = 1e-5;
  std::uint64_t seed = 7;
};

struct TopicModel {
  Eigen::MatrixXd H;  // topics x vocabulary, nonnegative
  std::vector<double> loss_history;  // ||A - WH||_F, initial value first
  std::uint64_t vocab_fingerprint = 0;

  std::size_t topics() const { return static_cast<std::size_t>(H.rows()); }
  std::size_t vocab_size() const { return static_cast<std::size_t>(H.cols()); }
};

struct NnmfFit {
  Eigen::MatrixXd W;  // documents x topics
  TopicModel model;
};

inline constexpr double kNnmfEpsilon = 1e-16;

NnmfFit nnmf_fit(const SparseRowMatrix& A, const NnmfOptions& options);
NnmfFit nnmf_fit(const Eigen::MatrixXd& A, const NnmfOptions& options);

double frobenius_loss(const SparseRowMatrix& A, const Eigen::MatrixXd& W, const Eigen::MatrixXd& H);

// Topic vector for an unseen document with H held fixed.
std::vector<double> nnmf_transform(const SparseVector& x, const TopicModel& model,
                                   std::size_t iters = 200);
std::vector<double> nnmf_transform(std::span<const double> x, const TopicModel& model,
                                   std::size_t iters = 200);

SparseRowMatrix tfidf_matrix(std::span<const SparseVector> rows, std::size_t vocab_size);

// Highest-weighted regular tokens of one topic.
std::vector<std::pair<std::string, double>> top_words(const TopicModel& model, std::size_t topic,
                                                      const Vocabulary& vocab, std::size_t k = 10);

}  // namespace hf
