#include "headline_forge/topics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "headline_forge/error.hpp"
#include "headline_forge/rng.hpp"

namespace hf {

namespace {

void check_nonnegative(const SparseRowMatrix& A) {
  for (Eigen::Index k = 0; k < A.outerSize(); ++k)
    for (SparseRowMatrix::InnerIterator it(A, k); it; ++it)
      if (!(it.value() >= 0.0)) {
        fail(ErrorCode::domain, "nnmf: negative entry at (" + std::to_string(it.row()) + ", " +
                                    std::to_string(it.col()) + ")");
      }
}

Eigen::MatrixXd positive_uniform(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  // Column-major fill order is part of the seeded contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform_open_zero() * scale;
  return m;
}

}  // namespace

double frobenius_loss(const SparseRowMatrix& A, const Eigen::MatrixXd& W, const Eigen::MatrixXd& H) {
  // ||A||^2 - 2 <A, WH> + <W'W, HH'>, which avoids forming WH.
  const double a2 = A.squaredNorm();
  const Eigen::MatrixXd AHt = A * H.transpose();
  const double cross = W.cwiseProduct(AHt).sum();
  const double model = ((W.transpose() * W).cwiseProduct(H * H.transpose())).sum();
  return std::sqrt(std::max(0.0, a2 - 2.0 * cross + model));
}

NnmfFit nnmf_fit(const SparseRowMatrix& A, const NnmfOptions& options) {
  require(options.topics >= 1, ErrorCode::config, "nnmf: need at least one topic");
  require(options.max_iters >= 1, ErrorCode::config, "nnmf: need at least one iteration");
  require(A.rows() > 0 && A.cols() > 0, ErrorCode::domain, "nnmf: empty matrix");
  check_nonnegative(A);

  const auto n = A.rows(), v = A.cols();
  const auto t = static_cast<Eigen::Index>(options.topics);
  const double mean = A.sum() / (static_cast<double>(n) * static_cast<double>(v));
  const double scale = std::sqrt(mean / static_cast<double>(t));
  Rng rng(derive_seed(options.seed, "nnmf"));
  NnmfFit fit;
  fit.W = positive_uniform(n, t, scale, rng);
  fit.model.H = positive_uniform(t, v, scale, rng);
  Eigen::MatrixXd& W = fit.W;
  Eigen::MatrixXd& H = fit.model.H;
  auto& history = fit.model.loss_history;
  history.push_back(frobenius_loss(A, W, H));

  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    const Eigen::MatrixXd WtA = W.transpose() * A;
    const Eigen::MatrixXd WtWH = (W.transpose() * W) * H;
    H = H.cwiseProduct(WtA).cwiseQuotient((WtWH.array() + kNnmfEpsilon).matrix());

    const Eigen::MatrixXd AHt = A * H.transpose();
    const Eigen::MatrixXd WHHt = W * (H * H.transpose());
    W = W.cwiseProduct(AHt).cwiseQuotient((WHHt.array() + kNnmfEpsilon).matrix());

    const double prev = history.back();
    const double loss = frobenius_loss(A, W, H);
    history.push_back(loss);
    if (loss == 0.0) break;
    if (options.tolerance > 0.0 && prev > 0.0 && (prev - loss) / prev < options.tolerance) break;
  }
  return fit;
}

NnmfFit nnmf_fit(const Eigen::MatrixXd& A, const NnmfOptions& options) {
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (!(A(i, j) >= 0.0)) {
        fail(ErrorCode::domain, "nnmf: negative entry at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
      }
  SparseRowMatrix sparse = A.sparseView(0.0, 0.0);
  return nnmf_fit(sparse, options);
}

namespace {

std::vector<double> transform_with(const Eigen::RowVectorXd& xHt, double x_mean,
                                   const TopicModel& model, std::size_t iters) {
  const auto t = static_cast<Eigen::Index>(model.topics());
  const Eigen::MatrixXd HHt = model.H * model.H.transpose();
  Eigen::RowVectorXd w =
      Eigen::RowVectorXd::Constant(t, std::sqrt(std::max(0.0, x_mean) / static_cast<double>(t)));
  for (std::size_t k = 0; k < iters; ++k) {
    const Eigen::RowVectorXd denom = w * HHt;
    w = w.cwiseProduct(xHt).cwiseQuotient((denom.array() + kNnmfEpsilon).matrix());
  }
  return {w.data(), w.data() + w.size()};
}

}  // namespace

std::vector<double> nnmf_transform(const SparseVector& x, const TopicModel& model,
                                   std::size_t iters) {
  const auto t = static_cast<Eigen::Index>(model.topics());
  Eigen::RowVectorXd xHt = Eigen::RowVectorXd::Zero(t);
  double sum = 0.0;
  for (std::size_t k = 0; k < x.index.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(x.index[k]);
    require(j < model.H.cols(), ErrorCode::shape, "nnmf_transform: index beyond vocabulary");
    require(x.value[k] >= 0.0, ErrorCode::domain, "nnmf_transform: negative input");
    xHt += x.value[k] * model.H.col(j).transpose();
    sum += x.value[k];
  }
  return transform_with(xHt, sum / static_cast<double>(model.vocab_size()), model, iters);
}

std::vector<double> nnmf_transform(std::span<const double> x, const TopicModel& model,
                                   std::size_t iters) {
  if (x.size() != model.vocab_size()) {
    fail(ErrorCode::shape, "nnmf_transform: input of length " + std::to_string(x.size()) +
                               " for vocabulary of " + std::to_string(model.vocab_size()));
  }
  Eigen::Map<const Eigen::RowVectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  require((xv.array() >= 0.0).all(), ErrorCode::domain, "nnmf_transform: negative input");
  const Eigen::RowVectorXd xHt = xv * model.H.transpose();
  return transform_with(xHt, xv.sum() / static_cast<double>(x.size()), model, iters);
}

SparseRowMatrix tfidf_matrix(std::span<const SparseVector> rows, std::size_t vocab_size) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < rows[r].index.size(); ++k)
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(rows[r].index[k]), rows[r].value[k]);
  SparseRowMatrix A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vocab_size));
  A.setFromTriplets(triplets.begin(), triplets.end());
  return A;
}

std::vector<std::pair<std::string, double>> top_words(const TopicModel& model, std::size_t topic,
                                                      const Vocabulary& vocab, std::size_t k) {
  require(topic < model.topics(), ErrorCode::domain, "top_words: topic out of range");
  std::vector<std::size_t> order;
  for (std::size_t j = 2; j < model.vocab_size(); ++j) order.push_back(j);
  const auto row = static_cast<Eigen::Index>(topic);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return model.H(row, static_cast<Eigen::Index>(a)) > model.H(row, static_cast<Eigen::Index>(b));
  });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i)
    out.emplace_back(vocab.token(static_cast<std::int32_t>(order[i])),
                     model.H(row, static_cast<Eigen::Index>(order[i])));
  return out;
}

}  // namespace hf
