#include "awe/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "awe/mathcore/rng.hpp"

namespace awe {

namespace {

constexpr double kRidge = 1e-8;
constexpr double kConditionWarning = 1e10;

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

/// Per-column mean and scale from the train fold; constant columns get scale 1.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  explicit Standardizer(const Eigen::MatrixXd& x) {
    mean = x.colwise().mean();
    scale = ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
    for (Eigen::Index j = 0; j < scale.size(); ++j)
      if (!(scale(j) > 1e-12)) scale(j) = 1.0;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
};

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  if (y.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

// A constant test target gives SS_tot = 0: R^2 is 1 for a perfect fit, else 0.
double r_squared(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  if (y.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const double ss_res = (pred - y).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

std::vector<int> labels_of(const Eigen::VectorXd& targets) {
  std::vector<int> out(static_cast<std::size_t>(targets.size()));
  for (Eigen::Index i = 0; i < targets.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(targets(i));
  return out;
}

int majority_class(const std::vector<int>& labels, int n_classes) {
  std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
  for (int c : labels) ++counts[static_cast<std::size_t>(c)];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (truth.empty()) return std::numeric_limits<double>::quiet_NaN();
  int hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index k = 0;
    scores.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

/// Row-wise softmax, shifted by the row maximum.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd p = scores.colwise() - scores.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

}  // namespace

const char* to_string(ProbeKind kind) {
  return kind == ProbeKind::kClassification ? "classification" : "regression";
}

std::vector<Eigen::Index> ProbeDataset::train_indices() const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < train_mask.size(); ++i)
    if (train_mask[i]) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

std::vector<Eigen::Index> ProbeDataset::test_indices() const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < train_mask.size(); ++i)
    if (!train_mask[i]) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

void ProbeDataset::validate() const {
  if (targets.size() != features.rows()) throw std::invalid_argument("ProbeDataset: targets and features differ in length");
  if (!token_ids.empty() && static_cast<Eigen::Index>(token_ids.size()) != features.rows())
    throw std::invalid_argument("ProbeDataset: token_ids and features differ in length");
  if (!train_mask.empty() && static_cast<Eigen::Index>(train_mask.size()) != features.rows())
    throw std::invalid_argument("ProbeDataset: train_mask and features differ in length");
  if (!features.allFinite() || !targets.allFinite()) throw std::invalid_argument("ProbeDataset: non-finite values");
  if (kind == ProbeKind::kClassification) {
    const auto n = static_cast<int>(class_names.size());
    for (Eigen::Index i = 0; i < targets.size(); ++i)
      if (targets(i) != std::floor(targets(i)) || targets(i) < 0 || targets(i) >= n)
        throw std::invalid_argument("ProbeDataset: class index out of range at row " + std::to_string(i));
  }
}

ProbeDataset split_80_20(ProbeDataset dataset, std::uint64_t seed) {
  dataset.validate();
  const Eigen::Index n = dataset.size();
  if (n < 10) throw std::invalid_argument("split_80_20: need at least 10 rows, got " + std::to_string(n));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, "probe_split"));
  rng.shuffle(std::span<Eigen::Index>(order));
  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  dataset.train_mask.assign(static_cast<std::size_t>(n), false);
  for (std::size_t i = 0; i < n_train; ++i) dataset.train_mask[static_cast<std::size_t>(order[i])] = true;

  if (dataset.kind == ProbeKind::kClassification) {
    std::vector<bool> seen(dataset.class_names.size(), false);
    for (Eigen::Index i : dataset.train_indices()) seen[static_cast<std::size_t>(dataset.targets(i))] = true;
    for (std::size_t c = 0; c < seen.size(); ++c)
      if (!seen[c])
        throw std::runtime_error("split_80_20: class '" + dataset.class_names[c] +
                                 "' has no train rows; choose another seed");
  }
  return dataset;
}

ProbeResult fit_linear_regression(const ProbeDataset& dataset) {
  dataset.validate();
  const auto train = dataset.train_indices();
  const auto test = dataset.test_indices();
  if (train.empty()) throw std::invalid_argument("fit_linear_regression: empty train fold");

  const Eigen::MatrixXd x_train = gather_rows(dataset.features, train);
  const Eigen::VectorXd y_train = gather(dataset.targets, train);
  const Standardizer standardizer(x_train);
  const Eigen::MatrixXd xs = standardizer.apply(x_train);
  const double y_mean = y_train.mean();

  // Centered columns decouple the intercept, which is the target mean.
  Eigen::MatrixXd gram = xs.transpose() * xs;
  gram.diagonal().array() += kRidge;
  const Eigen::VectorXd w = gram.ldlt().solve(xs.transpose() * (y_train.array() - y_mean).matrix());

  ProbeResult result;
  result.kind = ProbeKind::kRegression;
  {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    result.condition_number = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (result.condition_number > kConditionWarning) {
      std::ostringstream msg;
      msg << "ill-conditioned features: condition number " << result.condition_number;
      result.warnings.push_back(msg.str());
    }
  }

  result.weights = (w.array() / standardizer.scale.transpose().array()).matrix().transpose();
  result.intercepts = Eigen::VectorXd::Constant(1, y_mean - (standardizer.mean * w.cwiseQuotient(standardizer.scale.transpose())).value());

  const auto predict = [&](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
    return (standardizer.apply(x) * w).array() + y_mean;
  };
  const Eigen::VectorXd fit_train = predict(x_train);
  result.train_metric = mse(fit_train, y_train);
  result.train_baseline_metric = mse(Eigen::VectorXd::Constant(y_train.size(), y_mean), y_train);

  const Eigen::MatrixXd x_test = gather_rows(dataset.features, test);
  const Eigen::VectorXd y_test = gather(dataset.targets, test);
  const Eigen::VectorXd pred = predict(x_test);
  const Eigen::VectorXd base = Eigen::VectorXd::Constant(y_test.size(), y_mean);
  result.test_metric = mse(pred, y_test);
  result.r_squared = r_squared(pred, y_test);
  result.baseline_metric = mse(base, y_test);
  result.baseline_r_squared = r_squared(base, y_test);
  return result;
}

ProbeResult fit_logistic_regression(const ProbeDataset& dataset, const LogisticOptions& options) {
  dataset.validate();
  if (dataset.kind != ProbeKind::kClassification) throw std::invalid_argument("fit_logistic_regression: not a classification dataset");
  if (options.max_iters < 0 || !(options.tolerance > 0) || options.l2 < 0)
    throw std::invalid_argument("fit_logistic_regression: invalid options");
  const auto train = dataset.train_indices();
  const auto test = dataset.test_indices();
  const int n_classes = static_cast<int>(dataset.class_names.size());
  const auto y_train = labels_of(gather(dataset.targets, train));
  {
    std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
    for (int c : y_train) seen[static_cast<std::size_t>(c)] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2)
      throw std::invalid_argument("fit_logistic_regression: fewer than 2 classes in the train fold");
  }

  const Eigen::MatrixXd x_train = gather_rows(dataset.features, train);
  const Standardizer standardizer(x_train);
  const Eigen::MatrixXd xs = standardizer.apply(x_train);
  const Eigen::Index n = xs.rows(), d = xs.cols();
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, n_classes);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, y_train[static_cast<std::size_t>(i)]) = 1.0;

  // Softmax cross-entropy has Hessian <= 1/2 (x x^T) per sample.
  double lipschitz = options.l2;
  {
    Eigen::MatrixXd aug(n, d + 1);
    aug << xs, Eigen::VectorXd::Ones(n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(aug.transpose() * aug / static_cast<double>(n),
                                                             Eigen::EigenvaluesOnly);
    lipschitz += 0.5 * eig.eigenvalues().maxCoeff();
  }
  const double step = 1.0 / lipschitz;

  // Parameters as a (d + 1) x C block: weights then the intercept row.
  const auto gradient = [&](const Eigen::MatrixXd& theta) -> Eigen::MatrixXd {
    const Eigen::MatrixXd scores = (xs * theta.topRows(d)).rowwise() + theta.row(d);
    const Eigen::MatrixXd residual = (softmax_rows(scores) - onehot) / static_cast<double>(n);
    Eigen::MatrixXd g(d + 1, n_classes);
    g.topRows(d) = xs.transpose() * residual + options.l2 * theta.topRows(d);
    g.row(d) = residual.colwise().sum();
    return g;
  };

  // Nesterov momentum with gradient-based restart.
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(d + 1, n_classes);
  Eigen::MatrixXd look = theta;
  double t = 1.0;
  ProbeResult result;
  result.kind = ProbeKind::kClassification;
  result.converged = false;
  int iter = 0;
  for (; iter < options.max_iters; ++iter) {
    const Eigen::MatrixXd g = gradient(look);
    if (g.norm() < options.tolerance) {
      theta = look;
      result.converged = true;
      break;
    }
    const Eigen::MatrixXd next = look - step * g;
    if ((g.array() * (next - theta).array()).sum() > 0.0) {
      t = 1.0;
      look = theta;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    look = next + ((t - 1.0) / t_next) * (next - theta);
    theta = next;
    t = t_next;
  }
  result.iterations = iter;
  if (!result.converged) {
    std::ostringstream msg;
    msg << "logistic regression did not converge in " << options.max_iters << " iterations (gradient norm "
        << gradient(theta).norm() << ")";
    result.warnings.push_back(msg.str());
  }

  const Eigen::MatrixXd w_std = theta.topRows(d);
  result.weights = (w_std.array().colwise() / standardizer.scale.transpose().array()).matrix().transpose();
  result.intercepts = theta.row(d).transpose() - result.weights * standardizer.mean.transpose();

  const auto predict = [&](const Eigen::MatrixXd& x) {
    return argmax_rows((standardizer.apply(x) * w_std).rowwise() + theta.row(d));
  };
  const int majority = majority_class(y_train, n_classes);
  result.train_metric = accuracy(predict(x_train), y_train);
  result.train_baseline_metric = accuracy(std::vector<int>(y_train.size(), majority), y_train);

  const auto y_test = labels_of(gather(dataset.targets, test));
  result.test_metric = accuracy(predict(gather_rows(dataset.features, test)), y_test);
  result.baseline_metric = accuracy(std::vector<int>(y_test.size(), majority), y_test);
  result.r_squared = std::numeric_limits<double>::quiet_NaN();
  result.baseline_r_squared = std::numeric_limits<double>::quiet_NaN();
  return result;
}

namespace {

template <typename TargetOf>
ProbeDataset test_split_dataset(const Corpus& corpus, const EmbeddingSet& embeddings, ProbeKind kind, TargetOf target_of) {
  const auto rows = embeddings.index();
  const auto tokens = corpus.indices(Split::kTest);
  ProbeDataset ds;
  ds.kind = kind;
  ds.features.resize(static_cast<Eigen::Index>(tokens.size()), embeddings.dim());
  ds.targets.resize(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const WordToken& tok = corpus.tokens[tokens[i]];
    const auto it = rows.find(tok.token_id);
    if (it == rows.end())
      throw std::invalid_argument("probe: no " + embeddings.embedder_tag + " embedding for test token " + tok.token_id);
    ds.features.row(static_cast<Eigen::Index>(i)) = embeddings.values.row(it->second);
    ds.targets(static_cast<Eigen::Index>(i)) = target_of(tok, ds);
    ds.token_ids.push_back(tok.token_id);
  }
  return ds;
}

}  // namespace

ProbeDataset speaker_dataset(const Corpus& corpus, const EmbeddingSet& embeddings) {
  std::map<std::string, int> class_of;
  for (std::size_t i : corpus.indices(Split::kTest)) class_of.emplace(corpus.tokens[i].speaker_id, 0);
  std::vector<std::string> names;
  for (auto& [name, index] : class_of) {
    index = static_cast<int>(names.size());
    names.push_back(name);
  }
  ProbeDataset ds = test_split_dataset(corpus, embeddings, ProbeKind::kClassification,
                                       [&](const WordToken& tok, ProbeDataset&) { return class_of.at(tok.speaker_id); });
  ds.class_names = std::move(names);
  return ds;
}

ProbeDataset duration_dataset(const Corpus& corpus, const EmbeddingSet& embeddings) {
  return test_split_dataset(corpus, embeddings, ProbeKind::kRegression,
                            [](const WordToken& tok, ProbeDataset&) { return tok.duration_ms; });
}

ProbeDataset phone_count_dataset(const Corpus& corpus, const EmbeddingSet& embeddings) {
  return test_split_dataset(corpus, embeddings, ProbeKind::kRegression,
                            [](const WordToken& tok, ProbeDataset&) { return static_cast<double>(tok.phones.size()); });
}

ProbeResult probe_speaker(const Corpus& corpus, const EmbeddingSet& embeddings, std::uint64_t seed) {
  return fit_logistic_regression(split_80_20(speaker_dataset(corpus, embeddings), seed));
}

ProbeResult probe_duration(const Corpus& corpus, const EmbeddingSet& embeddings, std::uint64_t seed) {
  return fit_linear_regression(split_80_20(duration_dataset(corpus, embeddings), seed));
}

ProbeResult probe_phone_count(const Corpus& corpus, const EmbeddingSet& embeddings, std::uint64_t seed) {
  return fit_linear_regression(split_80_20(phone_count_dataset(corpus, embeddings), seed));
}

}  // namespace awe
