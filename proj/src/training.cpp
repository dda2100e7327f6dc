#include "awe/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "awe/binary_io.hpp"

namespace awe {

double reconstruction_loss(const FrameMatrix& predicted, const FrameMatrix& target) {
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
    throw std::invalid_argument("reconstruction_loss: predicted and target shapes differ");
  if (predicted.size() == 0) throw std::invalid_argument("reconstruction_loss: empty sequences");
  return (predicted.cast<double>() - target.cast<double>()).squaredNorm() / static_cast<double>(predicted.size());
}

void TrainConfig::validate() const {
  if (ae_pretrain_epochs < 0 || cae_epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(gradient_clip_norm > 0)) throw std::invalid_argument("gradient_clip_norm must be > 0");
}

NonFiniteLoss::NonFiniteLoss(int epoch_, int batch_, double loss_)
    : std::runtime_error([&] {
        std::ostringstream msg;
        msg << "non-finite loss " << loss_ << " at epoch " << epoch_ << ", batch " << batch_;
        return msg.str();
      }()),
      epoch(epoch_),
      batch(batch_),
      loss(loss_) {}

namespace {

template <typename Scalar>
Scalar loss_impl(const CaeRnnParams<Scalar>& params, std::span<const Example> batch, CaeRnnParams<Scalar>* grads) {
  using Matrix = typename CaeRnnParams<Scalar>::Matrix;
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  std::vector<const FrameMatrix*> sources, targets;
  for (const auto& ex : batch) {
    sources.push_back(ex.source);
    targets.push_back(ex.target);
  }
  const auto src = PaddedBatch<Scalar>::build(params, sources);
  const auto tgt = PaddedBatch<Scalar>::build(params, targets);

  Tape<Scalar> tape;
  const ParamVars pv = register_params(tape, params, grads);
  const Var embedding = encode_batch(tape, pv, params, src);
  const auto outputs = decode_batch(tape, pv, params, embedding, tgt.max_length());

  Scalar valid = 0;
  for (auto len : tgt.lengths) valid += static_cast<Scalar>(len);
  const Scalar normalizer = valid * params.arch.input_dim;
  Var loss{};
  for (Eigen::Index t = 0; t < tgt.max_length(); ++t) {
    const Matrix mask = tgt.mask(t, params.arch.input_dim);
    const Var step = tape.masked_mse(outputs[static_cast<std::size_t>(t)], tgt.steps[static_cast<std::size_t>(t)],
                                     mask, normalizer);
    loss = t == 0 ? step : tape.add(loss, step);
  }
  const Scalar value = tape.value(loss)(0, 0);
  if (grads && std::isfinite(static_cast<double>(value))) tape.backward(loss);
  return value;
}

}  // namespace

double batch_loss(const CaeRnn& params, std::span<const Example> batch, CaeRnn* grads) {
  return loss_impl(params, batch, grads);
}

void fit_input_normalization(CaeRnn& params, std::span<const FrameMatrix* const> frames) {
  const Eigen::Index d = params.arch.input_dim;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
  double count = 0;
  for (const auto* f : frames) {
    if (f->cols() != d) throw std::invalid_argument("fit_input_normalization: frame dimension mismatch");
    const Eigen::MatrixXd x = f->cast<double>();
    sum += x.colwise().sum().transpose();
    sq += x.array().square().matrix().colwise().sum().transpose();
    count += static_cast<double>(x.rows());
  }
  if (count == 0) return;
  params.input_shift = sum / count;
  const Eigen::VectorXd var = (sq / count - params.input_shift.cwiseAbs2()).cwiseMax(0.0);
  params.input_scale = var.unaryExpr([](double v) { return 1.0 / std::max(std::sqrt(v), 1e-8); });
}

namespace {

std::vector<const FrameMatrix*> pair_frames(const Corpus& corpus, std::span<const TrainPair> pairs,
                                            std::vector<std::size_t>* unique_tokens) {
  const auto index = corpus.token_index();
  std::set<std::size_t> seen;
  std::vector<std::size_t> order;
  auto visit = [&](const std::string& id) {
    const auto it = index.find(id);
    if (it == index.end()) throw std::invalid_argument("train pair references unknown token " + id);
    if (corpus.tokens[it->second].split != Split::kTrain)
      throw std::invalid_argument("train pair references test-split token " + id);
    if (seen.insert(it->second).second) order.push_back(it->second);
  };
  for (const auto& p : pairs) {
    visit(p.token_id_a);
    visit(p.token_id_b);
  }
  std::vector<const FrameMatrix*> frames;
  for (auto i : order) frames.push_back(&corpus.tokens[i].frames.frames);
  if (unique_tokens) *unique_tokens = std::move(order);
  return frames;
}

struct Adam {
  explicit Adam(const CaeRnn& like, double lr) : m(like), v(like), rate(lr) {
    m.set_zero();
    v.set_zero();
  }

  void step(CaeRnn& params, const CaeRnn& grads) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    auto p = params.tensors();
    auto g = grads.tensors();
    auto mm = m.tensors();
    auto vv = v.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      *mm[i] = beta1 * *mm[i] + (1 - beta1) * *g[i];
      *vv[i] = beta2 * *vv[i] + (1 - beta2) * g[i]->cwiseAbs2();
      p[i]->array() -= rate * (mm[i]->array() / c1) / ((vv[i]->array() / c2).sqrt() + eps);
    }
  }

  CaeRnn m, v;
  double rate;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;
};

double global_norm(const CaeRnn& grads) {
  double sq = 0;
  for (const auto* g : grads.tensors()) sq += g->squaredNorm();
  return std::sqrt(sq);
}

/// Shuffled batches with similar source lengths grouped together: the
/// shuffled order is cut into chunks of 8 batches, each chunk is sorted by
/// length and split, and the resulting batch order is shuffled again.
std::vector<std::vector<Example>> make_batches(std::vector<Example> items, int batch_size, Rng& rng) {
  rng.shuffle(std::span<Example>(items));
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  const std::size_t chunk = bs * 8;
  std::vector<std::vector<Example>> batches;
  for (std::size_t start = 0; start < items.size(); start += chunk) {
    const std::size_t end = std::min(items.size(), start + chunk);
    std::stable_sort(items.begin() + static_cast<long>(start), items.begin() + static_cast<long>(end),
                     [](const Example& a, const Example& b) { return a.source->rows() < b.source->rows(); });
    for (std::size_t b = start; b < end; b += bs)
      batches.emplace_back(items.begin() + static_cast<long>(b), items.begin() + static_cast<long>(std::min(end, b + bs)));
  }
  rng.shuffle(std::span<std::vector<Example>>(batches));
  return batches;
}

}  // namespace

CaeRnn initial_params(const Corpus& corpus, std::span<const TrainPair> pairs, const Architecture& arch,
                      const TrainConfig& config) {
  CaeRnn params = CaeRnn::initialize(arch, derive_seed(config.seed, "init"));
  const auto frames = pair_frames(corpus, pairs, nullptr);
  fit_input_normalization(params, frames);
  return params;
}

TrainResult train(const Corpus& corpus, std::span<const TrainPair> pairs, const Architecture& arch,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (pairs.empty()) throw std::invalid_argument("train: no training pairs");
  std::vector<std::size_t> unique;
  pair_frames(corpus, pairs, &unique);

  TrainResult result{initial_params(corpus, pairs, arch, config), {}};
  CaeRnn& params = result.params;
  CaeRnn grads = params;
  Adam adam(params, config.learning_rate);
  Rng rng(derive_seed(config.seed, "batches"));

  std::vector<Example> ae_items, cae_items;
  for (auto i : unique) ae_items.push_back({&corpus.tokens[i].frames.frames, &corpus.tokens[i].frames.frames});
  const auto index = corpus.token_index();
  for (const auto& p : pairs) {
    const FrameMatrix* a = &corpus.tokens[index.at(p.token_id_a)].frames.frames;
    const FrameMatrix* b = &corpus.tokens[index.at(p.token_id_b)].frames.frames;
    cae_items.push_back({a, b});
    cae_items.push_back({b, a});
  }

  const int total = config.ae_pretrain_epochs + config.cae_epochs;
  for (int epoch = 1; epoch <= total; ++epoch) {
    const bool ae = epoch <= config.ae_pretrain_epochs;
    const auto batches = make_batches(ae ? ae_items : cae_items, config.batch_size, rng);
    double loss_sum = 0, frame_sum = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      grads.set_zero();
      const double loss = batch_loss(params, batches[bi], &grads);
      if (!std::isfinite(loss)) throw NonFiniteLoss(epoch, static_cast<int>(bi) + 1, loss);
      const double norm = global_norm(grads);
      if (norm > config.gradient_clip_norm)
        for (auto* g : grads.tensors()) *g *= config.gradient_clip_norm / norm;
      adam.step(params, grads);

      double frames = 0;
      for (const auto& ex : batches[bi]) frames += static_cast<double>(ex.target->rows());
      loss_sum += loss * frames;
      frame_sum += frames;
    }
    EpochLog entry{ae ? "ae" : "cae", epoch, loss_sum / frame_sum};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

GradientCheckResult gradient_check(const CaeRnn& params, const Example& pair, double epsilon, int samples,
                                   std::uint64_t seed) {
  using Wide = CaeRnnParams<long double>;
  const Example batch[] = {pair};
  CaeRnn grads = params;
  grads.set_zero();
  batch_loss(params, batch, &grads);

  // Finite differences in extended precision: in double, forward-pass
  // rounding (~1e-16 / epsilon) swamps entries with |gradient| ~ 1e-8.
  Wide probe = Wide::zeros(params.arch);
  probe.input_shift = params.input_shift.cast<long double>();
  probe.input_scale = params.input_scale.cast<long double>();
  auto values = probe.tensors();
  const auto source = params.tensors();
  for (std::size_t i = 0; i < values.size(); ++i) *values[i] = source[i]->cast<long double>();
  const auto analytic = grads.tensors();
  std::vector<Eigen::Index> offsets{0};
  for (const auto* m : values) offsets.push_back(offsets.back() + m->size());

  Rng rng(seed);
  GradientCheckResult result;
  for (int s = 0; s < samples; ++s) {
    const auto flat = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(offsets.back())));
    const auto which = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    const Eigen::Index local = flat - offsets[which];
    long double& w = values[which]->data()[local];
    const long double saved = w;
    w = saved + epsilon;
    const long double up = loss_impl<long double>(probe, batch, nullptr);
    w = saved - epsilon;
    const long double down = loss_impl<long double>(probe, batch, nullptr);
    w = saved;
    const double numeric = static_cast<double>((up - down) / (2 * static_cast<long double>(epsilon)));
    const double exact = analytic[which]->data()[local];
    const double rel = std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked;
  }
  return result;
}

void write_params(const std::filesystem::path& path, const CaeRnn& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write parameter file: " + path.string());
  binio::put_magic(os, "AWEP");
  binio::put_uint<std::uint32_t>(os, 1);
  const Architecture& a = params.arch;
  for (int v : {a.layers, a.hidden, a.input_dim, a.embedding_dim}) binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  for (Eigen::Index i = 0; i < a.input_dim; ++i) binio::put_f64(os, params.input_shift[i]);
  for (Eigen::Index i = 0; i < a.input_dim; ++i) binio::put_f64(os, params.input_scale[i]);
  for (const auto* m : params.tensors())
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) binio::put_f64(os, (*m)(r, c));
  if (!os) throw std::runtime_error("failed writing parameter file: " + path.string());
}

CaeRnn read_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open parameter file: " + path.string());
  binio::expect_magic(is, "AWEP", path.string());
  const auto version = binio::get_uint<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error(path.string() + ": unsupported parameter file version " + std::to_string(version));
  Architecture a;
  a.layers = static_cast<int>(binio::get_uint<std::uint32_t>(is));
  a.hidden = static_cast<int>(binio::get_uint<std::uint32_t>(is));
  a.input_dim = static_cast<int>(binio::get_uint<std::uint32_t>(is));
  a.embedding_dim = static_cast<int>(binio::get_uint<std::uint32_t>(is));
  CaeRnn params = CaeRnn::zeros(a);
  for (Eigen::Index i = 0; i < a.input_dim; ++i) params.input_shift[i] = binio::get_f64(is);
  for (Eigen::Index i = 0; i < a.input_dim; ++i) params.input_scale[i] = binio::get_f64(is);
  for (auto* m : params.tensors())
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = binio::get_f64(is);
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path.string() + ": trailing bytes after parameters");
  return params;
}

}  // namespace awe
