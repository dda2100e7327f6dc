#include <gtest/gtest.h>

#include <filesystem>

#include "awe/embedding.hpp"
#include "awe/training.hpp"
#include "test_util.hpp"

namespace awe {
namespace {

FrameSequence random_frames(Eigen::Index t, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  FrameSequence f;
  f.frames.resize(t, d);
  for (Eigen::Index i = 0; i < f.frames.size(); ++i) f.frames.data()[i] = static_cast<float>(rng.normal());
  f.source_duration_ms = 25.0 + 10.0 * static_cast<double>(t - 1);
  return f;
}

const Architecture kTiny{13, 8, 2, 6};

TEST(Downsample, TwentyEightFramesPickEveryThird) {
  const auto idx = downsample_indices(28);
  const std::vector<Eigen::Index> expected = {0, 3, 6, 9, 12, 15, 18, 21, 24, 27};
  EXPECT_EQ(idx, expected);
}

TEST(Downsample, TenFramesIsIdentity) {
  const auto idx = downsample_indices(10);
  for (Eigen::Index j = 0; j < 10; ++j) EXPECT_EQ(idx[static_cast<std::size_t>(j)], j);
}

TEST(Downsample, ShortSequencesRepeatFrames) {
  EXPECT_EQ(downsample_indices(1), std::vector<Eigen::Index>(10, 0));
  const auto idx = downsample_indices(3);
  EXPECT_EQ(idx.front(), 0);
  EXPECT_EQ(idx.back(), 2);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
}

TEST(Downsample, SingleFrameRequest) {
  EXPECT_EQ(downsample_indices(57, 1), std::vector<Eigen::Index>{0});
  EXPECT_THROW(downsample_indices(57, 0), std::invalid_argument);
  EXPECT_THROW(downsample_indices(0), std::invalid_argument);
}

TEST(Downsample, EmbeddingConcatenatesChosenFramesInOrder) {
  const FrameSequence f = random_frames(41, 13, 3);
  const Embedding e = downsample_embed(f, 10, "tok");
  ASSERT_EQ(e.values.size(), 130);
  EXPECT_EQ(e.embedder_tag, "DS");
  EXPECT_EQ(e.token_id, "tok");
  const auto idx = downsample_indices(41);
  for (int j = 0; j < 10; ++j)
    for (int d = 0; d < 13; ++d) EXPECT_EQ(e.values(13 * j + d), static_cast<double>(f.frames(idx[j], d)));
}

TEST(Encode, ZeroParametersGiveZeroEmbedding) {
  const auto params = CaeRnn::zeros(kTiny);
  const auto e = encode(params, random_frames(17, 13, 1).frames);
  ASSERT_EQ(e.size(), 6);
  EXPECT_EQ(e.norm(), 0.0);
}

TEST(Encode, RejectsWrongFrameDimension) {
  const auto params = CaeRnn::initialize(kTiny, 1);
  EXPECT_THROW(encode(params, random_frames(5, 12, 1).frames), std::invalid_argument);
}

TEST(Encode, PaddingDoesNotChangeShorterSequences) {
  const auto params = CaeRnn::initialize(kTiny, 4);
  const auto short_seq = random_frames(7, 13, 1), long_seq = random_frames(19, 13, 2);
  const Eigen::VectorXd alone = encode(params, short_seq.frames);

  Tape<double> tape;
  const ParamVars pv = register_params(tape, params);
  const FrameMatrix* seqs[] = {&long_seq.frames, &short_seq.frames};
  const auto batch = PaddedBatch<double>::build(params, seqs);
  const Eigen::MatrixXd both = tape.value(encode_batch(tape, pv, params, batch));
  EXPECT_LE((both.col(1) - alone).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((both.col(0) - encode(params, long_seq.frames)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decode, ProducesRequestedSteps) {
  const auto params = CaeRnn::initialize(kTiny, 2);
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(6, 0.3);
  EXPECT_EQ(decode(params, e, 23).rows(), 23);
  EXPECT_EQ(decode(params, e, 23).cols(), 13);
  EXPECT_EQ(decode(params, e, 1).rows(), 1);
  EXPECT_THROW(decode(params, e, 0), std::invalid_argument);
  EXPECT_THROW(decode(params, Eigen::VectorXd(Eigen::VectorXd::Zero(5)), 3), std::invalid_argument);
}

TEST(Decode, ZeroParametersReproduceTheInputShift) {
  auto params = CaeRnn::zeros(kTiny);
  const FrameMatrix out = decode(params, Eigen::VectorXd(Eigen::VectorXd::Ones(6)), 4);
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0f);
  params.input_shift.setConstant(2.5);
  params.input_scale.setConstant(4.0);
  EXPECT_EQ(decode(params, Eigen::VectorXd(Eigen::VectorXd::Ones(6)), 4), FrameMatrix::Constant(4, 13, 2.5f));
}

TEST(ReconstructionLoss, UnitOffsetIsOne) {
  const FrameMatrix a = random_frames(9, 13, 5).frames;
  const FrameMatrix b = a.array() + 1.0f;
  EXPECT_NEAR(reconstruction_loss(a, b), 1.0, 1e-6);
  EXPECT_EQ(reconstruction_loss(a, b), reconstruction_loss(b, a));
  EXPECT_EQ(reconstruction_loss(a, a), 0.0);
  EXPECT_THROW(reconstruction_loss(a, a.topRows(8)), std::invalid_argument);
}

TEST(BatchLoss, HeadBiasGradientIsAnalytic) {
  // Zero weights keep every hidden state at zero, so each output is head_b
  // and dL/db = 2 (b - c) / D.
  auto params = CaeRnn::zeros(kTiny);
  params.head_b.setConstant(0.5);
  FrameMatrix source = random_frames(6, 13, 1).frames;
  FrameMatrix target = FrameMatrix::Constant(11, 13, -1.0f);
  const Example ex{&source, &target};
  CaeRnn grads = CaeRnn::zeros(kTiny);
  const double loss = batch_loss(params, std::span(&ex, 1), &grads);
  EXPECT_NEAR(loss, 2.25, 1e-12);
  for (Eigen::Index d = 0; d < 13; ++d) EXPECT_NEAR(grads.head_b(d), 2.0 * 1.5 / 13.0, 1e-12);
  EXPECT_EQ(grads.head_w.norm(), 0.0);
}

TEST(BatchLoss, ZeroLossHasZeroGradient) {
  auto params = CaeRnn::initialize(kTiny, 8);
  params.head_w.setZero();
  params.head_b.setConstant(0.25);
  FrameMatrix source = random_frames(6, 13, 1).frames;
  FrameMatrix target = FrameMatrix::Constant(4, 13, 0.25f);
  const Example ex{&source, &target};
  CaeRnn grads = CaeRnn::zeros(kTiny);
  EXPECT_EQ(batch_loss(params, std::span(&ex, 1), &grads), 0.0);
  for (const auto* m : grads.tensors()) EXPECT_EQ(m->norm(), 0.0);
}

TEST(BatchLoss, MaskedPaddingMatchesPerExampleLosses) {
  const auto params = CaeRnn::initialize(kTiny, 9);
  const auto s1 = random_frames(5, 13, 1), t1 = random_frames(8, 13, 2);
  const auto s2 = random_frames(12, 13, 3), t2 = random_frames(3, 13, 4);
  const Example a{&s1.frames, &t1.frames}, b{&s2.frames, &t2.frames};
  const Example both[] = {a, b};
  const double la = batch_loss(params, std::span(&a, 1)), lb = batch_loss(params, std::span(&b, 1));
  // The batch mean weights each example by its target frame count.
  EXPECT_NEAR(batch_loss(params, both), (8.0 * la + 3.0 * lb) / 11.0, 1e-12);
}

TEST(GradientCheck, ReducedArchitectureWithinTolerance) {
  const Architecture arch{13, 16, 2, 16};
  const auto params = CaeRnn::initialize(arch, 11);
  const auto s = random_frames(9, 13, 1), t = random_frames(7, 13, 2);
  const auto r = gradient_check(params, Example{&s.frames, &t.frames}, 1e-5, 256, 3);
  EXPECT_GE(r.checked, 200);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(GradientCheck, CoarseStepIsDetectablyWorse) {
  const auto params = CaeRnn::initialize(kTiny, 12);
  const auto s = random_frames(6, 13, 1), t = random_frames(6, 13, 2);
  const Example ex{&s.frames, &t.frames};
  const double fine = gradient_check(params, ex, 1e-5, 64, 1).max_relative_error;
  const double coarse = gradient_check(params, ex, 0.1, 64, 1).max_relative_error;
  EXPECT_GT(coarse, 10.0 * fine);
}

Corpus pair_corpus() {
  const std::vector<std::string> w1 = {"a", "b", "c", "d", "e"}, w2 = {"e", "d", "c", "b", "a", "a"};
  std::vector<testing::TokenSpec> specs;
  for (int k = 0; k < 3; ++k) {
    specs.push_back({"w1_" + std::to_string(k), "w1", w1, "s" + std::to_string(k), 500 + 20.0 * k, Split::kTrain});
    specs.push_back({"w2_" + std::to_string(k), "w2", w2, "s" + std::to_string(k), 600 - 30.0 * k, Split::kTrain});
  }
  return testing::make_corpus(specs, 21);
}

TEST(Train, ZeroEpochsReturnsTheInitialization) {
  const Corpus c = pair_corpus();
  const auto pairs = build_train_pairs(c, 6, PairFilter{}, 1);
  TrainConfig cfg;
  cfg.ae_pretrain_epochs = cfg.cae_epochs = 0;
  cfg.seed = 5;
  const auto r = train(c, pairs, kTiny, cfg);
  EXPECT_TRUE(r.log.empty());
  EXPECT_TRUE(r.params == initial_params(c, pairs, kTiny, cfg));
}

TEST(Train, DeterministicAndLogged) {
  const Corpus c = pair_corpus();
  const auto pairs = build_train_pairs(c, 6, PairFilter{}, 1);
  TrainConfig cfg;
  cfg.ae_pretrain_epochs = 2;
  cfg.cae_epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 5;
  int calls = 0;
  const auto a = train(c, pairs, kTiny, cfg, [&](const EpochLog&) { ++calls; });
  const auto b = train(c, pairs, kTiny, cfg);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(calls, 5);
  ASSERT_EQ(a.log.size(), 5u);
  EXPECT_EQ(a.log[0].phase, "ae");
  EXPECT_EQ(a.log[4].phase, "cae");
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].epoch, static_cast<int>(i) + 1);
    EXPECT_TRUE(std::isfinite(a.log[i].mean_loss));
  }
  cfg.seed = 6;
  EXPECT_FALSE(train(c, pairs, kTiny, cfg).params == a.params);
}

TEST(Train, InputNormalizationIsPerDimension) {
  FrameMatrix f(4, 13);
  for (Eigen::Index i = 0; i < 4; ++i) f.row(i).setConstant(static_cast<float>(i));
  const FrameMatrix* frames[] = {&f};
  auto params = CaeRnn::zeros(kTiny);
  fit_input_normalization(params, frames);
  EXPECT_NEAR(params.input_shift(0), 1.5, 1e-12);
  EXPECT_NEAR(params.input_scale(0), 1.0 / std::sqrt(1.25), 1e-12);
}

TEST(ParamsFile, RoundTripIsExact) {
  auto params = CaeRnn::initialize(kTiny, 3);
  params.input_shift.setLinSpaced(13, -1.0, 1.0);
  const auto dir = testing::scratch_dir("params");
  write_params(dir / "p.awep", params);
  EXPECT_TRUE(read_params(dir / "p.awep") == params);
  std::filesystem::resize_file(dir / "p.awep", 40);
  EXPECT_THROW(read_params(dir / "p.awep"), std::runtime_error);
}

TEST(EmbeddingFile, RoundTripAtFloatPrecision) {
  EmbeddingSet set;
  set.embedder_tag = "CAE";
  set.token_ids = {"a", "token_b", ""};
  set.values = Eigen::MatrixXd::Random(3, 7);
  const auto dir = testing::scratch_dir("embeddings");
  write_embeddings(dir / "e.awee", set);
  const auto back = read_embeddings(dir / "e.awee", "CAE");
  EXPECT_EQ(back.token_ids, set.token_ids);
  EXPECT_EQ(back.values, set.values.cast<float>().cast<double>());
  EXPECT_EQ(back.row_of("token_b"), 1);
  EXPECT_THROW(back.row_of("missing"), std::out_of_range);
}

}  // namespace
}  // namespace awe
