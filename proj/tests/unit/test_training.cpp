#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "convdysat/adam.hpp"
#include "convdysat/checkpoint.hpp"
#include "convdysat/error.hpp"
#include "convdysat/parallel.hpp"
#include "convdysat/synthetic.hpp"
#include "convdysat/training.hpp"
#include "helpers.hpp"

using namespace convdysat;
using testutil::random_tensor;

namespace {

struct ToyRun {
  DynamicGraph graph = build_snapshots(toy_dataset(), 4, SnapshotMode::Binned);
  ModelConfig model;
  WalkConfig walk;
  TrainConfig train;

  ToyRun() {
    model.structural_dims = {8};
    model.structural_heads = 2;
    model.temporal_dim = 8;
    model.temporal_heads = 2;
    model.negatives_per_positive = 2;
    walk.walks_per_node = 4;
    walk.walk_length = 10;
    walk.window = 2;
    train.epochs_per_step = 3;
    train.batch_size = 64;
    train.learning_rate = 0.01;
  }
};

ParameterSet scalar_param(const std::string& name, double value, double grad) {
  ParameterSet p;
  Tensor& t = p.add(name, Tensor::vector({value}));
  t.accumulate_grad(std::vector<double>{grad});
  return p;
}

void expect_same_state(const TrainState& a, const TrainState& b) {
  EXPECT_TRUE(a.params.identical(b.params));
  EXPECT_EQ(a.step, b.step);
  EXPECT_EQ(a.epoch, b.epoch);
  EXPECT_EQ(a.finished, b.finished);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].loss, b.log[i].loss);
    EXPECT_EQ(a.log[i].epoch, b.log[i].epoch);
    EXPECT_EQ(a.log[i].time_step, b.log[i].time_step);
  }
  EXPECT_EQ(a.adam.step, b.adam.step);
  EXPECT_EQ(a.adam.first_moment, b.adam.first_moment);
  EXPECT_EQ(a.adam.second_moment, b.adam.second_moment);
  ASSERT_EQ(a.step_params.size(), b.step_params.size());
  for (const auto& [t, p] : a.step_params) EXPECT_TRUE(p.identical(b.step_params.at(t)));
}

}  // namespace

TEST(Adam, FirstStepOnUnitGradient) {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.0;
  auto p = scalar_param("w.bias", 0.5, 1.0);
  AdamState state;
  adam_step(p, state, cfg);
  // m = 0.1, v = 0.001, bias-corrected both to 1, so the step is lr * 1 / (1 + eps)
  const double m_hat = (0.1 * 1.0) / (1.0 - 0.9), v_hat = (0.001 * 1.0) / (1.0 - 0.999);
  EXPECT_NEAR(p.at("w.bias")[0], 0.5 - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
  EXPECT_NEAR(p.at("w.bias")[0], 0.5 - 0.01 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, SecondStepHandComputed) {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  auto p = scalar_param("b.bias", 1.0, 2.0);
  AdamState state;
  adam_step(p, state, cfg);
  p.at("b.bias").zero_grad();
  p.at("b.bias").accumulate_grad(std::vector<double>{-1.0});
  const double before = p.at("b.bias")[0];
  adam_step(p, state, cfg);
  const double m = 0.9 * (0.1 * 2.0) + 0.1 * -1.0;
  const double v = 0.999 * (0.001 * 4.0) + 0.001 * 1.0;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p.at("b.bias")[0], before - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-14);
}

TEST(Adam, ZeroGradientOnlyDecays) {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.01;
  ParameterSet p;
  p.add("layer.weight", Tensor::vector({2.0, -4.0}));
  p.add("layer.bias", Tensor::vector({3.0}));
  p.zero_grad();
  AdamState state;
  adam_step(p, state, cfg);
  EXPECT_DOUBLE_EQ(p.at("layer.weight")[0], 2.0 * (1 - 0.1 * 0.01));
  EXPECT_DOUBLE_EQ(p.at("layer.weight")[1], -4.0 * (1 - 0.1 * 0.01));
  EXPECT_EQ(p.at("layer.bias")[0], 3.0);
}

TEST(Adam, NonFiniteGradientNamesTensor) {
  AdamConfig cfg;
  auto p = scalar_param("temporal.key.0.kernel", 1.0, std::numeric_limits<double>::quiet_NaN());
  AdamState state;
  try {
    adam_step(p, state, cfg);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("temporal.key.0.kernel"), std::string::npos);
  }
}

TEST(Adam, RepeatedRunsAreBitwiseEqual) {
  auto run = [] {
    ParameterSet p;
    p.add("a.weight", random_tensor({4, 3}, 1));
    p.add("a.bias", random_tensor({3}, 2));
    AdamState state;
    AdamConfig cfg;
    for (int i = 0; i < 5; ++i) {
      p.zero_grad();
      for (auto& [name, t] : p) {
        std::vector<double> g(t.size());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::sin(t[k] * 3.0 + i);
        t.accumulate_grad(g);
      }
      adam_step(p, state, cfg);
    }
    return p;
  };
  EXPECT_TRUE(run().identical(run()));
}

TEST(ClipGradNorm, RescalesToThreshold) {
  ParameterSet p;
  p.add("x", Tensor::vector({0, 0})).accumulate_grad(std::vector<double>{30.0, 40.0});
  p.add("y", Tensor::vector({0})).accumulate_grad(std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(clip_grad_norm(p, 10.0), 50.0);
  EXPECT_LE(grad_norm(p), 10.0 + 1e-9);
  EXPECT_NEAR(p.at("x").grad()[0], 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(clip_grad_norm(p, 100.0), grad_norm(p));
  EXPECT_NEAR(p.at("x").grad()[1], 8.0, 1e-12);
}

TEST(ClipGradNorm, RandomGradientsStayUnderThreshold) {
  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet p;
    for (int k = 0; k < 3; ++k) {
      const auto g = random_tensor({5}, 100 * trial + k, -50.0, 50.0);
      p.add("t" + std::to_string(k), Tensor(Shape{5})).accumulate_grad(g.data());
    }
    const double threshold = 0.5 + trial;
    clip_grad_norm(p, threshold);
    EXPECT_LE(grad_norm(p), threshold + 1e-9);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = TrainConfig{};
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = TrainConfig{};
  cfg.epochs_per_step = -1;
  EXPECT_THROW(cfg.validate(), InputError);
}

TEST(Training, ZeroEpochsReturnsInitialParameters) {
  ToyRun s;
  s.train.epochs_per_step = 0;
  const auto state = train(s.graph, s.model, s.walk, s.train);
  EXPECT_TRUE(state.log.empty());
  EXPECT_TRUE(state.finished);
  EXPECT_TRUE(state.params.identical(init_parameters(s.model, s.graph.node_count(), 4, s.train.seed)));
}

TEST(Training, LogsEveryEpochOfEveryStep) {
  ToyRun s;
  const auto state = train(s.graph, s.model, s.walk, s.train);
  ASSERT_EQ(state.log.size(), 9u);  // steps 1..3 predict 2..4
  for (std::size_t i = 0; i < state.log.size(); ++i) {
    EXPECT_EQ(state.log[i].time_step, static_cast<int>(i / 3) + 1);
    EXPECT_EQ(state.log[i].epoch, static_cast<int>(i % 3));
    EXPECT_TRUE(std::isfinite(state.log[i].loss));
  }
  EXPECT_EQ(state.step_params.size(), 3u);
  for (const auto& [t, p] : state.step_params) EXPECT_NO_THROW(check_parameters(p, s.model, 12, 4));
  EXPECT_TRUE(state.step_params.at(3).identical(state.params));
}

TEST(Training, BitwiseReproducibleAcrossRunsAndThreads) {
  ToyRun s;
  const std::size_t saved = num_threads();
  set_num_threads(1);
  const auto a = train(s.graph, s.model, s.walk, s.train);
  const auto b = train(s.graph, s.model, s.walk, s.train);
  set_num_threads(4);
  const auto c = train(s.graph, s.model, s.walk, s.train);
  set_num_threads(saved);
  expect_same_state(a, b);
  expect_same_state(a, c);
  s.train.seed = 2;
  EXPECT_FALSE(train(s.graph, s.model, s.walk, s.train).params.identical(a.params));
}

TEST(Training, TinyTwoStepGraphLossDecreases) {
  ToyRun s;
  s.graph = build_snapshots(persistence_dataset(16, 2, 2, 0.7, 0.05, 4), 2, SnapshotMode::Binned);
  s.train.epochs_per_step = 50;
  const auto state = train(s.graph, s.model, s.walk, s.train);
  ASSERT_EQ(state.log.size(), 50u);
  EXPECT_LT(state.log.back().loss, state.log.front().loss);
}

TEST(Training, ResumeEqualsUninterrupted) {
  ToyRun s;
  Trainer trainer(s.graph, s.model, s.walk, s.train);
  TrainState full = trainer.initial_state();
  trainer.run(full);

  for (std::size_t split : {1u, 3u, 4u, 8u}) {
    Trainer t1(s.graph, s.model, s.walk, s.train);
    TrainState partial = t1.initial_state();
    EXPECT_FALSE(t1.run(partial, split));
    std::stringstream buf;
    write_records(buf, checkpoint_records(partial, 77));
    std::uint64_t hash = 0;
    TrainState restored = state_from_records(read_records(buf), &hash);
    EXPECT_EQ(hash, 77u);
    expect_same_state(partial, restored);
    Trainer t2(s.graph, s.model, s.walk, s.train);
    EXPECT_TRUE(t2.run(restored));
    expect_same_state(full, restored);
  }
}

TEST(Training, ResampleEveryEpochStillDeterministic) {
  ToyRun s;
  s.train.resample_every_epoch = true;
  expect_same_state(train(s.graph, s.model, s.walk, s.train), train(s.graph, s.model, s.walk, s.train));
}

TEST(Training, DivergenceRaisesAndKeepsLastGoodState) {
  ToyRun s;
  s.train.learning_rate = 1e200;
  s.train.gradient_clip_norm = 1e300;
  Trainer trainer(s.graph, s.model, s.walk, s.train);
  TrainState state = trainer.initial_state();
  EXPECT_THROW(trainer.run(state), DivergenceError);
  for (const auto& [name, t] : state.params) EXPECT_TRUE(t.all_finite()) << name;
  for (const auto& r : state.log) EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(Training, LatestOnlyPairsComeFromNewestSnapshot) {
  ToyRun s;
  const auto all = build_training_pairs(s.graph, s.walk, 3, false, 5);
  const auto latest = build_training_pairs(s.graph, s.walk, 3, true, 5);
  std::set<int> steps;
  for (const auto& p : all) steps.insert(p.step);
  EXPECT_EQ(steps, (std::set<int>{1, 2, 3}));
  for (const auto& p : latest) EXPECT_EQ(p.step, 3);
  EXPECT_FALSE(latest.empty());
  const auto again = build_training_pairs(s.graph, s.walk, 3, false, 5);
  ASSERT_EQ(all.size(), again.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(all[i].step, again[i].step);
    EXPECT_EQ(all[i].u, again[i].u);
    EXPECT_EQ(all[i].v, again[i].v);
  }
}

TEST(Training, MetricsCsvHasNoWallClock) {
  std::vector<LossRecord> log{{0, 1, 0.5, 12.0}, {1, 1, 0.25, 13.0}};
  std::ostringstream metrics, timing;
  write_metrics_csv(metrics, log);
  write_timing_csv(timing, log);
  const auto m = testutil::lines(metrics.str());
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0], "epoch,time_step,loss");
  EXPECT_EQ(m[1].substr(0, 4), "0,1,");
  EXPECT_EQ(std::stod(m[2].substr(4)), 0.25);
  EXPECT_EQ(testutil::lines(timing.str())[0], "epoch,time_step,wall_ms");
}

TEST(Checkpoint, RecordsRoundTripAndRejectCorruption) {
  std::vector<CheckpointRecord> records{{"alpha", {2, 2}, {1, 2, 3, 4}}, {"empty", {0}, {}}, {"s", {1}, {-0.0}}};
  std::stringstream buf;
  write_records(buf, records);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 5), "CDYS1");
  std::stringstream in(bytes);
  const auto back = read_records(in);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].name, records[i].name);
    EXPECT_EQ(back[i].shape, records[i].shape);
    EXPECT_EQ(back[i].data, records[i].data);
  }
  std::stringstream bad_magic("CDYS2" + bytes.substr(5));
  EXPECT_THROW(read_records(bad_magic), InputError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_records(truncated), InputError);
}

TEST(Checkpoint, FileRoundTrip) {
  ToyRun s;
  testutil::TempDir dir;
  const auto state = train(s.graph, s.model, s.walk, s.train);
  save_checkpoint(dir.file("ck.bin"), state, 0xABCDEF);
  std::uint64_t hash = 0;
  const auto back = load_checkpoint(dir.file("ck.bin"), &hash);
  EXPECT_EQ(hash, 0xABCDEFu);
  expect_same_state(state, back);
  EXPECT_THROW(load_checkpoint(dir.file("missing.bin")), InputError);
}
