// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace sketchrnn;
using sketchrnn::fixtures::random_model;
using sketchrnn::fixtures::random_sequence;

TEST(LossWeights, Examples) {
  for (double alpha : {0.0, 0.5, 10.0, 40.0})
    for (std::size_t n : {1u, 2u, 7u})
      EXPECT_EQ(loss_weights(LossSchedule::exponential(alpha), n).back(), 1.0);
  const auto w = loss_weights(LossSchedule::exponential(10.0), 10);
  EXPECT_NEAR(w[4], 6.737946999085467e-03, 1e-8); // e^-5 at t = 5
  EXPECT_EQ(loss_weights(LossSchedule::last_only(), 3), (Vector{0, 0, 1}));
  EXPECT_EQ(loss_weights(LossSchedule::linear(), 4),
            (Vector{0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(loss_weights(LossSchedule::exponential(0.0), 5), Vector(5, 1.0));
  EXPECT_THROW(loss_weights(LossSchedule::linear(), 0), InvalidInput);
}

TEST(LossWeights, ExponentialPositiveAndIncreasing) {
  for (double alpha : {0.1, 1.0, 10.0, 25.0})
    for (std::size_t n = 1; n <= 30; ++n) {
      const auto w = loss_weights(LossSchedule::exponential(alpha), n);
      for (std::size_t t = 0; t < n; ++t) {
        EXPECT_GT(w[t], 0.0);
        EXPECT_NEAR(w[t], std::exp(-alpha * (1.0 - double(t + 1) / double(n))),
                    1e-15);
        if (t > 0) {
          EXPECT_GT(w[t], w[t - 1]);
        }
      }
    }
}

TEST(LossSchedule, ParseAndJson) {
  EXPECT_EQ(LossSchedule::parse("exp", 3.0).alpha, 3.0);
  EXPECT_EQ(LossSchedule::parse("last-only").kind, LossSchedule::Kind::last_only);
  EXPECT_EQ(LossSchedule::parse("linear").kind, LossSchedule::Kind::linear);
  EXPECT_THROW(LossSchedule::parse("cubic"), InvalidConfig);
  const auto s = LossSchedule::exponential(4.5);
  const auto back = LossSchedule::from_json(s.to_json());
  EXPECT_EQ(back.kind, s.kind);
  EXPECT_EQ(back.alpha, s.alpha);
}

TEST(SequenceLoss, Examples) {
  const std::vector<Vector> perfect{{0, 1, 0}, {0, 1, 0}};
  EXPECT_EQ(sequence_loss(perfect, 1, Vector{1, 1}), 0.0);

  const std::vector<Vector> uniform(2, Vector(4, 0.25));
  EXPECT_NEAR(sequence_loss(uniform, 3, Vector{1, 1}), 2.772588722239781, 1e-12);

  const std::vector<Vector> trace{{0.2, 0.8}, {0.3, 0.7}, {0.9, 0.1}};
  EXPECT_EQ(sequence_loss(trace, 0, loss_weights(LossSchedule::last_only(), 3)),
            -std::log(0.9));

  EXPECT_THROW(sequence_loss(trace, 0, Vector{1, 1}), ContractError);
  // Clamp keeps the loss finite for p = 0.
  EXPECT_NEAR(sequence_loss(std::vector<Vector>{{1, 0}}, 1, Vector{1}),
              -std::log(1e-12), 1e-9);
}

TEST(SequenceLoss, NonNegativeOnRandomTraces) {
  SeededRng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vector> probs;
    const auto n = 1 + rng.index(6);
    for (std::size_t t = 0; t < n; ++t) {
      Vector v(4);
      for (double &e : v)
        e = rng.uniform(-3, 3);
      probs.push_back(softmax(v));
    }
    EXPECT_GE(sequence_loss(probs, rng.index(4),
                            loss_weights(LossSchedule::exponential(10), n)),
              0.0);
  }
}

TEST(SgdStep, Examples) {
  SeededRng rng(1);
  Model m = Model::initialized(CellKind::gru, 1, 1, 1, rng);
  Model g = m.zeros_like();
  g.for_each_tensor([](std::string_view, DenseMatrix &t) { t.fill(2.0); });

  Model same = m;
  sgd_step(same, g, 0.0);
  EXPECT_EQ(same, m);

  Model one = m;
  one.head.b_y(0, 0) = 1.0;
  sgd_step(one, g, 0.1);
  EXPECT_DOUBLE_EQ(one.head.b_y(0, 0), 0.8);

  // Two steps of lr equal one step of 2 * lr for a constant gradient.
  Model twice = m, once = m;
  sgd_step(twice, g, 0.05);
  sgd_step(twice, g, 0.05);
  sgd_step(once, g, 0.1);
  twice.for_each_tensor([&](std::string_view name, const DenseMatrix &t) {
    once.for_each_tensor([&](std::string_view other, const DenseMatrix &u) {
      if (name != other)
        return;
      for (std::size_t i = 0; i < t.size(); ++i)
        EXPECT_NEAR(t.data()[i], u.data()[i], 1e-15);
    });
  });

  Model wrong = Model::initialized(CellKind::gru, 2, 1, 1, rng);
  EXPECT_THROW(sgd_step(wrong, g, 0.1), ContractError);
}

TEST(SgdStep, SkipsDisabledOutputBias) {
  SeededRng rng(1);
  Model m = Model::initialized(CellKind::gru, 2, 2, 2, rng, false);
  Model g = m.zeros_like();
  g.for_each_tensor([](std::string_view, DenseMatrix &t) { t.fill(1.0); });
  sgd_step(m, g, 0.5);
  EXPECT_EQ(m.head.b_y, DenseMatrix(2, 1, 0.0));
}

TEST(SgdStep, SmallStepDecreasesSequenceLoss) {
  SeededRng rng(44);
  for (int trial = 0; trial < 40; ++trial) {
    const auto kind = trial % 2 ? CellKind::lstm : CellKind::gru;
    Model m = random_model(kind, 4, 3, 3, rng);
    const auto x = random_sequence(4, 1 + rng.index(5), rng);
    const auto label = rng.index(3);
    const auto w = loss_weights(LossSchedule::exponential(10), x.length());
    Model g = m.zeros_like();
    const double before = accumulate_sequence_gradient(m, x, label, w, 0.0, rng, g);
    sgd_step(m, g, 1e-3);
    const double after = sequence_loss(predict_probabilities(m, x), label, w);
    EXPECT_LE(after, before + 1e-12);
  }
}

TEST(Gradients, BatchAverageEqualsMeanOfPerSequence) {
  SeededRng rng(8);
  const Model m = random_model(CellKind::gru, 3, 4, 2, rng);
  std::vector<FeatureSequence> xs;
  for (int i = 0; i < 5; ++i)
    xs.push_back(random_sequence(3, 3, rng));
  const auto w = loss_weights(LossSchedule::exponential(10), 3);

  Model batch = m.zeros_like();
  std::vector<Model> singles;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    accumulate_sequence_gradient(m, xs[i], i % 2, w, 0.0, rng, batch);
    Model g = m.zeros_like();
    accumulate_sequence_gradient(m, xs[i], i % 2, w, 0.0, rng, g);
    singles.push_back(std::move(g));
  }
  scale_gradients(batch, 1.0 / 5.0);

  const auto flat = [](const Model &g) {
    std::vector<double> v;
    g.for_each_tensor([&](std::string_view, const DenseMatrix &t) {
      v.insert(v.end(), t.data().begin(), t.data().end());
    });
    return v;
  };
  const auto b = flat(batch);
  for (std::size_t i = 0; i < b.size(); ++i) {
    double mean = 0.0;
    for (const auto &g : singles)
      mean += flat(g)[i];
    EXPECT_NEAR(b[i], mean / 5.0, 1e-12);
  }
}

namespace {

/// Two well-separated clusters in 3-d, sequences of length 1-4.
LabeledSequences toy_set(std::size_t per_class, SeededRng &rng) {
  LabeledSequences out;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      FeatureSequence x{3, {}};
      const auto n = 1 + rng.index(4);
      for (std::size_t t = 0; t < n; ++t) {
        const double s = c == 0 ? 1.0 : -1.0;
        x.steps.push_back({s + rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                           -s + rng.uniform(-0.3, 0.3)});
      }
      out.push_back("toy-" + std::to_string(c) + "-" + std::to_string(i), x, c);
    }
  return out;
}

} // namespace

TEST(Train, SeparableToyReachesPerfectValidation) {
  SeededRng rng(2);
  const auto tr = toy_set(40, rng), va = toy_set(15, rng);
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 20;
  cfg.learning_rate = 0.1; // the toy is tiny; the default rate needs far more epochs
  const auto r = train(tr, va, 2, cfg);
  ASSERT_EQ(r.history.size(), 20u);
  EXPECT_EQ(r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_accuracy, 1.0);
  EXPECT_EQ(score_model(r.model, va, cfg.schedule, PoolingScheme::weighted(10)).second,
            1.0);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  SeededRng rng(2);
  const auto tr = toy_set(5, rng), va = toy_set(2, rng);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.hidden = 4;
  const auto r = train(tr, va, 2, cfg);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(r.best_epoch, 0);
  SeededRng init(cfg.seed);
  EXPECT_EQ(r.model, Model::initialized(CellKind::gru, 3, 4, 2, init));
}

TEST(Train, ErrorsOnEmptyAndMismatchedData) {
  SeededRng rng(2);
  const auto tr = toy_set(5, rng);
  TrainConfig cfg;
  EXPECT_THROW(train(tr, LabeledSequences{}, 2, cfg), InvalidInput);
  auto bad = toy_set(2, rng);
  bad.sequences[0] = random_sequence(4, 2, rng);
  EXPECT_THROW(train(tr, bad, 2, cfg), DimensionError);
  cfg.dropout = 1.0;
  EXPECT_THROW(train(tr, tr, 2, cfg), InvalidConfig);
}

TEST(Train, TieGoesToEarlierEpoch) {
  SeededRng rng(2);
  const auto tr = toy_set(30, rng), va = toy_set(10, rng);
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 12;
  cfg.learning_rate = 0.1;
  const auto r = train(tr, va, 2, cfg);
  double best = -1;
  int expected = 0;
  for (const auto &e : r.history)
    if (e.val_accuracy > best) {
      best = e.val_accuracy;
      expected = e.epoch;
    }
  EXPECT_EQ(r.best_epoch, expected);
}

TEST(Train, DeterministicAcrossRunsAndCells) {
  for (auto cell : {CellKind::gru, CellKind::lstm}) {
    const auto a = fixtures::tiny_checkpoint(cell, 3);
    const auto b = fixtures::tiny_checkpoint(cell, 3);
    EXPECT_EQ(checkpoint_to_string(a), checkpoint_to_string(b));
  }
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto ckpt = fixtures::tiny_checkpoint();
  const auto dir = fixtures::scratch_dir("ckpt");
  const auto path = (dir / "m.ckpt").string();
  save_checkpoint(ckpt, path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.model, ckpt.model);
  EXPECT_EQ(loaded.history, ckpt.history);
  EXPECT_EQ(loaded.labels, ckpt.labels);
  EXPECT_EQ(loaded.features, ckpt.features);
  EXPECT_EQ(loaded.best_epoch, ckpt.best_epoch);

  const auto path2 = (dir / "m2.ckpt").string();
  save_checkpoint(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  EXPECT_EQ(s1.str(), s2.str());
}

TEST(Checkpoint, SpecialValuesSurviveBase64) {
  const std::vector<double> v{0.0, -0.0, 1e-310, -1.5, 3.141592653589793,
                              1.7976931348623157e308};
  const auto back = detail::decode_doubles(detail::encode_doubles(v));
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i]),
              std::bit_cast<std::uint64_t>(v[i]));
  EXPECT_EQ(detail::base64_encode({'M', 'a', 'n'}), "TWFu");
  EXPECT_EQ(detail::base64_encode({'M', 'a'}), "TWE=");
}

TEST(Checkpoint, CorruptTruncatedAndVersionErrors) {
  const auto text = checkpoint_to_string(fixtures::tiny_checkpoint());
  EXPECT_THROW(checkpoint_from_string(text.substr(0, text.size() / 2)), CorruptFile);
  EXPECT_THROW(checkpoint_from_string("[]"), CorruptFile);

  auto j = nlohmann::json::parse(text);
  j["version"] = 99;
  EXPECT_THROW(checkpoint_from_string(j.dump()), VersionMismatch);

  j = nlohmann::json::parse(text);
  j["format"] = "something-else";
  EXPECT_THROW(checkpoint_from_string(j.dump()), CorruptFile);

  // Shape tag disagreeing with the configured dimensions.
  j = nlohmann::json::parse(text);
  j["config"]["hidden"] = 7;
  EXPECT_THROW(checkpoint_from_string(j.dump()), CorruptFile);

  const auto dir = fixtures::scratch_dir("ckpt-bad");
  EXPECT_THROW(load_checkpoint((dir / "missing.ckpt").string()), InvalidInput);
}

TEST(Checkpoint, ReloadReproducesAccuracy) {
  const auto ckpt = fixtures::tiny_checkpoint();
  const auto loaded = checkpoint_from_string(checkpoint_to_string(ckpt));
  const auto seqs = featurize(synth_generate(4, 12, 5), ckpt.features);
  const auto scheme = PoolingScheme::weighted(10);
  EXPECT_EQ(evaluate(ckpt.model, seqs, scheme), evaluate(loaded.model, seqs, scheme));
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.learning_rate = 0.05;
  c.schedule = LossSchedule::linear();
  c.cell = CellKind::lstm;
  c.output_bias = false;
  const auto back = TrainConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(back.learning_rate, 0.05);
  EXPECT_EQ(back.schedule.kind, LossSchedule::Kind::linear);
  EXPECT_EQ(back.cell, CellKind::lstm);
  EXPECT_FALSE(back.output_bias);
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), InvalidConfig);
}

TEST(History, CsvColumns) {
  std::ostringstream out;
  write_history_csv({{1, 0.5, 0.9, 0.4, 0.75}, {2, 0.25, 1.0, 0.3, 1.0}}, out);
  EXPECT_EQ(out.str(), "epoch,train_loss,val_accuracy\n1,0.5,0.75\n2,0.25,1\n");
}
