// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "evaluation.hpp"
#include "pipeline.hpp"
#include "protocol.hpp"
#include "server.hpp"
#include "synth.hpp"
#include "training.hpp"

namespace sketchrnn {

namespace cli {

/// `dir/name.ext` -> `dir/name<suffix>`.
inline std::string sibling_path(const std::string &path,
                                const std::string &suffix) {
  std::filesystem::path p(path);
  p.replace_extension();
  return p.string() + suffix;
}

inline const std::vector<std::string> kSchemeNames{"weighted", "weighted-sum",
                                                   "last", "max", "mean"};
inline const std::vector<std::string> kScheduleNames{
    "exp", "exponential", "linear", "last", "last-only"};

/// Pooling flags shared by eval, curve, predict and serve. Without --alpha
/// the checkpoint's training-time pooling alpha is used.
struct PoolingFlags {
  std::string scheme = "weighted";
  double alpha = 10.0;
  CLI::Option *alpha_opt = nullptr;

  void add(CLI::App *app) {
    app->add_option("--scheme", scheme, "pooling scheme")
        ->check(CLI::IsMember(kSchemeNames))
        ->capture_default_str();
    alpha_opt = app->add_option("--alpha", alpha,
                                "weighted-sum pooling alpha (default: the "
                                "model's training alpha)");
  }

  PoolingScheme resolve(const Checkpoint &ckpt) const {
    const double a = alpha_opt && alpha_opt->count()
                         ? alpha
                         : ckpt.config.effective_pool_alpha();
    return PoolingScheme::parse(scheme, a);
  }
};

inline std::shared_ptr<const Checkpoint> open_checkpoint(const std::string &path) {
  if (!std::filesystem::exists(path))
    throw InvalidInput("cannot open checkpoint '" + path + "'");
  return std::make_shared<const Checkpoint>(load_checkpoint(path));
}

/// Features for `sketches` as the checkpoint's extractor expects them.
inline LabeledSequences features_for(const std::vector<Sketch> &sketches,
                                     const FeatureConfig &config,
                                     const std::string &features_path) {
  if (config.is_occupancy())
    return featurize(sketches, config);
  if (features_path.empty())
    throw InvalidInput("this model was trained on imported features; pass "
                       "--features");
  auto seqs = attach_imported(sketches, import_feature_sequences(features_path));
  for (std::size_t i = 0; i < seqs.size(); ++i)
    if (seqs.sequences[i].dim != config.imported_dim)
      throw DimensionError("imported features for '" + seqs.ids[i] +
                           "' have d=" +
                           std::to_string(seqs.sequences[i].dim) +
                           ", model expects " +
                           std::to_string(config.imported_dim));
  return seqs;
}

/// `test` replays the checkpoint's own split on `sketches`.
inline std::vector<Sketch> select_subset(const std::vector<Sketch> &sketches,
                                         const Checkpoint &ckpt,
                                         const std::string &subset) {
  if (subset == "all")
    return sketches;
  const auto split =
      split_dataset(labels_of(sketches), ckpt.config.split, ckpt.config.split_seed);
  const auto &idx = subset == "train" ? split.train
                    : subset == "val" ? split.val
                                      : split.test;
  std::vector<Sketch> out;
  out.reserve(idx.size());
  for (auto i : idx)
    out.push_back(sketches[i]);
  return out;
}

/// A file holding one sketch object, or NDJSON of several. The category
/// field may be omitted.
inline std::vector<Sketch> read_sketch_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidInput("cannot open sketch file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto text = buf.str();
  std::vector<nlohmann::json> docs;
  if (auto whole = nlohmann::json::parse(text, nullptr, false);
      !whole.is_discarded()) {
    docs.push_back(std::move(whole));
  } else {
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos)
        continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw ParseError(line_no, "invalid JSON in '" + path + "'");
      docs.push_back(std::move(j));
    }
  }
  std::vector<Sketch> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto &j = docs[i];
    if (j.is_object() && !j.contains("category"))
      j["category"] = 0;
    if (j.is_object() && !j.contains("id"))
      j["id"] = "sketch-" + std::to_string(i);
    out.push_back(sketch_from_json(j, i + 1));
  }
  if (out.empty())
    throw InvalidInput("sketch file '" + path + "' is empty");
  return out;
}

inline Reply ranked_json(const Ranked &ranked, const Checkpoint &ckpt) {
  return detail::ranked_json(ranked, ckpt);
}

inline void write_text_file(const std::string &path,
                            const std::function<void(std::ostream &)> &body) {
  std::ofstream f(path, std::ios::trunc);
  if (!f)
    throw InvalidInput("cannot write '" + path + "'");
  body(f);
}

} // namespace cli

/// Entry point of the command-line tool. Exit codes: 0 ok, 1 runtime error,
/// 2 usage error.
inline int cli_dispatch(int argc, const char *const *argv, std::ostream &out,
                        std::ostream &err) {
  CLI::App app{"Per-stroke recurrent sketch recognizer", "sketchrnn"};
  app.require_subcommand(1);

  // gen-data
  auto *gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  int gen_classes = 8, gen_per_class = 200;
  std::uint64_t gen_seed = 1;
  std::string gen_out, gen_labels;
  gen->add_option("--classes", gen_classes, "shape classes (1-8)")
      ->check(CLI::Range(1, 8))
      ->capture_default_str();
  gen->add_option("--per-class", gen_per_class, "sketches per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out, "dataset path (NDJSON)")->required();
  gen->add_option("--labels", gen_labels,
                  "label map path (default: <out stem>.labels.json)");

  // train
  auto *tr = app.add_subcommand("train", "train a model on a dataset");
  TrainConfig tc;
  std::string tr_data, tr_out, tr_labels, tr_features, tr_history;
  std::string tr_schedule = "exp", tr_cell = "gru";
  double tr_alpha = 10.0, tr_pool_alpha = 10.0;
  std::vector<double> tr_split;
  bool tr_no_bias = false, tr_quiet = false;
  tr->add_option("--data", tr_data, "dataset path (NDJSON)")->required();
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--labels", tr_labels,
                 "label map (default: <data stem>.labels.json if present)");
  tr->add_option("--features", tr_features,
                 "precomputed feature sequences (NDJSON) instead of rasters");
  tr->add_option("--history", tr_history,
                 "history CSV (default: <out stem>.history.csv)");
  tr->add_option("--epochs", tc.epochs)->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tr->add_option("--hidden", tc.hidden)->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--lr", tc.learning_rate)->capture_default_str();
  tr->add_option("--dropout", tc.dropout)->capture_default_str();
  tr->add_option("--max-batch", tc.max_batch)->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--seed", tc.seed)->capture_default_str();
  tr->add_option("--split-seed", tc.split_seed)->capture_default_str();
  tr->add_option("--split", tr_split, "train val test ratios")->expected(3);
  tr->add_option("--schedule", tr_schedule, "loss weighting over time steps")
      ->check(CLI::IsMember(cli::kScheduleNames))
      ->capture_default_str();
  tr->add_option("--alpha", tr_alpha, "exponential schedule alpha")
      ->capture_default_str();
  auto *pool_alpha_opt = tr->add_option(
      "--pool-alpha", tr_pool_alpha,
      "validation pooling alpha (default: the schedule alpha)");
  tr->add_option("--cell", tr_cell)->check(CLI::IsMember({"gru", "lstm"}))
      ->capture_default_str();
  tr->add_flag("--no-output-bias", tr_no_bias, "drop the output-layer bias");
  tr->add_flag("--quiet", tr_quiet, "no per-epoch progress");

  // eval
  auto *ev = app.add_subcommand("eval", "accuracy report on a dataset");
  std::string ev_model, ev_data, ev_out, ev_features, ev_subset = "test";
  cli::PoolingFlags ev_pool;
  ev->add_option("--model", ev_model, "checkpoint path")->required();
  ev->add_option("--data", ev_data, "dataset path (NDJSON)")->required();
  ev->add_option("--out", ev_out,
                 "report prefix; writes <prefix>.json and <prefix>.csv "
                 "(default: <model stem>.eval)");
  ev->add_option("--features", ev_features, "precomputed feature sequences");
  ev->add_option("--subset", ev_subset,
                 "which part of the training split to score")
      ->check(CLI::IsMember({"test", "val", "train", "all"}))
      ->capture_default_str();
  ev_pool.add(ev);

  // curve
  auto *cv = app.add_subcommand("curve", "completion curve (CSV)");
  std::string cv_model, cv_data, cv_out, cv_features, cv_subset = "test";
  cli::PoolingFlags cv_pool;
  cv->add_option("--model", cv_model, "checkpoint path")->required();
  cv->add_option("--data", cv_data, "dataset path (NDJSON)")->required();
  cv->add_option("--out", cv_out, "CSV path (default: stdout)");
  cv->add_option("--features", cv_features, "precomputed feature sequences");
  cv->add_option("--subset", cv_subset)
      ->check(CLI::IsMember({"test", "val", "train", "all"}))
      ->capture_default_str();
  cv_pool.add(cv);

  // predict
  auto *pr = app.add_subcommand("predict", "classify sketches from a file");
  std::string pr_model, pr_sketch;
  std::size_t pr_k = 5;
  bool pr_verbose = false;
  cli::PoolingFlags pr_pool;
  pr->add_option("--model", pr_model, "checkpoint path")->required();
  pr->add_option("--sketch", pr_sketch,
                 "sketch JSON (one object, or NDJSON of several)")
      ->required();
  pr->add_option("--k", pr_k, "entries in the ranking")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  pr->add_flag("--verbose", pr_verbose, "also print the full score vector");
  pr_pool.add(pr);

  // serve
  auto *sv = app.add_subcommand("serve", "streaming recognition service");
  std::string sv_model, sv_bind = "127.0.0.1:8765";
  bool sv_stdio = false;
  cli::PoolingFlags sv_pool;
  sv->add_option("--model", sv_model, "checkpoint path")->required();
  sv->add_option("--bind", sv_bind, "WebSocket listen address host:port")
      ->capture_default_str();
  sv->add_flag("--stdio", sv_stdio,
               "speak the protocol on stdin/stdout instead of a socket");
  sv_pool.add(sv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    if (code == 0)
      return 0;
    // Usage errors also show the help of the subcommand that was named.
    const CLI::App *named = &app;
    for (const auto *sub : app.get_subcommands({}))
      if (sub->parsed())
        named = sub;
    err << '\n' << named->help();
    return 2;
  }

  try {
    if (gen->parsed()) {
      const auto sketches = synth_generate(gen_classes, gen_per_class, gen_seed);
      save_dataset(sketches, gen_out);
      const auto labels_path = gen_labels.empty()
                                   ? cli::sibling_path(gen_out, ".labels.json")
                                   : gen_labels;
      save_label_map(synth_label_names(gen_classes), labels_path);
      out << "wrote " << sketches.size() << " sketches to " << gen_out
          << " and labels to " << labels_path << '\n';
      return 0;
    }

    if (tr->parsed()) {
      tc.schedule = LossSchedule::parse(tr_schedule, tr_alpha);
      tc.cell = parse_cell_kind(tr_cell);
      tc.output_bias = !tr_no_bias;
      if (pool_alpha_opt->count())
        tc.pool_alpha = tr_pool_alpha;
      if (!tr_split.empty())
        tc.split = {tr_split[0], tr_split[1], tr_split[2]};
      tc.validate();

      const auto sketches = load_dataset(tr_data);
      if (sketches.empty())
        throw InvalidInput("dataset '" + tr_data + "' is empty");
      std::vector<std::string> names;
      std::string labels_path = tr_labels;
      if (labels_path.empty() &&
          std::filesystem::exists(cli::sibling_path(tr_data, ".labels.json")))
        labels_path = cli::sibling_path(tr_data, ".labels.json");
      if (!labels_path.empty())
        names = load_label_map(labels_path);
      int max_label = 0;
      for (const auto &s : sketches)
        max_label = std::max(max_label, s.category);
      for (auto i = names.size(); i <= static_cast<std::size_t>(max_label); ++i)
        names.push_back(std::to_string(i));

      FeatureConfig fc;
      LabeledSequences seqs;
      if (tr_features.empty()) {
        seqs = featurize(sketches, fc);
      } else {
        seqs = attach_imported(sketches, import_feature_sequences(tr_features));
        fc.kind = "imported";
        fc.imported_dim = seqs.sequences.front().dim;
      }
      const auto split = split_dataset(labels_of(sketches), tc.split, tc.split_seed);
      EpochObserver observer;
      if (!tr_quiet)
        observer = [&err](const EpochRecord &r) {
          err << "epoch " << r.epoch << " train_loss " << r.train_loss
              << " train_acc " << r.train_accuracy << " val_loss " << r.val_loss
              << " val_acc " << r.val_accuracy << '\n';
        };
      auto result = train(seqs.subset(split.train), seqs.subset(split.val),
                          names.size(), tc, observer);

      Checkpoint ckpt{tc, fc, names, std::move(result.model), result.history,
                      result.best_epoch};
      save_checkpoint(ckpt, tr_out);
      const auto history_path = tr_history.empty()
                                    ? cli::sibling_path(tr_out, ".history.csv")
                                    : tr_history;
      cli::write_text_file(history_path, [&](std::ostream &f) {
        write_history_csv(ckpt.history, f);
      });
      out << "best epoch " << ckpt.best_epoch;
      if (ckpt.best_epoch > 0)
        out << " val_accuracy "
            << ckpt.history[static_cast<std::size_t>(ckpt.best_epoch - 1)]
                   .val_accuracy;
      out << "; wrote " << tr_out << " and " << history_path << '\n';
      return 0;
    }

    if (ev->parsed()) {
      const auto ckpt = cli::open_checkpoint(ev_model);
      const auto sketches =
          cli::select_subset(load_dataset(ev_data), *ckpt, ev_subset);
      const auto seqs = cli::features_for(sketches, ckpt->features, ev_features);
      const auto report = evaluate(ckpt->model, seqs, ev_pool.resolve(*ckpt));
      const auto prefix = ev_out.empty() ? cli::sibling_path(ev_model, ".eval")
                                         : ev_out;
      cli::write_text_file(prefix + ".json", [&](std::ostream &f) {
        f << to_json(report, ckpt->labels).dump(2) << '\n';
      });
      cli::write_text_file(prefix + ".csv", [&](std::ostream &f) {
        write_csv(report, ckpt->labels, f);
      });
      out << "accuracy " << report.accuracy << " (" << report.correct << "/"
          << report.total << "); wrote " << prefix << ".json and " << prefix
          << ".csv\n";
      return 0;
    }

    if (cv->parsed()) {
      const auto ckpt = cli::open_checkpoint(cv_model);
      const auto sketches =
          cli::select_subset(load_dataset(cv_data), *ckpt, cv_subset);
      const auto seqs = cli::features_for(sketches, ckpt->features, cv_features);
      const auto curve = completion_curve(ckpt->model, seqs, cv_pool.resolve(*ckpt));
      if (cv_out.empty())
        write_csv(curve, out);
      else
        cli::write_text_file(cv_out,
                             [&](std::ostream &f) { write_csv(curve, f); });
      return 0;
    }

    if (pr->parsed()) {
      const auto ckpt = cli::open_checkpoint(pr_model);
      const auto sketches = cli::read_sketch_file(pr_sketch);
      const auto seqs = cli::features_for(sketches, ckpt->features, "");
      const auto scheme = pr_pool.resolve(*ckpt);
      for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto pooled = pool_prediction(
            predict_probabilities(ckpt->model, seqs.sequences[i]), scheme);
        Reply line = {
            {"id", seqs.ids[i]},
            {"label", pooled.label},
            {"name", ckpt->label_name(pooled.label)},
            {"scores_topk",
             cli::ranked_json(top_k(pooled.scores, pr_k), *ckpt)}};
        if (pr_verbose)
          line["scores"] = pooled.scores;
        out << line.dump() << '\n';
      }
      return 0;
    }

    if (sv->parsed()) {
      const auto ckpt = cli::open_checkpoint(sv_model);
      SessionRegistry registry(ckpt, sv_pool.resolve(*ckpt));
      if (sv_stdio) {
        serve_stream(registry, std::cin, out);
        return 0;
      }
      const auto colon = sv_bind.rfind(':');
      if (colon == std::string::npos)
        throw InvalidConfig("--bind expects host:port, got '" + sv_bind + "'");
      int port = -1;
      try {
        port = std::stoi(sv_bind.substr(colon + 1));
      } catch (const std::exception &) {
      }
      if (port < 0 || port > 65535)
        throw InvalidConfig("bad port in --bind '" + sv_bind + "'");
      WsServer server(registry, sv_bind.substr(0, colon),
                      static_cast<unsigned short>(port));
      out << "listening on ws://" << sv_bind.substr(0, colon) << ':'
          << server.port() << std::endl;
      server.run();
      return 0;
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

} // namespace sketchrnn
