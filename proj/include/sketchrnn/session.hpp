// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "model.hpp"
#include "pooling.hpp"
#include "raster.hpp"

namespace sketchrnn {

using Ranked = std::vector<std::pair<std::size_t, double>>;

struct StepResult {
  std::size_t step = 0; // 1-based stroke count
  Vector probs;         // p_t
  PooledPrediction pooled;
  Ranked p_topk;
  Ranked pooled_topk;
};

/// Incremental recognizer: one stroke in, one recurrent step out. Strokes
/// must already be in normalized canvas coordinates; the cumulative raster
/// is never rescaled. The pooled prediction treats the current prefix
/// length as N.
class OnlineSession {
public:
  OnlineSession(std::shared_ptr<const Checkpoint> model, PoolingScheme scheme,
                std::size_t k = 5)
      : ckpt_(std::move(model)), scheme_(scheme), k_(k) {
    if (!ckpt_)
      throw ContractError("OnlineSession: null model");
    if (!ckpt_->features.is_occupancy())
      throw InvalidConfig("online recognition needs an occupancy extractor; "
                          "this model uses '" + ckpt_->features.kind + "'");
    ckpt_->features.validate();
    canvas_ = RasterImage(ckpt_->features.grid);
    state_ = zero_state(ckpt_->model.hidden());
  }

  StepResult feed_stroke(const Stroke &stroke) {
    if (finished_)
      throw SessionError("session already finished");
    if (stroke.points.empty())
      throw InvalidInput("stroke has no points");
    draw_stroke(canvas_, stroke);
    const Vector x = occupancy_features(canvas_, ckpt_->features);
    const auto &model = ckpt_->model;
    std::visit(
        [&](const auto &cell) {
          using Traits = CellTraits<std::decay_t<decltype(cell)>>;
          const auto step = Traits::step(cell, x, state_);
          Traits::advance(state_, step);
        },
        model.cell);
    probs_.push_back(softmax(head_logits(model.head, state_.h)));

    StepResult r;
    r.step = probs_.size();
    r.probs = probs_.back();
    r.pooled = pool_prediction(probs_, scheme_);
    r.p_topk = top_k(r.probs, k_);
    r.pooled_topk = top_k(r.pooled.scores, k_);
    return r;
  }

  /// Final pooled verdict; the session accepts no strokes afterwards.
  PooledPrediction finish() {
    if (finished_)
      throw SessionError("session already finished");
    if (probs_.empty())
      throw InvalidInput("empty sketch");
    finished_ = true;
    return pool_prediction(probs_, scheme_);
  }

  std::size_t strokes() const noexcept { return probs_.size(); }
  bool finished() const noexcept { return finished_; }
  const std::vector<Vector> &probs() const noexcept { return probs_; }
  const RasterImage &canvas() const noexcept { return canvas_; }
  const Vector &hidden_state() const noexcept { return state_.h; }
  const Checkpoint &checkpoint() const noexcept { return *ckpt_; }
  const PoolingScheme &scheme() const noexcept { return scheme_; }
  std::size_t k() const noexcept { return k_; }

private:
  std::shared_ptr<const Checkpoint> ckpt_;
  PoolingScheme scheme_;
  std::size_t k_;
  RasterImage canvas_;
  RecurrentState state_;
  std::vector<Vector> probs_;
  bool finished_ = false;
};

} // namespace sketchrnn
