// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "pooling.hpp"
#include "session.hpp"

namespace sketchrnn {

/// Owns the shared read-only checkpoint and one slot per client. The map
/// itself is guarded by one mutex; each slot has its own so that clients
/// never wait on each other's inference.
class SessionRegistry {
public:
  struct Slot {
    std::mutex mu;
    std::optional<OnlineSession> session;
    bool verbose = false;
  };

  SessionRegistry(std::shared_ptr<const Checkpoint> ckpt, PoolingScheme scheme,
                  std::size_t k = 5)
      : ckpt_(std::move(ckpt)), scheme_(scheme), k_(k) {
    if (!ckpt_)
      throw ContractError("SessionRegistry: null checkpoint");
    // Fails early for checkpoints that cannot run online.
    OnlineSession probe(ckpt_, scheme_, k_);
  }

  /// Reserves a fresh unique id with an empty slot.
  std::string open() {
    std::lock_guard lock(mu_);
    auto id = "s" + std::to_string(++counter_);
    slots_.emplace(id, std::make_shared<Slot>());
    return id;
  }

  /// Slot for `id`, created on first use.
  std::shared_ptr<Slot> slot(const std::string &id) {
    std::lock_guard lock(mu_);
    auto &s = slots_[id];
    if (!s)
      s = std::make_shared<Slot>();
    return s;
  }

  void close(const std::string &id) {
    std::lock_guard lock(mu_);
    slots_.erase(id);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return slots_.size();
  }

  OnlineSession new_session() const { return OnlineSession(ckpt_, scheme_, k_); }
  const Checkpoint &checkpoint() const noexcept { return *ckpt_; }
  std::size_t k() const noexcept { return k_; }

private:
  std::shared_ptr<const Checkpoint> ckpt_;
  PoolingScheme scheme_;
  std::size_t k_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::uint64_t counter_ = 0;
};

/// Replies keep their keys in protocol order, "type" first.
using Reply = nlohmann::ordered_json;

namespace detail {

inline Reply error_reply(const std::string &reason,
                                  const std::string &detail = {}) {
  Reply j = {{"type", "error"}, {"reason", reason}};
  if (!detail.empty())
    j["detail"] = detail;
  return j;
}

inline Reply ranked_json(const Ranked &ranked, const Checkpoint &ckpt) {
  auto out = Reply::array();
  for (const auto &[c, p] : ranked)
    out.push_back({{"c", c}, {"name", ckpt.label_name(c)}, {"p", p}});
  return out;
}

inline Reply hello_reply(const Checkpoint &ckpt, std::size_t k) {
  return {{"type", "hello"}, {"categories", ckpt.labels}, {"k", k}};
}

/// Points must be [x, y] pairs of finite numbers inside the unit square.
inline std::optional<std::string> parse_points(const nlohmann::json &msg,
                                               Stroke &stroke) {
  if (!msg.contains("points") || !msg["points"].is_array())
    return "stroke needs a 'points' array";
  const auto &pts = msg["points"];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto &p = pts[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() ||
        !p[1].is_number())
      return "point " + std::to_string(i) + " is not [x, y]";
    const double x = p[0].get<double>(), y = p[1].get<double>();
    if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0 || x > 1.0 ||
        y < 0.0 || y > 1.0)
      return "point " + std::to_string(i) + " lies outside [0, 1]^2";
    stroke.points.push_back({x, y, std::nullopt});
  }
  return std::nullopt;
}

inline Reply transition(SessionRegistry &registry,
                                 const std::string &session_id,
                                 const nlohmann::json &msg) {
  if (!msg.is_object())
    return error_reply("malformed_json", "message must be a JSON object");
  if (!msg.contains("type") || !msg["type"].is_string())
    return error_reply("missing_type");
  const auto type = msg["type"].get<std::string>();
  const auto slot = registry.slot(session_id);
  std::lock_guard lock(slot->mu);
  const auto &ckpt = registry.checkpoint();

  if (type == "start" || type == "reset") {
    if (type == "start")
      slot->verbose = msg.value("verbose", false);
    slot->session.emplace(registry.new_session());
    return detail::hello_reply(ckpt, registry.k());
  }
  if (type == "stroke") {
    if (!slot->session)
      return error_reply("no_session", "send start first");
    Stroke stroke;
    if (auto bad = detail::parse_points(msg, stroke))
      return error_reply("bad_points", *bad);
    if (stroke.points.empty())
      return error_reply("empty_stroke");
    const auto r = slot->session->feed_stroke(stroke);
    Reply reply = {{"type", "prediction"},
                            {"step", r.step},
                            {"p_topk", detail::ranked_json(r.p_topk, ckpt)},
                            {"pooled_topk",
                             detail::ranked_json(r.pooled_topk, ckpt)}};
    if (slot->verbose) {
      reply["probs"] = r.probs;
      reply["pooled"] = r.pooled.scores;
    }
    return reply;
  }
  if (type == "finish") {
    if (!slot->session)
      return error_reply("no_session", "send start first");
    if (slot->session->strokes() == 0)
      return error_reply("empty_sketch");
    const auto pooled = slot->session->finish();
    slot->session.reset();
    Reply reply = {
        {"type", "final"},
        {"label", pooled.label},
        {"name", ckpt.label_name(pooled.label)},
        {"scores_topk",
         detail::ranked_json(top_k(pooled.scores, registry.k()), ckpt)}};
    if (slot->verbose)
      reply["scores"] = pooled.scores;
    return reply;
  }
  return error_reply("unknown_type", "unknown message type '" + type + "'");
}

} // namespace detail

/// One protocol transition for client `session_id`. Never throws for bad
/// client input; every message yields exactly one reply.
inline Reply handle_message(SessionRegistry &registry,
                                     const std::string &session_id,
                                     const nlohmann::json &msg) {
  try {
    return detail::transition(registry, session_id, msg);
  } catch (const nlohmann::json::exception &e) {
    return detail::error_reply("bad_message", e.what());
  } catch (const Error &e) {
    return detail::error_reply("rejected", e.what());
  }
}

/// Text form: one JSON document in, one compact JSON line out.
inline std::string handle_text(SessionRegistry &registry,
                               const std::string &session_id,
                               const std::string &text) {
  constexpr auto replace = Reply::error_handler_t::replace;
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    return detail::error_reply("malformed_json", e.what()).dump(-1, ' ', false,
                                                                replace);
  }
  return handle_message(registry, session_id, msg).dump(-1, ' ', false, replace);
}

} // namespace sketchrnn
