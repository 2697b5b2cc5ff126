// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "features.hpp"
#include "model.hpp"
#include "training.hpp"

namespace sketchrnn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char *kCheckpointFormat = "sketchrnn-checkpoint";

/// A trained model plus everything needed to reproduce its inputs.
struct Checkpoint {
  TrainConfig config;
  FeatureConfig features;
  std::vector<std::string> labels;
  Model model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;

  std::string label_name(std::size_t idx) const {
    return idx < labels.size() ? labels[idx] : std::to_string(idx);
  }
};

namespace detail {

inline constexpr char kB64[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::vector<std::uint8_t> &bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t v = bytes[i] << 16;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string &text) {
  std::array<int, 256> table{};
  table.fill(-1);
  for (int k = 0; k < 64; ++k)
    table[static_cast<unsigned char>(kB64[k])] = k;
  if (text.size() % 4 != 0)
    throw CorruptFile("base64 payload length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        v[k] = table[static_cast<unsigned char>(c)];
        if (v[k] < 0 || pad > 0)
          throw CorruptFile("invalid base64 payload");
      }
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    if (pad < 2)
      out.push_back(static_cast<std::uint8_t>(w >> 8));
    if (pad < 1)
      out.push_back(static_cast<std::uint8_t>(w));
  }
  return out;
}

/// Little-endian IEEE-754 binary64, base64 encoded.
inline std::string encode_doubles(std::span<const double> values) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k)
      bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  return base64_encode(bytes);
}

inline std::vector<double> decode_doubles(const std::string &text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 8 != 0)
    throw CorruptFile("tensor payload is not a whole number of doubles");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(bytes[i * 8 + k]) << (8 * k);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

} // namespace detail

inline std::string checkpoint_to_string(const Checkpoint &ckpt) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = ckpt.config.to_json();
  j["features"] = ckpt.features.to_json();
  j["labels"] = ckpt.labels;
  j["model"] = {{"cell", to_string(ckpt.model.kind())},
                {"input_dim", ckpt.model.input_dim()},
                {"hidden", ckpt.model.hidden()},
                {"classes", ckpt.model.classes()},
                {"output_bias", ckpt.model.head.use_bias}};
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  ckpt.model.for_each_tensor([&](std::string_view name, const DenseMatrix &t) {
    nlohmann::ordered_json e;
    e["name"] = name;
    e["rows"] = t.rows();
    e["cols"] = t.cols();
    e["data"] = detail::encode_doubles(t.data());
    tensors.push_back(std::move(e));
  });
  j["tensors"] = std::move(tensors);
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto &r : ckpt.history)
    hist.push_back({{"epoch", r.epoch},
                    {"train_loss", r.train_loss},
                    {"train_accuracy", r.train_accuracy},
                    {"val_loss", r.val_loss},
                    {"val_accuracy", r.val_accuracy}});
  j["history"] = std::move(hist);
  j["best_epoch"] = ckpt.best_epoch;
  return j.dump(1) + "\n";
}

inline Checkpoint checkpoint_from_string(const std::string &text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw CorruptFile(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", std::string()) != kCheckpointFormat)
    throw CorruptFile("not a sketchrnn checkpoint");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw CorruptFile("checkpoint has no version");
  if (j["version"].get<int>() != kCheckpointVersion)
    throw VersionMismatch("checkpoint version " +
                          std::to_string(j["version"].get<int>()) +
                          ", this build reads version " +
                          std::to_string(kCheckpointVersion));
  try {
    Checkpoint c;
    c.config = TrainConfig::from_json(j.at("config"));
    c.features = FeatureConfig::from_json(j.at("features"));
    c.labels = j.at("labels").get<std::vector<std::string>>();
    const auto &mj = j.at("model");
    const auto kind = parse_cell_kind(mj.at("cell").get<std::string>());
    const auto d = mj.at("input_dim").get<std::size_t>();
    const auto h = mj.at("hidden").get<std::size_t>();
    const auto k = mj.at("classes").get<std::size_t>();
    if (d == 0 || h == 0 || k == 0)
      throw CorruptFile("checkpoint model dimensions must be positive");
    if (kind == CellKind::gru)
      c.model.cell = GruParameters::zeros(h, d);
    else
      c.model.cell = LstmParameters::zeros(h, d);
    c.model.head = ClassifierHead::zeros(k, h, mj.at("output_bias").get<bool>());

    const auto &tensors = j.at("tensors");
    std::size_t idx = 0;
    c.model.for_each_tensor([&](std::string_view name, DenseMatrix &t) {
      if (idx >= tensors.size())
        throw CorruptFile("checkpoint is missing tensor " + std::string(name));
      const auto &e = tensors[idx++];
      if (e.at("name").get<std::string>() != name)
        throw CorruptFile("checkpoint tensor " + std::to_string(idx - 1) +
                          " is '" + e.at("name").get<std::string>() +
                          "', expected '" + std::string(name) + "'");
      const auto rows = e.at("rows").get<std::size_t>();
      const auto cols = e.at("cols").get<std::size_t>();
      if (rows != t.rows() || cols != t.cols())
        throw CorruptFile("checkpoint tensor " + std::string(name) + " is " +
                          shape_str(rows, cols) + ", expected " + t.shape());
      auto values = detail::decode_doubles(e.at("data").get<std::string>());
      if (values.size() != t.size())
        throw CorruptFile("checkpoint tensor " + std::string(name) + " holds " +
                          std::to_string(values.size()) + " values, expected " +
                          std::to_string(t.size()));
      t = DenseMatrix(rows, cols, std::move(values));
    });
    if (idx != tensors.size())
      throw CorruptFile("checkpoint has extra tensors");
    if (c.config.hidden != h || c.config.cell != kind ||
        c.config.output_bias != c.model.head.use_bias)
      throw CorruptFile("checkpoint config (cell " + to_string(c.config.cell) +
                        ", H=" + std::to_string(c.config.hidden) +
                        ") disagrees with its model (cell " + to_string(kind) +
                        ", H=" + std::to_string(h) + ")");
    if (!c.labels.empty() && c.labels.size() != k)
      throw CorruptFile("checkpoint has " + std::to_string(c.labels.size()) +
                        " category names for " + std::to_string(k) + " classes");
    if (c.features.dim() != d)
      throw CorruptFile("feature dimension " + std::to_string(c.features.dim()) +
                        " does not match model input " + std::to_string(d));
    for (const auto &r : j.at("history"))
      c.history.push_back({r.at("epoch").get<int>(),
                           r.at("train_loss").get<double>(),
                           r.at("train_accuracy").get<double>(),
                           r.at("val_loss").get<double>(),
                           r.at("val_accuracy").get<double>()});
    c.best_epoch = j.at("best_epoch").get<int>();
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw CorruptFile(std::string("checkpoint field error: ") + e.what());
  } catch (const InvalidConfig &e) {
    throw CorruptFile(std::string("checkpoint config error: ") + e.what());
  }
}

/// Writes to a sibling temporary and renames, so readers never see a
/// half-written checkpoint.
inline void save_checkpoint(const Checkpoint &ckpt, const std::string &path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw InvalidInput("cannot write checkpoint '" + path + "'");
    out << checkpoint_to_string(ckpt);
    if (!out)
      throw InvalidInput("failed writing checkpoint '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InvalidInput("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

} // namespace sketchrnn
