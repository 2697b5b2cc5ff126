// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <gtest/gtest.h>

#include <sketchrnn/cli.hpp>
#include <sketchrnn/server.hpp>

#include "support.hpp"

using namespace sketchrnn;
using json = nlohmann::json;

namespace {

std::shared_ptr<const Checkpoint> shared_tiny() {
  static const auto ckpt =
      std::make_shared<const Checkpoint>(fixtures::tiny_checkpoint());
  return ckpt;
}

json stroke_msg(const Stroke &s) {
  json pts = json::array();
  for (const auto &p : s.points)
    pts.push_back({p.x, p.y});
  return {{"type", "stroke"}, {"points", pts}};
}

json send(SessionRegistry &reg, const std::string &id, const json &msg) {
  return json::parse(handle_text(reg, id, msg.dump()));
}

/// Blocking WebSocket client for tests.
class WsClient {
public:
  explicit WsClient(unsigned short port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
    ws_.text(true);
  }
  ~WsClient() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

  void write(const std::string &text) { ws_.write(net::buffer(text)); }

  json read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }

  json request(const json &msg) {
    write(msg.dump());
    return read();
  }

private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sketchrnn");
  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code =
      cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

} // namespace

TEST(Protocol, StartFinishWithoutStrokesIsEmptySketch) {
  SessionRegistry reg(shared_tiny(), PoolingScheme::weighted(10));
  const auto hello = send(reg, "a", {{"type", "start"}});
  EXPECT_EQ(hello["type"], "hello");
  EXPECT_EQ(hello["k"], 5);
  EXPECT_EQ(hello["categories"], json(shared_tiny()->labels));
  const auto r = send(reg, "a", {{"type", "finish"}});
  EXPECT_EQ(r["type"], "error");
  EXPECT_EQ(r["reason"], "empty_sketch");
}

TEST(Protocol, ErrorsAreRepliesAndSessionSurvivesUnknownType) {
  SessionRegistry reg(shared_tiny(), PoolingScheme::weighted(10));
  EXPECT_EQ(send(reg, "a", {{"type", "stroke"}, {"points", {{0.1, 0.1}}}})["reason"],
            "no_session");
  EXPECT_EQ(send(reg, "a", {{"type", "finish"}})["reason"], "no_session");
  EXPECT_EQ(json::parse(handle_text(reg, "a", "{not json"))["reason"],
            "malformed_json");
  EXPECT_EQ(json::parse(handle_text(reg, "a", "[1,2]"))["reason"], "malformed_json");
  EXPECT_EQ(send(reg, "a", {{"kind", "start"}})["reason"], "missing_type");

  send(reg, "a", {{"type", "start"}});
  EXPECT_EQ(send(reg, "a", {{"type", "ping"}})["reason"], "unknown_type");
  const auto p = send(reg, "a", {{"type", "stroke"}, {"points", {{0.1, 0.1}, {0.4, 0.6}}}});
  EXPECT_EQ(p["type"], "prediction");
  EXPECT_EQ(p["step"], 1);

  EXPECT_EQ(send(reg, "a", {{"type", "stroke"}, {"points", json::array()}})["reason"],
            "empty_stroke");
  EXPECT_EQ(send(reg, "a", {{"type", "stroke"}, {"points", {{1.5, 0.1}}}})["reason"],
            "bad_points");
  EXPECT_EQ(send(reg, "a", {{"type", "stroke"}, {"points", {{"x", 0.1}}}})["reason"],
            "bad_points");
  EXPECT_EQ(send(reg, "a", {{"type", "stroke"}})["reason"], "bad_points");
  // None of the rejected strokes advanced the session.
  EXPECT_EQ(send(reg, "a", {{"type", "stroke"}, {"points", {{0.5, 0.5}}}})["step"], 2);
}

TEST(Protocol, ResetAndFinishLifecycle) {
  SessionRegistry reg(shared_tiny(), PoolingScheme::weighted(10));
  EXPECT_EQ(send(reg, "fresh", {{"type", "reset"}})["type"], "hello");
  send(reg, "a", {{"type", "start"}});
  send(reg, "a", {{"type", "stroke"}, {"points", {{0.1, 0.1}, {0.9, 0.9}}}});
  EXPECT_EQ(send(reg, "a", {{"type", "reset"}})["type"], "hello");
  EXPECT_EQ(send(reg, "a", {{"type", "finish"}})["reason"], "empty_sketch");
  send(reg, "a", {{"type", "stroke"}, {"points", {{0.1, 0.1}, {0.9, 0.9}}}});
  const auto fin = send(reg, "a", {{"type", "finish"}});
  EXPECT_EQ(fin["type"], "final");
  EXPECT_EQ(fin["scores_topk"].size(), 4u);
  EXPECT_EQ(fin["name"], shared_tiny()->label_name(fin["label"].get<std::size_t>()));
  // finish closed the session
  EXPECT_EQ(send(reg, "a", {{"type", "finish"}})["reason"], "no_session");
}

TEST(Protocol, ReplayYieldsNPredictionsThenFinalMatchingOffline) {
  const auto ckpt = shared_tiny();
  SessionRegistry reg(ckpt, PoolingScheme::weighted(10));
  for (const auto &raw : synth_generate(4, 2, 90)) {
    const auto s = normalize_sketch(raw);
    std::vector<json> replies{send(reg, raw.id, {{"type", "start"}, {"verbose", true}})};
    for (const auto &st : s.strokes)
      replies.push_back(send(reg, raw.id, stroke_msg(st)));
    replies.push_back(send(reg, raw.id, {{"type", "finish"}}));
    ASSERT_EQ(replies.size(), s.strokes.size() + 2);
    for (std::size_t i = 1; i <= s.strokes.size(); ++i) {
      EXPECT_EQ(replies[i]["type"], "prediction");
      EXPECT_EQ(replies[i]["step"], i);
    }
    const auto offline = pool_prediction(
        predict_probabilities(ckpt->model, sketch_features(raw, ckpt->features)),
        PoolingScheme::weighted(10));
    EXPECT_EQ(replies.back()["label"], offline.label);
    EXPECT_EQ(replies.back()["scores"].get<std::vector<double>>(), offline.scores);
  }
}

TEST(Protocol, InterleavedSessionsAreIsolated) {
  const auto ckpt = shared_tiny();
  SessionRegistry reg(ckpt, PoolingScheme::weighted(10));
  const auto sketches = synth_generate(4, 1, 91);
  const auto a = normalize_sketch(sketches[0]), b = normalize_sketch(sketches[3]);

  auto solo = [&](const Sketch &s) {
    SessionRegistry own(ckpt, PoolingScheme::weighted(10));
    std::vector<json> out;
    send(own, "x", {{"type", "start"}});
    for (const auto &st : s.strokes)
      out.push_back(send(own, "x", stroke_msg(st)));
    out.push_back(send(own, "x", {{"type", "finish"}}));
    return out;
  };
  const auto expect_a = solo(a), expect_b = solo(b);

  std::vector<json> got_a, got_b;
  send(reg, "A", {{"type", "start"}});
  send(reg, "B", {{"type", "start"}});
  const auto n = std::max(a.strokes.size(), b.strokes.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i < a.strokes.size())
      got_a.push_back(send(reg, "A", stroke_msg(a.strokes[i])));
    if (i < b.strokes.size())
      got_b.push_back(send(reg, "B", stroke_msg(b.strokes[i])));
  }
  got_a.push_back(send(reg, "A", {{"type", "finish"}}));
  got_b.push_back(send(reg, "B", {{"type", "finish"}}));
  EXPECT_EQ(got_a, expect_a);
  EXPECT_EQ(got_b, expect_b);
}

TEST(Protocol, RepliesEqualRequests) {
  SessionRegistry reg(shared_tiny(), PoolingScheme::weighted(10));
  std::istringstream in(
      "{\"type\":\"start\"}\n\n{\"type\":\"stroke\",\"points\":[[0.2,0.3]]}\n"
      "garbage\n{\"type\":\"ping\"}\r\n{\"type\":\"finish\"}\n{\"type\":\"finish\"}\n");
  std::ostringstream out;
  EXPECT_EQ(serve_stream(reg, in, out), 6u);
  std::istringstream lines(out.str());
  std::string line;
  std::vector<std::string> types;
  while (std::getline(lines, line))
    types.push_back(json::parse(line)["type"]);
  EXPECT_EQ(types, (std::vector<std::string>{"hello", "prediction", "error",
                                             "error", "final", "error"}));
}

TEST(WebSocket, ScriptedSessionsOverTheWire) {
  const auto ckpt = shared_tiny();
  SessionRegistry reg(ckpt, PoolingScheme::weighted(10));
  WsServer server(reg, "127.0.0.1", 0);
  server.start();
  {
    const auto s = normalize_sketch(synth_generate(4, 1, 92)[1]);
    WsClient a(server.port()), b(server.port());
    EXPECT_EQ(a.request({{"type", "start"}, {"verbose", true}})["type"], "hello");
    EXPECT_EQ(b.request({{"type", "stroke"}, {"points", {{0.5, 0.5}}}})["reason"],
              "no_session"); // b has its own, still empty, slot
    std::size_t predictions = 0;
    for (const auto &st : s.strokes)
      predictions += a.request(stroke_msg(st))["type"] == "prediction";
    EXPECT_EQ(predictions, s.strokes.size());
    const auto fin = a.request({{"type", "finish"}});
    const auto offline = pool_prediction(
        predict_probabilities(ckpt->model, sketch_features(s, ckpt->features)),
        PoolingScheme::weighted(10));
    EXPECT_EQ(fin["label"], offline.label);

    // Several newline-separated messages in one frame get one reply each.
    b.write("{\"type\":\"start\"}\n{\"type\":\"finish\"}\nnope\n");
    EXPECT_EQ(b.read()["type"], "hello");
    EXPECT_EQ(b.read()["reason"], "empty_sketch");
    EXPECT_EQ(b.read()["reason"], "malformed_json");
  }
  server.stop();
}

TEST(Cli, UsageAndRuntimeErrors) {
  EXPECT_EQ(run_cli({}).code, 2);
  const auto bad_flag = run_cli({"gen-data", "--out", "x", "--bogus"});
  EXPECT_EQ(bad_flag.code, 2);
  EXPECT_NE(bad_flag.err.find("--per-class"), std::string::npos); // help text
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--model", "m", "--data", "d", "--scheme", "median"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);

  const auto missing = run_cli({"train", "--data", "/nonexistent/d.ndjson", "--out", "m"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("/nonexistent/d.ndjson"), std::string::npos);
  const auto no_model =
      run_cli({"predict", "--model", "/nonexistent/m.ckpt", "--sketch", "s.json"});
  EXPECT_EQ(no_model.code, 1);
  EXPECT_NE(no_model.err.find("/nonexistent/m.ckpt"), std::string::npos);
}

TEST(Cli, EndToEndWorkflow) {
  const auto dir = fixtures::scratch_dir("cli");
  const auto d = (dir / "d.ndjson").string();
  auto r = run_cli({"gen-data", "--classes", "8", "--per-class", "50", "--seed", "7",
                    "--out", d});
  ASSERT_EQ(r.code, 0) << r.err;
  {
    std::ifstream f(d);
    std::size_t lines = 0;
    for (std::string l; std::getline(f, l);)
      ++lines;
    EXPECT_EQ(lines, 400u);
  }
  EXPECT_EQ(load_label_map((dir / "d.labels.json").string()), synth_label_names(8));

  for (const char *name : {"m1.ckpt", "m2.ckpt"}) {
    r = run_cli({"train", "--data", d, "--epochs", "2", "--alpha", "10", "--hidden",
                 "8", "--seed", "1", "--out", (dir / name).string(), "--quiet"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(dir / "m1.ckpt"), slurp(dir / "m2.ckpt"));
  EXPECT_EQ(slurp(dir / "m1.history.csv").substr(0, 30), "epoch,train_loss,val_accuracy\n");
  const auto m = (dir / "m1.ckpt").string();
  EXPECT_EQ(load_checkpoint(m).labels, synth_label_names(8));

  r = run_cli({"curve", "--model", m, "--data", d});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 6); // header + 5 rows
  EXPECT_EQ(r.out.substr(0, 4), "x,t_");

  r = run_cli({"eval", "--model", m, "--data", d, "--scheme", "max"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(dir / "m1.eval.json"));
  EXPECT_EQ(report["total"],
            cli::select_subset(load_dataset(d), load_checkpoint(m), "test").size());
  EXPECT_TRUE(std::filesystem::exists(dir / "m1.eval.csv"));
  r = run_cli({"eval", "--model", m, "--data", d, "--subset", "all", "--out",
               (dir / "all").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(slurp(dir / "all.json"))["total"], 400);

  // predict on one sketch equals the service's final verdict, scores bitwise.
  const auto raw = load_dataset(d)[5];
  {
    std::ofstream f(dir / "one.json");
    f << sketch_to_json(raw).dump();
  }
  r = run_cli({"predict", "--model", m, "--sketch", (dir / "one.json").string(),
               "--verbose"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pred = json::parse(r.out);
  SessionRegistry reg(std::make_shared<const Checkpoint>(load_checkpoint(m)),
                      PoolingScheme::weighted(10));
  send(reg, "p", {{"type", "start"}, {"verbose", true}});
  for (const auto &st : normalize_sketch(raw).strokes)
    send(reg, "p", stroke_msg(st));
  const auto fin = send(reg, "p", {{"type", "finish"}});
  EXPECT_EQ(fin["label"], pred["label"]);
  EXPECT_EQ(fin["scores"], pred["scores"]);
  EXPECT_EQ(fin["scores_topk"], pred["scores_topk"]);
}

TEST(Cli, ImportedFeatures) {
  const auto dir = fixtures::scratch_dir("cli-import");
  const auto d = (dir / "d.ndjson").string();
  const auto sketches = synth_generate(2, 8, 3);
  save_dataset(sketches, d);
  {
    std::ofstream f(dir / "f.ndjson");
    SeededRng rng(1);
    for (const auto &s : sketches) {
      json rows = json::array();
      for (std::size_t t = 0; t < s.strokes.size(); ++t)
        rows.push_back({s.category + rng.uniform(0, 0.1), rng.uniform(0, 1), 0.5});
      f << json{{"id", s.id}, {"d", 3}, {"features", rows}}.dump() << '\n';
    }
  }
  const auto m = (dir / "m.ckpt").string();
  auto r = run_cli({"train", "--data", d, "--features", (dir / "f.ndjson").string(),
                    "--epochs", "2", "--hidden", "3", "--out", m, "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ckpt = load_checkpoint(m);
  EXPECT_EQ(ckpt.features.kind, "imported");
  EXPECT_EQ(ckpt.model.input_dim(), 3u);
  EXPECT_EQ(run_cli({"curve", "--model", m, "--data", d}).code, 1); // needs --features
  r = run_cli({"curve", "--model", m, "--data", d, "--features",
               (dir / "f.ndjson").string()});
  EXPECT_EQ(r.code, 0) << r.err;
}
