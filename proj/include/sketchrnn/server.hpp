// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "errors.hpp"
#include "protocol.hpp"

namespace sketchrnn {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

/// Splits a text payload into its non-blank lines.
inline std::vector<std::string> ndjson_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos)
      end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos)
      out.emplace_back(line);
    start = end + 1;
  }
  return out;
}

/// Line-oriented transport over a pair of streams: one session, one reply
/// line per request line. Returns the number of replies written.
inline std::size_t serve_stream(SessionRegistry &registry, std::istream &in,
                                std::ostream &out) {
  const auto id = registry.open();
  std::size_t replies = 0;
  std::string line;
  while (std::getline(in, line)) {
    for (const auto &msg : ndjson_lines(line)) {
      out << handle_text(registry, id, msg) << '\n' << std::flush;
      ++replies;
    }
  }
  registry.close(id);
  return replies;
}

namespace detail {

/// One WebSocket client. Each text frame may carry several newline-separated
/// messages; each reply goes out as its own text frame, in order.
class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
  WsConnection(tcp::socket socket, SessionRegistry &registry)
      : ws_(std::move(socket)), registry_(registry) {}

  void run() {
    ws_.set_option(
        websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&WsConnection::on_accept,
                                               shared_from_this()));
  }

private:
  void on_accept(beast::error_code ec) {
    if (ec)
      return;
    id_ = registry_.open();
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::on_read,
                                                      shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      registry_.close(id_);
      return;
    }
    const auto text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    for (const auto &msg : ndjson_lines(text))
      queue(handle_text(registry_, id_, msg));
    read();
  }

  void queue(std::string reply) {
    outbox_.push_back(std::move(reply));
    if (outbox_.size() == 1)
      write();
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    beast::bind_front_handler(&WsConnection::on_write,
                                              shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec)
      return;
    outbox_.pop_front();
    if (!outbox_.empty())
      write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionRegistry &registry_;
  std::string id_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
};

} // namespace detail

/// WebSocket service. Port 0 picks a free port; see port() after start().
/// All connections share one I/O thread, so handlers run one at a time.
class WsServer {
public:
  WsServer(SessionRegistry &registry, const std::string &address,
           unsigned short port)
      : registry_(registry), acceptor_(ioc_) {
    beast::error_code ec;
    const auto addr = net::ip::make_address(address, ec);
    if (ec)
      throw InvalidConfig("bad bind address '" + address + "'");
    const tcp::endpoint ep(addr, port);
    acceptor_.open(ep.protocol(), ec);
    if (!ec)
      acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec)
      acceptor_.bind(ep, ec);
    if (!ec)
      acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec)
      throw InvalidInput("cannot listen on " + address + ":" +
                         std::to_string(port) + ": " + ec.message());
  }

  ~WsServer() { stop(); }

  WsServer(const WsServer &) = delete;
  WsServer &operator=(const WsServer &) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Serves on a background thread.
  void start() {
    accept();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void run() {
    accept();
    ioc_.run();
  }

  void stop() {
    ioc_.stop();
    if (thread_.joinable())
      thread_.join();
  }

private:
  void accept() {
    acceptor_.async_accept(
        net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket s) {
          if (!ec)
            std::make_shared<detail::WsConnection>(std::move(s), registry_)
                ->run();
          if (acceptor_.is_open())
            accept();
        });
  }

  SessionRegistry &registry_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  std::thread thread_;
};

} // namespace sketchrnn
