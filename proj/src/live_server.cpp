#include "fatigue/live_server.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <optional>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "fatigue/live_session.hpp"

namespace fatigue::live {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

ServerOptions options_from_env(ServerOptions o) {
  if (const char* host = std::getenv("FATIGUE_LIVE_HOST"); host && *host) o.host = host;
  if (const char* port = std::getenv("FATIGUE_LIVE_PORT"); port && *port) {
    char* end = nullptr;
    const long v = std::strtol(port, &end, 10);
    if (*end != '\0' || v < 0 || v > 65535) {
      throw std::invalid_argument("FATIGUE_LIVE_PORT must be a port number");
    }
    o.port = static_cast<std::uint16_t>(v);
  }
  return o;
}

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, const ServerOptions& options, std::atomic<std::uint64_t>& ids)
      : ws_(std::move(socket)),
        timer_(ws_.get_executor()),
        options_(options),
        ids_(ids),
        period_(std::chrono::duration_cast<Clock::duration>(
            std::chrono::duration<double>(1.0 / options.frame_rate))) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

 private:
  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->on_message(beast::buffers_to_string(self->in_.data()));
      self->in_.consume(self->in_.size());
      self->read();
    });
  }

  void on_message(const std::string& text) {
    Json msg;
    try {
      msg = Json::parse(text);
    } catch (const Json::parse_error& e) {
      return send(error_json("bad_json", e.what()));
    }
    const std::string type = msg.is_object() ? msg.value("type", std::string()) : std::string();
    if (type == "start") {
      if (session_) return send(error_json("session_exists", "this connection already has a session"));
      try {
        Scenario scenario = parse_scenario(msg.value("scenario", Json()));
        session_.emplace("s" + std::to_string(++ids_), std::move(scenario));
      } catch (const ProtocolError& e) {
        return send(error_json(e.code(), e.what()));
      }
      Json ack = ack_json(0);
      ack["session"] = session_->id();
      send(ack);
      send(to_json(session_->frame()));
      restart_clock();
      tick();
      return;
    }
    if (!session_) return send(error_json("unknown_session", "send a start message first"));
    if (msg.is_object() && msg.contains("session") && msg["session"] != session_->id()) {
      return send(error_json("unknown_session", "no such session on this connection"));
    }
    const bool was_paused = session_->paused();
    send(session_->handle(msg));
    if (was_paused && !session_->paused()) restart_clock();
  }

  void tick() {
    timer_.expires_at(deadline_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      self->on_tick();
      self->tick();
    });
  }

  void on_tick() {
    const auto now = Clock::now();
    if (session_->paused()) {
      deadline_ = now + period_;
      return;
    }
    if (outbox_.size() >= options_.max_backlog) {
      // the client is behind: hold the simulation, the lag shows in the next frame
      deadline_ = now + period_;
      return;
    }
    const double lag = std::max(0.0, std::chrono::duration<double>(now - slot_).count());
    if (auto frame = session_->step(lag)) send(to_json(*frame));
    // late slots fire back to back so no frame is skipped; after a long stall
    // pacing restarts from now
    slot_ = lag > 1.0 ? now + period_ : slot_ + period_;
    deadline_ = slot_;
  }

  void restart_clock() {
    slot_ = Clock::now() + period_;
    deadline_ = slot_;
  }

  void send(const Json& j) {
    outbox_.push_back(j.dump());
    if (!writing_) write();
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->close();
                      self->outbox_.pop_front();
                      if (self->outbox_.empty()) {
                        self->writing_ = false;
                      } else {
                        self->write();
                      }
                    });
  }

  void close() {
    closed_ = true;
    timer_.cancel();
  }

  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  const ServerOptions& options_;
  std::atomic<std::uint64_t>& ids_;
  Clock::duration period_;
  Clock::time_point deadline_{};
  Clock::time_point slot_{};
  beast::flat_buffer in_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool closed_ = false;
  std::optional<Session> session_;
};

}  // namespace

struct Server::Impl {
  explicit Impl(ServerOptions o)
      : options(std::move(o)), acceptor(ioc, tcp::endpoint(asio::ip::make_address(options.host), options.port)) {}

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), options, ids)->start();
      accept();
    });
  }

  ServerOptions options;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::atomic<std::uint64_t> ids{0};
};

Server::Server(ServerOptions options) {
  if (!(options.frame_rate > 0.0)) throw std::invalid_argument("frame rate must be > 0");
  impl_ = std::make_unique<Impl>(std::move(options));
}

Server::~Server() = default;

std::uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  impl_->accept();
  impl_->ioc.run();
}

void Server::stop() {
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    impl_->ioc.stop();
  });
}

}  // namespace fatigue::live
