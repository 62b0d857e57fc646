#pragma once

#include <cstdint>
#include <memory>
#include <string>

namespace fatigue::live {

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  double frame_rate = 30.0;
  /// Outbound messages allowed to queue per connection before the session
  /// stops stepping until the client catches up.
  std::size_t max_backlog = 64;
};

/// Reads FATIGUE_LIVE_HOST and FATIGUE_LIVE_PORT over the given defaults.
ServerOptions options_from_env(ServerOptions defaults = {});

/// WebSocket server. One connection carries one session; frames, acks and
/// errors share the connection in order. Everything runs on one io_context.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Bound port (useful with port 0).
  std::uint16_t port() const;
  /// Serves until stop() is called.
  void run();
  /// Safe to call from any thread.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fatigue::live
