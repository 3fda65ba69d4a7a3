#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "cwgan/runtime/chat.hpp"

namespace cwgan::runtime {

/// Counting gate that admits waiters strictly in arrival order.
class DecodeGate {
 public:
  explicit DecodeGate(std::size_t capacity);

  /// False when `timeout` passes before a slot frees up.
  bool acquire(std::chrono::milliseconds timeout);
  void release();

  std::size_t active() const;
  std::size_t waiting() const;

 private:
  std::size_t capacity_;
  std::size_t active_ = 0;
  std::uint64_t next_ticket_ = 0;
  std::deque<std::uint64_t> queue_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
};

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

/// HTTP front end: POST /chat, GET /health, GET /info.
class ChatService {
 public:
  ChatService(std::shared_ptr<const ChatEngine> engine, RuntimeConfig config,
              std::shared_ptr<TranscriptWriter> transcript = nullptr);
  ~ChatService();
  ChatService(const ChatService&) = delete;
  ChatService& operator=(const ChatService&) = delete;

  // Request handlers, independent of the socket layer.
  HttpReply handle_chat(const std::string& body);
  HttpReply handle_health() const;
  HttpReply handle_info() const;

  /// While reloading every endpoint but /health answers 503.
  void begin_reload();
  void finish_reload(std::shared_ptr<const ChatEngine> engine);
  bool reloading() const;

  std::shared_ptr<const ChatEngine> engine() const;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool run(const std::string& host, int port);
  void stop();

 private:
  struct Server;

  std::shared_ptr<const ChatEngine> engine_;
  RuntimeConfig config_;
  std::shared_ptr<TranscriptWriter> transcript_;
  DecodeGate gate_;
  bool reloading_ = false;
  mutable std::mutex engine_mutex_;
  std::unique_ptr<Server> server_;
  std::thread thread_;
};

}  // namespace cwgan::runtime
