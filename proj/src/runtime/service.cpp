#include "cwgan/runtime/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <sstream>

namespace cwgan::runtime {

DecodeGate::DecodeGate(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("DecodeGate: capacity must be positive");
}

bool DecodeGate::acquire(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  const std::uint64_t ticket = next_ticket_++;
  queue_.push_back(ticket);
  const bool admitted = cv_.wait_for(lock, timeout, [&] { return queue_.front() == ticket && active_ < capacity_; });
  if (!admitted) {
    queue_.erase(std::find(queue_.begin(), queue_.end(), ticket));
    cv_.notify_all();
    return false;
  }
  queue_.pop_front();
  ++active_;
  cv_.notify_all();
  return true;
}

void DecodeGate::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_all();
}

std::size_t DecodeGate::active() const {
  std::lock_guard lock(mutex_);
  return active_;
}

std::size_t DecodeGate::waiting() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

namespace {

using json = nlohmann::json;

HttpReply error_reply(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

}  // namespace

struct ChatService::Server {
  httplib::Server http;
};

ChatService::ChatService(std::shared_ptr<const ChatEngine> engine, RuntimeConfig config,
                         std::shared_ptr<TranscriptWriter> transcript)
    : engine_(std::move(engine)),
      config_(std::move(config)),
      transcript_(std::move(transcript)),
      gate_(config_.max_sessions) {
  if (!engine_) throw std::invalid_argument("ChatService: no engine");
}

ChatService::~ChatService() { stop(); }

std::shared_ptr<const ChatEngine> ChatService::engine() const {
  std::lock_guard lock(engine_mutex_);
  return engine_;
}

bool ChatService::reloading() const {
  std::lock_guard lock(engine_mutex_);
  return reloading_;
}

void ChatService::begin_reload() {
  std::lock_guard lock(engine_mutex_);
  reloading_ = true;
}

void ChatService::finish_reload(std::shared_ptr<const ChatEngine> engine) {
  std::lock_guard lock(engine_mutex_);
  if (engine) engine_ = std::move(engine);
  reloading_ = false;
}

HttpReply ChatService::handle_chat(const std::string& body) {
  std::shared_ptr<const ChatEngine> engine;
  {
    std::lock_guard lock(engine_mutex_);
    if (reloading_) return error_reply(503, "checkpoint reload in progress");
    engine = engine_;
  }
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    return error_reply(400, "body is not valid JSON");
  }
  if (!request.is_object() || !request.contains("message") || !request["message"].is_string()) {
    return error_reply(400, "body must be an object with a string \"message\"");
  }
  std::string session = "anonymous";
  if (request.contains("session_id")) {
    if (!request["session_id"].is_string()) return error_reply(400, "\"session_id\" must be a string");
    session = request["session_id"].get<std::string>();
  }
  const std::string message = request["message"].get<std::string>();
  if (message.size() > engine->max_message_chars()) {
    return error_reply(413, "message longer than " + std::to_string(engine->max_message_chars()) + " characters");
  }
  if (message.find_first_not_of(" \t\r\n") == std::string::npos) return error_reply(400, "message is empty");

  if (!gate_.acquire(std::chrono::milliseconds(config_.request_timeout_ms))) {
    return error_reply(503, "all decode slots busy; try again");
  }
  ChatTurn turn;
  try {
    turn = engine->reply(session, message);
  } catch (const std::exception& e) {
    gate_.release();
    return error_reply(500, e.what());
  }
  gate_.release();
  if (transcript_) transcript_->append(turn);
  return {200, json{{"answer", turn.bot_text}, {"tokens", turn.token_count}, {"latency_ms", turn.latency_ms}}.dump()};
}

HttpReply ChatService::handle_health() const {
  const auto engine = this->engine();
  if (reloading()) return {503, json{{"status", "reloading"}, {"checkpoint", engine->checkpoint_id()}}.dump()};
  return {200, json{{"status", "ok"}, {"checkpoint", engine->checkpoint_id()}}.dump()};
}

HttpReply ChatService::handle_info() const {
  if (reloading()) return error_reply(503, "checkpoint reload in progress");
  const auto engine = this->engine();
  json config = json::object();
  std::istringstream lines(dump_config(engine->config(), ConfigScope::persisted));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) config[line.substr(0, eq)] = line.substr(eq + 3);
  }
  json info{{"checkpoint", engine->checkpoint_id()},
            {"vocab_size", engine->vocab().size()},
            {"max_sessions", config_.max_sessions},
            {"decode_cap", config_.decode_cap},
            {"config", config}};
  return {200, info.dump()};
}

namespace {

void send(httplib::Response& res, const HttpReply& reply) {
  res.status = reply.status;
  res.set_content(reply.body, "application/json");
  if (reply.status == 503) res.set_header("Retry-After", "1");
}

}  // namespace

int ChatService::start(const std::string& host, int port) {
  stop();
  server_ = std::make_unique<Server>();
  auto& http = server_->http;
  const std::size_t workers = std::max<std::size_t>(32, config_.max_sessions * 4);
  http.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  http.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) { send(res, handle_chat(req.body)); });
  http.Get("/health", [this](const httplib::Request&, httplib::Response& res) { send(res, handle_health()); });
  http.Get("/info", [this](const httplib::Request&, httplib::Response& res) { send(res, handle_info()); });

  int bound = port;
  if (port == 0) {
    bound = http.bind_to_any_port(host);
  } else if (!http.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    server_.reset();
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->http.listen_after_bind(); });
  server_->http.wait_until_ready();
  return bound;
}

bool ChatService::run(const std::string& host, int port) {
  start(host, port);
  if (thread_.joinable()) thread_.join();
  return true;
}

void ChatService::stop() {
  if (server_) server_->http.stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

}  // namespace cwgan::runtime
