#pragma once

// HTTP and WebSocket front end of the relight service.
//
//   GET  /assets               list assets in the asset directory
//   POST /assets/{id}/load     open a session on an asset
//   POST /render               one-shot render, PNG or PFM body
//   GET  /ws/session/{id}      WebSocket upgrade into a session

#include "gsr/service/session.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gsr::service {

inline constexpr const char* kAssetExtension = ".gsr";

/// Assets are the *.gsr files of one directory; the id is the file stem.
class AssetRegistry {
 public:
  explicit AssetRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) throw Error(ErrorCode::kIo, "asset directory not found: " + dir_.string());
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir_))
      if (entry.is_regular_file() && entry.path().extension() == kAssetExtension) out.push_back(entry.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::shared_ptr<const HeadAsset> get(const std::string& id) {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(id); it != cache_.end()) return it->second;
    const auto path = dir_ / (id + kAssetExtension);
    const bool safe = id.find('/') == std::string::npos && id.find('\\') == std::string::npos && id != ".." && id != ".";
    if (!safe || !std::filesystem::is_regular_file(path))
      throw ProtocolError("unknown_asset", "asset", "unknown asset '" + id + "'");
    auto asset = std::make_shared<const HeadAsset>(load_asset(path.string()));
    cache_.emplace(id, asset);
    return asset;
  }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const HeadAsset>> cache_;
};

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Transport-independent request handling and the session table.
class Service {
 public:
  explicit Service(std::filesystem::path asset_dir) : assets_(std::move(asset_dir)) {}

  HttpReply handle(const std::string& method, const std::string& target, const std::string& body) {
    const std::string path = target.substr(0, target.find('?'));
    try {
      if (path == "/assets") {
        if (method != "GET") return method_not_allowed(path);
        return list_assets();
      }
      if (path == "/render") {
        if (method != "POST") return method_not_allowed(path);
        return render_once(body);
      }
      const std::string prefix = "/assets/", suffix = "/load";
      if (path.size() > prefix.size() + suffix.size() && path.starts_with(prefix) && path.ends_with(suffix)) {
        if (method != "POST") return method_not_allowed(path);
        return load(path.substr(prefix.size(), path.size() - prefix.size() - suffix.size()));
      }
      return json_reply(404, error_json("not_found", "path", "no route for " + path));
    } catch (const ProtocolError& e) {
      return json_reply(e.code() == "unknown_asset" ? 404 : 400, error_json(e));
    } catch (const std::exception& e) {
      return json_reply(500, error_json("internal", "", e.what()));
    }
  }

  /// Session by id; unknown ids get a fresh session without an asset.
  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto& s = sessions_[id];
    if (!s) s = std::make_shared<Session>(id, loader());
    return s;
  }

  AssetRegistry& assets() { return assets_; }

 private:
  static HttpReply json_reply(int status, const json& j) { return {status, "application/json", j.dump()}; }

  static HttpReply method_not_allowed(const std::string& path) {
    return json_reply(405, error_json("method_not_allowed", "method", "method not allowed on " + path));
  }

  AssetLoader loader() {
    return [this](const std::string& id) { return assets_.get(id); };
  }

  HttpReply list_assets() {
    json list = json::array();
    for (const auto& id : assets_.ids()) {
      json entry = {{"id", id}};
      try {
        const auto a = assets_.get(id);
        entry["splats"] = a->size();
        entry["sh_degree"] = a->sh_degree;
        entry["name"] = a->metadata.name;
      } catch (const std::exception& e) {
        entry["error"] = e.what();
      }
      list.push_back(entry);
    }
    return json_reply(200, {{"schema_version", kSchemaVersion}, {"assets", list}});
  }

  HttpReply load(const std::string& asset_id) {
    auto asset = assets_.get(asset_id);
    SessionState initial;
    initial.asset_id = asset_id;
    std::string id;
    {
      std::lock_guard lock(mutex_);
      id = "s" + std::to_string(++session_counter_);
      sessions_[id] = std::make_shared<Session>(id, loader(), initial, asset);
    }
    return json_reply(200, {{"schema_version", kSchemaVersion},
                            {"type", "loaded"},
                            {"session", id},
                            {"socket", "/ws/session/" + id},
                            {"state", state_json(initial)}});
  }

  HttpReply render_once(const std::string& body) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error& e) {
      return json_reply(400, error_json("parse", "", std::string("malformed JSON: ") + e.what()));
    }
    const RenderRequest req = parse_render_request(j);
    const ImageBuffer img = render_state(*assets_.get(req.state.asset_id), req.state);
    const auto bytes = req.format == FrameFormat::kPng ? encode_png(img) : encode_pfm(img);
    return {200, req.format == FrameFormat::kPng ? "image/png" : "image/x-portable-floatmap",
            std::string(bytes.begin(), bytes.end())};
  }

  AssetRegistry assets_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t session_counter_ = 0;
};

// ---------------------------------------------------------------------------
// Boost.Beast transport. One I/O thread; rendering happens on the session
// owner threads, which hand frames back to the I/O thread.

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace detail {

inline constexpr const char* kSocketPrefix = "/ws/session/";

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket socket, std::shared_ptr<Session> session)
      : ws_(std::move(socket)), session_(std::move(session)) {}

  ~WsConnection() {
    if (token_) session_->detach(token_);
  }

  void run(http::request<http::string_body> req) {
    ws_.read_message_max(1 << 20);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->attach();
      self->read();
    });
  }

 private:
  void attach() {
    std::weak_ptr<WsConnection> weak = weak_from_this();
    auto exec = ws_.get_executor();
    token_ = session_->attach([weak, exec](Outbound o) {
      net::post(exec, [weak, o = std::move(o)]() mutable {
        if (auto self = weak.lock()) self->send(std::move(o));
      });
    });
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->session_->detach(self->token_);
        return;
      }
      self->session_->submit(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void send(Outbound o) {
    outbox_.push_back(std::move(o));
    if (outbox_.size() == 1) write();
  }

  void write() {
    ws_.binary(outbox_.front().binary);
    ws_.async_write(net::buffer(outbox_.front().data), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Session> session_;
  std::uint64_t token_ = 0;
  beast::flat_buffer buffer_;
  std::deque<Outbound> outbox_;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, Service& service) : stream_(std::move(socket)), service_(service) {}

  void run() { read(); }

 private:
  void read() {
    req_ = {};
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->dispatch();
    });
  }

  void dispatch() {
    const std::string target(req_.target());
    if (websocket::is_upgrade(req_)) {
      const std::string prefix = kSocketPrefix;
      if (target.starts_with(prefix) && target.size() > prefix.size()) {
        auto session = service_.session(target.substr(prefix.size()));
        std::make_shared<WsConnection>(stream_.release_socket(), std::move(session))->run(std::move(req_));
        return;
      }
      reply({404, "application/json", error_json("not_found", "path", "no socket at " + target).dump()});
      return;
    }
    reply(service_.handle(std::string(req_.method_string()), target, req_.body()));
  }

  void reply(const HttpReply& r) {
    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(r.status), req_.version());
    res->set(http::field::content_type, r.content_type);
    res->keep_alive(req_.keep_alive());
    res->body() = r.body;
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || !res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  Service& service_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace detail

class HttpServer {
 public:
  /// Port 0 picks a free port; see port().
  HttpServer(Service& service, const std::string& address, unsigned short port)
      : service_(service), acceptor_(ioc_, tcp::endpoint(net::ip::make_address(address), port)) {}

  ~HttpServer() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() {
    accept();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  /// Serves on the calling thread until stop().
  void run() {
    accept();
    ioc_.run();
  }

  void stop() {
    ioc_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec == net::error::operation_aborted) return;
      if (!ec) std::make_shared<detail::HttpConnection>(std::move(socket), service_)->run();
      accept();
    });
  }

  Service& service_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  std::thread thread_;
};

}  // namespace gsr::service
