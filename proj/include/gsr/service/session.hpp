#pragma once

// One viewer session: an owner thread drains an ordered inbox, applies the
// edits in arrival order and renders once per drained batch (latest wins).

#include "gsr/service/protocol.hpp"

#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gsr::service {

struct Outbound {
  bool binary = false;
  std::string data;
};

using Sink = std::function<void(Outbound)>;

/// Resolves an asset id; throws ProtocolError("unknown_asset", ...) when absent.
using AssetLoader = std::function<std::shared_ptr<const HeadAsset>(const std::string&)>;

class Session {
 public:
  /// With start_worker false nothing runs in the background; the caller
  /// drains the inbox with run_pending().
  Session(std::string id, AssetLoader loader, SessionState initial = {},
          std::shared_ptr<const HeadAsset> asset = nullptr, bool start_worker = true)
      : id_(std::move(id)), loader_(std::move(loader)), state_(std::move(initial)), asset_(std::move(asset)) {
    if (start_worker) worker_ = std::thread([this] { run(); });
  }

  ~Session() {
    {
      std::lock_guard lock(inbox_mutex_);
      stopping_ = true;
    }
    inbox_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  /// Replaces the outbound sink; returns a token for detach().
  std::uint64_t attach(Sink sink) {
    std::lock_guard lock(sink_mutex_);
    sink_ = std::move(sink);
    return ++sink_token_;
  }

  /// Removes the sink if it is still the one attached under token. Blocks
  /// until a concurrent emit has returned.
  void detach(std::uint64_t token) {
    std::lock_guard lock(sink_mutex_);
    if (token == sink_token_) sink_ = nullptr;
  }

  /// Queues a raw client message. Never throws on malformed input; the
  /// owner answers with an error message.
  void submit(std::string text) {
    {
      std::lock_guard lock(inbox_mutex_);
      inbox_.push_back(std::move(text));
    }
    inbox_cv_.notify_one();
  }

  SessionState state() const {
    std::lock_guard lock(state_mutex_);
    return state_;
  }

  /// Processes everything queued so far as one batch on the calling thread.
  /// Only for sessions constructed without a worker.
  std::size_t run_pending() {
    std::vector<std::string> batch;
    {
      std::lock_guard lock(inbox_mutex_);
      batch.swap(inbox_);
    }
    process(batch);
    return batch.size();
  }

 private:
  void run() {
    for (;;) {
      std::vector<std::string> batch;
      {
        std::unique_lock lock(inbox_mutex_);
        inbox_cv_.wait(lock, [&] { return stopping_ || !inbox_.empty(); });
        if (stopping_) return;
        batch.swap(inbox_);
      }
      process(batch);
    }
  }

  void emit(const json& j) { emit(Outbound{false, j.dump()}); }

  void emit(Outbound o) {
    std::lock_guard lock(sink_mutex_);
    if (sink_) sink_(std::move(o));
  }

  void process(const std::vector<std::string>& batch) {
    std::vector<std::uint64_t> applied;
    for (const std::string& text : batch) {
      json msg;
      try {
        msg = json::parse(text);
      } catch (const json::parse_error& e) {
        emit(error_json("parse", "", std::string("malformed JSON: ") + e.what()));
        continue;
      }
      try {
        commit(msg);
        applied.push_back(state_.seq);
      } catch (const ProtocolError& e) {
        emit(error_json(e, message_seq(msg)));
      } catch (const std::exception& e) {
        emit(error_json("internal", "", e.what(), message_seq(msg)));
      }
    }
    if (applied.empty()) return;

    const std::uint64_t frame_seq = applied.back();
    for (std::uint64_t s : applied)
      emit(json{{"schema_version", kSchemaVersion}, {"type", "ack"}, {"seq", s}, {"frame_seq", frame_seq}});

    std::vector<std::uint8_t> png;
    try {
      png = encode_png(render_state(*asset_, state_));
    } catch (const std::exception& e) {
      emit(error_json("internal", "", std::string("render failed: ") + e.what(), frame_seq));
      return;
    }
    emit(json{{"schema_version", kSchemaVersion},
              {"type", "frame"},
              {"seq", frame_seq},
              {"coalesced", applied},
              {"format", "png"},
              {"width", state_.camera.width},
              {"height", state_.camera.height},
              {"byte_length", png.size()},
              {"state", state_json(state_)}});
    emit(Outbound{true, std::string(png.begin(), png.end())});
  }

  /// Validates msg against the current state and asset, then commits.
  void commit(const json& msg) {
    SessionState next = apply_edit(state_, msg);
    std::shared_ptr<const HeadAsset> asset = asset_;
    if (next.asset_id != state_.asset_id || !asset) {
      if (next.asset_id.empty()) throw ProtocolError("not_loaded", "asset", "no asset loaded; set asset first");
      asset = loader_(next.asset_id);
    }
    check_renderable(next, *asset);
    std::lock_guard lock(state_mutex_);
    state_ = std::move(next);
    asset_ = std::move(asset);
  }

  std::string id_;
  AssetLoader loader_;

  mutable std::mutex state_mutex_;  // guards reads of state_ from other threads
  SessionState state_;
  std::shared_ptr<const HeadAsset> asset_;

  std::mutex inbox_mutex_;
  std::condition_variable inbox_cv_;
  std::vector<std::string> inbox_;
  bool stopping_ = false;

  std::mutex sink_mutex_;
  Sink sink_;
  std::uint64_t sink_token_ = 0;

  std::thread worker_;
};

}  // namespace gsr::service
