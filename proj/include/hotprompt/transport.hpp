#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "hotprompt/bridge.hpp"

namespace hotprompt {

/// Byte pipe between two file descriptors and a BridgeEndpoint. A reader
/// thread feeds inbound bytes to the endpoint; writes are serialized.
class FdChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool owns_fds = false);
  ~FdChannel();
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  /// Writer to hand to a BridgeEndpoint. Throws Error{ChannelClosed} once the
  /// descriptor is gone.
  BridgeEndpoint::Writer writer();
  /// Starts the reader; `on_closed` runs on the reader thread at EOF or on a
  /// protocol error.
  void start(BridgeEndpoint& endpoint, std::function<void(const std::string& reason)> on_closed = {});
  void stop();
  bool running() const { return running_; }

 private:
  void write_all(const std::string& bytes);

  int read_fd_;
  int write_fd_;
  bool owns_;
  std::mutex write_mutex_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stopping_{false};
  std::thread reader_;
};

/// Listening Unix socket; each accepted connection is handed to `attach`.
/// Used for the popup.
class UnixSocketServer {
 public:
  using Attach = std::function<void(std::unique_ptr<FdChannel>)>;

  UnixSocketServer(std::filesystem::path path, Attach attach);
  ~UnixSocketServer();

  void start();
  void stop();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  Attach attach_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

/// Connects to a Unix socket. Throws Error{ChannelClosed}.
int connect_unix_socket(const std::filesystem::path& path);

}  // namespace hotprompt
