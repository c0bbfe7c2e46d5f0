#include "hotprompt/transport.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "hotprompt/error.hpp"

namespace hotprompt {
namespace {

constexpr int kPollMs = 50;

sockaddr_un unix_address(const std::filesystem::path& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  const std::string p = path.string();
  if (p.size() >= sizeof(addr.sun_path)) throw Error(ErrorCode::ChannelClosed, "socket path too long: " + p);
  std::memcpy(addr.sun_path, p.c_str(), p.size() + 1);
  return addr;
}

}  // namespace

FdChannel::FdChannel(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds) {}

FdChannel::~FdChannel() {
  stop();
  if (owns_) {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  }
}

void FdChannel::write_all(const std::string& bytes) {
  std::lock_guard lock(write_mutex_);
  std::size_t off = 0;
  while (off < bytes.size()) {
    ssize_t n = ::write(write_fd_, bytes.data() + off, bytes.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::ChannelClosed, std::string("write failed: ") + std::strerror(errno));
    off += static_cast<std::size_t>(n);
  }
}

BridgeEndpoint::Writer FdChannel::writer() {
  return [this](std::string bytes) { write_all(bytes); };
}

void FdChannel::start(BridgeEndpoint& endpoint, std::function<void(const std::string&)> on_closed) {
  running_ = true;
  reader_ = std::thread([this, &endpoint, on_closed = std::move(on_closed)] {
    std::string reason = "eof";
    char buf[65536];
    while (!stopping_) {
      pollfd pfd{read_fd_, POLLIN, 0};
      int r = ::poll(&pfd, 1, kPollMs);
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) {
        reason = std::strerror(errno);
        break;
      }
      if (r == 0) continue;
      ssize_t n = ::read(read_fd_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      try {
        endpoint.receive_bytes(std::string_view(buf, static_cast<std::size_t>(n)));
      } catch (const Error& e) {
        reason = e.what();
        break;
      }
    }
    running_ = false;
    if (!stopping_) {
      endpoint.close(reason);
      if (on_closed) on_closed(reason);
    }
  });
}

void FdChannel::stop() {
  stopping_ = true;
  if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
  if (reader_.joinable()) reader_.detach();
}

UnixSocketServer::UnixSocketServer(std::filesystem::path path, Attach attach)
    : path_(std::move(path)), attach_(std::move(attach)) {}

UnixSocketServer::~UnixSocketServer() { stop(); }

void UnixSocketServer::start() {
  auto addr = unix_address(path_);
  std::error_code ec;
  std::filesystem::remove(path_, ec);
  listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0 || ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 4) != 0)
    throw Error(ErrorCode::ChannelClosed, "cannot listen on " + path_.string() + ": " + std::strerror(errno));
  thread_ = std::thread([this] {
    while (!stopping_) {
      pollfd pfd{listen_fd_, POLLIN, 0};
      if (::poll(&pfd, 1, kPollMs) <= 0) continue;
      int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      attach_(std::make_unique<FdChannel>(fd, fd, true));
    }
  });
}

void UnixSocketServer::stop() {
  stopping_ = true;
  if (thread_.joinable()) thread_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
}

int connect_unix_socket(const std::filesystem::path& path) {
  auto addr = unix_address(path);
  int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0 || ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    if (fd >= 0) ::close(fd);
    throw Error(ErrorCode::ChannelClosed, "cannot connect to " + path.string() + ": " + std::strerror(errno));
  }
  return fd;
}

}  // namespace hotprompt
