#include "rmsd/node/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <stdexcept>

namespace rmsd::node {

using consensus::Envelope;

std::optional<HostPort> parse_host_port(std::string_view text) {
  HostPort hp;
  auto colon = text.rfind(':');
  std::string_view port = text;
  if (colon != std::string_view::npos) {
    hp.host = std::string(text.substr(0, colon));
    port = text.substr(colon + 1);
  }
  if (hp.host.empty()) hp.host = "0.0.0.0";
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (port.empty() || ec != std::errc{} || ptr != port.data() + port.size() || value > 65535)
    return std::nullopt;
  hp.port = static_cast<std::uint16_t>(value);
  return hp;
}

namespace {

bool write_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    auto n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_all(int fd, std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    auto n = ::recv(fd, data, size, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

int connect_to(const NodeId& node) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  auto port = std::to_string(node.raftport);
  if (::getaddrinfo(node.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) return -1;
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd >= 0) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  return fd;
}

}  // namespace

struct TcpTransport::Peer {
  NodeId node;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Bytes> queue;
  bool stopping = false;
  int fd = -1;
  std::thread thread;
};

TcpTransport::TcpTransport(KeyPair key, HostPort listen, Handler handler)
    : key_(std::move(key)), listen_(std::move(listen)), handler_(std::move(handler)) {}

TcpTransport::~TcpTransport() { stop(); }

void TcpTransport::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket: " + std::string(std::strerror(errno)));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(listen_.port);
  if (::inet_pton(AF_INET, listen_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("raft listen address must be an IPv4 literal: " + listen_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    auto err = std::string(std::strerror(errno));
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on " + listen_.host + ":" +
                             std::to_string(listen_.port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  bound_port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpTransport::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(conn_mutex_);
    for (int fd : inbound_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : readers_) t.join();
  readers_.clear();
  for (int fd : inbound_fds_) ::close(fd);
  inbound_fds_.clear();

  std::map<PublicKey, std::unique_ptr<Peer>> peers;
  {
    std::lock_guard lock(peers_mutex_);
    peers.swap(peers_);
  }
  for (auto& [key, peer] : peers) {
    {
      std::lock_guard lock(peer->mutex);
      peer->stopping = true;
      if (peer->fd >= 0) ::shutdown(peer->fd, SHUT_RDWR);
    }
    peer->cv.notify_all();
    peer->thread.join();
  }
}

void TcpTransport::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    int r = ::poll(&p, 1, 100);
    if (r <= 0) continue;
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(conn_mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    inbound_fds_.push_back(fd);
    readers_.emplace_back([this, fd] { read_loop(fd); });
  }
}

void TcpTransport::read_loop(int fd) {
  while (running_) {
    std::uint8_t header[4];
    if (!read_all(fd, header, 4)) break;
    std::uint32_t len = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                        (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
    if (len > kMaxFrame) {
      ++rejected_;
      break;
    }
    std::string body(len, '\0');
    if (!read_all(fd, reinterpret_cast<std::uint8_t*>(body.data()), len)) break;
    try {
      auto env = consensus::envelope_from_json(nlohmann::json::parse(body));
      if (env.to != key_.public_key() || !consensus::verify_envelope(env)) {
        ++rejected_;
        continue;
      }
      handler_(std::move(env));
    } catch (const std::exception&) {
      ++rejected_;
      break;
    }
  }
  ::shutdown(fd, SHUT_RDWR);
}

void TcpTransport::set_directory(const std::vector<NodeId>& nodes) {
  std::lock_guard lock(peers_mutex_);
  for (const auto& n : nodes) {
    if (n.pubkey == key_.public_key()) continue;
    auto it = directory_.find(n.pubkey);
    if (it != directory_.end() && it->second == n) continue;
    directory_[n.pubkey] = n;
    auto p = peers_.find(n.pubkey);
    if (p != peers_.end()) {
      std::lock_guard plock(p->second->mutex);
      p->second->node = n;
      if (p->second->fd >= 0) ::shutdown(p->second->fd, SHUT_RDWR);
    }
  }
}

void TcpTransport::send(Envelope env) {
  if (!running_) return;
  consensus::sign_envelope(env, key_);
  auto frame = consensus::frame_envelope(env);
  std::lock_guard lock(peers_mutex_);
  auto it = peers_.find(env.to);
  if (it == peers_.end()) {
    auto dir = directory_.find(env.to);
    if (dir == directory_.end()) return;
    auto peer = std::make_unique<Peer>();
    peer->node = dir->second;
    auto* raw = peer.get();
    peer->thread = std::thread([this, raw] { write_loop(*raw); });
    it = peers_.emplace(env.to, std::move(peer)).first;
  }
  auto& peer = *it->second;
  {
    std::lock_guard plock(peer.mutex);
    if (peer.queue.size() >= kMaxQueued) peer.queue.pop_front();
    peer.queue.push_back(std::move(frame));
  }
  peer.cv.notify_one();
}

void TcpTransport::write_loop(Peer& peer) {
  std::unique_lock lock(peer.mutex);
  while (!peer.stopping) {
    peer.cv.wait(lock, [&] { return peer.stopping || !peer.queue.empty(); });
    if (peer.stopping) break;
    if (peer.fd < 0) {
      auto node = peer.node;
      lock.unlock();
      int fd = connect_to(node);
      lock.lock();
      if (fd < 0) {
        // Unreachable: drop what is queued; consensus retries on its own schedule.
        peer.queue.clear();
        peer.cv.wait_for(lock, std::chrono::milliseconds(50), [&] { return peer.stopping; });
        continue;
      }
      if (peer.stopping) {
        ::close(fd);
        break;
      }
      peer.fd = fd;
    }
    auto frame = std::move(peer.queue.front());
    peer.queue.pop_front();
    int fd = peer.fd;
    lock.unlock();
    bool ok = write_all(fd, frame.data(), frame.size());
    lock.lock();
    if (!ok) {
      ::close(peer.fd);
      peer.fd = -1;
    }
  }
  if (peer.fd >= 0) ::close(peer.fd);
  peer.fd = -1;
}

}  // namespace rmsd::node
