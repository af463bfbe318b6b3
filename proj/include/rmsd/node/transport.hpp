#pragma once

// Point-to-point consensus transport over TCP. Each frame is a 32-bit
// big-endian length followed by the JSON envelope; envelopes are signed on
// the way out and verified on the way in.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rmsd/consensus/messages.hpp"

namespace rmsd::node {

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

/// "host:port"; a bare ":port" or "port" means 0.0.0.0.
std::optional<HostPort> parse_host_port(std::string_view text);

class TcpTransport {
 public:
  using Handler = std::function<void(consensus::Envelope)>;

  static constexpr std::uint32_t kMaxFrame = 64u << 20;
  static constexpr std::size_t kMaxQueued = 4096;

  TcpTransport(KeyPair key, HostPort listen, Handler handler);
  ~TcpTransport();
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  /// Binds and starts accepting. Throws std::runtime_error if the bind fails.
  void start();
  void stop();

  /// Where to reach each peer; unknown destinations are dropped.
  void set_directory(const std::vector<NodeId>& nodes);
  /// Signs and queues; never blocks on the network.
  void send(consensus::Envelope env);

  std::uint16_t bound_port() const { return bound_port_; }
  std::uint64_t frames_rejected() const { return rejected_.load(); }

 private:
  struct Peer;
  void accept_loop();
  void read_loop(int fd);
  void write_loop(Peer& peer);

  KeyPair key_;
  HostPort listen_;
  Handler handler_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> rejected_{0};
  int listen_fd_ = -1;
  std::uint16_t bound_port_ = 0;
  std::thread acceptor_;

  std::mutex conn_mutex_;
  std::vector<int> inbound_fds_;
  std::vector<std::thread> readers_;

  std::mutex peers_mutex_;
  std::map<PublicKey, NodeId> directory_;
  std::map<PublicKey, std::unique_ptr<Peer>> peers_;
};

}  // namespace rmsd::node
