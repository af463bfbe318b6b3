#pragma once

// In-process clusters of real nodes talking TCP and HTTP on loopback.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <thread>

#include "rmsd/node/bootstrap.hpp"
#include "rmsd/node/client.hpp"
#include "rmsd/node/service.hpp"

namespace rmsd::test {

namespace fs = std::filesystem;

inline std::uint16_t free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

inline bool wait_until(const std::function<bool()>& pred,
                       std::chrono::milliseconds timeout = std::chrono::seconds(15)) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!pred()) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return true;
}

inline node::NodeSpec make_spec(const fs::path& dir) {
  node::NodeSpec s{KeyPair::generate(), {}, dir};
  s.id = NodeId{s.key.public_key(), "127.0.0.1", free_port(), free_port()};
  return s;
}

class TestCluster {
 public:
  TestCluster(std::size_t n, const std::string& name, std::uint64_t quorum_timeout_ms = 3000)
      : root_(fs::temp_directory_path() / ("rmsd-" + name + "-" + std::to_string(::getpid()))),
        admin_(KeyPair::generate()),
        quorum_timeout_ms_(quorum_timeout_ms) {
    fs::remove_all(root_);
    for (std::size_t i = 0; i < n; ++i) specs_.push_back(make_spec(root_ / ("n" + std::to_string(i))));
    auto genesis = node::init_network(admin_, specs_, 1'700'000'000'000ULL);
    if (!genesis) throw std::runtime_error(genesis.error());
    genesis_ = *genesis;
    nodes_.resize(n);
  }
  ~TestCluster() {
    for (auto& n : nodes_) n.reset();
    std::error_code ec;
    fs::remove_all(root_, ec);
  }

  node::NodeConfig config(std::size_t i) const {
    node::NodeConfig c;
    c.data_dir = specs_[i].data_dir;
    c.listen = {"127.0.0.1", specs_[i].id.port};
    c.raft_listen = {"127.0.0.1", specs_[i].id.raftport};
    c.seed = i + 1;
    c.quorum_timeout_ms = quorum_timeout_ms_;
    c.http_threads = 4;
    return c;
  }

  void start(std::size_t i) {
    nodes_[i] = std::make_unique<node::NodeService>(config(i));
    nodes_[i]->start();
  }
  void start_all() {
    for (std::size_t i = 0; i < specs_.size(); ++i) start(i);
  }
  void stop(std::size_t i) { nodes_[i].reset(); }

  /// Creates a data dir for a not-yet-admitted node and returns its index.
  std::size_t add_joiner(const std::string& static_nodes) {
    auto spec = make_spec(root_ / ("n" + std::to_string(specs_.size())));
    auto dir = node::prepare_join_dir(spec.data_dir, spec.key, genesis_, static_nodes);
    if (!dir) throw std::runtime_error(dir.error());
    specs_.push_back(spec);
    nodes_.emplace_back();
    return specs_.size() - 1;
  }

  node::ApiClient client(std::size_t i) const {
    return node::ApiClient("127.0.0.1:" + std::to_string(specs_[i].id.port));
  }

  std::optional<std::size_t> leader() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i] && nodes_[i]->status().role == consensus::NodeRole::Leader) return i;
    return std::nullopt;
  }

  bool wait_for_leader(std::chrono::milliseconds timeout = std::chrono::seconds(15)) const {
    return wait_until(
        [&] {
          for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i] && !nodes_[i]->status().quorum) return false;
          return leader().has_value();
        },
        timeout);
  }

  /// Every running node has committed at least `height`.
  bool wait_for_height(std::uint64_t height,
                       std::chrono::milliseconds timeout = std::chrono::seconds(15)) const {
    return wait_until(
        [&] {
          for (const auto& n : nodes_)
            if (n && n->snapshot()->height < height) return false;
          return true;
        },
        timeout);
  }

  std::size_t size() const { return specs_.size(); }
  node::NodeService& node(std::size_t i) { return *nodes_[i]; }
  const node::NodeSpec& spec(std::size_t i) const { return specs_[i]; }
  const KeyPair& admin() const { return admin_; }
  const Block& genesis() const { return genesis_; }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  KeyPair admin_;
  std::uint64_t quorum_timeout_ms_;
  std::vector<node::NodeSpec> specs_;
  std::vector<std::unique_ptr<node::NodeService>> nodes_;
  Block genesis_;
};

/// Signs `payload` with the account's next nonce as reported by the node.
inline Transaction next_tx(node::ApiClient& c, const KeyPair& key, Payload payload) {
  auto nonce = c.next_nonce(key.public_key());
  if (!nonce) throw std::runtime_error("cannot fetch nonce");
  return make_transaction(key, *nonce, std::move(payload));
}

inline Digest tx_id_of(const node::ApiResponse& r) {
  return *fixed_from_hex<32>(r.body.at("tx_id").get<std::string>());
}

}  // namespace rmsd::test
