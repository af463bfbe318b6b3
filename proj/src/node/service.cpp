#include "rmsd/node/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "httplib.h"

namespace rmsd::node {

namespace fs = std::filesystem;
using nlohmann::json;
using consensus::LogEntry;
using consensus::NodeRole;

// ---------------------------------------------------------------------------
// Files

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void fsync_path(const fs::path& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

void write_atomic(const fs::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fsync_path(tmp);
  fs::rename(tmp, path);
}

json entry_json(std::uint64_t term, const Block& b) {
  return {{"term", term}, {"block", to_base64(encode_block(b))}};
}

LogEntry entry_from_json(const json& j) {
  auto raw = from_base64(j.at("block").get<std::string>());
  if (!raw) throw std::runtime_error("log entry is not base64");
  return LogEntry{j.at("term").get<std::uint64_t>(), decode_block(*raw)};
}

std::uint64_t mix_seed(std::uint64_t seed, const PublicKey& key) {
  std::uint64_t h = seed;
  for (auto b : key) h = (h ^ b) * 0x100000001b3ULL;
  return h;
}

std::uint64_t system_ms() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

std::uint64_t steady_ms() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

}  // namespace

void write_key_file(const fs::path& path, const KeyPair& key) {
  write_atomic(path, to_hex(key.seed()) + "\n");
  fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write);
}

KeyPair read_key_file(const fs::path& path) {
  auto text = read_file(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
    text.pop_back();
  auto key = KeyPair::from_secret_hex(text);
  if (!key) throw std::runtime_error("malformed key file " + path.string());
  return *key;
}

void write_genesis_file(const fs::path& path, const Block& genesis) {
  auto bytes = encode_block(genesis);
  write_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Block read_genesis_file(const fs::path& path) {
  auto text = read_file(path);
  return decode_block(ByteView{reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::optional<Account> genesis_admin(const Block& genesis) {
  for (const auto& tx : genesis.transactions)
    if (const auto* su = std::get_if<SetUser>(&tx.payload))
      if (su->role == Role::Admin && su->target == tx.sender) return tx.sender;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Construction and lifecycle

struct NodeService::PeerWaiter {
  std::mutex mutex;
  std::condition_variable cv;
  bool done = false;
  std::optional<std::uint64_t> height;  // committed at
  std::string rejection;
};

NodeService::NodeService(NodeConfig config)
    : config_(std::move(config)),
      static_nodes_path_(config_.static_nodes.value_or(config_.data_dir / kStaticNodesFile)),
      node_key_(read_key_file(config_.data_dir / kNodeKeyFile)),
      service_key_([&] {
        auto path = config_.data_dir / kServiceKeyFile;
        if (!fs::exists(path)) write_key_file(path, KeyPair::generate());
        return read_key_file(path);
      }()),
      genesis_(read_genesis_file(config_.data_dir / kGenesisFile)) {
  if (hash_block(genesis_) != genesis_.block_hash)
    throw std::runtime_error("genesis block hash does not match its contents");
  if (config_.genesis_admin && genesis_admin(genesis_) != config_.genesis_admin)
    throw std::runtime_error("genesis admin does not match --genesis-admin");

  std::vector<NodeId> known = genesis_.config ? genesis_.config->nodes : std::vector<NodeId>{};
  if (fs::exists(static_nodes_path_)) {
    auto parsed = consensus::load_static_nodes(static_nodes_path_.string());
    if (!parsed) throw std::runtime_error("static nodes: " + parsed.error());
    for (const auto& n : parsed->nodes) known.push_back(n);
  }
  self_ = NodeId{node_key_.public_key(), config_.listen.host, config_.listen.port,
                 config_.raft_listen.port};
  for (const auto& n : known)
    if (n.pubkey == self_.pubkey) self_ = n;
  directory_ = known;

  clock_offset_ = system_ms() - steady_ms();
  config_.timing.epoch_offset = 0;
  const auto seed = mix_seed(config_.seed, node_key_.public_key());

  auto meta_path = config_.data_dir / kRaftMetaFile;
  auto log_path = config_.data_dir / kRaftLogFile;
  if (fs::exists(meta_path) && fs::exists(log_path)) {
    auto meta = json::parse(read_file(meta_path));
    consensus::PersistentState st;
    st.current_term = meta.at("current_term").get<std::uint64_t>();
    if (!meta.at("voted_for").is_null()) {
      auto v = fixed_from_hex<32>(meta.at("voted_for").get<std::string>());
      if (!v) throw std::runtime_error("malformed voted_for");
      st.voted_for = *v;
    }
    st.commit_index = meta.at("commit_index").get<std::uint64_t>();
    std::istringstream lines(read_file(log_path));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      try {
        st.log.push_back(entry_from_json(json::parse(line)));
      } catch (const std::exception&) {
        break;  // torn final write
      }
    }
    if (st.log.empty() || st.log.front().block != genesis_)
      throw std::runtime_error("persisted log does not start with this genesis block");
    if (st.commit_index >= st.log.size())
      throw std::runtime_error("persisted commit index beyond the log");
    persisted_entries_ = st.log.size();
    core_ = std::make_unique<consensus::RaftCore>(self_, std::move(st), config_.timing, seed,
                                                  now_ms());
    // Rewrite in case the tail was torn.
    std::string text;
    for (std::uint64_t h = 0; h <= core_->last_height(); ++h)
      text += entry_json(core_->term_at(h), core_->tip().chain().blocks[h]).dump() + "\n";
    write_atomic(log_path, text);
  } else {
    core_ = std::make_unique<consensus::RaftCore>(self_, genesis_, config_.timing, seed, now_ms());
    write_atomic(log_path, entry_json(core_->term_at(0), genesis_).dump() + "\n");
    persisted_entries_ = 1;
    consensus::Output none;
    none.persist = true;
    persist(none);
  }
  for (const auto& b : core_->committed().chain().blocks)
    for (const auto& tx : b.transactions) committed_tx_heights_[tx.tx_id] = b.height;
  for (const auto& n : core_->members()) directory_.push_back(n);
  if (!fs::exists(static_nodes_path_))
    consensus::save_static_nodes(static_nodes_path_.string(), {core_->committed().members()});

  privacy_ = std::make_unique<privacy::PrivacyStore>(config_.data_dir, [] { return system_ms(); });
  publish_snapshot();
}

NodeService::~NodeService() { stop(); }

std::uint64_t NodeService::now_ms() const { return steady_ms() + clock_offset_; }

void NodeService::start() {
  transport_ = std::make_unique<TcpTransport>(node_key_, config_.raft_listen,
                                              [this](consensus::Envelope env) {
                                                post([this, env = std::move(env)] {
                                                  handle_output(core_->receive(env, now_ms()));
                                                });
                                              });
  transport_->start();
  transport_->set_directory(directory_);

  http_ = std::make_unique<httplib::Server>();
  const auto threads = config_.http_threads;
  http_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  install_routes();
  if (config_.listen.port == 0) {
    int port = http_->bind_to_any_port(config_.listen.host);
    if (port < 0) throw std::runtime_error("cannot bind HTTP listener on " + config_.listen.host);
    http_port_ = static_cast<std::uint16_t>(port);
  } else {
    if (!http_->bind_to_port(config_.listen.host, config_.listen.port))
      throw std::runtime_error("cannot bind HTTP listener on " + config_.listen.host + ":" +
                               std::to_string(config_.listen.port));
    http_port_ = config_.listen.port;
  }
  running_ = true;
  loop_thread_ = std::thread([this] { run_loop(); });
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
}

void NodeService::stop() {
  if (!running_.exchange(false)) return;
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  task_cv_.notify_all();
  if (loop_thread_.joinable()) loop_thread_.join();
  if (transport_) transport_->stop();
  std::lock_guard lock(receipts_mutex_);
  for (auto& [key, w] : peer_waiters_) {
    std::lock_guard wl(w->mutex);
    w->done = true;
    w->cv.notify_all();
  }
}

void NodeService::post(std::function<void()> task) {
  {
    std::lock_guard lock(task_mutex_);
    tasks_.push_back(std::move(task));
  }
  task_cv_.notify_one();
}

template <typename F>
auto NodeService::call(F&& f) -> decltype(f()) {
  using R = decltype(f());
  auto promise = std::make_shared<std::promise<R>>();
  auto future = promise->get_future();
  post([promise, fn = std::forward<F>(f)]() mutable {
    try {
      if constexpr (std::is_void_v<R>) {
        fn();
        promise->set_value();
      } else {
        promise->set_value(fn());
      }
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  });
  if (future.wait_for(std::chrono::seconds(30)) != std::future_status::ready)
    throw std::runtime_error("node event loop is not responding");
  return future.get();
}

void NodeService::run_loop() {
  constexpr auto kTick = std::chrono::milliseconds(5);
  while (running_) {
    std::deque<std::function<void()>> batch;
    {
      std::unique_lock lock(task_mutex_);
      task_cv_.wait_for(lock, kTick, [&] { return !tasks_.empty() || !running_; });
      batch.swap(tasks_);
    }
    for (auto& task : batch) task();
    handle_output(core_->tick(now_ms()));
  }
  // Fail outstanding calls rather than leaving callers hanging.
  std::deque<std::function<void()>> rest;
  {
    std::lock_guard lock(task_mutex_);
    rest.swap(tasks_);
  }
  for (auto& task : rest) task();
}

NodeService::Status NodeService::status() {
  return call([this] {
    return Status{core_->role(), core_->current_term(), core_->leader_hint(),
                  core_->has_quorum_contact(now_ms())};
  });
}

std::shared_ptr<const Snapshot> NodeService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

// ---------------------------------------------------------------------------
// Loop-thread output handling

void NodeService::persist(const consensus::Output& out) {
  std::optional<std::uint64_t> truncated;
  bool appended = false;
  for (const auto& ev : out.events) {
    if (const auto* t = std::get_if<consensus::EntriesTruncated>(&ev))
      truncated = truncated ? std::min(*truncated, t->from) : t->from;
    if (std::holds_alternative<consensus::EntryAppended>(ev)) appended = true;
  }
  if (!out.persist && !truncated && !appended && out.committed.empty()) return;

  auto log_path = config_.data_dir / kRaftLogFile;
  const auto& blocks = core_->tip().chain().blocks;
  if (truncated && *truncated < persisted_entries_) {
    std::string text;
    for (std::uint64_t h = 0; h < blocks.size(); ++h)
      text += entry_json(core_->term_at(h), blocks[h]).dump() + "\n";
    write_atomic(log_path, text);
    persisted_entries_ = blocks.size();
  } else if (blocks.size() > persisted_entries_) {
    std::string text;
    for (std::uint64_t h = persisted_entries_; h < blocks.size(); ++h)
      text += entry_json(core_->term_at(h), blocks[h]).dump() + "\n";
    int fd = ::open(log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0600);
    if (fd < 0) throw std::runtime_error("cannot open " + log_path.string());
    auto n = ::write(fd, text.data(), text.size());
    ::fsync(fd);
    ::close(fd);
    if (n != static_cast<ssize_t>(text.size()))
      throw std::runtime_error("short write to " + log_path.string());
    persisted_entries_ = blocks.size();
  }

  json meta = {{"current_term", core_->current_term()},
               {"voted_for", core_->voted_for() ? json(to_hex(*core_->voted_for())) : json(nullptr)},
               {"commit_index", core_->commit_index()}};
  write_atomic(config_.data_dir / kRaftMetaFile, meta.dump() + "\n");
}

void NodeService::handle_output(consensus::Output out) {
  persist(out);

  if (config_.log) {
    for (const auto& ev : out.events) {
      if (const auto* e = std::get_if<consensus::BecameLeader>(&ev))
        config_.log("leader for term " + std::to_string(e->term));
      else if (const auto* e = std::get_if<consensus::BecameCandidate>(&ev))
        config_.log("candidate for term " + std::to_string(e->term));
      else if (const auto* e = std::get_if<consensus::BlockCommitted>(&ev))
        config_.log("committed height " + std::to_string(e->height));
    }
  }

  // Readers must see the new snapshot before any receipt or waiter reports the commit.
  for (const auto& b : out.committed)
    for (const auto& tx : b.transactions) committed_tx_heights_[tx.tx_id] = b.height;
  bool membership_changed = false;
  for (const auto& b : out.committed)
    membership_changed = membership_changed || (b.config && b.config->kind == ConfigChange::Kind::AddPeer);
  if (!out.committed.empty()) publish_snapshot();
  if (membership_changed)
    consensus::save_static_nodes(static_nodes_path_.string(), {core_->committed().members()});

  std::vector<std::pair<Digest, std::optional<Digest>>> rollbacks;
  {
    std::lock_guard lock(receipts_mutex_);
    for (const auto& b : out.committed) {
      for (const auto& tx : b.transactions) {
        auto it = receipts_.find(tx.tx_id);
        if (it != receipts_.end()) {
          it->second.status = api::ReceiptStatus::Committed;
          it->second.height = b.height;
        }
      }
      if (b.config && b.config->kind == ConfigChange::Kind::AddPeer) {
        for (const auto& n : b.config->nodes) {
          auto w = peer_waiters_.find(n.pubkey);
          if (w == peer_waiters_.end()) continue;
          std::lock_guard wl(w->second->mutex);
          w->second->done = true;
          w->second->height = b.height;
          w->second->cv.notify_all();
        }
      }
    }
    for (const auto& item : out.rejected) {
      auto it = receipts_.find(item.tx_id);
      if (it == receipts_.end() || it->second.status != api::ReceiptStatus::Pending) continue;
      it->second.status = api::ReceiptStatus::Rejected;
      it->second.reason = std::string(ledger::tx_error_name(item.reason));
      if (it->second.personal_ref) rollbacks.emplace_back(item.tx_id, it->second.personal_ref);
    }
    for (const auto& r : out.add_peer_rejected) {
      auto w = peer_waiters_.find(r.node);
      if (w == peer_waiters_.end()) continue;
      std::lock_guard wl(w->second->mutex);
      w->second->done = true;
      w->second->rejection = r.reason;
      w->second->cv.notify_all();
    }
  }
  for (const auto& [tx_id, ref] : rollbacks) privacy_->rollback(*ref, service_key_.public_key());

  // Any config entry in the log (committed or not) can introduce new addresses.
  for (const auto& ev : out.events) {
    if (std::holds_alternative<consensus::EntryAppended>(ev)) {
      const auto& m = core_->members();
      for (const auto& n : m) {
        bool known = false;
        for (const auto& d : directory_) known = known || d == n;
        if (!known) {
          directory_.push_back(n);
          membership_changed = true;
        }
      }
    }
  }
  if (membership_changed && transport_) transport_->set_directory(directory_);

  if (transport_)
    for (auto& env : out.messages) transport_->send(std::move(env));
}

void NodeService::publish_snapshot() {
  auto snap = std::make_shared<Snapshot>();
  const auto& c = core_->committed();
  snap->height = c.chain().height();
  snap->tip = c.chain().tip();
  snap->state = c.state();
  snap->state_digest = contract::state_digest(snap->state);
  snap->members = c.members();
  snap->blocks = std::make_shared<const std::vector<Block>>(c.chain().blocks);
  snap->tx_heights = std::make_shared<const std::map<Digest, std::uint64_t>>(committed_tx_heights_);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(snap);
}

// ---------------------------------------------------------------------------
// Writes

bool NodeService::wait_for_quorum() {
  const auto deadline = steady_ms() + config_.quorum_timeout_ms;
  while (running_) {
    if (call([this] { return core_->has_quorum_contact(now_ms()); })) return true;
    if (steady_ms() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return false;
}

NodeService::SubmitResult NodeService::submit_tx(const Transaction& tx,
                                                 std::optional<Digest> personal_ref) {
  SubmitResult result;
  if (!wait_for_quorum()) {
    result.no_quorum = true;
    return result;
  }
  result.receipt = call([this, tx, personal_ref] {
    api::Receipt r;
    r.tx_id = tx.tx_id;
    r.personal_ref = personal_ref;
    {
      std::lock_guard lock(receipts_mutex_);
      auto done = committed_tx_heights_.find(tx.tx_id);
      if (done != committed_tx_heights_.end()) {
        r.status = api::ReceiptStatus::Committed;
        r.height = done->second;
        return receipts_[tx.tx_id] = r;
      }
      auto existing = receipts_.find(tx.tx_id);
      if (existing != receipts_.end() && existing->second.status == api::ReceiptStatus::Pending)
        return existing->second;
      receipts_[tx.tx_id] = r;
    }
    handle_output(core_->submit(tx, now_ms()));
    std::lock_guard lock(receipts_mutex_);
    return receipts_[tx.tx_id];
  });
  return result;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view code,
                 std::string_view message) {
  reply(res, status, api::error_body(code, message));
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  try {
    return json::parse(req.body);
  } catch (const json::exception&) {
    reply_error(res, 400, api::kValidationError, "body is not valid JSON");
    return std::nullopt;
  }
}

std::optional<std::uint64_t> parse_id(const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

void reply_contract_error(httplib::Response& res, contract::ContractError e) {
  switch (e) {
    case contract::ContractError::Unauthorized:
      reply_error(res, 403, api::kUnauthorized, "caller lacks the required role");
      break;
    case contract::ContractError::UnknownId:
      reply_error(res, 404, api::kUnknownId, "no record with that id");
      break;
    default:
      reply_error(res, 400, api::kValidationError, contract::error_name(e));
  }
}

void reply_privacy_error(httplib::Response& res, privacy::PrivacyError e) {
  switch (e) {
    case privacy::PrivacyError::Validation:
      reply_error(res, 400, api::kValidationError, "invalid personal record");
      break;
    case privacy::PrivacyError::Unauthorized:
      reply_error(res, 403, api::kUnauthorized, "caller lacks the required role");
      break;
    case privacy::PrivacyError::NotFound:
      reply_error(res, 404, api::kNotFound, "no personal record with that reference");
      break;
    case privacy::PrivacyError::StorageFailure:
      reply_error(res, 500, api::kStorageFailure, "personal store write failed");
      break;
  }
}

void reply_receipt(httplib::Response& res, const api::Receipt& r) {
  reply(res, r.status == api::ReceiptStatus::Pending ? 202 : 200, api::receipt_json(r));
}

void reply_no_quorum(httplib::Response& res) {
  reply_error(res, 503, api::kNoQuorum, "no leader with a quorum is reachable");
}

}  // namespace

void NodeService::install_routes() {
  auto& s = *http_;

  auto authenticate = [](const httplib::Request& req,
                         httplib::Response& res) -> std::optional<Account> {
    auto who = api::verify_request(req.get_header_value(std::string(api::kKeyHeader)),
                                   req.get_header_value(std::string(api::kTimestampHeader)),
                                   req.get_header_value(std::string(api::kSignatureHeader)),
                                   req.method, req.path, req.body, api::unix_seconds_now());
    if (!who) {
      reply_error(res, 401, api::kUnauthorized, who.error());
      return std::nullopt;
    }
    return *who;
  };

  // Submits a client-signed transaction whose payload must satisfy `accept`.
  auto submit_signed = [this](const httplib::Request& req, httplib::Response& res,
                              auto accept, std::string_view expected) {
    auto body = parse_body(req, res);
    if (!body) return;
    auto tx = api::tx_from_body(*body);
    if (!tx) return reply_error(res, 400, api::kValidationError, tx.error());
    if (!std::visit(accept, tx->payload))
      return reply_error(res, 400, api::kValidationError,
                         "expected a " + std::string(expected) + " transaction");
    auto r = submit_tx(*tx, std::nullopt);
    if (r.no_quorum) return reply_no_quorum(res);
    reply_receipt(res, r.receipt);
  };

  s.Post("/v1/applications", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    const auto collected_at = system_ms();
    if (body->is_object() && body->contains("tx")) {
      auto tx = api::tx_from_body(*body);
      if (!tx) return reply_error(res, 400, api::kValidationError, tx.error());
      const Digest* ref = nullptr;
      if (auto* n = std::get_if<CreateNeed>(&tx->payload)) ref = &n->personal_ref;
      if (auto* n = std::get_if<CreateSupport>(&tx->payload)) ref = &n->personal_ref;
      if (!ref) return reply_error(res, 400, api::kValidationError, "expected a creation transaction");
      if (!body->contains("personal"))
        return reply_error(res, 400, api::kValidationError, "personal is required");
      auto personal = api::personal_from_json(body->at("personal"));
      if (!personal) return reply_error(res, 400, api::kValidationError, personal.error());
      personal->personal_ref = *ref;
      personal->collected_at = collected_at;
      personal->collected_by = tx->sender;
      if (privacy_->contains(*ref))
        return reply_error(res, 400, api::kValidationError, "personal_ref already in use");
      if (!wait_for_quorum()) return reply_no_quorum(res);
      auto stored = privacy_->put_at(*personal);
      if (!stored) return reply_privacy_error(res, stored.error());
      auto r = submit_tx(*tx, *ref);
      if (r.no_quorum) {
        privacy_->rollback(*ref, service_key_.public_key());
        return reply_no_quorum(res);
      }
      return reply_receipt(res, r.receipt);
    }
    if (config_.require_applicant_auth)
      return reply_error(res, 401, api::kUnauthorized,
                         "applications must be signed by the applicant");
    auto app = api::parse_application(*body);
    if (!app) return reply_error(res, 400, api::kValidationError, app.error());

    auto personal = app->personal;
    personal.collected_at = collected_at;
    personal.collected_by = service_key_.public_key();
    auto ref = privacy_->put(personal);
    if (!ref) return reply_privacy_error(res, ref.error());
    if (!wait_for_quorum()) {
      privacy_->rollback(*ref, service_key_.public_key());
      return reply_no_quorum(res);
    }
    Payload payload;
    if (app->kind == contract::RecordKind::Need)
      payload = CreateNeed{app->category, app->amount, app->unit, *ref};
    else
      payload = CreateSupport{app->category, app->amount, app->unit, app->shipping, *ref};
    // The nonce is taken and the transaction submitted in one loop task so
    // concurrent applications never share a nonce.
    auto receipt = call([this, payload, ref = *ref] {
      auto tx = make_transaction(service_key_, core_->suggested_nonce(service_key_.public_key()),
                                 payload);
      {
        std::lock_guard lock(receipts_mutex_);
        receipts_[tx.tx_id] = api::Receipt{tx.tx_id, api::ReceiptStatus::Pending, 0, {}, ref};
      }
      handle_output(core_->submit(tx, now_ms()));
      std::lock_guard lock(receipts_mutex_);
      return receipts_[tx.tx_id];
    });
    reply_receipt(res, receipt);
  });

  s.Post("/v1/approvals", [submit_signed](const httplib::Request& req, httplib::Response& res) {
    submit_signed(req, res,
                  [](const auto& p) {
                    using P = std::decay_t<decltype(p)>;
                    return std::is_same_v<P, ApproveNeed> || std::is_same_v<P, ApproveSupport>;
                  },
                  "approval");
  });

  s.Post("/v1/admin/roles", [submit_signed](const httplib::Request& req, httplib::Response& res) {
    submit_signed(req, res,
                  [](const auto& p) { return std::is_same_v<std::decay_t<decltype(p)>, SetUser>; },
                  "role assignment");
  });

  s.Post("/v1/admin/peers", [this, authenticate](const httplib::Request& req,
                                                 httplib::Response& res) {
    auto caller = authenticate(req, res);
    if (!caller) return;
    auto snap = snapshot();
    if (contract::get_user_auth(snap->state, *caller) != Role::Admin)
      return reply_error(res, 403, api::kUnauthorized, "adding peers requires the Admin role");
    auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_object() || !body->contains("node") || !body->at("node").is_string())
      return reply_error(res, 400, api::kValidationError, "body must be {\"node\": rnode URI}");
    auto node = parse_node_uri(body->at("node").get<std::string>());
    if (!node) return reply_error(res, 400, api::kValidationError, "malformed rnode URI");
    for (const auto& m : snap->members)
      if (m.pubkey == node->pubkey)
        return reply_error(res, 409, api::kDuplicatePeer, "node is already a member");
    if (!wait_for_quorum()) return reply_no_quorum(res);

    auto waiter = std::make_shared<PeerWaiter>();
    {
      std::lock_guard lock(receipts_mutex_);
      peer_waiters_[node->pubkey] = waiter;
    }
    call([this, n = *node] { handle_output(core_->request_add_peer(n, now_ms())); });
    bool finished;
    {
      std::unique_lock wl(waiter->mutex);
      finished = waiter->cv.wait_for(wl, std::chrono::milliseconds(config_.add_peer_timeout_ms),
                                     [&] { return waiter->done; });
    }
    {
      std::lock_guard lock(receipts_mutex_);
      auto it = peer_waiters_.find(node->pubkey);
      if (it != peer_waiters_.end() && it->second == waiter) peer_waiters_.erase(it);
    }
    std::lock_guard wl(waiter->mutex);
    if (!finished || (!waiter->height && waiter->rejection.empty())) return reply_no_quorum(res);
    if (!waiter->rejection.empty()) {
      if (waiter->rejection == "DuplicatePeer")
        return reply_error(res, 409, api::kDuplicatePeer, "node is already a member");
      return reply_error(res, 503, api::kNoQuorum, waiter->rejection);
    }
    // The commit handler publishes the snapshot before waking us.
    auto after = snapshot();
    json members = json::array();
    for (const auto& m : after->members) members.push_back(render_node_uri(m));
    reply(res, 200,
          {{"height", *waiter->height},
           {"members", members},
           {"static_nodes", consensus::render_static_nodes({after->members})}});
  });

  s.Get("/v1/needs", [this](const httplib::Request&, httplib::Response& res) {
    auto snap = snapshot();
    json items = json::array();
    for (const auto& r : contract::show_needs(snap->state)) items.push_back(api::need_json(r));
    reply(res, 200, {{"height", snap->height}, {"needs", items}});
  });

  s.Get(R"(/v1/needs/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto id = parse_id(req.matches[1]);
    if (!id) return reply_error(res, 400, api::kValidationError, "bad id");
    auto r = contract::show_need(snapshot()->state, *id);
    if (!r) return reply_contract_error(res, r.error());
    reply(res, 200, api::need_json(*r));
  });

  s.Get("/v1/supports", [this](const httplib::Request&, httplib::Response& res) {
    auto snap = snapshot();
    json items = json::array();
    for (const auto& r : contract::show_supports(snap->state)) items.push_back(api::support_json(r));
    reply(res, 200, {{"height", snap->height}, {"supports", items}});
  });

  s.Get("/v1/supports/approved", [this](const httplib::Request&, httplib::Response& res) {
    auto snap = snapshot();
    json items = json::array();
    for (const auto& r : contract::show_all_approved_supports(snap->state))
      items.push_back(api::support_json(r));
    reply(res, 200, {{"height", snap->height}, {"supports", items}});
  });

  s.Get(R"(/v1/supports/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto id = parse_id(req.matches[1]);
    if (!id) return reply_error(res, 400, api::kValidationError, "bad id");
    auto r = contract::show_support(snapshot()->state, *id);
    if (!r) return reply_contract_error(res, r.error());
    reply(res, 200, api::support_json(*r));
  });

  s.Get(R"(/v1/status/([a-z]+)/([^/]+))", [this, authenticate](const httplib::Request& req,
                                                                httplib::Response& res) {
    auto caller = authenticate(req, res);
    if (!caller) return;
    const std::string kind = req.matches[1];
    auto id = parse_id(req.matches[2]);
    if (!id) return reply_error(res, 400, api::kValidationError, "bad id");
    auto snap = snapshot();
    Expected<std::string, contract::ContractError> label = fail(contract::ContractError::UnknownId);
    if (kind == "need") label = contract::show_need_status(snap->state, *caller, *id);
    else if (kind == "support") label = contract::show_support_status(snap->state, *caller, *id);
    else return reply_error(res, 400, api::kValidationError, "kind must be need or support");
    if (!label) return reply_contract_error(res, label.error());
    reply(res, 200, {{"kind", kind}, {"id", *id}, {"status", *label}, {"height", snap->height}});
  });

  s.Get(R"(/v1/tx/([0-9a-fA-F]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto id = fixed_from_hex<32>(req.matches[1].str());
    if (!id) return reply_error(res, 400, api::kValidationError, "tx id must be 64 hex chars");
    {
      std::lock_guard lock(receipts_mutex_);
      auto it = receipts_.find(*id);
      if (it != receipts_.end()) return reply(res, 200, api::receipt_json(it->second));
    }
    auto snap = snapshot();
    auto it = snap->tx_heights->find(*id);
    if (it == snap->tx_heights->end())
      return reply_error(res, 404, api::kUnknownId, "unknown transaction");
    reply(res, 200,
          api::receipt_json(api::Receipt{*id, api::ReceiptStatus::Committed, it->second, {}, {}}));
  });

  s.Get("/v1/chain", [this](const httplib::Request&, httplib::Response& res) {
    auto snap = snapshot();
    Status st{};
    try {
      st = status();
    } catch (const std::exception&) {
      return reply_error(res, 503, api::kNoQuorum, "node is shutting down");
    }
    json members = json::array();
    for (const auto& m : snap->members) members.push_back(render_node_uri(m));
    reply(res, 200,
          {{"height", snap->height},
           {"tip", to_hex(snap->tip)},
           {"state_digest", to_hex(snap->state_digest)},
           {"leader", st.leader ? json(to_hex(*st.leader)) : json(nullptr)},
           {"peers", snap->members.size()},
           {"members", members},
           {"node", to_hex(self_.pubkey)},
           {"role", consensus::node_role_name(st.role)},
           {"term", st.term},
           {"quorum", st.quorum}});
  });

  s.Get(R"(/v1/blocks/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto h = parse_id(req.matches[1]);
    auto snap = snapshot();
    if (!h || *h >= snap->blocks->size())
      return reply_error(res, 404, api::kUnknownId, "no committed block at that height");
    reply(res, 200, api::block_json((*snap->blocks)[*h]));
  });

  s.Get(R"(/v1/accounts/([0-9a-fA-F]+))", [this](const httplib::Request& req,
                                                 httplib::Response& res) {
    auto account = fixed_from_hex<32>(req.matches[1].str());
    if (!account) return reply_error(res, 400, api::kValidationError, "account must be 64 hex chars");
    auto snap = snapshot();
    std::uint64_t next = 0;
    try {
      next = call([this, a = *account] { return core_->suggested_nonce(a); });
    } catch (const std::exception&) {
      return reply_error(res, 503, api::kNoQuorum, "node is shutting down");
    }
    reply(res, 200,
          {{"account", to_hex(*account)},
           {"role", role_label(contract::get_user_auth(snap->state, *account))},
           {"committed_nonce", contract::expected_nonce(snap->state, *account)},
           {"next_nonce", next}});
  });

  s.Get(R"(/v1/personal/([0-9a-fA-F]+))", [this, authenticate](const httplib::Request& req,
                                                                httplib::Response& res) {
    auto caller = authenticate(req, res);
    if (!caller) return;
    auto ref = fixed_from_hex<32>(req.matches[1].str());
    if (!ref) return reply_error(res, 400, api::kValidationError, "ref must be 64 hex chars");
    auto rec = privacy_->get(snapshot()->state, *caller, *ref);
    if (!rec) return reply_privacy_error(res, rec.error());
    reply(res, 200, api::personal_json(*rec));
  });

  s.Delete(R"(/v1/personal/([0-9a-fA-F]+))", [this, authenticate](const httplib::Request& req,
                                                                   httplib::Response& res) {
    auto caller = authenticate(req, res);
    if (!caller) return;
    auto ref = fixed_from_hex<32>(req.matches[1].str());
    if (!ref) return reply_error(res, 400, api::kValidationError, "ref must be 64 hex chars");
    if (auto err = privacy_->remove(snapshot()->state, *caller, *ref))
      return reply_privacy_error(res, *err);
    reply(res, 200, {{"deleted", to_hex(*ref)}});
  });

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      if (res.status == 404) reply_error(res, 404, api::kNotFound, "no such endpoint");
      else reply_error(res, res.status, api::kValidationError, "request failed");
    }
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply_error(res, 500, "InternalError", what);
  });
}

}  // namespace rmsd::node
