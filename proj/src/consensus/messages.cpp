#include "rmsd/consensus/messages.hpp"

#include <stdexcept>

namespace rmsd::consensus {

using nlohmann::json;

namespace {

constexpr std::string_view kTypeNames[] = {"VoteRequest",         "VoteResponse", "AppendEntries",
                                           "AppendResponse",      "ForwardTransactions",
                                           "TxRejected",          "ForwardAddPeer",
                                           "AddPeerRejected"};

template <std::size_t I = 0>
Message default_for_index(std::size_t index) {
  if constexpr (I < std::variant_size_v<Message>) {
    if (index == I) return Message{std::in_place_index<I>};
    return default_for_index<I + 1>(index);
  } else {
    throw std::runtime_error("unknown message type");
  }
}

struct BinaryEncoder {
  codec::Writer& w;
  void operator()(const VoteRequest& m) const {
    w.u64(m.term);
    w.fixed(m.candidate);
    w.u64(m.last_log_height);
    w.fixed(m.last_log_hash);
    w.u64(m.last_log_term);
  }
  void operator()(const VoteResponse& m) const {
    w.u64(m.term);
    w.u8(m.granted ? 1 : 0);
  }
  void operator()(const AppendEntries& m) const {
    w.u64(m.term);
    w.fixed(m.leader);
    w.u64(m.prev_height);
    w.fixed(m.prev_hash);
    w.u32(static_cast<std::uint32_t>(m.entries.size()));
    for (const auto& e : m.entries) {
      w.u64(e.term);
      encode_block(w, e.block);
    }
    w.u64(m.leader_commit);
  }
  void operator()(const AppendResponse& m) const {
    w.u64(m.term);
    w.u8(m.success ? 1 : 0);
    w.u64(m.match_height);
  }
  void operator()(const ForwardTransactions& m) const {
    w.u32(static_cast<std::uint32_t>(m.txs.size()));
    for (const auto& tx : m.txs) encode_transaction(w, tx);
  }
  void operator()(const TxRejected& m) const {
    w.u32(static_cast<std::uint32_t>(m.items.size()));
    for (const auto& i : m.items) {
      w.fixed(i.tx_id);
      w.u8(static_cast<std::uint8_t>(i.reason));
    }
  }
  void operator()(const ForwardAddPeer& m) const { encode_node_id(w, m.node); }
  void operator()(const AddPeerRejected& m) const {
    w.fixed(m.node);
    w.str(m.reason);
  }
};

PublicKey key_from_json(const json& j) {
  auto k = fixed_from_hex<32>(j.get<std::string>());
  if (!k) throw std::runtime_error("bad key hex");
  return *k;
}

Block block_from_b64(const json& j) {
  auto raw = from_base64(j.get<std::string>());
  if (!raw) throw std::runtime_error("bad base64 block");
  return decode_block(*raw);
}

Transaction tx_from_b64(const json& j) {
  auto raw = from_base64(j.get<std::string>());
  if (!raw) throw std::runtime_error("bad base64 transaction");
  return decode_transaction(*raw);
}

struct JsonEncoder {
  json& j;
  void operator()(const VoteRequest& m) const {
    j["candidate"] = to_hex(m.candidate);
    j["last_log_height"] = m.last_log_height;
    j["last_log_hash"] = to_hex(m.last_log_hash);
    j["last_log_term"] = m.last_log_term;
  }
  void operator()(const VoteResponse& m) const { j["granted"] = m.granted; }
  void operator()(const AppendEntries& m) const {
    j["leader"] = to_hex(m.leader);
    j["prev_height"] = m.prev_height;
    j["prev_hash"] = to_hex(m.prev_hash);
    j["leader_commit"] = m.leader_commit;
    auto entries = json::array();
    for (const auto& e : m.entries)
      entries.push_back({{"term", e.term}, {"block", to_base64(encode_block(e.block))}});
    j["blocks"] = std::move(entries);
  }
  void operator()(const AppendResponse& m) const {
    j["success"] = m.success;
    j["match_height"] = m.match_height;
  }
  void operator()(const ForwardTransactions& m) const {
    auto txs = json::array();
    for (const auto& tx : m.txs) txs.push_back(to_base64(encode_transaction(tx)));
    j["txs"] = std::move(txs);
  }
  void operator()(const TxRejected& m) const {
    auto items = json::array();
    for (const auto& i : m.items)
      items.push_back({{"tx_id", to_hex(i.tx_id)}, {"reason", static_cast<int>(i.reason)}});
    j["items"] = std::move(items);
  }
  void operator()(const ForwardAddPeer& m) const { j["node"] = render_node_uri(m.node); }
  void operator()(const AddPeerRejected& m) const {
    j["node"] = to_hex(m.node);
    j["reason"] = m.reason;
  }
};

struct JsonDecoder {
  const json& j;
  void operator()(VoteRequest& m) const {
    m.term = j.at("term").get<std::uint64_t>();
    m.candidate = key_from_json(j.at("candidate"));
    m.last_log_height = j.at("last_log_height").get<std::uint64_t>();
    m.last_log_hash = key_from_json(j.at("last_log_hash"));
    m.last_log_term = j.at("last_log_term").get<std::uint64_t>();
  }
  void operator()(VoteResponse& m) const {
    m.term = j.at("term").get<std::uint64_t>();
    m.granted = j.at("granted").get<bool>();
  }
  void operator()(AppendEntries& m) const {
    m.term = j.at("term").get<std::uint64_t>();
    m.leader = key_from_json(j.at("leader"));
    m.prev_height = j.at("prev_height").get<std::uint64_t>();
    m.prev_hash = key_from_json(j.at("prev_hash"));
    m.leader_commit = j.at("leader_commit").get<std::uint64_t>();
    for (const auto& e : j.at("blocks"))
      m.entries.push_back(LogEntry{e.at("term").get<std::uint64_t>(), block_from_b64(e.at("block"))});
  }
  void operator()(AppendResponse& m) const {
    m.term = j.at("term").get<std::uint64_t>();
    m.success = j.at("success").get<bool>();
    m.match_height = j.at("match_height").get<std::uint64_t>();
  }
  void operator()(ForwardTransactions& m) const {
    for (const auto& t : j.at("txs")) m.txs.push_back(tx_from_b64(t));
  }
  void operator()(TxRejected& m) const {
    for (const auto& i : j.at("items")) {
      auto reason = i.at("reason").get<int>();
      if (reason < 0 || reason > static_cast<int>(ledger::TxError::AlreadyApproved))
        throw std::runtime_error("bad rejection reason");
      m.items.push_back({key_from_json(i.at("tx_id")), static_cast<ledger::TxError>(reason)});
    }
  }
  void operator()(ForwardAddPeer& m) const {
    auto node = parse_node_uri(j.at("node").get<std::string>());
    if (!node) throw std::runtime_error("bad node uri");
    m.node = *node;
  }
  void operator()(AddPeerRejected& m) const {
    m.node = key_from_json(j.at("node"));
    m.reason = j.at("reason").get<std::string>();
  }
};

}  // namespace

std::string_view message_type(const Message& m) { return kTypeNames[m.index()]; }

std::uint64_t message_term(const Message& m) {
  return std::visit(
      [](const auto& v) -> std::uint64_t {
        if constexpr (requires { v.term; })
          return v.term;
        else
          return 0;
      },
      m);
}

Bytes signing_bytes(const Envelope& e) {
  codec::Writer w;
  w.u8(static_cast<std::uint8_t>(e.msg.index()));
  w.fixed(e.from);
  w.fixed(e.to);
  std::visit(BinaryEncoder{w}, e.msg);
  return std::move(w).take();
}

void sign_envelope(Envelope& e, const KeyPair& key) { e.sig = key.sign(signing_bytes(e)); }

bool verify_envelope(const Envelope& e) { return verify_signature(e.from, signing_bytes(e), e.sig); }

json envelope_to_json(const Envelope& e) {
  json j;
  j["type"] = message_type(e.msg);
  j["term"] = message_term(e.msg);
  j["from"] = to_hex(e.from);
  j["to"] = to_hex(e.to);
  j["sig"] = to_hex(e.sig);
  std::visit(JsonEncoder{j}, e.msg);
  return j;
}

Envelope envelope_from_json(const json& j) {
  auto type = j.at("type").get<std::string>();
  std::size_t index = std::size(kTypeNames);
  for (std::size_t i = 0; i < std::size(kTypeNames); ++i)
    if (kTypeNames[i] == type) index = i;
  Envelope e;
  e.msg = default_for_index(index);
  e.from = key_from_json(j.at("from"));
  e.to = key_from_json(j.at("to"));
  auto sig = fixed_from_hex<64>(j.at("sig").get<std::string>());
  if (!sig) throw std::runtime_error("bad signature hex");
  e.sig = *sig;
  std::visit(JsonDecoder{j}, e.msg);
  if (message_term(e.msg) != j.at("term").get<std::uint64_t>())
    throw std::runtime_error("term field mismatch");
  return e;
}

Bytes frame_envelope(const Envelope& e) {
  auto text = envelope_to_json(e).dump();
  codec::Writer w;
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(ByteView{reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  return std::move(w).take();
}

}  // namespace rmsd::consensus
