#include "rmsd/transaction.hpp"

#include <algorithm>
#include <cctype>

namespace rmsd {

std::string_view role_label(Role r) {
  switch (r) {
    case Role::Admin: return "ADMIN";
    case Role::Checker: return "CHECKER";
    case Role::Creator: return "CREATOR";
    case Role::None: break;
  }
  return "NONE";
}

std::optional<Role> parse_role(std::string_view label) {
  std::string upper(label);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto r : kAllRoles)
    if (role_label(r) == upper) return r;
  return std::nullopt;
}

std::string_view payload_name(const Payload& p) {
  static constexpr std::string_view kNames[] = {"SetUser", "CreateNeed", "CreateSupport",
                                                "ApproveNeed", "ApproveSupport"};
  return kNames[p.index()];
}

namespace {

struct PayloadEncoder {
  codec::Writer& w;
  void operator()(const SetUser& p) const {
    w.u8(SetUser::kTag);
    w.fixed(p.target);
    w.u8(static_cast<std::uint8_t>(p.role));
  }
  void operator()(const CreateNeed& p) const {
    w.u8(CreateNeed::kTag);
    w.str(p.kind);
    w.u64(p.amount);
    w.str(p.unit);
    w.fixed(p.personal_ref);
  }
  void operator()(const CreateSupport& p) const {
    w.u8(CreateSupport::kTag);
    w.str(p.kind);
    w.u64(p.amount);
    w.str(p.unit);
    w.str(p.shipping);
    w.fixed(p.personal_ref);
  }
  void operator()(const ApproveNeed& p) const {
    w.u8(ApproveNeed::kTag);
    w.u64(p.need_id);
  }
  void operator()(const ApproveSupport& p) const {
    w.u8(ApproveSupport::kTag);
    w.u64(p.support_id);
  }
};

void encode_body(codec::Writer& w, const Account& sender, std::uint64_t nonce,
                 const Payload& payload) {
  w.fixed(sender);
  w.u64(nonce);
  std::visit(PayloadEncoder{w}, payload);
}

Payload decode_payload(codec::Reader& r) {
  switch (r.u8()) {
    case SetUser::kTag: {
      SetUser p;
      p.target = r.fixed<32>();
      auto role = r.u8();
      if (role > static_cast<std::uint8_t>(Role::Creator)) throw codec::DecodeError("unknown role");
      p.role = static_cast<Role>(role);
      return p;
    }
    case CreateNeed::kTag: {
      CreateNeed p;
      p.kind = r.str();
      p.amount = r.u64();
      p.unit = r.str();
      p.personal_ref = r.fixed<32>();
      return p;
    }
    case CreateSupport::kTag: {
      CreateSupport p;
      p.kind = r.str();
      p.amount = r.u64();
      p.unit = r.str();
      p.shipping = r.str();
      p.personal_ref = r.fixed<32>();
      return p;
    }
    case ApproveNeed::kTag: return ApproveNeed{r.u64()};
    case ApproveSupport::kTag: return ApproveSupport{r.u64()};
    default: throw codec::DecodeError("unknown payload tag");
  }
}

}  // namespace

Bytes encode_tx_body(const Account& sender, std::uint64_t nonce, const Payload& payload) {
  codec::Writer w;
  encode_body(w, sender, nonce, payload);
  return std::move(w).take();
}

void encode_transaction(codec::Writer& w, const Transaction& tx) {
  encode_body(w, tx.sender, tx.nonce, tx.payload);
  w.fixed(tx.signature);
}

Bytes encode_transaction(const Transaction& tx) {
  codec::Writer w;
  encode_transaction(w, tx);
  return std::move(w).take();
}

Transaction decode_transaction(codec::Reader& r) {
  Transaction tx;
  tx.sender = r.fixed<32>();
  tx.nonce = r.u64();
  tx.payload = decode_payload(r);
  tx.signature = r.fixed<64>();
  tx.tx_id = compute_tx_id(tx);
  return tx;
}

Transaction decode_transaction(ByteView bytes) {
  codec::Reader r(bytes);
  auto tx = decode_transaction(r);
  r.expect_done();
  return tx;
}

Digest compute_tx_id(const Transaction& tx) {
  return sha256(encode_tx_body(tx.sender, tx.nonce, tx.payload));
}

Transaction make_transaction(const KeyPair& key, std::uint64_t nonce, Payload payload) {
  Transaction tx;
  tx.sender = key.public_key();
  tx.nonce = nonce;
  tx.payload = std::move(payload);
  auto body = encode_tx_body(tx.sender, tx.nonce, tx.payload);
  tx.tx_id = sha256(body);
  tx.signature = key.sign(body);
  return tx;
}

}  // namespace rmsd
