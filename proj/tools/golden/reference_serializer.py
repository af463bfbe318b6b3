#!/usr/bin/env python3
"""Standalone reference encoder for the canonical block/transaction format.

Writes testdata/golden/vectors.json. Written field by field from the format
description and shares no code with the C++ implementation; the C++ tests
compare against its output.
"""
import hashlib
import json
import pathlib
import struct

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey


def u8(v):
    return struct.pack(">B", v)


def u16(v):
    return struct.pack(">H", v)


def u32(v):
    return struct.pack(">I", v)


def u64(v):
    return struct.pack(">Q", v)


def string(s):
    raw = s.encode("utf-8")
    return u32(len(raw)) + raw


def key_from_seed(seed):
    sk = Ed25519PrivateKey.from_private_bytes(seed)
    pk = sk.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
    return sk, pk


def node_id(pk, host, port, raftport):
    return pk + string(host) + u16(port) + u16(raftport)


def payload_set_user(target, role):
    return u8(0x01) + target + u8(role)


def payload_create_need(kind, amount, unit, ref):
    return u8(0x02) + string(kind) + u64(amount) + string(unit) + ref


def payload_create_support(kind, amount, unit, shipping, ref):
    return u8(0x03) + string(kind) + u64(amount) + string(unit) + string(shipping) + ref


def payload_approve_need(i):
    return u8(0x04) + u64(i)


def payload_approve_support(i):
    return u8(0x05) + u64(i)


def tx(sk, pk, nonce, payload):
    body = pk + u64(nonce) + payload
    sig = sk.sign(body)
    return {
        "body_hex": body.hex(),
        "tx_id": hashlib.sha256(body).hexdigest(),
        "encoded_hex": (body + sig).hex(),
    }


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[2] / "testdata" / "golden"
    out_dir.mkdir(parents=True, exist_ok=True)

    admin_seed = bytes(range(1, 33))
    admin_sk, admin_pk = key_from_seed(admin_seed)

    nodes = []
    for i in range(3):
        seed = bytes([0x10 + i]) * 32
        _, pk = key_from_seed(seed)
        nodes.append({"seed": seed.hex(), "pubkey": pk.hex(), "host": "127.0.0.1",
                      "port": 8545 + i, "raftport": 50400 + i})

    timestamp = 1_600_000_000_000
    proposer = bytes.fromhex(nodes[0]["pubkey"])

    genesis_tx = tx(admin_sk, admin_pk, 0, payload_set_user(admin_pk, 0x01))
    config = u8(0x01) + u32(len(nodes)) + b"".join(
        node_id(bytes.fromhex(n["pubkey"]), n["host"], n["port"], n["raftport"]) for n in nodes)
    prefix = u64(0) + bytes(32) + u64(timestamp) + proposer + u32(1)
    header = prefix + bytes.fromhex(genesis_tx["tx_id"]) + config
    block_hash = hashlib.sha256(header).digest()
    encoded = prefix + bytes.fromhex(genesis_tx["encoded_hex"]) + config + block_hash

    ref = hashlib.sha256(b"golden-personal-ref").digest()
    samples = {
        "set_user_checker": tx(admin_sk, admin_pk, 1, payload_set_user(bytes([0xAB]) * 32, 0x02)),
        "create_need": tx(admin_sk, admin_pk, 2, payload_create_need("blanket", 100, "pcs", ref)),
        "create_support": tx(admin_sk, admin_pk, 3,
                             payload_create_support("blanket", 150, "pcs", "cargo", ref)),
        "approve_need": tx(admin_sk, admin_pk, 4, payload_approve_need(0)),
        "approve_support": tx(admin_sk, admin_pk, 5, payload_approve_support(7)),
    }

    vectors = {
        "admin_seed": admin_seed.hex(),
        "admin_pubkey": admin_pk.hex(),
        "nodes": nodes,
        "timestamp": timestamp,
        "personal_ref": ref.hex(),
        "genesis": {
            "tx": genesis_tx,
            "header_hex": header.hex(),
            "block_hash": block_hash.hex(),
            "encoded_hex": encoded.hex(),
        },
        "transactions": samples,
    }
    (out_dir / "vectors.json").write_text(json.dumps(vectors, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
