"""Process-mode roles: the dealer service and the computing-party main loop.

The dealer listens for both parties, checks that they request identical
provisioning, and ships each its half of the correlated randomness as framed
binary. Parties then meet over the configured peer address, handshake on the
public config, and run the staged pipeline on their share files.
"""

from __future__ import annotations

import os

import numpy as np

from .dealer import MaterialSource
from .engine import MpcEngine
from .errors import ConfigMismatch, Exhausted, ParseError
from .fixedpoint import decode
from .session import PartyRuntime, format_report, handshake, run_report
from .shareio import (check_ring_meta, public_section, read_share_file,
                      ring_from_config, write_weights_file)
from .transport import (KIND_HELLO, KIND_MATERIAL, KIND_PROVISION, FrameIO,
                        connect, listen_one, payload_u64, u64_payload)

_KIND_CODES = {"triple": 1, "trunc": 2, "bit": 3}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def encode_counts(counts: dict) -> bytes:
    lines = []
    for key in sorted(counts, key=str):
        kind = key[0]
        shift = key[1] if len(key) > 1 else ""
        lines.append(f"{kind}:{shift}={counts[key]}")
    return "\n".join(lines).encode()


def decode_counts(payload: bytes) -> dict:
    out = {}
    for line in payload.decode().splitlines():
        head, value = line.split("=", 1)
        kind, shift = head.split(":", 1)
        key = (kind, int(shift)) if shift else (kind,)
        out[key] = int(value)
    return out


def _material_payload(key, arrays) -> bytes:
    kind = _KIND_CODES[key[0]]
    shift = key[1] if len(key) > 1 else 0
    head = bytes([kind, shift])
    return head + u64_payload(np.concatenate([np.ravel(a) for a in arrays]))


def serve_dealer(cfg: dict) -> None:
    """Accept both parties, verify matching provisioning requests, generate
    the session's material from the protocol seed, and ship the halves."""
    ring = ring_from_config(cfg)
    session = cfg["session_id"]
    source = MaterialSource(cfg["seed"], ring)
    conns = []
    import socket

    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((cfg["dealer_host"], cfg["dealer_port"]))
    srv.listen(2)
    srv.settimeout(cfg.get("connect_deadline", 15.0))
    from .transport import SocketChannel

    try:
        requests = {}
        for _ in range(2):
            conn, _addr = srv.accept()
            chan = SocketChannel(conn)
            io = FrameIO(chan, session, with_round=False)
            _, _, hello = io.recv(expect_kind=KIND_HELLO)
            party = int(hello.decode().split("=")[1])
            _, _, prov = io.recv(expect_kind=KIND_PROVISION)
            requests[party] = decode_counts(prov)
            conns.append((party, io, chan))
        if requests.get(0) != requests.get(1):
            raise ConfigMismatch("provisioning", requests.get(0), requests.get(1))
        counts = requests[0]
        for party, io, _chan in conns:
            for key in sorted(counts, key=str):
                n = counts[key]
                if key[0] == "triple":
                    u0, v0, w0, u1, v1, w1 = source.triples(0, n)
                    arrays = (u0, v0, w0) if party == 0 else (u1, v1, w1)
                elif key[0] == "trunc":
                    r0, rs0, r1, rs1 = source.trunc_pairs(key[1], 0, n)
                    arrays = (r0, rs0) if party == 0 else (r1, rs1)
                elif key[0] == "bit":
                    b0, b1 = source.bit_shares(0, n)
                    arrays = (b0,) if party == 0 else (b1,)
                else:
                    raise ParseError(f"unknown material kind {key!r}")
                io.send(KIND_MATERIAL, _material_payload(key, arrays))
    finally:
        for _, _, chan in conns:
            chan.close()
        srv.close()


class WireMaterial:
    """Party-side material buffers received from the dealer, plus the
    party's own local bit stream."""

    def __init__(self, source: MaterialSource, party: int, counts: dict):
        self.source = source
        self.party = party
        self.counts = dict(counts)
        self.buffers: dict = {}
        self.pos: dict = {}

    def load(self, key, payload: bytes):
        data = payload_u64(payload[2:])
        per = {"triple": 3, "trunc": 2, "bit": 1}[key[0]]
        self.buffers[key] = data.reshape(per, -1)

    def _take(self, key, n):
        cap = self.counts.get(key, 0)
        at = self.pos.get(key, 0)
        if at + n > cap:
            raise Exhausted(f"requested {at + n} of {key!r} but only {cap} provisioned")
        self.pos[key] = at + n
        return self.buffers[key][:, at:at + n]

    def take_triples(self, n):
        u, v, w = self._take(("triple",), n)
        return u, v, w

    def take_trunc(self, shift, n):
        r, rs = self._take(("trunc", shift), n)
        return r, rs

    def take_bits(self, n):
        return self._take(("bit",), n)[0]

    def take_local_bits(self, n):
        at = self.pos.get("local_bits", 0)
        self.pos["local_bits"] = at + n
        return self.source.party_bit_stream(self.party, at, n)


def provision_from_dealer(cfg: dict, party: int, counts: dict) -> WireMaterial:
    ring = ring_from_config(cfg)
    chan = connect(cfg["dealer_host"], cfg["dealer_port"],
                   deadline=cfg.get("connect_deadline", 15.0))
    io = FrameIO(chan, cfg["session_id"], with_round=False)
    io.send(KIND_HELLO, f"party={party}".encode())
    io.send(KIND_PROVISION, encode_counts(counts))
    material = WireMaterial(MaterialSource(cfg["seed"], ring), party, counts)
    for key in sorted(counts, key=str):
        _, _, payload = io.recv(expect_kind=KIND_MATERIAL, timeout=600.0)
        got_key = (_KIND_NAMES[payload[0]],)
        if payload[0] == _KIND_CODES["trunc"]:
            got_key = ("trunc", payload[1])
        material.load(got_key, payload)
    chan.close()
    return material


def connect_peer(cfg: dict, party: int):
    deadline = cfg.get("connect_deadline", 15.0)
    if party == 0:
        return listen_one(cfg["party0_host"], cfg["party0_port"], timeout=deadline)
    return connect(cfg["party0_host"], cfg["party0_port"], deadline=deadline)


def run_party(cfg: dict, party: int) -> None:
    """The computing-party main loop: load shares, provision, handshake,
    run the staged pipeline, and write weights, noisy models, and report."""
    from .harness import _dp_params, party_pipeline, pipeline_counts, training_config

    ring = ring_from_config(cfg)
    session = cfg["session_id"]
    prefix = cfg["shares_prefix"]
    file_session, meta, X, t = read_share_file(f"{prefix}.party{party}.shares")
    check_ring_meta(meta, ring)
    n, m = X.shape
    tc = training_config(cfg)
    draws = cfg["noise_draws"]
    d = m + (1 if tc.add_bias else 0)
    dp = _dp_params(cfg, n, d)
    counts = pipeline_counts(n, m, cfg, draws)

    material = provision_from_dealer(cfg, party, counts)
    chan = connect_peer(cfg, party)
    try:
        rt = PartyRuntime(party, session, chan, ring)
        handshake(rt, public_section(cfg))
        eng = MpcEngine(rt, material)
        out = party_pipeline(eng, X, t, tc, dp, draws)
    finally:
        chan.close()

    out_dir = cfg.get("out_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    write_weights_file(os.path.join(out_dir, f"weights.party{party}.bin"),
                       session, party, out["w_share"], ring)
    if "noisy" in out:
        noisy = decode(out["noisy"], ring)
        np.savetxt(os.path.join(out_dir, f"noisy.party{party}.csv"), noisy,
                   delimiter=",", fmt="%.10g")
    report = run_report(rt.transcript, party, session)
    with open(os.path.join(out_dir, f"report.party{party}.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(format_report(report))
