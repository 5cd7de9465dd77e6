"""File formats: flat key-value configs, framed binary share files, and
weight-share files (text header plus little-endian ring elements)."""

from __future__ import annotations

import io
import struct

import numpy as np

from .errors import ConfigMismatch, ParseError
from .fixedpoint import RingConfig
from .transport import (KIND_DATA, KIND_HELLO, KIND_LABELS, pack_frame,
                        payload_u64, u64_payload, unpack_frame)

CONFIG_KEYS = {
    # ring
    "lambda": int, "frac_bits": int,
    # training
    "epochs": int, "alpha": float, "lambda_reg": float, "momentum": float,
    "add_bias": int, "skip_norm": int, "batch_size": int,
    # privacy
    "epsilon": float, "noise_draws": int,
    # session
    "seed": int, "session_id": int, "partition": str, "owners": str,
    "party0_host": str, "party0_port": int, "party1_host": str, "party1_port": int,
    "dealer_host": str, "dealer_port": int,
    "shares_prefix": str, "out_dir": str, "executor": str,
    # experiment
    "n": int, "m": int, "separability": float, "folds": int, "modes": str,
    "data_csv": str, "provision_slack": float, "connect_deadline": float,
}

DEFAULTS = {
    "lambda": 64, "frac_bits": 20, "epochs": 40, "alpha": 0.1,
    "lambda_reg": 1.0, "momentum": 0.9, "add_bias": 0, "skip_norm": 0,
    "batch_size": 0, "epsilon": 1.0, "noise_draws": 100, "seed": 1,
    "session_id": 1, "partition": "horizontal", "owners": "2", "folds": 5,
    "modes": "horizontal,vertical", "n": 300, "m": 12, "separability": 1.0,
    "provision_slack": 0.10, "executor": "process", "connect_deadline": 15.0,
}


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    out = dict(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ParseError(f"unknown config key {key!r}", line=lineno)
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise ParseError(f"bad value for {key!r}: {value!r}", line=lineno)
    return out


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def format_config(cfg: dict) -> str:
    return "\n".join(f"{k} = {cfg[k]}" for k in sorted(cfg)) + "\n"


def ring_from_config(cfg: dict) -> RingConfig:
    return RingConfig(cfg.get("lambda", 64), cfg.get("frac_bits", 20))


def public_section(cfg: dict) -> dict:
    """The byte-identical public part both computing parties must agree on."""
    keys = ("lambda", "frac_bits", "epochs", "alpha", "lambda_reg", "momentum",
            "add_bias", "skip_norm", "epsilon", "noise_draws", "seed", "session_id")
    return {k: cfg[k] for k in keys if k in cfg}


def _meta_payload(meta: dict) -> bytes:
    return "\n".join(f"{k}={v}" for k, v in sorted(meta.items())).encode()


def _parse_meta(payload: bytes) -> dict:
    out = {}
    for line in payload.decode().splitlines():
        k, v = line.split("=", 1)
        out[k] = v
    return out


def write_share_file(path, session: int, party: int, X_share: np.ndarray,
                     t_share: np.ndarray | None, ring: RingConfig):
    """Framed binary: HELLO frame with metadata, DATA frame with the feature
    share grid, LABELS frame with the label shares (may be absent)."""
    n, m = X_share.shape
    meta = {"party": party, "n": n, "m": m, "lambda": ring.lam,
            "frac_bits": ring.frac_bits, "has_labels": int(t_share is not None)}
    with open(path, "wb") as fh:
        fh.write(pack_frame(KIND_HELLO, session, _meta_payload(meta)))
        fh.write(pack_frame(KIND_DATA, session, u64_payload(X_share.ravel())))
        if t_share is not None:
            fh.write(pack_frame(KIND_LABELS, session, u64_payload(t_share)))


def _read_frames(fh):
    while True:
        header = fh.read(4)
        if not header:
            return
        (length,) = struct.unpack("<I", header)
        body = fh.read(length)
        if len(body) != length:
            raise ParseError("truncated frame")
        yield unpack_frame(body, with_round=False)


def read_share_file(path):
    """Returns (session, meta, X_share, t_share or None)."""
    with open(path, "rb") as fh:
        frames = list(_read_frames(fh))
    if not frames or frames[0][0] != KIND_HELLO:
        raise ParseError(f"{path}: not a share file")
    kind, session, _, payload = frames[0]
    meta = _parse_meta(payload)
    n, m = int(meta["n"]), int(meta["m"])
    X = t = None
    for kind, fsession, _, payload in frames[1:]:
        if fsession != session:
            raise ParseError(f"{path}: mixed sessions in one file")
        if kind == KIND_DATA:
            X = payload_u64(payload).reshape(n, m)
        elif kind == KIND_LABELS:
            t = payload_u64(payload)
    if X is None:
        raise ParseError(f"{path}: missing data frame")
    return session, meta, X, t


WEIGHTS_MAGIC = "veiltrain-weights/1"


def write_weights_file(path, session: int, party: int, w_share: np.ndarray,
                       ring: RingConfig, meta: dict | None = None):
    header = {"magic": WEIGHTS_MAGIC, "session": session, "party": party,
              "d": len(w_share), "lambda": ring.lam, "frac_bits": ring.frac_bits}
    header.update(meta or {})
    head = "\n".join(f"{k}={v}" for k, v in sorted(header.items())).encode() + b"\n\n"
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(np.ascontiguousarray(w_share, dtype="<u8").tobytes())


def read_weights_file(path):
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = _parse_meta(fh.read(hlen).strip())
        if header.get("magic") != WEIGHTS_MAGIC:
            raise ParseError(f"{path}: not a weights file")
        d = int(header["d"])
        w = np.frombuffer(fh.read(8 * d), dtype="<u8").astype(np.uint64)
    return header, w


def check_ring_meta(meta: dict, ring: RingConfig):
    for key, mine in (("lambda", ring.lam), ("frac_bits", ring.frac_bits)):
        if int(meta[key]) != mine:
            raise ConfigMismatch(key, mine, meta[key])
