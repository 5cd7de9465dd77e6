"""Command-line entry points.

Subcommands: synth (make a dataset), ingest (owner-side share splitting),
party (run one role of a networked session), train / perturb / open
(stage-by-stage local orchestration over loopback), baseline (federated
local-DP reference), kernel-bench (kernel accuracy and round counts), and
experiment (the full k-fold comparison harness).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import datasets
from .cleartext import baseline_fl
from .dealer import with_slack
from .engine import estimate_counts, run_two_party
from .errors import VeiltrainError
from .fixedpoint import decode, encode
from .harness import (run_experiment, training_config, write_report)
from .ingest import ingest_shares
from .noise import DpParams, perturb_weights
from .shareio import (DEFAULTS, load_config, public_section, read_share_file,
                      read_weights_file, ring_from_config, write_share_file,
                      write_weights_file)
from .training import train_pipeline


def _load_cfg(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key in ("epochs", "alpha", "lambda_reg", "momentum", "seed", "epsilon",
                "noise_draws", "n"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "skip_norm", False):
        cfg["skip_norm"] = 1
    return cfg


def cmd_synth(args):
    X, t = datasets.synth_data(args.n, args.m, args.seed, args.separability)
    datasets.save_csv(args.out, X, t)
    print(f"wrote {args.n}x{args.m} dataset to {args.out}")


def cmd_ingest(args):
    cfg = _load_cfg(args)
    ring = ring_from_config(cfg)
    X, t = datasets.load_csv(args.owner_csv)
    rng = np.random.default_rng(np.random.SeedSequence([args.share_seed, 90, 0]))
    (x0, t0), (x1, t1) = ingest_shares(X, t, ring, rng)
    session = cfg["session_id"]
    for party, (xs, ts) in enumerate(((x0, t0), (x1, t1))):
        path = f"{args.out}.party{party}.shares"
        write_share_file(path, session, party, xs, ts, ring)
        print(f"wrote {path} ({X.shape[0]}x{X.shape[1]})")


def cmd_party(args):
    cfg = load_config(args.config)
    if args.role == "dealer":
        from .partyproc import serve_dealer

        serve_dealer(cfg)
    else:
        from .partyproc import run_party

        run_party(cfg, int(args.role[-1]))


def _run_local(cfg, fn, counts_fn):
    ring = ring_from_config(cfg)
    counts = counts_fn()
    return run_two_party(fn, session_seed=cfg["seed"], counts=counts, cfg=ring,
                         session_id=cfg["session_id"],
                         handshake_public=public_section(cfg))


def cmd_train(args):
    cfg = _load_cfg(args)
    ring = ring_from_config(cfg)
    tc = training_config(cfg)
    shares = [read_share_file(f"{args.shares}.party{p}.shares") for p in (0, 1)]
    session = shares[0][0]
    Xs = [s[2] for s in shares]
    ts = [s[3] for s in shares]

    def fn(eng):
        return train_pipeline(eng, Xs[eng.party], ts[eng.party], tc)

    def dry(eng):
        train_pipeline(eng, eng.zeros(Xs[0].shape), eng.zeros(len(ts[0])), tc)

    counts = with_slack(estimate_counts(dry, 0, ring),
                        cfg.get("provision_slack", 0.10))
    results, engines = _run_local(cfg, fn, lambda: counts)
    for party, w in enumerate(results):
        path = f"{args.out_weights}.party{party}.bin"
        write_weights_file(path, session, party, w, ring)
        print(f"wrote {path} ({len(w)} coefficients)")
    tr = engines[0].rt.transcript
    print(f"rounds={tr.n_rounds} bytes={tr.bytes_sent + tr.bytes_received}")


def cmd_perturb(args):
    cfg = _load_cfg(args)
    ring = ring_from_config(cfg)
    headers, ws = zip(*(read_weights_file(f"{args.in_weights}.party{p}.bin")
                        for p in (0, 1)))
    d = len(ws[0])
    dp = DpParams(epsilon=cfg["epsilon"], lambda_reg=cfg["lambda_reg"],
                  n=args.n, d=d)

    def fn(eng):
        return perturb_weights(eng, ws[eng.party], dp)

    def dry(eng):
        perturb_weights(eng, eng.zeros(d), dp)

    counts = with_slack(estimate_counts(dry, 0, ring),
                        cfg.get("provision_slack", 0.10))
    results, _ = _run_local(cfg, fn, lambda: counts)
    session = int(headers[0]["session"])
    for party, w in enumerate(results):
        path = f"{args.out_weights}.party{party}.bin"
        write_weights_file(path, session, party, w, ring,
                           meta={"epsilon": dp.epsilon, "noise_n": dp.n})
        print(f"wrote {path}")


def cmd_open(args):
    cfg = _load_cfg(args)
    ring = ring_from_config(cfg)
    (h0, w0), (h1, w1) = (read_weights_file(f"{args.in_weights}.party{p}.bin")
                          for p in (0, 1))
    if h0["session"] != h1["session"]:
        raise VeiltrainError("weight shares come from different sessions")
    weights = decode(w0 + w1, ring)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("coefficient\n")
        for w in weights:
            fh.write(f"{w:.12g}\n")
    print(f"wrote {len(weights)} coefficients to {args.out}")


def cmd_baseline(args):
    cfg = _load_cfg(args)
    tc = training_config(cfg)
    X, t = datasets.load_csv(args.csv)
    plan = datasets.make_plan("horizontal", args.owners, len(X), X.shape[1])
    parts = datasets.partition(X, t, plan)
    rng = np.random.default_rng(cfg["seed"])
    model = baseline_fl(parts, tc, cfg["epsilon"], rng, seed=cfg["seed"])
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("coefficient\n")
        for w in model.weights:
            fh.write(f"{w:.12g}\n")
    print(f"wrote baseline model ({args.owners} owners) to {args.out}")


def cmd_kernel_bench(args):
    from . import kernels

    cfg = _load_cfg(args)
    ring = ring_from_config(cfg)
    rng = np.random.default_rng(cfg["seed"])
    n = args.samples
    cases = {
        "div": None, "sqrt": None, "ln": None, "sin": None, "cos": None,
        "sigmoid": None,
    }
    b = np.exp2(rng.uniform(-8, 8, n)) * np.where(rng.random(n) < 0.5, -1, 1)
    a = rng.uniform(-1, 1, n) * 2.0 ** 10 * b
    sq = np.exp2(rng.uniform(-10, 10, n))
    lx = np.exp2(rng.uniform(-ring.frac_bits + 0.01, 10, n))
    th = rng.uniform(0, 2 * np.pi, n)
    z = rng.uniform(-16, 16, n)

    def dec(v):
        return decode(v, ring)

    print(f"{'kernel':8s} {'max_err':>12s} {'mean_err':>12s} {'bound':>12s} {'rounds':>7s}")
    for name in cases:
        def fn(eng, name=name):
            if name == "div":
                got = kernels.secure_div(eng, eng.from_public(encode(a, ring)),
                                         eng.from_public(encode(b, ring)))
                want = decode(encode(a, ring), ring) / decode(encode(b, ring), ring)
            elif name == "sqrt":
                got = kernels.secure_sqrt(eng, eng.from_public(encode(sq, ring)))
                want = np.sqrt(decode(encode(sq, ring), ring))
            elif name == "ln":
                got = kernels.secure_ln(eng, eng.from_public(encode(lx, ring)))
                want = np.log(decode(encode(lx, ring), ring))
            elif name in ("sin", "cos"):
                s, c = kernels.secure_sin_cos(eng, eng.from_public(encode(th, ring)))
                got = s if name == "sin" else c
                want = np.sin(th) if name == "sin" else np.cos(th)
            else:
                got = kernels.secure_sigmoid(eng, eng.from_public(encode(z, ring)))
                want = np.where(z < -8, 0, np.where(z > 8, 1, 1 / (1 + np.exp(-z))))
            return eng.open(got), want

        counts = estimate_counts(lambda eng: fn(eng), 0, ring)
        (res0, _), engines = run_two_party(lambda eng: fn(eng), session_seed=cfg["seed"],
                                           counts=counts, cfg=ring)
        got, want = res0
        err = np.abs(decode(got, ring) - want)
        bound = kernels.KERNEL_TOLERANCES[name].bound
        print(f"{name:8s} {err.max():12.3e} {err.mean():12.3e} {bound:12.3e} "
              f"{engines[0].rt.transcript.n_rounds:7d}")


def cmd_experiment(args):
    cfg = _load_cfg(args)
    out_dir = args.out_dir or cfg.get("out_dir") or "experiment_out"
    workdir = os.path.join(out_dir, "work") if cfg.get("executor") == "process" else None
    log = (lambda msg: print(msg, flush=True)) if not args.quiet else (lambda msg: None)
    report = run_experiment(cfg, workdir=workdir, log=log)
    write_report(report, out_dir)
    print(report.text())
    print(f"report written to {out_dir}/report.csv")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="veiltrain", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("synth", help="generate a synthetic binary-feature dataset")
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--m", type=int, default=20)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--separability", type=float, default=0.95)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("ingest", help="encode and secret-share an owner's CSV")
    s.add_argument("--owner-csv", required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True, help="share-file prefix")
    s.add_argument("--share-seed", type=int, default=7)
    s.set_defaults(fn=cmd_ingest)

    s = sub.add_parser("party", help="run one networked role of a session")
    s.add_argument("--config", required=True)
    s.add_argument("--role", choices=("party0", "party1", "dealer"), required=True)
    s.set_defaults(fn=cmd_party)

    s = sub.add_parser("train", help="train over loopback from share files")
    s.add_argument("--config", default=None)
    s.add_argument("--shares", required=True, help="share-file prefix from ingest")
    s.add_argument("--out-weights", required=True, help="weight-share prefix")
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--lambda-reg", dest="lambda_reg", type=float, default=None)
    s.add_argument("--momentum", type=float, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--skip-norm", action="store_true")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("perturb", help="add joint DP noise to trained weights")
    s.add_argument("--config", default=None)
    s.add_argument("--epsilon", type=float, default=None)
    s.add_argument("--lambda-reg", dest="lambda_reg", type=float, default=None)
    s.add_argument("--n", type=int, required=True, help="training example count")
    s.add_argument("--in-weights", required=True)
    s.add_argument("--out-weights", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(fn=cmd_perturb)

    s = sub.add_parser("open", help="combine weight shares into a public model")
    s.add_argument("--config", default=None)
    s.add_argument("--in-weights", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_open)

    s = sub.add_parser("baseline", help="federated local-DP baseline")
    s.add_argument("--csv", required=True)
    s.add_argument("--owners", type=int, default=2)
    s.add_argument("--config", default=None)
    s.add_argument("--epsilon", type=float, default=None)
    s.add_argument("--lambda-reg", dest="lambda_reg", type=float, default=None)
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_baseline)

    s = sub.add_parser("kernel-bench", help="kernel accuracy and round counts")
    s.add_argument("--samples", type=int, default=2000)
    s.add_argument("--config", default=None)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(fn=cmd_kernel_bench)

    s = sub.add_parser("experiment", help="full k-fold comparison harness")
    s.add_argument("--config", default=None)
    s.add_argument("--out-dir", default=None)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(fn=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except VeiltrainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
