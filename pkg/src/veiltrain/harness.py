"""Experiment orchestration: k-fold evaluation of the joint MPC+DP pipeline
against the local-DP federated baseline, over horizontal and vertical owner
partitions, with accuracy/traffic reporting.

The pipeline per fold and partition plan: owners ingest their blocks, the
parties assemble the global secret-shared matrix, normalize, train, perturb
(one batched run covers all noise draws), open the noisy models, and score
them on the held-out fold. Folds run sequentially so dealer provisioning
stays deterministic.
"""

from __future__ import annotations

import csv
import io
import os
import subprocess
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .cleartext import baseline_fl
from .datasets import (evaluate, load_csv, make_plan, partition,
                       stratified_folds, synth_data)
from .dealer import with_slack
from .engine import estimate_counts, run_two_party
from .errors import VeiltrainError
from .fixedpoint import decode
from .ingest import ingest_partitions
from .noise import DpParams, perturb_weights
from .session import run_report
from .shareio import format_config, public_section, ring_from_config, write_share_file
from .training import TrainingConfig, train_pipeline


def training_config(cfg: dict) -> TrainingConfig:
    return TrainingConfig(alpha=cfg["alpha"], lambda_reg=cfg["lambda_reg"],
                          momentum=cfg["momentum"], epochs=cfg["epochs"],
                          add_bias=bool(cfg.get("add_bias", 0)),
                          skip_norm=bool(cfg.get("skip_norm", 0)),
                          batch_size=cfg.get("batch_size", 0))


def party_pipeline(eng, X, t, tc: TrainingConfig, dp: DpParams | None, draws: int):
    """The staged protocol one computing party executes after ingestion."""
    w = train_pipeline(eng, X, t, tc)
    out = {"w_share": w}
    if dp is not None:
        noisy = perturb_weights(eng, w, dp, batch=(draws,))
        out["noisy"] = eng.open(noisy)
    return out


def pipeline_counts(n: int, m: int, cfg: dict, draws: int) -> dict:
    """Exact dealer-material requirements via an oblivious dry run on zeros,
    padded by the provisioning slack."""
    ring = ring_from_config(cfg)
    tc = training_config(cfg)
    d = m + (1 if tc.add_bias else 0)
    dp = _dp_params(cfg, n, d)

    def dry(eng):
        party_pipeline(eng, eng.zeros((n, m)), eng.zeros(n), tc, dp, draws)

    counts = estimate_counts(dry, session_seed=0, cfg=ring)
    return with_slack(counts, cfg.get("provision_slack", 0.10))


def _dp_params(cfg: dict, n: int, d: int) -> DpParams | None:
    eps = cfg.get("epsilon", 0)
    if not eps or eps <= 0:
        return None
    return DpParams(epsilon=eps, lambda_reg=cfg["lambda_reg"], n=n, d=d)


def run_mpc_threaded(owner_datasets, mode: str, cfg: dict, seed: int, draws: int):
    """In-process execution of the full two-party pipeline over loopback
    channels. Returns pre-noise shares, opened noisy models, and transcripts."""
    ring = ring_from_config(cfg)
    tc = training_config(cfg)
    (X0, t0), (X1, t1) = ingest_partitions(owner_datasets, mode, ring, seed)
    n, m = X0.shape
    d = m + (1 if tc.add_bias else 0)
    dp = _dp_params(cfg, n, d)
    counts = pipeline_counts(n, m, cfg, draws)

    def fn(eng):
        X = X0 if eng.party == 0 else X1
        t = t0 if eng.party == 0 else t1
        return party_pipeline(eng, X, t, tc, dp, draws)

    t0_clock = time.perf_counter()
    results, engines = run_two_party(fn, session_seed=seed, counts=counts, cfg=ring,
                                     handshake_public=public_section(cfg))
    elapsed = time.perf_counter() - t0_clock
    w_full = results[0]["w_share"] + results[1]["w_share"]
    noisy = None
    if dp is not None:
        noisy = decode(results[0]["noisy"], ring)
    tr = engines[0].rt.transcript
    return {
        "w_raw": w_full,
        "w_shares": (results[0]["w_share"], results[1]["w_share"]),
        "noisy_models": noisy,
        "rounds": tr.n_rounds,
        "bytes": tr.bytes_sent + tr.bytes_received,
        "runtime_s": elapsed,
        "report": run_report(tr, 0, cfg.get("session_id", 1)),
    }


def _free_port() -> int:
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def run_mpc_process(owner_datasets, mode: str, cfg: dict, seed: int, draws: int,
                    workdir: str):
    """Same pipeline, but supervised as OS processes: a dealer and two party
    processes over loopback TCP, with file-based share hand-off."""
    ring = ring_from_config(cfg)
    os.makedirs(workdir, exist_ok=True)
    (X0, t0), (X1, t1) = ingest_partitions(owner_datasets, mode, ring, seed)
    n, m = X0.shape
    prefix = os.path.join(workdir, "data")
    session = cfg.get("session_id", 1)
    write_share_file(prefix + ".party0.shares", session, 0, X0, t0, ring)
    write_share_file(prefix + ".party1.shares", session, 1, X1, t1, ring)

    run_cfg = dict(cfg)
    run_cfg.update({
        "seed": seed, "noise_draws": draws, "shares_prefix": prefix,
        "out_dir": workdir, "party0_host": "127.0.0.1", "party0_port": _free_port(),
        "party1_host": "127.0.0.1", "party1_port": 0,
        "dealer_host": "127.0.0.1", "dealer_port": _free_port(),
    })
    cfg_path = os.path.join(workdir, "session.cfg")
    with open(cfg_path, "w", encoding="utf-8") as fh:
        fh.write(format_config(run_cfg))

    def spawn(role):
        return subprocess.Popen(
            [sys.executable, "-m", "veiltrain.cli", "party", "--config", cfg_path,
             "--role", role],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE)

    t0_clock = time.perf_counter()
    procs = {role: spawn(role) for role in ("dealer", "party0", "party1")}
    failures = []
    for role, proc in procs.items():
        out, err = proc.communicate(timeout=600)
        if proc.returncode != 0:
            failures.append(f"[{role}] exit {proc.returncode}:\n{err.decode()[-2000:]}")
    if failures:
        raise VeiltrainError("subprocess pipeline failed:\n" + "\n".join(failures))
    elapsed = time.perf_counter() - t0_clock

    from .shareio import read_weights_file

    _, w0 = read_weights_file(os.path.join(workdir, "weights.party0.bin"))
    _, w1 = read_weights_file(os.path.join(workdir, "weights.party1.bin"))
    noisy = None
    noisy_path = os.path.join(workdir, "noisy.party0.csv")
    if os.path.exists(noisy_path):
        noisy = np.loadtxt(noisy_path, delimiter=",", ndmin=2)
    report = {}
    rep_path = os.path.join(workdir, "report.party0.txt")
    if os.path.exists(rep_path):
        with open(rep_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if "=" in line:
                    k, v = line.split("=", 1)
                    report[k.strip()] = v.strip()
    return {
        "w_raw": w0 + w1,
        "w_shares": (w0, w1),
        "noisy_models": noisy,
        "rounds": int(report.get("rounds", 0)),
        "bytes": int(report.get("bytes_sent", 0)) + int(report.get("bytes_received", 0)),
        "runtime_s": elapsed,
        "report": report,
    }


def run_mpc_pipeline(owner_datasets, mode: str, cfg: dict, seed: int, draws: int,
                     workdir: str | None = None):
    if cfg.get("executor", "process") == "thread" or workdir is None:
        return run_mpc_threaded(owner_datasets, mode, cfg, seed, draws)
    return run_mpc_process(owner_datasets, mode, cfg, seed, draws, workdir)


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["owners", "mode", "method", "mean_acc", "std_acc",
                         "runtime_s", "bytes"])
        for row in self.rows:
            if np.isnan(row["mean_acc"]):
                writer.writerow([row["owners"], row["mode"], row["method"],
                                 "-", "-", "-", "-"])
            else:
                writer.writerow([row["owners"], row["mode"], row["method"],
                                 f"{row['mean_acc']:.6f}", f"{row['std_acc']:.6f}",
                                 f"{row['runtime_s']:.3f}", row["bytes"]])
        return out.getvalue()

    def text(self) -> str:
        lines = [f"{k} = {v}" for k, v in sorted(self.meta.items())]
        lines.append("")
        lines.append(self.csv_text().rstrip("\n"))
        return "\n".join(lines) + "\n"


def run_experiment(cfg: dict, workdir: str | None = None, log=lambda msg: None):
    """K-fold comparison of MPC+DP vs the federated baseline across owner
    counts and partition modes; emits an ExperimentReport."""
    seed = cfg["seed"]
    if cfg.get("data_csv"):
        X, t = load_csv(cfg["data_csv"])
    else:
        X, t = synth_data(cfg["n"], cfg["m"], seed=seed, separability=cfg["separability"])
    n, m = X.shape
    owners = [int(k) for k in str(cfg["owners"]).split(",")]
    modes = [s.strip() for s in str(cfg["modes"]).split(",") if s.strip()]
    draws = cfg["noise_draws"]
    folds = cfg["folds"]
    fold_of = stratified_folds(t, folds, seed)
    tc = training_config(cfg)

    cells: dict = {}
    data_hash = hash_array(X) ^ hash_array(t)
    for fold in range(folds):
        test_mask = fold_of == fold
        X_tr, t_tr = X[~test_mask], t[~test_mask]
        X_te, t_te = X[test_mask], t[test_mask]
        fold_seed = int(np.random.SeedSequence([seed, 17, fold]).generate_state(1)[0])
        for mode in modes:
            for k in owners:
                if mode == "vertical" and k > m:
                    continue
                plan = make_plan(mode, k, len(X_tr), m)
                parts = partition(X_tr, t_tr, plan)
                sub = None
                if workdir is not None:
                    sub = os.path.join(workdir, f"fold{fold}_{mode}{k}")
                log(f"fold {fold} {mode} k={k}: mpc pipeline")
                res = run_mpc_pipeline(parts, mode, cfg, fold_seed, draws, sub)
                accs = [evaluate(wn, X_te, t_te, add_bias=tc.add_bias)
                        for wn in res["noisy_models"]]
                cell = cells.setdefault((k, mode, "mpc_dp"), {"accs": [], "runtime": 0.0,
                                                              "bytes": 0})
                cell["accs"].extend(accs)
                cell["runtime"] += res["runtime_s"]
                cell["bytes"] += res["bytes"]
                if mode == "horizontal":
                    log(f"fold {fold} horizontal k={k}: baseline")
                    t0_clock = time.perf_counter()
                    base_accs = []
                    for draw in range(draws):
                        rng = np.random.default_rng(
                            np.random.SeedSequence([seed, 23, fold, k, draw]))
                        model = baseline_fl(parts, tc, cfg["epsilon"], rng,
                                            seed=fold_seed + 1000 * k)
                        base_accs.append(evaluate(model.weights, X_te, t_te,
                                                  add_bias=tc.add_bias))
                    cell = cells.setdefault((k, mode, "baseline"),
                                            {"accs": [], "runtime": 0.0, "bytes": 0})
                    cell["accs"].extend(base_accs)
                    cell["runtime"] += time.perf_counter() - t0_clock

    report = ExperimentReport()
    report.meta = {
        "n": n, "m": m, "folds": folds, "epochs": cfg["epochs"],
        "epsilon": cfg["epsilon"], "noise_draws": draws, "seed": seed,
        "data_hash": f"{data_hash:016x}",
        "owners": ",".join(str(k) for k in owners), "modes": ",".join(modes),
    }
    for mode in modes:
        for k in owners:
            if mode == "vertical" and k > m:
                continue
            for method in ("baseline", "mpc_dp"):
                if method == "baseline" and mode == "vertical":
                    report.rows.append({"owners": k, "mode": mode, "method": method,
                                        "mean_acc": float("nan"), "std_acc": float("nan"),
                                        "runtime_s": 0.0, "bytes": 0})
                    continue
                cell = cells[(k, mode, method)]
                accs = np.asarray(cell["accs"])
                report.rows.append({"owners": k, "mode": mode, "method": method,
                                    "mean_acc": float(accs.mean()),
                                    "std_acc": float(accs.std()),
                                    "runtime_s": cell["runtime"],
                                    "bytes": cell["bytes"]})
    return report


def hash_array(a) -> int:
    import zlib

    return zlib.crc32(np.ascontiguousarray(a).tobytes())


def write_report(report: ExperimentReport, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.text())
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.csv_text())
