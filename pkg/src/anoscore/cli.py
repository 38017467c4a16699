"""Command-line entry point: ``anoscore {synth,init-gen,project,score,eval}``.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 numeric failure, 5 shape mismatch,
6 degenerate (single-class) data. ``ANOSCORE_THREADS`` caps the worker
count; outputs never depend on it.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .edges import CannyParams
from .evaluation import (LABELS, NORMAL, ScoreRecord, SingleClassError, histogram,
                         roc_curve, summarize)
from .imagecore import PGMError, load_pgm, save_pgm
from .inversion import ProjectionConfig, ProjectionError, ToyGenerator, ToyGeneratorParams, project
from .metrics import DEFAULT_ALPHA, DEFAULT_KAPPA, default_feature_extractor, score_all
from .synthdata import SynthConfig, gen_dataset, read_manifest

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC, EXIT_SHAPE, EXIT_DEGENERATE = 0, 2, 3, 4, 5, 6

SCORE_COLUMNS = ["id", "label", "a_canny", "a_canny_abs", "a_mse", "a_d", "a_f_anogan",
                 "a_res", "a_origin", "a_pg_anogan", "baseline_edges", "psnr"]
PROJECTION_COLUMNS = ["id", "final_loss", "initial_loss", "steps_taken"]


class CLIError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def thread_count() -> int:
    raw = os.environ.get("ANOSCORE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise CLIError(EXIT_USAGE, f"ANOSCORE_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise CLIError(EXIT_USAGE, f"ANOSCORE_THREADS must be >= 1, got {n}")
    return n


def ordered_map(fn, items):
    """Map preserving input order, optionally on a thread pool."""
    n = thread_count()
    if n == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise CLIError(EXIT_IO, f"cannot write {path}: {exc}")


def ensure_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(EXIT_IO, f"cannot create output directory {out}: {exc}")
    return out


def require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CLIError(EXIT_IO, f"{what} not found: {p}")
    return p


def load_manifest(path):
    path = require_file(path, "manifest")
    try:
        rows = read_manifest(path)
    except (OSError, ValueError) as exc:
        raise CLIError(EXIT_IO, str(exc))
    for sid, label, _ in rows:
        if label not in LABELS:
            raise CLIError(EXIT_IO, f"{path}: row {sid!r} has unknown label {label!r}")
    return rows


def load_image(path: Path):
    try:
        return load_pgm(path)
    except FileNotFoundError:
        raise CLIError(EXIT_IO, f"image not found: {path}")
    except (OSError, PGMError) as exc:
        raise CLIError(EXIT_IO, f"cannot read {path}: {exc}")


def canny_params(args) -> CannyParams:
    try:
        return CannyParams(args.kernel, args.sigma, args.low, args.high)
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, str(exc))


# ---------------------------------------------------------------- subcommands

def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(seed=args.seed, n_normal=args.normal, n_anomaly=args.anomaly,
                          noise_std=args.noise_std)
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, str(exc))
    out = ensure_dir(args.out)
    try:
        manifest = gen_dataset(cfg, out, threads=thread_count())
    except OSError as exc:
        raise CLIError(EXIT_IO, f"writing dataset failed: {exc}")
    print(manifest)
    return EXIT_OK


def cmd_init_gen(args) -> int:
    try:
        params = ToyGeneratorParams.initialize(args.latent_dim, args.hidden, args.seed)
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, str(exc))
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        ensure_dir(out.parent)
    try:
        params.save(out)
    except OSError as exc:
        raise CLIError(EXIT_IO, f"cannot write {out}: {exc}")
    print(out)
    return EXIT_OK


def cmd_project(args) -> int:
    try:
        cfg = ProjectionConfig(steps=args.steps, step_size=args.lr, init=args.init,
                               seed=args.seed, distance=args.distance)
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, str(exc))
    rows = load_manifest(args.manifest)
    gen_path = require_file(args.gen_params, "generator parameters")
    out = ensure_dir(args.out)
    try:
        generator = ToyGenerator(ToyGeneratorParams.load(gen_path))
    except (OSError, ValueError) as exc:
        raise CLIError(EXIT_IO, f"cannot load generator {gen_path}: {exc}")

    def run(row):
        sid, _, path = row
        x = load_image(path)
        if x.shape != (64, 64):
            raise CLIError(EXIT_SHAPE, f"{sid}: image is {x.shape[1]}x{x.shape[0]}, need 64x64")
        try:
            result = project(generator, x, cfg)
        except ProjectionError as exc:
            raise CLIError(EXIT_NUMERIC, f"{sid}: {exc}")
        try:
            save_pgm(result.reconstruction, out / f"{sid}_recon.pgm")
            (out / f"{sid}.z").write_bytes(np.asarray(result.z, dtype="<f4").tobytes())
        except OSError as exc:
            raise CLIError(EXIT_IO, f"{sid}: cannot write outputs: {exc}")
        return [sid, fmt(result.final_loss), fmt(result.initial_loss), fmt(result.steps_taken)]

    table = ordered_map(run, rows)
    write_csv(out / "projections.csv", PROJECTION_COLUMNS, table)
    print(out / "projections.csv")
    return EXIT_OK


def cmd_score(args) -> int:
    params = canny_params(args)
    rows = load_manifest(args.manifest)
    recon_dir = Path(args.recon_dir) if args.recon_dir else None
    if recon_dir is not None and not recon_dir.is_dir():
        raise CLIError(EXIT_IO, f"reconstruction directory not found: {recon_dir}")
    out = ensure_dir(args.out)
    extractor = default_feature_extractor()

    def run(row):
        sid, label, path = row
        x = load_image(path)
        xhat = z = None
        if recon_dir is not None:
            xhat = load_image(recon_dir / f"{sid}_recon.pgm")
            if xhat.shape != x.shape:
                raise CLIError(EXIT_SHAPE, f"{sid}: reconstruction {xhat.shape} vs input {x.shape}")
            zpath = recon_dir / f"{sid}.z"
            if zpath.is_file():
                z = np.frombuffer(zpath.read_bytes(), dtype="<f4").astype(np.float64)
        ext = extractor if x.shape == (64, 64) else default_feature_extractor(x.shape)
        b = score_all(x, xhat, z, params=params, extractor=ext, kappa=args.kappa, alpha=args.alpha)
        psnr = None if b.psnr is None else ("inf" if math.isinf(b.psnr) else fmt(b.psnr))
        return [sid, label, fmt(b.a_canny), fmt(b.a_canny_abs), fmt(b.a_mse), fmt(b.a_d),
                fmt(b.a_f_anogan), fmt(b.a_res), fmt(b.a_origin), fmt(b.a_pg_anogan),
                fmt(b.baseline_edges), psnr or ""]

    table = ordered_map(run, rows)
    write_csv(out / "scores.csv", SCORE_COLUMNS, table)
    print(out / "scores.csv")
    return EXIT_OK


def read_scores(path):
    path = require_file(path, "scores file")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"id", "label"} <= set(reader.fieldnames):
                raise CLIError(EXIT_IO, f"{path}: missing id/label header")
            return reader.fieldnames, list(reader)
    except OSError as exc:
        raise CLIError(EXIT_IO, f"cannot read {path}: {exc}")


def column_records(rows, col):
    records, dropped = [], 0
    for row in rows:
        cell = (row.get(col) or "").strip()
        if not cell:
            continue
        value = float(cell)
        if not math.isfinite(value):
            dropped += 1
            continue
        records.append(ScoreRecord(row["id"], row["label"], value))
    return records, dropped


def cmd_eval(args) -> int:
    fields, rows = read_scores(args.scores)
    out = ensure_dir(args.out)
    if args.bins < 1:
        raise CLIError(EXIT_USAGE, f"--bins must be >= 1, got {args.bins}")
    requested = args.score_col
    if requested:
        missing = [c for c in requested if c not in fields]
        if missing:
            raise CLIError(EXIT_USAGE, f"unknown score column(s): {', '.join(missing)}")
        columns = requested
    else:
        columns = [c for c in fields if c not in ("id", "label", "psnr")
                   and any((r.get(c) or "").strip() for r in rows)]

    for col in columns:
        try:
            records, dropped = column_records(rows, col)
        except ValueError as exc:
            raise CLIError(EXIT_IO, f"column {col}: {exc}")
        if dropped:
            print(f"note: {col}: {dropped} non-finite value(s) ignored", file=sys.stderr)
        try:
            roc = roc_curve(records)
        except SingleClassError as exc:
            raise CLIError(EXIT_DEGENERATE, f"column {col}: {exc}")
        print(f"{col}: auc={roc.auc:.4f}")
        if roc.auc < 0.5:
            print(f"warning: {col} has auc={roc.auc:.4f} < 0.5; higher scores go with "
                  f"normal samples for this measure", file=sys.stderr)
        write_csv(out / f"roc_{col}.csv", ["fpr", "tpr", "threshold"],
                  [[fmt(f), fmt(t), fmt(th)] for f, t, th in roc.points])
        hist = histogram(records, args.bins)
        write_csv(out / f"hist_{col}.csv", ["bin_lo", "bin_hi", "count_normal", "count_anomaly"],
                  [[fmt(lo), fmt(hi), int(cn), int(ca)] for lo, hi, cn, ca in
                   zip(hist.bin_edges[:-1], hist.bin_edges[1:],
                       hist.counts_normal, hist.counts_anomaly)])

    if "psnr" in fields:
        values = [float(r["psnr"]) for r in rows
                  if r["label"] == NORMAL and (r.get("psnr") or "").strip()]
        if values:
            try:
                print(f"psnr (normal): {summarize(values)}")
            except ValueError as exc:
                print(f"psnr (normal): not summarized ({exc})")
    return EXIT_OK


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anoscore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic patch dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normal", type=int, default=100, help="number of normal patches")
    p.add_argument("--anomaly", type=int, default=100, help="number of anomaly patches")
    p.add_argument("--noise-std", type=float, default=6.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("init-gen", help="write seeded toy generator weights (TGEN file)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--latent-dim", type=int, default=8)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--out", required=True, help="output file")
    p.set_defaults(func=cmd_init_gen)

    p = sub.add_parser("project", help="project every manifest image through the generator")
    p.add_argument("--manifest", required=True)
    p.add_argument("--gen-params", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--distance", choices=["mse", "pyramid"], default="pyramid")
    p.add_argument("--init", choices=["origin", "random"], default="origin")
    p.add_argument("--seed", type=int, default=0, help="seed for --init random")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("score", help="compute anomaly scores into scores.csv")
    p.add_argument("--manifest", required=True)
    p.add_argument("--recon-dir", help="directory with <id>_recon.pgm and <id>.z files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--kernel", type=int, default=5)
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--low", type=float, default=100.0)
    p.add_argument("--high", type=float, default=200.0)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="ROC/AUC, histograms and PSNR summary")
    p.add_argument("--scores", required=True, help="scores.csv written by 'score'")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--score-col", action="append", help="column to evaluate (repeatable)")
    p.add_argument("--bins", type=int, default=30)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CLIError as exc:
        if exc.code == EXIT_USAGE:
            parser.print_usage(sys.stderr)
        print(f"anoscore {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
