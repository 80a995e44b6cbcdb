"""Command-line pipeline: synth, estimate, train, generate, validate.

Exit codes: 0 success, 1 validation threshold failed, 2 usage or configuration
error, 3 runtime failure (solver, training abort, I/O).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .autodiff import checkpoint
from .config import RunConfig, load_config, with_overrides
from .data import (ConstraintParams, CsvSchema, estimate_params, filter_window, load_meter_csv,
                   synth_ground_truth, to_samples, write_meter_csv)
from .errors import ConfigError, DataError, LoadGanError, TrainingAborted
from .gan import (DiscriminatorModel, GeneratorModel, TrainingDataset, aggregate, sample_profiles,
                  train)
from .gan.models import _child_seed
from .metrics import build_report, ecdf
from .plotting import plot_ecdfs, plot_profiles
from .qp import RampBoxPolytope

log = logging.getLogger("loadgan")

EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
KINDS = ("constrained", "baseline")


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _schema(cfg: RunConfig) -> CsvSchema:
    return CsvSchema(cfg.data.timestamp_column, cfg.data.load_column)


def _require(path, what):
    if path is None:
        raise ConfigError(f"{what} is not configured")
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")
    return Path(path)


def _rows(series, cfg: RunConfig) -> np.ndarray:
    """Readings as rows (one per selected day, or one row for the whole series)."""
    if cfg.data.window is not None:
        return filter_window(series, cfg.data.window)
    return series.loads[None, :]


def _slow_samples(cfg: RunConfig):
    """(train, holdout) slow samples of width ``s``, split in time order."""
    path = _require(cfg.data.slow_csv, "data.slow_csv")
    rows = _rows(load_meter_csv(path, _schema(cfg)), cfg)
    s = cfg.network.s
    rows = rows[:, : rows.shape[1] - rows.shape[1] % s]
    samples = to_samples(rows, s)
    n_hold = int(cfg.data.holdout_fraction * len(samples))
    if len(samples) - n_hold < 2:
        raise DataError(f"only {len(samples)} slow samples available; need at least 2 for training")
    if n_hold == 0:
        return samples, samples
    return samples[:-n_hold], samples[-n_hold:]


def _fast_windows(cfg: RunConfig):
    if cfg.data.fast_csv is None:
        return None
    rows = _rows(load_meter_csv(_require(cfg.data.fast_csv, "data.fast_csv"), _schema(cfg)), cfg)
    m = cfg.network.m
    rows = rows[:, : rows.shape[1] - rows.shape[1] % m]
    return rows.reshape(-1, m)


def _estimate(cfg: RunConfig) -> ConstraintParams:
    slow = _rows(load_meter_csv(_require(cfg.data.slow_csv, "data.slow_csv"), _schema(cfg)), cfg)
    fast = _fast_windows(cfg)
    e = cfg.estimation
    return estimate_params(fast, slow, k1=e.k1, k2=e.k2, k3=e.k3)


def _resolve_params(cfg: RunConfig, allow_missing=False) -> ConstraintParams | None:
    if cfg.constraints is not None:
        return cfg.constraints
    if cfg.params_json is not None:
        doc = json.loads(_require(cfg.params_json, "params_json").read_text())
        return ConstraintParams.from_dict(doc)
    if cfg.data.slow_csv is None and allow_missing:
        return None
    return _estimate(cfg)


def _models(cfg: RunConfig, polytope: RampBoxPolytope, constrained: bool):
    net = cfg.network
    gen = GeneratorModel(polytope, s=net.s, noise_dim=net.noise_dim, hidden=net.hidden,
                         dropout=net.dropout, seed=_child_seed(cfg.seed, 0),
                         constrained=constrained, solver=cfg.solver)
    disc = DiscriminatorModel(s=net.s, hidden=net.hidden, dropout=net.dropout,
                              seed=_child_seed(cfg.seed, 1))
    return gen, disc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- commands -----------------------------------------------------------------

def cmd_synth(cfg: RunConfig, args) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fast, slow = synth_ground_truth(cfg.synth)
    write_meter_csv(fast, out / "fast.csv", _schema(cfg))
    write_meter_csv(slow, out / "slow.csv", _schema(cfg))
    _write_json(out / "synth.meta.json", {"config": cfg.to_dict(), "fast_rows": len(fast),
                                          "slow_rows": len(slow)})
    print(f"wrote {out / 'fast.csv'} ({len(fast)} rows) and {out / 'slow.csv'} ({len(slow)} rows)")
    return EXIT_OK


def cmd_estimate(cfg: RunConfig, args) -> int:
    params = _estimate(cfg)
    out = Path(cfg.out_dir)
    _write_json(out / "params.json", params.to_dict())
    _write_json(out / "params.meta.json", {"config": cfg.to_dict()})
    print(json.dumps(params.to_dict(), sort_keys=True))
    return EXIT_OK


def _train_one(cfg: RunConfig, params: ConstraintParams, data: TrainingDataset, kind: str) -> int:
    polytope = params.polytope(cfg.network.m)
    gen, disc = _models(cfg, polytope, constrained=(kind == "constrained"))
    d = Path(cfg.out_dir) / kind
    d.mkdir(parents=True, exist_ok=True)
    every = max(1, cfg.training.total_steps // 20)

    def progress(step, rec):
        if step % every == 0:
            log.info("%s step %d: loss_d=%.4f loss_g=%.4f D(real)=%.3f D(fake)=%.3f", kind, step,
                     rec["loss_d"], rec["loss_g"], rec["d_real_mean"], rec["d_fake_mean"])

    status, history = "completed", None
    try:
        gen, disc, history = train(data, gen, disc, cfg.training, progress)
    except TrainingAborted as exc:
        # models were rolled back to the last good step in place
        status, history = f"aborted: {exc}", exc.history
    meta = {"kind": kind, "config": cfg.to_dict(), "params": params.to_dict(),
            "polytope": polytope.to_dict(), "status": status, "steps": len(history)}
    if len(history):
        tail = min(len(history), 100)
        meta["d_real_mean_tail"] = history.tail_mean("d_real_mean", tail)
        meta["d_fake_mean_tail"] = history.tail_mean("d_fake_mean", tail)
    checkpoint.save(gen, d / "generator.json")
    checkpoint.save(disc, d / "discriminator.json")
    history.to_csv(d / "history.csv")
    _write_json(d / "meta.json", meta)
    print(f"{kind}: {status} after {len(history)} steps -> {d}")
    return EXIT_OK if status == "completed" else EXIT_RUNTIME


def cmd_train(cfg: RunConfig, args) -> int:
    params = _resolve_params(cfg)
    train_x, _ = _slow_samples(cfg)
    data = TrainingDataset(train_x)
    code = _train_one(cfg, params, data, "constrained")
    if args.baseline and code == EXIT_OK:
        code = _train_one(cfg, params, data, "baseline")
    return code


def cmd_generate(cfg: RunConfig, args) -> int:
    ckpt = Path(args.checkpoint)
    gpath, mpath = ckpt / "generator.json", ckpt / "meta.json"
    for p in (gpath, mpath):
        if not p.is_file():
            raise ConfigError(f"checkpoint file missing: {p}")
    meta = json.loads(mpath.read_text())
    polytope = RampBoxPolytope.from_dict(meta["polytope"])
    params = _resolve_params(cfg, allow_missing=True)
    if params is not None and params.polytope(cfg.network.m) != polytope:
        raise ConfigError("checkpoint was trained for a different polytope than the configured "
                          f"constraints: {meta['polytope']} vs "
                          f"{params.polytope(cfg.network.m).to_dict()}")
    if polytope.m != cfg.network.m:
        raise ConfigError(f"checkpoint has m={polytope.m}, configuration has m={cfg.network.m}")
    gen, _ = _models(cfg, polytope, constrained=(meta["kind"] == "constrained"))
    checkpoint.load(gen, gpath)
    n = args.n if args.n is not None else cfg.validation.n_profiles
    if n < 1:
        raise ConfigError("--n must be >= 1")
    profiles = sample_profiles(gen, n, seed=cfg.seed)

    out = Path(args.output) if args.output else Path(cfg.out_dir) / f"profiles_{meta['kind']}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        f.write(",".join(f"z_{i}" for i in range(profiles.shape[1])) + "\n")
        for row in profiles:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    _write_json(out.with_suffix(".meta.json"), {
        "kind": meta["kind"], "n": n, "seed": cfg.seed, "polytope": polytope.to_dict(),
        "s": cfg.network.s, "checkpoint": str(gpath), "checkpoint_sha256": _sha256(gpath),
        "config": cfg.to_dict()})
    print(f"wrote {n} profiles to {out}")
    return EXIT_OK


def read_profiles(path) -> np.ndarray:
    path = _require(path, "profiles")
    try:
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_validate(cfg: RunConfig, args) -> int:
    prof_path = Path(args.profiles)
    profiles = read_profiles(prof_path)
    sidecar = prof_path.with_suffix(".meta.json")
    if sidecar.is_file():
        polytope = RampBoxPolytope.from_dict(json.loads(sidecar.read_text())["polytope"])
    else:
        polytope = _resolve_params(cfg).polytope(cfg.network.m)
    if profiles.shape[1] % polytope.m:
        raise DataError(f"profiles have {profiles.shape[1]} columns, not a multiple of m={polytope.m}")
    if args.real:
        real = _rows(load_meter_csv(_require(args.real, "--real"), _schema(cfg)), cfg).ravel()
    else:
        real = _slow_samples(cfg)[1].ravel()
    slow_gen = aggregate(profiles, polytope.m).ravel()
    fast_truth = _fast_windows(cfg) if args.real is None else None
    report = build_report(profiles, slow_gen, real, polytope, fast_truth=fast_truth,
                          thresholds=cfg.validation.thresholds, feas_tol=cfg.validation.feas_tol,
                          config=cfg.to_dict())

    out = Path(args.output) if args.output else Path(cfg.out_dir) / f"validate_{prof_path.stem}"
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    Fg, Fr = ecdf(slow_gen), ecdf(real)
    Fg.to_csv(out / "ecdf_generated.csv")
    Fr.to_csv(out / "ecdf_real.csv")
    plot_ecdfs(Fg, Fr, out / "ecdf.png", ks=report.ks_distance)
    plot_profiles(profiles, out / "profiles.png", m=polytope.m)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: KS={report.ks_distance:.4f} (< {cfg.validation.ks_max}), "
          f"violations={report.total_violations} (<= {cfg.validation.max_violations}), "
          f"max change={report.generated.max_change_pct}%, "
          f"max injection={report.generated.max_injection_kw:.4f} kW -> {out}")
    return EXIT_OK if report.passed else EXIT_THRESHOLD


COMMANDS = {"synth": cmd_synth, "estimate": cmd_estimate, "train": cmd_train,
            "generate": cmd_generate, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="loadgan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write synthetic fast/slow meter CSVs")
    sub.add_parser("estimate", parents=[common], help="estimate constraint parameters")
    t = sub.add_parser("train", parents=[common], help="train the constrained GAN")
    t.add_argument("--baseline", action="store_true", help="also train the unconstrained baseline")
    t.add_argument("--steps", type=int, help="override training.total_steps")
    g = sub.add_parser("generate", parents=[common], help="sample profiles from a checkpoint")
    g.add_argument("--checkpoint", required=True, help="directory written by train")
    g.add_argument("--n", type=int, help="number of profiles (default validation.n_profiles)")
    g.add_argument("--output", help="profiles CSV path")
    v = sub.add_parser("validate", parents=[common], help="score profiles against real data")
    v.add_argument("--profiles", required=True, help="profiles CSV written by generate")
    v.add_argument("--real", help="slow meter CSV to compare with (default: configured holdout)")
    v.add_argument("--output", help="report directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = with_overrides(load_config(args.config), seed=args.seed, out_dir=args.out,
                             steps=getattr(args, "steps", None))
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LoadGanError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
