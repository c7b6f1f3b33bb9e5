"""Command-line entry point.

Subcommands: kl-analyze, pseudo-true, simulate, estimate, limit-sample,
experiment {rate, limit, contrast, exponents}.  All take a JSON config
(model / experiment / limit sections plus output_dir) and write their
artifacts together with a manifest recording the command, the fully
resolved config, seeds, and SHA-256 hashes of every artifact, so any run
can be replayed byte-exactly.

Exit codes: 0 success, 1 validation error, 2 acceptance-threshold
violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, ThresholdError, ValidationError
from .estimator import DEFAULT_REFINEMENTS, pmle
from .experiment import (
    consistency_contrast,
    rate_exponent_curves,
    run_limit_experiment,
    run_rate_experiment,
)
from .kl import find_pseudo_true, kl_profile, kl_second_derivative, limit_constants
from .limit import FbmGrid, limit_moments, sample_limit_argmax
from .model import ModelParams, contamination_admissible
from .sim import Dataset, simulate

log = logging.getLogger("cuspmle")

OUTPUT_DIR_ENV = "CUSPMLE_OUTPUT_DIR"

_EXPERIMENT_KEYS = {
    "n_values", "replications", "seed", "n", "limit_draws", "kappa_grid",
    "coarse_step", "refinements", "likelihood_domain", "thresholds",
}
_THRESHOLD_KEYS = {"slope_band", "ks_max", "moment_gap_se", "contrast_min"}
_LIMIT_KEYS = {"u_max", "step", "draws", "seed"}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    experiment: dict
    limit: dict
    output_dir: str | None

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "experiment": self.experiment,
            "limit": self.limit,
            "output_dir": self.output_dir,
        }


def load_config(path: str) -> RunConfig:
    """Parse and validate a config file; every section checks before any work."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a JSON object")
    unknown = raw.keys() - {"model", "experiment", "limit", "output_dir"}
    if unknown:
        raise ValidationError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    if "model" not in raw:
        raise ValidationError("config is missing the 'model' section")
    model = ModelParams.from_dict(raw["model"])
    experiment = _validate_experiment(raw.get("experiment") or {})
    limit = _validate_limit(raw.get("limit") or {})
    # the limit grid must construct for this model's cusp order
    FbmGrid.for_kappa(model.kappa, limit["u_max"], limit["step"])
    return RunConfig(
        model=model,
        experiment=experiment,
        limit=limit,
        output_dir=raw.get("output_dir"),
    )


def _validate_experiment(section: dict) -> dict:
    if not isinstance(section, dict):
        raise ValidationError("experiment section must be a JSON object")
    unknown = section.keys() - _EXPERIMENT_KEYS
    if unknown:
        raise ValidationError(f"unknown experiment field(s): {', '.join(sorted(unknown))}")
    out = {
        "n_values": [int(v) for v in section.get("n_values", [200, 400, 800, 1600, 3200])],
        "replications": int(section.get("replications", 500)),
        "seed": int(section.get("seed", 0)),
        "n": int(section.get("n", 2000)),
        "limit_draws": int(section.get("limit_draws", 10000)),
        "kappa_grid": [float(v) for v in section.get("kappa_grid", np.linspace(0.01, 0.49, 49))],
        "coarse_step": section.get("coarse_step"),
        "refinements": int(section.get("refinements", DEFAULT_REFINEMENTS)),
        "likelihood_domain": section.get("likelihood_domain", "paper"),
        "thresholds": dict(section.get("thresholds") or {}),
    }
    if out["coarse_step"] is not None:
        out["coarse_step"] = float(out["coarse_step"])
    if out["likelihood_domain"] not in ("paper", "full"):
        raise ValidationError("experiment.likelihood_domain must be 'paper' or 'full'")
    bad = out["thresholds"].keys() - _THRESHOLD_KEYS
    if bad:
        raise ValidationError(f"unknown threshold field(s): {', '.join(sorted(bad))}")
    return out


def _validate_limit(section: dict) -> dict:
    if not isinstance(section, dict):
        raise ValidationError("limit section must be a JSON object")
    unknown = section.keys() - _LIMIT_KEYS
    if unknown:
        raise ValidationError(f"unknown limit field(s): {', '.join(sorted(unknown))}")
    return {
        "u_max": float(section.get("u_max", 8.0)),
        "step": float(section.get("step", 1.0 / 256.0)),
        "draws": int(section.get("draws", 10000)),
        "seed": int(section.get("seed", 0)),
    }


def _resolve_outdir(args, config: RunConfig | None) -> Path:
    out = getattr(args, "out", None)
    if out is None and config is not None:
        out = config.output_dir
    if out is None:
        out = os.environ.get(OUTPUT_DIR_ENV, ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _finite_or_none(x: float | None):
    if x is None or not np.isfinite(x):
        return None
    return float(x)


def _write_manifest(outdir: Path, command: str, argv: list[str],
                    config: dict | None, seed, artifacts: list[Path]) -> None:
    manifest = {
        "command": command,
        "argv": argv,
        "config": config,
        "seed": seed,
        "artifacts": {p.name: _sha256(p) for p in artifacts},
    }
    _write_json(outdir / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_kl_analyze(args, argv) -> int:
    config = load_config(args.config)
    outdir = _resolve_outdir(args, config)
    params = config.model
    log.info("tabulating divergence profile at %d points", args.grid_points)
    profile = kl_profile(params, args.grid_points)
    csv_path = outdir / "kl_profile.csv"
    profile.to_csv(csv_path)
    admissible, threshold = contamination_admissible(params.S, params.lambda0, params.h)
    if params.h != 0.0:
        consts = limit_constants(params, profile.theta_hat)
        b = consts.b
        gk, a_const = consts.gamma_kappa, consts.A
    else:
        from .kl import gamma_kappa as _gk
        b = None
        gk = _gk(params.kappa)
        a_const = 1.0 - params.lambda0 / params.S * np.log1p(params.S / params.lambda0)
    summary = {
        "theta_hat": profile.theta_hat,
        "curvature_hat": _finite_or_none(profile.curvature_hat),
        "A": float(a_const),
        "gamma_kappa": gk,
        "b": b,
        "admissible": bool(admissible),
        "threshold": threshold,
    }
    json_path = outdir / "kl_summary.json"
    _write_json(json_path, summary)
    _write_manifest(outdir, "kl-analyze", argv, config.to_dict(), None, [csv_path, json_path])
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_pseudo_true(args, argv) -> int:
    config = load_config(args.config)
    outdir = _resolve_outdir(args, config)
    params = config.model
    theta_hat = find_pseudo_true(params)
    admissible, threshold = contamination_admissible(params.S, params.lambda0, params.h)
    if params.h != 0.0:
        consts = limit_constants(params, theta_hat)
        payload = {
            "theta_hat": theta_hat,
            "A": consts.A,
            "b": consts.b,
            "gamma_kappa": consts.gamma_kappa,
            "hurst": consts.hurst,
            "curvature_hat": kl_second_derivative(params, theta_hat),
        }
    else:
        payload = {
            "theta_hat": theta_hat,
            "A": 1.0 - params.lambda0 / params.S * float(np.log1p(params.S / params.lambda0)),
            "b": None,
            "gamma_kappa": None,
            "hurst": params.kappa + 0.5,
            "curvature_hat": None,
        }
    payload["admissible"] = bool(admissible)
    payload["threshold"] = threshold
    json_path = outdir / "pseudo_true.json"
    _write_json(json_path, payload)
    _write_manifest(outdir, "pseudo-true", argv, config.to_dict(), None, [json_path])
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_simulate(args, argv) -> int:
    config = load_config(args.config)
    outdir = _resolve_outdir(args, config)
    n = args.n if args.n is not None else config.experiment["n"]
    seed = args.seed if args.seed is not None else config.experiment["seed"]
    log.info("simulating %d replicates with seed %d", n, seed)
    ds = simulate(config.model, n, seed)
    json_path = outdir / "dataset.json"
    ds.save(json_path)
    artifacts = [json_path]
    if args.csv:
        csv_path = outdir / "dataset.csv"
        ds.to_csv(csv_path)
        artifacts.append(csv_path)
    _write_manifest(outdir, "simulate", argv, config.to_dict(), seed, artifacts)
    print(json.dumps({"n": ds.n, "total_events": ds.total_events(), "seed": seed}))
    return 0


def _cmd_estimate(args, argv) -> int:
    ds = Dataset.load(args.dataset)
    outdir = _resolve_outdir(args, None)
    log.info("estimating on %d replicates (%d events)", ds.n, ds.total_events())
    result = pmle(
        ds.params, ds,
        coarse_step=args.coarse_step,
        refinements=args.refinements,
        likelihood_domain=args.likelihood_domain,
    )
    payload = result.to_dict()
    payload["likelihood_domain"] = args.likelihood_domain
    json_path = outdir / "estimate.json"
    _write_json(json_path, payload)
    _write_manifest(outdir, "estimate", argv, {"dataset": str(args.dataset)}, ds.seed, [json_path])
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_limit_sample(args, argv) -> int:
    outdir = _resolve_outdir(args, None)
    grid = FbmGrid.for_kappa(args.kappa, args.u_max, args.step)
    log.info("drawing %d limit argmaxes on %d nodes", args.draws, grid.nodes().size)
    sample = sample_limit_argmax(grid, args.draws, args.seed)
    csv_path = outdir / "limit_draws.csv"
    with open(csv_path, "w") as fh:
        fh.write("u_hat\n")
        for v in sample.draws:
            fh.write(f"{v!r}\n")
    moments = limit_moments(sample, [1.0, 2.0, 4.0])
    summary = {
        "moments": {str(int(p)): [m, se] for p, (m, se) in moments.items()},
        "boundary_mass": sample.boundary_mass(),
        "u_max": grid.u_max,
        "step": grid.step,
        "hurst": grid.hurst,
        "draws": int(args.draws),
        "seed": int(args.seed),
    }
    json_path = outdir / "limit_summary.json"
    _write_json(json_path, summary)
    _write_manifest(outdir, "limit-sample", argv, None, args.seed, [csv_path, json_path])
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_experiment(args, argv) -> int:
    config = load_config(args.config)
    outdir = _resolve_outdir(args, config)
    exp = config.experiment
    thresholds = exp["thresholds"]
    workers = args.threads or os.cpu_count() or 1
    common = dict(
        workers=workers,
        coarse_step=exp["coarse_step"],
        refinements=exp["refinements"],
        likelihood_domain=exp["likelihood_domain"],
    )
    violations: list[str] = []

    if args.kind == "rate":
        log.info("rate experiment: n in %s, %d replications", exp["n_values"], exp["replications"])
        report = run_rate_experiment(
            config.model, exp["n_values"], exp["replications"], exp["seed"], **common
        )
        csv_path = outdir / "rate_errors.csv"
        with open(csv_path, "w") as fh:
            fh.write("n,replicate,abs_error\n")
            for n, errs in zip(report.n_values, report.errors):
                for rep, e in enumerate(errs):
                    fh.write(f"{n},{rep},{e!r}\n")
        json_path = outdir / "rate_report.json"
        _write_json(json_path, report.to_dict())
        band = thresholds.get("slope_band")
        if band is not None and abs(report.fitted_slope - report.expected_slope) > band:
            violations.append(
                f"fitted slope {report.fitted_slope:.4f} outside +-{band} of {report.expected_slope:.4f}"
            )
        summary = {"fitted_slope": report.fitted_slope, "expected_slope": report.expected_slope}
        artifacts = [csv_path, json_path]

    elif args.kind == "limit":
        lim = config.limit
        grid = FbmGrid.for_kappa(config.model.kappa, lim["u_max"], lim["step"])
        log.info("drawing %d reference limit argmaxes", lim["draws"])
        sample = sample_limit_argmax(grid, lim["draws"], lim["seed"])
        log.info("limit experiment: n=%d, %d replications", exp["n"], exp["replications"])
        report = run_limit_experiment(
            config.model, exp["n"], exp["replications"], sample, exp["seed"], **common
        )
        csv_path = outdir / "limit_errors.csv"
        with open(csv_path, "w") as fh:
            fh.write("replicate,normalized_error\n")
            for rep, v in enumerate(report.normalized_errors):
                fh.write(f"{rep},{v!r}\n")
        json_path = outdir / "limit_report.json"
        _write_json(json_path, report.to_dict())
        ks_max = thresholds.get("ks_max")
        if ks_max is not None and not report.ks_statistic < ks_max:
            violations.append(f"KS statistic {report.ks_statistic:.4f} >= {ks_max}")
        gap_se = thresholds.get("moment_gap_se")
        if gap_se is not None:
            row = next(r for r in report.moment_table if r["p"] == 2.0)
            if not row["gap"] < gap_se * row["combined_se"]:
                violations.append(
                    f"second-moment gap {row['gap']:.4f} >= {gap_se} x {row['combined_se']:.4f}"
                )
        summary = {"ks_statistic": report.ks_statistic}
        artifacts = [csv_path, json_path]

    elif args.kind == "contrast":
        log.info("consistency contrast: n=%d, %d replications", exp["n"], exp["replications"])
        report = consistency_contrast(
            config.model, exp["n"], exp["replications"], exp["seed"], **common
        )
        json_path = outdir / "contrast_report.json"
        _write_json(json_path, report)
        cmin = thresholds.get("contrast_min")
        frac = report["fraction_closer_to_pseudo_true"]
        if cmin is not None and not frac >= cmin:
            violations.append(f"contrast fraction {frac:.4f} < {cmin}")
        summary = {"fraction_closer_to_pseudo_true": frac}
        artifacts = [json_path]

    else:  # exponents
        table = rate_exponent_curves(exp["kappa_grid"])
        csv_path = outdir / "rate_exponents.csv"
        with open(csv_path, "w") as fh:
            fh.write("kappa,gamma_well,gamma_mis\n")
            for k, gw, gm in zip(table["kappa"], table["gamma_well"], table["gamma_mis"]):
                fh.write(f"{k!r},{gw!r},{gm!r}\n")
        json_path = outdir / "rate_exponents.json"
        _write_json(json_path, table)
        summary = {"points": len(table["kappa"])}
        artifacts = [csv_path, json_path]

    _write_manifest(
        outdir, f"experiment {args.kind}", argv, config.to_dict(), exp["seed"], artifacts
    )
    print(json.dumps(summary, sort_keys=True))
    if violations:
        raise ThresholdError("; ".join(violations))
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cuspmle",
        description="Misspecified cusp-type change-point estimation toolkit",
    )
    parser.add_argument("--log-level", default="INFO", help="logging level (default INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")

    p = sub.add_parser("kl-analyze", help="tabulate the divergence profile and constants")
    add_common(p)
    p.add_argument("--grid-points", type=int, default=201)

    p = sub.add_parser("pseudo-true", help="locate the pseudo-true arrival time")
    add_common(p)

    p = sub.add_parser("simulate", help="draw a dataset from the real intensity")
    add_common(p)
    p.add_argument("--n", type=int, default=None, help="replicates (default experiment.n)")
    p.add_argument("--seed", type=int, default=None, help="seed (default experiment.seed)")
    p.add_argument("--csv", action="store_true", help="also write (replicate_id, event_time) CSV")

    p = sub.add_parser("estimate", help="pseudo-MLE on a stored dataset")
    p.add_argument("--dataset", required=True, help="dataset JSON written by simulate")
    p.add_argument("--coarse-step", type=float, default=None)
    p.add_argument("--refinements", type=int, default=DEFAULT_REFINEMENTS)
    p.add_argument("--likelihood-domain", choices=("paper", "full"), default="paper")
    p.add_argument("--out", default=None)

    p = sub.add_parser("limit-sample", help="Monte Carlo draws of the limit argmax")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--u-max", type=float, default=8.0)
    p.add_argument("--step", type=float, default=1.0 / 256.0)
    p.add_argument("--draws", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("experiment", help="Monte Carlo verification experiments")
    p.add_argument("kind", choices=("rate", "limit", "contrast", "exponents"))
    add_common(p)
    p.add_argument("--threads", type=int, default=None, help="worker cap (default cpu count)")

    return parser


_HANDLERS = {
    "kl-analyze": _cmd_kl_analyze,
    "pseudo-true": _cmd_pseudo_true,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "limit-sample": _cmd_limit_sample,
    "experiment": _cmd_experiment,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; map onto validation
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _HANDLERS[args.command](args, list(argv))
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except ThresholdError as exc:
        print(f"threshold violation: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
