"""Command-line front end: estimate on CSV data, simulate, and report.

CSV conventions: every file this tool writes starts with one comment line
``# onestep/<name>/v1 [config=<digest>]`` followed by a header row.  All
floating-point values are written with repr, the shortest decimal string
that parses back to the identical double, so outputs round-trip exactly.

Exit codes: 0 success, 1 input or configuration error, 2 degenerate
estimation (the data admits no stable estimate).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import Sample
from .errors import (
    ConfigError,
    DegenerateError,
    EstimationError,
    NoConvergenceError,
    ZeroVarianceError,
)
from .estimators import (
    EstimateResult,
    newton_solve,
    one_step_factorized,
    one_step_weighted,
    studentize,
)
from .montecarlo import (
    MODEL_IDS,
    SimConfig,
    normal_quantile,
    run,
)
from .regression import (
    Contrasts,
    default_contrasts,
    lse_one_step,
    mm_closed_form,
    mm_model,
    plinear_model,
    preliminary_mm,
    preliminary_plinear,
    preliminary_sqrt,
    sqrt_model,
    to_families,
)

SCHEMA_PREFIX = "onestep"
SCHEMA_VERSION = "v1"

ESTIMATE_MODELS = ("sqrt", "plinear", "mm")
ESTIMATE_PIPELINES = (
    "one_step_weighted",
    "one_step_factorized",
    "lse_one_step",
    "mm_closed_form",
    "newton_oracle",
)

_DEGENERATE_EXITS = (DegenerateError, NoConvergenceError, ZeroVarianceError)


@dataclass(frozen=True)
class RunManifest:
    """Provenance of one simulation run."""

    config_path: str
    output_dir: str
    tool_version: str
    config_digest: str
    created_utc: str


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats; plain text otherwise."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _schema_line(name: str, digest: str | None = None) -> str:
    line = f"# {SCHEMA_PREFIX}/{name}/{SCHEMA_VERSION}"
    if digest is not None:
        line += f" config={digest}"
    return line


def _write_csv(path: Path, name: str, header: list[str], rows, digest: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_schema_line(name, digest) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_commented_csv(path: Path) -> tuple[list[str], list[str], list[dict[str, str]]]:
    """Returns (comment lines, header, rows as dicts)."""
    comments: list[str] = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for line in lines:
        if line.startswith("#"):
            comments.append(line)
            body_start += 1
        else:
            break
    body = lines[body_start:]
    if not body:
        raise ValueError(f"{path}: no header row")
    reader = csv.reader(body)
    rows = list(reader)
    header = rows[0]
    out = []
    for idx, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {idx} has {len(row)} fields, expected {len(header)}")
        out.append(dict(zip(header, row)))
    return comments, header, out


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"{where}: cannot parse {text!r} as a number") from None


def _load_data_csv(path: Path) -> Sample:
    """Read an estimate input: columns x, a, optional b, optional w."""
    _, header, rows = _read_commented_csv(path)
    allowed = {"x", "a", "b", "w"}
    unknown = [col for col in header if col not in allowed]
    if unknown:
        raise ValueError(f"{path}: unknown column {unknown[0]!r} (expected x, a, b, w)")
    for required in ("x", "a"):
        if required not in header:
            raise ValueError(f"{path}: missing required column {required!r}")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    cols: dict[str, list[float]] = {col: [] for col in header}
    for idx, row in enumerate(rows, start=1):
        for col in header:
            cols[col].append(_parse_float(row[col], f"{path}: row {idx}, column {col!r}"))
    return Sample(
        x=np.array(cols["x"]),
        a=np.array(cols["a"]),
        b=np.array(cols["b"]) if "b" in cols else None,
        w_known=np.array(cols["w"]) if "w" in cols else None,
    )


def _load_contrast_file(path: Path, n: int) -> np.ndarray:
    values = []
    with open(path) as fh:
        for idx, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            values.append(_parse_float(text, f"{path}: line {idx}"))
    if len(values) != n:
        raise ValueError(f"{path}: {len(values)} coefficients for {n} observations")
    return np.array(values)


def _build_estimate_model(model_id: str, s: Sample, weights):
    if model_id == "sqrt":
        return sqrt_model(s.a, sigma=1.0, weights=weights)
    if model_id == "plinear":
        if s.b is None:
            raise ValueError("the plinear model needs a b column")
        from .montecarlo import plinear_g, plinear_g_prime, plinear_g_second

        return plinear_model(
            s.a, s.b, plinear_g, plinear_g_prime, sigma=1.0,
            weights=weights, g_second=plinear_g_second,
        )
    if model_id == "mm":
        if s.b is None:
            raise ValueError("the mm model needs a b column")
        return mm_model(s.a, s.b, sigma=1.0, weights=weights)
    raise ConfigError(f"model must be one of {ESTIMATE_MODELS}, got {model_id!r}")


def _estimate_preliminary(model_id: str, s: Sample, contrast_arg: str) -> float:
    if model_id == "mm":
        c = (
            np.ones(s.n)
            if contrast_arg == "default"
            else _load_contrast_file(Path(contrast_arg), s.n)
        )
        return preliminary_mm(c, s)
    if model_id == "sqrt":
        contrasts = (
            default_contrasts(s, "sum_zero")
            if contrast_arg == "default"
            else Contrasts(_load_contrast_file(Path(contrast_arg), s.n), "sum_zero")
        )
        return preliminary_sqrt(contrasts, s)
    contrasts = (
        default_contrasts(s, "b_orthogonal")
        if contrast_arg == "default"
        else Contrasts(_load_contrast_file(Path(contrast_arg), s.n), "b_orthogonal")
    )
    return preliminary_plinear(contrasts, s)


def cmd_estimate(args: argparse.Namespace) -> int:
    out_path = Path(args.out)
    warnings: list[str] = []
    theta_star = theta_hat = denominator = None
    d_star = ci = None
    degenerate = False
    try:
        s = _load_data_csv(Path(args.data))
        model = _build_estimate_model(args.model, s, s.w_known)
        if args.pipeline == "mm_closed_form" and args.model != "mm":
            raise ConfigError("the closed-form pipeline applies to the mm model only")
        fam, wf = to_families(model)
        if not wf.h_prime_exact:
            warnings.append("weight derivative approximated numerically")
    except (EstimationError, ValueError, OSError) as exc:
        if isinstance(exc, _DEGENERATE_EXITS):
            pass  # fall through to the degenerate report below
        else:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        degenerate = True
        warnings.append(str(exc))
    if not degenerate:
        try:
            theta_star = (
                float(args.theta_start)
                if args.theta_start is not None
                else _estimate_preliminary(args.model, s, args.contrasts)
            )
            if args.pipeline == "one_step_weighted":
                res = one_step_weighted(fam, wf, theta_star, s)
            elif args.pipeline == "one_step_factorized":
                res = one_step_factorized(fam, wf, theta_star, s)
            elif args.pipeline == "lse_one_step":
                res = lse_one_step(model, theta_star, s)
            elif args.pipeline == "mm_closed_form":
                res = EstimateResult(
                    theta_star=theta_star,
                    theta_hat=mm_closed_form(model, theta_star, s),
                    denominator=math.nan,
                )
            else:  # newton_oracle
                res = EstimateResult(
                    theta_star=theta_star,
                    theta_hat=newton_solve(fam, wf, theta_star, s),
                    denominator=math.nan,
                )
            theta_hat, denominator = res.theta_hat, res.denominator
            d_star, ci = studentize(fam, wf, theta_star, theta_hat, s, args.alpha)
        except _DEGENERATE_EXITS as exc:
            degenerate = True
            warnings.append(str(exc))
        except (EstimationError, ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    _write_csv(
        out_path,
        "report",
        ["theta_star", "theta_hat", "d_star", "ci_lo", "ci_hi", "denominator", "warnings"],
        [[
            theta_star,
            theta_hat,
            d_star,
            ci[0] if ci else None,
            ci[1] if ci else None,
            denominator,
            "; ".join(warnings),
        ]],
    )
    print(f"wrote {out_path}")
    return 2 if degenerate else 0


def _parse_config_file(path: Path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path) as fh:
        for idx, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}: line {idx}: expected key = value")
            key, value = text.split("=", 1)
            key, value = key.strip(), value.strip()
            if not key or not value:
                raise ConfigError(f"{path}: line {idx}: expected key = value")
            if key in pairs:
                raise ConfigError(f"{path}: line {idx}: duplicate key {key!r}")
            pairs[key] = value
    return pairs


_CONFIG_KEYS = {
    "model": str,
    "theta_true": float,
    "sigma": float,
    "noise": str,
    "n": int,
    "replications": int,
    "seed": int,
    "alpha": float,
    "pipeline": str,
    "covariates": str,
}


def _sim_config_from_file(path: Path) -> SimConfig:
    pairs = _parse_config_file(path)
    unknown = set(pairs) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    kwargs = {}
    for key, value in pairs.items():
        caster = _CONFIG_KEYS[key]
        try:
            kwargs[key] = caster(value)
        except ValueError:
            raise ConfigError(
                f"{path}: key {key!r}: cannot parse {value!r} as {caster.__name__}"
            ) from None
    for required in ("model", "theta_true", "sigma", "n", "replications", "seed"):
        if required not in kwargs:
            raise ConfigError(f"{path}: missing required key {required!r}")
    rename = {"model": "model_id", "covariates": "covariate_spec"}
    return SimConfig(**{rename.get(k, k): v for k, v in kwargs.items()})


def _config_digest(cfg: SimConfig) -> str:
    canonical = "\n".join(f"{k}={_fmt(v)}" for k, v in sorted(asdict(cfg).items()))
    return hashlib.blake2b(canonical.encode(), digest_size=8).hexdigest()


def _resolve_threads(flag_value: int) -> int:
    env = os.environ.get("ONESTEP_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"ONESTEP_THREADS is not an integer: {env!r}") from None
        if value < 1:
            raise ConfigError(f"ONESTEP_THREADS must be positive, got {value}")
        return value
    return flag_value


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        cfg = _sim_config_from_file(Path(args.config))
        threads = _resolve_threads(args.threads)
    except (EstimationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = _config_digest(cfg)
    written: list[Path] = []
    try:
        records, summary = run(cfg, threads=threads)
        valid_z = [rec.z for rec in records if not rec.degenerate]
        valid_z.sort()

        path = out_dir / "records.csv"
        _write_csv(
            path,
            "records",
            ["rep", "theta_star", "theta_hat", "z", "z_stud", "covered", "degenerate"],
            (
                [r.rep, r.theta_star, r.theta_hat, r.z, r.z_stud, r.covered, r.degenerate]
                for r in records
            ),
            digest,
        )
        written.append(path)

        path = out_dir / "summary.csv"
        _write_csv(
            path,
            "summary",
            [
                "model", "n", "replications", "seed", "noise", "pipeline",
                "sigma", "theta_true", "alpha",
                "mean_z", "var_z", "ks_z", "ks_zstud", "coverage",
                "var_ratio", "mse_star", "mse_hat", "degenerate_count",
            ],
            [[
                cfg.model_id, cfg.n, cfg.replications, cfg.seed, cfg.noise, cfg.pipeline,
                cfg.sigma, cfg.theta_true, cfg.alpha,
                summary.mean_z, summary.var_z, summary.ks_z, summary.ks_zstud,
                summary.coverage, summary.var_ratio, summary.mse_star, summary.mse_hat,
                summary.degenerate_count,
            ]],
            digest,
        )
        written.append(path)

        m = len(valid_z)
        path = out_dir / "qq.csv"
        _write_csv(
            path,
            "qq",
            ["theoretical", "observed"],
            ([normal_quantile((i + 0.5) / m), valid_z[i]] for i in range(m)),
            digest,
        )
        written.append(path)

        edges = np.linspace(-4.0, 4.0, 41)
        counts, _ = np.histogram(valid_z, bins=edges)
        path = out_dir / "hist.csv"
        _write_csv(
            path,
            "hist",
            ["bin_lo", "bin_hi", "count"],
            ([edges[k], edges[k + 1], int(counts[k])] for k in range(40)),
            digest,
        )
        written.append(path)

        manifest = RunManifest(
            config_path=str(args.config),
            output_dir=str(out_dir),
            tool_version=__version__,
            config_digest=digest,
            created_utc=datetime.now(timezone.utc).isoformat(),
        )
        path = out_dir / "manifest.json"
        with open(path, "w") as fh:
            json.dump(asdict(manifest), fh, indent=2)
            fh.write("\n")
        written.append(path)
    except (EstimationError, ValueError, OSError) as exc:
        for path in written:
            try:
                path.unlink()
            except OSError:
                pass
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {out_dir}/records.csv, summary.csv, qq.csv, hist.csv, manifest.json "
        f"({summary.degenerate_count} degenerate)"
    )
    return 0


_COMPARISON_COLUMNS = [
    "model", "n", "ks_z", "ks_zstud", "coverage",
    "var_ratio", "mse_star", "mse_hat", "degenerate_count",
]


def cmd_report(args: argparse.Namespace) -> int:
    rows = []
    expected_schema = _schema_line("summary").split()[1]
    for name in args.summaries:
        path = Path(name)
        try:
            comments, header, data = _read_commented_csv(path)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        schemas = [c[1:].strip().split()[0] for c in comments if len(c) > 1]
        if expected_schema not in schemas:
            print(
                f"error: {path}: not a {expected_schema} file "
                f"(found {schemas or 'no schema line'})",
                file=sys.stderr,
            )
            return 1
        missing = [col for col in _COMPARISON_COLUMNS if col not in header]
        if missing:
            print(f"error: {path}: missing column {missing[0]!r}", file=sys.stderr)
            return 1
        if not data:
            print(f"error: {path}: no summary row", file=sys.stderr)
            return 1
        rows.append([data[0][col] for col in _COMPARISON_COLUMNS])
    out_path = Path(args.out)
    _write_csv(out_path, "comparison", _COMPARISON_COLUMNS, rows)
    print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onestep",
        description="One-step weighted estimation for nonlinear regression models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate from a CSV file (columns x, a[, b][, w])")
    p_est.add_argument("data", help="input CSV path")
    p_est.add_argument("--model", required=True, choices=ESTIMATE_MODELS)
    p_est.add_argument("--pipeline", default="one_step_weighted", choices=ESTIMATE_PIPELINES)
    p_est.add_argument("--alpha", type=float, default=0.05, help="interval miss level")
    p_est.add_argument(
        "--contrasts",
        default="default",
        help="'default' or a file with one coefficient per line",
    )
    p_est.add_argument("--theta-start", type=float, default=None, help="override the preliminary")
    p_est.add_argument("--out", default="report.csv", help="output CSV path")
    p_est.set_defaults(func=cmd_estimate)

    p_sim = sub.add_parser("simulate", help="run a simulation campaign from a config file")
    p_sim.add_argument("config", help="key = value config file")
    p_sim.add_argument("--out", default=".", help="output directory")
    p_sim.add_argument(
        "--threads", type=int, default=1,
        help="worker threads (ONESTEP_THREADS overrides)",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser("report", help="combine summary.csv files into a comparison table")
    p_rep.add_argument("summaries", nargs="+", help="summary.csv paths")
    p_rep.add_argument("--out", default="comparison.csv", help="output CSV path")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
