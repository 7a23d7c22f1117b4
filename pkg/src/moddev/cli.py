"""Command-line entry point.

Every command reads an optional JSON config (``--config``) and lets flags
override its keys.  Config keys::

    distribution  {"type": "gaussian", "covariance": [[...]] | {"spectral": {...}}}
                  {"type": "discrete", "atoms": [...], "probs": [...]}
                  {"type": "rademacher", "scales": [...]}
    covariance    explicit matrix, used when no distribution is given
    body          {"type": "ball" | "halfspace" | "polytope", ...}
    schedule      {"c": 1.0, "alpha": 0.6}
    n, n_list, b_n, rho, samples, seed, threads, method, which, slice

Exit codes: 0 success, 2 configuration/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import asymptotics, montecarlo, representation
from .convex_bodies import SliceSpec, body_from_json, check_slice_domination, validate_conditions
from .dominating import solve
from .errors import ModdevError, NumericalError, ValidationError
from .gauss_linalg import as_gaussian, build_gaussian, spectral_model
from .tilting import GrowthSchedule, base_from_json, matching_model, resolve_bn

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class UsageError(ValidationError):
    code = "usage"


# ---------------------------------------------------------------------------
# output


def _encode(obj):
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with every float printed to 17 significant digits."""
    return _encode(obj) + "\n"


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# config


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    for key in ("n", "b_n", "rho", "samples", "seed", "threads", "method", "which", "format", "output"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "n_list", None):
        cfg["n_list"] = args.n_list
    sched = dict(cfg.get("schedule", {}))
    if getattr(args, "alpha", None) is not None:
        sched["alpha"] = args.alpha
    if getattr(args, "c", None) is not None:
        sched["c"] = args.c
    if sched:
        cfg["schedule"] = sched
    for key, text in (("distribution", args.distribution), ("body", args.body)):
        if text:
            try:
                cfg[key] = json.loads(text)
            except json.JSONDecodeError as exc:
                raise UsageError(f"--{key} is not valid JSON: {exc}") from None
    return cfg


def _require(cfg, key):
    if key not in cfg or cfg[key] is None:
        raise UsageError(f"missing required setting {key!r}")
    return cfg[key]


def _model(cfg):
    """GaussianModel or SpectralModel for the configured covariance."""
    dist = cfg.get("distribution")
    if dist is not None:
        if dist.get("type") == "gaussian" and isinstance(dist.get("covariance"), dict):
            sp = dist["covariance"]["spectral"]
            return spectral_model(sp["p"], sp["dim"])
        return matching_model(base_from_json(dist))
    cov = _require(cfg, "covariance")
    if isinstance(cov, dict) and "spectral" in cov:
        return spectral_model(cov["spectral"]["p"], cov["spectral"]["dim"])
    return build_gaussian(cov)


def _base(cfg):
    return base_from_json(_require(cfg, "distribution"))


def _schedule(cfg):
    s = cfg.get("schedule")
    if s is None:
        return None
    return GrowthSchedule(float(s.get("c", 1.0)), float(_require(s, "alpha")))


def _scale(cfg, n):
    """Explicit b_n if given, else the schedule."""
    if cfg.get("b_n") is not None:
        return float(cfg["b_n"])
    sched = _schedule(cfg)
    if sched is None:
        raise UsageError("need either b_n or a schedule")
    return sched


def _seed(cfg):
    seed = cfg.get("seed")
    if seed is None:
        raise UsageError("a seed is required for stochastic commands")
    return int(seed)


def _samples(cfg, default=None):
    samples = cfg.get("samples", default)
    if samples is None or int(samples) < 1:
        raise UsageError("samples must be a positive integer")
    return int(samples)


# ---------------------------------------------------------------------------
# commands


def cmd_dominate(cfg) -> str:
    model = as_gaussian(_model(cfg))
    body = body_from_json(_require(cfg, "body"))
    report = validate_conditions(body, model)
    dp = solve(model, body)
    out = dp.to_json()
    out["validation"] = {
        "open_convex": report.open_convex,
        "nonempty": report.nonempty,
        "excludes_origin": report.excludes_origin,
    }
    return dumps(out)


def cmd_estimate(cfg) -> str:
    base = _base(cfg)
    body = body_from_json(_require(cfg, "body"))
    n = int(_require(cfg, "n"))
    scale = _scale(cfg, n)
    b_n = resolve_bn(scale, n)
    samples = _samples(cfg)
    seed = _seed(cfg)
    threads = cfg.get("threads")
    method = cfg.get("method", "tilted")
    if method not in ("naive", "tilted", "both"):
        raise UsageError(f"unknown method {method!r}")
    reports = []
    naive = None
    if method in ("naive", "both"):
        naive = montecarlo.estimate_naive(base, n, b_n, body, samples, seed, threads, stream=(0,))
        reports.append(naive)
    if method in ("tilted", "both"):
        dp = solve(matching_model(base), body)
        tilted = montecarlo.estimate_tilted(base, n, b_n, body, dp, samples, seed, threads, stream=(1,))
        if naive is not None:
            tilted = montecarlo.with_vr_factor(naive, tilted)
        reports.append(tilted)
    if cfg.get("format", "json") == "csv":
        return montecarlo.estimates_csv([(n, b_n, r) for r in reports])
    return dumps({"n": n, "b_n": b_n, "estimates": [r.to_json() for r in reports]})


def cmd_asymptotic(cfg) -> str:
    which = _require(cfg, "which")
    model = _model(cfg)
    body = body_from_json(_require(cfg, "body"))
    if which == "cm-check":
        rho = float(_require(cfg, "rho"))
        res = asymptotics.cameron_martin_check(model, body, rho, _samples(cfg), _seed(cfg), cfg.get("threads"))
        return dumps({"which": which, "rho": rho, **res.to_json()})
    n = int(_require(cfg, "n"))
    scale = _scale(cfg, n)
    b_n = resolve_bn(scale, n)
    if which == "t1-upper":
        dp = solve(as_gaussian(model), body)
        return dumps({"which": which, "n": n, "b_n": b_n, "value": asymptotics.theorem1_upper(dp, n, b_n)})
    if which == "t5-ball":
        res = asymptotics.theorem5_value(model, body, n, scale)
        return dumps({"which": which, "n": n, "b_n": b_n, **res.to_json()})
    if which == "t4-gauss":
        rho = b_n / math.sqrt(n)
        rep = asymptotics.gaussian_set_probability(
            model, body, rho, _samples(cfg, 10**6), cfg.get("seed"), cfg.get("method", "tilted"),
            threads=cfg.get("threads"),
        )
        return dumps({"which": which, "n": n, "b_n": b_n, "rho": rho, **rep.to_json()})
    raise UsageError(f"unknown asymptotic {which!r}")


def cmd_compare(cfg) -> str:
    base = _base(cfg)
    body = body_from_json(_require(cfg, "body"))
    sched = _schedule(cfg)
    if sched is None:
        raise UsageError("compare needs a schedule")
    n_list = [int(n) for n in _require(cfg, "n_list")]
    rows = montecarlo.ratio_experiment(base, body, sched, n_list, _samples(cfg), _seed(cfg), cfg.get("threads"))
    if cfg.get("format", "csv") == "json":
        return dumps({"rows": [r.to_dict() for r in rows]})
    return montecarlo.ratio_csv(rows)


def cmd_verify_repr(cfg) -> str:
    base = _base(cfg)
    body = body_from_json(_require(cfg, "body"))
    n = int(_require(cfg, "n"))
    b_n = resolve_bn(_scale(cfg, n), n)
    dp = solve(matching_model(base), body)
    dec = representation.repr_exact(base, n, b_n, body, dp)
    out = dec.to_json()
    out["rel_gap"] = dec.gap / dec.prob if dec.prob > 0 else dec.gap
    return dumps({"n": n, "b_n": b_n, **out})


def cmd_slice_check(cfg) -> str:
    model = as_gaussian(_model(cfg))
    body = body_from_json(_require(cfg, "body"))
    sl = _require(cfg, "slice")
    spec = SliceSpec(sl.get("kind", "sqrt"), float(sl["beta"]), float(sl["delta"]))
    dp = solve(model, body)
    rep = check_slice_domination(body, dp, spec, grid=sl.get("grid"))
    rows = [{"s": s, "width": w, "tau": t, "margin": m} for s, w, t, m in rep.rows]
    return dumps({"dominated": rep.dominated, "rows": rows})


COMMANDS = {
    "dominate": cmd_dominate,
    "estimate": cmd_estimate,
    "asymptotic": cmd_asymptotic,
    "compare": cmd_compare,
    "verify-repr": cmd_verify_repr,
    "slice-check": cmd_slice_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moddev", description="Moderate-deviation probabilities for convex sets.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--distribution", help="distribution as inline JSON")
        p.add_argument("--body", help="body as inline JSON")
        p.add_argument("--output", "-o", help="write to this path instead of stdout")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--b-n", dest="b_n", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--c", type=float)
        if name == "estimate":
            p.add_argument("--method", choices=["naive", "tilted", "both"])
        if name == "asymptotic":
            p.add_argument("--which", choices=["t1-upper", "t4-gauss", "t5-ball", "cm-check"])
            p.add_argument("--rho", type=float)
            p.add_argument("--method", choices=["naive", "tilted"])
        if name == "compare":
            p.add_argument("--n-list", dest="n_list", type=int, nargs="+")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        text = COMMANDS[args.command](cfg)
        _emit(text, cfg.get("output"))
    except NumericalError as exc:
        sys.stderr.write(dumps({"error": exc.code, "message": str(exc)}))
        return EXIT_NUMERICAL
    except (ModdevError, KeyError, TypeError, ValueError) as exc:
        code = exc.code if isinstance(exc, ModdevError) else "config"
        sys.stderr.write(dumps({"error": code, "message": str(exc)}))
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
