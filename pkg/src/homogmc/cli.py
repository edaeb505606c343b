"""Command-line orchestration: classify regimes, run sweeps from flat
key = value config files, and a built-in selftest.

Exit codes for `sweep`: 0 success, 1 I/O or config parse failure (with
file:line diagnostics), 2 unsupported scaling regime.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from .experiments import (
    SweepConfig,
    require_solvable_config,
    run_sweep,
    write_outputs,
)
from .fk import WrongRegime, classify, estimate_u, exponent_direct, exponent_ito_trick
from .field import correlation_model, make_field
from .limits import SigmaVariant, riemann_integral, sample_temporal_field, sigma
from .paths import refine_path, simulate_path, local_time
from .rng import Stream, derive_seed

log = logging.getLogger("homogmc")

_FLOAT_KEYS = ("alpha", "beta", "t", "x", "w_t", "w_x", "theta", "amplitude",
               "dt", "exp_cap", "spatial_dy", "x_step", "x_pad")
_INT_KEYS = ("n_paths", "n_fields", "seed", "spatial_t_steps", "path_steps", "riemann_level")
_STR_KEYS = ("g", "kernel", "amplitude_law", "name")
_KEY_TO_FIELD = {"g": "g_name", "eps": "eps_list"}


class ConfigError(Exception):
    """Config file problem, carrying a file:line anchor."""


def parse_config_file(path: str) -> dict[str, tuple[str, int]]:
    """Flat `key = value` table; returns {key: (raw value, line number)}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file: {exc.strerror}") from exc
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = (val, lineno)
    return out


def _convert(path: str, key: str, val: str, lineno: int):
    try:
        if key == "eps":
            return tuple(float(v) for v in val.replace(",", " ").split())
        if key in _FLOAT_KEYS:
            return float(val)
        if key in _INT_KEYS:
            return int(val)
        if key in _STR_KEYS:
            return val
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: bad value {val!r} for key {key!r}") from None
    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")


def build_sweep_config(path: str, overrides: dict | None = None) -> SweepConfig:
    raw = parse_config_file(path)
    kwargs = {}
    for key, (val, lineno) in raw.items():
        kwargs[_KEY_TO_FIELD.get(key, key)] = _convert(path, key, val, lineno)
    if overrides:
        kwargs.update(overrides)
    if "alpha" not in kwargs or "beta" not in kwargs:
        raise ConfigError(f"{path}: config must set alpha and beta")
    try:
        return SweepConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid configuration: {exc}") from None


def cmd_classify(args) -> int:
    r = classify(args.alpha, args.beta)
    print(f"alpha={r.alpha:g} beta={r.beta:g} gamma={r.gamma:g} regime={r.tag.value}")
    return 0


def cmd_sweep(args) -> int:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.eps is not None:
        overrides["eps_list"] = tuple(float(v) for v in args.eps.replace(",", " ").split())
    if args.regime is not None:
        try:
            a, b = (float(v) for v in args.regime.replace(",", " ").split())
        except ValueError:
            print(f"error: --regime expects 'alpha,beta', got {args.regime!r}", file=sys.stderr)
            return 1
        overrides["alpha"], overrides["beta"] = a, b
    try:
        cfg = build_sweep_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        require_solvable_config(cfg.regime())
    except WrongRegime as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run_sweep(cfg, n_threads=args.threads)
    try:
        paths = write_outputs(result, args.out)
    except OSError as exc:
        print(f"error: {args.out}: cannot write outputs: {exc.strerror}", file=sys.stderr)
        return 1
    if result.n_capped:
        print(f"warning: {result.n_capped} exponent samples hit the log-space cap "
              f"{cfg.exp_cap:g} (recorded as n_capped in the manifest); "
              "refine the grid or shrink the horizon", file=sys.stderr)
    for kind, p in paths.items():
        print(f"{kind}: {p}")
    return 0


# ---------------------------------------------------------------------------
# selftest


def _selftest_checks():
    sq = make_field("square", seed=41)
    corr = correlation_model(sq)
    zero = make_field("square", seed=41, amplitude_law="zero")

    def classify_rule():
        r = [classify(0.0, 1.0), classify(2.0, 1.0), classify(1.0, 0.0), classify(1.0, 0.7)]
        ok = ([x.gamma for x in r[:3]] == [0.5, 1.0, 0.5]
              and r[3].tag.value == "open_case")
        return ok, f"gammas={[x.gamma for x in r[:3]]}"

    def zero_field_heat():
        est = estimate_u(classify(2.0, 1.0), 0.0, 1.0, 0.4, 4000, 1, zero, "gauss")
        val = est.u_samples[0]
        target = 1.0 / math.sqrt(2.0)
        tol = 4.0 * 0.35 / math.sqrt(4000)
        return abs(val - target) < tol, f"u={val:.4f} target={target:.4f}"

    def local_time_mass():
        p = simulate_path(0.7, 333, seed=5)
        lt = local_time(p, 0.04)
        return abs(lt.total_mass() - 0.7) < 1e-12, f"mass={lt.total_mass():.15f}"

    def sigma_quad_vs_mc():
        q = sigma(SigmaVariant.HALF_ONE_SIDED, corr)
        m = sigma(SigmaVariant.HALF_ONE_SIDED, corr, method="mc", n_mc=40000, seed=3)
        return abs(q.value - m.value) < 4 * m.std_error, f"quad={q.value:.4f} mc={m.value:.4f}"

    def sigma_prime_values():
        one = sigma(SigmaVariant.PRIME_ONE_SIDED, corr).value
        two = sigma(SigmaVariant.PRIME_TWO_SIDED, corr).value
        return abs(one - 0.5) < 1e-6 and abs(two - 1.0) < 1e-6, f"one={one} two={two}"

    def dual_exponent():
        fld = make_field("c2t", seed=9)
        regime = classify(0.0, 1.0)
        eps = 0.35
        path = simulate_path(0.4, 160, seed=21)
        gaps = []
        for _ in range(2):
            d = exponent_direct(regime, 0.1, 0.4, fld, path, eps).y_value
            i = exponent_ito_trick(regime, 0.1, 0.4, fld, path, eps).y_value
            gaps.append(abs(d - i))
            path = refine_path(refine_path(path))
        return gaps[1] < gaps[0], f"gaps={gaps[0]:.4f}->{gaps[1]:.4f}"

    def riemann_variance():
        xg = np.linspace(-1.0, 1.0, 41)
        tg = np.linspace(0.0, 0.5, 65)
        ys = []
        for i in range(800):
            fld = sample_temporal_field(corr.r_of_x, xg, tg, derive_seed(77, Stream.DIAG, i))
            ys.append(riemann_integral(fld, lambda s: 0.3, 0.5, 7))
        v = float(np.var(ys, ddof=1))
        target = 0.5 * corr.r0
        return abs(v - target) < 5 * target * math.sqrt(2.0 / 800), f"var={v:.4f} target={target:.4f}"

    return [
        ("exponent rule", classify_rule),
        ("zero-field heat value", zero_field_heat),
        ("local-time mass identity", local_time_mass),
        ("sigma quadrature vs mc", sigma_quad_vs_mc),
        ("sigma prime closed form", sigma_prime_values),
        ("dual exponent refinement", dual_exponent),
        ("riemann integral variance", riemann_variance),
    ]


def cmd_selftest(args) -> int:
    all_ok = True
    for name, check in _selftest_checks():
        try:
            ok, info = check()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, info = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<28} {info}")
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="homogmc",
                                 description="epsilon-sweep laboratory for random-potential parabolic PDEs")
    sub = ap.add_subparsers(dest="command", required=True)

    p_cls = sub.add_parser("classify", help="print gamma and the regime tag")
    p_cls.add_argument("--alpha", type=float, required=True)
    p_cls.add_argument("--beta", type=float, required=True)
    p_cls.set_defaults(fn=cmd_classify)

    p_sw = sub.add_parser("sweep", help="run an epsilon sweep from a config file")
    p_sw.add_argument("--config", required=True, help="flat key = value config file")
    p_sw.add_argument("--out", required=True, help="output directory")
    p_sw.add_argument("--seed", type=int, default=None, help="override master seed")
    p_sw.add_argument("--threads", type=int, default=1, help="worker count (never changes results)")
    p_sw.add_argument("--eps", default=None, help="override epsilon ladder, e.g. '0.4,0.2,0.1'")
    p_sw.add_argument("--regime", default=None, help="override 'alpha,beta'")
    p_sw.set_defaults(fn=cmd_sweep)

    p_st = sub.add_parser("selftest", help="run the built-in example checks")
    p_st.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("HOMOG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
