"""Epsilon-sweep experiments and statistical comparators.

A sweep estimates the law of u_eps(t, x) at each epsilon of a decreasing
ladder and compares it with the predicted limit: squared error and variance
collapse in the deterministic regimes, two-sample Kolmogorov-Smirnov distance
against draws of the limit law in the SPDE regimes.  Everything is a pure
function of (config, seed): re-running a sweep, with any worker count,
reproduces the CSV byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import __version__
from .field import CorrelationModel, KernelField, correlation_model, make_field, realization_seeds, _field_values
from .fk import (
    RegimeTag,
    ScalingRegime,
    WrongRegime,
    classify,
    estimate_u_block,
    n_steps_for,
    _check_resolution,
)
from .limits import limit_u_block
from .rng import Stream, derive_seed
from .paths import simulate_path

log = logging.getLogger("homogmc")

CSV_COLUMNS = (
    "eps", "mean_u", "var_u", "ci_halfwidth",
    "ks_distance", "ks_pvalue", "exp_moment_diag", "runtime_s",
)

OPEN_CASE_MESSAGE = "the case 0 < alpha < 2*beta remains open; no limit law is available"


# ---------------------------------------------------------------------------
# statistical comparators


def ks_two_sample(a, b) -> tuple[float, float]:
    """Classical two-sample KS statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    m, n = len(a), len(b)
    if min(m, n) < 20:
        raise ValueError("need at least 20 samples per side")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / m
    cdf_b = np.searchsorted(b, pooled, side="right") / n
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(m * n / (m + n))
    return d, float(special.kolmogorov(en * d))


def ks_one_sample(x, cdf) -> tuple[float, float]:
    """One-sample KS statistic against a callable cdf."""
    x = np.sort(np.asarray(x, dtype=float))
    n = len(x)
    f = np.asarray(cdf(x), dtype=float)
    grid = np.arange(1, n + 1) / n
    d = float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))
    return d, float(special.kolmogorov(math.sqrt(n) * d))


def ks_critical_value(level: float, m: int, n: int | None = None) -> float:
    """Rejection threshold for the KS distance at the given level."""
    c = math.sqrt(-math.log(level / 2.0) / 2.0)
    scale = math.sqrt(1.0 / m) if n is None else math.sqrt((m + n) / (m * n))
    return c * scale


def loglog_slope(eps_values, stat_values) -> float:
    """Slope of log(stat) against log(eps); growth as eps decreases shows up
    as a negative slope."""
    x = np.log(np.asarray(eps_values, dtype=float))
    y = np.log(np.asarray(stat_values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# sweep configuration and result


@dataclass(frozen=True)
class SweepConfig:
    alpha: float
    beta: float
    eps_list: tuple[float, ...] = (0.4, 0.2, 0.1)
    t: float = 0.5
    x: float = 0.0
    g_name: str = "one"
    n_paths: int = 500
    n_fields: int = 100
    seed: int = 0
    kernel: str = "square"
    w_t: float = 1.0
    w_x: float = 1.0
    theta: float = 0.5
    amplitude_law: str = "rademacher"
    amplitude: float = 1.0
    dt: float | None = None
    exp_cap: float = 700.0
    name: str = "sweep"
    spatial_dy: float = 0.05
    spatial_t_steps: int = 50
    path_steps: int | None = None
    riemann_level: int = 7
    x_step: float = 0.05
    x_pad: float = 6.0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        if not eps or any(e <= 0 for e in eps) or any(
            eps[i + 1] >= eps[i] for i in range(len(eps) - 1)
        ):
            raise ValueError("eps_list must be positive and strictly decreasing")
        if self.n_paths < 1 or self.n_fields < 1:
            raise ValueError("budgets must be >= 1")

    def field_spec(self) -> KernelField:
        return make_field(self.kernel, seed=self.seed, w_t=self.w_t, w_x=self.w_x,
                          theta=self.theta, amplitude_law=self.amplitude_law,
                          amplitude=self.amplitude)

    def regime(self) -> ScalingRegime:
        return classify(self.alpha, self.beta)

    def limit_opts(self) -> dict:
        return dict(spatial_dy=self.spatial_dy, spatial_t_steps=self.spatial_t_steps,
                    path_steps=self.path_steps, riemann_level=self.riemann_level,
                    x_step=self.x_step, x_pad=self.x_pad)


@dataclass(frozen=True)
class SweepRow:
    eps: float
    mean_u: float
    var_u: float
    ci_halfwidth: float
    ks_distance: float
    ks_pvalue: float
    exp_moment_diag: float
    runtime_s: float


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[SweepRow]
    u_samples: dict[float, np.ndarray]
    limit_samples: dict[float, np.ndarray]
    targets: dict[str, float]
    runtimes_s: list[float]
    n_capped: int
    n_capped4: int

    def csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            lines.append(",".join(_fmt(getattr(r, c)) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def require_solvable_config(regime: ScalingRegime) -> None:
    if regime.tag is RegimeTag.OPEN_CASE:
        raise WrongRegime(OPEN_CASE_MESSAGE)
    if regime.tag is RegimeTag.DEGENERATE:
        raise WrongRegime("alpha = beta = 0 is a degenerate scaling with no oscillation")


# worker tasks must be module-level for process pools


def _sim_task(args) -> tuple[int, np.ndarray, np.ndarray, int, int]:
    cfg, eps, eps_idx, n_steps, lo, hi = args
    regime = cfg.regime()
    spec = cfg.field_spec().with_seed(derive_seed(cfg.seed, Stream.FIELD_REALIZATION, eps_idx))
    est = estimate_u_block(regime, cfg.x, cfg.t, eps, spec, cfg.n_paths, n_steps,
                           cfg.g_name, lo, hi, cfg.exp_cap)
    return lo, est.u_samples, est.exp4_moments, est.n_capped, est.n_capped4


def _limit_task(args) -> tuple[int, np.ndarray]:
    cfg, eps_idx, lo, hi = args
    regime = cfg.regime()
    corr = correlation_model(cfg.field_spec())
    seed = derive_seed(cfg.seed, Stream.SWEEP_LIMIT, eps_idx)
    vals = limit_u_block(regime, corr, cfg.x, cfg.t, cfg.g_name, cfg.n_paths,
                         seed, lo, hi, **cfg.limit_opts())
    return lo, vals


def _run_blocks(task_fn, arg_list, n_threads: int):
    if n_threads <= 1 or len(arg_list) <= 1:
        return [task_fn(a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(task_fn, arg_list))


def _blocks(n: int, n_threads: int) -> list[tuple[int, int]]:
    n_blocks = max(1, min(n, n_threads * 4))
    edges = np.linspace(0, n, n_blocks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_sweep(cfg: SweepConfig, n_threads: int = 1) -> SweepResult:
    """Run the full epsilon ladder; one u_eps sample per medium realization,
    compared against the regime's limit law."""
    regime = cfg.regime()
    require_solvable_config(regime)
    corr = correlation_model(cfg.field_spec())
    deterministic = regime.tag in (RegimeTag.DETERMINISTIC_2B, RegimeTag.DETERMINISTIC_STRICT)
    targets: dict[str, float] = {}
    if deterministic and corr.sigma_xi2 > 0.0:
        from .limits import sigma_for_regime

        s_one = sigma_for_regime(regime, corr, "one")
        s_two = sigma_for_regime(regime, corr, "two")
        targets = {
            "sigma_one_sided": s_one,
            "sigma_two_sided": s_two,
            "limit_one_sided": _heat_value(cfg) * math.exp(cfg.t * s_one),
            "limit_two_sided": _heat_value(cfg) * math.exp(cfg.t * s_two),
        }
    rows: list[SweepRow] = []
    u_samples: dict[float, np.ndarray] = {}
    limit_samples: dict[float, np.ndarray] = {}
    runtimes: list[float] = []
    capped = capped4 = 0
    for eps_idx, eps in enumerate(cfg.eps_list):
        t0 = time.perf_counter()
        n_steps = n_steps_for(regime, cfg.t, eps, cfg.dt)
        _check_resolution(regime, cfg.t / n_steps, eps)
        sim_args = [(cfg, eps, eps_idx, n_steps, lo, hi)
                    for lo, hi in _blocks(cfg.n_fields, n_threads)]
        u = np.empty(cfg.n_fields)
        e4 = np.empty(cfg.n_fields)
        for lo, ub, e4b, c1, c4 in _run_blocks(_sim_task, sim_args, n_threads):
            u[lo:lo + len(ub)] = ub
            e4[lo:lo + len(e4b)] = e4b
            capped += c1
            capped4 += c4
        u_samples[eps] = u
        if deterministic:
            ks_d = ks_p = float("nan")
        else:
            lim_args = [(cfg, eps_idx, lo, hi) for lo, hi in _blocks(cfg.n_fields, n_threads)]
            lim = np.empty(cfg.n_fields)
            for lo, vals in _run_blocks(_limit_task, lim_args, n_threads):
                lim[lo:lo + len(vals)] = vals
            limit_samples[eps] = lim
            ks_d, ks_p = ks_two_sample(u, lim)
        var_u = float(u.var(ddof=1)) if cfg.n_fields > 1 else float("nan")
        ci = (1.96 * math.sqrt(var_u / cfg.n_fields)) if cfg.n_fields > 1 else float("nan")
        elapsed = time.perf_counter() - t0
        runtimes.append(elapsed)
        # across-fields mean of the per-field path means: the max is dominated
        # by the heavy upper tail of exp(4Y) at these path budgets
        rows.append(SweepRow(eps, float(u.mean()), var_u, ci, ks_d, ks_p,
                             float(e4.mean()), float("nan")))
        log.info("eps=%g done in %.1fs (n_steps=%d)", eps, elapsed, n_steps)
    return SweepResult(cfg, rows, u_samples, limit_samples, targets, runtimes,
                       capped, capped4)


def _heat_value(cfg: SweepConfig) -> float:
    from .limits import heat_expectation

    return heat_expectation(cfg.g_name, cfg.x, cfg.t)


# ---------------------------------------------------------------------------
# persistence: CSV + JSONL manifest (+ raw samples for histogram overlays)


def write_outputs(result: SweepResult, out_dir: str, save_samples: bool = True) -> dict[str, str]:
    """Write <name>.csv, append one line to <name>.manifest.json, optionally
    write <name>_samples.csv; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    csv_path = os.path.join(out_dir, f"{cfg.name}.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.csv_text())
    paths = {"csv": csv_path}
    if save_samples:
        sp = os.path.join(out_dir, f"{cfg.name}_samples.csv")
        with open(sp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("eps,kind,value\n")
            for eps in cfg.eps_list:
                for v in result.u_samples[eps]:
                    fh.write(f"{_fmt(eps)},sim,{_fmt(v)}\n")
                for v in result.limit_samples.get(eps, ()):
                    fh.write(f"{_fmt(eps)},limit,{_fmt(v)}\n")
        paths["samples"] = sp
    manifest_path = os.path.join(out_dir, f"{cfg.name}.manifest.json")
    entry = {
        "schema": "homogmc-sweep-manifest/1",
        "version": __version__,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": dataclasses.asdict(cfg),
        "seed": cfg.seed,
        "regime": cfg.regime().tag.value,
        "gamma": cfg.regime().gamma,
        "targets": result.targets,
        "runtimes_s": [round(r, 3) for r in result.runtimes_s],
        "n_capped": result.n_capped,
        "n_capped4": result.n_capped4,
        "outputs": dict(paths),
    }
    with open(manifest_path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")
    paths["manifest"] = manifest_path
    return paths


# ---------------------------------------------------------------------------
# Gaussian CLT check (strict deterministic regime)


@dataclass(frozen=True)
class GaussianCltReport:
    eps: float
    t: float
    n_fields: int
    sample_variance: float
    sigma2_one: float
    sigma2_two: float
    ks_one: float
    p_one: float
    ks_two: float
    p_two: float
    best_variant: str
    degenerate: bool
    y_samples: np.ndarray


def gaussian_limit_check(field_spec: KernelField, corr: CorrelationModel, eps: float,
                         t: float, n_fields: int, alpha: float = 1.0, beta: float = 0.25,
                         x: float = 0.0, dt: float | None = None,
                         path_seed: int = 1) -> GaussianCltReport:
    """Sample the exponent across medium realizations on one fixed path and
    test it against the centered Gaussian law with variance t * sigma'^2, for
    both one- and two-sided sigma' variants."""
    regime = classify(alpha, beta)
    if regime.tag is not RegimeTag.DETERMINISTIC_STRICT:
        raise WrongRegime("the Gaussian check targets the strict regime 0 < 2*beta < alpha")
    n_steps = n_steps_for(regime, t, eps, dt)
    _check_resolution(regime, t / n_steps, eps)
    path = simulate_path(t, n_steps, path_seed)
    seeds = realization_seeds(field_spec, n_fields)
    dt_val = path.dt
    t_arg = (0.5 * (path.times[:-1] + path.times[1:]) / eps**alpha)[None, :]
    x_arg = ((x + path.values[:-1]) / eps**beta)[None, :]
    c = _field_values(field_spec, seeds[:, None], t_arg, x_arg)
    y = eps**-regime.gamma * dt_val * c.sum(axis=1)
    if np.allclose(y, 0.0):
        return GaussianCltReport(eps, t, n_fields, 0.0, corr.sigma_one_sided,
                                 corr.sigma_two_sided, float("nan"), float("nan"),
                                 float("nan"), float("nan"), "degenerate", True, y)
    from scipy.stats import norm

    s2_one, s2_two = corr.sigma_one_sided, corr.sigma_two_sided
    ks1, p1 = ks_one_sample(y, lambda v: norm.cdf(v, scale=math.sqrt(t * s2_one)))
    ks2, p2 = ks_one_sample(y, lambda v: norm.cdf(v, scale=math.sqrt(t * s2_two)))
    best = "one_sided" if ks1 <= ks2 else "two_sided"
    return GaussianCltReport(eps, t, n_fields, float(y.var(ddof=1)), s2_one, s2_two,
                             ks1, p1, ks2, p2, best, False, y)


# ---------------------------------------------------------------------------
# tightness diagnostics (alpha = 0 normalization)


@dataclass(frozen=True)
class TightnessStats:
    """Weighted-sup statistics of the scaled spatial primitive of the field."""

    eps: float
    window: float
    gamma_tilde: float
    zeta_p99: float  # sup_x |W_eps(0, x)| / (1+|x|)^(1-gamma)
    xi_p99: float    # time-uniform version over [0, t]
    eta_p99: float   # same for the time derivative
    zeta: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    sup_w: np.ndarray  # unweighted sup_x |W_eps(0, x)| per realization


def tightness_diag(field_spec: KernelField, eps_list, t: float, window: float,
                   gamma_tilde: float = 0.25, n_seeds: int = 200, n_time: int = 9,
                   quad_per_eps: int = 8, seed_stream: Stream = Stream.DIAG) -> list[TightnessStats]:
    """Per epsilon, the 99th percentile across medium realizations of the
    tightness statistics, computed over the given spatial window."""
    if not (0.0 < gamma_tilde < 0.5):
        raise ValueError("gamma_tilde must lie in (0, 1/2)")
    if not field_spec.kernel_t.smooth and field_spec.amplitude_law != "zero":
        raise ValueError("tightness diagnostics need a field that is C2 in time")
    seeds = realization_seeds(field_spec, n_seeds, seed_stream)
    s_grid = np.linspace(0.0, t, n_time)
    out = []
    for eps in eps_list:
        dyq = eps / quad_per_eps
        m = int(np.ceil(window / dyq))
        nodes = dyq * np.arange(-m, m + 1)
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        weight = (1.0 + np.abs(nodes)) ** (1.0 - gamma_tilde)

        def w_abs(t_deriv: int) -> np.ndarray:
            c = _field_values(field_spec, seeds[:, None, None], s_grid[None, :, None],
                              mids[None, None, :] / eps, t_deriv=t_deriv)
            pref = np.concatenate(
                [np.zeros(c.shape[:2] + (1,)), np.cumsum(c, axis=2) * dyq], axis=2
            )
            return np.abs(pref - pref[:, :, m][:, :, None]) / math.sqrt(eps)

        w0 = w_abs(0)
        ratio = w0 / weight
        zeta = ratio[:, 0, :].max(axis=1)
        xi = ratio.max(axis=(1, 2))
        eta = (w_abs(1) / weight).max(axis=(1, 2))
        out.append(TightnessStats(
            eps, window, gamma_tilde,
            float(np.percentile(zeta, 99)), float(np.percentile(xi, 99)),
            float(np.percentile(eta, 99)), zeta, xi, eta, w0[:, 0, :].max(axis=1),
        ))
    return out


def inner_budget_check(cfg: SweepConfig, eps: float, n_threads: int = 1) -> dict[str, float]:
    """Budget-sufficiency diagnostic: the SPDE-regime KS distance should be
    stable (within sampling noise) when the inner path budget is halved."""
    regime = cfg.regime()
    if regime.tag not in (RegimeTag.SPATIAL_SPDE, RegimeTag.TEMPORAL_SPDE):
        raise WrongRegime("budget check applies to the SPDE regimes")
    full = run_sweep(dataclasses.replace(cfg, eps_list=(eps,)), n_threads)
    half = run_sweep(dataclasses.replace(cfg, eps_list=(eps,), n_paths=max(1, cfg.n_paths // 2)),
                     n_threads)
    noise = ks_critical_value(0.32, cfg.n_fields, cfg.n_fields)  # ~1 sigma of the KS statistic
    return {
        "ks_full": full.rows[0].ks_distance,
        "ks_half": half.rows[0].ks_distance,
        "noise_scale": noise,
    }
