"""Limit objects of the epsilon -> 0 theory.

Three families, by regime:

* deterministic regimes: effective constants.  Sigma' integrates the
  correlation at zero spatial lag; the critical-case Sigma integrates the
  correlation along a Brownian displacement (heat-kernel smoothing).  Both
  come in one- and two-sided time-integral variants, computed by quadrature
  and by Monte Carlo; the sweep experiments arbitrate empirically which
  variant matches the data.
* alpha = 0: a Gaussian field W(t, x), Brownian in x on each side of the
  origin with temporally correlated increments, integrated against local
  time: Lambda = int int L(ds, y - x) W(s, dy).
* beta = 0: a Gaussian field, Brownian in t with spatial correlation R,
  integrated along a path by left-point Riemann sums on dyadic grids.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .field import CorrelationModel, QuadratureError, SquareKernel
from .fk import RegimeTag, ScalingRegime, WrongRegime, initial_condition
from .paths import LocalTimeGrid, simulate_path_values
from .rng import Stream, derive_seed, generator


class CholeskyFailure(RuntimeError):
    """Covariance matrix not positive semidefinite after jitter."""


class GridMismatch(ValueError):
    """Field and local-time (or path) grids are incompatible."""


class MollifierTooNarrow(ValueError):
    """Mollifier width below twice the spatial grid step."""


class LevelTooFine(ValueError):
    """Dyadic Riemann level finer than the field's time grid."""


# ---------------------------------------------------------------------------
# effective constants


class SigmaVariant(enum.Enum):
    PRIME_ONE_SIDED = "prime_one_sided"
    PRIME_TWO_SIDED = "prime_two_sided"
    HALF_ONE_SIDED = "half_one_sided"
    HALF_TWO_SIDED = "half_two_sided"


@dataclass(frozen=True)
class EffectiveConstant:
    value: float
    variant: SigmaVariant
    method: str
    std_error: float | None = None


_HG_X, _HG_W = np.polynomial.hermite.hermgauss(128)


def heat_expectation(g, x: float, t: float) -> float:
    """E g(x + B_t) by Gauss-Hermite quadrature."""
    g_fn = initial_condition(g)
    pts = x + math.sqrt(2.0 * t) * _HG_X
    return float((g_fn(pts) * _HG_W).sum() / math.sqrt(math.pi))


def _gauss_smoothed_autocorr(kernel_x, s: float, grid=None) -> float:
    """E a_x(s Z) for standard normal Z, a_x the spatial autocorrelation."""
    if s == 0.0:
        return float(kernel_x.autocorr(0.0))
    w = kernel_x.width
    if isinstance(kernel_x, SquareKernel):
        # E (w - |s Z|)_+ in closed form
        r = w / s
        return w * (2.0 * special.ndtr(r) - 1.0) - s * math.sqrt(2.0 / math.pi) * (
            1.0 - math.exp(-0.5 * r * r)
        )
    if kernel_x.smooth:
        vals = kernel_x.autocorr(math.sqrt(2.0) * s * _HG_X)
        return float((vals * _HG_W).sum() / math.sqrt(math.pi))
    ygrid, avals = grid
    pdf = np.exp(-0.5 * (ygrid / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
    return float(np.trapezoid(avals * pdf, ygrid))


def _autocorr_grid(kernel_x):
    w = kernel_x.width
    ygrid = np.linspace(-w, w, 2001)
    return ygrid, kernel_x.autocorr(ygrid)


def sigma(variant: SigmaVariant, corr: CorrelationModel, method: str = "quadrature",
          n_mc: int = 100_000, seed: int = 0) -> EffectiveConstant:
    """Effective constant for the deterministic limits.

    PRIME variants integrate phi(u, 0) over time; HALF variants integrate
    E phi(u, B_u) (the critical-case constant).  Two-sided values are twice
    the one-sided ones by the time symmetry of the correlation.
    """
    two_sided = variant in (SigmaVariant.PRIME_TWO_SIDED, SigmaVariant.HALF_TWO_SIDED)
    is_half = variant in (SigmaVariant.HALF_ONE_SIDED, SigmaVariant.HALF_TWO_SIDED)
    w = corr.spec.kernel_t.width
    factor = 2.0 if two_sided else 1.0
    if corr.sigma_xi2 == 0.0:
        return EffectiveConstant(0.0, variant, method, 0.0 if method == "mc" else None)
    if method == "quadrature":
        if not is_half:
            return EffectiveConstant(factor * corr.sigma_one_sided, variant, method)
        kx = corr.spec.kernel_x
        grid = None if (isinstance(kx, SquareKernel) or kx.smooth) else _autocorr_grid(kx)

        def integrand(u: float) -> float:
            return float(corr.spec.kernel_t.autocorr(u)) * _gauss_smoothed_autocorr(
                kx, math.sqrt(u), grid
            )

        val, err = integrate.quad(integrand, 0.0, w, epsabs=1e-13, epsrel=1e-10, limit=200)
        val *= corr.sigma_xi2
        if err * corr.sigma_xi2 > 1e-8 * max(abs(val), 1e-9):
            raise QuadratureError("sigma quadrature did not converge")
        return EffectiveConstant(factor * val, variant, method)
    if method != "mc":
        raise ValueError("method must be 'quadrature' or 'mc'")
    rng = generator(seed, Stream.SIGMA_MC)
    u = rng.uniform(0.0, w, n_mc)
    if is_half:
        z = rng.standard_normal(n_mc)
        samples = w * corr.phi(u, np.sqrt(u) * z)
    else:
        samples = w * corr.phi(u, 0.0)
    one = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(n_mc))
    return EffectiveConstant(factor * one, variant, method, factor * se)


def sigma_for_regime(regime: ScalingRegime, corr: CorrelationModel, side: str = "one") -> float:
    """The Sigma entering exp(t Sigma) for a deterministic regime."""
    if regime.tag is RegimeTag.DETERMINISTIC_2B:
        v = SigmaVariant.HALF_ONE_SIDED if side == "one" else SigmaVariant.HALF_TWO_SIDED
    elif regime.tag is RegimeTag.DETERMINISTIC_STRICT:
        v = SigmaVariant.PRIME_ONE_SIDED if side == "one" else SigmaVariant.PRIME_TWO_SIDED
    else:
        raise WrongRegime("effective constants exist only in the deterministic regimes")
    return sigma(v, corr).value


def _chol_psd(c: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * max(1.0, float(np.max(np.diag(c))))
    try:
        return np.linalg.cholesky(c + jitter * np.eye(len(c)))
    except np.linalg.LinAlgError:
        raise CholeskyFailure(f"{what} covariance not PSD after 1e-10 jitter") from None


# ---------------------------------------------------------------------------
# spatial limit field (alpha = 0) and the local-time integral


@dataclass(frozen=True)
class SpatialLimitField:
    """Increment representation of the limit field of the alpha = 0 regime.

    ``increments[j, k]`` is the spatial increment of W(t_k, .) over cell j;
    cells are independent (the covariance is Brownian in x), each cell's time
    vector is stationary Gaussian with covariance psi(t_k - t_m) * dy, and
    cells on opposite sides of the origin are independent, which realizes the
    zero covariance across 0.
    """

    t_grid: np.ndarray
    edges: np.ndarray
    increments: np.ndarray
    seed: int

    @property
    def dy(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def w_at_edges(self) -> np.ndarray:
        """W(t_k, edge_m): the signed integral of increments from 0."""
        n_t = len(self.t_grid)
        pref = np.concatenate(
            [np.zeros((1, n_t)), np.cumsum(self.increments, axis=0)], axis=0
        ).T  # (n_t, n_edges)
        i0 = int(np.argmin(np.abs(self.edges)))
        return pref - pref[:, i0][:, None]


def spatial_edges(lo: float, hi: float, dy: float) -> np.ndarray:
    """Uniform cell edges on integer multiples of dy, so 0 is an edge."""
    n_lo = int(np.floor(lo / dy))
    n_hi = int(np.ceil(hi / dy))
    return dy * np.arange(n_lo, n_hi + 1)


def _psi_chol(psi, t_grid: np.ndarray, dy: float) -> np.ndarray:
    cov = np.asarray(psi(t_grid[:, None] - t_grid[None, :]), dtype=float) * dy
    return _chol_psd(cov, "temporal (psi)")


def sample_spatial_field(psi, t_grid, edges, seed: int) -> SpatialLimitField:
    """Draw the limit field on given grids; psi is the temporal covariance
    density (Psi of the correlation model)."""
    t_grid = np.asarray(t_grid, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if np.min(np.abs(edges)) > 1e-9:
        raise GridMismatch("cell edges must contain 0 (sign split of the field)")
    chol = _psi_chol(psi, t_grid, float(edges[1] - edges[0]))
    rng = generator(seed, Stream.LIMIT_FIELD)
    z = rng.standard_normal((len(edges) - 1, len(t_grid)))
    return SpatialLimitField(t_grid, edges, z @ chol.T, seed)


def _field_time_rows(lt_times: np.ndarray, t_grid: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(lt_times, t_grid - 1e-12)
    if idx.max() >= len(lt_times) or np.max(np.abs(lt_times[idx] - t_grid)) > 1e-9:
        raise GridMismatch("local-time grid does not contain the field's time grid")
    return idx


def lambda_integral(field: SpatialLimitField, lt: LocalTimeGrid, x: float = 0.0) -> float:
    """Lambda_{t,x}(L) = sum_k sum_j [L(t_{k+1}, y_j - x) - L(t_k, y_j - x)]
    * dW_j(t_k); linear in both the local time and the field."""
    if len(lt.edges) != len(field.edges) or np.max(np.abs(lt.edges - (field.edges - x))) > 1e-9:
        raise GridMismatch("local-time bins must be the field cells shifted by x")
    rows = _field_time_rows(lt.times, field.t_grid)
    dl = np.diff(lt.masses[rows], axis=0)  # (n_t - 1, n_cells)
    return float(np.einsum("kj,jk->", dl, field.increments[:, : len(rows) - 1]))


# mollified construction: rho is the standard smooth bump


def _bump_raw(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - u[m] ** 2))
    return out


@functools.lru_cache(maxsize=1)
def _bump_norm() -> float:
    val, _ = integrate.quad(lambda v: float(_bump_raw(np.asarray(v))), -1.0, 1.0,
                            epsabs=1e-14, epsrel=1e-12)
    return val


def mollifier(u, n: int):
    """rho_n(u) = n rho(n u), unit mass, support (-1/n, 1/n)."""
    return n * _bump_raw(n * np.asarray(u, dtype=float)) / _bump_norm()


def mollifier_dx(u, n: int):
    v = n * np.asarray(u, dtype=float)
    core = _bump_raw(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(np.abs(v) < 1.0, -2.0 * v / (1.0 - v**2) ** 2, 0.0)
    return n * n * core * d / _bump_norm()


def lambda_mollified(field: SpatialLimitField, lt: LocalTimeGrid, x: float, n: int) -> float:
    """Local-time integral against the mollified field derivative dW_n/dx;
    converges to lambda_integral on the same seeds as the width 1/n shrinks."""
    dy = field.dy
    if 1.0 / n < 2.0 * dy:
        raise MollifierTooNarrow(f"mollifier width 1/{n} below 2 dy = {2 * dy:g}")
    if len(lt.edges) != len(field.edges) or np.max(np.abs(lt.edges - (field.edges - x))) > 1e-9:
        raise GridMismatch("local-time bins must be the field cells shifted by x")
    rows = _field_time_rows(lt.times, field.t_grid)
    dl = np.diff(lt.masses[rows], axis=0)
    w_edges = field.w_at_edges()  # (n_t, n_edges)
    conv = mollifier_dx(field.centers[:, None] - field.edges[None, :], n) * dy  # (n_cells, n_edges)
    dwn = w_edges @ conv.T  # (n_t, n_cells)
    return float((dl * dwn[: len(rows) - 1] * dy).sum())


def mollifier_pairing_identity(n: int, m: int, y: float, yp: float) -> tuple[float, float]:
    """Both sides of the integration-by-parts identity

        int int 1_{z z' > 0} (|z| ^ |z'|) rho_n'(y - z) rho_m'(y' - z') dz dz'
            = int rho_n(y - z) rho_m(y' - z) dz,

    evaluated by adaptive quadrature (supports must not straddle 0)."""
    a1, b1 = y - 1.0 / n, y + 1.0 / n
    a2, b2 = yp - 1.0 / m, yp + 1.0 / m
    if a1 < 0.0 < b1 or a2 < 0.0 < b2:
        raise ValueError("choose y, y' with mollifier supports off the origin")
    if b1 < 0.0 and b2 < 0.0:
        # mirror through 0; the kernel is symmetric under (z, z') -> (-z, -z')
        return mollifier_pairing_identity(n, m, -y, -yp)
    if (b1 < 0.0) != (b2 < 0.0):
        lhs = 0.0  # opposite signs: the indicator kills the double integral
    else:
        def f_low(z):  # z' < z half: min(|z|, |z'|) = z'
            if min(b2, z) <= a2:
                return 0.0
            val, _ = integrate.quad(
                lambda zp: zp * float(mollifier_dx(yp - zp, m)), a2, min(b2, z),
                epsabs=1e-12, epsrel=1e-10,
            )
            return val * float(mollifier_dx(y - z, n))

        def f_high(z):  # z' >= z half: min(|z|, |z'|) = z
            if b2 <= max(a2, z):
                return 0.0
            val, _ = integrate.quad(
                lambda zp: float(mollifier_dx(yp - zp, m)), max(a2, z), b2,
                epsabs=1e-12, epsrel=1e-10,
            )
            return z * val * float(mollifier_dx(y - z, n))

        lo_val, _ = integrate.quad(f_low, a1, b1, epsabs=1e-10, epsrel=1e-9, limit=200)
        hi_val, _ = integrate.quad(f_high, a1, b1, epsabs=1e-10, epsrel=1e-9, limit=200)
        lhs = lo_val + hi_val
    lo, hi = max(a1, a2), min(b1, b2)
    if lo >= hi:
        rhs = 0.0
    else:
        rhs, _ = integrate.quad(
            lambda z: float(mollifier(y - z, n)) * float(mollifier(yp - z, m)),
            lo, hi, epsabs=1e-12, epsrel=1e-10,
        )
    return lhs, rhs


# ---------------------------------------------------------------------------
# temporal limit field (beta = 0) and the Riemann-sum integral


@dataclass(frozen=True)
class TemporalLimitField:
    """Brownian-in-time Gaussian field with spatial covariance R(x - x')."""

    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray  # (n_t, n_x)
    seed: int

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0]) if len(self.x_grid) > 1 else 0.0


def _r_chol(r_fn, x_grid: np.ndarray) -> np.ndarray:
    cov = np.asarray(r_fn(x_grid[:, None] - x_grid[None, :]), dtype=float)
    return _chol_psd(cov, "spatial (R)")


def sample_temporal_field(r_fn, x_grid, t_grid, seed: int) -> TemporalLimitField:
    """Common Brownian increments across sites, correlated by the Cholesky
    factor of [R(x_i - x_j)]."""
    x_grid = np.asarray(x_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if abs(t_grid[0]) > 1e-12:
        raise GridMismatch("temporal field grid must start at t = 0")
    chol = _r_chol(r_fn, x_grid)
    rng = generator(seed, Stream.LIMIT_FIELD)
    z = rng.standard_normal((len(t_grid) - 1, len(x_grid)))
    incr = (z @ chol.T) * np.sqrt(np.diff(t_grid))[:, None]
    values = np.concatenate([np.zeros((1, len(x_grid))), np.cumsum(incr, axis=0)], axis=0)
    return TemporalLimitField(t_grid, x_grid, values, seed)


def _riemann_indices(field: TemporalLimitField, t: float, n: int) -> tuple[int, int]:
    dt_r = 2.0**-n
    h = field.dt
    if dt_r < h - 1e-12:
        raise LevelTooFine(f"2^-{n} is finer than the field time step {h:g}")
    ratio = dt_r / h
    r = round(ratio)
    if abs(ratio - r) > 1e-9:
        raise GridMismatch("dyadic level does not align with the field time grid")
    k_max = int(np.floor(t * 2.0**n + 1e-9))
    if k_max * r > len(field.t_grid) - 1:
        raise GridMismatch("field time grid shorter than requested horizon")
    return k_max, r


def riemann_integral_batch(field: TemporalLimitField, positions: np.ndarray,
                           t: float, n: int) -> np.ndarray:
    """Left-point dyadic sums sum_k [W(k 2^-n, f_k) - W((k-1) 2^-n, f_k)] for
    a batch of position arrays f (shape (n_paths, K), f_k at time k 2^-n);
    spatial lookup at the nearest grid site."""
    k_max, r = _riemann_indices(field, t, n)
    if positions.shape[1] != k_max:
        raise GridMismatch(f"need positions at the {k_max} dyadic times")
    x0 = field.x_grid[0]
    dx = field.dx if field.dx > 0 else 1.0
    site = np.clip(np.round((positions - x0) / dx).astype(np.int64), 0, len(field.x_grid) - 1)
    tidx = r * np.arange(1, k_max + 1)
    hi = field.values[tidx[None, :], site]
    lo = field.values[(tidx - r)[None, :], site]
    return (hi - lo).sum(axis=1)


def riemann_integral(field: TemporalLimitField, f, t: float, n: int) -> float:
    """Single-path version; f may be a callable s -> f(s), a PathGrid, or an
    array of positions at the dyadic times k 2^-n, k = 1..[t 2^n]."""
    k_max, _ = _riemann_indices(field, t, n)
    times = 2.0**-n * np.arange(1, k_max + 1)
    if callable(f):
        pos = np.asarray([f(s) for s in times], dtype=float)
    elif hasattr(f, "times") and hasattr(f, "values"):
        pos = np.interp(times, f.times, f.values)
    else:
        pos = np.asarray(f, dtype=float)
    return float(riemann_integral_batch(field, pos[None, :], t, n)[0])


# ---------------------------------------------------------------------------
# limit-law samples of u


def _spatial_bin_exponents(chol: np.ndarray, edges: np.ndarray, t_grid: np.ndarray,
                           x: float, path_values: np.ndarray, dt: float,
                           field_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw one spatial field (given its temporal Cholesky factor) and gather
    Lambda for every path in the batch; returns (Lambda, increments)."""
    n_cells = len(edges) - 1
    rng = generator(field_seed, Stream.LIMIT_FIELD)
    inc = rng.standard_normal((n_cells, len(t_grid))) @ chol.T
    dy = edges[1] - edges[0]
    pos = x + path_values[:, :-1]
    bins = np.floor((pos - edges[0]) / dy).astype(np.int64)
    if bins.min() < 0 or bins.max() >= n_cells:
        raise GridMismatch("path leaves the spatial field grid; widen x_pad")
    n_steps = path_values.shape[1] - 1
    h = t_grid[1] - t_grid[0]
    kf = np.minimum((np.arange(n_steps) * dt / h).astype(np.int64), len(t_grid) - 2)
    lam = (dt / dy) * inc[bins, kf[None, :]].sum(axis=1)
    return lam, inc


def limit_u_block(regime: ScalingRegime, corr: CorrelationModel, x: float, t: float,
                  g, n_paths: int, seed: int, idx_lo: int, idx_hi: int,
                  sigma_side: str = "one", spatial_dy: float = 0.05,
                  spatial_t_steps: int = 50, path_steps: int | None = None,
                  riemann_level: int = 7, x_step: float = 0.05,
                  x_pad: float = 6.0) -> np.ndarray:
    """Samples of the limit law of u(t, x), one per limit-field realization
    (indices idx_lo..idx_hi-1); deterministic regimes return the constant."""
    g_fn = initial_condition(g)
    n = idx_hi - idx_lo
    if regime.tag in (RegimeTag.DETERMINISTIC_2B, RegimeTag.DETERMINISTIC_STRICT):
        val = heat_expectation(g_fn, x, t) * math.exp(t * sigma_for_regime(regime, corr, sigma_side))
        return np.full(n, val)
    half_width = x_pad * math.sqrt(t) + 1.0
    out = np.empty(n)
    if regime.tag is RegimeTag.SPATIAL_SPDE:
        edges = spatial_edges(x - half_width, x + half_width, spatial_dy)
        t_grid = np.linspace(0.0, t, spatial_t_steps + 1)
        chol = _psi_chol(corr.psi, t_grid, spatial_dy)
        n_steps = path_steps or max(20 * spatial_t_steps, 400)
        dt = t / n_steps
        for k, idx in enumerate(range(idx_lo, idx_hi)):
            pv = simulate_path_values(t, n_steps, derive_seed(seed, Stream.SWEEP_PATHS, idx), n_paths)
            lam, _ = _spatial_bin_exponents(
                chol, edges, t_grid, x, pv, dt, derive_seed(seed, Stream.LIMIT_FIELD, idx)
            )
            out[k] = float((g_fn(x + pv[:, -1]) * np.exp(lam)).mean())
        return out
    if regime.tag is RegimeTag.TEMPORAL_SPDE:
        k_max = t * 2.0**riemann_level
        if abs(k_max - round(k_max)) > 1e-9:
            raise GridMismatch("t must be a multiple of 2^-riemann_level")
        k_max = int(round(k_max))
        m = int(np.ceil(half_width / x_step))
        x_grid = x + x_step * np.arange(-m, m + 1)
        t_grid = 2.0**-riemann_level * np.arange(k_max + 1)
        chol = _r_chol(corr.r_of_x, x_grid)
        for k, idx in enumerate(range(idx_lo, idx_hi)):
            rng = generator(derive_seed(seed, Stream.LIMIT_FIELD, idx), Stream.LIMIT_FIELD)
            z = rng.standard_normal((k_max, len(x_grid)))
            values = np.concatenate(
                [np.zeros((1, len(x_grid))), np.cumsum((z @ chol.T) * math.sqrt(2.0**-riemann_level), axis=0)],
                axis=0,
            )
            fld = TemporalLimitField(t_grid, x_grid, values, idx)
            pv = simulate_path_values(t, k_max, derive_seed(seed, Stream.SWEEP_PATHS, idx), n_paths)
            y = riemann_integral_batch(fld, x + pv[:, 1:], t, riemann_level)
            out[k] = float((g_fn(x + pv[:, -1]) * np.exp(y)).mean())
        return out
    raise WrongRegime(f"no limit law for regime {regime.tag.value}")


def limit_u_samples(regime: ScalingRegime, corr: CorrelationModel, x: float, t: float,
                    g, n_paths: int, n_samples: int, seed: int, **opts) -> np.ndarray:
    return limit_u_block(regime, corr, x, t, g, n_paths, seed, 0, n_samples, **opts)


def limit_u_sample(regime: ScalingRegime, corr: CorrelationModel, x: float, t: float,
                   g, n_paths: int, seed: int, index: int = 0, **opts) -> float:
    """One draw of the limit random variable u(t, x)."""
    return float(limit_u_block(regime, corr, x, t, g, n_paths, seed, index, index + 1, **opts)[0])
