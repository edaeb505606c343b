"""Stationary bounded random potentials with closed-form correlation.

The model is lattice shot noise with a random global shift:

    c(t, x) = sum_{i,j} xi_ij * k_t(t - i - U) * k_x(x - j - V),

with iid bounded symmetric marks ``xi_ij`` addressed by a counter-based hash
of (seed, i, j), and (U, V) uniform in the unit cell.  By construction the
field is stationary, centered, uniformly bounded, and has a finite dependence
range, so the mixing hypotheses needed by every scaling regime hold with
coefficient zero beyond the range.  The correlation factorizes over the two
variables into kernel autocorrelations, which is what makes the effective
constants computable to quadrature accuracy.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .rng import Stream, hash_u64, uniform01

_LEG_NODES, _LEG_WEIGHTS = np.polynomial.legendre.leggauss(64)


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class SquareKernel:
    """Indicator of [0, width); piecewise-constant realizations."""

    width: float = 1.0
    smooth: bool = False
    theta: float = 1.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return ((u >= 0.0) & (u < self.width)).astype(float)

    def deriv(self, u):
        # a.e. derivative: zero off the jump set
        return np.zeros_like(np.asarray(u, dtype=float))

    deriv2 = deriv

    @property
    def sup(self) -> float:
        return 1.0

    def integral(self) -> float:
        return self.width

    def sq_integral(self) -> float:
        return self.width

    def autocorr(self, lag):
        lag = np.asarray(lag, dtype=float)
        return np.maximum(self.width - np.abs(lag), 0.0)


@dataclass(frozen=True)
class CosineBumpKernel:
    """sin^4 bump on [0, width): C^2 (indeed C^3) on all of R."""

    width: float = 1.0
    smooth: bool = True
    theta: float = 1.0

    def _inside(self, u):
        u = np.asarray(u, dtype=float)
        return u, (u >= 0.0) & (u < self.width)

    def __call__(self, u):
        u, m = self._inside(u)
        s = np.sin(np.pi * u / self.width)
        return np.where(m, s**4, 0.0)

    def deriv(self, u):
        u, m = self._inside(u)
        a = np.pi / self.width
        s, c = np.sin(a * u), np.cos(a * u)
        return np.where(m, 4.0 * a * s**3 * c, 0.0)

    def deriv2(self, u):
        u, m = self._inside(u)
        a = np.pi / self.width
        s, c = np.sin(a * u), np.cos(a * u)
        return np.where(m, 4.0 * a**2 * s**2 * (3.0 * c**2 - s**2), 0.0)

    @property
    def sup(self) -> float:
        return 1.0

    def integral(self) -> float:
        return 0.375 * self.width  # mean of sin^4 is 3/8

    def sq_integral(self) -> float:
        return self.width * 35.0 / 128.0  # mean of sin^8

    def autocorr(self, lag):
        # integrand is an entire formula on the overlap: Gauss-Legendre is exact
        lag = np.asarray(lag, dtype=float)
        scalar = lag.ndim == 0
        ell = np.abs(np.atleast_1d(lag))
        length = np.maximum(self.width - ell, 0.0)
        u = 0.5 * length[..., None] * (_LEG_NODES + 1.0)
        vals = self(u) * self(u + ell[..., None])
        out = 0.5 * length * (vals @ _LEG_WEIGHTS)
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class HolderBumpKernel:
    """Triangle bump raised to power theta: Holder-theta realizations."""

    width: float = 1.0
    theta: float = 1.0
    smooth: bool = False

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        m = (u >= 0.0) & (u < self.width)
        tri = np.where(m, 1.0 - np.abs(2.0 * u / self.width - 1.0), 0.0)
        return tri**self.theta

    @property
    def sup(self) -> float:
        return 1.0

    def integral(self) -> float:
        return self.width / (self.theta + 1.0)

    def sq_integral(self) -> float:
        return self.width / (2.0 * self.theta + 1.0)

    @functools.lru_cache(maxsize=4096)
    def _autocorr_scalar(self, ell: float) -> float:
        if ell >= self.width:
            return 0.0
        w = self.width
        pts = sorted(
            p for p in (0.0, 0.5 * w, w, -ell, 0.5 * w - ell, w - ell)
            if 0.0 < p < w - ell
        )
        val, err = integrate.quad(
            lambda u: self(u) * self(u + ell),
            0.0, w - ell, points=pts or None, limit=200,
            epsabs=1e-12, epsrel=1e-10,
        )
        # quad's estimate is conservative when a lag nearly coincides with a
        # kink of the power bump; 1e-7 relative is still far below MC floors
        if err > 1e-7 * max(abs(val), 1e-9):
            raise QuadratureError("kernel autocorrelation did not converge")
        return val

    @functools.cached_property
    def _autocorr_interp(self):
        # dense deterministic quadrature at construction; the autocorrelation
        # is C^(1+2*theta), so a monotone cubic through 2^12+1 nodes sits well
        # below 1e-7 absolute error
        from scipy.interpolate import PchipInterpolator

        nodes = np.linspace(0.0, self.width, 4097)
        vals = [self._autocorr_scalar(float(v)) for v in nodes]
        return PchipInterpolator(nodes, np.asarray(vals), extrapolate=False)

    def autocorr(self, lag):
        lag = np.asarray(lag, dtype=float)
        if lag.ndim == 0:
            return self._autocorr_scalar(min(float(np.abs(lag)), self.width))
        out = self._autocorr_interp(np.minimum(np.abs(lag), self.width))
        return np.nan_to_num(out, nan=0.0)


KERNELS = {
    "square": SquareKernel,
    "cosbump": CosineBumpKernel,
    "holder": HolderBumpKernel,
}

AMPLITUDE_LAWS = ("rademacher", "uniform", "zero", "const")

_MARK_TAG = np.uint64(Stream.FIELD_MARKS)


# ---------------------------------------------------------------------------
# field spec


@dataclass(frozen=True)
class KernelField:
    """Spec of one random potential; realizations are pure in (seed, t, x)."""

    kernel_t: object
    kernel_x: object
    amplitude_law: str = "rademacher"
    amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.amplitude_law not in AMPLITUDE_LAWS:
            raise ValueError(f"unknown amplitude law {self.amplitude_law!r}")
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError("amplitude must lie in [0, 1] (marks in [-1, 1])")

    @property
    def smoothness_class(self) -> str:
        if self.kernel_t.smooth:
            return "C2_in_time"
        if self.kernel_x.theta < 1.0:
            return f"Holder_theta({self.kernel_x.theta:g})"
        return "C0"

    @property
    def mark_variance(self) -> float:
        return {
            "rademacher": self.amplitude**2,
            "uniform": self.amplitude**2 / 3.0,
            "zero": 0.0,
            "const": 0.0,
        }[self.amplitude_law]

    @property
    def is_centered(self) -> bool:
        return self.amplitude_law != "const"

    @property
    def sup_bound(self) -> float:
        # at most floor(w)+1 overlapping cells per axis
        nt = int(np.floor(self.kernel_t.width)) + 1
        nx = int(np.floor(self.kernel_x.width)) + 1
        return self.amplitude * nt * nx * self.kernel_t.sup * self.kernel_x.sup

    @property
    def dependence_range(self) -> tuple[float, float]:
        """Separations beyond which evaluations share no lattice mark."""
        return (self.kernel_t.width + 1.0, self.kernel_x.width + 1.0)

    def with_seed(self, seed: int) -> "KernelField":
        return replace(self, seed=seed)


def make_field(kind: str = "square", seed: int = 0, w_t: float = 1.0,
               w_x: float = 1.0, theta: float = 0.5,
               amplitude_law: str = "rademacher",
               amplitude: float = 1.0) -> KernelField:
    """Field menu: 'square' for the deterministic-limit regimes, 'c2t' for
    the time-regular (alpha=0) machinery, 'holder' for the beta=0 regime."""
    if kind == "square":
        kt, kx = SquareKernel(w_t), SquareKernel(w_x)
    elif kind == "c2t":
        kt, kx = CosineBumpKernel(w_t), HolderBumpKernel(w_x, theta=1.0)
    elif kind == "holder":
        kt, kx = SquareKernel(w_t), HolderBumpKernel(w_x, theta=theta)
    else:
        raise ValueError(f"unknown field kind {kind!r}")
    return KernelField(kt, kx, amplitude_law, amplitude, seed)


# ---------------------------------------------------------------------------
# sampling


def _lattice_shift(seed_u64: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = uniform01(hash_u64(seed_u64, np.uint64(Stream.FIELD_SHIFT), np.uint64(0)))
    v = uniform01(hash_u64(seed_u64, np.uint64(Stream.FIELD_SHIFT), np.uint64(1)))
    return u, v


def _mark_values(law: str, amplitude: float, h: np.ndarray) -> np.ndarray:
    if law == "zero":
        return np.zeros(h.shape, dtype=float)
    if law == "const":
        return np.full(h.shape, amplitude, dtype=float)
    if law == "rademacher":
        return amplitude * (1.0 - 2.0 * (h >> np.uint64(63)).astype(np.float64))
    return amplitude * (2.0 * uniform01(h) - 1.0)  # uniform on [-amp, amp]


def _field_values(spec: KernelField, seed_u64, t, x, t_deriv: int = 0) -> np.ndarray:
    """Core evaluation, broadcasting over (seed, t, x) arrays."""
    kt_fn = (spec.kernel_t, spec.kernel_t.deriv, spec.kernel_t.deriv2)[t_deriv]
    u, v = _lattice_shift(seed_u64)
    tt = np.asarray(t, dtype=float) - u
    xx = np.asarray(x, dtype=float) - v
    i_lo = (np.floor(tt - spec.kernel_t.width) + 1.0).astype(np.int64)
    j_lo = (np.floor(xx - spec.kernel_x.width) + 1.0).astype(np.int64)
    nt = int(np.floor(spec.kernel_t.width)) + 1
    nx = int(np.floor(spec.kernel_x.width)) + 1
    out = np.zeros(np.broadcast(seed_u64, tt, xx).shape, dtype=float)
    for a in range(nt):
        i = i_lo + a
        kt = kt_fn(tt - i)
        for b in range(nx):
            j = j_lo + b
            kx = spec.kernel_x(xx - j)
            h = hash_u64(seed_u64, _MARK_TAG, i, j)
            out += _mark_values(spec.amplitude_law, spec.amplitude, h) * kt * kx
    return out


def _seed_u64(seed: int) -> np.uint64:
    return np.uint64(seed & ((1 << 64) - 1))


def sample_field(spec: KernelField, t, x) -> np.ndarray:
    """Evaluate c(t, x) pointwise; deterministic given spec.seed."""
    return _field_values(spec, _seed_u64(spec.seed), t, x)


def sample_field_dt(spec: KernelField, t, x) -> np.ndarray:
    """Evaluate the time derivative c'(t, x) from analytic kernel derivatives."""
    return _field_values(spec, _seed_u64(spec.seed), t, x, t_deriv=1)


def sample_field_dtt(spec: KernelField, t, x) -> np.ndarray:
    """Evaluate c''(t, x)."""
    return _field_values(spec, _seed_u64(spec.seed), t, x, t_deriv=2)


def realization_seeds(spec: KernelField, n: int, stream: Stream = Stream.FIELD_REALIZATION) -> np.ndarray:
    """uint64 seeds of n independent realizations derived from spec.seed."""
    return hash_u64(_seed_u64(spec.seed), np.uint64(stream), np.arange(n, dtype=np.int64))


# ---------------------------------------------------------------------------
# correlation model


@dataclass(frozen=True)
class CorrelationModel:
    """Closed-form correlation of a KernelField.

    phi(t, x) factorizes as mark variance times the two kernel
    autocorrelations; psi integrates phi over space, r_of_x over time.
    The sigma constants are the one- and two-sided time integrals of
    phi(., 0) computed by adaptive quadrature.
    """

    spec: KernelField
    sigma_xi2: float
    sigma_one_sided: float
    sigma_two_sided: float

    def phi(self, t, x):
        return self.sigma_xi2 * self.spec.kernel_t.autocorr(t) * self.spec.kernel_x.autocorr(x)

    def psi(self, r):
        return self.sigma_xi2 * self.spec.kernel_t.autocorr(r) * self.spec.kernel_x.integral() ** 2

    def r_of_x(self, x):
        return self.sigma_xi2 * self.spec.kernel_t.integral() ** 2 * self.spec.kernel_x.autocorr(x)

    @property
    def phi00(self) -> float:
        """Pointwise variance of the field."""
        return self.sigma_xi2 * self.spec.kernel_t.sq_integral() * self.spec.kernel_x.sq_integral()

    @property
    def psi0(self) -> float:
        return float(self.psi(0.0))

    @property
    def r0(self) -> float:
        return float(self.r_of_x(0.0))


def correlation_model(spec: KernelField) -> CorrelationModel:
    """Build the CorrelationModel; quadratures to 1e-8 relative tolerance."""
    if not spec.is_centered:
        raise ValueError("correlation model requires a centered amplitude law")
    s2 = spec.mark_variance
    w = spec.kernel_t.width
    ax0 = float(spec.kernel_x.autocorr(0.0))
    if s2 == 0.0:
        return CorrelationModel(spec, 0.0, 0.0, 0.0)
    val, err = integrate.quad(
        lambda u: float(spec.kernel_t.autocorr(u)), 0.0, w,
        epsabs=1e-13, epsrel=1e-10, limit=200,
    )
    one_sided = s2 * ax0 * val
    if err > 1e-8 * max(abs(val), 1e-9):
        raise QuadratureError("sigma quadrature did not converge")
    return CorrelationModel(spec, s2, one_sided, 2.0 * one_sided)


def empirical_correlation(spec: KernelField, lags, n_samples: int,
                          base_point: tuple[float, float] = (7.3, -2.6)):
    """Monte Carlo estimate of phi at each (dt, dx) lag over independent
    realizations; returns arrays (estimates, standard errors)."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    seeds = realization_seeds(spec, n_samples, Stream.EMPIRICAL)
    t0, x0 = base_point
    ests, ses = [], []
    for dt, dx in lags:
        c0 = _field_values(spec, seeds, t0, x0)
        c1 = _field_values(spec, seeds, t0 + dt, x0 + dx)
        prod = c0 * c1
        ests.append(float(prod.mean()))
        ses.append(float(prod.std(ddof=1) / np.sqrt(n_samples)))
    return np.array(ests), np.array(ses)
