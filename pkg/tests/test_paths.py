import math

import numpy as np
import pytest

from homogmc.paths import (
    PathGrid,
    local_time,
    local_time_on_edges,
    refine_path,
    rescale_path,
    simulate_path,
    simulate_path_values,
)
from homogmc.rng import Stream, generator


def frozen_path(t=1.0, n_steps=100):
    """Degenerate zero-variance path, B = 0."""
    return PathGrid(np.linspace(0.0, t, n_steps + 1), np.zeros(n_steps + 1), seed=0)


def test_single_step_is_the_generator_draw():
    p = simulate_path(2.0, 1, seed=123)
    z = generator(123, Stream.PATH).standard_normal(1)[0]
    assert p.values[1] == pytest.approx(z * math.sqrt(2.0), abs=0)
    assert p.values[0] == 0.0


def test_endpoint_moments():
    vals = simulate_path_values(1.0, 4, seed=9, n_paths=100_000)
    end = vals[:, -1]
    assert abs(end.mean()) <= 4.0 / math.sqrt(100_000)
    assert abs(end.var() - 1.0) < 0.05


def test_path_requires_positive_inputs():
    with pytest.raises(ValueError):
        simulate_path(0.0, 10, seed=1)
    with pytest.raises(ValueError):
        simulate_path(1.0, 0, seed=1)


# --- local time ---------------------------------------------------------------


def test_local_time_frozen_path():
    lt = local_time(frozen_path(t=1.0), 0.1)
    final = lt.masses[-1]
    j0 = np.flatnonzero(final)
    assert len(j0) == 1
    assert final[j0[0]] == pytest.approx(10.0, rel=1e-12)  # 1/dy
    assert lt.total_mass() == pytest.approx(1.0, rel=1e-12)


def test_local_time_mass_identity_exact():
    for seed in range(25):
        n = 137 + seed
        p = simulate_path(0.5 + 0.01 * seed, n, seed=seed)
        lt = local_time(p, 0.07)
        for k in (1, n // 2, n):
            assert lt.total_mass(k) == pytest.approx(float(p.times[k]), rel=1e-12, abs=1e-14)


def test_local_time_monotone_and_nonnegative():
    lt = local_time(simulate_path(1.0, 300, seed=4), 0.05)
    assert lt.masses.min() >= 0.0
    assert np.all(np.diff(lt.masses, axis=0) >= -1e-15)


def test_expected_local_time_at_origin():
    # E L(1, 0) = sqrt(2/pi) for standard BM; the occupation estimate averages
    # the density over the bin containing 0, so coarse bins read low and the
    # fine estimate must land closer to the target
    target = math.sqrt(2.0 / math.pi)
    errs = []
    for n_steps, dy, tol in ((200, 0.2, 0.15), (3200, 0.05, 0.04)):
        acc = []
        for seed in range(3000):
            p = simulate_path(1.0, n_steps, seed=seed)
            lt = local_time(p, dy)
            j0 = np.searchsorted(lt.edges, 0.0, side="right") - 1
            acc.append(lt.masses[-1][j0])
        est = float(np.mean(acc))
        errs.append(abs(est - target))
        assert errs[-1] < tol, (n_steps, dy, est)
    assert errs[1] < errs[0]


def test_local_time_refinement_consistency():
    # halving dt and dy changes int f(y) L(t, y) dy by O(delta) for smooth f
    f = lambda y: np.exp(-0.5 * y**2)
    gaps = []
    for seed in range(5):
        p = simulate_path(1.0, 250, seed=seed)
        fine = refine_path(p)
        vals = []
        for path, dy in ((p, 0.1), (fine, 0.05)):
            lt = local_time(path, dy)
            vals.append(float((f(lt.centers) * lt.masses[-1] * lt.dy).sum()))
        gaps.append(abs(vals[0] - vals[1]))
    assert np.mean(gaps) < 0.05


def test_local_time_on_prescribed_edges_raises_when_path_leaves():
    p = simulate_path(1.0, 100, seed=7)
    edges = np.arange(-0.01, 0.02, 0.01)
    with pytest.raises(ValueError):
        local_time_on_edges(p, edges)


# --- refinement and rescaling ---------------------------------------------------


def test_refine_keeps_skeleton_and_is_deterministic():
    p = simulate_path(1.0, 64, seed=11)
    f1 = refine_path(p)
    f2 = refine_path(p)
    assert np.array_equal(f1.values, f2.values)
    assert np.array_equal(f1.values[::2], p.values)
    assert f1.n_steps == 2 * p.n_steps
    g = refine_path(f1)
    assert np.array_equal(g.values[::4], p.values)


def test_refined_increments_have_right_law():
    p = simulate_path(1.0, 2, seed=3)
    mids = []
    for seed in range(20000):
        q = refine_path(simulate_path(1.0, 1, seed=seed))
        mids.append(q.values[1] - 0.5 * q.values[2])
    mids = np.asarray(mids)
    assert abs(mids.mean()) < 4 * 0.5 / math.sqrt(len(mids))
    assert abs(mids.var() - 0.25) < 0.01  # bridge midpoint variance t/4


def test_rescale_identities():
    p = simulate_path(1.0, 50, seed=2)
    assert rescale_path(p, 0.3, 0.0) is p
    assert rescale_path(p, 1.0, 2.0) is p
    with pytest.raises(ValueError):
        rescale_path(p, -1.0, 1.0)


def test_rescale_round_trip():
    p = simulate_path(1.0, 50, seed=2)
    q = rescale_path(rescale_path(p, 0.25, 2.0), 0.25, -2.0)
    assert np.array_equal(q.values, p.values)  # powers of two scale exactly
    r = rescale_path(rescale_path(p, 0.3, 1.0), 0.3, -1.0)
    assert np.allclose(r.values, p.values, rtol=1e-12, atol=0)
    assert np.allclose(r.times, p.times, rtol=1e-12, atol=0)


def test_rescaled_endpoint_variance_invariant():
    # Brownian scaling: eps^(nu/2) B_{t/eps^nu} has the law of B_t
    t, eps, nu = 1.0, 0.2, 1.5
    ends = []
    for seed in range(10_000):
        p = simulate_path(t / eps**nu, 16, seed=seed)
        ends.append(rescale_path(p, eps, nu).values[-1])
    ends = np.asarray(ends)
    assert rescale_path(simulate_path(t / eps**nu, 16, 0), eps, nu).t == pytest.approx(t)
    assert abs(ends.var() - t) < 0.05 * t
