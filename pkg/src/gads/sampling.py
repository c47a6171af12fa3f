"""Sample placement along rays.

Three strategies:

* :func:`stratified_samples` -- one jittered sample per equal-width bin.
* :func:`geometry_interval` -- restricts sampling to ``[d_c - dd, d_c + dd]``
  around a coarse depth estimate.
* :func:`dynamic_samples` -- predict-then-refine: repeatedly fit a straight
  line to the transmittance profile around ``T = 0.5`` and sample where the
  line predicts ``T = 0.5``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import DEPTH_SENTINEL
from .geometry import DomainError, Ray
from .samples import RaySamples

FLAT_SLOPE = 1e-9
DUPLICATE_TOL = 1e-9
NUDGE = 1e-6
N_INIT = 3


@dataclass(frozen=True)
class SamplingInterval:
    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class TransmittanceModel:
    """Straight line ``T(t) = slope * t + intercept`` through two profile points."""

    slope: float
    intercept: float
    support: tuple[float, float]

    @classmethod
    def fit(cls, t_a: float, T_a: float, t_b: float, T_b: float) -> "TransmittanceModel":
        if not t_a < t_b:
            raise DomainError("support must be ordered t_a < t_b")
        slope = (T_b - T_a) / (t_b - t_a)
        return cls(slope, T_a - slope * t_a, (t_a, t_b))

    def __call__(self, t):
        return self.slope * np.asarray(t) + self.intercept


@dataclass(frozen=True)
class SamplerBudget:
    n_coarse: int
    n_dynamic: int
    seed: int = 0

    def __post_init__(self):
        if self.n_coarse < 0 or self.n_dynamic < 0 or self.n_coarse + self.n_dynamic < 1:
            raise DomainError("budget needs n_coarse, n_dynamic >= 0 and at least one sample")

    @property
    def total(self) -> int:
        return self.n_coarse + self.n_dynamic


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def stratified_samples(t_near, t_far, n: int, seed=0, jitter=None) -> np.ndarray:
    """One sample per bin of ``n`` equal bins over ``[t_near, t_far]``.

    ``t_near``/``t_far`` may be arrays of ray bounds, giving an ``(R, n)``
    result; scalars give ``(n,)``.  ``jitter`` fixes the in-bin offset
    (e.g. ``0.5`` for bin midpoints); by default it is drawn uniformly from
    ``seed`` (an int or a ``numpy.random.Generator``).
    """
    if n < 1:
        raise DomainError("need at least one sample")
    near = np.asarray(t_near, dtype=np.float64)
    far = np.asarray(t_far, dtype=np.float64)
    shape = np.broadcast_shapes(near.shape, far.shape) + (n,)
    u = _rng(seed).random(shape) if jitter is None else np.full(shape, float(jitter))
    return near[..., None] + (far - near)[..., None] * (np.arange(n) + u) / n


def stratified_ray_samples(ray: Ray, n: int, seed=0, jitter=None) -> np.ndarray:
    return stratified_samples(ray.t_near, ray.t_far, n, seed, jitter)


def geometry_intervals(d_c, delta_d: float, t_near, t_far):
    """Vectorized :func:`geometry_interval`; returns ``(lo, hi)`` arrays."""
    if not delta_d > 0:
        raise DomainError("delta_d must be positive")
    d_c = np.asarray(d_c, dtype=np.float64)
    near = np.broadcast_to(np.asarray(t_near, dtype=np.float64), d_c.shape)
    far = np.broadcast_to(np.asarray(t_far, dtype=np.float64), d_c.shape)
    lo = np.maximum(d_c - delta_d, near)
    hi = np.minimum(d_c + delta_d, far)
    full = (d_c == DEPTH_SENTINEL) | ~np.isfinite(d_c) | ~(lo < hi)
    return np.where(full, near, lo), np.where(full, far, hi)


def geometry_interval(d_c: float, delta_d: float, t_near: float, t_far: float) -> SamplingInterval:
    """``[d_c - delta_d, d_c + delta_d]`` clamped to the ray bounds.

    A sentinel coarse depth, or an interval that is empty after clamping,
    gives the whole ray.
    """
    lo, hi = geometry_intervals(d_c, delta_d, t_near, t_far)
    return SamplingInterval(float(lo), float(hi))


def _solve_t_half(slope, intercept, lo, hi, fallback):
    flat = np.abs(slope) < FLAT_SLOPE
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (0.5 - intercept) / np.where(flat, 1.0, slope)
    return np.where(flat, fallback, np.clip(t, lo, hi))


def solve_t_half(model: TransmittanceModel, interval: SamplingInterval,
                 gap: SamplingInterval | None = None) -> float:
    """Where the line predicts ``T = 0.5``, clamped to ``interval``.

    For a flat line the midpoint of ``gap`` (the unexplored region; default
    the whole interval) is returned instead.
    """
    g = gap or interval
    return float(_solve_t_half(model.slope, model.intercept, interval.lo, interval.hi, g.mid))


def _profile(t, sigma, lo):
    """Transmittance profile nodes ``(positions, T)`` with the ``(lo, 1)`` anchor.

    Node ``j`` sits at the far end of slab ``j`` so its value is the
    transmittance accumulated through that slab.
    """
    delta = np.diff(t, axis=1, prepend=lo[:, None])
    tau = np.cumsum(sigma * delta, axis=1)
    pos = np.concatenate([lo[:, None], t], axis=1)
    T = np.exp(-np.concatenate([np.zeros((len(t), 1)), tau], axis=1))
    return pos, T


def _largest_gap_mid(t, lo, hi):
    edges = np.concatenate([lo[:, None], t, hi[:, None]], axis=1)
    gaps = np.diff(edges, axis=1)
    k = np.argmax(gaps, axis=1)
    rows = np.arange(len(t))
    return 0.5 * (edges[rows, k] + edges[rows, k + 1])


def _sort_rows(t, *others):
    order = np.argsort(t, axis=1, kind="stable")
    return (np.take_along_axis(t, order, 1),) + tuple(np.take_along_axis(o, order, 1) for o in others)


def _points(origins, dirs, t):
    x = origins[:, None, :] + t[..., None] * dirs[:, None, :]
    return x.reshape(-1, 3), np.broadcast_to(dirs[:, None, :], t.shape + (3,)).reshape(-1, 3)


def evaluate_density(field, origins, dirs, t):
    """Density at ``origins + t * dirs`` for ``t`` of shape ``(R, K)``."""
    if hasattr(field, "density"):
        x = origins[:, None, :] + t[..., None] * dirs[:, None, :]
        return field.density(x.reshape(-1, 3)).reshape(t.shape)
    x, d = _points(origins, dirs, t)
    return field.query(x, d)[0].reshape(t.shape)


def evaluate_field(field, origins, dirs, t):
    x, d = _points(origins, dirs, t)
    sigma, color = field.query(x, d)
    return sigma.reshape(t.shape), color.reshape(t.shape + (3,))


def _next_sample(t, sigma, lo, hi):
    """One predict step for every ray; ``t``/``sigma`` must be sorted."""
    rows = np.arange(len(t))
    pos, T = _profile(t, sigma, lo)
    Ta, Tb = T[:, :-1], T[:, 1:]
    straddle = (Ta >= 0.5) & (Tb <= 0.5) & (Ta > Tb)
    closeness = np.minimum(np.abs(Ta - 0.5), np.abs(Tb - 0.5))
    j = np.where(straddle.any(axis=1), np.argmax(straddle, axis=1), np.argmin(closeness, axis=1))
    ta, tb = pos[rows, j], pos[rows, j + 1]
    Ta, Tb = T[rows, j], T[rows, j + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = (Tb - Ta) / (tb - ta)
    slope = np.where(tb > ta, slope, 0.0)
    gap_mid = _largest_gap_mid(t, lo, hi)
    cand = _solve_t_half(slope, Ta - slope * ta, lo, hi, gap_mid)

    # duplicates (including the interval start) get nudged, else the largest gap is bisected
    known = np.concatenate([lo[:, None], t], axis=1)
    width = hi - lo
    dup = np.min(np.abs(known - cand[:, None]), axis=1) < DUPLICATE_TOL
    nudged = cand + NUDGE * width
    still = (np.min(np.abs(known - nudged[:, None]), axis=1) < DUPLICATE_TOL) | (nudged > hi)
    return np.where(dup, np.where(still, gap_mid, nudged), cand)


def dynamic_samples_batch(field, origins, dirs, lo, hi, budget: SamplerBudget, seed=None) -> RaySamples:
    """Predict-then-refine sampling for a batch of rays.

    Procedure per ray: ``n_coarse`` jittered uniform samples over the
    interval, then ``min(3, n_dynamic)`` initial points (jittered thirds of
    the interval), then ``n_dynamic - 3`` refinement samples, each placed
    where a line through the profile pair straddling ``T = 0.5`` reaches one
    half.  When no pair straddles, the pair closest to one half is used;
    a flat line bisects the largest unsampled gap.

    Every returned sample costs exactly one field evaluation.  The random
    draws are ``n_coarse`` coarse offsets followed by 3 initial offsets per
    ray, so budgets with the same ``n_coarse`` produce nested sample sets.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (n,)).copy()
    rng = _rng(budget.seed if seed is None else seed)
    width = hi - lo
    u_coarse = rng.random((n, budget.n_coarse))
    u_init = rng.random((n, N_INIT))

    degenerate = width < 1e-9
    if np.any(degenerate):
        raise DomainError("degenerate intervals must be handled with dynamic_samples")

    t0 = []
    if budget.n_coarse:
        t0.append(lo[:, None] + width[:, None] * (np.arange(budget.n_coarse) + u_coarse) / budget.n_coarse)
    n_init = min(budget.n_dynamic, N_INIT)
    t0.append((lo[:, None] + width[:, None] * (np.arange(N_INIT) + u_init) / N_INIT)[:, :n_init])
    t = np.concatenate(t0, axis=1)
    dyn = np.broadcast_to(np.arange(t.shape[1]) >= budget.n_coarse, t.shape)
    sigma = evaluate_density(field, origins, dirs, t)
    t, sigma, dyn = _sort_rows(t, sigma, dyn)

    for _ in range(budget.n_dynamic - n_init):
        t_new = _next_sample(t, sigma, lo, hi)
        s_new = evaluate_density(field, origins, dirs, t_new[:, None])
        t, sigma, dyn = _sort_rows(np.concatenate([t, t_new[:, None]], axis=1),
                                   np.concatenate([sigma, s_new], axis=1),
                                   np.concatenate([dyn, np.ones((n, 1), bool)], axis=1))
    # colors are fetched once, at the final positions
    _, color = evaluate_field(field, origins, dirs, t)
    return RaySamples(t, sigma, color, lo, dynamic=dyn)


def dynamic_samples(field, ray: Ray, interval: SamplingInterval, budget: SamplerBudget) -> RaySamples:
    """Predict-then-refine samples for one ray (see :func:`dynamic_samples_batch`)."""
    if interval.width < 1e-9:
        s, c = evaluate_field(field, ray.origin[None], ray.direction[None], np.array([[interval.lo]]))
        return RaySamples([[interval.lo]], s, c, interval.lo)
    return dynamic_samples_batch(field, ray.origin, ray.direction, interval.lo, interval.hi, budget)
