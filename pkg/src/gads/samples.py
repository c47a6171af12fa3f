from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RaySamples:
    """Ordered samples along a batch of rays.

    Arrays have a leading ray axis: ``t`` and ``sigma`` are ``(R, K)``,
    ``color`` is ``(R, K, 3)`` (or ``None`` until fetched) and ``lo`` (the
    interval start that the first slab is measured from) is ``(R,)``.  ``T``
    and ``w`` are filled by :func:`gads.rendering.transmittances`.
    ``dynamic`` optionally flags samples placed by the dynamic sampler
    (initial points and refinements) as opposed to coarse ones.
    """

    t: np.ndarray
    sigma: np.ndarray
    color: np.ndarray | None
    lo: np.ndarray
    T: np.ndarray | None = None
    w: np.ndarray | None = None
    dynamic: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.atleast_2d(np.asarray(self.t, dtype=np.float64))
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        if self.color is not None:
            self.color = np.asarray(self.color, dtype=np.float64).reshape(self.t.shape + (3,))
        self.lo = np.broadcast_to(np.asarray(self.lo, dtype=np.float64), self.t.shape[:1]).copy()

    @property
    def delta(self) -> np.ndarray:
        return np.diff(self.t, axis=-1, prepend=self.lo[:, None])

    @property
    def n_rays(self) -> int:
        return self.t.shape[0]

    @property
    def n_samples(self) -> int:
        return self.t.shape[1]
