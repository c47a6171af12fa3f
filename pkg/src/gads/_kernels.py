# Compiled scene-field evaluation.  Mirrors SceneField.query_reference exactly.
from __future__ import annotations

import math

import numpy as np
from numba import njit

SPHERE, BOX, GAUSSIAN = 0, 1, 2
SOLID, CHECKER, NOISE = 0, 1, 2


def pack(primitives, noise_params):
    """Flatten primitives into arrays for :func:`query_kernel`."""
    n = len(primitives)
    kind = np.zeros(n, np.int64)
    tex = np.zeros(n, np.int64)
    center = np.zeros((n, 3))
    size = np.zeros((n, 3))
    sigma_max = np.zeros(n)
    albedo = np.zeros((n, 3))
    scale = np.zeros(n)
    freqs = np.zeros((n, 8, 3))
    phases = np.zeros((n, 8))
    amps = np.zeros((n, 8))
    for i, p in enumerate(primitives):
        kind[i] = {"sphere": SPHERE, "box": BOX, "gaussian": GAUSSIAN}[p.shape]
        tex[i] = {"solid": SOLID, "checker": CHECKER, "noise": NOISE}[p.texture]
        center[i] = p.center
        size[i] = p.size
        sigma_max[i] = p.sigma_max
        albedo[i] = p.albedo
        scale[i] = p.texture_scale
        if p.texture == "noise":
            f, ph, a = noise_params(p.texture_seed)
            freqs[i], phases[i], amps[i] = 2 * np.pi * f, ph, a
    return kind, tex, center, size, sigma_max, albedo, scale, freqs, phases, amps


@njit(cache=True, nogil=True)
def _density(p, r0, r1, r2, kind, size, sigma_max):
    k = kind[p]
    if k == SPHERE:
        return sigma_max[p] if r0 * r0 + r1 * r1 + r2 * r2 <= size[p, 0] ** 2 else 0.0
    if k == BOX:
        inside = abs(r0) <= size[p, 0] and abs(r1) <= size[p, 1] and abs(r2) <= size[p, 2]
        return sigma_max[p] if inside else 0.0
    return sigma_max[p] * math.exp(-(r0 * r0 + r1 * r1 + r2 * r2) / (2 * size[p, 0] ** 2))


@njit(cache=True, nogil=True)
def query_kernel(x, d, view_tint, color_floor, kind, tex, center, size, sigma_max, albedo,
                 scale, freqs, phases, amps):
    n = x.shape[0]
    n_prim = kind.shape[0]
    sigma = np.zeros(n)
    color = np.zeros((n, 3))
    dens = np.zeros(n_prim)
    for i in range(n):
        s_tot = 0.0
        for p in range(n_prim):
            dens[p] = _density(p, x[i, 0] - center[p, 0], x[i, 1] - center[p, 1],
                               x[i, 2] - center[p, 2], kind, size, sigma_max)
            s_tot += dens[p]
        sigma[i] = s_tot
        if s_tot <= 0:
            continue
        c0 = 0.0
        c1 = 0.0
        c2 = 0.0
        for p in range(n_prim):
            if dens[p] <= color_floor * s_tot:
                continue
            t = tex[p]
            if t == SOLID:
                f = 1.0
            else:
                r0 = (x[i, 0] - center[p, 0]) * scale[p]
                r1 = (x[i, 1] - center[p, 1]) * scale[p]
                r2 = (x[i, 2] - center[p, 2]) * scale[p]
                if t == CHECKER:
                    v = (math.floor(r0) + math.floor(r1) + math.floor(r2)) % 2.0
                else:
                    acc = 0.0
                    norm = 0.0
                    for w in range(8):
                        arg = r0 * freqs[p, w, 0] + r1 * freqs[p, w, 1] + r2 * freqs[p, w, 2] + phases[p, w]
                        acc += math.sin(arg) * amps[p, w]
                        norm += amps[p, w] ** 2
                    v = 0.5 + 0.5 * math.tanh(1.5 * acc / math.sqrt(norm))
                f = 0.15 + 0.85 * v
            c0 += dens[p] * albedo[p, 0] * f
            c1 += dens[p] * albedo[p, 1] * f
            c2 += dens[p] * albedo[p, 2] * f
        g = 1.0
        if view_tint > 0:
            g = 1 - view_tint * (1 - d[i, 2]) / 2
        color[i, 0] = min(max(c0 / s_tot * g, 0.0), 1.0)
        color[i, 1] = min(max(c1 / s_tot * g, 0.0), 1.0)
        color[i, 2] = min(max(c2 / s_tot * g, 0.0), 1.0)
    return sigma, color


@njit(cache=True, nogil=True)
def density_kernel(x, kind, center, size, sigma_max):
    n = x.shape[0]
    sigma = np.zeros(n)
    for i in range(n):
        s_tot = 0.0
        for p in range(kind.shape[0]):
            s_tot += _density(p, x[i, 0] - center[p, 0], x[i, 1] - center[p, 1],
                              x[i, 2] - center[p, 2], kind, size, sigma_max)
        sigma[i] = s_tot
    return sigma
