"""Sphere sampling and hyperspherical chart plumbing.

Grid policy: uniform angles on S^1, recursive icosahedral subdivision on S^2
(also provides a watertight triangulation), and low-discrepancy spiral-style
points on S^n for n >= 3.  All generators are deterministic.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import ndtri


# ---------------------------------------------------------------------------
# grids


def circle_grid(count: int) -> np.ndarray:
    """count uniformly spaced points on the unit circle in R^2."""
    ang = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


@lru_cache(maxsize=16)
def icosphere(level: int):
    """Icosahedron subdivided `level` times, vertices on the unit sphere.

    Returns (vertices, faces); faces index into vertices and tile the sphere
    without gaps (each subdivision splits every triangle in four).
    """
    if level < 0 or level > 8:
        raise ValueError("icosphere level must be in [0, 8]")
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]

    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            idx = cache.get(key)
            if idx is None:
                m = np.asarray(verts[i]) + np.asarray(verts[j])
                m /= np.linalg.norm(m)
                verts.append(tuple(m))
                idx = len(verts) - 1
                cache[key] = idx
            return idx

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined

    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=int)


def icosphere_level_for(npoints: int) -> int:
    """Smallest subdivision level whose vertex count reaches npoints."""
    level = 0
    while 10 * 4**level + 2 < npoints and level < 8:
        level += 1
    return level


def fibonacci_sphere(count: int) -> np.ndarray:
    """Fibonacci spiral lattice on S^2; exact point count, quasi-uniform."""
    i = np.arange(count, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / count
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    ang = golden * i
    return np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=-1)


def rd_sequence(dim: int, count: int) -> np.ndarray:
    """Kronecker low-discrepancy sequence in [0,1]^dim (plastic-ratio variant)."""
    phi = 2.0
    for _ in range(32):
        phi = (1.0 + phi) ** (1.0 / (dim + 1.0))
    alpha = np.array([phi ** -(j + 1.0) for j in range(dim)])
    i = np.arange(1, count + 1, dtype=float)[:, None]
    return np.mod(0.5 + i * alpha[None, :], 1.0)


def spiral_sphere(ambient_dim: int, count: int) -> np.ndarray:
    """Low-discrepancy points on S^(ambient_dim-1) for ambient_dim >= 4.

    Pushes an R_d sequence through the normal quantile; the Gaussian measure
    is rotation invariant, so normalized rows are asymptotically uniform.
    """
    u = rd_sequence(ambient_dim, count)
    g = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sphere_grid(sphere_dim: int, resolution: int) -> np.ndarray:
    """Quasi-uniform grid on S^sphere_dim with about resolution**2 points."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    target = resolution * resolution
    if sphere_dim == 1:
        return circle_grid(target)
    if sphere_dim == 2:
        verts, _ = icosphere(icosphere_level_for(target))
        return verts
    return spiral_sphere(sphere_dim + 1, target)


# ---------------------------------------------------------------------------
# hyperspherical chart with derivatives

POLAR_MARGIN = 0.35
AZIMUTH_SPAN = 3.3


def chart_domain(k: int) -> np.ndarray:
    """Default chart box for S^k: polar angles clear of the poles, wide azimuth.

    The azimuth range intentionally exceeds (-pi, pi): the chart map is
    periodic, and focal-leaf integrations need arcs longer than pi from the
    domain center.
    """
    lo = [POLAR_MARGIN] * (k - 1) + [-AZIMUTH_SPAN]
    hi = [np.pi - POLAR_MARGIN] * (k - 1) + [AZIMUTH_SPAN]
    return np.array([lo, hi], dtype=float)


def sphere_chart(theta: np.ndarray, order: int = 0):
    """Point on S^k for angles theta (k of them), optionally with derivatives.

    Components are products of single-angle factors:
        u_0 = cos t_0,  u_i = sin t_0 .. sin t_{i-1} * cos t_i,  u_k = prod sin.
    order 0 returns u (k+1,); order 1 adds du (k+1, k); order 2 adds
    d2u (k+1, k, k).
    """
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    s, c = np.sin(theta), np.cos(theta)

    def factor(i: int, j: int, d: int) -> float:
        # d-th derivative of the j-th factor of component i
        if j < i:
            return (s[j], c[j], -s[j])[d]
        return (c[j], -s[j], -c[j])[d]

    def active(i: int):
        return range(i + 1) if i < k else range(k)

    u = np.empty(k + 1)
    for i in range(k + 1):
        u[i] = np.prod([factor(i, j, 0) for j in active(i)])
    if order == 0:
        return u

    du = np.zeros((k + 1, k))
    for i in range(k + 1):
        for a in active(i):
            du[i, a] = np.prod([factor(i, j, 1 if j == a else 0) for j in active(i)])
    if order == 1:
        return u, du

    d2u = np.zeros((k + 1, k, k))
    for i in range(k + 1):
        acts = list(active(i))
        for a in acts:
            for b in acts:
                if a == b:
                    d2u[i, a, a] = np.prod(
                        [factor(i, j, 2 if j == a else 0) for j in acts]
                    )
                else:
                    d2u[i, a, b] = np.prod(
                        [factor(i, j, 1 if j in (a, b) else 0) for j in acts]
                    )
    return u, du, d2u


def chart_center(k: int) -> np.ndarray:
    """Interior chart point mapping to the equator-safe direction."""
    return np.array([np.pi / 2] * (k - 1) + [0.0])


def antipodal_angles(theta: np.ndarray) -> np.ndarray:
    """Chart angles of -u(theta) within the same (periodic) chart."""
    theta = np.asarray(theta, dtype=float)
    out = np.pi - theta
    out[-1] = theta[-1] + np.pi
    return out


# ---------------------------------------------------------------------------
# linear-algebra helpers


def orthonormal_complement(rows: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the orthogonal complement of span(rows)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    m, d = rows.shape
    _, _, vt = np.linalg.svd(rows, full_matrices=True)
    return vt[m:]


def tangent_basis(u: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis (rows) of u-perp.

    Gram-Schmidt over coordinate axes ordered by increasing |u_i|, so the
    seed axis is the one least aligned with u and the result is reproducible.
    """
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    d = u.size
    order = np.argsort(np.abs(u), kind="stable")
    basis = []
    for idx in order:
        v = np.zeros(d)
        v[idx] = 1.0
        v -= np.dot(v, u) * u
        for b in basis:
            v -= np.dot(v, b) * b
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            basis.append(v / norm)
        if len(basis) == d - 1:
            break
    return np.asarray(basis)


def tangent_basis_batch(us: np.ndarray) -> np.ndarray:
    """tangent_basis applied row-wise; returns (m, d-1, d)."""
    return np.stack([tangent_basis(u) for u in np.atleast_2d(us)])
