"""Immersed hypersurface patches and anisotropic curvature computation.

Sign dictionary (fixed once, used everywhere):
  * the shape operator is T = -d(nu), so the unit sphere with outward normal
    has T = -I (classical principal curvatures -1);
  * the F-Weingarten operator is S_F = A_F o T; the Wulff-shape patch with
    outward normal has S_F = -I, i.e. anisotropic principal curvatures -1;
  * the product immersion (u, v) -> v - t*phi(u) carries normal nu = u and
    spectrum {1/t (k times), 0 (n-k times)}.
Statements with positive curvature for spheres/Wulff shapes correspond to
the inward orientation.

S_F is generally not self-adjoint but has real spectrum; eigenvalues are
computed from the symmetric matrix C_F T C_F (similar to S_F), which keeps
the spectrum real by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import anisotropy
from .anisotropy import AnisotropyFunction, evaluate
from .errors import ConvexityViolation, RankDeficient, WulffLabError
from .util import float_text

CHART_FD_STEP = 1e-4
CLUSTER_TOL = 1e-6


@dataclass
class ImmersionPatch:
    """A parametrized hypersurface chart with derivative access.

    chart_map returns x(params) in R^ambient_dim.  jacobian/hessian are
    optional analytic derivatives; missing ones are filled by central
    differences in chart coordinates (step fd_step), differencing the
    best available lower derivative.

    second_form is an optional analytic evaluator (params, nu) -> b with
    b_ij = <d2x/du_i du_j, nu>; when present it bypasses the chart Hessian
    in curvature computations (used by patches whose Hessian would need
    third derivatives of the anisotropy).

    orientation flips the unit normal; domain is a (2, chart_dim) box.
    """

    ambient_dim: int
    chart_dim: int
    domain: np.ndarray
    chart_map: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    second_form: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    orientation: int = 1
    fd_step: float = CHART_FD_STEP
    name: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.domain = np.asarray(self.domain, dtype=float).reshape(2, self.chart_dim)
        if self.orientation not in (-1, 1):
            raise ValueError("orientation must be +1 or -1")

    def x(self, params) -> np.ndarray:
        return np.asarray(self.chart_map(np.asarray(params, dtype=float)), dtype=float)

    def dx(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(params), dtype=float)
        h = self.fd_step
        cols = []
        for i in range(self.chart_dim):
            e = np.zeros(self.chart_dim)
            e[i] = h
            cols.append((self.x(params + e) - self.x(params - e)) / (2.0 * h))
        return np.stack(cols, axis=1)

    def d2x(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(params), dtype=float)
        h = self.fd_step
        n = self.chart_dim
        if self.jacobian is not None:
            out = np.empty((self.ambient_dim, n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = h
                out[:, :, j] = (self.dx(params + e) - self.dx(params - e)) / (2.0 * h)
            return 0.5 * (out + out.transpose(0, 2, 1))
        out = np.empty((self.ambient_dim, n, n))
        f0 = self.x(params)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h
            out[:, i, i] = (self.x(params + ei) - 2.0 * f0 + self.x(params - ei)) / h**2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = h
                mixed = (
                    self.x(params + ei + ej)
                    - self.x(params + ei - ej)
                    - self.x(params - ei + ej)
                    + self.x(params - ei - ej)
                ) / (4.0 * h**2)
                out[:, i, j] = out[:, j, i] = mixed
        return out

    def center(self) -> np.ndarray:
        return 0.5 * (self.domain[0] + self.domain[1])

    def with_orientation(self, orientation: int) -> "ImmersionPatch":
        return replace(self, orientation=int(orientation), extras=dict(self.extras))

    def scaled(self, c: float) -> "ImmersionPatch":
        """Homothety x -> c*x (c > 0 keeps the normal, curvatures scale 1/c)."""
        if not c > 0:
            raise ValueError("homothety factor must be positive")
        jac = None if self.jacobian is None else (lambda p: c * self.jacobian(p))
        hes = None if self.hessian is None else (lambda p: c * self.hessian(p))
        sff = None if self.second_form is None else (
            lambda p, nu: c * self.second_form(p, nu)
        )
        return ImmersionPatch(
            ambient_dim=self.ambient_dim,
            chart_dim=self.chart_dim,
            domain=self.domain.copy(),
            chart_map=lambda p: c * self.chart_map(p),
            jacobian=jac,
            hessian=hes,
            second_form=sff,
            orientation=self.orientation,
            fd_step=self.fd_step,
            name=f"{self.name}*{c:g}" if self.name else "",
        )


def chart_grid(patch: ImmersionPatch, per_axis: int, margin: float = 0.08) -> np.ndarray:
    """Regular interior grid over the chart domain; rows are chart points."""
    lo, hi = patch.domain
    span = hi - lo
    axes = [
        np.linspace(lo[i] + margin * span[i], hi[i] - margin * span[i], per_axis)
        for i in range(patch.chart_dim)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class Frame:
    """Pointwise first-order data: position, tangent frame, normal, metric."""

    params: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    nu: np.ndarray
    metric: np.ndarray


def frame_at(patch: ImmersionPatch, params) -> Frame:
    """Tangent frame and oriented unit normal at a chart point.

    The base normal is the generalized cross product of the Jacobian
    columns (sign fixed by det([nu | dx]) > 0, smooth wherever dx has full
    rank); orientation multiplies it.
    """
    params = np.asarray(params, dtype=float)
    x = patch.x(params)
    dx = patch.dx(params)
    u_svd, sing, _ = np.linalg.svd(dx, full_matrices=True)
    if sing[-1] < 1e-8:
        raise RankDeficient(
            f"smallest singular value {sing[-1]:.3e} of dx at params {params}"
        )
    nu = u_svd[:, -1]
    if np.linalg.det(np.column_stack([nu, dx])) < 0:
        nu = -nu
    nu = patch.orientation * nu
    metric = dx.T @ dx
    return Frame(params=params, x=x, dx=dx, nu=nu, metric=0.5 * (metric + metric.T))


def shape_operator(patch: ImmersionPatch, params, frame: Frame | None = None) -> np.ndarray:
    """Chart matrix W of the shape operator T = -d(nu): -d(nu) = dx . W."""
    frame = frame or frame_at(patch, params)
    if patch.second_form is not None:
        b = np.asarray(patch.second_form(frame.params, frame.nu), dtype=float)
    else:
        d2x = patch.d2x(frame.params)
        b = np.einsum("dij,d->ij", d2x, frame.nu)
    b = 0.5 * (b + b.T)
    return np.linalg.solve(frame.metric, b)


def _composition_matrix(eval_at_nu, frame: Frame) -> np.ndarray:
    """Chart matrix B expressing the tangent frame in the basis of nu-perp."""
    return eval_at_nu.basis @ frame.dx


def f_weingarten(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    params,
    cross_check: bool = False,
) -> np.ndarray:
    """Chart matrix of the F-Weingarten operator S_F = A_F o T.

    With B the tangent frame in the normal's tangent basis, S = B^-1 A B W.
    cross_check also differentiates phi(nu(.)) in chart coordinates and
    verifies S = -(dx)^+ d(phi o nu) to 1e-6.
    """
    frame = frame_at(patch, params)
    w = shape_operator(patch, params, frame)
    ev = evaluate(F, frame.nu)
    if ev.min_eigenvalue <= 0:
        raise ConvexityViolation(
            f"A_F not positive at nu={frame.nu} (min eig {ev.min_eigenvalue:.3e})"
        )
    bmat = _composition_matrix(ev, frame)
    s = np.linalg.solve(bmat, ev.a_matrix @ bmat @ w)
    if cross_check:
        s2 = _f_weingarten_fd(F, patch, params, frame)
        dev = np.abs(s - s2).max()
        if dev > 1e-6:
            raise WulffLabError(
                f"F-Weingarten cross-check failed: routes differ by {dev:.3e}"
            )
    return s

def _f_weingarten_fd(F, patch, params, frame: Frame) -> np.ndarray:
    """Independent route: S = -(dx)^+ . d(phi o nu), nu from SVD frames."""
    params = np.asarray(params, dtype=float)
    h = patch.fd_step
    cols = []
    for i in range(patch.chart_dim):
        e = np.zeros(patch.chart_dim)
        e[i] = h
        fp = frame_at(patch, params + e)
        fm = frame_at(patch, params - e)
        cols.append(
            (anisotropy.phi(F, fp.nu) - anisotropy.phi(F, fm.nu)) / (2.0 * h)
        )
    m = np.stack(cols, axis=1)
    return -np.linalg.solve(frame.metric, frame.dx.T @ m)


@dataclass
class CurvatureSpectrum:
    """Anisotropic principal curvatures at a point.

    lambdas are sorted descending (with repetition); groups are
    (value, multiplicity) pairs after clustering at cluster_tol, and
    group_offsets are the partial multiplicity sums n_k.  eigenframe columns
    are S_F eigenvectors in the chart basis (they span the curvature
    distributions, ordered like lambdas).  sym_functions holds the
    elementary symmetric polynomials M_0..M_n and mean = trace(S_F)/n.
    """

    lambdas: np.ndarray
    groups: list
    group_offsets: list
    eigenframe: np.ndarray
    sym_functions: np.ndarray
    mean: float

    @property
    def g(self) -> int:
        return len(self.groups)

    def group_values(self) -> np.ndarray:
        return np.array([v for v, _ in self.groups])

    def group_columns(self, index: int) -> np.ndarray:
        """Eigenframe columns spanning the index-th curvature distribution."""
        start = 0 if index == 0 else self.group_offsets[index - 1]
        return self.eigenframe[:, start : self.group_offsets[index]]


def _cluster(sorted_vals: np.ndarray, tol: float):
    groups, offsets = [], []
    start = 0
    for i in range(1, sorted_vals.size + 1):
        if i == sorted_vals.size or sorted_vals[i - 1] - sorted_vals[i] > tol:
            members = sorted_vals[start:i]
            groups.append((float(members.mean()), int(members.size)))
            offsets.append(i)
            start = i
    return groups, offsets


def _canonical_columns(mat: np.ndarray) -> np.ndarray:
    out = mat.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        k = int(np.argmax(np.abs(col)))
        if col[k] < 0:
            out[:, j] = -col
    return out


def anisotropic_curvatures(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    params,
    cluster_tol: float = CLUSTER_TOL,
) -> CurvatureSpectrum:
    """Eigen-decomposition of S_F via the symmetrization C_F T C_F.

    T and C_F are expressed in a common orthonormal tangent basis; the
    symmetric product is similar to S_F, so the spectrum is real.  The
    eigenframe is pulled back to the chart basis.
    """
    frame = frame_at(patch, params)
    w = shape_operator(patch, params, frame)
    ev = evaluate(F, frame.nu)
    c = ev.sqrt_a()  # raises ConvexityViolation when A_F is not PSD
    bmat = _composition_matrix(ev, frame)
    t_orth = bmat @ w @ np.linalg.inv(bmat)
    t_orth = 0.5 * (t_orth + t_orth.T)
    sym = c @ t_orth @ c
    sym = 0.5 * (sym + sym.T)
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]

    frame_cols = np.linalg.solve(bmat, c @ vecs)
    norms = np.linalg.norm(frame_cols, axis=0)
    frame_cols = _canonical_columns(frame_cols / norms)

    groups, offsets = _cluster(vals, cluster_tol)

    # deterministic order inside degenerate groups: lexicographic columns
    start = 0
    for end in offsets:
        if end - start > 1:
            block = frame_cols[:, start:end]
            idx = np.lexsort(np.round(block, 12)[::-1])
            frame_cols[:, start:end] = block[:, idx]
        start = end

    coeffs = np.poly(vals) if vals.size else np.array([1.0])
    signs = (-1.0) ** np.arange(coeffs.size)
    sym_functions = signs * coeffs

    return CurvatureSpectrum(
        lambdas=vals,
        groups=groups,
        group_offsets=offsets,
        eigenframe=frame_cols,
        sym_functions=sym_functions,
        mean=float(vals.mean()),
    )


def anisotropic_mean(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    params,
    cross_check: bool = False,
) -> float:
    """Anisotropic mean curvature H_F = trace(S_F)/n."""
    s = f_weingarten(F, patch, params)
    h = float(np.trace(s)) / patch.chart_dim
    if cross_check:
        frame = frame_at(patch, params)
        s2 = _f_weingarten_fd(F, patch, params, frame)
        h2 = float(np.trace(s2)) / patch.chart_dim
        if abs(h - h2) > 1e-6:
            raise WulffLabError(
                f"anisotropic mean cross-check failed: {h} vs {h2}"
            )
    return h


# ---------------------------------------------------------------------------
# batch reporting

CURVATURE_CSV_SCHEMA = "wulfflab-curvature-v1"


def curvature_rows(F: AnisotropyFunction, patch: ImmersionPatch, grid: np.ndarray):
    """One row per chart point: params, x, nu, lambdas, H_F, g."""
    rows = []
    for p in np.atleast_2d(grid):
        frame = frame_at(patch, p)
        spec = anisotropic_curvatures(F, patch, p)
        rows.append(
            list(p)
            + list(frame.x)
            + list(frame.nu)
            + list(spec.lambdas)
            + [spec.mean, spec.g]
        )
    return rows


def write_curvature_csv(path, F: AnisotropyFunction, patch: ImmersionPatch, grid: np.ndarray):
    n, d = patch.chart_dim, patch.ambient_dim
    header = (
        [f"param_{i}" for i in range(n)]
        + [f"x_{i}" for i in range(d)]
        + [f"nu_{i}" for i in range(d)]
        + [f"lambda_{i + 1}" for i in range(n)]
        + ["H_F", "g"]
    )
    with open(path, "w") as fh:
        fh.write(f"# schema: {CURVATURE_CSV_SCHEMA}\n")
        fh.write(",".join(header) + "\n")
        for row in curvature_rows(F, patch, grid):
            cells = [float_text(v) for v in row[:-1]] + [str(int(row[-1]))]
            fh.write(",".join(cells) + "\n")
