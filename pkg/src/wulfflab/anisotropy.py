"""Anisotropy integrands F on the unit sphere and their sphere calculus.

Everything is routed through the positively 1-homogeneous ambient extension
Fhat(y) = |y| * F(y/|y|): its gradient at a unit vector u is the Wulff map
phi(u) = DF_u + F(u) u, and its ambient Hessian restricted to u-perp is the
operator A_F = D^2 F + F I.  This avoids chart singularities and reduces all
derivatives to ambient ones.

Sign/normalization notes: F is stored as given (F and c*F give homothetic
Wulff shapes); the dual norm F*(y) = sup <y,z>/F(z) over unit z is computed
by grid seeding plus projected gradient ascent.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    ConvexityViolation,
    DerivativeFailure,
    NonUnitInput,
    OptimizationDivergenceWarning,
)
from .spheregrid import circle_grid, icosphere, sphere_grid, spiral_sphere, tangent_basis

FAMILIES = (
    "isotropic",
    "quadratic-norm",
    "axisymmetric-series",
    "band-extension",
    "tabulated",
)

# Families with closed-form ambient gradient/Hessian.
_ANALYTIC_FAMILIES = {"isotropic", "quadratic-norm", "axisymmetric-series"}

DEFAULT_FD_STEP = 1e-5
# Floor for the second-derivative step: below ~5e-5 the eps/h^2 round-off in
# a double-precision central Hessian exceeds the 1e-6 agreement budget.
HESS_STEP_FLOOR = 5e-5

DEFAULT_AUDIT_RESOLUTION = 24
AUDIT_TOLERANCE = 1e-8

UNIT_SLACK = 1e-4


@dataclass(frozen=True)
class AnisotropyFunction:
    """A positive integrand F: S^n -> R+ with derivative access.

    ambient_dim is the n+1 of R^{n+1} (the sphere is S^n).  params is the
    family-specific coefficient tuple; see the catalog module for the
    concrete families.  fd_step is the central-difference step used when
    derivative_mode is "finite-difference" (gradients use it as is, Hessians
    use max(fd_step, HESS_STEP_FLOOR)).
    """

    ambient_dim: int
    family: str
    params: tuple = ()
    derivative_mode: str = "analytic"
    fd_step: float = DEFAULT_FD_STEP

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.ambient_dim < 2:
            raise ValueError("ambient_dim must be >= 2")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.derivative_mode not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown derivative_mode {self.derivative_mode!r}")
        if self.derivative_mode == "analytic" and self.family not in _ANALYTIC_FAMILIES:
            raise ValueError(f"family {self.family!r} has no analytic derivatives")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        _validate_params(self.family, self.ambient_dim, self.params)

    @property
    def sphere_dim(self) -> int:
        return self.ambient_dim - 1

    def to_json_dict(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "family": self.family,
            "params": list(self.params),
            "derivative_mode": self.derivative_mode,
            "fd_step": self.fd_step,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @staticmethod
    def from_json_dict(doc: dict) -> "AnisotropyFunction":
        known = {"ambient_dim", "family", "params", "derivative_mode", "fd_step"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown anisotropy fields: {sorted(extra)}")
        missing = {"ambient_dim", "family", "params"} - set(doc)
        if missing:
            raise ValueError(f"missing anisotropy fields: {sorted(missing)}")
        return AnisotropyFunction(
            ambient_dim=int(doc["ambient_dim"]),
            family=str(doc["family"]),
            params=tuple(doc["params"]),
            derivative_mode=str(doc.get("derivative_mode", "analytic")),
            fd_step=float(doc.get("fd_step", DEFAULT_FD_STEP)),
        )

    @staticmethod
    def from_json(text: str) -> "AnisotropyFunction":
        return AnisotropyFunction.from_json_dict(json.loads(text))


def _validate_params(family: str, dim: int, params: tuple) -> None:
    if family == "isotropic":
        if params:
            raise ValueError("isotropic family takes no params")
    elif family == "quadratic-norm":
        if len(params) != dim:
            raise ValueError("quadratic-norm needs one diagonal entry per axis")
        if min(params) <= 0:
            raise ValueError("quadratic-norm diagonal must be positive")
    elif family == "axisymmetric-series":
        if len(params) < 1:
            raise ValueError("axisymmetric-series needs at least the constant term")
    elif family == "band-extension":
        if len(params) < 2:
            raise ValueError("band-extension needs (halfwidth, inner coefficients...)")
        if not 0 < params[0] < np.pi / 2:
            raise ValueError("band halfwidth must lie in (0, pi/2)")
        if dim < 3:
            raise ValueError("band-extension needs ambient_dim >= 3")
    elif family == "tabulated":
        if len(params) < 4:
            raise ValueError("tabulated profile needs at least 4 node values")
        if min(params) <= 0:
            raise ValueError("tabulated profile values must be positive")


# ---------------------------------------------------------------------------
# family backends: 1-homogeneous value, ambient gradient, ambient Hessian


def _poly_even(coeffs, w, deriv: int = 0):
    """Even-series profile g(w) = sum c_j w^(2j) and its w-derivatives."""
    c = np.asarray(coeffs, dtype=float)
    s = np.asarray(w) ** 2
    if deriv == 0:
        return np.polynomial.polynomial.polyval(s, c)
    c1 = c[1:] * np.arange(1, c.size)  # d/ds
    if deriv == 1:
        return 2.0 * np.asarray(w) * np.polynomial.polynomial.polyval(s, c1)
    c2 = c1[1:] * np.arange(1, c1.size) if c1.size > 1 else np.zeros(1)
    gs = np.polynomial.polynomial.polyval(s, c1)
    gss = np.polynomial.polynomial.polyval(s, c2)
    return 2.0 * gs + 4.0 * s * gss


@lru_cache(maxsize=64)
def _tabulated_spline(params: tuple) -> CubicSpline:
    nodes = np.linspace(-1.0, 1.0, len(params))
    return CubicSpline(nodes, np.asarray(params), bc_type="natural")


def _quintic_ramp(x):
    """C^2 monotone ramp: 0 at 0, 1 at 1."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 + x * (-15.0 + 6.0 * x))


def band_geometry(params: tuple) -> tuple[float, float]:
    """(halfwidth, ramp width) of a band-extension; constant past the sum.

    The ramp takes most of the room left before the poles: the quintic's
    second derivative scales like (profile spread)/width^2, so narrow ramps
    break the convexity condition even for mild profiles.
    """
    half = float(params[0])
    width = min(1.2, 0.92 * (np.pi / 2 - half))
    return half, width


@lru_cache(maxsize=64)
def _band_plateau(params: tuple, ambient_dim: int) -> float:
    """Constant value used outside the band: sphere average of the profile."""
    m = ambient_dim - 2  # inner sphere dimension
    w = np.linspace(-1.0 + 1e-9, 1.0 - 1e-9, 4001)
    g = _poly_even(params[1:], w)
    weight = np.maximum(0.0, 1.0 - w * w) ** ((m - 2) / 2.0)
    return float(np.trapz(g * weight, w) / np.trapz(weight, w))


def value(F: AnisotropyFunction, y: np.ndarray) -> np.ndarray:
    """Homogeneous extension Fhat(y) = |y| F(y/|y|), broadcast over rows."""
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    if F.family == "isotropic":
        return r
    if F.family == "quadratic-norm":
        q = np.asarray(F.params)
        return np.sqrt(np.sum(q * y * y, axis=-1))
    safe_r = np.where(r > 0, r, 1.0)
    if F.family == "axisymmetric-series":
        w = y[..., -1] / safe_r
        return r * _poly_even(F.params, w)
    if F.family == "tabulated":
        w = np.clip(y[..., -1] / safe_r, -1.0, 1.0)
        return r * _tabulated_spline(F.params)(w)
    # band-extension
    half, width = band_geometry(F.params)
    plateau = _band_plateau(F.params, F.ambient_dim)
    pz = np.clip(y[..., -1] / safe_r, -1.0, 1.0)
    theta = np.arcsin(pz)
    ph = np.sqrt(np.maximum(1.0 - pz * pz, 0.0))
    safe_ph = np.where(ph > 1e-12, ph, 1.0)
    w_band = np.clip(y[..., -2] / (safe_r * safe_ph), -1.0, 1.0)
    s = _quintic_ramp((np.abs(theta) - half) / width)
    s = np.where(ph > 1e-12, s, 1.0)
    g_band = _poly_even(F.params[1:], np.where(ph > 1e-12, w_band, 0.0))
    return r * ((1.0 - s) * g_band + s * plateau)


def _grad_analytic(F: AnisotropyFunction, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if F.family == "isotropic":
        return y / np.linalg.norm(y, axis=-1, keepdims=True)
    if F.family == "quadratic-norm":
        q = np.asarray(F.params)
        s = value(F, y)
        return q * y / s[..., None]
    # axisymmetric-series: grad = (g - w g') u + g'(w) e_last
    r = np.linalg.norm(y, axis=-1, keepdims=True)
    u = y / r
    w = u[..., -1]
    g = _poly_even(F.params, w)
    g1 = _poly_even(F.params, w, 1)
    out = (g - w * g1)[..., None] * u
    out[..., -1] += g1
    return out


def _hess_analytic(F: AnisotropyFunction, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    d = y.shape[-1]
    eye = np.eye(d)
    r = np.linalg.norm(y, axis=-1)
    u = y / r[..., None]
    if F.family == "isotropic":
        proj = eye - u[..., :, None] * u[..., None, :]
        return proj / r[..., None, None]
    if F.family == "quadratic-norm":
        q = np.asarray(F.params)
        s = value(F, y)
        m = q * y
        return np.diag(q) / s[..., None, None] - (
            m[..., :, None] * m[..., None, :]
        ) / (s**3)[..., None, None]
    # axisymmetric-series: [g'' v v^T + (g - w g')(I - u u^T)] / r, v = e_z - w u
    w = u[..., -1]
    g = _poly_even(F.params, w)
    g1 = _poly_even(F.params, w, 1)
    g2 = _poly_even(F.params, w, 2)
    v = -w[..., None] * u
    v[..., -1] += 1.0
    proj = eye - u[..., :, None] * u[..., None, :]
    hess = g2[..., None, None] * (v[..., :, None] * v[..., None, :])
    hess += (g - w * g1)[..., None, None] * proj
    return hess / r[..., None, None]


def _grad_fd(F: AnisotropyFunction, y: np.ndarray, step: float) -> np.ndarray:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    m, d = y.shape
    pts = np.repeat(y[:, None, None, :], d, axis=1).repeat(2, axis=2)
    for i in range(d):
        pts[:, i, 0, i] += step
        pts[:, i, 1, i] -= step
    vals = value(F, pts.reshape(-1, d)).reshape(m, d, 2)
    out = (vals[:, :, 0] - vals[:, :, 1]) / (2.0 * step)
    if not np.all(np.isfinite(out)):
        raise DerivativeFailure("non-finite finite-difference gradient")
    return out


def _hess_fd(F: AnisotropyFunction, y: np.ndarray, step: float) -> np.ndarray:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    m, d = y.shape
    h = np.empty((m, d, d))
    f0 = value(F, y)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = step
        fp = value(F, y + ei)
        fm = value(F, y - ei)
        h[:, i, i] = (fp - 2.0 * f0 + fm) / step**2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = step
            fpp = value(F, y + ei + ej)
            fpm = value(F, y + ei - ej)
            fmp = value(F, y - ei + ej)
            fmm = value(F, y - ei - ej)
            h[:, i, j] = h[:, j, i] = (fpp - fpm - fmp + fmm) / (4.0 * step**2)
    if not np.all(np.isfinite(h)):
        raise DerivativeFailure("non-finite finite-difference Hessian")
    return h


def ambient_grad(F: AnisotropyFunction, y: np.ndarray) -> np.ndarray:
    """Gradient of the homogeneous extension; rows follow the input shape."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    if F.derivative_mode == "analytic":
        out = _grad_analytic(F, np.atleast_2d(y))
    else:
        out = _grad_fd(F, y, F.fd_step)
    return out[0] if single else out


def ambient_hess(F: AnisotropyFunction, y: np.ndarray) -> np.ndarray:
    """Hessian of the homogeneous extension; (..., d, d)."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    if F.derivative_mode == "analytic":
        out = _hess_analytic(F, np.atleast_2d(y))
    else:
        out = _hess_fd(F, y, max(F.fd_step, HESS_STEP_FLOOR))
    return out[0] if single else out


# ---------------------------------------------------------------------------
# pointwise evaluation


@dataclass
class AnisotropyEval:
    """F and its sphere calculus at one unit direction.

    a_matrix/c_matrix are expressed in `basis`, an orthonormal basis (rows)
    of u-perp.  c_matrix is the symmetric square root of a_matrix and is None
    when a_matrix has an eigenvalue below -1e-8 (no real root exists).
    """

    u: np.ndarray
    value: float
    gradient: np.ndarray
    a_matrix: np.ndarray
    c_matrix: np.ndarray | None
    basis: np.ndarray
    min_eigenvalue: float

    def sqrt_a(self) -> np.ndarray:
        if self.c_matrix is None:
            raise ConvexityViolation(
                f"A_F has eigenvalue {self.min_eigenvalue:.3e} < -1e-8 at u={self.u}"
            )
        return self.c_matrix


def _check_unit(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    norm = np.linalg.norm(u)
    if abs(norm - 1.0) > UNIT_SLACK:
        raise NonUnitInput(f"|u| = {norm:.6g} deviates from 1 beyond {UNIT_SLACK}")
    return u / norm


def evaluate(F: AnisotropyFunction, u: np.ndarray) -> AnisotropyEval:
    """Value, sphere gradient, A_F and C_F of F at the unit direction u."""
    u = _check_unit(u)
    val = float(value(F, u))
    grad_amb = ambient_grad(F, u)
    grad = grad_amb - np.dot(grad_amb, u) * u
    basis = tangent_basis(u)
    hess = ambient_hess(F, u)
    a = basis @ hess @ basis.T
    a = 0.5 * (a + a.T)
    eigvals, eigvecs = np.linalg.eigh(a)
    min_eig = float(eigvals[0])
    if min_eig >= -AUDIT_TOLERANCE:
        c = (eigvecs * np.sqrt(np.maximum(eigvals, 0.0))) @ eigvecs.T
        c = 0.5 * (c + c.T)
    else:
        c = None
    return AnisotropyEval(
        u=u,
        value=val,
        gradient=grad,
        a_matrix=a,
        c_matrix=c,
        basis=basis,
        min_eigenvalue=min_eig,
    )


def phi(F: AnisotropyFunction, u: np.ndarray) -> np.ndarray:
    """Wulff map phi(u) = DF_u + F(u) u = grad Fhat(u)."""
    return ambient_grad(F, _check_unit(u))


def phi_batch(F: AnisotropyFunction, us: np.ndarray) -> np.ndarray:
    us = np.asarray(us, dtype=float)
    us = us / np.linalg.norm(us, axis=-1, keepdims=True)
    return ambient_grad(F, us)


# ---------------------------------------------------------------------------
# convexity audit


@dataclass
class ConvexityReport:
    """Outcome of scanning min eig(A_F) over a quasi-uniform sphere grid."""

    min_eigenvalue: float
    argmin_u: np.ndarray
    passed: bool
    tolerance: float
    grid_points: int


def min_eig_batch(F: AnisotropyFunction, us: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of A_F on u-perp for each row of us.

    Basis free: the ambient Hessian annihilates u, so shifting by a large
    multiple of u u^T pushes the radial eigenvalue above the tangential ones.
    """
    us = np.asarray(us, dtype=float)
    us = us / np.linalg.norm(us, axis=-1, keepdims=True)
    hess = ambient_hess(F, us)
    shift = np.linalg.norm(hess, axis=(-2, -1)) + 1.0
    shifted = hess + shift[..., None, None] * (us[..., :, None] * us[..., None, :])
    return np.linalg.eigvalsh(shifted)[..., 0]


def convexity_audit(
    F: AnisotropyFunction,
    grid_resolution: int = DEFAULT_AUDIT_RESOLUTION,
    tolerance: float = AUDIT_TOLERANCE,
) -> ConvexityReport:
    """Scan min eig(A_F) over the sphere; pass iff it clears the tolerance."""
    if grid_resolution < 8:
        raise ValueError("grid_resolution must be >= 8")
    grid = sphere_grid(F.sphere_dim, grid_resolution)
    mins = min_eig_batch(F, grid)
    idx = int(np.argmin(mins))
    min_eig = float(mins[idx])
    return ConvexityReport(
        min_eigenvalue=min_eig,
        argmin_u=grid[idx],
        passed=bool(min_eig > tolerance),
        tolerance=tolerance,
        grid_points=grid.shape[0],
    )


@lru_cache(maxsize=256)
def _audit_passed(F: AnisotropyFunction) -> bool:
    return convexity_audit(F).passed


def require_convex(F: AnisotropyFunction) -> None:
    """Raise ConvexityViolation unless the (cached) default audit passes."""
    if not _audit_passed(F):
        report = convexity_audit(F)
        raise ConvexityViolation(
            f"convexity audit failed: min eig(A_F) = {report.min_eigenvalue:.3e} "
            f"at u = {report.argmin_u}"
        )


# ---------------------------------------------------------------------------
# dual norm


@dataclass
class DualNormResult:
    value: float
    maximizer: np.ndarray
    converged: bool


@lru_cache(maxsize=8)
def _seed_directions(sphere_dim: int) -> np.ndarray:
    if sphere_dim == 1:
        return circle_grid(512)
    if sphere_dim == 2:
        return icosphere(3)[0]  # level-3 geodesic subdivision
    return spiral_sphere(sphere_dim + 1, 2048)


def dual_norm_batch(F: AnisotropyFunction, ys: np.ndarray) -> np.ndarray:
    """F*(y) for each row of ys; positively 1-homogeneous, F*(0) = 0."""
    return _dual_norm_core(F, np.atleast_2d(np.asarray(ys, dtype=float)))[0]


def dual_norm_detail(F: AnisotropyFunction, y: np.ndarray) -> DualNormResult:
    vals, zs, conv = _dual_norm_core(F, np.atleast_2d(np.asarray(y, dtype=float)))
    return DualNormResult(value=float(vals[0]), maximizer=zs[0], converged=bool(conv[0]))


def dual_norm(F: AnisotropyFunction, y: np.ndarray) -> float:
    """sup over unit z of <y,z>/F(z); warns if refinement stalls."""
    res = dual_norm_detail(F, y)
    if not res.converged:
        warnings.warn(
            "dual_norm refinement did not reach stationarity; returning best value",
            OptimizationDivergenceWarning,
        )
    return res.value


def _dual_norm_core(F: AnisotropyFunction, ys: np.ndarray):
    m, d = ys.shape
    norms = np.linalg.norm(ys, axis=1)
    live = norms > 0
    out = np.zeros(m)
    zs = np.zeros((m, d))
    zs[:, 0] = 1.0
    converged = np.ones(m, dtype=bool)
    if not np.any(live):
        return out, zs, converged

    y = ys[live]
    seeds = _seed_directions(F.sphere_dim)
    fvals = value(F, seeds)
    obj_grid = (y @ seeds.T) / fvals[None, :]
    z = seeds[np.argmax(obj_grid, axis=1)].copy()

    def objective(zz):
        return np.einsum("ij,ij->i", y, zz) / value(F, zz)

    obj = objective(z)
    step = np.full(obj.shape, 0.25)
    for _ in range(200):
        fz = value(F, z)
        grad = y / fz[:, None] - (obj / fz)[:, None] * ambient_grad(F, z)
        gnorm = np.linalg.norm(grad, axis=1)
        if np.all(gnorm < 1e-13 * np.maximum(norms[live], 1.0)):
            break
        cand = z + step[:, None] * grad
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        cand_obj = objective(cand)
        better = cand_obj > obj
        z = np.where(better[:, None], cand, z)
        obj = np.where(better, cand_obj, obj)
        step = np.where(better, np.minimum(step * 1.3, 1.0), step * 0.5)
        if np.all(step < 1e-14):
            break

    # stationarity check: residual tangential gradient relative to |y|
    fz = value(F, z)
    grad = y / fz[:, None] - (obj / fz)[:, None] * ambient_grad(F, z)
    stalled = np.linalg.norm(grad, axis=1) > 1e-5 * np.maximum(norms[live], 1.0)

    out[live] = obj
    zs[live] = z
    conv_live = ~stalled
    converged[live] = conv_live
    return out, zs, converged
