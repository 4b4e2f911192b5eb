"""Anisotropic parallel translation, focal submanifolds, and the Cartan residual.

The translation x_t = x + t*(phi o nu) satisfies dx_t = (I - t S_F) dx, so
anisotropic principal curvatures transform as lambda -> lambda/(1 - t*lambda)
and n*H_F(t) = -(log sum_k (-1)^k M_k t^k)'.  At t = 1/lambda_i the map
degenerates exactly on the curvature distribution D_i: each leaf collapses
to a focal point q with lambda_i (q - x) = phi o nu along the leaf.

The focal image's second fundamental form in direction nu is
    II_nu = C~^{-1} [ Lambda~ / (I - t Lambda~) ] C~^{-1},
with A~ the complementary block of A_F in the diagonalizing orthonormal
basis and C~ its square root; summing the inverse diagonals at antipodal
normals yields the Cartan-type identity sum_k Gamma_k lambda_k/(1-t lambda_k) = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .anisotropy import AnisotropyFunction, ambient_hess, evaluate, phi, require_convex
from .errors import (
    AntipodeNotFound,
    DegenerateTranslation,
    LeafDrift,
    NotIsoparametric,
    WulffLabError,
    ZeroCurvature,
)
from .hypersurface import (
    CLUSTER_TOL,
    CurvatureSpectrum,
    ImmersionPatch,
    anisotropic_curvatures,
    chart_grid,
    f_weingarten,
    frame_at,
    shape_operator,
)
from .util import float_text, json_ready

DEGENERACY_TOL = 1e-6
ISO_TOL = 1e-5
DRIFT_TOL = 1e-5
LEAF_STEP = 1e-2


@dataclass
class TranslationResult:
    """Translated patch x_t with its degeneracy scan."""

    t: float
    patch_t: ImmersionPatch
    min_singular_value: float
    degenerate: bool


def translate(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    t: float,
    sample_grid: np.ndarray | None = None,
    degeneracy_tol: float = DEGENERACY_TOL,
) -> TranslationResult:
    """Anisotropic parallel translation of a patch by t.

    The translated patch keeps the source normal field; its Jacobian is the
    exact composition dx (I - t S_F) and its second fundamental form uses
    <d2(phi o nu), nu> = -<Hess(nu) dnu, dnu>, so curvatures of x_t stay at
    analytic accuracy when the source patch is analytic.
    """
    require_convex(F)
    t = float(t)

    def value_fn(p):
        fr = frame_at(patch, p)
        return fr.x + t * phi(F, fr.nu)

    def jacobian_fn(p):
        s = f_weingarten(F, patch, p)
        fr = frame_at(patch, p)
        return fr.dx @ (np.eye(patch.chart_dim) - t * s)

    def second_form_fn(p, nu):
        fr = frame_at(patch, p)
        w = shape_operator(patch, p, fr)
        if patch.second_form is not None:
            b = np.asarray(patch.second_form(fr.params, fr.nu), dtype=float)
        else:
            b = np.einsum("dij,d->ij", patch.d2x(p), fr.nu)
        dnu = -fr.dx @ w
        b_t = b - t * (dnu.T @ ambient_hess(F, fr.nu) @ dnu)
        sign = 1.0 if float(np.dot(nu, fr.nu)) >= 0 else -1.0
        return sign * 0.5 * (b_t + b_t.T)

    patch_t = ImmersionPatch(
        ambient_dim=patch.ambient_dim,
        chart_dim=patch.chart_dim,
        domain=patch.domain.copy(),
        chart_map=value_fn,
        jacobian=jacobian_fn,
        second_form=second_form_fn,
        name=f"{patch.name or 'patch'}@t={t:g}",
        extras={"kind": "translation", "source": patch, "t": t},
    )

    grid = chart_grid(patch, 4) if sample_grid is None else np.atleast_2d(sample_grid)
    min_sv = np.inf
    for p in grid:
        sv = np.linalg.svd(patch_t.dx(p), compute_uv=False)
        min_sv = min(min_sv, float(sv[-1]))

    if min_sv >= degeneracy_tol:
        # fix orientation so the normal of x_t matches the source normal
        ref = grid[0]
        base = frame_at(patch_t, ref)
        if float(np.dot(base.nu, frame_at(patch, ref).nu)) < 0:
            patch_t.orientation = -1

    return TranslationResult(
        t=t,
        patch_t=patch_t,
        min_singular_value=min_sv,
        degenerate=bool(min_sv < degeneracy_tol),
    )


@dataclass
class TransformedSpectrum:
    t: float
    source: CurvatureSpectrum
    actual: CurvatureSpectrum
    predicted: np.ndarray
    max_deviation: float


def predicted_lambdas(lambdas: np.ndarray, t: float) -> np.ndarray:
    """lambda/(1 - t lambda), sorted descending."""
    lam = np.asarray(lambdas, dtype=float)
    if np.any(np.abs(1.0 - t * lam) < 1e-8):
        raise DegenerateTranslation(f"1 - t*lambda vanishes at t={t}")
    return np.sort(lam / (1.0 - t * lam))[::-1]


def transformed_spectrum(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    params,
    t: float,
    cluster_tol: float = CLUSTER_TOL,
) -> TransformedSpectrum:
    """Actual spectrum of the translated patch next to the transformation law."""
    source = anisotropic_curvatures(F, patch, params, cluster_tol)
    pred = predicted_lambdas(source.lambdas, t)
    result = translate(F, patch, t, sample_grid=np.atleast_2d(params))
    if result.degenerate:
        raise DegenerateTranslation(
            f"translation by t={t} degenerates at params {params}"
        )
    actual = anisotropic_curvatures(F, result.patch_t, params, cluster_tol)
    dev = float(np.abs(actual.lambdas - pred).max())
    return TransformedSpectrum(
        t=t, source=source, actual=actual, predicted=pred, max_deviation=dev
    )


def mean_profile(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    params,
    t_grid,
) -> list[tuple[float, float, float]]:
    """(t, H_F(t), generating prediction) rows over the t grid.

    H_F(t) is the mean of the law-transformed curvatures; the prediction is
    -(log P)'(t)/n with P(t) = sum_k (-1)^k M_k t^k from the source spectrum.
    """
    spec = anisotropic_curvatures(F, patch, params)
    lam = spec.lambdas
    n = lam.size
    for t in t_grid:
        nz = lam[np.abs(lam) > 1e-12]
        if nz.size and np.min(np.abs(t - 1.0 / nz)) < 1e-6:
            raise DegenerateTranslation(f"t={t} within 1e-6 of a focal value")
    # P(t) = sum_k (-1)^k M_k t^k; np.polyval wants highest degree first
    coeffs = [(-1.0) ** k * spec.sym_functions[k] for k in range(n + 1)]
    poly = np.array(coeffs[::-1])
    dpoly = np.polyder(poly)
    rows = []
    for t in t_grid:
        t = float(t)
        h_t = float(np.mean(lam / (1.0 - t * lam)))
        pred = -float(np.polyval(dpoly, t) / np.polyval(poly, t)) / n
        rows.append((t, h_t, pred))
    return rows


# ---------------------------------------------------------------------------
# focal machinery


@dataclass
class FocalData:
    """Focal image data for the curvature group at lambda_star (t = 1/lambda)."""

    lambda_star: float
    t: float
    q: np.ndarray
    leaf_samples: list = field(default_factory=list)  # (params, x, nu) triples
    leaf_residual: float = np.nan  # max |lambda*(q - x) - phi(nu)| over samples
    drift_max: float = np.nan  # max |x_t - q| over samples
    gauss_min_sv: float = np.nan  # min singular value of d(nu)|D_i over samples
    reduced_a: np.ndarray | None = None  # A~ block at the seed
    reduced_a_inv_diag: np.ndarray | None = None  # its inverse's diagonal
    ii_matrix: np.ndarray | None = None  # closed-form II_nu at the seed
    ii_direct_deviation: float = np.nan  # closed-form vs direct assembly
    d1_normal_angle: float = np.nan  # diagnostic, never asserted
    gamma: np.ndarray | None = None  # Gamma_k, k = 2..g
    other_group_values: np.ndarray | None = None  # lambda_k, k = 2..g
    cartan_residual: float = np.nan
    trace_antisymmetry: float = np.nan  # tr(II_u) + tr(II_-u)
    antipode_params: np.ndarray | None = None


def _group_index(spec: CurvatureSpectrum, lambda_star: float, cluster_tol: float) -> int:
    vals = spec.group_values()
    idx = int(np.argmin(np.abs(vals - lambda_star)))
    if abs(vals[idx] - lambda_star) > 10 * cluster_tol:
        raise WulffLabError(
            f"lambda_star={lambda_star} is not a curvature group value "
            f"(groups: {vals})"
        )
    return idx


class _LeafEngine:
    """Lean per-point state for leaf integration and Gauss-map work.

    Avoids rebuilding frames and full curvature spectra at every RK4 stage;
    eigen data lives in the orthonormal tangent coordinates of nu-perp,
    where subspace projections are plain Euclidean.
    """

    def __init__(self, F, patch, lambda_star, cluster_tol):
        self.F = F
        self.patch = patch
        self.lambda_star = float(lambda_star)
        self.tol = 10 * cluster_tol
        self.t = 1.0 / float(lambda_star)

    def state(self, p):
        patch = self.patch
        p = np.asarray(p, dtype=float)
        dx = patch.dx(p)
        u_svd, sing, _ = np.linalg.svd(dx, full_matrices=True)
        if sing[-1] < 1e-8:
            raise WulffLabError("rank-deficient Jacobian on leaf")
        nu = u_svd[:, -1]
        if np.linalg.det(np.column_stack([nu, dx])) < 0:
            nu = -nu
        nu = patch.orientation * nu
        metric = dx.T @ dx
        if patch.second_form is not None:
            b = np.asarray(patch.second_form(p, nu), dtype=float)
        else:
            b = np.einsum("dij,d->ij", patch.d2x(p), nu)
        w = np.linalg.solve(metric, 0.5 * (b + b.T))
        ev = evaluate(self.F, nu)
        c = ev.sqrt_a()
        bmat = ev.basis @ dx
        t_orth = bmat @ w @ np.linalg.inv(bmat)
        t_orth = 0.5 * (t_orth + t_orth.T)
        sym = c @ t_orth @ c
        vals, vecs = np.linalg.eigh(0.5 * (sym + sym.T))
        mask = np.abs(vals - self.lambda_star) < self.tol
        if not np.any(mask):
            raise WulffLabError("lambda_star group lost along leaf")
        return {
            "p": p, "dx": dx, "nu": nu, "metric": metric, "w": w,
            "bmat": bmat, "vals": vals, "vecs": vecs, "c": c, "mask": mask,
        }

    def group_chart_columns(self, st):
        eps = st["c"] @ st["vecs"][:, st["mask"]]
        return np.linalg.solve(st["bmat"], eps)

    def direction(self, p, prev_chart):
        st = self.state(p)
        eps = st["c"] @ st["vecs"][:, st["mask"]]  # orthonormal tangent coords
        q_mat, _ = np.linalg.qr(eps)
        prev_b = st["bmat"] @ prev_chart
        proj = q_mat @ (q_mat.T @ prev_b)
        if np.linalg.norm(proj) < 1e-10:
            proj = q_mat[:, 0]
        chart = np.linalg.solve(st["bmat"], proj)
        return chart / np.linalg.norm(chart)

    def normal(self, p):
        dx = self.patch.dx(p)
        u_svd, sing, _ = np.linalg.svd(dx, full_matrices=True)
        if sing[-1] < 1e-8:
            raise WulffLabError("rank-deficient Jacobian on leaf")
        nu = u_svd[:, -1]
        if np.linalg.det(np.column_stack([nu, dx])) < 0:
            nu = -nu
        return self.patch.orientation * nu

    def x_t(self, p):
        nu = self.normal(p)
        return self.patch.x(p) + self.t * phi(self.F, nu), nu


def _integrate_ray(
    engine: _LeafEngine,
    seed,
    direction,
    q,
    arc_length,
    step,
    n_record,
    drift_tol,
):
    """RK4 along the D_i eigen-direction field; returns recorded chart points."""
    patch = engine.patch
    lo, hi = patch.domain
    margin = 1e-6
    while True:
        steps = max(1, int(np.ceil(arc_length / step)))
        record_every = max(1, steps // max(1, n_record))
        p = np.asarray(seed, dtype=float).copy()
        prev = np.asarray(direction, dtype=float).copy()
        recorded = []
        drift = 0.0
        failed = False
        for i in range(steps):
            try:
                k1 = engine.direction(p, prev)
                k2 = engine.direction(p + 0.5 * step * k1, k1)
                k3 = engine.direction(p + 0.5 * step * k2, k2)
                k4 = engine.direction(p + step * k3, k3)
            except (np.linalg.LinAlgError, WulffLabError):
                break
            p_next = p + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if np.any(p_next < lo + margin) or np.any(p_next > hi - margin):
                break
            p = p_next
            prev = k4
            xt, _ = engine.x_t(p)
            d = float(np.linalg.norm(xt - q))
            drift = max(drift, d)
            if d > drift_tol:
                failed = True
                break
            if (i + 1) % record_every == 0:
                recorded.append(p.copy())
        if not failed:
            return recorded, drift
        step *= 0.5
        if step < 1e-6:
            raise LeafDrift(
                f"leaf drift {drift:.3e} exceeds {drift_tol} even at step {step:.1e}"
            )


def focal_map(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    lambda_star: float,
    seed_params,
    leaf_resolution: int = 48,
    step: float = LEAF_STEP,
    arc_length: float = 1.05 * np.pi,
    cluster_tol: float = CLUSTER_TOL,
    drift_tol: float = DRIFT_TOL,
) -> FocalData:
    """Focal point q = x_t(seed) at t = 1/lambda_star plus integrated leaf samples.

    Leaves are traced by integrating the eigen-direction field of the
    lambda_star group from the seed (one ray per group direction and sign);
    every sample is checked for x_t-constancy and the corrected leaf equation
    lambda*(q - x) = phi(nu).
    """
    if lambda_star == 0:
        raise ZeroCurvature("focal construction needs lambda_star != 0")
    require_convex(F)
    seed = np.asarray(seed_params, dtype=float)
    t = 1.0 / float(lambda_star)
    spec = anisotropic_curvatures(F, patch, seed, cluster_tol)
    gi = _group_index(spec, lambda_star, cluster_tol)
    cols = spec.group_columns(gi)
    m = cols.shape[1]

    engine = _LeafEngine(F, patch, lambda_star, cluster_tol)
    q, _ = engine.x_t(seed)
    data = FocalData(lambda_star=float(lambda_star), t=t, q=q)

    rays = []
    for j in range(m):
        d0 = cols[:, j] / np.linalg.norm(cols[:, j])
        rays.append(d0)
        rays.append(-d0)

    per_ray = max(2, leaf_resolution // len(rays))
    points = [seed.copy()]
    drift = 0.0
    for d0 in rays:
        rec, dmax = _integrate_ray(
            engine, seed, d0, q, arc_length, step, per_ray, drift_tol
        )
        points.extend(rec)
        drift = max(drift, dmax)

    samples = []
    leaf_res = 0.0
    gauss_min = np.inf
    for p in points:
        st = engine.state(p)
        x = patch.x(p)
        nu = st["nu"]
        samples.append((p, x, nu))
        res = np.linalg.norm(lambda_star * (q - x) - phi(F, nu))
        leaf_res = max(leaf_res, float(res))
        # Gauss-map nondegeneracy on the leaf: d(nu) restricted to D_i
        cols_p = engine.group_chart_columns(st)
        amb = st["dx"] @ cols_p
        q_mat, _ = np.linalg.qr(amb)
        chart_orth = np.linalg.solve(st["metric"], st["dx"].T @ q_mat)
        dnu_cols = -st["dx"] @ st["w"] @ chart_orth
        sv = np.linalg.svd(dnu_cols, compute_uv=False)
        gauss_min = min(gauss_min, float(sv[-1]))

    data.leaf_samples = samples
    data.leaf_residual = leaf_res
    data.drift_max = drift
    data.gauss_min_sv = gauss_min
    return data


def _ordered_eigen_data(F, patch, params, lambda_star, cluster_tol):
    """Eigen data at a point, ordered with the lambda_star block first.

    Returns dict with the symmetrized eigenvalues/vectors in the orthonormal
    tangent coordinates, the A_F matrix in the diagonalizing basis, group
    slices for the complementary blocks, and the frames needed downstream.
    """
    fr = frame_at(patch, params)
    w = shape_operator(patch, params, fr)
    ev = evaluate(F, fr.nu)
    c = ev.sqrt_a()
    bmat = ev.basis @ fr.dx
    t_orth = bmat @ w @ np.linalg.inv(bmat)
    t_orth = 0.5 * (t_orth + t_orth.T)
    sym = c @ t_orth @ c
    sym = 0.5 * (sym + sym.T)
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]

    # cluster and rotate the lambda_star block to the front
    bounds = [0]
    for i in range(1, vals.size + 1):
        if i == vals.size or vals[i - 1] - vals[i] > cluster_tol:
            bounds.append(i)
    blocks = [
        list(range(bounds[j], bounds[j + 1])) for j in range(len(bounds) - 1)
    ]
    block_vals = [float(np.mean(vals[b])) for b in blocks]
    star = int(np.argmin(np.abs(np.array(block_vals) - lambda_star)))
    if abs(block_vals[star] - lambda_star) > 10 * cluster_tol:
        raise WulffLabError(
            f"lambda_star={lambda_star} not among curvature groups {block_vals}"
        )
    perm = blocks[star] + [i for j, b in enumerate(blocks) if j != star for i in b]
    vals, vecs = vals[perm], vecs[:, perm]
    m_star = len(blocks[star])
    other_blocks = []
    start = m_star
    for j, b in enumerate(blocks):
        if j == star:
            continue
        other_blocks.append((block_vals[j], slice(start - m_star, start - m_star + len(b))))
        start += len(b)

    a_in_e = vecs.T @ ev.a_matrix @ vecs  # A_F in the diagonalizing basis
    eps_coords = c @ vecs  # epsilon_i = C_F e_i, in orthonormal tangent coords
    return {
        "frame": fr,
        "w": w,
        "bmat": bmat,
        "vals": vals,
        "vecs": vecs,
        "m_star": m_star,
        "other_blocks": other_blocks,
        "a_in_e": 0.5 * (a_in_e + a_in_e.T),
        "eps_coords": eps_coords,
    }


def _second_form_at(F, patch, params, lambda_star, cluster_tol):
    """Closed-form and direct focal second fundamental forms at one leaf point."""
    t = 1.0 / lambda_star
    data = _ordered_eigen_data(F, patch, params, lambda_star, cluster_tol)
    fr, w, bmat = data["frame"], data["w"], data["bmat"]
    vals, m_star = data["vals"], data["m_star"]
    n = vals.size
    comp = slice(m_star, n)
    lam_c = vals[comp]
    a_tilde = data["a_in_e"][comp, comp]
    ev_a, vec_a = np.linalg.eigh(a_tilde)
    if ev_a[0] <= 0:
        raise WulffLabError("complementary A_F block is not positive definite")
    c_tilde = (vec_a * np.sqrt(ev_a)) @ vec_a.T
    c_tilde_inv = (vec_a / np.sqrt(ev_a)) @ vec_a.T
    ii_closed = c_tilde_inv @ np.diag(lam_c / (1.0 - t * lam_c)) @ c_tilde_inv
    ii_closed = 0.5 * (ii_closed + ii_closed.T)

    # direct assembly: orthonormal basis e~_a of x_t(M), then <dx_t e~, -d(nu) e~>
    eps_comp = data["eps_coords"][:, comp]  # orthonormal tangent coords
    coords = eps_comp @ np.diag(1.0 / (1.0 - t * lam_c)) @ c_tilde_inv
    chart_cols = np.linalg.solve(bmat, coords)
    s_chart = f_weingarten(F, patch, params)
    jac_t = fr.dx @ (np.eye(n) - t * s_chart)
    dxt = jac_t @ chart_cols
    minus_dnu = fr.dx @ w @ chart_cols
    ii_direct = dxt.T @ minus_dnu
    ii_direct = 0.5 * (ii_direct + ii_direct.T)
    deviation = float(np.abs(ii_closed - ii_direct).max()) if lam_c.size else 0.0

    # diagnostic: principal angle between D_1 and the focal normal space
    d1_amb = fr.dx @ np.linalg.solve(bmat, data["eps_coords"][:, :m_star])
    q1, _ = np.linalg.qr(d1_amb)
    if lam_c.size:
        qt, _ = np.linalg.qr(dxt)
        overlap = qt.T @ q1
        # cos of principal angles to the tangent; angle to normal space is
        # the complement
        sv = np.linalg.svd(overlap, compute_uv=False)
        angle = float(np.arcsin(np.clip(sv.max(), 0.0, 1.0)))
    else:
        angle = 0.0

    return {
        "a_tilde": a_tilde,
        "a_inv_diag": np.diag(np.linalg.inv(a_tilde)).copy(),
        "ii": ii_closed,
        "deviation": deviation,
        "other_blocks": data["other_blocks"],
        "lam_c": lam_c,
        "d1_normal_angle": angle,
        "frame": fr,
    }


def focal_second_form(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    lambda_star: float,
    seed_params,
    iso_tol: float = ISO_TOL,
    cluster_tol: float = CLUSTER_TOL,
    focal: FocalData | None = None,
    leaf_resolution: int = 48,
    step: float = LEAF_STEP,
) -> FocalData:
    """Second fundamental form of the focal image x_t(M) at q, both routes.

    Checks the patch is anisotropic isoparametric along the integrated leaf
    (curvature drift below iso_tol), then assembles II_nu directly and from
    the closed form; the two must agree to 1e-6.
    """
    if focal is None:
        focal = focal_map(
            F, patch, lambda_star, seed_params,
            leaf_resolution=leaf_resolution, cluster_tol=cluster_tol, step=step,
        )
    seed = np.asarray(seed_params, dtype=float)
    ref = anisotropic_curvatures(F, patch, seed, cluster_tol).lambdas
    drift = 0.0
    stride = max(1, len(focal.leaf_samples) // 12)
    for p, _, _ in focal.leaf_samples[::stride]:
        lam = anisotropic_curvatures(F, patch, p, cluster_tol).lambdas
        drift = max(drift, float(np.abs(lam - ref).max()))
    if drift > iso_tol:
        raise NotIsoparametric(
            f"curvature drift {drift:.3e} along the leaf exceeds iso_tol={iso_tol}"
        )

    forms = _second_form_at(F, patch, seed, lambda_star, cluster_tol)
    if forms["deviation"] > 1e-6:
        raise WulffLabError(
            f"focal II routes disagree by {forms['deviation']:.3e}"
        )
    focal.reduced_a = forms["a_tilde"]
    focal.reduced_a_inv_diag = forms["a_inv_diag"]
    focal.ii_matrix = forms["ii"]
    focal.ii_direct_deviation = forms["deviation"]
    focal.d1_normal_angle = forms["d1_normal_angle"]
    return focal


def _find_antipode(F, patch, lambda_star, focal: FocalData, cluster_tol, target):
    """Damped Gauss-Newton on the leaf for the point with nu = target."""
    engine = _LeafEngine(F, patch, lambda_star, cluster_tol)
    best = None
    best_score = -np.inf
    for p, _, nu in focal.leaf_samples:
        score = float(np.dot(nu, target))
        if score > best_score:
            best_score, best = score, np.asarray(p, dtype=float)
    p = best.copy()
    for _ in range(60):
        st = engine.state(p)
        r = st["nu"] - target
        if np.linalg.norm(r) < 1e-10:
            return p
        cols = engine.group_chart_columns(st)
        jac = -st["dx"] @ st["w"] @ cols  # d(nu) along the leaf directions
        alpha, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        eta = 1.0
        base = np.linalg.norm(r)
        while eta > 1e-4:
            cand = p + eta * (cols @ alpha)
            try:
                cand_r = np.linalg.norm(frame_at(patch, cand).nu - target)
            except WulffLabError:
                cand_r = np.inf
            if cand_r < base:
                p = cand
                break
            eta *= 0.5
        else:
            break
    res = float(np.linalg.norm(frame_at(patch, p).nu - target))
    if res < 1e-8:
        return p
    raise AntipodeNotFound(f"Gauss-map inversion stalled at residual {res:.3e}")


def cartan_residual(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    lambda_star: float,
    seed_params,
    iso_tol: float = ISO_TOL,
    cluster_tol: float = CLUSTER_TOL,
    leaf_resolution: int = 48,
    focal: FocalData | None = None,
    step: float = LEAF_STEP,
) -> FocalData:
    """Complete focal data including Gamma_k coefficients and the Cartan sum.

    Locates the antipodal leaf point (nu = -u), sums the inverse diagonals of
    the complementary A_F blocks at the two points per curvature group, and
    evaluates sum_k Gamma_k lambda_k/(1 - t lambda_k).  Also checks
    tr(II_{-u}) = -tr(II_u).
    """
    focal = focal_second_form(
        F, patch, lambda_star, seed_params,
        iso_tol=iso_tol, cluster_tol=cluster_tol, leaf_resolution=leaf_resolution,
        focal=focal, step=step,
    )
    seed = np.asarray(seed_params, dtype=float)
    u = frame_at(patch, seed).nu
    p2 = _find_antipode(F, patch, lambda_star, focal, cluster_tol, -u)
    focal.antipode_params = p2

    forms1 = _second_form_at(F, patch, seed, lambda_star, cluster_tol)
    forms2 = _second_form_at(F, patch, p2, lambda_star, cluster_tol)

    gammas, lams, residual = [], [], 0.0
    t = focal.t
    for (val1, sl1), (_, sl2) in zip(forms1["other_blocks"], forms2["other_blocks"]):
        gamma = float(
            forms1["a_inv_diag"][sl1].sum() + forms2["a_inv_diag"][sl2].sum()
        )
        gammas.append(gamma)
        lams.append(val1)
        residual += gamma * val1 / (1.0 - t * val1)
    focal.gamma = np.array(gammas)
    focal.other_group_values = np.array(lams)
    focal.cartan_residual = float(residual)

    tr_sum = float(np.trace(forms1["ii"]) + np.trace(forms2["ii"]))
    focal.trace_antisymmetry = tr_sum
    if abs(tr_sum) > 1e-6:
        raise WulffLabError(
            f"trace antisymmetry violated: tr(II_u) + tr(II_-u) = {tr_sum:.3e}"
        )
    return focal


# ---------------------------------------------------------------------------
# reports

SWEEP_CSV_SCHEMA = "wulfflab-translation-sweep-v1"


def translation_sweep_rows(F, patch, t_grid, sample_grid):
    """Per t: min singular value of dx_t and per-point |actual - predicted|."""
    sample_grid = np.atleast_2d(sample_grid)
    rows = []
    for t in t_grid:
        result = translate(F, patch, float(t), sample_grid=sample_grid)
        devs = []
        for p in sample_grid:
            if result.degenerate:
                devs.append(np.nan)
                continue
            try:
                devs.append(transformed_spectrum(F, patch, p, float(t)).max_deviation)
            except DegenerateTranslation:
                devs.append(np.nan)
        rows.append((float(t), result.min_singular_value, devs))
    return rows


def write_translation_sweep_csv(path, F, patch, t_grid, sample_grid):
    rows = translation_sweep_rows(F, patch, t_grid, sample_grid)
    npoints = len(rows[0][2]) if rows else 0
    header = ["t", "min_singular_value"] + [f"lambda_dev_{i}" for i in range(npoints)]
    with open(path, "w") as fh:
        fh.write(f"# schema: {SWEEP_CSV_SCHEMA}\n")
        fh.write(",".join(header) + "\n")
        for t, sv, devs in rows:
            fh.write(",".join(float_text(v) for v in [t, sv] + list(devs)) + "\n")


def focal_to_json_dict(focal: FocalData) -> dict:
    return json_ready(
        {
            "lambda_star": focal.lambda_star,
            "t": focal.t,
            "q": focal.q,
            "n_leaf_samples": len(focal.leaf_samples),
            "leaf_residual": focal.leaf_residual,
            "drift_max": focal.drift_max,
            "gauss_min_sv": focal.gauss_min_sv,
            "reduced_a": focal.reduced_a,
            "reduced_a_inv_diag": focal.reduced_a_inv_diag,
            "ii_matrix": focal.ii_matrix,
            "ii_direct_deviation": focal.ii_direct_deviation,
            "d1_normal_angle": focal.d1_normal_angle,
            "gamma": focal.gamma,
            "other_group_values": focal.other_group_values,
            "cartan_residual": focal.cartan_residual,
            "trace_antisymmetry": focal.trace_antisymmetry,
        }
    )


def focal_to_json(focal: FocalData) -> str:
    return json.dumps(focal_to_json_dict(focal), sort_keys=True, indent=2)
