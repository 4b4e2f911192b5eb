"""Isoparametric detection, classification of complete examples, and the
rotationally symmetric inverse fit.

The classification follows the complete-hypersurface trichotomy: a plane
(g = 1, lambda = 0), the Wulff shape (g = 1, lambda != 0, verified against
the dual norm after a center fit), or a sub-Wulff product (g = 2 with one
zero group, verified through the Cartan residual and the vanishing focal
second form).  Completeness is an input assertion: local patches may
legitimately show spectra (e.g. g = 3) that cannot occur for complete
hypersurfaces, and are reported as local_only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .anisotropy import (
    AnisotropyFunction,
    convexity_audit,
    dual_norm_batch,
    min_eig_batch,
)
from .catalog import axisymmetric
from .errors import ConvexityViolation
from .hypersurface import (
    CLUSTER_TOL,
    ImmersionPatch,
    anisotropic_curvatures,
    chart_grid,
    frame_at,
)
from .parallel_focal import ISO_TOL, cartan_residual
from .spheregrid import sphere_grid
from .util import json_ready, parallel_map

CASES = (
    "plane",
    "wulff_shape",
    "product_k",
    "local_only",
    "not_isoparametric",
    "inconsistent_completeness",
)


@dataclass
class DetectReport:
    isoparametric: bool
    spread: float
    g: int | None
    groups: list | None  # pooled (value, multiplicity)
    group_stats: list  # per group: (mean, min, max, std)
    group_mismatch: bool
    gs_seen: tuple


def _as_grid(patch: ImmersionPatch, sample_grid) -> np.ndarray:
    if sample_grid is None:
        sample_grid = 5
    if np.isscalar(sample_grid):
        return chart_grid(patch, int(sample_grid))
    return np.atleast_2d(np.asarray(sample_grid, dtype=float))


def detect_isoparametric(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    sample_grid=None,
    iso_tol: float = ISO_TOL,
    cluster_tol: float = CLUSTER_TOL,
) -> DetectReport:
    """Constancy check of the anisotropic principal curvatures over a grid.

    Groups are matched across points by sorted order; a varying group count
    is reported as non-isoparametric (group_mismatch) rather than raised.
    """
    grid = _as_grid(patch, sample_grid)
    specs = [anisotropic_curvatures(F, patch, p, cluster_tol) for p in grid]
    gs = tuple(sorted({s.g for s in specs}))
    if len(gs) != 1 or any(
        [m for _, m in s.groups] != [m for _, m in specs[0].groups] for s in specs
    ):
        lam = np.array([s.lambdas for s in specs])
        spread = float((lam.max(axis=0) - lam.min(axis=0)).max())
        return DetectReport(
            isoparametric=False, spread=spread, g=None, groups=None,
            group_stats=[], group_mismatch=True, gs_seen=gs,
        )
    g = specs[0].g
    values = np.array([[v for v, _ in s.groups] for s in specs])  # (npts, g)
    stats = [
        (float(values[:, j].mean()), float(values[:, j].min()),
         float(values[:, j].max()), float(values[:, j].std()))
        for j in range(g)
    ]
    spread = float((values.max(axis=0) - values.min(axis=0)).max())
    pooled = [
        (float(values[:, j].mean()), specs[0].groups[j][1]) for j in range(g)
    ]
    return DetectReport(
        isoparametric=bool(spread < iso_tol),
        spread=spread,
        g=g,
        groups=pooled,
        group_stats=stats,
        group_mismatch=False,
        gs_seen=gs,
    )


@dataclass
class ClassificationVerdict:
    case: str
    isoparametric: bool
    spread: float
    g: int | None
    groups: list | None
    k: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return json_ready(
            {
                "case": self.case,
                "isoparametric": self.isoparametric,
                "spread": self.spread,
                "g": self.g,
                "groups": self.groups,
                "k": self.k,
                "diagnostics": self.diagnostics,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)


def _wulff_center_fit(F, patch, grid, lam):
    """Least-squares center q for the dual-norm cross-check |F*(|lam|(x-q))| = 1."""
    xs = np.array([frame_at(patch, p).x for p in grid])
    scale = abs(lam)

    def objective(q):
        vals = dual_norm_batch(F, scale * (xs - q))
        return float(np.sum((vals - 1.0) ** 2))

    q0 = xs.mean(axis=0)
    res = minimize(objective, q0, method="Nelder-Mead",
                   options={"maxiter": 400, "xatol": 1e-10, "fatol": 1e-14})
    q = res.x
    residual = float(np.abs(dual_norm_batch(F, scale * (xs - q)) - 1.0).max())
    return q, residual


def classify(
    F: AnisotropyFunction,
    patch: ImmersionPatch,
    sample_grid=None,
    completeness_asserted: bool = False,
    iso_tol: float = ISO_TOL,
    cluster_tol: float = CLUSTER_TOL,
    cross_check: bool = True,
    leaf_step: float = 0.03,
) -> ClassificationVerdict:
    """Case label of the complete-hypersurface trichotomy, with diagnostics.

    Without the completeness assertion every isoparametric patch is
    local_only (local examples with g >= 3 exist and are legitimate).  With
    it, spectra inconsistent with the trichotomy are labelled
    inconsistent_completeness rather than forced into a case.
    """
    grid = _as_grid(patch, sample_grid)
    report = detect_isoparametric(F, patch, grid, iso_tol, cluster_tol)
    diagnostics: dict = {"spread": report.spread, "group_stats": report.group_stats}
    base = dict(
        isoparametric=report.isoparametric,
        spread=report.spread,
        g=report.g,
        groups=report.groups,
        diagnostics=diagnostics,
    )
    if not report.isoparametric:
        diagnostics["group_mismatch"] = report.group_mismatch
        return ClassificationVerdict(case="not_isoparametric", **base)
    if not completeness_asserted:
        return ClassificationVerdict(case="local_only", **base)

    values = np.array([v for v, _ in report.groups])
    mults = [m for _, m in report.groups]
    if report.g == 1:
        lam = float(values[0])
        if abs(lam) < cluster_tol:
            return ClassificationVerdict(case="plane", **base)
        if cross_check:
            q, residual = _wulff_center_fit(F, patch, grid, lam)
            diagnostics["wulff_center"] = q
            diagnostics["wulff_dual_norm_residual"] = residual
        return ClassificationVerdict(case="wulff_shape", **base)
    if report.g == 2:
        zero = np.abs(values) < cluster_tol
        if zero.sum() == 1:
            nz = int(np.flatnonzero(~zero)[0])
            k = mults[nz]
            if cross_check:
                seed = grid[len(grid) // 2]
                focal = cartan_residual(
                    F, patch, float(values[nz]), seed,
                    iso_tol=max(iso_tol, 10 * report.spread + 1e-12),
                    cluster_tol=cluster_tol, step=leaf_step,
                )
                diagnostics["cartan_residual"] = focal.cartan_residual
                diagnostics["focal_ii_norm"] = float(np.abs(focal.ii_matrix).max())
                diagnostics["leaf_residual"] = focal.leaf_residual
            return ClassificationVerdict(case="product_k", k=k, **base)
        diagnostics["lemma_violation"] = "g = 2 with two nonzero groups"
        return ClassificationVerdict(case="inconsistent_completeness", **base)
    diagnostics["lemma_violation"] = f"g = {report.g} >= 3"
    return ClassificationVerdict(case="inconsistent_completeness", **base)


# ---------------------------------------------------------------------------
# inverse fit


@dataclass
class FitOptions:
    restarts: int = 5
    max_iter: int = 500
    max_fev: int = 3000
    target_spread: float = 1e-3
    seed: int = 0
    penalty: float = 100.0
    margin: float = 0.05
    coeff_box: float = 0.6
    audit_resolution: int = 16


@dataclass
class FitResult:
    coefficients: tuple
    objective_history: list
    final_spread: float
    normalized_spectrum: np.ndarray
    anisotropy: AnisotropyFunction
    converged: bool
    objective: float

    def to_json_dict(self) -> dict:
        return json_ready(
            {
                "coefficients": list(self.coefficients),
                "objective": self.objective,
                "objective_history": self.objective_history,
                "final_spread": self.final_spread,
                "normalized_spectrum": self.normalized_spectrum,
                "converged": self.converged,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)


def _candidate(ambient_dim: int, free: np.ndarray) -> AnisotropyFunction:
    return axisymmetric(ambient_dim, (1.0,) + tuple(float(v) for v in free))


def _spectra_over_grid(F, patch, grid):
    return np.array(
        [anisotropic_curvatures(F, patch, p).lambdas for p in grid]
    )


def fit_anisotropy(
    target: ImmersionPatch,
    basis_degree: int = 8,
    sample_grid=None,
    options: FitOptions | None = None,
) -> FitResult:
    """Fit an axisymmetric even-series F that makes the target isoparametric.

    Minimizes sum_i Var(lambda_i over the grid) plus a convexity penalty
    penalty * max(0, margin - min eig A_F)^2, over the series coefficients
    with c0 = 1 as the scale gauge.  Restart 0 starts from the isotropic
    center of the coefficient box; the remaining restarts are seeded
    uniformly inside it, run independently, and the best objective wins
    (ties broken by restart index).
    """
    if basis_degree % 2 != 0 or not 2 <= basis_degree <= 8:
        raise ValueError("basis_degree must be even and within [2, 8]")
    opts = options or FitOptions()
    grid = _as_grid(target, sample_grid if sample_grid is not None else 5)
    nfree = basis_degree // 2
    d = target.ambient_dim
    audit_grid = sphere_grid(d - 1, opts.audit_resolution)

    def objective(free):
        Fc = _candidate(d, free)
        min_eig = float(min_eig_batch(Fc, audit_grid).min())
        pen = opts.penalty * max(0.0, opts.margin - min_eig) ** 2
        if min_eig <= 0:
            return 1e3 + pen  # not evaluable: outside the convex region
        try:
            lam = _spectra_over_grid(Fc, target, grid)
        except (ConvexityViolation, np.linalg.LinAlgError):
            return 1e3 + pen
        return float(lam.var(axis=0).sum()) + pen

    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(nfree)]
    for _ in range(max(0, opts.restarts - 1)):
        starts.append(rng.uniform(-opts.coeff_box, opts.coeff_box, nfree))

    def run(start):
        # keep the best-ever iterate ourselves: on flat objectives Powell's
        # line searches wander while the value stays put, and the seed
        # (isotropic for restart 0) must win such ties
        history = []
        best = {"val": np.inf, "x": np.asarray(start, dtype=float).copy()}

        def tracked(free):
            val = objective(free)
            if val < best["val"]:
                best["val"] = val
                best["x"] = np.asarray(free, dtype=float).copy()
                history.append(val)
            return val

        tracked(start)
        minimize(
            tracked,
            start,
            method="Powell",
            bounds=[(-opts.coeff_box, opts.coeff_box)] * nfree,
            options={
                "maxiter": opts.max_iter,
                "maxfev": opts.max_fev,
                "xtol": 1e-12,
                "ftol": 1e-14,
            },
        )
        return best["val"], best["x"], history

    outcomes = parallel_map(run, starts)
    best_idx = 0
    for i, (fun, _, _) in enumerate(outcomes):
        if fun < outcomes[best_idx][0]:
            best_idx = i
    best_fun, best_x, history = outcomes[best_idx]

    F_fit = _candidate(d, best_x)
    if not convexity_audit(F_fit).passed:
        raise ConvexityViolation("fit produced no audited final iterate")
    lam = _spectra_over_grid(F_fit, target, grid)
    final_spread = float(lam.std(axis=0).max())
    mean_spectrum = lam.mean(axis=0)
    scale = np.abs(mean_spectrum).max()
    normalized = mean_spectrum / scale if scale > 0 else mean_spectrum
    return FitResult(
        coefficients=F_fit.params,
        objective_history=history,
        final_spread=final_spread,
        normalized_spectrum=normalized,
        anisotropy=F_fit,
        converged=bool(final_spread <= opts.target_spread),
        objective=float(best_fun),
    )
