"""Wulff shapes, sub-Wulff shapes, and the product immersions built on them.

The Wulff shape W_F is the phi-image of the unit sphere and coincides with
the unit ball boundary of the dual norm F*; sub-Wulff shapes are phi-images
of totally geodesic subspheres.  The product immersion

    (u, v) -> v - t * phi(u),   u in S^k, v in the complement R^{n-k},

is an immersion with Gauss map nu = u and two constant anisotropic principal
curvatures 1/t (multiplicity k) and 0 (multiplicity n-k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anisotropy import (
    AnisotropyFunction,
    ambient_hess,
    phi_batch,
    require_convex,
)
from .errors import ZeroT
from .hypersurface import ImmersionPatch, frame_at
from .spheregrid import (
    chart_center,
    chart_domain,
    icosphere,
    icosphere_level_for,
    orthonormal_complement,
    sphere_chart,
    sphere_grid,
)
from .util import float_text


@dataclass
class SubsphereSpec:
    """A totally geodesic S^k inside S^n, given by the R^{k+1} it spans.

    frame rows are an orthonormal basis of that R^{k+1} in R^{n+1}.
    """

    k: int
    frame: np.ndarray

    def __post_init__(self):
        self.frame = np.asarray(self.frame, dtype=float)
        if self.frame.shape[0] != self.k + 1:
            raise ValueError("frame must have k+1 rows")
        gram = self.frame @ self.frame.T
        if np.abs(gram - np.eye(self.k + 1)).max() > 1e-10:
            raise ValueError("frame rows must be orthonormal")
        if not 1 <= self.k <= self.frame.shape[1] - 2:
            raise ValueError("need 1 <= k <= n-1, with n = ambient_dim - 1... see spec")

    @staticmethod
    def axis_aligned(k: int, ambient_dim: int, axes=None) -> "SubsphereSpec":
        """Subsphere spanned by coordinate axes (the first k+1 by default)."""
        axes = list(range(k + 1)) if axes is None else list(axes)
        frame = np.zeros((k + 1, ambient_dim))
        for row, axis in enumerate(axes):
            frame[row, axis] = 1.0
        return SubsphereSpec(k=k, frame=frame)

    def complement(self) -> np.ndarray:
        return orthonormal_complement(self.frame)


@dataclass
class WulffSample:
    """Sampled (u, phi(u)) pairs, optionally with a watertight triangulation."""

    us: np.ndarray
    points: np.ndarray
    faces: np.ndarray | None = None


def sample_wulff(F: AnisotropyFunction, resolution: int = 64) -> WulffSample:
    """Apply phi to a quasi-uniform grid on S^n; triangulated when n = 2."""
    require_convex(F)
    if F.sphere_dim == 2:
        us, faces = icosphere(icosphere_level_for(resolution * resolution))
    else:
        us, faces = sphere_grid(F.sphere_dim, resolution), None
    return WulffSample(us=us, points=phi_batch(F, us), faces=faces)


def sample_sub_wulff(
    F: AnisotropyFunction, spec: SubsphereSpec, resolution: int = 64
) -> WulffSample:
    """phi-image of the embedded S^k; lies on W_F but is generally non-planar."""
    require_convex(F)
    if spec.frame.shape[1] != F.ambient_dim:
        raise ValueError("spec frame does not match ambient dimension")
    faces = None
    if spec.k == 2:
        small, faces = icosphere(icosphere_level_for(resolution * resolution))
    else:
        small = sphere_grid(spec.k, resolution)
    us = small @ spec.frame
    return WulffSample(us=us, points=phi_batch(F, us), faces=faces)


# Chart B rotates the S^k factor so the two charts' polar loci are disjoint.
def _cap_rotation(k: int, chart: str) -> np.ndarray:
    rot = np.eye(k + 1)
    if chart == "b":
        rot[0, 0] = rot[k, k] = 0.0
        rot[0, k] = 1.0
        rot[k, 0] = -1.0
    elif chart != "a":
        raise ValueError("chart must be 'a' or 'b'")
    return rot


def product_immersion(
    F: AnisotropyFunction,
    spec: SubsphereSpec,
    t: float,
    v_halfwidth: float = 1.0,
    chart: str = "a",
) -> ImmersionPatch:
    """Patch of the immersion (u, v) -> v - t*phi(u) with Gauss map nu = u.

    Chart coordinates are k hyperspherical angles on S^k (poles excluded;
    charts 'a' and 'b' cover complementary caps) followed by n-k linear
    coordinates on the complement of spec's R^{k+1}.
    """
    if t == 0:
        raise ZeroT("product immersion needs t != 0")
    require_convex(F)
    d = F.ambient_dim
    if spec.frame.shape[1] != d:
        raise ValueError("spec frame does not match ambient dimension")
    k = spec.k
    n = d - 1
    rot = _cap_rotation(k, chart)
    embed = rot @ spec.frame  # (k+1, d): u_small -> ambient
    comp = spec.complement()  # (n-k, d)

    def u_of(params):
        return sphere_chart(np.asarray(params)[:k], 0) @ embed

    def chart_map(params):
        params = np.asarray(params, dtype=float)
        u = sphere_chart(params[:k], 0) @ embed
        return params[k:] @ comp - t * np.asarray(
            phi_batch(F, u[None, :])[0]
        )

    def jacobian(params):
        params = np.asarray(params, dtype=float)
        u_small, du_small = sphere_chart(params[:k], 1)
        u = u_small @ embed
        du = embed.T @ du_small  # (d, k)
        jac = np.empty((d, n))
        jac[:, :k] = -t * (ambient_hess(F, u) @ du)
        jac[:, k:] = comp.T
        return jac

    def second_form(params, nu):
        # <d2x, u> = t * du^T Hess(u) du exactly: Hess u = 0 kills the
        # curvature-of-chart term and contracts the third derivative of the
        # homogeneous extension to -Hess.
        params = np.asarray(params, dtype=float)
        u_small, du_small = sphere_chart(params[:k], 1)
        u = u_small @ embed
        du = embed.T @ du_small
        sign = 1.0 if float(np.dot(nu, u)) >= 0 else -1.0
        b = np.zeros((n, n))
        b[:k, :k] = sign * t * (du.T @ ambient_hess(F, u) @ du)
        return b

    dom_theta = chart_domain(k)
    domain = np.column_stack(
        [dom_theta, np.array([[-v_halfwidth] * (n - k), [v_halfwidth] * (n - k)])]
    )
    patch = ImmersionPatch(
        ambient_dim=d,
        chart_dim=n,
        domain=domain,
        chart_map=chart_map,
        jacobian=jacobian,
        second_form=second_form,
        name=f"product:k={k},t={t:g},chart={chart}",
        extras={"kind": "product", "subsphere": spec, "t": t, "chart": chart,
                "u_of_params": u_of},
    )

    def eval_uv(u_full, v):
        """Evaluate the immersion from sphere-level data (tests/diagnostics)."""
        return np.asarray(v, dtype=float) @ comp - t * phi_batch(
            F, np.atleast_2d(u_full)
        )[0]

    patch.extras["eval_uv"] = eval_uv

    # orient so the Gauss map is +u on this (connected) chart
    center = np.concatenate([chart_center(k), np.zeros(n - k)])
    base = frame_at(patch, center)
    if float(np.dot(base.nu, u_of(center))) < 0:
        patch.orientation = -1
    return patch


# ---------------------------------------------------------------------------
# exports

WULFF_CSV_SCHEMA = "wulfflab-wulff-v1"


def export_csv(sample: WulffSample, path) -> None:
    d = sample.us.shape[1]
    header = [f"u_{i}" for i in range(d)] + [f"phi_{i}" for i in range(d)]
    with open(path, "w") as fh:
        fh.write(f"# schema: {WULFF_CSV_SCHEMA}\n")
        fh.write(",".join(header) + "\n")
        for u, p in zip(sample.us, sample.points):
            fh.write(",".join(float_text(v) for v in list(u) + list(p)) + "\n")


def export_obj(sample: WulffSample, path) -> None:
    if sample.faces is None or sample.points.shape[1] != 3:
        raise ValueError("OBJ export needs a triangulated sample in R^3")
    with open(path, "w") as fh:
        for p in sample.points:
            fh.write("v " + " ".join(float_text(v) for v in p) + "\n")
        for a, b, c in sample.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")
