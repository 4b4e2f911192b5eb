"""Built-in anisotropy families and model hypersurfaces with analytic derivatives.

Entries cover the classified models (hyperplane, Wulff shape, sub-Wulff
products) plus the helicoid, which is the target of the rotationally
symmetric inverse fit; extend_axis lifts a profile-type F on S^n to S^{n+1},
constant along the geodesics leaving the equator, for the product-with-a-line
construction in one dimension higher.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anisotropy import (
    AnisotropyFunction,
    ambient_hess,
    convexity_audit,
    phi_batch,
    require_convex,
)
from .errors import ConvexityViolation
from .hypersurface import ImmersionPatch
from .spheregrid import chart_domain, sphere_chart
from .wulff_geometry import SubsphereSpec, product_immersion


@dataclass
class CatalogEntry:
    """A (F, patch) pair, with the expected spectrum when one is known."""

    name: str
    anisotropy: AnisotropyFunction
    patch: ImmersionPatch
    expected_spectrum: list | None = None  # [(lambda, multiplicity), ...]


# ---------------------------------------------------------------------------
# anisotropies


def isotropic(ambient_dim: int = 3) -> AnisotropyFunction:
    return AnisotropyFunction(ambient_dim, "isotropic")


def quadratic_norm(diag) -> AnisotropyFunction:
    diag = tuple(float(q) for q in diag)
    return AnisotropyFunction(len(diag), "quadratic-norm", diag)


def axisymmetric(ambient_dim: int, coeffs) -> AnisotropyFunction:
    return AnisotropyFunction(ambient_dim, "axisymmetric-series", tuple(coeffs))


def builtin_anisotropies(ambient_dim: int = 3) -> list[AnisotropyFunction]:
    """The audited stock families: isotropic, quadratic diag(1,..,1,4),
    axisymmetric (1, 0.05).  Band extensions are built on demand via
    extend_axis (their derivatives are finite-difference only)."""
    funcs = [
        isotropic(ambient_dim),
        quadratic_norm((1.0,) * (ambient_dim - 1) + (4.0,)),
        axisymmetric(ambient_dim, (1.0, 0.05)),
    ]
    for F in funcs:
        require_convex(F)
    return funcs


def extend_axis(F: AnisotropyFunction, band_halfwidth: float) -> AnisotropyFunction:
    """Extend F on S^n to S^{n+1}, constant along geodesics from the equator.

    The extension satisfies F~(cos(theta) u + sin(theta) e_last) = F(u) for
    |theta| <= band_halfwidth and blends (C^2 quintic ramp) to the sphere
    average of F outside the band.  The extension is re-audited; a failure
    means the band is too wide or F too strongly varying, and must be
    resolved by the caller (strongly varying profiles admit no convex
    extension that is exact on a band: the geodesic formula's curvature
    grows like 1/cos^2(theta) toward the poles while any C^2 blend of value
    spread D over width W costs D/W^2 in second derivatives).
    """
    require_convex(F)
    if not 0 < band_halfwidth < np.pi / 2:
        raise ValueError("band_halfwidth must lie in (0, pi/2)")
    if F.family == "isotropic":
        return AnisotropyFunction(F.ambient_dim + 1, "isotropic")
    if F.family != "axisymmetric-series":
        raise ValueError(
            "extend_axis supports isotropic and axisymmetric-series inner functions"
        )
    ext = AnisotropyFunction(
        F.ambient_dim + 1,
        "band-extension",
        (float(band_halfwidth),) + F.params,
        derivative_mode="finite-difference",
        fd_step=F.fd_step,
    )
    report = convexity_audit(ext)
    if not report.passed:
        raise ConvexityViolation(
            f"band extension fails convexity (min eig {report.min_eigenvalue:.3e}); "
            "shrink the band or flatten F"
        )
    return ext


# ---------------------------------------------------------------------------
# patches


def plane_patch(ambient_dim: int = 3) -> ImmersionPatch:
    """Coordinate hyperplane spanned by the first n axes."""
    d = ambient_dim
    n = d - 1
    basis = np.eye(d)[:, :n]

    return ImmersionPatch(
        ambient_dim=d,
        chart_dim=n,
        domain=np.array([[-1.0] * n, [1.0] * n]),
        chart_map=lambda p: basis @ p,
        jacobian=lambda p: basis,
        hessian=lambda p: np.zeros((d, n, n)),
        name="plane",
    )


def sphere_patch(ambient_dim: int = 3, radius: float = 1.0, outward: bool = True) -> ImmersionPatch:
    """Round sphere in hyperspherical chart; outward normal by default."""
    n = ambient_dim - 1
    patch = ImmersionPatch(
        ambient_dim=ambient_dim,
        chart_dim=n,
        domain=chart_domain(n),
        chart_map=lambda p: radius * sphere_chart(p, 0),
        jacobian=lambda p: radius * sphere_chart(p, 1)[1],
        hessian=lambda p: radius * sphere_chart(p, 2)[2],
        name=f"sphere:r={radius:g}",
        extras={"kind": "sphere", "radius": radius},
    )
    if not outward:
        patch.orientation = -1
    return patch


def wulff_patch(F: AnisotropyFunction) -> ImmersionPatch:
    """The Wulff shape x = phi(u) in a hyperspherical chart, outward normal u.

    Jacobian is Hess(u) du; the second fundamental form against nu = u is
    -du^T Hess(u) du (the Hessian annihilates u, which removes both the
    chart-curvature term and the third derivative of the extension).
    """
    require_convex(F)
    n = F.sphere_dim

    def chart_map(p):
        u = sphere_chart(p, 0)
        return phi_batch(F, u[None, :])[0]

    def jacobian(p):
        u, du = sphere_chart(p, 1)
        return ambient_hess(F, u) @ du

    def second_form(p, nu):
        u, du = sphere_chart(p, 1)
        sign = 1.0 if float(np.dot(nu, u)) >= 0 else -1.0
        return -sign * (du.T @ ambient_hess(F, u) @ du)

    patch = ImmersionPatch(
        ambient_dim=F.ambient_dim,
        chart_dim=n,
        domain=chart_domain(n),
        chart_map=chart_map,
        jacobian=jacobian,
        second_form=second_form,
        name="wulff",
        extras={"kind": "wulff", "u_of_params": lambda p: sphere_chart(p, 0)},
    )
    # orientation: nu must equal +u (outward for the convex Wulff shape)
    from .hypersurface import frame_at

    center = patch.center()
    if float(np.dot(frame_at(patch, center).nu, sphere_chart(center, 0))) < 0:
        patch.orientation = -1
    return patch


def helicoid_patch(t_max: float = 2.0, s_max: float = 2.5) -> ImmersionPatch:
    """Helicoid x(s,t) = (t cos s, t sin s, s), pitch 1."""

    def chart_map(p):
        s, t = p
        return np.array([t * np.cos(s), t * np.sin(s), s])

    def jacobian(p):
        s, t = p
        return np.array(
            [[-t * np.sin(s), np.cos(s)], [t * np.cos(s), np.sin(s)], [1.0, 0.0]]
        )

    def hessian(p):
        s, t = p
        out = np.zeros((3, 2, 2))
        out[:, 0, 0] = [-t * np.cos(s), -t * np.sin(s), 0.0]
        out[:, 0, 1] = out[:, 1, 0] = [-np.sin(s), np.cos(s), 0.0]
        return out

    return ImmersionPatch(
        ambient_dim=3,
        chart_dim=2,
        domain=np.array([[-s_max, -t_max], [s_max, t_max]]),
        chart_map=chart_map,
        jacobian=jacobian,
        hessian=hessian,
        name="helicoid",
        extras={"kind": "helicoid", "t_max": t_max},
    )


def helicoid_line_patch(t_max: float = 2.0, s_max: float = 2.5, tau_max: float = 1.0) -> ImmersionPatch:
    """Product U x R in R^4: (s, t, tau) -> (t cos s, t sin s, s, tau)."""
    base = helicoid_patch(t_max, s_max)

    def chart_map(p):
        return np.concatenate([base.chart_map(p[:2]), [p[2]]])

    def jacobian(p):
        jac = np.zeros((4, 3))
        jac[:3, :2] = base.jacobian(p[:2])
        jac[3, 2] = 1.0
        return jac

    def hessian(p):
        out = np.zeros((4, 3, 3))
        out[:3, :2, :2] = base.hessian(p[:2])
        return out

    return ImmersionPatch(
        ambient_dim=4,
        chart_dim=3,
        domain=np.array(
            [[-s_max, -t_max, -tau_max], [s_max, t_max, tau_max]]
        ),
        chart_map=chart_map,
        jacobian=jacobian,
        hessian=hessian,
        name="helicoid_x_line",
        extras={"kind": "helicoid_x_line", "t_max": t_max},
    )


# ---------------------------------------------------------------------------
# the catalog proper

PRODUCT_T_MENU = (0.5, 2.0)


def product_entry(F: AnisotropyFunction, k: int, t: float) -> CatalogEntry:
    spec = SubsphereSpec.axis_aligned(k, F.ambient_dim)
    patch = product_immersion(F, spec, t)
    n = F.sphere_dim
    return CatalogEntry(
        name=f"cylinder:k={k},t={t:g}",
        anisotropy=F,
        patch=patch,
        expected_spectrum=[(1.0 / t, k), (0.0, n - k)],
    )


def builtin_patches(F: AnisotropyFunction) -> list[CatalogEntry]:
    """Catalog entries for one anisotropy: plane, Wulff patch, the product
    menu over (k, t), and (in R^3) the helicoid with unknown spectrum."""
    require_convex(F)
    d = F.ambient_dim
    n = F.sphere_dim
    entries = [
        CatalogEntry("plane", F, plane_patch(d), expected_spectrum=[(0.0, n)]),
        CatalogEntry("wulff", F, wulff_patch(F), expected_spectrum=[(-1.0, n)]),
    ]
    for k in range(1, n):
        for t in PRODUCT_T_MENU:
            entries.append(product_entry(F, k, t))
    if d == 3:
        entries.append(CatalogEntry("helicoid", F, helicoid_patch()))
    return entries


def catalog_entries(ambient_dims=(3, 4)) -> list[CatalogEntry]:
    """Full sweep: every builtin anisotropy crossed with its builtin patches."""
    out = []
    for d in ambient_dims:
        for F in builtin_anisotropies(d):
            out.extend(builtin_patches(F))
    return out


def parse_anisotropy(text: str, ambient_dim: int = 3) -> AnisotropyFunction:
    """CLI-style anisotropy names: isotropic | quadratic:1,1,4 | axisymmetric:1,0.05."""
    name, _, arg = text.partition(":")
    if name == "isotropic":
        return isotropic(ambient_dim)
    if name == "quadratic":
        diag = tuple(float(v) for v in arg.split(",")) if arg else (1.0,) * (ambient_dim - 1) + (4.0,)
        return quadratic_norm(diag)
    if name == "axisymmetric":
        coeffs = tuple(float(v) for v in arg.split(",")) if arg else (1.0, 0.05)
        return axisymmetric(ambient_dim, coeffs)
    raise ValueError(f"unknown anisotropy name {text!r}")


def parse_entry(name: str, F: AnisotropyFunction) -> CatalogEntry:
    """CLI-style entry names: plane | wulff | helicoid | cylinder:k=1,t=0.5."""
    base, _, arg = name.partition(":")
    if base == "plane":
        return CatalogEntry("plane", F, plane_patch(F.ambient_dim), [(0.0, F.sphere_dim)])
    if base == "wulff":
        return CatalogEntry("wulff", F, wulff_patch(F), [(-1.0, F.sphere_dim)])
    if base == "helicoid":
        if F.ambient_dim != 3:
            raise ValueError("helicoid entry needs ambient_dim = 3")
        return CatalogEntry("helicoid", F, helicoid_patch())
    if base in ("cylinder", "product"):
        kv = dict(item.split("=") for item in arg.split(",") if item)
        k = int(kv.get("k", 1))
        t = float(kv.get("t", 0.5))
        return product_entry(F, k, t)
    raise ValueError(f"unknown catalog entry {name!r}")


def catalog_names() -> list[str]:
    return ["plane", "wulff", "helicoid", "cylinder:k=<k>,t=<t>"]
