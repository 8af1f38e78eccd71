"""Analytic parametric surfaces and tensor-product quadrature on their charts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import SingularChartError, ValidationError
from ..exterior import hodge_frame
from ..graph_lift import SurfaceSample

CATALOG_NAMES = ("sphere", "torus", "ellipsoid", "plane_patch", "cylinder_patch")


@dataclass
class ParametricPatch:
    """A chart r(u, v) with analytic first and second derivatives.

    ``derivs(u, v)`` returns (r, r_u, r_v, r_uu, r_uv, r_vv), each an array of
    shape (..., 3) broadcast over u and v.  ``orientation`` multiplies
    r_u x r_v to give the chosen unit normal.
    """

    name: str
    derivs: Callable
    domain: tuple
    periodic: tuple = (False, False)
    orientation: int = 1
    scale: float = 1.0
    closed: bool = False
    euler: int | None = None
    params: dict = field(default_factory=dict)

    def position(self, u, v):
        return self.derivs(np.asarray(u, float), np.asarray(v, float))[0]

    def frame(self, u, v):
        """Position, unit normal and extended shape operator at (u, v).

        L = -J G^-1 B G^-1 J^T where J = [r_u r_v], G is the first and B the
        second fundamental form (w.r.t. the oriented normal).
        """
        r, ru, rv, ruu, ruv, rvv = self.derivs(np.asarray(u, float), np.asarray(v, float))
        c = np.cross(ru, rv)
        area = np.linalg.norm(c, axis=-1)
        if np.any(area <= 1e-300):
            bad = np.argwhere(np.atleast_1d(area) <= 1e-300)[0]
            raise SingularChartError(f"degenerate chart on patch {self.name!r} at node index {bad.tolist()}")
        n = self.orientation * c / area[..., None]
        J = np.stack([ru, rv], axis=-1)
        G = np.einsum("...ki,...kj->...ij", J, J)
        B = np.stack(
            [
                np.stack([np.einsum("...k,...k->...", ruu, n), np.einsum("...k,...k->...", ruv, n)], -1),
                np.stack([np.einsum("...k,...k->...", ruv, n), np.einsum("...k,...k->...", rvv, n)], -1),
            ],
            -2,
        )
        Gi = np.linalg.inv(G)
        L = -J @ Gi @ B @ Gi @ np.swapaxes(J, -1, -2)
        return r, n, L, area


def _sph(theta, phi):
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    return st, ct, sp, cp


def sphere(radius=1.0, center=(0.0, 0.0, 0.0), theta_max=np.pi, inward=False):
    """Sphere (or polar cap up to ``theta_max``) in (theta, phi) coordinates."""
    if radius <= 0:
        raise ValidationError("sphere radius must be positive")
    if not 0 < theta_max <= np.pi:
        raise ValidationError("theta_max must lie in (0, pi]")
    R = float(radius)
    c0 = np.asarray(center, float)

    def derivs(t, p):
        st, ct, sp, cp = _sph(t, p)
        z = np.zeros_like(st * cp)
        r = c0 + R * np.stack([st * cp, st * sp, ct + z], -1)
        rt = R * np.stack([ct * cp, ct * sp, -st + z], -1)
        rp = R * np.stack([-st * sp, st * cp, z], -1)
        rtt = R * np.stack([-st * cp, -st * sp, -ct + z], -1)
        rtp = R * np.stack([-ct * sp, ct * cp, z], -1)
        rpp = R * np.stack([-st * cp, -st * sp, z], -1)
        return r, rt, rp, rtt, rtp, rpp

    closed = theta_max == np.pi
    return ParametricPatch(
        "sphere",
        derivs,
        ((0.0, float(theta_max)), (0.0, 2 * np.pi)),
        (False, True),
        -1 if inward else 1,
        R,
        closed,
        2 if closed else 1,
        {"radius": R, "center": c0.tolist(), "theta_max": float(theta_max), "inward": inward},
    )


def ellipsoid(a=1.0, b=1.0, c=1.0):
    if min(a, b, c) <= 0:
        raise ValidationError("ellipsoid semi-axes must be positive")
    ax = np.array([a, b, c], float)

    def derivs(t, p):
        st, ct, sp, cp = _sph(t, p)
        z = np.zeros_like(st * cp)
        r = ax * np.stack([st * cp, st * sp, ct + z], -1)
        rt = ax * np.stack([ct * cp, ct * sp, -st + z], -1)
        rp = ax * np.stack([-st * sp, st * cp, z], -1)
        rtt = ax * np.stack([-st * cp, -st * sp, -ct + z], -1)
        rtp = ax * np.stack([-ct * sp, ct * cp, z], -1)
        rpp = ax * np.stack([-st * cp, -st * sp, z], -1)
        return r, rt, rp, rtt, rtp, rpp

    return ParametricPatch(
        "ellipsoid", derivs, ((0.0, np.pi), (0.0, 2 * np.pi)), (False, True), 1,
        float(ax.max()), True, 2, {"a": a, "b": b, "c": c},
    )


def torus(R=2.0, r=1.0):
    """Torus of revolution about the z axis, outward normal."""
    if not (r > 0 and R > r):
        raise ValidationError("torus requires R > r > 0")

    def derivs(u, v):
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        w = R + r * cv
        z = np.zeros_like(su * cv)
        pos = np.stack([w * cu, w * su, r * sv + z], -1)
        ru = np.stack([-w * su, w * cu, z], -1)
        rv = np.stack([-r * sv * cu, -r * sv * su, r * cv + z], -1)
        ruu = np.stack([-w * cu, -w * su, z], -1)
        ruv = np.stack([r * sv * su, -r * sv * cu, z], -1)
        rvv = np.stack([-r * cv * cu, -r * cv * su, -r * sv + z], -1)
        return pos, ru, rv, ruu, ruv, rvv

    return ParametricPatch(
        "torus", derivs, ((0.0, 2 * np.pi), (0.0, 2 * np.pi)), (True, True), 1,
        float(R + r), True, 0, {"R": R, "r": r},
    )


def plane_patch(width=1.0, height=1.0):
    if width <= 0 or height <= 0:
        raise ValidationError("plane patch dimensions must be positive")

    def derivs(u, v):
        z = np.zeros_like(u * v)
        o = np.ones_like(z)
        pos = np.stack([u + z, v + z, z], -1)
        ru = np.stack([o, z, z], -1)
        rv = np.stack([z, o, z], -1)
        zz = np.stack([z, z, z], -1)
        return pos, ru, rv, zz, zz, zz

    return ParametricPatch(
        "plane_patch", derivs, ((0.0, float(width)), (0.0, float(height))), (False, False), 1,
        float(max(width, height)), False, 1, {"width": width, "height": height},
    )


def cylinder_patch(radius=1.0, length=1.0, angle=2 * np.pi):
    """Lateral surface of a circular cylinder, outward normal."""
    if radius <= 0 or length <= 0 or not 0 < angle <= 2 * np.pi:
        raise ValidationError("invalid cylinder parameters")
    rho = float(radius)
    full = angle == 2 * np.pi

    def derivs(u, v):
        su, cu = np.sin(u), np.cos(u)
        z = np.zeros_like(su * v)
        pos = np.stack([rho * cu + z, rho * su + z, v + z], -1)
        ru = np.stack([-rho * su + z, rho * cu + z, z], -1)
        rv = np.stack([z, z, 1.0 + z], -1)
        ruu = np.stack([-rho * cu + z, -rho * su + z, z], -1)
        zz = np.stack([z, z, z], -1)
        return pos, ru, rv, ruu, zz, zz

    return ParametricPatch(
        "cylinder_patch", derivs, ((0.0, float(angle)), (0.0, float(length))), (full, False), 1,
        rho, False, 0 if full else 1, {"radius": rho, "length": length, "angle": angle},
    )


_BUILDERS = {
    "sphere": sphere,
    "torus": torus,
    "ellipsoid": ellipsoid,
    "plane_patch": plane_patch,
    "cylinder_patch": cylinder_patch,
}


def catalog(name, **params) -> ParametricPatch:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValidationError(f"unknown surface {name!r}; choose from {CATALOG_NAMES}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {name!r}: {exc}") from None


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product rule: Gauss-Legendre with ``order`` nodes on bounded
    directions (exact for polynomials of degree 2*order - 1), uniform
    trapezoid with ``2*order`` nodes on periodic directions (exact for
    trigonometric polynomials of degree < 2*order).
    """

    order: int = 32

    def nodes_1d(self, lo, hi, periodic):
        if periodic:
            n = 2 * self.order
            x = lo + (hi - lo) * np.arange(n) / n
            w = np.full(n, (hi - lo) / n)
            return x, w
        t, w = np.polynomial.legendre.leggauss(self.order)
        return 0.5 * (hi - lo) * t + 0.5 * (hi + lo), 0.5 * (hi - lo) * w

    def nodes(self, patch: ParametricPatch):
        (u0, u1), (v0, v1) = patch.domain
        pu, pv = patch.periodic
        xu, wu = self.nodes_1d(u0, u1, pu)
        xv, wv = self.nodes_1d(v0, v1, pv)
        U, V = np.meshgrid(xu, xv, indexing="ij")
        W = np.outer(wu, wv)
        return U.ravel(), V.ravel(), W.ravel()


def sample(patch: ParametricPatch, q: QuadratureRule | int = 32, beta=1, check=True):
    """Quadrature samples; weights are area weights on the surface."""
    if isinstance(q, int):
        q = QuadratureRule(q)
    U, V, W = q.nodes(patch)
    r, n, L, area = patch.frame(U, V)
    out = []
    for k in range(len(U)):
        t1, t2 = hodge_frame(n[k], tol=1e-8)
        s = SurfaceSample(r[k], n[k], t1, t2, L[k], float(W[k] * area[k]), beta)
        if check:
            try:
                s.check()
            except ValidationError as exc:
                raise ValidationError(f"{exc} at (u, v) = ({U[k]}, {V[k]})") from None
        out.append(s)
    return out


def patch_area(patch, q=32):
    if isinstance(q, int):
        q = QuadratureRule(q)
    U, V, W = q.nodes(patch)
    _, _, _, area = patch.frame(U, V)
    return float(np.sum(W * area))


def patch_boundary_mass(patch: ParametricPatch, q=32):
    """Length of the lifted boundary curve (r, nu(r)) over the chart edges.

    Along an edge with unit tangent t the integrand is |r_s| sqrt(1 + |L t|^2).
    Periodic directions contribute no edges, and edges collapsed to a point
    (sphere poles) have zero length.
    """
    if isinstance(q, int):
        q = QuadratureRule(q)
    (u0, u1), (v0, v1) = patch.domain
    pu, pv = patch.periodic
    total = 0.0
    edges = []
    if not pu:
        edges += [("u", u0), ("u", u1)]
    if not pv:
        edges += [("v", v0), ("v", v1)]
    for fixed, val in edges:
        if fixed == "u":
            s, w = q.nodes_1d(v0, v1, pv)
            U, V = np.full_like(s, val), s
        else:
            s, w = q.nodes_1d(u0, u1, pu)
            U, V = s, np.full_like(s, val)
        _, ru, rv, *_ = patch.derivs(U, V)
        rs = rv if fixed == "u" else ru
        speed = np.linalg.norm(rs, axis=-1)
        if np.max(speed) <= 1e-12 * patch.scale:
            continue
        _, _, L, _ = patch.frame(U, V)
        t = rs / speed[:, None]
        Lt = np.einsum("nij,nj->ni", L, t)
        total += float(np.sum(w * speed * np.sqrt(1.0 + np.sum(Lt**2, axis=-1))))
    return total
