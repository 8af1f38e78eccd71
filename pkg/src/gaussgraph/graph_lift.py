"""Lifting surface samples to samples of their Gauss graph.

A :class:`SurfaceSample` carries a point of an oriented surface together with
its unit normal, an oriented tangent frame and the extended shape operator
``L = dnu o P`` (a 3x3 matrix that kills the normal).  :func:`lift_sample`
turns it into a :class:`GaussGraphSample`, i.e. the point ``(x, nu(x))`` of
the graph of the Gauss map with the tangent 2-vector

    xi = (tau1, L tau1) ^ (tau2, L tau2),   eta = xi / |xi|.

Curvatures are then read back from the mixed stratum alone:
``H = <Psi_y, xi1>`` and ``K = y . cof(xi1) y``.  The convention is
``H = k1 + k2`` (sum, not average) throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularChartError, ValidationError
from .exterior import Stratified2Vector, cofactor, hodge_frame, psi_pair, vec6, wedge6

# samples whose horizontal stratum is below this are outside G*
G_STAR_EPS = 1e-12


def _arr(a, shape):
    a = np.array(a, dtype=float)
    if a.shape != shape or not np.all(np.isfinite(a)):
        raise ValidationError(f"expected finite array of shape {shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurfaceSample:
    x: np.ndarray
    nu: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    L: np.ndarray
    weight: float = 0.0
    beta: int = 1

    def __post_init__(self):
        for name in ("x", "nu", "tau1", "tau2"):
            object.__setattr__(self, name, _arr(getattr(self, name), (3,)))
        object.__setattr__(self, "L", _arr(self.L, (3, 3)))
        if self.weight < 0:
            raise ValidationError("area weight must be non-negative")
        if int(self.beta) != self.beta or self.beta < 1:
            raise ValidationError("multiplicity must be a positive integer")
        object.__setattr__(self, "beta", int(self.beta))

    @classmethod
    def from_shape_operator(cls, x, nu, L, weight=0.0, beta=1):
        """Build a sample using the deterministic frame of :func:`hodge_frame`."""
        nu = np.asarray(nu, dtype=float)
        t1, t2 = hodge_frame(nu)
        return cls(x, nu, t1, t2, L, weight, beta)

    @classmethod
    def from_principal(cls, x, nu, k1, k2, d1=None, weight=0.0, beta=1):
        """Sample with principal curvatures k1 (along d1) and k2.

        ``d1`` defaults to the first vector of the canonical frame.
        """
        nu = np.asarray(nu, dtype=float)
        t1, t2 = hodge_frame(nu)
        if d1 is not None:
            d1 = np.asarray(d1, dtype=float)
            d1 = d1 - (d1 @ nu) * nu
            t1 = d1 / np.linalg.norm(d1)
            t2 = np.cross(nu, t1)
        L = k1 * np.outer(t1, t1) + k2 * np.outer(t2, t2)
        return cls(x, nu, t1, t2, L, weight, beta)

    def mean_curvature(self):
        return float(np.trace(self.L))

    def gauss_curvature(self):
        return float(np.trace(cofactor(self.L)))

    def check(self, tol=1e-8):
        """Raise :class:`ValidationError` if an invariant fails."""
        nu, t1, t2, L = self.nu, self.tau1, self.tau2, self.L
        if abs(nu @ nu - 1.0) > tol:
            raise ValidationError("normal is not unit length")
        frame = np.array([t1, t2, nu])
        if np.max(np.abs(frame @ frame.T - np.eye(3))) > tol:
            raise ValidationError("tangent frame is not orthonormal")
        if np.max(np.abs(np.cross(t1, t2) - nu)) > tol:
            raise ValidationError("tangent frame is not positively oriented (tau1 x tau2 != nu)")
        scale = max(1.0, float(np.max(np.abs(L))))
        if np.max(np.abs(L @ nu)) > tol * scale:
            raise ValidationError("shape operator does not annihilate the normal")
        b12, b21 = t2 @ L @ t1, t1 @ L @ t2
        if abs(b12 - b21) > tol * scale:
            raise ValidationError("shape operator is not symmetric on the tangent plane")


@dataclass(frozen=True, eq=False)
class GaussGraphSample:
    x: np.ndarray
    y: np.ndarray
    xi: Stratified2Vector
    eta: Stratified2Vector
    weight: float = 0.0
    beta: int = 1
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "x", _arr(self.x, (3,)))
        object.__setattr__(self, "y", _arr(self.y, (3,)))

    @property
    def eta0_norm(self):
        return float(np.linalg.norm(self.eta.xi0))

    @property
    def in_g_star(self):
        return self.eta0_norm >= G_STAR_EPS

    @property
    def zeta(self):
        """Mixed stratum per unit base area, eta1 / |eta0|."""
        e0 = self.eta0_norm
        if e0 < G_STAR_EPS:
            raise ValidationError("sample lies outside G* (eta0 = 0)")
        return np.asarray(self.eta.xi1) / e0

    @property
    def xi_norm(self):
        return self.xi.norm()


def lift_sample(s: SurfaceSample, tol=1e-8) -> GaussGraphSample:
    s.check(tol)
    L = s.L
    xi = wedge6(vec6(s.tau1, L @ s.tau1), vec6(s.tau2, L @ s.tau2))
    eta = xi.scaled(1.0 / xi.norm())
    return GaussGraphSample(s.x, s.nu, xi, eta, s.weight, s.beta)


def lift_samples(samples, tol=1e-8):
    return [lift_sample(s, tol) for s in samples]


def mean_curvature(g: GaussGraphSample) -> float:
    return float(psi_pair(g.y, g.zeta))


def gauss_curvature(g: GaussGraphSample) -> float:
    return float(g.y @ cofactor(g.zeta) @ g.y)


@dataclass
class ConstraintReport:
    left: float
    right: float
    trace: float
    tol: float

    @property
    def max_violation(self):
        return max(self.left, self.right, self.trace)

    @property
    def passed(self):
        return self.max_violation <= self.tol


def constraint_residuals(zeta, y):
    """Violations of y^T zeta = 0, zeta y = 0 and tr zeta = 0 (max-abs each)."""
    zeta = np.asarray(zeta, dtype=float)
    y = np.asarray(y, dtype=float)
    left = float(np.max(np.abs(y @ zeta)))
    right = float(np.max(np.abs(zeta @ y)))
    trace = float(abs(np.trace(zeta)))
    return left, right, trace


def validate_constraints(g: GaussGraphSample, tol=1e-10) -> ConstraintReport:
    """Check the mixed stratum of the unit orientation ``eta`` against y."""
    left, right, trace = constraint_residuals(g.eta.xi1, g.y)
    return ConstraintReport(left, right, trace, tol)


def shape_operator_fd(patch, u, v, h=None) -> SurfaceSample:
    """Finite-difference shape operator of a parametric patch at (u, v).

    Only the position map of ``patch`` is used: tangents and the Gauss map
    derivatives are central differences with step ``h`` (default
    ``1e-4 * patch.scale``).  The tangential part of the result is
    symmetrised, which removes only discretisation error.
    """
    if h is None:
        h = 1e-4 * getattr(patch, "scale", 1.0)
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    (u0, u1), (v0, v1) = patch.domain
    pu, pv = getattr(patch, "periodic", (False, False))
    if (not pu and not (u0 + 2 * h <= u <= u1 - 2 * h)) or (
        not pv and not (v0 + 2 * h <= v <= v1 - 2 * h)
    ):
        raise ValidationError(f"(u, v) = ({u}, {v}) is too close to the chart boundary for h = {h}")
    pos = patch.position
    sign = float(getattr(patch, "orientation", 1))

    def tangents(a, b):
        ru = (np.asarray(pos(a + h, b)) - np.asarray(pos(a - h, b))) / (2 * h)
        rv = (np.asarray(pos(a, b + h)) - np.asarray(pos(a, b - h))) / (2 * h)
        return ru, rv

    def normal(a, b):
        ru, rv = tangents(a, b)
        c = np.cross(ru, rv)
        nc = np.linalg.norm(c)
        if nc <= 1e-14 * max(1.0, np.linalg.norm(ru) * np.linalg.norm(rv)):
            raise SingularChartError(f"degenerate chart at (u, v) = ({a}, {b})")
        return sign * c / nc

    ru, rv = tangents(u, v)
    n = normal(u, v)
    nu_ = (normal(u + h, v) - normal(u - h, v)) / (2 * h)
    nv_ = (normal(u, v + h) - normal(u, v - h)) / (2 * h)
    J = np.column_stack([ru, rv])
    G = J.T @ J
    if np.linalg.det(G) <= 1e-28:
        raise SingularChartError(f"degenerate first fundamental form at (u, v) = ({u}, {v})")
    L = np.column_stack([nu_, nv_]) @ np.linalg.solve(G, J.T)
    P = np.eye(3) - np.outer(n, n)
    L = P @ (0.5 * (L + L.T)) @ P
    t1, t2 = hodge_frame(n, tol=1e-8)
    area_density = float(np.linalg.norm(np.cross(ru, rv)))
    return SurfaceSample(np.asarray(pos(u, v), dtype=float), n, t1, t2, L, area_density, 1)
