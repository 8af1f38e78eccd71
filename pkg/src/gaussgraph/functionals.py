"""Integral functionals of sampled surfaces and their Gauss graphs.

Surface-side quantities take :class:`SurfaceSample` lists (curvatures read
from the shape operator); graph-side quantities take :class:`GaussGraphSample`
lists (curvatures read from the mixed stratum).  Sample weights measure area
on the base surface, so integrals over the Gauss graph G are re-expressed as
integrals over M via dH^2(G) = |xi| dH^2(M).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConstraintSetError, ValidationError
from .exterior import cofactor, psi_pair
from .graph_lift import GaussGraphSample, SurfaceSample, constraint_residuals
from .spectral import BendingConstants, f_y, projectors, tilde_f

log = logging.getLogger(__name__)

REPORT_COLUMNS = (
    "energy_curvature",
    "energy_graph",
    "willmore",
    "area",
    "volume",
    "total_gauss",
    "graph_mass",
    "boundary_mass",
    "in_X01",
    "in_Xstar",
    "iso_ok",
)
CSV_VERSION = "energy-report/1"


def _surface_arrays(samples):
    L = np.array([s.L for s in samples]).reshape(-1, 3, 3)
    w = np.array([s.weight * s.beta for s in samples], dtype=float)
    H = np.trace(L, axis1=-2, axis2=-1)
    K = np.trace(cofactor(L), axis1=-2, axis2=-1)
    return H, K, w


def _graph_arrays(samples, min_eta0=1e-12):
    """Stacked graph data restricted to G*; returns (arrays, n_excluded)."""
    keep = [g for g in samples if g.eta0_norm >= min_eta0]
    dropped = len(samples) - len(keep)
    if dropped:
        log.warning("%d sample(s) with |eta0| < %g excluded from G*", dropped, min_eta0)
    y = np.array([g.y for g in keep]).reshape(-1, 3)
    zeta = np.array([g.zeta for g in keep]).reshape(-1, 3, 3)
    w = np.array([g.weight * g.beta for g in keep], dtype=float)
    return y, zeta, w, dropped


def energy_curvature(samples, c: BendingConstants) -> float:
    """sum w * beta * (alpha_H (H - H0)^2 - alpha_K K), H = tr L, K = tr cof L."""
    if not samples:
        log.warning("empty sample set; energy is zero")
        return 0.0
    H, K, w = _surface_arrays(samples)
    return float(np.sum(w * (c.alpha_H * (H - c.H0) ** 2 - c.alpha_K * K)))


def check_constraint_set(samples, tol=1e-8):
    """Raise ConstraintSetError naming the worst sample if any violates the
    Gauss-graph constraints (y in both null spaces of eta1, zero trace)."""
    worst, worst_i = -1.0, -1
    for i, g in enumerate(samples):
        v = max(constraint_residuals(g.eta.xi1, g.y))
        if v > worst:
            worst, worst_i = v, i
    if worst > tol:
        g = samples[worst_i]
        raise ConstraintSetError(
            f"sample {worst_i} at x={np.round(g.x, 6).tolist()} violates the constraint set "
            f"by {worst:.3e} > {tol:.1e}"
        )
    return worst


def energy_graph(samples, c: BendingConstants, integrand="tilde", tol=1e-8) -> float:
    """Graph form of the energy: sum w * beta * f(y, eta1/|eta0|).

    ``integrand`` is "tilde" (convex, requires coercive constants) or "f_y".
    """
    if not samples:
        log.warning("empty sample set; energy is zero")
        return 0.0
    check_constraint_set(samples, tol)
    y, zeta, w, _ = _graph_arrays(samples)
    if integrand == "tilde":
        vals = tilde_f(zeta, y, c, P=projectors(y))
    elif integrand == "f_y":
        vals = f_y(zeta, y, c)
    else:
        raise ValidationError(f"unknown integrand {integrand!r}")
    return float(np.sum(w * vals))


def graph_curvatures(samples):
    """(H, K) per sample from the graph-side identities."""
    y, zeta, _, _ = _graph_arrays(samples)
    H = psi_pair(y, zeta)
    K = np.einsum("ni,nij,nj->n", y, cofactor(zeta), y)
    return H, K


def willmore(samples) -> float:
    """sum w * beta * H^2 (H = k1 + k2)."""
    if not samples:
        return 0.0
    if isinstance(samples[0], GaussGraphSample):
        H, _ = graph_curvatures(samples)
        w = np.array([g.weight * g.beta for g in samples if g.in_g_star])
    else:
        H, _, w = _surface_arrays(samples)
    return float(np.sum(w * H**2))


def gauss_bonnet_total(samples) -> float:
    """sum w * beta * K; equals 2 pi chi on closed surfaces."""
    if not samples:
        return 0.0
    if isinstance(samples[0], GaussGraphSample):
        _, K = graph_curvatures(samples)
        w = np.array([g.weight * g.beta for g in samples if g.in_g_star])
    else:
        _, K, w = _surface_arrays(samples)
    return float(np.sum(w * K))


def area(samples, rtol=1e-12) -> float:
    """A = int_G |eta0| beta dH^2(G) = sum w * beta."""
    w = np.array([g.weight * g.beta for g in samples], dtype=float)
    via_graph = np.array([g.weight * g.xi_norm * g.beta * g.eta0_norm for g in samples], dtype=float)
    a = float(np.sum(w))
    b = float(np.sum(via_graph))
    if abs(a - b) > rtol * max(abs(a), 1e-300) + 1e-300:
        raise AssertionError(f"area via base weights {a!r} and via graph measure {b!r} disagree")
    return a


def volume(samples) -> float:
    """V = (1/3) int_G (x . y) |eta0| beta dH^2(G) = (1/3) sum w * beta * x . y."""
    return float(sum(g.weight * g.beta * (g.x @ g.y) for g in samples) / 3.0)


def graph_mass(samples) -> float:
    """Mass of the graph current, sum w * |xi| * beta."""
    return float(sum(g.weight * g.xi_norm * g.beta for g in samples))


def xstar_integrand(samples) -> float:
    """int (|eta0| + |eta2|^2/|eta0|) beta over G*, in base-area weights."""
    tot = 0.0
    for g in samples:
        e0 = g.eta0_norm
        if e0 < 1e-12:
            continue
        e2 = float(np.linalg.norm(g.eta.xi2))
        tot += g.weight * g.xi_norm * (e0 + e2**2 / e0) * g.beta
    return tot


def vertical_integrand(samples) -> float:
    """int |eta2|^2/|eta0| beta over G* (bound used by the constrained X* class)."""
    tot = 0.0
    for g in samples:
        e0 = g.eta0_norm
        if e0 < 1e-12:
            continue
        e2 = float(np.linalg.norm(g.eta.xi2))
        tot += g.weight * g.xi_norm * e2**2 / e0 * g.beta
    return tot


def iso_ok(a, v, rtol=1e-10) -> bool:
    """Isoperimetric gate 36 pi v^2 <= a^3 (with relative slack for equality)."""
    lhs = 36.0 * np.pi * v**2
    rhs = a**3
    return bool(lhs <= rhs * (1.0 + rtol))


@dataclass
class Bounds:
    c: float = np.inf
    box: tuple | None = None  # ((xmin, ymin, zmin), (xmax, ymax, zmax))


def feasibility(
    samples,
    bounds: Bounds | None = None,
    a=None,
    v=None,
    boundary_mass=0.0,
    tol_a=1e-6,
    tol_v=1e-6,
    closed_tol=1e-12,
):
    """Membership flags for the four minimisation classes.

    ``in_X01`` / ``in_Xstar`` are the unconstrained classes (mass bound
    including the boundary mass).  ``in_X01_av`` / ``in_Xstar_av`` are the
    constrained classes (closed, area a, volume v); they are only evaluated
    when both a and v are given.  Tolerances on a and v are relative.
    """
    bounds = bounds or Bounds()
    flags = {}
    if bounds.box is not None:
        lo, hi = (np.asarray(b, float) for b in bounds.box)
        xs = np.array([g.x for g in samples]).reshape(-1, 3)
        flags["in_box"] = bool(np.all((xs >= lo) & (xs <= hi)))
    else:
        flags["in_box"] = True
    mass = graph_mass(samples)
    flags["in_X01"] = flags["in_box"] and boundary_mass + mass <= bounds.c
    flags["in_Xstar"] = flags["in_box"] and boundary_mass + xstar_integrand(samples) <= bounds.c
    closed = boundary_mass <= closed_tol
    flags["closed"] = closed
    if a is not None and v is not None:
        A = area(samples)
        V = volume(samples)
        flags["iso_ok"] = iso_ok(a, v)
        flags["area_ok"] = abs(A - a) <= tol_a * abs(a)
        flags["volume_ok"] = abs(V - v) <= tol_v * abs(v)
        common = flags["in_box"] and closed and flags["area_ok"] and flags["volume_ok"]
        flags["in_X01_av"] = common and mass <= bounds.c
        flags["in_Xstar_av"] = common and vertical_integrand(samples) <= bounds.c
    else:
        flags["iso_ok"] = None
    return flags


@dataclass
class EnergyReport:
    energy_curvature: float
    energy_graph: float
    willmore: float
    area: float
    volume: float
    total_gauss: float
    graph_mass: float
    boundary_mass: float
    feasibility: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def open_surface(self):
        return self.boundary_mass > 1e-12

    def to_dict(self):
        d = asdict(self)
        if self.open_surface:
            d["extra"] = dict(d["extra"], volume_note="open surface: enclosed-volume interpretation invalid")
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @staticmethod
    def csv_header():
        return f"# {CSV_VERSION}\n" + ",".join(REPORT_COLUMNS)

    def csv_row(self):
        vals = []
        for col in REPORT_COLUMNS:
            if col in ("in_X01", "in_Xstar", "iso_ok"):
                vals.append(str(self.feasibility.get(col)))
            else:
                vals.append(repr(float(getattr(self, col))))
        return ",".join(vals)


def energy_report(
    surface_samples,
    c: BendingConstants,
    graph_samples=None,
    boundary_mass=0.0,
    bounds=None,
    a=None,
    v=None,
    extra=None,
) -> EnergyReport:
    """Assemble every functional for one surface.

    The graph-form energy uses the convex integrand for coercive constants and
    f_y otherwise.
    """
    from .graph_lift import lift_samples

    if graph_samples is None:
        graph_samples = lift_samples(surface_samples)
    integrand = "tilde" if c.is_coercive else "f_y"
    return EnergyReport(
        energy_curvature=energy_curvature(surface_samples, c),
        energy_graph=energy_graph(graph_samples, c, integrand=integrand),
        willmore=willmore(surface_samples),
        area=area(graph_samples),
        volume=volume(graph_samples),
        total_gauss=gauss_bonnet_total(surface_samples),
        graph_mass=graph_mass(graph_samples),
        boundary_mass=float(boundary_mass),
        feasibility=feasibility(graph_samples, bounds, a, v, boundary_mass),
        extra=dict(extra or {}, integrand=integrand),
    )

