"""Constrained minimisation of the discrete bending energy over triangle meshes.

Discrete energy (vertex quadrature with mixed areas A_i):

    E(X) = alpha_H sum_i A_i (H_i - H0)^2 - alpha_K sum_{i interior} (2 pi - sum of angles at i)

with H_i = sign(LX_i . n_i) |LX_i| / (2 A_i), LX the cotangent Laplacian
and n_i the normalised area-weighted vertex normal (boundary vertices use
the normal component LX_i . n_i).  Taking the full length of LX_i matters:
with the normal component alone the optimiser can drive LX_i tangential and
report H = 0 on a closed polyhedron.  Area is sum_i A_i (equal to the
total face area); volume is by default the exact enclosed volume of the
polyhedron.  ``volume_mode="quadrature"`` uses the vertex quadrature
(1/3) sum_i A_i x_i . n_i instead, which is what
:func:`gaussgraph.functionals.volume` returns on per-vertex samples; it can
exceed the isoperimetric bound and is not translation invariant, so it is
not suitable as a hard constraint.

The analytic gradient is a hand-written reverse pass through the same face
geometry; :func:`discrete_gradient` with ``mode="fd"`` gives a central
difference oracle.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateTriangleError, InfeasibleConstraintsError, NonCoerciveError, ValidationError
from .functionals import iso_ok
from .spectral import BendingConstants
from .surfaces.mesh import TriangleMesh, face_geometry, principal_from_HK, write_obj

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("iter", "energy", "area", "volume", "grad_norm", "violation", "outer", "step", "graph_mass")
TRAJECTORY_VERSION = "trajectory/1"


class DiscreteEnergy:
    """Energy, area and volume of meshes sharing one connectivity."""

    def __init__(self, mesh: TriangleMesh, c: BendingConstants, volume_mode="polyhedral"):
        if volume_mode not in ("quadrature", "polyhedral"):
            raise ValidationError(f"unknown volume mode {volume_mode!r}")
        self.F = mesh.faces
        self.n = mesh.n_vertices
        self.c = c
        self.interior = ~mesh.boundary_vertices
        self.volume_mode = volume_mode
        self.scale = mesh.length_scale()

    # forward ---------------------------------------------------------------

    def forward(self, X):
        F, n = self.F, self.n
        g = face_geometry(X, F)
        c2 = 2.0 * g.area
        if not np.all(c2 > 1e-14 * self.scale**2):
            bad = np.flatnonzero(~(c2 > 1e-14 * self.scale**2))
            raise DegenerateTriangleError(f"degenerate triangle(s): {bad[:10].tolist()}", bad.tolist())
        cot = g.dot / c2[:, None]
        lu2 = np.einsum("mki,mki->mk", g.u, g.u)
        lv2 = np.einsum("mki,mki->mk", g.v, g.v)
        obtuse = g.dot < 0
        any_obt = obtuse.any(axis=1)
        coef = np.where(obtuse, 0.5, 0.25)
        vor = (lu2 * np.roll(cot, -2, axis=1) + lv2 * np.roll(cot, -1, axis=1)) / 8.0
        Mc = np.where(any_obt[:, None], coef * g.area[:, None], vor)
        A = np.bincount(F.ravel(), Mc.ravel(), minlength=n)
        Nv = np.zeros((n, 3))
        for k in range(3):
            np.add.at(Nv, F[:, k], g.normal2)
        Nn = np.linalg.norm(Nv, axis=1)
        nrm = Nv / Nn[:, None]
        LX = np.zeros((n, 3))
        for k in range(3):
            i, j = F[:, (k + 1) % 3], F[:, (k + 2) % 3]
            d = cot[:, k, None] * (X[i] - X[j])
            np.add.at(LX, i, d)
            np.add.at(LX, j, -d)
        angle = np.arctan2(c2[:, None], g.dot)
        angsum = np.bincount(F.ravel(), angle.ravel(), minlength=n)
        s = np.einsum("ij,ij->i", LX, nrm)
        r = np.linalg.norm(LX, axis=1)
        sigma = np.where(s >= 0, 1.0, -1.0)
        # d|LX|/dLX; at LX = 0 the normal is the one-sided choice consistent with s
        unit = np.where((r > 0)[:, None], LX / np.where(r > 0, r, 1.0)[:, None], nrm)
        H = np.where(self.interior, sigma * r, s) / (2.0 * A)
        defect = np.where(self.interior, 2 * np.pi - angsum, 0.0)
        c = self.c
        energy = float(c.alpha_H * np.sum(A * (H - c.H0) ** 2) - c.alpha_K * np.sum(defect))
        area = float(np.sum(g.area))
        if self.volume_mode == "quadrature":
            volume = float(np.sum(A * np.einsum("ij,ij->i", X, nrm)) / 3.0)
        else:
            P = X[F]
            volume = float(np.sum(np.einsum("ij,ij->i", P[:, 0], np.cross(P[:, 1], P[:, 2]))) / 6.0)
        K = defect / A
        k1, k2, _ = principal_from_HK(H, K)
        gmass = float(np.sum(A * np.sqrt((1 + k1**2) * (1 + k2**2))))
        cache = dict(
            X=X, g=g, c2=c2, cot=cot, lu2=lu2, lv2=lv2, any_obt=any_obt, coef=coef,
            A=A, Nv=Nv, Nn=Nn, nrm=nrm, LX=LX, s=s, H=H, sigma=sigma, unit=unit,
        )
        vals = dict(energy=energy, area=area, volume=volume, graph_mass=gmass, H=H, K=K, A=A)
        return vals, cache

    # reverse ---------------------------------------------------------------

    def backward(self, cache, wE=1.0, wA=0.0, wV=0.0):
        """Gradient of wE * energy + wA * area + wV * volume w.r.t. X."""
        F, n, c = self.F, self.n, self.c
        X, g, c2, cot = cache["X"], cache["g"], cache["c2"], cache["cot"]
        A, Nn, nrm, LX, s, H = cache["A"], cache["Nn"], cache["nrm"], cache["LX"], cache["s"], cache["H"]
        m = len(F)

        gX = np.zeros((n, 3))
        # per-vertex adjoints
        # interior H = sigma |LX| / 2A, boundary H = LX . n / 2A
        dEdr = wE * c.alpha_H * (H - c.H0)
        gA = wE * c.alpha_H * (c.H0**2 - H**2)
        bnd = ~self.interior
        gLX = np.where(bnd[:, None], nrm, cache["sigma"][:, None] * cache["unit"]) * dEdr[:, None]
        gn = np.where(bnd, dEdr, 0.0)[:, None] * LX
        gang_v = np.where(self.interior, wE * c.alpha_K, 0.0)
        garea_f = np.full(m, float(wA))
        if wV:
            if self.volume_mode == "quadrature":
                xn = np.einsum("ij,ij->i", X, nrm)
                gA = gA + wV * xn / 3.0
                gn = gn + (wV / 3.0) * A[:, None] * X
                gX += (wV / 3.0) * A[:, None] * nrm
            else:
                P = X[F]
                gX_f = [np.cross(P[:, 1], P[:, 2]), np.cross(P[:, 2], P[:, 0]), np.cross(P[:, 0], P[:, 1])]
                for k in range(3):
                    np.add.at(gX, F[:, k], (wV / 6.0) * gX_f[k])

        gNv = (gn - np.einsum("ij,ij->i", gn, nrm)[:, None] * nrm) / Nn[:, None]

        gcot = np.zeros((m, 3))
        gd = np.zeros((m, 3))
        gc = np.zeros(m)
        gu = np.zeros((m, 3, 3))
        gv = np.zeros((m, 3, 3))

        # cotangent Laplacian
        for k in range(3):
            i, j = F[:, (k + 1) % 3], F[:, (k + 2) % 3]
            diff = gLX[i] - gLX[j]
            gcot[:, k] += np.einsum("ij,ij->i", diff, X[i] - X[j])
            np.add.at(gX, i, cot[:, k, None] * diff)
            np.add.at(gX, j, -cot[:, k, None] * diff)

        # mixed areas
        gMc = gA[F]
        any_obt = cache["any_obt"]
        nob = ~any_obt
        if nob.any():
            lu2, lv2 = cache["lu2"], cache["lv2"]
            gm = np.where(nob[:, None], gMc, 0.0) / 8.0
            cot_p2 = np.roll(cot, -2, axis=1)
            cot_p1 = np.roll(cot, -1, axis=1)
            glu2 = gm * cot_p2
            glv2 = gm * cot_p1
            gcot += np.roll(gm * lu2, 2, axis=1)  # corner k feeds cot_{k+2}
            gcot += np.roll(gm * lv2, 1, axis=1)  # corner k feeds cot_{k+1}
            gu += 2.0 * glu2[..., None] * g.u
            gv += 2.0 * glv2[..., None] * g.v
        garea_f = garea_f + np.where(any_obt, np.sum(cache["coef"] * gMc, axis=1), 0.0)

        # angles
        gang = gang_v[F]
        den = c2[:, None] ** 2 + g.dot**2
        gc += np.sum(gang * g.dot / den, axis=1)
        gd += -gang * c2[:, None] / den

        # cot = d / c
        gd += gcot / c2[:, None]
        gc += -np.sum(gcot * g.dot, axis=1) / c2**2

        # face area = c / 2
        gc += 0.5 * garea_f

        # d = u . v
        gu += gd[..., None] * g.v
        gv += gd[..., None] * g.u

        # face normal N = (P1 - P0) x (P2 - P0), |N| = c
        gN = gc[:, None] * g.normal2 / c2[:, None]
        for k in range(3):
            gN += gNv[F[:, k]]
        P = X[F]
        a, b = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
        ga = np.cross(b, gN)
        gb = np.cross(gN, a)
        gP = np.zeros((m, 3, 3))
        gP[:, 1] += ga
        gP[:, 2] += gb
        gP[:, 0] -= ga + gb
        # u_k = P_{k+1} - P_k, v_k = P_{k+2} - P_k
        gP += np.roll(gu, 1, axis=1) + np.roll(gv, 2, axis=1)
        gP -= gu + gv
        for k in range(3):
            np.add.at(gX, F[:, k], gP[:, k])
        return gX


def discrete_energy(mesh: TriangleMesh, c: BendingConstants) -> float:
    vals, _ = DiscreteEnergy(mesh, c).forward(mesh.vertices)
    return vals["energy"]


def discrete_gradient(mesh: TriangleMesh, c: BendingConstants, mode="analytic", h_fd=None, seed=0, weights=(1.0, 0.0, 0.0), volume_mode="polyhedral"):
    """Per-vertex gradient (n, 3) of wE * E + wA * A + wV * V.

    ``mode`` is "analytic" (exact gradient of the discrete functional) or
    "fd" (central differences with step ``h_fd``, default 1e-5 times the
    bounding-box diagonal; halved once if a perturbation degenerates).
    """
    de = DiscreteEnergy(mesh, c, volume_mode)
    wE, wA, wV = weights
    X = mesh.vertices
    if mode == "analytic":
        _, cache = de.forward(X)
        return de.backward(cache, wE, wA, wV)
    if mode != "fd":
        raise ValidationError(f"unknown gradient mode {mode!r}")
    h0 = 1e-5 * mesh.bbox_diagonal() if h_fd is None else float(h_fd)

    def phi(Y):
        v, _ = de.forward(Y)
        return wE * v["energy"] + wA * v["area"] + wV * v["volume"]

    G = np.zeros_like(X)
    order = np.random.default_rng(seed).permutation(X.size)
    for flat in order:
        i, k = divmod(int(flat), 3)
        for h in (h0, h0 / 2):
            try:
                Y = X.copy()
                Y[i, k] += h
                fp = phi(Y)
                Y[i, k] -= 2 * h
                fm = phi(Y)
            except DegenerateTriangleError:
                continue
            G[i, k] = (fp - fm) / (2 * h)
            break
        else:
            raise DegenerateTriangleError(f"perturbation of vertex {i} degenerates a triangle at h and h/2")
    return G


# -- descent -------------------------------------------------------------------


@dataclass
class MinimizeOptions:
    max_iters: int = 2000
    step: float = 1e-2  # largest vertex move of a trial step, in units of the mesh length scale
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 40
    gradient: str = "analytic"  # or "fd"
    direction: str = "lbfgs"  # or "steepest"
    memory: int = 10
    grad_tol: float = 1e-6
    grad_rtol: float = 1e-7  # relative to the initial gradient norm
    energy_tol: float = 1e-15
    constraint_tol: float = 1e-6
    max_outer: int = 50
    plateau_outer: int = 3  # stop after this many outer rounds without a 10% drop in violation
    inner_iters: int = 200
    mu0: float = 1e2
    mu_growth: float = 10.0
    mu_max: float = 1e10
    min_angle: float = 1e-2  # radians; trial steps may not push the smallest corner angle below this
    pin_boundary: bool = True
    laplacian_weight: float = 0.0
    volume_mode: str = "polyhedral"
    seed: int = 0

    def validate(self):
        for name in ("step", "armijo", "grad_tol", "energy_tol", "constraint_tol", "mu0"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"option {name} must be positive")
        if not 0 <= self.min_angle < np.pi / 3:
            raise ValidationError("min_angle must lie in [0, pi/3)")
        if not 0 < self.shrink < 1:
            raise ValidationError("shrink factor must lie in (0, 1)")
        if self.max_iters < 0 or self.mu_growth < 1 or self.plateau_outer < 1 or self.laplacian_weight < 0:
            raise ValidationError("invalid minimisation options")
        if self.gradient not in ("analytic", "fd") or self.direction not in ("lbfgs", "steepest"):
            raise ValidationError("unknown gradient or direction mode")


@dataclass
class Trajectory:
    rows: list = field(default_factory=list)
    mesh: TriangleMesh | None = None
    converged: bool = False
    reason: str = ""
    multipliers: dict = field(default_factory=dict)
    targets: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    @property
    def final(self):
        return self.rows[-1]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# {TRAJECTORY_VERSION}\n")
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_COLUMNS)
            for r in self.rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in TRAJECTORY_COLUMNS])

    def write(self, out_dir, stem="minimize"):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, obj_path = out / f"{stem}_trajectory.csv", out / f"{stem}_final.obj"
        self.write_csv(csv_path)
        write_obj(self.mesh, obj_path, header=f"final mesh after {self.final['iter']} iterations ({self.reason})")
        return csv_path, obj_path

    def summary(self):
        f = self.final
        return dict(
            converged=self.converged, reason=self.reason, iterations=f["iter"],
            energy_initial=self.rows[0]["energy"], energy_final=f["energy"],
            grad_norm_initial=self.rows[0]["grad_norm"], grad_norm_final=f["grad_norm"],
            violation_final=f["violation"], area=f["area"], volume=f["volume"],
            multipliers=self.multipliers, targets=self.targets,
        )


def _uniform_laplacian(mesh):
    n = mesh.n_vertices
    e = mesh.edges
    W = sp.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n)).tocsr()
    deg = np.asarray(W.sum(axis=1)).ravel()
    return sp.diags(1.0 / deg) @ W - sp.identity(n)


class _Objective:
    """Augmented Lagrangian Phi = E - sum lam_j c_j + mu/2 sum c_j^2 (+ regulariser)."""

    def __init__(self, mesh, c, a, v, opts):
        self.de = DiscreteEnergy(mesh, c, opts.volume_mode)
        self.a, self.v = a, v
        self.opts = opts
        self.lam = {"area": 0.0, "volume": 0.0}
        self.mu = opts.mu0
        self.free = ~mesh.boundary_vertices if opts.pin_boundary else np.ones(mesh.n_vertices, bool)
        self.Lu = _uniform_laplacian(mesh) if opts.laplacian_weight > 0 else None
        self.mesh = mesh

    def constraints(self, vals):
        out = {}
        if self.a is not None:
            out["area"] = (vals["area"] - self.a) / self.a
        if self.v is not None:
            out["volume"] = (vals["volume"] - self.v) / self.v
        return out

    def weights(self, cons, penalty=True):
        wA = wV = 0.0
        if "area" in cons:
            wA = (-self.lam["area"] + (self.mu * cons["area"] if penalty else 0.0)) / self.a
        if "volume" in cons:
            wV = (-self.lam["volume"] + (self.mu * cons["volume"] if penalty else 0.0)) / self.v
        return wA, wV

    def evaluate(self, X, grad=True):
        vals, cache = self.de.forward(X)
        cons = self.constraints(vals)
        phi = vals["energy"] - sum(self.lam[k] * cons[k] for k in cons) + 0.5 * self.mu * sum(x * x for x in cons.values())
        G = None
        if grad:
            wA, wV = self.weights(cons)
            G = self.de.backward(cache, 1.0, wA, wV) if self.opts.gradient == "analytic" else self._fd(X, wA, wV)
        if self.Lu is not None:
            LX = self.Lu @ X
            phi += 0.5 * self.opts.laplacian_weight * float(np.sum(LX**2))
            if grad:
                G = G + self.opts.laplacian_weight * (self.Lu.T @ LX)
        if grad:
            G = G * self.free[:, None]
        return phi, G, vals, cons, cache

    def _fd(self, X, wA, wV):
        m = self.mesh.copy(X)
        return discrete_gradient(m, self.de.c, "fd", seed=self.opts.seed, weights=(1.0, wA, wV), volume_mode=self.opts.volume_mode)

    def kkt(self, cache, cons):
        """Norm of grad E - sum lam_j grad c_j at the multiplier estimate lam - mu c."""
        wA, wV = self.weights(cons)
        G = self.de.backward(cache, 1.0, wA, wV) if self.opts.gradient == "analytic" else self._fd(cache["X"], wA, wV)
        return float(np.linalg.norm(G * self.free[:, None]))


def descend(mesh: TriangleMesh, c: BendingConstants, a=None, v=None, opts: MinimizeOptions | None = None) -> Trajectory:
    """Minimise the discrete energy subject to optional area / volume targets.

    Augmented Lagrangian outer loop on the relative residuals (A - a)/a and
    (V - v)/v; inner loop is Armijo-backtracking descent along an L-BFGS (or
    steepest-descent) direction on the vertex positions.  The reported
    gradient norm is that of grad E - sum lam_j grad c_j at the first-order
    multiplier estimate.  Runs stop without convergence when the violation
    stops improving (unreachable targets) or the angle guard blocks progress.
    """
    opts = opts or MinimizeOptions()
    opts.validate()
    if not c.is_coercive:
        raise NonCoerciveError(
            f"minimisation requires 4*alpha_H > alpha_K > 0 (got alpha_H={c.alpha_H}, alpha_K={c.alpha_K})"
        )
    for name, val in (("area", a), ("volume", v)):
        if val is not None and not val > 0:
            raise ValidationError(f"target {name} must be positive")
    if a is not None and v is not None and not iso_ok(a, v):
        raise InfeasibleConstraintsError(
            f"targets a={a}, v={v} violate the isoperimetric gate 36*pi*v^2 <= a^3 "
            f"({36 * np.pi * v**2:.6g} > {a**3:.6g})"
        )
    if v is not None and not mesh.is_closed:
        raise ValidationError("a volume constraint needs a closed mesh")

    obj = _Objective(mesh, c, a, v, opts)
    scale = mesh.length_scale()
    X = mesh.vertices.copy()
    traj = Trajectory(targets={"area": a, "volume": v})
    constrained = a is not None or v is not None

    phi, G, vals, cons, cache = obj.evaluate(X)

    def record(it, outer, step, vals, cons, cache):
        traj.rows.append(dict(
            iter=it, energy=vals["energy"], area=vals["area"], volume=vals["volume"],
            grad_norm=obj.kkt(cache, cons), violation=max((abs(x) for x in cons.values()), default=0.0),
            outer=outer, step=step, graph_mass=vals["graph_mass"],
        ))

    record(0, 0, 0.0, vals, cons, cache)
    g_stop = max(opts.grad_tol, opts.grad_rtol * traj.rows[0]["grad_norm"])
    inner_cap = opts.inner_iters if constrained else opts.max_iters
    it = outer = 0
    last_viol = best_viol = np.inf
    plateau = 0
    while True:
        S, Y = [], []
        inner = 0
        stalled = ls_failed = blocked = False
        while it < opts.max_iters and inner < inner_cap:
            if np.linalg.norm(G) <= g_stop:
                break
            d = -G
            if opts.direction == "lbfgs" and S:
                d = -_lbfgs_apply(G.ravel(), S, Y).reshape(G.shape)
                if np.sum(d * G) >= 0:
                    d = -G
                    S, Y = [], []
            slope = float(np.sum(d * G))
            # first trial moves no vertex by more than opts.step * scale
            t = min(1.0, opts.step * scale / max(np.max(np.linalg.norm(d, axis=1)), 1e-300))
            # tangential drift can collapse triangles into slivers the energy cannot see
            floor = min(opts.min_angle, float(cache["g"].angle.min()))
            accepted = blocked = False
            for _ in range(opts.max_backtracks):
                Xn = X + t * d
                try:
                    phin, Gn, valsn, consn, cachen = obj.evaluate(Xn)
                except DegenerateTriangleError:
                    t *= opts.shrink
                    continue
                if cachen["g"].angle.min() < floor:
                    blocked = True
                    t *= opts.shrink
                    continue
                if np.isfinite(phin) and phin <= phi + opts.armijo * t * slope:
                    accepted = True
                    break
                t *= opts.shrink
            if not accepted:
                ls_failed = True
                log.info("line search failed at iteration %d", it)
                break
            s_vec, y_vec = (Xn - X).ravel(), (Gn - G).ravel()
            if y_vec @ s_vec > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
                S.append(s_vec)
                Y.append(y_vec)
                if len(S) > opts.memory:
                    S.pop(0)
                    Y.pop(0)
            dphi = phi - phin
            X, phi, G, vals, cons, cache = Xn, phin, Gn, valsn, consn, cachen
            it += 1
            inner += 1
            record(it, outer, t, vals, cons, cache)
            if dphi <= opts.energy_tol * max(1.0, abs(phi)):
                # for constrained runs this hands control back to the multiplier update
                stalled = True
                break

        # progress halted by the angle guard is not stationarity
        floored = blocked and (stalled or ls_failed)
        if floored:
            stalled = False
        if not constrained:
            done = np.linalg.norm(G) <= g_stop
            traj.converged = bool(done or stalled)
            if done:
                traj.reason = "gradient tolerance"
            elif stalled:
                traj.reason = "energy stalled"
            elif floored:
                traj.reason = "mesh quality floor"
            else:
                traj.reason = "line search failed" if ls_failed else "max_iters"
            break
        viol = max(abs(x) for x in cons.values())
        kkt = obj.kkt(cache, cons)
        traj.rows[-1]["grad_norm"] = kkt
        # safeguarded update: move the multipliers only on enough progress,
        # otherwise raise the penalty (a stuck inner loop would inflate lam)
        if viol <= 0.25 * last_viol or viol <= opts.constraint_tol:
            for k in cons:
                obj.lam[k] -= obj.mu * cons[k]
            last_viol = viol
        else:
            obj.mu = min(obj.mu * opts.mu_growth, opts.mu_max)
        outer += 1
        if viol < 0.9 * best_viol:
            best_viol, plateau = viol, 0
        else:
            plateau += 1
        if viol <= opts.constraint_tol and (kkt <= g_stop or stalled):
            traj.converged, traj.reason = True, "constraints and stationarity"
            break
        if plateau >= opts.plateau_outer or it >= opts.max_iters or outer >= opts.max_outer:
            # a plateau means the targets are out of reach of this mesh; more
            # penalty would only hurt conditioning
            if plateau >= opts.plateau_outer:
                traj.reason = "violation plateau"
            else:
                traj.reason = "max_iters" if it >= opts.max_iters else "max_outer"
            if floored:
                traj.reason += " (mesh quality floor)"
            break
        phi, G, vals, cons, cache = obj.evaluate(X)

    traj.mesh = mesh.copy(X)
    traj.multipliers = dict(obj.lam) if constrained else {}
    return traj


def _lbfgs_apply(g, S, Y):
    """Two-loop recursion: approximate inverse Hessian times g."""
    q = g.copy()
    hist = []
    for s_, y_ in zip(reversed(S), reversed(Y)):
        rho = 1.0 / (y_ @ s_)
        al = rho * (s_ @ q)
        q -= al * y_
        hist.append((rho, al, s_, y_))
    q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
    for rho, al, s_, y_ in reversed(hist):
        q += (al - rho * (y_ @ q)) * s_
    return q
