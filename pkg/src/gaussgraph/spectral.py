"""Quadratic form of the Canham-Helfrich integrand and its convexification.

A mixed 2-vector zeta (3x3 matrix) is identified with u = u[zeta] in R^9 by
row-major flattening, u = (z11, z12, z13, z21, ..., z33).  For a unit normal
y the curvature part of the integrand,

    g_y(zeta) = alpha_H <Psi_y, zeta>^2 - alpha_K y . cof(zeta) y,

is the quadratic form u . A_y u.  A_y has the y-independent spectrum
{-alpha_K/2, alpha_K/2 (x2), 2 alpha_H - alpha_K/2, 0 (x5)}.  Adding back the
kernel and the negative direction gives the convex integrand ``tilde_f``,
which coincides with ``f_y`` whenever zeta satisfies the Gauss-graph
constraints (y in both null spaces, zero trace).

Everything here broadcasts over a leading batch of normals: ``y`` may be
(3,) or (N, 3), in which case u / zeta carry the same leading dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonCoerciveError, ValidationError
from .exterior import cofactor, psi_pair

SPACES = ("zero", "neg", "mid", "top")
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class BendingConstants:
    """Bending moduli and spontaneous curvature.

    The default constructor enforces 4 alpha_H > alpha_K > 0.  Use
    :meth:`relaxed` for the degenerate demonstrations; such instances report
    ``is_coercive == False`` and are refused by ``tilde_f``.
    """

    alpha_H: float
    alpha_K: float
    H0: float = 0.0
    relaxed_: bool = False

    def __post_init__(self):
        for name in ("alpha_H", "alpha_K", "H0"):
            val = float(getattr(self, name))
            if not np.isfinite(val):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.alpha_H <= 0:
            raise ValidationError("alpha_H must be positive")
        if not self.relaxed_ and not self.is_coercive:
            raise NonCoerciveError(
                f"bending constants alpha_H={self.alpha_H}, alpha_K={self.alpha_K} "
                "violate 4*alpha_H > alpha_K > 0"
            )

    @classmethod
    def relaxed(cls, alpha_H, alpha_K, H0=0.0):
        return cls(alpha_H, alpha_K, H0, relaxed_=True)

    @property
    def is_coercive(self):
        return 4.0 * self.alpha_H > self.alpha_K > 0.0

    @property
    def gamma(self):
        return self.alpha_H - 0.5 * self.alpha_K

    def eigenvalues(self):
        """Distinct eigenvalues of A_y with multiplicities, keyed by space."""
        aH, aK = self.alpha_H, self.alpha_K
        return {
            "neg": (-0.5 * aK, 1),
            "mid": (0.5 * aK, 2),
            "top": (2.0 * aH - 0.5 * aK, 1),
            "zero": (0.0, 5),
        }

    def as_dict(self):
        return {"alpha_H": self.alpha_H, "alpha_K": self.alpha_K, "H0": self.H0}


def _unit(y, tol=1e-9):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != 3:
        raise ValidationError("normal must have 3 components")
    if np.any(np.abs(np.linalg.norm(y, axis=-1) - 1.0) > tol):
        raise ValidationError("normal y must be a unit vector")
    return y


def flatten(zeta):
    """u[zeta]: row-major flattening of (..., 3, 3) to (..., 9)."""
    zeta = np.asarray(zeta, dtype=float)
    return zeta.reshape(zeta.shape[:-2] + (9,))


def unflatten(u):
    u = np.asarray(u, dtype=float)
    return u.reshape(u.shape[:-1] + (3, 3))


def psi_vector(y):
    """Vector p_y with <Psi_y, zeta> = p_y . u[zeta]."""
    y = np.asarray(y, dtype=float)
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    z = np.zeros_like(y1)
    return np.stack([z, y3, -y2, -y3, z, y1, y2, -y1, z], axis=-1)


def assemble_A(y, c: BendingConstants):
    """The symmetric 9x9 matrix with u . A_y u = g_y(zeta)."""
    y = _unit(y)
    aH, k, g = c.alpha_H, 0.5 * c.alpha_K, c.gamma
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    z = np.zeros_like(y1)
    rows = [
        [z, z, z, z, -k * y3**2, k * y2 * y3, z, k * y2 * y3, -k * y2**2],
        [z, aH * y3**2, -aH * y2 * y3, -g * y3**2, z, g * y1 * y3, g * y2 * y3, -aH * y1 * y3, k * y1 * y2],
        [z, -aH * y2 * y3, aH * y2**2, g * y2 * y3, k * y1 * y3, -aH * y1 * y2, -g * y2**2, g * y1 * y2, z],
        [z, -g * y3**2, g * y2 * y3, aH * y3**2, z, -aH * y1 * y3, -aH * y2 * y3, g * y1 * y3, k * y1 * y2],
        [-k * y3**2, z, k * y1 * y3, z, z, z, k * y1 * y3, z, -k * y1**2],
        [k * y2 * y3, g * y1 * y3, -aH * y1 * y2, -aH * y1 * y3, z, aH * y1**2, g * y1 * y2, -g * y1**2, z],
        [z, g * y2 * y3, -g * y2**2, -aH * y2 * y3, k * y1 * y3, g * y1 * y2, aH * y2**2, -aH * y1 * y2, z],
        [k * y2 * y3, -aH * y1 * y3, g * y1 * y2, g * y1 * y3, z, -g * y1**2, -aH * y1 * y2, aH * y1**2, z],
        [-k * y2**2, k * y1 * y2, z, k * y1 * y2, -k * y1**2, z, z, z, z],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


@dataclass(frozen=True)
class EigenBasis:
    """Explicit (unnormalised) eigenvectors of A_y.

    ``v_zero`` stacks the six kernel generators along axis -2; they span a
    five-dimensional space.
    """

    v_neg: np.ndarray
    v_top: np.ndarray
    v_mid1: np.ndarray
    v_mid2: np.ndarray
    v_zero: np.ndarray

    def pairs(self, c: BendingConstants):
        """(label, eigenvalue, vector) for the four nonzero-eigenvalue vectors."""
        ev = c.eigenvalues()
        return [
            ("neg", ev["neg"][0], self.v_neg),
            ("top", ev["top"][0], self.v_top),
            ("mid", ev["mid"][0], self.v_mid1),
            ("mid", ev["mid"][0], self.v_mid2),
        ]


def eigenbasis(y, c: BendingConstants | None = None) -> EigenBasis:
    """The explicit eigenvectors; they do not depend on the moduli."""
    y = _unit(y)
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    z = np.zeros_like(y1)
    v_neg = np.stack([y1 * y1 - 1, y1 * y2, y1 * y3, y1 * y2, y2 * y2 - 1, y2 * y3, y1 * y3, y2 * y3, y3 * y3 - 1], -1)
    v_top = -psi_vector(y)
    a = y3 * y2**2 - y3 * y1**2
    b = y2 * y3**2 - y2
    d = y1 - y1 * y3**2
    v_mid1 = np.stack([2 * y1 * y2 * y3, a, b, a, -2 * y1 * y2 * y3, d, b, d, z], -1)
    p = y2**3 - y2
    q = y3 * y1**2 + y3 * y2**2
    v_mid2 = np.stack([y1 * y2**2 - y1 * y3**2, p, q, p, y1 - y1 * y2**2, z, q, z, -y1**3 - y1 * y2**2], -1)
    eye = np.eye(3)
    gens = []
    # zeta = e_k (x) y, i.e. row k equal to y
    for kk in range(3):
        gens.append(flatten(eye[kk][:, None] * y[..., None, :]))
    # zeta = y (x) e_k, i.e. column k equal to y
    for kk in range(3):
        gens.append(flatten(y[..., :, None] * eye[kk][None, :]))
    v_zero = np.stack(gens, axis=-2)
    return EigenBasis(v_neg, v_top, v_mid1, v_mid2, v_zero)


def span_projector(generators, rtol=RANK_RTOL):
    """Orthogonal projector onto the span of the rows of ``generators``.

    Rank is decided from the singular values (relative to the largest one),
    so dependent or vanishing generators are handled.  Returns (P, rank).
    """
    G = np.asarray(generators, dtype=float)
    M = np.swapaxes(G, -1, -2)  # columns are generators
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    smax = np.max(s, axis=-1, keepdims=True)
    mask = (s > rtol * np.maximum(smax, 1e-300)) & (smax > 1e-14)
    Um = U * mask[..., None, :]
    P = Um @ np.swapaxes(U, -1, -2)
    return P, mask.sum(axis=-1)


def projectors(y):
    """Orthogonal projectors onto the four eigenspaces of A_y.

    The kernel projector uses all six generators.  If the two explicit
    mid-space vectors degenerate (they vanish at e.g. y = e3), the mid
    projector falls back to the orthogonal complement of the other three.
    """
    y = _unit(y)
    eb = eigenbasis(y)
    P0, _ = span_projector(eb.v_zero)
    Pn, _ = span_projector(eb.v_neg[..., None, :])
    Pt, _ = span_projector(eb.v_top[..., None, :])
    Pm, rank_m = span_projector(np.stack([eb.v_mid1, eb.v_mid2], axis=-2))
    complement = np.eye(9) - P0 - Pn - Pt
    bad = rank_m < 2
    if np.any(bad):
        Pm = np.where(bad[..., None, None], complement, Pm)
    return {"zero": P0, "neg": Pn, "mid": Pm, "top": Pt}


def kernel_rank(y, rtol=RANK_RTOL, five_only=False):
    """Rank of the kernel generators (optionally only the first five)."""
    eb = eigenbasis(y)
    gens = eb.v_zero[..., :5, :] if five_only else eb.v_zero
    return span_projector(gens, rtol)[1]


def project(u, y, space):
    if space not in SPACES:
        raise ValidationError(f"unknown eigenspace {space!r}; expected one of {SPACES}")
    P = projectors(y)[space]
    return np.einsum("...ij,...j->...i", P, np.asarray(u, dtype=float))


def g_y(zeta, y, c: BendingConstants):
    psi = psi_pair(y, zeta)
    return c.alpha_H * psi**2 - c.alpha_K * np.einsum("...i,...ij,...j->...", y, cofactor(zeta), y)


def h_y(zeta, y, c: BendingConstants):
    return 2.0 * c.alpha_H * c.H0 * psi_pair(y, zeta)


def f_y(zeta, y, c: BendingConstants):
    """Canham-Helfrich integrand in terms of the mixed stratum."""
    y = np.asarray(y, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    psi = psi_pair(y, zeta)
    cof_term = np.einsum("...i,...ij,...j->...", y, cofactor(zeta), y)
    return (
        c.alpha_H * psi**2
        - 2.0 * c.alpha_H * c.H0 * psi
        + c.alpha_H * c.H0**2
        - c.alpha_K * cof_term
    )


def linear_vector(y, c: BendingConstants):
    """v_y with h_y(zeta) = u[zeta] . v_y."""
    return -2.0 * c.alpha_H * c.H0 * eigenbasis(y).v_top


def _sqnorm(P, u):
    w = np.einsum("...ij,...j->...i", P, u)
    return np.einsum("...i,...i->...", w, w)


def F_matrix(u, y, c: BendingConstants, P=None):
    """F_y(u) via the matrix A_y (no coercivity gate)."""
    u = np.asarray(u, dtype=float)
    P = projectors(y) if P is None else P
    A = assemble_A(y, c)
    quad = np.einsum("...i,...ij,...j->...", u, A, u)
    lin = np.einsum("...i,...i->...", u, linear_vector(y, c))
    return (
        quad
        - lin
        + c.alpha_H * c.H0**2
        + 0.5 * c.alpha_K * _sqnorm(P["zero"], u)
        + c.alpha_K * _sqnorm(P["neg"], u)
    )


def F_spectral(u, y, c: BendingConstants, P=None):
    """F_y(u) via the eigenspace expansion (no coercivity gate)."""
    u = np.asarray(u, dtype=float)
    P = projectors(y) if P is None else P
    aH, aK = c.alpha_H, c.alpha_K
    v_top = eigenbasis(y).v_top
    return (
        0.5 * aK * _sqnorm(P["neg"], u)
        + 0.5 * aK * _sqnorm(P["mid"], u)
        + (2.0 * aH - 0.5 * aK) * _sqnorm(P["top"], u)
        + 0.5 * aK * _sqnorm(P["zero"], u)
        + 2.0 * aH * c.H0 * np.einsum("...i,...i->...", u, v_top)
        + aH * c.H0**2
    )


def _require_coercive(c):
    if not c.is_coercive:
        raise NonCoerciveError(
            f"alpha_H={c.alpha_H}, alpha_K={c.alpha_K}: the convexified integrand "
            "requires 4*alpha_H > alpha_K > 0"
        )


def tilde_f(zeta, y, c: BendingConstants, P=None, cross_check=False, rtol=1e-10):
    """Convex coercive integrand F_y(u[zeta]).

    With ``cross_check`` the spectral expansion is evaluated as well and an
    AssertionError is raised if the two disagree beyond ``rtol``.
    """
    _require_coercive(c)
    y = _unit(y)
    u = flatten(zeta)
    P = projectors(y) if P is None else P
    val = F_matrix(u, y, c, P)
    if cross_check:
        other = F_spectral(u, y, c, P)
        scale = 1.0 + np.abs(val) + c.alpha_H * np.einsum("...i,...i->...", u, u)
        if np.any(np.abs(val - other) > rtol * scale):
            raise AssertionError("matrix and spectral forms of tilde_f disagree")
    return val


def coercivity_constants(c: BendingConstants):
    """(c1, c2) with tilde_f(zeta) >= c1 |zeta|^2 - c2."""
    _require_coercive(c)
    m = min(c.alpha_K, 4.0 * c.alpha_H - c.alpha_K)
    c1 = 0.25 * m
    c2 = c.alpha_H * c.H0**2 * (8.0 * c.alpha_H / m - 1.0)
    return c1, c2


def quadratic_part(y, c: BendingConstants):
    """Hessian/2 of F_y: A_y + (alpha_K/2) pi_0 + alpha_K pi_neg."""
    P = projectors(y)
    return assemble_A(y, c) + 0.5 * c.alpha_K * P["zero"] + c.alpha_K * P["neg"]


def coercivity_witness(y, c: BendingConstants, scale=1e3):
    """Probe F_y for growth failure; works for relaxed constants.

    Returns the smallest eigenvalue of the quadratic part, the direction that
    attains it and F_y evaluated at ``scale`` times that direction (a witness
    of unboundedness or of missing quadratic growth when the eigenvalue is
    <= 0).
    """
    y = _unit(y)
    Q = quadratic_part(y, c)
    w, V = np.linalg.eigh(Q)
    d = V[:, 0]
    # orient along +v_top so the linear term cannot rescue the witness
    if d @ eigenbasis(y).v_top * c.H0 > 0:
        d = -d
    val = float(F_matrix(scale * d, y, c))
    return float(w[0]), d, val


def eigen_residuals(y, c: BendingConstants):
    """Relative residual |A v - lambda v| / |v| for each explicit eigenvector.

    Vectors that vanish (degenerate y) are reported as NaN.
    """
    A = assemble_A(y, c)
    out = {}
    eb = eigenbasis(y)
    for label, lam, v in eb.pairs(c):
        nv = np.linalg.norm(v, axis=-1)
        vn = v / np.where(nv > 1e-14, nv, 1.0)[..., None]
        r = np.linalg.norm(np.einsum("...ij,...j->...i", A, vn) - lam * vn, axis=-1)
        scale = max(abs(c.alpha_H), abs(c.alpha_K))
        r = np.where(nv > 1e-14, r / scale, np.nan)
        key = label if label not in out else label + "2"
        out[key] = r
    kz = np.einsum("...ij,...kj->...ki", A, eb.v_zero)
    out["zero"] = np.max(np.linalg.norm(kz, axis=-1), axis=-1) / max(abs(c.alpha_H), abs(c.alpha_K))
    return out


def numeric_spectrum(y, c: BendingConstants):
    return np.linalg.eigvalsh(assemble_A(y, c))


def expected_spectrum(c: BendingConstants):
    vals = []
    for lam, mult in c.eigenvalues().values():
        vals.extend([lam] * mult)
    return np.sort(np.array(vals))
