"""Exterior algebra of 2-vectors in R^6 = R^3_x x R^3_y.

A 2-vector is kept in stratified form: the horizontal part (e_i ^ e_j), the
mixed part (e_i ^ eps_j) and the vertical part (eps_i ^ eps_j).  The
horizontal and vertical strata store their coefficients in the fixed pair
order (12, 13, 23); the mixed stratum is a full 3x3 matrix whose (i, j) entry
is the coefficient of e_i ^ eps_j.

All functions accept plain sequences or numpy arrays.  ``cofactor`` and
``psi_pair`` broadcast over leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

PAIRS = ((0, 1), (0, 2), (1, 2))

# Levi-Civita symbol, LEVI_CIVITA[i, j, k] = eps_{ijk}
LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_i, _k, _j] = -1.0


def _frozen(a, shape):
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise ValidationError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Stratified2Vector:
    """A 2-vector of R^3_x x R^3_y split into its three strata."""

    xi0: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi0", _frozen(self.xi0, (3,)))
        object.__setattr__(self, "xi1", _frozen(self.xi1, (3, 3)))
        object.__setattr__(self, "xi2", _frozen(self.xi2, (3,)))

    @classmethod
    def zero(cls):
        return cls(np.zeros(3), np.zeros((3, 3)), np.zeros(3))

    @classmethod
    def from_bivector(cls, w):
        """Stratify an antisymmetric 6x6 matrix (coefficients w[i, j], i < j)."""
        w = np.asarray(w, dtype=float)
        if w.shape != (6, 6):
            raise ValidationError(f"bivector must be 6x6, got {w.shape}")
        xi0 = [w[i, j] for i, j in PAIRS]
        xi2 = [w[3 + i, 3 + j] for i, j in PAIRS]
        return cls(xi0, w[:3, 3:], xi2)

    def to_bivector(self):
        """Reassemble the antisymmetric 6x6 coefficient matrix."""
        w = np.zeros((6, 6))
        for k, (i, j) in enumerate(PAIRS):
            w[i, j] = self.xi0[k]
            w[3 + i, 3 + j] = self.xi2[k]
        w[:3, 3:] = self.xi1
        return w - w.T

    def squared_norm(self):
        return float(self.xi0 @ self.xi0 + np.sum(self.xi1**2) + self.xi2 @ self.xi2)

    def norm(self):
        return float(np.sqrt(self.squared_norm()))

    def scaled(self, s):
        return Stratified2Vector(s * self.xi0, s * self.xi1, s * self.xi2)

    def __add__(self, other):
        return Stratified2Vector(self.xi0 + other.xi0, self.xi1 + other.xi1, self.xi2 + other.xi2)

    def __neg__(self):
        return self.scaled(-1.0)

    def allclose(self, other, atol=1e-12):
        return (
            np.allclose(self.xi0, other.xi0, atol=atol, rtol=0)
            and np.allclose(self.xi1, other.xi1, atol=atol, rtol=0)
            and np.allclose(self.xi2, other.xi2, atol=atol, rtol=0)
        )


def _wedge3(a, b):
    return np.array([a[i] * b[j] - a[j] * b[i] for i, j in PAIRS])


def vec6(x, y):
    """Concatenate an x-part and a y-part into a vector of R^6."""
    return np.concatenate([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])


def wedge6(a, b):
    """Stratified exterior product a ^ b of two vectors of R^6."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay = a[:3], a[3:]
    bx, by = b[:3], b[3:]
    xi1 = np.outer(ax, by) - np.outer(bx, ay)
    return Stratified2Vector(_wedge3(ax, bx), xi1, _wedge3(ay, by))


def hodge_frame(nu, tol=1e-9):
    """Oriented orthonormal tangent frame (tau1, tau2) with tau1 x tau2 = nu.

    tau1 is the canonical axis least aligned with ``nu``, made orthogonal to
    it; tau2 = nu x tau1.
    """
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (3,) or not np.all(np.isfinite(nu)):
        raise ValidationError("normal must be a finite 3-vector")
    if abs(np.linalg.norm(nu) - 1.0) > tol:
        raise ValidationError(f"normal is not unit length (|nu| = {np.linalg.norm(nu)!r})")
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(nu)))] = 1.0
    t1 = axis - (axis @ nu) * nu
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(nu, t1)
    return t1, t2


def cofactor(m):
    """Cofactor matrix, cof(m)[i, j] = (-1)^(i+j) * minor(i, j).

    Satisfies cof(m).T @ m = det(m) * I.
    """
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            # cyclic index order absorbs the (-1)^(i+j) sign
            out[..., i, j] = m[..., i1, j1] * m[..., i2, j2] - m[..., i1, j2] * m[..., i2, j1]
    return out


def psi_pair(y, zeta):
    """Pairing of Psi_y = sum eps_ijk y_k dx_i ^ dy_j with a mixed 2-vector."""
    y = np.asarray(y, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    return np.einsum("ijk,...k,...ij->...", LEVI_CIVITA, y, zeta)
