"""Compressible neo-Hookean solid.

Strain energy per unit reference volume::

    w = C10 (J^(-2/3) I1 - 3) + (J - 1)^2 / D1

with ``I1 = tr(F^T F)`` and ``J = det F``.  All functions accept a single
deformation gradient or a stack ``(..., d, d)``.  Two-dimensional gradients
are plane strain and one-dimensional gradients uniaxial strain: both are
embedded in a 3x3 tensor with unit out-of-plane stretches, and stresses and
tangents are returned as the in-plane block.

Stress index convention: ``P[i, J] = dw/dF[i, J]``, so the internal force of
node K is ``f[i, K] = int P[i, J] dN_K/dX_J``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialError",
    "NeoHookean",
    "from_moduli",
    "strain_energy",
    "pk1_stress",
    "material_tangent",
    "cauchy_stress",
    "von_mises",
]


class MaterialError(ValueError):
    """Non-physical deformation (J <= 0); ``index`` locates the offending entry."""

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


@dataclass(frozen=True)
class NeoHookean:
    C10: float
    D1: float
    rho0: float = 1.0

    def __post_init__(self):
        if not (self.C10 > 0 and self.D1 > 0 and self.rho0 > 0):
            raise ValueError("C10, D1 and rho0 must all be positive")

    @property
    def shear_modulus(self) -> float:
        return 2.0 * self.C10

    @property
    def bulk_modulus(self) -> float:
        return 2.0 / self.D1

    def wave_speed(self) -> float:
        """Small-strain dilatational wave speed sqrt((K + 4 mu / 3) / rho0)."""
        return float(np.sqrt((self.bulk_modulus + 4.0 * self.shear_modulus / 3.0) / self.rho0))

    def as_dict(self) -> dict:
        return {"C10": self.C10, "D1": self.D1, "rho0": self.rho0}


def from_moduli(mu0: float, K0: float, rho0: float = 1.0) -> NeoHookean:
    """Constants matching initial shear modulus ``mu0`` and bulk modulus ``K0``."""
    if mu0 <= 0 or K0 <= 0:
        raise ValueError("moduli must be positive")
    return NeoHookean(C10=mu0 / 2.0, D1=2.0 / K0, rho0=rho0)


def _promote(F):
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    if d == 3:
        return F, 3
    F3 = np.zeros(F.shape[:-2] + (3, 3))
    F3[..., 0, 0] = F3[..., 1, 1] = F3[..., 2, 2] = 1.0
    F3[..., :d, :d] = F
    return F3, d


def _kinematics(F3):
    J = np.linalg.det(F3)
    if np.any(~(J > 0.0)):
        bad = np.argwhere(~(J > 0.0))
        idx = tuple(bad[0]) if bad.size else ()
        raise MaterialError(f"non-positive volume ratio J = {J[idx] if idx else J} at {idx}", idx)
    I1 = np.einsum("...ij,...ij->...", F3, F3)
    H = np.swapaxes(np.linalg.inv(F3), -1, -2)  # F^-T
    return J, I1, H


def strain_energy(mat: NeoHookean, F) -> np.ndarray:
    F3, _ = _promote(F)
    J, I1, _ = _kinematics(F3)
    return mat.C10 * (J ** (-2.0 / 3.0) * I1 - 3.0) + (J - 1.0) ** 2 / mat.D1


def pk1_stress(mat: NeoHookean, F) -> np.ndarray:
    """First Piola-Kirchhoff stress dw/dF."""
    F3, d = _promote(F)
    J, I1, H = _kinematics(F3)
    Jm = J ** (-2.0 / 3.0)
    P = 2.0 * mat.C10 * Jm[..., None, None] * (F3 - (I1 / 3.0)[..., None, None] * H)
    P += ((2.0 / mat.D1) * (J - 1.0) * J)[..., None, None] * H
    return P[..., :d, :d]


def material_tangent(mat: NeoHookean, F) -> np.ndarray:
    """Fourth-order tangent A[i, J, k, L] = dP[i, J] / dF[k, L]."""
    F3, d = _promote(F)
    J, I1, H = _kinematics(F3)
    Jm = J ** (-2.0 / 3.0)
    eye = np.eye(3)
    c1 = (2.0 * mat.C10 * Jm)[..., None, None, None, None]
    dev = F3 - (I1 / 3.0)[..., None, None] * H
    A = c1 * (
        -2.0 / 3.0 * np.einsum("...kl,...ij->...ijkl", H, dev)
        + np.einsum("ik,jl->ijkl", eye, eye)
        - 2.0 / 3.0 * np.einsum("...kl,...ij->...ijkl", F3, H)
        + (I1 / 3.0)[..., None, None, None, None] * np.einsum("...il,...kj->...ijkl", H, H)
    )
    kv = 2.0 / mat.D1
    A += (kv * (2.0 * J - 1.0) * J)[..., None, None, None, None] * np.einsum("...kl,...ij->...ijkl", H, H)
    A -= (kv * (J - 1.0) * J)[..., None, None, None, None] * np.einsum("...kj,...il->...ijkl", H, H)
    return A[..., :d, :d, :d, :d]


def cauchy_stress(mat: NeoHookean, F) -> np.ndarray:
    """Full 3x3 Cauchy stress J^-1 P F^T (out-of-plane components included)."""
    F3, _ = _promote(F)
    J, I1, H = _kinematics(F3)
    Jm = J ** (-2.0 / 3.0)
    P = 2.0 * mat.C10 * Jm[..., None, None] * (F3 - (I1 / 3.0)[..., None, None] * H)
    P += ((2.0 / mat.D1) * (J - 1.0) * J)[..., None, None] * H
    return np.einsum("...ij,...kj->...ik", P, F3) / J[..., None, None]


def von_mises(mat: NeoHookean, F) -> np.ndarray:
    s = cauchy_stress(mat, F)
    dev = s - np.trace(s, axis1=-2, axis2=-1)[..., None, None] / 3.0 * np.eye(3)
    return np.sqrt(1.5 * np.einsum("...ij,...ij->...", dev, dev))
