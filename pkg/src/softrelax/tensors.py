"""Small-tensor arithmetic for 2x2 symmetric and deviatoric matrices.

Deviatoric tensors are stored by their two free components ``(d11, d12)``
with ``d22 = -d11`` implied, so the trace-free constraint never has to be
checked at runtime. Frobenius products therefore carry a factor 2:
``xi : eta = 2 (xi11 eta11 + xi12 eta12)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymTensor2",
    "DevTensor2",
    "Elasticity",
    "deviatoric",
    "identity",
    "apply_C",
    "quad_Q",
]


@dataclass(frozen=True)
class SymTensor2:
    m11: float
    m12: float
    m22: float

    @classmethod
    def from_matrix(cls, a) -> "SymTensor2":
        """Symmetric part of an arbitrary 2x2 matrix."""
        a = np.asarray(a, dtype=float)
        if a.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {a.shape}")
        return cls(float(a[0, 0]), 0.5 * float(a[0, 1] + a[1, 0]), float(a[1, 1]))

    @classmethod
    def zero(cls) -> "SymTensor2":
        return cls(0.0, 0.0, 0.0)

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m12, self.m22]])

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    def ddot(self, other: "SymTensor2") -> float:
        return self.m11 * other.m11 + 2.0 * self.m12 * other.m12 + self.m22 * other.m22

    def norm(self) -> float:
        return math.sqrt(self.ddot(self))

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.m11 + other.m11, self.m12 + other.m12, self.m22 + other.m22)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.m11 - other.m11, self.m12 - other.m12, self.m22 - other.m22)

    def __mul__(self, c: float) -> "SymTensor2":
        return SymTensor2(c * self.m11, c * self.m12, c * self.m22)

    __rmul__ = __mul__

    def __neg__(self) -> "SymTensor2":
        return SymTensor2(-self.m11, -self.m12, -self.m22)


@dataclass(frozen=True)
class DevTensor2:
    d11: float
    d12: float

    @classmethod
    def zero(cls) -> "DevTensor2":
        return cls(0.0, 0.0)

    @classmethod
    def from_array(cls, c) -> "DevTensor2":
        return cls(float(c[0]), float(c[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.d11, self.d12])

    def as_sym(self) -> SymTensor2:
        return SymTensor2(self.d11, self.d12, -self.d11)

    def as_matrix(self) -> np.ndarray:
        return self.as_sym().as_matrix()

    def ddot(self, other: "DevTensor2") -> float:
        return 2.0 * (self.d11 * other.d11 + self.d12 * other.d12)

    def norm(self) -> float:
        return math.sqrt(2.0 * (self.d11 * self.d11 + self.d12 * self.d12))

    def __add__(self, other: "DevTensor2") -> "DevTensor2":
        return DevTensor2(self.d11 + other.d11, self.d12 + other.d12)

    def __sub__(self, other: "DevTensor2") -> "DevTensor2":
        return DevTensor2(self.d11 - other.d11, self.d12 - other.d12)

    def __mul__(self, c: float) -> "DevTensor2":
        return DevTensor2(c * self.d11, c * self.d12)

    __rmul__ = __mul__

    def __neg__(self) -> "DevTensor2":
        return DevTensor2(-self.d11, -self.d12)


def identity() -> SymTensor2:
    return SymTensor2(1.0, 0.0, 1.0)


def deviatoric(m: SymTensor2) -> DevTensor2:
    return DevTensor2(0.5 * (m.m11 - m.m22), m.m12)


@dataclass(frozen=True)
class Elasticity:
    """Isotropic plane elasticity with shear modulus ``mu`` and compression modulus ``kappa``."""

    mu: float
    kappa: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"shear modulus mu must be positive, got {self.mu}")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError(f"compression modulus kappa must be positive, got {self.kappa}")

    @property
    def alpha_C(self) -> float:
        # lower constant in alpha |e|^2 <= Q(e)
        return min(2 * self.mu, 2 * self.kappa) / 2

    @property
    def beta_C(self) -> float:
        return max(2 * self.mu, 2 * self.kappa) / 2


def apply_C(el: Elasticity, e: SymTensor2) -> SymTensor2:
    """Stress ``2 mu dev(e) + kappa tr(e) I``."""
    return 2.0 * el.mu * deviatoric(e).as_sym() + (el.kappa * e.trace) * identity()


def quad_Q(el: Elasticity, e: SymTensor2) -> float:
    """Elastic energy density ``mu |dev e|^2 + kappa/2 (tr e)^2``."""
    d = deviatoric(e)
    return el.mu * d.ddot(d) + 0.5 * el.kappa * e.trace**2
