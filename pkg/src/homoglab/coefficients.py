"""Periodic diffusion coefficients D(y) on the unit cell.

A CoefficientField wraps a vectorized evaluator returning symmetric 2x2
matrices together with declared ellipticity constants.  The structural
hypotheses (symmetry, uniform bounds) are spot-checked on a sample grid at
construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class CoefficientField:
    """Y-periodic symmetric coefficient with ellipticity constants.

    evaluate(y) maps points y of shape (n, 2) (already in, or wrapped
    into, the unit cell) to matrices of shape (n, 2, 2).
    """

    name: str
    evaluate: Callable
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0 < self.alpha <= self.beta):
            raise ValidationError(
                f"A1 violated: need 0 < alpha <= beta, got ({self.alpha}, {self.beta})"
            )
        problems = spot_check(self)
        if problems:
            raise ValidationError(problems)

    def at_points(self, x, eps: float = 1.0) -> np.ndarray:
        """Evaluate D(x/eps) with coordinates wrapped into the unit cell."""
        y = np.mod(np.asarray(x, dtype=float) / eps, 1.0)
        return self.evaluate(y)


def spot_check(field: CoefficientField, n: int = 13) -> list:
    """Sample-grid checks of symmetry and the declared ellipticity bounds."""
    pts = np.stack(
        np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n)), axis=-1
    ).reshape(-1, 2)
    mats = field.evaluate(pts)
    out = []
    asym = np.max(np.abs(mats[:, 0, 1] - mats[:, 1, 0]))
    if asym > 1e-12:
        out.append(f"A1 violated: coefficient not symmetric (max gap {asym:g})")
    eigs = np.linalg.eigvalsh(mats)
    lo, hi = eigs.min(), eigs.max()
    if lo < field.alpha - 1e-12:
        out.append(f"A1 violated: eigenvalue {lo:g} below declared alpha {field.alpha:g}")
    if hi > field.beta + 1e-12:
        out.append(f"A1 violated: eigenvalue {hi:g} above declared beta {field.beta:g}")
    return out


def constant_coefficient(matrix, name: str = "constant") -> CoefficientField:
    mat = np.asarray(matrix, dtype=float).reshape(2, 2)
    if np.max(np.abs(mat - mat.T)) > 1e-12:
        raise ValidationError("constant coefficient must be symmetric")
    eigs = np.linalg.eigvalsh(mat)
    if eigs[0] <= 0:
        raise ValidationError("constant coefficient must be positive definite")

    def evaluate(y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(mat, y.shape[:-1] + (2, 2)).copy()

    return CoefficientField(name=name, evaluate=evaluate, alpha=float(eigs[0]), beta=float(eigs[-1]))


def isotropic_coefficient(scalar_fn, alpha, beta, name) -> CoefficientField:
    def evaluate(y):
        y = np.asarray(y, dtype=float)
        a = np.asarray(scalar_fn(y), dtype=float)
        mats = np.zeros(a.shape + (2, 2))
        mats[..., 0, 0] = a
        mats[..., 1, 1] = a
        return mats

    return CoefficientField(name=name, evaluate=evaluate, alpha=alpha, beta=beta)


def _identity():
    return constant_coefficient(np.eye(2), name="identity")


def _laminate_1_4():
    # a(y1) = 1 on the left half-cell, 4 on the right
    return isotropic_coefficient(
        lambda y: np.where(y[..., 0] < 0.5, 1.0, 4.0), alpha=1.0, beta=4.0,
        name="laminate-1-4",
    )


def _sin_product():
    return isotropic_coefficient(
        lambda y: 2.0 + np.sin(2 * np.pi * y[..., 0]) * np.sin(2 * np.pi * y[..., 1]),
        alpha=1.0, beta=3.0, name="sin-product",
    )


_REGISTRY = {
    "identity": _identity,
    "laminate-1-4": _laminate_1_4,
    "sin-product": _sin_product,
}


def make_coefficient(name: str) -> CoefficientField:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValidationError(
            f"unknown coefficient {name!r}; known: {sorted(_REGISTRY)}"
        ) from None
