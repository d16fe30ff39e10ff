"""Scalar monotone nonlinearities for the volume and interface terms.

Each entry provides the function, its derivative (for Newton), and its
antiderivative vanishing at 0 (for the energy line search).  Functions are
picked from a named registry so configurations stay reproducible and the
structural hypotheses can actually be checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError

#: Cap applied to one-sided derivatives at kinks (e.g. |z|^{p-1} at 0 for
#: p < 1); the damped Newton iteration tolerates the resulting inexactness.
DERIVATIVE_CAP = 1e8


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    value: Callable
    derivative: Callable
    antiderivative: Callable
    growth_exponent: float
    params: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.value(np.asarray(z, dtype=float))


def _identity():
    return Nonlinearity(
        name="identity",
        value=lambda z: z,
        derivative=lambda z: np.ones_like(z),
        antiderivative=lambda z: 0.5 * z * z,
        growth_exponent=1.0,
    )


def _arctan():
    return Nonlinearity(
        name="arctan",
        value=np.arctan,
        derivative=lambda z: 1.0 / (1.0 + z * z),
        antiderivative=lambda z: z * np.arctan(z) - 0.5 * np.log1p(z * z),
        growth_exponent=1.0,
    )


def _arctan_shifted():
    return Nonlinearity(
        name="arctan-shifted",
        value=lambda z: z + np.arctan(z),
        derivative=lambda z: 1.0 + 1.0 / (1.0 + z * z),
        antiderivative=lambda z: 0.5 * z * z + z * np.arctan(z) - 0.5 * np.log1p(z * z),
        growth_exponent=1.0,
    )


def _saturating():
    # z + z/(1+|z|): increasing, and z*h(z) >= z^2
    return Nonlinearity(
        name="saturating",
        value=lambda z: z + z / (1.0 + np.abs(z)),
        derivative=lambda z: 1.0 + 1.0 / (1.0 + np.abs(z)) ** 2,
        antiderivative=lambda z: 0.5 * z * z + np.abs(z) - np.log1p(np.abs(z)),
        growth_exponent=1.0,
    )


def _power(p: float):
    if not p > 0:
        raise ValidationError(f"power nonlinearity needs p > 0, got {p}")

    def value(z):
        return np.sign(z) * np.abs(z) ** p

    def derivative(z):
        az = np.abs(z)
        with np.errstate(divide="ignore"):
            d = np.where(az > 0, p * az ** (p - 1.0), p if p >= 1 else np.inf)
        return np.minimum(d, DERIVATIVE_CAP)

    return Nonlinearity(
        name="power",
        value=value,
        derivative=derivative,
        antiderivative=lambda z: np.abs(z) ** (p + 1.0) / (p + 1.0),
        growth_exponent=max(p, 1.0),
        params={"p": p},
    )


_REGISTRY = {
    "identity": _identity,
    "arctan": _arctan,
    "arctan-shifted": _arctan_shifted,
    "saturating": _saturating,
    "power": _power,
}


def make_nonlinearity(name: str, **params) -> Nonlinearity:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValidationError(
            f"unknown nonlinearity {name!r}; known: {sorted(_REGISTRY)}"
        ) from None
    return factory(**params)


# ---------------------------------------------------------------------------
# structural hypothesis checks (sampled)
# ---------------------------------------------------------------------------

def _sample_grid():
    coarse = np.linspace(-50.0, 50.0, 201)
    fine = np.linspace(-1.0, 1.0, 81)
    return np.unique(np.concatenate([coarse, fine]))


def check_lower_order(h1: Nonlinearity) -> list:
    """Sampled checks of the volume-term hypotheses; returns violations."""
    z = _sample_grid()
    v = h1.value(z)
    out = []
    if abs(float(h1.value(np.array(0.0)))) > 0.0:
        out.append("A2.2 violated: h1(0) != 0")
    dv = np.diff(v)
    if np.any(dv < -1e-12):
        bad = z[1:][dv < -1e-12][0]
        out.append(f"A2.2 violated: h1 not increasing near z = {bad:g}")
    return out


def check_flux(h2: Nonlinearity) -> list:
    """Sampled checks of the interface-term hypotheses; returns violations."""
    z = _sample_grid()
    v = h2.value(z)
    out = []
    dv = np.diff(v)
    if np.any(dv < -1e-12):
        bad = z[1:][dv < -1e-12][0]
        out.append(f"A3.2 violated: h2 not increasing near z = {bad:g}")
    nz = z[np.abs(z) > 1e-12]
    ratio = nz * h2.value(nz) / nz**2
    if np.min(ratio) <= 0:
        bad = nz[np.argmin(ratio)]
        out.append(f"A3.3 violated: z*h2(z) >= C*z^2 fails at z = {bad:g}")
    return out


def growth_warnings(h1: Nonlinearity, h2: Nonlinearity) -> list:
    """Growth-exponent admissibility for dimension 2: q1 < 2 and q2 < 2.

    These guarantee well-posedness of the continuous problem, not
    computability, so they warn rather than abort.
    """
    out = []
    if not h1.growth_exponent < 2:
        out.append(
            f"growth warning: q1 = {h1.growth_exponent:g} outside [1, 2) "
            "required in dimension 2"
        )
    if not h2.growth_exponent < 2:
        out.append(
            f"growth warning: q2 = {h2.growth_exponent:g} outside [1, 2) "
            "required in dimension 2"
        )
    return out


def empirical_flux_constant(h2: Nonlinearity) -> float:
    """Measured constant C with z*h2(z) >= C*z^2 on the sample grid."""
    z = _sample_grid()
    nz = z[np.abs(z) > 1e-12]
    return float(np.min(nz * h2.value(nz) / nz**2))


@dataclass(frozen=True)
class NonlinearityPair:
    """Validated (volume, interface) nonlinearity pair."""

    h1: Nonlinearity
    h2: Nonlinearity

    def __post_init__(self):
        problems = check_lower_order(self.h1) + check_flux(self.h2)
        if problems:
            raise ValidationError(problems)

    @property
    def warnings(self) -> list:
        return growth_warnings(self.h1, self.h2)


def make_pair(h1_name: str, h2_name: str, h1_params=None, h2_params=None) -> NonlinearityPair:
    return NonlinearityPair(
        h1=make_nonlinearity(h1_name, **(h1_params or {})),
        h2=make_nonlinearity(h2_name, **(h2_params or {})),
    )
