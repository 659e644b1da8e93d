"""Benchmark obstacle problems.

Each problem bundles the load, the obstacle (with its almost-everywhere
gradient), regularity flags used for configuration validation, and, when
known, the exact displacement, its gradient (which is also the exact
flux) and the exact multiplier.

All callables are vectorized over NumPy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class ObstacleTraits:
    continuous: bool
    vanishes_on_boundary: bool


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    domain: str
    diameter: float
    f: Callable
    g: Callable
    grad_g: Callable
    traits: ObstacleTraits
    exact_u: Optional[Callable] = None
    exact_grad_u: Optional[Callable] = None   # equals the exact flux
    exact_lambda: Optional[Callable] = None

    @property
    def has_exact(self) -> bool:
        return self.exact_u is not None


# -- smooth solution on the unit square ------------------------------------

def _bump(x, y):
    return (1.0 - x) * x * (1.0 - y) * y


def _bump_grad(x, y):
    return (1.0 - 2.0 * x) * (1.0 - y) * y, (1.0 - x) * x * (1.0 - 2.0 * y)


def _neg_laplace_bump(x, y):
    return 2.0 * ((1.0 - x) * x + (1.0 - y) * y)


def _blend(x):
    """Cubic on [1/2, 3/4] matching value 1/4 and slope 0 at 1/2 and
    value/slope 0 at 3/4."""
    t = 4.0 * x - 2.0
    return 0.25 * (2.0 * t**3 - 3.0 * t**2 + 1.0)


def _blend_prime(x):
    t = 4.0 * x - 2.0
    return 6.0 * t * (t - 1.0)


def example_smooth() -> ProblemSpec:
    """Known smooth solution; load vanishes left of x = 1/2 where the
    membrane sits on the obstacle."""

    def f(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return np.where(x < 0.5, 0.0, _neg_laplace_bump(x, y))

    def lam(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return np.where(x < 0.5, _neg_laplace_bump(x, y), 0.0)

    def g(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        mid = _blend(np.clip(x, 0.5, 0.75)) * (1.0 - y) * y
        out = np.where(x <= 0.5, _bump(x, y), np.where(x < 0.75, mid, 0.0))
        return out

    def grad_g(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        bx, by = _bump_grad(x, y)
        xc = np.clip(x, 0.5, 0.75)
        mx = _blend_prime(xc) * (1.0 - y) * y
        my = _blend(xc) * (1.0 - 2.0 * y)
        gx = np.where(x <= 0.5, bx, np.where(x < 0.75, mx, 0.0))
        gy = np.where(x <= 0.5, by, np.where(x < 0.75, my, 0.0))
        return gx, gy

    return ProblemSpec(
        name="smooth",
        domain="unit_square",
        diameter=float(np.sqrt(2.0)),
        f=f, g=g, grad_g=grad_g,
        traits=ObstacleTraits(continuous=True, vanishes_on_boundary=True),
        exact_u=_bump,
        exact_grad_u=_bump_grad,
        exact_lambda=lam,
    )


# -- manufactured singular solution on the large L-shaped domain -----------

_QUINTIC = np.array([-6.0, 15.0, -10.0, 0.0, 0.0, 1.0])
_QUINTIC_D1 = np.polyder(_QUINTIC)
_QUINTIC_D2 = np.polyder(_QUINTIC, 2)


def _angle(x, y):
    """Angle in [0, 3*pi/2], zero on the positive x-axis, increasing
    through the fourth, third and second quadrants."""
    phi = np.arctan2(y, x)
    phi = np.where(phi < 0.5 * np.pi - 1e-14, phi + 2.0 * np.pi, phi)
    return 2.0 * np.pi - phi


def _cutoff(r):
    """C^2 cutoff: 1 below r = 1/4, quintic blend, 0 above r = 3/4.

    Returns (gamma, gamma', gamma'')."""
    r = np.asarray(r, float)
    t = 2.0 * (r - 0.25)
    blend = (t >= 0.0) & (t < 1.0)
    tb = np.where(blend, t, 0.0)
    gamma = np.where(t < 0.0, 1.0, np.where(blend, np.polyval(_QUINTIC, tb), 0.0))
    d1 = np.where(blend, 2.0 * np.polyval(_QUINTIC_D1, tb), 0.0)
    d2 = np.where(blend, 4.0 * np.polyval(_QUINTIC_D2, tb), 0.0)
    return gamma, d1, d2


def example_lshape() -> ProblemSpec:
    """Zero obstacle, manufactured displacement with the generic corner
    singularity and a compactly supported cutoff; the multiplier is the
    indicator of r > 5/4."""

    def exact_u(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        r = np.hypot(x, y)
        gamma, _, _ = _cutoff(r)
        return np.cbrt(r)**2 * np.sin(2.0 * _angle(x, y) / 3.0) * gamma

    def exact_grad_u(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        r = np.hypot(x, y)
        theta = _angle(x, y)
        gamma, d1, _ = _cutoff(r)
        safe = np.where(r > 0.0, r, 1.0)
        s = np.sin(2.0 * theta / 3.0)
        c = np.cos(2.0 * theta / 3.0)
        rp = np.cbrt(safe)
        w = rp**2 * gamma
        wp = (2.0 / 3.0) / rp * gamma + rp**2 * d1
        # grad theta = (y, -x) / r^2 with the clockwise angle convention
        gx = s * wp * (x / safe) + w * (2.0 / 3.0) * c * (y / safe**2)
        gy = s * wp * (y / safe) + w * (2.0 / 3.0) * c * (-x / safe**2)
        zero = r == 0.0
        return np.where(zero, 0.0, gx), np.where(zero, 0.0, gy)

    def exact_lambda(x, y):
        r = np.hypot(np.asarray(x, float), np.asarray(y, float))
        return np.where(r > 1.25, 1.0, 0.0)

    def f(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        r = np.hypot(x, y)
        theta = _angle(x, y)
        gamma, d1, d2 = _cutoff(r)
        safe = np.where(r > 0.0, r, 1.0)
        s = np.sin(2.0 * theta / 3.0)
        rp = np.cbrt(safe)
        smooth = -(rp**2) * s * (d1 / safe + d2) - (4.0 / 3.0) / rp * d1 * s
        return np.where(r == 0.0, 0.0, smooth) - np.where(r > 1.25, 1.0, 0.0)

    def g(x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def grad_g(x, y):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy()

    return ProblemSpec(
        name="lshape",
        domain="lshape_bartels",
        diameter=float(4.0 * np.sqrt(2.0)),
        f=f, g=g, grad_g=grad_g,
        traits=ObstacleTraits(continuous=True, vanishes_on_boundary=True),
        exact_u=exact_u,
        exact_grad_u=exact_grad_u,
        exact_lambda=exact_lambda,
    )


# -- pyramid obstacle on the small L-shaped domain --------------------------

def example_pyramid() -> ProblemSpec:
    """Constant load, pyramid obstacle over the unit square, unknown
    solution.

    The obstacle is the distance to the boundary of the unit square,
    lowered by 1/4 and cut at zero; outside the square the signed
    distance is negative, so the obstacle vanishes there.
    """

    def _dist(x, y):
        return np.minimum(np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y))

    def g(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return np.maximum(_dist(x, y) - 0.25, 0.0)

    def grad_g(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        d = _dist(x, y)
        branches = np.stack([x, 1.0 - x, y, 1.0 - y])
        # fixed branch order resolves the measure-zero ridge set
        active = np.argmin(branches, axis=0)
        direction = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        on = d > 0.25
        gx = np.where(on, direction[active, 0], 0.0)
        gy = np.where(on, direction[active, 1], 0.0)
        return gx, gy

    return ProblemSpec(
        name="pyramid",
        domain="lshape_small",
        diameter=float(2.0 * np.sqrt(2.0)),
        f=lambda x, y: np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape),
        g=g, grad_g=grad_g,
        traits=ObstacleTraits(continuous=True, vanishes_on_boundary=True),
    )


_REGISTRY = {
    "smooth": example_smooth,
    "lshape": example_lshape,
    "pyramid": example_pyramid,
}


def get_problem(name: str) -> ProblemSpec:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown example {name!r}; "
                         f"choose from {sorted(_REGISTRY)}") from None


def problem_names() -> list[str]:
    return sorted(_REGISTRY)
