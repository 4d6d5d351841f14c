"""Problem definition for u_tt - u_xx = |u_x|^p / <x>^a with data (eps f, eps g).

Initial data are polynomial bumps (1 - (x/R)^2)^3 on |x| <= R, which are C^2
with compact support and have closed-form antiderivatives.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PRESETS = ("bump_f", "bump_g", "bump_both", "thm2", "zero")

# exp overflows float64 just above this
_EXP_LIMIT = 709.0


def bracket(x):
    """Japanese bracket <x> = sqrt(1 + x^2)."""
    return np.sqrt(1.0 + np.square(x))


def weight(x, a):
    """Spatial weight <x>^{-a} of the nonlinearity."""
    if a == 0:
        return np.ones_like(np.asarray(x, dtype=float))
    return (1.0 + np.square(x)) ** (-0.5 * a)


def hyperbolic_pair(x):
    """Return (phi, psi) = (e^x + e^-x, -e^x + e^-x)."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > _EXP_LIMIT):
        raise OverflowError("hyperbolic_pair: |x| beyond floating range")
    ep, em = np.exp(x), np.exp(-x)
    return ep + em, em - ep


# -- bump polynomial b(xi) = (1 - xi^2)^3 on |xi| <= 1 ----------------------

def _bump(x, R, amp):
    xi = np.asarray(x, dtype=float) / R
    inside = np.abs(xi) <= 1.0
    return np.where(inside, amp * (1.0 - xi * xi) ** 3, 0.0)


def _bump_d1(x, R, amp):
    xi = np.asarray(x, dtype=float) / R
    inside = np.abs(xi) <= 1.0
    return np.where(inside, -6.0 * amp * xi * (1.0 - xi * xi) ** 2 / R, 0.0)


def _bump_d2(x, R, amp):
    xi = np.asarray(x, dtype=float) / R
    inside = np.abs(xi) <= 1.0
    q = 1.0 - xi * xi
    return np.where(inside, amp * (-6.0 * q * q + 24.0 * xi * xi * q) / R**2, 0.0)


def _bump_antideriv(x, R, amp):
    # int_{-R}^{x} b; total mass is 32 R / 35
    xi = np.clip(np.asarray(x, dtype=float) / R, -1.0, 1.0)
    prim = xi - xi**3 + 0.6 * xi**5 - xi**7 / 7.0
    return amp * R * (prim + 16.0 / 35.0)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class InitialData:
    """Initial displacement f and velocity g with their derivatives.

    All callables accept scalars or arrays. ``g_int`` is the antiderivative
    of g normalised to vanish at -infinity.
    """

    name: str
    R: float
    f: Callable
    fp: Callable
    fpp: Callable
    g: Callable
    gp: Callable
    g_int: Callable
    amp: tuple = (1.0, 1.0)

    def table(self, x):
        """Sample (f, f', f'', g, g') on the nodes ``x``."""
        x = np.asarray(x, dtype=float)
        return self.f(x), self.fp(x), self.fpp(x), self.g(x), self.gp(x)

    @property
    def is_zero(self):
        return self.name == "zero"


def _bump_callables(R, amp):
    if amp == 0.0:
        return _zero, _zero, _zero, _zero
    return (lambda x: _bump(x, R, amp), lambda x: _bump_d1(x, R, amp),
            lambda x: _bump_d2(x, R, amp), lambda x: _bump_antideriv(x, R, amp))


def thm2_integrals(data: InitialData, n=10_000):
    """Trapezoid values of int psi f' and int psi (g' - f') over [-R, R]."""
    x = np.linspace(-data.R, data.R, n)
    _, psi = hyperbolic_pair(x)
    i1 = np.trapezoid(psi * data.fp(x), x)
    i2 = np.trapezoid(psi * (data.gp(x) - data.fp(x)), x)
    return float(i1), float(i2)


def preset_data(name: str, R: float = 1.0, amp=(1.0, 1.0)) -> InitialData:
    """Build one of the named initial-data presets.

    ``amp`` is (A_f, A_g). ``thm2`` takes f = 0 and g = A_g bump, and is
    rejected unless quadrature confirms int psi f' >= 0 and
    int psi (g' - f') > 0.
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")
    if R < 1:
        raise ValueError("support radius R must be >= 1")
    a_f, a_g = (float(amp[0]), float(amp[1]))
    if name == "zero":
        a_f = a_g = 0.0
    elif name == "bump_f":
        a_g = 0.0
    elif name in ("bump_g", "thm2"):
        a_f = 0.0
    f, fp, fpp, _ = _bump_callables(R, a_f)
    g, gp, _, g_int = _bump_callables(R, a_g)
    data = InitialData(name, float(R), f, fp, fpp, g, gp, g_int, (a_f, a_g))
    if name == "thm2":
        i1, i2 = thm2_integrals(data)
        if not (i1 >= 0.0 and i2 > 0.0):
            raise ValueError(f"thm2 data fails the sign check: {i1=}, {i2=}")
    return data


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the Cauchy problem."""

    p: float
    a: float
    eps: float
    R: float = 1.0
    preset: str = "bump_both"
    preset_params: tuple = (1.0, 1.0)
    data: InitialData = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.R < 1:
            raise ValueError("R must be >= 1")
        object.__setattr__(self, "preset_params", tuple(float(v) for v in self.preset_params))
        object.__setattr__(self, "data", preset_data(self.preset, self.R, self.preset_params))

    def with_eps(self, eps):
        return dataclasses.replace(self, eps=eps)

    def as_dict(self):
        return {"p": self.p, "a": self.a, "eps": self.eps, "R": self.R,
                "preset": self.preset, "preset_params": list(self.preset_params)}


@dataclass(frozen=True)
class LightCone:
    R: float

    def contains(self, x, t):
        return np.abs(x) <= t + self.R


def free_solution(data: InitialData, eps, x, t):
    """d'Alembert solution scaled by eps: (u0, u0_x, u0_t, u0_xx)."""
    x = np.asarray(x, dtype=float)
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    xp, xm = x + t, x - t
    u = 0.5 * (data.f(xp) + data.f(xm)) + 0.5 * (data.g_int(xp) - data.g_int(xm))
    ux = 0.5 * (data.fp(xp) + data.fp(xm) + data.g(xp) - data.g(xm))
    ut = 0.5 * (data.fp(xp) - data.fp(xm) + data.g(xp) + data.g(xm))
    uxx = 0.5 * (data.fpp(xp) + data.fpp(xm) + data.gp(xp) - data.gp(xm))
    return eps * u, eps * ux, eps * ut, eps * uxx
