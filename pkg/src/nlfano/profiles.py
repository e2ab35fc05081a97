"""Closed-form lineshapes: classic Fano profile and its field-dressed generalization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import ModelParams


class UnsupportedClosedFormError(ValueError):
    """No closed form for these parameters; use the kernel or oracle + fit path."""


@dataclass(frozen=True)
class EffectiveFano:
    """Parameters of ``C [f(eps_eff; q_eff) + D / (eps_eff**2 + 1)]``.

    ``eps_eff = (omega_L - omega_eff) / gamma_eff``; widths and centers in units of gamma.
    """

    C: float
    D: float
    q_eff: float
    gamma_eff: float
    omega_eff: float

    def __post_init__(self):
        if not self.gamma_eff > 0:
            raise ValueError(f"gamma_eff must be > 0, got {self.gamma_eff!r}")
        if self.C < 0 or self.D < 0:
            raise ValueError(f"C and D must be >= 0, got C={self.C!r}, D={self.D!r}")

    def epsilon_eff(self, omega_L):
        return (np.asarray(omega_L, dtype=float) - self.omega_eff) / self.gamma_eff

    def as_dict(self) -> dict[str, float]:
        return {
            "C": self.C,
            "D": self.D,
            "q_eff": self.q_eff,
            "gamma_eff": self.gamma_eff,
            "omega_eff": self.omega_eff,
        }


def fano(eps, q):
    """Beutler-Fano profile ``(q + eps)**2 / (eps**2 + 1)``."""
    eps = np.asarray(eps, dtype=float)
    out = (q + eps) ** 2 / (eps**2 + 1.0)
    return float(out) if out.ndim == 0 else out


def generalized_profile(ef: EffectiveFano, omega_L):
    x = ef.epsilon_eff(omega_L)
    out = ef.C * ((ef.q_eff + x) ** 2 + ef.D) / (x**2 + 1.0)
    return float(out) if out.ndim == 0 else out


def population_width(q: float, Omega: float, Gamma_c: float) -> float:
    """Effective width (units of gamma) of the continuum-population profile."""
    om2 = Omega**2
    inner = 1.0 + (q**2 + 1.0) * om2 * (om2 * ((2.0 * om2 + 4.0) / Gamma_c + 1.0) + 2.0 / Gamma_c + 2.0)
    return Gamma_c * math.sqrt(inner) / (2.0 * om2 + Gamma_c)


def effective_params_population(params: ModelParams) -> EffectiveFano:
    """Closed-form profile parameters of ``n_c`` when |e> has no own decay or dephasing."""
    if params.Gamma_e != 0 or params.gamma_eg != 0:
        raise UnsupportedClosedFormError(
            "closed-form population parameters need Gamma_e = gamma_eg = 0; "
            "fit the kernel or oracle profile instead"
        )
    if not params.Gamma_c > 0:
        raise ValueError(f"Gamma_c must be > 0 (got {params.Gamma_c!r})")
    q, om2, gc = params.q, params.Omega**2, params.Gamma_c
    width = population_width(q, params.Omega, gc)
    return EffectiveFano(
        C=2.0 * om2 / (2.0 * om2 + gc),
        D=0.0,
        q_eff=q * gc / (2.0 * om2 + gc) / width,
        gamma_eff=width,
        omega_eff=params.omega_e + q * om2 * (1.0 - 2.0 / (2.0 * om2 + gc)),
    )


class PhotocurrentShape(NamedTuple):
    gamma_eff: float
    D: float
    q_ratio: float  # q_eff / q


def photocurrent_width_and_weight(q: float, Omega: float, Gamma_e: float, gamma_eg: float) -> PhotocurrentShape:
    """Width, Lorentzian weight and asymmetry ratio of the photocurrent profile.

    Here ``Gamma_e`` is the half-rate convention: the |e> population decays
    at ``2 + 2 * Gamma_e``, so ``1 + Gamma_e`` is half its total decay rate.
    """
    om2, om4, q2, ge, g = Omega**2, Omega**4, q**2, Gamma_e, gamma_eg
    field = om4 * ge * (q2 + ge + 1.0)
    width2 = field + om2 * (1.0 + ge) * (q2 + 2.0 * ge + 1.0) * (ge + g + 1.0) + (1.0 + ge) ** 2 * (ge + g + 1.0) ** 2
    width = math.sqrt(width2) / (1.0 + ge)
    D = (field + om2 * (1.0 + ge) * (q2 + 2.0 * ge + 1.0) * (ge + g)) / ((1.0 + ge) ** 2 * width**2)
    D += (ge**3 + ge**2 + g * (2.0 * ge**2 + ge * g + q2 + 2.0 * ge + g + 1.0)) / ((1.0 + ge) * width**2)
    return PhotocurrentShape(width, D, 1.0 / width)


def effective_params_photocurrent(params: ModelParams) -> EffectiveFano:
    """Profile parameters of the photocurrent ``lim Gamma_c n_c / rho_gg``.

    Valid for any ``Gamma_e``, ``gamma_eg``. The asymmetry is ``q / gamma_eff``
    (it reduces to ``q`` in the weak-field limit).
    """
    half = 0.5 * params.Gamma_e
    width, D, ratio = photocurrent_width_and_weight(params.q, params.Omega, half, params.gamma_eg)
    return EffectiveFano(
        C=2.0 * params.Omega**2,
        D=D,
        q_eff=params.q * ratio,
        gamma_eff=width,
        omega_eff=params.omega_e + params.q * params.Omega**2 / (1.0 + half),
    )


def photocurrent(params: ModelParams, omega_L):
    """Photocurrent in units of ``|e| gamma``."""
    return generalized_profile(effective_params_photocurrent(params), omega_L)


def eit_rabi(eps: float, q: float) -> float | None:
    """Rabi frequency at which the population/photocurrent vanishes at detuning ``eps``."""
    if q == 0:
        raise ValueError("q must be nonzero for the transparency condition")
    radicand = 1.0 + eps / q
    return math.sqrt(radicand) if radicand >= 0 else None


def stark_null(Gamma_c: float) -> float | None:
    """Rabi frequency at which the resonance shift ``omega_eff - omega_e`` changes sign."""
    if not Gamma_c > 0:
        raise ValueError(f"Gamma_c must be > 0, got {Gamma_c!r}")
    if Gamma_c >= 2.0:
        return None
    return math.sqrt((2.0 - Gamma_c) / 2.0)
