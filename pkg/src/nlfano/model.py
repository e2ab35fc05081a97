"""Model parameters for the driven, dissipative Fano system.

Physical inputs are reduced to dimensionless form using the resonance width
``gamma = n * pi * V**2 / hbar`` as the unit of rate and energy. Everything
downstream of this module works with :class:`ModelParams` only.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path


class ParameterError(ValueError):
    """Raised when parameters are rejected (bad physical input, bad config)."""


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional parameters of the three-part model (ground, discrete, continuum).

    Attributes:
        mu_e: ground-discrete transition dipole.
        mu_c: ground-continuum transition dipole per sqrt(energy).
        V: discrete-continuum coupling (energy per sqrt(energy)), real.
        n: continuum density of states (1/energy).
        F: field amplitude.
        E_0, E_e: ground and discrete-state energies.
        Gamma_e_phys, Gamma_c_phys: population relaxation rates of |e> and |k>.
        gamma_eg_phys, gamma_kg_phys, gamma_ke_phys: pure dephasing rates.
        hbar: action constant.
    """

    mu_e: float
    mu_c: float
    V: float
    n: float
    F: float
    E_e: float
    Gamma_c_phys: float
    E_0: float = 0.0
    Gamma_e_phys: float = 0.0
    gamma_eg_phys: float = 0.0
    gamma_kg_phys: float = 0.0
    gamma_ke_phys: float = 0.0
    hbar: float = 1.0


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless parameters, rates and energies in units of gamma.

    ``Gamma_e`` and ``Gamma_c`` are population decay rates (|e> -> |g> and
    |k> -> |g>); ``gamma_eg`` dephases the g-e coherence. ``gamma_kg`` and
    ``gamma_ke`` only enter the discretized-continuum solver.
    """

    q: float
    Omega: float
    Gamma_c: float = 1.0
    Gamma_e: float = 0.0
    gamma_eg: float = 0.0
    omega_e: float = 0.0
    gamma_kg: float = 0.0
    gamma_ke: float = 0.0

    def replace(self, **changes: float) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ModelParams))


def dimensionless_from_physical(p: PhysicalParams) -> ModelParams:
    """Reduce physical parameters to :class:`ModelParams`.

    The sign of ``Omega`` is a gauge choice (flipping |g> flips both field
    couplings), so its magnitude is returned.
    """
    if not p.n > 0:
        raise ParameterError(f"n (density of states) must be > 0, got {p.n!r}")
    if p.V == 0:
        raise ParameterError("V (discrete-continuum coupling) must be nonzero")
    if p.mu_c == 0:
        raise ParameterError(
            "mu_c must be nonzero; take the limit q -> inf, Omega -> 0 with q*Omega fixed instead"
        )
    if not p.hbar > 0:
        raise ParameterError(f"hbar must be > 0, got {p.hbar!r}")
    for name in ("F", "Gamma_c_phys", "Gamma_e_phys", "gamma_eg_phys", "gamma_kg_phys", "gamma_ke_phys"):
        if getattr(p, name) < 0:
            raise ParameterError(f"{name} must be >= 0, got {getattr(p, name)!r}")

    gamma = p.n * math.pi * p.V**2 / p.hbar
    q = p.mu_e / (p.n * math.pi * p.V * p.mu_c)
    omega = abs(p.mu_c * p.F / (2.0 * p.V))
    return ModelParams(
        q=q,
        Omega=omega,
        Gamma_c=p.Gamma_c_phys / gamma,
        Gamma_e=p.Gamma_e_phys / gamma,
        gamma_eg=p.gamma_eg_phys / gamma,
        omega_e=(p.E_e - p.E_0) / (p.hbar * gamma),
        gamma_kg=p.gamma_kg_phys / gamma,
        gamma_ke=p.gamma_ke_phys / gamma,
    )


def epsilon_of(params: ModelParams, omega_L):
    """Reduced detuning ``omega_L - omega_e`` (both already in units of gamma)."""
    return omega_L - params.omega_e


def validate(params: ModelParams) -> list[str]:
    """Return every violated invariant as a readable message; empty when valid."""
    problems = []
    for name in FIELD_NAMES:
        value = getattr(params, name)
        if not math.isfinite(value):
            problems.append(f"{name} must be finite (got {value!r})")
    if params.Omega < 0:
        problems.append(f"Omega must be ≥ 0 (got {params.Omega!r})")
    if not params.Gamma_c > 0:
        problems.append(f"Gamma_c must be > 0 (got {params.Gamma_c!r})")
    for name in ("Gamma_e", "gamma_eg", "gamma_kg", "gamma_ke"):
        if getattr(params, name) < 0:
            problems.append(f"{name} must be ≥ 0 (got {getattr(params, name)!r})")
    return problems


def check(params: ModelParams) -> ModelParams:
    problems = validate(params)
    if problems:
        raise ParameterError("; ".join(problems))
    return params


def params_from_mapping(data: dict) -> ModelParams:
    """Build :class:`ModelParams` from a key/value mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ParameterError("model parameters must be a JSON object")
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ParameterError(f"unknown parameter(s): {', '.join(unknown)}")
    missing = [name for name in ("q", "Omega") if name not in data]
    if missing:
        raise ParameterError(f"missing required parameter(s): {', '.join(missing)}")
    values = {}
    for key, value in data.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParameterError(f"parameter {key} must be a number, got {value!r}")
        values[key] = float(value)
    return ModelParams(**values)


def load_params(path: str | Path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: invalid JSON ({exc})") from exc
    return params_from_mapping(data)
