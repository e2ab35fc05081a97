"""Four-component effective generator on the discrete states.

With the continuum eliminated in the wide-band limit, the discrete block
``v = (rho_gg, rho_ge, rho_eg, rho_ee)`` obeys ``dv/dt = L_eff v``. The
continuum population then follows from the rate at which the block feeds the
continuum, divided by the continuum decay rate.

Rotating frame: |g> at 0, |e> at ``-epsilon``. All quantities are in units of
gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DegenerateSteadyStateError, hermitian_eigenvalues, nullspace
from .model import ModelParams, ParameterError, check, epsilon_of

GG, GE, EG, EE = range(4)


class ReadoutError(RuntimeError):
    """Continuum readout came out negative (inconsistent block)."""


@dataclass(frozen=True)
class DiscreteBlock:
    rho_gg: float
    rho_ee: float
    rho_ge: complex

    @property
    def rho_eg(self) -> complex:
        return self.rho_ge.conjugate()

    @property
    def trace(self) -> float:
        return self.rho_gg + self.rho_ee

    def as_matrix(self) -> np.ndarray:
        """2x2 density matrix in the (g, e) basis."""
        return np.array([[self.rho_gg, self.rho_ge], [self.rho_eg, self.rho_ee]], dtype=complex)

    def as_vector(self) -> np.ndarray:
        return np.array([self.rho_gg, self.rho_ge, self.rho_eg, self.rho_ee], dtype=complex)

    def scaled(self, factor: float) -> "DiscreteBlock":
        return DiscreteBlock(self.rho_gg * factor, self.rho_ee * factor, self.rho_ge * factor)

    @classmethod
    def from_vector(cls, v) -> "DiscreteBlock":
        """Hermitian block from a (gg, ge, eg, ee) vector; ge/eg are averaged."""
        v = np.asarray(v, dtype=complex)
        return cls(
            rho_gg=float(v[GG].real),
            rho_ee=float(v[EE].real),
            rho_ge=complex(0.5 * (v[GE] + np.conj(v[EG]))),
        )


@dataclass(frozen=True)
class SteadyState:
    block: DiscreteBlock
    n_c: float

    @property
    def trace(self) -> float:
        return self.block.trace + self.n_c


@dataclass(frozen=True)
class LindbladCheck:
    c1: float
    c2: float
    c3: float
    c_matrix: np.ndarray
    eigenvalues: np.ndarray
    is_psd: bool
    # Closed-form pair (c_minus, c_plus) belonging to the coefficient matrix;
    # complex where that expression has a negative radicand.
    closed_pair: tuple[complex, complex]


def build_effective_liouvillian(params: ModelParams, eps: float) -> np.ndarray:
    """4x4 generator for ``(rho_gg, rho_ge, rho_eg, rho_ee)``.

    Hamiltonian part from ``H_eff = -eps |e><e| + (q - i) Omega (|g><e| + |e><g|)``,
    decay e -> g at ``2 + Gamma_e``, extra dephasing of the coherence at
    ``gamma_eg + Omega**2`` and the non-Lindblad feed
    ``2 Omega (rho_eg + rho_ge)`` into ``rho_gg`` (population returned from
    the continuum). The (gg) and (ee) rows sum to zero, so the discrete trace
    is conserved.
    """
    q, om = params.q, params.Omega
    decay = 2.0 + params.Gamma_e
    coh = 0.5 * decay + params.gamma_eg + om**2

    L = np.zeros((4, 4), dtype=complex)
    L[GG, GE] = 1j * q * om + om
    L[GG, EG] = -1j * q * om + om
    L[GG, EE] = decay
    L[EE] = -L[GG]
    L[GE, GG] = 1j * (q + 1j) * om
    L[GE, GE] = -1j * eps - coh
    L[GE, EE] = -1j * (q - 1j) * om
    L[EG, GG] = np.conj(L[GE, GG])
    L[EG, EG] = np.conj(L[GE, GE])
    L[EG, EE] = np.conj(L[GE, EE])
    return L


def discrete_steady_state(L_eff, tol: float = 1e-10) -> DiscreteBlock:
    """Kernel of ``L_eff`` normalized to unit discrete trace."""
    result = nullspace(L_eff, tol=tol)
    if result.dimension != 1:
        raise DegenerateSteadyStateError(
            f"effective generator has a {result.dimension}-dimensional kernel"
        )
    v = result.basis[0]
    tr = v[GG] + v[EE]
    if abs(tr) < 1e-14:
        raise DegenerateSteadyStateError("kernel vector has zero discrete trace")
    return DiscreteBlock.from_vector(v / tr)


def continuum_feed(params: ModelParams, block: DiscreteBlock) -> float:
    """Rate of population transfer from the discrete block into the continuum.

    ``2 <w|rho|w>`` with ``w = |e> + Omega |g>``: decay of |e> at 2, direct
    photo-excitation of |g> at ``2 Omega**2`` and their interference.
    """
    om = params.Omega
    return 2.0 * block.rho_ee + 2.0 * om**2 * block.rho_gg + 4.0 * om * block.rho_eg.real


def continuum_readout(params: ModelParams, block: DiscreteBlock) -> float:
    """Unnormalized continuum population for a unit-trace discrete block."""
    if not params.Gamma_c > 0:
        raise ParameterError(f"Gamma_c must be > 0 (got {params.Gamma_c!r})")
    feed = continuum_feed(params, block)
    scale = 2.0 * (1.0 + params.Omega**2)
    if feed < -1e-12 * scale:
        raise ReadoutError(f"negative continuum feed {feed:.3e}")
    return max(feed, 0.0) / params.Gamma_c


def normalize(params: ModelParams, block: DiscreteBlock, n_c_unnormalized: float) -> SteadyState:
    """Rescale so that ``rho_gg + rho_ee + n_c = 1``."""
    s = 1.0 / (1.0 + n_c_unnormalized)
    return SteadyState(block=block.scaled(s), n_c=n_c_unnormalized * s)


def steady_state(params: ModelParams, omega_L: float) -> SteadyState:
    check(params)
    block = discrete_steady_state(build_effective_liouvillian(params, epsilon_of(params, omega_L)))
    return normalize(params, block, continuum_readout(params, block))


def population(params: ModelParams, omega_L) -> np.ndarray | float:
    """Continuum population ``n_c`` at one or many laser frequencies."""
    if np.ndim(omega_L) == 0:
        return steady_state(params, float(omega_L)).n_c
    return np.array([steady_state(params, float(w)).n_c for w in np.ravel(omega_L)])


def photocurrent_from_kernel(params: ModelParams, omega_L) -> np.ndarray | float:
    """Photocurrent ``Gamma_c n_c / rho_gg`` (units of |e| gamma) from the kernel.

    The discrete block does not depend on ``Gamma_c``, so the ratio equals its
    ``Gamma_c -> 0`` limit for any ``Gamma_c``.
    """

    def one(w: float) -> float:
        block = discrete_steady_state(build_effective_liouvillian(params, epsilon_of(params, w)))
        if block.rho_gg <= 0:
            raise DegenerateSteadyStateError("ground population vanishes; photocurrent undefined")
        return continuum_feed(params, block) / block.rho_gg

    if np.ndim(omega_L) == 0:
        return one(float(omega_L))
    return np.array([one(float(w)) for w in np.ravel(omega_L)])


# Normalized Pauli basis (g, e ordering) used for the dissipator coefficients.
_S = 1.0 / np.sqrt(2.0)
PAULI_BASIS = (
    _S * np.array([[0, 1], [1, 0]], dtype=complex),
    _S * np.array([[0, 1j], [-1j, 0]], dtype=complex),
    _S * np.array([[1, 0], [0, -1]], dtype=complex),
)


def lindblad_coefficients(params: ModelParams) -> tuple[float, float, float]:
    """``(c1, c2, c3) = (Omega**2 + gamma_eg, Omega, 1 + Gamma_e)``.

    In this matrix ``Gamma_e`` counts half the extra decay rate of |e>.
    With ``Gamma_e`` read as a population rate (as in
    :func:`build_effective_liouvillian`), the generator corresponds to
    ``c3 = 1 + Gamma_e / 2``; see :func:`generator_from_lindblad_form`.
    """
    return params.Omega**2 + params.gamma_eg, params.Omega, 1.0 + params.Gamma_e


def coefficient_matrix(c1: float, c2: float, c3: float) -> np.ndarray:
    return np.array(
        [
            [c3, 1j * c3, c2],
            [-1j * c3, c3, -1j * c2],
            [c2, 1j * c2, c1],
        ],
        dtype=complex,
    )


def lindblad_check(params: ModelParams, tol: float = 1e-12) -> LindbladCheck:
    c1, c2, c3 = lindblad_coefficients(params)
    c = coefficient_matrix(c1, c2, c3)
    ev = hermitian_eigenvalues(c)
    om2, ge, g = params.Omega**2, params.Gamma_e, params.gamma_eg
    root = np.sqrt(complex((om2 - 2 * ge + g - 2) ** 2 - 8 * om2))
    base = om2 + 2 * ge + g + 2
    return LindbladCheck(
        c1=c1,
        c2=c2,
        c3=c3,
        c_matrix=c,
        eigenvalues=ev,
        is_psd=bool(ev[0] >= -tol),
        closed_pair=(0.5 * (base - root), 0.5 * (base + root)),
    )


def _superop(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> A rho B`` on row-major vectorized 2x2 matrices."""
    return np.kron(A, B.T)


def generator_from_lindblad_form(params: ModelParams, eps: float) -> np.ndarray:
    """Rebuild the 4x4 generator from a Hamiltonian and the coefficient matrix.

    ``H = -eps |e><e| + q Omega sigma_x + (Omega/2) [[0, i], [-i, 0]]`` plus
    ``sum_ij c_ij (F_i rho F_j^+ - {F_j^+ F_i, rho}/2)``. Agreement with
    :func:`build_effective_liouvillian` shows the generator is of Lindblad
    form, hence completely positive when the coefficient matrix is PSD.
    ``lindblad_check(params.replace(Gamma_e=Gamma_e / 2))`` certifies it.
    """
    q, om = params.q, params.Omega
    H = np.array([[0.0, q * om], [q * om, -eps]], dtype=complex)
    H = H + 0.5 * om * np.array([[0, 1j], [-1j, 0]], dtype=complex)
    eye = np.eye(2)
    L = -1j * (_superop(H, eye) - _superop(eye, H))
    # coefficient matrix with Gamma_e taken at half the population rate
    c = coefficient_matrix(*lindblad_coefficients(params.replace(Gamma_e=0.5 * params.Gamma_e)))
    for i, Fi in enumerate(PAULI_BASIS):
        for j, Fj in enumerate(PAULI_BASIS):
            Fjd = Fj.conj().T
            L = L + c[i, j] * (
                _superop(Fi, Fjd) - 0.5 * _superop(Fjd @ Fi, eye) - 0.5 * _superop(eye, Fjd @ Fi)
            )
    return L
