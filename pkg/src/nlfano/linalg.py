"""Small dense complex linear algebra used by the steady-state solvers."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class DegenerateSteadyStateError(RuntimeError):
    """The generator does not have a unique (one-dimensional) steady state."""


class NotHermitianError(ValueError):
    pass


@dataclass
class NullspaceResult:
    """Orthonormal kernel basis (one vector per row) and all singular values, descending."""

    basis: np.ndarray
    singular_values: np.ndarray

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]


def _as_finite_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def nullspace(M, tol: float = 1e-10) -> NullspaceResult:
    """Right-singular vectors whose singular values are <= tol * largest.

    Columns beyond the row count (wide matrices) are always in the kernel.
    """
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    M = _as_finite_matrix(M)
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    cols = M.shape[1]
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return NullspaceResult(basis=vh[rank:cols].conj(), singular_values=s)


def solve_with_trace_constraint(
    L,
    trace_indices,
    trace_value: float = 1.0,
    *,
    weights=None,
    replace_row: int | None = None,
    residual_tol: float = 1e-8,
) -> np.ndarray:
    """Solve ``L x = 0`` subject to a trace condition.

    One row of ``L`` (``replace_row``, default the first trace index) is
    redundant for a trace-preserving generator and is replaced by
    ``sum_i x[trace_indices[i]] + weights @ x = trace_value``. ``weights`` is
    an optional extra linear functional for trace contributions of
    components that were eliminated before the call.
    """
    L = _as_finite_matrix(L)
    d = L.shape[0]
    if L.shape != (d, d):
        raise ValueError(f"L must be square, got {L.shape}")
    idx = np.asarray(list(trace_indices), dtype=int)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= d:
        raise ValueError("trace_indices must be valid positions")
    row = int(idx[0]) if replace_row is None else int(replace_row)

    functional = np.zeros(d, dtype=complex)
    functional[idx] = 1.0
    if weights is not None:
        functional = functional + np.asarray(weights, dtype=complex)

    A = L.copy()
    A[row] = functional
    b = np.zeros(d, dtype=complex)
    b[row] = trace_value
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            x = scipy.linalg.solve(A, b)
        except (scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise DegenerateSteadyStateError(
                f"trace-augmented system is singular: kernel dimension > 1 ({exc})"
            ) from exc

    r = L @ x
    r[row] = 0.0
    scale = np.abs(L).max() * np.abs(x).max()
    if np.abs(r).max() > residual_tol * max(scale, np.finfo(float).tiny):
        raise DegenerateSteadyStateError(
            f"steady-state residual {np.abs(r).max():.3e} exceeds {residual_tol:g} * |L||x|"
        )
    return x


def hermitian_eigenvalues(M, tol: float = 1e-12) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix; rejects non-Hermitian input."""
    M = _as_finite_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got {M.shape}")
    asym = np.abs(M - M.conj().T).max() if M.size else 0.0
    if asym > tol * max(1.0, np.abs(M).max()):
        raise NotHermitianError(f"matrix is not Hermitian: max |M - M^H| = {asym:.3e}")
    return np.linalg.eigvalsh(0.5 * (M + M.conj().T))
