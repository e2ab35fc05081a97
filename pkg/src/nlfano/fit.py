"""Least-squares extraction of generalized Fano parameters from sampled lineshapes.

Model: ``y = C [(q + x)**2 + D] / (x**2 + 1)`` with ``x = (omega_L - omega_eff) / gamma_eff``.
The fit runs on normalized data (values divided by their maximum, frequencies
centered on the sample midpoint and divided by the half-span) so that it is
exactly equivariant under scaling of the values and shifts of the frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .profiles import EffectiveFano

KINDS = ("population", "photocurrent")
PARAM_NAMES = ("C", "D", "q_eff", "gamma_eff", "omega_eff")
LARGE_Q = 20.0


class NoFeatureError(ValueError):
    """Samples are flat or monotone; there is no resonance to fit."""


class FitError(RuntimeError):
    def __init__(self, message: str, direction: dict | None = None):
        super().__init__(message)
        self.direction = direction


@dataclass(frozen=True)
class ProfileSamples:
    omega_L: np.ndarray
    values: np.ndarray
    kind: str = "population"

    def __post_init__(self):
        w = np.asarray(self.omega_L, dtype=float)
        y = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "omega_L", w)
        object.__setattr__(self, "values", y)
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if w.ndim != 1 or w.shape != y.shape:
            raise ValueError("omega_L and values must be 1-d arrays of equal length")
        if w.size < 7:
            raise ValueError(f"need at least 7 samples, got {w.size}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(y))):
            raise ValueError("samples must be finite")
        if np.any(np.diff(w) <= 0):
            raise ValueError("omega_L must be strictly increasing")
        if np.any(y < -1e-12 * np.abs(y).max()):
            raise ValueError("sample values must be >= 0")


@dataclass(frozen=True)
class FitResult:
    params: EffectiveFano
    rms_residual: float
    covariance_diag: dict
    iterations: int
    reparameterized: bool = False

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "rms_residual": self.rms_residual,
            "covariance_diag": dict(self.covariance_diag),
            "iterations": self.iterations,
            "reparameterized": self.reparameterized,
        }


def _normalization(samples: ProfileSamples):
    w = samples.omega_L
    mid = 0.5 * (w[0] + w[-1])
    half = 0.5 * (w[-1] - w[0])
    scale = float(np.abs(samples.values).max())
    if scale == 0:
        raise NoFeatureError("all sample values are zero")
    return mid, half, scale


def _to_normalized(ef: EffectiveFano, mid: float, half: float, scale: float):
    return np.array([ef.C / scale, ef.D, ef.q_eff, math.log(ef.gamma_eff / half), (ef.omega_eff - mid) / half])


def _from_normalized(theta, mid: float, half: float, scale: float) -> EffectiveFano:
    C, D, q, lg, w0 = theta
    return EffectiveFano(
        C=float(max(C, 0.0) * scale),
        D=float(max(D, 0.0)),
        q_eff=float(q),
        gamma_eff=float(math.exp(lg) * half),
        omega_eff=float(w0 * half + mid),
    )


def _standard(theta, u):
    """Model and Jacobian in (C, D, q, log gamma, omega) on normalized axes."""
    C, D, q, lg, w0 = theta
    g = math.exp(lg)
    x = (u - w0) / g
    den = x**2 + 1.0
    num = (q + x) ** 2 + D
    f = C * num / den
    fx = C * (2.0 * (q + x) * den - 2.0 * x * num) / den**2
    J = np.column_stack([num / den, C / den, 2.0 * C * (q + x) / den, -x * fx, -fx / g])
    return f, J


def _large_q(phi, u):
    """Model and Jacobian in (A = C q^2, p = 1/q, B = C D, log gamma, omega)."""
    A, p, B, lg, w0 = phi
    g = math.exp(lg)
    x = (u - w0) / g
    den = x**2 + 1.0
    lin = 1.0 + p * x
    num = A * lin**2 + B
    f = num / den
    fx = (2.0 * A * p * lin * den - 2.0 * x * num) / den**2
    J = np.column_stack([lin**2 / den, 2.0 * A * lin * x / den, 1.0 / den, -x * fx, -fx / g])
    return f, J


def _standard_to_large(theta):
    C, D, q, lg, w0 = theta
    return np.array([C * q**2, 1.0 / q, C * D, lg, w0])


def _large_to_standard(phi):
    A, p, B, lg, w0 = phi
    C = A * p**2
    return np.array([C, B / C if C > 0 else 0.0, 1.0 / p, lg, w0])


def _rational_start(u, y):
    """Exact parameters for noise-free data via linearization of the rational form.

    ``y (u^2 + b u + c) = a2 u^2 + a1 u + a0`` is linear in (b, c, a2, a1, a0).
    """
    M = np.column_stack([-y * u, -y, u**2, u, np.ones_like(u)])
    sol, *_ = np.linalg.lstsq(M, y * u**2, rcond=None)
    b, c, a2, a1, a0 = sol
    w0 = -0.5 * b
    g2 = c - w0**2
    if not (g2 > 0 and a2 > 0):
        return None
    g = math.sqrt(g2)
    qg = 0.5 * (a1 / a2 + 2.0 * w0)
    D = (a0 / a2 - w0**2 + 2.0 * qg * w0 - qg**2) / g2
    return np.array([a2, max(D, 0.0), qg / g, math.log(g), w0])


def _heuristic_start(u, y):
    n = y.size
    tail = max(0.5 * (y[0] + y[-1]), 1e-12)
    i_max, i_min = int(np.argmax(y)), int(np.argmin(y))
    interior_max = 0 < i_max < n - 1
    interior_min = 0 < i_min < n - 1

    if not interior_max:
        # window resonance: symmetric dip to (near) zero
        w0 = u[i_min]
        half_level = 0.5 * (tail + y[i_min])
        above = np.nonzero(y >= half_level)[0]
        left = above[above < i_min]
        right = above[above > i_min]
        width = (u[right[0]] if right.size else u[-1]) - (u[left[-1]] if left.size else u[0])
        return np.array([tail, 0.0, 0.0, math.log(max(0.5 * width, 1e-6)), w0])

    C = tail
    q_abs = math.sqrt(max(y[i_max] / C - 1.0, 1e-4))
    if interior_min:
        sign = 1.0 if i_min < i_max else -1.0
        g = abs(u[i_max] - u[i_min]) / (q_abs + 1.0 / q_abs)
    else:
        half_level = 0.5 * (y[i_max] + tail)
        above = np.nonzero(y >= half_level)[0]
        g = 0.5 * max(u[above[-1]] - u[above[0]], u[1] - u[0])
        left, right = y[:i_max].mean(), y[i_max + 1 :].mean()
        sign = 1.0 if left < right else -1.0
    q = sign * q_abs
    g = max(g, 1e-6)
    return np.array([C, 0.0, q, math.log(g), u[i_max] - g / q])


def initial_guess(samples: ProfileSamples) -> EffectiveFano:
    """Heuristic starting point from the peak, the minimum and the tails.

    Raises:
        NoFeatureError: for flat or monotone samples.
    """
    y = samples.values
    mid, half, scale = _normalization(samples)
    d = np.diff(y)
    if np.ptp(y) <= 1e-12 * scale or np.all(d >= 0) or np.all(d <= 0):
        raise NoFeatureError("samples are flat or monotone; no resonance feature to fit")
    u = (samples.omega_L - mid) / half
    return _from_normalized(_heuristic_start(u, y / scale), mid, half, scale)


def _solve(model, start, u, y, lower):
    res = least_squares(
        lambda p: model(p, u)[0] - y,
        start,
        jac=lambda p: model(p, u)[1],
        bounds=(lower, np.full(5, np.inf)),
        method="trf",
        xtol=1e-10,
        ftol=1e-12,
        gtol=1e-14,
        max_nfev=500,
        x_scale="jac",
    )
    return res


def _check_rank(J: np.ndarray, names) -> None:
    norms = np.linalg.norm(J, axis=0)
    if np.any(norms == 0):
        k = int(np.argmin(norms))
        raise FitError(f"Jacobian column for {names[k]} vanishes", {names[k]: 1.0})
    _, s, vh = np.linalg.svd(J / norms, full_matrices=False)
    if s[-1] < 1e-10 * s[0]:
        direction = {n: float(v) for n, v in zip(names, vh[-1])}
        raise FitError(f"rank-deficient Jacobian; degenerate direction {direction}", direction)


def fit_profile(samples: ProfileSamples, guess: EffectiveFano | None = None) -> FitResult:
    """Damped least-squares fit of the generalized profile.

    Runs from ``guess`` (default :func:`initial_guess`), its mirror image in
    ``q_eff`` and an exact rational-linearization start, keeping the lowest
    residual. When ``|q_eff| > 20`` the fit is repeated in the variables
    ``(C q^2, 1/q, C D, log gamma, omega)``, which stay well conditioned in
    the Lorentzian limit.

    Raises:
        FitError: no start converges within 500 evaluations, or the Jacobian
            at the solution is rank deficient.
    """
    mid, half, scale = _normalization(samples)
    u = (samples.omega_L - mid) / half
    y = samples.values / scale
    if guess is None:
        guess = initial_guess(samples)

    g0 = _to_normalized(guess, mid, half, scale)
    starts = [g0, g0 * np.array([1.0, 1.0, -1.0, 1.0, 1.0])]
    rational = _rational_start(u, y)
    if rational is not None:
        starts.append(rational)

    lower = np.array([0.0, 0.0, -np.inf, -np.inf, -np.inf])
    best = None
    for start in starts:
        start = np.clip(start, lower, None)
        res = _solve(_standard, start, u, y, lower)
        if res.status > 0 and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise FitError("no start converged within 500 function evaluations")

    theta, nfev, reparam = best.x, best.nfev, False
    if abs(theta[2]) > LARGE_Q:
        res = _solve(_large_q, _standard_to_large(theta), u, y, np.array([0.0, -np.inf, 0.0, -np.inf, -np.inf]))
        if res.status > 0 and res.cost <= best.cost * (1 + 1e-6) + 1e-20:
            _check_rank(_large_q(res.x, u)[1], ("A", "1/q_eff", "B", "log_gamma_eff", "omega_eff"))
            theta, nfev, reparam = _large_to_standard(res.x), nfev + res.nfev, True
    if not reparam:
        _check_rank(_standard(theta, u)[1], ("C", "D", "q_eff", "log_gamma_eff", "omega_eff"))

    params = _from_normalized(theta, mid, half, scale)
    resid = generalized(params, samples.omega_L) - samples.values
    rms = float(np.sqrt(np.mean(resid**2)) / np.sqrt(np.mean(samples.values**2)))
    return FitResult(
        params=params,
        rms_residual=rms,
        covariance_diag=_covariance(params, samples, resid),
        iterations=int(nfev),
        reparameterized=reparam,
    )


def generalized(ef: EffectiveFano, omega_L) -> np.ndarray:
    x = (np.asarray(omega_L, dtype=float) - ef.omega_eff) / ef.gamma_eff
    return ef.C * ((ef.q_eff + x) ** 2 + ef.D) / (x**2 + 1.0)


def _covariance(ef: EffectiveFano, samples: ProfileSamples, resid: np.ndarray) -> dict:
    """Diagonal of ``s^2 (J^T J)^+`` in the reported parameters and units."""
    C, D, q, g, w0 = ef.C, ef.D, ef.q_eff, ef.gamma_eff, ef.omega_eff
    x = (samples.omega_L - w0) / g
    den = x**2 + 1.0
    num = (q + x) ** 2 + D
    fx = C * (2.0 * (q + x) * den - 2.0 * x * num) / den**2
    J = np.column_stack([num / den, C / den, 2.0 * C * (q + x) / den, -x * fx / g, -fx / g])
    dof = max(samples.omega_L.size - 5, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.pinv(J.T @ J)
    return {n: float(v) for n, v in zip(PARAM_NAMES, np.diag(cov))}
