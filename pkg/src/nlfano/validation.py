"""Acceptance checks cross-validating closed forms, the effective kernel and the oracle.

Each ``criterion_*`` function returns a :class:`CriterionResult` carrying the
measured quantities, so a report documents what was compared and not just
whether it passed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import effective, oracle, profiles
from .fit import ProfileSamples, fit_profile
from .linalg import hermitian_eigenvalues
from .model import ModelParams


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name} ({self.seconds:.1f}s)"

    def as_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "measured": self.measured,
        }


def _rel_to_peak(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max() / np.abs(b).max())


def _window(params: ModelParams, span: float) -> tuple[float, float]:
    """Sampling window around the resonance, from the closed form without |e> damping."""
    bare = profiles.effective_params_population(params.replace(Gamma_e=0.0, gamma_eg=0.0))
    width = bare.gamma_eff + 0.5 * params.Gamma_e + params.gamma_eg
    return bare.omega_eff - span * width, bare.omega_eff + span * width


def oracle_fit(params: ModelParams, *, points: int = 25, span: float = 10.0, rel_tol: float = 1e-3):
    """Converged oracle population profile and its generalized-Fano fit."""
    lo, hi = _window(params, span)
    w = np.linspace(lo, hi, points)
    conv = oracle.converge(params, 0.5 * (lo + hi), rel_tol)
    values = oracle.profile(params, w, conv.N, conv.W)
    result = fit_profile(ProfileSamples(w, values))
    return result, {"N": conv.N, "W": conv.W, "trace": conv.history}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def criterion_weak_field() -> CriterionResult:
    p = ModelParams(q=5.0, Omega=1e-3, Gamma_c=1.0)
    eps = np.linspace(-10.0, 10.0, 2001)
    classic = 2 * p.Omega**2 / p.Gamma_c * profiles.fano(eps, p.q)
    closed = profiles.generalized_profile(profiles.effective_params_population(p), eps)
    err_closed = _rel_to_peak(closed, classic)

    eps_o = np.linspace(-10.0, 10.0, 41)
    classic_o = 2 * p.Omega**2 / p.Gamma_c * profiles.fano(eps_o, p.q)
    closed_o = profiles.generalized_profile(profiles.effective_params_population(p), eps_o)
    orc = oracle.profile(p, eps_o, 400, 40.0, grid="ladder")
    err_oc, err_of = _rel_to_peak(orc, classic_o), _rel_to_peak(orc, closed_o)
    # same controls on the uniform band: carries the 1/W truncation error of a finite band
    uni = oracle.profile(p, eps_o, 400, 40.0, grid="uniform")
    return CriterionResult(
        1,
        "weak-field classical limit",
        err_closed <= 1e-4 and err_oc <= 1e-2 and err_of <= 1e-2,
        {
            "closed_vs_classic": err_closed,
            "oracle_vs_classic": err_oc,
            "oracle_vs_closed": err_of,
            "oracle_grid": {"N": 400, "W": 40.0, "grid": "ladder"},
            "uniform_grid_vs_classic": _rel_to_peak(uni, classic_o),
            "uniform_grid_vs_closed": _rel_to_peak(uni, closed_o),
        },
    )


def _compare_fit(ref: profiles.EffectiveFano, got: profiles.EffectiveFano) -> dict:
    dq = abs(got.q_eff - ref.q_eff)
    return {
        "q_eff": dq / abs(ref.q_eff) if ref.q_eff != 0 else dq,
        "gamma_eff": _rel(got.gamma_eff, ref.gamma_eff),
        "omega_eff": abs(got.omega_eff - ref.omega_eff) / ref.gamma_eff,
        "C": _rel(got.C, ref.C),
    }


def criterion_eq10_grid() -> CriterionResult:
    rows, worst = [], 0.0
    for q in (0.0, 1.0, 5.0):
        for om in (0.05, 0.3, 1.0):
            for gc in (0.5, 1.0, 4.0):
                p = ModelParams(q=q, Omega=om, Gamma_c=gc)
                res, ctl = oracle_fit(p)
                errs = _compare_fit(profiles.effective_params_population(p), res.params)
                worst = max(worst, max(errs.values()))
                rows.append({"q": q, "Omega": om, "Gamma_c": gc, "errors": errs, "N": ctl["N"], "W": ctl["W"]})
    return CriterionResult(2, "closed-form parameters vs oracle fits", worst <= 0.02, {"max_error": worst, "cases": rows})


def criterion_eit() -> CriterionResult:
    p = ModelParams(q=15.0, Omega=1.0)
    closed = profiles.generalized_profile(profiles.effective_params_population(p), 0.0)
    kernel = effective.population(p, 0.0)
    at_zero = oracle.converge(p, 0.0)
    oms = np.linspace(0.0, 2.0, 201)
    sweep = np.array([effective.population(p.replace(Omega=o), 0.0) for o in oms])
    om_peak = float(oms[np.argmax(sweep)])
    peak = oracle.converge(p.replace(Omega=om_peak), 0.0)
    ratio = at_zero.n_c / peak.n_c

    pd = p.replace(Gamma_e=0.1)
    opt = minimize_scalar(lambda o: effective.population(pd.replace(Omega=o), 0.0), bounds=(0.5, 1.5), method="bounded", options={"xatol": 1e-8})
    om_min = float(opt.x)
    probe = [om_min - 0.1, om_min, om_min + 0.1]
    orc = [oracle.converge(pd.replace(Omega=o), 0.0).n_c for o in probe]
    persists = orc[1] < orc[0] and orc[1] < orc[2]
    ok = abs(closed) <= 1e-15 and ratio <= 1e-3 and persists and abs(om_min - 1.0) <= 0.05
    return CriterionResult(
        3,
        "transparency zero",
        ok,
        {
            "closed_n_c": closed,
            "kernel_n_c": kernel,
            "oracle_n_c": at_zero.n_c,
            "oracle_peak": peak.n_c,
            "peak_Omega": om_peak,
            "oracle_ratio": ratio,
            "damped_min_Omega": om_min,
            "damped_oracle_probe": dict(zip(("below", "at", "above"), orc)),
            "controls": {"N": at_zero.N, "W": at_zero.W},
        },
    )


def criterion_stark_null() -> CriterionResult:
    p = ModelParams(q=5.0, Omega=math.sqrt(0.5), Gamma_c=1.0)
    closed_shift = profiles.effective_params_population(p).omega_eff - p.omega_e
    oms = (0.62, 0.67, 0.70, 0.72, 0.74, 0.78)
    shifts = []
    for om in oms:
        res, _ = oracle_fit(p.replace(Omega=om))
        shifts.append(res.params.omega_eff - p.omega_e)
    roots = []
    for (o1, s1), (o2, s2) in zip(zip(oms, shifts), zip(oms[1:], shifts[1:])):
        if s1 == 0 or s1 * s2 < 0:
            roots.append(o1 + (o2 - o1) * s1 / (s1 - s2))
    ok = abs(closed_shift) <= 1e-12 and len(roots) == 1 and 0.67 <= roots[0] <= 0.74
    return CriterionResult(
        4,
        "AC-Stark null point",
        ok,
        {"closed_shift": closed_shift, "Omega": list(oms), "fitted_shift": shifts, "sign_change_at": roots},
    )


def criterion_narrowing() -> CriterionResult:
    signs = []
    for q, gc in ((0.0, 0.5), (0.5, 0.5), (5.0, 1.0), (1.0, 4.0)):
        h = 1e-4
        slope = (profiles.population_width(q, h, gc) - profiles.population_width(q, 0.0, gc)) / h**2
        predicted = (q**2 + 1) * (gc + 1) - 2
        signs.append({"q": q, "Gamma_c": gc, "slope": slope, "predicted": predicted, "agree": bool(np.sign(slope) == np.sign(predicted))})
    curves, worst = [], 0.0
    for q, gc in ((0.0, 0.5), (5.0, 1.0)):
        for om in (0.05, 0.2, 0.4, 0.6, 0.8, 1.0):
            p = ModelParams(q=q, Omega=om, Gamma_c=gc)
            res, _ = oracle_fit(p)
            err = _rel(res.params.gamma_eff, profiles.population_width(q, om, gc))
            worst = max(worst, err)
            curves.append({"q": q, "Gamma_c": gc, "Omega": om, "gamma_fit": res.params.gamma_eff, "error": err})
    ok = all(s["agree"] for s in signs) and worst <= 0.02
    return CriterionResult(5, "power narrowing and broadening", ok, {"slopes": signs, "max_width_error": worst, "curve": curves})


def criterion_saturation() -> CriterionResult:
    p = ModelParams(q=1.0, Omega=10.0, Gamma_c=1.0)
    ef = profiles.effective_params_population(p)
    # maximum C (1 + q_eff^2) of the profile sits at eps_eff = 1 / q_eff
    w_peak = ef.omega_eff + ef.gamma_eff / ef.q_eff
    conv = oracle.converge(p, w_peak, rel_tol=2e-3)
    C = 2 * p.Omega**2 / (2 * p.Omega**2 + p.Gamma_c)
    return CriterionResult(
        6,
        "saturation",
        abs(conv.n_c - C) <= 1e-2,
        {
            "omega_L_peak": w_peak,
            "oracle_n_c": conv.n_c,
            "kernel_n_c": effective.population(p, w_peak),
            "C": C,
            "controls": {"N": conv.N, "W": conv.W, "rel_tol": 2e-3, "trace": conv.history},
        },
    )


def criterion_general_structure() -> CriterionResult:
    rows, worst = [], 0.0
    for ge in (0.3, 1.0):
        for g in (0.3, 1.0):
            p = ModelParams(q=5.0, Omega=0.3, Gamma_c=1.0, Gamma_e=ge, gamma_eg=g)
            res, ctl = oracle_fit(p)
            worst = max(worst, res.rms_residual)
            rows.append({"Gamma_e": ge, "gamma_eg": g, "rms": res.rms_residual, "fit": res.params.as_dict(), "N": ctl["N"]})
    return CriterionResult(7, "generalized profile structure", worst <= 5e-3, {"max_rms": worst, "cases": rows})


def criterion_photocurrent() -> CriterionResult:
    shape = profiles.photocurrent_width_and_weight(0.0, 0.0, 1.0, 0.0)
    D_zero = max(
        abs(profiles.photocurrent_width_and_weight(q, om, 0.0, 0.0).D)
        for q in (0.0, 1.0, 5.0, -3.0)
        for om in np.linspace(0.0, 2.0, 21)
    )
    # closed form against the kernel ratio for a damped case
    p = ModelParams(q=3.0, Omega=0.8, Gamma_e=0.7, gamma_eg=0.4)
    w = np.linspace(-10, 10, 41)
    kernel_err = _rel_to_peak(profiles.photocurrent(p, w), effective.photocurrent_from_kernel(p, w))
    ok = abs(shape.D - 0.25) <= 1e-12 and abs(shape.gamma_eff - 2.0) <= 1e-12 and D_zero <= 1e-15
    return CriterionResult(
        8,
        "photocurrent formulas",
        ok,
        {"gamma_tr": shape.gamma_eff, "D_tr": shape.D, "q_ratio": shape.q_ratio, "max_D_undamped": D_zero, "closed_vs_kernel": kernel_err},
    )


def criterion_lindblad(draws: int = 1000, seed: int = 7) -> CriterionResult:
    rng = np.random.default_rng(seed)
    min_ev, worst_identity = np.inf, 0.0
    for om, ge, g in rng.uniform(0.0, 2.0, size=(draws, 3)):
        chk = effective.lindblad_check(ModelParams(q=0.0, Omega=om, Gamma_e=ge, gamma_eg=g))
        min_ev = min(min_ev, chk.eigenvalues[0])
        identity = 2 * (ge * om**2 + (1 + ge) * g)
        product = chk.eigenvalues[1] * chk.eigenvalues[2]
        worst_identity = max(worst_identity, abs(product - identity) / max(1.0, identity))
    return CriterionResult(
        9,
        "Lindblad positivity",
        bool(min_ev >= -1e-12 and worst_identity <= 1e-9),
        {"draws": draws, "min_eigenvalue": float(min_ev), "identity_error": worst_identity},
    )


def criterion_properties(seed: int = 11) -> CriterionResult:
    rng = np.random.default_rng(seed)
    row_sum = 0.0
    gc_equal = True
    for _ in range(200):
        q, om, ge, g, eps = rng.uniform([-10, 0, 0, 0, -20], [10, 3, 2, 2, 20])
        p = ModelParams(q=q, Omega=om, Gamma_e=ge, gamma_eg=g)
        L = effective.build_effective_liouvillian(p, eps)
        row_sum = max(row_sum, float(np.abs(L[effective.GG] + L[effective.EE]).max()))
        blocks = [
            effective.discrete_steady_state(effective.build_effective_liouvillian(p.replace(Gamma_c=gc), eps)).as_vector()
            for gc in (0.1, 1.0, 10.0)
        ]
        gc_equal &= all(np.array_equal(blocks[0], b) for b in blocks[1:])

    trace_err = 0.0
    for p, wl in ((ModelParams(q=5, Omega=0.3), 0.5), (ModelParams(q=1, Omega=1, Gamma_e=0.5, gamma_eg=0.2, gamma_kg=0.1, gamma_ke=0.1), -2.0)):
        st = oracle.solve_point(p, wl, 200, 40.0)
        trace_err = max(trace_err, abs(st.trace - 1.0))

    truth = profiles.EffectiveFano(C=0.5, D=0.2, q_eff=3.0, gamma_eff=1.5, omega_eff=10.0)
    w = np.linspace(10 - 18, 10 + 18, 200)
    got = fit_profile(ProfileSamples(w, profiles.generalized_profile(truth, w))).params
    fit_err = max(_rel(getattr(got, k), getattr(truth, k)) for k in ("C", "D", "q_eff", "gamma_eff", "omega_eff"))

    ok = row_sum == 0.0 and gc_equal and trace_err <= 1e-10 and fit_err <= 1e-6
    return CriterionResult(
        10,
        "property suites",
        ok,
        {"max_row_sum": row_sum, "Gamma_c_independent": bool(gc_equal), "oracle_trace_error": trace_err, "fit_round_trip": fit_err},
    )


CRITERIA = {
    1: criterion_weak_field,
    2: criterion_eq10_grid,
    3: criterion_eit,
    4: criterion_stark_null,
    5: criterion_narrowing,
    6: criterion_saturation,
    7: criterion_general_structure,
    8: criterion_photocurrent,
    9: criterion_lindblad,
    10: criterion_properties,
}


def run(number: int) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        result = CRITERIA[number]()
    except Exception as exc:  # a crash is reported as a failure with its message
        result = CriterionResult(number, CRITERIA[number].__name__, False, {"error": f"{type(exc).__name__}: {exc}"})
    result.seconds = time.perf_counter() - t0
    return result


def run_all(numbers=None, log=None) -> list[CriterionResult]:
    results = []
    for n in numbers or sorted(CRITERIA):
        r = run(n)
        if log is not None:
            log(r.line())
        results.append(r)
    return results


def report(results) -> dict:
    return {"all_passed": all(r.passed for r in results), "criteria": [r.as_dict() for r in results]}
