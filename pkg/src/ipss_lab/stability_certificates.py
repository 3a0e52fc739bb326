"""Stability certificates, envelope checking, transformers, falsification.

A certificate packages one of the five state-bound shapes (decay-only,
bounded, sup-gain, energy-gain, power-gain).  Envelope checking evaluates
the certified bound along a simulated trajectory with the input measure
matching the certificate kind.  The transformers implement the exact
constants relating the exponential energy-gain and power-gain bounds, and
the falsifier searches structured input families for counterexamples.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .comparison_functions import (
    KLBound,
    MonotoneFn,
    compose,
    klbound_from_spec,
    klbound_to_spec,
    make_power_fn,
    monotone_from_spec,
    monotone_to_spec,
)
from .errors import ParameterError
from .signals import (
    Signal,
    avg_power_norm,
    constant_signal,
    make_signal,
    restrict,
    rho_energy,
    sup_norm,
)
from .simulator import SystemDef, Trajectory, simulate

__all__ = [
    "Certificate",
    "EnvelopeReport",
    "InputFamilySpec",
    "FalsificationReport",
    "OracleReport",
    "check_envelope",
    "ipss_to_iss_iiss",
    "exponential_window_bound",
    "exp_iiss_to_ipss",
    "lemma3_oracle",
    "falsify",
    "certificate_to_json",
    "certificate_from_json",
]

_KINDS = ("ISS", "iISS", "IPSS", "URGAS", "URLS")


@dataclass(frozen=True)
class Certificate:
    """A stability bound of one of the five supported kinds.

    Field presence is kind-dependent: ``beta`` for every kind but URLS,
    ``gamma`` for the input-gain kinds, ``rho`` for the energy/power kinds,
    ``T`` for the power kind only and ``urls_epsilon`` for URLS only.
    For ISS certificates ``gamma`` holds the sup-norm gain.
    """

    kind: str
    beta: Optional[KLBound] = None
    gamma: Optional[MonotoneFn] = None
    rho: Optional[MonotoneFn] = None
    T: Optional[float] = None
    urls_epsilon: Optional[MonotoneFn] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown certificate kind {self.kind!r}")
        need_beta = self.kind != "URLS"
        need_gamma = self.kind in ("ISS", "iISS", "IPSS")
        need_rho = self.kind in ("iISS", "IPSS")
        need_T = self.kind == "IPSS"
        need_eps = self.kind == "URLS"
        checks = [
            ("beta", self.beta, need_beta),
            ("gamma", self.gamma, need_gamma),
            ("rho", self.rho, need_rho),
            ("T", self.T, need_T),
            ("urls_epsilon", self.urls_epsilon, need_eps),
        ]
        for name, val, needed in checks:
            if needed and val is None:
                raise ParameterError(f"{self.kind} certificate requires field {name}")
            if not needed and val is not None:
                raise ParameterError(f"{self.kind} certificate must not carry field {name}")
        if need_T and not (self.T > 0):
            raise ParameterError(f"IPSS window length must be positive, got {self.T}")
        for name, fn in (("gamma", self.gamma), ("rho", self.rho)):
            if fn is not None and fn.class_tag != "Kinf":
                raise ParameterError(
                    f"certificate gain {name} must be class Kinf, got {fn.class_tag}")


@dataclass(frozen=True)
class EnvelopeReport:
    """Minimal slack of a certified bound along one trajectory."""

    margin: float
    worst_time: float
    satisfied: bool
    tolerance: float
    measure: Optional[float] = None
    note: str = ""


def _input_measure(cert: Certificate, u: Signal, t0: float, t_end: float):
    """Input measure over ``[t0, t_end]`` per the certificate kind.

    The input is replaced by its restriction to the simulated window, which
    leaves the bound's meaning unchanged by causality.
    """
    if cert.kind in ("URGAS", "URLS"):
        return None
    u_win = restrict(u, t0, t_end)
    if cert.kind == "ISS":
        return sup_norm(u_win, (t0, t_end))
    if cert.kind == "iISS":
        return rho_energy(u_win, cert.rho, (t0, t_end))
    return avg_power_norm(u_win, cert.rho, cert.T)


def check_envelope(traj: Trajectory, cert: Certificate, u: Signal, xi_norm: float,
                   t0: float, tolerance: Optional[float] = None) -> EnvelopeReport:
    """Evaluate the certified bound at every trajectory grid time.

    Returns the minimal ``bound - |x|`` margin and where it occurs.  A
    blown-up trajectory fails outright.  When ``tolerance`` is omitted it
    defaults to ``1e-6 * (1 + bound)`` at the worst point, matching the
    combined integrator and quadrature error scales.
    """
    if traj.blown_up:
        return EnvelopeReport(
            margin=-math.inf,
            worst_time=float(traj.blowup_time),
            satisfied=False,
            tolerance=tolerance if tolerance is not None else 0.0,
            note="trajectory blow-up",
        )
    measure = _input_measure(cert, u, t0, float(traj.times[-1]))
    gamma_term = 0.0
    measure_val = None
    if measure is not None:
        measure_val = measure.value
        if measure.diverged:
            return EnvelopeReport(
                margin=-math.inf,
                worst_time=float(traj.times[0]),
                satisfied=False,
                tolerance=tolerance if tolerance is not None else 0.0,
                measure=measure.value,
                note="input measure diverged",
            )
        gamma_term = float(cert.gamma.eval(measure.value))

    norms = traj.norms()
    dt = traj.times - t0
    if cert.kind == "URLS":
        bounds = np.full_like(norms, float(cert.urls_epsilon.eval(xi_norm)))
    else:
        beta_vals = np.asarray(cert.beta.eval(xi_norm, dt), dtype=float)
        bounds = beta_vals + gamma_term
    margins = bounds - norms
    worst = int(np.argmin(margins))
    margin = float(margins[worst])
    tol = tolerance if tolerance is not None else 1e-6 * (1.0 + float(bounds[worst]))
    return EnvelopeReport(
        margin=margin,
        worst_time=float(traj.times[worst]),
        satisfied=margin >= -tol,
        tolerance=float(tol),
        measure=measure_val,
    )


# ---------------------------------------------------------------------------
# transformers


def ipss_to_iss_iiss(cert: Certificate) -> tuple[Certificate, Certificate]:
    """Weaken a power-gain certificate into sup-gain and energy-gain ones.

    The power norm is dominated by ``rho`` of the sup norm and by the total
    energy divided by the window length, so the sup gain is ``gamma o rho``
    and the energy gain is ``s -> gamma(s / T)``; the decay term is shared.
    """
    if cert.kind != "IPSS":
        raise ParameterError(f"transformer needs an IPSS certificate, got {cert.kind}")
    eta = compose(cert.gamma, cert.rho)
    gamma_iiss = compose(cert.gamma, make_power_fn(1.0 / cert.T, 1.0))
    iss = Certificate(kind="ISS", beta=cert.beta, gamma=eta)
    iiss = Certificate(kind="iISS", beta=cert.beta, gamma=gamma_iiss, rho=cert.rho)
    return iss, iiss


def exponential_window_bound(K: float, lam: float, T: float) -> tuple[float, float]:
    """Exact constants of the exponential windowing bound.

    For ``K, lam > 0`` and ``T > log(max(1, K)) / lam``, returns
    ``lambda_tilde = lam - log(max(1, K)) / T`` and the gain amplification
    ``(1 + K*(1 - e^{-lam*T})) / (1 - K*e^{-lam*T})``.
    """
    if K <= 0 or lam <= 0:
        raise ParameterError("K and lam must be positive")
    threshold = math.log(max(1.0, K)) / lam
    if not (T > threshold):
        raise ParameterError(
            f"window length T={T} must exceed log(max(1,K))/lam = {threshold:.6g} "
            "for the geometric iteration to contract"
        )
    lambda_tilde = lam - math.log(max(1.0, K)) / T
    C = K * math.exp(-lam * T)
    amplification = (1.0 - C + K) / (1.0 - C)
    return lambda_tilde, amplification


def exp_iiss_to_ipss(K: float, lam: float, gamma_iiss: MonotoneFn, rho: MonotoneFn,
                     T: float) -> Certificate:
    """Upgrade an exponential energy-gain bound to a power-gain certificate.

    Requires ``K >= 1`` (forced by the bound at ``t = 0``).  The new decay
    uses the degraded rate ``lambda_tilde`` and the new gain is the
    amplified, argument-scaled energy gain ``s -> amp * gamma_iiss(T*s)``:
    the windowed energy supremum is at most ``T`` times the average power,
    and the gain is nondecreasing.
    """
    if K < 1.0:
        raise ParameterError(f"exponential energy-gain bound forces K >= 1, got {K}")
    lambda_tilde, amplification = exponential_window_bound(K, lam, T)
    beta = KLBound(kind="exponential", K=float(K), lam=float(lambda_tilde))

    if gamma_iiss.spec is not None and gamma_iiss.spec.get("kind") == "power":
        # amp * c * (T*s)^p collapses to another power function
        c, p = gamma_iiss.spec["c"], gamma_iiss.spec["p"]
        gamma = make_power_fn(amplification * c * T ** p, p)
    else:
        def gamma_eval(s, _g=gamma_iiss, _T=float(T), _a=amplification):
            return _a * np.asarray(_g.eval(_T * np.asarray(s, dtype=float))) if np.ndim(s) \
                else _a * float(_g.eval(_T * float(s)))

        gamma = MonotoneFn(eval=gamma_eval, class_tag="Kinf",
                           domain_hint=gamma_iiss.domain_hint)
    return Certificate(kind="IPSS", beta=beta, gamma=gamma, rho=rho, T=float(T))


# ---------------------------------------------------------------------------
# brute-force oracle for the windowing bound


@dataclass(frozen=True)
class OracleReport:
    """Result of the worst-case-saturation check of the windowing bound."""

    min_slack: float
    worst_pair: tuple
    lambda_tilde: float
    amplification: float
    converged: bool
    iterations: int
    grid_step: float
    n_grid: int


def lemma3_oracle(K: float, lam: float, T: float, eta: MonotoneFn,
                  h_profile: Signal, grid_step: float, t_max: float = 20.0,
                  g0: float = 1.0, max_iterations: int = 1000) -> OracleReport:
    """Saturate the decay-plus-integral inequality and check its window form.

    Builds the pointwise-largest grid sequence ``g`` consistent with
    ``g(t) <= K g(t0) e^{-lam (t - t0)} + eta(int_{t0}^t h)`` for all grid
    pairs (a forward minimization reaches the fixed point in one sweep,
    since every constraint looks backward), then verifies the windowed
    bound with the exact transformed constants at every grid pair and
    returns the minimal slack.

    Exact when the profile breakpoints and ``T`` lie on the grid.
    """
    if grid_step <= 0:
        raise ParameterError("grid step must be positive")
    lambda_tilde, amplification = exponential_window_bound(K, lam, T)
    n = int(round(t_max / grid_step))
    ts = grid_step * np.arange(n + 1)

    from .signals import cumulative_energy

    knots, cum = cumulative_energy(h_profile, None)
    H = np.interp(ts, knots, cum, right=float(cum[-1]))

    # forward saturation: each value is pinned by earlier values only
    g = np.empty(n + 1)
    g[0] = g0
    for i in range(1, n + 1):
        cand = K * g[:i] * np.exp(-lam * (ts[i] - ts[:i])) + np.asarray(
            eta.eval(H[i] - H[:i]), dtype=float
        )
        g[i] = float(np.min(cand))

    # one verification sweep confirms the fixed point
    iterations = 1
    converged = True
    resid = 0.0
    for i in range(1, n + 1):
        cand = K * g[:i] * np.exp(-lam * (ts[i] - ts[:i])) + np.asarray(
            eta.eval(H[i] - H[:i]), dtype=float
        )
        resid = max(resid, float(g[i] - np.min(cand)))
    while resid > 1e-12 * max(1.0, float(np.max(g))) and iterations < max_iterations:
        iterations += 1
        changed = 0.0
        for i in range(1, n + 1):
            cand = K * g[:i] * np.exp(-lam * (ts[i] - ts[:i])) + np.asarray(
                eta.eval(H[i] - H[:i]), dtype=float
            )
            new = min(g[i], float(np.min(cand)))
            changed = max(changed, g[i] - new)
            g[i] = new
        resid = changed
        if iterations >= max_iterations and resid > 1e-12:
            converged = False

    # windowed-bound check over all grid pairs
    min_slack = math.inf
    worst = (0.0, 0.0)
    for i in range(n + 1):
        tj = ts[i:]
        win_lo = np.maximum(ts[i], tj - T)
        H_lo = np.interp(win_lo, knots, cum, right=float(cum[-1]))
        window = H[i:] - H_lo
        phi = np.maximum.accumulate(window)
        rhs = K * g[i] * np.exp(-lambda_tilde * (tj - ts[i])) \
            + amplification * np.asarray(eta.eval(phi), dtype=float)
        slack = rhs - g[i:]
        j = int(np.argmin(slack))
        if float(slack[j]) < min_slack:
            min_slack = float(slack[j])
            worst = (float(ts[i]), float(tj[j]))
    return OracleReport(
        min_slack=min_slack,
        worst_pair=worst,
        lambda_tilde=lambda_tilde,
        amplification=amplification,
        converged=converged,
        iterations=iterations,
        grid_step=float(grid_step),
        n_grid=n + 1,
    )


# ---------------------------------------------------------------------------
# falsification


@dataclass(frozen=True)
class InputFamilySpec:
    """A structured family of (t0, xi, input) candidates for falsification.

    Families: ``constants`` (constant inputs at the given levels),
    ``pulse_trains`` (growing pulse trains), ``late_pulses`` (a single
    pulse of given amplitude starting at t0 with duration
    ``duration_scale / (1 + t0)``), ``bang_bang`` (alternating +/-
    amplitude).
    """

    family: str
    t0_values: tuple = (0.0,)
    xi_values: tuple = (0.0,)
    levels: tuple = (1.0,)          # constants family amplitudes
    tau: float = 1.0                # pulse_trains spacing
    count: int = 5                  # pulse_trains count
    amplitude: float = 0.5          # late_pulses / bang_bang amplitude
    duration_scale: float = 1.0     # late_pulses duration numerator
    period: float = 1.0             # bang_bang half-period
    horizon: float = 10.0           # simulated span after t0
    settle: float = 3.0             # late_pulses extra span after the pulse

    def __post_init__(self):
        if self.family not in ("constants", "pulse_trains", "late_pulses", "bang_bang"):
            raise ParameterError(f"unknown input family {self.family!r}")


@dataclass(frozen=True)
class FalsificationReport:
    """Search outcome: the worst candidate and every violating one."""

    worst: Optional[dict]
    violations: tuple
    n_evaluated: int
    seed: int

    @property
    def falsified(self) -> bool:
        return len(self.violations) > 0

    def to_json(self) -> dict:
        return {
            "worst": dict(self.worst) if self.worst else None,
            "violations": [dict(v) for v in self.violations],
            "n_evaluated": self.n_evaluated,
            "seed": self.seed,
        }


def _family_candidates(family: InputFamilySpec):
    """Yield (t0, xi, input signal, step hint, t_end, description)."""
    if family.family == "constants":
        for t0 in family.t0_values:
            for xi in family.xi_values:
                for c in family.levels:
                    t_end = t0 + family.horizon
                    u = constant_signal([c], t_end)
                    yield t0, xi, u, None, t_end, f"constant(c={c})"
    elif family.family == "pulse_trains":
        from .signals import pulse_train

        for t0 in family.t0_values:
            for xi in family.xi_values:
                u = pulse_train(family.tau, family.count)
                t_end = max(t0 + family.horizon, u.horizon)
                yield t0, xi, u, None, t_end, f"pulse_train(tau={family.tau}, count={family.count})"
    elif family.family == "late_pulses":
        for t0 in family.t0_values:
            duration = family.duration_scale / (1.0 + t0)
            for xi in family.xi_values:
                t_end = t0 + duration + family.settle
                u = make_signal(
                    [(0.0, [0.0]), (t0, [family.amplitude]), (t0 + duration, [0.0])],
                    horizon=t_end,
                )
                # resolve the pulse and respect explicit-integrator stability
                step = min(duration / 20.0, 2.0 / (3.0 + t_end))
                yield t0, xi, u, step, t_end, (
                    f"late_pulse(t0={t0}, amp={family.amplitude}, dur={duration:.6g})"
                )
    else:  # bang_bang
        for t0 in family.t0_values:
            for xi in family.xi_values:
                t_end = t0 + family.horizon
                pieces = []
                k = 0
                t = 0.0
                while t < t_end:
                    amp = family.amplitude if k % 2 == 0 else -family.amplitude
                    pieces.append((t, [amp]))
                    k += 1
                    t = k * family.period
                u = make_signal(pieces, horizon=t_end)
                yield t0, xi, u, None, t_end, (
                    f"bang_bang(amp={family.amplitude}, period={family.period})"
                )


def falsify(sys: SystemDef, cert: Certificate, family: InputFamilySpec,
            budget: int, seed: int, step: float = 1e-3,
            tolerance: Optional[float] = None) -> FalsificationReport:
    """Search the family for envelope violations, deterministically.

    Up to ``budget`` candidates are simulated and checked against the
    certificate; candidates with negative margin are collected and the
    minimal-margin candidate reported.  Candidate order is deterministic
    and results merge by (margin, index), so the outcome is reproducible
    regardless of the thread count (``IPSS_LAB_THREADS``).
    """
    if budget < 1:
        raise ParameterError("budget must be at least 1")
    candidates = []
    for idx, cand in enumerate(_family_candidates(family)):
        if idx >= budget:
            break
        candidates.append((idx,) + cand)

    def evaluate(entry):
        idx, t0, xi, u, step_hint, t_end, desc = entry
        use_step = step_hint if step_hint is not None else step
        xi_vec = np.atleast_1d(np.asarray(xi, dtype=float))
        traj = simulate(sys, t0, xi_vec, u, t_end, use_step)
        report = check_envelope(traj, cert, u, float(np.linalg.norm(xi_vec)),
                                t0, tolerance)
        peak = float(np.max(traj.norms()))
        return {
            "index": idx,
            "t0": float(t0),
            "xi": [float(v) for v in xi_vec],
            "input_ref": desc,
            "margin": report.margin,
            "worst_time": report.worst_time,
            "peak_state_norm": peak,
            "satisfied": report.satisfied,
            "measure": report.measure,
        }

    n_threads = max(1, int(os.environ.get("IPSS_LAB_THREADS", "1")))
    if n_threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(evaluate, candidates))
    else:
        results = [evaluate(c) for c in candidates]
    results.sort(key=lambda r: r["index"])

    worst = min(results, key=lambda r: (r["margin"], r["index"])) if results else None
    violations = tuple(r for r in results if r["margin"] < 0.0)
    return FalsificationReport(
        worst=worst,
        violations=violations,
        n_evaluated=len(results),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# serialization


def certificate_to_json(cert: Certificate, s_grid=None, t_grid=None,
                        gain_grid=None) -> dict:
    """JSON form with embedded function specs.

    Gains without closed-form specs are sampled on ``gain_grid`` (and the
    decay bound on ``s_grid x t_grid``); reloading reproduces evaluations
    through the stored tables exactly.
    """
    out = {"kind": cert.kind}
    if cert.beta is not None:
        out["beta"] = klbound_to_spec(cert.beta, s_grid=s_grid, t_grid=t_grid)
    if cert.gamma is not None:
        out["gamma"] = monotone_to_spec(cert.gamma, sample_grid=gain_grid)
    if cert.rho is not None:
        out["rho"] = monotone_to_spec(cert.rho, sample_grid=gain_grid)
    if cert.T is not None:
        out["T"] = float(cert.T)
    if cert.urls_epsilon is not None:
        out["urls_epsilon"] = monotone_to_spec(cert.urls_epsilon, sample_grid=gain_grid)
    return out


def certificate_from_json(d: dict) -> Certificate:
    return Certificate(
        kind=d["kind"],
        beta=klbound_from_spec(d["beta"]) if "beta" in d else None,
        gamma=monotone_from_spec(d["gamma"]) if "gamma" in d else None,
        rho=monotone_from_spec(d["rho"]) if "rho" in d else None,
        T=float(d["T"]) if "T" in d else None,
        urls_epsilon=monotone_from_spec(d["urls_epsilon"]) if "urls_epsilon" in d else None,
    )
