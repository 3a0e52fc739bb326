"""Deterministic ODE simulation with time-discontinuous dynamics.

The integrator is classic fixed-step fourth-order Runge-Kutta with one
twist: integration sub-steps never straddle an input breakpoint or a
declared discontinuity time of the dynamics.  For piecewise-constant
inputs and dynamics continuous off the declared set, the right-hand side
is smooth on every sub-interval, so the method keeps its full order.

Blow-up is modeled by a hard threshold on the state norm; exceeding it
stops integration and marks the trajectory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DynamicsError, ParameterError
from .signals import Signal, make_signal

__all__ = [
    "SystemDef",
    "Trajectory",
    "LipschitzReport",
    "simulate",
    "counterexample_system",
    "linear_test_system",
    "perturbed_decay_system",
    "lipschitz_probe",
    "check_equilibrium",
    "trajectory_to_csv",
    "SYSTEM_REGISTRY",
]

BLOWUP_THRESHOLD = 1e9


@dataclass(frozen=True)
class SystemDef:
    """Time-varying dynamics ``xdot = rhs(t, x, u)``.

    ``discontinuity_times`` samples the zero-measure set where the dynamics
    may jump in ``t``; the integrator lands on them exactly.  When
    ``lipschitz_hint`` is present, solutions are treated as unique;
    otherwise probe reports flag uniqueness as untested.
    """

    rhs: Callable
    n: int
    m: int
    discontinuity_times: tuple = ()
    lipschitz_hint: Optional[Callable] = None
    name: str = ""


@dataclass(frozen=True)
class Trajectory:
    """Simulated solution samples on a strictly increasing time grid."""

    times: np.ndarray
    states: np.ndarray
    blown_up: bool = False
    blowup_time: Optional[float] = None

    def state_at(self, t: float) -> np.ndarray:
        """State at a grid time ``t`` (must be on the grid up to rounding)."""
        tol = 1e-9 * max(1.0, abs(t))
        idx = int(np.searchsorted(self.times, t))
        for j in (idx, idx - 1):
            if 0 <= j < self.times.size and abs(float(self.times[j]) - t) <= tol:
                return self.states[j]
        raise ParameterError(f"time {t} is not on the trajectory grid")

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def _anchor_grid(t0: float, t_end: float, u: Signal, sys: SystemDef,
                 include_times: Sequence[float]) -> list:
    anchors = {float(t0), float(t_end)}
    interior = []
    interior.extend(float(b) for b in u.breakpoints)
    interior.append(float(u.horizon))
    interior.extend(float(d) for d in sys.discontinuity_times)
    interior.extend(float(x) for x in include_times)
    for x in interior:
        if t0 < x < t_end:
            anchors.add(x)
    return sorted(anchors)


def simulate(sys: SystemDef, t0: float, xi, u: Signal, t_end: float,
             step: float, include_times: Sequence[float] = (),
             blowup_threshold: float = BLOWUP_THRESHOLD) -> Trajectory:
    """Integrate ``xdot = rhs(t, x, u(t))`` from ``(t0, xi)`` to ``t_end``.

    Sub-steps are shortened so that every anchor (input breakpoint, input
    horizon, declared discontinuity, requested time) is hit exactly; the
    input is sampled at the left end of each sub-step, consistent with
    right-open piecewise-constant semantics.
    """
    if step <= 0:
        raise ParameterError(f"step must be positive, got {step}")
    if t_end <= t0:
        raise ParameterError(f"t_end {t_end} must exceed t0 {t0}")
    if t0 < 0:
        raise ParameterError(f"t0 must be nonnegative, got {t0}")
    if u.dim != sys.m:
        raise ParameterError(f"input dim {u.dim} does not match system m {sys.m}")
    xi = np.asarray(xi, dtype=float).reshape(sys.n)

    rhs = sys.rhs
    anchors = _anchor_grid(t0, t_end, u, sys, include_times)
    times = [t0]
    states = [xi.copy()]
    x = xi.copy()
    thresh2 = blowup_threshold * blowup_threshold

    for seg_a, seg_b in zip(anchors, anchors[1:]):
        span = seg_b - seg_a
        nsub = max(1, int(math.ceil(span / step - 1e-12)))
        h = span / nsub
        h2 = 0.5 * h
        h6 = h / 6.0
        u_val = u.eval(seg_a)  # constant across the whole segment
        t = seg_a
        for j in range(nsub):
            k1 = rhs(t, x, u_val)
            k2 = rhs(t + h2, x + h2 * k1, u_val)
            k3 = rhs(t + h2, x + h2 * k2, u_val)
            k4 = rhs(t + h, x + h * k3, u_val)
            x = x + h6 * (k1 + 2.0 * (k2 + k3) + k4)
            t = seg_a + (j + 1) * h if j + 1 < nsub else seg_b
            nrm2 = float(x @ x)
            if not math.isfinite(nrm2):
                raise DynamicsError(
                    f"nonfinite state update at t={t} (x={states[-1]}, u={u_val})"
                )
            times.append(t)
            states.append(x)
            if nrm2 > thresh2:
                return Trajectory(
                    times=np.asarray(times),
                    states=np.asarray(states),
                    blown_up=True,
                    blowup_time=t,
                )
    return Trajectory(times=np.asarray(times), states=np.asarray(states))


# ---------------------------------------------------------------------------
# built-in systems


def linear_test_system(lam: float) -> SystemDef:
    """Scalar testbed ``xdot = -lam*x + u``; the canonical dissipative system."""
    if lam <= 0:
        raise ParameterError(f"decay rate must be positive, got {lam}")

    def rhs(t, x, u, _lam=float(lam)):
        return -_lam * x + u

    return SystemDef(rhs=rhs, n=1, m=1, lipschitz_hint=lambda R, _l=lam: _l + 1.0,
                     name=f"linear(lam={lam})")


def counterexample_system() -> SystemDef:
    """Scalar system ``xdot = -x + (1+t)*max(u - |x|, 0)``.

    The ramp gain ``(1+t)`` makes late, short input pulses arbitrarily
    effective relative to their energy, which defeats any fixed integral or
    power gain while constant inputs stay harmless.
    """

    def rhs(t, x, u):
        return -x + (1.0 + t) * np.maximum(u - np.abs(x), 0.0)

    return SystemDef(rhs=rhs, n=1, m=1, name="counterexample")


def perturbed_decay_system() -> SystemDef:
    """Scalar disturbed contraction ``xdot = -x*(1 + 0.5*d)`` with ``|d| <= 1``."""

    def rhs(t, x, d):
        return -x * (1.0 + 0.5 * d)

    return SystemDef(rhs=rhs, n=1, m=1, lipschitz_hint=lambda R: 1.5,
                     name="perturbed_decay")


SYSTEM_REGISTRY = {
    "linear": linear_test_system,
    "counterexample": counterexample_system,
    "perturbed_decay": perturbed_decay_system,
}


def check_equilibrium(sys: SystemDef, n_samples: int = 100, t_max: float = 100.0,
                      tol: float = 1e-12) -> bool:
    """Verify ``rhs(t, 0, 0) = 0`` on sampled times (the standing assumption)."""
    zeros_x = np.zeros(sys.n)
    zeros_u = np.zeros(sys.m)
    for t in np.linspace(0.0, t_max, n_samples):
        v = np.asarray(sys.rhs(float(t), zeros_x, zeros_u), dtype=float)
        if float(np.linalg.norm(v)) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Lipschitz probes


@dataclass(frozen=True)
class LipschitzReport:
    """Empirical solution-sensitivity ratios over seeded random probes.

    ``state_ratio_max`` bounds ``|x(t; xi1) - x(t; xi2)| / |xi1 - xi2|`` and
    ``shift_ratio_max`` bounds ``|x(t+h; t0+h) - x(t; t0)| / h`` over the
    probe set.  Ratios are lower estimates of the true constants.
    """

    state_ratio_max: float
    shift_ratio_max: float
    n_valid: int
    n_blowups: int
    samples: tuple
    seed: int
    uniqueness_tested: bool

    @property
    def valid(self) -> bool:
        return self.n_blowups == 0


def _random_ball(rng, dim: int, radius: float) -> np.ndarray:
    v = rng.standard_normal(dim)
    norm = np.linalg.norm(v)
    if norm == 0:
        return np.zeros(dim)
    r = radius * rng.uniform() ** (1.0 / dim)
    return v / norm * r


def _random_disturbance(rng, dim: int, t_start: float, span: float, pieces: int) -> Signal:
    edges = t_start + span * np.arange(pieces) / pieces
    vals = [_random_ball(rng, dim, 1.0) for _ in range(pieces)]
    sig_pieces = [(0.0, np.zeros(dim))] + list(zip(edges, vals))
    return make_signal(sig_pieces, horizon=t_start + span, dim=dim)


def lipschitz_probe(sys: SystemDef, disturbance_map: Optional[Callable], R: float,
                    T: float, samples: int, seed: int, step: float = 1e-3,
                    pieces: int = 8, query_points: int = 25) -> LipschitzReport:
    """Estimate solution Lipschitz constants of the disturbed system.

    The system is driven by piecewise-constant disturbances in the unit
    ball, mapped into inputs by ``disturbance_map(t, x, d)`` (identity when
    ``None``).  Each probe draws an initial time in ``[0, T]``, two initial
    states in the radius-``R`` ball and a shift ``h`` in ``[0, 1]``, then
    measures the two sensitivity ratios along matched time grids.
    """
    if R <= 0 or T <= 0:
        raise ParameterError("R and T must be positive")
    if samples < 1:
        raise ParameterError("need at least one probe sample")

    if disturbance_map is None:
        g_sys = sys
    else:
        def g_rhs(t, x, d, _f=sys.rhs, _map=disturbance_map):
            return _f(t, x, _map(t, x, d))

        g_sys = SystemDef(rhs=g_rhs, n=sys.n, m=sys.m,
                          discontinuity_times=sys.discontinuity_times,
                          lipschitz_hint=sys.lipschitz_hint)

    rng = np.random.default_rng(seed)
    state_max = 0.0
    shift_max = 0.0
    n_blow = 0
    rows = []
    for _ in range(samples):
        t0 = float(rng.uniform(0.0, T))
        xi1 = _random_ball(rng, sys.n, R)
        xi2 = _random_ball(rng, sys.n, R)
        h = float(rng.uniform(0.0, 1.0))
        d = _random_disturbance(rng, sys.m, t0, T + h + 1.0, pieces)
        query = t0 + np.linspace(0.0, T, query_points)
        try:
            tr1 = simulate(g_sys, t0, xi1, d, t0 + T, step, include_times=query)
            tr2 = simulate(g_sys, t0, xi2, d, t0 + T, step, include_times=query)
            s_ratio = 0.0
            sep0 = float(np.linalg.norm(xi1 - xi2))
            if tr1.blown_up or tr2.blown_up:
                n_blow += 1
                rows.append((t0, float("nan"), float("nan")))
                continue
            if sep0 > 0:
                diffs = np.linalg.norm(tr1.states - tr2.states, axis=1)
                s_ratio = float(np.max(diffs)) / sep0
            h_ratio = 0.0
            if h > 1e-9:
                tr3 = simulate(g_sys, t0 + h, xi1, d, t0 + h + T, step,
                               include_times=query + h)
                if tr3.blown_up:
                    n_blow += 1
                    rows.append((t0, s_ratio, float("nan")))
                    continue
                a = np.vstack([tr1.state_at(q) for q in query])
                b = np.vstack([tr3.state_at(q + h) for q in query])
                h_ratio = float(np.max(np.linalg.norm(a - b, axis=1))) / h
            state_max = max(state_max, s_ratio)
            shift_max = max(shift_max, h_ratio)
            rows.append((t0, s_ratio, h_ratio))
        except DynamicsError:
            n_blow += 1
            rows.append((t0, float("nan"), float("nan")))
    return LipschitzReport(
        state_ratio_max=state_max,
        shift_ratio_max=shift_max,
        n_valid=samples - n_blow,
        n_blowups=n_blow,
        samples=tuple(rows),
        seed=seed,
        uniqueness_tested=g_sys.lipschitz_hint is not None,
    )


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write columns ``t, x_1..x_n`` with full float precision."""
    n = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x_{i + 1}" for i in range(n)])
        for t, row in zip(traj.times, traj.states):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
