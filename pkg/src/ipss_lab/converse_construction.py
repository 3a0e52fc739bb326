"""Sampled converse Lyapunov construction for disturbance-driven systems.

Given a system ``xdot = g(t, x, d)`` with disturbances in the closed unit
ball that is uniformly robustly asymptotically stable, the construction
builds, layer by layer,

    W_k(t0, xi) = sup_d sup_{s >= t0} e^{(s - t0)/2} G_k(rho(|x(s)|)),
    V(t0, xi)   = sum_k 2^{-k} / (1 + M_{k,k}) W_k(t0, xi),

with ``G_k(r) = max(r - 1/k, 0)``, ``rho`` a unit-Lipschitz regularization
of the inverse Sontag factor, and ``M_{R,k}`` Lipschitz bounds of ``W_k``
obtained from solution-sensitivity probes.  The supremum over disturbances
is approximated from below by a seeded batch of piecewise-constant
disturbances plus the constant extreme points, so every acceptance check
carries explicit slack.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .comparison_functions import KLBound, MonotoneFn, apply_inverse, make_table_fn
from .errors import ModelError, ParameterError
from .lyapunov_tools import LyapunovCandidate
from .signals import constant_signal, make_signal
from .simulator import SystemDef, lipschitz_probe, simulate

__all__ = [
    "DisturbedSystem",
    "ConverseConfig",
    "ConverseProbePlan",
    "ConverseReport",
    "ConverseEvaluator",
    "regularized_rho",
    "wk_estimate",
    "converse_V",
    "check_converse_properties",
    "iss_to_dissipation_candidate",
    "build_mrk_table",
    "horizon_for",
    "candidate_table_to_json",
    "candidate_table_from_json",
]


@dataclass(frozen=True)
class DisturbedSystem:
    """Dynamics ``xdot = rhs_d(t, x, d)`` driven by unit-ball disturbances.

    ``urgas_beta`` is the declared uniform decay envelope; probe
    trajectories are checked against it and a violation is a model error.
    ``urls_epsilon`` maps an initial-state radius to a uniform state bound.
    """

    rhs_d: Callable
    n: int
    m: int
    urgas_beta: KLBound
    urls_epsilon: MonotoneFn

    def as_systemdef(self) -> SystemDef:
        return SystemDef(rhs=self.rhs_d, n=self.n, m=self.m, name="disturbed")


@dataclass(frozen=True)
class ConverseConfig:
    """Sampling resolution of the construction."""

    k_max: int = 5
    disturbance_samples: int = 16
    pieces_per_horizon: int = 8
    sim_step: float = 5e-3
    seed: int = 0

    def __post_init__(self):
        if self.k_max < 1:
            raise ParameterError("k_max must be >= 1")
        if self.disturbance_samples < 1:
            raise ParameterError("disturbance_samples must be >= 1")
        if self.pieces_per_horizon < 1:
            raise ParameterError("pieces_per_horizon must be >= 1")
        if self.sim_step <= 0:
            raise ParameterError("sim_step must be positive")


def regularized_rho(theta2: MonotoneFn, grid: Sequence[float]) -> MonotoneFn:
    """Unit-Lipschitz minorant ``rho(s) = inf_r { theta2^{-1}(r) + |r - s| }``.

    Computed per grid point by golden-section search on ``[0, s]`` (values
    beyond ``s`` only increase the objective) and returned as a monotone
    table.  Satisfies ``rho <= theta2^{-1}`` and has unit Lipschitz
    constant on the grid.
    """
    if theta2.class_tag != "Kinf":
        raise ParameterError(f"theta2 must be class Kinf, got {theta2.class_tag}")
    xs = sorted(set(float(g) for g in grid))
    if xs[0] != 0.0:
        xs = [0.0] + xs

    phi = (math.sqrt(5.0) - 1.0) / 2.0

    def objective(r: float, s: float) -> float:
        return float(apply_inverse(theta2, r)) + abs(r - s)

    def golden(s: float, tol: float = 1e-10) -> float:
        a, b = 0.0, s
        if b <= tol:
            return objective(0.0, s)
        c = b - phi * (b - a)
        d = a + phi * (b - a)
        fc, fd = objective(c, s), objective(d, s)
        while (b - a) > tol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = objective(c, s)
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = objective(d, s)
        # include the endpoints: the optimum may sit at r = 0 or r = s
        return min(fc, fd, objective(0.0, s), objective(s, s))

    ys = [golden(s) for s in xs]
    ys = np.maximum.accumulate(np.asarray(ys))  # true rho is nondecreasing
    ys[0] = 0.0
    return make_table_fn(xs, ys, class_tag="Kinf")


# ---------------------------------------------------------------------------
# disturbance batches


def _extreme_disturbances(m: int) -> list:
    vecs = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        vecs.append(e.copy())
        vecs.append(-e)
    corner = np.full(m, 1.0 / math.sqrt(m))
    for c in (corner, -corner):
        if not any(np.array_equal(c, v) for v in vecs):
            vecs.append(c)
    return vecs


def disturbance_batch(m: int, count: int, t0: float, span: float, pieces: int,
                      seed: int) -> list:
    """Seeded unit-ball disturbance batch of exactly ``count`` signals.

    The constant extreme points come first, then random piecewise-constant
    signals drawn sequentially from one stream, so batches with larger
    ``count`` and the same seed are supersets.
    """
    span = max(span, 1e-9)
    batch = [constant_signal(v, t0 + span) for v in _extreme_disturbances(m)]
    batch = batch[:count]
    rng = np.random.default_rng(seed)
    while len(batch) < count:
        edges = t0 + span * np.arange(pieces) / pieces
        vals = []
        for _ in range(pieces):
            v = rng.standard_normal(m)
            nv = np.linalg.norm(v)
            v = v / nv if nv > 0 else np.zeros(m)
            vals.append(v * rng.uniform() ** (1.0 / m))
        sig_pieces = [(0.0, np.zeros(m))] + list(zip(edges, vals))
        batch.append(make_signal(sig_pieces, horizon=t0 + span, dim=m))
    return batch


def horizon_for(k: int, theta1: MonotoneFn, R: float) -> float:
    """Layer horizon ``ln(1 + k * theta1(R))``: past it the layer term is 0."""
    return math.log(1.0 + k * float(theta1.eval(R)))


def _check_urgas(traj, beta: KLBound, xi_norm: float, t0: float, slack: float = 1e-3):
    norms = traj.norms()
    bounds = np.asarray(beta.eval(xi_norm, traj.times - t0), dtype=float)
    worst = float(np.max(norms - bounds))
    if worst > slack:
        t_bad = float(traj.times[int(np.argmax(norms - bounds))])
        raise ModelError(
            f"probe trajectory violates the declared decay envelope by {worst:.3e} "
            f"at t={t_bad:.4g} (|xi|={xi_norm:.4g})"
        )


def wk_estimate(sys: DisturbedSystem, k: int, t0: float, xi, theta1: MonotoneFn,
                rho: MonotoneFn, cfg: ConverseConfig) -> float:
    """Lower estimate of the ``k``-th layer supremum at ``(t0, xi)``.

    The disturbance supremum is approximated by the seeded batch and the
    time supremum by the simulation grid over the layer horizon, so the
    estimate increases toward the true value as sampling is refined.
    """
    if k < 1:
        raise ParameterError("layer index k must be >= 1")
    xi = np.asarray(xi, dtype=float).reshape(sys.n)
    R = float(np.linalg.norm(xi))
    if R == 0.0:
        return 0.0
    span = horizon_for(k, theta1, R)
    batch = disturbance_batch(sys.m, cfg.disturbance_samples, t0, span,
                              cfg.pieces_per_horizon, cfg.seed)
    sysdef = sys.as_systemdef()
    best = 0.0
    inv_k = 1.0 / k
    for d in batch:
        traj = simulate(sysdef, t0, xi, d, t0 + span, cfg.sim_step)
        if traj.blown_up:
            raise ModelError(f"probe trajectory blew up at t={traj.blowup_time}")
        _check_urgas(traj, sys.urgas_beta, R, t0)
        rho_vals = np.asarray(rho.eval(traj.norms()), dtype=float)
        gains = np.exp(0.5 * (traj.times - t0)) * np.maximum(rho_vals - inv_k, 0.0)
        best = max(best, float(np.max(gains)))
    return best


class ConverseEvaluator:
    """Caching evaluator of the truncated layer series.

    Layer values are cached by ``(t0, state, k)`` behind a lock so the
    candidate returned by the pipeline can be queried repeatedly (and from
    threads) without resimulating.
    """

    def __init__(self, sys: DisturbedSystem, theta1: MonotoneFn, rho: MonotoneFn,
                 cfg: ConverseConfig, mrk_table: Callable):
        self.sys = sys
        self.theta1 = theta1
        self.rho = rho
        self.cfg = cfg
        self.mrk_table = mrk_table
        self._cache = {}
        self._lock = threading.Lock()
        diag = [float(mrk_table(k, k)) for k in range(1, cfg.k_max + 1)]
        if any(b < a - 1e-12 for a, b in zip(diag, diag[1:])):
            raise ParameterError("mrk_table must be nondecreasing along the diagonal")
        self.weights = [2.0 ** (-k) / (1.0 + diag[k - 1]) for k in range(1, cfg.k_max + 1)]

    def wk(self, t0: float, xi, k: int) -> float:
        key = (float(t0), tuple(float(v) for v in np.atleast_1d(xi)), int(k))
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        val = wk_estimate(self.sys, k, t0, xi, self.theta1, self.rho, self.cfg)
        with self._lock:
            self._cache[key] = val
        return val

    def value(self, t0: float, xi) -> float:
        return sum(w * self.wk(t0, xi, k)
                   for k, w in enumerate(self.weights, start=1))

    def tail_bound(self, xi) -> float:
        R = float(np.linalg.norm(np.atleast_1d(xi)))
        return 2.0 ** (-self.cfg.k_max) * float(self.theta1.eval(R))

    def alpha1_value(self, r: float) -> float:
        """Truncated lower sandwich: the series of layer gains at time 0."""
        rho_r = float(self.rho.eval(r))
        return sum(w * max(rho_r - 1.0 / k, 0.0)
                   for k, w in enumerate(self.weights, start=1))


def converse_V(sys: DisturbedSystem, t0: float, xi, theta1: MonotoneFn,
               rho: MonotoneFn, cfg: ConverseConfig,
               mrk_table: Callable) -> tuple[float, float]:
    """Truncated series value at ``(t0, xi)`` plus its geometric tail bound.

    The tail bound ``2^{-k_max} * theta1(|xi|)`` dominates the dropped
    layers regardless of the Lipschitz weights.
    """
    ev = ConverseEvaluator(sys, theta1, rho, cfg, mrk_table)
    return ev.value(t0, xi), ev.tail_bound(xi)


def build_mrk_table(sys: DisturbedSystem, theta1: MonotoneFn, cfg: ConverseConfig,
                    probe_samples: int = 10, probe_step: float = 2e-3) -> Callable:
    """Empirical Lipschitz-weight table ``(R, k) -> M_{R,k}``.

    Probes the solution sensitivity at radius ``k`` over each layer horizon,
    monotonizes by running maxima, and assembles
    ``M_{R,k} = e^{T_{R,k}/2} * Lbar(ceil(max(R,1)))``, nondecreasing in
    both arguments.
    """
    sysdef = sys.as_systemdef()
    lbar = []
    for k in range(1, cfg.k_max + 1):
        T = max(horizon_for(k, theta1, float(k)), 0.1)
        rep = lipschitz_probe(sysdef, None, R=float(k), T=T,
                              samples=probe_samples, seed=cfg.seed + 1000 + k,
                              step=probe_step)
        val = max(rep.state_ratio_max, rep.shift_ratio_max, 1e-6)
        lbar.append(val if not lbar else max(val, lbar[-1]))

    def mrk(R: float, k: int, _lbar=tuple(lbar), _t1=theta1) -> float:
        idx = min(max(int(math.ceil(max(R, 1.0))), 1), len(_lbar)) - 1
        T_Rk = horizon_for(int(k), _t1, float(R))
        return math.exp(0.5 * T_Rk) * _lbar[idx]

    return mrk


# ---------------------------------------------------------------------------
# property checks


@dataclass(frozen=True)
class ConverseProbePlan:
    """Probe set for the three converse-construction properties."""

    states: tuple = (0.5, 1.0, 3.0)
    t0_values: tuple = (0.0,)
    decay_horizon: float = 4.0
    decay_eval_points: int = 4
    constant_disturbances: tuple = (-1.0, 0.0, 1.0)
    lipschitz_pairs: int = 6
    lipschitz_radius: float = 3.0
    slack: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class ConverseReport:
    """Per-item outcomes of the sandwich / Lipschitz / decay checks."""

    sandwich_ok: bool
    lipschitz_ok: bool
    decay_ok: bool
    sandwich_rows: tuple
    lipschitz_rows: tuple
    decay_rows: tuple

    @property
    def all_ok(self) -> bool:
        return self.sandwich_ok and self.lipschitz_ok and self.decay_ok

    def to_json(self) -> dict:
        return {
            "sandwich": {"ok": self.sandwich_ok, "rows": [dict(r) for r in self.sandwich_rows]},
            "lipschitz": {"ok": self.lipschitz_ok, "rows": [dict(r) for r in self.lipschitz_rows]},
            "decay": {"ok": self.decay_ok, "rows": [dict(r) for r in self.decay_rows]},
        }


def check_converse_properties(sys: DisturbedSystem, theta1: MonotoneFn,
                              theta2: MonotoneFn, cfg: ConverseConfig,
                              plan: ConverseProbePlan,
                              rho: Optional[MonotoneFn] = None,
                              mrk_table: Optional[Callable] = None) -> ConverseReport:
    """Probe the sandwich, Lipschitz and decay properties of the construction.

    The decay check follows constant-disturbance trajectories and accepts
    ``V(t, x(t)) <= e^{-(t-t0)/2} V(t0, xi) (1 + slack)``; the slack covers
    the one-sided sampling of both sides.
    """
    if rho is None:
        top = max(plan.states) * 4.0 + 1.0
        grid = np.concatenate([[0.0], np.geomspace(1e-3, top, 200)])
        rho = regularized_rho(theta2, grid)
    if mrk_table is None:
        mrk_table = build_mrk_table(sys, theta1, cfg)
    ev = ConverseEvaluator(sys, theta1, rho, cfg, mrk_table)
    slack = plan.slack

    sandwich_rows = []
    sandwich_ok = True
    for t0 in plan.t0_values:
        for s in plan.states:
            xi = np.zeros(sys.n)
            xi[0] = s
            v = ev.value(t0, xi)
            lo = ev.alpha1_value(abs(s))
            hi = float(theta1.eval(abs(s)))
            ok = (v >= lo * (1.0 - slack) - 1e-12) and (v <= hi * (1.0 + slack) + 1e-12)
            sandwich_ok &= ok
            sandwich_rows.append({
                "t0": float(t0), "state": float(s),
                "lower": lo, "value": v, "upper": hi, "ok": ok,
            })

    lip_rows = []
    lip_ok = True
    rng = np.random.default_rng(plan.seed)
    theoretical = 1.0 + sum(
        2.0 ** (-k) * float(mrk_table(plan.lipschitz_radius, k))
        / (1.0 + float(mrk_table(k, k)))
        for k in range(1, cfg.k_max + 1)
    )
    for _ in range(plan.lipschitz_pairs):
        t_a, t_b = rng.uniform(0.0, 2.0, size=2)
        xa = rng.uniform(-plan.lipschitz_radius, plan.lipschitz_radius, size=sys.n)
        xb = rng.uniform(-plan.lipschitz_radius, plan.lipschitz_radius, size=sys.n)
        den = abs(t_a - t_b) + float(np.linalg.norm(xa - xb))
        if den < 1e-9:
            continue
        ratio = abs(ev.value(t_a, xa) - ev.value(t_b, xb)) / den
        ok = ratio <= theoretical * (1.0 + slack)
        lip_ok &= ok
        lip_rows.append({"ratio": float(ratio), "bound": float(theoretical), "ok": ok})

    decay_rows = []
    decay_ok = True
    sysdef = sys.as_systemdef()
    for t0 in plan.t0_values:
        for s in plan.states:
            xi = np.zeros(sys.n)
            xi[0] = s
            v0 = ev.value(t0, xi)
            if v0 <= 1e-12:
                continue
            for dc in plan.constant_disturbances:
                d = constant_signal(np.full(sys.m, dc), t0 + plan.decay_horizon)
                traj = simulate(sysdef, t0, xi, d, t0 + plan.decay_horizon, cfg.sim_step)
                eval_ts = np.linspace(t0, t0 + plan.decay_horizon,
                                      plan.decay_eval_points + 1)[1:]
                for te in eval_ts:
                    idx = int(np.searchsorted(traj.times, te))
                    idx = min(idx, traj.times.size - 1)
                    xt = traj.states[idx]
                    tt = float(traj.times[idx])
                    vt = ev.value(tt, xt)
                    bound = math.exp(-0.5 * (tt - t0)) * v0 * (1.0 + slack)
                    ok = vt <= bound + 1e-12
                    decay_ok &= ok
                    decay_rows.append({
                        "t0": float(t0), "state": float(s), "d": float(dc),
                        "t": tt, "value": vt, "bound": bound, "ok": ok,
                    })

    return ConverseReport(
        sandwich_ok=sandwich_ok,
        lipschitz_ok=lip_ok,
        decay_ok=decay_ok,
        sandwich_rows=tuple(sandwich_rows),
        lipschitz_rows=tuple(lip_rows),
        decay_rows=tuple(decay_rows),
    )


# ---------------------------------------------------------------------------
# pipeline entry


def iss_to_dissipation_candidate(sys: SystemDef, phi: MonotoneFn, theta1: MonotoneFn,
                                 theta2: MonotoneFn, cfg: ConverseConfig,
                                 rho_grid: Optional[Sequence[float]] = None) -> LyapunovCandidate:
    """Candidate from the closed-loop converse construction.

    Feeds the original input through ``u = d * phi(|x|)`` so disturbances
    range over the unit ball, assumes the factored decay envelope
    ``theta2(theta1(s) e^{-t})`` for the closed loop (a model obligation
    probed at every layer evaluation), and returns the truncated series as
    a candidate with its construction sandwich bounds.
    """
    if phi.class_tag != "Kinf":
        raise ParameterError(f"phi must be class Kinf, got {phi.class_tag}")

    def g_rhs(t, x, d, _f=sys.rhs, _phi=phi):
        return _f(t, x, d * float(_phi.eval(float(np.linalg.norm(x)))))

    def beta_eval(s, t, _t1=theta1, _t2=theta2):
        return _t2.eval(_t1.eval(s) * np.exp(-np.asarray(t, dtype=float)))

    urgas_beta = KLBound(kind="general", eval2=beta_eval)
    urls_eps = MonotoneFn(
        eval=lambda s, _t1=theta1, _t2=theta2: _t2.eval(_t1.eval(s)),
        class_tag="Kinf",
    )
    dsys = DisturbedSystem(rhs_d=g_rhs, n=sys.n, m=sys.m,
                           urgas_beta=urgas_beta, urls_epsilon=urls_eps)
    if rho_grid is None:
        rho_grid = np.concatenate([[0.0], np.geomspace(1e-3, 100.0, 240)])
    rho = regularized_rho(theta2, rho_grid)
    mrk = build_mrk_table(dsys, theta1, cfg)
    ev = ConverseEvaluator(dsys, theta1, rho, cfg, mrk)

    # lower sandwich as a monotone table of the truncated layer series; the
    # series is piecewise linear with kinks at the rho-table nodes and the
    # layer activation radii, so sampling exactly there makes the table exact
    kinks = [float(apply_inverse(rho, 1.0 / k)) for k in range(1, cfg.k_max + 1)]
    r_grid = np.unique(np.concatenate([np.asarray(rho_grid, dtype=float), kinks]))
    a1_vals = np.maximum.accumulate([ev.alpha1_value(float(r)) for r in r_grid])
    alpha1 = make_table_fn(r_grid, a1_vals, class_tag="Kinf")

    def candidate_eval(t, x, _ev=ev):
        try:
            return _ev.value(float(t), np.atleast_1d(x))
        except ModelError as exc:
            raise ModelError(
                f"closed-loop decay envelope failed; the supplied gain phi is "
                f"inadequate for this system ({exc})"
            ) from exc

    return LyapunovCandidate(
        eval=candidate_eval,
        alpha1=alpha1,
        alpha2=theta1,
        lipschitz_hint=None,
        name="converse_series",
    )


# ---------------------------------------------------------------------------
# table export of a sampled candidate


def candidate_table_to_json(candidate: LyapunovCandidate, t_grid: Sequence[float],
                            x_grid: Sequence[float]) -> dict:
    """Sample a scalar candidate on a (t, x) grid for reuse elsewhere.

    Only scalar state grids are supported; the export carries the sandwich
    bounds as table specs over the same state grid.
    """
    from .comparison_functions import monotone_to_spec

    t_grid = [float(t) for t in t_grid]
    x_grid = [float(x) for x in x_grid]
    values = [[float(candidate.eval(t, np.array([x]))) for x in x_grid] for t in t_grid]
    abs_grid = sorted(set(abs(x) for x in x_grid) | {0.0})
    return {
        "t_grid": t_grid,
        "x_grid": x_grid,
        "values": values,
        "alpha1": monotone_to_spec(candidate.alpha1, sample_grid=abs_grid),
        "alpha2": monotone_to_spec(candidate.alpha2, sample_grid=abs_grid),
        "name": candidate.name,
    }


def candidate_table_from_json(d: dict) -> LyapunovCandidate:
    """Rebuild a table candidate; evaluation is bilinear on the stored grid."""
    from .comparison_functions import monotone_from_spec

    t_grid = np.asarray(d["t_grid"], dtype=float)
    x_grid = np.asarray(d["x_grid"], dtype=float)
    values = np.asarray(d["values"], dtype=float)

    def _eval(t, x, _t=t_grid, _x=x_grid, _v=values):
        xv = float(np.atleast_1d(x)[0])
        ti = int(np.clip(np.searchsorted(_t, t) - 1, 0, _t.size - 2))
        xi = int(np.clip(np.searchsorted(_x, xv) - 1, 0, _x.size - 2))
        wt = np.clip((t - _t[ti]) / (_t[ti + 1] - _t[ti]), 0.0, 1.0)
        wx = np.clip((xv - _x[xi]) / (_x[xi + 1] - _x[xi]), 0.0, 1.0)
        return float(
            _v[ti, xi] * (1 - wt) * (1 - wx) + _v[ti + 1, xi] * wt * (1 - wx)
            + _v[ti, xi + 1] * (1 - wt) * wx + _v[ti + 1, xi + 1] * wt * wx
        )

    return LyapunovCandidate(
        eval=_eval,
        alpha1=monotone_from_spec(d["alpha1"]),
        alpha2=monotone_from_spec(d["alpha2"]),
        name=d.get("name", "table"),
    )
