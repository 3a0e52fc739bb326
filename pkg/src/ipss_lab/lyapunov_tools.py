"""Dini derivatives, Lyapunov-form checking, and power-gain synthesis.

The centerpiece is the construction of a smooth rescaling ``kappa`` from a
decay gauge ``sigma``:

    a(tau)   = (2/pi) * integral_0^tau min(s, sigma(s)) / (1 + s^2) ds
    kappa(q) = exp(2 * integral_1^q dtau / a(tau))

``kappa`` is strictly increasing and convex with ``kappa(1) = 1`` and
``kappa'(s) * sigma(s) >= 2 * kappa(s)``; those three facts are what the
moving-average power bound needs.  Because ``2/a`` is non-integrable at 0,
``kappa`` is tabulated on ``[q_min, q_max]`` in log-log space and extended
below ``q_min`` by log-linear extrapolation limited to one decade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .comparison_functions import (
    KLBound,
    MonotoneFn,
    apply_inverse,
)
from .errors import (
    CandidateError,
    NumericsError,
    ParameterError,
    PlanError,
    RangeError,
)
from .simulator import SystemDef

__all__ = [
    "LyapunovCandidate",
    "DissipationSpec",
    "KappaBundle",
    "SamplingPlan",
    "ViolationReport",
    "dini_derivative",
    "make_plan",
    "check_dissipation_form",
    "check_implication_form",
    "check_iiss_form",
    "build_kappa",
    "ipss_gains_from_dissipation",
    "abs_candidate",
    "kappa_bundle_to_json",
    "kappa_bundle_from_json",
]


@dataclass(frozen=True)
class LyapunovCandidate:
    """A locally Lipschitz candidate ``V(t, x)`` with sandwich bounds.

    ``alpha1(|x|) <= eval(t, x) <= alpha2(|x|)`` is the declared sandwich;
    it is an obligation checked by sampling, not enforced here.
    """

    eval: Callable
    alpha1: MonotoneFn
    alpha2: MonotoneFn
    lipschitz_hint: Optional[Callable] = None
    name: str = ""


@dataclass(frozen=True)
class DissipationSpec:
    """Gain pair of a dissipation-form derivative bound.

    The bound reads ``D+ V <= -alpha4(|x|) + chi4(|u|)`` everywhere; both
    gains are class K-infinity.
    """

    alpha4: MonotoneFn
    chi4: MonotoneFn

    def __post_init__(self):
        for name, f in (("alpha4", self.alpha4), ("chi4", self.chi4)):
            if f.class_tag != "Kinf":
                raise ParameterError(f"{name} must be class Kinf, got {f.class_tag}")


def dini_derivative(V: LyapunovCandidate, sys: SystemDef, t: float, xi, mu,
                    h0: float = 1e-3, levels: int = 8) -> float:
    """Upper Dini derivative of ``V`` along the field at ``(t, xi, mu)``.

    Evaluates the forward difference quotient at ``h0 * 2**-j`` for
    ``j = 0..levels-1`` and returns the maximum over the last half of the
    schedule, a consistent upper-envelope surrogate for the limsup when
    ``V`` is locally Lipschitz.
    """
    if h0 <= 0:
        raise ParameterError(f"h0 must be positive, got {h0}")
    if levels < 3:
        raise ParameterError(f"need at least 3 levels, got {levels}")
    xi = np.asarray(xi, dtype=float).reshape(sys.n)
    mu = np.asarray(mu, dtype=float).reshape(sys.m)
    fval = np.asarray(sys.rhs(t, xi, mu), dtype=float)
    v0 = float(V.eval(t, xi))
    if not math.isfinite(v0):
        raise CandidateError(f"candidate evaluation is nonfinite at ({t}, {xi})")
    quotients = []
    for j in range(levels):
        h = h0 * (2.0 ** (-j))
        v1 = float(V.eval(t + h, xi + h * fval))
        if not math.isfinite(v1):
            raise CandidateError(f"candidate evaluation is nonfinite at ({t + h}, {xi + h * fval})")
        quotients.append((v1 - v0) / h)
    tail = math.ceil(levels / 2)
    return max(quotients[levels - tail:])


# ---------------------------------------------------------------------------
# sampled inequality checks


@dataclass(frozen=True)
class SamplingPlan:
    """Deterministic (t, x, u) sample set for derivative-bound checks."""

    times: tuple
    states: tuple          # tuple of n-vectors (as tuples)
    inputs: tuple          # tuple of m-vectors (as tuples)
    seed: int
    h0: float = 1e-3
    levels: int = 8


def make_plan(n: int, m: int, times: Sequence[float], radii: Sequence[float],
              dirs_per_radius: int, mu_radii: Sequence[float],
              mu_dirs_per_radius: int, seed: int,
              h0: float = 1e-3, levels: int = 8) -> SamplingPlan:
    """Log-radii-times-random-directions sampling plan with explicit seed."""
    rng = np.random.default_rng(seed)
    states = []
    for r in radii:
        for _ in range(dirs_per_radius):
            v = rng.standard_normal(n)
            nv = np.linalg.norm(v)
            v = v / nv if nv > 0 else np.eye(n)[0]
            states.append(tuple(float(x) for x in (r * v)))
    inputs = [tuple(0.0 for _ in range(m))]
    for r in mu_radii:
        for _ in range(mu_dirs_per_radius):
            v = rng.standard_normal(m)
            nv = np.linalg.norm(v)
            v = v / nv if nv > 0 else np.eye(m)[0]
            inputs.append(tuple(float(x) for x in (r * v)))
    return SamplingPlan(
        times=tuple(float(t) for t in times),
        states=tuple(states),
        inputs=tuple(inputs),
        seed=seed,
        h0=h0,
        levels=levels,
    )


@dataclass(frozen=True)
class ViolationReport:
    """Outcome of a sampled derivative-bound check; empty entries = pass."""

    entries: tuple   # of dicts {t, xi, mu, lhs, rhs, gap}
    n_checked: int
    margin_mode: str

    @property
    def passed(self) -> bool:
        return len(self.entries) == 0

    def to_json(self) -> list:
        return [dict(e) for e in self.entries]


def _margin_at(margin, lhs: float) -> float:
    if margin is not None:
        return float(margin)
    return 1e-3 * (1.0 + abs(lhs))


def _run_check(V, sys, plan, rhs_bound, margin, condition=None) -> ViolationReport:
    disc = set(float(d) for d in sys.discontinuity_times)
    for t in plan.times:
        if float(t) in disc:
            raise PlanError(f"plan time {t} is a declared discontinuity time")
    violations = []
    checked = 0
    for t in plan.times:
        for xi in plan.states:
            for mu in plan.inputs:
                xi_a = np.asarray(xi)
                mu_a = np.asarray(mu)
                if condition is not None and not condition(xi_a, mu_a):
                    continue
                checked += 1
                lhs = dini_derivative(V, sys, t, xi_a, mu_a, plan.h0, plan.levels)
                rhs = rhs_bound(xi_a, mu_a)
                gap = lhs - rhs
                if gap > _margin_at(margin, lhs):
                    violations.append({
                        "t": float(t),
                        "xi": [float(v) for v in xi],
                        "mu": [float(v) for v in mu],
                        "lhs": float(lhs),
                        "rhs": float(rhs),
                        "gap": float(gap),
                    })
    return ViolationReport(
        entries=tuple(violations),
        n_checked=checked,
        margin_mode="explicit" if margin is not None else "adaptive",
    )


def check_dissipation_form(V: LyapunovCandidate, sys: SystemDef, spec: DissipationSpec,
                           plan: SamplingPlan, margin: Optional[float] = None) -> ViolationReport:
    """Check ``D+ V <= -alpha4(|x|) + chi4(|u|)`` over the sampling plan.

    ``margin=None`` uses the adaptive default ``1e-3 * (1 + |D+ V|)`` that
    swallows the finite-difference bias of the Dini estimate.
    """

    def rhs_bound(xi, mu):
        return -float(spec.alpha4.eval(float(np.linalg.norm(xi)))) \
            + float(spec.chi4.eval(float(np.linalg.norm(mu))))

    return _run_check(V, sys, plan, rhs_bound, margin)


def check_implication_form(V: LyapunovCandidate, sys: SystemDef, alpha3: MonotoneFn,
                           chi3: MonotoneFn, plan: SamplingPlan,
                           margin: Optional[float] = None) -> ViolationReport:
    """Check ``D+ V <= -alpha3(|x|)`` wherever ``|x| >= chi3(|u|)``."""

    def rhs_bound(xi, mu):
        return -float(alpha3.eval(float(np.linalg.norm(xi))))

    def condition(xi, mu):
        return float(np.linalg.norm(xi)) >= float(chi3.eval(float(np.linalg.norm(mu))))

    return _run_check(V, sys, plan, rhs_bound, margin, condition)


def check_iiss_form(V: LyapunovCandidate, sys: SystemDef, alpha5: MonotoneFn,
                    chi5: MonotoneFn, plan: SamplingPlan,
                    margin: Optional[float] = None) -> ViolationReport:
    """Check ``D+ V <= -alpha5(|x|) + chi5(|u|)`` with merely positive alpha5."""

    def rhs_bound(xi, mu):
        return -float(alpha5.eval(float(np.linalg.norm(xi)))) \
            + float(chi5.eval(float(np.linalg.norm(mu))))

    return _run_check(V, sys, plan, rhs_bound, margin)


# ---------------------------------------------------------------------------
# adaptive quadrature


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 48):
    """Adaptive composite Simpson; returns the integral or raises on stall."""

    def simpson(xa, fa, xb, fb, xm, fm):
        return (xb - xa) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(xa, fa, xb, fb, xm, fm, whole, tol_here, depth):
        xl = 0.5 * (xa + xm)
        xr = 0.5 * (xm + xb)
        fl = f(xl)
        fr = f(xr)
        left = simpson(xa, fa, xm, fm, xl, fl)
        right = simpson(xm, fm, xb, fb, xr, fr)
        err = left + right - whole
        if abs(err) <= 15.0 * tol_here or depth >= max_depth:
            if depth >= max_depth and abs(err) > 15.0 * max(tol_here, 1e-300):
                raise NumericsError(
                    f"quadrature stalled on [{xa}, {xb}] with error estimate {err}"
                )
            return left + right + err / 15.0
        return (recurse(xa, fa, xm, fm, xl, fl, left, tol_here / 2.0, depth + 1)
                + recurse(xm, fm, xb, fb, xr, fr, right, tol_here / 2.0, depth + 1))

    fa, fb = f(a), f(b)
    xm = 0.5 * (a + b)
    fm = f(xm)
    whole = simpson(a, fa, b, fb, xm, fm)
    scale = max(abs(whole), 1e-300)
    return recurse(a, fa, b, fb, xm, fm, whole, max(tol * scale, 1e-300), 0)


# ---------------------------------------------------------------------------
# kappa construction


@dataclass(frozen=True)
class KappaBundle:
    """Tabulated ``kappa`` rescaling built from a decay gauge ``sigma``.

    All evaluation goes through the stored log-log tables, so a bundle
    round-trips exactly through JSON.  ``kappa`` evaluates to 0 below the
    one-decade extrapolation floor; inverse queries outside the covered
    range raise :class:`RangeError` naming the extension needed.
    """

    sigma: Optional[MonotoneFn]
    a_fn: MonotoneFn
    kappa: MonotoneFn
    q_min: float
    q_max: float
    quadrature_tol: float
    qs: np.ndarray = field(repr=False)
    ln_qs: np.ndarray = field(repr=False)
    a_vals: np.ndarray = field(repr=False)
    ln_kappa: np.ndarray = field(repr=False)

    def kappa_eval(self, q):
        return self.kappa.eval(q)

    def ln_kappa_at(self, q):
        """``ln kappa(q)`` straight from the tables; immune to underflow.

        Defined on ``[q_min/10, q_max]`` like the regular evaluation but
        without the conversion through ``exp``.
        """
        q_arr = np.asarray(q, dtype=float)
        if np.any(q_arr <= 0):
            raise ParameterError("ln kappa needs strictly positive arguments")
        if np.any(q_arr > self.qs[-1] * (1.0 + 1e-12)):
            raise RangeError(f"ln kappa beyond q_max={self.q_max:.3e}")
        lq = np.log(q_arr)
        slope0 = 2.0 * self.qs[0] / self.a_vals[0]
        out = np.where(
            lq < self.ln_qs[0],
            self.ln_kappa[0] + slope0 * (lq - self.ln_qs[0]),
            np.interp(lq, self.ln_qs, self.ln_kappa),
        )
        return float(out) if np.ndim(q) == 0 else out

    def kappa_prime(self, q):
        """Analytic derivative from the tables: ``kappa'(q) = 2*kappa(q)/a(q)``."""
        q_arr = np.asarray(q, dtype=float)
        out = 2.0 * np.asarray(self.kappa.eval(q_arr)) / np.asarray(self.a_fn.eval(q_arr))
        return float(out) if np.ndim(q) == 0 else out

    def kappa_inv(self, y):
        """Exact inverse of the tabulated ``kappa`` (closed form per cell)."""
        scalar = np.ndim(y) == 0
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty_like(y_arr)
        slope0 = 2.0 * self.qs[0] / self.a_vals[0]
        slopes = np.diff(self.ln_kappa) / np.diff(self.ln_qs)
        for i, yv in enumerate(y_arr):
            if yv < 0:
                raise ParameterError(f"cannot invert kappa at negative value {yv}")
            if yv == 0.0:
                out[i] = 0.0
                continue
            ln_y = math.log(yv)
            if ln_y < self.ln_kappa[0]:
                ln_q = self.ln_qs[0] + (ln_y - self.ln_kappa[0]) / slope0
                if ln_q < self.ln_qs[0] - math.log(10.0) - 1e-12:
                    raise RangeError(
                        f"kappa inverse at {yv} needs q below {self.q_min / 10:.3e}; "
                        f"rebuild the bundle with q_min <= {math.exp(ln_q):.3e}"
                    )
                out[i] = math.exp(ln_q)
            elif ln_y > self.ln_kappa[-1]:
                raise RangeError(
                    f"kappa inverse at {yv} exceeds kappa(q_max)={math.exp(self.ln_kappa[-1]):.3e}; "
                    f"rebuild the bundle with a larger q_max than {self.q_max:.3e}"
                )
            else:
                j = int(np.searchsorted(self.ln_kappa, ln_y, side="right")) - 1
                j = min(max(j, 0), self.ln_kappa.size - 2)
                out[i] = math.exp(self.ln_qs[j] + (ln_y - self.ln_kappa[j]) / slopes[j])
        return float(out[0]) if scalar else out


def _log_grid(q_min: float, q_max: float, per_decade: int) -> np.ndarray:
    """Log-spaced grid on [q_min, q_max] containing 1.0 exactly."""
    down = int(math.ceil(per_decade * math.log10(1.0 / q_min))) if q_min < 1.0 else 0
    up = int(math.ceil(per_decade * math.log10(q_max))) if q_max > 1.0 else 0
    lows = np.exp(np.linspace(math.log(q_min), 0.0, down + 1)) if down else np.array([1.0])
    highs = np.exp(np.linspace(0.0, math.log(q_max), up + 1)) if up else np.array([1.0])
    grid = np.unique(np.concatenate([lows, highs]))
    one = int(np.argmin(np.abs(grid - 1.0)))
    grid[one] = 1.0
    grid[0] = q_min
    grid[-1] = q_max
    return grid


_GL8_NODES = np.array([
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498, 0.5255324099163290,
    0.7966664774136267, 0.9602898564975363,
])
_GL8_WEIGHTS = np.array([
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763,
])


def build_kappa(sigma: MonotoneFn, q_range: tuple, quadrature_tol: float = 1e-10,
                points_per_decade: int = 160) -> KappaBundle:
    """Tabulate ``a`` and ``kappa`` for a class-Kinf gauge ``sigma``.

    ``a`` accumulates adaptive-Simpson cell integrals of
    ``(2/pi) * min(s, sigma(s)) / (1 + s^2)`` on a log grid; ``kappa``
    accumulates Gauss-Legendre cell integrals of ``2/a`` outward from 1 in
    both directions, stored as ``ln kappa`` so deep attenuation never
    underflows.  ``kappa(1) = 1`` holds exactly.
    """
    if sigma.class_tag != "Kinf":
        raise ParameterError(f"sigma must be class Kinf, got tag {sigma.class_tag}")
    q_min, q_max = float(q_range[0]), float(q_range[1])
    if not (0.0 < q_min < 1.0 < q_max):
        raise ParameterError(f"need 0 < q_min < 1 < q_max, got [{q_min}, {q_max}]")
    if quadrature_tol <= 0:
        raise ParameterError("quadrature tolerance must be positive")

    def w(s: float) -> float:
        sv = float(sigma.eval(s))
        return (2.0 / math.pi) * min(s, sv) / (1.0 + s * s)

    qs = _log_grid(q_min, q_max, points_per_decade)
    a_vals = np.empty_like(qs)
    acc = _adaptive_simpson(w, 0.0, float(qs[0]), quadrature_tol)
    a_vals[0] = acc
    for i in range(1, qs.size):
        acc += _adaptive_simpson(w, float(qs[i - 1]), float(qs[i]), quadrature_tol)
        a_vals[i] = acc
    if np.any(a_vals <= 0):
        raise NumericsError("a(tau) table contains nonpositive values; sigma may not be Kinf")

    ln_qs = np.log(qs)
    ln_a = np.log(a_vals)

    def a_of(lq: float) -> float:
        # log-log interpolation of the freshly built a-table
        if lq <= ln_qs[0]:
            # a ~ s^2-like near 0: extend with the first-cell slope
            s0 = (ln_a[1] - ln_a[0]) / (ln_qs[1] - ln_qs[0])
            return math.exp(ln_a[0] + s0 * (lq - ln_qs[0]))
        if lq >= ln_qs[-1]:
            s1 = (ln_a[-1] - ln_a[-2]) / (ln_qs[-1] - ln_qs[-2])
            return math.exp(ln_a[-1] + s1 * (lq - ln_qs[-1]))
        return math.exp(float(np.interp(lq, ln_qs, ln_a)))

    # ln kappa increments: integral of 2/a dtau = integral of 2*tau/a(tau) dlntau
    one_idx = int(np.argmin(np.abs(qs - 1.0)))
    ln_kappa = np.zeros_like(qs)
    for i in range(one_idx, qs.size - 1):
        la, lb = ln_qs[i], ln_qs[i + 1]
        mid = 0.5 * (la + lb)
        half = 0.5 * (lb - la)
        nodes = mid + half * _GL8_NODES
        vals = np.array([2.0 * math.exp(lq) / a_of(lq) for lq in nodes])
        ln_kappa[i + 1] = ln_kappa[i] + half * float(np.dot(_GL8_WEIGHTS, vals))
    for i in range(one_idx, 0, -1):
        la, lb = ln_qs[i - 1], ln_qs[i]
        mid = 0.5 * (la + lb)
        half = 0.5 * (lb - la)
        nodes = mid + half * _GL8_NODES
        vals = np.array([2.0 * math.exp(lq) / a_of(lq) for lq in nodes])
        ln_kappa[i - 1] = ln_kappa[i] - half * float(np.dot(_GL8_WEIGHTS, vals))

    return _bundle_from_tables(sigma, qs, a_vals, ln_kappa, q_min, q_max, quadrature_tol)


def _bundle_from_tables(sigma, qs, a_vals, ln_kappa, q_min, q_max, quadrature_tol) -> KappaBundle:
    ln_qs = np.log(qs)
    ln_a = np.log(a_vals)
    slope0 = 2.0 * qs[0] / a_vals[0]  # d ln(kappa) / d ln(q) at the table floor
    floor_q = q_min / 10.0

    def a_eval(q, _lq=ln_qs, _la=ln_a):
        q_arr = np.asarray(q, dtype=float)
        with np.errstate(divide="ignore"):
            lq = np.log(q_arr)
        lo_slope = (_la[1] - _la[0]) / (_lq[1] - _lq[0])
        hi_slope = (_la[-1] - _la[-2]) / (_lq[-1] - _lq[-2])
        out = np.where(
            lq <= _lq[0],
            np.exp(_la[0] + lo_slope * (lq - _lq[0])),
            np.where(
                lq >= _lq[-1],
                np.exp(_la[-1] + hi_slope * (lq - _lq[-1])),
                np.exp(np.interp(lq, _lq, _la)),
            ),
        )
        out = np.where(q_arr == 0.0, 0.0, out)
        return float(out) if np.ndim(q) == 0 else out

    def kappa_eval(q, _lq=ln_qs, _lk=ln_kappa, _s0=slope0, _floor=floor_q):
        q_arr = np.asarray(q, dtype=float)
        if np.any(q_arr > qs[-1] * (1.0 + 1e-12)):
            bad = float(np.max(q_arr))
            raise RangeError(
                f"kappa evaluated at {bad:.6e} beyond q_max={qs[-1]:.3e}; "
                f"rebuild the bundle with q_max >= {bad:.3e}"
            )
        with np.errstate(divide="ignore"):
            lq = np.log(np.maximum(q_arr, 1e-320))
        ln_k = np.where(
            lq < _lq[0],
            _lk[0] + _s0 * (lq - _lq[0]),
            np.interp(lq, _lq, _lk),
        )
        out = np.exp(ln_k)
        out = np.where(q_arr < _floor, 0.0, out)  # below the extrapolation decade
        out = np.where(q_arr == 0.0, 0.0, out)
        return float(out) if np.ndim(q) == 0 else out

    a_fn = MonotoneFn(eval=a_eval, class_tag="Kinf", domain_hint=float(qs[-1]))
    kappa_fn = MonotoneFn(
        eval=kappa_eval,
        class_tag="Kinf",
        derivative=lambda q: 2.0 * np.asarray(kappa_eval(q)) / np.asarray(a_eval(q)),
        domain_hint=float(qs[-1]),
    )
    return KappaBundle(
        sigma=sigma,
        a_fn=a_fn,
        kappa=kappa_fn,
        q_min=float(q_min),
        q_max=float(q_max),
        quadrature_tol=float(quadrature_tol),
        qs=qs,
        ln_qs=ln_qs,
        a_vals=a_vals,
        ln_kappa=ln_kappa,
    )


def kappa_bundle_to_json(bundle: KappaBundle) -> dict:
    return {
        "qs": bundle.qs.tolist(),
        "a": bundle.a_vals.tolist(),
        "kappa": np.exp(bundle.ln_kappa).tolist(),
        "ln_kappa": bundle.ln_kappa.tolist(),
        "kappa_prime": (2.0 * np.exp(bundle.ln_kappa) / bundle.a_vals).tolist(),
        "q_min": bundle.q_min,
        "q_max": bundle.q_max,
        "quadrature_tol": bundle.quadrature_tol,
    }


def kappa_bundle_from_json(d: dict) -> KappaBundle:
    qs = np.asarray(d["qs"], dtype=float)
    a_vals = np.asarray(d["a"], dtype=float)
    ln_kappa = np.asarray(d["ln_kappa"], dtype=float)
    return _bundle_from_tables(None, qs, a_vals, ln_kappa,
                               float(d["q_min"]), float(d["q_max"]),
                               float(d["quadrature_tol"]))


# ---------------------------------------------------------------------------
# gain synthesis


def ipss_gains_from_dissipation(alpha1: MonotoneFn, alpha2: MonotoneFn,
                                spec: DissipationSpec, T: float,
                                bundle: KappaBundle):
    """Synthesize the decay/gain triple certified by a dissipation pair.

    The bundle must be built from ``sigma = alpha4 o alpha2^{-1}``.  Returns
    ``(beta, gamma, rho)`` with

        beta(s, t) = alpha1^{-1}(kappa^{-1}(2 e^{-t} kappa(alpha2(s))))
        gamma(s)   = alpha1^{-1}(kappa^{-1}(2 e^T T s / (1 - e^{-T})))
        rho(s)     = kappa'(sigma^{-1}(2 chi4(s))) * chi4(s)

    ``rho`` is the power gauge to use in the moving-average norm of the
    resulting certificate.
    """
    if T <= 0:
        raise ParameterError(f"window length must be positive, got {T}")
    if bundle.sigma is None:
        raise ParameterError("bundle was reloaded without sigma; rebuild to synthesize gains")
    sigma = bundle.sigma
    gamma_scale = 2.0 * math.exp(T) * T / (1.0 - math.exp(-T))

    def beta_eval(s, t):
        s_arr = np.asarray(s, dtype=float)
        t_arr = np.asarray(t, dtype=float)
        inner = 2.0 * np.exp(-t_arr) * np.asarray(bundle.kappa.eval(alpha2.eval(s_arr)))
        q = bundle.kappa_inv(inner)
        out = apply_inverse(alpha1, q)
        return float(out) if np.ndim(out) == 0 else out

    def gamma_eval(s):
        s_arr = np.asarray(s, dtype=float)
        q = bundle.kappa_inv(gamma_scale * s_arr)
        out = apply_inverse(alpha1, q)
        return float(out) if (np.ndim(s) == 0 and np.ndim(out) == 0) else out

    def rho_eval(s):
        scalar = np.ndim(s) == 0
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        chi_vals = np.asarray([float(spec.chi4.eval(float(v))) for v in s_arr])
        out = np.zeros_like(chi_vals)
        pos = chi_vals > 0
        if np.any(pos):
            args = np.asarray([
                float(apply_inverse(sigma, 2.0 * c)) for c in chi_vals[pos]
            ])
            out[pos] = np.asarray(bundle.kappa_prime(args)) * chi_vals[pos]
        return float(out[0]) if scalar else out

    beta = KLBound(kind="general", eval2=beta_eval)
    gamma = MonotoneFn(eval=gamma_eval, class_tag="Kinf", domain_hint=alpha1.domain_hint)
    rho = MonotoneFn(eval=rho_eval, class_tag="Kinf", domain_hint=spec.chi4.domain_hint)
    return beta, gamma, rho


def abs_candidate() -> LyapunovCandidate:
    """The scalar candidate ``V(t, x) = |x|`` with identity sandwich bounds."""
    from .comparison_functions import identity_fn

    return LyapunovCandidate(
        eval=lambda t, x: float(np.linalg.norm(x)),
        alpha1=identity_fn(),
        alpha2=identity_fn(),
        lipschitz_hint=lambda R: 1.0,
        name="abs",
    )
