"""Piecewise-constant input signals and the three input measures.

A signal is a vector-valued, right-open piecewise-constant function on a
finite horizon, identically zero beyond it.  That representation makes all
three input measures exact: the supremum norm, the energy integral of a
gauge applied to the amplitude, and the moving-average power norm (the
supremum over fixed-length windows of the windowed energy divided by the
window length).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .comparison_functions import MonotoneFn
from .errors import ParameterError

__all__ = [
    "Signal",
    "NormValue",
    "make_signal",
    "constant_signal",
    "zero_signal",
    "concat",
    "restrict",
    "sup_norm",
    "rho_energy",
    "avg_power_norm",
    "pulse_train",
    "cumulative_energy",
    "signal_to_json",
    "signal_from_json",
    "signal_to_csv",
]


@dataclass(frozen=True)
class Signal:
    """Right-open piecewise-constant input on ``[0, horizon)``, zero beyond.

    ``breakpoints[i]`` starts the piece holding ``values[i]``; the first
    breakpoint is 0 and the last is below the horizon.  Evaluation at any
    ``t >= horizon`` gives the zero vector.
    """

    breakpoints: np.ndarray  # shape (k,)
    values: np.ndarray       # shape (k, dim)
    horizon: float
    dim: int

    def __post_init__(self):
        bps = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        if bps.ndim != 1 or bps.size == 0:
            raise ParameterError("signal needs at least one breakpoint")
        if bps[0] != 0.0:
            raise ParameterError("first breakpoint must be 0")
        if np.any(np.diff(bps) <= 0):
            raise ParameterError("breakpoints must be strictly increasing")
        if vals.shape != (bps.size, self.dim):
            raise ParameterError(
                f"values shape {vals.shape} does not match {bps.size} pieces of dim {self.dim}"
            )
        if not np.all(np.isfinite(vals)):
            raise ParameterError("signal values must be finite")
        if self.horizon < bps[-1]:
            raise ParameterError("horizon must not precede the last breakpoint")

    def eval(self, t: float) -> np.ndarray:
        """Value at time ``t`` (zero vector for ``t >= horizon``)."""
        if t < 0:
            raise ParameterError(f"signal evaluated at negative time {t}")
        if t >= self.horizon:
            return np.zeros(self.dim)
        idx = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[idx].copy()

    def pieces(self):
        """Yield ``(start, end, value)`` for every piece, ending at the horizon."""
        ends = np.append(self.breakpoints[1:], self.horizon)
        for start, end, val in zip(self.breakpoints, ends, self.values):
            if end > start:
                yield float(start), float(end), val


def _normalize_pieces(pieces, dim: int, horizon: float) -> Signal:
    """Assemble a Signal from (t, value) pairs, deduping and ordering."""
    pieces = sorted(pieces, key=lambda p: p[0])
    bps, vals = [], []
    for t, v in pieces:
        if t >= horizon and t > 0:
            continue
        if bps and t == bps[-1]:
            vals[-1] = v  # later entry wins at an exact tie
            continue
        bps.append(t)
        vals.append(np.asarray(v, dtype=float).reshape(dim))
    if not bps or bps[0] != 0.0:
        bps.insert(0, 0.0)
        vals.insert(0, np.zeros(dim))
    # drop consecutive duplicates of identical values
    keep_b, keep_v = [bps[0]], [vals[0]]
    for t, v in zip(bps[1:], vals[1:]):
        if np.array_equal(v, keep_v[-1]):
            continue
        keep_b.append(t)
        keep_v.append(v)
    return Signal(
        breakpoints=np.asarray(keep_b, dtype=float),
        values=np.asarray(keep_v, dtype=float),
        horizon=float(horizon),
        dim=dim,
    )


def make_signal(pieces: Sequence[tuple], horizon: float, dim: Optional[int] = None) -> Signal:
    """Build a signal from ``(t, vector)`` pairs; scalars are wrapped to dim 1."""
    if not pieces:
        return zero_signal(dim or 1, horizon)
    first_v = np.atleast_1d(np.asarray(pieces[0][1], dtype=float))
    dim = dim or first_v.size
    norm_pieces = [(float(t), np.atleast_1d(np.asarray(v, dtype=float))) for t, v in pieces]
    return _normalize_pieces(norm_pieces, dim, horizon)


def constant_signal(value, horizon: float) -> Signal:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    return Signal(
        breakpoints=np.array([0.0]),
        values=v.reshape(1, -1),
        horizon=float(horizon),
        dim=v.size,
    )


def zero_signal(dim: int, horizon: float = 0.0) -> Signal:
    return Signal(
        breakpoints=np.array([0.0]),
        values=np.zeros((1, dim)),
        horizon=float(max(horizon, 0.0)),
        dim=dim,
    )


@dataclass(frozen=True)
class NormValue:
    """A computed input measure; infinity is carried as an explicit flag."""

    value: float
    diverged: bool = False
    witness: Optional[tuple] = None

    def __post_init__(self):
        if self.diverged != math.isinf(self.value):
            raise ParameterError("diverged flag must match infinite value")


def concat(u: Signal, v: Signal, tau: float) -> Signal:
    """Concatenation: equals ``u`` on ``[0, tau)`` and ``v`` from ``tau`` on."""
    if u.dim != v.dim:
        raise ParameterError(f"dimension mismatch: {u.dim} vs {v.dim}")
    if tau < 0:
        raise ParameterError(f"concatenation time must be nonnegative, got {tau}")
    pieces = []
    for start, end, val in u.pieces():
        if start < tau:
            pieces.append((start, val))
    if u.horizon < tau:
        pieces.append((u.horizon, np.zeros(u.dim)))  # u's zero tail up to tau
    pieces.append((tau, v.eval(tau)))
    for start, _end, val in v.pieces():
        if start > tau:
            pieces.append((start, val))
    # beyond tau the result is v, zero once past v's horizon; below tau it is
    # u, zero once past u's horizon
    horizon = max(min(u.horizon, tau), v.horizon if v.horizon > tau else 0.0)
    return _normalize_pieces(pieces, u.dim, max(horizon, 0.0))


def restrict(u: Signal, a: float, b: float) -> Signal:
    """The signal coinciding with ``u`` on ``[a, b)`` and zero elsewhere."""
    if not (0 <= a <= b):
        raise ParameterError(f"invalid restriction interval [{a}, {b}]")
    pieces = [(0.0, np.zeros(u.dim))]
    for start, end, val in u.pieces():
        lo, hi = max(start, a), min(end, b)
        if hi > lo:
            pieces.append((lo, val))
            pieces.append((hi, np.zeros(u.dim)))
    horizon = min(b, u.horizon)
    return _normalize_pieces(pieces, u.dim, max(horizon, 0.0))


def _overlapping_pieces(u: Signal, a: float, b: float):
    for start, end, val in u.pieces():
        lo, hi = max(start, a), min(end, b)
        if hi > lo:
            yield lo, hi, val


def sup_norm(u: Signal, interval: Optional[tuple] = None) -> NormValue:
    """Essential supremum of ``|u|`` (Euclidean) over ``[a, b]``.

    Exact for piecewise-constant signals: the maximum over pieces with
    positive-measure overlap.  Beyond the horizon the signal is zero.
    """
    a, b = interval if interval is not None else (0.0, u.horizon)
    if a > b:
        raise ParameterError(f"interval start {a} exceeds end {b}")
    if a == b:
        val = float(np.linalg.norm(u.eval(a)))
        return NormValue(value=val, witness=(a, a))
    best, wit = 0.0, None
    for lo, hi, val in _overlapping_pieces(u, a, b):
        mag = float(np.linalg.norm(val))
        if mag > best:
            best, wit = mag, (lo, hi)
    return NormValue(value=best, witness=wit)


def rho_energy(u: Signal, rho: MonotoneFn, interval: Optional[tuple] = None) -> NormValue:
    """Energy integral of ``rho(|u|)`` over the interval; exact by piece sums."""
    a, b = interval if interval is not None else (0.0, u.horizon)
    if a > b:
        raise ParameterError(f"interval start {a} exceeds end {b}")
    total = 0.0
    for lo, hi, val in _overlapping_pieces(u, a, b):
        total += float(rho.eval(float(np.linalg.norm(val)))) * (hi - lo)
    return NormValue(value=total, witness=(a, b))


def cumulative_energy(u: Signal, rho: Optional[MonotoneFn] = None):
    """Knots and cumulative values of ``t -> integral_0^t rho(|u|)``.

    The cumulative integral is piecewise linear with knots at the signal
    breakpoints and the horizon, so ``np.interp`` on the returned arrays
    evaluates it exactly at any time.
    """
    knots = [0.0]
    cum = [0.0]
    for start, end, val in u.pieces():
        mag = float(np.linalg.norm(val))
        rate = float(rho.eval(mag)) if rho is not None else mag
        knots.append(end)
        cum.append(cum[-1] + rate * (end - start))
    if knots[-1] < u.horizon:
        knots.append(u.horizon)
        cum.append(cum[-1])
    return np.asarray(knots), np.asarray(cum)


def avg_power_norm(u: Signal, rho: MonotoneFn, T: float) -> NormValue:
    """Moving-average power norm: sup over length-``T`` windows of energy / T.

    For piecewise-constant inputs the windowed integral is piecewise affine
    in the window end time, so the supremum is attained at a window end in
    ``{breakpoints} union {breakpoints + T}``; those candidates are
    enumerated exactly.  The witness is the attaining window.
    """
    if not (T > 0):
        raise ParameterError(f"window length must be positive, got {T}")
    knots, cum = cumulative_energy(u, rho)

    def windowed(t_end: float) -> float:
        lo = max(t_end - T, 0.0)
        return float(np.interp(t_end, knots, cum, right=cum[-1])
                     - np.interp(lo, knots, cum, right=cum[-1]))

    candidates = set()
    for b in knots:
        candidates.add(float(b))
        candidates.add(float(b) + T)
    best_val, best_t = 0.0, 0.0
    for t_end in sorted(candidates):
        w = windowed(t_end)
        if w > best_val:
            best_val, best_t = w, t_end
    return NormValue(
        value=best_val / T,
        witness=(max(best_t - T, 0.0), best_t),
    )


def pulse_train(tau: float, count: int) -> Signal:
    """Scalar pulse train: value ``k**2`` on ``[k*tau, k*tau + 1/k)``.

    Pulses shrink in duration while growing quadratically in amplitude, so
    the sup norm and energy diverge with ``count`` while the square-root
    moving-average power stays bounded.  Horizon is ``count*tau + 1``.
    """
    if tau < 1.0:
        raise ParameterError(f"pulse spacing must be >= 1, got {tau}")
    if count < 1:
        raise ParameterError(f"pulse count must be >= 1, got {count}")
    pieces = [(0.0, np.zeros(1))]
    for k in range(1, count + 1):
        start = k * tau
        end = k * tau + 1.0 / k
        pieces.append((start, np.array([float(k * k)])))
        pieces.append((end, np.zeros(1)))
    return _normalize_pieces(pieces, 1, count * tau + 1.0)


# ---------------------------------------------------------------------------
# serialization


def signal_to_json(u: Signal) -> dict:
    return {
        "dim": u.dim,
        "horizon": float(u.horizon),
        "pieces": [
            {"t": float(t), "v": [float(x) for x in v]}
            for t, v in zip(u.breakpoints, u.values)
        ],
    }


def signal_from_json(d: dict) -> Signal:
    dim = int(d["dim"])
    pieces = [(float(p["t"]), np.asarray(p["v"], dtype=float)) for p in d["pieces"]]
    return _normalize_pieces(pieces, dim, float(d["horizon"]))


def signal_to_csv(u: Signal, times: Sequence[float], path) -> None:
    """Sample the signal at ``times`` and write columns ``t, v_1..v_m``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"v_{i + 1}" for i in range(u.dim)])
        for t in times:
            row = [repr(float(t))] + [repr(float(x)) for x in u.eval(float(t))]
            writer.writerow(row)
