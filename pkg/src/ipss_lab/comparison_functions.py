"""Algebra of scalar comparison functions.

Comparison functions are the nonnegative, zero-at-zero scalar maps used
throughout stability analysis: class P (positive definite), class K
(additionally strictly increasing) and class K-infinity (additionally
unbounded).  This module provides constructors, composition, numeric
monotone inversion, sampled class verification, and the exponential
Sontag factorization used by the converse construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConvergenceError, ParameterError, RangeError

__all__ = [
    "MonotoneFn",
    "KLBound",
    "ClassReport",
    "identity_fn",
    "make_power_fn",
    "make_table_fn",
    "scale_fn",
    "compose",
    "invert",
    "apply_inverse",
    "inverse_fn",
    "verify_class",
    "sontag_factorize_exponential",
    "monotone_to_spec",
    "monotone_from_spec",
    "klbound_to_spec",
    "klbound_from_spec",
]

_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class MonotoneFn:
    """A scalar comparison function on the nonnegative reals.

    ``eval`` maps nonnegative reals to nonnegative reals and should accept
    numpy arrays as well as scalars.  ``derivative`` and ``inverse`` are
    optional analytic companions; numeric fallbacks exist for both.
    ``class_tag`` is one of ``"P"``, ``"K"`` or ``"Kinf"``.
    """

    eval: Callable
    class_tag: str = "K"
    derivative: Optional[Callable] = None
    inverse: Optional[Callable] = None
    domain_hint: float = 1e6
    spec: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        if self.class_tag not in ("P", "K", "Kinf"):
            raise ParameterError(f"unknown class tag {self.class_tag!r}")
        if self.class_tag in ("K", "Kinf"):
            v0 = float(self.eval(0.0))
            if abs(v0) > _ZERO_TOL:
                raise ParameterError(
                    f"class-{self.class_tag} function must vanish at 0, got {v0!r}"
                )

    def __call__(self, s):
        return self.eval(s)


@dataclass(frozen=True)
class KLBound:
    """A two-argument decay bound: class K in ``s``, decreasing to 0 in ``t``.

    The exponential variant ``K*s*exp(-lam*t)`` is the only one that the
    exact window-bound transformer accepts; everything else is handled
    opaquely through ``eval2``.
    """

    kind: str  # "exponential" | "general"
    K: Optional[float] = None
    lam: Optional[float] = None
    eval2: Optional[Callable] = None

    def __post_init__(self):
        if self.kind == "exponential":
            if self.K is None or self.lam is None:
                raise ParameterError("exponential KL bound needs K and lam")
            if self.K < 1.0:
                raise ParameterError(f"exponential KL bound requires K >= 1, got {self.K}")
            if self.lam <= 0.0:
                raise ParameterError(f"exponential KL bound requires lam > 0, got {self.lam}")
        elif self.kind == "general":
            if self.eval2 is None:
                raise ParameterError("general KL bound needs eval2")
        else:
            raise ParameterError(f"unknown KL bound kind {self.kind!r}")

    def eval(self, s, t):
        if self.kind == "exponential":
            return self.K * np.asarray(s, dtype=float) * np.exp(-self.lam * np.asarray(t, dtype=float))
        return self.eval2(s, t)


@dataclass(frozen=True)
class ClassReport:
    """Sampled class-membership flags for a candidate comparison function."""

    zero_at_zero: bool
    strictly_increasing_on_grid: bool
    unbounded_heuristic: bool
    first_violation: Optional[tuple] = None
    grid_size: int = 0

    @property
    def all_kinf_flags(self) -> bool:
        return self.zero_at_zero and self.strictly_increasing_on_grid and self.unbounded_heuristic


def identity_fn() -> MonotoneFn:
    """The identity map, the simplest K-infinity function."""
    return make_power_fn(1.0, 1.0)


def make_power_fn(c: float, p: float) -> MonotoneFn:
    """Build ``s -> c * s**p`` with analytic derivative and inverse.

    Both ``c`` and ``p`` must be positive; the result carries a ``Kinf`` tag.
    """
    if not (c > 0.0):
        raise ParameterError(f"power function needs c > 0, got {c}")
    if not (p > 0.0):
        raise ParameterError(f"power function needs p > 0, got {p}")
    c = float(c)
    p = float(p)

    def _eval(s, _c=c, _p=p):
        return _c * np.power(np.asarray(s, dtype=float), _p) if np.ndim(s) else _c * float(s) ** _p

    def _deriv(s, _c=c, _p=p):
        s = np.asarray(s, dtype=float) if np.ndim(s) else float(s)
        return _c * _p * s ** (_p - 1.0)

    def _inv(y, _c=c, _p=p):
        y = np.asarray(y, dtype=float) if np.ndim(y) else float(y)
        return (y / _c) ** (1.0 / _p)

    return MonotoneFn(
        eval=_eval,
        class_tag="Kinf",
        derivative=_deriv,
        inverse=_inv,
        spec={"kind": "power", "c": c, "p": p},
    )


def make_table_fn(xs: Sequence[float], ys: Sequence[float], class_tag: str = "Kinf") -> MonotoneFn:
    """Monotone piecewise-linear function through ``(xs, ys)``.

    Beyond the last node the final segment slope is continued, so Kinf
    tables stay unbounded.  Nodes must start at ``x=0`` with ``y=0`` for
    K/Kinf tags and be strictly increasing in ``x``, nondecreasing in ``y``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ParameterError("table function needs matching 1-D xs/ys with >= 2 nodes")
    if np.any(np.diff(xs) <= 0):
        raise ParameterError("table xs must be strictly increasing")
    if np.any(np.diff(ys) < 0):
        raise ParameterError("table ys must be nondecreasing")
    end_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])

    def _eval(s, _xs=xs, _ys=ys, _m=end_slope):
        s_arr = np.asarray(s, dtype=float)
        out = np.interp(s_arr, _xs, _ys)
        out = np.where(s_arr > _xs[-1], _ys[-1] + _m * (s_arr - _xs[-1]), out)
        return float(out) if np.ndim(s) == 0 else out

    # inverse over flat runs picks the rightmost x, the loose (safe) choice
    # when the table lower-bounds something that is inverted in a state bound
    keep = np.concatenate([np.diff(ys) > 0, [True]])
    inv_ys, inv_xs = ys[keep], xs[keep]

    def _inv(y, _xs=inv_xs, _ys=inv_ys, _m=end_slope):
        y_arr = np.asarray(y, dtype=float)
        out = np.interp(y_arr, _ys, _xs)
        out = np.where(y_arr <= 0.0, 0.0, out)
        if _m > 0:
            out = np.where(y_arr > _ys[-1], _xs[-1] + (y_arr - _ys[-1]) / _m, out)
        return float(out) if np.ndim(y) == 0 else out

    inv = _inv if end_slope > 0 and inv_ys.size >= 2 else None
    return MonotoneFn(
        eval=_eval,
        class_tag=class_tag,
        inverse=inv,
        domain_hint=float(xs[-1]),
        spec={"kind": "table", "xs": [float(v) for v in xs], "ys": [float(v) for v in ys]},
    )


def scale_fn(f: MonotoneFn, c: float) -> MonotoneFn:
    """Output scaling ``s -> c * f(s)`` preserving the class tag (c > 0)."""
    if not (c > 0.0):
        raise ParameterError(f"scale factor must be positive, got {c}")
    deriv = (lambda s, _f=f, _c=c: _c * _f.derivative(s)) if f.derivative else None
    inv = (lambda y, _f=f, _c=c: _f.inverse(np.asarray(y) / _c if np.ndim(y) else y / _c)) if f.inverse else None
    return MonotoneFn(
        eval=lambda s, _f=f, _c=c: _c * _f.eval(s),
        class_tag=f.class_tag,
        derivative=deriv,
        inverse=inv,
        domain_hint=f.domain_hint,
    )


def compose(outer: MonotoneFn, inner: MonotoneFn) -> MonotoneFn:
    """Composition ``s -> outer(inner(s))``.

    The result is Kinf exactly when both factors are; otherwise the weaker
    of the two tags is kept.
    """
    if outer.class_tag == "Kinf" and inner.class_tag == "Kinf":
        tag = "Kinf"
    elif "P" in (outer.class_tag, inner.class_tag):
        tag = "P"
    else:
        tag = "K"
    deriv = None
    if outer.derivative is not None and inner.derivative is not None:
        def deriv(s, _o=outer, _i=inner):
            return _o.derivative(_i.eval(s)) * _i.derivative(s)
    inv = None
    if outer.inverse is not None and inner.inverse is not None:
        def inv(y, _o=outer, _i=inner):
            return _i.inverse(_o.inverse(y))
    return MonotoneFn(
        eval=lambda s, _o=outer, _i=inner: _o.eval(_i.eval(s)),
        class_tag=tag,
        derivative=deriv,
        inverse=inv,
        domain_hint=inner.domain_hint,
    )


def invert(f: MonotoneFn, y: float, tol: float) -> float:
    """Solve ``f(x) = y`` for a class K/Kinf function by bracketing + bisection.

    The bracket starts at ``[0, 1]`` and the upper end doubles until it
    encloses ``y``; bisection then runs until ``|f(x) - y| <= tol * max(1, y)``.
    ``invert(f, 0, tol)`` returns 0 exactly.
    """
    if tol <= 0.0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    if y < 0.0:
        raise ParameterError(f"cannot invert at negative value {y}")
    if f.class_tag == "P":
        raise ParameterError("inversion is only defined for class K/Kinf tags")
    if y == 0.0:
        return 0.0

    hi = 1.0
    doublings = 0
    while float(f.eval(hi)) < y:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            if f.class_tag == "K":
                raise RangeError(
                    f"value {y} appears to exceed the range of a bounded class-K function"
                )
            raise ConvergenceError(
                f"no bracket for f(x) = {y} after 200 doublings (x up to {hi})"
            )
    lo = 0.0
    target = tol * max(1.0, y)
    for _ in range(512):
        mid = 0.5 * (lo + hi)
        fm = float(f.eval(mid))
        if abs(fm - y) <= target:
            return mid
        if fm < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def apply_inverse(f: MonotoneFn, y, tol: float = 1e-12):
    """Evaluate ``f^{-1}(y)``, preferring an analytic inverse when available.

    Accepts arrays when the analytic inverse does; otherwise falls back to
    the numeric :func:`invert` per scalar.
    """
    if f.inverse is not None:
        return f.inverse(y)
    if np.ndim(y) == 0:
        return invert(f, float(y), tol)
    return np.array([invert(f, float(v), tol) for v in np.asarray(y).ravel()]).reshape(np.shape(y))


def inverse_fn(f: MonotoneFn, tol: float = 1e-12) -> MonotoneFn:
    """Wrap ``f^{-1}`` as a MonotoneFn (same class tag as ``f``)."""
    return MonotoneFn(
        eval=lambda y, _f=f, _t=tol: apply_inverse(_f, y, _t),
        class_tag=f.class_tag,
        domain_hint=float(f.eval(f.domain_hint)),
    )


def verify_class(f: MonotoneFn, grid: Sequence[float]) -> ClassReport:
    """Sampled class-K-infinity checks on ``grid`` (sorted, >= 2 points).

    ``unbounded_heuristic`` is ``f(max(grid)) > 1e6 * f(1)``, a finite-sample
    stand-in for unboundedness.  The first strict-increase violation, if any,
    is reported as the offending pair.
    """
    grid = [float(g) for g in grid]
    if len(grid) < 2:
        raise ParameterError("grid must contain at least 2 points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("grid must be strictly increasing")
    vals = [float(f.eval(g)) for g in grid]

    zero_at_zero = abs(float(f.eval(0.0))) <= _ZERO_TOL
    first_violation = None
    strictly_increasing = True
    for (xa, va), (xb, vb) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if vb <= va:
            strictly_increasing = False
            first_violation = ((xa, va), (xb, vb))
            break
    unbounded = vals[-1] > 1e6 * float(f.eval(1.0))
    return ClassReport(
        zero_at_zero=zero_at_zero,
        strictly_increasing_on_grid=strictly_increasing,
        unbounded_heuristic=unbounded,
        first_violation=first_violation,
        grid_size=len(grid),
    )


def sontag_factorize_exponential(K: float, lam: float) -> tuple[MonotoneFn, MonotoneFn]:
    """Factor the exponential decay bound ``K*s*exp(-lam*t)`` into two Kinf maps.

    Returns ``(theta1, theta2)`` with ``theta1(s) = s**(1/lam)`` and
    ``theta2(r) = K * r**lam`` so that
    ``theta2^{-1}(K * s * exp(-lam*t)) == theta1(s) * exp(-t)`` exactly.
    """
    if K < 1.0:
        raise ParameterError(f"exponential decay bound requires K >= 1, got {K}")
    if lam <= 0.0:
        raise ParameterError(f"decay rate must be positive, got {lam}")
    theta1 = make_power_fn(1.0, 1.0 / lam)
    theta2 = make_power_fn(float(K), float(lam))
    return theta1, theta2


# ---------------------------------------------------------------------------
# JSON specs


def monotone_to_spec(f: MonotoneFn, sample_grid: Optional[Sequence[float]] = None) -> dict:
    """JSON-serializable spec for ``f``.

    Functions without a closed-form spec are sampled on ``sample_grid``
    into table form; omitting the grid in that case is an error.
    """
    if f.spec is not None:
        return dict(f.spec)
    if sample_grid is None:
        raise ParameterError("function has no closed-form spec; supply a sample grid")
    xs = np.asarray(sorted(set(float(x) for x in sample_grid)), dtype=float)
    if xs[0] != 0.0:
        xs = np.concatenate([[0.0], xs])
    ys = np.array([float(f.eval(x)) for x in xs])
    ys = np.maximum.accumulate(ys)  # guard against sub-tolerance numeric dips
    return {"kind": "table", "xs": xs.tolist(), "ys": ys.tolist()}


def monotone_from_spec(spec: dict) -> MonotoneFn:
    """Rebuild a MonotoneFn from its JSON spec (power or table form)."""
    kind = spec.get("kind")
    if kind == "power":
        return make_power_fn(float(spec["c"]), float(spec["p"]))
    if kind == "table":
        return make_table_fn(spec["xs"], spec["ys"], class_tag=spec.get("class_tag", "Kinf"))
    raise ParameterError(f"unknown monotone function spec kind {kind!r}")


def klbound_to_spec(b: KLBound, s_grid=None, t_grid=None) -> dict:
    """JSON spec for a KL bound; general bounds are sampled on the grids."""
    if b.kind == "exponential":
        return {"kind": "exponential", "K": b.K, "lambda": b.lam}
    if s_grid is None or t_grid is None:
        raise ParameterError("general KL bound export needs s and t sample grids")
    s_grid = [float(s) for s in s_grid]
    t_grid = [float(t) for t in t_grid]
    vals = [[float(b.eval(s, t)) for t in t_grid] for s in s_grid]
    return {"kind": "table2d", "s": s_grid, "t": t_grid, "values": vals}


def klbound_from_spec(spec: dict) -> KLBound:
    kind = spec.get("kind")
    if kind == "exponential":
        return KLBound(kind="exponential", K=float(spec["K"]), lam=float(spec["lambda"]))
    if kind == "table2d":
        s_grid = np.asarray(spec["s"], dtype=float)
        t_grid = np.asarray(spec["t"], dtype=float)
        vals = np.asarray(spec["values"], dtype=float)

        def _eval2(s, t, _s=s_grid, _t=t_grid, _v=vals):
            s = np.asarray(s, dtype=float)
            t = np.asarray(t, dtype=float)
            # bilinear interpolation, clamped at the grid edges
            si = np.clip(np.searchsorted(_s, s) - 1, 0, _s.size - 2)
            ti = np.clip(np.searchsorted(_t, t) - 1, 0, _t.size - 2)
            ws = np.clip((s - _s[si]) / (_s[si + 1] - _s[si]), 0.0, 1.0)
            wt = np.clip((t - _t[ti]) / (_t[ti + 1] - _t[ti]), 0.0, 1.0)
            v00 = _v[si, ti]
            v01 = _v[si, ti + 1]
            v10 = _v[si + 1, ti]
            v11 = _v[si + 1, ti + 1]
            out = (v00 * (1 - ws) * (1 - wt) + v10 * ws * (1 - wt)
                   + v01 * (1 - ws) * wt + v11 * ws * wt)
            return float(out) if out.ndim == 0 else out

        return KLBound(kind="general", eval2=_eval2)
    raise ParameterError(f"unknown KL bound spec kind {kind!r}")
