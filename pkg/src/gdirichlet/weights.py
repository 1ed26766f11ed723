"""Weight functions, approximation functions and their regularizations.

A weight function is a strictly increasing continuous bijection of the
positive reals with ``h(1) = 1`` that obeys the reflection rule
``h(T) = 1 / h(1/T)``.  Every family here is stored through its log-log
profile ``t -> ln h(e^t)`` on ``t >= 0``; the reflection rule then becomes
oddness of the profile, and large arguments never overflow internally.

Approximation functions (the ``f`` and ``g`` of the theory) are positive,
nonincreasing functions on ``(0, inf)``.  They expose a generalized inverse
``level_set_sup(v) = sup{T : g(T) >= v}`` that the Dirichlet oracle uses to
compute witness intervals.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    CertificateError,
    ContractError,
    DomainError,
    ExtrapolationError,
)

TAU_EVAL = 1e-9
TAU_INV = 1e-12


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


def bisect_increasing(fn: Callable[[np.ndarray], np.ndarray], target, lo=0.0, hi=1.0,
                      max_iter=400):
    """Vectorized bisection for an increasing ``fn`` on ``[lo, inf)``.

    Returns ``x`` with ``fn(x) = target`` to floating point resolution.  The
    upper end of the bracket is grown geometrically until it dominates the
    target.  Targets at or below ``fn(lo)`` return ``lo``.
    """
    target = np.atleast_1d(np.asarray(target, dtype=float))
    lo_arr = np.full(target.shape, float(lo))
    hi_arr = np.full(target.shape, float(hi))
    grow = fn(hi_arr) < target
    step = max(float(hi) - float(lo), 1.0)
    for _ in range(2000):
        if not grow.any():
            break
        lo_arr[grow] = hi_arr[grow]
        step *= 2.0
        hi_arr[grow] = hi_arr[grow] + step
        grow = fn(hi_arr) < target
    for _ in range(max_iter):
        mid = 0.5 * (lo_arr + hi_arr)
        active = (mid > lo_arr) & (mid < hi_arr)
        if not active.any():
            break
        below = fn(mid) < target
        lo_arr = np.where(active & below, mid, lo_arr)
        hi_arr = np.where(active & ~below, mid, hi_arr)
    return hi_arr


# ---------------------------------------------------------------------------
# Weight functions
# ---------------------------------------------------------------------------


class WeightFunction:
    """Base class.  Subclasses implement ``log_eval`` and optionally ``log_inverse``."""

    kind = "abstract"

    def log_eval(self, t):
        """``ln h(e^t)`` for any real ``t`` (array in, array out)."""
        raise NotImplementedError

    def log_inverse(self, u):
        """Inverse of :meth:`log_eval`."""
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        pos = u >= 0
        if pos.any():
            out[pos] = bisect_increasing(self.log_eval, u[pos], lo=0.0)
        if (~pos).any():
            out[~pos] = -bisect_increasing(lambda s: -self.log_eval(-s), -u[~pos], lo=0.0)
        return out

    def __call__(self, T):
        """Evaluate ``h(T)``; ``h(0) = 0`` exactly and negative ``T`` is a domain error."""
        arr, scalar = _as_array(T)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise DomainError("weight functions are defined for T >= 0")
        out = np.zeros_like(arr)
        pos = arr > 0
        with np.errstate(over="ignore"):
            out[pos] = np.exp(self.log_eval(np.log(arr[pos])))
        return _ret(out, scalar)

    def inverse(self, v):
        """Unique ``T`` with ``h(T) = v``; ``inverse(0) = 0``."""
        arr, scalar = _as_array(v)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise DomainError("weight function values are nonnegative")
        out = np.zeros_like(arr)
        pos = arr > 0
        with np.errstate(over="ignore"):
            out[pos] = np.exp(self.log_inverse(np.log(arr[pos])))
        return _ret(out, scalar)

    def to_config(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_config()})"


class _Reflected(WeightFunction):
    """Weight function given by its profile on ``t >= 0``, extended oddly."""

    def _profile(self, t):
        raise NotImplementedError

    def _profile_inverse(self, u):
        return bisect_increasing(self._profile, u, lo=0.0)

    def log_eval(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        pos = t >= 0
        out[pos] = self._profile(t[pos])
        out[~pos] = -self._profile(-t[~pos])
        return out

    def log_inverse(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        pos = u >= 0
        out[pos] = self._profile_inverse(u[pos])
        out[~pos] = -self._profile_inverse(-u[~pos])
        return out


class Power(_Reflected):
    """``h(T) = T**rho``."""

    kind = "power"

    def __init__(self, rho: float):
        if not rho > 0:
            raise ContractError("power exponent must be positive")
        self.rho = float(rho)

    def _profile(self, t):
        return self.rho * t

    def _profile_inverse(self, u):
        return u / self.rho

    # direct powers keep integers exact (exp(log(30)) is 30.000000000000004)
    def __call__(self, T):
        arr, scalar = _as_array(T)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise DomainError("weight functions are defined for T >= 0")
        with np.errstate(over="ignore"):
            return _ret(arr.copy() if self.rho == 1.0 else arr ** self.rho, scalar)

    def inverse(self, v):
        arr, scalar = _as_array(v)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise DomainError("weight function values are nonnegative")
        with np.errstate(over="ignore"):
            return _ret(arr.copy() if self.rho == 1.0 else arr ** (1.0 / self.rho), scalar)

    def to_config(self):
        return {"kind": "power", "rho": self.rho}


def _iterated_logs(t, depth):
    """Rows ``ln T, ln ln T, ...`` (``depth`` of them) for ``t = ln T``."""
    logs = []
    cur = np.asarray(t, dtype=float)
    for _ in range(depth):
        logs.append(cur)
        with np.errstate(divide="ignore", invalid="ignore"):
            cur = np.log(cur)
    return logs


class PowerLog(_Reflected):
    """``h(T) ~ T^a0 (ln T)^a1 (ln ln T)^a2 ...`` patched below an onset.

    The raw product is only increasing and well defined for large ``T``.
    Below the onset ``t0`` the profile is the line ``p*t`` where ``p`` is the
    log-derivative of the raw function at ``t0``; above the onset the raw
    function is rescaled by a constant so that the two pieces join with
    matching value and slope (in log-log coordinates) and ``h(1) = 1`` holds.
    """

    kind = "powerlog"

    def __init__(self, a: Sequence[float], onset: float = math.e ** 2):
        a = [float(x) for x in a]
        if not a or not a[0] > 0:
            raise ContractError("powerlog needs a leading exponent a0 > 0")
        if not onset > 1:
            raise ContractError("powerlog onset must exceed 1")
        self.a = a
        self.onset = float(onset)
        self.t0 = math.log(self.onset)
        logs = _iterated_logs(np.array([self.t0]), len(a) - 1)
        for s, ell in enumerate(logs, start=1):
            if a[s] != 0 and not ell[0] > 0:
                raise ContractError("iterated logarithms must be positive at the onset")
        self.slope0 = float(self._raw_slope(np.array([self.t0]))[0])
        if not self.slope0 > 0:
            raise ContractError("powerlog is not increasing at its onset; move the onset right")
        grid = self.t0 * np.geomspace(1.0, 1e6, 2000)
        if np.any(self._raw_slope(grid) <= 0):
            raise ContractError("powerlog is not increasing beyond its onset")
        self.raw0 = float(self._raw(np.array([self.t0]))[0])

    def _raw(self, t):
        out = self.a[0] * t
        for s, ell in enumerate(_iterated_logs(t, len(self.a) - 1), start=1):
            if self.a[s] != 0:
                out = out + self.a[s] * np.log(ell)
        return out

    def _raw_slope(self, t):
        out = np.full(np.shape(t), self.a[0])
        prod = np.ones(np.shape(t))
        for s, ell in enumerate(_iterated_logs(t, len(self.a) - 1), start=1):
            prod = prod * ell
            if self.a[s] != 0:
                out = out + self.a[s] / prod
        return out

    def _profile(self, t):
        t = np.asarray(t, dtype=float)
        out = np.array(self.slope0 * t, dtype=float)
        hi = t > self.t0
        if hi.any():
            out[hi] = self._raw(t[hi]) - self.raw0 + self.slope0 * self.t0
        return out

    def _profile_inverse(self, u):
        u = np.asarray(u, dtype=float)
        u0 = self.slope0 * self.t0
        out = np.array(u / self.slope0, dtype=float)
        hi = u > u0
        if hi.any():
            out[hi] = bisect_increasing(self._profile, u[hi], lo=self.t0, hi=2 * self.t0 + 1)
        return out

    def to_config(self):
        return {"kind": "powerlog", "a": list(self.a), "onset": self.onset}


class PiecewiseLinearLog(_Reflected):
    """Profile piecewise linear in ``t = ln T`` with breakpoints ``anchor * base**k``.

    The slopes on consecutive pieces cycle through ``slopes``; on ``[0, anchor]``
    the profile is the line through the origin and the anchor value.  By
    default the anchor value is the self-similar one, for which the profile
    at every breakpoint is a fixed multiple of ``t`` along each residue class
    of ``k``.
    """

    kind = "plog"

    def __init__(self, base: float, slopes: Sequence[float], anchor: float = 1.0,
                 value: float | None = None, t_limit: float = 1e18):
        if not base > 1:
            raise ContractError("breakpoint base must exceed 1")
        slopes = [float(s) for s in slopes]
        if not slopes or any(not s > 0 for s in slopes):
            raise ContractError("slopes must be positive")
        if not anchor > 0:
            raise ContractError("anchor must be positive")
        self.base = float(base)
        self.slopes = slopes
        self.anchor = float(anchor)
        L = len(slopes)
        if value is None:
            r0 = (self.base - 1) * sum(s * self.base ** k for k, s in enumerate(slopes))
            r0 /= self.base ** L - 1
            value = r0 * self.anchor
        self.value = float(value)
        if not self.value > 0:
            raise ContractError("anchor value must be positive")
        knots = [0.0, self.anchor]
        vals = [0.0, self.value]
        k = 0
        while knots[-1] < t_limit:
            nxt = self.anchor * self.base ** (k + 1)
            vals.append(vals[-1] + slopes[k % L] * (nxt - knots[-1]))
            knots.append(nxt)
            k += 1
        self.knots = np.array(knots)
        self.knot_values = np.array(vals)

    def _profile(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.knots[-1]):
            raise ExtrapolationError("argument beyond the tabulated breakpoints")
        return np.interp(t, self.knots, self.knot_values)

    def _profile_inverse(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u > self.knot_values[-1]):
            raise ExtrapolationError("value beyond the tabulated breakpoints")
        return np.interp(u, self.knot_values, self.knots)

    def to_config(self):
        return {"kind": "plog", "base": self.base, "slopes": list(self.slopes),
                "anchor": self.anchor, "value": self.value}


class TabulatedPiecewiseLinear(_Reflected):
    """Piecewise linear in ``T`` through the given nodes (``(1, 1)`` is implied).

    Beyond the last node the last slope is continued.
    """

    kind = "table"

    def __init__(self, nodes: Sequence[Sequence[float]]):
        pts = sorted((float(t), float(v)) for t, v in nodes)
        if not pts or pts[0][0] != 1.0:
            pts.insert(0, (1.0, 1.0))
        if pts[0] != (1.0, 1.0):
            raise ContractError("a weight table must pass through (1, 1)")
        if len(pts) < 2:
            raise ContractError("a weight table needs a node beyond T = 1")
        ts = np.array([p[0] for p in pts])
        vs = np.array([p[1] for p in pts])
        if np.any(np.diff(ts) <= 0) or np.any(np.diff(vs) <= 0):
            raise ContractError("weight table must be strictly increasing")
        self.ts, self.vs = ts, vs
        self.last_slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])

    def _eval_T(self, T):
        out = np.interp(T, self.ts, self.vs)
        beyond = T > self.ts[-1]
        out[beyond] = self.vs[-1] + self.last_slope * (T[beyond] - self.ts[-1])
        return out

    def _profile(self, t):
        with np.errstate(over="ignore"):
            T = np.exp(np.asarray(t, dtype=float))
        return np.log(self._eval_T(T))

    def _profile_inverse(self, u):
        with np.errstate(over="ignore"):
            V = np.exp(np.asarray(u, dtype=float))
        out = np.interp(V, self.vs, self.ts)
        beyond = V > self.vs[-1]
        out[beyond] = self.ts[-1] + (V[beyond] - self.vs[-1]) / self.last_slope
        return np.log(out)

    def to_config(self):
        return {"kind": "table", "nodes": [[float(t), float(v)] for t, v in zip(self.ts, self.vs)]}


class ProductWeight(WeightFunction):
    """Pointwise product of weight functions (again a weight function)."""

    kind = "product"

    def __init__(self, factors: Sequence[WeightFunction]):
        if not factors:
            raise ContractError("empty product")
        self.factors = list(factors)
        self._power_sum = None
        if all(isinstance(f, Power) for f in self.factors):
            self._power_sum = sum(f.rho for f in self.factors)

    def log_eval(self, t):
        t = np.asarray(t, dtype=float)
        if self._power_sum is not None:
            return self._power_sum * t
        return sum(f.log_eval(t) for f in self.factors)

    def log_inverse(self, u):
        if self._power_sum is not None:
            return np.asarray(u, dtype=float) / self._power_sum
        return super().log_inverse(u)

    def to_config(self):
        return {"kind": "product", "factors": [f.to_config() for f in self.factors]}


class ScaledWeight(WeightFunction):
    """``c * h`` for a weight function ``h``; used for systems like ``(C alpha, C beta)``.

    The result is increasing with ``c*h(0) = 0`` but no longer normalized.
    """

    kind = "scaled_weight"

    def __init__(self, h: WeightFunction, c: float):
        if not c > 0:
            raise ContractError("scale must be positive")
        self.h, self.c = h, float(c)
        self._lc = math.log(self.c)

    def log_eval(self, t):
        return self._lc + self.h.log_eval(t)

    def log_inverse(self, u):
        return self.h.log_inverse(np.asarray(u, dtype=float) - self._lc)

    def to_config(self):
        return {"kind": "scaled_weight", "c": self.c, "h": self.h.to_config()}


def gamma_functions() -> tuple[PiecewiseLinearLog, PiecewiseLinearLog]:
    """The two changing-weight functions ``beta_1, beta_2`` with ``beta_1 beta_2 = T``.

    In log scale ``gamma_1`` has slopes 3/4 and 1/4 on ``[5^k, 5^{k+1})``
    alternately and equals ``t/3`` on ``[0, 1]``.
    """
    return (PiecewiseLinearLog(5.0, [0.75, 0.25], anchor=1.0),
            PiecewiseLinearLog(5.0, [0.25, 0.75], anchor=1.0))


# ---------------------------------------------------------------------------
# Quasinorms
# ---------------------------------------------------------------------------


def weighted_norm(x, w: Sequence[WeightFunction]):
    """``max_i w_i^{-1}(|x_i|)`` along the last axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(w):
        raise ContractError(f"vector length {x.shape[-1]} does not match {len(w)} weights")
    cols = [np.asarray(wi.inverse(np.abs(x[..., i]))) for i, wi in enumerate(w)]
    out = np.max(np.stack(cols, axis=-1), axis=-1)
    return float(out) if out.ndim == 0 else out


def nearest_integer_distance(x, w: Sequence[WeightFunction]):
    """Weighted quasinorm of the coordinatewise nearest-integer residual."""
    x = np.asarray(x, dtype=float)
    return weighted_norm(np.abs(x - np.rint(x)), w)


# ---------------------------------------------------------------------------
# Weight systems
# ---------------------------------------------------------------------------


class WeightSystem:
    """The tuples ``alpha`` (n functions) and ``beta`` (m functions)."""

    def __init__(self, alpha: Sequence[WeightFunction], beta: Sequence[WeightFunction]):
        self.alpha = tuple(alpha)
        self.beta = tuple(beta)
        if len(self.alpha) < 1 or len(self.beta) < 1:
            raise ContractError("need n >= 1 and m >= 1")
        self.n, self.m = len(self.alpha), len(self.beta)
        self.d = self.n + self.m
        self.alpha_product = self.alpha[0] if self.n == 1 else ProductWeight(self.alpha)
        self.beta_product = self.beta[0] if self.m == 1 else ProductWeight(self.beta)

    @classmethod
    def powers(cls, rho: Sequence[float], sigma: Sequence[float]) -> "WeightSystem":
        return cls([Power(r) for r in rho], [Power(s) for s in sigma])

    @classmethod
    def changing_weights(cls) -> "WeightSystem":
        """One linear form in two variables with the oscillating ``beta_1, beta_2``."""
        return cls([Power(1.0)], list(gamma_functions()))

    def transpose(self) -> "WeightSystem":
        return WeightSystem(self.beta, self.alpha)

    def scaled(self, c: float) -> "WeightSystem":
        return WeightSystem([ScaledWeight(a, c) for a in self.alpha],
                            [ScaledWeight(b, c) for b in self.beta])

    def alpha_norm(self, y):
        return weighted_norm(y, self.alpha)

    def beta_norm(self, q):
        return weighted_norm(q, self.beta)

    def dirichlet_exponent(self) -> "DirichletExponent":
        return DirichletExponent(self)

    def is_power(self) -> bool:
        return all(isinstance(h, Power) for h in self.alpha + self.beta)

    def to_config(self):
        return {"alpha": [a.to_config() for a in self.alpha],
                "beta": [b.to_config() for b in self.beta]}


# ---------------------------------------------------------------------------
# Quasimultiplicativity certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuasiMultCertificate:
    M: float
    c1: float
    c2: float
    k_range: tuple[int, int]
    k1: float
    k2: float
    increasing: bool = True

    def check_k(self, k):
        lo, hi = self.k_range
        if np.any(np.asarray(k) < lo) or np.any(np.asarray(k) > hi + 1):
            raise ExtrapolationError(f"exponent outside certified range {self.k_range}")

    def step_bounds(self, j: int) -> tuple[float, float]:
        """Bounds for ``h(M^{k+j}) / h(M^k)`` implied by the certificate (any integer ``j``)."""
        if j >= 0:
            return self.c1 ** j, self.c2 ** j
        return self.c2 ** j, self.c1 ** j


def ratio_certificate(func, M: float, k_range: tuple[int, int]) -> QuasiMultCertificate:
    """Tightest ``(c1, c2)`` for the ratios ``func(M^{k+1}) / func(M^k)`` over ``k_range``."""
    if not M > 1:
        raise ContractError("base M must exceed 1")
    k_lo, k_hi = int(k_range[0]), int(k_range[1])
    if k_hi < k_lo:
        raise ContractError("empty k_range")
    ks = np.arange(k_lo, k_hi + 2, dtype=float)
    if hasattr(func, "log_eval"):
        logs = np.asarray(func.log_eval(ks * math.log(M)))
    else:
        logs = np.log(np.asarray(func(M ** ks), dtype=float))
    steps = np.diff(logs)
    if not np.all(np.isfinite(steps)):
        raise CertificateError("non-finite ratio in the certified range")
    lmin, lmax = float(steps.min()), float(steps.max())
    if lmin > 0:
        increasing = True
    elif lmax < 0:
        increasing = False
    else:
        raise CertificateError("not quasimultiplicative on this range at this base: "
                               "consecutive ratios reach 1")
    c1, c2 = math.exp(lmin), math.exp(lmax)
    lm = math.log(M)
    return QuasiMultCertificate(float(M), c1, c2, (k_lo, k_hi), lmin / lm, lmax / lm, increasing)


def certify_quasimultiplicative(h: WeightFunction, M: float,
                                k_range: tuple[int, int]) -> QuasiMultCertificate:
    """Range certificate for an increasing weight function."""
    cert = ratio_certificate(h, M, k_range)
    if not cert.increasing or not cert.c1 > 1:
        raise CertificateError("not quasimultiplicative on this range at this base")
    return cert


def merge_certificates(certs: Sequence[QuasiMultCertificate]) -> QuasiMultCertificate:
    """Common constants for a finite family certified at a shared base."""
    if not certs:
        raise ContractError("nothing to merge")
    Ms = {c.M for c in certs}
    if len(Ms) != 1:
        raise CertificateError("certificates must share the base M")
    if len({c.increasing for c in certs}) != 1:
        raise CertificateError("cannot merge increasing and decreasing certificates")
    M = certs[0].M
    lo = max(c.k_range[0] for c in certs)
    hi = min(c.k_range[1] for c in certs)
    if hi < lo:
        raise CertificateError("certified ranges do not overlap")
    c1 = min(c.c1 for c in certs)
    c2 = max(c.c2 for c in certs)
    lm = math.log(M)
    return QuasiMultCertificate(M, c1, c2, (lo, hi), math.log(c1) / lm, math.log(c2) / lm,
                                certs[0].increasing)


def predicted_ratio_bounds(op: str, a: QuasiMultCertificate,
                           b: QuasiMultCertificate | None = None) -> tuple[float, float]:
    """Bounds on the consecutive ratios of a combined function.

    ``product`` multiplies the ratio ranges (exponents add), ``sum`` takes
    their hull, ``reciprocal`` inverts them, and ``compose`` (``a`` after
    ``b``) follows from writing the inner ratio as ``M^x`` and bounding the
    outer ratio over ``floor(x) - 1`` to ``ceil(x) + 1`` certified steps, so
    that the exponents multiply up to one step of slack on either side.
    """
    if op == "reciprocal":
        return 1.0 / a.c2, 1.0 / a.c1
    if b is None:
        raise ContractError(f"operation {op!r} needs two certificates")
    if a.M != b.M:
        raise CertificateError("certificates must share the base M")
    if op == "product":
        return a.c1 * b.c1, a.c2 * b.c2
    if op == "sum":
        if a.increasing != b.increasing:
            raise CertificateError("sum needs two increasing or two decreasing functions")
        return min(a.c1, b.c1), max(a.c2, b.c2)
    if op == "compose":
        x_lo = math.log(b.c1) / math.log(b.M)
        x_hi = math.log(b.c2) / math.log(b.M)
        j_lo = math.floor(x_lo) - 1
        j_hi = math.ceil(x_hi) + 1
        lo = min(a.step_bounds(j_lo)[0], a.step_bounds(j_hi)[0])
        hi = max(a.step_bounds(j_lo)[1], a.step_bounds(j_hi)[1])
        return lo, hi
    raise ContractError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# Hat linearization
# ---------------------------------------------------------------------------


class HatLinearization:
    """Piecewise linear interpolation of ``h`` at the nodes ``M^k`` of a certificate.

    ``slope_bounds`` returns the logarithmic-derivative constants as usually
    stated, ``(c1 - 1)/(M - 1)`` and ``(c2 - 1)/(M - 1)``; ``sharp_slope_bounds``
    returns the constants that actually hold for every linear piece,
    accounting for both ends of each piece (the upper one differs when
    ``c2 < M``).
    """

    def __init__(self, h: WeightFunction, cert: QuasiMultCertificate):
        self.h, self.cert = h, cert
        k_lo, k_hi = cert.k_range
        self.ks = np.arange(k_lo, k_hi + 2)
        self.nodes = cert.M ** self.ks.astype(float)
        self.values = np.asarray(h(self.nodes), dtype=float)

    @property
    def domain(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    def _check(self, T):
        lo, hi = self.domain
        if np.any(T < lo * (1 - 1e-12)) or np.any(T > hi * (1 + 1e-12)):
            raise ExtrapolationError(f"hat linearization is certified on [{lo}, {hi}] only")

    def __call__(self, T):
        arr, scalar = _as_array(T)
        self._check(arr)
        return _ret(np.interp(arr, self.nodes, self.values), scalar)

    def derivative(self, T):
        """Slope of the piece containing ``T`` (right derivative at nodes)."""
        arr, scalar = _as_array(T)
        self._check(arr)
        idx = np.clip(np.searchsorted(self.nodes, arr, side="right") - 1, 0, len(self.nodes) - 2)
        slope = (self.values[idx + 1] - self.values[idx]) / (self.nodes[idx + 1] - self.nodes[idx])
        return _ret(slope, scalar)

    def slope_bounds(self) -> tuple[float, float]:
        M, c1, c2 = self.cert.M, self.cert.c1, self.cert.c2
        return (c1 - 1) / (M - 1), (c2 - 1) / (M - 1)

    def sharp_slope_bounds(self) -> tuple[float, float]:
        M, c1, c2 = self.cert.M, self.cert.c1, self.cert.c2
        lam1 = min((c1 - 1) / (M - 1), M * (c1 - 1) / ((M - 1) * c1))
        lam2 = max((c2 - 1) / (M - 1), M * (c2 - 1) / ((M - 1) * c2))
        return lam1, lam2


def hat_linearize(h: WeightFunction, cert: QuasiMultCertificate) -> HatLinearization:
    return HatLinearization(h, cert)


# ---------------------------------------------------------------------------
# Approximation functions
# ---------------------------------------------------------------------------


class ApproxFunction:
    """Positive nonincreasing function on ``(0, inf)``.

    ``strict``: strictly decreasing; ``continuous``: continuous, so that
    every level set ``{g >= v}`` is a closed interval ``(0, s]``.
    """

    strict = True
    continuous = True

    def __call__(self, T):
        raise NotImplementedError

    def level_set_sup(self, v):
        """``sup{T > 0 : g(T) >= v}`` (``inf`` when unbounded, ``0`` when empty)."""
        raise NotImplementedError

    def inverse(self, v):
        if not (self.strict and self.continuous):
            raise ContractError("ordinary inverse needs a strictly decreasing continuous function")
        return self.level_set_sup(v)

    def left_limit(self, T):
        return self(T)

    def dual(self) -> "ApproxFunction":
        if not (self.strict and self.continuous):
            raise ContractError("duality needs a strictly decreasing continuous function; "
                                "apply strictify first")
        return DualApprox(self)

    def to_config(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_config()})"


class _LogDecreasing(ApproxFunction):
    """Helper for functions given by a decreasing log profile ``t -> ln g(e^t)``."""

    def log_eval(self, t):
        raise NotImplementedError

    def log_level(self, w):
        """Solve ``log_eval(t) = w`` (profile strictly decreasing on all of R)."""
        w = np.asarray(w, dtype=float)
        out = np.empty_like(w)
        g0 = float(self.log_eval(np.array([0.0]))[0])
        up = w <= g0
        if up.any():
            out[up] = bisect_increasing(lambda t: -self.log_eval(t), -w[up], lo=0.0)
        if (~up).any():
            out[~up] = -bisect_increasing(lambda s: self.log_eval(-s), w[~up], lo=0.0)
        return out

    def __call__(self, T):
        arr, scalar = _as_array(T)
        if np.any(arr <= 0):
            raise DomainError("approximation functions are defined for T > 0")
        with np.errstate(over="ignore", under="ignore"):
            return _ret(np.exp(self.log_eval(np.log(arr))), scalar)

    def level_set_sup(self, v):
        arr, scalar = _as_array(v)
        out = np.full(arr.shape, np.inf)
        pos = arr > 0
        with np.errstate(over="ignore", under="ignore"):
            out[pos] = np.exp(self.log_level(np.log(arr[pos])))
        return _ret(out, scalar)


class ScaledPower(_LogDecreasing):
    """``b * T**(-a)``; ``ScaledPower(1, 1)`` is the classical ``1/T``."""

    def __init__(self, b: float = 1.0, a: float = 1.0):
        if not (b > 0 and a > 0):
            raise ContractError("need b > 0 and a > 0")
        self.b, self.a = float(b), float(a)
        self._lb = math.log(self.b)

    def log_eval(self, t):
        return self._lb - self.a * np.asarray(t, dtype=float)

    def log_level(self, w):
        return (self._lb - np.asarray(w, dtype=float)) / self.a

    def dual(self):
        return ScaledPower(self.b ** (-1.0 / self.a), 1.0 / self.a)

    def to_config(self):
        return {"kind": "scaled_power", "b": self.b, "a": self.a}


def f1() -> ScaledPower:
    return ScaledPower(1.0, 1.0)


class PowerLogDecay(_LogDecreasing):
    """``c T^{-a} (ln T)^b (ln ln T)^e`` beyond an onset, power-patched below it.

    Below the onset the function is ``g(onset) (T/onset)^{-p}`` with ``p`` the
    negated log-derivative at the onset, so the log profile is C^1.
    """

    def __init__(self, c: float = 1.0, a: float = 1.0, b: float = 0.0, e: float = 0.0,
                 onset: float | None = None):
        if not (c > 0 and a > 0):
            raise ContractError("need c > 0 and a > 0")
        self.c, self.a, self.b, self.e = float(c), float(a), float(b), float(e)
        if onset is None:
            onset = math.exp(math.e)
            while self._raw_decay(math.log(onset)) <= 0.25 * self.a:
                onset *= math.e
        min_onset = math.e if self.e != 0 else 1.0
        if not onset > min_onset:
            raise ContractError("onset too small for the logarithmic factors")
        self.onset = float(onset)
        self.t0 = math.log(self.onset)
        self.p = self._raw_decay(self.t0)
        if not self.p > 0:
            raise ContractError("function is not decreasing at the onset; move it right")
        grid = self.t0 * np.geomspace(1.0, 1e6, 2000)
        if np.any(self._raw_decay(grid) <= 0):
            raise ContractError("function is not decreasing beyond the onset")
        self.g0 = float(self._raw(np.array([self.t0]))[0])

    def _raw(self, t):
        t = np.asarray(t, dtype=float)
        out = math.log(self.c) - self.a * t
        if self.b:
            out = out + self.b * np.log(t)
        if self.e:
            out = out + self.e * np.log(np.log(t))
        return out

    def _raw_decay(self, t):
        t = np.asarray(t, dtype=float)
        out = self.a - (self.b / t if self.b else 0.0)
        if self.e:
            out = out - self.e / (t * np.log(t))
        return out

    def log_eval(self, t):
        t = np.asarray(t, dtype=float)
        out = np.array(self.g0 - self.p * (t - self.t0), dtype=float)
        hi = t > self.t0
        if hi.any():
            out[hi] = self._raw(t[hi])
        return out

    def log_level(self, w):
        w = np.asarray(w, dtype=float)
        out = np.array(self.t0 - (w - self.g0) / self.p, dtype=float)
        lo = w < self.g0
        if lo.any():
            out[lo] = bisect_increasing(lambda t: -self._raw(t), -w[lo], lo=self.t0,
                                        hi=2 * self.t0 + 1)
        return out

    @property
    def asymptotic(self) -> tuple[float, float, float]:
        return self.a, self.b, self.e

    def to_config(self):
        return {"kind": "powerlog_decay", "c": self.c, "a": self.a, "b": self.b,
                "e": self.e, "onset": self.onset}


class TabulatedApprox(ApproxFunction):
    """Continuous piecewise linear through nonincreasing nodes, constant outside."""

    def __init__(self, nodes: Sequence[Sequence[float]] | None = None, ts=None, vs=None):
        if nodes is not None:
            pts = sorted((float(t), float(v)) for t, v in nodes)
            ts = np.array([p[0] for p in pts])
            vs = np.array([p[1] for p in pts])
        ts = np.asarray(ts, dtype=float)
        vs = np.asarray(vs, dtype=float)
        if ts.size < 1 or ts.shape != vs.shape:
            raise ContractError("need matching node arrays")
        if np.any(np.diff(ts) <= 0):
            raise ContractError("node abscissae must be strictly increasing")
        if np.any(np.diff(vs) > 0) or np.any(vs <= 0):
            raise ContractError("tabulated approximation function must be positive nonincreasing")
        self.ts, self.vs = ts, vs
        self.strict = bool(np.all(np.diff(vs) < 0))

    def __call__(self, T):
        arr, scalar = _as_array(T)
        if np.any(arr <= 0):
            raise DomainError("approximation functions are defined for T > 0")
        return _ret(np.interp(arr, self.ts, self.vs), scalar)

    def level_set_sup(self, v):
        arr, scalar = _as_array(v)
        # number of nodes with value >= v (values are nonincreasing)
        idx = np.searchsorted(-self.vs, -arr, side="right")
        out = np.empty(arr.shape)
        n = self.ts.size
        inf_mask = idx >= n
        zero_mask = idx == 0
        mid = ~(inf_mask | zero_mask)
        out[inf_mask] = np.inf
        out[zero_mask] = 0.0
        if mid.any():
            i = idx[mid]
            t0, t1 = self.ts[i - 1], self.ts[i]
            v0, v1 = self.vs[i - 1], self.vs[i]
            frac = (v0 - arr[mid]) / (v0 - v1)
            out[mid] = np.minimum(t0 + frac * (t1 - t0), t1)
        return _ret(out, scalar)

    def to_config(self):
        return {"kind": "table", "nodes": [[float(t), float(v)] for t, v in zip(self.ts, self.vs)]}


class StepFunction(ApproxFunction):
    """Right-continuous nonincreasing step function.

    ``values[0]`` on ``(0, jumps[0])``, ``values[k]`` on ``[jumps[k-1], jumps[k])``.
    """

    strict = False
    continuous = False

    def __init__(self, jumps: Sequence[float], values: Sequence[float]):
        self.jumps = np.asarray(jumps, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.size != self.jumps.size + 1:
            raise ContractError("need one more value than jump points")
        if np.any(np.diff(self.jumps) <= 0) or np.any(self.jumps <= 0):
            raise ContractError("jump points must be positive and increasing")
        if np.any(np.diff(self.values) > 0) or np.any(self.values <= 0):
            raise ContractError("step values must be positive nonincreasing")

    def __call__(self, T):
        arr, scalar = _as_array(T)
        if np.any(arr <= 0):
            raise DomainError("approximation functions are defined for T > 0")
        return _ret(self.values[np.searchsorted(self.jumps, arr, side="right")], scalar)

    def left_limit(self, T):
        arr, scalar = _as_array(T)
        return _ret(self.values[np.searchsorted(self.jumps, arr, side="left")], scalar)

    def level_set_sup(self, v):
        arr, scalar = _as_array(v)
        idx = np.searchsorted(-self.values, -arr, side="right")
        out = np.empty(arr.shape)
        full = idx >= self.values.size
        out[full] = np.inf
        out[idx == 0] = 0.0
        mid = ~full & (idx > 0)
        out[mid] = self.jumps[idx[mid] - 1]
        return _ret(out, scalar)

    def to_config(self):
        return {"kind": "step", "jumps": self.jumps.tolist(), "values": self.values.tolist()}


class Scaled(ApproxFunction):
    """``c * g``."""

    def __init__(self, c: float, g: ApproxFunction):
        if not c > 0:
            raise ContractError("scale must be positive")
        self.c, self.g = float(c), g
        self.strict, self.continuous = g.strict, g.continuous

    def __call__(self, T):
        return self.c * self.g(T)

    def left_limit(self, T):
        return self.c * self.g.left_limit(T)

    def level_set_sup(self, v):
        return self.g.level_set_sup(np.asarray(v, dtype=float) / self.c)

    def to_config(self):
        return {"kind": "scaled", "c": self.c, "g": self.g.to_config()}


class ArgScaled(ApproxFunction):
    """``eps * g(T / eps)``."""

    def __init__(self, eps: float, g: ApproxFunction):
        if not eps > 0:
            raise ContractError("eps must be positive")
        self.eps, self.g = float(eps), g
        self.strict, self.continuous = g.strict, g.continuous

    def __call__(self, T):
        return self.eps * self.g(np.asarray(T, dtype=float) / self.eps)

    def left_limit(self, T):
        return self.eps * self.g.left_limit(np.asarray(T, dtype=float) / self.eps)

    def level_set_sup(self, v):
        s = self.g.level_set_sup(np.asarray(v, dtype=float) / self.eps)
        return self.eps * s

    def to_config(self):
        return {"kind": "arg_scaled", "eps": self.eps, "g": self.g.to_config()}


class DualApprox(ApproxFunction):
    """``g(T) = 1 / f^{-1}(1/T)`` for strictly decreasing continuous ``f``."""

    def __init__(self, f: ApproxFunction):
        if not (f.strict and f.continuous):
            raise ContractError("duality needs a strictly decreasing continuous function")
        self.f = f

    def __call__(self, T):
        arr, scalar = _as_array(T)
        if np.any(arr <= 0):
            raise DomainError("approximation functions are defined for T > 0")
        with np.errstate(divide="ignore"):
            return _ret(1.0 / np.asarray(self.f.level_set_sup(1.0 / arr)), scalar)

    def level_set_sup(self, v):
        arr, scalar = _as_array(v)
        out = np.full(arr.shape, np.inf)
        pos = arr > 0
        out[pos] = 1.0 / np.asarray(self.f(1.0 / arr[pos]))
        return _ret(out, scalar)

    def dual(self):
        return self.f

    def to_config(self):
        return {"kind": "dual", "f": self.f.to_config()}


class DirichletExponent(_LogDecreasing):
    """``g(T) = alpha^{-1}(1 / beta(T))`` with ``alpha, beta`` the product weights."""

    def __init__(self, ws: WeightSystem):
        self.ws = ws

    def log_eval(self, t):
        return self.ws.alpha_product.log_inverse(-self.ws.beta_product.log_eval(t))

    def log_level(self, w):
        return self.ws.beta_product.log_inverse(-self.ws.alpha_product.log_eval(w))

    def dual(self):
        return DirichletExponent(self.ws.transpose())

    def to_config(self):
        return {"kind": "dirichlet", "weights": self.ws.to_config()}


def duality_transform(f: ApproxFunction) -> ApproxFunction:
    """``g(T) = 1 / f^{-1}(1/T)``; an involution on strictly decreasing continuous functions."""
    return f.dual()


def dirichlet_exponent_function(ws: WeightSystem) -> DirichletExponent:
    return DirichletExponent(ws)


# ---------------------------------------------------------------------------
# Regularization
# ---------------------------------------------------------------------------


def breakpoint_set(beta: Sequence[WeightFunction], t_max: float, t_min: float = 1.0) -> np.ndarray:
    """Sorted points of ``Z_+ and beta_j^{-1}(Z_+)`` inside ``[t_min, t_max]``."""
    if not t_max >= t_min:
        raise ContractError("empty window")
    parts = [np.arange(max(1, math.ceil(t_min)), math.floor(t_max) + 1, dtype=float)]
    for b in beta:
        k_hi = math.floor(float(b(t_max)) * (1 + 1e-12))
        if k_hi >= 1:
            pts = np.asarray(b.inverse(np.arange(1, k_hi + 1, dtype=float)))
            parts.append(pts[(pts >= t_min) & (pts <= t_max)])
    return np.unique(np.concatenate(parts))


def regularize_continuity(g: ApproxFunction, beta: Sequence[WeightFunction],
                          t_max: float) -> TabulatedApprox:
    """Continuous piecewise linear replacement for a nonincreasing ``g`` on ``[1, t_max]``.

    Nodes are the breakpoint set ``W`` (plus ``t_max``).  At a node the value
    is the left limit of ``g`` there, which equals ``g`` wherever ``g`` is
    continuous.  Between nodes the set of admissible ``q`` is constant, so
    the windowed Dirichlet verdicts of ``g`` and of the replacement coincide.
    """
    if not t_max >= 1:
        raise ContractError("empty window")
    W = breakpoint_set(beta, t_max)
    if W.size == 0 or W[-1] < t_max:
        W = np.append(W, t_max)
    vals = np.asarray(g.left_limit(W), dtype=float)
    vals[-1] = float(g(t_max)) if W[-1] == t_max else vals[-1]
    vals = np.minimum.accumulate(vals)
    return TabulatedApprox(ts=W, vs=vals)


def _fix_runs(vals: np.ndarray, lower: bool) -> np.ndarray:
    """Break plateaus of a nonincreasing node sequence, staying on one side of it."""
    out = vals.copy()
    n = len(vals)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and vals[j + 1] == vals[i]:
            j += 1
        if j > i:
            if lower:
                # keep the start, lower the end of the run
                new_end = 0.5 * (vals[j] + vals[j + 1]) if j + 1 < n else 0.75 * vals[j]
                out[i:j + 1] = np.linspace(vals[i], new_end, j - i + 1)
            else:
                new_start = 0.5 * (vals[i - 1] + vals[i]) if i > 0 else 1.5 * vals[i]
                out[i:j + 1] = np.linspace(new_start, vals[j], j - i + 1)
        i = j + 1
    return out


def strictify(h: ApproxFunction, t_end: float) -> tuple[TabulatedApprox, TabulatedApprox]:
    """Strictly decreasing continuous envelopes ``h_minus <= h <= h_plus`` on ``[1, t_end]``.

    Nodes sit at the integers.  ``h_minus(l) = h(l+1)`` and
    ``h_plus(l) = h(l-1)`` (with ``h_plus(1) = 2 h(1)``), after which every
    plateau is broken: the last node of a plateau of ``h_minus`` moves to the
    midpoint with the next value, the first node of a plateau of ``h_plus``
    to the midpoint with the previous value.
    """
    N = int(math.floor(t_end))
    if N < 2:
        raise ContractError("need t_end >= 2")
    ls = np.arange(1, N + 1, dtype=float)
    hv = np.asarray(h(np.arange(1, N + 2, dtype=float)), dtype=float)
    minus = hv[1:].copy()
    plus = np.concatenate([[2.0 * hv[0]], hv[:N - 1]])
    minus = _fix_runs(minus, lower=True)
    plus = _fix_runs(plus, lower=False)
    return TabulatedApprox(ts=ls, vs=minus), TabulatedApprox(ts=ls, vs=plus)


# ---------------------------------------------------------------------------
# Changing-weights data
# ---------------------------------------------------------------------------


def changing_weights_rows(t_max: float, n_points: int = 1001):
    if not t_max >= 1:
        raise ContractError("t_max must be at least 1")
    g1, g2 = gamma_functions()
    step = t_max / (n_points - 1)
    t = np.arange(n_points) * step
    gam1 = g1.log_eval(t)
    gam2 = g2.log_eval(t)
    return t, gam1, gam2, t / 3.0, 2.0 * t / 3.0


def emit_changing_weights_csv(t_max: float, n_points: int = 1001, out=None) -> str:
    """CSV ``t,gamma1,gamma2,phi1,phi2`` on a uniform grid of ``[0, t_max]``."""
    cols = changing_weights_rows(t_max, n_points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "gamma1", "gamma2", "phi1", "phi2"])
    for row in zip(*cols):
        w.writerow([repr(float(x)) for x in row])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
