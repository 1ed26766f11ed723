"""Systoles along the weighted diagonal flow, weighted constants, and resonance sets.

Finite computations never certify bad approximability; traces are reported
as trends over a window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .errors import BudgetError, ContractError, RangeError
from .geometry import AffinePair
from .oracle import N_MAX, approx_witnesses, dirichlet_on_window, iter_q_box
from .weights import (
    ApproxFunction,
    ArgScaled,
    DirichletExponent,
    WeightSystem,
    certify_quasimultiplicative,
)

TREND_NOTE = "finite-window trend; not a certificate of bad approximability"


def golden_theta() -> float:
    return (math.sqrt(5.0) - 1.0) / 2.0


def liouville_theta(k_max: int = 5) -> Fraction:
    """``sum_{k <= k_max} 10^{-k!}`` as an exact rational."""
    return sum((Fraction(1, 10 ** math.factorial(k)) for k in range(1, k_max + 1)), Fraction(0))


def liouville_scales(k_max: int = 5) -> list[int]:
    """The designed denominators ``10^{k!}``, ``k < k_max``."""
    return [10 ** math.factorial(k) for k in range(1, k_max)]


def log_grid(t_max: float, factor: float = 1.05, t_min: float = 1.0) -> np.ndarray:
    if not (factor > 1 and t_max >= t_min > 0):
        raise ContractError("need factor > 1 and 0 < t_min <= t_max")
    k = int(math.floor(math.log(t_max / t_min) / math.log(factor) + 1e-9))
    ts = t_min * factor ** np.arange(k + 1)
    if ts[-1] < t_max * (1 - 1e-12):
        ts = np.append(ts, t_max)
    return ts


@dataclass
class SystoleTrace:
    times: np.ndarray
    systole: np.ndarray
    upper_bound: bool = False
    note: str = TREND_NOTE

    @property
    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate(self.systole)

    def decade_minima(self) -> dict[int, float]:
        """Running minimum at the last grid time below each power of ten."""
        out = {}
        rm = self.running_min
        for k in range(0, int(math.log10(self.times[-1]) + 1e-9) + 1):
            idx = np.searchsorted(self.times, 10.0 ** k * (1 + 1e-12), side="right") - 1
            if idx >= 0:
                out[k] = float(rm[idx])
        return out

    def decade_ratios(self) -> list[float]:
        mins = self.decade_minima()
        ks = sorted(mins)
        return [mins[b] / mins[a] for a, b in zip(ks, ks[1:])]

    def in_compact(self, lam: float) -> np.ndarray:
        """Membership in the set of lattices whose systole exceeds ``lam``."""
        return self.systole > lam

    def rows(self):
        for t, s, r in zip(self.times, self.systole, self.running_min):
            yield float(t), float(s), float(r)

    def to_json(self) -> dict:
        return {"times": self.times.tolist(), "systole": self.systole.tolist(),
                "running_min": self.running_min.tolist(), "upper_bound": self.upper_bound,
                "note": self.note}


def _pareto_records(R: np.ndarray, Q: np.ndarray):
    """For a single q-coordinate sorted by |q|: keep strict records of the row distance."""
    order = np.argsort(Q[:, 0], kind="stable")
    R, Q = R[order], Q[order]
    best = np.minimum.accumulate(R[:, 0])
    keep = np.ones(len(R), dtype=bool)
    keep[1:] = R[1:, 0] < best[:-1]
    return R[keep], Q[keep]


def _canonical(q: np.ndarray) -> np.ndarray:
    first = q[np.arange(len(q)), np.argmax(q != 0, axis=1)]
    return q[first > 0]


def _scales(ws: WeightSystem, times: np.ndarray):
    g = DirichletExponent(ws)
    gt = np.asarray(g(times), dtype=float)
    sr = np.stack([1.0 / np.asarray(a(gt), dtype=float) for a in ws.alpha], axis=1)
    sq = np.stack([1.0 / np.asarray(b(times), dtype=float) for b in ws.beta], axis=1)
    return np.ascontiguousarray(sr), np.ascontiguousarray(sq)


def systole_trace(theta, ws: WeightSystem, T_grid, n_max: int = N_MAX) -> SystoleTrace:
    """Systole of ``a(g(T), T) Lambda_Theta`` on a grid of ``T``.

    The lattice has points ``(Theta q + p, q)``; the flow scales row ``i`` by
    ``1/alpha_i(g(T))`` and column ``j`` by ``1/beta_j(T)``.  The determinant
    is one, so Minkowski bounds the systole by 1 and only ``|q_j| <= beta_j(T)``
    can matter.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    n, m = theta.shape
    if (n, m) != (ws.n, ws.m):
        raise ContractError("theta shape does not match the weights")
    times = np.asarray(T_grid, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 1:
        raise ContractError("T grid must be increasing and >= 1")
    bounds = np.array([math.floor(float(b(times[-1])) * (1 + 1e-12)) for b in ws.beta],
                      dtype=np.int64)
    total = int(np.prod((2 * bounds + 1).astype(float))) - 1
    if total > n_max:
        raise BudgetError(f"{total} lattice candidates exceed the budget {n_max}",
                          attempted=total)
    Rs, Qs = [], []
    for q in iter_q_box(bounds):
        q = _canonical(q)
        x = q.astype(float) @ theta.T
        R = np.abs(x - np.rint(x))
        Q = np.abs(q).astype(float)
        if m == 1 and n == 1:
            R, Q = _pareto_records(R, Q)
        Rs.append(R)
        Qs.append(Q)
    R = np.ascontiguousarray(np.concatenate(Rs)) if Rs else np.zeros((0, n))
    Q = np.ascontiguousarray(np.concatenate(Qs)) if Qs else np.zeros((0, m))
    if m == 1 and n == 1 and len(R):
        R, Q = _pareto_records(R, Q)
        R, Q = np.ascontiguousarray(R), np.ascontiguousarray(Q)
    sr, sq = _scales(ws, times)
    # q = 0 contributes the unit vectors e_i scaled by 1/alpha_i(g(T))
    sys0 = sr.min(axis=1)
    if len(R):
        sysq = kernels.systole_grid(R, Q, sr, sq)
        sysv = np.minimum(sys0, sysq)
    else:
        sysv = sys0
    return SystoleTrace(times, np.asarray(sysv, dtype=float))


def _exact_distance(x: Fraction) -> Fraction:
    return abs(x - round(x))


def systole_upper_trace(theta_exact, ws: WeightSystem, T_grid,
                        candidates: Sequence[Sequence[int]]) -> SystoleTrace:
    """Upper bounds for the systole from explicit candidates, with exact distances.

    ``theta_exact`` is an n x m nested sequence of ``Fraction``; the values
    ``||Theta_i q||`` are computed exactly and only the (tiny but
    representable) results are rounded to floats.
    """
    th = [[Fraction(v) for v in row] for row in theta_exact]
    n, m = len(th), len(th[0])
    if (n, m) != (ws.n, ws.m):
        raise ContractError("theta shape does not match the weights")
    times = np.asarray(T_grid, dtype=float)
    R, Q = [], []
    for q in candidates:
        q = [int(v) for v in q]
        if len(q) != m or not any(q):
            raise ContractError("candidates must be nonzero integer m-vectors")
        R.append([float(_exact_distance(sum((a * b for a, b in zip(row, q)), Fraction(0))))
                  for row in th])
        Q.append([float(abs(v)) for v in q])
    sr, sq = _scales(ws, times)
    sysv = sr.min(axis=1)
    if R:
        R = np.ascontiguousarray(np.array(R, dtype=float))
        Q = np.ascontiguousarray(np.array(Q, dtype=float))
        sysv = np.minimum(sysv, kernels.systole_grid(R, Q, sr, sq))
    return SystoleTrace(times, np.asarray(sysv, dtype=float), upper_bound=True,
                        note="upper bound from exact candidates; " + TREND_NOTE)


def liouville_systole(k_max: int = 5, t_max: float = 1e30, factor: float = 1.05,
                      small: int = 1000) -> SystoleTrace:
    """Exact-candidate upper trace for the truncated Liouville number, n = m = 1."""
    th = liouville_theta(k_max)
    cands = [[q] for q in range(1, small + 1)] + [[q] for q in liouville_scales(k_max)]
    ws = WeightSystem.powers([1.0], [1.0])
    return systole_upper_trace([[th]], ws, log_grid(t_max, factor), cands)


# ---------------------------------------------------------------------------
# Weighted constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedProfile:
    rho: tuple
    sigma: tuple

    def __post_init__(self):
        rho = tuple(float(r) for r in self.rho)
        sigma = tuple(float(s) for s in self.sigma)
        if not rho or not sigma or min(rho + sigma) <= 0:
            raise ContractError("weights must be positive and nonempty")
        if abs(sum(rho) - 1) > 1e-12 or abs(sum(sigma) - 1) > 1e-12:
            raise ContractError("each weight vector must sum to 1")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self):
        return len(self.rho)

    @property
    def m(self):
        return len(self.sigma)

    @property
    def d(self):
        return self.n + self.m

    @property
    def r_minus(self):
        return min(self.rho + self.sigma)

    @property
    def r_plus(self):
        return max(self.rho + self.sigma)

    def weights(self) -> WeightSystem:
        return WeightSystem.powers(self.rho, self.sigma)


@dataclass(frozen=True)
class BadConstants:
    K: float
    kappa: float
    transposed_b: float
    eps_max: float

    def to_json(self):
        return {"K": self.K, "kappa": self.kappa, "transposed_b": self.transposed_b,
                "eps_max": self.eps_max}


def bad_constants_weighted(profile: WeightedProfile, b: float) -> BadConstants:
    """Constants of the weighted badly approximable transference."""
    if not b > 0:
        raise ContractError("b must be positive")
    d, rm, rp = profile.d, profile.r_minus, profile.r_plus
    K = d ** 3 * math.factorial(d) ** 2 / b ** (2 / rp - 1)
    kappa = 2 ** (-2 / rm) * d ** (-2 / rm - rp / (2 - rp)) * b ** (-rp / (2 - rp))
    transposed = b ** (2 / rp - 1) / d
    eps_max = (2 * d) ** (-1 / rm)
    return BadConstants(float(K), float(kappa), float(transposed), float(eps_max))


def epsilon_of_delta(ws: WeightSystem, delta: float, t_span: float = 1e6, n_grid: int = 1000,
                     M: float = math.e, k_cert: int = 40) -> float:
    """Largest ``eps`` with ``alpha_i(T) alpha_i(eps/T) <= delta`` and
    ``beta_j(eps T) beta_j(1/T) <= delta`` on a log grid of ``T`` in ``[1/t_span, t_span]``.

    Every component must carry a quasimultiplicativity certificate covering
    the grid; the answer is found by bisection in ``log eps``.
    """
    if not 0 < delta < 1:
        raise ContractError("delta must lie in (0, 1)")
    k_need = int(math.ceil(math.log(t_span) / math.log(M))) + 1
    if k_need > k_cert:
        raise RangeError(f"certificate range k <= {k_cert} does not cover T up to {t_span:g}")
    for h in ws.alpha + ws.beta:
        certify_quasimultiplicative(h, M, (-k_cert, k_cert))
    Ts = np.exp(np.linspace(-math.log(t_span), math.log(t_span), n_grid))

    def worst(log_eps: float) -> float:
        eps = math.exp(log_eps)
        vals = [np.asarray(a(Ts), dtype=float) * np.asarray(a(eps / Ts), dtype=float)
                for a in ws.alpha]
        vals += [np.asarray(b(eps * Ts), dtype=float) * np.asarray(b(1.0 / Ts), dtype=float)
                 for b in ws.beta]
        return float(max(v.max() for v in vals))

    hi = 0.0
    if worst(hi) <= delta:
        return 1.0
    lo = -1.0
    while worst(lo) > delta:
        lo *= 2
        if lo < -700:
            raise RangeError("no admissible eps above float underflow")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if worst(mid) <= delta:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return math.exp(lo)


# ---------------------------------------------------------------------------
# Resonance sets and improvability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResonanceSet:
    y: tuple
    delta: float
    m: int

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(int(v) for v in self.y))
        if not 0 < self.threshold < 0.5:
            raise ContractError("need 0 < (m+n) delta < 1/2")

    @property
    def n(self):
        return len(self.y)

    @property
    def threshold(self) -> float:
        return (self.m + len(self.y)) * self.delta

    def contains(self, eta) -> np.ndarray:
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        x = eta @ np.asarray(self.y, dtype=float)
        return np.abs(x - np.rint(x)) <= self.threshold


def resonance_membership(eta, sets: Sequence[ResonanceSet]) -> np.ndarray:
    """Boolean matrix: rows are samples of ``eta``, columns are the sets."""
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    if not sets:
        return np.zeros((len(eta), 0), dtype=bool)
    return np.stack([s.contains(eta) for s in sets], axis=1)


@dataclass
class ImprovabilityReport:
    epsilon: float
    delta: float
    witnesses: list
    T_nu: list
    samples: int
    solvable_pairs: int = 0
    checked_pairs: int = 0
    counterexamples: list = field(default_factory=list)
    frac_in_all: float | None = None
    inconclusive: bool = False

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "delta": self.delta,
                "witnesses": [list(y) for y in self.witnesses],
                "T_nu": [float(t) for t in self.T_nu], "samples": self.samples,
                "solvable_pairs": self.solvable_pairs, "checked_pairs": self.checked_pairs,
                "counterexamples": self.counterexamples,
                "frac_in_all": self.frac_in_all, "inconclusive": self.inconclusive}


def improvability_experiment(theta, ws: WeightSystem, f: ApproxFunction, delta: float,
                             eta_samples, window, epsilon: float | None = None,
                             separation: float = 10.0, n_max: int = N_MAX) -> ImprovabilityReport:
    """Check, per sampled ``eta``, the inclusion of improvable shifts in resonance sets.

    Witnesses ``y_nu`` of ``||Theta^T y||_beta <= f(|y|_alpha)`` give scales
    ``T_nu = eps / f(Y_nu)``.  Whenever the system with
    ``g~(T) = eps g(T/eps)``, ``g`` the dual of ``f``, is solvable at
    ``T_nu``, the transference identity forces ``||eta . y_nu|| <= (m+n) delta``;
    any failure is recorded as a counterexample.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    n, m = theta.shape
    if not 0 < delta < 1 / (2 * (n + m)):
        raise ContractError("need 0 < delta < 1/(2(m+n))")
    eps = epsilon_of_delta(ws, delta) if epsilon is None else float(epsilon)
    t_min, t_max = float(window[0]), float(window[1])
    # scales T_nu <= t_max need f(Y_nu) >= eps / t_max
    fv_min = eps / t_max
    tw = AffinePair(theta)
    y_max = float(f.level_set_sup(fv_min))
    wl = approx_witnesses(tw, ws, f, y_max, n_max=n_max, separation=separation)
    fy = np.asarray(f(wl.norms), dtype=float).reshape(-1) if len(wl) else np.zeros(0)
    T_nu = eps / fy if len(wl) else np.zeros(0)
    inside = (T_nu >= t_min) & (T_nu <= t_max)
    ys = [tuple(int(v) for v in y) for y in wl.y[inside]]
    Ts = [float(t) for t in T_nu[inside]]
    rep = ImprovabilityReport(eps, float(delta), ys, Ts, 0)
    if not ys:
        rep.inconclusive = True
        return rep
    sets = [ResonanceSet(y, delta, m) for y in ys]
    g_tilde = ArgScaled(eps, f.dual())
    etas = np.atleast_2d(np.asarray(eta_samples, dtype=float))
    rep.samples = len(etas)
    in_all = 0
    for k, eta in enumerate(etas):
        report = dirichlet_on_window(AffinePair(theta, eta), ws, g_tilde, (t_min, max(Ts)),
                                     n_max=n_max)
        member = resonance_membership(eta, sets)[0]
        solv = [report.covers(t) for t in Ts]
        rep.solvable_pairs += sum(solv)
        rep.checked_pairs += len(solv)
        in_all += bool(member.all())
        for nu, (s, mem) in enumerate(zip(solv, member)):
            if s and not mem:
                rep.counterexamples.append({"sample": k, "nu": nu, "eta": eta.tolist()})
    rep.frac_in_all = in_all / len(etas)
    return rep


def transference_terms(theta, eta, y, q):
    """Both sides of ``eta . y = sum_j q_j (Theta^T y)_j - sum_i (Theta_i q - eta_i) y_i``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    eta, y, q = (np.asarray(v, dtype=float) for v in (eta, y, q))
    lhs = float(eta @ y)
    a = q * (theta.T @ y)
    b = (theta @ q - eta) * y
    rhs = float(a.sum() - b.sum())
    scale = float(np.abs(a).sum() + np.abs(b).sum() + abs(lhs))
    return lhs, rhs, scale


def verify_transference_identity(trials: int = 10_000, seed: int = 0, max_dim: int = 3,
                                 q_bound: int = 1000) -> dict:
    """Largest relative discrepancy over random instances with ``n, m <= max_dim``."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for _ in range(trials):
        n, m = rng.integers(1, max_dim + 1, size=2)
        theta = rng.random((n, m))
        eta = rng.random(n)
        y = rng.integers(-q_bound, q_bound + 1, size=n)
        q = rng.integers(-q_bound, q_bound + 1, size=m)
        lhs, rhs, scale = transference_terms(theta, eta, y, q)
        worst = max(worst, abs(lhs - rhs) / max(scale, 1e-300))
    return {"trials": trials, "max_relative_error": worst}
