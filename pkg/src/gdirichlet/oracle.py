"""Windowed Dirichlet solvability and approximability witnesses.

For a pair ``(Theta, eta)`` and a nonzero ``q``, the set of ``T`` at which
``q`` solves

    ||Theta_i q - eta_i|| <= alpha_i(g(T)),   |q_j| <= beta_j(T)

is the interval ``[|q|_beta, sup{T : g(T) >= max_i alpha_i^{-1}(r_i)}]`` with
``r_i = ||Theta_i q - eta_i||``.  The right end does not depend on the
window, so solvability on ``[T_min, T_max]`` is exactly the statement that
the union of these intervals over ``|q_j| <= beta_j(T_max)`` covers the
window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BudgetError, ContractError
from .geometry import AffinePair
from .weights import (
    ApproxFunction,
    DirichletExponent,
    Scaled,
    TabulatedApprox,
    WeightSystem,
    breakpoint_set,
)

MERGE_RTOL = 1e-12
N_MAX = 10_000_000


def _check_dims(pair: AffinePair, ws: WeightSystem):
    if pair.n != ws.n or pair.m != ws.m:
        raise ContractError(f"pair is {pair.n}x{pair.m} but weights are {ws.n}x{ws.m}")


def row_distances(pair: AffinePair, q: np.ndarray) -> np.ndarray:
    """``||Theta_i q - eta_i||`` for each row ``i`` and each ``q`` (rows of ``q``)."""
    eta = pair.eta - np.floor(pair.eta)
    x = np.asarray(q, dtype=float) @ pair.theta.T - eta
    return np.abs(x - np.rint(x))


def _alpha_level(ws: WeightSystem, r: np.ndarray) -> np.ndarray:
    return np.max(np.stack([np.asarray(a.inverse(r[:, i])) for i, a in enumerate(ws.alpha)],
                           axis=1), axis=1)


def intervals_for(pair: AffinePair, ws: WeightSystem, g: ApproxFunction, q: np.ndarray):
    """Vectorized witness intervals: ``(left, right, exact_hit)`` arrays.

    Empty intervals are returned with ``right < left``.
    """
    q = np.atleast_2d(np.asarray(q))
    r = row_distances(pair, q)
    left = np.asarray(ws.beta_norm(np.abs(q).astype(float)), dtype=float).reshape(-1)
    v = _alpha_level(ws, r)
    right = np.full(left.shape, -np.inf)
    # the interval is nonempty exactly when g(left) >= v
    live = np.asarray(g(left), dtype=float).reshape(-1) >= v
    if live.any():
        right[live] = np.asarray(g.level_set_sup(v[live]), dtype=float).reshape(-1)
        right[live] = np.maximum(right[live], left[live])
    exact = np.all(r == 0, axis=1)
    return left, right, exact


def witness_interval(pair: AffinePair, q, ws: WeightSystem, g: ApproxFunction):
    """``[|q|_beta, g^{-1}(max_i alpha_i^{-1}(r_i))]`` or ``None`` when empty."""
    _check_dims(pair, ws)
    q = np.asarray(q, dtype=np.int64).reshape(1, -1)
    if q.shape[1] != pair.m:
        raise ContractError("q has the wrong length")
    if not np.any(q):
        raise ContractError("q must be nonzero")
    left, right, _ = intervals_for(pair, ws, g, q)
    if right[0] < left[0]:
        return None
    return float(left[0]), float(right[0])


@dataclass
class DirichletReport:
    window: tuple[float, float]
    q: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    exact: np.ndarray
    right_closed: bool
    covered: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    candidates: int = 0

    @property
    def verdict(self) -> str:
        return "dirichlet_on_window" if not self.gaps else "fails_on_window"

    @property
    def ok(self) -> bool:
        return not self.gaps

    @property
    def exact_hits(self) -> list:
        return [tuple(int(x) for x in qq) for qq in self.q[self.exact]]

    def covers(self, T: float) -> bool:
        """Whether ``T`` (inside the window) lies in the union of witness intervals."""
        t_min, t_max = self.window
        if not t_min <= T <= t_max:
            raise ContractError("point outside the window")
        for l, r in self.gaps:
            if l < T < r or (T == l == t_min) or (T == r == t_max):
                return False
        return True

    def restrict(self, t_max: float) -> "DirichletReport":
        """The report for ``[T_min, t_max]`` derived from the same witnesses."""
        t_min, big = self.window
        if not t_min <= t_max <= big:
            raise ContractError("restricted window must lie inside the original")
        keep = self.lefts <= t_max
        return _assemble(self.q[keep], self.lefts[keep], self.rights[keep], self.exact[keep],
                         (t_min, t_max), self.right_closed, self.candidates)

    def to_json(self) -> dict:
        t_min, t_max = self.window
        wit = []
        for qq, l, r in zip(self.q, self.lefts, self.rights):
            wit.append({"q": [int(x) for x in qq],
                        "interval": [float(l), float(min(r, t_max))]})
        return {
            "verdict": self.verdict,
            "window": [float(t_min), float(t_max)],
            "gaps": [[float(a), float(b)] for a, b in self.gaps],
            "covered": [[float(a), float(b)] for a, b in self.covered],
            "witnesses": wit,
            "exact_hits": [list(h) for h in self.exact_hits],
        }


def _assemble(q, lefts, rights, exact, window, right_closed, candidates) -> DirichletReport:
    t_min, t_max = window
    rel = (rights >= t_min) & (lefts <= t_max) & (rights >= lefts)
    q, lefts, rights, exact = q[rel], lefts[rel], rights[rel], exact[rel]
    order = np.lexsort((rights, lefts))
    q, lefts, rights, exact = q[order], lefts[order], rights[order], exact[order]
    ml, mr = kernels.merge_sorted(np.ascontiguousarray(lefts), np.ascontiguousarray(rights),
                                  MERGE_RTOL)
    covered = []
    gaps = []
    reach = t_min
    started = False
    for l, r in zip(ml, mr):
        lo, hi = max(l, t_min), min(r, t_max)
        if not started:
            if l > t_min * (1 + MERGE_RTOL):
                gaps.append((t_min, min(l, t_max)))
            started = True
        elif l > reach * (1 + MERGE_RTOL):
            gaps.append((reach, min(l, t_max)))
        covered.append((lo, hi))
        reach = max(reach, r)
        if reach >= t_max:
            break
    if not started:
        gaps.append((t_min, t_max))
    elif reach < t_max:
        gaps.append((reach, t_max))
    elif not right_closed:
        # open right ends: t_max needs an interval reaching strictly past it
        reaching = rights[(lefts <= t_max)]
        if reaching.size and reaching.max() == t_max:
            gaps.append((t_max, t_max))
    gaps = [(float(a), float(b)) for a, b in gaps if b >= a]
    rep = DirichletReport((float(t_min), float(t_max)), q, lefts, rights, exact, right_closed,
                          [(float(a), float(b)) for a, b in covered], gaps, candidates)
    return rep


def q_box_bounds(ws: WeightSystem, t_max: float) -> np.ndarray:
    """Integer bounds ``floor(beta_j(t_max))`` (with a relative guard for exact integers)."""
    return np.array([math.floor(float(b(t_max)) * (1 + 1e-12)) for b in ws.beta], dtype=np.int64)


def iter_q_box(bounds: np.ndarray, chunk: int = 1 << 18):
    """Yield arrays of nonzero integer vectors with ``|q_j| <= bounds[j]`` in lexicographic order."""
    m = len(bounds)
    if m == 1:
        k = int(bounds[0])
        allq = np.concatenate([np.arange(-k, 0), np.arange(1, k + 1)]).reshape(-1, 1)
        for s in range(0, len(allq), chunk):
            yield allq[s:s + chunk]
        return
    rest = [np.arange(-int(b), int(b) + 1) for b in bounds[1:]]
    mesh = np.stack([g.ravel() for g in np.meshgrid(*rest, indexing="ij")], axis=1)
    per = max(1, chunk // len(mesh))
    firsts = np.arange(-int(bounds[0]), int(bounds[0]) + 1)
    for s in range(0, len(firsts), per):
        block = firsts[s:s + per]
        q = np.concatenate([np.repeat(block, len(mesh)).reshape(-1, 1),
                            np.tile(mesh, (len(block), 1))], axis=1)
        q = q[np.any(q != 0, axis=1)]
        if len(q):
            yield q


def _check_tabulation(g: ApproxFunction, ws: WeightSystem, t_max: float):
    if isinstance(g, TabulatedApprox):
        W = breakpoint_set(ws.beta, min(t_max, g.ts[-1]))
        W = W[W >= g.ts[0]]
        idx = np.searchsorted(g.ts, W)
        idx = np.clip(idx, 0, g.ts.size - 1)
        near = np.minimum(np.abs(g.ts[idx] - W), np.abs(g.ts[np.maximum(idx - 1, 0)] - W))
        if np.any(near > 1e-9 * np.maximum(W, 1.0)):
            raise ContractError("tabulated g must have nodes at every breakpoint of "
                                "Z_+ and beta_j^{-1}(Z_+); use regularize_continuity")


def dirichlet_on_window(pair: AffinePair, ws: WeightSystem, g: ApproxFunction, window,
                        n_max: int = N_MAX) -> DirichletReport:
    """Exact windowed verdict: does every ``T`` in the window admit a solution ``q != 0``?"""
    _check_dims(pair, ws)
    t_min, t_max = float(window[0]), float(window[1])
    if not (1.0 <= t_min <= t_max):
        raise ContractError("window must satisfy 1 <= T_min <= T_max")
    _check_tabulation(g, ws, t_max)
    bounds = q_box_bounds(ws, t_max)
    total = int(np.prod((2 * bounds + 1).astype(float))) - 1
    if total > n_max:
        raise BudgetError(f"{total} candidate q exceed the budget {n_max} "
                          f"(bounds {bounds.tolist()})", attempted=total)
    qs, ls, rs, es = [], [], [], []
    for q in iter_q_box(bounds):
        left, right, exact = intervals_for(pair, ws, g, q)
        keep = (right >= left) & (right >= t_min)
        if keep.any():
            qs.append(q[keep])
            ls.append(left[keep])
            rs.append(right[keep])
            es.append(exact[keep])
    if qs:
        q = np.concatenate(qs)
        lefts, rights, exact = np.concatenate(ls), np.concatenate(rs), np.concatenate(es)
    else:
        q = np.zeros((0, pair.m), dtype=np.int64)
        lefts = rights = np.zeros(0)
        exact = np.zeros(0, dtype=bool)
    return _assemble(q, lefts, rights, exact, (t_min, t_max), g.continuous, total)


# ---------------------------------------------------------------------------
# Approximability witnesses
# ---------------------------------------------------------------------------


@dataclass
class ApproxWitnessList:
    y: np.ndarray
    norms: np.ndarray
    distances: np.ndarray
    quality: np.ndarray
    Y_max: float

    def __len__(self):
        return len(self.y)

    def separated(self, growth: float = 10.0) -> "ApproxWitnessList":
        """Greedy subsequence with ``|y_{k+1}| >= growth |y_k|``."""
        keep = []
        last = None
        for i, Y in enumerate(self.norms):
            if last is None or Y >= growth * last:
                keep.append(i)
                last = Y
        keep = np.array(keep, dtype=np.int64)
        return ApproxWitnessList(self.y[keep], self.norms[keep], self.distances[keep],
                                 self.quality[keep], self.Y_max)

    def to_json(self) -> dict:
        return {"Y_max": float(self.Y_max),
                "witnesses": [{"y": [int(v) for v in yy], "norm": float(Y),
                               "distance": float(dd), "quality": float(qq)}
                              for yy, Y, dd, qq in zip(self.y, self.norms, self.distances,
                                                       self.quality)]}


def approx_witnesses(pair: AffinePair, ws: WeightSystem, f: ApproxFunction, Y_max: float,
                     n_max: int = N_MAX, separation: float | None = None) -> ApproxWitnessList:
    """Integer ``y != 0`` (up to sign) with ``||Theta^T y||_beta <= f(|y|_alpha)``, ``|y|_alpha <= Y_max``.

    ``Theta`` is ``pair.theta`` (n x m) and ``y`` ranges over ``Z^n``; pass the
    transposed pair and weights to test ``Theta`` itself.
    """
    _check_dims(pair, ws)
    bounds = np.array([math.floor(float(a(Y_max)) * (1 + 1e-12)) for a in ws.alpha],
                      dtype=np.int64)
    total = int(np.prod((2 * bounds + 1).astype(float))) - 1
    if total > n_max:
        raise BudgetError(f"{total} candidate y exceed the budget {n_max}", attempted=total)
    ys, Ys, ds = [], [], []
    for y in iter_q_box(bounds):
        # canonical sign: first nonzero coordinate positive
        first = y[np.arange(len(y)), np.argmax(y != 0, axis=1)]
        y = y[first > 0]
        x = y.astype(float) @ pair.theta
        dist = np.asarray(ws.beta_norm(np.abs(x - np.rint(x))), dtype=float).reshape(-1)
        Y = np.asarray(ws.alpha_norm(np.abs(y).astype(float)), dtype=float).reshape(-1)
        ok = (Y <= Y_max) & (dist <= np.asarray(f(Y), dtype=float).reshape(-1))
        ys.append(y[ok])
        Ys.append(Y[ok])
        ds.append(dist[ok])
    if ys:
        y, Y, dist = np.concatenate(ys), np.concatenate(Ys), np.concatenate(ds)
    else:
        y, Y, dist = np.zeros((0, pair.n), dtype=np.int64), np.zeros(0), np.zeros(0)
    order = np.lexsort((dist, Y))
    y, Y, dist = y[order], Y[order], dist[order]
    quality = np.asarray(f(Y), dtype=float).reshape(-1) - dist if len(Y) else np.zeros(0)
    out = ApproxWitnessList(y, Y, dist, quality, float(Y_max))
    return out.separated(separation) if separation else out


@dataclass
class ConstantScan:
    b_grid: list
    dirichlet: list
    approximable: list
    dirichlet_flip: float | None
    approx_flip: float | None

    def to_json(self) -> dict:
        return {"b_grid": [float(b) for b in self.b_grid],
                "dirichlet": list(self.dirichlet),
                "approximable": list(self.approximable),
                "dirichlet_flip": self.dirichlet_flip,
                "approx_flip": self.approx_flip,
                "note": "finite-window surrogate; thresholds are empirical"}


def _first_true(grid, flags):
    for b, f in zip(grid, flags):
        if f:
            return float(b)
    return None


def dirichlet_constant_scan(pair: AffinePair, ws: WeightSystem, window, b_grid,
                            Y_max: float | None = None, tail_start: float | None = None,
                            n_max: int = N_MAX) -> ConstantScan:
    """Verdicts for ``b * g_{alpha,beta}`` over a grid of constants ``b``.

    Dirichlet verdicts use the window.  ``Theta`` counts as approximable with
    constant ``b`` when a witness of ``||Theta q||_alpha <= b g(|q|_beta)``
    exists with ``|q|_beta`` in the tail ``[tail_start, Y_max]`` (by default
    the upper half of the logarithmic range), the finite surrogate of
    "infinitely many".
    """
    b_grid = sorted(float(b) for b in b_grid)
    if not b_grid or b_grid[0] <= 0:
        raise ContractError("b grid must be positive")
    Y_max = float(window[1]) if Y_max is None else float(Y_max)
    tail_start = math.sqrt(Y_max) if tail_start is None else float(tail_start)
    g = DirichletExponent(ws)
    dirichlet, approx = [], []
    tw = AffinePair(pair.theta.T)
    wt = ws.transpose()
    base = approx_witnesses(tw, wt, Scaled(b_grid[-1], g), Y_max, n_max=n_max)
    for b in b_grid:
        rep = dirichlet_on_window(pair, ws, Scaled(b, g), window, n_max=n_max)
        dirichlet.append(rep.ok)
        fb = np.asarray(b * g(base.norms), dtype=float).reshape(-1) if len(base) else np.zeros(0)
        hit = (base.distances <= fb) & (base.norms >= tail_start)
        approx.append(bool(np.any(hit)))
    return ConstantScan(b_grid, dirichlet, approx, _first_true(b_grid, dirichlet),
                        _first_true(b_grid, approx))
