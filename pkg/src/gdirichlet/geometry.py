"""Lattices, grids, diagonal scalings, boxes and lattice-point search.

The lattice attached to a matrix ``Theta`` (n x m) is generated by the
block-unipotent matrix ``u_Theta = [[I_n, Theta], [0, I_m]]``; the grid for
a pair ``(Theta, eta)`` is the same lattice shifted by ``(-eta, 0)``, so its
points are ``(Theta q + p - eta, q)``.  The dual lattice is generated by
``[[I_n, 0], [-Theta^T, I_m]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BudgetError, ContractError
from .weights import WeightSystem

MEMBERSHIP_TOL = 1e-12
N_MAX = 10_000_000


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AffinePair:
    theta: np.ndarray
    eta: np.ndarray

    def __init__(self, theta, eta=None):
        th = np.atleast_2d(np.asarray(theta, dtype=float))
        if th.ndim != 2:
            raise ContractError("theta must be a matrix")
        if eta is None:
            eta = np.zeros(th.shape[0])
        et = np.atleast_1d(np.asarray(eta, dtype=float))
        if et.shape != (th.shape[0],):
            raise ContractError(f"eta must have length n = {th.shape[0]}")
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(et))):
            raise ContractError("theta and eta must be finite")
        object.__setattr__(self, "theta", _frozen(th))
        object.__setattr__(self, "eta", _frozen(et))

    @property
    def n(self):
        return self.theta.shape[0]

    @property
    def m(self):
        return self.theta.shape[1]

    @property
    def d(self):
        return self.n + self.m

    def transposed(self) -> "AffinePair":
        """The matrix ``Theta^T`` (shift zero), for the dual approximation problem."""
        return AffinePair(self.theta.T)


@dataclass(frozen=True)
class GridBasis:
    basis: np.ndarray
    shift: np.ndarray

    def __init__(self, basis, shift=None):
        b = np.asarray(basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ContractError("basis must be square")
        if shift is None:
            shift = np.zeros(b.shape[0])
        s = np.asarray(shift, dtype=float)
        if s.shape != (b.shape[0],):
            raise ContractError("shift has the wrong length")
        if abs(np.linalg.det(b)) == 0:
            raise ContractError("basis is singular")
        object.__setattr__(self, "basis", _frozen(b))
        object.__setattr__(self, "shift", _frozen(s))

    @property
    def d(self):
        return self.basis.shape[0]

    @property
    def det(self):
        return float(abs(np.linalg.det(self.basis)))

    @property
    def is_lattice(self):
        return not np.any(self.shift)

    def points(self, z):
        z = np.asarray(z, dtype=float)
        return z @ self.basis.T + self.shift


@dataclass(frozen=True)
class DiagonalScaling:
    """``diag(entries)``; for a weight system, ``a(U, T) = diag(1/alpha_i(U), 1/beta_j(T))``."""

    entries: np.ndarray
    U: float | None = None
    T: float | None = None

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 1 or np.any(e <= 0):
            raise ContractError("scaling entries must be positive")
        object.__setattr__(self, "entries", _frozen(e))

    @classmethod
    def from_weights(cls, ws: WeightSystem, U: float, T: float) -> "DiagonalScaling":
        a = [1.0 / h(U) for h in ws.alpha]
        b = [1.0 / h(T) for h in ws.beta]
        return cls(np.array(a + b), float(U), float(T))

    @classmethod
    def weighted(cls, rho, sigma, T: float) -> "DiagonalScaling":
        """``a_{rho,sigma}(T) = diag(T^{rho_i}, T^{-sigma_j})``."""
        e = [T ** r for r in rho] + [T ** (-s) for s in sigma]
        return cls(np.array(e), None, float(T))

    @property
    def matrix(self):
        return np.diag(self.entries)

    def inverse(self) -> "DiagonalScaling":
        U = None if self.U is None else 1.0 / self.U
        T = None if self.T is None else 1.0 / self.T
        return DiagonalScaling(1.0 / self.entries, U, T)

    def apply(self, grid: GridBasis) -> GridBasis:
        e = self.entries
        return GridBasis(e[:, None] * grid.basis, e * grid.shift)


@dataclass(frozen=True)
class Parallelepiped:
    """Axis-aligned box ``|x_i| <= half_widths[i]``."""

    half_widths: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.half_widths, dtype=float)
        if h.ndim != 1 or np.any(h <= 0) or not np.all(np.isfinite(h)):
            raise ContractError("half widths must be positive and finite")
        object.__setattr__(self, "half_widths", _frozen(h))

    @classmethod
    def cube(cls, d: int, k: float = 1.0) -> "Parallelepiped":
        return cls(np.full(d, float(k)))

    @classmethod
    def weighted_box(cls, rho, sigma, b: float) -> "Parallelepiped":
        """``P_{rho,sigma}(b)``: half widths ``b^{rho_i/2}`` and ``b^{sigma_j/2}``."""
        return cls(np.array([b ** (r / 2) for r in rho] + [b ** (s / 2) for s in sigma]))

    @property
    def d(self):
        return self.half_widths.size

    @property
    def L(self):
        return float(np.prod(self.half_widths))

    @property
    def volume(self):
        return 2.0 ** self.d * self.L

    def scaled(self, k: float) -> "Parallelepiped":
        return Parallelepiped(self.half_widths * float(k))

    def pseudo_compound(self) -> "Parallelepiped":
        """Half widths ``L / lambda_i``."""
        return Parallelepiped(self.L / self.half_widths)

    def gauge(self, x):
        """Smallest ``s`` with ``x`` in ``s P``."""
        return np.max(np.abs(np.asarray(x, dtype=float)) / self.half_widths, axis=-1)


def pseudo_compound(P: Parallelepiped) -> Parallelepiped:
    return P.pseudo_compound()


def grid_from_pair(pair: AffinePair) -> GridBasis:
    """``u_{Theta,eta}``: basis ``[[I, Theta], [0, I]]`` with shift ``(-eta, 0)``."""
    n, m = pair.n, pair.m
    B = np.eye(n + m)
    B[:n, n:] = pair.theta
    shift = np.concatenate([-pair.eta, np.zeros(m)])
    return GridBasis(B, shift)


def dual_grid_from_pair(pair: AffinePair) -> GridBasis:
    """``u_{-Theta}^T``: basis ``[[I, 0], [-Theta^T, I]]`` (the dual lattice)."""
    n, m = pair.n, pair.m
    B = np.eye(n + m)
    B[n:, :n] = -pair.theta.T
    return GridBasis(B)


def dual_basis(G: GridBasis) -> GridBasis:
    """Inverse-transpose basis of a lattice."""
    if not G.is_lattice:
        raise ContractError("dual basis is defined for lattices (zero shift)")
    if G.det < 1e-12:
        raise ContractError("basis is too close to singular for a reliable dual")
    return GridBasis(np.linalg.inv(G.basis).T)


# ---------------------------------------------------------------------------
# Lattice point search
# ---------------------------------------------------------------------------


@dataclass
class BoxPoints:
    points: np.ndarray
    coeffs: np.ndarray
    nodes: int = 0

    def __len__(self):
        return len(self.coeffs)

    @property
    def empty(self):
        return len(self.coeffs) == 0


def _triangular_kind(B):
    if not np.any(np.tril(B, -1)):
        return "upper"
    if not np.any(np.triu(B, 1)):
        return "lower"
    return "general"


def _general_search(B, s, lo, hi, n_max, skip_zero, max_points):
    inv = np.linalg.inv(B)
    center = inv @ (0.5 * (lo + hi) - s)
    half = np.abs(inv) @ (0.5 * (hi - lo))
    z_lo = np.ceil(center - half - 1e-9).astype(np.int64)
    z_hi = np.floor(center + half + 1e-9).astype(np.int64)
    sizes = np.maximum(z_hi - z_lo + 1, 0)
    total = int(np.prod(sizes.astype(float)))
    if total > n_max:
        raise BudgetError(f"candidate count {total} exceeds budget {n_max}", attempted=total)
    if total == 0:
        return np.zeros((0, B.shape[0]), dtype=np.int64), 0
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(z_lo, z_hi)], indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)
    X = Z @ B.T + s
    ok = np.all((X >= lo) & (X <= hi), axis=1)
    if skip_zero:
        ok &= np.any(Z != 0, axis=1)
    return Z[ok][:max_points], total


def points_in_box(G: GridBasis, P: Parallelepiped, gamma=None, *, n_max: int = N_MAX,
                  skip_zero: bool = False, max_points: int | None = None,
                  tol: float = MEMBERSHIP_TOL) -> BoxPoints:
    """Exact list of grid points ``basis z + shift`` in ``P + gamma``.

    A point is inside when every ``|x_i - gamma_i| <= lambda_i + tol``.
    Triangular bases (upper or lower) use a depth-first search with exact
    per-level coefficient ranges; other bases enumerate the bounding box of
    the preimage.  ``skip_zero`` drops the coefficient vector ``z = 0``.
    """
    d = G.d
    if P.d != d:
        raise ContractError("box and grid dimensions differ")
    gamma = np.zeros(d) if gamma is None else np.asarray(gamma, dtype=float)
    lo = gamma - P.half_widths - tol
    hi = gamma + P.half_widths + tol
    max_points = np.iinfo(np.int64).max if max_points is None else int(max_points)
    B = np.ascontiguousarray(G.basis)
    s = np.ascontiguousarray(G.shift)
    kind = _triangular_kind(B)
    if kind == "general":
        Z, nodes = _general_search(B, s, lo, hi, n_max, skip_zero, max_points)
    else:
        perm = np.arange(d)[::-1] if kind == "lower" else np.arange(d)
        Bp = np.ascontiguousarray(B[np.ix_(perm, perm)])
        Zp, nodes, status = kernels.enum_upper(
            Bp, np.ascontiguousarray(s[perm]), np.ascontiguousarray(lo[perm]),
            np.ascontiguousarray(hi[perm]), int(n_max), bool(skip_zero), max_points)
        if status:
            raise BudgetError(f"lattice search exceeded the budget of {n_max} candidates",
                              attempted=nodes)
        Z = np.empty_like(Zp)
        Z[:, perm] = Zp
    Z = np.asarray(Z, dtype=np.int64)
    return BoxPoints(G.points(Z), Z, int(nodes))


def has_nonzero_point(G: GridBasis, P: Parallelepiped, **kw) -> bool:
    return not points_in_box(G, P, skip_zero=True, max_points=1, **kw).empty


def meets(G: GridBasis, P: Parallelepiped, gamma=None, **kw) -> bool:
    return not points_in_box(G, P, gamma, max_points=1, **kw).empty


def successive_minima(G: GridBasis, P: Parallelepiped, k: int | None = None,
                      n_max: int = N_MAX) -> np.ndarray:
    """``mu_1 <= ... <= mu_k`` for the lattice ``G`` and the box ``P``.

    All nonzero points in an expanding dilate of ``P`` are enumerated, sorted
    by gauge, and greedily selected while they increase the rank.
    """
    if not G.is_lattice:
        raise ContractError("successive minima need a lattice")
    d = G.d
    k = d if k is None else int(k)
    if not 1 <= k <= d:
        raise ContractError("k must be between 1 and d")
    s = (G.det / P.L) ** (1.0 / d)
    for _ in range(200):
        res = points_in_box(G, P.scaled(s), skip_zero=True, n_max=n_max)
        if len(res) >= k:
            gauges = P.gauge(res.points)
            order = np.argsort(gauges, kind="stable")
            basis = []
            minima = []
            for idx in order:
                v = res.coeffs[idx].astype(float)
                w = v.copy()
                for b in basis:
                    w -= (w @ b) * b
                nv = np.linalg.norm(w)
                if nv > 1e-9 * max(1.0, np.linalg.norm(v)):
                    basis.append(w / nv)
                    minima.append(float(gauges[idx]))
                    if len(minima) == k:
                        return np.array(minima)
        s *= 2.0
    raise BudgetError("successive minima search did not terminate")


# ---------------------------------------------------------------------------
# Transference lemma checks
# ---------------------------------------------------------------------------


def c_small(d: int) -> float:
    """``c_d = d^{1/(2(d-1))}``."""
    return d ** (1.0 / (2 * (d - 1)))


def c_large(d: int) -> float:
    """``C_d = d * d!``."""
    return float(d * math.factorial(d))


def random_lattice(d: int, rng: np.random.Generator) -> GridBasis:
    """Unipotent upper-triangular (entries in [-1, 1]) times a log-uniform diagonal, det 1."""
    U = np.eye(d)
    iu = np.triu_indices(d, 1)
    U[iu] = rng.uniform(-1.0, 1.0, size=len(iu[0]))
    diag = np.exp(rng.uniform(math.log(0.25), math.log(4.0), size=d))
    diag /= np.prod(diag) ** (1.0 / d)
    return GridBasis(U * diag[None, :])


def random_shape(d: int, rng: np.random.Generator) -> Parallelepiped:
    return Parallelepiped(np.exp(rng.uniform(math.log(0.5), math.log(2.0), size=d)))


@dataclass
class TransferenceReport:
    dim: int
    trials: int
    applicable: int = 0
    violations: int = 0
    nonzero_violations: int = 0
    gamma_checks: int = 0
    scale_ratios: list = field(default_factory=list)

    def histogram(self, bins=None):
        if not self.scale_ratios:
            return {"edges": [], "counts": []}
        bins = np.linspace(0.0, 1.0, 11) if bins is None else bins
        r = np.clip(np.asarray(self.scale_ratios), bins[0], bins[-1])
        counts, edges = np.histogram(r, bins=bins)
        return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def check_part1(G: GridBasis, P: Parallelepiped, c: float | None = None):
    """Return (applicable, violated, mu1/c) for one lattice and box.

    Applicable when ``P*`` contains a nonzero point of the dual lattice;
    violated when then ``c P`` has no nonzero lattice point.
    """
    c = c_small(G.d) if c is None else c
    dual = dual_basis(G)
    applicable = has_nonzero_point(dual, P.pseudo_compound())
    violated = applicable and not has_nonzero_point(G, P.scaled(c))
    mu1 = successive_minima(G, P, 1)[0]
    return applicable, violated, mu1 / c


def verify_transference_part1(dim: int, trials: int, seed: int = 0,
                              spread=(0.7, 1.3)) -> TransferenceReport:
    """Random lattices; ``P`` is scaled so that ``mu_1(P*, dual)`` is uniform in ``spread``."""
    rng = np.random.default_rng(seed)
    rep = TransferenceReport(dim, trials)
    c = c_small(dim)
    for _ in range(trials):
        G = random_lattice(dim, rng)
        P0 = random_shape(dim, rng)
        mstar = successive_minima(dual_basis(G), P0.pseudo_compound(), 1)[0]
        u = rng.uniform(*spread)
        P = P0.scaled((mstar / u) ** (1.0 / (dim - 1)))
        applicable, violated, ratio = check_part1(G, P, c)
        if applicable:
            rep.applicable += 1
            rep.violations += int(violated)
            rep.scale_ratios.append(float(ratio))
    return rep


def check_part2(G: GridBasis, P: Parallelepiped, gammas, C: float | None = None):
    """Return (applicable, gamma_failures, nonzero_failed) for one lattice and box."""
    C = c_large(G.d) if C is None else C
    if has_nonzero_point(dual_basis(G), P.pseudo_compound()):
        return False, 0, False
    box = P.scaled(C / P.L)
    fails = sum(0 if meets(G, box, g) else 1 for g in gammas)
    nonzero_failed = not has_nonzero_point(G, box)
    return True, fails, nonzero_failed


def verify_transference_part2(dim: int, trials: int, gamma_samples: int,
                              seed: int = 0) -> TransferenceReport:
    """Random lattices with ``P* `` free of nonzero dual points; random shifts ``gamma``."""
    rng = np.random.default_rng(seed)
    rep = TransferenceReport(dim, trials)
    C = c_large(dim)
    for _ in range(trials):
        G = random_lattice(dim, rng)
        P0 = random_shape(dim, rng)
        mstar = successive_minima(dual_basis(G), P0.pseudo_compound(), 1)[0]
        u = rng.uniform(0.5, 1.0)
        P = P0.scaled(u * mstar ** (1.0 / (dim - 1)))
        gammas = rng.uniform(0.0, 1.0, size=(gamma_samples, dim)) @ G.basis.T
        applicable, fails, nz = check_part2(G, P, gammas, C)
        if applicable:
            rep.applicable += 1
            rep.gamma_checks += gamma_samples
            rep.violations += int(fails > 0)
            rep.nonzero_violations += int(nz)
            rep.scale_ratios.append(float(successive_minima(G, P.scaled(C / P.L), 1)[0]))
    return rep
