"""Bond-percolation theory of outbreak sizes on configuration-model graphs.

With degree distribution p_k, G0(x) = sum p_k x^k and G1(x) = G0'(x)/G0'(1).
For transmissibility T the probability that an edge does not lead into the
giant outbreak solves u = G1(1 - T + T u), and the giant outbreak occupies
S = 1 - G0(1 - T + T u) of the network.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import DirectedGraph


@dataclass(frozen=True)
class GeneratingFunctions:
    pk: np.ndarray  # pk[k] = P(degree == k)

    def __post_init__(self):
        p = np.asarray(self.pk, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0):
            raise ValueError("pk must be a non-empty non-negative vector")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"pk sums to {p.sum()}, not 1")
        object.__setattr__(self, "pk", p)

    @classmethod
    def from_degrees(cls, degrees) -> "GeneratingFunctions":
        d = np.asarray(degrees, dtype=np.int64)
        if d.size == 0:
            raise ValueError("no degrees given")
        return cls(np.bincount(d) / d.size)

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.pk.size), self.pk))

    @property
    def second_moment(self) -> float:
        k = np.arange(self.pk.size)
        return float(np.dot(k * k, self.pk))

    def g1_coefficients(self) -> np.ndarray:
        """Coefficients of G1, lowest order first."""
        k = np.arange(1, self.pk.size)
        if self.mean == 0:
            return np.ones(1)
        coef = k * self.pk[1:] / self.mean
        return coef if coef.size else np.ones(1)

    def G0(self, x):
        return np.polyval(self.pk[::-1], x)

    def G1(self, x):
        return np.polyval(self.g1_coefficients()[::-1], x)


def from_graph(g: DirectedGraph) -> GeneratingFunctions:
    """Empirical undirected degree distribution of ``g``."""
    if g.node_count == 0:
        raise ValueError("graph has no nodes")
    return GeneratingFunctions.from_degrees(g.undirected_degree())


def critical_transmissibility(gf: GeneratingFunctions) -> float:
    """<k> / (<k^2> - <k>), clamped to (0, 1]; 1 when no epidemic is possible."""
    k1, k2 = gf.mean, gf.second_moment
    if k2 <= k1:
        return 1.0
    return float(min(1.0, k1 / (k2 - k1)))


@dataclass
class OutbreakTheory:
    T: float
    u: float
    S: float
    T_c: float
    residual: float
    iterations: int
    converged: bool


def giant_outbreak_fraction(gf: GeneratingFunctions, T: float, tol: float = 1e-10, max_iter: int = 2_000_000) -> OutbreakTheory:
    if not 0.0 <= T <= 1.0:
        raise ValueError("T must lie in [0, 1]")
    coef = np.ascontiguousarray(gf.g1_coefficients(), dtype=float)
    u, resid, it = kernels.fixed_point(coef, float(T), float(tol), int(max_iter))
    u = float(min(max(u, 0.0), 1.0))
    S = float(1.0 - gf.G0(1.0 - T + T * u))
    S = min(max(S, 0.0), 1.0)
    return OutbreakTheory(float(T), u, S, critical_transmissibility(gf), float(resid), int(it), bool(resid < tol))


def theory_curve(gf: GeneratingFunctions, T_grid, tol: float = 1e-10) -> list:
    return [giant_outbreak_fraction(gf, float(T), tol) for T in T_grid]
