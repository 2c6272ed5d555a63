"""Domain types and pure functions for the zoning problem.

The vocabulary used by every other module:

- cells aggregate travel demand over small neighborhoods;
- a zone is a duplicate-free set of cells; its operating cost is an affine
  function of its squared diameter (two-way max shortest-path distance
  between its two most distant cells);
- a demand matrix holds strictly positive trip counts on ordered cell
  pairs; distances are a dense, normalized, possibly asymmetric matrix;
- duals pair a budget shadow price with per-pair coverage prices and feed
  the pricing step.

Everything here is immutable after construction and all operations are
pure, so values can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .errors import ValidationError

#: Reduced costs below this threshold are treated as "not improving".
RC_TOL = 1e-6

Pair = Tuple[int, int]


@dataclass(frozen=True)
class Cell:
    """One demand-aggregation cell.

    Attributes:
        id: dense index; ids of an instance form the range 0..n-1.
        centroid: (lat, lon) in degrees.
        network_node: id of the road-network node the centroid maps to.
        tag: optional external identifier (e.g. a hex-grid index string).
    """

    id: int
    centroid: Tuple[float, float]
    network_node: int = -1
    tag: Optional[str] = None

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError(f"cell id must be >= 0, got {self.id}")
        lat, lon = self.centroid
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValidationError(f"cell {self.id}: centroid not finite: {self.centroid}")


@dataclass(frozen=True)
class DemandMatrix:
    """Sparse ordered-pair demand d(i, j) with strictly positive entries.

    Zero-demand pairs are never stored.  Entries are re-keyed in sorted
    pair order at construction so iteration is deterministic regardless of
    how the mapping was assembled.
    """

    n_cells: int
    entries: Dict[Pair, float]

    def __post_init__(self):
        clean: Dict[Pair, float] = {}
        for (i, j), v in sorted(self.entries.items()):
            if not (0 <= i < self.n_cells and 0 <= j < self.n_cells):
                raise ValidationError(f"demand pair ({i},{j}) outside 0..{self.n_cells - 1}")
            v = float(v)
            if not math.isfinite(v) or v <= 0.0:
                raise ValidationError(f"demand d({i},{j})={v} must be finite and > 0")
            clean[(int(i), int(j))] = v
        object.__setattr__(self, "entries", clean)

    def get(self, i: int, j: int) -> float:
        return self.entries.get((i, j), 0.0)

    def pairs(self, include_self_pairs: bool = False) -> Iterable[Pair]:
        """Ordered pairs with positive demand; (i, i) pairs only when asked."""
        for (i, j) in self.entries:
            if i != j or include_self_pairs:
                yield (i, j)

    def total(self, include_self_pairs: bool = False) -> float:
        """Total demand on the pairs the optimization can ever cover."""
        return sum(v for (i, j), v in self.entries.items() if i != j or include_self_pairs)


@dataclass(frozen=True)
class DistanceMatrix:
    """Dense normalized cell-to-cell travel times.

    values[i, j] is the shortest-path time from cell i's node to cell j's
    node divided by the largest raw entry; asymmetry is allowed.  The
    divisor is kept so reports can be converted back to physical units.
    """

    values: np.ndarray
    normalization_factor: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"distance matrix must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("distance matrix contains non-finite entries")
        if np.any(np.diag(v) != 0.0):
            raise ValidationError("distance matrix diagonal must be zero")
        if np.any(v < 0.0) or np.any(v > 1.0 + 1e-12):
            raise ValidationError("normalized distances must lie in [0, 1]")
        if not (math.isfinite(self.normalization_factor) and self.normalization_factor > 0):
            raise ValidationError("normalization_factor must be positive and finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    def pair_diameter_sq(self, i: int, j: int) -> float:
        """max(c(i,j), c(j,i))^2 — the two-way squared distance of a pair."""
        v = self.values
        return float(max(v[i, j], v[j, i]) ** 2)

    def two_way_sq_matrix(self) -> np.ndarray:
        """Dense matrix of max(c(i,j), c(j,i))^2; symmetric, zero diagonal."""
        m = np.maximum(self.values, self.values.T)
        return m * m


@dataclass(frozen=True)
class CostParams:
    """Cost model and budgets.

    Zone cost is alpha * D^2 + beta where D is the zone diameter in
    normalized distance units.  B caps the summed cost of all selected
    zones, B0 caps each individual zone.  include_self_pairs controls
    whether intra-cell demand d(i, i) counts as coverable.
    """

    alpha: float
    beta: float
    global_budget: float
    single_zone_budget: float
    include_self_pairs: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ValidationError(f"beta must be > 0, got {self.beta}")
        if not (math.isfinite(self.global_budget) and self.global_budget >= self.beta):
            raise ValidationError(
                f"global budget {self.global_budget} must be >= beta {self.beta}"
            )
        if not (math.isfinite(self.single_zone_budget) and self.single_zone_budget >= self.beta):
            raise ValidationError(
                f"single-zone budget {self.single_zone_budget} must be >= beta {self.beta}"
            )

    @classmethod
    def defaults(cls, include_self_pairs: bool = False) -> "CostParams":
        """Default operating parameters: alpha=5, beta=1, B=8, B0=2."""
        return cls(
            alpha=5.0,
            beta=1.0,
            global_budget=8.0,
            single_zone_budget=2.0,
            include_self_pairs=include_self_pairs,
        )


@dataclass(frozen=True, order=True)
class Zone:
    """One candidate zone (a column): sorted cell ids with cached geometry.

    diameter_sq and cost are cached at construction and must always be
    recomputable bit-identically from the distance matrix and params.
    """

    cells: Tuple[int, ...]
    diameter_sq: float = field(compare=False, default=0.0)
    cost: float = field(compare=False, default=0.0)

    def __post_init__(self):
        if len(self.cells) < 1:
            raise ValidationError("zone must contain at least one cell")
        if list(self.cells) != sorted(set(self.cells)):
            raise ValidationError(f"zone cells must be sorted and duplicate-free: {self.cells}")

    @classmethod
    def from_cells(
        cls, cells: Iterable[int], distances: DistanceMatrix, params: CostParams
    ) -> "Zone":
        ids = tuple(sorted(set(int(c) for c in cells)))
        d2 = zone_diameter_sq(ids, distances)
        return cls(cells=ids, diameter_sq=d2, cost=zone_cost(d2, params))

    @property
    def size(self) -> int:
        return len(self.cells)

    def cell_set(self) -> frozenset:
        return frozenset(self.cells)


@dataclass(frozen=True)
class Duals:
    """Dual prices from the master LP: budget price and per-pair prices.

    Both come from <= constraints of a maximization, so they are
    nonnegative; values within -1e-9 of zero are clipped at construction.
    """

    lam: float
    pi: Dict[Pair, float]

    def __post_init__(self):
        object.__setattr__(self, "lam", _clip_dual(self.lam, "lambda"))
        clean = {}
        for (i, j), v in sorted(self.pi.items()):
            clean[(int(i), int(j))] = _clip_dual(v, f"pi({i},{j})")
        object.__setattr__(self, "pi", clean)

    @classmethod
    def zero(cls) -> "Duals":
        return cls(lam=0.0, pi={})


def _clip_dual(v: float, name: str) -> float:
    v = float(v)
    if not math.isfinite(v):
        raise ValidationError(f"dual {name} is not finite")
    if v < -1e-6:
        raise ValidationError(f"dual {name}={v} is negative beyond tolerance")
    return max(0.0, v)


def zone_diameter_sq(cells: Iterable[int], distances: DistanceMatrix) -> float:
    """Squared diameter of a cell set: max over unordered pairs {i, j} of
    max(c(i,j), c(j,i))^2.  Singletons have diameter 0.

    The two-way max makes the diameter symmetric even on asymmetric road
    networks.
    """
    ids = sorted(set(int(c) for c in cells))
    if not ids:
        raise ValidationError("zone_diameter_sq: empty cell set")
    n = distances.n_cells
    for c in ids:
        if not (0 <= c < n):
            raise ValidationError(f"zone_diameter_sq: invalid cell id {c} (n={n})")
    if len(ids) == 1:
        return 0.0
    idx = np.array(ids)
    sub = distances.values[np.ix_(idx, idx)]
    d = np.maximum(sub, sub.T).max()
    return float(d * d)


def zone_cost(diameter_sq: float, params: CostParams) -> float:
    """Operating cost alpha * D^2 + beta."""
    if diameter_sq < 0.0:
        raise ValidationError(f"diameter_sq must be >= 0, got {diameter_sq}")
    return params.alpha * diameter_sq + params.beta


def intra_zone_demand(
    cells: Iterable[int], demand: DemandMatrix, include_self_pairs: bool = False
) -> float:
    """Demand on ordered pairs with both endpoints in the cell set.

    Pairs (i, i) contribute only when include_self_pairs is set.
    """
    cellset = set(int(c) for c in cells)
    if not cellset:
        raise ValidationError("intra_zone_demand: empty cell set")
    total = 0.0
    for (i, j), v in demand.entries.items():
        if i == j and not include_self_pairs:
            continue
        if i in cellset and j in cellset:
            total += v
    return total


def reduced_cost(zone: Zone, duals: Duals, params: CostParams) -> float:
    """Reduced cost of a zone under the current duals:

        sum of pi(i, j) over supported ordered pairs within the zone
        minus lambda * (alpha * D^2 + beta).

    The pi support is whatever set of pairs the master instantiated, so
    self pairs participate exactly when the master carries them.
    """
    cellset = zone.cell_set()
    pi_sum = 0.0
    if len(duals.pi) <= len(cellset) * len(cellset):
        for (i, j), v in duals.pi.items():
            if i in cellset and j in cellset:
                pi_sum += v
    else:
        for i in zone.cells:
            for j in zone.cells:
                pi_sum += duals.pi.get((i, j), 0.0)
    return pi_sum - duals.lam * (params.alpha * zone.diameter_sq + params.beta)
