"""Finite evaluable function classes, covering numbers, and block lifting.

A class here is a finite list of vectorized callables with an envelope bound
and a polynomial covering characteristic (C, v).  Parameterized families
(kernel translates, half-line indicators) are discretized on explicit grids.
Lifting a class to blocks replaces each member f by f'(B) = sum of f over the
states of B; the induced measure on states weighs each point of a block by
the block weight times the block length.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

EXACT_COVER_CAP = 16
DEDUP_TOL = 1e-12


# ---------------------------------------------------------------------------
# Classes and measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvaluableClass:
    """A finite class of vectorized functions with envelope and (C, v)."""

    members: tuple
    envelope: float
    vc_c: float
    vc_v: float

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("class must have at least one member")
        if self.envelope <= 0:
            raise ValueError("envelope must be positive")
        if self.vc_v < 1:
            raise ValueError("covering exponent v must be >= 1")
        admissible = (3.0 * math.sqrt(math.e)) ** self.vc_v
        if self.vc_c < admissible:
            warnings.warn(
                f"covering scale C={self.vc_c:g} is below the admissible floor "
                f"(3 sqrt(e))^v = {admissible:g}; bound formulas may degenerate",
                stacklevel=2)

    @property
    def size(self) -> int:
        return len(self.members)

    def describe(self) -> dict:
        """JSON-ready summary of the class."""
        return {
            "size": self.size,
            "envelope": self.envelope,
            "vc_C": self.vc_c,
            "vc_v": self.vc_v,
            "members": [type(f).__name__ for f in self.members],
        }

    def evaluate(self, points) -> np.ndarray:
        """Member-by-point value matrix, shape (size, n_points)."""
        vals = np.vstack([np.asarray(f(points), dtype=float) for f in self.members])
        if np.max(np.abs(vals)) > self.envelope + 1e-9:
            raise ValueError("member value exceeds the declared envelope")
        return vals


@dataclass(frozen=True)
class LiftedClass:
    """The block-sum lift of a class, optionally truncated at block length L."""

    base: EvaluableClass
    trunc: Optional[float] = None

    def evaluate(self, measure: "BlockMeasure") -> np.ndarray:
        vals = self.base.evaluate(measure.all_states)
        cs = np.concatenate([np.zeros((vals.shape[0], 1)), np.cumsum(vals, axis=1)], axis=1)
        out = cs[:, measure.offsets[1:]] - cs[:, measure.offsets[:-1]]
        if self.trunc is not None:
            out = out * (measure.lengths <= self.trunc)
        return out


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted atoms on the state space; weights sum to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points):
        points = np.asarray(points)
        n = len(points)
        return cls(points=points, weights=np.full(n, 1.0 / n))


@dataclass(frozen=True)
class BlockMeasure:
    """Weighted atoms on the space of blocks (finite state sequences)."""

    blocks: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.blocks):
            raise ValueError("one weight per block required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        object.__setattr__(self, "weights", w)
        lengths = np.array([len(b) for b in self.blocks], dtype=np.int64)
        if np.any(lengths == 0):
            raise ValueError("blocks must be nonempty")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "offsets", np.concatenate([[0], np.cumsum(lengths)]))
        object.__setattr__(self, "all_states", np.concatenate([np.asarray(b) for b in self.blocks]))

    @classmethod
    def from_blockset(cls, blockset, weights=None):
        blocks = tuple(b.states for b in blockset.complete_blocks())
        if len(blocks) == 0:
            raise ValueError("no complete blocks to build a measure from")
        if weights is None:
            weights = np.full(len(blocks), 1.0 / len(blocks))
        return cls(blocks=blocks, weights=np.asarray(weights, dtype=float))

    def ell_norm(self) -> float:
        """L2 norm of the block-length function under this measure."""
        return float(np.sqrt(np.sum(self.weights * self.lengths.astype(float) ** 2)))


# ---------------------------------------------------------------------------
# Covering numbers
# ---------------------------------------------------------------------------


def _value_matrix(cls, measure):
    if isinstance(cls, LiftedClass):
        if not isinstance(measure, BlockMeasure):
            raise TypeError("a lifted class must be covered under a block measure")
        return cls.evaluate(measure), measure.weights
    if not isinstance(measure, EmpiricalMeasure):
        raise TypeError("a state-space class must be covered under an empirical measure")
    return cls.evaluate(measure.points), measure.weights


def _distance_matrix(values, weights):
    diff = values[:, None, :] - values[None, :, :]
    return np.sqrt(np.einsum("ijk,k->ij", diff * diff, weights))


def _dedup(dist):
    keep = []
    for i in range(dist.shape[0]):
        if all(dist[i, j] >= DEDUP_TOL for j in keep):
            keep.append(i)
    return np.asarray(keep, dtype=int)


def _greedy_cover(dist, radius) -> int:
    m = dist.shape[0]
    uncovered = np.ones(m, dtype=bool)
    count = 0
    while uncovered.any():
        c = int(np.flatnonzero(uncovered)[0])
        uncovered &= dist[c] > radius
        count += 1
    return count


def _exact_cover(dist, radius) -> int:
    keep = _dedup(dist)
    d = dist[np.ix_(keep, keep)]
    m = d.shape[0]
    if m > EXACT_COVER_CAP:
        raise ValueError(
            f"exact covering limited to {EXACT_COVER_CAP} distinct members (got {m}); use greedy mode")
    masks = []
    for i in range(m):
        mask = 0
        for j in range(m):
            if d[i, j] <= radius:
                mask |= 1 << j
        masks.append(mask)
    full = (1 << m) - 1
    best = [m + 1] * (full + 1)
    best[0] = 0
    for state in range(full + 1):
        if best[state] > m:
            continue
        nxt = best[state] + 1
        for mask in masks:
            s2 = state | mask
            if nxt < best[s2]:
                best[s2] = nxt
    return best[full]


def covering_number(cls, measure, eps: float, method: str = "greedy") -> int:
    """Size of an eps-cover of the class in L2(measure), centers at members.

    ``greedy`` picks the first uncovered member as each new center, yielding a
    value G with exactN(eps) <= G <= exactN(eps/2).  ``exact`` solves minimum
    set cover over deduplicated members (class size <= 16).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    values, weights = _value_matrix(cls, measure)
    # covering a ball of radius r allows ties at the boundary
    radius = eps * (1.0 + 1e-12) + 1e-300
    dist = _distance_matrix(values, weights)
    if method == "exact":
        return _exact_cover(dist, radius)
    if method == "greedy":
        return _greedy_cover(dist, radius)
    raise ValueError(f"unknown covering method {method!r}")


# ---------------------------------------------------------------------------
# Lifted measures and the covering comparison checks
# ---------------------------------------------------------------------------


def _merge_atoms(points, weights):
    pts = np.asarray(points)
    if pts.ndim == 1:
        order = np.argsort(pts, kind="stable")
        sp, sw = pts[order], np.asarray(weights)[order]
        uniq, inv = np.unique(sp, return_inverse=True)
        agg = np.zeros(len(uniq))
        np.add.at(agg, inv, sw)
        return uniq, agg
    # vector states: merge on exact byte equality
    keys = [p.tobytes() for p in pts]
    seen = {}
    out_pts, out_w = [], []
    for key, p, w in zip(keys, pts, weights):
        if key in seen:
            out_w[seen[key]] += w
        else:
            seen[key] = len(out_pts)
            out_pts.append(p)
            out_w.append(w)
    return np.asarray(out_pts), np.asarray(out_w)


def lift_measure(block_measure: BlockMeasure, trunc: Optional[float] = None) -> EmpiricalMeasure:
    """Project a block measure down to states.

    Each occurrence of a state y in block B contributes weight(B) * length(B);
    the total normalizes to one.  With ``trunc`` set, only blocks of length
    <= trunc contribute (the measure matched by the truncated lift).
    """
    keep = np.ones(len(block_measure.blocks), dtype=bool)
    if trunc is not None:
        keep = block_measure.lengths <= trunc
    if not np.any(keep):
        raise ValueError("no blocks survive the truncation")
    pts, wts = [], []
    for b, w, ell, k in zip(block_measure.blocks, block_measure.weights,
                            block_measure.lengths, keep):
        if not k or w == 0:
            continue
        arr = np.asarray(b)
        pts.append(arr)
        wts.append(np.full(len(arr), w * float(ell)))
    points = np.concatenate(pts)
    weights = np.concatenate(wts)
    merged_p, merged_w = _merge_atoms(points, weights)
    total = merged_w.sum()
    if total <= 0:
        raise ValueError("lifted measure has zero mass")
    return EmpiricalMeasure(points=merged_p, weights=merged_w / total)


@dataclass(frozen=True)
class CoveringCheck:
    holds: bool
    lhs: int
    rhs: Optional[int]
    lhs_radius: float
    rhs_radius: float
    method: str
    note: str = ""


def check_lifted_covering_bound(cls: EvaluableClass, block_measure: BlockMeasure,
                                eps: float, method: str = "exact") -> CoveringCheck:
    """Compare covers of the lifted class against covers of the base class.

    Checks that an (eps * ||ell||)-cover of the lifted class under the block
    measure never needs more balls than an eps-cover of the base class under
    the lifted state measure.  Greedy mode upper-bounds the left side, so a
    greedy violation is only reported as inconclusive.
    """
    ell = block_measure.ell_norm()
    lhs_radius = eps * ell
    lhs = covering_number(LiftedClass(cls), block_measure, lhs_radius, method=method)
    rhs = covering_number(cls, lift_measure(block_measure), eps, method=method)
    holds = lhs <= rhs
    note = ""
    if not holds and method == "greedy":
        note = "inconclusive: greedy upper bound on the left side"
    return CoveringCheck(holds=holds, lhs=lhs, rhs=rhs, lhs_radius=lhs_radius,
                         rhs_radius=eps, method=method, note=note)


def check_truncated_covering_bound(cls: EvaluableClass, block_measure: BlockMeasure,
                                   eps: float, trunc: float,
                                   method: str = "exact") -> CoveringCheck:
    """Same comparison for the truncated lift f' 1{length <= trunc}.

    The left radius is eps * trunc; the right side uses the lifted measure
    restricted to surviving blocks.  If truncation kills every block the left
    class is {0} and the bound holds trivially.
    """
    lifted = LiftedClass(cls, trunc=trunc)
    if not np.any(block_measure.lengths <= trunc):
        return CoveringCheck(holds=True, lhs=1, rhs=None, lhs_radius=eps * trunc,
                             rhs_radius=eps, method=method,
                             note="all blocks truncated; left class is {0}")
    lhs = covering_number(lifted, block_measure, max(eps * trunc, 1e-300), method=method)
    rhs = covering_number(cls, lift_measure(block_measure, trunc=trunc), eps, method=method)
    holds = lhs <= rhs
    note = ""
    if not holds and method == "greedy":
        note = "inconclusive: greedy upper bound on the left side"
    return CoveringCheck(holds=holds, lhs=lhs, rhs=rhs, lhs_radius=eps * trunc,
                         rhs_radius=eps, method=method, note=note)


def covering_table(cls, measure, eps_grid, method: str = "greedy") -> dict:
    """Covering numbers over a radius grid, ready for JSON serialization."""
    rows = [{"eps": float(e), "count": covering_number(cls, measure, float(e), method)}
            for e in eps_grid]
    base = cls.base if isinstance(cls, LiftedClass) else cls
    return {"class": base.describe(), "method": method, "table": rows}


def lift_second_moment_gap(cls: EvaluableClass, block_measure: BlockMeasure) -> float:
    """Max over members of Q'(f'^2) - Q(f^2) * Q'(ell^2); nonpositive by convexity."""
    lifted_vals = LiftedClass(cls).evaluate(block_measure)
    lhs = np.sum(lifted_vals ** 2 * block_measure.weights, axis=1)
    q = lift_measure(block_measure)
    base_vals = cls.evaluate(q.points)
    rhs = np.sum(base_vals ** 2 * q.weights, axis=1) * block_measure.ell_norm() ** 2
    return float(np.max(lhs - rhs))


# ---------------------------------------------------------------------------
# Built-in classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableFunction:
    """Lookup-table function on integer labels."""

    table: np.ndarray

    def __call__(self, labels):
        return self.table[np.asarray(labels, dtype=int)]


@dataclass(frozen=True)
class HalfLineIndicator:
    threshold: float
    coordinate: int = 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        vals = x if x.ndim == 1 else x[:, self.coordinate]
        return (vals <= self.threshold).astype(float)


@dataclass(frozen=True)
class KernelTranslate:
    """y -> K((center - y) / h) for a compactly supported base kernel."""

    kernel: object
    center: float
    h: float
    coordinate: int = 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        vals = x if x.ndim == 1 else x[:, self.coordinate]
        return self.kernel.k0((self.center - vals) / self.h)


def table_class(tables, envelope=None, vc_c=None, vc_v=2.0) -> EvaluableClass:
    """Class of lookup-table functions on a finite label space."""
    tables = np.asarray(tables, dtype=float)
    if envelope is None:
        envelope = float(np.max(np.abs(tables)))
        envelope = envelope if envelope > 0 else 1.0
    if vc_c is None:
        vc_c = (3.0 * math.sqrt(math.e)) ** vc_v
    members = tuple(TableFunction(t) for t in tables)
    return EvaluableClass(members=members, envelope=envelope, vc_c=vc_c, vc_v=vc_v)


def halfline_class(thresholds, coordinate: int = 0) -> EvaluableClass:
    """Half-line indicators 1{x_k <= t} on a threshold grid; characteristic (2, 2).

    The (2, 2) characteristic is the sharp covering bound for this family and
    deliberately sits below the generic admissibility floor.
    """
    members = tuple(HalfLineIndicator(float(t), coordinate) for t in np.asarray(thresholds, dtype=float))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return EvaluableClass(members=members, envelope=1.0, vc_c=2.0, vc_v=2.0)


def kernel_class(kernel, h: float, centers, vc_c=None, vc_v: float = 2.0,
                 coordinate: int = 0) -> EvaluableClass:
    """Kernel translates y -> K((x - y)/h) over a center grid.

    The characteristic (C, v) of a kernel-translate family is not derivable
    from the data; it is configuration, defaulting to the admissibility floor
    at v = 2.
    """
    if h <= 0:
        raise ValueError("bandwidth h must be positive")
    if vc_c is None:
        vc_c = (3.0 * math.sqrt(math.e)) ** vc_v
    members = tuple(KernelTranslate(kernel, float(c), h, coordinate)
                    for c in np.asarray(centers, dtype=float))
    return EvaluableClass(members=members, envelope=kernel.k0_sup, vc_c=vc_c, vc_v=vc_v)
