"""Markov chain models: kernels, built-in test chains, exact stationary laws.

States are either integer labels (finite chains, reference measure = counting
measure) or points of R^d stored as float arrays of shape (n, d) (reference
measure = Lebesgue).  Every transition density in this package is taken with
respect to the reference measure of its chain.

All model objects are immutable after construction; the only mutable state is
the RNG, which is owned per simulation call.  Simulations with independent
streams are safe to run concurrently.
"""

import bisect
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .rng import stream

# Proposals per residual/rejection draw before a hard error, so that a
# mis-specified kernel fails loudly instead of hanging.
REJECTION_CAP = 10**6

ROW_SUM_TOL = 1e-12
STATIONARY_RESIDUAL_TOL = 1e-10


class SamplingError(RuntimeError):
    """Kernel sampling failure, carrying the step index where it occurred."""


# ---------------------------------------------------------------------------
# Transition kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteKernel:
    """Row-stochastic transition matrix on the label space {0, ..., k-1}."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(m < 0):
            raise ValueError("transition matrix has negative entries")
        err = np.max(np.abs(m.sum(axis=1) - 1.0))
        if err > ROW_SUM_TOL:
            raise ValueError(f"matrix rows must sum to 1 within {ROW_SUM_TOL} (max error {err:.3e})")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_cum", np.cumsum(m, axis=1))
        object.__setattr__(self, "_cum_rows", [row.tolist() for row in np.cumsum(m, axis=1)])

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def sample_next(self, x, rng):
        return bisect.bisect_right(self._cum_rows[int(x)], rng.random())

    def sample_path(self, x0, n, rng):
        us = rng.random(max(n - 1, 0)).tolist()
        rows = self._cum_rows
        out = np.empty(n, dtype=np.int64)
        out[0] = x = int(x0)
        for i, u in enumerate(us):
            x = bisect.bisect_right(rows[x], u)
            out[i + 1] = x
        return out

    def density(self, x, y):
        """Transition density w.r.t. counting measure; vectorized over pairs."""
        return self.matrix[np.asarray(x, dtype=int), np.asarray(y, dtype=int)]


def _circ_dist(x, y):
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class WrappedMixtureKernel:
    """Uniformly minorized kernel on the unit circle [0, 1).

    Each step draws a fresh Uniform(0, 1) point with probability ``delta`` and
    otherwise adds a wrapped uniform increment from [-width, width].  The full
    transition density w.r.t. Lebesgue on [0, 1) is

        p(x, y) = delta + (1 - delta) * 1{circ_dist(x, y) <= width} / (2 width)

    so p(x, y) >= delta everywhere: the whole space is a small set with
    minorizing measure Uniform(0, 1), and the chain is uniformly ergodic with
    uniform stationary law.
    """

    delta: float
    width: float

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if not 0.0 < self.width <= 0.5:
            raise ValueError("width must lie in (0, 0.5]")

    def density(self, x, y):
        x = np.ravel(np.asarray(x, dtype=float))
        y = np.ravel(np.asarray(y, dtype=float))
        near = _circ_dist(x, y) <= self.width + 1e-15
        return self.delta + (1.0 - self.delta) * near / (2.0 * self.width)

    def sample_next(self, x, rng):
        x = float(np.ravel(x)[0])
        if rng.random() < self.delta:
            return np.array([rng.random()])
        return np.array([(x + rng.uniform(-self.width, self.width)) % 1.0])

    def sample_path(self, x0, n, rng):
        x0 = float(np.ravel(x0)[0])
        if n == 1:
            return np.array([[x0]])
        m = n - 1
        fresh = rng.random(m) < self.delta
        psi = rng.random(m)
        inc = rng.uniform(-self.width, self.width, m)
        idx = np.arange(m)
        anchor = np.maximum.accumulate(np.where(fresh, idx, -1))
        csum = np.cumsum(inc)
        safe = np.maximum(anchor, 0)
        start_val = np.where(anchor >= 0, psi[safe], x0)
        start_base = np.where(anchor >= 0, csum[safe], 0.0)
        out = np.empty(n)
        out[0] = x0
        out[1:] = (start_val + csum - start_base) % 1.0
        return out.reshape(n, 1)


# ---------------------------------------------------------------------------
# Chain models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Minorization:
    """Certificate that P(x, .) >= delta * Psi(.) for every x in the small set.

    ``psi_density`` is the density of Psi w.r.t. the chain's reference
    measure, vectorized over state batches; ``small_set`` maps a state batch
    to a boolean membership array.  ``residual_sample``, when supplied, draws
    exactly from (P(x, .) - delta Psi(.)) / (1 - delta); otherwise forward
    splitting falls back to rejection from P(x, .).
    """

    delta: float
    psi_sample: Callable
    psi_density: Callable
    small_set: Callable
    residual_sample: Optional[Callable] = None

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("minorization constant delta must lie in (0, 1]")


@dataclass(frozen=True)
class ChainModel:
    """A simulatable chain: kernel, initial law, and minorization certificate."""

    kernel: object
    initial_sample: Callable
    minorization: Optional[Minorization]
    model_id: str

    @property
    def finite(self) -> bool:
        return isinstance(self.kernel, FiniteKernel)


@dataclass(frozen=True)
class Trajectory:
    """A realized chain path with optional per-step regeneration flags."""

    states: np.ndarray
    regen_flags: Optional[np.ndarray]
    seed: int
    model_id: str

    def __post_init__(self):
        if self.regen_flags is not None and len(self.regen_flags) != len(self.states):
            raise ValueError("regen_flags must have one entry per state")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        """0 for finite label states, d for vector states."""
        return 0 if self.states.ndim == 1 and np.issubdtype(self.states.dtype, np.integer) else self.states.shape[1]

    def values_1d(self, k: int = 0) -> np.ndarray:
        """Coordinate k as a float vector (the labels, for finite chains)."""
        if self.dim == 0:
            return self.states.astype(float)
        return self.states[:, k]

    def to_csv(self, path):
        d = self.dim
        with open(path, "w") as fh:
            fh.write("n,d,seed,model\n")
            fh.write(f"{self.n},{d},{self.seed},{self.model_id}\n")
            cols = ["state"] if d == 0 else [f"x{k}" for k in range(d)]
            fh.write(",".join(cols + ["regen"]) + "\n")
            flags = self.regen_flags
            for i in range(self.n):
                if d == 0:
                    row = [str(int(self.states[i]))]
                else:
                    row = [format(v, ".17g") for v in self.states[i]]
                row.append("" if flags is None else str(int(flags[i])))
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            fh.readline()
            n, d, seed, model_id = fh.readline().rstrip("\n").split(",", 3)
            n, d, seed = int(n), int(d), int(seed)
            fh.readline()
            rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
        if len(rows) != n:
            raise ValueError(f"expected {n} rows, found {len(rows)}")
        flag_col = [r[-1] for r in rows]
        flags = None if flag_col[0] == "" else np.array([c == "1" for c in flag_col])
        if d == 0:
            states = np.array([int(r[0]) for r in rows], dtype=np.int64)
        else:
            states = np.array([[float(v) for v in r[:d]] for r in rows])
        return cls(states=states, regen_flags=flags, seed=seed, model_id=model_id)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def sample_path(kernel, x0, n, rng):
    """n states starting at x0, using the kernel's bulk sampler when it has one."""
    if hasattr(kernel, "sample_path"):
        return kernel.sample_path(x0, n, rng)
    states = [np.asarray(x0, dtype=float)]
    x = x0
    for i in range(n - 1):
        try:
            x = kernel.sample_next(x, rng)
        except RuntimeError as exc:
            raise SamplingError(f"kernel sampling failed at step {i + 1}: {exc}") from exc
        states.append(np.asarray(x, dtype=float))
    return np.vstack(states)


def simulate(model: ChainModel, n: int, seed: int) -> Trajectory:
    """Simulate n steps of the chain: X0 from the initial law, then the kernel.

    Deterministic given (model, n, seed).  The trajectory carries no
    regeneration flags; see :mod:`regenmc.regeneration` for split simulation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream(seed, 0)
    x0 = model.initial_sample(rng)
    states = sample_path(model.kernel, x0, n, rng)
    return Trajectory(states=states, regen_flags=None, seed=seed, model_id=model.model_id)


# ---------------------------------------------------------------------------
# Exact stationary law for finite chains
# ---------------------------------------------------------------------------


def _graph_period(adj: np.ndarray) -> int:
    """Period of a strongly connected directed graph (gcd of cycle lengths)."""
    k = adj.shape[0]
    dist = np.full(k, -1)
    dist[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u in range(k):
        for v in np.flatnonzero(adj[u]):
            g = np.gcd(g, dist[u] + 1 - dist[v])
    return int(abs(g))


def exact_stationary(kernel) -> np.ndarray:
    """Stationary law of an irreducible aperiodic finite chain, by linear algebra.

    Solves pi P = pi, sum(pi) = 1 and checks the residual is below
    ``STATIONARY_RESIDUAL_TOL``.  Raises ``ValueError`` naming the violated
    property for reducible or periodic matrices.
    """
    m = kernel.matrix if isinstance(kernel, FiniteKernel) else FiniteKernel(np.asarray(kernel)).matrix
    k = m.shape[0]
    adj = m > 0
    n_comp, _ = connected_components(csr_matrix(adj), directed=True, connection="strong")
    if n_comp > 1:
        raise ValueError("matrix is reducible: no unique stationary law")
    period = _graph_period(adj)
    if period != 1:
        raise ValueError(f"matrix is periodic with period {period}")
    a = np.vstack([m.T - np.eye(k), np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = np.max(np.abs(pi @ m - pi))
    if residual > STATIONARY_RESIDUAL_TOL:
        raise RuntimeError(f"stationary solve residual {residual:.3e} exceeds {STATIONARY_RESIDUAL_TOL}")
    return pi


# ---------------------------------------------------------------------------
# Built-in chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _PmfSampler:
    cum: tuple

    def __call__(self, rng):
        return bisect.bisect_right(self.cum, rng.random())


@dataclass(frozen=True)
class _PmfDensity:
    pmf: np.ndarray

    def __call__(self, y):
        return self.pmf[np.asarray(y, dtype=int)]


@dataclass(frozen=True)
class _LabelEquals:
    label: int

    def __call__(self, x):
        return np.asarray(x) == self.label


def _all_true(x):
    x = np.asarray(x)
    n = x.shape[0] if x.ndim > 0 else 1
    return np.ones(n, dtype=bool)


@dataclass(frozen=True)
class _FiniteResidualSampler:
    cum_rows: tuple

    def __call__(self, x, rng):
        return bisect.bisect_right(self.cum_rows[int(x)], rng.random())


@dataclass(frozen=True)
class _ConstantState:
    value: int

    def __call__(self, rng):
        return self.value


def _uniform01_sample(rng):
    return np.array([rng.random()])


def _uniform01_density(y):
    y = np.ravel(np.asarray(y, dtype=float))
    return ((y >= 0.0) & (y < 1.0)).astype(float)


@dataclass(frozen=True)
class _WrappedResidualSampler:
    width: float

    def __call__(self, x, rng):
        x = float(np.ravel(x)[0])
        return np.array([(x + rng.uniform(-self.width, self.width)) % 1.0])


def doeblin_chain(delta, kernel, psi_sample, psi_density,
                  initial_sample=None, model_id="doeblin", check_points=None) -> ChainModel:
    """Certify a kernel whose whole space is a small set: P(x, .) >= delta Psi(.).

    Regeneration times of the split chain are then exactly geometric(delta).
    Domination is checked exactly for finite kernels and on ``check_points``
    (pairs of state batches) otherwise; a violation raises with a witness.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if isinstance(kernel, FiniteKernel):
        psi = np.asarray(psi_density(np.arange(kernel.n_states)), dtype=float)
        gap = kernel.matrix - delta * psi[None, :]
        if np.min(gap) < -1e-12:
            x, y = np.unravel_index(np.argmin(gap), gap.shape)
            raise ValueError(
                f"domination violated at (x={x}, y={y}): P={kernel.matrix[x, y]:.6g} < delta*psi={delta * psi[y]:.6g}")
    elif check_points is not None:
        xs, ys = check_points
        p = np.asarray(kernel.density(xs, ys), dtype=float)
        floor = delta * np.asarray(psi_density(ys), dtype=float)
        bad = p < floor - 1e-12
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(f"domination violated at checked pair index {i}")
    cert = Minorization(delta=delta, psi_sample=psi_sample, psi_density=psi_density,
                        small_set=_all_true)
    return ChainModel(kernel=kernel, initial_sample=initial_sample or psi_sample,
                      minorization=cert, model_id=model_id)


def finite_doeblin_chain(delta: float, matrix, psi) -> ChainModel:
    """Finite chain certified with the whole space small: matrix >= delta * psi."""
    kernel = FiniteKernel(matrix)
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (kernel.n_states,) or abs(psi.sum() - 1.0) > 1e-12 or np.any(psi < 0):
        raise ValueError("psi must be a probability vector over the states")
    model = doeblin_chain(delta, kernel, _PmfSampler(tuple(np.cumsum(psi))), _PmfDensity(psi),
                          model_id=f"finite_doeblin(delta={delta:g})")
    if delta < 1.0:
        residual = (kernel.matrix - delta * psi[None, :]) / (1.0 - delta)
        resid_sampler = _FiniteResidualSampler(tuple(tuple(np.cumsum(r)) for r in residual))
    else:
        resid_sampler = None
    cert = Minorization(delta=delta, psi_sample=model.minorization.psi_sample,
                        psi_density=model.minorization.psi_density,
                        small_set=_all_true, residual_sample=resid_sampler)
    return ChainModel(kernel=kernel, initial_sample=model.initial_sample,
                      minorization=cert, model_id=model.model_id)


def wrapped_doeblin_chain(delta: float, width: float) -> ChainModel:
    """Wrapped-increment mixture chain on [0, 1) with uniform stationary law.

    The canonical uniformly ergodic test chain: the whole space is small with
    delta and Psi = Uniform(0, 1), and complete-block lengths are geometric.
    """
    kernel = WrappedMixtureKernel(delta, width)
    cert = Minorization(delta=delta, psi_sample=_uniform01_sample,
                        psi_density=_uniform01_density, small_set=_all_true,
                        residual_sample=_WrappedResidualSampler(width))
    return ChainModel(kernel=kernel, initial_sample=_uniform01_sample,
                      minorization=cert,
                      model_id=f"wrapped_doeblin(delta={delta:g},width={width:g})")


def finite_atom_chain(matrix, atom: int = 0) -> ChainModel:
    """Finite chain with a genuine single-state atom: every visit regenerates.

    The minorization on S = {atom} is exact with delta = 1 and Psi the atom's
    transition row, so the split-chain flags are deterministic.
    """
    kernel = FiniteKernel(matrix)
    row = kernel.matrix[atom]
    cert = Minorization(delta=1.0, psi_sample=_PmfSampler(tuple(np.cumsum(row))),
                        psi_density=_PmfDensity(row), small_set=_LabelEquals(atom))
    return ChainModel(kernel=kernel, initial_sample=_ConstantState(atom),
                      minorization=cert, model_id=f"finite_atom(atom={atom})")


def two_state_chain(p01: float = 0.5, p10: float = 0.2) -> ChainModel:
    """The 2-state workhorse with atom {0}; stationary law (p10, p01)/(p01+p10)."""
    matrix = np.array([[1.0 - p01, p01], [p10, 1.0 - p10]])
    model = finite_atom_chain(matrix, atom=0)
    return ChainModel(kernel=model.kernel, initial_sample=model.initial_sample,
                      minorization=model.minorization,
                      model_id=f"two_state(p01={p01:g},p10={p10:g})")
