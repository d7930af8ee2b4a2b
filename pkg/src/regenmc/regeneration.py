"""Splitting, regeneration blocks, block statistics, and occupation estimates.

A regeneration flag at step i marks a visit of the split chain to its atom:
the block in progress ends at step i (inclusive) and a fresh block starts at
step i+1.  Complete blocks are i.i.d.; the initial segment up to the first
flag and the trailing segment after the last flag are kept separate.
"""

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chains import ChainModel, REJECTION_CAP, SamplingError, Trajectory, sample_path
from .rng import stream

RATIO_TOL = 1e-9


# ---------------------------------------------------------------------------
# Split-chain simulation
# ---------------------------------------------------------------------------


def _pair_density(kernel, xs, ys):
    p = np.asarray(kernel.density(xs, ys), dtype=float)
    if np.any(p <= 0):
        i = int(np.flatnonzero(p <= 0)[0])
        raise ValueError(f"observed transition has zero density at step {i}; invalid kernel density")
    return p


def simulate_split_retrospective(model: ChainModel, n: int, seed: int) -> Trajectory:
    """Simulate the chain and draw regeneration flags after seeing each move.

    The X-path is generated exactly as :func:`regenmc.chains.simulate`; the
    flag at step i is Bernoulli(delta * psi(X_{i+1}) / p(X_i, X_{i+1})) when
    X_i lies in the small set.  One extra hidden state is simulated so the
    final step also gets a flag.  Each Bernoulli ratio is checked to be
    <= 1 + 1e-9; a larger value means the certificate is invalid and raises
    with the offending pair.
    """
    cert = model.minorization
    if cert is None:
        raise ValueError("model carries no minorization certificate")
    rng = stream(seed, 0)
    x0 = model.initial_sample(rng)
    ext = sample_path(model.kernel, x0, n + 1, rng)
    xs, ys = ext[:-1], ext[1:]
    in_s = np.asarray(cert.small_set(xs), dtype=bool)
    probs = np.zeros(n)
    if np.any(in_s):
        p = _pair_density(model.kernel, xs[in_s], ys[in_s])
        ratio = cert.delta * np.asarray(cert.psi_density(ys[in_s]), dtype=float) / p
        if np.any(ratio > 1.0 + RATIO_TOL):
            j = int(np.argmax(ratio))
            i = int(np.flatnonzero(in_s)[j])
            raise ValueError(
                f"invalid certificate: flag probability {ratio[j]:.12g} > 1 at step {i} "
                f"(x={xs[in_s][j]}, y={ys[in_s][j]})")
        probs[in_s] = np.minimum(ratio, 1.0)
    flags = stream(seed, 1).random(n) < probs
    return Trajectory(states=ext[:n], regen_flags=flags, seed=seed, model_id=model.model_id)


def _residual_draw(model, cert, x, rng, step):
    if cert.residual_sample is not None:
        return cert.residual_sample(x, rng)
    # rejection from P(x, .): accept y with probability 1 - delta psi(y) / p(x, y)
    xb = np.asarray([x]) if np.ndim(x) == 0 else np.asarray(x)[None, :]
    for _ in range(REJECTION_CAP):
        y = model.kernel.sample_next(x, rng)
        yb = np.asarray([y]) if np.ndim(y) == 0 else np.asarray(y)[None, :]
        p = float(_pair_density(model.kernel, xb, yb)[0])
        accept = 1.0 - cert.delta * float(np.asarray(cert.psi_density(yb), dtype=float)[0]) / p
        if rng.random() < accept:
            return y
    raise SamplingError(f"residual rejection sampler exceeded {REJECTION_CAP} proposals at step {step}")


def simulate_split_forward(model: ChainModel, n: int, seed: int) -> Trajectory:
    """Simulate the split chain forward: flags first, next state from the branch.

    When X_i is in the small set, Y_i is Bernoulli(delta); on Y_i = 1 the next
    state is drawn from Psi, otherwise from the residual kernel
    (P(X_i, .) - delta Psi(.)) / (1 - delta).  Distributionally equivalent to
    :func:`simulate_split_retrospective`.
    """
    cert = model.minorization
    if cert is None:
        raise ValueError("model carries no minorization certificate")
    rng = stream(seed, 0)
    rng_flags = stream(seed, 1)
    x = model.initial_sample(rng)
    finite = model.finite
    states = []
    flags = np.zeros(n, dtype=bool)
    for i in range(n):
        states.append(x if finite else np.ravel(np.asarray(x, dtype=float)))
        batch = np.asarray([x]) if finite else np.asarray(x, dtype=float).reshape(1, -1)
        in_s = bool(np.asarray(cert.small_set(batch))[0])
        flag = in_s and rng_flags.random() < cert.delta
        flags[i] = flag
        if i == n - 1:
            break
        if flag:
            x = cert.psi_sample(rng)
        elif in_s and cert.delta < 1.0:
            x = _residual_draw(model, cert, x, rng, i)
        elif in_s:
            # delta == 1: the Y = 0 branch has probability zero
            x = cert.psi_sample(rng)
        else:
            x = model.kernel.sample_next(x, rng)
    arr = np.asarray(states, dtype=np.int64 if finite else float)
    if not finite and arr.ndim == 1:
        arr = arr[:, None]
    return Trajectory(states=arr, regen_flags=flags, seed=seed, model_id=model.model_id)


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """One path segment; index 0 is the initial block, the last is trailing."""

    states: np.ndarray
    index: int

    @property
    def length(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class BlockSet:
    """The partition of a flagged path into initial/complete/trailing blocks.

    Complete block k spans ``complete_bounds[k] = (start, end)`` as a Python
    slice of the underlying states.  Concatenating initial + complete +
    trailing recovers the trajectory exactly.
    """

    states: np.ndarray
    initial_bounds: Optional[tuple]
    complete_bounds: np.ndarray
    trailing_bounds: Optional[tuple]
    l_n: int

    @property
    def n_complete(self) -> int:
        return len(self.complete_bounds)

    @property
    def lengths(self) -> np.ndarray:
        if self.n_complete == 0:
            return np.zeros(0, dtype=np.int64)
        return self.complete_bounds[:, 1] - self.complete_bounds[:, 0]

    @property
    def initial(self) -> Optional[Block]:
        if self.initial_bounds is None:
            return None
        s, e = self.initial_bounds
        return Block(self.states[s:e], 0)

    @property
    def trailing(self) -> Optional[Block]:
        if self.trailing_bounds is None:
            return None
        s, e = self.trailing_bounds
        return Block(self.states[s:e], self.l_n)

    def complete_blocks(self):
        for k, (s, e) in enumerate(self.complete_bounds):
            yield Block(self.states[s:e], k + 1)

    def block_values(self, f) -> np.ndarray:
        """Per-complete-block sums of f over states: the lifted values f'(B_k)."""
        if self.n_complete == 0:
            return np.zeros(0)
        vals = np.asarray(f(self.states), dtype=float)
        cs = np.concatenate([[0.0], np.cumsum(vals)])
        return cs[self.complete_bounds[:, 1]] - cs[self.complete_bounds[:, 0]]

    def to_json(self) -> str:
        payload = {
            "l_n": int(self.l_n),
            "initial": list(map(int, self.initial_bounds)) if self.initial_bounds else None,
            "complete": [[int(s), int(e)] for s, e in self.complete_bounds],
            "trailing": list(map(int, self.trailing_bounds)) if self.trailing_bounds else None,
        }
        return json.dumps(payload, indent=2)


def extract_blocks(traj: Trajectory) -> BlockSet:
    """Cut a flagged trajectory into blocks.

    A complete block starts right after a flagged step and ends at the next
    flagged step.  With zero flags everything sits in the initial block.
    """
    if traj.regen_flags is None:
        raise ValueError("trajectory carries no regeneration flags")
    flags = np.asarray(traj.regen_flags, dtype=bool)
    pos = np.flatnonzero(flags)
    n = traj.n
    if len(pos) == 0:
        return BlockSet(states=traj.states, initial_bounds=(0, n),
                        complete_bounds=np.zeros((0, 2), dtype=np.int64),
                        trailing_bounds=None, l_n=0)
    starts = pos[:-1] + 1
    ends = pos[1:] + 1
    bounds = np.stack([starts, ends], axis=1).astype(np.int64)
    trailing = None if pos[-1] + 1 >= n else (int(pos[-1] + 1), n)
    return BlockSet(states=traj.states, initial_bounds=(0, int(pos[0] + 1)),
                    complete_bounds=bounds, trailing_bounds=trailing, l_n=int(len(pos)))


def pitman_estimate(blocks: BlockSet, f) -> float:
    """Ratio estimator of the stationary mean of f from complete blocks.

    Returns (sum of per-block sums of f) / (sum of block lengths), the
    occupation-measure estimate of the stationary expectation.
    """
    if blocks.n_complete == 0:
        raise ValueError("no regenerations observed")
    return float(blocks.block_values(f).sum() / blocks.lengths.sum())


def block_bootstrap_se(blocks: BlockSet, f, n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of the occupation ratio, resampling whole blocks."""
    if blocks.n_complete == 0:
        raise ValueError("no regenerations observed")
    sums = blocks.block_values(f)
    lens = blocks.lengths.astype(float)
    m = len(sums)
    rng = stream(seed, 0)
    idx = rng.integers(0, m, size=(n_boot, m))
    est = sums[idx].sum(axis=1) / lens[idx].sum(axis=1)
    return float(est.std(ddof=1))


# ---------------------------------------------------------------------------
# Regeneration-time statistics
# ---------------------------------------------------------------------------


DEFAULT_LAMBDA_GRID = np.round(np.arange(0.05, 1.01, 0.05), 10)


@dataclass
class RegenStats:
    """Empirical moments, MGF profile, and tail diagnostics of block lengths."""

    tau_samples: np.ndarray
    lambda_grid: np.ndarray = field(default_factory=lambda: DEFAULT_LAMBDA_GRID.copy())
    mgf_mass_cap: float = 0.5

    def moment(self, p: float) -> float:
        return float(np.mean(self.tau_samples.astype(float) ** p))

    def mgf(self, lam: float):
        """Empirical E[exp(lam * tau)] and whether it looks finite.

        The estimate is flagged unreliable when a single block carries more
        than ``mgf_mass_cap`` of the MGF sum, the signature of an infinite
        theoretical MGF being propped up by one extreme draw.
        """
        terms = np.exp(float(lam) * self.tau_samples.astype(float))
        total = terms.sum()
        reliable = bool(terms.max() <= self.mgf_mass_cap * total)
        return float(total / len(terms)), reliable

    def tail_rate(self):
        """Exponential tail rate from a linear fit of log survival vs k.

        Returns (rate, n_points).  rate ~ -log(1 - delta) for geometric
        blocks; fewer than 3 usable survival points yields (nan, n_points).
        """
        tau = self.tau_samples
        kmax = int(tau.max())
        ks = np.arange(1, kmax)
        if len(ks) == 0:
            return float("nan"), 0
        surv = np.array([(tau > k).mean() for k in ks])
        keep = surv >= max(5.0 / len(tau), 1e-12)
        ks, surv = ks[keep], surv[keep]
        if len(ks) < 3:
            return float("nan"), int(len(ks))
        slope = np.polyfit(ks, np.log(surv), 1)[0]
        return float(-slope), int(len(ks))

    def suggested_lambda(self) -> float:
        """Half of the estimated tail rate; a safe MGF argument, never auto-applied."""
        rate, _ = self.tail_rate()
        return 0.5 * rate if np.isfinite(rate) else float("nan")

    def to_json(self) -> str:
        rate, npts = self.tail_rate()
        payload = {
            "n_blocks": int(len(self.tau_samples)),
            "moments": {str(p): self.moment(p) for p in (1, 2, 3)},
            "mgf": [
                {"lambda": float(lam), "value": v, "reliable": r}
                for lam in self.lambda_grid
                for v, r in [self.mgf(lam)]
            ],
            "tail_rate": None if not np.isfinite(rate) else rate,
            "tail_fit_points": npts,
            "suggested_lambda": None if not np.isfinite(rate) else 0.5 * rate,
        }
        return json.dumps(payload, indent=2)


def regen_stats(blocks: BlockSet, lambda_grid=None, min_blocks: int = 30) -> RegenStats:
    """Block-length statistics; warns (never fails) below ``min_blocks`` blocks."""
    tau = blocks.lengths
    if len(tau) == 0:
        raise ValueError("no complete blocks")
    if len(tau) < min_blocks:
        warnings.warn(f"only {len(tau)} complete blocks; tail diagnostics are unreliable",
                      stacklevel=2)
    kwargs = {} if lambda_grid is None else {"lambda_grid": np.asarray(lambda_grid, dtype=float)}
    return RegenStats(tau_samples=tau.astype(np.int64), **kwargs)
