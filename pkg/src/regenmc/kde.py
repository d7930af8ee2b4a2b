"""Kernel density estimation over chain samples and uniform-deviation rates.

The quantity measured everywhere is the deviation of the estimator from its
smoothed stationary target x -> E_pi[K_h(x - Y)], i.e. the fluctuation part;
smoothing bias is out of scope.  The supremum over space is taken over a grid
with spacing at most h/4, whose adequacy is covered by a refinement-stability
test rather than an analytic modulus argument.
"""

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .chains import ChainModel, simulate
from .rng import child_seed

QUAD_TOL = 1e-8
_EVAL_CHUNK = 4_000_000  # max elements of a (grid x sample) block


def _box_k0(t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= 1.0, 0.5, 0.0)


def _box_k0_cdf(t):
    t = np.asarray(t, dtype=float)
    return np.clip((t + 1.0) / 2.0, 0.0, 1.0)


def _epanechnikov_k0(t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= 1.0, 0.75 * (1.0 - t ** 2), 0.0)


def _epanechnikov_k0_cdf(t):
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    return 0.25 * (2.0 + 3.0 * t - t ** 3)


@dataclass(frozen=True)
class Kernel:
    """A compactly supported kernel built from a base profile on [-1, 1].

    ``form`` is "product" (K(x) = prod_k k0(x_k)) or "radial" (K(x) =
    k0(|x|)); ``k0_sup`` and ``k0_l2sq`` are sup|k0| and the integral of
    k0^2.  The base profile must integrate to one (checked by quadrature).
    """

    name: str
    k0: Callable
    form: str
    k0_sup: float
    k0_l2sq: float
    k0_cdf: Optional[Callable] = None

    def __post_init__(self):
        if self.form not in ("product", "radial"):
            raise ValueError("form must be 'product' or 'radial'")
        mass, _ = quad(lambda t: float(self.k0(t)), -1.0, 1.0, epsabs=QUAD_TOL / 10)
        if abs(mass - 1.0) > QUAD_TOL:
            raise ValueError(f"base profile integrates to {mass:.10g}, not 1")

    def sup_norm(self, d: int) -> float:
        return self.k0_sup ** d if self.form == "product" else self.k0_sup

    def l2sq(self, d: int) -> float:
        """Integral of K^2 over R^d (product form only for d > 1)."""
        if self.form == "product" or d == 1:
            return self.k0_l2sq ** d
        raise NotImplementedError("radial L2 norm implemented for d = 1 only")

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """K at each row of u, shape (m, d) -> (m,)."""
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if self.form == "radial":
            return np.asarray(self.k0(np.sqrt((u ** 2).sum(axis=1))), dtype=float)
        return np.prod(np.asarray(self.k0(u), dtype=float), axis=1)


def box_kernel() -> Kernel:
    return Kernel(name="box", k0=_box_k0, form="product", k0_sup=0.5, k0_l2sq=0.5,
                  k0_cdf=_box_k0_cdf)


def epanechnikov_kernel() -> Kernel:
    return Kernel(name="epanechnikov", k0=_epanechnikov_k0, form="product",
                  k0_sup=0.75, k0_l2sq=0.6, k0_cdf=_epanechnikov_k0_cdf)


KERNELS = {"box": box_kernel, "epanechnikov": epanechnikov_kernel}


# ---------------------------------------------------------------------------
# Evaluation and deviation
# ---------------------------------------------------------------------------


def kde_evaluate(sample, kernel: Kernel, h: float, x):
    """The density estimate n^-1 sum_i K((x - X_i)/h) / h^d at query points x.

    A scalar query (or a single d-vector for d > 1) returns a float; an array
    of queries returns an array.
    """
    if h <= 0:
        raise ValueError("bandwidth h must be positive")
    s = np.asarray(sample, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    n, d = s.shape
    xq = np.asarray(x, dtype=float)
    if xq.ndim == 0:
        q, scalar_in = xq.reshape(1, 1), True
    elif xq.ndim == 1:
        q, scalar_in = (xq[:, None], False) if d == 1 else (xq[None, :], True)
    else:
        q, scalar_in = xq, False
    out = np.empty(len(q))
    step = max(_EVAL_CHUNK // max(n, 1), 1)
    for lo in range(0, len(q), step):
        hi = min(lo + step, len(q))
        diff = (q[lo:hi, None, :] - s[None, :, :]) / h
        vals = kernel.evaluate(diff.reshape(-1, d)).reshape(hi - lo, n)
        out[lo:hi] = vals.mean(axis=1) / h ** d
    return float(out[0]) if scalar_in else out


def uniform_smoothed_target(kernel: Kernel, h: float, grid, lo: float = 0.0,
                            hi: float = 1.0) -> np.ndarray:
    """E_pi[K_h(x - Y)] for Y uniform on [lo, hi], in closed form (d = 1)."""
    if kernel.k0_cdf is None:
        raise ValueError("kernel has no closed-form profile CDF")
    grid = np.asarray(grid, dtype=float)
    return (kernel.k0_cdf((grid - lo) / h) - kernel.k0_cdf((grid - hi) / h)) / (hi - lo)


def smoothed_target_quadrature(kernel: Kernel, h: float, grid, density: Callable,
                               support: tuple) -> np.ndarray:
    """E_pi[K_h(x - Y)] by adaptive quadrature against a 1-d stationary density."""
    lo, hi = support
    out = np.empty(len(grid))
    for i, x in enumerate(np.asarray(grid, dtype=float)):
        a, b = max(lo, x - h), min(hi, x + h)
        if a >= b:
            out[i] = 0.0
            continue
        val, _ = quad(lambda y: float(kernel.evaluate(np.array([[(x - y) / h]]))[0]) * density(y),
                      a, b, epsabs=QUAD_TOL)
        out[i] = val / h
    return out


def uniform_deviation(sample, kernel: Kernel, h: float, grid, target_values) -> float:
    """Max over the grid of |estimate - smoothed target|."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("evaluation grid is empty")
    est = kde_evaluate(sample, kernel, h, grid)
    return float(np.max(np.abs(est - np.asarray(target_values, dtype=float))))


def deviation_grid(h: float, lo: float = 0.0, hi: float = 1.0, pad: bool = True,
                   spacing_factor: float = 4.0) -> np.ndarray:
    """Evaluation grid with spacing h/spacing_factor, padded by h beyond the support."""
    a, b = (lo - h, hi + h) if pad else (lo, hi)
    step = h / spacing_factor
    return np.arange(a, b + step / 2, step)


# ---------------------------------------------------------------------------
# Rate experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KDEConfig:
    """Bandwidth rule h_n = scale * n^(-beta) plus grid and target policy."""

    beta: float
    scale: float = 1.0
    support: tuple = (0.0, 1.0)
    spacing_factor: float = 4.0
    density: Optional[Callable] = None   # None means uniform on the support

    def bandwidth(self, n: int) -> float:
        return self.scale * float(n) ** (-self.beta)

    def grid(self, h: float) -> np.ndarray:
        lo, hi = self.support
        return deviation_grid(h, lo, hi, spacing_factor=self.spacing_factor)

    def smoothed_target(self, kernel: Kernel, h: float, grid) -> np.ndarray:
        lo, hi = self.support
        if self.density is None:
            return uniform_smoothed_target(kernel, h, grid, lo, hi)
        return smoothed_target_quadrature(kernel, h, grid, self.density, self.support)


@dataclass
class RateReport:
    rows: list          # dicts: n, h, mean_dev, std_err, theory_rate
    slope: float
    slope_se: float
    theory_slope: float

    def slope_within(self, tol: float) -> bool:
        return abs(self.slope - self.theory_slope) <= tol

    def to_json(self) -> str:
        return json.dumps({"slope": self.slope, "slope_se": self.slope_se,
                           "theory_slope": self.theory_slope, "rows": self.rows}, indent=2)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("n,h,mean_dev,std_err,theory_rate\n")
            for r in self.rows:
                fh.write(",".join(format(r[k], ".17g")
                                  for k in ("n", "h", "mean_dev", "std_err", "theory_rate")) + "\n")


def _rate_one(model, kernel, config, sample_fn, task):
    n, task_seed = task
    try:
        h = config.bandwidth(n)
        grid = config.grid(h)
        target = config.smoothed_target(kernel, h, grid)
        if sample_fn is None:
            states = simulate(model, n, task_seed).states
        else:
            states = sample_fn(n, task_seed)
        d = 1 if np.asarray(states).ndim == 1 else np.asarray(states).shape[1]
        return uniform_deviation(states, kernel, h, grid, target), d
    except Exception as exc:
        raise RuntimeError(f"replication with seed {task_seed} (n={n}) failed: {exc}") from exc


def rate_experiment(model: ChainModel, kernel: Kernel, config: KDEConfig, n_grid,
                    replications: int, seed: int,
                    sample_fn: Optional[Callable] = None, jobs: int = 1) -> RateReport:
    """Mean uniform deviation per n and the fitted log-log slope.

    Samples come from ``simulate(model, n, .)`` unless ``sample_fn(n, seed)``
    overrides the source (e.g. an i.i.d. oracle).  Replication (i, r) runs on
    its own derived seed, so jobs > 1 changes nothing but wall time.  The
    theoretical slope reported is -(1 - beta d)/2, log factors ignored.
    """
    from functools import partial

    from .parallel import pool_map

    if len(n_grid) < 3:
        raise ValueError("need at least 3 grid points to fit a rate")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    tasks = [(int(n), child_seed(seed, i, r))
             for i, n in enumerate(n_grid) for r in range(replications)]
    results = pool_map(partial(_rate_one, model, kernel, config, sample_fn), tasks, jobs)
    d = results[0][1]
    rows = []
    for i, n in enumerate(n_grid):
        n = int(n)
        h = config.bandwidth(n)
        devs = [dev for (dev, _) in results[i * replications:(i + 1) * replications]]
        rows.append({
            "n": float(n), "h": h, "mean_dev": float(np.mean(devs)),
            "std_err": float(np.std(devs, ddof=1) / math.sqrt(len(devs))) if len(devs) > 1 else 0.0,
            "theory_rate": math.sqrt(math.log(1.0 / h) / (n * h ** d)),
        })
    from .rademacher import fit_loglog_slope
    slope, slope_se = fit_loglog_slope([r["n"] for r in rows], [r["mean_dev"] for r in rows])
    theory = -(1.0 - config.beta * d) / 2.0
    return RateReport(rows=rows, slope=slope, slope_se=slope_se, theory_slope=theory)


def occupancy_moment_premise_check(model: ChainModel, p: float, x_grid, horizon: int,
                                   replications: int, seed: int,
                                   stationary_density: Callable) -> float:
    """Sup over a state grid of pi(x) * E_x[tau^p], estimated by simulation.

    Restarts the split chain at each grid point and averages the p-th power of
    the first regeneration time over replications; finiteness and stability of
    the returned sup support the same-rate regime for the deviation bound.
    """
    from .regeneration import simulate_split_retrospective
    cert = model.minorization
    if cert is None:
        raise ValueError("model carries no minorization certificate")
    sup_val = 0.0
    for j, x in enumerate(np.asarray(x_grid, dtype=float)):
        taus = []
        for r in range(replications):
            started = ChainModel(kernel=model.kernel, initial_sample=_PointStart(x),
                                 minorization=cert, model_id=model.model_id)
            traj = simulate_split_retrospective(started, horizon, child_seed(seed, j, r))
            flags = np.flatnonzero(traj.regen_flags)
            taus.append(float(flags[0] + 1) if len(flags) else float(horizon))
        sup_val = max(sup_val, stationary_density(float(x)) * float(np.mean(np.asarray(taus) ** p)))
    return sup_val


@dataclass(frozen=True)
class _PointStart:
    x: float

    def __call__(self, rng):
        return np.array([self.x])
