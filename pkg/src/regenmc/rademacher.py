"""Empirical Rademacher complexities and the matching theoretical bounds.

The complexity of a class over data x_1..x_n is the expected supremum over
members of |sum_i eps_i f(x_i)| with i.i.d. random signs eps; the block
variant replaces points by complete regeneration blocks and members by their
block-sum lifts.  Neither quantity is normalized by n here.

The bound calculators evaluate closed-form upper bounds whose universal
multiplicative constants are configuration inputs (default 1); experiments
report the minimal constant that makes the bound dominate what is measured.
"""

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .chains import ChainModel
from .function_classes import EvaluableClass
from .regeneration import BlockSet, extract_blocks, simulate_split_retrospective
from .rng import child_seed, stream

SIGN_CHUNK = 2048
EXHAUSTIVE_CAP = 20


@dataclass(frozen=True)
class RademacherEstimate:
    mean: float
    mc_std_error: float
    n_sign_draws: int
    n_data: int


def _signed_sup_mc(values: np.ndarray, n_mc: int, seed: int) -> RademacherEstimate:
    """Monte Carlo E sup_f |sum_k eps_k values[f, k]| over n_mc sign vectors.

    Sign vectors are drawn in fixed-size chunks from stream(seed, chunk_index),
    so the result is deterministic given (seed, n_mc, chunk size) and invariant
    to how chunks would be distributed across workers.
    """
    m, n = values.shape
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk_index = 0
    while done < n_mc:
        c = min(SIGN_CHUNK, n_mc - done)
        rng = stream(seed, chunk_index)
        signs = rng.integers(0, 2, size=(c, n)) * 2 - 1
        sups = np.abs(signs @ values.T).max(axis=1)
        total += sups.sum()
        total_sq += (sups ** 2).sum()
        done += c
        chunk_index += 1
    mean = total / n_mc
    var = max(total_sq / n_mc - mean ** 2, 0.0)
    return RademacherEstimate(mean=float(mean), mc_std_error=float(np.sqrt(var / n_mc)),
                              n_sign_draws=n_mc, n_data=n)


def exhaustive_signed_sup(values: np.ndarray) -> float:
    """Exact E sup_f |sum eps_k values[f, k]| by enumerating all sign vectors."""
    m, n = values.shape
    if n > EXHAUSTIVE_CAP:
        raise ValueError(f"exhaustive enumeration limited to {EXHAUSTIVE_CAP} data points")
    signs = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1) * 2 - 1
    return float(np.abs(signs @ values.T).max(axis=1).mean())


def empirical_rademacher_iid(cls: EvaluableClass, sample, n_mc: int, seed: int) -> RademacherEstimate:
    """Monte Carlo Rademacher complexity of the class over a fixed sample."""
    sample = np.asarray(sample)
    if len(sample) == 0:
        raise ValueError("empty sample")
    if n_mc < 100:
        raise ValueError("n_mc must be >= 100")
    return _signed_sup_mc(cls.evaluate(sample), n_mc, seed)


def empirical_block_rademacher(cls: EvaluableClass, blocks: BlockSet, n_mc: int,
                               seed: int) -> RademacherEstimate:
    """Monte Carlo block Rademacher complexity over the complete blocks.

    Signs attach to whole blocks; member values are the block sums f'(B_k).
    With all blocks of length one this reproduces the plain estimate on the
    underlying points bit for bit (same sign stream, same arithmetic).
    """
    if blocks.n_complete == 0:
        raise ValueError("no complete blocks")
    values = np.vstack([blocks.block_values(f) for f in cls.members])
    return _signed_sup_mc(values, n_mc, seed)


def block_variance_proxy(cls: EvaluableClass, blocks: BlockSet) -> float:
    """Plug-in for the squared blockwise variance proxy.

    Sup over members of the empirical mean of f'(B)^2 over complete blocks;
    the bound calculators take its square root as ``sigma``.
    """
    if blocks.n_complete == 0:
        raise ValueError("no complete blocks")
    values = np.vstack([blocks.block_values(f) for f in cls.members])
    return float((values ** 2).mean(axis=1).max())


# ---------------------------------------------------------------------------
# Bound calculators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundInputs:
    """Everything the bound formulas can consume; unused fields may stay None.

    ``sigma`` is the variance proxy (pointwise for the plain bound, blockwise
    for the block bounds), ``trunc`` the block-length truncation level,
    ``c_lambda`` = 2 E[exp(lam * tau)] / lam, and ``tau_param`` the tail
    parameter of the concentration bound, always supplied explicitly.
    """

    u: float
    sigma: float
    c: float
    v: float
    n: float
    trunc: Optional[float] = None
    p: Optional[float] = None
    tau_moment_p: Optional[float] = None
    lam: Optional[float] = None
    c_lambda: Optional[float] = None
    m_const: float = 1.0
    k_const: float = 1.0
    tau_mean: Optional[float] = None
    tau_sq_mean: Optional[float] = None
    initial_tau_mean: Optional[float] = None
    sup_mean: Optional[float] = None
    tau_param: Optional[float] = None


def c_lambda_from_mgf(lam: float, mgf_value: float) -> float:
    """The exponential-remainder constant 2 E[exp(lam tau)] / lam."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return 2.0 * mgf_value / lam


def _log_scale(c, u_eff, sigma):
    val = math.log(c * u_eff / sigma)
    if val <= 0:
        raise ValueError(
            f"log(C U / sigma) = {val:.6g} is not positive; the covering scale C is too small "
            "for this (U, sigma)")
    return val

def iid_rademacher_bound(inputs: BoundInputs) -> float:
    """Envelope/variance bound for the plain Rademacher complexity.

    Valid for 0 < sigma <= U; the multiplicative constant is
    ``inputs.m_const``.
    """
    if not 0 < inputs.sigma <= inputs.u:
        raise ValueError("hypothesis violated: need 0 < sigma <= U")
    log_term = _log_scale(inputs.c, inputs.u, inputs.sigma)
    return inputs.m_const * (inputs.v * inputs.u * log_term
                             + math.sqrt(inputs.v * inputs.n * inputs.sigma ** 2 * log_term))


def _block_main_term(inputs: BoundInputs) -> float:
    if inputs.trunc is None:
        raise ValueError("trunc (the block-length truncation level L) is required")
    lu = inputs.trunc * inputs.u
    if not 0 < inputs.sigma <= lu:
        raise ValueError("hypothesis violated: need 0 < sigma' <= L * U")
    log_term = _log_scale(inputs.c, lu, inputs.sigma)
    return inputs.m_const * (inputs.v * lu * log_term
                             + math.sqrt(inputs.v * inputs.n * inputs.sigma ** 2 * log_term))


def block_rademacher_bound_pm(inputs: BoundInputs) -> float:
    """Block complexity bound under a polynomial moment on block lengths.

    Main term at truncation level L plus the remainder
    n E[tau^p] / L^(p-1).
    """
    if inputs.p is None or inputs.tau_moment_p is None:
        raise ValueError("p and tau_moment_p are required for the polynomial-moment bound")
    remainder = inputs.n * inputs.tau_moment_p / inputs.trunc ** (inputs.p - 1.0)
    return _block_main_term(inputs) + remainder


def block_rademacher_bound_em(inputs: BoundInputs) -> float:
    """Block complexity bound under an exponential moment on block lengths.

    Main term at truncation level L plus the remainder
    n U exp(-L lam / 2) C_lambda.
    """
    if inputs.lam is None or inputs.c_lambda is None:
        raise ValueError("lam and c_lambda are required for the exponential-moment bound")
    remainder = inputs.n * inputs.u * math.exp(-inputs.trunc * inputs.lam / 2.0) * inputs.c_lambda
    return _block_main_term(inputs) + remainder


def optimize_block_bound(inputs: BoundInputs, mode: str,
                         trunc_grid=None):
    """Minimize the block bound over a truncation grid; returns (value, L, table).

    Grid entries violating sigma' <= L U are skipped; with no feasible entry a
    ValueError is raised.
    """
    if trunc_grid is None:
        trunc_grid = 2.0 ** np.arange(0, 31)
    fn = {"pm": block_rademacher_bound_pm, "em": block_rademacher_bound_em}[mode]
    table = []
    for L in trunc_grid:
        if inputs.sigma > L * inputs.u:
            continue
        try:
            val = fn(replace(inputs, trunc=float(L)))
        except ValueError:
            continue
        table.append((float(L), float(val)))
    if not table:
        raise ValueError("no feasible truncation level on the grid (need sigma' <= L U)")
    best_l, best_val = min(table, key=lambda t: t[1])
    return best_val, best_l, table


def expected_supremum_bound(inputs: BoundInputs, r_nb: float) -> float:
    """Expected supremum of the centered process from the block complexity.

    4 R_block + 4 sup_f |stationary mean| sqrt(n E[tau^2])
    + 2 U (E_initial[tau] + E_atom[tau]).
    """
    for name in ("sup_mean", "tau_sq_mean", "initial_tau_mean", "tau_mean"):
        if getattr(inputs, name) is None:
            raise ValueError(f"{name} is required")
    return (4.0 * r_nb
            + 4.0 * inputs.sup_mean * math.sqrt(inputs.n * inputs.tau_sq_mean)
            + 2.0 * inputs.u * (inputs.initial_tau_mean + inputs.tau_mean))


def excess_probability_bound(t: float, inputs: BoundInputs, r_n: float) -> float:
    """Tail bound for the supremum exceeding t, given a centering level r_n.

    Defined for t >= 1 + K r_n; the value may exceed one and is reported
    as-is.  ``tau_param`` is the tail parameter and is never inferred.
    """
    k = inputs.k_const
    if inputs.tau_mean is None or inputs.tau_param is None:
        raise ValueError("tau_mean and tau_param are required")
    if t < 1.0 + k * r_n:
        raise ValueError(f"t must satisfy t >= 1 + K * r_n = {1.0 + k * r_n:.6g}")
    gap = t - k * r_n
    gauss = gap ** 2 / (inputs.n * inputs.sigma ** 2)
    linear = gap / (inputs.tau_param ** 3 * inputs.u * math.log(inputs.n))
    return k * math.exp(-(inputs.tau_mean / k) * min(gauss, linear))


def high_probability_level(delta: float, inputs: BoundInputs, r_n: float) -> float:
    """The t at which the Gaussian branch of the tail bound equals delta."""
    k = inputs.k_const
    return k * r_n + math.sqrt(inputs.n * inputs.sigma ** 2
                               * k * math.log(k / delta) / inputs.tau_mean)


# ---------------------------------------------------------------------------
# Bound-vs-empirical experiment
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    """Per-n empirical block complexities against the computed bound."""

    rows: list          # dicts: n, empirical, mc_err, bound, ratio, trunc_opt
    growth_exponent: float
    growth_exponent_se: float
    m_min: float
    m_const: float
    mode: str

    def to_json(self) -> str:
        return json.dumps({
            "mode": self.mode,
            "m_const": self.m_const,
            "m_min": self.m_min,
            "growth_exponent": self.growth_exponent,
            "growth_exponent_se": self.growth_exponent_se,
            "rows": self.rows,
        }, indent=2)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("n,empirical,mc_err,bound,ratio,L_opt,M_min\n")
            for r in self.rows:
                fh.write(",".join(format(r[k], ".17g") for k in
                                  ("n", "empirical", "mc_err", "bound", "ratio", "trunc_opt"))
                         + f",{format(self.m_min, '.17g')}\n")


def fit_loglog_slope(xs, ys):
    """OLS slope and its standard error for log(y) against log(x)."""
    lx, ly = np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    dof = len(lx) - 2
    if dof > 0 and len(res):
        s2 = res[0] / dof
        se = float(np.sqrt(s2 / np.sum((lx - lx.mean()) ** 2)))
    else:
        se = float("nan")
    return float(coef[0]), se


def compare_bound_vs_empirical(model: ChainModel, cls: EvaluableClass, n_grid,
                               replications: int, seed: int, n_mc: int = 2000,
                               mode: str = "em", m_const: float = 1.0,
                               p: float = 2.0, lam: Optional[float] = None) -> BoundReport:
    """Measure block complexities on a chain and pit them against the bound.

    For each n: the empirical block complexity (mean over replications,
    each on stream (seed, i, r)), and the bound with plug-in moments from the
    pooled blocks (variance proxy inflated by 3 MC standard errors), minimized
    over the truncation grid.  Reports the domination ratio per n, the fitted
    growth exponent of the empirical complexity, and the minimal constant
    M_min that would make the bound dominate everywhere.
    """
    rows = []
    emp_means = []
    for i, n in enumerate(n_grid):
        estimates = []
        taus = []
        sig_sqs = []
        for r in range(replications):
            traj = simulate_split_retrospective(model, int(n), child_seed(seed, i, r))
            blocks = extract_blocks(traj)
            if blocks.n_complete == 0:
                continue
            est = empirical_block_rademacher(cls, blocks, n_mc, child_seed(seed, i, r, 1))
            estimates.append(est)
            taus.append(blocks.lengths)
            values = np.vstack([blocks.block_values(f) for f in cls.members])
            sig_sqs.append((values ** 2).mean(axis=1))
        if not estimates:
            raise RuntimeError(f"no complete blocks at n={n}")
        emp = float(np.mean([e.mean for e in estimates]))
        mc_err = float(np.sqrt(np.mean([e.mc_std_error ** 2 for e in estimates]) / len(estimates)))
        tau_all = np.concatenate(taus).astype(float)
        n_blocks = float(np.mean([len(t) for t in taus]))
        sig_sq = np.mean(sig_sqs, axis=0).max()
        sig_se = np.std([s.max() for s in sig_sqs], ddof=1) / math.sqrt(len(sig_sqs)) if len(sig_sqs) > 1 else 0.0
        sigma_plug = math.sqrt(sig_sq + 3.0 * sig_se)
        inputs = BoundInputs(u=cls.envelope, sigma=sigma_plug, c=cls.vc_c, v=cls.vc_v,
                             n=n_blocks, p=p,
                             tau_moment_p=float(np.mean(tau_all ** p)),
                             lam=lam, m_const=m_const)
        if mode == "em":
            if lam is None:
                raise ValueError("mode='em' requires lam")
            inputs = replace(inputs, c_lambda=c_lambda_from_mgf(lam, float(np.mean(np.exp(lam * tau_all)))))
        bound, trunc_opt, _ = optimize_block_bound(inputs, mode)
        rows.append({"n": float(n), "empirical": emp, "mc_err": mc_err, "bound": bound,
                     "ratio": bound / emp if emp > 0 else float("inf"), "trunc_opt": trunc_opt,
                     "main_term": _block_main_term(replace(inputs, trunc=trunc_opt, m_const=1.0)),
                     "remainder": bound - _block_main_term(replace(inputs, trunc=trunc_opt))})
        emp_means.append(emp)
    slope, slope_se = fit_loglog_slope([r["n"] for r in rows], emp_means)
    m_min = max(max((r["empirical"] - r["remainder"]) / r["main_term"] for r in rows), 0.0)
    return BoundReport(rows=rows, growth_exponent=slope, growth_exponent_se=slope_se,
                       m_min=m_min, m_const=m_const, mode=mode)


# ---------------------------------------------------------------------------
# Centered supremum growth (empirical process over a chain)
# ---------------------------------------------------------------------------


@dataclass
class GrowthReport:
    rows: list  # dicts: n, mean_sup, std_err
    exponent: float
    exponent_se: float

    def to_json(self) -> str:
        return json.dumps({"exponent": self.exponent, "exponent_se": self.exponent_se,
                           "rows": self.rows}, indent=2)


def supremum_growth_experiment(sample_fn, cls: EvaluableClass, true_means,
                               n_grid, replications: int, seed: int) -> GrowthReport:
    """Growth in n of sup over members of |sum_i (f(X_i) - mean_f)|.

    ``sample_fn(n, seed)`` must return the chain states; ``true_means`` are
    the stationary means of the members, in order.
    """
    true_means = np.asarray(true_means, dtype=float)
    rows = []
    for i, n in enumerate(n_grid):
        sups = []
        for r in range(replications):
            states = sample_fn(int(n), child_seed(seed, i, r))
            vals = cls.evaluate(states)
            sups.append(float(np.abs(vals.sum(axis=1) - n * true_means).max()))
        rows.append({"n": float(n), "mean_sup": float(np.mean(sups)),
                     "std_err": float(np.std(sups, ddof=1) / math.sqrt(len(sups)))})
    slope, se = fit_loglog_slope([r["n"] for r in rows], [r["mean_sup"] for r in rows])
    return GrowthReport(rows=rows, exponent=slope, exponent_se=se)
