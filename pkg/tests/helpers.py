"""Shared test utilities."""

import numpy as np
from scipy.stats import kstwobign


def discrete_ks_pvalue(samples, cdf) -> float:
    """One-sample KS test against a discrete integer-valued CDF.

    The statistic is the sup over atoms of |ECDF - CDF| (both jump at the
    same integers), with an asymptotic Kolmogorov p-value, which is
    conservative for discrete laws.
    """
    samples = np.sort(np.asarray(samples))
    n = len(samples)
    ks = np.arange(1, samples.max() + 1)
    ecdf = np.searchsorted(samples, ks, side="right") / n
    d = float(np.max(np.abs(ecdf - cdf(ks))))
    return float(kstwobign.sf(d * np.sqrt(n)))


def batch_means_se(x, n_batches: int = 100) -> float:
    """Standard error of the mean of a correlated series via batch means."""
    x = np.asarray(x, dtype=float)
    m = len(x) // n_batches
    means = x[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))
