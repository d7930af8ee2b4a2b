"""Random-walk Metropolis-Hastings on bounded convex supports.

Includes construction and grid validation of the uniform minorization
certificate for the sampler (small ball around a chosen center, minorizing
measure proportional to the target there), regeneration-instrumented
sampling, and quantile / credible-interval error experiments.
"""

import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .chains import REJECTION_CAP, SamplingError, Trajectory
from .rng import child_seed, stream

CERT_TOL = 1e-9
_SQRT2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Supports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; the bounded convex support used by the built-ins."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def centroid(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def uniform_sample(self, rng) -> np.ndarray:
        return self.lo + rng.random(self.dim) * (self.hi - self.lo)


# ---------------------------------------------------------------------------
# Coordinate densities and product targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformCoord:
    lo: float
    hi: float

    @property
    def sup(self) -> float:
        return 1.0 / (self.hi - self.lo)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.lo) & (t <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def pdf_scalar(self, t: float) -> float:
        return 1.0 / (self.hi - self.lo) if self.lo <= t <= self.hi else 0.0


@dataclass(frozen=True)
class TruncGaussCoord:
    lo: float
    hi: float
    mu: float
    sigma: float

    def __post_init__(self):
        z = ndtr((self.hi - self.mu) / self.sigma) - ndtr((self.lo - self.mu) / self.sigma)
        object.__setattr__(self, "_z", float(z))

    @property
    def sup(self) -> float:
        peak = min(max(self.mu, self.lo), self.hi)
        return self.pdf_scalar(peak)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        raw = np.exp(-0.5 * ((t - self.mu) / self.sigma) ** 2) / (self.sigma * _SQRT2PI * self._z)
        return np.where((t >= self.lo) & (t <= self.hi), raw, 0.0)

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.lo, self.hi)
        a = ndtr((self.lo - self.mu) / self.sigma)
        return (ndtr((t - self.mu) / self.sigma) - a) / self._z

    def pdf_scalar(self, t: float) -> float:
        if not self.lo <= t <= self.hi:
            return 0.0
        u = (t - self.mu) / self.sigma
        return math.exp(-0.5 * u * u) / (self.sigma * _SQRT2PI * self._z)


@dataclass(frozen=True)
class BimodalCoord:
    lo: float
    hi: float
    mu1: float
    s1: float
    mu2: float
    s2: float
    w1: float

    def __post_init__(self):
        z1 = ndtr((self.hi - self.mu1) / self.s1) - ndtr((self.lo - self.mu1) / self.s1)
        z2 = ndtr((self.hi - self.mu2) / self.s2) - ndtr((self.lo - self.mu2) / self.s2)
        object.__setattr__(self, "_z", float(self.w1 * z1 + (1.0 - self.w1) * z2))

    @property
    def sup(self) -> float:
        # each component never exceeds its unconstrained mode, so this is certified
        return (self.w1 / (self.s1 * _SQRT2PI) + (1.0 - self.w1) / (self.s2 * _SQRT2PI)) / self._z

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        raw = (self.w1 * np.exp(-0.5 * ((t - self.mu1) / self.s1) ** 2) / (self.s1 * _SQRT2PI)
               + (1 - self.w1) * np.exp(-0.5 * ((t - self.mu2) / self.s2) ** 2) / (self.s2 * _SQRT2PI))
        return np.where((t >= self.lo) & (t <= self.hi), raw / self._z, 0.0)

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.lo, self.hi)
        c1 = ndtr((t - self.mu1) / self.s1) - ndtr((self.lo - self.mu1) / self.s1)
        c2 = ndtr((t - self.mu2) / self.s2) - ndtr((self.lo - self.mu2) / self.s2)
        return (self.w1 * c1 + (1.0 - self.w1) * c2) / self._z

    def pdf_scalar(self, t: float) -> float:
        if not self.lo <= t <= self.hi:
            return 0.0
        u1 = (t - self.mu1) / self.s1
        u2 = (t - self.mu2) / self.s2
        return (self.w1 * math.exp(-0.5 * u1 * u1) / (self.s1 * _SQRT2PI)
                + (1.0 - self.w1) * math.exp(-0.5 * u2 * u2) / (self.s2 * _SQRT2PI)) / self._z


@dataclass(frozen=True)
class Target:
    """A normalized product density on a box with exact coordinate marginals.

    Product structure keeps marginal CDFs, quantiles, interval masses and the
    certified sup norm exact, which the credible-interval experiments rely on.
    """

    name: str
    support: Box
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "sup_density", float(np.prod([c.sup for c in self.coords])))

    @property
    def dim(self) -> int:
        return self.support.dim

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.ones(len(x))
        for k, c in enumerate(self.coords):
            vals = vals * c.pdf(x[:, k])
        return vals

    def logpdf(self, x) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def pdf_point(self, x) -> float:
        val = 1.0
        for k, c in enumerate(self.coords):
            val *= c.pdf_scalar(float(x[k]))
            if val == 0.0:
                return 0.0
        return val

    def marginal_pdf(self, k: int, t):
        return self.coords[k].pdf(t)

    def marginal_cdf(self, k: int, t):
        return self.coords[k].cdf(t)

    def marginal_quantile(self, k: int, u: float) -> float:
        if not 0.0 < u < 1.0:
            raise ValueError("u must lie in (0, 1)")
        lo, hi = float(self.support.lo[k]), float(self.support.hi[k])
        cdf = self.coords[k].cdf
        return float(brentq(lambda t: float(cdf(t)) - u, lo, hi, xtol=1e-13))

    def interval_mass(self, k: int, a: float, b: float) -> float:
        lo, hi = float(self.support.lo[k]), float(self.support.hi[k])
        a, b = max(a, lo), min(b, hi)
        if a >= b:
            return 0.0
        return float(self.coords[k].cdf(b) - self.coords[k].cdf(a))

    def ball_mass(self, z, r: float) -> float:
        """Target mass of B(z, r) intersected with the support (exact for d = 1)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.dim == 1:
            return self.interval_mass(0, z[0] - r, z[0] + r)
        # midpoint-grid quadrature over the bounding box of the ball
        m = max(8, int(math.ceil(400 ** (1.0 / self.dim))))
        axes = [np.linspace(z[k] - r, z[k] + r, m + 1) for k in range(self.dim)]
        mids = [0.5 * (a[1:] + a[:-1]) for a in axes]
        grid = np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1).reshape(-1, self.dim)
        cell = float(np.prod([a[1] - a[0] for a in axes]))
        inside = np.linalg.norm(grid - z, axis=1) <= r
        return float(np.sum(self.pdf(grid[inside])) * cell)


def uniform_target(lo=0.0, hi=1.0, d: int = 1) -> Target:
    support = Box(np.full(d, float(lo)), np.full(d, float(hi)))
    return Target("uniform", support, tuple(UniformCoord(float(lo), float(hi)) for _ in range(d)))


def truncated_gaussian_target(lo=0.0, hi=1.0, mu=0.5, sigma=0.25, d: int = 1) -> Target:
    support = Box(np.full(d, float(lo)), np.full(d, float(hi)))
    return Target("trunc_gauss", support,
                  tuple(TruncGaussCoord(float(lo), float(hi), float(mu), float(sigma))
                        for _ in range(d)))


def bimodal_target(lo=0.0, hi=1.0, mu1=0.3, s1=0.1, mu2=0.75, s2=0.08, w1=0.5,
                   d: int = 1) -> Target:
    support = Box(np.full(d, float(lo)), np.full(d, float(hi)))
    return Target("bimodal", support,
                  tuple(BimodalCoord(float(lo), float(hi), mu1, s1, mu2, s2, w1)
                        for _ in range(d)))


TARGETS = {"uniform": uniform_target, "trunc_gauss": truncated_gaussian_target,
           "bimodal": bimodal_target}


# ---------------------------------------------------------------------------
# Proposals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RWProposal:
    """Even (symmetric) random-walk increment law with a certified ball floor.

    ``floor_b`` and ``floor_eps`` certify density(z) >= floor_b whenever
    |z| <= floor_eps; the floor is re-checked on a deterministic grid of 10^3
    interior points plus the ball boundary at construction.
    """

    name: str
    increments: object              # bulk sampler: (rng, n) -> (n, d)
    density: object                 # scalar + vectorized density of the increment
    floor_b: float
    floor_eps: float
    dim: int

    def __post_init__(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((1000, self.dim))
        pts /= np.maximum(np.linalg.norm(pts, axis=1, keepdims=True), 1e-12)
        radii = np.linspace(0.0, 1.0, 1000)[:, None]
        grid = np.vstack([pts * radii * self.floor_eps, pts * self.floor_eps])
        dens = self.density.vec(grid)
        if np.any(dens < self.floor_b - 1e-12):
            raise ValueError("proposal density violates its certified ball floor")

    def sample_increments(self, rng, n: int) -> np.ndarray:
        return self.increments(rng, n)


@dataclass(frozen=True)
class _UniformIncrements:
    a: float
    d: int

    def __call__(self, rng, n):
        return rng.uniform(-self.a, self.a, (n, self.d))


@dataclass(frozen=True)
class _UniformIncrementDensity:
    a: float
    d: int

    def vec(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        inside = np.all(np.abs(z) <= self.a, axis=1)
        return np.where(inside, (2.0 * self.a) ** (-self.d), 0.0)

    def scalar(self, z) -> float:
        for k in range(self.d):
            if abs(float(z[k])) > self.a:
                return 0.0
        return (2.0 * self.a) ** (-self.d)


def uniform_step_proposal(a: float, d: int = 1) -> RWProposal:
    """Uniform increments on [-a, a]^d; floor (2a)^-d on the inscribed ball."""
    if a <= 0:
        raise ValueError("step half-width a must be positive")
    return RWProposal(name=f"uniform_step(a={a:g})", increments=_UniformIncrements(a, d),
                      density=_UniformIncrementDensity(a, d),
                      floor_b=(2.0 * a) ** (-d), floor_eps=a, dim=d)


@dataclass(frozen=True)
class _GaussIncrements:
    s: float
    d: int

    def __call__(self, rng, n):
        return rng.normal(0.0, self.s, (n, self.d))


@dataclass(frozen=True)
class _GaussIncrementDensity:
    s: float
    d: int

    def vec(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return (np.exp(-0.5 * (z ** 2).sum(axis=1) / self.s ** 2)
                / (2 * math.pi * self.s ** 2) ** (self.d / 2))

    def scalar(self, z) -> float:
        ss = 0.0
        for k in range(self.d):
            ss += float(z[k]) ** 2
        return math.exp(-0.5 * ss / self.s ** 2) / (2 * math.pi * self.s ** 2) ** (self.d / 2)


def gaussian_step_proposal(s: float, eps: float, d: int = 1) -> RWProposal:
    """Gaussian increments N(0, s^2 I); floor is the density at radius eps."""
    if s <= 0 or eps <= 0:
        raise ValueError("s and eps must be positive")
    b = math.exp(-0.5 * eps ** 2 / s ** 2) / (2 * math.pi * s ** 2) ** (d / 2)
    return RWProposal(name=f"gaussian_step(s={s:g})", increments=_GaussIncrements(s, d),
                      density=_GaussIncrementDensity(s, d), floor_b=b, floor_eps=eps, dim=d)


# ---------------------------------------------------------------------------
# The sampler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoveInfo:
    proposed: np.ndarray
    accept_prob: float
    forward_density: float


def mh_step(target: Target, proposal: RWProposal, x: np.ndarray, rng):
    """One accept/reject move from x; returns (next state, accepted, MoveInfo).

    The acceptance probability is min(1, pi(y)/pi(x)) for the even random-walk
    increment, and 1 by convention when pi(x) vanishes.  Proposals falling
    outside the support have zero target density, hence zero acceptance.
    """
    x = np.asarray(x, dtype=float)
    z = proposal.sample_increments(rng, 1)[0]
    y = x + z
    px = target.pdf_point(x)
    py = target.pdf_point(y)
    if px == 0.0:
        rho = 1.0
    elif py >= px:
        rho = 1.0
    else:
        rho = py / px
    accepted = rng.random() < rho
    info = MoveInfo(proposed=y, accept_prob=rho, forward_density=proposal.density.scalar(z))
    return (y if accepted else x), accepted, info


def run_mh(target: Target, proposal: RWProposal, n: int, seed: int,
           x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Plain MH path of n states; starts at the support centroid by default."""
    rng = stream(seed, 0)
    x = np.asarray(x0, dtype=float).copy() if x0 is not None else target.support.centroid()
    incs = proposal.sample_increments(rng, n)
    u_acc = rng.random(n)
    states = np.empty((n, target.dim))
    px = target.pdf_point(x)
    for i in range(n):
        states[i] = x
        if i == n - 1:
            break
        y = x + incs[i]
        py = target.pdf_point(y)
        if px == 0.0 or py >= px or u_acc[i] * px < py:
            x, px = y, py
    return states


# ---------------------------------------------------------------------------
# Minorization certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MHMinorization:
    """Small ball S = B(center, radius) cap support, with delta and Psi = pi|S.

    delta = floor_b * pi(S) / sup_density and Psi has density pi(y) / pi(S) on
    S.  ``grid_hash`` fingerprints the validation grid the certificate passed
    at construction.
    """

    target: Target
    proposal: RWProposal
    center: np.ndarray
    radius: float
    delta: float
    psi_mass: float
    grid_hash: str

    def small_set(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        near = np.linalg.norm(x - self.center, axis=1) <= self.radius
        return near & self.target.support.contains(x)

    def psi_density(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return np.where(self.small_set(y), self.target.pdf(y) / self.psi_mass, 0.0)

    def psi_sample(self, rng) -> np.ndarray:
        lo = np.maximum(self.center - self.radius, self.target.support.lo)
        hi = np.minimum(self.center + self.radius, self.target.support.hi)
        for _ in range(REJECTION_CAP):
            y = lo + rng.random(self.target.dim) * (hi - lo)
            if float(np.linalg.norm(y - self.center)) > self.radius:
                continue
            if rng.random() * self.target.sup_density < self.target.pdf_point(y):
                return y
        raise SamplingError(f"Psi rejection sampler exceeded {REJECTION_CAP} proposals")

    def to_json(self) -> str:
        return json.dumps({
            "target": self.target.name, "proposal": self.proposal.name,
            "center": [float(c) for c in self.center], "radius": self.radius,
            "delta": self.delta, "psi_mass": self.psi_mass,
            "validation_grid_hash": self.grid_hash,
        }, indent=2)


def build_minorization(target: Target, proposal: RWProposal,
                       center=None, grid_size: int = 41) -> MHMinorization:
    """Construct and grid-validate the small-ball certificate.

    The small set is the ball of radius floor_eps/2 around ``center`` (the
    support centroid by default) intersected with the support.  Every pair
    (x, y) on a deterministic grid over the small set must satisfy
    q(y - x) rho(x, y) >= delta psi(y) within 1e-9, else construction fails
    with the witness pair.  A delta >= 1 is rejected as degenerate.
    """
    z = np.atleast_1d(np.asarray(center, dtype=float)) if center is not None \
        else target.support.centroid()
    if not bool(target.support.contains(z[None, :])[0]):
        raise ValueError("certificate center must lie inside the support")
    radius = proposal.floor_eps / 2.0
    psi_mass = target.ball_mass(z, radius)
    if psi_mass <= 0:
        raise ValueError("small ball carries no target mass")
    delta = proposal.floor_b * psi_mass / target.sup_density
    if delta >= 1.0:
        raise ValueError(f"degenerate certificate: delta = {delta:.6g} >= 1")
    d = target.dim
    per_axis = grid_size if d == 1 else max(5, int(round(grid_size ** (1.0 / d))))
    lo = np.maximum(z - radius, target.support.lo)
    hi = np.minimum(z + radius, target.support.hi)
    axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(d)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    pts = pts[np.linalg.norm(pts - z, axis=1) <= radius]
    xs = np.repeat(pts, len(pts), axis=0)
    ys = np.tile(pts, (len(pts), 1))
    q = proposal.density.vec(ys - xs)
    px, py = target.pdf(xs), target.pdf(ys)
    with np.errstate(invalid="ignore"):
        rho = np.where(px > 0, np.minimum(1.0, py / np.where(px > 0, px, 1.0)), 1.0)
    lhs = q * rho
    rhs = delta * py / psi_mass
    bad = lhs < rhs - CERT_TOL
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"minorization validation failed at x={xs[i]}, y={ys[i]}: "
            f"p={lhs[i]:.6g} < delta*psi={rhs[i]:.6g}")
    grid_hash = hashlib.sha256(pts.tobytes()).hexdigest()[:16]
    return MHMinorization(target=target, proposal=proposal, center=z, radius=radius,
                          delta=delta, psi_mass=psi_mass, grid_hash=grid_hash)


def mh_chain_regen(target: Target, proposal: RWProposal, cert: MHMinorization,
                   n: int, seed: int, x0: Optional[np.ndarray] = None) -> Trajectory:
    """MH path with retrospective regeneration flags from the certificate.

    A step can regenerate only when it starts in the small set and the move is
    an accepted move to a fresh point: the minorizing measure has a density,
    so the rejection atom carries none of its mass.  The flag probability is
    delta psi(y) / (q(y - x) rho(x, y)), checked to never exceed 1 + 1e-9;
    the X-marginal is that of the plain sampler.  The start is a Psi draw
    unless ``x0`` overrides it.
    """
    rng = stream(seed, 0)
    rng_flags = stream(seed, 1)
    x = np.asarray(x0, dtype=float).copy() if x0 is not None else cert.psi_sample(rng)
    incs = proposal.sample_increments(rng, n)
    u_acc = rng.random(n)
    states = np.empty((n, target.dim))
    flags = np.zeros(n, dtype=bool)
    center = cert.center
    radius = cert.radius
    delta = cert.delta
    psi_mass = cert.psi_mass
    q_scalar = proposal.density.scalar
    px = target.pdf_point(x)
    for i in range(n):
        states[i] = x
        z = incs[i]
        y = x + z
        py = target.pdf_point(y)
        if px == 0.0:
            rho, accepted = 1.0, True
        elif py >= px:
            rho, accepted = 1.0, True
        else:
            rho = py / px
            accepted = u_acc[i] * px < py
        if accepted and py > 0.0 and px > 0.0:
            dx = x - center
            if float(dx @ dx) <= radius * radius:
                dy = y - center
                if float(dy @ dy) <= radius * radius:
                    prob = delta * (py / psi_mass) / (q_scalar(z) * rho)
                    if prob > 1.0 + CERT_TOL:
                        raise ValueError(
                            f"certificate violation at step {i}: "
                            f"regeneration probability {prob:.12g} > 1")
                    flags[i] = rng_flags.random() < prob
        if accepted:
            x, px = y, py
    return Trajectory(states=states, regen_flags=flags, seed=seed,
                      model_id=f"mh({target.name},{proposal.name})")


# ---------------------------------------------------------------------------
# Quantiles and credible intervals
# ---------------------------------------------------------------------------


def empirical_cdf_quantile(values, u: float) -> float:
    """Smallest sample value whose empirical CDF reaches u."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    values = np.sort(np.asarray(values, dtype=float).ravel())
    idx = int(math.ceil(len(values) * u)) - 1
    return float(values[max(idx, 0)])


def empirical_quantiles(values, us) -> np.ndarray:
    values = np.sort(np.asarray(values, dtype=float).ravel())
    idx = np.maximum(np.ceil(len(values) * np.asarray(us, dtype=float)).astype(int) - 1, 0)
    return values[idx]


@dataclass
class QuantileReport:
    """Reference vs empirical quantiles for one coordinate at one sample size."""

    coordinate: int
    n: int
    u_grid: np.ndarray
    empirical: np.ndarray     # mean over replications of Q-hat(u)
    reference: np.ndarray
    sup_error: float          # mean over replications of sup_u |Q-hat - Q|
    sup_error_se: float
    density_floor: float      # inf of the marginal density between the gamma quantiles
    monotone: bool            # Q-hat nondecreasing on every replication


@dataclass
class QuantileSeries:
    reports: list
    slope: float
    slope_se: float
    gamma: float
    density_floor: float
    rate_checked: bool

    def to_json(self) -> str:
        return json.dumps({
            "gamma": self.gamma, "slope": self.slope, "slope_se": self.slope_se,
            "density_floor": self.density_floor, "rate_checked": self.rate_checked,
            "sup_errors": [{"n": r.n, "sup_err": r.sup_error, "se": r.sup_error_se,
                            "monotone": r.monotone} for r in self.reports],
        }, indent=2)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("n,u,qhat,qref,err\n")
            for rep in self.reports:
                for u, qh, qr in zip(rep.u_grid, rep.empirical, rep.reference):
                    fh.write(f"{rep.n},{format(u, '.17g')},{format(qh, '.17g')},"
                             f"{format(qr, '.17g')},{format(abs(qh - qr), '.17g')}\n")


def _credible_one(target, proposal, cert, k, us, q_ref, task):
    n, task_seed = task
    try:
        traj = mh_chain_regen(target, proposal, cert, n, task_seed)
        qh = empirical_quantiles(traj.states[:, k], us)
        mono = bool(np.all(np.diff(qh) >= 0))
        return float(np.max(np.abs(qh - q_ref))), qh, mono
    except Exception as exc:
        raise RuntimeError(f"replication with seed {task_seed} (n={n}) failed: {exc}") from exc


def credible_interval_experiment(target: Target, proposal: RWProposal,
                                 cert: MHMinorization, k: int, gamma: float,
                                 n_grid, replications: int, seed: int,
                                 n_u: int = 17, jobs: int = 1) -> QuantileSeries:
    """Sup quantile error over u in [2 gamma, 1 - 2 gamma] per chain length.

    For each n the sup error is averaged over replications and the log-log
    slope across n is fitted (the reference exponent is -1/2).  If the
    marginal density floor between the gamma quantiles is not positive, the
    rate check is skipped with a warning.  Replications run on independent
    derived seeds, so jobs > 1 only changes wall time.
    """
    if not 0.0 < gamma < 0.25:
        raise ValueError("gamma must lie in (0, 0.25)")
    us = np.linspace(2 * gamma, 1 - 2 * gamma, n_u)
    q_ref = np.array([target.marginal_quantile(k, u) for u in us])
    floor_us = np.linspace(gamma, 1 - gamma, 4 * n_u)
    density_floor = float(min(float(target.marginal_pdf(k, target.marginal_quantile(k, u)))
                              for u in floor_us))
    rate_checked = density_floor > 0
    if not rate_checked:
        warnings.warn("marginal density floor is not positive; rate check skipped", stacklevel=2)
    from functools import partial

    from .parallel import pool_map

    tasks = [(int(n), child_seed(seed, i, r))
             for i, n in enumerate(n_grid) for r in range(replications)]
    results = pool_map(partial(_credible_one, target, proposal, cert, k, us, q_ref),
                       tasks, jobs)
    reports = []
    for i, n in enumerate(n_grid):
        n = int(n)
        chunk = results[i * replications:(i + 1) * replications]
        sups = [c[0] for c in chunk]
        qhats = [c[1] for c in chunk]
        mono = all(c[2] for c in chunk)
        reports.append(QuantileReport(
            coordinate=k, n=n, u_grid=us, empirical=np.mean(qhats, axis=0),
            reference=q_ref, sup_error=float(np.mean(sups)),
            sup_error_se=float(np.std(sups, ddof=1) / math.sqrt(len(sups))) if len(sups) > 1 else 0.0,
            density_floor=density_floor, monotone=mono))
    from .rademacher import fit_loglog_slope
    if rate_checked:
        slope, slope_se = fit_loglog_slope([r.n for r in reports],
                                           [r.sup_error for r in reports])
    else:
        slope, slope_se = float("nan"), float("nan")
    return QuantileSeries(reports=reports, slope=slope, slope_se=slope_se, gamma=gamma,
                          density_floor=density_floor, rate_checked=rate_checked)


# ---------------------------------------------------------------------------
# Ball-chaining coverage of the support
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainingCheck:
    ok: bool
    min_steps: int
    trials: int
    failures: int


def check_ball_chaining_geometry(support: Box, eps: float, n_trials: int = 10_000,
                                 seed: int = 0) -> ChainingCheck:
    """Geometric backbone of the uniform-minorization argument.

    Computes the minimal k with eps (1 + k/4) > diameter(support), and
    spot-checks on random pairs (x, y) and nesting levels that the prescribed
    segment point m satisfies B(m, gamma/4) inside B(x, eta) cap B(y, gamma)
    whenever |x - y| <= eta + gamma/4.
    """
    diam = support.diameter()
    min_steps = max(int(math.floor(4.0 * (diam / eps - 1.0))) + 1, 1)
    while eps * (1 + min_steps / 4.0) <= diam:  # guard against float edge cases
        min_steps += 1
    rng = stream(seed, 0)
    failures = 0
    for _ in range(n_trials):
        level = int(rng.integers(0, min_steps + 1))
        eta = eps * (1 + level / 4.0)
        gam = eps
        x = support.uniform_sample(rng)
        direction = rng.standard_normal(support.dim)
        direction /= max(float(np.linalg.norm(direction)), 1e-12)
        y = np.clip(x + direction * rng.random() * (eta + gam / 4.0), support.lo, support.hi)
        dist = float(np.linalg.norm(x - y))
        if dist > eta + gam / 4.0 or dist == 0.0:
            continue
        t = max(0.0, 1.0 - (eta - gam / 4.0) / dist)
        m = y + t * (x - y)
        ok = (np.linalg.norm(m - x) <= eta - gam / 4.0 + 1e-12
              and np.linalg.norm(m - y) <= 0.75 * gam + 1e-12)
        if not ok:
            failures += 1
    return ChainingCheck(ok=failures == 0, min_steps=min_steps, trials=n_trials,
                         failures=failures)
