"""Monte Carlo verification harness for the evolved conditional kernels.

The simulated object: n spins drawn from the mean-field Gibbs law (standard
Gaussian reference tilted by exp(-n V(magnetisation))), each spin then adding
an independent N(0, t) Brownian increment. The empirical conditional law of
the first spin given that the magnetisation of the other n-1 spins lands in
the bin [alpha - h, alpha + h] is compared against quadrature.

Two samplers produce the same law:

  reject  the literal pipeline: draw the initial magnetisation, build the
          spin vector as a Gaussian bridge, evolve, bin on the companions'
          magnetisation. Acceptance is P(m_{n-1}(t) in bin), which decays
          like exp(-n * rate gap) when alpha is atypical; the sampler raises
          InsufficientStatisticsError below 100 accepted samples.

  exact   the same joint law factorised through closed-form Gaussian
          conditionals: only (s0, m_{n-1}(t), x1) are ever sampled, with the
          bin constraint absorbed into a tilt of the s0 density and a
          truncated normal for the companion magnetisation. No rejection, so
          atypical alpha costs nothing.

Equality of the two laws is pure Gaussian algebra: given the initial
magnetisation s0, the pair (x1(0), m_{n-1}(t)) is bivariate normal with
means (s0, s0), variances (1 - 1/n, (1/n + t)/(n - 1)) and covariance -1/n,
and x1(t) = x1(0) + N(0, t) independently of the companion noise.

The default method "auto" uses reject while its expected yield is healthy
and falls back to exact for rare-event conditioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from gibbsdyn import potential as pot
from gibbsdyn.errors import ConfigError, DomainError, InsufficientStatisticsError
from gibbsdyn.kernels import KernelEstimate
from gibbsdyn.quadrature import localize, log_integral, simpson_grid

METHOD_AUTO = "auto"
METHOD_REJECT = "reject"
METHOD_EXACT = "exact"

MIN_ACCEPTED = 100
_BLOCK = 32768  # replicas are drawn in fixed-size blocks, in replica order


@dataclass(frozen=True)
class SimConfig:
    n: int
    t: float
    alpha_target: float
    replicas: int = 100_000
    seed: int = 0
    bin_halfwidth: float = 0.05
    method: str = METHOD_AUTO

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("SimConfig requires n >= 2")
        if not (self.t > 0):
            raise ConfigError("SimConfig requires t > 0")
        if not (self.bin_halfwidth > 0):
            raise ConfigError("bin_halfwidth must be positive")
        if self.replicas < 1:
            raise ConfigError("replicas must be positive")
        if self.method not in (METHOD_AUTO, METHOD_REJECT, METHOD_EXACT):
            raise ConfigError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class EmpiricalKernel:
    samples: np.ndarray  # first-spin values whose companion magnetisation hit the bin
    accepted_count: int
    acceptance_rate: float
    method: str
    config: SimConfig
    ks_vs: dict = field(default_factory=dict)

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def variance(self) -> float:
        return float(np.var(self.samples))


def _rng(seed: int) -> np.random.Generator:
    # counter-based generator: deterministic, cheap to fast-forward
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


@dataclass(frozen=True)
class _MagnetisationTable:
    """Tabulated density and inverse CDF of a 1-D law known up to normalisation."""

    grid: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    log_norm: float

    def sample(self, u: np.ndarray) -> np.ndarray:
        return np.interp(u, self.cdf, self.grid)


def _tabulate(log_density, lo: float, hi: float, n_grid: int = 32769) -> _MagnetisationTable:
    lo2, hi2, _ = localize(log_density, lo, hi, 16385)
    x = simpson_grid(lo2, hi2, n_grid)
    L = np.asarray(log_density(x), dtype=float)
    log_norm = float(log_integral(x, L))
    dens = np.exp(L - log_norm)
    inc = 0.5 * (dens[1:] + dens[:-1]) * np.diff(x)
    cdf = np.concatenate(([0.0], np.cumsum(inc)))
    cdf /= cdf[-1]
    # strictly increasing cdf for a well-defined inverse
    cdf = np.maximum.accumulate(cdf)
    keep = np.concatenate(([True], np.diff(cdf) > 0))
    return _MagnetisationTable(grid=x[keep], density=dens[keep], cdf=cdf[keep], log_norm=log_norm)


def _initial_magnetisation_table(spec: pot.PotentialSpec, n: int) -> _MagnetisationTable:
    """Time-0 magnetisation density, proportional to exp(-n [V(s) + s^2/2])."""
    floor = min(spec.v_floor, 0.0)

    def log_density(s):
        s = np.asarray(s)
        return -n * (np.asarray(pot.eval(spec, s)) - floor) - n * s**2 / 2.0

    v0 = float(pot.eval(spec, 0.0)) - floor
    B = math.sqrt(2.0 * (n * v0 + 45.0) / n) + 1.0
    return _tabulate(log_density, -B, B)


def sample_initial_magnetisation(spec: pot.PotentialSpec, n: int, rng: np.random.Generator, size: int = 1):
    """Draws from the time-0 magnetisation law via tabulated inverse CDF."""
    if n < 1:
        raise DomainError("sample_initial_magnetisation requires n >= 1")
    table = _initial_magnetisation_table(spec, n)
    out = table.sample(rng.random(size))
    return float(out[0]) if size == 1 else out


def sample_spins_given_magnetisation(n: int, s: float, rng: np.random.Generator) -> np.ndarray:
    """A standard Gaussian vector conditioned on its empirical mean being s:
    draw z i.i.d. N(0,1) and return s + z - mean(z). Each coordinate then has
    variance (n-1)/n and the mean is exactly s."""
    if n < 2:
        raise DomainError("sample_spins_given_magnetisation requires n >= 2")
    z = rng.standard_normal(n)
    return s + z - z.mean()


def _companion_sd(n: int, t: float) -> float:
    """sd of m_{n-1}(t) given the initial magnetisation s0."""
    return math.sqrt((1.0 / n + t) / (n - 1.0))


def estimate_acceptance(spec: pot.PotentialSpec, config: SimConfig) -> float:
    """P(m_{n-1}(t) in the bin), by quadrature over the initial magnetisation."""
    n, t, a, h = config.n, config.t, config.alpha_target, config.bin_halfwidth
    table = _initial_magnetisation_table(spec, n)
    sd = _companion_sd(n, t)
    s = table.grid
    w = ndtr((a + h - s) / sd) - ndtr((a - h - s) / sd)
    return float(np.trapezoid(table.density * w, s))


def _evolve_reject(spec: pot.PotentialSpec, config: SimConfig) -> EmpiricalKernel:
    n, t = config.n, config.t
    a, h = config.alpha_target, config.bin_halfwidth
    rng = _rng(config.seed)
    table = _initial_magnetisation_table(spec, n)

    accepted: list[np.ndarray] = []
    total = 0
    done = 0
    while done < config.replicas:
        block = min(_BLOCK, config.replicas - done)
        s0 = table.sample(rng.random(block))
        z = rng.standard_normal((block, n))
        spins0 = s0[:, None] + z - z.mean(axis=1, keepdims=True)
        noise = rng.standard_normal((block, n)) * math.sqrt(t)
        spins_t = spins0 + noise
        m_comp = spins_t[:, 1:].mean(axis=1)
        hit = np.abs(m_comp - a) <= h
        accepted.append(spins_t[hit, 0])
        total += block
        done += block
    samples = np.concatenate(accepted) if accepted else np.empty(0)
    rate = samples.size / total if total else 0.0
    if samples.size < MIN_ACCEPTED:
        raise InsufficientStatisticsError(
            f"only {samples.size} accepted samples out of {total} replicas; "
            "increase bin_halfwidth or replicas, or use method='exact'",
            accepted=int(samples.size),
            acceptance_rate=rate,
        )
    return EmpiricalKernel(
        samples=samples,
        accepted_count=int(samples.size),
        acceptance_rate=rate,
        method=METHOD_REJECT,
        config=config,
    )


def _evolve_exact(spec: pot.PotentialSpec, config: SimConfig) -> EmpiricalKernel:
    n, t = config.n, config.t
    a, h = config.alpha_target, config.bin_halfwidth
    rng = _rng(config.seed)
    sd_m = _companion_sd(n, t)
    floor = min(spec.v_floor, 0.0)

    # s0 | bin-hit: initial magnetisation density tilted by the hit probability
    def log_density(s):
        s = np.asarray(s)
        base = -n * (np.asarray(pot.eval(spec, s)) - floor) - n * s**2 / 2.0
        w = ndtr((a + h - s) / sd_m) - ndtr((a - h - s) / sd_m)
        with np.errstate(divide="ignore"):
            return base + np.log(w)

    v0 = float(pot.eval(spec, 0.0)) - floor
    B = math.sqrt(2.0 * (n * v0 + 45.0) / n) + 1.0
    B = max(B, abs(a) + h + 12.0 * sd_m)
    table = _tabulate(log_density, -B, B)

    R = config.replicas
    s0 = table.sample(rng.random(R))

    # companion magnetisation: truncated normal on the bin
    lo_z = (a - h - s0) / sd_m
    hi_z = (a + h - s0) / sd_m
    plo = ndtr(lo_z)
    phi = ndtr(hi_z)
    u = rng.random(R)
    m_comp = s0 + sd_m * ndtri(np.clip(plo + u * (phi - plo), 1e-300, 1.0 - 1e-16))

    # first spin at time 0 given (s0, m_comp), then its Brownian increment
    var_m = sd_m**2
    slope = (-1.0 / n) / var_m
    cond_var = (1.0 - 1.0 / n) - (1.0 / n**2) / var_m
    x1_0 = s0 + slope * (m_comp - s0) + math.sqrt(max(cond_var, 0.0)) * rng.standard_normal(R)
    x1_t = x1_0 + math.sqrt(t) * rng.standard_normal(R)

    rate = estimate_acceptance(spec, config)
    return EmpiricalKernel(
        samples=x1_t,
        accepted_count=int(R),
        acceptance_rate=rate,
        method=METHOD_EXACT,
        config=config,
    )


def evolve_and_condition(config: SimConfig, spec: pot.PotentialSpec) -> EmpiricalKernel:
    """Empirical conditional law of the first spin at time t given that the
    other spins' magnetisation fell in [alpha - h, alpha + h]."""
    method = config.method
    if method == METHOD_AUTO:
        expected = estimate_acceptance(spec, config) * config.replicas
        method = METHOD_REJECT if expected >= 10.0 * MIN_ACCEPTED else METHOD_EXACT
    if method == METHOD_REJECT:
        return _evolve_reject(spec, config)
    return _evolve_exact(spec, config)


def simulate_joint_magnetisation(
    spec: pot.PotentialSpec, n: int, t: float, replicas: int, seed: int = 0
):
    """Unconditioned replica draws of (m_n(0), m_n(t)); the time-t value is
    the time-0 value plus N(0, t/n) noise."""
    rng = _rng(seed)
    table = _initial_magnetisation_table(spec, n)
    m0 = table.sample(rng.random(replicas))
    mt = m0 + math.sqrt(t / n) * rng.standard_normal(replicas)
    return m0, mt


def ks_distance(empirical: EmpiricalKernel | np.ndarray, reference: KernelEstimate) -> float:
    """Two-sided Kolmogorov-Smirnov statistic between an empirical sample and
    a grid-density reference law."""
    samples = empirical.samples if isinstance(empirical, EmpiricalKernel) else np.asarray(empirical)
    if samples.size < MIN_ACCEPTED:
        raise InsufficientStatisticsError(
            f"need at least {MIN_ACCEPTED} samples for a KS statistic, got {samples.size}",
            accepted=int(samples.size),
        )
    xs = np.sort(samples)
    ref = reference.cdf_at(xs)
    k = xs.size
    upper = np.arange(1, k + 1) / k
    lower = np.arange(0, k) / k
    return float(np.max(np.maximum(np.abs(upper - ref), np.abs(ref - lower))))


def attach_ks(emp: EmpiricalKernel, reference: KernelEstimate) -> EmpiricalKernel:
    """Copy of the empirical kernel with the KS comparison recorded."""
    d = ks_distance(emp, reference)
    record = {
        "ks_statistic": d,
        "reference_mean": reference.mean,
        "reference_variance": reference.variance,
    }
    return EmpiricalKernel(
        samples=emp.samples,
        accepted_count=emp.accepted_count,
        acceptance_rate=emp.acceptance_rate,
        method=emp.method,
        config=emp.config,
        ks_vs=record,
    )
