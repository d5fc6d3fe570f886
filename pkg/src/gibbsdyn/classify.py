"""Crossover-time computation and sequential-Gibbs classification.

The curvature bound beta = -inf Phi2(V) (equivalently -inf V''/2 for twice
differentiable V) determines the crossover time through the closed form

    t_c = +inf            if beta <= 1/2,
    t_c = 1/(beta - 1/2)  if 1/2 < beta < inf,
    t_c = 0               if beta = +inf (curvature unbounded below).

Status at t = t_c depends on whether the curvature infimum is attained on an
interval (flat piece -> not Gibbs at t_c) or only at isolated points
(-> Gibbs at t_c); the numerical proxy measures the extent of the set where
the curvature is within a small band of its infimum.

Note: the direct two-layer scan (tilted.bad_set_scan) first reports bad
magnetisations at t = 1/(2*beta - 1), a factor 2 below the closed-form t_c
above. The two conventions cannot both hold; this module follows the closed
form, and the discrepancy is documented in the README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gibbsdyn import potential as pot
from gibbsdyn import tilted
from gibbsdyn.errors import DomainError, InconclusiveError
from gibbsdyn.gridmin import golden_section
from gibbsdyn.kernels import initial_kernel

GIBBS = "gibbs"
NON_GIBBS = "non_gibbs"
UNKNOWN = "unknown"

METHOD_SECOND_DERIVATIVE = "second_derivative"
METHOD_PHI2_SCAN = "phi2_scan"

UNBOUNDED_SENTINEL = 1e6  # curvature below -2*this reports beta = +inf
FLAT_VALUE_BAND_ANALYTIC = 1e-8
FLAT_VALUE_BAND_FD = 1e-4  # finite-difference curvature carries ~1e-6 noise
FLAT_INTERVAL_LENGTH = 1e-3  # near-inf set at least this long -> non_gibbs
ISOLATED_EXTENT = 5e-4  # near-inf set at most this long -> gibbs

PHI2_BASE_POINTS = 256
PHI2_MIN_SPACING = 1e-4  # smaller triples amplify rounding in the quotient


def _curvature_values(spec: pot.PotentialSpec, xs: np.ndarray) -> np.ndarray:
    """V'' on a grid: analytic when available, otherwise the symmetric second
    difference (V(x+h) - 2V(x) + V(x-h)) / h^2.

    The step grows with |V|^(1/4) so that rounding noise 4*eps*|V|/h^2 stays
    bounded where the potential is superexponentially large."""
    if pot.has_analytic_deriv(spec, 2):
        return np.asarray(pot.deriv(spec, xs, 2))
    v0 = np.asarray(pot.eval(spec, xs))
    h = pot.FD_STEP_SCALE * np.maximum(1.0, np.abs(xs)) * np.maximum(1.0, np.abs(v0)) ** 0.25
    vp = np.asarray(pot.eval(spec, xs + h))
    vm = np.asarray(pot.eval(spec, xs - h))
    return (vp - 2.0 * v0 + vm) / h**2


def _scan_curvature_infimum(spec: pot.PotentialSpec, radius: float, n_grid: int = 32769):
    """(inf of V'' on [-radius, radius], argmin), golden-refined for analytic
    second derivatives."""
    xs = np.linspace(-radius, radius, n_grid)
    vals = _curvature_values(spec, xs)
    finite = np.isfinite(vals)
    if not finite.any():
        raise InconclusiveError("curvature is nowhere finite on the scan window")
    vals = np.where(finite, vals, np.inf)
    i = int(np.argmin(vals))
    best_x, best_v = float(xs[i]), float(vals[i])
    if pot.has_analytic_deriv(spec, 2) and 0 < i < xs.size - 1:
        x, v = golden_section(
            lambda s: float(pot.deriv(spec, s, 2)), xs[i - 1], xs[i + 1], tol=1e-13
        )
        if v < best_v:
            best_x, best_v = x, v
    return best_v, best_x


def _curvature_infimum_with_growth_check(spec: pot.PotentialSpec):
    """Doubling-window scan of inf V''.

    Stops when the infimum stabilises between doublings (bounded below) or
    dips under the unboundedness sentinel. custom_table potentials cannot be
    extended past their tabulated range; a near-inf at the table edge is
    inconclusive.
    """
    base = pot.window_radius(spec)
    if spec.family == "custom_table":
        inf_v, arg = _scan_curvature_infimum(spec, base)
        edge_gap = base - abs(arg)
        if edge_gap < 2.0 * (2.0 * base / 32768):
            raise InconclusiveError(
                "curvature infimum sits at the table edge; widen the table to classify",
                diagnostics={"arg_inf": arg, "inf_curvature": inf_v, "window_radius": base},
            )
        return inf_v, arg

    prev = None
    radius = base
    for _ in range(7):
        # resolve oscillations whose local period shrinks like 1/r
        spacing = math.pi / (10.0 * radius)
        n_grid = int(min(4_194_305, max(32769, 2.0 * radius / spacing)))
        n_grid = n_grid if n_grid % 2 == 1 else n_grid + 1
        inf_v, arg = _scan_curvature_infimum(spec, radius, n_grid)
        if inf_v < -2.0 * UNBOUNDED_SENTINEL:
            return -math.inf, arg
        if prev is not None and abs(inf_v - prev) <= 1e-3 * max(1.0, abs(prev)):
            return inf_v, arg
        prev = inf_v
        radius *= 2.0
    return prev, arg


def _phi2_on_triples(vals: np.ndarray, xs: np.ndarray):
    """Minimum of the second difference quotient over all ordered triples of
    the given grid, evaluated in chunks to bound memory."""
    m = xs.size
    best = math.inf
    best_triple = None
    idx = np.arange(m)
    for i in range(m - 2):
        j = idx[i + 1 : m - 1]
        k = idx[i + 2 : m]
        jj, kk = np.meshgrid(j, k, indexing="ij")
        valid = kk > jj
        x, y, z = xs[i], xs[jj], xs[kk]
        fy, fz = vals[jj], vals[kk]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = ((fz - fy) / (z - y) - (fy - vals[i]) / (y - x)) / (z - x)
        q = np.where(valid, q, np.inf)
        pos = np.unravel_index(int(np.argmin(q)), q.shape)
        if q[pos] < best:
            best = float(q[pos])
            best_triple = (float(x), float(xs[jj[pos]]), float(xs[kk[pos]]))
    return best, best_triple


def _phi2_refine(spec: pot.PotentialSpec, triple, spacing: float):
    """Shrink local grids around a candidate triple; spacing floors at
    PHI2_MIN_SPACING to keep rounding off the quotient."""
    best = math.inf
    x0, y0, z0 = triple
    for _ in range(24):
        if spacing < PHI2_MIN_SPACING:
            break
        offs = np.linspace(-4 * spacing, 4 * spacing, 9)
        xc = x0 + offs
        yc = y0 + offs
        zc = z0 + offs
        X, Y, Z = np.meshgrid(xc, yc, zc, indexing="ij")
        valid = (X < Y - PHI2_MIN_SPACING / 4) & (Y < Z - PHI2_MIN_SPACING / 4)
        FX = np.asarray(pot.eval(spec, X))
        FY = np.asarray(pot.eval(spec, Y))
        FZ = np.asarray(pot.eval(spec, Z))
        with np.errstate(divide="ignore", invalid="ignore"):
            q = ((FZ - FY) / (Z - Y) - (FY - FX) / (Y - X)) / (Z - X)
        q = np.where(valid, q, np.inf)
        pos = np.unravel_index(int(np.argmin(q)), q.shape)
        if not np.isfinite(q[pos]):
            break
        best = min(best, float(q[pos]))
        x0, y0, z0 = float(X[pos]), float(Y[pos]), float(Z[pos])
        spacing /= 4.0
    return best, (x0, y0, z0)


def phi2_infimum(spec: pot.PotentialSpec, radius: float | None = None):
    """Infimum of Phi2(V) by a stratified triple scan: a coarse full triple
    grid, local refinement of the best candidates, and a dense symmetric-
    triple sweep (which approximates V''/2 and catches shrinking-triple
    infima the coarse grid misses)."""
    radius = radius if radius is not None else pot.window_radius(spec)
    xs = np.linspace(-radius, radius, PHI2_BASE_POINTS)
    vals = np.asarray(pot.eval(spec, xs))
    best_coarse, triple = _phi2_on_triples(vals, xs)
    best, _ = _phi2_refine(spec, triple, spacing=float(xs[1] - xs[0]))
    best = min(best, best_coarse)

    # dense symmetric triples (r-h, r, r+h) approximate V''(r)/2
    inf_curv, _ = _curvature_infimum_with_growth_check(spec)
    if inf_curv == -math.inf:
        return -math.inf
    return min(best, inf_curv / 2.0)


@dataclass(frozen=True)
class ClassificationReport:
    beta: float  # -inf Phi2(V); +inf when curvature is unbounded below
    t_c: float  # crossover time in [0, +inf]
    gibbs_at_tc: str  # gibbs | non_gibbs | unknown
    method: str  # second_derivative | phi2_scan
    witness_alpha: float | None = None
    witness: tilted.MinimiserSet | None = None

    def to_json_dict(self) -> dict:
        d = {
            "beta": self.beta if math.isfinite(self.beta) else "inf",
            "t_c": self.t_c if math.isfinite(self.t_c) else "inf",
            "gibbs_at_tc": self.gibbs_at_tc,
            "method": self.method,
        }
        if self.witness_alpha is not None and self.witness is not None:
            d["witness"] = {
                "alpha": self.witness_alpha,
                "minimisers": list(self.witness.locations),
                "value": self.witness.value,
            }
        return d


def _flat_set_extent(spec: pot.PotentialSpec, inf_curv: float, radius: float) -> float:
    """Length of the largest connected component of the near-infimum set
    {r : V''(r) <= inf V'' + band}, measured on progressively finer local
    grids around each coarse component."""
    band = FLAT_VALUE_BAND_ANALYTIC if pot.has_analytic_deriv(spec, 2) else FLAT_VALUE_BAND_FD
    xs = np.linspace(-radius, radius, 32769)
    vals = _curvature_values(spec, xs)
    near = vals <= inf_curv + band
    if not near.any():
        return 0.0

    # coarse components
    idx = np.flatnonzero(near)
    splits = np.flatnonzero(np.diff(idx) > 1)
    comps = np.split(idx, splits + 1)
    dx = xs[1] - xs[0]

    longest = 0.0
    for comp in comps:
        lo = xs[comp[0]] - dx
        hi = xs[comp[-1]] + dx
        # refine the component's true extent on a fine local grid
        fine = np.linspace(lo, hi, 16385)
        fvals = _curvature_values(spec, fine)
        fnear = np.flatnonzero(fvals <= inf_curv + band)
        if fnear.size == 0:
            continue
        extent = float(fine[fnear[-1]] - fine[fnear[0]])
        longest = max(longest, extent)
    return longest


def _status_at_tc(spec: pot.PotentialSpec, inf_curv: float, radius: float) -> str:
    extent = _flat_set_extent(spec, inf_curv, radius)
    if extent >= FLAT_INTERVAL_LENGTH:
        return NON_GIBBS
    if extent <= ISOLATED_EXTENT:
        return GIBBS
    return UNKNOWN


def crossover_time(
    spec: pot.PotentialSpec,
    tol: tilted.ToleranceConfig = tilted.DEFAULT_TOL,
    find_witness: bool = True,
) -> ClassificationReport:
    """Classify the potential: curvature bound beta, crossover time t_c, and
    the Gibbs status at t_c, with a bad-magnetisation witness when t_c is
    finite."""
    radius = pot.window_radius(spec)
    if spec.smoothness == pot.C2_ANALYTIC:
        method = METHOD_SECOND_DERIVATIVE
        inf_curv, _ = _curvature_infimum_with_growth_check(spec)
        beta = math.inf if inf_curv == -math.inf else -0.5 * inf_curv
    else:
        method = METHOD_PHI2_SCAN
        inf_phi2 = phi2_infimum(spec, radius)
        beta = math.inf if inf_phi2 == -math.inf else -inf_phi2
        inf_curv = -2.0 * beta if math.isfinite(beta) else -math.inf

    if beta == math.inf or beta > UNBOUNDED_SENTINEL:
        return ClassificationReport(beta=math.inf, t_c=0.0, gibbs_at_tc=UNKNOWN, method=method)
    if beta <= 0.5:
        return ClassificationReport(beta=beta, t_c=math.inf, gibbs_at_tc=UNKNOWN, method=method)

    t_c = 1.0 / (beta - 0.5)
    status = _status_at_tc(spec, inf_curv, radius)

    witness_alpha = None
    witness = None
    if find_witness:
        witness_alpha, witness = _find_bad_witness(spec, 1.05 * t_c, tol)
    return ClassificationReport(
        beta=beta,
        t_c=t_c,
        gibbs_at_tc=status,
        method=method,
        witness_alpha=witness_alpha,
        witness=witness,
    )


def _find_bad_witness(spec, t_probe, tol):
    """A bad alpha at the probe time: alpha = 0 first (covers every even
    builtin), then a short scan."""
    bad, ms = tilted.is_bad(spec, t_probe, 0.0, tol)
    if bad:
        return 0.0, ms
    for a in np.linspace(-5.0, 5.0, 41):
        bad, ms = tilted.is_bad(spec, t_probe, float(a), tol)
        if bad:
            return float(a), ms
    return None, None


def gibbs_at(spec: pot.PotentialSpec, t: float, tol: tilted.ToleranceConfig = tilted.DEFAULT_TOL) -> bool:
    """Sequential Gibbsianness at time t per the crossover classification:
    True below t_c, False above, the t_c status at t_c (within 1e-9 relative).

    At t = 0 a continuously differentiable potential is sequentially Gibbs;
    otherwise the initial kernel is probed along selection sequences."""
    if t < 0:
        raise DomainError("gibbs_at requires t >= 0")
    if t == 0:
        if spec.smoothness in (pot.C2_ANALYTIC, pot.C1_ONLY):
            return True
        return not _initial_kernel_probe_finds_bad(spec)
    report = crossover_time(spec, tol, find_witness=False)
    if math.isinf(report.t_c):
        return True
    if abs(t - report.t_c) <= 1e-9 * max(t, report.t_c):
        if report.gibbs_at_tc == GIBBS:
            return True
        if report.gibbs_at_tc == NON_GIBBS:
            return False
        raise InconclusiveError(f"status at t = t_c = {report.t_c} is unknown")
    return t < report.t_c


def _initial_kernel_probe_finds_bad(spec: pot.PotentialSpec, n: int = 10_000) -> bool:
    """Kernel-level probe for t = 0 and non-differentiable potentials: compare
    initial-kernel means along alpha_n = alpha +- (n-1)^(-1/2); a persistent
    gap marks a bad magnetisation."""
    eps = 1.0 / math.sqrt(n - 1)
    for a in np.linspace(-2.0, 2.0, 17):
        m_plus = initial_kernel(spec, n, float(a) + eps).mean
        m_minus = initial_kernel(spec, n, float(a) - eps).mean
        if abs(m_plus - m_minus) > 0.2:
            return True
    return False


def gibbs_at_tc(spec: pot.PotentialSpec) -> str:
    """Gibbs status exactly at the crossover time; only defined for finite
    positive t_c."""
    report = crossover_time(spec, find_witness=False)
    if report.t_c == 0.0 or math.isinf(report.t_c):
        raise DomainError(f"status at t_c is not applicable when t_c = {report.t_c}")
    return report.gibbs_at_tc


def supporting_point(f, y: float, triple_grid) -> bool:
    """Whether y supports f from below by a line: Phi2 f(., y, .) >= 0 over
    every sampled pair x < y < z of the grid (up to -1e-10)."""
    grid = np.asarray(triple_grid, dtype=float)
    xs = grid[grid < y]
    zs = grid[grid > y]
    if xs.size == 0 or zs.size == 0:
        raise DomainError("triple grid must bracket y")
    fy = float(f(y))
    fx = np.asarray([float(f(x)) for x in xs])
    fz = np.asarray([float(f(z)) for z in zs])
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    FX, FZ = np.meshgrid(fx, fz, indexing="ij")
    q = ((FZ - fy) / (Z - y) - (fy - FX) / (y - X)) / (Z - X)
    return bool(q.min() >= -1e-10)


def equivalence_sides(f, beta: float, window: tuple[float, float], grid_n: int = 201):
    """Brute-force evaluation of the two equivalent statements:

        tilt side    some alpha gives f(x) + beta x^2 - alpha x multiple
                     global minimisers on the grid;
        triple side  some grid triple has Phi2 f <= -beta.

    Returns (tilt_side, triple_side). Grid multiplicity means the near-minimal
    set splits into clusters separated by at least three grid steps; the value
    band scales with the local second difference, the sampling offset a grid
    makes when it straddles a true minimum."""
    lo, hi = float(window[0]), float(window[1])
    xs_triple = np.linspace(lo, hi, int(grid_n))
    fv_triple = np.asarray([float(f(x)) for x in xs_triple])

    min_phi2, _ = _phi2_on_triples(fv_triple, xs_triple)
    side_triple = bool(min_phi2 <= -beta + 1e-12)

    # the hull walk is linear in the grid size, so the tilt side can afford a
    # much finer grid than the cubic triple scan
    xs = np.linspace(lo, hi, 8 * int(grid_n) + 1)
    fv = np.asarray([float(f(x)) for x in xs])
    g = fv + beta * xs**2
    # windowed max of |second difference|: local discretisation scale
    d2 = np.abs(np.diff(g, 2))
    d2 = np.concatenate(([d2[0]], d2, [d2[-1]]))
    loc = np.maximum.reduce([np.roll(d2, k) for k in (-3, -2, -1, 0, 1, 2, 3)])

    # a tilt alpha ties two separated global minimisers exactly when the lower
    # convex hull of (x, g(x)) has an edge spanning the gap (the tie value is
    # the edge slope), so the alpha search reduces to the hull edges
    hull = [0]
    for i in range(1, xs.size):
        while len(hull) >= 2:
            i1, i2 = hull[-2], hull[-1]
            cross = (xs[i2] - xs[i1]) * (g[i] - g[i1]) - (xs[i] - xs[i1]) * (g[i2] - g[i1])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)

    side_tilt = False
    for i1, i2 in zip(hull, hull[1:]):
        if i2 - i1 < 3:
            continue
        between = slice(i1 + 1, i2)
        chord = g[i1] + (g[i2] - g[i1]) * (xs[between] - xs[i1]) / (xs[i2] - xs[i1])
        rise = float(np.max(g[between] - chord))
        if rise > max(1e-9, 3.0 * float(loc[i1:i2 + 1].max())):
            side_tilt = True
            break
    return side_tilt, side_triple


def equivalence_oracle(f, beta: float, window: tuple[float, float], grid_n: int = 201) -> bool:
    """True when the two brute-force sides of equivalence_sides agree."""
    side_tilt, side_triple = equivalence_sides(f, beta, window, grid_n)
    return side_tilt == side_triple
