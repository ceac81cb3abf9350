"""Noise-budget allocators over parallel subchannels.

All solvers distribute a total masking-noise budget across subchannels.
The two closed-form families come from the KKT system of the respective
objectives:

* total-MI solvers equalize the marginal leakage reduction per unit of
  noise across active channels (``allocate_gaussian_total``, its Sibson
  variant, and the distribution-aware ``allocate_arbitrary_total``);
* the minimax solver pours noise until every active channel sits at a
  common post-masking SNR, which requires no distributional knowledge
  at all (``allocate_minimax``).

Every dual variable is found by bisection on a monotone scalar map, with
the budget matched to the relative tolerance in :class:`SolveOptions`.
``oracle_solve`` is an exhaustive grid search kept deliberately free of
any KKT reasoning so tests can use it as an independent referee.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channels import NoiseAllocation, SubchannelSet
from .convexity import check_c1
from .inputs import GaussianInput, InputModel

__all__ = [
    "SolveOptions",
    "SolverError",
    "NonConvexInstanceError",
    "NonConvexityWarning",
    "allocate_uniform",
    "allocate_gaussian_total",
    "allocate_sibson_total",
    "allocate_minimax",
    "allocate_arbitrary_total",
    "oracle_solve",
    "make_solver",
    "write_allocation_csv",
]

_MAX_BRACKET_STEPS = 400


class SolverError(RuntimeError):
    """An allocator failed to converge or to bracket its dual variable."""


class NonConvexInstanceError(SolverError):
    """The per-channel stationarity map was not monotone on this instance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NonConvexityWarning(UserWarning):
    """Stationary solution returned on an instance without a convexity certificate."""


@dataclass(frozen=True)
class SolveOptions:
    """Budget and numeric knobs shared by the iterative allocators.

    ``dual_tol`` is the relative budget-matching tolerance, ``max_iter``
    caps the outer bisection, and ``inner_tol`` is the per-channel root
    tolerance used by the distribution-aware solver.
    """

    budget: float
    dual_tol: float = 1e-10
    max_iter: int = 200
    inner_tol: float = 1e-12

    def __post_init__(self):
        if not math.isfinite(self.budget) or self.budget < 0:
            raise ValueError(f"budget must be finite and nonnegative, got {self.budget}")
        if not (self.dual_tol > 0 and self.inner_tol > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.max_iter < 10:
            raise ValueError("max_iter must be at least 10")


def _require_some_signal(channels: SubchannelSet, budget: float):
    if budget > 0 and not np.any(channels.P > 0):
        raise ValueError("cannot place a positive budget when every subchannel has P = 0")


def _bisect_water_level(n_of_level, level_hi: float, budget: float, opts: SolveOptions):
    """Find the dual level at which total demand equals the budget.

    ``n_of_level`` maps a dual level to the per-channel noise vector and
    must be (weakly) decreasing in the level; ``level_hi`` must already
    give zero demand.  Returns ``(level, N)``.
    """
    lo = level_hi
    for _ in range(_MAX_BRACKET_STEPS):
        lo *= 0.5
        if float(np.sum(n_of_level(lo))) >= budget:
            break
    else:
        raise SolverError("failed to bracket the water level from above the budget")
    hi = level_hi
    tol = opts.dual_tol * max(1.0, budget)
    level = lo
    N = n_of_level(level)
    for _ in range(opts.max_iter):
        level = 0.5 * (lo + hi)
        N = n_of_level(level)
        demand = float(np.sum(N))
        gap = demand - budget
        if abs(gap) <= 1e-3 * tol or (hi - lo) <= 8 * np.finfo(float).eps * hi:
            break
        if gap > 0:
            lo = level
        else:
            hi = level
    demand = float(np.sum(N))
    if abs(demand - budget) > tol:
        raise SolverError(
            f"water-level bisection left a budget gap of {demand - budget:.3e} "
            f"(tolerance {tol:.3e})"
        )
    return level, N


def allocate_uniform(channels: SubchannelSet, budget: float) -> NoiseAllocation:
    """Split the budget evenly across all subchannels (the baseline)."""
    if not math.isfinite(budget) or budget < 0:
        raise ValueError(f"budget must be finite and nonnegative, got {budget}")
    N = np.full(channels.m, budget / channels.m)
    return NoiseAllocation(N=N, dual=None, objective_kind="total")


def _gaussian_thresholds(P, Z):
    # Marginal leakage reduction of the first unit of noise on each channel:
    # 1/Z - 1/(Z+P), written as P / (Z (Z + P)) so P = 0 gives exactly 0.
    return P / (Z * (Z + P))


def allocate_gaussian_total(channels: SubchannelSet, opts: SolveOptions) -> NoiseAllocation:
    """Minimize total Gaussian MI: closed-form water-filling on the dual.

    A channel receives noise only when the dual level falls below its
    activation threshold ``1/Z - 1/(Z+P)``; active channels solve
    ``1/(N+Z) - 1/(N+Z+P) = level`` in closed form.
    """
    P, Z = channels.P, channels.Z
    budget = opts.budget
    _require_some_signal(channels, budget)
    thresholds = _gaussian_thresholds(P, Z)
    if budget == 0 or not np.any(P > 0):
        return NoiseAllocation(
            N=np.zeros(channels.m), dual=float(np.max(thresholds)), objective_kind="total"
        )

    def n_of_level(level):
        active = thresholds > level
        N = np.zeros(channels.m)
        Pa, Za = P[active], Z[active]
        N[active] = 0.5 * (np.sqrt(Pa * Pa + 4.0 * Pa / level) - (2.0 * Za + Pa))
        return np.maximum(N, 0.0)

    level, N = _bisect_water_level(n_of_level, float(np.max(thresholds)), budget, opts)
    return NoiseAllocation(N=N, dual=level, objective_kind="total")


def allocate_sibson_total(
    channels: SubchannelSet, alpha: float, opts: SolveOptions
) -> NoiseAllocation:
    """Minimize total order-alpha Sibson information.

    The Sibson objective on the Gaussian subchannel is the Gaussian MI
    with every signal power scaled by alpha, so this delegates to the
    total-MI solver on the scaled instance.
    """
    if not (alpha > 0) or not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite and strictly positive, got {alpha}")
    scaled = SubchannelSet(P=channels.P * alpha, Z=channels.Z)
    alloc = allocate_gaussian_total(scaled, opts)
    return NoiseAllocation(N=alloc.N, dual=alloc.dual, objective_kind="total")


def allocate_minimax(
    channels: SubchannelSet, opts: SolveOptions, model: InputModel | None = None
) -> NoiseAllocation:
    """Minimize the worst per-channel leakage; distribution independent.

    Floods every channel whose pre-masking SNR exceeds a common water
    level down to that level.  Because any sane leakage measure grows
    with SNR, the solution does not depend on the input model; the
    ``model`` argument is accepted for interface symmetry and ignored.
    """
    del model  # the minimax split is the same for every input distribution
    P, Z = channels.P, channels.Z
    budget = opts.budget
    if budget > 0 and not np.any(P > 0):
        raise ValueError("cannot place a positive budget when every subchannel has P = 0")
    ground = P / Z
    if budget == 0 or not np.any(P > 0):
        return NoiseAllocation(
            N=np.zeros(channels.m), dual=float(np.max(ground)), objective_kind="max"
        )

    def n_of_level(level):
        return np.maximum(P / level - Z, 0.0)

    level, N = _bisect_water_level(n_of_level, float(np.max(ground)), budget, opts)
    # Polish: with the active set fixed, the level consuming the budget
    # exactly is in closed form.  Keep it only if it preserves the set.
    active = ground > level
    if np.any(active):
        exact = float(np.sum(P[active])) / (budget + float(np.sum(Z[active])))
        if exact > 0 and np.array_equal(ground > exact, active):
            level = exact
            N = np.where(active, np.maximum(P / level - Z, 0.0), 0.0)
    return NoiseAllocation(N=N, dual=level, objective_kind="max")


def _stationarity_lhs(model: InputModel, P, Z, N):
    rho = P / (N + Z)
    return P / (N + Z) ** 2 * model.mmse(rho)


def allocate_arbitrary_total(
    channels: SubchannelSet, model: InputModel, opts: SolveOptions
) -> NoiseAllocation:
    """Minimize total MI for an arbitrary input model via its MMSE curve.

    Per channel, stationarity reads ``P/(N+Z)^2 * mmse(P/(N+Z)) = level``;
    the left side is nonincreasing in N when the instance is convex, so a
    per-channel bisection nests inside the dual-level bisection.  When the
    model's convexity margin goes negative anywhere in the SNR range the
    solution actually visits, the result is flagged ``stationary_only``
    and a :class:`NonConvexityWarning` is emitted: the equations hold but
    global optimality is not certified.
    """
    P, Z = channels.P, channels.Z
    budget = opts.budget
    _require_some_signal(channels, budget)
    thresholds = np.zeros(channels.m)
    pos = P > 0
    thresholds[pos] = _stationarity_lhs(model, P[pos], Z[pos], 0.0)
    if budget == 0 or not np.any(pos):
        return NoiseAllocation(
            N=np.zeros(channels.m), dual=float(np.max(thresholds)), objective_kind="total"
        )

    def solve_channel(i, level):
        lo, g_lo = 0.0, thresholds[i]
        hi = max(float(Z[i]), float(P[i]), 1.0)
        for _ in range(_MAX_BRACKET_STEPS):
            g_hi = _stationarity_lhs(model, P[i], Z[i], hi)
            if g_hi > g_lo * (1.0 + 1e-9):
                # The map rose above its value at zero noise: it is not
                # decreasing, so bisection on it has no meaning here.
                raise NonConvexInstanceError(
                    f"stationarity map rose during bracketing on channel {i}",
                    diagnostics={
                        "channel": i,
                        "level": level,
                        "g_at_zero": g_lo,
                        "noise_probe": hi,
                        "g_at_probe": g_hi,
                    },
                )
            if g_hi <= level:
                break
            hi *= 2.0
        else:
            raise NonConvexInstanceError(
                "per-channel stationarity map could not be bracketed",
                diagnostics={"channel": i, "level": level, "g_at_zero": g_lo},
            )
        while hi - lo > opts.inner_tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if _stationarity_lhs(model, P[i], Z[i], mid) > level:
                lo = mid
            else:
                hi = mid
        return lo  # the under-shooting end, so sums never exceed the demand

    def n_of_level(level):
        N = np.zeros(channels.m)
        for i in np.flatnonzero(thresholds > level):
            N[i] = solve_channel(i, level)
        return N

    try:
        level, N = _bisect_water_level(n_of_level, float(np.max(thresholds)), budget, opts)
    except NonConvexInstanceError:
        raise
    except SolverError as exc:
        # A budget gap with a well-behaved map would mean a plain numeric
        # failure, but when the convexity margin is negative somewhere in
        # the instance's SNR range the demand curve is discontinuous and
        # no dual level matches the budget.  Tell those cases apart.
        rho_hi = float(np.max(P[pos] / Z[pos]))
        for rho in np.geomspace(max(rho_hi * 1e-6, 1e-9), rho_hi, 65):
            margin = check_c1(model, rho)
            if margin < -1e-9:
                raise NonConvexInstanceError(
                    "no dual level matches the budget; the instance has a "
                    f"negative convexity margin at snr {rho:.4g}",
                    diagnostics={"rho": float(rho), "c1_margin": float(margin)},
                ) from exc
        raise

    stationary_only = False
    rho_after = P[pos] / (N[pos] + Z[pos])
    rho_lo = max(float(np.min(rho_after)), 1e-12)
    rho_hi = float(np.max(P[pos] / Z[pos]))
    for rho in np.geomspace(rho_lo, max(rho_hi, rho_lo * (1 + 1e-9)), 33):
        if check_c1(model, rho) < -1e-9:
            stationary_only = True
            warnings.warn(
                f"convexity margin negative at snr {rho:.4g}; "
                "returning a stationary, not certified optimal, allocation",
                NonConvexityWarning,
                stacklevel=2,
            )
            break
    return NoiseAllocation(
        N=N, dual=level, objective_kind="total", stationary_only=stationary_only
    )


def _mi_table(model: InputModel, rho_desc):
    """Mutual information at a descending SNR grid, by one cumulative pass.

    Integrates mmse/2 segment by segment from 0 upward so the whole table
    costs one sweep instead of one full quadrature per entry.  Gaussian
    models use their closed form directly.
    """
    if isinstance(model, GaussianInput):
        return 0.5 * np.log1p(rho_desc)
    from scipy import integrate

    rho_asc = rho_desc[::-1]
    table = np.empty_like(rho_asc)
    acc = 0.0
    prev = 0.0
    for j, r in enumerate(rho_asc):
        if r > prev:
            seg, _ = integrate.quad(
                lambda t: 0.5 * model.mmse(t), prev, r, epsabs=1e-12, epsrel=1e-10, limit=200
            )
            acc += seg
            prev = r
        table[j] = acc
    return table[::-1]


def oracle_solve(
    channels: SubchannelSet,
    model: InputModel,
    budget: float,
    objective: str = "total",
    grid_step: float = 1e-3,
) -> NoiseAllocation:
    """Exhaustive grid search over the noise simplex, for small instances.

    Enumerates every split of the budget into ``grid_step`` quanta across
    at most four channels and returns the grid point with the smallest
    objective.  No optimality conditions are used anywhere, which is the
    point: this is the referee for the closed-form solvers.
    """
    if objective not in ("total", "max"):
        raise ValueError(f"objective must be 'total' or 'max', got {objective!r}")
    if not math.isfinite(budget) or budget < 0:
        raise ValueError(f"budget must be finite and nonnegative, got {budget}")
    if grid_step <= 0:
        raise ValueError("grid_step must be strictly positive")
    m = channels.m
    if m > 4:
        raise ValueError(f"oracle_solve enumerates at most 4 channels, got {m}")
    K = int(round(budget / grid_step))
    n_points = math.comb(K + m - 1, m - 1)
    if n_points > 100_000_000:
        raise ValueError(f"grid would hold {n_points} points, refusing more than 1e8")

    steps = np.arange(K + 1) * grid_step
    # Per-channel MI lookup tables over every reachable noise quantum.
    tables = [
        _mi_table(model, channels.P[i] / (steps + channels.Z[i])) for i in range(m)
    ]
    combine = np.add if objective == "total" else np.maximum

    best_val = math.inf
    best_k = None
    if m == 1:
        best_k = (K,)
        best_val = tables[0][K]
    elif m == 2:
        k0 = np.arange(K + 1)
        vals = combine(tables[0][k0], tables[1][K - k0])
        j = int(np.argmin(vals))
        best_k, best_val = (j, K - j), float(vals[j])
    else:
        for k0 in range(K + 1):
            if m == 3:
                rem = K - k0
                k1 = np.arange(rem + 1)
                vals = combine(tables[0][k0], combine(tables[1][k1], tables[2][rem - k1]))
                j = int(np.argmin(vals))
                if vals[j] < best_val:
                    best_val = float(vals[j])
                    best_k = (k0, j, rem - j)
            else:
                for k1 in range(K - k0 + 1):
                    rem = K - k0 - k1
                    k2 = np.arange(rem + 1)
                    vals = combine(
                        combine(tables[0][k0], tables[1][k1]),
                        combine(tables[2][k2], tables[3][rem - k2]),
                    )
                    j = int(np.argmin(vals))
                    if vals[j] < best_val:
                        best_val = float(vals[j])
                        best_k = (k0, k1, j, rem - j)

    N = np.array(best_k, dtype=np.float64) * grid_step
    return NoiseAllocation(N=N, dual=None, objective_kind=objective)


def make_solver(name: str, model: InputModel | None = None, alpha: float | None = None):
    """Build a ``(channels, budget) -> NoiseAllocation`` callable by name.

    Names: ``uniform``, ``gaussian_total``, ``sibson`` (needs alpha),
    ``minimax``, ``arbitrary`` (needs an input model).
    """
    if name == "uniform":
        return allocate_uniform
    if name == "gaussian_total":
        return lambda ch, b: allocate_gaussian_total(ch, SolveOptions(budget=b))
    if name == "sibson":
        if alpha is None:
            raise ValueError("sibson solver requires alpha")
        return lambda ch, b: allocate_sibson_total(ch, alpha, SolveOptions(budget=b))
    if name == "minimax":
        return lambda ch, b: allocate_minimax(ch, SolveOptions(budget=b))
    if name == "arbitrary":
        if model is None:
            raise ValueError("arbitrary solver requires an input model")
        return lambda ch, b: allocate_arbitrary_total(ch, model, SolveOptions(budget=b))
    raise ValueError(f"unknown solver {name!r}")


def write_allocation_csv(
    channels: SubchannelSet, alloc: NoiseAllocation, model: InputModel, path
):
    """Write ``index,P,Z,N,snr_before,snr_after,mi_after`` rows plus a dual footer."""
    snr_before = channels.snr()
    snr_after = channels.snr(alloc.N)
    with open(path, "w", newline="\n") as fh:
        fh.write("index,P,Z,N,snr_before,snr_after,mi_after\n")
        for i in range(channels.m):
            mi = float(model.mutual_info(float(snr_after[i])))
            fh.write(
                f"{i},{float(channels.P[i])!r},{float(channels.Z[i])!r},{float(alloc.N[i])!r},"
                f"{float(snr_before[i])!r},{float(snr_after[i])!r},{mi!r}\n"
            )
        dual = "none" if alloc.dual is None else repr(float(alloc.dual))
        fh.write(f"# objective={alloc.objective_kind} dual={dual}\n")
