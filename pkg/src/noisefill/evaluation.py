"""Leakage evaluation of noise allocations and solver comparisons.

This module answers the two questions an allocation raises: how much does
the channel still leak, and how much budget did the smarter solver save.
The second is answered by inverting each solver's leakage-versus-budget
curve with a bisection, since the curves are nonincreasing in the budget.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .channels import LeakageReport, NoiseAllocation, SubchannelSet, fano_pe_lower, snr
from .inputs import GaussianInput, InputModel
from .seeds import substream

__all__ = [
    "evaluate",
    "objective_value",
    "budget_for_reduction",
    "noise_savings",
    "sample_instance",
    "run_sweep",
    "write_sweep_csv",
    "UnreachableTargetError",
]

Solver = Callable[[SubchannelSet, float], NoiseAllocation]


class UnreachableTargetError(RuntimeError):
    """The leakage target could not be reached within the budget cap."""


def evaluate(
    channels: SubchannelSet,
    alloc: NoiseAllocation,
    model: InputModel,
    alphabet_size: int = 256,
) -> LeakageReport:
    """Per-channel and aggregate leakage of an allocation under a model."""
    if alloc.N.shape != channels.P.shape:
        raise ValueError("allocation and channel set have different lengths")
    rho = snr(channels.P, channels.Z, alloc.N)
    if isinstance(model, GaussianInput):
        mi = model.mutual_info(rho)
    else:
        mi = np.array([float(model.mutual_info(float(r))) for r in np.atleast_1d(rho)])
    mi = np.atleast_1d(mi)
    total = float(np.sum(mi))
    return LeakageReport(
        per_channel_mi=mi,
        total_mi=total,
        max_mi=float(np.max(mi)),
        fano_pe_lower=fano_pe_lower(total, alphabet_size),
    )


def _zero_alloc(channels: SubchannelSet) -> NoiseAllocation:
    return NoiseAllocation(N=np.zeros(channels.m), dual=None, objective_kind="total")


def objective_value(
    channels: SubchannelSet, alloc: NoiseAllocation, model: InputModel, objective: str
) -> float:
    """Total or max MI of an allocation, the quantity the solvers minimize."""
    report = evaluate(channels, alloc, model)
    if objective == "total":
        return report.total_mi
    if objective == "max":
        return report.max_mi
    raise ValueError(f"objective must be 'total' or 'max', got {objective!r}")


def budget_for_reduction(
    channels: SubchannelSet,
    model: InputModel,
    objective: str,
    reduction_target: float,
    solver: Solver,
    rel_tol: float = 1e-6,
    budget_cap: float = 1e15,
) -> float:
    """Smallest budget with which the solver meets the leakage reduction.

    The target is ``(1 - reduction_target)`` times the zero-noise leakage
    under the given objective.  The search doubles an upper bracket until
    the target is met (raising :class:`UnreachableTargetError` at the
    cap), then bisects to the requested relative tolerance and returns the
    achieving end of the bracket.
    """
    if not (0.0 < reduction_target < 1.0):
        raise ValueError("reduction_target must lie strictly between 0 and 1")
    baseline = objective_value(channels, _zero_alloc(channels), model, objective)
    if baseline == 0.0:
        return 0.0
    target = (1.0 - reduction_target) * baseline

    def achieved(budget):
        return objective_value(channels, solver(channels, budget), model, objective) <= target

    hi = 1.0
    while not achieved(hi):
        hi *= 2.0
        if hi > budget_cap:
            raise UnreachableTargetError(
                f"reduction {reduction_target} not reached within budget cap {budget_cap:.3e}"
            )
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if achieved(mid):
            hi = mid
        else:
            lo = mid
    return hi


def noise_savings(
    channels: SubchannelSet,
    model: InputModel,
    objective: str,
    reduction_target: float,
    solver_a: Solver,
    solver_b: Solver,
    rel_tol: float = 1e-6,
) -> float:
    """Fraction of solver_b's budget that solver_a saves at equal leakage.

    Computes the minimal budgets with which each solver reaches the same
    relative leakage reduction and returns ``(B_b - B_a) / B_b``.
    Positive means solver_a is cheaper.
    """
    budget_a = budget_for_reduction(channels, model, objective, reduction_target, solver_a, rel_tol)
    budget_b = budget_for_reduction(channels, model, objective, reduction_target, solver_b, rel_tol)
    if budget_b == 0.0:
        raise ValueError("solver_b reached the target with zero budget, ratio undefined")
    return (budget_b - budget_a) / budget_b


def sample_instance(
    m: int,
    z: float,
    p_dist: str = "gaussian",
    seed: int = 0,
    p_mean: float = 1.0,
    p_std: float = 0.5,
    p_low: float = 0.0,
    p_high: float = 2.0,
) -> SubchannelSet:
    """Random subchannel instance with constant physical noise.

    ``p_dist`` is either ``gaussian`` (normal signal powers with negative
    draws set to zero, which leaves a small atom of silent channels) or
    ``uniform`` on [p_low, p_high].
    """
    if m < 1:
        raise ValueError("need at least one subchannel")
    if z <= 0:
        raise ValueError("z must be strictly positive")
    rng = substream(seed, "instance")
    if p_dist == "gaussian":
        P = np.maximum(rng.normal(p_mean, p_std, m), 0.0)
    elif p_dist == "uniform":
        P = rng.uniform(p_low, p_high, m)
    else:
        raise ValueError(f"unknown p_dist {p_dist!r}")
    return SubchannelSet(P=P, Z=np.full(m, float(z)))


def run_sweep(
    channels: SubchannelSet,
    budgets,
    model: InputModel,
    solver_total: Solver,
    solver_max: Solver,
    solver_baseline: Solver,
    alphabet_size: int = 256,
):
    """Leakage of baseline vs optimized allocations over a budget grid.

    Returns one row per budget:
    ``(N0, total_uniform, total_opt, max_uniform, max_opt, fano_pe)``
    where the optimized total comes from ``solver_total``, the optimized
    max from ``solver_max``, and the Fano bound from the optimized total.
    """
    rows = []
    for budget in budgets:
        budget = float(budget)
        base = evaluate(channels, solver_baseline(channels, budget), model, alphabet_size)
        opt_total = evaluate(channels, solver_total(channels, budget), model, alphabet_size)
        opt_max = evaluate(channels, solver_max(channels, budget), model, alphabet_size)
        rows.append(
            (
                budget,
                base.total_mi,
                opt_total.total_mi,
                base.max_mi,
                opt_max.max_mi,
                opt_total.fano_pe_lower,
            )
        )
    return rows


def write_sweep_csv(rows, path):
    """Write sweep rows with the fixed six-column header."""
    with open(path, "w", newline="\n") as fh:
        fh.write("N0,total_mi_uniform,total_mi_opt,max_mi_uniform,max_mi_opt,fano_pe\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
