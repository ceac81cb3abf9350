"""Convexity certificates for the noise-allocation objective.

Adding masking noise N to a subchannel lowers its mutual information, but
the *second* derivative of MI with respect to N decides whether water-
filling stationarity certifies a global optimum.  That second derivative
is proportional to ``mmse(rho) + d/drho[rho * mmse(rho)]``, so the sign of
this margin (the C1 check) is the primary certificate.  An alternative
sufficient condition (the C3 check) bounds the expected squared curvature
of the log output density by 1; it is available only for models whose
output density we can evaluate, i.e. the Gaussian and exponential kinds.

The Fisher-information identity ``J(Y) = 1 - rho * mmse(rho)`` ties the
two views together and is exposed for validation purposes.
"""

from __future__ import annotations

import math

import numpy as np

from .inputs import (
    ExponentialInput,
    GaussianInput,
    InputModel,
    _normal_hazard,
    emg_logpdf_d2,
)

__all__ = [
    "check_c1",
    "check_c3",
    "second_derivative_mi",
    "convexity_boundary",
    "fisher_information",
    "UnsupportedModelError",
]


class UnsupportedModelError(ValueError):
    """The requested certificate is not computable for this model kind."""


def _d_rho_mmse(model: InputModel, rho: float) -> float:
    """Central difference of rho * mmse(rho), step max(1e-6, 1e-6 * rho)."""
    h = max(1e-6, 1e-6 * rho)
    if rho - h < 0:
        h = rho / 2.0
    hi = rho + h
    lo = rho - h
    return (hi * model.mmse(hi) - lo * model.mmse(lo)) / (hi - lo)


def check_c1(model: InputModel, rho: float) -> float:
    """Convexity margin ``mmse(rho) + d/drho[rho * mmse(rho)]``.

    Positive means the per-channel MI is convex in the masking noise at
    this SNR; negative means water-filling stationarity alone does not
    certify optimality there.
    """
    rho = float(rho)
    if not (rho > 0) or not math.isfinite(rho):
        raise ValueError("snr must be finite and strictly positive")
    return float(model.mmse(rho)) + _d_rho_mmse(model, rho)


def check_c3(model: InputModel, rho: float, tol: float = 1e-10) -> float:
    """Expected squared curvature of the log output density, E[(log f)''(Y)^2].

    Values at or below 1 certify convexity.  Supported for the Gaussian
    model (analytic: the curvature is the constant -1/(1+rho), so the
    expectation is 1/(1+rho)^2) and the exponential model (quadrature of
    the EMG curvature against the output density).  Other kinds have no
    tractable output density here and raise :class:`UnsupportedModelError`.
    """
    rho = float(rho)
    if not (rho > 0) or not math.isfinite(rho):
        raise ValueError("snr must be finite and strictly positive")
    if isinstance(model, GaussianInput):
        return 1.0 / (1.0 + rho) ** 2
    if isinstance(model, ExponentialInput):
        rate = math.sqrt(2.0 / rho)
        return model.expect_output(rho, lambda y: emg_logpdf_d2(rate - y, rho) ** 2, tol=tol)
    raise UnsupportedModelError(
        f"C3 needs an explicit output density, not available for {model.kind!r} models"
    )


def fisher_information(model: InputModel, rho: float, tol: float = 1e-10) -> float:
    """Fisher information of the channel output, E[((log f)'(Y))^2].

    Computed from the output density where one is available; by the
    MMSE identity this equals ``1 - rho * mmse(rho)``, which tests use as
    an independent cross-check.
    """
    rho = float(rho)
    if not (rho > 0) or not math.isfinite(rho):
        raise ValueError("snr must be finite and strictly positive")
    if isinstance(model, GaussianInput):
        return 1.0 / (1.0 + rho)
    if isinstance(model, ExponentialInput):
        rate = math.sqrt(2.0 / rho)

        def sq_score(y):
            return float((_normal_hazard(np.asarray(rate - y)) - rate) ** 2)

        return model.expect_output(rho, sq_score, tol=tol)
    raise UnsupportedModelError(
        f"Fisher information needs an output density, not available for {model.kind!r} models"
    )


def second_derivative_mi(model: InputModel, P: float, Z: float, N: float) -> float:
    """Second derivative of channel MI with respect to the masking noise N.

    Equals ``P / (2 (N + Z)^3) * (mmse(rho) + d/drho[rho mmse(rho)])`` at
    ``rho = P / (N + Z)``; its sign is the sign of the C1 margin.
    """
    if Z <= 0:
        raise ValueError("Z must be strictly positive")
    if P < 0 or N < 0:
        raise ValueError("P and N must be nonnegative")
    if P == 0:
        return 0.0
    rho = P / (N + Z)
    return P / (2.0 * (N + Z) ** 3) * check_c1(model, rho)


def convexity_boundary(
    model: InputModel, rho_lo: float, rho_hi: float, tol: float = 1e-4
) -> float | None:
    """Locate a sign change of the C1 margin in [rho_lo, rho_hi] by bisection.

    Returns the crossing SNR, or None when the margin has the same sign at
    both ends (no boundary in the bracket; for always-convex models this
    is the expected outcome, not an error).  Non-finite margins raise, so
    a numerical breakdown is distinguishable from an absent crossing.
    """
    if not (0 < rho_lo < rho_hi):
        raise ValueError("need 0 < rho_lo < rho_hi")
    f_lo = check_c1(model, rho_lo)
    f_hi = check_c1(model, rho_hi)
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)):
        raise ArithmeticError("C1 margin is not finite at the bracket ends")
    if f_lo == 0.0:
        return rho_lo
    if f_hi == 0.0:
        return rho_hi
    if (f_lo > 0) == (f_hi > 0):
        return None
    lo, hi = rho_lo, rho_hi
    sign_lo = f_lo > 0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        f_mid = check_c1(model, mid)
        if not math.isfinite(f_mid):
            raise ArithmeticError(f"C1 margin is not finite at snr {mid}")
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == sign_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
