"""Input-distribution models: MMSE curves and their mutual information.

Each model describes the secret-dependent signal S on one subchannel,
observed as ``Y = sqrt(rho) * S + W`` with W standard normal.  What the
rest of the package needs from a model is its minimum mean-square error
curve ``mmse(rho)`` for estimating S from Y, because the derivative of the
channel mutual information with respect to SNR is ``mmse(rho) / 2``.
Integrating that relation is how :func:`immse_integral` turns an MMSE
curve into mutual information for models with no closed form.

Normalization note: the Gaussian and binary models are zero mean with unit
power, so ``mmse(0) = 1``.  The exponential model keeps the convention of
a unit *second moment* with a nonzero mean: S ~ Exp(sqrt(2)), for which
``E[S^2] = 1`` but ``mmse(0) = Var(S) = 1/2``.  The mean carries signal
power yet leaks nothing, so results for the exponential model are not
directly comparable with the zero-mean models at equal SNR.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate
from scipy.special import erfcx

__all__ = [
    "InputModel",
    "GaussianInput",
    "BinaryInput",
    "ExponentialInput",
    "TabulatedInput",
    "make_model",
    "mmse",
    "mutual_info",
    "low_snr_mmse",
    "immse_integral",
    "emg_logpdf_d2",
    "emg_pdf",
    "QuadratureError",
    "ExtrapolationWarning",
]

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# 128 nodes integrate the smooth, Gaussian-weighted estimator integrands
# below to well under 1e-10 over the SNR range the solvers visit.
_GH_NODES, _GH_WEIGHTS = hermgauss(128)


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested tolerance."""


class ExtrapolationWarning(UserWarning):
    """A tabulated model was evaluated beyond its grid and clamped."""


def _check_snr(rho):
    rho = float(rho)
    if not math.isfinite(rho) or rho < 0:
        raise ValueError(f"snr must be finite and nonnegative, got {rho}")
    return rho


class InputModel:
    """Common interface of input-distribution models."""

    kind: str = "abstract"

    def mmse(self, rho):
        raise NotImplementedError

    def mutual_info(self, rho):
        """Mutual information at SNR rho in nats, by integrating mmse/2."""
        return immse_integral(self, rho)

    @property
    def third_moment(self) -> float:
        """E[S^3] under the model's own normalization."""
        raise NotImplementedError

    def low_snr_mmse(self, rho):
        """Second-order small-SNR expansion ``1 - rho + (2 - E[S^3]^2) rho^2 / 2``.

        Valid as stated for the zero-mean unit-power models; for the
        exponential model the constant and linear terms do not match its
        nonzero-mean normalization, so treat the result as the formula
        evaluated at the model's third moment, nothing more.
        """
        rho = _check_snr(rho)
        t3 = self.third_moment
        return 1.0 - rho + (2.0 - t3 * t3) * rho * rho / 2.0

    def __repr__(self):
        return f"{type(self).__name__}()"


class GaussianInput(InputModel):
    """Zero-mean unit-power Gaussian input: mmse(rho) = 1 / (1 + rho)."""

    kind = "gaussian"

    def mmse(self, rho):
        rho = np.asarray(rho, dtype=np.float64)
        if np.any(rho < 0):
            raise ValueError("snr must be nonnegative")
        out = 1.0 / (1.0 + rho)
        return float(out) if out.ndim == 0 else out

    def mutual_info(self, rho):
        # Closed form; immse_integral reproduces it to quadrature tolerance.
        rho = np.asarray(rho, dtype=np.float64)
        if np.any(rho < 0):
            raise ValueError("snr must be nonnegative")
        out = 0.5 * np.log1p(rho)
        return float(out) if out.ndim == 0 else out

    @property
    def third_moment(self):
        return 0.0


class BinaryInput(InputModel):
    """Equiprobable antipodal input S in {-1, +1}.

    The conditional mean is tanh, so
    ``mmse(rho) = 1 - E[tanh(rho - sqrt(rho) Y)]`` with Y standard normal.
    The expectation is taken by Gauss-Hermite quadrature after substituting
    y = sqrt(2) x so the e^{-x^2} weight absorbs the Gaussian density.
    """

    kind = "binary"

    def mmse(self, rho):
        rho_arr = np.atleast_1d(np.asarray(rho, dtype=np.float64))
        if np.any(rho_arr < 0):
            raise ValueError("snr must be nonnegative")
        sq = np.sqrt(rho_arr)
        args = rho_arr[:, None] - sq[:, None] * (_SQRT_2 * _GH_NODES)[None, :]
        vals = 1.0 - np.tanh(args) @ _GH_WEIGHTS / _SQRT_PI
        # Guard against quadrature roundoff at the extremes of the range.
        vals = np.clip(vals, 0.0, 1.0)
        if np.ndim(rho) == 0:
            return float(vals[0])
        return vals

    @property
    def third_moment(self):
        return 0.0


def _normal_hazard(v):
    """phi(v) / Q(v), the hazard rate of the standard normal, elementwise.

    Computed through erfcx so the ratio stays accurate for large positive v
    where both numerator and denominator underflow.  For very negative v
    the denominator is 1 to machine precision and phi(v) is returned
    directly, avoiding erfcx overflow.
    """
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    low = v < -30.0
    out[low] = np.exp(-0.5 * v[low] ** 2) / math.sqrt(2.0 * math.pi)
    out[~low] = _SQRT_2_OVER_PI / erfcx(v[~low] / _SQRT_2)
    return out


def emg_logpdf_d2(v, rho):
    """Second derivative of the log output density of the exponential model.

    The output of the exponential-input channel at SNR rho has an
    exponentially-modified-Gaussian density, and in the substituted
    variable ``v = sqrt(2 / rho) - y`` its log-density curvature is

        h(v) = r(v) * (v - r(v)),   r = phi / Q,

    independent of rho once expressed in v.  The rho argument is kept for
    interface symmetry and validated only.  h is confined to [-1, 0]:
    it tends to 0 from below as v -> -inf and to -1 from above as
    v -> +inf, which is what makes the induced noise objective convex.
    """
    rho = float(rho)
    if not (rho > 0) or not math.isfinite(rho):
        raise ValueError(f"snr must be finite and strictly positive, got {rho}")
    v_arr = np.asarray(v, dtype=np.float64)
    r = _normal_hazard(v_arr)
    out = r * (v_arr - r)
    if out.ndim == 0:
        return float(out)
    return out


def emg_pdf(y, rho):
    """Output density of the exponential-input channel at SNR rho.

    For S ~ Exp(sqrt(2)) and Y = sqrt(rho) S + W this is the
    exponentially-modified Gaussian with rate ``sqrt(2 / rho)``, evaluated
    in the overflow-safe form ``sqrt(pi / rho) * phi(y) * erfcx(v / sqrt(2))``
    with ``v = sqrt(2 / rho) - y``, falling back to the direct
    rate * exp * Q form in the far right tail where erfcx would overflow.
    """
    rho = float(rho)
    if not (rho > 0) or not math.isfinite(rho):
        raise ValueError(f"snr must be finite and strictly positive, got {rho}")
    y = np.asarray(y, dtype=np.float64)
    rate = math.sqrt(2.0 / rho)
    v = rate - y
    out = np.empty_like(y)
    safe = v > -36.0
    phi = np.exp(-0.5 * y[safe] ** 2) / math.sqrt(2.0 * math.pi)
    out[safe] = math.sqrt(math.pi / rho) * phi * erfcx(v[safe] / _SQRT_2)
    # Far right tail: Q(v) ~ 1, density is the bare exponential tail.
    with np.errstate(over="ignore"):
        out[~safe] = rate * np.exp(1.0 / rho - y[~safe] * rate)
    if out.ndim == 0:
        return float(out)
    return out


class ExponentialInput(InputModel):
    """Exponential input S ~ Exp(sqrt(2)), unit second moment, mean 1/sqrt(2).

    No closed-form mmse; the conditional mean follows from the score of
    the exponentially-modified-Gaussian output density,

        E[S | Y = y] = (r(v) - v) / sqrt(rho),   v = sqrt(2 / rho) - y,

    and ``mmse(rho) = E[S^2] - E[(E[S|Y])^2] = 1 - E[estimate^2]`` is
    integrated against the output density by adaptive quadrature.
    Because the mean is not removed, ``mmse(0) = Var(S) = 1/2``.
    """

    kind = "exponential"

    def _integration_limits(self, rho):
        rate = math.sqrt(2.0 / rho)
        # Left tail is Gaussian; right tail decays at the exponential rate.
        return -14.0, (1.0 / rho + 50.0) / rate + 14.0

    def expect_output(self, rho, fn, tol=1e-10):
        """E[fn(Y)] under the channel output density at SNR rho."""
        rho = float(rho)
        lo, hi = self._integration_limits(rho)
        val, err = integrate.quad(
            lambda y: emg_pdf(y, rho) * fn(y), lo, hi, epsabs=tol, epsrel=tol, limit=300
        )
        if err > 100 * tol + 1e-12:
            raise QuadratureError(
                f"output expectation at snr {rho} reached error {err:.3e}, wanted {tol:.1e}"
            )
        return val

    def conditional_mean(self, y, rho):
        """E[S | Y = y] at SNR rho."""
        rho = float(rho)
        if not (rho > 0):
            raise ValueError("snr must be strictly positive")
        y = np.asarray(y, dtype=np.float64)
        v = math.sqrt(2.0 / rho) - y
        out = (_normal_hazard(v) - v) / math.sqrt(rho)
        if out.ndim == 0:
            return float(out)
        return out

    def mmse(self, rho):
        if np.ndim(rho) > 0:
            return np.array([self.mmse(float(r)) for r in np.asarray(rho)])
        rho = _check_snr(rho)
        if rho == 0.0:
            return 0.5
        second = self.expect_output(rho, lambda y: self.conditional_mean(y, rho) ** 2)
        return float(min(max(1.0 - second, 0.0), 1.0))

    @property
    def third_moment(self):
        # E[S^3] = 6 / rate^3 for an exponential with rate sqrt(2).
        return 6.0 / (2.0 * _SQRT_2)


class TabulatedInput(InputModel):
    """MMSE curve given on a finite grid, interpolated piecewise-linearly.

    The grid must hold at least two points with strictly increasing
    nonnegative SNR and nonincreasing mmse values inside [0, 1].  Queries
    beyond either end clamp to the boundary value; clamping above the grid
    maximum raises an :class:`ExtrapolationWarning` since the flat
    continuation is a guess the caller should know about.
    """

    kind = "tabulated"

    def __init__(self, rho_grid, mmse_grid):
        rho_grid = np.asarray(rho_grid, dtype=np.float64)
        mmse_grid = np.asarray(mmse_grid, dtype=np.float64)
        if rho_grid.ndim != 1 or rho_grid.shape != mmse_grid.shape:
            raise ValueError("rho and mmse grids must be equal-length 1-d arrays")
        if rho_grid.size < 2:
            raise ValueError("tabulated model needs at least two grid points")
        if rho_grid[0] < 0 or np.any(np.diff(rho_grid) <= 0):
            raise ValueError("rho grid must be nonnegative and strictly increasing")
        if np.any(mmse_grid < 0) or np.any(mmse_grid > 1):
            raise ValueError("mmse values must lie in [0, 1]")
        if np.any(np.diff(mmse_grid) > 0):
            raise ValueError("mmse values must be nonincreasing in snr")
        self.rho_grid = rho_grid.copy()
        self.mmse_grid = mmse_grid.copy()
        self.rho_grid.setflags(write=False)
        self.mmse_grid.setflags(write=False)

    def mmse(self, rho):
        rho_arr = np.atleast_1d(np.asarray(rho, dtype=np.float64))
        if np.any(rho_arr < 0):
            raise ValueError("snr must be nonnegative")
        if np.any(rho_arr > self.rho_grid[-1]):
            warnings.warn(
                f"snr beyond grid maximum {self.rho_grid[-1]}, clamping to last value",
                ExtrapolationWarning,
                stacklevel=2,
            )
        out = np.interp(rho_arr, self.rho_grid, self.mmse_grid)
        if np.ndim(rho) == 0:
            return float(out[0])
        return out

    def mutual_info(self, rho):
        """Exact integral of the piecewise-linear curve (so no quadrature)."""
        if np.ndim(rho) > 0:
            return np.array([self.mutual_info(float(r)) for r in np.asarray(rho)])
        rho = _check_snr(rho)
        if rho > self.rho_grid[-1]:
            warnings.warn(
                f"snr beyond grid maximum {self.rho_grid[-1]}, clamping to last value",
                ExtrapolationWarning,
                stacklevel=2,
            )
        grid = np.concatenate(([0.0], self.rho_grid)) if self.rho_grid[0] > 0 else self.rho_grid
        vals = (
            np.concatenate(([self.mmse_grid[0]], self.mmse_grid))
            if self.rho_grid[0] > 0
            else self.mmse_grid
        )
        total = 0.0
        for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if rho <= a:
                break
            t = min(rho, b)
            ft = fa + (fb - fa) * (t - a) / (b - a)
            total += 0.5 * (fa + ft) * (t - a)
        if rho > grid[-1]:
            total += self.mmse_grid[-1] * (rho - grid[-1])
        return 0.5 * total

    @property
    def third_moment(self):
        raise ValueError("tabulated models carry no distribution, third moment unavailable")

    @classmethod
    def from_csv(cls, path):
        """Load a ``rho,mmse`` CSV table."""
        with open(path, "r") as fh:
            header = fh.readline().strip()
            if header != "rho,mmse":
                raise ValueError(f"bad table header {header!r}, expected 'rho,mmse'")
            rho, vals = [], []
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise ValueError(f"line {lineno}: expected 2 fields, got {len(parts)}")
                rho.append(float(parts[0]))
                vals.append(float(parts[1]))
        if len(rho) < 2:
            raise ValueError("table needs at least two rows")
        return cls(rho, vals)


def make_model(kind, table_path=None) -> InputModel:
    """Instantiate a model by name; tabulated models need a CSV path."""
    if kind == "gaussian":
        return GaussianInput()
    if kind == "binary":
        return BinaryInput()
    if kind == "exponential":
        return ExponentialInput()
    if kind == "tabulated":
        if table_path is None:
            raise ValueError("tabulated model requires a table path")
        return TabulatedInput.from_csv(table_path)
    raise ValueError(f"unknown input model {kind!r}")


def mmse(model: InputModel, rho):
    """MMSE of the model at SNR rho (thin wrapper over the method)."""
    return model.mmse(rho)


def mutual_info(model: InputModel, rho):
    """Mutual information of the model at SNR rho, in nats."""
    return model.mutual_info(rho)


def low_snr_mmse(model: InputModel, rho):
    """Small-SNR MMSE expansion using the model's third moment."""
    return model.low_snr_mmse(rho)


def immse_integral(model: InputModel, rho, tol=1e-8):
    """Integrate mmse/2 from 0 to rho by adaptive quadrature.

    This is the generic mutual-information path for models without a
    closed form.  Raises :class:`QuadratureError` when the integrator's
    own error estimate exceeds the requested absolute tolerance.
    """
    rho = _check_snr(rho)
    if rho == 0.0:
        return 0.0
    val, err = integrate.quad(
        lambda t: 0.5 * model.mmse(t), 0.0, rho, epsabs=tol * 0.01, epsrel=1e-10, limit=300
    )
    if err > tol:
        raise QuadratureError(
            f"mutual information quadrature reached error {err:.3e}, wanted {tol:.1e}"
        )
    return val
