"""Parallel-subchannel model and elementary leakage measures.

A side channel is modeled as m parallel additive-Gaussian subchannels.
Subchannel i carries a secret-dependent signal of power ``P[i]``, is
disturbed by physical noise of power ``Z[i]``, and may receive extra
masking noise of power ``N[i]`` chosen by an allocator.  The post-masking
signal-to-noise ratio is ``P / (N + Z)``.

All mutual-information values in this package are in nats and include the
1/2 prefactor of the Gaussian channel formula, i.e. ``0.5 * ln(1 + snr)``.
Dropping the prefactor or switching to bits rescales every objective by a
constant and does not change any argmin, but reported numbers here always
use nats.  The Fano bound converts to bits internally because key-guessing
entropy is naturally expressed in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SubchannelSet",
    "NoiseAllocation",
    "LeakageReport",
    "snr",
    "gaussian_mi",
    "sibson_mi",
    "fano_pe_lower",
    "read_channels_csv",
    "write_channels_csv",
]


def _as_readonly_f64(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SubchannelSet:
    """Immutable description of m parallel subchannels.

    Attributes
    ----------
    P : ndarray
        Signal power per subchannel, nonnegative.  A zero entry means the
        subchannel never leaks and allocators must leave it alone.
    Z : ndarray
        Physical noise power per subchannel, strictly positive.
    """

    P: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        P = _as_readonly_f64(self.P, "P")
        Z = _as_readonly_f64(self.Z, "Z")
        if P.shape != Z.shape:
            raise ValueError(f"P and Z must have equal length, got {P.shape} and {Z.shape}")
        if P.size == 0:
            raise ValueError("need at least one subchannel")
        if np.any(P < 0):
            raise ValueError("signal powers P must be nonnegative")
        if np.any(Z <= 0):
            raise ValueError("noise powers Z must be strictly positive")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Z", Z)

    @property
    def m(self) -> int:
        return self.P.size

    def snr(self, N=None) -> np.ndarray:
        """Per-subchannel SNR after adding masking noise N (default: none)."""
        if N is None:
            N = np.zeros(self.m)
        return snr(self.P, self.Z, N)


@dataclass(frozen=True)
class NoiseAllocation:
    """Result of a noise allocator.

    ``dual`` is the certifying dual variable when one exists (the common
    marginal-leakage rate for total-MI solvers, the shared post-masking SNR
    water level for the minimax solver) and None for baselines such as the
    uniform split or the grid oracle.  ``stationary_only`` marks solutions
    of the distribution-aware solver on an instance whose convexity
    certificate failed somewhere in the induced SNR range: the output still
    satisfies the stationarity system but is not certified globally optimal.
    """

    N: np.ndarray
    dual: float | None
    objective_kind: str
    budget_used: float = field(init=False)
    stationary_only: bool = False

    def __post_init__(self):
        N = _as_readonly_f64(self.N, "N")
        if np.any(N < 0):
            raise ValueError("masking noise powers N must be nonnegative")
        if self.objective_kind not in ("total", "max"):
            raise ValueError(f"objective_kind must be 'total' or 'max', got {self.objective_kind!r}")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "budget_used", float(np.sum(N)))


@dataclass(frozen=True)
class LeakageReport:
    """Per-channel and aggregate leakage of an allocation, in nats."""

    per_channel_mi: np.ndarray
    total_mi: float
    max_mi: float
    fano_pe_lower: float

    def __post_init__(self):
        mi = _as_readonly_f64(self.per_channel_mi, "per_channel_mi")
        if np.any(mi < 0):
            raise ValueError("mutual information values must be nonnegative")
        object.__setattr__(self, "per_channel_mi", mi)
        if not math.isclose(self.total_mi, float(np.sum(mi)), rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("total_mi does not match the sum of per_channel_mi")
        if not math.isclose(self.max_mi, float(np.max(mi)), rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("max_mi does not match the maximum of per_channel_mi")


def snr(P, Z, N):
    """Signal-to-noise ratio ``P / (N + Z)`` per subchannel.

    Accepts scalars or equal-length arrays.  Zero-power subchannels get
    SNR 0.  Rejects nonpositive Z and negative P or N.
    """
    P = np.asarray(P, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    N = np.asarray(N, dtype=np.float64)
    if np.any(Z <= 0):
        raise ValueError("noise powers Z must be strictly positive")
    if np.any(P < 0):
        raise ValueError("signal powers P must be nonnegative")
    if np.any(N < 0):
        raise ValueError("masking noise powers N must be nonnegative")
    out = P / (N + Z)
    if out.ndim == 0:
        return float(out)
    return out


def gaussian_mi(rho):
    """Mutual information of a unit-power Gaussian input at SNR rho, in nats."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0):
        raise ValueError("snr must be nonnegative")
    out = 0.5 * np.log1p(rho)
    if out.ndim == 0:
        return float(out)
    return out


def sibson_mi(rho, alpha):
    """Order-alpha Sibson information of the Gaussian subchannel, in nats.

    Evaluates ``0.5 * ln(1 + alpha * rho)``; alpha = 1 recovers the usual
    mutual information.
    """
    if alpha <= 0:
        raise ValueError("alpha must be strictly positive")
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0):
        raise ValueError("snr must be nonnegative")
    out = 0.5 * np.log1p(alpha * rho)
    if out.ndim == 0:
        return float(out)
    return out


def fano_pe_lower(total_mi_nats, alphabet_size):
    """Fano lower bound on the error probability of guessing the secret.

    For a secret uniform on an alphabet of the given size observed through
    channels leaking ``total_mi_nats``, any guessing rule has error
    probability at least ``(log2(size) - mi_bits - 1) / log2(size)``,
    clamped at zero.  The conversion to bits happens here.
    """
    if alphabet_size < 2:
        raise ValueError("alphabet_size must be at least 2")
    if total_mi_nats < 0:
        raise ValueError("mutual information must be nonnegative")
    log_size = math.log2(alphabet_size)
    mi_bits = total_mi_nats / math.log(2)
    return max(0.0, (log_size - mi_bits - 1.0) / log_size)


def write_channels_csv(channels: SubchannelSet, path):
    """Write a subchannel set as ``index,P,Z`` rows."""
    with open(path, "w", newline="\n") as fh:
        fh.write("index,P,Z\n")
        for i in range(channels.m):
            fh.write(f"{i},{float(channels.P[i])!r},{float(channels.Z[i])!r}\n")


def read_channels_csv(path) -> SubchannelSet:
    """Read a subchannel set written by :func:`write_channels_csv`."""
    with open(path, "r") as fh:
        header = fh.readline().strip()
        if header != "index,P,Z":
            raise ValueError(f"bad channels header {header!r}, expected 'index,P,Z'")
        P, Z = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 3 fields, got {len(parts)}")
            idx, p, z = parts
            if int(idx) != len(P):
                raise ValueError(f"line {lineno}: index {idx} out of order")
            P.append(float(p))
            Z.append(float(z))
    if not P:
        raise ValueError("channels file has no rows")
    return SubchannelSet(P=np.array(P), Z=np.array(Z))
