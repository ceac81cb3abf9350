"""Synthetic side-channel traces and a mutual-information key-recovery attack.

The simulator produces power-style traces for a first-round AES S-box
target: at each designated leak point the trace carries an antipodal
signal driven by the most significant bit of ``sbox(plaintext ^ key)``,
everywhere else it carries secret-independent background activity, and
physical plus (optionally) masking Gaussian noise is added on top.  The
attack side estimates, for every key guess and trace point, the mutual
information between the hypothesized S-box bit and the binned trace
samples, and bets on the largest score.

All randomness is drawn from named substreams of a caller-supplied seed,
so identical seeds give byte-identical traces and attack outcomes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .channels import NoiseAllocation, SubchannelSet
from .seeds import substream

__all__ = [
    "AES_SBOX",
    "aes_sbox",
    "leakage_bit",
    "TraceSet",
    "AttackResult",
    "AttackConfig",
    "attack_channels",
    "generate_traces",
    "inject_noise",
    "mia_attack",
    "success_rate",
    "write_traces",
    "read_traces",
    "TraceFormatError",
]

# FIPS-197 substitution box.
AES_SBOX = np.array([
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
], dtype=np.uint8)
AES_SBOX.setflags(write=False)

_MAGIC = b"NFTRACE1"


class TraceFormatError(ValueError):
    """A trace file failed to parse or had inconsistent dimensions."""


def _check_byte(value, name):
    value = int(value)
    if not 0 <= value <= 255:
        raise ValueError(f"{name} must be a byte value in [0, 255], got {value}")
    return value


def aes_sbox(byte) -> int:
    """AES S-box lookup for one byte."""
    return int(AES_SBOX[_check_byte(byte, "byte")])


def leakage_bit(plaintext, key) -> int:
    """Most significant bit of the first-round S-box output, the leaked bit."""
    p = _check_byte(plaintext, "plaintext")
    k = _check_byte(key, "key")
    return int(AES_SBOX[p ^ k]) >> 7


def _leakage_bits(plaintexts: np.ndarray, key: int) -> np.ndarray:
    return (AES_SBOX[np.bitwise_xor(plaintexts, np.uint8(key))] >> 7).astype(np.float64)


@dataclass
class TraceSet:
    """A batch of traces plus the ground truth that generated them.

    ``meta`` records provenance (seed and the P/Z/N power vectors in play)
    for inspection only: it is not serialized and does not take part in
    equality.
    """

    traces: np.ndarray
    plaintexts: np.ndarray
    true_key: int | None
    leak_points: tuple[int, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.traces = np.asarray(self.traces, dtype=np.float64)
        self.plaintexts = np.asarray(self.plaintexts, dtype=np.uint8)
        if self.traces.ndim != 2:
            raise ValueError("traces must be a 2-d array of shape (n_traces, m)")
        if self.plaintexts.shape != (self.traces.shape[0],):
            raise ValueError("need exactly one plaintext byte per trace")
        if self.true_key is not None:
            self.true_key = _check_byte(self.true_key, "true_key")
        self.leak_points = tuple(int(i) for i in self.leak_points)
        m = self.traces.shape[1]
        for i in self.leak_points:
            if not 0 <= i < m:
                raise ValueError(f"leak point {i} outside [0, {m})")

    @property
    def n_traces(self) -> int:
        return self.traces.shape[0]

    @property
    def m(self) -> int:
        return self.traces.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TraceSet):
            return NotImplemented
        return (
            self.true_key == other.true_key
            and self.leak_points == other.leak_points
            and np.array_equal(self.plaintexts, other.plaintexts)
            and np.array_equal(self.traces, other.traces)
        )


@dataclass(frozen=True)
class AttackResult:
    """Scores and verdict of one key-recovery attempt."""

    scores: np.ndarray
    best_key: int
    best_point: int
    success: bool


def generate_traces(
    channels: SubchannelSet,
    leak_points,
    true_key: int,
    n_traces: int,
    seed,
) -> TraceSet:
    """Simulate traces: antipodal S-box-bit signal at the leak points,
    Gaussian background elsewhere, physical noise everywhere.

    Column i has variance ``P[i] + Z[i]``: the leak signal is
    ``sqrt(P) * (2 bit - 1)`` and the background is N(0, P).  Separate
    named substreams of ``seed`` drive plaintexts, background, and noise,
    so regenerating with the same seed reproduces the traces exactly.
    """
    leak_points = tuple(int(i) for i in leak_points)
    if not leak_points:
        raise ValueError("need at least one leak point")
    if len(set(leak_points)) != len(leak_points):
        raise ValueError("leak points must be distinct")
    m = channels.m
    for i in leak_points:
        if not 0 <= i < m:
            raise ValueError(f"leak point {i} outside [0, {m})")
    true_key = _check_byte(true_key, "true_key")
    if n_traces < 1:
        raise ValueError("need at least one trace")

    plaintexts = substream(seed, "plaintexts").integers(0, 256, n_traces).astype(np.uint8)
    signs = 2.0 * _leakage_bits(plaintexts, true_key) - 1.0

    amplitude = np.sqrt(channels.P)
    X = substream(seed, "background").standard_normal((n_traces, m)) * amplitude[None, :]
    for i in leak_points:
        X[:, i] = signs * amplitude[i]
    Y = X + substream(seed, "physical-noise").standard_normal((n_traces, m)) * np.sqrt(
        channels.Z
    )[None, :]
    meta = {
        "seed": seed,
        "P": channels.P.copy(),
        "Z": channels.Z.copy(),
        "N": np.zeros(m),
    }
    return TraceSet(Y, plaintexts, true_key, leak_points, meta)


def inject_noise(traces: TraceSet, alloc: NoiseAllocation, seed) -> TraceSet:
    """Add the allocated masking noise per trace point (a fresh TraceSet)."""
    if alloc.N.shape != (traces.m,):
        raise ValueError("allocation length does not match the trace width")
    noise = substream(seed, "artificial-noise").standard_normal(traces.traces.shape)
    Y = traces.traces + noise * np.sqrt(alloc.N)[None, :]
    meta = dict(traces.meta)
    meta["N"] = meta.get("N", np.zeros(traces.m)) + alloc.N
    return TraceSet(Y, traces.plaintexts.copy(), traces.true_key, traces.leak_points, meta)


def mia_attack(traces: TraceSet, n_bins: int = 9, chunk: int = 128) -> AttackResult:
    """Mutual-information analysis over all 256 key guesses.

    For each key guess and trace point, bins the samples into ``n_bins``
    equal-width bins over their observed range and computes the plug-in
    mutual information (in nats) between the hypothesized S-box MSB and
    the bin index.  The guess with the single largest score wins.
    Constant columns carry no information and score exactly zero.
    """
    if traces.n_traces < 100:
        raise ValueError("mutual-information estimates need at least 100 traces")
    if n_bins < 2:
        raise ValueError("need at least two bins")
    n, m = traces.n_traces, traces.m
    Y = traces.traces

    guesses = np.arange(256, dtype=np.int32)[:, None]
    hyp = (AES_SBOX[np.bitwise_xor(traces.plaintexts.astype(np.int32)[None, :], guesses)] >> 7)
    hyp = hyp.astype(np.float64)  # (256, n)
    ones = hyp.sum(axis=1)  # traces hypothesized to leak bit 1, per guess

    scores = np.empty((256, m))
    for start in range(0, m, chunk):
        cols = Y[:, start : start + chunk]
        c = cols.shape[1]
        lo = cols.min(axis=0)
        width = cols.max(axis=0) - lo
        width[width == 0] = 1.0  # constant column: everything lands in bin 0
        idx = ((cols - lo[None, :]) / width[None, :] * n_bins).astype(np.int64)
        np.clip(idx, 0, n_bins - 1, out=idx)

        onehot = np.zeros((n, c * n_bins))
        onehot[np.arange(n)[:, None], np.arange(c)[None, :] * n_bins + idx] = 1.0
        joint1 = (hyp @ onehot).reshape(256, c, n_bins)
        per_bin = onehot.sum(axis=0).reshape(c, n_bins)
        joint0 = per_bin[None, :, :] - joint1

        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = joint1 * np.log(joint1 * n / (ones[:, None, None] * per_bin[None, :, :]))
            t0 = joint0 * np.log(
                joint0 * n / ((n - ones)[:, None, None] * per_bin[None, :, :])
            )
        scores[:, start : start + chunk] = (
            np.nan_to_num(t1, nan=0.0, posinf=0.0, neginf=0.0)
            + np.nan_to_num(t0, nan=0.0, posinf=0.0, neginf=0.0)
        ).sum(axis=2) / n

    flat = int(np.argmax(scores))
    best_key, best_point = divmod(flat, m)
    success = traces.true_key is not None and best_key == traces.true_key
    return AttackResult(scores=scores, best_key=best_key, best_point=best_point, success=success)


@dataclass(frozen=True)
class AttackConfig:
    """Synthetic attack scenario: trace geometry, powers, and the secret."""

    m: int = 1000
    n_traces: int = 512
    leak_points: tuple[int, ...] = (100, 300, 500, 700, 900)
    p_leak: float = 0.02
    bg_mean: float = 0.002
    bg_std: float = 0.001
    z: float = 0.001
    true_key: int = 0x53
    n_bins: int = 9
    seed: int = 0


def attack_channels(config: AttackConfig) -> SubchannelSet:
    """Subchannel powers implied by an attack scenario.

    Background signal powers are drawn once per scenario (negative draws
    set to zero) from the scenario's own substream, so the instance is a
    fixed property of the config while per-run randomness varies.
    """
    if config.z <= 0:
        raise ValueError("z must be strictly positive")
    rng = substream(config.seed, "instance")
    P = np.maximum(rng.normal(config.bg_mean, config.bg_std, config.m), 0.0)
    P[list(config.leak_points)] = config.p_leak
    return SubchannelSet(P=P, Z=np.full(config.m, config.z))


def success_rate(
    config: AttackConfig, allocator, budget: float, n_seeds: int, run_key=()
) -> float:
    """Fraction of independently seeded runs whose attack recovers the key.

    ``allocator`` maps ``(channels, budget)`` to a NoiseAllocation; the
    allocation is computed once since it is deterministic, while each run
    redraws plaintexts, background, physical noise, and masking noise.
    ``run_key`` extends the stream key so concurrent studies (one per
    budget, say) draw independent runs against the same instance.
    """
    if n_seeds < 1:
        raise ValueError("need at least one seed")
    run_key = tuple(run_key)
    channels = attack_channels(config)
    alloc = allocator(channels, budget)
    wins = 0
    for s in range(n_seeds):
        traces = generate_traces(
            channels,
            config.leak_points,
            config.true_key,
            config.n_traces,
            seed=(config.seed, run_key, s),
        )
        masked = inject_noise(traces, alloc, seed=(config.seed, run_key, s, "inject"))
        if mia_attack(masked, config.n_bins).success:
            wins += 1
    return wins / n_seeds


def write_traces(traces: TraceSet, path, fmt: str = "text"):
    """Serialize a TraceSet.

    Text format: a ``ntraces,m,true_key_hex,leak_points`` header line
    (leak points semicolon-separated, '-' for an absent key), then one
    line per trace holding the plaintext in hex and m float samples.
    Binary format: a 32-byte magic+dims header followed by the leak-point
    indices (u32), plaintext bytes, and row-major little-endian float64
    samples.  Both round-trip exactly; meta is not serialized.
    """
    if fmt == "text":
        key_hex = "-" if traces.true_key is None else format(traces.true_key, "02x")
        points = ";".join(str(i) for i in traces.leak_points)
        with open(path, "w", newline="\n") as fh:
            fh.write(f"{traces.n_traces},{traces.m},{key_hex},{points}\n")
            for row, p in zip(traces.traces, traces.plaintexts):
                fh.write(format(int(p), "02x") + "," + ",".join(repr(float(x)) for x in row) + "\n")
    elif fmt == "binary":
        key = 0xFFFF if traces.true_key is None else traces.true_key
        header = _MAGIC + struct.pack(
            "<QQHHI", traces.n_traces, traces.m, key, len(traces.leak_points), 0
        )
        assert len(header) == 32
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.asarray(traces.leak_points, dtype="<u4").tobytes())
            fh.write(traces.plaintexts.tobytes())
            fh.write(np.ascontiguousarray(traces.traces, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


def read_traces(path) -> TraceSet:
    """Read a trace file written by :func:`write_traces` (format sniffed)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic == _MAGIC:
            return _read_binary(fh)
    return _read_text(path)


def _read_binary(fh) -> TraceSet:
    head = fh.read(24)
    if len(head) != 24:
        raise TraceFormatError("binary header truncated")
    n, m, key, n_leak, _ = struct.unpack("<QQHHI", head)
    body = fh.read()
    expected = 4 * n_leak + n + 8 * n * m
    if len(body) != expected:
        raise TraceFormatError(
            f"binary payload holds {len(body)} bytes, expected {expected} "
            f"for {n} traces of {m} samples and {n_leak} leak points"
        )
    leak = np.frombuffer(body, dtype="<u4", count=n_leak)
    plaintexts = np.frombuffer(body, dtype=np.uint8, count=n, offset=4 * n_leak)
    samples = np.frombuffer(body, dtype="<f8", count=n * m, offset=4 * n_leak + n)
    return TraceSet(
        samples.reshape(n, m).copy(),
        plaintexts.copy(),
        None if key == 0xFFFF else key,
        tuple(int(i) for i in leak),
    )


def _read_text(path) -> TraceSet:
    with open(path, "r") as fh:
        header = fh.readline().strip()
        parts = header.split(",")
        if len(parts) != 4:
            raise TraceFormatError(f"malformed header {header!r}, expected 4 comma fields")
        try:
            n, m = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise TraceFormatError(f"malformed header dimensions in {header!r}") from exc
        key = None if parts[2] == "-" else int(parts[2], 16)
        leak = tuple(int(i) for i in parts[3].split(";")) if parts[3] else ()
        traces = np.empty((n, m))
        plaintexts = np.empty(n, dtype=np.uint8)
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if count >= n:
                raise TraceFormatError(f"more than the {n} trace rows announced in the header")
            fields = line.split(",")
            if len(fields) != m + 1:
                raise TraceFormatError(
                    f"trace row {count} holds {len(fields) - 1} samples, expected {m}"
                )
            plaintexts[count] = int(fields[0], 16)
            traces[count] = [float(x) for x in fields[1:]]
            count += 1
        if count != n:
            raise TraceFormatError(f"found {count} trace rows, header announced {n}")
    return TraceSet(traces, plaintexts, key, leak)
