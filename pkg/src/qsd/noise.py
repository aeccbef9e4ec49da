"""Seedable complex Wiener increments.

Each trajectory owns one :class:`NoiseStream`.  Streams are keyed by
``(seed, stream_id)`` through :class:`numpy.random.SeedSequence` spawn keys
and drive a counter-based Philox generator, so distinct trajectory indices
are independent by construction and a stream's output never depends on how
trajectories are scheduled.

An increment on channel ``j`` is ``sqrt(dt/2) * (g1 + 1j*g2)`` with ``g1, g2``
independent standard normals (numpy's ziggurat sampler, exact in
distribution).  That gives ``E[dxi] = 0``, ``E[dxi**2] = 0`` and
``E[dxi_j conj(dxi_k)] = delta_jk dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

U64_MAX = 2**64 - 1


def parse_seed(value) -> int:
    """Accept an int or a decimal / ``0x`` hex string; return a u64."""
    if isinstance(value, str):
        text = value.strip().lower()
        try:
            seed = int(text, 16) if text.startswith("0x") else int(text, 10)
        except ValueError as exc:
            raise ArgumentError(f"seed {value!r} is not a decimal or 0x-hex integer") from exc
    elif isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        seed = int(value)
    else:
        raise ArgumentError(f"seed must be an integer, got {value!r}")
    if not 0 <= seed <= U64_MAX:
        raise ArgumentError(f"seed {seed} outside the unsigned 64-bit range")
    return seed


@dataclass(frozen=True)
class WienerIncrement:
    values: np.ndarray
    dt: float

    @property
    def channel_count(self) -> int:
        return self.values.shape[0]


class NoiseStream:
    """Deterministic source of complex Wiener increments for one trajectory."""

    def __init__(self, seed: int, stream_id: int, channel_count: int):
        if channel_count < 1:
            raise ArgumentError("channel_count must be >= 1")
        self.seed = parse_seed(seed)
        self.stream_id = parse_seed(stream_id)
        self.channel_count = int(channel_count)
        self.counter = 0
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._rng = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return (f"NoiseStream(seed={self.seed}, stream_id={self.stream_id}, "
                f"channel_count={self.channel_count}, counter={self.counter})")

    def standard_block(self, n_steps: int) -> np.ndarray:
        """Unit-scale complex normals ``g1 + 1j*g2``, shape ``(n_steps, channels)``.

        Drawing ``n`` steps at once yields exactly the same numbers as ``n``
        single-step draws, so block and step-by-step consumers agree bitwise.
        """
        g = self._rng.standard_normal((n_steps, self.channel_count, 2))
        self.counter += n_steps
        return g[..., 0] + 1j * g[..., 1]

    def next_increments(self, dt: float) -> WienerIncrement:
        if not dt > 0:
            raise ArgumentError(f"dt must be positive, got {dt!r}")
        z = self.standard_block(1)[0]
        return WienerIncrement(np.sqrt(dt / 2) * z, float(dt))

    def increments(self, n_steps: int, dt: float) -> np.ndarray:
        """``n_steps`` scaled increments, shape ``(n_steps, channels)``."""
        if not dt > 0:
            raise ArgumentError(f"dt must be positive, got {dt!r}")
        return np.sqrt(dt / 2) * self.standard_block(n_steps)


def derive_stream(seed: int, trajectory_index: int, channels: int) -> NoiseStream:
    return NoiseStream(seed, trajectory_index, channels)


def next_increments(stream: NoiseStream, dt: float) -> WienerIncrement:
    return stream.next_increments(dt)
