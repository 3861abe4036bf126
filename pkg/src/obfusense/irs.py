"""Binary-phase surface configurations and the randomized obfuscation scheduler.

The scheduler is a two-state machine: a RAND step flips a small random subset
of elements, a FLIP step inverts the whole surface, and each tick is skipped
with a hold probability that randomizes the timing. One tick corresponds to
one configuration write at the surface update rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RAND = "RAND"
FLIP = "FLIP"


@dataclass
class IrsConfig:
    """M binary element states."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 1:
            raise ValueError("config bits must be a 1-D vector")
        if not np.all((self.bits == 0) | (self.bits == 1)):
            raise ValueError("config bits must be 0 or 1")

    def __len__(self):
        return self.bits.shape[0]


@dataclass
class IrsAlgState:
    """Scheduler state: current configuration plus the pending step kind."""

    cfg: IrsConfig
    next_state: str = RAND
    progression_rate: float = 0.05
    hold_prob: float = 0.6
    update_rate: float = 20.0
    rng: np.random.Generator = None

    def __post_init__(self):
        m = len(self.cfg)
        if not (0.0 < self.progression_rate <= 0.5):
            raise ValueError("progression_rate must be in (0, 0.5]")
        if math.ceil(self.progression_rate * m) < 1:
            raise ValueError("progression rate selects no elements")
        if not (0.0 <= self.hold_prob < 1.0):
            raise ValueError("hold_prob must be in [0, 1)")
        if self.update_rate <= 0:
            raise ValueError("update_rate must be > 0")
        if self.next_state not in (RAND, FLIP):
            raise ValueError(f"unknown state {self.next_state!r}")
        if self.rng is None:
            self.rng = np.random.default_rng()


def initial_state(m: int, rng: np.random.Generator, progression_rate: float = 0.05,
                  hold_prob: float = 0.6, update_rate: float = 20.0) -> IrsAlgState:
    """Fresh scheduler state with a uniformly random starting configuration."""
    bits = rng.integers(0, 2, size=m, dtype=np.uint8)
    return IrsAlgState(cfg=IrsConfig(bits), next_state=RAND, progression_rate=progression_rate,
                       hold_prob=hold_prob, update_rate=update_rate, rng=rng)


def map_coefficient(bit: int) -> float:
    """Element reflection coefficient: bit 0 -> -1, bit 1 -> +1."""
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    return -1.0 if bit == 0 else 1.0


def map_config(cfg: IrsConfig) -> np.ndarray:
    """Vector of per-element reflection coefficients in {-1, +1}."""
    return cfg.bits.astype(float) * 2.0 - 1.0


def step(state: IrsAlgState, disable_inversion: bool = False):
    """Advance one tick; returns (new_state, changed).

    With probability hold_prob nothing happens (the configuration is re-held
    for one tick). Otherwise the pending step executes: RAND flips
    ceil(progression_rate * M) distinct random elements, FLIP inverts all.
    disable_inversion turns the FLIP execution into a no-op (the state machine
    still alternates).
    """
    if state.rng.random() < state.hold_prob:
        return state, False
    bits = state.cfg.bits.copy()
    m = bits.shape[0]
    if state.next_state == RAND:
        count = math.ceil(state.progression_rate * m)
        idx = state.rng.choice(m, size=count, replace=False)
        bits[idx] ^= 1
        nxt = FLIP
    else:
        if not disable_inversion:
            bits ^= 1
        nxt = RAND
    new = IrsAlgState(cfg=IrsConfig(bits), next_state=nxt,
                      progression_rate=state.progression_rate, hold_prob=state.hold_prob,
                      update_rate=state.update_rate, rng=state.rng)
    return new, True


def hamming_distance(a: IrsConfig, b: IrsConfig) -> int:
    if len(a) != len(b):
        raise ValueError(f"config lengths differ: {len(a)} vs {len(b)}")
    return int(np.count_nonzero(a.bits != b.bits))


def hamming_trace(m: int, n_steps: int, n_ensemble: int, *, progression_rate: float = 0.05,
                  hold_prob: float = 0.0, seed: int = 0, include_inversion: bool = True) -> np.ndarray:
    """Ensemble-mean Hamming distance to the starting configuration per tick.

    Returns n_steps + 1 values; index 0 is the distance at the start (zero).
    """
    if n_ensemble < 1:
        raise ValueError("n_ensemble must be >= 1")
    totals = np.zeros(n_steps + 1)
    for run in range(n_ensemble):
        rng = np.random.default_rng((seed, run))
        state = initial_state(m, rng, progression_rate=progression_rate, hold_prob=hold_prob)
        start = IrsConfig(state.cfg.bits.copy())
        for t in range(1, n_steps + 1):
            state, _ = step(state, disable_inversion=not include_inversion)
            totals[t] += hamming_distance(state.cfg, start)
    return totals / n_ensemble


def serialize_config(cfg: IrsConfig) -> str:
    """Hex rendering of the configuration word (little-endian bit order)."""
    return np.packbits(cfg.bits, bitorder="little").tobytes().hex()
