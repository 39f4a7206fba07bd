"""Poisson sampling, independent marking, and the two-layer sprinkling split.

Sampling uses counter-based Philox streams derived from (seed, role) so a
given seed pins the whole sample, and the sprinkling split draws its
thinning variables from a separate substream: the union of the two layers
is bit-identical to the unsplit sample for the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DIRECTION, RANK, BoxRegion, MarkedConfiguration
from .errors import ValidationError

_THIN_TAG = 0x5BD1E995  # substream tag for thinning decisions


@dataclass(frozen=True)
class MarkLaw:
    """Mark distribution: ranks 1..K with probabilities pi, or uniform directions."""

    kind: str  # RANK or DIRECTION
    pi: tuple = ()

    def __post_init__(self):
        if self.kind == RANK:
            p = np.asarray(self.pi, dtype=float)
            if p.size == 0:
                raise ValidationError("rank law needs a probability vector")
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValidationError("pi must be nonnegative and sum to 1")
            object.__setattr__(self, "pi", tuple(float(x) for x in p))
        elif self.kind == DIRECTION:
            object.__setattr__(self, "pi", (0.25, 0.25, 0.25, 0.25))
        else:
            raise ValidationError(f"unknown mark law kind {self.kind!r}")

    @property
    def K(self) -> int:
        return len(self.pi) if self.kind == RANK else 4

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = np.asarray(self.pi)
        draws = rng.choice(len(p), size=n, p=p)
        if self.kind == RANK:
            return draws.astype(np.int64) + 1  # ranks are 1-based
        return draws.astype(np.int64)


def rank_law(pi) -> MarkLaw:
    return MarkLaw(RANK, tuple(pi))


def uniform_rank_law(K: int) -> MarkLaw:
    return MarkLaw(RANK, (1.0 / K,) * K)


def direction_law() -> MarkLaw:
    return MarkLaw(DIRECTION)


def _generator(seed: int, *tags: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *tags])))


def sample_poisson(
    window: BoxRegion, intensity: float, law: MarkLaw, seed: int
) -> MarkedConfiguration:
    """Homogeneous Poisson sample on the window with i.i.d. marks.

    Deterministic given the seed: the count, positions, and marks are drawn
    in a fixed order from one counter-based stream.
    """
    if not intensity > 0:
        raise ValidationError(f"intensity must be positive, got {intensity}")
    rng = _generator(seed)
    n = int(rng.poisson(intensity * window.volume))
    d = window.dim
    pos = window.lo + rng.random((n, d)) * window.side
    marks = law.sample(rng, n)
    return MarkedConfiguration(pos, marks, law.kind, window)


@dataclass(frozen=True)
class SprinkleSplit:
    """Coupled decomposition of one Poisson sample into bulk and sprinkling."""

    x1: MarkedConfiguration
    x2: MarkedConfiguration
    s: float
    base_intensity: float

    @property
    def full(self) -> MarkedConfiguration:
        return self.x1.union(self.x2)


def sprinkle_split(
    window: BoxRegion,
    s: float,
    law: MarkLaw,
    seed: int,
    base_intensity: float = 1.0,
) -> SprinkleSplit:
    """Split one unit-intensity sample into layers of intensity 1-s^-(d+1), s^-(d+1).

    Per-point independent thinning of the full sample realizes the two
    stated intensities exactly while keeping the coupling x1 | x2 = full.
    Thinning uniforms come from a dedicated substream of the seed, so the
    full sample is bit-identical to sample_poisson(window, ..., seed).
    """
    if not s > 1:
        raise ValidationError(f"sprinkling scale must exceed 1, got {s}")
    full = sample_poisson(window, base_intensity, law, seed)
    d = window.dim
    p2 = float(s) ** (-(d + 1))
    thin_rng = _generator(seed, _THIN_TAG)
    u = thin_rng.random(full.n)
    to_x2 = u < p2
    x1 = MarkedConfiguration(
        full.positions[~to_x2], full.marks[~to_x2], law.kind, window
    )
    x2 = MarkedConfiguration(full.positions[to_x2], full.marks[to_x2], law.kind, window)
    return SprinkleSplit(x1=x1, x2=x2, s=float(s), base_intensity=float(base_intensity))
