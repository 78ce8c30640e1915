"""Box averages and null-sequence diagnostics in uniform density."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sequences import SequenceHandle, box_points

MODES = ("plain", "abs", "abs2")
DEFAULT_THRESHOLD = 0.05
INDEX_GUARD = 2 ** 62
CHUNK = 1 << 18


@dataclass(frozen=True)
class FolnerBox:
    base: tuple
    side: int

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("box side must be at least 1")
        object.__setattr__(self, "base", tuple(int(b) for b in self.base))
        if any(abs(b) + self.side >= INDEX_GUARD for b in self.base):
            raise ValueError("box exceeds the evaluation guard")

    @property
    def d(self) -> int:
        return len(self.base)

    @property
    def size(self) -> int:
        return self.side ** self.d

    def points(self) -> np.ndarray:
        return box_points(self.base, self.side)


def box_average(s: SequenceHandle, box: FolnerBox, mode: str = "plain"):
    """(1/N^d) times the sum of s(n), |s(n)| or |s(n)|^2 over the box.

    Compensated summation makes the result independent of chunking."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if box.d != s.d:
        raise ValueError("box and sequence dimensions differ")
    re_parts: list[float] = []
    im_parts: list[float] = []
    pts = box.points()
    for start in range(0, len(pts), CHUNK):
        vals = s.many(pts[start:start + CHUNK])
        if mode == "plain":
            re_parts.extend(vals.real.tolist())
            im_parts.extend(vals.imag.tolist())
        elif mode == "abs":
            re_parts.extend(np.abs(vals).tolist())
        else:
            re_parts.extend((vals.real ** 2 + vals.imag ** 2).tolist())
    n = box.size
    if mode == "plain":
        return complex(math.fsum(re_parts) / n, math.fsum(im_parts) / n)
    return math.fsum(re_parts) / n


@dataclass(frozen=True)
class BaseSampler:
    """Box bases: the origin, ``count`` random bases with coordinates up to
    ``magnitude`` drawn from a seeded generator, and explicit extras."""

    count: int = 8
    magnitude: int = 10 ** 6
    seed: int = 0
    extra: tuple = ()

    def bases(self, d: int) -> list[tuple]:
        rng = np.random.default_rng(self.seed)
        out = [(0,) * d]
        for _ in range(self.count):
            out.append(tuple(int(x) for x in rng.integers(-self.magnitude, self.magnitude + 1, d)))
        for b in self.extra:
            b = (int(b),) if isinstance(b, (int, np.integer)) else tuple(int(x) for x in b)
            if len(b) != d:
                raise ValueError("adversarial base has the wrong dimension")
            out.append(b)
        seen = []
        for b in out:
            if b not in seen:
                seen.append(b)
        return seen


@dataclass(frozen=True)
class DecayReport:
    schedule: tuple
    worst_avg: tuple
    verdict: str
    threshold: float = DEFAULT_THRESHOLD
    bases_used: tuple = ()
    mode: str = "abs"
    per_base: tuple = field(default=(), compare=False)

    def to_json(self) -> dict:
        return {
            "schedule": list(self.schedule),
            "worst_avg": list(self.worst_avg),
            "verdict": self.verdict,
            "threshold": self.threshold,
            "bases_used": [list(b) for b in self.bases_used],
            "mode": self.mode,
        }

    @classmethod
    def from_json(cls, data) -> "DecayReport":
        return cls(tuple(data["schedule"]), tuple(data["worst_avg"]), data["verdict"],
                   float(data.get("threshold", DEFAULT_THRESHOLD)),
                   tuple(tuple(b) for b in data.get("bases_used", ())), data.get("mode", "abs"))


def verdict_for(worst: Sequence[float], threshold: float = DEFAULT_THRESHOLD) -> str:
    """null: final below threshold after at least a factor-2 decay;
    not-null: final above twice the threshold without such decay."""
    first, final = worst[0], worst[-1]
    decayed = first >= 2 * final
    if final < threshold and decayed:
        return "null"
    if final > 2 * threshold and not decayed:
        return "not-null"
    return "inconclusive"


def null_diagnostic(s: SequenceHandle, schedule: Sequence[int],
                    bases: BaseSampler | Sequence | None = None, mode: str = "abs",
                    threshold: float = DEFAULT_THRESHOLD) -> DecayReport:
    """worst_avg(N) = max over bases of the box average of |s| (``mode="abs"``),
    |s|^2 (``"abs2"``) or the modulus of the plain average (``"plain"``)."""
    schedule = tuple(int(n) for n in schedule)
    if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be a nonempty increasing list")
    if bases is None:
        bases = BaseSampler()
    base_list = bases.bases(s.d) if isinstance(bases, BaseSampler) else \
        [((b,) if isinstance(b, (int, np.integer)) else tuple(b)) for b in bases]
    worst = []
    per_base = []
    for n in schedule:
        vals = [abs(box_average(s, FolnerBox(b, n), mode)) for b in base_list]
        per_base.append(tuple(vals))
        worst.append(max(vals))
    return DecayReport(schedule, tuple(worst), verdict_for(worst, threshold), threshold,
                       tuple(base_list), mode, tuple(per_base))
