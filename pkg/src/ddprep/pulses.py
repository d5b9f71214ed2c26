"""Pi-pulse sequence construction and toggling-sign bookkeeping.

A basic unit is an N-pulse block of duration ``t_p``; repeated units form a
periodic schedule, and a "random" schedule draws pulse arrivals as a
homogeneous Poisson process.  Pulses are ideal instantaneous sigma_x
rotations, so inside a unit the toggling sign is f(t) = (-1)^i between the
i-th and (i+1)-th pulse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulse arrival times inside a basic unit of duration t_p."""

    t_p: float
    times: tuple
    label: str = "custom"

    def __post_init__(self):
        if self.t_p <= 0:
            raise ValueError("t_p must be positive")
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        arr = np.asarray(times)
        if arr.size:
            if np.any(arr <= 0) or np.any(arr >= self.t_p):
                raise ValueError("pulse times must lie strictly inside (0, t_p)")
            if np.any(np.diff(arr) <= 0):
                raise ValueError("pulse times must be strictly increasing")

    @property
    def n_pulses(self) -> int:
        return len(self.times)

    @property
    def tau_bar(self) -> float:
        """Average pulse interval t_p / N."""
        if not self.times:
            return np.inf
        return self.t_p / len(self.times)

    @property
    def density(self) -> float:
        """Average pulse density N / t_p."""
        return len(self.times) / self.t_p

    @property
    def normalized_times(self) -> np.ndarray:
        return np.asarray(self.times) / self.t_p

    def segment_bounds(self) -> np.ndarray:
        return np.concatenate(([0.0], self.times, [self.t_p]))

    def segment_signs(self) -> np.ndarray:
        return (-1.0) ** np.arange(len(self.times) + 1)

    def rescaled(self, t_p: float) -> "PulseSequence":
        return PulseSequence(t_p, tuple(self.normalized_times * t_p), self.label)


def toggling_sign(seq: PulseSequence, t: float) -> int:
    """f(t) = (-1)^i with i the number of pulses at or before t; f(0) = +1."""
    if t < 0 or t > seq.t_p:
        raise ValueError(f"time {t} outside [0, {seq.t_p}]")
    i = int(np.searchsorted(seq.times, t, side="right"))
    return 1 if i % 2 == 0 else -1


def no_pulse_unit(t_p: float) -> PulseSequence:
    return PulseSequence(t_p, (), "none")


def cpmg_unit(t_p: float) -> PulseSequence:
    """Symmetric two-pulse unit with pulses at t_p/4 and 3 t_p/4."""
    return PulseSequence(t_p, (0.25 * t_p, 0.75 * t_p), "cpmg")


def udd_unit(n_pulses: int, t_p: float) -> PulseSequence:
    """Uhrig unit: pulse times t_p * sin^2(pi j / (2N + 2)), j = 1..N."""
    if n_pulses < 1:
        raise ValueError("UDD needs at least one pulse")
    j = np.arange(1, n_pulses + 1)
    times = np.sin(np.pi * j / (2 * n_pulses + 2)) ** 2 * t_p
    return PulseSequence(t_p, tuple(times), f"udd{n_pulses}")


def _cdd_numerators(order: int) -> set:
    # Pulse times as numerators over 2**level; concatenation doubles the
    # denominator, inserts a mid pulse and an end pulse, and coincident pulse
    # pairs cancel (XOR on the set).
    def toggle(s: set, k: int):
        if k in s:
            s.remove(k)
        else:
            s.add(k)

    current: set = set()
    for level in range(1, order + 1):
        grown: set = set()
        for k in current:
            toggle(grown, k)
        toggle(grown, 2 ** (level - 1))
        for k in current:
            toggle(grown, k + 2 ** (level - 1))
        toggle(grown, 2**level)
        current = grown
    return current


def cdd_unit(order: int, t_p: float) -> PulseSequence:
    """Concatenated unit built by recursive halving.

    Each concatenation level embeds two copies of the previous level and adds
    a mid-unit and an end-of-unit pulse; coincident pulse pairs cancel and a
    pulse landing exactly on the unit boundary is dropped (it would merge with
    the start of the next repetition).  This construction gives 5 pulses at
    order 3 and 10 pulses at order 4.
    """
    if order < 1:
        raise ValueError("concatenation order must be >= 1")
    if order > 20:
        raise ValueError("concatenation order > 20 not supported")
    numerators = _cdd_numerators(order)
    numerators.discard(2**order)
    scale = t_p / 2**order
    times = tuple(k * scale for k in sorted(numerators))
    return PulseSequence(t_p, times, f"cdd{order}")


def custom_unit(normalized_times, t_p: float, label: str = "custom") -> PulseSequence:
    """Unit from explicit normalized times in (0, 1)."""
    arr = np.asarray(list(normalized_times), dtype=float)
    if arr.size and (np.any(arr <= 0) or np.any(arr >= 1)):
        raise ValueError("normalized times must lie strictly inside (0, 1)")
    return PulseSequence(t_p, tuple(np.sort(arr) * t_p), label)


def sequence_from_tag(tag: str, t_p: float) -> PulseSequence:
    """Resolve a sequence family tag: none, cpmg, udd<N> or cdd<order>."""
    tag = tag.strip().lower()
    if tag == "none":
        return no_pulse_unit(t_p)
    if tag == "cpmg":
        return cpmg_unit(t_p)
    if tag.startswith("udd"):
        return udd_unit(int(tag[3:]), t_p)
    if tag.startswith("cdd"):
        return cdd_unit(int(tag[3:]), t_p)
    raise ValueError(
        f"unknown sequence tag {tag!r} (expected none, cpmg, udd<N> or cdd<order>)"
    )


@dataclass(frozen=True)
class Schedule:
    """Either l repetitions of a basic unit or a random pulse stream."""

    kind: str
    unit: Optional[PulseSequence] = None
    repetitions: Optional[int] = None
    times: Optional[tuple] = None
    nbar: Optional[float] = None
    duration: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind == "periodic":
            if self.unit is None or self.repetitions is None or self.repetitions < 1:
                raise ValueError("periodic schedule needs a unit and repetitions >= 1")
        elif self.kind == "random":
            if self.times is None or self.duration is None:
                raise ValueError("random schedule needs times and a duration")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @property
    def total_duration(self) -> float:
        if self.kind == "periodic":
            return self.unit.t_p * self.repetitions
        return self.duration


def repeat(unit: PulseSequence, repetitions: int) -> Schedule:
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    return Schedule(kind="periodic", unit=unit, repetitions=repetitions)


def random_schedule(nbar: float, total_duration: float, seed: int) -> Schedule:
    """Poisson pulse stream of rate nbar over [0, total_duration]."""
    if nbar <= 0:
        raise ValueError("pulse density must be positive")
    if total_duration <= 0:
        raise ValueError("total duration must be positive")
    rng = np.random.default_rng(seed)
    mean_count = nbar * total_duration
    times = []
    t = 0.0
    block = max(16, int(mean_count + 10 * np.sqrt(mean_count) + 10))
    while t < total_duration:
        gaps = rng.exponential(1.0 / nbar, size=block)
        for g in gaps:
            t += g
            if t >= total_duration:
                break
            times.append(t)
    return Schedule(
        kind="random",
        times=tuple(times),
        nbar=float(nbar),
        duration=float(total_duration),
        seed=int(seed),
    )


def flatten(schedule: Schedule) -> np.ndarray:
    """Global pulse times of the schedule."""
    if schedule.kind == "random":
        return np.asarray(schedule.times)
    unit_times = np.asarray(schedule.unit.times)
    shifts = np.arange(schedule.repetitions) * schedule.unit.t_p
    return (unit_times[None, :] + shifts[:, None]).ravel()


def cumulative_sign(times, t: float) -> int:
    """(-1)^(number of pulses at or before t) for a flat global time list."""
    i = int(np.searchsorted(np.asarray(times), t, side="right"))
    return 1 if i % 2 == 0 else -1


def schedule_segments(schedule: Schedule):
    """(sign, duration) segments of the whole schedule in temporal order.

    Periodic schedules restart at +1 every unit (each repetition applies the
    identical basic block); random streams toggle cumulatively.
    """
    if schedule.kind == "periodic":
        unit = schedule.unit
        bounds = unit.segment_bounds()
        widths = np.diff(bounds)
        signs = unit.segment_signs()
        out = []
        for _ in range(schedule.repetitions):
            out.extend((int(s), float(w)) for s, w in zip(signs, widths))
        return out
    edges = np.concatenate(([0.0], np.asarray(schedule.times), [schedule.duration]))
    widths = np.diff(edges)
    return [(1 if i % 2 == 0 else -1, float(w)) for i, w in enumerate(widths)]
