"""
Drive schedule.

Every drive r_k is a sequence of move groups. A move group ramps r_k up
with the bump profile over one time unit, holds it on a plateau, and ramps
it down again over one time unit. Amplitudes are fixed per move kind so
that the plateau length follows from the required integral.
"""

import bisect
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
import sympy
from scipy.special import expit, logsumexp

from toruscascade.chain import MoveKind, MoveSpec
from toruscascade.errors import BetaUnderflowError, ScheduleError
from toruscascade.lattice import FrequencyFamily

BETA_FLOOR = 1e-300

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_PANELS = 8


@lru_cache(maxsize=None)
def _bump_derivative(order: int):
    t = sympy.Symbol("t")
    phi = 1 / (1 + sympy.exp(1 / t - 1 / (1 - t)))
    return sympy.lambdify(t, sympy.diff(phi, t, order), "numpy")


class BumpProfile:
    """
    Smooth step phi(t) = g(t) / (g(t) + g(1 - t)), g(t) = exp(-1/t).

    phi vanishes for t <= 0, equals 1 for t >= 1 and satisfies
    phi(t) + phi(1 - t) = 1, so alpha = int_0^1 phi = 1/2.
    """

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0.0) & (t < 1.0)
        u = np.where(inside, t, 0.5)
        with np.errstate(divide="ignore", over="ignore"):
            values = expit(1.0 / (1.0 - u) - 1.0 / u)
        return np.where(inside, values, np.where(t >= 1.0, 1.0, 0.0))

    def derivative(self, t, order: int = 1):
        """
        order-th derivative of phi.

        Evaluated on the upper half of (0, 1) only, using
        phi^(j)(t) = (-1)^(j+1) phi^(j)(1 - t) for the lower half.
        """
        if order == 0:
            return self.phi(t)
        t = np.asarray(t, dtype=float)
        inside = (t > 0.0) & (t < 1.0)
        upper = t >= 0.5
        u = np.where(inside, np.where(upper, t, 1.0 - t), 0.75)
        with np.errstate(all="ignore"):
            raw = np.asarray(_bump_derivative(order)(u), dtype=float) * np.ones_like(u)
        raw = np.nan_to_num(raw, nan=0.0, posinf=0.0, neginf=0.0)
        sign = np.where(upper, 1.0, (-1.0) ** (order + 1))
        return np.where(inside, sign * raw, 0.0)

    def _integral_from_zero(self, t: np.ndarray) -> np.ndarray:
        # composite Gauss-Legendre on [0, t]
        edges = t[..., None] * np.linspace(0.0, 1.0, _GL_PANELS + 1)
        a, b = edges[..., :-1], edges[..., 1:]
        half = 0.5 * (b - a)
        u = half[..., None] * _GL_NODES + (0.5 * (a + b))[..., None]
        return np.sum(half[..., None] * _GL_WEIGHTS * self.phi(u), axis=(-2, -1))

    def cumulative(self, t):
        """Phi(t) = int_0^t phi."""
        t = np.asarray(t, dtype=float)
        clipped = np.clip(t, 0.0, 1.0)
        lower = np.minimum(clipped, 1.0 - clipped)
        base = self._integral_from_zero(lower)
        inner = np.where(clipped <= 0.5, base, clipped - 0.5 + base)
        return np.where(t >= 1.0, t - 0.5, np.where(t <= 0.0, 0.0, inner))

    @property
    def alpha(self) -> float:
        return float(self.cumulative(1.0))

    def max_slope(self) -> float:
        grid = np.linspace(0.0, 1.0, 2001)
        return float(np.max(np.abs(self.derivative(grid, 1))))


@lru_cache(maxsize=1)
def default_bump() -> BumpProfile:
    return BumpProfile()


def log_beta(l_norm: float) -> float:
    """log of |l|^-|l|."""
    return -l_norm * math.log(l_norm)


def beta_paper(l_norm: float) -> float:
    """
    Amplitude scale |l|^-|l|.

    Raises:
        ValueError: If l_norm <= 1
        BetaUnderflowError: If the value is below 1e-300
    """
    if l_norm <= 1.0:
        raise ValueError(f"|l_k| must exceed 1, got {l_norm}")
    value = log_beta(l_norm)
    if value < math.log(BETA_FLOOR):
        raise BetaUnderflowError(
            f"|l_k|^-|l_k| = exp({value:.1f}) underflows binary64 (|l_k| = {l_norm:.3f}); "
            "use scaled beta mode or the log-space bounds"
        )
    return math.exp(value)


@dataclass(frozen=True)
class BetaMode:
    """paper: beta_k = |l_k|^-|l_k|; scaled: beta_k = base * ratio^k."""

    kind: str = "scaled"
    base: float = 0.05
    ratio: float = 0.5

    def __post_init__(self):
        if self.kind not in ("scaled", "paper"):
            raise ValueError(f"Unknown beta mode: {self.kind}")

    def betas(self, family: FrequencyFamily, count: int) -> List[float]:
        if self.kind == "paper":
            return [beta_paper(family.l[k].norm()) for k in range(count)]
        return [self.base * self.ratio ** k for k in range(count)]

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "base": self.base, "ratio": self.ratio}


class Phase(Enum):
    RAMP_UP = "ramp_up"
    PLATEAU = "plateau"
    RAMP_DOWN = "ramp_down"


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    drive_index: int
    amplitude: float
    phase: Phase
    move: MoveSpec

    def value(self, t):
        return self.derivative(t, 0)

    def derivative(self, t, order: int = 1):
        """order-th time derivative of r_k at t inside the segment."""
        bump = default_bump()
        tau = np.asarray(t, dtype=float) - self.t_start
        if self.phase is Phase.RAMP_UP:
            return self.amplitude * bump.derivative(tau, order)
        if self.phase is Phase.RAMP_DOWN:
            return self.amplitude * (-1.0) ** order * bump.derivative(1.0 - tau, order)
        return self.amplitude * np.ones_like(tau) if order == 0 else np.zeros_like(tau)

    def integral(self, t: Optional[float] = None) -> float:
        """int of r_k from t_start to min(t, t_end)."""
        end = self.t_end if t is None else min(max(t, self.t_start), self.t_end)
        tau = end - self.t_start
        bump = default_bump()
        if self.phase is Phase.RAMP_UP:
            return self.amplitude * float(bump.cumulative(tau))
        if self.phase is Phase.RAMP_DOWN:
            return self.amplitude * (bump.alpha - float(bump.cumulative(1.0 - tau)))
        return self.amplitude * tau

    def to_dict(self) -> Dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "drive_index": self.drive_index,
            "amplitude": self.amplitude,
            "phase": self.phase.value,
            "move": self.move.kind.value,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Segment":
        return cls(
            t_start=float(data["t_start"]),
            t_end=float(data["t_end"]),
            drive_index=int(data["drive_index"]),
            amplitude=float(data["amplitude"]),
            phase=Phase(data["phase"]),
            move=MoveSpec(MoveKind(data["move"]), int(data["drive_index"])),
        )


AMPLITUDE_NOTE = (
    "Amplitudes are required_integral / alpha * beta_k for every move kind; "
    "a Move1 amplitude of 7pi/(8 sqrt2 alpha) beta_k would halve the "
    "Move1 integral and is not used."
)


@dataclass
class Schedule:
    segments: List[Segment]
    beta: List[float]
    t_k: List[float]
    T: List[float]
    beta_mode: BetaMode
    notes: List[str] = field(default_factory=lambda: [AMPLITUDE_NOTE])

    def __post_init__(self):
        self._starts = [seg.t_start for seg in self.segments]

    @property
    def cycles(self) -> int:
        return len(self.T) - 1

    @property
    def horizon(self) -> float:
        return self.T[-1]

    def segment_at(self, t: float) -> Optional[Segment]:
        i = bisect.bisect_right(self._starts, t) - 1
        if i < 0:
            return None
        seg = self.segments[i]
        return seg if t < seg.t_end else None

    def boundaries(self) -> List[float]:
        if not self.segments:
            return [0.0]
        return [seg.t_start for seg in self.segments] + [self.segments[-1].t_end]

    def move_groups(self) -> List[List[Segment]]:
        return [self.segments[i:i + 3] for i in range(0, len(self.segments), 3)]

    def to_dict(self) -> Dict:
        return {
            "mode": self.beta_mode.to_dict(),
            "beta": list(self.beta),
            "t_k": list(self.t_k),
            "T": list(self.T),
            "segments": [seg.to_dict() for seg in self.segments],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Dict) -> "Schedule":
        mode = data["mode"]
        return cls(
            segments=[Segment.from_dict(s) for s in data["segments"]],
            beta=[float(b) for b in data["beta"]],
            t_k=[float(t) for t in data["t_k"]],
            T=[float(t) for t in data["T"]],
            beta_mode=BetaMode(mode["kind"], float(mode["base"]), float(mode["ratio"])),
            notes=list(data.get("notes", [])),
        )


def _move_group(t0: float, move: MoveSpec, beta: float, alpha: float) -> Tuple[List[Segment], float]:
    amplitude = move.required_integral / alpha * beta
    plateau = move.required_integral / amplitude - 2.0 * alpha
    if plateau < 0.0:
        raise ScheduleError(
            f"Negative plateau {plateau:.3g} for drive {move.drive_index} "
            f"(beta = {beta:.3g}); use a smaller beta scale"
        )
    cuts = [t0, t0 + 1.0, t0 + 1.0 + plateau, t0 + 2.0 + plateau]
    phases = [Phase.RAMP_UP, Phase.PLATEAU, Phase.RAMP_DOWN]
    segments = [
        Segment(cuts[i], cuts[i + 1], move.drive_index, amplitude, phases[i], move)
        for i in range(3)
    ]
    return segments, cuts[-1]


def build_schedule(family: FrequencyFamily, cycles: int, beta_mode: BetaMode) -> Schedule:
    """
    Lay out `cycles` cascade cycles.

    Cycle n runs Move1 on r_n, Move2 on r_{n+1} and Move3 on r_n, and ends
    at T_{n+1} = T_n + 6 + 2 t_n + t_{n+1}.

    Raises:
        ScheduleError: If cycles is out of range or a plateau would be negative
        BetaUnderflowError: If a paper-mode beta is not representable
    """
    if cycles < 0:
        raise ScheduleError(f"cycles must be non-negative, got {cycles}")
    if cycles > max(family.K - 1, 0):
        raise ScheduleError(f"cycles = {cycles} needs K >= {cycles + 1}, family has K = {family.K}")

    alpha = default_bump().alpha
    beta = beta_mode.betas(family, cycles + 1) if cycles else []
    t_k = [alpha * (1.0 / b - 2.0) for b in beta]

    segments: List[Segment] = []
    T = [0.0]
    t = 0.0
    for n in range(cycles):
        for kind, k in ((MoveKind.MOVE1, n), (MoveKind.MOVE2, n + 1), (MoveKind.MOVE3, n)):
            group, t = _move_group(t, MoveSpec(kind, k), beta[k], alpha)
            segments.extend(group)
        T.append(t)

    return Schedule(segments=segments, beta=beta, t_k=t_k, T=T, beta_mode=beta_mode)


def active_drive(schedule: Schedule, t: float) -> Optional[Tuple[int, float, float]]:
    """(k, r_k(t), r_k'(t)) for the drive lit at t, or None."""
    seg = schedule.segment_at(t)
    if seg is None:
        return None
    return seg.drive_index, float(seg.value(t)), float(seg.derivative(t, 1))


def drive_integral(schedule: Schedule, k: int, t: float) -> float:
    """int_0^t r_k."""
    return sum(seg.integral(t) for seg in schedule.segments if seg.drive_index == k and seg.t_start < t)


def total_drive_integral(schedule: Schedule, t: float) -> float:
    """int_0^t of the active drive, summed over all k."""
    return sum(seg.integral(t) for seg in schedule.segments if seg.t_start < t)


def derivative_variation(schedule: Schedule, k: int) -> float:
    """int |r_k'| over the whole schedule; each monotone ramp contributes its amplitude."""
    return sum(
        seg.amplitude
        for seg in schedule.segments
        if seg.drive_index == k and seg.phase is not Phase.PLATEAU
    )


def log_plateaus(family: FrequencyFamily, n_max: int) -> np.ndarray:
    """Paper-mode log t_k for k = 0..n_max, t_k = alpha (beta_k^-1 - 2)."""
    alpha = default_bump().alpha
    out = []
    for k in range(n_max + 1):
        lb = log_beta(family.l[k].norm())
        out.append(math.log(alpha) - lb + math.log1p(-2.0 * math.exp(lb)))
    return np.array(out)


def log_cycle_boundaries(family: FrequencyFamily, n_max: int) -> np.ndarray:
    """
    Paper-mode log T_n for n = 0..n_max (log T_0 = -inf).

    T_n = 6n + sum_{j<n} (2 t_j + t_{j+1}) is evaluated by log-sum-exp.
    """
    if n_max > family.K:
        raise ScheduleError(f"n_max = {n_max} exceeds K = {family.K}")
    log_t = log_plateaus(family, n_max)
    out = [-math.inf]
    for n in range(1, n_max + 1):
        terms = [math.log(6.0 * n)]
        terms += [math.log(2.0) + log_t[j] for j in range(n)]
        terms += [log_t[j + 1] for j in range(n)]
        out.append(float(logsumexp(terms)))
    return np.array(out)
