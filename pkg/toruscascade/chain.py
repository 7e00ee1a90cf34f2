"""
Reduced chain dynamics.

When a single drive r_k is lit, the triple (p_{k+1}, p_k, s_k) evolves by
exp((int r_k) A) with A antisymmetric, every other coordinate is frozen.
The three moves below chain these rotations into an index shift.
"""

import bisect
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

SQRT2 = math.sqrt(2.0)

A_MATRIX = np.array(
    [
        [0.0, 1.0, 0.0],
        [-1.0, 0.0, -1.0],
        [0.0, 1.0, 0.0],
    ]
)


class MoveKind(Enum):
    MOVE1 = "move1"
    MOVE2 = "move2"
    MOVE3 = "move3"


REQUIRED_INTEGRALS = {
    MoveKind.MOVE1: 7.0 * math.pi / (4.0 * SQRT2),
    MoveKind.MOVE2: math.pi / (2.0 * SQRT2),
    MoveKind.MOVE3: math.pi / SQRT2,
}


@dataclass(frozen=True)
class MoveSpec:
    kind: MoveKind
    drive_index: int

    @property
    def required_integral(self) -> float:
        return REQUIRED_INTEGRALS[self.kind]


@dataclass
class ChainState:
    """
    Real chain coordinates.

    p has K+2 entries (p_k = a_{m_k}), s has K+1 entries (s_k = a_{m_k - l_k}).
    """

    p: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if self.p.shape[-1] != self.s.shape[-1] + 1:
            raise ValueError(f"p needs one more entry than s, got {self.p.shape} and {self.s.shape}")

    @property
    def K(self) -> int:
        return self.s.shape[-1] - 1

    def mass(self) -> float:
        return float(np.sum(self.p ** 2) + np.sum(self.s ** 2))

    def copy(self) -> "ChainState":
        return ChainState(self.p.copy(), self.s.copy())

    def triple(self, k: int) -> np.ndarray:
        return np.array([self.p[k + 1], self.p[k], self.s[k]])

    def with_triple(self, k: int, values: Sequence[float]) -> "ChainState":
        out = self.copy()
        out.p[k + 1], out.p[k], out.s[k] = values
        return out

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.s])

    @classmethod
    def from_vector(cls, vec: np.ndarray, K: int) -> "ChainState":
        return cls(vec[: K + 2], vec[K + 2:])


def initial_state(K: int) -> ChainState:
    """Start configuration (p_1, p_0, s_0) = (1/2, -1/sqrt2, 1/2)."""
    state = ChainState(np.zeros(K + 2), np.zeros(K + 1))
    return state.with_triple(0, (0.5, -1.0 / SQRT2, 0.5))


def exp_tA(T):
    """
    Closed form of exp(T A).

    Args:
        T: Scalar or array of integrals

    Returns:
        (3, 3) matrix, or (..., 3, 3) for array input
    """
    T = np.asarray(T, dtype=float)
    c = np.cos(T * SQRT2)
    sn = np.sin(T * SQRT2) / SQRT2
    out = np.empty(T.shape + (3, 3))
    out[..., 0, 0] = 0.5 * (c + 1.0)
    out[..., 0, 1] = sn
    out[..., 0, 2] = 0.5 * (c - 1.0)
    out[..., 1, 0] = -sn
    out[..., 1, 1] = c
    out[..., 1, 2] = -sn
    out[..., 2, 0] = 0.5 * (c - 1.0)
    out[..., 2, 1] = sn
    out[..., 2, 2] = 0.5 * (c + 1.0)
    return out


def apply_move(triple: Sequence[float], move: MoveSpec) -> np.ndarray:
    """Apply a full move to (p_{k+1}, p_k, s_k)."""
    return exp_tA(move.required_integral) @ np.asarray(triple, dtype=float)


def chain_rhs(state: ChainState, r: Sequence[float]) -> ChainState:
    """
    Right-hand side of the chain system.

    dp_k = p_{k-1} r_{k-1} - p_{k+1} r_k - s_k r_k  (r_k = 0 for k > K)
    ds_k = p_k r_k
    """
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != state.s.shape[-1]:
        raise ValueError(f"Expected {state.s.shape[-1]} drive values, got {r.shape[-1]}")
    p, s = state.p, state.s
    dp = np.zeros_like(p)
    dp[1:] += p[:-1] * r
    dp[:-1] -= p[1:] * r + s * r
    ds = p[:-1] * r
    return ChainState(dp, ds)


class ChainPropagator:
    """
    Exact solution of the chain system along a schedule.

    States at segment starts are cached, so sampling many times only costs
    one 3x3 product per sample.
    """

    def __init__(self, schedule, initial: ChainState):
        self.schedule = schedule
        self.initial = initial.copy()
        self._starts = [seg.t_start for seg in schedule.segments]
        self._states: List[ChainState] = []
        state = self.initial
        for seg in schedule.segments:
            self._states.append(state)
            if seg.drive_index > state.K:
                raise ValueError(
                    f"Drive {seg.drive_index} exceeds the chain size K={state.K}"
                )
            rotated = exp_tA(seg.integral()) @ state.triple(seg.drive_index)
            state = state.with_triple(seg.drive_index, rotated)
        self.final = state

    def state_at(self, t: float) -> ChainState:
        if t < 0:
            raise ValueError(f"t must be non-negative, got {t}")
        i = bisect.bisect_right(self._starts, t) - 1
        if i < 0:
            return self.initial.copy()
        seg = self.schedule.segments[i]
        if t >= seg.t_end:
            return self.final.copy()
        start = self._states[i]
        rotated = exp_tA(seg.integral(t)) @ start.triple(seg.drive_index)
        return start.with_triple(seg.drive_index, rotated)

    def sample(self, times: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate the chain at many times.

        Returns:
            (P, S) arrays of shape (len(times), K+2) and (len(times), K+1)
        """
        P, S = [], []
        for t in times:
            state = self.state_at(float(t))
            P.append(state.p)
            S.append(state.s)
        return np.array(P), np.array(S)


def propagate_exact(schedule, initial: ChainState, t: float) -> ChainState:
    """Exact chain state at time t."""
    return ChainPropagator(schedule, initial).state_at(t)


def chain_trajectory(schedule, initial: ChainState, times: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    return ChainPropagator(schedule, initial).sample(times)
