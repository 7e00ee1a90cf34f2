"""
Spectral simulation of the full, resonant and perturbation systems.

States live on a finite truncation set of Z^2. The full system couples
a_n to a_m whenever n - m = +-l_k for the lit drive k, with phases
exp(-i omega^+- t) computed from exact integers:

    da_n/dt = sum_m a_m v_{n-m} (exp(-i w+ t) - exp(-i w- t))

The resonant system keeps only the pairs with a vanishing phase. The
perturbation system is the full system for c = b - a plus the
non-resonant forcing carried by the exact chain solution a(t).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad_vec, solve_ivp, trapezoid

from toruscascade.chain import ChainPropagator, ChainState, initial_state
from toruscascade.errors import IntegrationError, LatticeOverflowError
from toruscascade.lattice import (
    ChainNode,
    FrequencyFamily,
    LatticeVec,
    chain_nodes,
    omega_minus,
    omega_plus,
)
from toruscascade.potential import PHASE_PRODUCT_LIMIT, PotentialSpec, reduce_phase
from toruscascade.schedule import Schedule

OMEGA_LIMIT = int(PHASE_PRODUCT_LIMIT)


class RhsKind(Enum):
    FS = "fs"
    RFS = "rfs"
    PERT = "pert"


class PairTable(NamedTuple):
    """Interactions of one drive: target and source indices with both phases."""

    target: np.ndarray
    source: np.ndarray
    omega_plus: np.ndarray
    omega_minus: np.ndarray


class LeakTable(NamedTuple):
    """Interactions of one drive whose target lies outside the set."""

    target: np.ndarray  # index into the drive's list of outside nodes
    source: np.ndarray
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    size: int


def _phase_array(values: List[int]) -> np.ndarray:
    for w in values:
        if abs(w) >= OMEGA_LIMIT:
            raise LatticeOverflowError(f"Phase {w} is not exactly representable")
    return np.array(values, dtype=float)


class TruncationSet:
    """
    Finite node set: the chain support plus shell_depth rounds of n -> n +- l_k.

    Nodes are ordered deterministically: chain nodes in chain order, then
    each shell sorted by coordinates.
    """

    def __init__(self, family: FrequencyFamily, nodes: Sequence[LatticeVec], drives: Sequence[int], shell_depth: int):
        self.family = family
        self.nodes = list(nodes)
        self.drives = sorted(set(drives))
        self.shell_depth = shell_depth
        self.index: Dict[LatticeVec, int] = {v: i for i, v in enumerate(self.nodes)}
        self.chain = chain_nodes(family)
        self._pairs: Dict[int, PairTable] = {}
        self._leaks: Dict[int, LeakTable] = {}

    @classmethod
    def build(cls, family: FrequencyFamily, drives: Iterable[int], shell_depth: int = 2) -> "TruncationSet":
        drives = sorted(set(drives))
        nodes = list(chain_nodes(family).values())
        seen = set(nodes)
        frontier = list(nodes)
        for _ in range(shell_depth):
            shell = set()
            for n in frontier:
                for k in drives:
                    for step in (family.l[k], -family.l[k]):
                        candidate = n + step
                        if candidate not in seen:
                            shell.add(candidate)
            ordered = sorted(shell, key=lambda v: (v.x, v.y))
            nodes.extend(ordered)
            seen.update(ordered)
            frontier = ordered
        return cls(family, nodes, drives, shell_depth)

    def __len__(self) -> int:
        return len(self.nodes)

    def chain_index(self, label: ChainNode) -> int:
        return self.index[self.chain[label]]

    def pairs(self, k: int) -> PairTable:
        if k not in self._pairs:
            self._build_tables(k)
        return self._pairs[k]

    def leaks(self, k: int) -> LeakTable:
        if k not in self._leaks:
            self._build_tables(k)
        return self._leaks[k]

    def _build_tables(self, k: int):
        lk = self.family.l[k]
        tgt, src, wp, wm = [], [], [], []
        ltgt, lsrc, lwp, lwm = [], [], [], []
        outside: Dict[LatticeVec, int] = {}
        for j, m in enumerate(self.nodes):
            for step in (lk, -lk):
                n = m + step
                i = self.index.get(n)
                if i is None:
                    ltgt.append(outside.setdefault(n, len(outside)))
                    lsrc.append(j)
                    lwp.append(omega_plus(m, n))
                    lwm.append(omega_minus(m, n))
                else:
                    tgt.append(i)
                    src.append(j)
                    wp.append(omega_plus(m, n))
                    wm.append(omega_minus(m, n))
        self._pairs[k] = PairTable(
            np.array(tgt, dtype=int), np.array(src, dtype=int), _phase_array(wp), _phase_array(wm)
        )
        self._leaks[k] = LeakTable(
            np.array(ltgt, dtype=int), np.array(lsrc, dtype=int), _phase_array(lwp), _phase_array(lwm), len(outside)
        )

    def chain_to_vector(self, state: ChainState) -> np.ndarray:
        out = np.zeros(len(self.nodes), dtype=complex)
        for k, value in enumerate(state.p):
            out[self.chain_index(ChainNode("p", k))] = value
        for k, value in enumerate(state.s):
            out[self.chain_index(ChainNode("s", k))] = value
        return out

    def chain_positions(self) -> Tuple[np.ndarray, np.ndarray]:
        K = self.family.K
        p = np.array([self.chain_index(ChainNode("p", k)) for k in range(K + 2)])
        s = np.array([self.chain_index(ChainNode("s", k)) for k in range(K + 1)])
        return p, s


@dataclass
class SpectralState:
    trunc: TruncationSet
    values: np.ndarray
    t: float = 0.0

    @property
    def coeffs(self) -> Dict[LatticeVec, complex]:
        return {n: complex(v) for n, v in zip(self.trunc.nodes, self.values) if v != 0}

    @classmethod
    def from_coeffs(cls, trunc: TruncationSet, coeffs: Dict[LatticeVec, complex], t: float = 0.0) -> "SpectralState":
        values = np.zeros(len(trunc), dtype=complex)
        for n, v in coeffs.items():
            if n not in trunc.index:
                raise ValueError(f"Node {n} is outside the truncation set")
            values[trunc.index[n]] = v
        return cls(trunc, values, t)

    @classmethod
    def from_chain(cls, trunc: TruncationSet, state: ChainState, t: float = 0.0) -> "SpectralState":
        return cls(trunc, trunc.chain_to_vector(state), t)

    def mass(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)))


def _scatter(target: np.ndarray, contributions: np.ndarray, size: int) -> np.ndarray:
    return (
        np.bincount(target, weights=contributions.real, minlength=size)
        + 1j * np.bincount(target, weights=contributions.imag, minlength=size)
    )


def _kernel(table, r: float, t: float) -> np.ndarray:
    return r * (np.exp(-1j * reduce_phase(table.omega_plus, t)) - np.exp(-1j * reduce_phase(table.omega_minus, t)))


def _resonant_kernel(table, r: float) -> np.ndarray:
    return r * ((table.omega_plus == 0).astype(float) - (table.omega_minus == 0).astype(float))


def _forcing_kernel(table, r: float, t: float) -> np.ndarray:
    plus = np.where(table.omega_plus != 0, np.exp(-1j * reduce_phase(table.omega_plus, t)), 0.0)
    minus = np.where(table.omega_minus != 0, np.exp(-1j * reduce_phase(table.omega_minus, t)), 0.0)
    return r * (plus - minus)


def fs_rhs(state: SpectralState, spec: PotentialSpec, trunc: TruncationSet) -> np.ndarray:
    """Derivative of the full system at state.t; contributions leaving trunc are dropped."""
    seg = spec.schedule.segment_at(state.t)
    if seg is None:
        return np.zeros(len(trunc), dtype=complex)
    table = trunc.pairs(seg.drive_index)
    kernel = _kernel(table, float(seg.value(state.t)), state.t)
    return _scatter(table.target, kernel * state.values[table.source], len(trunc))


def rfs_rhs(state: SpectralState, spec: PotentialSpec, trunc: TruncationSet) -> np.ndarray:
    """Derivative of the resonant system: + resonances add a_m v, - resonances subtract it."""
    seg = spec.schedule.segment_at(state.t)
    if seg is None:
        return np.zeros(len(trunc), dtype=complex)
    table = trunc.pairs(seg.drive_index)
    kernel = _resonant_kernel(table, float(seg.value(state.t)))
    return _scatter(table.target, kernel * state.values[table.source], len(trunc))


def pert_rhs(state: SpectralState, spec: PotentialSpec, trunc: TruncationSet, resonant: ChainPropagator) -> np.ndarray:
    """Full-system kernel on c plus the non-resonant forcing from the exact chain a(t)."""
    seg = spec.schedule.segment_at(state.t)
    if seg is None:
        return np.zeros(len(trunc), dtype=complex)
    table = trunc.pairs(seg.drive_index)
    r = float(seg.value(state.t))
    a = trunc.chain_to_vector(resonant.state_at(state.t))
    linear = _kernel(table, r, state.t) * state.values[table.source]
    forcing = _forcing_kernel(table, r, state.t) * a[table.source]
    return _scatter(table.target, linear + forcing, len(trunc))


def leakage_rate(state: SpectralState, spec: PotentialSpec, trunc: TruncationSet, kind: RhsKind = RhsKind.FS) -> float:
    """l^2 norm of the contributions dropped at the truncation boundary."""
    seg = spec.schedule.segment_at(state.t)
    if seg is None:
        return 0.0
    table = trunc.leaks(seg.drive_index)
    if table.size == 0:
        return 0.0
    r = float(seg.value(state.t))
    if kind is RhsKind.RFS:
        kernel = _resonant_kernel(table, r)
    else:
        kernel = _kernel(table, r, state.t)
    dropped = _scatter(table.target, kernel * state.values[table.source], table.size)
    return float(np.linalg.norm(dropped))


@dataclass
class Trajectory:
    kind: RhsKind
    trunc: TruncationSet
    times: np.ndarray
    states: np.ndarray  # (len(times), len(trunc))
    leakage: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nfev: int = 0

    def state(self, i: int) -> SpectralState:
        return SpectralState(self.trunc, self.states[i], float(self.times[i]))

    def mass(self) -> np.ndarray:
        return np.sum(np.abs(self.states) ** 2, axis=1)

    def l1(self) -> np.ndarray:
        return np.sum(np.abs(self.states), axis=1)

    def leakage_summary(self) -> Dict[str, float]:
        if self.leakage.size == 0:
            return {"max_rate": 0.0, "integrated": 0.0}
        return {
            "max_rate": float(np.max(self.leakage)),
            "integrated": float(abs(trapezoid(self.leakage, self.times))) if len(self.times) > 1 else 0.0,
        }

    def to_frame(self) -> pd.DataFrame:
        return long_frame(self.trunc.nodes, self.times, self.states)


def long_frame(nodes: Sequence[LatticeVec], times: np.ndarray, states: np.ndarray) -> pd.DataFrame:
    """Long format: t, node_x, node_y, re, im."""
    states = np.asarray(states, dtype=complex).reshape(len(times), len(nodes))
    n_times, n_nodes = states.shape
    xs = np.array([v.x for v in nodes], dtype=np.int64)
    ys = np.array([v.y for v in nodes], dtype=np.int64)
    return pd.DataFrame(
        {
            "t": np.repeat(np.asarray(times, dtype=float), n_nodes),
            "node_x": np.tile(xs, n_times),
            "node_y": np.tile(ys, n_times),
            "re": states.real.ravel(),
            "im": states.imag.ravel(),
        }
    )


class SpectralProblem:
    """Binds a family, its schedule and a truncation set for integration."""

    def __init__(self, family: FrequencyFamily, schedule: Schedule, trunc: Optional[TruncationSet] = None, shell_depth: int = 2):
        self.family = family
        self.schedule = schedule
        self.spec = PotentialSpec(family, schedule)
        drives = sorted({seg.drive_index for seg in schedule.segments})
        self.trunc = trunc or TruncationSet.build(family, drives, shell_depth)
        self.resonant = ChainPropagator(schedule, initial_state(family.K))

    def rhs(self, kind: RhsKind):
        trunc, spec = self.trunc, self.spec

        def fun(t, y):
            state = SpectralState(trunc, y, t)
            if kind is RhsKind.FS:
                return fs_rhs(state, spec, trunc)
            if kind is RhsKind.RFS:
                return rfs_rhs(state, spec, trunc)
            return pert_rhs(state, spec, trunc, self.resonant)

        return fun

    def _pieces(self, t0: float, t1: float) -> List[Tuple[float, float]]:
        lo, hi = min(t0, t1), max(t0, t1)
        cuts = [lo] + [b for b in self.schedule.boundaries() if lo < b < hi] + [hi]
        pieces = list(zip(cuts[:-1], cuts[1:]))
        if t0 > t1:
            pieces = [(b, a) for a, b in reversed(pieces)]
        return pieces

    def integrate(
        self,
        kind: RhsKind,
        initial: SpectralState,
        t1: float,
        tol: float = 1e-10,
        sample_times: Optional[Sequence[float]] = None,
        track_leakage: bool = True,
    ) -> Trajectory:
        """
        Integrate from initial.t to t1 (backward when t1 < initial.t).

        Integration restarts at every segment boundary so that no step
        straddles a ramp corner. Outside the schedule the right-hand side
        vanishes and the state is carried unchanged.

        Raises:
            IntegrationError: If the integrator fails on a segment
        """
        t0 = initial.t
        forward = t1 >= t0
        if sample_times is None:
            sample_times = [t0, t1]
        samples = np.array(sorted(set(float(s) for s in sample_times), reverse=not forward))
        lo, hi = min(t0, t1), max(t0, t1)
        if samples.size and (samples.min() < lo or samples.max() > hi):
            raise ValueError(f"Sample times must lie in [{lo}, {hi}]")

        fun = self.rhs(kind)
        recorded: Dict[float, np.ndarray] = {}
        y = np.array(initial.values, dtype=complex)
        nfev = 0
        if t0 in samples:
            recorded[t0] = y.copy()
        for a, b in self._pieces(t0, t1):
            inside = [float(s) for s in samples if min(a, b) <= s <= max(a, b)]
            seg = self.schedule.segment_at(0.5 * (a + b))
            if seg is None or a == b:
                for s in inside:
                    recorded[s] = y.copy()
                continue
            direction = 1.0 if b >= a else -1.0
            t_eval = sorted(set(inside) | {b}, key=lambda s: direction * s)
            sol = solve_ivp(
                fun, (a, b), y, method="DOP853", rtol=0.1 * tol, atol=0.01 * tol, t_eval=t_eval,
            )
            if not sol.success:
                raise IntegrationError(
                    f"{kind.value} integration failed on [{min(a, b)}, {max(a, b)}] "
                    f"(drive {seg.drive_index}, {seg.phase.value}): {sol.message}"
                )
            nfev += sol.nfev
            for s, col in zip(sol.t, sol.y.T):
                if float(s) in inside:
                    recorded[float(s)] = col.copy()
            y = sol.y[:, -1].copy()

        times = np.array(sorted(recorded))
        states = np.array([recorded[s] for s in times])
        trajectory = Trajectory(kind, self.trunc, times, states, nfev=nfev)
        if track_leakage and kind is not RhsKind.PERT:
            trajectory.leakage = np.array(
                [leakage_rate(trajectory.state(i), self.spec, self.trunc, kind) for i in range(len(times))]
            )
        return trajectory

    def chain_reference(self, times: Sequence[float]) -> np.ndarray:
        """Exact resonant solution mapped onto the truncation set, one row per time."""
        return np.array([self.trunc.chain_to_vector(self.resonant.state_at(float(t))) for t in times])

    def previous_boundary(self, t: float) -> float:
        earlier = [b for b in self.schedule.boundaries() if b < t]
        return max(earlier) if earlier else 0.0


def integrate(problem: SpectralProblem, kind: RhsKind, initial: SpectralState, t1: float, tol: float = 1e-10, sample_times: Optional[Sequence[float]] = None) -> Trajectory:
    return problem.integrate(kind, initial, t1, tol=tol, sample_times=sample_times)


def fs_deviation(problem: SpectralProblem, tol: float = 1e-8, sample_times: Optional[Sequence[float]] = None) -> Tuple[Trajectory, pd.DataFrame]:
    """
    Forward full-system run from the resonant initial data, b(0) = a(0).

    Returns:
        The trajectory and a frame with t, deviation_l1 = ||b - a||_1,
        mass and leakage per sample
    """
    horizon = problem.schedule.horizon
    if sample_times is None:
        sample_times = np.linspace(0.0, horizon, 201)
    initial = SpectralState.from_chain(problem.trunc, problem.resonant.initial, 0.0)
    traj = problem.integrate(RhsKind.FS, initial, horizon, tol=tol, sample_times=sample_times)
    reference = problem.chain_reference(traj.times)
    frame = pd.DataFrame(
        {
            "t": traj.times,
            "deviation_l1": np.sum(np.abs(traj.states - reference), axis=1),
            "mass": traj.mass(),
            "leakage": traj.leakage,
        }
    )
    return traj, frame


def pert_solution(problem: SpectralProblem, N: int, tol: float = 1e-8, sample_times: Optional[Sequence[float]] = None, t_stop: float = 0.0) -> Trajectory:
    """
    Backward perturbation solution c^N with c^N(T_N) = 0.

    Raises:
        ValueError: If T_N is beyond the schedule
    """
    if N < 1 or N > problem.schedule.cycles:
        raise ValueError(f"N = {N} outside 1..{problem.schedule.cycles}")
    T_N = problem.schedule.T[N]
    if sample_times is None:
        sample_times = np.linspace(t_stop, T_N, 41)
    zero = SpectralState(problem.trunc, np.zeros(len(problem.trunc), dtype=complex), T_N)
    return problem.integrate(RhsKind.PERT, zero, t_stop, tol=tol, sample_times=sample_times)


def cauchy_check(problem: SpectralProblem, N_list: Sequence[int], t_check: float, tol: float = 1e-8) -> pd.DataFrame:
    """Pairwise l^1 distances of the backward solutions c^N at t_check."""
    N_list = sorted(set(N_list))
    values = {}
    for N in N_list:
        traj = pert_solution(problem, N, tol=tol, sample_times=[t_check, problem.schedule.T[N]], t_stop=t_check)
        values[N] = traj.states[0]
    return cauchy_table(values)


def cauchy_table(values: Dict[int, np.ndarray]) -> pd.DataFrame:
    """N, M, ||c^M - c^N||_1 and ||c^N||_1 for every pair N <= M."""
    N_list = sorted(values)
    rows = []
    for i, N in enumerate(N_list):
        for M in N_list[i:]:
            rows.append(
                {
                    "N": N,
                    "M": M,
                    "distance_l1": float(np.sum(np.abs(values[M] - values[N]))),
                    "norm_N_l1": float(np.sum(np.abs(values[N]))),
                }
            )
    return pd.DataFrame(rows, columns=["N", "M", "distance_l1", "norm_N_l1"])


def pert_residual(problem: SpectralProblem, N: int, check_times: Sequence[float], window: float = 0.05, tol: float = 1e-8) -> pd.DataFrame:
    """
    Integral-equation residual of c^N on short windows ending at each check time.

    For a window [t - h, t] inside one segment the residual is
    c(t - h) - c(t) + int_{t-h}^t F(s, c(s)) ds, with c(s) taken from a
    dense re-solve started at c(t).
    """
    starts = {}
    for t in check_times:
        starts[float(t)] = max(float(t) - window, problem.previous_boundary(float(t)))
    samples = sorted(set(starts) | set(starts.values()) | {problem.schedule.T[N]})
    traj = pert_solution(problem, N, tol=tol, sample_times=samples, t_stop=min(samples))
    at = {float(s): traj.states[i] for i, s in enumerate(traj.times)}
    fun = problem.rhs(RhsKind.PERT)
    n = len(problem.trunc)

    rows = []
    for t, lo in starts.items():
        dense = solve_ivp(fun, (t, lo), at[t], method="DOP853", rtol=tol * 1e-2, atol=tol * 1e-4, dense_output=True)
        if not dense.success:
            raise IntegrationError(f"Residual re-solve failed on [{lo}, {t}]: {dense.message}")

        def integrand(s):
            value = fun(s, dense.sol(s))
            return np.concatenate([value.real, value.imag])

        integral, _ = quad_vec(integrand, lo, t, epsabs=tol * 1e-2, epsrel=1e-10)
        integral = integral[:n] + 1j * integral[n:]
        residual = at[lo] - at[t] + integral
        rows.append({"t": t, "window": t - lo, "residual": float(np.max(np.abs(residual)))})
    return pd.DataFrame(rows)
