"""
Sobolev norms, growth and decay bounds, and the acceptance report.

Everything evaluated for true (paper-mode) amplitudes lives in log-space:
beta_2 = |l_2|^-|l_2| is already far below the binary64 range.
"""

import bisect
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, quad
from scipy.linalg import expm
from scipy.optimize import brentq
from scipy.special import logsumexp

from toruscascade.chain import (
    A_MATRIX,
    REQUIRED_INTEGRALS,
    SQRT2,
    ChainState,
    MoveKind,
    MoveSpec,
    apply_move,
    exp_tA,
    initial_state,
    propagate_exact,
)
from toruscascade.errors import ReductionMismatchError
from toruscascade.lattice import (
    ChainNode,
    FrequencyFamily,
    certification_passed,
    chain_nodes,
    chain_pattern,
    growth_constants,
    omega_minus,
    omega_plus,
    reduced_interactions,
    verify_properties,
)
from toruscascade.potential import log_plateau_norm
from toruscascade.schedule import (
    BetaMode,
    Schedule,
    build_schedule,
    log_cycle_boundaries,
    total_drive_integral,
)

EPSILON = 1.0 / SQRT2
CYCLE_INTEGRAL = 4.0 * sum(REQUIRED_INTEGRALS.values())


# ---------------------------------------------------------------------------
# Sobolev norms
# ---------------------------------------------------------------------------


def _weights(nodes, s: float) -> np.ndarray:
    return np.array([max(1.0, v.norm()) for v in nodes]) ** s


def hs_norm(state, s: float) -> float:
    """(sum_n max(1,|n|)^(2s) |a_n|^2)^(1/2) of a SpectralState."""
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    return float(np.linalg.norm(_weights(state.trunc.nodes, s) * np.abs(state.values)))


def hs_norm_series(trajectory, s: float) -> np.ndarray:
    w = _weights(trajectory.trunc.nodes, s)
    return np.linalg.norm(np.abs(trajectory.states) * w, axis=1)


def hs_norms_from_frame(frame: pd.DataFrame, s: float) -> pd.Series:
    """Per-time H^s norms of a stored long-format trajectory (t, node_x, node_y, re, im)."""
    x = frame["node_x"].to_numpy(dtype=float)
    y = frame["node_y"].to_numpy(dtype=float)
    weight = np.maximum(1.0, np.hypot(x, y)) ** (2 * s)
    energy = weight * (frame["re"].to_numpy() ** 2 + frame["im"].to_numpy() ** 2)
    return pd.Series(energy, index=frame.index).groupby(frame["t"]).sum().pow(0.5)


def largest_coefficient(frame: pd.DataFrame) -> pd.Series:
    """Per-time max |a_n|; its minimum is the concentration level held between boundaries."""
    modulus = np.hypot(frame["re"].to_numpy(), frame["im"].to_numpy())
    return pd.Series(modulus, index=frame.index).groupby(frame["t"]).max()


def chain_hs_norm(family: FrequencyFamily, state: ChainState, s: float) -> float:
    """hs_norm of a chain state placed on its chain nodes."""
    nodes = chain_nodes(family)
    total = 0.0
    for k, value in enumerate(state.p):
        total += max(1.0, nodes[ChainNode("p", k)].norm()) ** (2 * s) * value ** 2
    for k, value in enumerate(state.s):
        total += max(1.0, nodes[ChainNode("s", k)].norm()) ** (2 * s) * value ** 2
    return math.sqrt(total)


def log_hs_norm_at_cycle(family: FrequencyFamily, n: int, s: float) -> float:
    """
    log hs_norm of the exact state at T_n.

    At T_n the chain holds 1/2 at m_{n+1}, -1/sqrt2 at m_n and 1/2 at
    m_n - l_n, whatever the amplitude scale.
    """
    nodes = [family.node(n + 1), family.node(n), family.node(n) - family.l[n]]
    amps = [0.5, EPSILON, 0.5]
    terms = [2 * s * math.log(max(1.0, v.norm())) + 2 * math.log(a) for v, a in zip(nodes, amps)]
    return 0.5 * float(logsumexp(terms))


def k_of_t(schedule: Schedule, t: float) -> int:
    """Smallest k >= 0 with t <= T_{k+1}; the last cycle index past the horizon."""
    return min(bisect.bisect_left(schedule.T, t, lo=1) - 1, schedule.cycles)


# ---------------------------------------------------------------------------
# Growth lower bound
# ---------------------------------------------------------------------------


class GrowthBound(NamedTuple):
    n: int
    intermediate: float
    final: float


def _log_g(n: int, C: float) -> float:
    """log of g(n) = C^n n! log(C^n n!), -inf when g(n) <= 0."""
    x = n * math.log(C) + math.lgamma(n + 1)
    if x <= 0:
        return -math.inf
    return x + math.log(x)


def cycle_count(log_t: float, C: float, n_max: int = 64) -> int:
    """n(t): the largest n <= n_max with g(n) <= log t."""
    if log_t <= 1.0:
        return 0
    log_log_t = math.log(log_t)
    n = 0
    while n < n_max and _log_g(n + 1, C) <= log_log_t:
        n += 1
    return n


def _log_intermediate(n: int, s: float, c: float) -> float:
    return math.log(EPSILON) + s * (math.log(c) + math.lgamma(n))


def fit_growth_constant(constants: Dict[str, float], s: float, delta: float, n_max: int) -> float:
    """
    log c_{delta,s} such that c (log t)^{s(1-delta)} stays below the
    intermediate bound for every t with 1 <= n(t) <= n_max.

    For n(t) = n, log t < g(n+1), so the minimum over n of
    intermediate(n) / g(n+1)^{s(1-delta)} is admissible.
    """
    C, c = constants["C_l"], constants["c_m"]
    values = []
    for n in range(1, n_max + 1):
        log_g_next = _log_g(n + 1, C)
        if log_g_next == -math.inf:
            continue
        values.append(_log_intermediate(n, s, c) - s * (1.0 - delta) * log_g_next)
    return min(values) if values else _log_intermediate(1, s, c)


def log_growth_lower_bound(log_t: float, s: float, delta: float, constants: Dict[str, float], log_c_final: float) -> GrowthBound:
    """Log-space version of growth_lower_bound; -inf replaces 0."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    n = cycle_count(log_t, constants["C_l"])
    if n == 0:
        return GrowthBound(0, -math.inf, -math.inf)
    final = log_c_final + s * (1.0 - delta) * math.log(log_t)
    return GrowthBound(n, _log_intermediate(n, s, constants["c_m"]), final)


def growth_lower_bound(log_t: float, s: float, delta: float, constants: Dict[str, float], log_c_final: float) -> GrowthBound:
    """
    The chain of lower bounds at time t = exp(log_t).

    n(t) is the largest n with C^n n! log(C^n n!) <= log t, the
    intermediate bound is eps (c (n(t)-1)!)^s and the final one
    c_{delta,s} (log t)^{s(1-delta)}. Both are 0 when n(t) = 0.
    """
    bound = log_growth_lower_bound(log_t, s, delta, constants, log_c_final)
    return GrowthBound(bound.n, math.exp(bound.intermediate), math.exp(bound.final))


# ---------------------------------------------------------------------------
# Potential decay
# ---------------------------------------------------------------------------


def _decay_exponent(log_t, delta: float):
    log_t = np.asarray(log_t, dtype=float)
    return log_t ** (1.0 - delta) * np.log(log_t)


def decay_upper_bound(log_t, delta: float, log_C: float):
    """log of C exp(-(log t)^{1-delta} log log t); needs t > e^e."""
    if np.any(np.asarray(log_t) <= math.e):
        raise ValueError("decay bound needs t > e^e")
    return log_C - _decay_exponent(log_t, delta)


def plateau_log_norms(family: FrequencyFamily, s: float, m: int, k_max: Optional[int] = None) -> np.ndarray:
    k_max = family.K if k_max is None else k_max
    return np.array([log_plateau_norm(family, k, s, m) for k in range(k_max + 1)])


def fit_decay_constant(family: FrequencyFamily, s: float, m: int, delta: float, k_min: int = 2) -> float:
    """
    Smallest log C for which the decay bound dominates every plateau of
    drive k >= k_min. Drive k is last lit before T_{k+1}, where the
    decreasing bound is smallest.
    """
    log_T = log_cycle_boundaries(family, family.K)
    values = [
        log_plateau_norm(family, k, s, m) + float(_decay_exponent(log_T[k + 1], delta))
        for k in range(k_min, family.K)
    ]
    if not values:
        raise ValueError(f"Family with K = {family.K} has no drive k >= {k_min} inside its boundaries")
    return max(values)


def subpolynomial_margin(log_t, delta: float, log_C: float, epsilon: float = 0.01) -> np.ndarray:
    """log of bound(t) t^epsilon."""
    return epsilon * np.asarray(log_t, dtype=float) + decay_upper_bound(log_t, delta, log_C)


# ---------------------------------------------------------------------------
# Non-resonant integrals and the Gronwall envelope
# ---------------------------------------------------------------------------


def _node_value(state: ChainState, label: ChainNode) -> float:
    return float(state.p[label.index] if label.kind == "p" else state.s[label.index])


def _triple_position(label: ChainNode, k: int) -> Optional[int]:
    if label == ChainNode("p", k + 1):
        return 0
    if label == ChainNode("p", k):
        return 1
    if label == ChainNode("s", k):
        return 2
    return None


class _ForcingTerms:
    """Non-resonant forcing terms of each segment and their time integrals."""

    def __init__(self, problem, t_final: float):
        self.family = problem.family
        self.schedule = problem.schedule
        self.resonant = problem.resonant
        self.nodes = chain_nodes(problem.family)
        self.segments = [seg for seg in problem.schedule.segments if seg.t_end <= t_final]
        self._terms = [self._segment_terms(seg) for seg in self.segments]
        totals = [self._integrate(seg, terms, seg.t_start) for seg, terms in zip(self.segments, self._terms)]
        self._suffix: List[Dict] = [dict() for _ in range(len(self.segments) + 1)]
        for i in range(len(self.segments) - 1, -1, -1):
            merged = dict(self._suffix[i + 1])
            for n, v in totals[i].items():
                merged[n] = merged.get(n, 0.0) + v
            self._suffix[i] = merged

    def _segment_terms(self, seg):
        k = seg.drive_index
        start = self.resonant.state_at(seg.t_start)
        lk = self.family.l[k]
        terms = []
        for label, m in self.nodes.items():
            pos = _triple_position(label, k)
            if pos is None and _node_value(start, label) == 0.0:
                continue
            for step in (lk, -lk):
                n = m + step
                for omega, sign in ((omega_plus(m, n), 1.0), (omega_minus(m, n), -1.0)):
                    if omega != 0:
                        terms.append((label, pos, n, float(omega), sign))
        return start, terms

    def _integrate(self, seg, terms, lo: float) -> Dict:
        start, items = terms
        triple0 = start.triple(seg.drive_index)
        out: Dict = {}
        if lo >= seg.t_end:
            return out
        for label, pos, n, omega, sign in items:
            if pos is None:
                const = _node_value(start, label)

                def f(s, const=const):
                    return const * float(seg.value(s))
            else:

                def f(s, pos=pos):
                    return float((exp_tA(seg.integral(s)) @ triple0)[pos]) * float(seg.value(s))

            # e^{-i w s} = cos(|w| s) - i sgn(w) sin(|w| s)
            re, _ = quad(f, lo, seg.t_end, weight="cos", wvar=abs(omega), limit=200)
            im, _ = quad(f, lo, seg.t_end, weight="sin", wvar=abs(omega), limit=200)
            out[n] = out.get(n, 0.0) + sign * (re - 1j * math.copysign(1.0, omega) * im)
        return out

    def alpha(self, t: float) -> float:
        """sum_n |int_t^{t_final} F_n|."""
        starts = [seg.t_start for seg in self.segments]
        i = bisect.bisect_right(starts, t) - 1
        if i < 0:
            return float(sum(abs(v) for v in self._suffix[0].values()))
        if i >= len(self.segments) or t >= self.segments[i].t_end:
            return float(sum(abs(v) for v in self._suffix[min(i + 1, len(self.segments))].values()))
        partial = self._integrate(self.segments[i], self._terms[i], t)
        merged = dict(self._suffix[i + 1])
        for n, v in partial.items():
            merged[n] = merged.get(n, 0.0) + v
        return float(sum(abs(v) for v in merged.values()))


def alpha_beta_estimates(problem, times: Sequence[float], t_final: Optional[float] = None) -> pd.DataFrame:
    """
    alpha(t), beta(t) and their bounds along the schedule.

    alpha(t) is the l^1 norm of the non-resonant forcing integrated from t
    to t_final (the horizon by default) and vanishes past the last drive.
    beta(t) = 4 |r(t)|; its integral over one cycle is exactly CYCLE_INTEGRAL.
    """
    schedule = problem.schedule
    t_final = schedule.horizon if t_final is None else t_final
    forcing = _ForcingTerms(problem, t_final)
    rows = []
    for t in times:
        t = float(t)
        seg = schedule.segment_at(t)
        k = k_of_t(schedule, t)
        beta_k = schedule.beta[k] if k < len(schedule.beta) else 0.0
        rows.append(
            {
                "t": t,
                "k": k,
                "alpha": forcing.alpha(t) if t < t_final else 0.0,
                "beta": 0.0 if seg is None else 4.0 * abs(float(seg.value(t))),
                "beta_k": beta_k,
                "int_beta": 4.0 * total_drive_integral(schedule, t),
                "int_beta_bound": CYCLE_INTEGRAL * (k + 1),
            }
        )
    frame = pd.DataFrame(rows)
    alpha, beta_k = frame["alpha"].to_numpy(), frame["beta_k"].to_numpy()
    frame["alpha_over_beta_k"] = np.divide(alpha, beta_k, out=np.zeros_like(alpha), where=beta_k > 0)
    return frame


def gronwall_bound(problem, frame: pd.DataFrame) -> np.ndarray:
    """
    Backward Gronwall envelope alpha(t) + int_t^T alpha beta exp(int_t^s beta)
    on the grid of an alpha_beta_estimates frame.
    """
    t = frame["t"].to_numpy()
    alpha = frame["alpha"].to_numpy()
    beta = frame["beta"].to_numpy()
    B = np.array([4.0 * total_drive_integral(problem.schedule, float(s)) for s in t])
    g = alpha * beta * np.exp(B)
    running = cumulative_trapezoid(g, t, initial=0.0)
    tail = running[-1] - running
    return alpha + np.exp(-B) * tail


PERTURBATION_C_MAX = 100.0


def _log_samples(norms, ks, betas):
    return [(math.log(x), math.log(b), k) for x, k, b in zip(norms, ks, betas) if x > 0 and b > 0]


def _log_excess(samples, C: float) -> float:
    """max_i [log norm_i - log beta_i - C k_i - log C]; <= 0 iff the bound holds."""
    return max((lx - lb - C * k - math.log(C) for lx, lb, k in samples), default=-math.inf)


def fit_perturbation_constant(norms: Sequence[float], ks: Sequence[int], betas: Sequence[float]) -> float:
    """
    Smallest C with norm_i <= C beta_{k_i} e^{C k_i} for every sample.

    h(C) = max_i [log norm_i - log beta_i - C k_i - log C] decreases in C,
    so the root is bracketed by expanding outwards.
    """
    samples = _log_samples(norms, ks, betas)
    if not samples:
        return 0.0

    def h(C):
        return _log_excess(samples, C)

    lo, hi = 1e-3, 1.0
    while h(lo) <= 0 and lo > 1e-300:
        lo *= 1e-3
    while h(hi) > 0:
        hi *= 2.0
    if h(lo) <= 0:
        return lo
    return float(brentq(h, lo, hi, xtol=1e-14, rtol=1e-12))


class PerturbationFit(NamedTuple):
    C: float
    held_out: int
    log_excess: float

    @property
    def holds(self) -> bool:
        return self.held_out > 0 and 0.0 < self.C <= PERTURBATION_C_MAX and self.log_excess <= 1e-9


def holdout_perturbation_fit(
    times: Sequence[float], norms: Sequence[float], ks: Sequence[int], betas: Sequence[float]
) -> PerturbationFit:
    """
    Fit C on the samples in the first half of the time span and test it on the rest.

    log_excess is the worst log-ratio of a held-out norm to C beta_k e^{C k};
    the fit holds when it is not positive and C stays below PERTURBATION_C_MAX.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return PerturbationFit(0.0, 0, -math.inf)
    split = 0.5 * (times.min() + times.max())
    first = times <= split

    def pick(values, mask):
        return [v for v, keep in zip(values, mask) if keep]

    C = fit_perturbation_constant(pick(norms, first), pick(ks, first), pick(betas, first))
    held = _log_samples(pick(norms, ~first), pick(ks, ~first), pick(betas, ~first))
    excess = _log_excess(held, C) if C > 0 else (math.inf if held else -math.inf)
    return PerturbationFit(C, len(held), excess)


# ---------------------------------------------------------------------------
# Acceptance criteria
# ---------------------------------------------------------------------------


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str

    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


MOVE_TABLE = [
    (MoveKind.MOVE1, (0.5, -EPSILON, 0.5), (EPSILON, 0.0, EPSILON)),
    (MoveKind.MOVE2, (0.0, 1.0, 0.0), (EPSILON, 0.0, EPSILON)),
    (MoveKind.MOVE3, (0.0, 0.0, 1.0), (-1.0, 0.0, 0.0)),
]


def check_move_table() -> Criterion:
    worst = 0.0
    for kind, before, after in MOVE_TABLE:
        got = apply_move(before, MoveSpec(kind, 0))
        worst = max(worst, float(np.max(np.abs(got - np.array(after)))))
    return Criterion(1, "move table", worst <= 1e-12, f"max error {worst:.2e}")


def check_matrix_identity(samples: int = 100, seed: int = 0) -> Criterion:
    Ts = np.random.default_rng(seed).uniform(-10.0, 10.0, samples)
    oracle = max(float(np.max(np.abs(exp_tA(T) - expm(T * A_MATRIX)))) for T in Ts)
    ortho = max(float(np.max(np.abs(exp_tA(T) @ exp_tA(T).T - np.eye(3)))) for T in Ts)
    return Criterion(
        2,
        "matrix identity",
        oracle <= 1e-10 and ortho <= 1e-12,
        f"{samples} T in [-10, 10] (seed {seed}), expm error {oracle:.2e}, orthogonality {ortho:.2e}",
    )


def check_certification(family: FrequencyFamily) -> Criterion:
    report = verify_properties(family)
    failed = [name for name, entry in report.items() if not entry["passed"]]
    ratios_ok = all(
        family.l[n].norm() >= n * family.m[n].norm() for n in range(1, family.K + 1)
    )
    C_ratio = growth_constants(family)["C_ratio"]
    detail = f"failed {failed}" if failed else f"P1-P10 hold, |l_n|/|m_n| in [n, {C_ratio:.2f} n]"
    return Criterion(3, "family certification", certification_passed(report) and ratios_ok, detail)


def check_reduction(family: FrequencyFamily) -> Criterion:
    try:
        table = reduced_interactions(family)
    except ReductionMismatchError as e:
        return Criterion(4, "reduction equivalence", False, str(e))
    expected = chain_pattern(family)
    same = all(set(table[label]) == set(expected[label]) for label in expected)
    return Criterion(4, "reduction equivalence", same, f"{len(expected)} chain nodes, 0 discrepancies")


def induction_errors(family: FrequencyFamily, schedule: Schedule) -> List[float]:
    """Max deviation from (1/2, -1/sqrt2, 1/2) on the active triple at each T_n."""
    errors = []
    for n in range(1, schedule.cycles + 1):
        state = propagate_exact(schedule, initial_state(family.K), schedule.T[n])
        expected = ChainState(np.zeros(family.K + 2), np.zeros(family.K + 1)).with_triple(n, (0.5, -EPSILON, 0.5))
        errors.append(float(np.max(np.abs(state.to_vector() - expected.to_vector()))))
    return errors


def check_induction(family: FrequencyFamily, cycles: int = 4) -> Criterion:
    cycles = min(cycles, family.K - 1)
    schedule = build_schedule(family, cycles, BetaMode("scaled", 0.05, 0.5))
    errors = induction_errors(family, schedule)
    worst = max(errors, default=0.0)
    return Criterion(5, "induction step", worst <= 1e-12, f"{cycles} cycles, max error {worst:.2e}")


def check_integrator(meta: Dict, tol: float) -> Criterion:
    rfs = meta.get("rfs", {})
    errors = rfs.get("errors_at_T", [])
    drift = rfs.get("mass_drift", math.inf)
    worst = max(errors, default=0.0)
    passed = worst <= 10 * tol and drift <= 1e-9
    return Criterion(6, "integrator consistency", passed, f"max error at T_n {worst:.2e}, l2 drift {drift:.2e}")


def growth_table(family: FrequencyFamily, s: float, delta: float, n_max: int) -> pd.DataFrame:
    """Log-space comparison of the exact norm at T_n with the growth bound."""
    n_max = min(n_max, family.K)
    constants = growth_constants(family)
    log_c = fit_growth_constant(constants, s, delta, family.K)
    log_T = log_cycle_boundaries(family, n_max)
    rows = []
    for n in range(1, n_max + 1):
        bound = log_growth_lower_bound(float(log_T[n]), s, delta, constants, log_c)
        rows.append(
            {
                "n": n,
                "log_T": float(log_T[n]),
                "log_hs": log_hs_norm_at_cycle(family, n, s),
                "log_half_m": math.log(EPSILON) + s * math.log(family.node(n).norm()),
                "n_of_t": bound.n,
                "log_intermediate": bound.intermediate,
                "log_bound": bound.final,
            }
        )
    return pd.DataFrame(rows)


def check_growth(family: FrequencyFamily, cycles: int = 4, s: float = 1.0, delta: float = 0.5) -> Criterion:
    cycles = min(cycles, family.K - 1)
    schedule = build_schedule(family, cycles, BetaMode("scaled", 0.05, 0.5))
    exact_ok = cycles >= 1
    for n in range(1, cycles + 1):
        state = propagate_exact(schedule, initial_state(family.K), schedule.T[n])
        exact_ok &= chain_hs_norm(family, state, s) >= EPSILON * family.node(n).norm() ** s * (1 - 1e-12)
    table = growth_table(family, s, delta, 10)
    bound_ok = bool(np.all(table["log_hs"] >= table["log_bound"]))
    return Criterion(
        7,
        "growth mechanism",
        exact_ok and bound_ok,
        f"exact check over {cycles} cycles {'ok' if exact_ok else 'failed'}, "
        f"log-space bound holds for n <= {len(table)}: {bound_ok}",
    )


def check_fs_deviation(meta: Dict, threshold: float) -> Criterion:
    fs = meta.get("fs", {})
    if fs.get("skipped"):
        return Criterion(8, "approximation smallness", False, f"not run: {fs['skipped']}")
    full, half = fs.get("max_deviation", math.inf), fs.get("max_deviation_half", math.inf)
    base, cycles = fs.get("beta_base", math.nan), fs.get("cycles", 0)
    passed = full <= threshold and half < full
    return Criterion(
        8,
        "approximation smallness",
        passed,
        f"beta base {base:g} over {cycles} cycles: max deviation {full:.3e} (threshold {threshold:g}), "
        f"beta base {0.5 * base:g}: {half:.3e}",
    )


def check_perturbation(meta: Dict) -> Criterion:
    pert = meta.get("pert", {})
    if pert.get("skipped"):
        return Criterion(9, "perturbation bound", False, f"not run: {pert['skipped']}")
    distances = pert.get("consecutive_distances", [])
    if len(distances) < 2:
        return Criterion(
            9, "perturbation bound", False, f"needs three or more N for a Cauchy trend, got N = {pert.get('N', [])}"
        )
    monotone = all(b < a for a, b in zip(distances, distances[1:]))
    fit = PerturbationFit(pert.get("fitted_C", math.inf), pert.get("held_out", 0), pert.get("log_excess", math.inf))
    passed = monotone and fit.holds
    return Criterion(
        9,
        "perturbation bound",
        passed,
        f"N = {pert.get('N')}, |c^(N+1)(0) - c^N(0)|_1 = {['%.2e' % d for d in distances]} "
        f"(decreasing {monotone}), C {fit.C:.3g} (max {PERTURBATION_C_MAX:g}) "
        f"fitted on the first half, log excess on {fit.held_out} held-out samples {fit.log_excess:.3g}",
    )


def decay_table(family: FrequencyFamily, delta: float, pairs: Iterable[Tuple[float, int]]) -> pd.DataFrame:
    log_T = log_cycle_boundaries(family, family.K)
    rows = []
    for s, m in pairs:
        log_C = fit_decay_constant(family, s, m, delta)
        for k in range(2, family.K):
            rows.append(
                {
                    "s": s,
                    "m": m,
                    "k": k,
                    "log_T_next": float(log_T[k + 1]),
                    "log_plateau": log_plateau_norm(family, k, s, m),
                    "log_bound": float(decay_upper_bound(log_T[k + 1], delta, log_C)),
                }
            )
    return pd.DataFrame(rows)


def check_decay(family: FrequencyFamily, realness: float, delta: float = 0.5) -> Criterion:
    if family.K < 3:
        return Criterion(10, "potential decay", False, f"needs K >= 3 for plateaus past k = 2, got K = {family.K}")
    pairs = [(s, m) for s in range(0, 11) for m in range(0, 6) if s + 2 * m <= 10]
    table = decay_table(family, delta, pairs)
    decreasing = all(
        bool(np.all(np.diff(group.sort_values("k")["log_plateau"].to_numpy()) < 0))
        for _, group in table.groupby(["s", "m"])
    )
    below = bool(np.all(table["log_plateau"] <= table["log_bound"] + 1e-9))
    passed = decreasing and below and realness <= 1e-12
    return Criterion(
        10,
        "potential decay",
        passed,
        f"decreasing {decreasing}, below bound {below}, realness residue {realness:.2e}",
    )


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class GrowthReport:
    times: List[float]
    hs_exact: Dict[str, List[float]]
    hs_fs: Dict[str, List[float]]
    T: List[float]
    m_norms: List[float]
    constants: Dict[str, float]
    criteria: List[Criterion]
    checksums: Dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["passed"] = self.passed
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render_text(self) -> str:
        lines = ["Growth report", "=" * 80, ""]
        lines.append("Cycle boundaries: " + ", ".join(f"{t:.6g}" for t in self.T))
        lines.append("|m_n|: " + ", ".join(f"{v:.6g}" for v in self.m_norms))
        lines.append("")
        lines.append("Fitted constants:")
        for name in sorted(self.constants):
            lines.append(f"  {name:<24} {self.constants[name]:.6g}")
        lines.append("")
        lines.append("Criteria:")
        for c in self.criteria:
            lines.append(f"  {c.number:>2}. [{c.status()}] {c.name}: {c.detail}")
        lines.append("")
        lines.append("Inputs:")
        for name in sorted(self.checksums):
            lines.append(f"  {name}  sha256:{self.checksums[name]}")
        lines.append("")
        lines.append(f"Overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"
