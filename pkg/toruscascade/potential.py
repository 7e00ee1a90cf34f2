"""
Fourier data and Sobolev norms of the potential.

At any time at most one drive r_k is lit and the potential has the two
Fourier modes +-l_k with coefficient -2 r_k(t) sin(|l_k|^2 t).
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from toruscascade.chain import REQUIRED_INTEGRALS, MoveKind
from toruscascade.errors import LatticeOverflowError, ResolutionError
from toruscascade.lattice import FrequencyFamily, LatticeVec
from toruscascade.schedule import Schedule, default_bump, log_beta

TWO_PI = 2.0 * math.pi

# Cody-Waite split of 2pi: C1 has few mantissa bits so k * C1 is exact
_CW_C1 = 6.28125
_CW_C2 = TWO_PI - _CW_C1
# 2pi - TWO_PI, the rounding error of the double constant
_CW_C3 = 2.4492935982947064e-16
_REDUCE_ABOVE = 2.0 ** 20
# Keeps omega * floor(t) exact and k below 2^45, where k * _CW_C1 is still exact
PHASE_PRODUCT_LIMIT = 2.0 ** 47


def reduce_phase(omega, t: float) -> np.ndarray:
    """
    omega * t reduced modulo 2pi.

    omega holds exact integers. The product is split as omega * floor(t),
    exact while |omega| (floor(t) + 1) < PHASE_PRODUCT_LIMIT, plus
    omega * frac(t), and each part is reduced on its own.

    Raises:
        LatticeOverflowError: If omega * floor(t) would not be exact
    """
    omega = np.asarray(omega, dtype=float)
    x = omega * t
    if x.size == 0 or np.max(np.abs(x)) <= _REDUCE_ABOVE:
        return x
    q = math.floor(t)
    if float(np.max(np.abs(omega))) * (abs(q) + 1) >= PHASE_PRODUCT_LIMIT:
        raise LatticeOverflowError(
            f"Phase {float(np.max(np.abs(omega))):.17g} * {t:.17g} is beyond exact reduction (limit 2^47)"
        )
    whole, frac = omega * q, omega * (t - q)

    def reduce(v):
        k = np.rint(v / TWO_PI)
        return ((v - k * _CW_C1) - k * _CW_C2) - k * _CW_C3

    return reduce(whole) + reduce(frac)


@dataclass
class PotentialSpec:
    family: FrequencyFamily
    schedule: Schedule

    def active_mode(self, t: float) -> Optional[Tuple[int, LatticeVec]]:
        seg = self.schedule.segment_at(t)
        if seg is None:
            return None
        return seg.drive_index, self.family.l[seg.drive_index]


def v_coeff(spec: PotentialSpec, n: LatticeVec, t: float) -> float:
    """v_n(t): r_k(t) if n = +-l_k for the active k, else 0."""
    seg = spec.schedule.segment_at(t)
    if seg is None:
        return 0.0
    lk = spec.family.l[seg.drive_index]
    if n == lk or n == -lk:
        return float(seg.value(t))
    return 0.0


def fourier_coefficient_derivative(spec: PotentialSpec, t: float, m: int = 0) -> Tuple[Optional[LatticeVec], float]:
    """
    m-th time derivative of the coefficient of e^{i l.x}, -2 r(t) sin(L^2 t).

    Leibniz: sum_j C(m, j) r^(j)(t) L^(2(m-j)) sin(L^2 t + (m-j) pi/2).
    """
    seg = spec.schedule.segment_at(t)
    if seg is None:
        return None, 0.0
    lk = spec.family.l[seg.drive_index]
    L2 = lk.norm2()
    base = float(reduce_phase(L2, t))
    total = 0.0
    for j in range(m + 1):
        rj = float(seg.derivative(t, j))
        if rj == 0.0:
            continue
        total += math.comb(m, j) * rj * float(L2) ** (m - j) * math.sin(base + (m - j) * math.pi / 2.0)
    return lk, -2.0 * total


def V_sobolev_norm(spec: PotentialSpec, t: float, s: float, m: int = 0) -> float:
    """
    ||d_t^m V(t)||_{H^s} with ||F||^2 = (2pi)^2 sum_n max(1,|n|)^(2s) |F_n|^2.

    For s = 0 this is the L^2 norm on [0, 2pi)^2.
    """
    lk, coeff = fourier_coefficient_derivative(spec, t, m)
    if lk is None:
        return 0.0
    weight = max(1.0, lk.norm()) ** s
    return TWO_PI * math.sqrt(2.0) * weight * abs(coeff)


def _realspace_complex(spec: PotentialSpec, t: float, grid_size: int) -> np.ndarray:
    field = np.zeros((grid_size, grid_size), dtype=complex)
    seg = spec.schedule.segment_at(t)
    if seg is None:
        return field
    lk = spec.family.l[seg.drive_index]
    if grid_size < 4 * lk.norm():
        raise ResolutionError(
            f"Grid of {grid_size} points cannot resolve l_{seg.drive_index} = {lk} "
            f"(needs >= {math.ceil(4 * lk.norm())})"
        )
    _, coeff = fourier_coefficient_derivative(spec, t, 0)
    field[lk.x % grid_size, lk.y % grid_size] += coeff
    field[(-lk.x) % grid_size, (-lk.y) % grid_size] += coeff
    return np.fft.ifft2(field) * grid_size ** 2


def V_realspace(spec: PotentialSpec, t: float, grid_size: int) -> np.ndarray:
    """
    Sample V(t, x) on the uniform grid x_j = 2pi j / grid_size.

    Raises:
        ResolutionError: If grid_size < 4 |l_k| for the active drive
    """
    values = _realspace_complex(spec, t, grid_size)
    scale = max(1.0, float(np.max(np.abs(values.real))))
    residue = float(np.max(np.abs(values.imag)))
    if residue > 1e-12 * scale:
        raise RuntimeError(f"V(t={t}) has imaginary residue {residue:.3e}")
    return values.real


def realness_residue(spec: PotentialSpec, t: float, grid_size: int) -> float:
    """Largest imaginary part of the sampled two-sided sum."""
    return float(np.max(np.abs(_realspace_complex(spec, t, grid_size).imag)))


def max_move_scale() -> float:
    """Largest amplitude / beta over the move kinds."""
    return REQUIRED_INTEGRALS[MoveKind.MOVE1] / default_bump().alpha


def plateau_sup(spec: PotentialSpec, k: int, s: float, m: int) -> float:
    """Supremum of ||d_t^m V||_{H^s} over the plateaus of drive k."""
    lk = spec.family.l[k]
    amps = [
        seg.amplitude for seg in spec.schedule.segments if seg.drive_index == k
    ]
    if not amps:
        return 0.0
    return 4.0 * math.sqrt(2.0) * math.pi * max(amps) * max(1.0, lk.norm()) ** (s + 2 * m)


def log_plateau_norm(family: FrequencyFamily, k: int, s: float, m: int) -> float:
    """Paper-mode log of the plateau supremum, beta_k = |l_k|^-|l_k|."""
    L = family.l[k].norm()
    return (
        math.log(4.0 * math.sqrt(2.0) * math.pi)
        + math.log(max_move_scale())
        + log_beta(L)
        + (s + 2 * m) * math.log(L)
    )


def potential_norm_series(spec: PotentialSpec, times: Sequence[float], pairs: Iterable[Tuple[float, int]]) -> pd.DataFrame:
    """Time series t, k(t) and one H^s column per (s, m) pair."""
    pairs = list(pairs)
    rows = []
    for t in times:
        mode = spec.active_mode(float(t))
        row = {"t": float(t), "k": -1 if mode is None else mode[0]}
        for s, m in pairs:
            row[f"hs_s{s:g}_m{m}"] = V_sobolev_norm(spec, float(t), s, m)
        rows.append(row)
    return pd.DataFrame(rows)
