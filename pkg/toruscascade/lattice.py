"""
Integer lattice geometry for the frequency families.

Handles resonance tests, the inductive construction of the (m_k, l_k)
families, certification of the ten family properties and the brute-force
check that the resonant system collapses to the chain pattern.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

from toruscascade.errors import (
    LatticeOverflowError,
    MultiplierSearchError,
    ReductionMismatchError,
)

INT128_MAX = 2 ** 127 - 1

PROPERTY_NAMES = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "P10"]


def _checked(value: int, what: str) -> int:
    if not -INT128_MAX <= value <= INT128_MAX:
        raise LatticeOverflowError(f"{what} = {value} leaves the 128-bit signed range")
    return value


@dataclass(frozen=True)
class LatticeVec:
    """A frequency label in Z^2 with range-checked arithmetic."""

    x: int
    y: int

    def __post_init__(self):
        _checked(self.x, "x component")
        _checked(self.y, "y component")

    def __add__(self, other: "LatticeVec") -> "LatticeVec":
        return LatticeVec(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "LatticeVec") -> "LatticeVec":
        return LatticeVec(self.x - other.x, self.y - other.y)

    def __neg__(self) -> "LatticeVec":
        return LatticeVec(-self.x, -self.y)

    def scale(self, a: int) -> "LatticeVec":
        return LatticeVec(a * self.x, a * self.y)

    def dot(self, other: "LatticeVec") -> int:
        return _checked(self.x * other.x + self.y * other.y, f"dot({self}, {other})")

    def norm2(self) -> int:
        return self.dot(self)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def is_zero(self) -> bool:
        return self.x == 0 and self.y == 0

    def as_list(self) -> List[int]:
        return [self.x, self.y]

    def __str__(self) -> str:
        return f"({self.x},{self.y})"


def rotate90(v: LatticeVec) -> LatticeVec:
    """Rotate by a quarter turn: (x, y) -> (-y, x)."""
    return LatticeVec(-v.y, v.x)


def omega_plus(m: LatticeVec, n: LatticeVec) -> int:
    """Phase |m|^2 + |m-n|^2 - |n|^2 of the interaction m -> n."""
    return _checked(m.norm2() + (m - n).norm2() - n.norm2(), "omega+")


def omega_minus(m: LatticeVec, n: LatticeVec) -> int:
    """Phase |m|^2 - |m-n|^2 - |n|^2 of the interaction m -> n."""
    return _checked(m.norm2() - (m - n).norm2() - n.norm2(), "omega-")


def resonant_plus(n: LatticeVec, m: LatticeVec) -> bool:
    """True iff m is in the + resonant set of n, i.e. m is orthogonal to n - m."""
    return m.dot(n - m) == 0


def resonant_minus(n: LatticeVec, m: LatticeVec) -> bool:
    """True iff m is in the - resonant set of n, i.e. n is orthogonal to n - m."""
    return n.dot(n - m) == 0


@dataclass
class FrequencyFamily:
    """
    The sequences (m_k) and (l_k), k = 0..K.

    m_{K+1} = m_K + l_K is not stored but is part of the family: the chain
    built from it has p-nodes m_0..m_{K+1}.
    """

    m: List[LatticeVec]
    l: List[LatticeVec]
    a_choices: List[int] = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.l) - 1

    def node(self, k: int) -> LatticeVec:
        """Return m_k for 0 <= k <= K+1."""
        if k == self.K + 1:
            return self.m[self.K] + self.l[self.K]
        return self.m[k]

    def p_nodes(self) -> List[LatticeVec]:
        return [self.node(k) for k in range(self.K + 2)]

    def s_nodes(self) -> List[LatticeVec]:
        return [self.m[k] - self.l[k] for k in range(self.K + 1)]

    def to_dict(self) -> Dict:
        return {
            "m": [v.as_list() for v in self.m],
            "l": [v.as_list() for v in self.l],
            "a_choices": list(self.a_choices),
            "K": self.K,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def family_from_dict(data: Dict) -> FrequencyFamily:
    """
    Rebuild a family from its JSON document.

    Raises:
        ValueError: If the document is malformed or violates m_{k+1} = m_k + l_k
    """
    try:
        m = [LatticeVec(int(x), int(y)) for x, y in data["m"]]
        l = [LatticeVec(int(x), int(y)) for x, y in data["l"]]
        a_choices = [int(a) for a in data.get("a_choices", [])]
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"Malformed family document: {e}")

    if len(m) != len(l) or not m:
        raise ValueError(f"Family needs equally many m and l entries, got {len(m)} and {len(l)}")
    if "K" in data and int(data["K"]) != len(l) - 1:
        raise ValueError(f"Family K={data['K']} does not match {len(l)} entries")
    for k in range(len(m) - 1):
        if m[k] + l[k] != m[k + 1]:
            raise ValueError(f"m[{k+1}] != m[{k}] + l[{k}]")
    return FrequencyFamily(m=m, l=l, a_choices=a_choices)


def family_from_json(text: str) -> FrequencyFamily:
    return family_from_dict(json.loads(text))


class Violation(NamedTuple):
    prop: str
    indices: Tuple[int, ...]


def _longer_by_more_than_one(big: LatticeVec, small: LatticeVec) -> bool:
    # |big| > |small| + 1 without floating point
    A, B = big.norm2(), small.norm2()
    d = A - B - 1
    return d > 0 and d * d > 4 * B


def _violations(m: List[LatticeVec], l: List[LatticeVec], fresh_l: Optional[int] = None) -> Iterator[Violation]:
    """
    Yield every violated property instance.

    m holds m_0..m_{K+1} and l holds l_0..l_K. When fresh_l is given only the
    instances touching l[fresh_l] or m[fresh_l + 1] are examined.
    """
    M = range(len(m))
    L = range(len(l))

    def wanted(m_idx=(), l_idx=()) -> bool:
        if fresh_l is None:
            return True
        return fresh_l in l_idx or (fresh_l + 1) in m_idx

    for k in M:
        if wanted((k,)) and m[k].is_zero():
            yield Violation("P1", (k,))
    for k in L:
        if wanted((), (k,)) and l[k].is_zero():
            yield Violation("P1", (k,))

    for k in M:
        for j in L:
            if wanted((k,), (j,)) and (m[k].dot(l[j]) == 0) != (k == j):
                yield Violation("P2", (k, j))

    for k in L:
        if k + 1 < len(m) and wanted((k, k + 1), (k,)) and m[k] + l[k] != m[k + 1]:
            yield Violation("P3", (k,))

    for k in M:
        for j in M:
            if wanted((k, j)) and m[k].dot(m[j]) == 0:
                yield Violation("P4", (k, j))
        for j in L:
            if wanted((k, j), (j,)) and m[k].dot(m[j] - l[j]) == 0:
                yield Violation("P4", (k, j))

    for k in L:
        for j in L:
            if wanted((k,), (k, j)) and (m[k] - l[k]).dot(l[j]) == 0:
                yield Violation("P5", (k, j))

    for k in L:
        for j in M:
            if j != k + 1 and wanted((j,), (k,)) and (m[j] - l[k]).dot(l[k]) == 0:
                yield Violation("P6", (k, j))

    for k in L:
        for j in L:
            if wanted((j,), (k, j)) and (m[j] - l[j] - l[k]).dot(l[k]) == 0:
                yield Violation("P7", (k, j))

    for k in L:
        for j in M:
            if wanted((j,), (k,)) and (l[k] + m[j]).dot(l[k]) == 0:
                yield Violation("P8", (k, j))

    for k in L:
        for j in L:
            if k != j and wanted((j,), (k, j)) and (l[k] + m[j] - l[j]).dot(l[k]) == 0:
                yield Violation("P9", (k, j))

    for k in range(len(l) - 1):
        if wanted((), (k, k + 1)) and not _longer_by_more_than_one(l[k + 1], l[k]):
            yield Violation("P10", (k,))


def construct_family(m0: LatticeVec, K: int, search_constant: int = 2) -> FrequencyFamily:
    """
    Build (m_k, l_k) for k = 0..K by induction.

    At step n, l_n = a * rotate90(m_n) with a the smallest integer >= max(2, n+1)
    such that no property instance involving l_n or m_{n+1} is violated.

    Args:
        m0: Non-zero starting frequency
        K: Largest index
        search_constant: C in the search cap a <= 10 * C * (n + 1)

    Returns:
        FrequencyFamily with K+1 entries

    Raises:
        ValueError: If m0 is zero or K is negative
        LatticeOverflowError: If the family leaves the 128-bit range
        MultiplierSearchError: If no multiplier is found below the cap
    """
    if m0.is_zero():
        raise ValueError("m0 must be non-zero")
    if K < 0:
        raise ValueError(f"K must be non-negative, got {K}")

    m = [m0]
    l: List[LatticeVec] = []
    a_choices: List[int] = []

    for n in range(K + 1):
        direction = rotate90(m[n])
        cap = 10 * search_constant * (n + 1)
        chosen = None
        try:
            for a in range(max(2, n + 1), cap + 1):
                candidate = direction.scale(a)
                trial_m = m + [m[n] + candidate]
                trial_l = l + [candidate]
                if next(_violations(trial_m, trial_l, fresh_l=n), None) is None:
                    chosen = a
                    break
        except LatticeOverflowError as e:
            raise LatticeOverflowError(f"Family overflows at index {n}: {e}")
        if chosen is None:
            raise MultiplierSearchError(
                f"No admissible multiplier for index {n} up to the cap {cap}"
            )
        l.append(direction.scale(chosen))
        m.append(m[n] + l[n])
        a_choices.append(chosen)

    return FrequencyFamily(m=m[: K + 1], l=l, a_choices=a_choices)


def verify_properties(f: FrequencyFamily) -> Dict[str, Dict]:
    """
    Check P1-P10 over all index pairs by exact integer arithmetic.

    The p-side ranges over m_0..m_{K+1}.

    Returns:
        Mapping property name -> {"passed": bool, "witness": indices or None}
    """
    report = {name: {"passed": True, "witness": None} for name in PROPERTY_NAMES}
    size = min(len(f.m), len(f.l))
    if len(f.m) != len(f.l):
        report["P3"] = {"passed": False, "witness": [len(f.m), len(f.l)]}
    # remaining properties are checked on the common prefix
    m, l = list(f.m[:size]), list(f.l[:size])
    if size:
        m.append(m[-1] + l[-1])
    for violation in _violations(m, l):
        entry = report[violation.prop]
        if entry["passed"]:
            entry["passed"] = False
            entry["witness"] = list(violation.indices)
    return report


def certification_passed(report: Dict[str, Dict]) -> bool:
    return all(entry["passed"] for entry in report.values())


class ChainNode(NamedTuple):
    """A node of the chain: kind "p" (m_k) or "s" (m_k - l_k)."""

    kind: str
    index: int


class Interaction(NamedTuple):
    sign: int
    source: ChainNode
    drive: int


def chain_nodes(f: FrequencyFamily) -> Dict[ChainNode, LatticeVec]:
    """
    Map every chain node to its frequency, p-nodes first.

    Raises:
        ReductionMismatchError: If two chain nodes share a frequency
    """
    nodes: Dict[ChainNode, LatticeVec] = {}
    for k, v in enumerate(f.p_nodes()):
        nodes[ChainNode("p", k)] = v
    for k, v in enumerate(f.s_nodes()):
        nodes[ChainNode("s", k)] = v
    seen: Dict[LatticeVec, ChainNode] = {}
    for label, v in nodes.items():
        if v in seen:
            raise ReductionMismatchError(f"Chain nodes {seen[v]} and {label} coincide at {v}")
        seen[v] = label
    return nodes


def chain_pattern(f: FrequencyFamily) -> Dict[ChainNode, List[Interaction]]:
    """The expected reduced topology: the right-hand side of the chain system."""
    pattern: Dict[ChainNode, List[Interaction]] = {}
    K = f.K
    for k in range(K + 2):
        terms = []
        if k >= 1:
            terms.append(Interaction(+1, ChainNode("p", k - 1), k - 1))
        if k <= K:
            terms.append(Interaction(-1, ChainNode("p", k + 1), k))
            terms.append(Interaction(-1, ChainNode("s", k), k))
        pattern[ChainNode("p", k)] = terms
    for k in range(K + 1):
        pattern[ChainNode("s", k)] = [Interaction(+1, ChainNode("p", k), k)]
    return pattern


def reduced_interactions(f: FrequencyFamily) -> Dict[ChainNode, List[Interaction]]:
    """
    Enumerate resonant interactions inside the chain support by brute force.

    For every pair of chain nodes (n, m) with n - m = +-l_k the resonance of
    m for n is tested directly; + resonances contribute +a_m r_k and
    - resonances -a_m r_k.

    Raises:
        ReductionMismatchError: If the result differs from the chain pattern
    """
    nodes = chain_nodes(f)
    shifts: Dict[LatticeVec, int] = {}
    for k, lk in enumerate(f.l):
        shifts[lk] = k
        shifts[-lk] = k

    table: Dict[ChainNode, List[Interaction]] = {}
    for target, n in nodes.items():
        terms = []
        for source, m in nodes.items():
            k = shifts.get(n - m)
            if k is None:
                continue
            if resonant_plus(n, m):
                terms.append(Interaction(+1, source, k))
            if resonant_minus(n, m):
                terms.append(Interaction(-1, source, k))
        table[target] = terms

    expected = chain_pattern(f)
    for label in nodes:
        got, want = set(table[label]), set(expected[label])
        if got != want:
            raise ReductionMismatchError(
                f"Node {label}: extra {sorted(got - want)}, missing {sorted(want - got)}"
            )
    return table


def growth_constants(f: FrequencyFamily) -> Dict[str, float]:
    """
    Fit the constants of the factorial growth bounds over the generated range.

    Returns:
        c_m: min |m_n| / (n-1)!         (lower bound c (n-1)! <= |m_n|)
        C_m: max (|m_n| / (n-1)!)^(1/n) (upper bound |m_n| <= C^n (n-1)!)
        C_l: max (|l_n| / n!)^(1/n)     (|l_n| <= C^n n!)
        C_ratio: max |l_n| / (n |m_n|)  (n |m_n| <= |l_n| <= C n |m_n|)
    """
    p = f.p_nodes()
    log_m = [math.log(p[n].norm()) - math.lgamma(n) for n in range(1, len(p))]
    log_l = [math.log(f.l[n].norm()) - math.lgamma(n + 1) for n in range(1, f.K + 1)]

    constants = {
        "c_m": math.exp(min(log_m)),
        "C_m": math.exp(max(v / n for n, v in enumerate(log_m, start=1))),
        "C_l": math.exp(max(v / n for n, v in enumerate(log_l, start=1))) if log_l else 1.0,
        "C_ratio": max(
            (f.l[n].norm() / (n * f.m[n].norm()) for n in range(1, f.K + 1)), default=1.0
        ),
    }
    return constants
