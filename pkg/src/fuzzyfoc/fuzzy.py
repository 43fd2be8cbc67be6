"""Mamdani fuzzy speed controller with seven triangular sets per variable.

The controller works on normalized error and change of error, infers a
normalized control increment with min-max composition over a 7x7 rule table,
defuzzifies by centroid on a fixed symmetric grid and integrates the
de-normalized increment into a torque command.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from functools import lru_cache

import numpy as np

LABELS = ("NB", "NM", "NS", "Z", "PS", "PM", "PB")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

# rows: change of error (NB..PB), columns: error (NB..PB)
RULE_TABLE = (
    ("NB", "NB", "NB", "NB", "NM", "NS", "Z"),
    ("NB", "NB", "NB", "NM", "NS", "Z", "PS"),
    ("NB", "NB", "NM", "NS", "Z", "PS", "PM"),
    ("NB", "NM", "NS", "Z", "PS", "PM", "PB"),
    ("NM", "NS", "Z", "PS", "PM", "PB", "PB"),
    ("NS", "Z", "PS", "PM", "PB", "PB", "PB"),
    ("Z", "PS", "PM", "PB", "PB", "PB", "PB"),
)
# same table as integer label indices, RULE_INDEX[ce][e]
RULE_INDEX = tuple(tuple(LABEL_INDEX[c] for c in row) for row in RULE_TABLE)

GRID_HALF = 1000
GRID = np.arange(-GRID_HALF, GRID_HALF + 1) / float(GRID_HALF)

PARAM_NAMES = ("k1", "k2", "k3", "a1", "a2", "b1", "b2", "c1", "c2")
PARAM_BOUNDS = {
    "k1": (0.0, 6.67e-3),
    "k2": (0.0, 1.0),
    "k3": (0.0, 6.0),
    "a1": (0.0, 1.0),
    "a2": (0.0, 1.0),
    "b1": (0.0, 1.0),
    "b2": (0.0, 1.0),
    "c1": (0.0, 1.0),
    "c2": (0.0, 1.0),
}
ORDERED_PAIRS = (("a1", "a2"), ("b1", "b2"), ("c1", "c2"))

DEFAULT_TORQUE_LIMIT = 400.0


class FuzzyParamsError(ValueError):
    pass


@dataclass(frozen=True)
class FuzzyParams:
    """The nine tunable controller parameters.

    ``k1``/``k2`` scale error and change of error onto [-1, 1], ``k3`` maps
    the unit increment to N*m per speed-loop sample. ``(a1, a2)``,
    ``(b1, b2)`` and ``(c1, c2)`` are the inner peak positions of the
    error, change-of-error and output partitions.
    """

    k1: float
    k2: float
    k3: float
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            lo, hi = PARAM_BOUNDS[name]
            if not math.isfinite(value) or not lo <= value <= hi:
                raise FuzzyParamsError(
                    f"{name}={value!r} outside the allowed range {lo} <= {name} <= {hi:g}")
        for lo_name, hi_name in ORDERED_PAIRS:
            if not getattr(self, lo_name) < getattr(self, hi_name):
                raise FuzzyParamsError(
                    f"need {lo_name} < {hi_name}, got {getattr(self, lo_name)!r} "
                    f"and {getattr(self, hi_name)!r}")

    @classmethod
    def from_vector(cls, x) -> "FuzzyParams":
        return cls(*(float(v) for v in x))

    def as_vector(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Uniform partitions with full-scale error at 150 rad/s.
BASELINE = FuzzyParams(k1=6.67e-3, k2=1.0, k3=1.0,
                       a1=1 / 3, a2=2 / 3, b1=1 / 3, b2=2 / 3, c1=1 / 3, c2=2 / 3)


@dataclass(frozen=True)
class MembershipFamily:
    """Seven triangles with peaks at (-1, -p2, -p1, 0, p1, p2, 1).

    Each triangle's feet sit on the neighbouring peaks; NB and PB saturate
    at 1 beyond -1 and +1.
    """

    p1: float
    p2: float

    @property
    def peaks(self) -> tuple[float, ...]:
        return (-1.0, -self.p2, -self.p1, 0.0, self.p1, self.p2, 1.0)

    def degrees(self, x: float) -> tuple[float, ...]:
        return fuzzify(x, self)

    def grid(self) -> np.ndarray:
        """Membership of every set on the defuzzification grid, shape (7, 2001)."""
        return _family_grid(self.p1, self.p2)


def _triangle(x, left, peak, right):
    if x == peak:
        return 1.0
    if left < x < peak:
        return (x - left) / (peak - left)
    if peak < x < right:
        return (right - x) / (right - peak)
    return 0.0


def fuzzify(x: float, family: MembershipFamily) -> tuple[float, ...]:
    c = family.peaks
    out = []
    for j in range(7):
        if j == 0 and x <= -1.0:
            out.append(1.0)
        elif j == 6 and x >= 1.0:
            out.append(1.0)
        else:
            left = c[j - 1] if j > 0 else -math.inf
            right = c[j + 1] if j < 6 else math.inf
            out.append(_triangle(x, left, c[j], right))
    return tuple(out)


@lru_cache(maxsize=256)
def _family_grid(p1: float, p2: float) -> np.ndarray:
    fam = MembershipFamily(p1, p2)
    mu = np.array([fuzzify(float(x), fam) for x in GRID])
    mu = np.ascontiguousarray(mu.T)
    mu.setflags(write=False)
    return mu


def normalize(value: float, gain: float) -> float:
    if gain < 0:
        raise ValueError(f"gain must be >= 0, got {gain!r}")
    return min(1.0, max(-1.0, value * gain))


def infer(e_degrees, ce_degrees, table=RULE_INDEX) -> tuple[float, ...]:
    """Min for each rule's firing strength, max to aggregate per output set."""
    out = [0.0] * 7
    for i in range(7):
        mu_ce = ce_degrees[i]
        if mu_ce <= 0.0:
            continue
        row = table[i]
        for j in range(7):
            w = min(e_degrees[j], mu_ce)
            k = row[j]
            if w > out[k]:
                out[k] = w
    return tuple(out)


def _sequential_sum(v: np.ndarray) -> float:
    # left-to-right accumulation, matching the compiled kernel bit for bit
    return float(np.cumsum(v)[-1]) if v.size else 0.0


def defuzzify(output_degrees, family: MembershipFamily) -> float:
    """Centroid of the clipped-and-aggregated output sets on a symmetric grid."""
    mu = family.grid()
    deg = np.asarray(output_degrees, dtype=float)
    active = np.nonzero(deg > 0.0)[0]
    if active.size == 0:
        return 0.0
    agg = np.minimum(mu[active[0]], deg[active[0]])
    for j in active[1:]:
        agg = np.maximum(agg, np.minimum(mu[j], deg[j]))
    pos = agg[GRID_HALF + 1:]
    neg = agg[GRID_HALF - 1::-1]
    den = agg[GRID_HALF] + _sequential_sum(pos + neg)
    if den <= 0.0:
        return 0.0
    num = _sequential_sum(GRID[GRID_HALF + 1:] * (pos - neg))
    return num / den


@dataclass(frozen=True)
class FuzzyController:
    """A parameter set with its three derived membership families."""

    params: FuzzyParams
    torque_limit: float = DEFAULT_TORQUE_LIMIT

    @property
    def error_family(self) -> MembershipFamily:
        return MembershipFamily(self.params.a1, self.params.a2)

    @property
    def change_family(self) -> MembershipFamily:
        return MembershipFamily(self.params.b1, self.params.b2)

    @property
    def output_family(self) -> MembershipFamily:
        return MembershipFamily(self.params.c1, self.params.c2)

    def increment(self, e: float, ce: float) -> float:
        p = self.params
        e_n = normalize(e, p.k1)
        ce_n = normalize(ce, p.k2)
        out = infer(fuzzify(e_n, self.error_family), fuzzify(ce_n, self.change_family))
        return defuzzify(out, self.output_family)


@dataclass(frozen=True)
class ControllerState:
    last_error: float = 0.0
    accumulated_output: float = 0.0


def controller_step(state: ControllerState, speed_ref: float, speed_meas: float,
                    params: FuzzyParams,
                    torque_limit: float = DEFAULT_TORQUE_LIMIT):
    """One speed-loop sample; returns ``(torque_ref, new_state)``."""
    ctl = FuzzyController(params, torque_limit)
    e = speed_ref - speed_meas
    ce = e - state.last_error
    du = ctl.increment(e, ce)
    u = state.accumulated_output + params.k3 * du
    u = min(torque_limit, max(-torque_limit, u))
    return u, ControllerState(e, u)


def du_surface(params: FuzzyParams, e_values, ce_values) -> np.ndarray:
    ctl = FuzzyController(params)
    return np.array([[ctl.increment(float(e), float(ce)) for ce in ce_values]
                     for e in e_values])
