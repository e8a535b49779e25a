"""Dwell-time specifications, impulse sequences, the clock and impulse paths.

The dwell time of interval k is ``t_{k+1} - t_k - 1``, the number of flow
steps between two impulses, with the convention ``t_0 = -1``.  Paths are
0/1 tuples of length L, a 1 marking an impulse slot.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DwellSpecError

KINDS = ("ADT", "EDT", "MDT", "RDT")


@dataclass(frozen=True)
class DwellSpec:
    kind: str
    tmin: int = 0
    tmax: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DwellSpecError(f"unknown dwell-time class {self.kind!r}")
        if self.kind == "ADT":
            if self.tmin != 0 or self.tmax is not None:
                raise DwellSpecError("ADT takes no parameters")
            return
        if int(self.tmin) != self.tmin or self.tmin < 1:
            raise DwellSpecError(f"{self.kind} needs an integer bound >= 1, got {self.tmin}")
        if self.kind == "MDT":
            if self.tmax is not None:
                raise DwellSpecError("MDT has no upper bound")
        elif self.tmax is None or int(self.tmax) != self.tmax or self.tmax < self.tmin:
            raise DwellSpecError(f"need 1 <= Tmin <= Tmax, got ({self.tmin}, {self.tmax})")
        elif self.kind == "EDT" and self.tmax != self.tmin:
            raise DwellSpecError("EDT needs Tmin == Tmax")

    @classmethod
    def adt(cls):
        return cls("ADT")

    @classmethod
    def edt(cls, T):
        return cls("EDT", T, T)

    @classmethod
    def mdt(cls, tmin):
        return cls("MDT", tmin, None)

    @classmethod
    def rdt(cls, tmin, tmax):
        return cls("RDT", tmin, tmax)

    @property
    def bounded(self):
        return self.tmax is not None

    def ranged(self):
        """(Tmin, Tmax) for EDT/RDT; EDT is just RDT(T, T)."""
        if self.kind not in ("EDT", "RDT"):
            raise DwellSpecError(f"{self.kind} has no finite dwell range")
        return self.tmin, self.tmax

    def admits(self, dwell):
        if dwell < 0:
            return False
        if dwell < self.tmin:
            return False
        return self.tmax is None or dwell <= self.tmax

    def __str__(self):
        if self.kind == "ADT":
            return "ADT"
        if self.kind == "MDT":
            return f"MDT({self.tmin})"
        if self.kind == "EDT":
            return f"EDT({self.tmin})"
        return f"RDT({self.tmin},{self.tmax})"

    @classmethod
    def parse(cls, text):
        """Inverse of ``str``: 'ADT', 'EDT(3)', 'MDT(2)', 'RDT(4,5)'."""
        text = text.strip().upper().replace(" ", "")
        if text == "ADT":
            return cls.adt()
        try:
            kind, rest = text.split("(", 1)
            args = [int(a) for a in rest.rstrip(")").split(",")]
        except ValueError:
            raise DwellSpecError(f"cannot parse dwell spec {text!r}") from None
        if kind == "EDT" and len(args) == 1:
            return cls.edt(*args)
        if kind == "MDT" and len(args) == 1:
            return cls.mdt(*args)
        if kind == "RDT" and len(args) == 2:
            return cls.rdt(*args)
        raise DwellSpecError(f"cannot parse dwell spec {text!r}")


@dataclass(frozen=True)
class ImpulseSequence:
    """Impulse instants t_1 < t_2 < ... (t_0 = -1 implicit) on [0, horizon]."""

    instants: tuple
    horizon: int

    def __post_init__(self):
        inst = tuple(int(t) for t in self.instants)
        if any(b <= a for a, b in zip((-1,) + inst, inst)):
            raise DwellSpecError("impulse instants must be strictly increasing and >= 0")
        if inst and inst[-1] > self.horizon:
            raise DwellSpecError("impulse instant beyond the horizon")
        object.__setattr__(self, "instants", inst)

    def dwell_times(self):
        full = (-1,) + self.instants
        return [b - a - 1 for a, b in zip(full, full[1:])]

    def satisfies(self, spec):
        return all(spec.admits(d) for d in self.dwell_times())

    def flags(self):
        """0/1 array over t = 0..horizon marking impulse instants."""
        out = np.zeros(self.horizon + 1, dtype=int)
        out[list(self.instants)] = 1
        return out

    def to_json(self):
        return list(self.instants)


def clock_value(seq, t, saturate=None):
    """Steps since the last impulse strictly before t (t_0 = -1).

    With ``saturate`` the clock stops at that value, as used for MDT.
    """
    if t < 0 or t > seq.horizon:
        raise DwellSpecError(f"t={t} outside the covered horizon [0, {seq.horizon}]", code="beyond-horizon")
    last = -1
    for tk in seq.instants:
        if tk >= t:
            break
        last = tk
    theta = t - last - 1
    if saturate is not None:
        theta = min(theta, saturate)
    return theta


def clock_values(seq, saturate=None):
    flags = seq.flags()
    out = np.empty(seq.horizon + 1, dtype=int)
    theta = 0
    for t in range(seq.horizon + 1):
        out[t] = theta if saturate is None else min(theta, saturate)
        theta = 0 if flags[t] else theta + 1
    return out


def is_admissible_path(bits, tmin, tmax):
    """Membership test for the admissible path set, directly from its definition."""
    L = len(bits)
    ones = [i + 1 for i, b in enumerate(bits) if b]
    if not ones:
        return False
    if ones[0] - 1 > tmax or L - ones[-1] > tmax:
        return False
    return all(tmin <= b - a - 1 <= tmax for a, b in zip(ones, ones[1:]))


def _check_range(tmin, tmax, L):
    if not (1 <= tmin <= tmax):
        raise DwellSpecError(f"need 1 <= Tmin <= Tmax, got ({tmin}, {tmax})")
    if L < 1:
        raise DwellSpecError("path length must be >= 1")


@lru_cache(maxsize=256)
def _enumerate(tmin, tmax, L):
    out = []

    def extend(prefix, last):
        # last: 1-based position of the latest impulse
        if L - last <= tmax:
            out.append(prefix + (0,) * (L - last))
        for gap in range(tmin, tmax + 1):
            nxt = last + gap + 1
            if nxt > L:
                break
            extend(prefix + (0,) * gap + (1,), nxt)

    for j1 in range(1, min(L, tmax + 1) + 1):
        extend((0,) * (j1 - 1) + (1,), j1)
    return tuple(sorted(out))


def enumerate_paths(tmin, tmax, L):
    """All admissible impulse paths of length L, sorted."""
    _check_range(tmin, tmax, L)
    return list(_enumerate(int(tmin), int(tmax), int(L)))


def postadmissible(p, tmin, tmax):
    """Paths q of the same length such that the concatenation (p, q) is admissible."""
    p = tuple(int(b) for b in p)
    _check_range(tmin, tmax, len(p))
    if not is_admissible_path(p, tmin, tmax):
        raise DwellSpecError(f"path {p} is not admissible", code="path-not-admissible")
    return [q for q in _enumerate(tmin, tmax, len(p)) if is_admissible_path(p + q, tmin, tmax)]


def path_from_unit(L, *positions):
    """Sum of unit vectors e_j (1-based) as a path tuple."""
    bits = [0] * L
    for j in positions:
        bits[j - 1] = 1
    return tuple(bits)


def window_bits(seq, start, L):
    """Bit-vector of impulses in the window [start, start + L)."""
    s = set(seq.instants)
    return tuple(int(t in s) for t in range(start, start + L))


def sample_sequence(spec, horizon, policy="minimal", seed=None, bounds=None):
    """Impulse sequence on [0, horizon] obeying ``spec``.

    ``policy`` is ``"minimal"`` (always the smallest dwell), ``"maximal"`` or
    ``"random"`` (dwell drawn uniformly per interval, reproducible via
    ``seed``).  ``bounds=(lo, hi)`` supplies a finite surrogate range for
    ADT/MDT, which have no upper dwell bound.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    lo, hi = spec.tmin, spec.tmax
    if bounds is not None:
        lo, hi = bounds
        if not (spec.admits(lo) and spec.admits(hi) and lo <= hi):
            raise DwellSpecError(f"surrogate bounds {bounds} not admitted by {spec}")
    if policy in ("random", "uniform-random"):
        if hi is None:
            raise DwellSpecError(f"{spec} is unbounded; pass bounds", code="unbounded-spec")
        rng = np.random.default_rng(seed)
        draw = lambda: int(rng.integers(lo, hi + 1))  # noqa: E731
    elif policy == "minimal":
        draw = lambda: lo  # noqa: E731
    elif policy == "maximal":
        if hi is None:
            raise DwellSpecError(f"{spec} is unbounded; pass bounds", code="unbounded-spec")
        draw = lambda: hi  # noqa: E731
    else:
        raise ValueError(f"unknown policy {policy!r}")
    instants = []
    t = -1
    while True:
        t = t + draw() + 1
        if t > horizon:
            break
        instants.append(t)
    return ImpulseSequence(tuple(instants), horizon)
