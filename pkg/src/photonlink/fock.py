"""Sparse multimode Fock-state algebra for small linear-optical circuits.

States are pure, stored as a map from occupation tuples to complex amplitudes.
Beam splitters use the "i on reflection" convention

    a_dag -> t a_dag + i r b_dag,    b_dag -> i r a_dag + t b_dag,

so that one photon on a splitter of transmission ``t`` leaves as
``t|1,0> + i r|0,1>``.  This is the only phase convention used in the package.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

DEFAULT_CUTOFF = 2
DEFAULT_PRUNE = 1e-15

Occupation = tuple[int, ...]


class CutoffError(ValueError):
    """An operation would populate a mode beyond the state's cutoff."""


class ZeroProbabilityError(ValueError):
    """A measurement branch with zero probability was requested for collapse."""


@dataclass(frozen=True)
class FockState:
    """Pure state over ``num_modes`` bosonic modes, each truncated at ``cutoff``."""

    num_modes: int
    cutoff: int = DEFAULT_CUTOFF
    amplitudes: Mapping[Occupation, complex] = field(default_factory=dict)
    prune: float = DEFAULT_PRUNE

    def __post_init__(self):
        if self.num_modes < 0:
            raise ValueError(f"num_modes must be non-negative, got {self.num_modes}")
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")
        cleaned = {}
        for occ, amp in self.amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != self.num_modes:
                raise ValueError(f"occupation {occ} has length {len(occ)}, expected {self.num_modes}")
            if any(n < 0 for n in occ):
                raise ValueError(f"negative occupation in {occ}")
            if any(n > self.cutoff for n in occ):
                raise CutoffError(f"occupation {occ} exceeds cutoff {self.cutoff}")
            amp = complex(amp)
            if abs(amp) > self.prune:
                cleaned[occ] = amp
        object.__setattr__(self, "amplitudes", cleaned)

    def norm_squared(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.amplitudes.values())

    def normalize(self) -> "FockState":
        norm = math.sqrt(self.norm_squared())
        if norm == 0.0:
            raise ZeroProbabilityError("cannot normalize the zero vector")
        return self._with({occ: amp / norm for occ, amp in self.amplitudes.items()})

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(occupation), 0j)

    def inner(self, other: "FockState") -> complex:
        """<self|other>."""
        return sum(
            (amp.conjugate() * other.amplitudes.get(occ, 0j) for occ, amp in self.amplitudes.items()),
            0j,
        )

    def total_photons(self) -> dict[int, float]:
        """Distribution of the total photon number."""
        dist: dict[int, float] = defaultdict(float)
        for occ, amp in self.amplitudes.items():
            dist[sum(occ)] += abs(amp) ** 2
        return dict(dist)

    def _with(self, amplitudes: Mapping[Occupation, complex], num_modes: int | None = None) -> "FockState":
        return FockState(
            num_modes=self.num_modes if num_modes is None else num_modes,
            cutoff=self.cutoff,
            amplitudes=amplitudes,
            prune=self.prune,
        )

    def __repr__(self) -> str:
        terms = " + ".join(f"({amp:.6g})|{','.join(map(str, occ))}>" for occ, amp in sorted(self.amplitudes.items()))
        return f"FockState({terms or '0'})"


def make_state(num_modes: int, occupation: Sequence[int], cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """Basis state with unit amplitude on ``occupation``."""
    if num_modes < 1:
        raise ValueError("num_modes must be positive")
    occupation = tuple(occupation)
    if len(occupation) != num_modes:
        raise ValueError(f"occupation has length {len(occupation)}, expected {num_modes}")
    return FockState(num_modes, cutoff, {occupation: 1.0})


def superpose(terms: Mapping[Sequence[int], complex], cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """Normalized superposition from an occupation -> amplitude mapping."""
    terms = {tuple(k): v for k, v in terms.items()}
    lengths = {len(k) for k in terms}
    if len(lengths) != 1:
        raise ValueError("all occupations must have the same length")
    return FockState(lengths.pop(), cutoff, terms).normalize()


def tensor(first: FockState, second: FockState) -> FockState:
    """Product state, modes of ``first`` followed by modes of ``second``."""
    cutoff = max(first.cutoff, second.cutoff)
    amps = {
        oa + ob: aa * ab
        for oa, aa in first.amplitudes.items()
        for ob, ab in second.amplitudes.items()
    }
    return FockState(first.num_modes + second.num_modes, cutoff, amps, min(first.prune, second.prune))


def _splitter_image(na: int, nb: int, t: float, r: float) -> dict[tuple[int, int], complex]:
    """Image of |na, nb> under the beam splitter, as (ma, mb) -> amplitude."""
    ir = 1j * r
    out: dict[tuple[int, int], complex] = defaultdict(complex)
    for j in range(na + 1):
        cj = math.comb(na, j) * t**j * ir ** (na - j)
        for k in range(nb + 1):
            ck = math.comb(nb, k) * ir**k * t ** (nb - k)
            out[(j + k, na - j + nb - k)] += cj * ck
    scale = 1.0 / math.sqrt(math.factorial(na) * math.factorial(nb))
    return {
        (ma, mb): amp * scale * math.sqrt(math.factorial(ma) * math.factorial(mb))
        for (ma, mb), amp in out.items()
    }


def apply_beam_splitter(state: FockState, mode_a: int, mode_b: int, t: float) -> FockState:
    """Mix ``mode_a`` and ``mode_b`` on a splitter of amplitude transmission ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmission t must lie in [0, 1], got {t}")
    for m in (mode_a, mode_b):
        if not 0 <= m < state.num_modes:
            raise ValueError(f"mode {m} out of range for {state.num_modes} modes")
    if mode_a == mode_b:
        raise ValueError("beam splitter modes must be distinct")
    r = math.sqrt(1.0 - t * t)

    cache: dict[tuple[int, int], dict[tuple[int, int], complex]] = {}
    out: dict[Occupation, complex] = defaultdict(complex)
    for occ, amp in state.amplitudes.items():
        na, nb = occ[mode_a], occ[mode_b]
        if na + nb > state.cutoff:
            raise CutoffError(
                f"{na + nb} photons in modes ({mode_a}, {mode_b}) exceed cutoff {state.cutoff}"
            )
        image = cache.get((na, nb))
        if image is None:
            image = cache[(na, nb)] = _splitter_image(na, nb, t, r)
        for (ma, mb), coeff in image.items():
            new = list(occ)
            new[mode_a], new[mode_b] = ma, mb
            out[tuple(new)] += amp * coeff
    return state._with(out)


def photon_number_distribution(state: FockState, mode: int) -> dict[int, float]:
    dist = {n: 0.0 for n in range(state.cutoff + 1)}
    for occ, amp in state.amplitudes.items():
        dist[occ[mode]] += abs(amp) ** 2
    return dist


def project_number(state: FockState, mode: int, n: int) -> tuple[float, FockState]:
    """Project ``mode`` onto ``n`` photons.

    Returns the outcome probability and the renormalized post-measurement
    state; the measured mode stays in the state, fixed at occupation ``n``.
    """
    if not 0 <= mode < state.num_modes:
        raise ValueError(f"mode {mode} out of range")
    if not 0 <= n <= state.cutoff:
        raise CutoffError(f"n={n} outside 0..{state.cutoff}")
    kept = {occ: amp for occ, amp in state.amplitudes.items() if occ[mode] == n}
    prob = math.fsum(abs(a) ** 2 for a in kept.values())
    if prob == 0.0:
        raise ZeroProbabilityError(f"P(n={n} in mode {mode}) is zero")
    return prob, state._with(kept).normalize()


class DetectorKind(enum.Enum):
    PNR = "pnr"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class DetectorModel:
    """Gated detector: efficiency is binomial thinning, dark clicks are OR-ed in.

    For PNR detectors a dark click adds one count to the reported number.
    """

    kind: DetectorKind = DetectorKind.PNR
    efficiency: float = 1.0
    dark_click_prob: float = 0.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", DetectorKind(self.kind))
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_click_prob < 1.0:
            raise ValueError(f"dark_click_prob must lie in [0, 1), got {self.dark_click_prob}")

    @property
    def resolving(self) -> bool:
        return self.kind is DetectorKind.PNR

    def report_distribution(self, photons: int) -> dict[int | bool, float]:
        """Distribution of what this detector reports when ``photons`` hit it."""
        eta, d = self.efficiency, self.dark_click_prob
        counts: dict[int, float] = defaultdict(float)
        for k in range(photons + 1):
            pk = math.comb(photons, k) * eta**k * (1.0 - eta) ** (photons - k)
            if pk == 0.0:
                continue
            counts[k] += pk * (1.0 - d)
            if d > 0.0:
                counts[k + 1] += pk * d
        if self.resolving:
            return dict(counts)
        clicks: dict[bool, float] = defaultdict(float)
        for k, p in counts.items():
            clicks[k > 0] += p
        return dict(clicks)


PERFECT_PNR = DetectorModel()
PERFECT_THRESHOLD = DetectorModel(DetectorKind.THRESHOLD)


@dataclass(frozen=True, order=True)
class ClickPattern:
    """What a bank of detectors reported: counts for PNR, booleans for threshold."""

    values: tuple
    resolving: bool = True

    @property
    def clicks(self) -> tuple[bool, ...]:
        return tuple(bool(v) for v in self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __str__(self) -> str:
        if self.resolving:
            return "".join(str(v) for v in self.values)
        return "".join("C" if v else "-" for v in self.values)


class MeasurementOutcome(NamedTuple):
    pattern: ClickPattern
    probability: float
    ensemble: list[tuple[float, FockState]]  # conditional weights, pure states on unmeasured modes


def measure_threshold(
    state: FockState,
    modes: Sequence[int],
    detector: DetectorModel = PERFECT_THRESHOLD,
    rng: np.random.Generator | None = None,
) -> list[MeasurementOutcome]:
    """Enumerate detector outcomes on ``modes``.

    Every PNR outcome on the measured modes is thinned by the detector
    efficiency, dark clicks are added, and results are coarse-grained into the
    detector's reporting alphabet.  Each outcome carries the ensemble of pure
    states left on the unmeasured modes, with weights conditional on the
    pattern.  With ``rng`` given, a single outcome is sampled instead.
    """
    modes = tuple(modes)
    if len(set(modes)) != len(modes):
        raise ValueError("measured modes must be distinct")
    for m in modes:
        if not 0 <= m < state.num_modes:
            raise ValueError(f"mode {m} out of range")
    rest = [m for m in range(state.num_modes) if m not in modes]

    branches: dict[Occupation, dict[Occupation, complex]] = defaultdict(dict)
    for occ, amp in state.amplitudes.items():
        branches[tuple(occ[m] for m in modes)][tuple(occ[m] for m in rest)] = amp

    total = state.norm_squared()
    pattern_prob: dict[tuple, float] = defaultdict(float)
    pattern_members: dict[tuple, list[tuple[float, Occupation]]] = defaultdict(list)
    collapsed: dict[Occupation, FockState] = {}
    for n, sub in branches.items():
        p_n = math.fsum(abs(a) ** 2 for a in sub.values()) / total
        collapsed[n] = FockState(len(rest), state.cutoff, sub, state.prune).normalize()
        per_detector = [sorted(detector.report_distribution(k).items()) for k in n]
        for combo in itertools.product(*per_detector):
            p = p_n * math.prod(pc for _, pc in combo)
            if p == 0.0:
                continue
            key = tuple(v for v, _ in combo)
            pattern_prob[key] += p
            pattern_members[key].append((p, n))

    outcomes = []
    for key in sorted(pattern_prob):
        prob = pattern_prob[key]
        pooled: dict[Occupation, float] = defaultdict(float)
        for p, n in pattern_members[key]:
            pooled[n] += p
        ensemble = [(w / prob, collapsed[n]) for n, w in sorted(pooled.items())]
        outcomes.append(MeasurementOutcome(ClickPattern(key, detector.resolving), prob, ensemble))

    if rng is not None:
        probs = np.array([o.probability for o in outcomes])
        return [outcomes[rng.choice(len(outcomes), p=probs / probs.sum())]]
    return outcomes


def outcome_probability(outcomes: Iterable[MeasurementOutcome], values: Sequence) -> float:
    """Probability of the pattern with the given values (0 if never produced)."""
    values = tuple(values)
    return math.fsum(o.probability for o in outcomes if o.pattern.values == values)
