"""Heralded photon and qubit amplifier built on teleportation with partial entanglement.

A vacuum/single-photon qubit ``c|0> + s|1>`` is teleported through the resource
``t|0,1> + i r|1,0>``.  The analytic branches come from expanding the product in
the Bell basis

    phi+- = (|00> +- i|11>)/sqrt2,    psi+- = (i|01> +- |10>)/sqrt2,

which gives, with unit-norm prefactor 1/sqrt2 on every branch,

    psi+- : c r|0> +- s t|1>         (accepted; psi- needs a phase flip)
    phi+- : +-s r|0> + c t|1>        (rejected; vacuum and photon phases swapped)

The same numbers are reproduced independently by :func:`circuit_oracle`, which
simulates the optical circuit in :mod:`photonlink.fock`.

Bloch-sphere convention: the z axis points to the single-photon pole, so
``eta = |s|^2 - c^2``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from photonlink.fock import (
    PERFECT_PNR,
    ClickPattern,
    DetectorKind,
    DetectorModel,
    FockState,
    apply_beam_splitter,
    measure_threshold,
)

__all__ = [
    "BellOutcome",
    "Branch",
    "Correction",
    "DegenerateInputError",
    "DetectorKind",
    "DetectorModel",
    "DualRailQubit",
    "HeraldOutcome",
    "HeraldStats",
    "HeraldedEnsemble",
    "NoThresholdError",
    "QubitAmplitudes",
    "ResourceSplit",
    "amplification_threshold",
    "amplify_mc",
    "bell_expand",
    "circuit_oracle",
    "eta_map",
    "gain",
    "herald_summary",
    "kraus_map",
    "poincare_map",
    "qubit_amplify",
]

_TOL = 1e-12


class DegenerateInputError(ValueError):
    """Input is vacuum-free of the accepting branches (e.g. c=1 with t=0)."""


class NoThresholdError(ValueError):
    """No transmission in (0, 1] amplifies the given input with this detector."""


@dataclass(frozen=True)
class QubitAmplitudes:
    """``c|0> + s|1>`` with ``c`` real and non-negative."""

    c: float
    s: complex

    def __post_init__(self):
        c, s = self.c, complex(self.s)
        if isinstance(c, complex):
            if abs(c.imag) > _TOL:
                raise ValueError("vacuum amplitude c must be real")
            c = c.real
        c = float(c)
        if c < -_TOL:
            raise ValueError(f"vacuum amplitude c must be >= 0, got {c}")
        if abs(c * c + abs(s) ** 2 - 1.0) > 1e-12:
            raise ValueError(f"c^2 + |s|^2 = {c * c + abs(s) ** 2}, expected 1")
        object.__setattr__(self, "c", max(c, 0.0))
        object.__setattr__(self, "s", s)

    @classmethod
    def from_photon_probability(cls, photon_probability: float, phase: float = 0.0) -> "QubitAmplitudes":
        if not 0.0 <= photon_probability <= 1.0:
            raise ValueError(f"photon probability must lie in [0, 1], got {photon_probability}")
        return cls(math.sqrt(1.0 - photon_probability), math.sqrt(photon_probability) * cmath.exp(1j * phase))

    @classmethod
    def from_vector(cls, vacuum: complex, photon: complex) -> "QubitAmplitudes":
        """Normalize and strip the global phase so the vacuum amplitude is real."""
        norm = math.hypot(abs(vacuum), abs(photon))
        if norm == 0.0:
            raise ValueError("zero vector")
        vacuum, photon = complex(vacuum) / norm, complex(photon) / norm
        if abs(vacuum) > 0.0:
            phase = vacuum.conjugate() / abs(vacuum)
            return cls(abs(vacuum), photon * phase)
        return cls(0.0, photon)

    @property
    def photon_probability(self) -> float:
        return abs(self.s) ** 2

    @property
    def eta(self) -> float:
        """z coordinate, +1 at the single-photon pole."""
        return abs(self.s) ** 2 - self.c**2

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c, self.s], dtype=complex)

    def projector(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def fidelity(self, other: "QubitAmplitudes") -> float:
        return abs(np.vdot(self.vector, other.vector)) ** 2


@dataclass(frozen=True)
class ResourceSplit:
    """Transmission ``t`` of the splitter that prepares ``t|0,1> + i r|1,0>``."""

    t: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")

    @classmethod
    def from_t2(cls, t2: float) -> "ResourceSplit":
        if not 0.0 <= t2 <= 1.0:
            raise ValueError(f"t^2 must lie in [0, 1], got {t2}")
        return cls(math.sqrt(t2))

    @property
    def r(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.t * self.t))

    @property
    def k(self) -> float:
        """z-axis boost, 2t^2 - 1."""
        return 2.0 * self.t * self.t - 1.0


class BellOutcome(enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @property
    def accepting(self) -> bool:
        return self in (BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS)


class Correction(enum.Enum):
    NONE = "none"
    PHASE_FLIP = "phase-flip"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Branch:
    outcome: BellOutcome
    probability: float
    output: QubitAmplitudes | None  # None when the branch has zero probability
    correction: Correction

    def corrected_output(self) -> QubitAmplitudes | None:
        if self.output is None or self.correction is not Correction.PHASE_FLIP:
            return self.output
        return QubitAmplitudes(self.output.c, -self.output.s)


def _branch(outcome, vacuum, photon, correction) -> Branch:
    weight = abs(vacuum) ** 2 + abs(photon) ** 2
    output = QubitAmplitudes.from_vector(vacuum, photon) if weight > 0.0 else None
    return Branch(outcome, weight / 2.0, output, correction)


def bell_expand(qubit: QubitAmplitudes, resource: ResourceSplit) -> list[Branch]:
    """The four teleportation branches, in order phi+, phi-, psi+, psi-."""
    c, s, t, r = qubit.c, qubit.s, resource.t, resource.r
    return [
        _branch(BellOutcome.PHI_PLUS, s * r, c * t, Correction.REJECTED),
        _branch(BellOutcome.PHI_MINUS, -s * r, c * t, Correction.REJECTED),
        _branch(BellOutcome.PSI_PLUS, c * r, s * t, Correction.NONE),
        _branch(BellOutcome.PSI_MINUS, c * r, -s * t, Correction.PHASE_FLIP),
    ]


def branch(qubit: QubitAmplitudes, resource: ResourceSplit, outcome: BellOutcome) -> Branch:
    return next(b for b in bell_expand(qubit, resource) if b.outcome is outcome)


def gain(qubit: QubitAmplitudes, resource: ResourceSplit) -> float:
    """Factor multiplying the photon amplitude on an accepting herald."""
    c, s, t, r = qubit.c, qubit.s, resource.t, resource.r
    denom = c * c * r * r + abs(s) ** 2 * t * t
    if denom == 0.0:
        raise DegenerateInputError(
            f"accepting branches have zero probability (c={c}, |s|={abs(s)}, t={t}); gain undefined"
        )
    return t / math.sqrt(denom)


def eta_map(eta: float, resource: ResourceSplit) -> float:
    """z coordinate after an accepting herald: (eta + k) / (1 + eta k), k = 2t^2 - 1.

    The poles are fixed points for every t, including the corners where the
    herald itself has zero probability.
    """
    if not -1.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [-1, 1], got {eta}")
    if eta == 1.0 or eta == -1.0:
        return eta
    k = resource.k
    return (eta + k) / (1.0 + eta * k)


def compose_splits(first: ResourceSplit, second: ResourceSplit) -> ResourceSplit:
    """Single resource equivalent to two amplifiers in cascade (relativistic velocity addition of k)."""
    k1, k2 = first.k, second.k
    k = (k1 + k2) / (1.0 + k1 * k2)
    return ResourceSplit.from_t2(min(1.0, max(0.0, (1.0 + k) / 2.0)))


def kraus_map(rho, resource: ResourceSplit, outcome: BellOutcome = BellOutcome.PSI_PLUS):
    """Apply an accepting branch to a 2x2 density operator.

    Returns the branch probability and the renormalized output state.
    """
    if not outcome.accepting:
        raise ValueError(f"{outcome} is not an accepting outcome")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError("rho must be 2x2")
    if abs(np.trace(rho) - 1.0) > 1e-9 or np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -1e-9:
        raise ValueError("rho must be a unit-trace positive semidefinite operator")
    sign = 1.0 if outcome is BellOutcome.PSI_PLUS else -1.0
    kraus = np.diag([resource.r, sign * resource.t]).astype(complex)
    out = kraus @ rho @ kraus.conj().T
    weight = float(np.trace(out).real)
    if weight == 0.0:
        raise DegenerateInputError("branch has zero probability for this input")
    return weight / 2.0, out / weight


def bloch_vector(rho) -> np.ndarray:
    """(x, y, z) of a 2x2 state, z pointing to the single-photon pole."""
    rho = np.asarray(rho, dtype=complex)
    return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[1, 1] - rho[0, 0]).real])


def poincare_map(theta: float, phi: float, resource: ResourceSplit) -> tuple[float, float]:
    """Move the pure state ``cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`` through the psi+ branch."""
    qubit = QubitAmplitudes(math.cos(theta / 2), cmath.exp(1j * phi) * math.sin(theta / 2))
    c, s = qubit.c, qubit.s
    if c == 0.0 or abs(s) < 1e-300:
        return theta, phi
    out = branch(qubit, resource, BellOutcome.PSI_PLUS).output
    if out is None:
        return theta, phi
    theta_out = 2.0 * math.atan2(abs(out.s), out.c)
    return theta_out, phi


# --- optical circuit ------------------------------------------------------
#
# Single rail, three modes: 0 = input, 1 = source photon / output,
# 2 = reflected resource arm.  The source splitter (t) acts on (1, 2), the
# Bell-measurement splitter (50/50) on (0, 2); detectors watch modes 0 and 2.
# Pattern dictionary (fixed by expanding the circuit by hand, checked in tests):
#   (0, 1): psi+    (1, 0): psi- (phase flip)
#   (0, 0), (2, 0), (0, 2): phi+ and phi- pooled; linear optics cannot split them
# Threshold detectors: (-, C) -> psi+, (C, -) -> psi-, everything else rejected.

INPUT_MODE, OUTPUT_MODE, REFLECTED_MODE = 0, 1, 2
HERALD_MODES = (INPUT_MODE, REFLECTED_MODE)


def _accepting_label(pattern: ClickPattern) -> BellOutcome | None:
    values = tuple(int(v) for v in pattern.values)
    if values == (0, 1):
        return BellOutcome.PSI_PLUS
    if values == (1, 0):
        return BellOutcome.PSI_MINUS
    return None


class HeraldOutcome(NamedTuple):
    pattern: ClickPattern
    probability: float
    ensemble: list[tuple[float, FockState]]
    label: BellOutcome | None  # accepting outcome, None when rejected


def _rail(state: FockState, in_mode: int, out_mode: int, ref_mode: int, t: float) -> FockState:
    state = apply_beam_splitter(state, out_mode, ref_mode, t)
    return apply_beam_splitter(state, in_mode, ref_mode, math.sqrt(0.5))


def circuit_oracle(
    qubit: QubitAmplitudes, resource: ResourceSplit, detector: DetectorModel = PERFECT_PNR
) -> list[HeraldOutcome]:
    """Simulate the single-rail amplifier circuit and enumerate herald patterns."""
    state = FockState(3, 2, {(0, 1, 0): qubit.c, (1, 1, 0): qubit.s})
    state = _rail(state, INPUT_MODE, OUTPUT_MODE, REFLECTED_MODE, resource.t)
    outcomes = measure_threshold(state, HERALD_MODES, detector)
    return [HeraldOutcome(o.pattern, o.probability, o.ensemble, _accepting_label(o.pattern)) for o in outcomes]


def _as_qubit(state: FockState) -> QubitAmplitudes:
    return QubitAmplitudes.from_vector(state.amplitude((0,)), state.amplitude((1,)))


def oracle_branches(outcomes: Sequence[HeraldOutcome]) -> dict[str, tuple[float, np.ndarray]]:
    """Group oracle outcomes as psi+, psi- and pooled phi (rejected).

    Values are (probability, unnormalized-to-probability 2x2 density operator),
    i.e. the density operator is weighted by the group probability.
    """
    groups = {"psi+": (0.0, np.zeros((2, 2), complex)), "psi-": (0.0, np.zeros((2, 2), complex)),
              "phi": (0.0, np.zeros((2, 2), complex))}
    for o in outcomes:
        key = o.label.value if o.label is not None else "phi"
        prob, rho = groups[key]
        for w, member in o.ensemble:
            rho = rho + o.probability * w * _as_qubit(member).projector()
        groups[key] = (prob + o.probability, rho)
    return groups


class HeraldSummary(NamedTuple):
    herald_probability: float
    conditional_photon_probability: float
    state: np.ndarray  # conditional output after psi- correction


def herald_summary(outcomes: Sequence[HeraldOutcome]) -> HeraldSummary:
    """Accepted-herald probability and the conditional output state."""
    prob = 0.0
    rho = np.zeros((2, 2), complex)
    flip = np.diag([1.0, -1.0])
    for o in outcomes:
        if o.label is None:
            continue
        for w, member in o.ensemble:
            proj = _as_qubit(member).projector()
            if o.label is BellOutcome.PSI_MINUS:
                proj = flip @ proj @ flip
            rho += o.probability * w * proj
        prob += o.probability
    if prob == 0.0:
        return HeraldSummary(0.0, float("nan"), rho)
    rho /= prob
    return HeraldSummary(prob, float(rho[1, 1].real), rho)


def amplification_threshold(
    qubit: QubitAmplitudes, detector: DetectorModel = PERFECT_PNR, tol: float = 1e-4, grid: int = 200
) -> float:
    """Smallest t for which a herald raises the photon probability above |s|^2.

    A coarse scan finds the first bracket where the conditional photon
    probability crosses the input value, then bisection narrows it to ``tol``.
    """
    s2 = qubit.photon_probability
    if s2 <= 0.0:
        raise ValueError("threshold needs an input with nonzero photon probability")

    def excess(t: float) -> float:
        summary = herald_summary(circuit_oracle(qubit, ResourceSplit(t), detector))
        if summary.herald_probability <= 0.0:
            return -math.inf
        return summary.conditional_photon_probability - s2

    lo = 0.0
    hi = None
    for t in np.linspace(0.0, 1.0, grid + 1)[1:]:
        if excess(float(t)) > 0.0:
            hi = float(t)
            break
        lo = float(t)
    if hi is None:
        raise NoThresholdError(
            f"no transmission amplifies |s|^2={s2:.6g} with {detector.kind.value} detectors "
            f"(efficiency {detector.efficiency}, dark {detector.dark_click_prob})"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


# --- dual rail -----------------------------------------------------------


@dataclass(frozen=True)
class DualRailQubit:
    """``vacuum|0,0> + alpha|1_h,0_v> + beta|0_h,1_v>``."""

    alpha: complex
    beta: complex
    vacuum: complex = 0.0

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2 + abs(self.vacuum) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"dual-rail amplitudes have norm^2 {norm}, expected 1")

    @property
    def photon_vector(self) -> np.ndarray:
        v = np.array([self.alpha, self.beta], dtype=complex)
        n = np.linalg.norm(v)
        return v / n if n > 0 else v


# Six modes: H rail (0 input, 1 output, 2 reflected), V rail (3, 4, 5).
_H = (0, 1, 2)
_V = (3, 4, 5)
_DUAL_HERALD_MODES = (_H[0], _H[2], _V[0], _V[2])


@dataclass(frozen=True)
class HeraldedEnsemble:
    """Accepted output of the dual-rail amplifier on the two output modes (H, V)."""

    probability: float
    members: tuple[tuple[float, FockState], ...]  # conditional weights, corrections applied
    patterns: tuple[tuple[ClickPattern, float], ...]

    def density_matrix(self) -> np.ndarray:
        """Density operator over |0,0>, |1,0>, |0,1>, |1,1>."""
        basis = [(0, 0), (1, 0), (0, 1), (1, 1)]
        rho = np.zeros((4, 4), complex)
        for w, st in self.members:
            v = np.array([st.amplitude(b) for b in basis])
            rho += w * np.outer(v, v.conj())
        return rho

    @property
    def photon_probability(self) -> float:
        return float(self.density_matrix()[1:3, 1:3].trace().real)

    def photon_fidelity(self, qubit: DualRailQubit) -> float:
        """Fidelity of the single-photon (qubit) part of the output to the input qubit."""
        block = self.density_matrix()[1:3, 1:3]
        weight = block.trace().real
        if weight <= 0.0:
            return float("nan")
        q = qubit.photon_vector
        return float((q.conj() @ block @ q).real / weight)


def _dual_accept(values: tuple) -> tuple[BellOutcome, BellOutcome] | None:
    h = _accepting_label(ClickPattern(values[:2]))
    v = _accepting_label(ClickPattern(values[2:]))
    if h is None or v is None:
        return None
    return h, v


def qubit_amplify(
    qubit: DualRailQubit, resource: ResourceSplit, detector: DetectorModel = PERFECT_PNR
) -> HeraldedEnsemble:
    """Amplify a polarization qubit by running one single-rail amplifier per polarization.

    Accepted heralds are exactly one click on the H pair and one on the V pair;
    a psi- pattern on a rail is fixed by flipping that rail's photon phase.
    """
    amps = {
        (0, 1, 0, 0, 1, 0): qubit.vacuum,
        (1, 1, 0, 0, 1, 0): qubit.alpha,
        (0, 1, 0, 1, 1, 0): qubit.beta,
    }
    state = FockState(6, 2, amps)
    state = _rail(state, *_H, resource.t)
    state = _rail(state, *_V, resource.t)
    outcomes = measure_threshold(state, _DUAL_HERALD_MODES, detector)

    prob = 0.0
    members: list[tuple[float, FockState]] = []
    patterns = []
    # remaining modes after measurement: (H output, V output)
    for o in outcomes:
        labels = _dual_accept(tuple(int(v) for v in o.pattern.values))
        if labels is None:
            continue
        flip_h = labels[0] is BellOutcome.PSI_MINUS
        flip_v = labels[1] is BellOutcome.PSI_MINUS
        for w, st in o.ensemble:
            fixed = {
                occ: amp * (-1 if flip_h and occ[0] % 2 else 1) * (-1 if flip_v and occ[1] % 2 else 1)
                for occ, amp in st.amplitudes.items()
            }
            members.append((o.probability * w, FockState(2, st.cutoff, fixed)))
        prob += o.probability
        patterns.append((o.pattern, o.probability))
    if prob == 0.0:
        return HeraldedEnsemble(0.0, (), ())
    return HeraldedEnsemble(prob, tuple((w / prob, st) for w, st in members), tuple(patterns))


# --- Monte Carlo -----------------------------------------------------------


@dataclass(frozen=True)
class HeraldStats:
    herald_probability: float
    conditional_photon_probability: float
    conditional_vacuum_probability: float
    fidelity_to_analytic: float
    trials: int
    seed: int
    heralds: int
    photons: int
    analytic_herald_probability: float
    analytic_photon_probability: float

    @property
    def herald_sigma(self) -> float:
        p = self.analytic_herald_probability
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def photon_sigma(self) -> float:
        p = self.analytic_photon_probability
        n = max(self.heralds, 1)
        return math.sqrt(p * (1 - p) / n)


def amplify_mc(
    qubit: QubitAmplitudes,
    resource: ResourceSplit,
    detector: DetectorModel = PERFECT_PNR,
    trials: int = 100_000,
    seed: int = 0,
) -> HeraldStats:
    """Sample herald events from the circuit and estimate the black-box observables."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    outcomes = circuit_oracle(qubit, resource, detector)
    probs = np.array([o.probability for o in outcomes])
    accepted = np.array([o.label is not None for o in outcomes])
    photon_given = np.array(
        [math.fsum(w * abs(st.amplitude((1,))) ** 2 for w, st in o.ensemble) for o in outcomes]
    )

    rng = np.random.default_rng(seed)
    picks = rng.choice(len(outcomes), size=trials, p=probs / probs.sum())
    photon_draw = rng.random(trials) < photon_given[picks]
    heralded = accepted[picks]
    heralds = int(heralded.sum())
    photons = int((heralded & photon_draw).sum())

    summary = herald_summary(outcomes)
    cond = photons / heralds if heralds else float("nan")
    q = summary.conditional_photon_probability
    fid = (math.sqrt(cond * q) + math.sqrt((1 - cond) * (1 - q))) ** 2 if heralds else float("nan")
    return HeraldStats(
        herald_probability=heralds / trials,
        conditional_photon_probability=cond,
        conditional_vacuum_probability=1.0 - cond if heralds else float("nan"),
        fidelity_to_analytic=fid,
        trials=trials,
        seed=seed,
        heralds=heralds,
        photons=photons,
        analytic_herald_probability=summary.herald_probability,
        analytic_photon_probability=q,
    )
