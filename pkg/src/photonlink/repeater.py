"""Slot-based simulation of entanglement distribution along a repeater chain.

The chain of ``num_links`` elementary links is driven in time slots.  Each
empty link makes one multiplexed attempt per slot; finished links wait in
quantum memories whose retrieval efficiency decays exponentially; adjacent
segments are joined by entanglement swapping following a fixed binary
schedule (nested doubling when ``num_links`` is a power of two, left
associative otherwise).  Delivery is the slot in which the end-to-end pair is
confirmed.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT_KM_S = 299_792.458
FIBER_GROUP_INDEX = 1.468
DEFAULT_MAX_SLOTS = 10**8


class ConfigError(ValueError):
    pass


class Medium(enum.Enum):
    VACUUM = "vacuum"
    FIBER = "fiber"

    @property
    def speed(self) -> float:
        """Signal speed in km/s."""
        if self is Medium.VACUUM:
            return SPEED_OF_LIGHT_KM_S
        return SPEED_OF_LIGHT_KM_S / FIBER_GROUP_INDEX


class LinkScheme(enum.Enum):
    MIDPOINT_SOURCE = "midpoint"
    END_TO_END = "end-to-end"


class Strategy(enum.Enum):
    SERIAL = "serial"
    PARALLEL_NO_MEMORY = "parallel-no-memory"
    PARALLEL_WITH_MEMORY = "parallel-memory"


def _coerce(enum_cls, value):
    return value if isinstance(value, enum_cls) else enum_cls(value)


@dataclass(frozen=True)
class MemorySpec:
    efficiency: float = 1.0
    storage_time: float = math.inf  # seconds, 1/e decay of retrieval efficiency
    multimode_capacity: int = 1
    bandwidth: float = 1e9  # Hz
    fidelity: float = 1.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ConfigError(f"memory.efficiency must lie in [0, 1], got {self.efficiency}")
        if not self.storage_time > 0:
            raise ConfigError(f"memory.storage_time must be > 0, got {self.storage_time}")
        if int(self.multimode_capacity) != self.multimode_capacity or self.multimode_capacity < 1:
            raise ConfigError(f"memory.multimode_capacity must be an integer >= 1, got {self.multimode_capacity}")
        if not self.bandwidth > 0:
            raise ConfigError(f"memory.bandwidth must be > 0, got {self.bandwidth}")
        if not 0 <= self.fidelity <= 1:
            raise ConfigError(f"memory.fidelity must lie in [0, 1], got {self.fidelity}")


@dataclass(frozen=True)
class RepeaterConfig:
    total_distance: float  # km
    num_links: int = 1
    attenuation: float = 0.2  # dB/km
    link_scheme: LinkScheme = LinkScheme.MIDPOINT_SOURCE
    detector_efficiency: float = 1.0
    source_success: float = 1.0
    swap_success: float = 1.0
    slot_duration: float | None = None  # seconds; defaults to L0 / signal speed
    medium: Medium = Medium.FIBER
    classical_comm: bool = False
    memory: MemorySpec = field(default_factory=MemorySpec)
    photon_bandwidth: float = 5e7  # Hz
    link_success: float | None = None  # overrides the physical per-mode link model

    def __post_init__(self):
        object.__setattr__(self, "link_scheme", _coerce(LinkScheme, self.link_scheme))
        object.__setattr__(self, "medium", _coerce(Medium, self.medium))
        if int(self.num_links) != self.num_links or self.num_links < 1:
            raise ConfigError(f"num_links must be an integer >= 1, got {self.num_links}")
        object.__setattr__(self, "num_links", int(self.num_links))
        if not self.total_distance > 0:
            raise ConfigError(f"total_distance must be > 0, got {self.total_distance}")
        if not self.attenuation >= 0:
            raise ConfigError(f"attenuation must be >= 0, got {self.attenuation}")
        for name in ("detector_efficiency", "source_success"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if not 0 < self.swap_success <= 1:
            raise ConfigError(f"swap_success must lie in (0, 1], got {self.swap_success}")
        if self.slot_duration is not None and not self.slot_duration > 0:
            raise ConfigError(f"slot_duration must be > 0, got {self.slot_duration}")
        if self.link_success is not None and not 0 < self.link_success <= 1:
            raise ConfigError(f"link_success must lie in (0, 1], got {self.link_success}")
        if self.photon_bandwidth > self.memory.bandwidth:
            raise ConfigError(
                f"photon_bandwidth {self.photon_bandwidth:g} Hz exceeds memory.bandwidth "
                f"{self.memory.bandwidth:g} Hz; the memory cannot store these photons"
            )

    @property
    def link_length(self) -> float:
        return self.total_distance / self.num_links

    @property
    def slot(self) -> float:
        if self.slot_duration is not None:
            return self.slot_duration
        return self.link_length / self.medium.speed

    @property
    def canonical_schedule(self) -> bool:
        n = self.num_links
        return n & (n - 1) == 0


@dataclass
class LinkState:
    """One elementary link during a trial; ``created_at`` is None while empty."""

    created_at: int | None = None
    mode_index: int | None = None
    attempts: int = 0
    blocked_until: int = 0


@dataclass(frozen=True)
class SimResult:
    strategy: Strategy
    delivered: np.ndarray  # bool per trial
    delivery_slots: np.ndarray  # slots per delivered trial
    slot_duration: float
    trials: int
    seed: int
    mean_retrieval_efficiency: float
    mean_fidelity: float
    link_attempts: int
    link_successes: int
    memory_margin: float  # 10 x mean longest hold / storage time

    @property
    def delivered_fraction(self) -> float:
        return float(self.delivered.mean())

    @property
    def mean_slots(self) -> float:
        return float(self.delivery_slots.mean()) if self.delivery_slots.size else math.nan

    @property
    def variance_slots(self) -> float:
        return float(self.delivery_slots.var(ddof=1)) if self.delivery_slots.size > 1 else math.nan

    @property
    def std_error(self) -> float:
        n = self.delivery_slots.size
        return math.sqrt(self.variance_slots / n) if n > 1 else math.nan

    def quantiles(self, qs: Sequence[float] = (0.5, 0.9, 0.99)) -> dict[float, float]:
        if not self.delivery_slots.size:
            return {q: math.nan for q in qs}
        return {q: float(np.quantile(self.delivery_slots, q)) for q in qs}

    @property
    def end_to_end_rate(self) -> float:
        """Deliveries per second."""
        return 1.0 / (self.mean_slots * self.slot_duration)

    @property
    def link_success_rate(self) -> float:
        return self.link_successes / self.link_attempts if self.link_attempts else math.nan


def half_link_transmission(config: RepeaterConfig) -> float:
    return 10.0 ** (-config.attenuation * config.link_length / 20.0)


def link_success_prob(config: RepeaterConfig) -> float:
    """Success probability of one attempt on one mode of an elementary link.

    Midpoint source: source_success * T(L0/2)^2 * eta_det^2 * eta_mem^2.
    End to end:      source_success * T(L0)     * eta_det   * eta_mem.
    """
    if config.link_success is not None:
        return config.link_success
    eta_det = config.detector_efficiency
    eta_mem = config.memory.efficiency
    half = half_link_transmission(config)
    if config.link_scheme is LinkScheme.MIDPOINT_SOURCE:
        return config.source_success * half**2 * eta_det**2 * eta_mem**2
    return config.source_success * half**2 * eta_det * eta_mem


def multiplexed_success(p: float, modes: int) -> float:
    """Probability that at least one of ``modes`` independent attempts succeeds."""
    return -math.expm1(modes * math.log1p(-p)) if p < 1 else 1.0


def memory_retrieval_efficiency(memory: MemorySpec, hold_time: float) -> float:
    if hold_time < 0:
        raise ValueError(f"hold_time must be >= 0, got {hold_time}")
    if math.isinf(memory.storage_time):
        return memory.efficiency
    return memory.efficiency * math.exp(-hold_time / memory.storage_time)


def memory_distance(storage_time: float, medium: Medium | str = Medium.VACUUM) -> float:
    """Distance (km) light covers during ``storage_time`` seconds."""
    if not storage_time > 0:
        raise ValueError(f"storage_time must be > 0, got {storage_time}")
    return storage_time * _coerce(Medium, medium).speed


def expected_time_analytic(n: int, p: float, modes: int = 1, strategy: Strategy | str = Strategy.PARALLEL_WITH_MEMORY) -> float:
    """Mean slots to an end-to-end pair with ideal swaps and memories.

    Serial: n / p_eff.  Parallel without memory: 1 / p_eff^n.  Parallel with
    ideal memory: E[max of n geometric(p_eff)] from the complementary CDF sum.
    """
    strategy = _coerce(Strategy, strategy)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    p_eff = multiplexed_success(p, modes)
    if strategy is Strategy.SERIAL:
        return n / p_eff
    if strategy is Strategy.PARALLEL_NO_MEMORY:
        return p_eff ** (-n)
    q = 1.0 - p_eff
    if q == 0.0:
        return 1.0
    total, k = 0.0, 0
    while True:
        term = -math.expm1(n * math.log1p(-(q**k))) if k else 1.0
        total += term
        # remaining tail is below term * q / (1 - q)
        if term * q / (1.0 - q) <= 1e-12 * total:
            return total
        k += 1


# --- swap schedule ----------------------------------------------------------


@dataclass(frozen=True)
class _Node:
    lo: int  # first link index
    hi: int  # last link index (inclusive)
    left: int | None = None
    right: int | None = None

    @property
    def span(self) -> int:
        return self.hi - self.lo + 1


def _build_tree(n: int, left_associative: bool) -> list[_Node]:
    """Nodes 0..n-1 are links; internal nodes follow in post-order; the last is the root."""
    nodes = [_Node(i, i) for i in range(n)]

    if left_associative:
        acc = 0
        for i in range(1, n):
            nodes.append(_Node(0, i, acc, i))
            acc = len(nodes) - 1
        return nodes

    def build(lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        mid = (lo + hi + 1) // 2
        left, right = build(lo, mid - 1), build(mid, hi)
        nodes.append(_Node(lo, hi, left, right))
        return len(nodes) - 1

    build(0, n - 1)
    return nodes


def _signal_delay(nodes: list[_Node], idx: int) -> int:
    """Slots for the swap result to reach both ends of the joined span."""
    node = nodes[idx]
    return max(nodes[node.left].span, nodes[node.right].span)


@dataclass
class _Trial:
    slots: int | None
    retrieval: float
    fidelity: float
    longest_hold: int
    attempts: int
    successes: int


class _Engine:
    def __init__(self, config: RepeaterConfig, strategy: Strategy, max_slots: int):
        self.config = config
        self.strategy = strategy
        self.max_slots = max_slots
        n = config.num_links
        self.n = n
        self.p = link_success_prob(config)
        self.modes = config.memory.multimode_capacity
        self.p_eff = multiplexed_success(self.p, self.modes)
        serial = strategy is Strategy.SERIAL
        self.nodes = _build_tree(n, left_associative=serial or not config.canonical_schedule)
        self.internal = list(range(n, len(self.nodes)))
        self.root = len(self.nodes) - 1
        self.delays = {i: (_signal_delay(self.nodes, i) if config.classical_comm else 0) for i in self.internal}
        tau = config.memory.storage_time
        self.decay_per_slot = 0.0 if math.isinf(tau) else config.slot / tau
        # for serial gating: link i may attempt once the segment ending at i-1 is ready
        self.prefix_node = {}
        if serial:
            self.prefix_node = {1: 0} | {i + 1: n + i - 1 for i in range(1, n - 1)}
        # failure-probability thresholds per mode for sampling the mode index
        self.mode_cdf = np.array([multiplexed_success(self.p, j) for j in range(1, self.modes + 1)])

    def _decay(self, held: int) -> float:
        return math.exp(-held * self.decay_per_slot) if self.decay_per_slot else 1.0

    def _allowed(self, i: int, slot: int, ready: list[int]) -> bool:
        if self.strategy is not Strategy.SERIAL or i == 0:
            return True
        prefix = self.prefix_node[i]
        return 0 <= ready[prefix] < slot

    def run_memory(self, rng: np.random.Generator) -> _Trial:
        n, nodes = self.n, self.nodes
        links = [LinkState() for _ in range(n)]
        ready = [-1] * len(nodes)
        width = n + len(self.internal)
        block = rng.random((64, width))
        row = 0
        attempts = successes = 0
        for slot in range(1, self.max_slots + 1):
            if row == block.shape[0]:
                block = rng.random((64, width))
                row = 0
            u = block[row]
            row += 1
            for i, link in enumerate(links):
                if link.created_at is not None or link.blocked_until >= slot or not self._allowed(i, slot, ready):
                    continue
                link.attempts += 1
                attempts += 1
                if u[i] < self.p_eff:
                    link.created_at = slot
                    link.mode_index = int(np.searchsorted(self.mode_cdf, u[i], side="right"))
                    ready[i] = slot
                    successes += 1
            for col, idx in enumerate(self.internal, start=n):
                if ready[idx] >= 0:
                    continue
                node = nodes[idx]
                a, b = ready[node.left], ready[node.right]
                if a < 0 or b < 0 or a > slot or b > slot:
                    continue
                left_end = links[nodes[node.left].hi].created_at
                right_end = links[nodes[node.right].lo].created_at
                prob = self.config.swap_success * self._decay(slot - left_end) * self._decay(slot - right_end)
                if u[col] < prob:
                    ready[idx] = slot + self.delays[idx]
                else:
                    known = slot + self.delays[idx]
                    for j in range(node.lo, node.hi + 1):
                        links[j] = LinkState(attempts=links[j].attempts, blocked_until=known)
                    for k, other in enumerate(nodes):
                        if node.lo <= other.lo and other.hi <= node.hi:
                            ready[k] = -1
            if ready[self.root] >= 0:
                done = ready[self.root]
                first = links[0].created_at
                last = links[-1].created_at
                mem = self.config.memory
                retrieval = (mem.efficiency * self._decay(done - first)) * (mem.efficiency * self._decay(done - last))
                oldest = min(link.created_at for link in links)
                return _Trial(done, retrieval, mem.fidelity ** (2 * n), done - oldest, attempts, successes)
        return _Trial(None, math.nan, math.nan, 0, attempts, successes)

    def run_no_memory(self, rng: np.random.Generator) -> _Trial:
        # all links in one slot and every swap immediately; geometric jump to that slot
        q = self.p_eff**self.n * self.config.swap_success ** (self.n - 1)
        slots = int(rng.geometric(q))
        delay = self.delays.get(self.root, 0)
        slots += delay
        if slots > self.max_slots:
            return _Trial(None, math.nan, math.nan, 0, self.n * self.max_slots, 0)
        return _Trial(slots, math.nan, 1.0, 0, self.n * (slots - delay), self.n)


def simulate_chain(
    config: RepeaterConfig,
    strategy: Strategy | str = Strategy.PARALLEL_WITH_MEMORY,
    trials: int = 10_000,
    seed: int = 0,
    max_slots: int = DEFAULT_MAX_SLOTS,
) -> SimResult:
    """Run ``trials`` independent deliveries; trial ``i`` uses the ``i``-th child of ``seed``."""
    strategy = _coerce(Strategy, strategy)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not config.canonical_schedule and strategy is Strategy.PARALLEL_WITH_MEMORY:
        warnings.warn(
            f"num_links={config.num_links} is not a power of two; using a left-associative swap schedule",
            stacklevel=2,
        )
    engine = _Engine(config, strategy, max_slots)
    run = engine.run_no_memory if strategy is Strategy.PARALLEL_NO_MEMORY else engine.run_memory

    results = [run(np.random.default_rng(child)) for child in np.random.SeedSequence(seed).spawn(trials)]
    delivered = np.array([r.slots is not None for r in results])
    slots = np.array([r.slots for r in results if r.slots is not None], dtype=float)
    done = [r for r in results if r.slots is not None]
    tau = config.memory.storage_time
    longest = np.mean([r.longest_hold for r in done]) if done else math.nan
    margin = 0.0 if math.isinf(tau) else 10.0 * longest * config.slot / tau
    return SimResult(
        strategy=strategy,
        delivered=delivered,
        delivery_slots=slots,
        slot_duration=config.slot,
        trials=trials,
        seed=seed,
        mean_retrieval_efficiency=float(np.mean([r.retrieval for r in done])) if done else math.nan,
        mean_fidelity=float(np.mean([r.fidelity for r in done])) if done else math.nan,
        link_attempts=sum(r.attempts for r in results),
        link_successes=sum(r.successes for r in results),
        memory_margin=margin,
    )


def with_links(config: RepeaterConfig, num_links: int) -> RepeaterConfig:
    return replace(config, num_links=num_links)
