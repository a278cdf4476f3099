"""Closed-form privacy metrics, their Monte Carlo counterparts, the packet
budget calculator and query-pattern scheduling."""
from __future__ import annotations

import math
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, FrozenSet

from ._rng import derive_seed
from .errors import EmptyNetwork, NoRoom, PoolUnderflow, TooManyInfected
from .netsim import (AdversaryState, AdversaryView, adversary_guess, known_nodes, observe_route)
from .onion import RECORD_LEN, RoutePlan, select_overlay_path, select_path
from .topology import DEFAULT_RADIO_RANGE, TopologyGraph, default_side, random_geometric_topology

PUBLISHED_MAX_T = 22
SWEEP_HEADER = ["n", "z", "t", "frac_infected", "expected_known", "mc_known_mean", "mc_ci95",
                "eq3_prob", "empirical_prob"]
BUDGET_HEADER = ["mode", "Lr", "b", "payload_bits", "max_t"]


def _check_counts(n: int, z: int) -> None:
    if n <= 0:
        raise EmptyNetwork("n must be positive")
    if not 0 <= z <= n:
        raise TooManyInfected(f"need 0 <= z <= n, got z={z}, n={n}")


def expected_known_nodes(n: int, z: int, t: int) -> float:
    """Expected known nodes among the t depositing route positions."""
    _check_counts(n, z)
    f = z / n
    return t * (f + f * (n - z) / n)


def breaking_probability(n: int, z: int, t: int) -> float:
    """Chance the adversary guesses the target: 1 / (n - z + t z / n)."""
    _check_counts(n, z)
    return 1.0 / (n - z + t * z / n)


def figure3_sweep(n_list: Sequence[int] = (100, 1000, 10000), t: int = 20,
                  fractions: Optional[Sequence[float]] = None) -> List[dict]:
    """Breaking probability versus infected fraction, one curve per n."""
    if fractions is None:
        fractions = [i / 20 for i in range(21)]
    rows = []
    for n in n_list:
        for frac in fractions:
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"fraction {frac} outside [0, 1]")
            z = round(frac * n)
            rows.append({"n": n, "z": z, "t": t, "frac_infected": frac,
                         "expected_known": expected_known_nodes(n, z, t),
                         "eq3_prob": breaking_probability(n, z, t)})
    return rows


def max_route_length(reading_bits: int = 16, id_bits: int = 16, payload_bits: int = 920,
                     mode: str = "paper-exact", eph_bytes: int = 21) -> int:
    """Largest t whose query fits ``payload_bits``.

    ``paper-exact`` counts 160 + (L_r + b) t + t ceil(log2 t) bits;
    ``byte-aligned`` counts the real wire layout with 4-byte layer records.
    """
    if payload_bits < 160:
        raise NoRoom("payload smaller than the ephemeral element")
    if mode == "paper-exact":
        def size(t):
            return 160 + (reading_bits + id_bits) * t + t * math.ceil(math.log2(t))
    elif mode == "byte-aligned":
        record = 2 + math.ceil(id_bits / 8)
        if record != RECORD_LEN:
            raise ValueError("byte-aligned layout assumes 16-bit ids")

        def size(t):
            return 8 * (eph_bytes + record * (t + 2) + t * math.ceil(reading_bits / 8))
    else:
        raise ValueError(f"unknown budget mode {mode!r}")
    best = 0
    t = 1
    # Both size functions are increasing in t.
    while size(t) <= payload_bits:
        best = t
        t += 1
    if best == 0:
        raise NoRoom(f"no route length fits {payload_bits} bits")
    return best


def budget_note(computed: int) -> str:
    return (f"paper-exact accounting gives t={computed}; the published estimate is "
            f"t={PUBLISHED_MAX_T}, which needs {160 + 32 * 22 + 22 * 5} bits > 920 "
            f"with ceil(log2 t) slot bits")


# -- Monte Carlo -----------------------------------------------------------

MC_MEAN_DEGREE = 20.0  # long self-avoiding walks (t = 20) need a denser graph


def mc_topology(n: int, seed: int = 0) -> TopologyGraph:
    side = default_side(n, DEFAULT_RADIO_RANGE, MC_MEAN_DEGREE)
    return random_geometric_topology(n, side, DEFAULT_RADIO_RANGE,
                                     seed=derive_seed(seed, "mc-topology", n), min_degree=2)


def _known_chunk(args) -> Tuple[int, int]:
    g, z, t, seed, lo, hi = args
    n = g.n
    total = sq = 0
    for trial in range(lo, hi):
        rng = random.Random(derive_seed(seed, "known", trial))
        infected = set(rng.sample(range(1, n + 1), z))
        plan = select_path(g, rng.randint(1, n), t, rng)
        p = plan.path
        x = sum(1 for j in range(1, t + 1) if p[j] in infected or p[j - 1] in infected)
        total += x
        sq += x * x
    return total, sq


def _guess_chunk(args) -> int:
    g, z, t, seed, lo, hi, strong = args
    n = g.n
    wins = 0
    for trial in range(lo, hi):
        rng = random.Random(derive_seed(seed, "guess", trial))
        adv = AdversaryState(frozenset(rng.sample(range(1, n + 1), z)))
        target = rng.randint(1, n)
        plan = select_path(g, target, t, rng)
        view = AdversaryView(tuple(observe_route(plan, adv.infected)),
                             (plan.path[0], plan.path[-1]))
        wins += adversary_guess(adv, g, view, rng, strong) == target
    return wins


def _chunks(trials: int, jobs: int) -> List[Tuple[int, int]]:
    k = max(1, min(jobs, trials))
    bounds = [trials * i // k for i in range(k + 1)]
    return list(zip(bounds, bounds[1:]))


def _run(fn, argsets, jobs: int):
    if jobs <= 1 or len(argsets) == 1:
        return [fn(a) for a in argsets]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, argsets))


@dataclass(frozen=True)
class MCResult:
    mean: float
    ci95: float
    trials: int


def mc_known_nodes(n: int, z: int, t: int, trials: int = 10_000, seed: int = 0,
                   graph: Optional[TopologyGraph] = None, jobs: int = 1) -> MCResult:
    """Mean number of known depositing route nodes over random infections and routes.

    Per-trial seeds are derived from ``seed`` and the trial index, so serial and
    parallel runs return identical results.
    """
    _check_counts(n, z)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    g = graph if graph is not None else mc_topology(n, seed)
    parts = _run(_known_chunk, [(g, z, t, seed, lo, hi) for lo, hi in _chunks(trials, jobs)], jobs)
    total = sum(p[0] for p in parts)
    sq = sum(p[1] for p in parts)
    mean = total / trials
    var = (sq - total * total / trials) / (trials - 1) if trials > 1 else 0.0
    return MCResult(mean, 1.96 * math.sqrt(max(var, 0.0) / trials), trials)


@dataclass(frozen=True)
class GuessResult:
    successes: int
    trials: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    def within_3sigma(self, p: float) -> bool:
        return abs(self.rate - p) <= 3 * math.sqrt(p * (1 - p) / self.trials)


def mc_breaking_probability(n: int, z: int, t: int, trials: int = 100_000, seed: int = 0,
                            graph: Optional[TopologyGraph] = None, strong: bool = False,
                            jobs: int = 1) -> GuessResult:
    """Empirical success of ``adversary_guess`` against uniformly chosen targets."""
    _check_counts(n, z)
    g = graph if graph is not None else mc_topology(n, seed)
    parts = _run(_guess_chunk, [(g, z, t, seed, lo, hi, strong)
                                for lo, hi in _chunks(trials, jobs)], jobs)
    return GuessResult(sum(parts), trials)


def known_interior(plan: RoutePlan, infected, g: TopologyGraph, mode: str) -> int:
    known = known_nodes(observe_route(plan, infected, g, mode))
    return sum(1 for s in plan.path[1:-1] if s in known)


def overlay_vs_basic(g: TopologyGraph, z: int, t: int, trials: int = 2000,
                     seed: int = 0) -> Tuple[float, float]:
    """Paired mean known-node counts (basic, overlay) under shared infections."""
    _check_counts(g.n, z)
    basic = overlay = 0
    for trial in range(trials):
        rng = random.Random(derive_seed(seed, "paired", trial))
        infected = frozenset(rng.sample(range(1, g.n + 1), z))
        target = rng.randint(1, g.n)
        b_plan = select_path(g, target, t, random.Random(derive_seed(seed, "basic", trial)))
        o_plan = select_overlay_path(g, target, t, random.Random(derive_seed(seed, "overlay", trial)))
        basic += known_interior(b_plan, infected, g, "basic")
        overlay += known_interior(o_plan, infected, g, "overlay")
    return basic / trials, overlay / trials


# -- Query-pattern privacy -------------------------------------------------

@dataclass(frozen=True)
class PatternPool:
    pool: Tuple[int, ...]
    c: int

    def validate(self, t: int) -> None:
        if self.c < 0 or self.c > len(self.pool) or self.c > t - 1:
            raise PoolUnderflow(f"c={self.c} with |pool|={len(self.pool)} and t={t}")

    @classmethod
    def random(cls, g: TopologyGraph, size: int, c: int, seed: int) -> "PatternPool":
        if size > g.n:
            raise PoolUnderflow(f"pool of {size} from {g.n} sensors")
        rng = random.Random(derive_seed(seed, "pool"))
        return cls(tuple(sorted(rng.sample(range(1, g.n + 1), size))), c)


def pattern_schedule(pool: PatternPool, g: TopologyGraph, targets: Sequence[int], t: int,
                     seed: int = 0) -> List[RoutePlan]:
    """Overlay plans whose interiors mix the target, c pool members and
    t - c - 1 population draws."""
    pool.validate(t)
    plans = []
    for i, target in enumerate(targets):
        if target not in g:
            raise ValueError(f"target {target} not in topology")
        rng = random.Random(derive_seed(seed, "pattern", i))
        plans.append(select_overlay_path(g, target, t, rng, pool.pool, pool.c))
    return plans


def adversary_view(plan: RoutePlan, infected, g: Optional[TopologyGraph] = None,
                   mode: str = "overlay") -> FrozenSet:
    """Route members the adversary sees and cannot rule out as depositors."""
    obs = observe_route(plan, infected, g, mode)
    idle = {o.observer for o in obs if o.kind == "onion" and not o.deposited}
    return frozenset(known_nodes(obs) - idle)


def _tv(p: Mapping[int, float], q: Mapping[int, float], support: Iterable[int]) -> float:
    return 0.5 * sum(abs(p.get(s, 0.0) - q.get(s, 0.0)) for s in support)


def frequency_leakage(views: Sequence[Iterable[int]], true_frequencies: Mapping[int, float],
                      n: int) -> float:
    """How much of the true target-frequency pattern the adversary recovers, in [0, 1].

    The adversary counts how often each sensor shows up in its per-query views,
    takes the median occurrence rate as background, and spreads probability
    over sensors significantly (3 sigma) above it in proportion to their excess.
    The score is the part of TV(true, uniform) that this estimate reproduces,
    max(0, TV(true, uniform) - TV(estimate, true)), divided by the largest
    possible TV from uniform. Fewer than two queries carry no frequency
    information and score 0.
    """
    m = len(views)
    if m < 2:
        return 0.0
    counts: Dict[int, int] = {}
    for view in views:
        for s in set(view):
            counts[s] = counts.get(s, 0) + 1
    rates = [counts.get(s, 0) / m for s in range(1, n + 1)]
    background = statistics.median(rates)
    p = max(background, 1.0 / m)
    threshold = background + 3 * math.sqrt(p * (1 - p) / m)
    excess = {s: r - background for s, r in enumerate(rates, start=1) if r > threshold}
    uniform = {s: 1.0 / n for s in range(1, n + 1)}
    if excess:
        total = sum(excess.values())
        estimate = {s: e / total for s, e in excess.items()}
    else:
        estimate = uniform
    mass = sum(true_frequencies.values())
    truth = {s: f / mass for s, f in true_frequencies.items()}
    support = range(1, n + 1)
    gain = _tv(truth, uniform, support) - _tv(estimate, truth, support)
    return min(1.0, max(0.0, gain) / (1 - 1 / n))


def skewed_workload(targets: Sequence[int], weights: Sequence[float], m: int,
                    seed: int) -> List[int]:
    rng = random.Random(derive_seed(seed, "workload"))
    return rng.choices(list(targets), weights=list(weights), k=m)
