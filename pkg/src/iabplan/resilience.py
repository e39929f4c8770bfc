"""Random backhaul-link failure injection and coverage-retention statistics.

A failure takes out a physical link, i.e. both directions of a node pair
when both were active (the blockage reading of a 60 GHz outage). After
injection, a deployed node survives only if a directed path of surviving
active links still reaches it from some donor; retention compares the
cells covered by the survivors against the pre-failure coverage. Capacity
is deliberately ignored post-failure: the backup reservation on every
link exists precisely to absorb rerouted traffic.
"""

from __future__ import annotations

import random
import statistics
from collections import deque
from dataclasses import dataclass

from .netgraph import NetworkState, access_cover_map
from .scenario import Scenario

Link = tuple[int, int]


@dataclass
class FailureTrialStats:
    """Retention distribution for one failure fraction."""

    failure_fraction: float
    trials: int
    retention_mean: float
    retention_std: float
    retention_min: float
    retentions: list[float]


def _physical_links(active_links: set[Link]) -> list[tuple[int, int]]:
    """Unordered node pairs underlying the active directed links, sorted."""
    return sorted({(min(p, q), max(p, q)) for p, q in active_links})


def inject_failures(state: NetworkState, fraction: float, rng_seed: int) -> set[Link]:
    """Fail floor(fraction * n_physical_links) physical links, both directions.

    Sampling is uniform without replacement and deterministic per seed.
    Returns the failed directed links (a subset of the active set).
    """
    if not 0 <= fraction <= 1:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    physical = _physical_links(state.active_links)
    n_fail = int(fraction * len(physical))
    rng = random.Random(rng_seed)
    chosen = rng.sample(physical, n_fail) if n_fail else []
    failed: set[Link] = set()
    for a, b in chosen:
        for link in ((a, b), (b, a)):
            if link in state.active_links:
                failed.add(link)
    return failed


def post_failure_retention(
    scenario: Scenario, state: NetworkState, failed_links: set[Link]
) -> float:
    """Fraction of pre-failure covered cells still covered by survivors.

    Donors always survive (fiber-fed); a deployed candidate survives iff
    some donor still reaches it over surviving active links.
    """
    if not failed_links <= state.active_links:
        raise ValueError("failed_links must be a subset of the active links")
    surviving = state.active_links - failed_links

    outgoing: dict[int, list[int]] = {}
    for p, q in surviving:
        outgoing.setdefault(p, []).append(q)

    alive: set[int] = set(state.donor_ids)
    frontier = deque(sorted(state.donor_ids))
    while frontier:
        p = frontier.popleft()
        for q in outgoing.get(p, ()):
            if q in state.deployed and q not in alive:
                alive.add(q)
                frontier.append(q)

    cover = access_cover_map(scenario)
    before: set[int] = set()
    for node in state.deployed:
        before |= cover[node]
    if not before:
        return 1.0
    after: set[int] = set()
    for node in alive:
        after |= cover[node]
    return len(after & before) / len(before)


def _trial_seed(master_seed: int, fraction_index: int, trial_index: int) -> int:
    return master_seed * 1_000_003 + fraction_index * 100_003 + trial_index


def run_trials(
    scenario: Scenario,
    state: NetworkState,
    fractions: tuple[float, ...] = (0.1, 0.2, 0.3),
    n_trials: int = 100,
    master_seed: int = 0,
) -> list[FailureTrialStats]:
    """Independent failure trials per fraction, reproducible per master seed."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    out = []
    for f_idx, fraction in enumerate(fractions):
        retentions = []
        for t_idx in range(n_trials):
            failed = inject_failures(state, fraction, _trial_seed(master_seed, f_idx, t_idx))
            retentions.append(post_failure_retention(scenario, state, failed))
        out.append(
            FailureTrialStats(
                failure_fraction=fraction,
                trials=n_trials,
                retention_mean=statistics.fmean(retentions),
                retention_std=statistics.pstdev(retentions),
                retention_min=min(retentions),
                retentions=retentions,
            )
        )
    return out
