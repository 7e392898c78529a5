"""Phase-level PBFT among an epoch's miners to agree on the mempool view
that seeds the next epoch.

Replicas exchange Pre-Prepare/Prepare/Commit/Reply messages; with ``n``
replicas the round tolerates ``floor((n - 1) / 3)`` faults, the classic
3f+1 bound. Faulty primaries trigger a view change that rotates to the next
node id in ascending order, bounded at ``n`` attempts. Messages are counted
exactly per phase; the quadratic Prepare/Commit fan-out is what limits PBFT
to the small per-epoch miner committee rather than the whole network.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ConfigError, Transaction


class Behavior(enum.Enum):
    HONEST = "honest"
    CRASH = "crash"
    EQUIVOCATING = "equivocating"


@dataclass
class Replica:
    """One PBFT participant with its own, possibly divergent, mempool view."""

    node_id: int
    local_view: tuple[Transaction, ...]
    behavior: Behavior = Behavior.HONEST


@dataclass(frozen=True)
class PhaseTrace:
    """Exact message counts for one view attempt."""

    view: int
    primary: int
    pre_prepare: int
    prepare: int
    commit: int
    reply: int

    @property
    def total(self) -> int:
        return self.pre_prepare + self.prepare + self.commit + self.reply


@dataclass
class PbftOutcome:
    decided: bool
    agreed_view: tuple[Transaction, ...] | None
    rounds: list[PhaseTrace]
    faulty_detected: list[int]
    view_changes: int = 0

    @property
    def total_messages(self) -> int:
        return sum(r.total for r in self.rounds)


def fault_tolerance(n_replicas: int) -> int:
    """Maximum faults a committee of ``n_replicas`` tolerates."""
    return (n_replicas - 1) // 3


def select_primary(miners: Sequence[int], seed: int | np.random.Generator) -> int:
    """Uniform seeded choice of the primary replica; replayable per seed."""
    if len(miners) == 0:
        raise ConfigError("cannot select a primary from an empty miner set")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return miners[int(rng.integers(len(miners)))]


def diverge_views(base: Sequence[Transaction], node_ids: Sequence[int],
                  loss_probability: float, seed: int | np.random.Generator,
                  behaviors: dict[int, Behavior] | None = None) -> list[Replica]:
    """Build replicas whose views drop each transaction independently with
    the given propagation-loss probability."""
    if not 0.0 <= loss_probability <= 1.0:
        raise ConfigError("loss probability must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    behaviors = behaviors or {}
    replicas = []
    base = tuple(base)
    for nid in node_ids:
        if loss_probability == 0.0:
            view = base
        elif loss_probability == 1.0:
            view = ()
        else:
            keep = rng.random(len(base)) >= loss_probability
            view = tuple(tx for tx, k in zip(base, keep) if k)
        replicas.append(Replica(node_id=nid, local_view=view,
                                behavior=behaviors.get(nid, Behavior.HONEST)))
    return replicas


def run_pbft(replicas: Sequence[Replica], primary: int,
             max_view_changes: int | None = None) -> PbftOutcome:
    """Run one agreement round over the primary's mempool view.

    Decides iff the actual fault count is within the 3f+1 tolerance; on
    success every honest replica adopts the primary's proposal verbatim (no
    merging). Crash replicas stay silent, equivocating replicas participate
    with divergent digests, and both are listed as detected when they act.
    """
    if not replicas:
        raise ConfigError("PBFT requires at least one replica")
    n = len(replicas)
    by_id = {r.node_id: r for r in replicas}
    if primary not in by_id:
        raise ConfigError(f"primary {primary} is not a replica")
    quorum = n - fault_tolerance(n)
    honest = [r for r in replicas if r.behavior is Behavior.HONEST]
    faulty = sorted(r.node_id for r in replicas if r.behavior is not Behavior.HONEST)

    rotation = sorted(by_id)
    attempts = max_view_changes + 1 if max_view_changes is not None else n
    outcome = PbftOutcome(decided=False, agreed_view=None, rounds=[],
                          faulty_detected=[])
    current = primary
    for view in range(attempts):
        leader = by_id[current]
        if leader.behavior is not Behavior.HONEST:
            # crash primary sends nothing; equivocating primary floods
            # divergent proposals -- either way the backups view-change
            pre = 0 if leader.behavior is Behavior.CRASH else n - 1
            outcome.rounds.append(PhaseTrace(view=view, primary=current,
                                             pre_prepare=pre, prepare=0,
                                             commit=0, reply=0))
            if current not in outcome.faulty_detected:
                outcome.faulty_detected.append(current)
            outcome.view_changes += 1
            current = rotation[(rotation.index(current) + 1) % len(rotation)]
            continue

        speaking = [r for r in replicas if r.behavior is not Behavior.CRASH]
        backups_speaking = sum(1 for r in speaking if r.node_id != current)
        matching = len(honest)  # primary's pre-prepare counts as its prepare
        prepared = matching >= quorum
        committers = (len(honest) if prepared else 0) + sum(
            1 for r in speaking if r.behavior is Behavior.EQUIVOCATING)
        decided = prepared and matching >= quorum
        trace = PhaseTrace(view=view, primary=current,
                           pre_prepare=n - 1,
                           prepare=backups_speaking * (n - 1),
                           commit=committers * (n - 1),
                           reply=len(honest) if decided else 0)
        outcome.rounds.append(trace)
        for nid in faulty:
            if nid not in outcome.faulty_detected:
                outcome.faulty_detected.append(nid)
        if decided:
            proposal = leader.local_view
            for r in honest:
                r.local_view = proposal
            outcome.decided = True
            outcome.agreed_view = proposal
        return outcome

    # every rotation landed on a faulty primary
    outcome.faulty_detected = faulty
    return outcome
