"""Comparison miner-selection schemes and decentralization/fairness metrics.

Random selection hands each block to a uniformly random peer with no
eligibility filter (which is exactly why it is unfair: winners regularly sit
below the baseline stake). Priority selection always picks the richest of a
greedy contender subset and lets winnings compound, the rich-get-richer
dynamic. Both share the epoch plan with the auction scheme so the selection
policy is the only difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epoch import EpochPlan
from .model import ConfigError, Peer


@dataclass(frozen=True)
class BlockResult:
    block_index: int
    baseline_stake: int
    winner: int
    winner_balance_pre: int


@dataclass(frozen=True)
class SchemeResult:
    """Per-epoch outcome of one selection scheme, Table-style."""

    scheme: str
    epoch_length: int
    unique_miners: int
    mean_baseline_stake: float
    mean_winner_balance_pre: float
    violations: int
    per_block: tuple[BlockResult, ...]

    @classmethod
    def from_blocks(cls, scheme: str, plan: EpochPlan,
                    per_block: list[BlockResult]) -> "SchemeResult":
        stakes = plan.baseline_stakes()
        balances = [b.winner_balance_pre for b in per_block]
        return cls(
            scheme=scheme,
            epoch_length=plan.length,
            unique_miners=len({b.winner for b in per_block}),
            mean_baseline_stake=sum(stakes) / len(stakes) if stakes else 0.0,
            mean_winner_balance_pre=sum(balances) / len(balances) if balances else 0.0,
            violations=sum(1 for b in per_block
                           if b.winner_balance_pre < b.baseline_stake),
            per_block=tuple(per_block))


def run_random_scheme(peers: dict[int, Peer], plan: EpochPlan,
                      rng: np.random.Generator) -> SchemeResult:
    """Uniformly random winner per block, eligibility deliberately ignored.
    Winners collect their block's fees; ``peers`` balances are mutated, so
    pass a copy when comparing schemes on one world."""
    ids = sorted(peers)
    results = []
    for block in plan.blocks:
        winner = ids[int(rng.integers(len(ids)))]
        results.append(BlockResult(block_index=block.index,
                                   baseline_stake=block.baseline_stake,
                                   winner=winner,
                                   winner_balance_pre=peers[winner].balance))
        peers[winner].balance += block.total_fees
    return SchemeResult.from_blocks("random", plan, results)


def run_priority_scheme(peers: dict[int, Peer], plan: EpochPlan,
                        greedy_set: list[int]) -> SchemeResult:
    """Highest-balance greedy contender wins every block, fees compound, and
    repeat wins are allowed; ties break toward the lowest node id."""
    if not greedy_set:
        raise ConfigError("priority selection needs a non-empty greedy set")
    results = []
    for block in plan.blocks:
        winner = max(greedy_set, key=lambda nid: (peers[nid].balance, -nid))
        results.append(BlockResult(block_index=block.index,
                                   baseline_stake=block.baseline_stake,
                                   winner=winner,
                                   winner_balance_pre=peers[winner].balance))
        peers[winner].balance += block.total_fees
    return SchemeResult.from_blocks("priority", plan, results)


def pick_greedy_set(peers: dict[int, Peer], fraction: float = 0.02) -> list[int]:
    """The richest ``fraction`` of peers (at least one)."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError("greedy fraction must lie in (0, 1]")
    count = max(1, int(len(peers) * fraction))
    ranked = sorted(peers.values(), key=lambda p: (-p.balance, p.node_id))
    return [p.node_id for p in ranked[:count]]


def decentralization_beta(unique_miners: int, n: int) -> float:
    """Fraction of the network that actually mined: unique winners over
    network size."""
    if n < 1:
        raise ConfigError(f"network size must be >= 1, got {n}")
    return unique_miners / n


@dataclass(frozen=True)
class GammaResult:
    value: float
    classification: str


def gamma(beta_e: float, beta_other: float) -> GammaResult:
    """Decentralization gap between the auction scheme and a comparator,
    with the three-way reading of its sign."""
    for b in (beta_e, beta_other):
        if not 0.0 <= b <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {b}")
    value = beta_e - beta_other
    if value < 0:
        label = "less decentralized"
    elif value == 0:
        label = "equally decentralized"
    else:
        label = "more decentralized"
    return GammaResult(value=value, classification=label)


def fairness_violations(per_block: list[BlockResult] | tuple[BlockResult, ...]) -> int:
    """Winners whose pre-auction balance sat below their block's baseline
    stake; a secure scheme records zero."""
    return sum(1 for b in per_block if b.winner_balance_pre < b.baseline_stake)


def balance_histogram(balances, bin_width: int = 1_000) -> dict[int, int]:
    """Peer balances clustered into fixed-width bins keyed by lower edge."""
    if bin_width <= 0:
        raise ConfigError(f"bin width must be > 0, got {bin_width}")
    bins: dict[int, int] = {}
    for b in balances:
        lower = (b // bin_width) * bin_width
        bins[lower] = bins.get(lower, 0) + 1
    return dict(sorted(bins.items()))
