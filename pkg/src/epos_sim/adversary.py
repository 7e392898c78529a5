"""Attack-probability calculators and executable adversary scenarios.

The closed forms compare conventional proof-of-stake, where success depends
on the adversary's coin fraction, against the block-auction scheme, where
success depends on how many node identities the adversary controls. The
idealized Monte-Carlo samplers reproduce the exact model behind the closed
forms (all peers bidding equally, the mining record barring repeat winners
within the attack window) and serve as independent oracles; the scenario
runner drives the full auction/mining pipeline instead and may legitimately
diverge from the idealization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import auction, epoch, mining
from .model import (
    ConfigError,
    LedgerState,
    Mempool,
    MiningRecord,
    Peer,
    Transaction,
)


def pos_double_spend_prob(alpha: float, m: int) -> float:
    """Probability a conventional-PoS adversary holding an ``alpha`` coin
    fraction builds a longer private chain of ``m`` consecutive blocks.
    Certain at half the coins; below that it decays exponentially in ``m``."""
    _check_alpha(alpha)
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    if alpha >= 0.5:
        return 1.0
    if alpha == 0.0:
        return 0.0
    return (alpha / (1.0 - alpha)) ** m


def pos_next_block_prob(alpha: float) -> float:
    """Probability a conventional-PoS adversary wins the next block auction."""
    _check_alpha(alpha)
    if alpha >= 0.5:
        return 1.0
    return min(alpha / (1.0 - alpha), 1.0)


def epos_next_block_prob(n: int, p: int) -> float:
    """Probability an adversary controlling ``p`` of ``n`` node identities
    wins the next block under all-greedy equal bidding."""
    _check_identities(n, p)
    return p / n


def epos_double_spend_prob(n: int, p: int, m: int) -> float:
    """Probability the adversary wins the first block plus ``m`` more in a
    row under all-greedy equal bidding.

    The product runs over m+1 auction rounds with the candidate pool
    shrinking by one each round. With a single controlled identity the
    identity stays in the pool each round; with several, each win consumes
    one of them, so more than ``p`` wins in the window is impossible.
    """
    _check_identities(n, p)
    if m < 0:
        raise ConfigError(f"m must be >= 0, got {m}")
    if m >= n:
        raise ConfigError(f"attack window m={m} must be shorter than the pool n={n}")
    if p == 1:
        return float(math.prod(1.0 / (n - i) for i in range(m + 1)))
    if m > p:
        return 0.0
    return float(math.prod((p - i) / (n - i) for i in range(m + 1)))


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")


def _check_identities(n: int, p: int) -> None:
    if n < 1:
        raise ConfigError(f"network size must be >= 1, got {n}")
    if not 1 <= p <= n:
        raise ConfigError(f"controlled identities p={p} must lie in [1, n={n}]")


def mc_next_block_successes(n: int, p: int, trials: int,
                            rng: np.random.Generator) -> int:
    """Idealized-auction oracle for the next-block probability: winner drawn
    uniformly from ``n`` identities, success iff it is one of the ``p``."""
    _check_identities(n, p)
    return int(np.count_nonzero(rng.integers(0, n, trials) < p))


def mc_double_spend_successes(n: int, p: int, m: int, trials: int,
                              rng: np.random.Generator) -> int:
    """Idealized-auction oracle for the consecutive-win probability.

    One identity: the pool shrinks by one per round while the adversary
    remains a candidate, so each round is an independent 1-in-(n-i) draw.
    Several identities: winners are drawn without replacement, so success
    means the first m+1 slots of a random ordering are all adversarial.
    """
    _check_identities(n, p)
    if m >= n:
        raise ConfigError(f"attack window m={m} must be shorter than the pool n={n}")
    if p == 1:
        ok = np.ones(trials, dtype=bool)
        for i in range(m + 1):
            ok &= rng.integers(0, n - i, trials) == 0
        return int(np.count_nonzero(ok))
    order = rng.random((trials, n)).argsort(axis=1)[:, :m + 1]
    return int(np.count_nonzero((order < p).all(axis=1)))


@dataclass(frozen=True)
class SweepRow:
    n: int
    p: int
    m: int
    alpha: float
    closed_form: float
    empirical: float
    trials: int


def sweep_closed_forms(n_max: int = 10, m_max: int = 2, trials: int = 100_000,
                       seed: int = 0) -> list[SweepRow]:
    """Cross-validate every feasible (n, p, m) against the Monte-Carlo
    oracle. m = 0 is the single next-block case; larger m adds consecutive
    blocks to the attack window."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in range(1, n_max + 1):
        for p in range(1, n + 1):
            for m in range(0, min(m_max, n - 1) + 1):
                closed = epos_double_spend_prob(n, p, m)
                hits = mc_double_spend_successes(n, p, m, trials, rng)
                rows.append(SweepRow(n=n, p=p, m=m, alpha=0.51,
                                     closed_form=closed,
                                     empirical=hits / trials, trials=trials))
    return rows


class Strategy(enum.Enum):
    MAX_BID = "max-bid"
    DOUBLE_SPEND = "double-spend"
    STAKE_THEFT = "stake-theft"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class AdversaryConfig:
    """An attacker profile: coin fraction ``alpha`` split across ``p``
    controlled identities, targeting ``m`` consecutive blocks beyond the
    first."""

    alpha: float
    p: int = 1
    m: int = 1
    strategy: Strategy = Strategy.MAX_BID

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        if self.p < 1:
            raise ConfigError("adversary must control at least one identity")
        if self.m < 1:
            raise ConfigError("attack window must target at least one block")


@dataclass(frozen=True)
class ScenarioSetup:
    """A deliberately small world for attack experiments: one block per
    epoch so every epoch is one auction round."""

    n: int = 5
    total_coins: int = 1_000_000
    epochs: int = 1_000
    seed: int = 7
    txs_per_block: int = 2
    fee: int = 1
    honest_pct: int = 9_900


@dataclass
class ScenarioReport:
    strategy: Strategy
    epochs: int
    adversary_wins: int
    win_rate: float
    double_spend_successes: int
    penalties: list[mining.PenaltyOutcome] = field(default_factory=list)
    compensation_paid: int = 0
    fallback_blocks: int = 0
    conservation_ok: bool = True


def run_attack_scenario(config: AdversaryConfig,
                        setup: ScenarioSetup = ScenarioSetup()) -> ScenarioReport:
    """Execute the configured strategy through the real auction and mining
    pipeline and report what the attacker actually achieved."""
    if config.p >= setup.n:
        raise ConfigError("scenario needs at least one honest peer")
    rng = np.random.default_rng(setup.seed)

    adv_ids = set(range(setup.n - config.p, setup.n))
    honest_ids = [i for i in range(setup.n) if i not in adv_ids]
    adv_total = int(config.alpha * setup.total_coins)
    peers: dict[int, Peer] = {}
    for k, nid in enumerate(sorted(adv_ids)):
        share = adv_total // config.p + (1 if k < adv_total % config.p else 0)
        peers[nid] = Peer(node_id=nid, balance=share)
    honest_total = setup.total_coins - adv_total
    for k, nid in enumerate(honest_ids):
        share = honest_total // len(honest_ids) + (1 if k < honest_total % len(honest_ids) else 0)
        peers[nid] = Peer(node_id=nid, balance=share)

    ledger = LedgerState(peers=peers)
    record = MiningRecord()
    keys = {nid: mining.generate_keypair(rng) for nid in sorted(peers)}
    registry = mining.KeyRegistry()
    for nid, kp in keys.items():
        registry.register(nid, kp.public_bytes)

    report = ScenarioReport(strategy=config.strategy, epochs=setup.epochs,
                            adversary_wins=0, win_rate=0.0,
                            double_spend_successes=0)
    next_tx_id = 0
    streak = 0
    pending: mining.EpochOutcome | None = None

    for j in range(1, setup.epochs + 1):
        if pending is not None:
            settlement = mining.settle_epoch(ledger, pending, True)
            report.penalties.extend(settlement.penalties)
            pending = None

        pool = Mempool()
        for k in range(setup.txs_per_block):
            sender = honest_ids[(next_tx_id + k) % len(honest_ids)]
            tx = Transaction(id=next_tx_id + k, fee=setup.fee, size=1,
                             sender=sender, recipient=honest_ids[0])
            ledger.fund_fee(sender, tx.fee)
            pool.insert(tx)
        next_tx_id += setup.txs_per_block

        plan = epoch.plan_epoch(j, pool.snapshot(), block_size=setup.txs_per_block,
                                block_time=600)
        sale = auction.Auction(plan, peers)
        if config.strategy is not Strategy.ABSTAIN:
            for nid in sorted(peers):
                pct = setup.honest_pct
                if nid in adv_ids and config.strategy is Strategy.STAKE_THEFT:
                    pct = auction.BPS_SCALE
                try:
                    sale.place_bid(nid, 1, pct)
                except auction.IneligibleBidError:
                    continue
        assignment = sale.finalize(record)
        committed = mining.commit_assignments(assignment, sale.bids, ledger, plan)
        report.fallback_blocks += len(committed.fallback_winners)

        outcomes = []
        adversary_won = False
        for idx in range(1, plan.length + 1):
            if idx in committed.entries:
                entry = committed.entries[idx]
                winner, locked = entry.winner, entry.locked_stake
                committed_part, baseline = entry.committed_stake, entry.baseline_stake
            else:
                winner = committed.fallback_winners[idx]
                locked = committed_part = 0
                baseline = plan.block(idx).baseline_stake
            drops: frozenset[int] = frozenset()
            if (config.strategy is Strategy.STAKE_THEFT and winner in adv_ids
                    and idx in committed.entries):
                block_txs = plan.block(idx).transactions
                drops = frozenset(tx.id for tx in block_txs[:max(1, len(block_txs) // 2)])
            result = mining.mine_block(plan.block(idx), winner, keys[winner], j,
                                       fraudulent_drop_ids=drops)
            for tx in result.removed_invalid + result.removed_fraudulent:
                ledger.void_fees(tx.fee)
            record.record_block(winner)
            ledger.chain.append(result.block)
            outcomes.append(mining.BlockOutcome(
                block_index=idx, miner=winner, baseline_stake=baseline,
                committed_stake=committed_part, locked_stake=locked,
                fees_collectable=result.block.plan.total_fees,
                victims=result.removed_fraudulent,
                via_fallback=idx not in committed.entries))
            if idx == 1 and winner in adv_ids:
                adversary_won = True
        pending = mining.EpochOutcome(epoch_index=j, blocks=tuple(outcomes))

        if adversary_won:
            report.adversary_wins += 1
            streak += 1
            if streak == config.m + 1:
                report.double_spend_successes += 1
                streak = 0
        else:
            streak = 0

    if pending is not None:
        settlement = mining.settle_epoch(ledger, pending, True)
        report.penalties.extend(settlement.penalties)
    report.win_rate = report.adversary_wins / max(setup.epochs, 1)
    report.compensation_paid = sum(p.reimbursed_fees for p in report.penalties)
    try:
        ledger.audit()
    except Exception:
        report.conservation_ok = False
    return report
