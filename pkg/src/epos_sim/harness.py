"""Experiment harness: seeded world generation, Poisson transaction
arrivals, the multi-epoch simulation loop with epoch-to-epoch reward
deferral, and report emission.

Every source of randomness flows from one seeded generator, so a (config,
seed) pair fully determines every artifact byte; wall-clock timestamps are
the only exception and can be suppressed for replay comparison.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import adversary as adv
from . import auction, mining, pbft, schemes
from .epoch import EpochPlan, plan_epoch
from .model import (
    ConfigError,
    LedgerState,
    Mempool,
    MiningRecord,
    Peer,
    StallError,
    Transaction,
)

SCHEMA_VERSION = 1
HONEST_PCT_MAX = 9_900


@dataclass(frozen=True)
class RunConfig:
    """Full parameterisation of one simulation run."""

    seed: int = 0
    n_range: tuple[int, int] = (8_000, 9_000)
    balance_range: tuple[int, int] = (0, 20_000)
    block_size: int = 2_000
    block_time: int = 600
    lambda_rate: float = 2.0
    epochs: int = 1
    fee_range: tuple[int, int] = (1, 100)
    mempool_blocks_range: tuple[int, int] = (1, 100)
    schemes: tuple[str, ...] = ("epos", "random", "priority")
    forced_epoch_length: int | None = None
    committee_size: int = 10
    greedy_fraction: float = 0.02
    fallback_halving: int = 2
    coinbase_supplement: int = 0
    view_loss_probability: float = 0.0
    histogram_bin_width: int = 1_000
    adversary: adv.AdversaryConfig | None = None
    include_timestamps: bool = True

    def __post_init__(self) -> None:
        for name, rng_pair in (("n_range", self.n_range),
                               ("balance_range", self.balance_range),
                               ("fee_range", self.fee_range),
                               ("mempool_blocks_range", self.mempool_blocks_range)):
            if len(rng_pair) != 2 or rng_pair[0] > rng_pair[1]:
                raise ConfigError(f"{name} must be a non-empty [lo, hi] range")
        if not 1 <= self.n_range[0] or self.n_range[1] > 10 ** 6:
            raise ConfigError("n_range must lie within [1, 10^6]")
        if self.lambda_rate < 0:
            raise ConfigError("lambda_rate must be >= 0")
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        unknown = set(self.schemes) - {"epos", "random", "priority"}
        if unknown:
            raise ConfigError(f"unknown schemes: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        for key in ("n_range", "balance_range", "fee_range",
                    "mempool_blocks_range", "schemes"):
            if key in data and isinstance(data[key], list):
                data[key] = tuple(data[key])
        if isinstance(data.get("adversary"), dict):
            a = dict(data["adversary"])
            a["strategy"] = adv.Strategy(a.get("strategy", "max-bid"))
            data["adversary"] = adv.AdversaryConfig(**a)
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = {
            "seed": self.seed,
            "n_range": list(self.n_range),
            "balance_range": list(self.balance_range),
            "block_size": self.block_size,
            "block_time": self.block_time,
            "lambda_rate": self.lambda_rate,
            "epochs": self.epochs,
            "fee_range": list(self.fee_range),
            "mempool_blocks_range": list(self.mempool_blocks_range),
            "schemes": list(self.schemes),
            "forced_epoch_length": self.forced_epoch_length,
            "committee_size": self.committee_size,
            "greedy_fraction": self.greedy_fraction,
            "fallback_halving": self.fallback_halving,
            "coinbase_supplement": self.coinbase_supplement,
            "view_loss_probability": self.view_loss_probability,
            "histogram_bin_width": self.histogram_bin_width,
            "adversary": None,
        }
        if self.adversary is not None:
            out["adversary"] = {"alpha": self.adversary.alpha,
                                "p": self.adversary.p, "m": self.adversary.m,
                                "strategy": self.adversary.strategy.value}
        return out


@dataclass
class World:
    peers: dict[int, Peer]
    ledger: LedgerState
    mempool: Mempool
    record: MiningRecord
    registry: mining.KeyRegistry
    keys: dict[int, mining.Keypair]
    next_tx_id: int = 0
    clock: int = 0

    def keypair_for(self, node_id: int, rng: np.random.Generator) -> mining.Keypair:
        kp = self.keys.get(node_id)
        if kp is None:
            kp = mining.generate_keypair(rng)
            self.keys[node_id] = kp
            self.registry.register(node_id, kp.public_bytes)
        return kp


def generate_world(config: RunConfig, rng: np.random.Generator) -> World:
    """Seeded world: peer count and balances drawn uniformly from their
    configured ranges, plus an initial mempool of a uniformly drawn number of
    blocks' worth of transactions. Replays byte-identically per seed."""
    n = int(rng.integers(config.n_range[0], config.n_range[1] + 1))
    balances = rng.integers(config.balance_range[0], config.balance_range[1] + 1, n)
    peers = {nid: Peer(node_id=nid, balance=int(balances[nid])) for nid in range(n)}
    ledger = LedgerState(peers=peers)
    world = World(peers=peers, ledger=ledger, mempool=Mempool(),
                  record=MiningRecord(), registry=mining.KeyRegistry(), keys={})
    blocks = int(rng.integers(config.mempool_blocks_range[0],
                              config.mempool_blocks_range[1] + 1))
    _spawn_transactions(world, config, blocks * config.block_size, rng)
    return world


def _spawn_transactions(world: World, config: RunConfig, count: int,
                        rng: np.random.Generator) -> None:
    """Create up to ``count`` unit-size transactions with sender-funded fees.
    A drawn sender who cannot afford the fee emits nothing (negligible at the
    default balance scale)."""
    if count <= 0:
        return
    n = len(world.peers)
    fees = rng.integers(config.fee_range[0], config.fee_range[1] + 1, count)
    senders = rng.integers(0, n, count)
    recipients = rng.integers(0, n, count)
    for k in range(count):
        fee = int(fees[k])
        sender = int(senders[k])
        if world.peers[sender].balance < fee:
            continue
        tx = Transaction(id=world.next_tx_id, fee=fee, size=1,
                         sender=sender, recipient=int(recipients[k]))
        world.ledger.fund_fee(sender, fee)
        world.mempool.insert(tx)
        world.next_tx_id += 1


def poisson_arrival_count(lam: float, duration: float,
                          rng: np.random.Generator) -> int:
    """Number of transactions arriving over ``duration`` at rate ``lam``."""
    if lam < 0 or duration < 0:
        raise ConfigError("arrival rate and duration must be >= 0")
    if lam == 0 or duration == 0:
        return 0
    return int(rng.poisson(lam * duration))


def poisson_arrivals(lam: float, duration: float,
                     seed: int | np.random.Generator,
                     fee_range: tuple[int, int] = (1, 100),
                     id_start: int = 0) -> list[Transaction]:
    """Standalone arrival sampler: a Poisson-distributed number of unit-size
    transactions with uniformly drawn fees."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    count = poisson_arrival_count(lam, duration, rng)
    fees = rng.integers(fee_range[0], fee_range[1] + 1, count)
    return [Transaction(id=id_start + k, fee=int(fees[k]), size=1)
            for k in range(count)]


def honest_bid_round(world: World, plan: EpochPlan, rng: np.random.Generator,
                     adversary_ids: frozenset[int] = frozenset(),
                     adversary_cfg: adv.AdversaryConfig | None = None) -> list[auction.Bid]:
    """One sealed round of bids.

    Rich peers claim the high-stake blocks first (one designated bidder per
    block, richest eligible down the hierarchy), and every remaining peer
    bids a random eligible block, so whenever enough candidates qualify,
    every block attracts at least one bid. Percentages are drawn uniformly.
    Adversary identities follow their strategy instead: a maximal bid on the
    top block they qualify for, or abstention.
    """
    stakes = plan.baseline_stakes()
    monotone = all(stakes[i] >= stakes[i + 1] for i in range(len(stakes) - 1))
    stakes_asc = stakes[::-1] if monotone else sorted(stakes)
    length = plan.length

    abstain = (adversary_cfg is not None
               and adversary_cfg.strategy is adv.Strategy.ABSTAIN)
    ranked = sorted((p for p in world.peers.values()
                     if p.node_id not in adversary_ids),
                    key=lambda p: (-p.balance, p.node_id))
    bids: list[auction.Bid] = []
    taken: set[int] = set()

    pointer = 0
    for block in plan.blocks:
        if pointer >= len(ranked):
            break
        peer = ranked[pointer]
        if peer.balance > block.baseline_stake:
            pct = int(rng.integers(1, HONEST_PCT_MAX + 1))
            bids.append(auction.Bid(
                bidder=peer.node_id, block_index=block.index, pct=pct,
                committed_stake=auction.committed_stake(
                    peer.balance, block.baseline_stake, pct)))
            taken.add(peer.node_id)
            pointer += 1

    for peer in ranked:
        if peer.node_id in taken:
            continue
        eligible_count = bisect_left(stakes_asc, peer.balance)
        if eligible_count == 0:
            continue
        if monotone:
            idx = length - eligible_count + 1 + int(rng.integers(eligible_count))
        else:
            choices = [b.index for b in plan.blocks
                       if peer.balance > b.baseline_stake]
            idx = choices[int(rng.integers(len(choices)))]
        stake = plan.block(idx).baseline_stake
        pct = int(rng.integers(1, HONEST_PCT_MAX + 1))
        bids.append(auction.Bid(bidder=peer.node_id, block_index=idx, pct=pct,
                                committed_stake=auction.committed_stake(
                                    peer.balance, stake, pct)))

    if adversary_ids and not abstain:
        for nid in sorted(adversary_ids):
            peer = world.peers[nid]
            targets = [b.index for b in plan.blocks
                       if peer.balance > b.baseline_stake]
            if not targets:
                continue
            idx = targets[0]
            stake = plan.block(idx).baseline_stake
            bids.append(auction.Bid(
                bidder=nid, block_index=idx, pct=auction.BPS_SCALE,
                committed_stake=auction.committed_stake(peer.balance, stake,
                                                        auction.BPS_SCALE)))
    return bids


@dataclass
class RunReport:
    payload: dict

    def to_json(self) -> str:
        return json.dumps(self.payload, indent=2, sort_keys=True) + "\n"


def run_experiment(config: RunConfig) -> RunReport:
    """Run the full multi-epoch loop and accumulate the report.

    Each epoch: the previous epoch's miners agree on the mempool view (the
    genesis epoch uses a bootstrap committee of the richest peers), the
    agreed snapshot is planned into blocks, the comparison schemes run on
    their own balance copies, the auction/commitment/mining pipeline runs
    for real, the previous epoch settles, and Poisson arrivals refill the
    mempool over the epoch's duration.
    """
    rng = np.random.default_rng(config.seed)
    world = generate_world(config, rng)
    ledger = world.ledger
    n = len(world.peers)

    adversary_ids: frozenset[int] = frozenset()
    if config.adversary is not None:
        if config.adversary.p >= n:
            raise ConfigError("adversary cannot control the whole network")
        if config.adversary.alpha >= 1.0:
            raise ConfigError("adversary cannot hold every coin in the world")
        adversary_ids = frozenset(range(n - config.adversary.p, n))
        # reshape the drawn balances so the controlled identities jointly
        # hold the configured fraction of all coins, split evenly
        honest_total = sum(p.balance for nid, p in world.peers.items()
                           if nid not in adversary_ids)
        target = int(honest_total * config.adversary.alpha
                     / (1.0 - config.adversary.alpha))
        share, extra = divmod(target, config.adversary.p)
        for k, nid in enumerate(sorted(adversary_ids)):
            world.peers[nid].balance = share + (1 if k < extra else 0)
        ledger.total_coins = ledger.circulating()

    original_balances = {nid: p.balance for nid, p in world.peers.items()}
    scheme_peers: dict[str, dict[int, Peer]] = {}
    for name in config.schemes:
        if name != "epos":
            scheme_peers[name] = {nid: Peer(node_id=nid, balance=p.balance)
                                  for nid, p in world.peers.items()}
    greedy_set = (schemes.pick_greedy_set(scheme_peers["priority"],
                                          config.greedy_fraction)
                  if "priority" in scheme_peers else [])

    payload: dict = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "seed": config.seed,
        "world": {"n": n, "total_coins": ledger.total_coins,
                  "initial_mempool_size": world.mempool.total_size,
                  "initial_mempool_fees": world.mempool.total_fees},
        "epochs": {},
        "stall": None,
    }
    if config.include_timestamps:
        payload["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()

    committee: list[int] = sorted(
        world.peers, key=lambda nid: (-world.peers[nid].balance, nid)
    )[:max(1, min(config.committee_size, n))]
    pending: mining.EpochOutcome | None = None
    first_epoch_blocks: dict[str, list[schemes.BlockResult]] = {}

    j = 0
    while j < config.epochs:
        j += 1
        replicas = pbft.diverge_views(world.mempool.snapshot(), committee,
                                      config.view_loss_probability, rng)
        primary = pbft.select_primary(committee, rng)
        outcome = pbft.run_pbft(replicas, primary)
        epoch_entry: dict = {
            "index": j,
            "clock_start": world.clock,
            "pbft": {
                "committee": list(committee),
                "primary": primary,
                "decided": outcome.decided,
                "view_changes": outcome.view_changes,
                "faulty_detected": list(outcome.faulty_detected),
                "messages": {
                    "pre_prepare": sum(r.pre_prepare for r in outcome.rounds),
                    "prepare": sum(r.prepare for r in outcome.rounds),
                    "commit": sum(r.commit for r in outcome.rounds),
                    "reply": sum(r.reply for r in outcome.rounds),
                },
            },
        }
        if not outcome.decided:
            payload["epochs"][str(j)] = epoch_entry
            payload["stall"] = (f"epoch {j}: mempool agreement failed with "
                                f"{len(outcome.faulty_detected)} faulty replicas")
            break

        if pending is not None:
            settlement = mining.settle_epoch(
                ledger, pending, True,
                withheld_nodes=frozenset(outcome.faulty_detected))
            epoch_entry["settles"] = _settlement_dict(settlement)
            pending = None

        snapshot = list(outcome.agreed_view)
        plan = plan_epoch(j, snapshot, config.block_size, config.block_time,
                          forced_length=config.forced_epoch_length,
                          coinbase_supplement=config.coinbase_supplement)
        if plan.length == 0:
            epoch_entry["skipped"] = "mempool smaller than one block"
            payload["epochs"][str(j)] = epoch_entry
            _refill(world, config, config.block_time, rng)
            world.clock += config.block_time
            continue

        epoch_entry.update({"length": plan.length, "duration": plan.duration,
                            "total_fees": plan.total_fees()})

        scheme_results: dict[str, schemes.SchemeResult] = {}
        if "random" in scheme_peers:
            scheme_results["random"] = schemes.run_random_scheme(
                scheme_peers["random"], plan, rng)
        if "priority" in scheme_peers:
            scheme_results["priority"] = schemes.run_priority_scheme(
                scheme_peers["priority"], plan, greedy_set)

        epos_result = None
        if "epos" in config.schemes:
            pre_balances = {nid: p.balance for nid, p in world.peers.items()}
            bids = honest_bid_round(world, plan, rng, adversary_ids,
                                    config.adversary)
            assignment = auction.finalize_miners(bids, world.record,
                                                 world.peers, plan)
            try:
                committed = mining.commit_assignments(
                    assignment, bids, ledger, plan, config.fallback_halving)
            except StallError as exc:
                payload["epochs"][str(j)] = epoch_entry
                payload["stall"] = f"epoch {j}: {exc}"
                break

            blocks_out, per_block, block_rows = [], [], []
            for idx in range(1, plan.length + 1):
                if idx in committed.entries:
                    entry = committed.entries[idx]
                    winner, locked = entry.winner, entry.locked_stake
                    committed_part = entry.committed_stake
                    baseline = entry.baseline_stake
                    pct = entry.winning_pct
                    via_fallback = False
                else:
                    winner = committed.fallback_winners[idx]
                    locked = committed_part = pct = 0
                    baseline = plan.block(idx).baseline_stake
                    via_fallback = True
                drops: frozenset[int] = frozenset()
                if (config.adversary is not None
                        and config.adversary.strategy is adv.Strategy.STAKE_THEFT
                        and winner in adversary_ids and not via_fallback):
                    txs = plan.block(idx).transactions
                    drops = frozenset(t.id for t in txs[:max(1, len(txs) // 2)])
                kp = world.keypair_for(winner, rng)
                result = mining.mine_block(plan.block(idx), winner, kp, j,
                                           fraudulent_drop_ids=drops)
                if mining.verify_block(result.block, world.registry) != 1:
                    raise StallError(f"epoch {j} block {idx}: signature rejected")
                for tx in result.removed_invalid + result.removed_fraudulent:
                    ledger.void_fees(tx.fee)
                world.record.record_block(winner)
                ledger.chain.append(result.block)
                blocks_out.append(mining.BlockOutcome(
                    block_index=idx, miner=winner, baseline_stake=baseline,
                    committed_stake=committed_part, locked_stake=locked,
                    fees_collectable=result.block.plan.total_fees,
                    victims=result.removed_fraudulent,
                    via_fallback=via_fallback))
                per_block.append(schemes.BlockResult(
                    block_index=idx, baseline_stake=baseline, winner=winner,
                    winner_balance_pre=pre_balances[winner]))
                block_rows.append({
                    "index": idx, "baseline_stake": baseline, "winner": winner,
                    "winning_pct": pct, "via_fallback": via_fallback,
                    "timestamp": world.clock + (idx - 1) * config.block_time,
                })
            epos_result = schemes.SchemeResult.from_blocks("epos", plan, per_block)
            scheme_results["epos"] = epos_result
            pending = mining.EpochOutcome(epoch_index=j, blocks=tuple(blocks_out))
            committee = sorted({b.miner for b in blocks_out})
            epoch_entry["blocks"] = block_rows
            epoch_entry["fallback_blocks"] = len(committed.fallback_winners)
            epoch_entry["revoked"] = list(committed.revoked)

        beta_e = (schemes.decentralization_beta(epos_result.unique_miners, n)
                  if epos_result else 0.0)
        epoch_entry["schemes"] = {}
        for name, res in scheme_results.items():
            beta = schemes.decentralization_beta(res.unique_miners, n)
            gamma_val = schemes.gamma(beta_e, beta).value if epos_result else 0.0
            epoch_entry["schemes"][name] = {
                "l": res.epoch_length,
                "mean_ST": res.mean_baseline_stake,
                "mean_b_k": res.mean_winner_balance_pre,
                "unique_k": res.unique_miners,
                "beta": beta,
                "gamma": gamma_val,
                "violations": res.violations,
            }
            if j == 1:
                first_epoch_blocks[name] = list(res.per_block)

        payload["epochs"][str(j)] = epoch_entry
        world.mempool.remove_ids(tx.id for b in plan.blocks
                                 for tx in b.transactions)
        _refill(world, config, plan.duration, rng)
        world.clock += plan.duration

    if pending is not None and payload["stall"] is None:
        replicas = pbft.diverge_views(world.mempool.snapshot(), committee,
                                      config.view_loss_probability, rng)
        primary = pbft.select_primary(committee, rng)
        outcome = pbft.run_pbft(replicas, primary)
        settlement = mining.settle_epoch(
            ledger, pending, outcome.decided,
            withheld_nodes=frozenset(outcome.faulty_detected))
        payload["closing_settlement"] = _settlement_dict(settlement)

    ledger.audit()
    histograms = {"original": schemes.balance_histogram(
        original_balances.values(), config.histogram_bin_width)}
    if "epos" in config.schemes:
        histograms["epos"] = schemes.balance_histogram(
            (p.balance for p in world.peers.values()), config.histogram_bin_width)
    for name, pmap in scheme_peers.items():
        histograms[name] = schemes.balance_histogram(
            (p.balance for p in pmap.values()), config.histogram_bin_width)
    payload["final"] = {
        "clock": world.clock,
        "escrow": ledger.escrow,
        "penalty_pool": ledger.penalty_pool,
        "in_flight_fees": ledger.in_flight_fees,
        "voided_fees": ledger.voided_fees,
        "mempool_size": world.mempool.total_size,
        "histograms": {k: {str(low): cnt for low, cnt in v.items()}
                       for k, v in histograms.items()},
    }
    payload["first_epoch_blocks"] = {
        name: [{"block_index": b.block_index, "baseline_stake": b.baseline_stake,
                "winner": b.winner, "winner_balance": b.winner_balance_pre}
               for b in rows]
        for name, rows in first_epoch_blocks.items()}
    return RunReport(payload=payload)


def _refill(world: World, config: RunConfig, duration: int,
            rng: np.random.Generator) -> None:
    count = poisson_arrival_count(config.lambda_rate, duration, rng)
    _spawn_transactions(world, config, count, rng)


def _settlement_dict(settlement: mining.SettlementReport) -> dict:
    return {
        "epoch_index": settlement.epoch_index,
        "settled": settlement.settled,
        "released": {str(k): v for k, v in sorted(settlement.released.items())},
        "withheld": list(settlement.withheld),
        "penalties": [{
            "offender": p.offender,
            "reimbursed_fees": p.reimbursed_fees,
            "penalty": p.penalty,
            "victims": [list(v) for v in p.victims],
        } for p in settlement.penalties],
    }


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write report file {path}: {exc}") from exc


def emit_report(report: RunReport, out_dir: str) -> dict[str, str]:
    """Write the run-level JSON plus the scheme-results, histogram, and
    per-block stake CSVs. Files are replaced atomically on rerun."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "report": os.path.join(out_dir, "report.json"),
        "schemes": os.path.join(out_dir, "schemes.csv"),
        "histograms": os.path.join(out_dir, "histograms.csv"),
        "stakes": os.path.join(out_dir, "stakes.csv"),
    }
    _atomic_write(paths["report"], report.to_json())

    lines = ["scheme,l,mean_ST,mean_b_k,unique_k,beta,gamma"]
    for entry in report.payload["epochs"].values():
        for name in ("random", "priority", "epos"):
            res = entry.get("schemes", {}).get(name)
            if res:
                lines.append(f"{name},{res['l']},{res['mean_ST']},"
                             f"{res['mean_b_k']},{res['unique_k']},"
                             f"{res['beta']},{res['gamma']}")
    _atomic_write(paths["schemes"], "\n".join(lines) + "\n")

    lines = ["scheme,bin_lower,bin_upper,count"]
    width = report.payload["config"]["histogram_bin_width"]
    for name, bins in report.payload.get("final", {}).get("histograms", {}).items():
        for low, cnt in bins.items():
            lines.append(f"{name},{low},{int(low) + width},{cnt}")
    _atomic_write(paths["histograms"], "\n".join(lines) + "\n")

    lines = ["scheme,block_index,baseline_stake,winner_balance"]
    for name, rows in report.payload.get("first_epoch_blocks", {}).items():
        for row in rows:
            lines.append(f"{name},{row['block_index']},{row['baseline_stake']},"
                         f"{row['winner_balance']}")
    _atomic_write(paths["stakes"], "\n".join(lines) + "\n")
    return paths


def emit_sweep_csv(rows: Iterable[adv.SweepRow], path: str) -> str:
    lines = ["n,p,m,alpha,closed_form,empirical,trials"]
    for r in rows:
        lines.append(f"{r.n},{r.p},{r.m},{r.alpha},{r.closed_form},"
                     f"{r.empirical},{r.trials}")
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    _atomic_write(path, "\n".join(lines) + "\n")
    return path
