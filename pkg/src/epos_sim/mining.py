"""Block mining and settlement: final stake commitment, transaction
validation, block signing and verification, fraud penalties, deferred reward
release, and the stalled-auction fallback.

Blocks are signed with Ed25519 over a canonical body encoding (epoch index,
block index, miner id, then the id/fee/size of each transaction sorted by
id). Signing is deterministic and key generation is seeded, so whole runs
replay bit-exactly.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .auction import Assignment, AssignmentEntry, Bid
from .model import (
    BlockPlan,
    LedgerState,
    Peer,
    SettlementError,
    StallError,
    Transaction,
)


@dataclass(frozen=True)
class Keypair:
    private: Ed25519PrivateKey
    public_bytes: bytes

    def sign(self, body: bytes) -> bytes:
        return self.private.sign(body)


def generate_keypair(rng: np.random.Generator) -> Keypair:
    """Deterministic keypair from the run's seeded generator."""
    seed = rng.bytes(32)
    private = Ed25519PrivateKey.from_private_bytes(seed)
    return Keypair(private=private,
                   public_bytes=private.public_key().public_bytes_raw())


class KeyRegistry:
    """Public keys of registered miners, shared by every simulated peer."""

    def __init__(self):
        self._keys: dict[int, bytes] = {}

    def register(self, node_id: int, public_bytes: bytes) -> None:
        self._keys[node_id] = public_bytes

    def public_key(self, node_id: int) -> bytes | None:
        return self._keys.get(node_id)


def canonical_block_body(epoch_index: int, block_index: int, miner: int,
                         transactions: Iterable[Transaction]) -> bytes:
    """Length-prefixed canonical encoding of a block for signing/hashing."""
    txs = sorted(transactions, key=lambda t: t.id)
    parts = [struct.pack(">QIQI", epoch_index, block_index, miner, len(txs))]
    for tx in txs:
        parts.append(struct.pack(">QQI", tx.id, tx.fee, tx.size))
    return b"".join(parts)


@dataclass(frozen=True)
class SignedBlock:
    """A mined block: the (possibly pruned) plan plus signature and hash."""

    epoch_index: int
    plan: BlockPlan
    miner: int
    public_key: bytes
    signature: bytes
    block_hash: bytes

    def body(self) -> bytes:
        return canonical_block_body(self.epoch_index, self.plan.index,
                                    self.miner, self.plan.transactions)


@dataclass(frozen=True)
class MiningResult:
    block: SignedBlock
    removed_invalid: tuple[Transaction, ...]
    removed_fraudulent: tuple[Transaction, ...]


def mine_block(plan: BlockPlan, miner: int, keypair: Keypair, epoch_index: int,
               fraudulent_drop_ids: frozenset[int] = frozenset()) -> MiningResult:
    """Validate, prune, sign, and hash one block.

    Transactions flagged invalid are removed and reported (honest behaviour).
    ``fraudulent_drop_ids`` models a malicious miner discarding valid
    transactions; those removals are what the penalty machinery compensates.
    An empty block after removals is still produced and signed.
    """
    kept, invalid, fraudulent = [], [], []
    for tx in plan.transactions:
        if not tx.valid:
            invalid.append(tx)
        elif tx.id in fraudulent_drop_ids:
            fraudulent.append(tx)
        else:
            kept.append(tx)
    pruned = BlockPlan.from_transactions(plan.index, kept, coinbase=plan.coinbase)
    body = canonical_block_body(epoch_index, pruned.index, miner, pruned.transactions)
    block = SignedBlock(epoch_index=epoch_index, plan=pruned, miner=miner,
                        public_key=keypair.public_bytes,
                        signature=keypair.sign(body),
                        block_hash=hashlib.sha256(body).digest())
    return MiningResult(block=block, removed_invalid=tuple(invalid),
                        removed_fraudulent=tuple(fraudulent))


def verify_block(block: SignedBlock, registry: KeyRegistry) -> int:
    """1 iff the signature verifies under the miner's registered key and the
    body hash recomputes; 0 for counterfeit, tampered, or unknown-key blocks."""
    registered = registry.public_key(block.miner)
    if registered is None or registered != block.public_key:
        return 0
    body = block.body()
    if hashlib.sha256(body).digest() != block.block_hash:
        return 0
    try:
        Ed25519PublicKey.from_public_bytes(registered).verify(block.signature, body)
    except InvalidSignature:
        return 0
    return 1


class CommitmentDecision(enum.Enum):
    ACCEPTED = "accepted"
    REVOKED = "revoked"


def final_commitment_check(entry: AssignmentEntry,
                           current_balance: int) -> CommitmentDecision:
    """A winner keeps its block only if the balance still covers the locked
    stake; spending it after the bid revokes the win."""
    if current_balance >= entry.locked_stake:
        return CommitmentDecision.ACCEPTED
    return CommitmentDecision.REVOKED


def nothing_at_stake_fallback(block: BlockPlan, peers: dict[int, Peer],
                              halving_factor: int = 2) -> int:
    """Assign a bid-less block by relaxing the baseline-stake threshold.

    The threshold halves (configurable factor) until a sender or recipient of
    a transaction in the block qualifies; the richest qualifying party wins.
    Falls back to the whole peer set when the block carries no party
    metadata. With every candidate at zero balance no relaxation can help,
    which is reported as a diagnosed stall.
    """
    if halving_factor < 2:
        raise StallError("fallback halving factor must be >= 2")
    candidate_ids = sorted({nid for tx in block.transactions
                            for nid in (tx.sender, tx.recipient)
                            if nid is not None and nid in peers})
    if not candidate_ids:
        candidate_ids = sorted(peers)
    if not candidate_ids or all(peers[nid].balance == 0 for nid in candidate_ids):
        raise StallError(
            f"block {block.index}: no interested party holds a positive "
            f"balance; auction cannot progress")
    threshold = block.baseline_stake
    while True:
        qualified = [nid for nid in candidate_ids if peers[nid].balance > threshold]
        if qualified:
            return max(qualified, key=lambda nid: (peers[nid].balance, -nid))
        threshold //= halving_factor


@dataclass(frozen=True)
class BlockOutcome:
    """Everything settlement needs to know about one mined block."""

    block_index: int
    miner: int
    baseline_stake: int
    committed_stake: int
    locked_stake: int
    fees_collectable: int
    victims: tuple[Transaction, ...] = ()
    via_fallback: bool = False

    @property
    def misbehaved(self) -> bool:
        return bool(self.victims)


@dataclass
class CommitResult:
    """Outcome of the final-commitment phase for a whole epoch."""

    entries: dict[int, AssignmentEntry]
    fallback_winners: dict[int, int]
    revoked: list[int] = field(default_factory=list)


def commit_assignments(assignment: Assignment, bids: Sequence[Bid],
                       ledger: LedgerState, plan,
                       halving_factor: int = 2) -> CommitResult:
    """Run final commitment for every winner and lock stakes in escrow.

    A revoked winner's block goes to the next-highest remaining bidder; with
    no bidders left the stalled-auction fallback assigns it (fallback winners
    lock nothing, since they never committed a bid).
    """
    by_block: dict[int, list[Bid]] = {}
    for bid in bids:
        by_block.setdefault(bid.block_index, []).append(bid)

    result = CommitResult(entries={}, fallback_winners={})
    pending = [(idx, assignment.entries[idx]) for idx in sorted(assignment.entries)]
    for idx, entry in pending:
        contenders = sorted(by_block.get(idx, []),
                            key=lambda b: (-b.pct, b.bidder))
        while entry is not None:
            decision = final_commitment_check(entry, ledger.balance(entry.winner))
            if decision is CommitmentDecision.ACCEPTED:
                ledger.lock_stake(entry.winner, entry.locked_stake)
                result.entries[idx] = entry
                break
            result.revoked.append(entry.winner)
            contenders = [b for b in contenders if b.bidder != entry.winner]
            if contenders:
                nxt = contenders[0]
                entry = AssignmentEntry(block_index=idx, winner=nxt.bidder,
                                        winning_pct=nxt.pct,
                                        baseline_stake=entry.baseline_stake,
                                        committed_stake=nxt.committed_stake)
            else:
                entry = None
        if idx not in result.entries and idx not in result.fallback_winners:
            winner = nothing_at_stake_fallback(plan.block(idx), ledger.peers,
                                               halving_factor)
            result.fallback_winners[idx] = winner

    for idx in assignment.unassigned:
        winner = nothing_at_stake_fallback(plan.block(idx), ledger.peers,
                                           halving_factor)
        result.fallback_winners[idx] = winner
    return result


@dataclass(frozen=True)
class PenaltyOutcome:
    """Result of punishing a misbehaving miner: victims are reimbursed their
    fees from the baseline stake, and the stake committed beyond the baseline
    is confiscated."""

    offender: int
    reimbursed_fees: int
    penalty: int
    victims: tuple[tuple[int, int], ...]


def apply_penalty(ledger: LedgerState, outcome: BlockOutcome) -> PenaltyOutcome:
    """Settle a block whose miner fraudulently invalidated transactions.

    Each victim is refunded exactly its transaction fee out of the offender's
    escrowed baseline stake; the beyond-baseline commitment goes to the
    penalty pool; whatever baseline remains returns to the offender, who also
    forfeits the block's fee rewards.
    """
    refunds: list[tuple[int, int]] = []
    reimbursed = 0
    for tx in outcome.victims:
        if tx.sender is not None:
            ledger.refund_from_escrow(tx.sender, tx.fee)
        else:
            ledger.confiscate_escrow(tx.fee)
        refunds.append((tx.id, tx.fee))
        reimbursed += tx.fee
    if reimbursed > outcome.baseline_stake:
        raise SettlementError("victim refunds exceed the baseline stake")
    ledger.confiscate_escrow(outcome.committed_stake)
    remainder = outcome.locked_stake - reimbursed - outcome.committed_stake
    if remainder:
        ledger.release_stake(outcome.miner, remainder)
    if outcome.fees_collectable:
        ledger.withhold_fees(outcome.fees_collectable)
    return PenaltyOutcome(offender=outcome.miner, reimbursed_fees=reimbursed,
                          penalty=outcome.committed_stake,
                          victims=tuple(refunds))


@dataclass(frozen=True)
class EpochOutcome:
    """Mined epoch awaiting settlement once the next epoch initiates."""

    epoch_index: int
    blocks: tuple[BlockOutcome, ...]


@dataclass
class SettlementReport:
    epoch_index: int
    released: dict[int, int]
    penalties: list[PenaltyOutcome]
    withheld: list[int]
    settled: bool


def settle_epoch(ledger: LedgerState, outcome: EpochOutcome,
                 next_epoch_started_ok: bool,
                 withheld_nodes: frozenset[int] = frozenset()) -> SettlementReport:
    """Release an epoch's rewards after the next epoch initiates.

    Honest miners collect their block's fees plus their escrowed stake;
    misbehaving miners go through the penalty path; replicas caught faulty in
    the next epoch's agreement round have their fee rewards withheld. If the
    next epoch failed to initiate, nothing is released and the epoch remains
    unsettled. Settling the same epoch twice is rejected.
    """
    if outcome.epoch_index in ledger.settled_epochs:
        raise SettlementError(f"epoch {outcome.epoch_index} already settled")
    report = SettlementReport(epoch_index=outcome.epoch_index, released={},
                              penalties=[], withheld=[], settled=False)
    if not next_epoch_started_ok:
        return report

    for block in outcome.blocks:
        if block.misbehaved:
            report.penalties.append(apply_penalty(ledger, block))
            continue
        if block.miner in withheld_nodes:
            if block.fees_collectable:
                ledger.withhold_fees(block.fees_collectable)
            if block.locked_stake:
                ledger.release_stake(block.miner, block.locked_stake)
            report.withheld.append(block.miner)
            continue
        credit = 0
        if block.fees_collectable:
            ledger.collect_fees(block.miner, block.fees_collectable)
            credit += block.fees_collectable
        if block.locked_stake:
            ledger.release_stake(block.miner, block.locked_stake)
            credit += block.locked_stake
        report.released[block.miner] = report.released.get(block.miner, 0) + credit

    ledger.settled_epochs.add(outcome.epoch_index)
    report.settled = True
    return report
