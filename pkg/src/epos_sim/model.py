"""Core domain types: transactions, peers, mempool, block plans, the mining
record, and ledger accounting with exact coin conservation.

All coin amounts are integer base units so that auction ties, penalties, and
conservation checks are bit-exact. Transaction size is measured in abstract
slots (one slot = one standard transaction).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimulationError):
    """Invalid configuration value."""


class DuplicateTransactionError(SimulationError):
    """A transaction id was inserted twice; signals a generator bug."""


class PlanningError(SimulationError):
    """Epoch plan inconsistent with the mempool snapshot it covers."""


class StallError(SimulationError):
    """The simulation cannot make progress; message carries the diagnosis."""


class SettlementError(SimulationError):
    """Invalid settlement request, e.g. settling the same epoch twice."""


class InsufficientBalanceError(SimulationError):
    """A debit would drive a peer balance negative."""


@dataclass(frozen=True, slots=True)
class Transaction:
    """An unconfirmed transaction, the raw material of block planning.

    ``sender``/``recipient`` are peer node ids, used for victim compensation
    and for the stalled-auction fallback. ``valid`` is flipped by adversary
    scenarios to inject fraudulent transactions; honest validation simply
    reads the flag.
    """

    id: int
    fee: int
    size: int = 1
    sender: int | None = None
    recipient: int | None = None
    valid: bool = True

    def __post_init__(self) -> None:
        if self.fee < 0:
            raise ValueError(f"transaction {self.id}: negative fee {self.fee}")
        if self.size < 1:
            raise ValueError(f"transaction {self.id}: size {self.size} < 1")


@dataclass(slots=True)
class Peer:
    """A network participant. ``node_id`` is a synthetic integer standing in
    for an IP address and is stable for the lifetime of a run; a Sybil split
    creates fresh node_ids rather than reusing one."""

    node_id: int
    balance: int
    account_id: int | None = None

    def __post_init__(self) -> None:
        if self.balance < 0:
            raise ValueError(f"peer {self.node_id}: negative balance")
        if self.account_id is None:
            self.account_id = self.node_id


class Mempool:
    """Repository of unconfirmed transactions with running totals.

    Duplicate ids are rejected. ``capacity`` (slots) is an optional cap.
    """

    def __init__(self, transactions: Iterable[Transaction] = (), capacity: int | None = None):
        self.capacity = capacity
        self._txs: list[Transaction] = []
        self._ids: set[int] = set()
        self._total_size = 0
        self._total_fees = 0
        for tx in transactions:
            self.insert(tx)

    def __len__(self) -> int:
        return len(self._txs)

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self._txs)

    def __contains__(self, tx_id: int) -> bool:
        return tx_id in self._ids

    @property
    def total_size(self) -> int:
        return self._total_size

    @property
    def total_fees(self) -> int:
        return self._total_fees

    def insert(self, tx: Transaction) -> None:
        if tx.id in self._ids:
            raise DuplicateTransactionError(f"duplicate transaction id {tx.id}")
        if self.capacity is not None and self._total_size + tx.size > self.capacity:
            raise ConfigError(f"mempool capacity {self.capacity} exceeded")
        self._txs.append(tx)
        self._ids.add(tx.id)
        self._total_size += tx.size
        self._total_fees += tx.fee

    def remove_ids(self, ids: Iterable[int]) -> list[Transaction]:
        """Remove and return the transactions with the given ids."""
        wanted = set(ids)
        kept, removed = [], []
        for tx in self._txs:
            (removed if tx.id in wanted else kept).append(tx)
        self._txs = kept
        for tx in removed:
            self._ids.discard(tx.id)
            self._total_size -= tx.size
            self._total_fees -= tx.fee
        return removed

    def snapshot(self) -> tuple[Transaction, ...]:
        return tuple(self._txs)

    def totals_consistent(self) -> bool:
        """Recompute totals from contents; must always match the running sums."""
        return (self._total_size == sum(tx.size for tx in self._txs)
                and self._total_fees == sum(tx.fee for tx in self._txs))


def mempool_insert(pool: Mempool, tx: Transaction) -> Mempool:
    """Insert ``tx`` into ``pool`` (mutates and returns it)."""
    pool.insert(tx)
    return pool


def sort_by_fee_desc(pool: Mempool | Iterable[Transaction]) -> list[Transaction]:
    """Fee-descending order; ties broken by ascending id for determinism."""
    return sorted(pool, key=lambda tx: (-tx.fee, tx.id))


@dataclass(frozen=True, slots=True)
class BlockPlan:
    """A fee-sorted slice of the mempool with its baseline stake.

    The baseline stake is exactly the sum of the contained transaction fees
    (plus an optional fixed coinbase supplement); it is the minimum balance a
    bidder must exceed and the insurance pool for victim reimbursement.
    """

    index: int
    transactions: tuple[Transaction, ...]
    baseline_stake: int
    size: int
    coinbase: int = 0

    def __post_init__(self) -> None:
        if self.baseline_stake != sum(tx.fee for tx in self.transactions) + self.coinbase:
            raise PlanningError(f"block {self.index}: baseline stake does not equal fee sum")
        if self.size != sum(tx.size for tx in self.transactions):
            raise PlanningError(f"block {self.index}: size does not equal slot sum")

    @property
    def total_fees(self) -> int:
        return self.baseline_stake - self.coinbase

    @classmethod
    def from_transactions(cls, index: int, txs: Iterable[Transaction],
                          coinbase: int = 0) -> "BlockPlan":
        txs = tuple(txs)
        return cls(index=index,
                   transactions=txs,
                   baseline_stake=sum(tx.fee for tx in txs) + coinbase,
                   size=sum(tx.size for tx in txs),
                   coinbase=coinbase)


class MiningRecord:
    """Per-node count of historically mined blocks, used for auction
    tie-breaking. Counts only increase; an absent node counts as zero."""

    def __init__(self, counts: dict[int, int] | None = None):
        self._counts: dict[int, int] = dict(counts or {})

    def record_block(self, node_id: int) -> None:
        self._counts[node_id] = self._counts.get(node_id, 0) + 1

    def blocks_mined(self, node_id: int) -> int:
        return self._counts.get(node_id, 0)

    def as_dict(self) -> dict[int, int]:
        return dict(self._counts)


def record_block(record: MiningRecord, node_id: int) -> MiningRecord:
    """Increment the mined-block count for ``node_id`` (mutates and returns)."""
    record.record_block(node_id)
    return record


@dataclass
class LedgerState:
    """Global coin accounting for one simulation run.

    Every coin is always in exactly one bucket: a peer balance, the auction
    escrow, the penalty pool, in-flight transaction fees (paid by senders,
    not yet collected by a miner), or the voided-fee sink (fees of removed
    transactions). ``audit`` checks the conservation identity exactly.
    """

    peers: dict[int, Peer]
    total_coins: int = 0
    chain: list = field(default_factory=list)
    escrow: int = 0
    penalty_pool: int = 0
    in_flight_fees: int = 0
    voided_fees: int = 0
    settled_epochs: set[int] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.total_coins == 0:
            self.total_coins = (sum(p.balance for p in self.peers.values())
                                + self.escrow + self.penalty_pool
                                + self.in_flight_fees + self.voided_fees)

    def balance(self, node_id: int) -> int:
        return self.peers[node_id].balance

    def credit(self, node_id: int, amount: int) -> None:
        self.peers[node_id].balance += amount

    def debit(self, node_id: int, amount: int) -> None:
        peer = self.peers[node_id]
        if peer.balance < amount:
            raise InsufficientBalanceError(
                f"peer {node_id}: debit {amount} exceeds balance {peer.balance}")
        peer.balance -= amount

    def fund_fee(self, sender: int, fee: int) -> None:
        """Sender pays a transaction fee into the in-flight pot."""
        self.debit(sender, fee)
        self.in_flight_fees += fee

    def lock_stake(self, node_id: int, amount: int) -> None:
        self.debit(node_id, amount)
        self.escrow += amount

    def release_stake(self, node_id: int, amount: int) -> None:
        if amount > self.escrow:
            raise SettlementError("escrow release exceeds escrowed total")
        self.escrow -= amount
        self.credit(node_id, amount)

    def collect_fees(self, node_id: int, amount: int) -> None:
        """Move in-flight fees to a miner's balance (block reward)."""
        if amount > self.in_flight_fees:
            raise SettlementError("fee collection exceeds in-flight fees")
        self.in_flight_fees -= amount
        self.credit(node_id, amount)

    def void_fees(self, amount: int) -> None:
        """Fees of removed transactions leave circulation into the sink."""
        if amount > self.in_flight_fees:
            raise SettlementError("voided amount exceeds in-flight fees")
        self.in_flight_fees -= amount
        self.voided_fees += amount

    def withhold_fees(self, amount: int) -> None:
        """In-flight fees withheld as a penalty go to the penalty pool."""
        if amount > self.in_flight_fees:
            raise SettlementError("withheld amount exceeds in-flight fees")
        self.in_flight_fees -= amount
        self.penalty_pool += amount

    def confiscate_escrow(self, amount: int) -> None:
        if amount > self.escrow:
            raise SettlementError("confiscation exceeds escrowed total")
        self.escrow -= amount
        self.penalty_pool += amount

    def refund_from_escrow(self, node_id: int, amount: int) -> None:
        if amount > self.escrow:
            raise SettlementError("refund exceeds escrowed total")
        self.escrow -= amount
        self.credit(node_id, amount)

    def circulating(self) -> int:
        return (sum(p.balance for p in self.peers.values())
                + self.escrow + self.penalty_pool
                + self.in_flight_fees + self.voided_fees)

    def audit(self) -> None:
        """Raise if the coin-conservation identity is violated."""
        total = self.circulating()
        if total != self.total_coins:
            raise SimulationError(
                f"coin conservation violated: {total} != {self.total_coins}")
