"""Epoch planning: derive the epoch length from mempool size, partition the
fee-sorted mempool into blocks, and compute each block's baseline stake."""

from __future__ import annotations

from dataclasses import dataclass

from .model import BlockPlan, ConfigError, PlanningError, Transaction, sort_by_fee_desc


def compute_epoch_length(mempool_size: int, block_size: int) -> int:
    """Number of blocks needed to drain a mempool of ``mempool_size`` slots.

    Zero when a single block already exceeds the mempool; otherwise the
    ceiling of the ratio, so the trailing remainder block always exists.
    """
    if block_size < 1:
        raise ConfigError(f"block size must be >= 1, got {block_size}")
    if mempool_size < 0:
        raise ConfigError(f"mempool size must be >= 0, got {mempool_size}")
    if block_size > mempool_size:
        return 0
    return -(-mempool_size // block_size)


def epoch_duration(length: int, block_time: int) -> int:
    """Simulated seconds an epoch occupies: one block per block interval."""
    if length < 0:
        raise ConfigError("epoch length must be >= 0")
    return length * block_time


def compute_baseline_stakes(sorted_txs: list[Transaction], block_size: int,
                            length: int, coinbase_supplement: int = 0) -> list[BlockPlan]:
    """Greedy fee-ordered fill of ``length`` blocks.

    Blocks 1..length-1 close as soon as their cumulative size reaches or
    exceeds ``block_size`` (the overflowing transaction stays in the block it
    was added to, so a block may slightly exceed the cap when transactions
    span multiple slots). The final block takes every remaining transaction
    and may be empty if oversized transactions overflowed earlier blocks.

    ``coinbase_supplement`` adds a fixed amount to every baseline stake; it
    models per-block coin issuance when simulating currencies that still pay
    a coinbase reward, and is zero in the base protocol.
    """
    if block_size < 1:
        raise ConfigError(f"block size must be >= 1, got {block_size}")
    if length < 0:
        raise PlanningError(f"epoch length must be >= 0, got {length}")
    if length == 0:
        if sorted_txs:
            raise PlanningError("epoch length 0 cannot cover a non-empty snapshot")
        return []

    blocks: list[BlockPlan] = []
    pos = 0
    for index in range(1, length):
        chunk: list[Transaction] = []
        size = 0
        while pos < len(sorted_txs) and size < block_size:
            tx = sorted_txs[pos]
            chunk.append(tx)
            size += tx.size
            pos += 1
        blocks.append(_make_block(index, chunk, coinbase_supplement))
    blocks.append(_make_block(length, sorted_txs[pos:], coinbase_supplement))
    return blocks


def partition_evenly(sorted_txs: list[Transaction], length: int,
                     coinbase_supplement: int = 0) -> list[BlockPlan]:
    """Partition a snapshot into exactly ``length`` blocks of near-equal
    transaction count (sizes differ by at most one slot for unit-size
    transactions), preserving fee order.

    Used for forced-epoch-length runs, where a fixed snapshot must spread
    over a prescribed number of non-empty blocks. With fewer transactions
    than blocks the trailing blocks come out empty.
    """
    if length < 1:
        raise PlanningError(f"forced epoch length must be >= 1, got {length}")
    base, extra = divmod(len(sorted_txs), length)
    blocks: list[BlockPlan] = []
    pos = 0
    for index in range(1, length + 1):
        take = base + (1 if index <= extra else 0)
        blocks.append(_make_block(index, sorted_txs[pos:pos + take], coinbase_supplement))
        pos += take
    return blocks


def _make_block(index: int, txs: list[Transaction], supplement: int) -> BlockPlan:
    return BlockPlan.from_transactions(index, txs, coinbase=supplement)


@dataclass(frozen=True)
class EpochPlan:
    """A planned epoch: ordered block plans with their baseline stakes."""

    epoch_index: int
    length: int
    block_time: int
    duration: int
    blocks: tuple[BlockPlan, ...]

    def baseline_stakes(self) -> list[int]:
        return [b.baseline_stake for b in self.blocks]

    def block(self, index: int) -> BlockPlan:
        return self.blocks[index - 1]

    def total_fees(self) -> int:
        return sum(tx.fee for b in self.blocks for tx in b.transactions)


def plan_epoch(epoch_index: int, transactions, block_size: int, block_time: int,
               forced_length: int | None = None,
               coinbase_supplement: int = 0) -> EpochPlan:
    """Build the epoch plan for a mempool snapshot.

    Natural mode derives the length from the snapshot size and fills blocks
    greedily; forced mode spreads the same snapshot evenly over the given
    number of blocks (the fixed-length evaluation setup).
    """
    sorted_txs = sort_by_fee_desc(transactions)
    total_size = sum(tx.size for tx in sorted_txs)
    if forced_length is None:
        length = compute_epoch_length(total_size, block_size)
        if length == 0:
            # mempool smaller than one block: skip, keep accumulating
            return EpochPlan(epoch_index=epoch_index, length=0,
                             block_time=block_time, duration=0, blocks=())
        blocks = compute_baseline_stakes(sorted_txs, block_size, length,
                                         coinbase_supplement)
    else:
        length = forced_length
        blocks = partition_evenly(sorted_txs, length, coinbase_supplement)

    plan = EpochPlan(epoch_index=epoch_index, length=length,
                     block_time=block_time,
                     duration=epoch_duration(length, block_time),
                     blocks=tuple(blocks))
    _check_partition(plan, sorted_txs)
    return plan


def _check_partition(plan: EpochPlan, snapshot: list[Transaction]) -> None:
    """Planned blocks must cover the snapshot exactly: no loss, no duplication."""
    planned = [tx.id for b in plan.blocks for tx in b.transactions]
    if len(planned) != len(snapshot) or set(planned) != {tx.id for tx in snapshot}:
        raise PlanningError(
            f"epoch {plan.epoch_index}: blocks do not partition the snapshot")
