"""Two-phase blind block auction: candidate self-selection with percentage
bids, then final winner selection per block with mining-record tie-breaking.

Percentages are basis points (integers 0..10000) so bid ties are exact and
replayable. Each peer may bid on exactly one block per epoch; the winning bid
for a block is the highest percentage, and ties fall to the candidate with
the fewest previously mined blocks, then the greatest balance, then the
lowest node id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .epoch import EpochPlan
from .model import MiningRecord, Peer, SimulationError

BPS_SCALE = 10_000


class BidError(SimulationError):
    """A bid violates the auction rules."""


class IneligibleBidError(BidError):
    """Bidder balance does not exceed the block's baseline stake."""


class DuplicateBidError(BidError):
    """A peer attempted a second bid in the same epoch."""


@dataclass(frozen=True, slots=True)
class Bid:
    """One sealed percentage commitment on one block.

    ``committed_stake`` is the coin amount behind the percentage: the bid
    fraction of the balance remaining after the baseline stake, rounded down.
    """

    bidder: int
    block_index: int
    pct: int
    committed_stake: int


@dataclass(frozen=True, slots=True)
class AssignmentEntry:
    """Final auction outcome for one block."""

    block_index: int
    winner: int
    winning_pct: int
    baseline_stake: int
    committed_stake: int

    @property
    def locked_stake(self) -> int:
        return self.baseline_stake + self.committed_stake


@dataclass(frozen=True)
class Assignment:
    """Block-to-miner mapping for an epoch; blocks with no bids are listed
    as unassigned and fall to the stalled-auction remedy downstream."""

    entries: dict[int, AssignmentEntry]
    unassigned: tuple[int, ...]

    def winners(self) -> list[int]:
        return [e.winner for e in self.entries.values()]


def eligible_blocks(peer: Peer, plan: EpochPlan) -> list[int]:
    """Every block index whose baseline stake is strictly below the balance."""
    return [b.index for b in plan.blocks if peer.balance > b.baseline_stake]


def committed_stake(balance: int, baseline_stake: int, pct: int) -> int:
    return pct * (balance - baseline_stake) // BPS_SCALE


def place_bid(peer: Peer, block_index: int, pct: int, plan: EpochPlan,
              prior_bidders: set[int] | None = None) -> Bid:
    """Validate and build a bid; ``prior_bidders`` enforces one bid per peer."""
    if not 0 <= pct <= BPS_SCALE:
        raise BidError(f"pct {pct} outside [0, {BPS_SCALE}] basis points")
    if not 1 <= block_index <= plan.length:
        raise BidError(f"block index {block_index} outside epoch")
    if prior_bidders is not None and peer.node_id in prior_bidders:
        raise DuplicateBidError(f"peer {peer.node_id} already bid this epoch")
    stake = plan.block(block_index).baseline_stake
    if peer.balance <= stake:
        raise IneligibleBidError(
            f"peer {peer.node_id} balance {peer.balance} does not exceed "
            f"baseline stake {stake} of block {block_index}")
    if prior_bidders is not None:
        prior_bidders.add(peer.node_id)
    return Bid(bidder=peer.node_id, block_index=block_index, pct=pct,
               committed_stake=committed_stake(peer.balance, stake, pct))


def resolve_tie(tied: Sequence[int], record: MiningRecord,
                peers: dict[int, Peer]) -> int:
    """Break a maximal-percentage tie.

    Fewest previously mined blocks wins; among record ties (including the
    cold start where nobody has mined), the greater balance wins; an exact
    residual tie falls to the lowest node id so outcomes stay total-ordered.
    """
    return min(tied, key=lambda nid: (record.blocks_mined(nid),
                                      -peers[nid].balance, nid))


def finalize_miners(bids: Iterable[Bid], record: MiningRecord,
                    peers: dict[int, Peer], plan: EpochPlan) -> Assignment:
    """Select one winner per block from the sealed bid set.

    The one-bid-per-peer rule guarantees distinct winners across blocks.
    Blocks that attracted no bids are reported unassigned.
    """
    by_block: dict[int, list[Bid]] = {}
    seen: set[int] = set()
    for bid in bids:
        if bid.bidder in seen:
            raise DuplicateBidError(f"peer {bid.bidder} appears twice in bid set")
        seen.add(bid.bidder)
        by_block.setdefault(bid.block_index, []).append(bid)

    entries: dict[int, AssignmentEntry] = {}
    unassigned: list[int] = []
    for block in plan.blocks:
        contenders = by_block.get(block.index)
        if not contenders:
            unassigned.append(block.index)
            continue
        top = max(b.pct for b in contenders)
        tied = [b.bidder for b in contenders if b.pct == top]
        winner = tied[0] if len(tied) == 1 else resolve_tie(tied, record, peers)
        winning = next(b for b in contenders if b.bidder == winner)
        entries[block.index] = AssignmentEntry(
            block_index=block.index, winner=winner, winning_pct=top,
            baseline_stake=block.baseline_stake,
            committed_stake=winning.committed_stake)
    return Assignment(entries=entries, unassigned=tuple(unassigned))


class Auction:
    """Collects one sealed round of bids for an epoch, then resolves it."""

    def __init__(self, plan: EpochPlan, peers: dict[int, Peer]):
        self.plan = plan
        self.peers = peers
        self.bids: list[Bid] = []
        self._bidders: set[int] = set()

    def place_bid(self, node_id: int, block_index: int, pct: int) -> Bid:
        bid = place_bid(self.peers[node_id], block_index, pct, self.plan,
                        prior_bidders=self._bidders)
        self.bids.append(bid)
        return bid

    def finalize(self, record: MiningRecord) -> Assignment:
        return finalize_miners(self.bids, record, self.peers, self.plan)
