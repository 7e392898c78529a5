import random

import pytest

from conftest import make_peers, make_txs
from epos_sim.auction import (
    Auction,
    Bid,
    DuplicateBidError,
    IneligibleBidError,
    committed_stake,
    eligible_blocks,
    finalize_miners,
    place_bid,
    resolve_tie,
)
from epos_sim.epoch import plan_epoch
from epos_sim.model import MiningRecord, Peer


def plan_with_stakes(stakes):
    """One transaction per block, fee equal to the wanted baseline stake."""
    txs = make_txs(list(stakes))
    return plan_epoch(1, txs, block_size=1, block_time=600,
                      forced_length=len(stakes))


class TestEligibility:
    def test_balance_between_stakes(self):
        plan = plan_with_stakes([900, 400, 100])
        peer = Peer(node_id=1, balance=500)
        assert eligible_blocks(peer, plan) == [2, 3]

    def test_zero_balance(self):
        plan = plan_with_stakes([900, 400, 100])
        assert eligible_blocks(Peer(node_id=1, balance=0), plan) == []

    def test_rich_peer_qualifies_everywhere(self):
        plan = plan_with_stakes([900, 400, 100])
        assert eligible_blocks(Peer(node_id=1, balance=10_000), plan) == [1, 2, 3]

    def test_exact_stake_is_not_eligible(self):
        plan = plan_with_stakes([500])
        assert eligible_blocks(Peer(node_id=1, balance=500), plan) == []


class TestPlaceBid:
    def test_fifteen_percent_of_remainder(self):
        plan = plan_with_stakes([400])
        bid = place_bid(Peer(node_id=1, balance=1_000), 1, 1_500, plan)
        assert bid.committed_stake == 90

    def test_zero_percent(self):
        plan = plan_with_stakes([400])
        bid = place_bid(Peer(node_id=1, balance=1_000), 1, 0, plan)
        assert bid.committed_stake == 0

    def test_full_commitment_at_boundary_balance(self):
        plan = plan_with_stakes([400])
        bid = place_bid(Peer(node_id=1, balance=401), 1, 10_000, plan)
        assert bid.committed_stake == 1

    def test_ineligible_block_rejected(self):
        plan = plan_with_stakes([900, 100])
        with pytest.raises(IneligibleBidError):
            place_bid(Peer(node_id=1, balance=500), 1, 100, plan)

    def test_second_bid_rejected(self):
        plan = plan_with_stakes([100, 50])
        peers = make_peers([500], start_id=1)
        auction = Auction(plan, peers)
        auction.place_bid(1, 1, 3_000)
        with pytest.raises(DuplicateBidError):
            auction.place_bid(1, 2, 3_000)

    def test_rounding_is_floor(self):
        assert committed_stake(1_000, 400, 1_499) == 89


def bid_on(peers, plan, node_id, block_index, pct):
    return place_bid(peers[node_id], block_index, pct, plan)


class TestFinalize:
    def test_highest_percentage_wins(self):
        plan = plan_with_stakes([100])
        peers = make_peers([500, 500], start_id=1)
        bids = [bid_on(peers, plan, 1, 1, 3_000), bid_on(peers, plan, 2, 1, 2_000)]
        result = finalize_miners(bids, MiningRecord(), peers, plan)
        assert result.entries[1].winner == 1

    def test_tie_goes_to_fewer_prior_blocks(self):
        plan = plan_with_stakes([100])
        peers = make_peers([500, 500], start_id=1)
        bids = [bid_on(peers, plan, 1, 1, 3_000), bid_on(peers, plan, 2, 1, 3_000)]
        result = finalize_miners(bids, MiningRecord({1: 2, 2: 1}), peers, plan)
        assert result.entries[1].winner == 2

    def test_cold_start_goes_to_greater_balance(self):
        plan = plan_with_stakes([50])
        peers = {1: Peer(node_id=1, balance=100), 2: Peer(node_id=2, balance=200)}
        bids = [bid_on(peers, plan, 1, 1, 3_000), bid_on(peers, plan, 2, 1, 3_000)]
        result = finalize_miners(bids, MiningRecord(), peers, plan)
        assert result.entries[1].winner == 2

    def test_zero_bid_block_is_unassigned(self):
        plan = plan_with_stakes([100, 50])
        peers = make_peers([500], start_id=1)
        result = finalize_miners([bid_on(peers, plan, 1, 1, 500)],
                                 MiningRecord(), peers, plan)
        assert result.unassigned == (2,)

    def test_winner_locks_baseline_plus_commitment(self):
        plan = plan_with_stakes([400])
        peers = make_peers([1_000], start_id=1)
        result = finalize_miners([bid_on(peers, plan, 1, 1, 1_500)],
                                 MiningRecord(), peers, plan)
        entry = result.entries[1]
        assert entry.locked_stake == 400 + 90


class TestResolveTie:
    def test_fewer_prior_blocks(self):
        peers = make_peers([100, 100], start_id=1)
        assert resolve_tie([1, 2], MiningRecord({1: 5, 2: 3}), peers) == 2

    def test_residual_tie_uses_lowest_node_id(self):
        peers = {1: Peer(node_id=1, balance=900), 2: Peer(node_id=2, balance=900)}
        assert resolve_tie([2, 1], MiningRecord(), peers) == 1

    def test_singleton(self):
        peers = make_peers([100], start_id=1)
        assert resolve_tie([1], MiningRecord(), peers) == 1


def brute_force_finalize(bids, record, peers, plan):
    """Literal rule-by-rule reference: per block, keep the highest percentage;
    among equals prefer fewer mined blocks; among those prefer the greater
    balance; finally the lowest node id."""
    winners = {}
    for block in plan.blocks:
        contenders = [b for b in bids if b.block_index == block.index]
        if not contenders:
            continue
        top = None
        for b in contenders:
            if top is None or b.pct > top:
                top = b.pct
        tied = [b.bidder for b in contenders if b.pct == top]
        least = None
        for nid in tied:
            if least is None or record.blocks_mined(nid) < record.blocks_mined(least):
                least = nid
        tied = [nid for nid in tied
                if record.blocks_mined(nid) == record.blocks_mined(least)]
        richest = None
        for nid in tied:
            if richest is None or peers[nid].balance > peers[richest].balance:
                richest = nid
        tied = [nid for nid in tied if peers[nid].balance == peers[richest].balance]
        winners[block.index] = min(tied)
    return winners


class TestAgainstBruteForce:
    def test_random_instances_match_reference(self):
        rng = random.Random(2024)
        for trial in range(300):
            n_blocks = rng.randrange(1, 4)
            n_bidders = rng.randrange(1, 7)
            plan = plan_with_stakes([10 * (n_blocks - i) for i in range(n_blocks)])
            peers = {nid: Peer(node_id=nid, balance=rng.choice([200, 300, 300, 400]))
                     for nid in range(1, n_bidders + 1)}
            record = MiningRecord({nid: rng.choice([0, 0, 1, 2])
                                   for nid in peers})
            bids = []
            for nid in peers:
                block = rng.randrange(1, n_blocks + 1)
                pct = rng.choice([1_000, 2_000, 3_000])
                bids.append(bid_on(peers, plan, nid, block, pct))
            result = finalize_miners(bids, record, peers, plan)
            expected = brute_force_finalize(bids, record, peers, plan)
            assert {i: e.winner for i, e in result.entries.items()} == expected

    def test_scale_invariance_of_winners(self):
        rng = random.Random(99)
        for trial in range(50):
            n_blocks = rng.randrange(1, 4)
            stakes = [10 * (n_blocks - i) for i in range(n_blocks)]
            balances = [rng.choice([200, 300, 400]) for _ in range(5)]
            pcts = [rng.choice([1_000, 2_000, 3_000]) for _ in range(5)]
            blocks = [rng.randrange(1, n_blocks + 1) for _ in range(5)]
            winners = []
            for k in (1, 7, 1_000):
                plan = plan_with_stakes([s * k for s in stakes])
                peers = {nid: Peer(node_id=nid, balance=balances[nid - 1] * k)
                         for nid in range(1, 6)}
                bids = [bid_on(peers, plan, nid, blocks[nid - 1], pcts[nid - 1])
                        for nid in range(1, 6)]
                result = finalize_miners(bids, MiningRecord(), peers, plan)
                winners.append({i: e.winner for i, e in result.entries.items()})
            assert winners[0] == winners[1] == winners[2]

    def test_determinism(self):
        plan = plan_with_stakes([100, 50])
        peers = make_peers([500, 500, 500], start_id=1)
        record = MiningRecord({1: 1})
        bids = [bid_on(peers, plan, 1, 1, 2_000),
                bid_on(peers, plan, 2, 1, 2_000),
                bid_on(peers, plan, 3, 2, 1_000)]
        first = finalize_miners(bids, record, peers, plan)
        second = finalize_miners(list(reversed(bids)), record, peers, plan)
        assert {i: e.winner for i, e in first.entries.items()} == \
               {i: e.winner for i, e in second.entries.items()}

    def test_one_block_per_winner(self):
        rng = random.Random(31)
        plan = plan_with_stakes([40, 30, 20, 10])
        peers = make_peers([rng.randrange(50, 500) for _ in range(20)], start_id=1)
        bids = []
        for nid, peer in peers.items():
            options = eligible_blocks(peer, plan)
            if options:
                bids.append(bid_on(peers, plan, nid, rng.choice(options),
                                   rng.randrange(0, 10_001)))
        result = finalize_miners(bids, MiningRecord(), peers, plan)
        winners = result.winners()
        assert len(winners) == len(set(winners))
