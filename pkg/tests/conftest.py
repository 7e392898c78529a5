import pytest

from epos_sim.model import Peer, Transaction


def make_txs(fees, sizes=None, start_id=0, senders=None):
    sizes = sizes or [1] * len(fees)
    senders = senders or [None] * len(fees)
    return [Transaction(id=start_id + i, fee=f, size=s, sender=snd)
            for i, (f, s, snd) in enumerate(zip(fees, sizes, senders))]


def make_peers(balances, start_id=0):
    return {start_id + i: Peer(node_id=start_id + i, balance=b)
            for i, b in enumerate(balances)}


@pytest.fixture
def txs_54321():
    return make_txs([5, 4, 3, 2, 1])
