"""Deterministic simulator and protocol library for the e-PoS block-auction
consensus scheme: mempool-driven epoch planning, baseline-stake block
auctions, PBFT mempool agreement, penalty enforcement, comparison selection
schemes, and adversary-success calculators with Monte-Carlo oracles."""

from .adversary import (
    AdversaryConfig,
    ScenarioSetup,
    Strategy,
    epos_double_spend_prob,
    epos_next_block_prob,
    pos_double_spend_prob,
    pos_next_block_prob,
    run_attack_scenario,
    sweep_closed_forms,
)
from .auction import (
    Assignment,
    Auction,
    Bid,
    eligible_blocks,
    finalize_miners,
    place_bid,
    resolve_tie,
)
from .epoch import (
    EpochPlan,
    compute_baseline_stakes,
    compute_epoch_length,
    epoch_duration,
    partition_evenly,
    plan_epoch,
)
from .harness import (
    RunConfig,
    emit_report,
    generate_world,
    poisson_arrivals,
    run_experiment,
)
from .mining import (
    PenaltyOutcome,
    SignedBlock,
    apply_penalty,
    final_commitment_check,
    mine_block,
    nothing_at_stake_fallback,
    settle_epoch,
    verify_block,
)
from .model import (
    BlockPlan,
    LedgerState,
    Mempool,
    MiningRecord,
    Peer,
    Transaction,
    mempool_insert,
    record_block,
    sort_by_fee_desc,
)
from .pbft import PbftOutcome, Replica, diverge_views, run_pbft, select_primary
from .schemes import (
    SchemeResult,
    balance_histogram,
    decentralization_beta,
    fairness_violations,
    gamma,
    run_priority_scheme,
    run_random_scheme,
)

__version__ = "0.1.0"
