"""cachekv: a cache-semantic bucketed hash table.

Full-capacity operation is the normal state: a full bucket resolves each
upsert in place by score-driven eviction or admission rejection, with a
fixed number of digest-line transactions per lookup at every load
factor.
"""

from .gate import Role, RoleGate, RoleGuard
from .hashing import EMPTY_KEY, LOCKED_KEY, hash_key
from .metrics import EventLog, EvictionEvent, QualityStats, RejectionEvent, TxnCounters, topn_retention
from .scoring import EpochState, PolicyId, score_on_hit, score_on_insert
from .store import BUCKET_SLOTS, Tier, TieredValueStore, ValueHandle
from .table import (
    CacheTable,
    ConsistencyError,
    LookupResult,
    Mode,
    Outcome,
    TableConfig,
    UpsertResult,
)

__all__ = [
    "BUCKET_SLOTS",
    "CacheTable",
    "ConsistencyError",
    "EMPTY_KEY",
    "EpochState",
    "EventLog",
    "EvictionEvent",
    "LOCKED_KEY",
    "LookupResult",
    "Mode",
    "Outcome",
    "PolicyId",
    "QualityStats",
    "RejectionEvent",
    "Role",
    "RoleGate",
    "RoleGuard",
    "TableConfig",
    "Tier",
    "TieredValueStore",
    "TxnCounters",
    "UpsertResult",
    "ValueHandle",
    "hash_key",
    "score_on_hit",
    "score_on_insert",
    "topn_retention",
]

__version__ = "0.1.0"
