"""Deterministic governance kernel for common-pool-resource projects."""

from . import world  # noqa: F401  (registers every command handler)
from .ledger import Address, AddressKind, Client, Engine, EventLog, Keyring, SignedEvent, replay, state_hash
from .state import WorldState

__version__ = "0.1.0"

__all__ = [
    "Address",
    "AddressKind",
    "Client",
    "Engine",
    "EventLog",
    "Keyring",
    "SignedEvent",
    "WorldState",
    "replay",
    "state_hash",
]
