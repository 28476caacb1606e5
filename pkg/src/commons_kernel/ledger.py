"""Append-only signed event log, the single writer of world state.

Every governance action is a :class:`SignedEvent`. :class:`Engine` verifies
the signature, dispatches the payload to the owning module inside an atomic
block, and appends the event only if the module accepted it. Replaying the
log from genesis reproduces the live state bit for bit.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from . import canonical
from .commands import Ctx, dispatch
from .errors import (
    BadSignature,
    CorruptLog,
    DomainError,
    InvalidPayload,
    Malformed,
    UnknownAuthor,
    WrongTick,
)
from .state import WorldState

ADVANCE = "advance"


class AddressKind(str, enum.Enum):
    HUMAN = "Human"
    MACHINE = "Machine"
    FIRM = "Firm"


@dataclass(frozen=True)
class Address:
    id: str  # hex of the 32-byte Ed25519 public key
    kind: AddressKind
    label: str = ""


def address_kind(st: WorldState, addr: str) -> AddressKind | None:
    rec = st.table("address").get(addr)
    return rec.kind if rec is not None else None


def is_machine(st: WorldState, addr: str) -> bool:
    return address_kind(st, addr) is AddressKind.MACHINE


def label_of(st: WorldState, addr: str) -> str:
    rec = st.table("address").get(addr)
    return rec.label if rec is not None and rec.label else addr


@dataclass(frozen=True)
class SignedEvent:
    seq: int
    author: str
    timestamp: int
    payload: dict
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return canonical.encode(
            {"seq": self.seq, "author": self.author, "timestamp": self.timestamp, "payload": self.payload}
        )

    def to_bytes(self) -> bytes:
        return canonical.encode(
            {
                "seq": self.seq,
                "author": self.author,
                "timestamp": self.timestamp,
                "payload": self.payload,
                "signature": self.signature,
            }
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SignedEvent":
        d = canonical.decode(raw)
        return cls(d["seq"], d["author"], d["timestamp"], d["payload"], d["signature"])

    @property
    def kind(self) -> str:
        return self.payload.get("kind", "") if isinstance(self.payload, dict) else ""


def verify_signature(event: SignedEvent) -> bool:
    try:
        key = Ed25519PublicKey.from_public_bytes(bytes.fromhex(event.author))
        key.verify(event.signature, event.signing_bytes())
    except (InvalidSignature, ValueError, TypeError):
        return False
    return True


class Keyring:
    """Deterministic Ed25519 keys derived from (seed, label).

    Key custody is not the kernel's business; the simulator and tests hold
    a keyring and sign on behalf of their agents.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._keys: dict[str, Ed25519PrivateKey] = {}
        self.labels: dict[str, str] = {}

    def _derive(self, label: str) -> Ed25519PrivateKey:
        material = b"commons-kernel/v1" + self.seed.to_bytes(8, "big") + label.encode()
        return Ed25519PrivateKey.from_private_bytes(hashlib.sha256(material).digest())

    def address(self, label: str, kind: AddressKind | str = AddressKind.HUMAN) -> Address:
        key = self._derive(label)
        pub = key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw).hex()
        self._keys[pub] = key
        self.labels[label] = pub
        return Address(pub, AddressKind(kind), label)

    def id(self, label: str) -> str:
        return self.labels[label]

    def sign(self, author: str, seq: int, timestamp: int, payload: dict) -> SignedEvent:
        author = self.labels.get(author, author)
        unsigned = SignedEvent(seq, author, timestamp, payload)
        sig = self._keys[author].sign(unsigned.signing_bytes())
        return SignedEvent(seq, author, timestamp, payload, sig)


@dataclass(frozen=True)
class Receipt:
    seq: int
    result: object
    applications: frozenset


@dataclass
class EventLog:
    genesis: dict
    events: list[SignedEvent] = field(default_factory=list)

    @property
    def genesis_digest(self) -> bytes:
        return canonical.digest(self.genesis)

    def write(self, path: str | Path) -> None:
        lines = [self.genesis_digest.hex()] + [e.to_bytes().hex() for e in self.events]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path: str | Path, genesis: dict) -> "EventLog":
        """Parse a log file; raises CorruptLog with the first bad line position."""
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0] != canonical.digest(genesis).hex():
            raise CorruptLog(0, "genesis digest mismatch")
        events = []
        for pos, line in enumerate(lines[1:], start=1):
            try:
                events.append(SignedEvent.from_bytes(bytes.fromhex(line)))
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise CorruptLog(pos, f"undecodable record ({exc})") from exc
        return cls(genesis, events)


class Engine:
    def __init__(self, genesis: dict):
        from .world import genesis_state

        self.genesis = genesis
        self.genesis_digest = canonical.digest(genesis)
        self.state = genesis_state(genesis)
        self.events: list[SignedEvent] = []
        self.receipts: list[Receipt] = []

    @property
    def next_seq(self) -> int:
        return len(self.events) + 1

    @property
    def tick(self) -> int:
        return self.state.tick

    @property
    def log(self) -> EventLog:
        return EventLog(self.genesis, list(self.events))

    def submit(self, event: SignedEvent) -> Receipt:
        if not verify_signature(event):
            raise BadSignature(f"signature check failed for seq {event.seq}")
        if event.author not in self.state.table("address"):
            raise UnknownAuthor(event.author)
        st = self.state
        try:
            if event.seq != self.next_seq:
                raise Malformed(f"expected seq {self.next_seq}, got {event.seq}")
            expected_tick = st.tick + 1 if event.kind == ADVANCE else st.tick
            if event.timestamp != expected_tick:
                raise WrongTick(f"event tick {event.timestamp}, world tick {st.tick}")
            ctx = Ctx(event.author, event.timestamp, event.seq)
            with st.atomic():
                result = dispatch(st, ctx, event.payload)
                _after(st, ctx, event.payload)
        except DomainError as exc:
            raise InvalidPayload(exc) from exc
        receipt = Receipt(event.seq, result, frozenset(ctx.touched | {"M7-1"}))
        self.events.append(event)
        self.receipts.append(receipt)
        return receipt

    def state_hash(self) -> bytes:
        return state_hash(self.state)

    def history(
        self,
        author: str | None = None,
        kind: str | Iterable[str] | None = None,
        seq_range: tuple[int, int] | None = None,
    ) -> list[SignedEvent]:
        kinds = {kind} if isinstance(kind, str) else set(kind) if kind is not None else None
        out = []
        for e in self.events:
            if author is not None and e.author != author:
                continue
            if kinds is not None and e.kind not in kinds:
                continue
            if seq_range is not None and not seq_range[0] <= e.seq <= seq_range[1]:
                continue
            out.append(e)
        return out


def _after(st: WorldState, ctx: Ctx, payload: dict) -> None:
    from . import rules

    rules.apply_incentives(st, ctx, payload)


def state_hash(state: WorldState) -> bytes:
    return state.state_hash()


def _check_positions(events: list[SignedEvent]) -> None:
    # signatures are checked by submit, in the same order
    for pos, e in enumerate(events, start=1):
        if e.seq != pos:
            raise CorruptLog(pos, f"expected seq {pos}, found {e.seq}")


def replay_engine(log: EventLog) -> Engine:
    _check_positions(log.events)
    engine = Engine(log.genesis)
    for pos, e in enumerate(log.events, start=1):
        try:
            engine.submit(e)
        except (InvalidPayload, UnknownAuthor, BadSignature) as exc:
            raise CorruptLog(pos, f"rejected on replay: {exc}") from exc
    return engine


def replay(log: EventLog) -> WorldState:
    return replay_engine(log).state


def fold(log: EventLog) -> WorldState:
    """Second, purely functional fold: copy the state before every event.

    Deliberately shares nothing with :class:`Engine` beyond the module
    handlers, so it can audit the journaled incremental path.
    """
    from .world import genesis_state

    state = genesis_state(log.genesis)
    for pos, e in enumerate(log.events, start=1):
        raw = e.to_bytes()
        decoded = SignedEvent.from_bytes(raw)
        if decoded.seq != pos or not verify_signature(decoded):
            raise CorruptLog(pos, "seq or signature check failed")
        nxt = state.copy()
        ctx = Ctx(decoded.author, decoded.timestamp, decoded.seq)
        try:
            dispatch(nxt, ctx, decoded.payload)
            _after(nxt, ctx, decoded.payload)
        except DomainError as exc:
            raise CorruptLog(pos, f"rejected on fold: {exc}") from exc
        state = nxt
    return state


class Client:
    """Signs payloads with a keyring and submits them at the current tick."""

    def __init__(self, engine: Engine, keyring: Keyring, kernel: str | None = None):
        self.engine = engine
        self.keyring = keyring
        self.kernel = kernel or engine.genesis.get("kernel")

    def send(self, author: str, payload: dict) -> Receipt:
        ev = self.keyring.sign(author, self.engine.next_seq, self.engine.tick, payload)
        return self.engine.submit(ev)

    def advance(self) -> Receipt:
        ev = self.keyring.sign(self.kernel, self.engine.next_seq, self.engine.tick + 1, {"kind": ADVANCE})
        return self.engine.submit(ev)
