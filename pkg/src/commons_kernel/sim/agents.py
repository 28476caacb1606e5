"""Agent appropriation policies and the counter-based random source."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field


def uniform(seed: int, tick: int, address: str) -> float:
    """Deterministic draw in [0, 1) keyed by (seed, tick, address)."""
    h = hashlib.sha256(f"{seed}:{tick}:{address}".encode()).digest()
    return int.from_bytes(h[:8], "big") / 2**64


@dataclass
class Agent:
    address: str
    variant: str = "Honest"
    greed: float = 0.0
    deterrence: float = 0.0
    jitter: float = 0.0
    greed_trace: list = field(default_factory=list)  # (tick, greed) after each change
    reduced_at: int | None = None

    @classmethod
    def from_policy(cls, address: str, policy: dict) -> "Agent":
        return cls(
            address,
            policy.get("variant", "Honest"),
            float(policy.get("greed", 0.0)),
            float(policy.get("deterrence", 0.0)),
            float(policy.get("jitter", 0.0)),
        )

    def desired(self, reserve: int, fair_share: int, u: float) -> int:
        """Amount requested this tick given the pool reserve and a draw ``u``."""
        if reserve <= 0:
            return 0
        if self.variant == "Honest":
            return min(fair_share, reserve)
        g = min(1.0, self.greed * (1 + self.jitter * (2 * u - 1)))
        # a greedy agent never settles for less than the fair share
        return min(reserve, max(fair_share, math.ceil(g * reserve)))

    def observe_sanctions(self, count: int, tick: int) -> None:
        """Deterrable agents cut greed by ``deterrence`` per visible sanction."""
        if self.variant != "Deterrable" or count == 0 or self.deterrence == 0:
            return
        self.greed *= (1 - self.deterrence) ** count
        self.greed_trace.append((tick, self.greed))
        if self.reduced_at is None:
            self.reduced_at = tick
