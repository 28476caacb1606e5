import sys

import pytest

from commons_kernel import Client, Engine
from commons_kernel.errors import InvalidPayload
from commons_kernel.sim.scenario import load


class Sandbox:
    """An engine plus a keyring, addressed by participant name."""

    def __init__(self, world: dict, people=(), machines=(), enabled=None, seed=1):
        doc = {
            "ticks": 0,
            "participants": [{"name": n} for n in people] + [{"name": m, "kind": "Machine"} for m in machines],
            "world": world,
        }
        if enabled is not None:
            doc["governance_enabled"] = enabled
        sc = load(doc, seed)
        self.names = sc.names
        self.engine = Engine(sc.genesis)
        self.client = Client(self.engine, sc.keyring)

    @property
    def st(self):
        return self.engine.state

    def id(self, name: str) -> str:
        return self.names[name]

    def send(self, who: str, **payload):
        return self.client.send(who, payload).result

    def reject(self, who: str, **payload) -> Exception:
        """Send and return the domain error; fails if the event was accepted."""
        before = len(self.engine.events)
        with pytest.raises(InvalidPayload) as info:
            self.client.send(who, payload)
        assert len(self.engine.events) == before
        return info.value.error

    def advance(self, n: int = 1) -> None:
        for _ in range(n):
            self.client.advance()


@pytest.fixture(scope="session")
def sandbox():
    return Sandbox


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
