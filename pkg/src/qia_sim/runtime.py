"""Protocol plumbing shared by all three authentication schemes.

A round keeps its qubits in :class:`Register` objects. In-flight particles are
:class:`Qubit` handles into those registers, so an eavesdropper acting on a
message acts on the real (possibly entangled) particle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import qcore
from .qcore import PureState


class KeyLengthError(ValueError):
    """The authentication key does not fit the protocol's granularity."""


@dataclass(frozen=True)
class AuthKey:
    """Pre-shared classical authentication key."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("key bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str) -> "AuthKey":
        text = text.strip()
        if any(ch not in "01" for ch in text):
            raise ValueError(f"key string must contain only 0/1, got {text!r}")
        return cls(tuple(int(ch) for ch in text))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "AuthKey":
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=length)))

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    def pairs(self) -> list[tuple[int, int]]:
        """``(k_{2i-1}, k_{2i})`` for i = 1..n."""
        if len(self.bits) % 2:
            raise KeyLengthError(f"key length {len(self.bits)} is odd")
        return [(self.bits[2 * i], self.bits[2 * i + 1]) for i in range(len(self.bits) // 2)]

    def codes(self) -> list[str]:
        return [f"{a}{b}" for a, b in self.pairs()]

    def halves(self) -> tuple["AuthKey", "AuthKey"]:
        if len(self.bits) % 4:
            raise KeyLengthError(f"key length {len(self.bits)} is not a multiple of 4")
        h = len(self.bits) // 2
        return AuthKey(self.bits[:h]), AuthKey(self.bits[h:])

    def require(self, protocol: int, *, allow_empty: bool = False) -> int:
        """Validate the length for ``protocol`` and return the round count n."""
        unit = 4 if protocol == 2 else 2
        if len(self.bits) % unit:
            raise KeyLengthError(
                f"protocol {protocol} needs a key length that is a multiple of {unit}, got {len(self.bits)}"
            )
        if not allow_empty and not self.bits:
            raise KeyLengthError("key must not be empty")
        return len(self.bits) // unit


class Register:
    """Mutable holder of one pure state whose qubits carry names.

    Qubits appended later (Charlie's control, Eve's ancilla) get higher
    indices; existing indices never move.
    """

    __slots__ = ("state", "names")

    def __init__(self, state: PureState, names: Sequence[str]):
        if len(names) != state.num_qubits or len(set(names)) != len(names):
            raise ValueError("register needs one distinct name per qubit")
        self.state = state
        self.names = list(names)

    @classmethod
    def single(cls, state: PureState, name: str = "q") -> "Register":
        return cls(state, [name])

    def index(self, name: str) -> int:
        return self.names.index(name)

    def extend(self, state: PureState, names: Sequence[str]) -> None:
        if any(n in self.names for n in names):
            raise ValueError(f"duplicate qubit names {names}")
        self.state = qcore.tensor(self.state, state)
        self.names.extend(names)

    def __repr__(self) -> str:
        return f"Register({self.names}, {self.state!r})"


@dataclass(frozen=True, eq=False)
class Qubit:
    """Handle to one named qubit of a register."""

    register: Register
    name: str

    @classmethod
    def fresh(cls, state: PureState, name: str = "q") -> "Qubit":
        return cls(Register.single(state, name), name)

    @property
    def index(self) -> int:
        return self.register.index(self.name)

    def measure(self, basis: str, rng: np.random.Generator) -> str:
        outcome, self.register.state = qcore.measure(self.register.state, self.index, basis, rng)
        return outcome

    def apply(self, op) -> None:
        self.register.state = qcore.apply_1q(self.register.state, self.index, op)

    def entangle(self, isometry, ancilla_name: str) -> "Qubit":
        """Map this qubit into (qubit, fresh ancilla); returns the ancilla handle."""
        reg = self.register
        reg.state = qcore.apply_isometry(reg.state, self.index, isometry)
        reg.names.append(ancilla_name)
        return Qubit(reg, ancilla_name)

    def reduced(self) -> qcore.DensityMatrix:
        return qcore.partial_trace(self.register.state, [self.index])


def same_register(*qubits: Qubit) -> Register:
    reg = qubits[0].register
    if any(q.register is not reg for q in qubits[1:]):
        raise ValueError("joint operation on qubits held in different registers")
    return reg


def bell_measure_pair(a: Qubit, b: Qubit, rng: np.random.Generator) -> str:
    reg = same_register(a, b)
    code, reg.state = qcore.bell_measure(reg.state, a.index, b.index, rng)
    return code


def cnot_pair(control: Qubit, target: Qubit) -> None:
    reg = same_register(control, target)
    reg.state = qcore.apply_cnot(reg.state, control.index, target.index)


@dataclass
class QubitMessage:
    """Ordered quantum payload in flight.

    Only ``positions`` (and hence the length) is meant to be visible to a tap;
    ``label`` and ``origin`` name the leg for the transcript.
    """

    positions: list[Qubit]
    origin: str = ""
    label: str = ""

    def __len__(self) -> int:
        return len(self.positions)


class ChannelTap:
    """Hook invoked once per in-flight message. The base class is honest.

    ``disclose`` models what reaches the receiver over the classical channel
    when the sender reveals decoy information. The classical channel is
    authenticated, so only a tap that impersonates the sender may alter it.
    """

    def __call__(self, msg: QubitMessage) -> QubitMessage:
        return msg

    def disclose(self, record):
        return record

    # Protocol 3 hooks; ``None`` means the genuine party acts.
    def forged_bell_code(self) -> str | None:
        return None

    def report(self, received: Qubit, rng: np.random.Generator) -> str | None:
        return None


HONEST = ChannelTap()


def transmit(msg: QubitMessage, tap: ChannelTap | None) -> QubitMessage:
    out = (tap or HONEST)(msg)
    if len(out) != len(msg):
        raise ValueError(f"tap changed the message length from {len(msg)} to {len(out)}")
    return out


def _encode(data) -> bytes:
    if isinstance(data, (bytes, bytearray)):
        return bytes(data)
    return json.dumps(data, separators=(",", ":"), sort_keys=True).encode()


class Event:
    """One transcript entry. Structured payloads are JSON-encoded on first access."""

    __slots__ = ("step", "party", "event", "_data", "_payload")

    def __init__(self, step: str, party: str, event: str, payload=b""):
        self.step, self.party, self.event = step, party, event
        self._data = payload
        self._payload = payload if isinstance(payload, bytes) else None

    @property
    def payload(self) -> bytes:
        if self._payload is None:
            self._payload = _encode(self._data)
        return self._payload

    def __eq__(self, other) -> bool:
        return isinstance(other, Event) and self.line() == other.line()

    def __repr__(self) -> str:
        return f"Event({self.step!r}, {self.party!r}, {self.event!r}, {self.payload!r})"

    def line(self) -> str:
        return f"{self.step}\t{self.party}\t{self.event}\t{self.payload.hex()}"


@dataclass
class Transcript:
    events: list[Event] = field(default_factory=list)

    def add(self, step: str, party: str, event: str, payload=b"") -> None:
        self.events.append(Event(step, party, event, payload))

    def lines(self) -> list[str]:
        return [e.line() for e in self.events]

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        events = []
        for line in text.splitlines():
            step, party, event, payload = line.split("\t")
            events.append(Event(step, party, event, bytes.fromhex(payload)))
        return cls(events)


@dataclass(frozen=True)
class Thresholds:
    """Tolerable limits; the ideal channel makes any disturbance Eve's doing."""

    qber: float = 0.0
    auth: float = 0.0

    def __post_init__(self):
        for v in (self.qber, self.auth):
            if not 0.0 <= v <= 1.0:
                raise ValueError("thresholds must lie in [0, 1]")

    def verdict(self, qber: float, auth_mismatch_rate: float) -> str:
        return "accept" if qber <= self.qber and auth_mismatch_rate <= self.auth else "reject"


@dataclass
class ProtocolReport:
    verdict: str
    qber: float
    auth_mismatch_rate: float
    transcript: Transcript
    rounds: int
    decoys_checked: int = 0
    decoy_mismatches: int = 0
    auth_checked: int = 0
    auth_mismatches: int = 0
    aborted: bool = False
    details: tuple = ()

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"


def decoy_basis(k2: int) -> str:
    return "Z" if k2 == 0 else "X"


def make_decoy_sequence(key: AuthKey, n: int, rng: np.random.Generator) -> tuple[list[PureState], list[str]]:
    """Decoy i is |0>/|1> when k_{2i} = 0 and |+>/|-> when k_{2i} = 1.

    Returns the states and the sender's private record of the exact labels.
    """
    if len(key) < 2 * n:
        raise KeyLengthError(f"{n} decoys need at least {2 * n} key bits, got {len(key)}")
    record = []
    for i in range(n):
        labels = qcore.BASIS_LABELS[decoy_basis(key.bits[2 * i + 1])]
        record.append(labels[int(rng.integers(2))])
    return [qcore.prepare_basis_state(lab) for lab in record], record


def decoy_mismatch(outcome: str, basis: str, disclosed: str) -> bool:
    """Bob flags a decoy whose disclosed state is off-basis or contradicts his outcome."""
    return qcore.basis_of(disclosed) != basis or outcome != disclosed


def check_decoys(
    received: Sequence[Qubit | PureState],
    secret_record: Sequence[str],
    key: AuthKey,
    rng: np.random.Generator,
) -> float:
    """Measure decoy i in the basis fixed by k_{2i} and return the mismatch fraction."""
    if len(received) != len(secret_record):
        raise ValueError(f"{len(received)} decoys received but {len(secret_record)} recorded")
    if not received:
        return 0.0
    bad = 0
    for i, (q, disclosed) in enumerate(zip(received, secret_record)):
        if isinstance(q, PureState):
            q = Qubit.fresh(q)
        basis = decoy_basis(key.bits[2 * i + 1])
        bad += decoy_mismatch(q.measure(basis, rng), basis, disclosed)
    return bad / len(received)


def rng_substream(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for ``(seed, trial)``.

    numpy's SeedSequence hashes the entropy and spawn key with a fixed,
    platform-independent mixing function before seeding PCG64.
    """
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    if trial < 0:
        raise ValueError("trial index must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def interleave(items: Sequence, inserts: Sequence, positions: Iterable[int]) -> list:
    """Place ``inserts`` at the given final positions, ``items`` fill the rest in order."""
    positions = sorted(positions)
    total = len(items) + len(inserts)
    out = [None] * total
    for p, x in zip(positions, inserts):
        out[p] = x
    it = iter(items)
    for i in range(total):
        if out[i] is None:
            out[i] = next(it)
    return out
