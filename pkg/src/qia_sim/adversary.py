"""Eavesdropper strategies, each a :class:`ChannelTap`.

None of these objects is ever handed the authentication key. Attack taps keep
a per-instance record buffer, so build one per trial.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import protocol2, qcore
from .protocol3 import P3Taps
from .runtime import ChannelTap, Qubit, QubitMessage, bell_measure_pair

FOUR_STATES = ("0", "1", "+", "-")


class Impersonator(ChannelTap):
    """A tap that stands in for one of the legitimate parties."""

    impersonates = "alice"


class P1Impersonation(Impersonator):
    """Blocks the genuine qubits and sends a forged block per key pair.

    Each block gets a uniform placement, an authentication qubit uniform in
    {|0>, |->} and a decoy uniform over the four BB84 states. Eve then
    discloses her own decoy states truthfully.
    """

    def __init__(self, rng: np.random.Generator, impersonates: str = "alice"):
        self.rng = rng
        self.impersonates = impersonates
        self.record: list[str] = []

    def __call__(self, msg: QubitMessage) -> QubitMessage:
        if len(msg) % 2:
            raise ValueError("expected blocks of two qubits")
        positions, self.record = [], []
        for _ in range(len(msg) // 2):
            auth = ("0", "-")[int(self.rng.integers(2))]
            decoy = FOUR_STATES[int(self.rng.integers(4))]
            self.record.append(decoy)
            pair = [Qubit.fresh(qcore.prepare_basis_state(decoy)), Qubit.fresh(qcore.prepare_basis_state(auth))]
            positions += pair if self.rng.integers(2) == 0 else pair[::-1]
        return QubitMessage(positions, "eve", msg.label)

    def disclose(self, record):
        return list(self.record)


class P2Impersonation(Impersonator):
    """Encodes a uniformly guessed key half."""

    def __init__(self, rng: np.random.Generator, impersonates: str = "alice"):
        self.rng = rng
        self.impersonates = impersonates
        self.guess: list[int] = []

    def __call__(self, msg: QubitMessage) -> QubitMessage:
        self.guess = [int(b) for b in self.rng.integers(0, 2, size=2 * len(msg))]
        labels = [protocol2.particle_label(self.guess[2 * i], self.guess[2 * i + 1]) for i in range(len(msg))]
        return QubitMessage([Qubit.fresh(qcore.prepare_basis_state(lab)) for lab in labels], "eve", msg.label)


class P3Impersonation(Impersonator):
    """Prepares each pair in a uniformly guessed Bell state and plays Alice's part with it.

    A fixed ``code`` replaces the guess, e.g. ``"00"`` for an Eve who always uses phi+.
    """

    def __init__(self, rng: np.random.Generator, impersonates: str = "alice", code: str | None = None):
        if code is not None:
            qcore.check_code(code)
        self.rng = rng
        self.impersonates = impersonates
        self.code = code
        self.guesses: list[str] = []

    def forged_bell_code(self) -> str:
        code = self.code or qcore.BELL_CODES[int(self.rng.integers(4))]
        self.guesses.append(code)
        return code

    def taps(self) -> P3Taps:
        if self.impersonates == "bob":
            return P3Taps(b_to_c=self)
        return P3Taps(a_to_c=self)


def impersonate(protocol: int, n: int, rng: np.random.Generator) -> Impersonator:
    """Impersonation tap for ``protocol``; ``n`` is only checked, the message sets the size."""
    if n < 0:
        raise ValueError("n must be non-negative")
    cls = {1: P1Impersonation, 2: P2Impersonation, 3: P3Impersonation}.get(protocol)
    if cls is None:
        raise ValueError(f"unknown protocol {protocol!r}")
    return cls(rng)


class MeasureResendAttack(ChannelTap):
    """Measure each qubit in a uniformly random basis and forward the collapsed particle."""

    def __init__(self, rng: np.random.Generator, fraction: float = 1.0):
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        self.rng = rng
        self.fraction = fraction
        self.records: list[tuple[str, str] | None] = []

    def __call__(self, msg: QubitMessage) -> QubitMessage:
        for q in msg.positions:
            if self.fraction < 1.0 and self.rng.random() >= self.fraction:
                self.records.append(None)
                continue
            basis = "ZX"[int(self.rng.integers(2))]
            self.records.append((basis, q.measure(basis, self.rng)))
        return msg


def measure_resend(rng: np.random.Generator, fraction: float = 1.0) -> MeasureResendAttack:
    return MeasureResendAttack(rng, fraction)


class ForgeAttack(ChannelTap):
    """Replace every in-flight qubit by a state drawn from ``policy``.

    ``policy`` is a label from {0, 1, +, -}, ``"uniform"`` over those four,
    or an explicit normalized 2-vector.
    """

    def __init__(self, policy, rng: np.random.Generator):
        if isinstance(policy, str):
            if policy != "uniform" and policy not in FOUR_STATES:
                raise ValueError(f"unknown forge policy {policy!r}")
        else:
            policy = qcore.PureState(np.asarray(policy, dtype=complex))
            if policy.num_qubits != 1:
                raise ValueError("forge state must be a single qubit")
        self.policy = policy
        self.rng = rng
        self.sent: list[str] = []

    def _state(self) -> qcore.PureState:
        if isinstance(self.policy, qcore.PureState):
            return self.policy
        label = FOUR_STATES[int(self.rng.integers(4))] if self.policy == "uniform" else self.policy
        self.sent.append(label)
        return qcore.prepare_basis_state(label)

    def __call__(self, msg: QubitMessage) -> QubitMessage:
        return QubitMessage([Qubit.fresh(self._state()) for _ in msg.positions], "eve", msg.label)


def forge_p1(policy, rng: np.random.Generator) -> ForgeAttack:
    return ForgeAttack(policy, rng)


# Ancilla forging on the controlled three-party scheme ------------------------

_NAMES = ("a", "b", "c", "d")


def _complex(text: str) -> complex:
    return complex(text.strip().replace(" ", "").replace("i", "j"))


@dataclass(frozen=True)
class ForgeCoefficients:
    """Eve's map on the travelling particle 2 and her ancilla e.

    ``branch0 = (a0, b0, c0, d0)`` is the image of |1>:
    a0|10> + b0|11> + c0|00> + d0|01> over (2, e); ``branch1`` is the image of
    |0> with the same layout.
    """

    branch0: tuple[complex, complex, complex, complex]
    branch1: tuple[complex, complex, complex, complex]

    def __post_init__(self):
        for name, br in (("branch 0", self.branch0), ("branch 1", self.branch1)):
            if len(br) != 4:
                raise ValueError(f"{name} needs four coefficients")
            norm = sum(abs(complex(x)) ** 2 for x in br)
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"{name} is not normalized (sum |.|^2 = {norm:.12g})")
        object.__setattr__(self, "branch0", tuple(complex(x) for x in self.branch0))
        object.__setattr__(self, "branch1", tuple(complex(x) for x in self.branch1))

    @staticmethod
    def _vec(br) -> np.ndarray:
        a, b, c, d = br
        return np.array([c, d, a, b], dtype=complex)  # |00>, |01>, |10>, |11>

    @staticmethod
    def _unvec(v) -> tuple:
        c, d, a, b = (complex(x) for x in v)
        return (a, b, c, d)

    @classmethod
    def complete(cls, branch0: Sequence[complex]) -> "ForgeCoefficients":
        """Pick branch 1 orthogonal to branch 0 so the map is a true isometry.

        Uses Gram-Schmidt on the reference |00> (c1 = 1), falling back to |01>.
        """
        u0 = cls._vec(branch0)
        for ref in (0, 1):
            e = np.zeros(4, dtype=complex)
            e[ref] = 1
            w = e - np.vdot(u0, e) * u0
            nrm = np.linalg.norm(w)
            if nrm > 1e-6:
                return cls(tuple(complex(x) for x in branch0), cls._unvec(w / nrm))
        raise AssertionError("unreachable: |00> and |01> cannot both be parallel to a unit vector")

    @classmethod
    def parse(cls, values: Sequence) -> "ForgeCoefficients":
        vals = [_complex(v) if isinstance(v, str) else complex(v) for v in values]
        if len(vals) == 4:
            return cls.complete(vals)
        if len(vals) == 8:
            return cls(tuple(vals[:4]), tuple(vals[4:]))
        raise ValueError(f"expected 4 or 8 coefficients, got {len(vals)}")

    @classmethod
    def from_string(cls, text: str) -> "ForgeCoefficients":
        return cls.parse([t for t in text.split(",") if t.strip()])

    @classmethod
    def random(cls, rng: np.random.Generator) -> "ForgeCoefficients":
        """Haar-random branch 0 and Haar-random branch 1 in its orthogonal complement."""
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        u0 = z / np.linalg.norm(z)
        w = rng.normal(size=4) + 1j * rng.normal(size=4)
        w = w - np.vdot(u0, w) * u0
        return cls(cls._unvec(u0), cls._unvec(w / np.linalg.norm(w)))

    def matrix(self) -> np.ndarray:
        """4x2 map; column j is the image of |j>."""
        return np.column_stack([self._vec(self.branch1), self._vec(self.branch0)])

    @property
    def is_isometry(self) -> bool:
        return abs(np.vdot(self._vec(self.branch0), self._vec(self.branch1))) < 1e-9

    def as_dict(self) -> dict[str, complex]:
        out = {f"{k}0": v for k, v in zip(_NAMES, self.branch0)}
        out.update({f"{k}1": v for k, v in zip(_NAMES, self.branch1)})
        return out


class _AncillaReporter(ChannelTap):
    """Return leg: Eve keeps particle 4 and Bell-measures (e, 4) in place of Alice."""

    def __init__(self, owner: "AncillaForgeAttack"):
        self.owner = owner
        self.impersonates = "alice"

    def report(self, received: Qubit, rng: np.random.Generator) -> str:
        anc = self.owner.ancillas.get(id(received.register))
        if anc is None:
            raise ValueError("no ancilla is entangled with this particle")
        return bell_measure_pair(anc, received, rng)


class AncillaForgeAttack(Impersonator):
    """Entangle each outbound particle with a fresh ancilla, then answer for Alice.

    Use as the Alice -> Charlie tap; :attr:`inbound` is the matching
    Charlie -> Alice tap (see :meth:`taps`).
    """

    def __init__(self, coefficients: ForgeCoefficients, rng: np.random.Generator):
        self.coefficients = coefficients
        self.rng = rng
        self._map = coefficients.matrix()
        self.ancillas: dict[int, Qubit] = {}
        self.inbound = _AncillaReporter(self)

    def __call__(self, msg: QubitMessage) -> QubitMessage:
        for q in msg.positions:
            self.ancillas[id(q.register)] = q.entangle(self._map, "e")
        return msg

    def taps(self) -> P3Taps:
        return P3Taps(a_to_c=self, c_to_a=self.inbound)


def ancilla_forge_p3(coefficients, rng: np.random.Generator) -> AncillaForgeAttack:
    if not isinstance(coefficients, ForgeCoefficients):
        coefficients = ForgeCoefficients.parse(coefficients)
    return AncillaForgeAttack(coefficients, rng)


def extremal_coefficients() -> list[ForgeCoefficients]:
    """Corner cases: b0 = c0 = 1/sqrt(2), and each single nonzero branch-0 entry."""
    s = 1 / math.sqrt(2)
    cases = [ForgeCoefficients.complete((0, s, s, 0))]
    for k in range(4):
        br = [0j] * 4
        br[k] = 1
        cases.append(ForgeCoefficients.complete(br))
    return cases
