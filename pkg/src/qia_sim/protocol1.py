"""One-way and mutual authentication with single qubits and key-placed decoys.

For key pair i with parity p = k_{2i-1} xor k_{2i}:

* the authentication qubit is |0> (p = 0) or |-> (p = 1);
* the decoy is drawn from {|0>, |1>} (k_{2i} = 0) or {|+>, |->} (k_{2i} = 1);
* the block is (decoy, auth) for p = 0 and (auth, decoy) for p = 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcore
from .runtime import (
    AuthKey,
    ChannelTap,
    ProtocolReport,
    Qubit,
    QubitMessage,
    Thresholds,
    Transcript,
    check_decoys,
    make_decoy_sequence,
    transmit,
)

AUTH_STATE = {0: "0", 1: "-"}
AUTH_BASIS = {0: "Z", 1: "X"}


def parities(key: AuthKey) -> list[int]:
    return [a ^ b for a, b in key.pairs()]


def p1_layout(key: AuthKey) -> list[str]:
    """Role of each transmitted position, 'decoy' or 'auth'."""
    out: list[str] = []
    for p in parities(key):
        out += ["decoy", "auth"] if p == 0 else ["auth", "decoy"]
    return out


def split_positions(key: AuthKey, positions):
    """Return (decoys, auths) in key order."""
    decoys, auths = [], []
    for role, item in zip(p1_layout(key), positions):
        (decoys if role == "decoy" else auths).append(item)
    return decoys, auths


def p1_encode(key: AuthKey, rng: np.random.Generator) -> tuple[QubitMessage, list[str]]:
    """Sender side. Returns the 2n-qubit message and the private decoy record."""
    n = key.require(1)
    decoys, record = make_decoy_sequence(key, n, rng)
    positions = []
    for p, decoy in zip(parities(key), decoys):
        auth = Qubit.fresh(qcore.prepare_basis_state(AUTH_STATE[p]))
        d = Qubit.fresh(decoy)
        positions += [d, auth] if p == 0 else [auth, d]
    return QubitMessage(positions), record


@dataclass(frozen=True)
class P1Decode:
    qber: float
    auth_mismatch_rate: float
    verdict: str
    decoy_mismatches: int
    auth_mismatches: int
    outcomes: tuple[str, ...]


def p1_decode(
    msg: QubitMessage,
    key: AuthKey,
    disclosure,
    rng: np.random.Generator,
    thresholds: Thresholds = Thresholds(),
) -> P1Decode:
    """Receiver side: check the disclosed decoys, then the authentication qubits."""
    n = key.require(1)
    if len(msg) != 2 * n:
        raise ValueError(f"expected {2 * n} qubits, got {len(msg)}")
    decoys, auths = split_positions(key, msg.positions)
    qber = check_decoys(decoys, list(disclosure), key, rng)
    outcomes = []
    bad = 0
    for p, q in zip(parities(key), auths):
        out = q.measure(AUTH_BASIS[p], rng)
        outcomes.append(out)
        bad += out != AUTH_STATE[p]
    rate = bad / n
    return P1Decode(qber, rate, thresholds.verdict(qber, rate), round(qber * n), bad, tuple(outcomes))


def p1_direction(
    key: AuthKey,
    rng: np.random.Generator,
    *,
    tap: ChannelTap | None = None,
    sender: str = "alice",
    receiver: str = "bob",
    thresholds: Thresholds = Thresholds(),
    transcript: Transcript | None = None,
) -> ProtocolReport:
    """The receiver authenticates the sender."""
    tr = transcript if transcript is not None else Transcript()
    leg = f"{sender[0].upper()}->{receiver[0].upper()}"
    n = key.require(1)
    msg, record = p1_encode(key, rng)
    msg.origin, msg.label = sender, f"S({leg})"
    tr.add(f"P1.{leg}.1", sender, "prepare", {"qubits": len(msg)})
    msg = transmit(msg, tap)
    tr.add(f"P1.{leg}.2", receiver, "receive", {"qubits": len(msg)})
    disclosed = (tap.disclose(record) if tap is not None else record)
    tr.add(f"P1.{leg}.3", sender, "disclose-decoys", {"states": list(disclosed)})
    res = p1_decode(msg, key, disclosed, rng, thresholds)
    tr.add(f"P1.{leg}.4", receiver, "check-decoys", {"qber": res.qber})
    tr.add(f"P1.{leg}.5", receiver, "check-auth", {"mismatch": res.auth_mismatch_rate})
    tr.add(f"P1.{leg}.6", receiver, "verdict", res.verdict.encode())
    return ProtocolReport(
        verdict=res.verdict,
        qber=res.qber,
        auth_mismatch_rate=res.auth_mismatch_rate,
        transcript=tr,
        rounds=n,
        decoys_checked=n,
        decoy_mismatches=res.decoy_mismatches,
        auth_checked=n,
        auth_mismatches=res.auth_mismatches,
    )


def p1_mutual(
    key: AuthKey,
    rng: np.random.Generator,
    *,
    tap_ab: ChannelTap | None = None,
    tap_ba: ChannelTap | None = None,
    thresholds: Thresholds = Thresholds(),
) -> tuple[ProtocolReport, ProtocolReport]:
    """Run both directions with the same key.

    Returns ``(report_a, report_b)``: Alice's verdict on Bob (return leg)
    and Bob's verdict on Alice (forward leg).
    """
    tr = Transcript()
    report_b = p1_direction(key, rng, tap=tap_ab, sender="alice", receiver="bob",
                            thresholds=thresholds, transcript=tr)
    report_a = p1_direction(key, rng, tap=tap_ba, sender="bob", receiver="alice",
                            thresholds=thresholds, transcript=tr)
    return report_a, report_b
