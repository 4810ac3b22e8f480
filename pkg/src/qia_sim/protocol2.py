"""Mutual authentication with single qubits and no decoys.

Key pair i picks the basis from its parity (0 -> Z, 1 -> X) and the element
from k_{2i}. The first half of the key is spent on Alice -> Bob and the
second half on Bob -> Alice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcore
from .runtime import AuthKey, ChannelTap, ProtocolReport, Qubit, QubitMessage, Thresholds, Transcript, transmit

BASIS = {0: "Z", 1: "X"}
BIT_OF = {"0": 0, "1": 1, "+": 0, "-": 1}


def particle_label(k1: int, k2: int) -> str:
    return qcore.BASIS_LABELS[BASIS[k1 ^ k2]][k2]


def p2_encode(half: AuthKey) -> QubitMessage:
    return QubitMessage([Qubit.fresh(qcore.prepare_basis_state(particle_label(a, b))) for a, b in half.pairs()])


@dataclass(frozen=True)
class P2Decode:
    mismatch_rate: float
    verdict: str
    mismatches: int
    recovered: tuple[int, ...]


def p2_decode(
    msg: QubitMessage, half: AuthKey, rng: np.random.Generator, thresholds: Thresholds = Thresholds()
) -> P2Decode:
    pairs = half.pairs()
    if len(msg) != len(pairs):
        raise ValueError(f"expected {len(pairs)} qubits, got {len(msg)}")
    bits, bad = [], 0
    for (a, b), q in zip(pairs, msg.positions):
        bit = BIT_OF[q.measure(BASIS[a ^ b], rng)]
        bits.append(bit)
        bad += bit != b
    rate = bad / len(pairs) if pairs else 0.0
    return P2Decode(rate, thresholds.verdict(0.0, rate), bad, tuple(bits))


def p2_direction(
    half: AuthKey,
    rng: np.random.Generator,
    *,
    tap: ChannelTap | None = None,
    sender: str = "alice",
    receiver: str = "bob",
    thresholds: Thresholds = Thresholds(),
    transcript: Transcript | None = None,
) -> ProtocolReport:
    tr = transcript if transcript is not None else Transcript()
    leg = f"{sender[0].upper()}->{receiver[0].upper()}"
    msg = p2_encode(half)
    msg.origin, msg.label = sender, f"S({leg})"
    tr.add(f"P2.{leg}.1", sender, "prepare", {"qubits": len(msg)})
    msg = transmit(msg, tap)
    tr.add(f"P2.{leg}.2", receiver, "receive", {"qubits": len(msg)})
    res = p2_decode(msg, half, rng, thresholds)
    tr.add(f"P2.{leg}.3", receiver, "compare", {"mismatch": res.mismatch_rate})
    tr.add(f"P2.{leg}.4", receiver, "verdict", res.verdict.encode())
    return ProtocolReport(
        verdict=res.verdict,
        qber=0.0,
        auth_mismatch_rate=res.mismatch_rate,
        transcript=tr,
        rounds=len(msg),
        auth_checked=len(msg),
        auth_mismatches=res.mismatches,
        details=res.recovered,
    )


def p2_mutual(
    key: AuthKey,
    rng: np.random.Generator,
    *,
    tap_ab: ChannelTap | None = None,
    tap_ba: ChannelTap | None = None,
    thresholds: Thresholds = Thresholds(),
) -> tuple[ProtocolReport, ProtocolReport]:
    """Returns ``(report_a, report_b)`` as in the single-qubit decoy scheme."""
    key.require(2)
    first, second = key.halves()
    tr = Transcript()
    report_b = p2_direction(first, rng, tap=tap_ab, sender="alice", receiver="bob",
                            thresholds=thresholds, transcript=tr)
    report_a = p2_direction(second, rng, tap=tap_ba, sender="bob", receiver="alice",
                            thresholds=thresholds, transcript=tr)
    return report_a, report_b
