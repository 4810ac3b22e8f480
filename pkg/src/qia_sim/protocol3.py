"""Three-party authentication by entanglement swapping through a controller.

Per round the register holds five particles. Alice keeps 1 and sends 2,
Bob keeps 3 and sends 4; both pairs start in the Bell state named by the
round's key pair. Charlie adds particle 5 in |+> or |->, applies CNOT from
5 onto 2 or 4, and forwards 2 to Bob and 4 to Alice. The key owners apply
the matching Pauli to their home particle and Bell-measure (1, 4) and
(2, 3); Charlie measures 5 in Z. A round passes when the XOR of the two
announced codes is 00 for r5 = 0 and 10 for r5 = 1.

Qubit slots inside a round register are named '1'..'5'; an eavesdropper's
ancilla is appended after them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import qcore
from .runtime import (
    AuthKey,
    ChannelTap,
    ProtocolReport,
    Qubit,
    QubitMessage,
    Register,
    Thresholds,
    Transcript,
    bell_measure_pair,
    cnot_pair,
    interleave,
    transmit,
)

CONTROLS = ("+", "-")
TARGETS = ("2", "4")
_ALL_LABELS = ("0", "1", "+", "-")

_E = 1 / (2 * math.sqrt(2))
# coefficient of |B(1,4)> |B(2,3)> |z>_5 for key pair 10, control |->,
# target particle 2, after i*sigma_y on particles 1 and 3
EQ5_COEFFICIENTS: dict[tuple[str, str, str], float] = {
    ("00", "00", "0"): _E,
    ("01", "01", "0"): _E,
    ("10", "10", "0"): -_E,
    ("11", "11", "0"): -_E,
    ("00", "10", "1"): -_E,
    ("01", "11", "1"): _E,
    ("10", "00", "1"): _E,
    ("11", "01", "1"): -_E,
}

# (r14, r23, r5) rows; honest parties with key pair 10
TABLE_HONEST = frozenset({
    ("00", "00", 0), ("01", "01", 0), ("10", "10", 0), ("11", "11", 0),
    ("00", "10", 1), ("01", "11", 1), ("10", "00", 1), ("11", "01", 1),
})
# Eve prepares phi+ and applies I while Bob holds key pair 10
TABLE_EVE_PHI_PLUS = frozenset({
    ("10", "11", 0), ("11", "10", 0), ("00", "01", 0), ("01", "00", 0),
    ("10", "01", 1), ("11", "00", 1), ("00", "11", 1), ("01", "10", 1),
})


def xor_rule(r5: int, xor: str) -> bool:
    return xor == ("00" if r5 == 0 else "10")


@dataclass(frozen=True)
class XorVerdict:
    r5: int | None
    r14: str | None
    r23: str | None
    xor: str | None
    passed: bool
    aborted: bool = False


@dataclass
class P3Taps:
    """One tap per quantum leg."""

    a_to_c: ChannelTap | None = None
    b_to_c: ChannelTap | None = None
    c_to_b: ChannelTap | None = None
    c_to_a: ChannelTap | None = None

    def get(self, leg: str) -> ChannelTap:
        return getattr(self, leg) or ChannelTap()


@dataclass
class _Hop:
    delivered: list[Qubit]
    decoys: int
    mismatches: int


def _hop(items, sender, receiver, label, tap, n_decoys, rng, tr, step) -> _Hop:
    """Interleave fresh BB84 decoys, transmit, then check the disclosed ones."""
    labels = [_ALL_LABELS[int(i)] for i in rng.integers(0, 4, size=n_decoys)]
    total = len(items) + n_decoys
    where = sorted(int(p) for p in rng.choice(total, size=n_decoys, replace=False)) if n_decoys else []
    decoys = [Qubit.fresh(qcore.prepare_basis_state(lab), "d") for lab in labels]
    msg = QubitMessage(interleave(items, decoys, where), sender, label)
    tr.add(step + ".send", sender, "send", {"leg": label, "qubits": len(msg)})
    out = transmit(msg, tap)
    rev_where, rev_labels = tap.disclose((where, labels))
    tr.add(step + ".disclose", sender, "disclose-decoys", {"positions": list(rev_where), "states": list(rev_labels)})
    bad = 0
    for p, lab in zip(rev_where, rev_labels):
        bad += out.positions[p].measure(qcore.basis_of(lab), rng) != lab
    skip = set(rev_where)
    delivered = [q for j, q in enumerate(out.positions) if j not in skip]
    tr.add(step + ".check", receiver, "check-decoys", {"leg": label, "mismatches": bad})
    return _Hop(delivered, n_decoys, bad)


def _aborted_report(tr, n, decoys, bad, qber) -> ProtocolReport:
    tr.add("P3.abort", "all", "abort", {"qber": qber})
    return ProtocolReport("reject", qber, 1.0, tr, n, decoys, bad, 0, 0, aborted=True,
                          details=tuple(XorVerdict(None, None, None, None, False, True) for _ in range(n)))


def _run(
    key: AuthKey,
    rng: np.random.Generator,
    taps: P3Taps,
    controls: Sequence[str] | None,
    targets: Sequence[str] | None,
    decoys_per_hop: int,
    thresholds: Thresholds,
) -> ProtocolReport:
    n = key.require(3)
    tr = Transcript()
    codes = key.codes()
    if controls is None:
        controls = [CONTROLS[int(i)] for i in rng.integers(0, 2, size=n)]
    if targets is None:
        targets = [TARGETS[int(i)] for i in rng.integers(0, 2, size=n)]
    if len(controls) != n or len(targets) != n:
        raise ValueError("need one control and one target per round")
    for c, t in zip(controls, targets):
        if c not in CONTROLS or t not in TARGETS:
            raise ValueError(f"control must be in {CONTROLS} and target in {TARGETS}")

    tap_ac, tap_bc, tap_cb, tap_ca = (taps.get(leg) for leg in ("a_to_c", "b_to_c", "c_to_b", "c_to_a"))
    alice_codes = [tap_ac.forged_bell_code() or c for c in codes]
    bob_codes = [tap_bc.forged_bell_code() or c for c in codes]

    regs = []
    for a, b in zip(alice_codes, bob_codes):
        regs.append(Register(qcore.tensor(qcore.prepare_bell(a), qcore.prepare_bell(b)), ["1", "2", "3", "4"]))
    tr.add("P3.1", "alice", "prepare", {"rounds": n})
    tr.add("P3.1", "bob", "prepare", {"rounds": n})

    decoys = bad = 0
    h2 = _hop([Qubit(r, "2") for r in regs], "alice", "charlie", "S2'(A->C)", tap_ac, decoys_per_hop, rng, tr, "P3.2a")
    h4 = _hop([Qubit(r, "4") for r in regs], "bob", "charlie", "S4'(B->C)", tap_bc, decoys_per_hop, rng, tr, "P3.2b")
    decoys += h2.decoys + h4.decoys
    bad += h2.mismatches + h4.mismatches
    for h in (h2, h4):
        if h.decoys and h.mismatches / h.decoys > thresholds.qber:
            return _aborted_report(tr, n, decoys, bad, bad / decoys)

    for i, reg in enumerate(regs):
        reg.extend(qcore.prepare_basis_state(controls[i]), ["5"])
        target = h2.delivered[i] if targets[i] == "2" else h4.delivered[i]
        cnot_pair(Qubit(reg, "5"), target)
    tr.add("P3.3", "charlie", "control", {"rounds": n})

    h2b = _hop(h2.delivered, "charlie", "bob", "S2''(C->B)", tap_cb, decoys_per_hop, rng, tr, "P3.4a")
    h4b = _hop(h4.delivered, "charlie", "alice", "S4''(C->A)", tap_ca, decoys_per_hop, rng, tr, "P3.4b")
    decoys += h2b.decoys + h4b.decoys
    bad += h2b.mismatches + h4b.mismatches
    for h in (h2b, h4b):
        if h.decoys and h.mismatches / h.decoys > thresholds.qber:
            return _aborted_report(tr, n, decoys, bad, bad / decoys)

    verdicts = []
    for i, reg in enumerate(regs):
        q4, q2 = h4b.delivered[i], h2b.delivered[i]
        r14 = tap_ca.report(q4, rng)
        if r14 is None:
            home = Qubit(reg, "1")
            home.apply(alice_codes[i])
            r14 = bell_measure_pair(home, q4, rng)
        home = Qubit(reg, "3")
        home.apply(bob_codes[i])
        r23 = bell_measure_pair(q2, home, rng)
        r5 = int(Qubit(reg, "5").measure("Z", rng))
        x = qcore.xor_codes(r14, r23)
        verdicts.append(XorVerdict(r5, r14, r23, x, xor_rule(r5, x)))
    tr.add("P3.5", "alice", "announce", [v.r14 for v in verdicts])
    tr.add("P3.5", "bob", "announce", [v.r23 for v in verdicts])
    tr.add("P3.5", "charlie", "measure", [v.r5 for v in verdicts])

    failed = sum(not v.passed for v in verdicts)
    qber = bad / decoys if decoys else 0.0
    rate = failed / n
    verdict = thresholds.verdict(qber, rate)
    tr.add("P3.6", "charlie", "verdict", verdict.encode())
    return ProtocolReport(verdict, qber, rate, tr, n, decoys, bad, n, failed, details=tuple(verdicts))


def p3_protocol(
    key: AuthKey,
    rng: np.random.Generator,
    *,
    taps: P3Taps | None = None,
    decoys_per_hop: int | None = None,
    thresholds: Thresholds = Thresholds(),
    controls: Sequence[str] | None = None,
    targets: Sequence[str] | None = None,
) -> ProtocolReport:
    """Full n-round run. ``decoys_per_hop`` defaults to n."""
    n = key.require(3)
    d = n if decoys_per_hop is None else decoys_per_hop
    if d < 0:
        raise ValueError("decoys_per_hop must be non-negative")
    return _run(key, rng, taps or P3Taps(), controls, targets, d, thresholds)


def p3_round(
    key_bits: str,
    charlie_control: str,
    charlie_target: str,
    rng: np.random.Generator,
    *,
    taps: P3Taps | None = None,
    decoys_per_hop: int = 1,
) -> XorVerdict:
    rep = p3_protocol(AuthKey.from_string(key_bits), rng, taps=taps, decoys_per_hop=decoys_per_hop,
                      controls=[charlie_control], targets=[str(charlie_target)])
    return rep.details[0]


# Exact enumeration -----------------------------------------------------------

def round_state(
    alice_code: str,
    bob_code: str,
    control: str,
    target: str,
    *,
    alice_pauli: str | None = None,
    bob_pauli: str | None = None,
    bell_vectors: Mapping[str, np.ndarray] | None = None,
) -> qcore.PureState:
    """Five-particle state just before the measurements (qubit i-1 holds particle i)."""
    vec = bell_vectors or qcore.BELL_VECTORS
    pair = lambda c: qcore.PureState(np.asarray(vec[c], dtype=complex))  # noqa: E731
    s = qcore.tensor_all([pair(alice_code), pair(bob_code), qcore.prepare_basis_state(control)])
    s = qcore.apply_cnot(s, 4, 1 if str(target) == "2" else 3)
    s = qcore.apply_1q(s, 0, alice_pauli or alice_code)
    return qcore.apply_1q(s, 2, bob_pauli or bob_code)


def outcome_distribution(
    alice_code: str,
    bob_code: str,
    control: str,
    target: str,
    *,
    alice_pauli: str | None = None,
    bob_pauli: str | None = None,
) -> dict[tuple[str, str, int], float]:
    """Exact probabilities of ``(r14, r23, r5)``; zero-probability rows are dropped."""
    s = round_state(alice_code, bob_code, control, target, alice_pauli=alice_pauli, bob_pauli=bob_pauli)
    out = {}
    for r14 in qcore.BELL_CODES:
        p1, s1 = qcore.bell_project(s, 0, 3, r14)
        if not p1:
            continue
        for r23 in qcore.BELL_CODES:
            p2, s2 = qcore.bell_project(s1, 1, 2, r23)
            if not p2:
                continue
            for r5 in (0, 1):
                p3, _ = qcore.project(s2, 4, str(r5))
                if p3 > 1e-12:
                    out[(r14, r23, r5)] = p1 * p2 * p3
    return out


def pass_probability(alice_code: str, bob_code: str, control: str, target: str, **kw) -> float:
    return sum(p for (a, b, r5), p in outcome_distribution(alice_code, bob_code, control, target, **kw).items()
               if xor_rule(r5, qcore.xor_codes(a, b)))


def eq5_expansion(
    key: str = "10",
    control: str = "-",
    target: str = "2",
    *,
    pauli: str | None = None,
    bell_vectors: Mapping[str, np.ndarray] | None = None,
) -> dict[tuple[str, str, str], complex]:
    """Coefficients of the pre-measurement state in the (1,4) x (2,3) x Z_5 basis."""
    vec = bell_vectors or qcore.BELL_VECTORS
    s = round_state(key, key, control, target, alice_pauli=pauli, bob_pauli=pauli, bell_vectors=vec)
    t = s.amps.reshape((2,) * 5).transpose(0, 3, 1, 2, 4).reshape(4, 4, 2)
    bra = np.array([np.asarray(vec[c], dtype=complex).conj() for c in qcore.BELL_CODES])
    coef = np.einsum("ai,bj,ijz->abz", bra, bra, t)
    return {
        (qcore.BELL_CODES[a], qcore.BELL_CODES[b], str(z)): complex(coef[a, b, z])
        for a in range(4) for b in range(4) for z in range(2)
    }


def verify_eq5(
    *,
    pauli: str | None = None,
    control: str = "-",
    bell_vectors: Mapping[str, np.ndarray] | None = None,
    tol: float = 1e-12,
) -> bool:
    """Check the simulated expansion against the tabulated signed coefficients."""
    got = eq5_expansion("10", control, "2", pauli=pauli, bell_vectors=bell_vectors)
    return all(abs(c - EQ5_COEFFICIENTS.get(k, 0.0)) <= tol for k, c in got.items())


def table_rows(alice_code: str, bob_code: str, control: str = "-", target: str = "2", **kw) -> frozenset:
    return frozenset(outcome_distribution(alice_code, bob_code, control, target, **kw))


def key_independence_sweep() -> list[tuple[str, str, str, float]]:
    """Honest pass probability for every key pair and Charlie choice."""
    rows = []
    for code in qcore.BELL_CODES:
        for c in CONTROLS:
            for t in TARGETS:
                rows.append((code, c, t, pass_probability(code, code, c, t)))
    return rows
