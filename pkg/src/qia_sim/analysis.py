"""Closed-form security quantities and exact enumerations.

Two kinds of detection numbers live here. :func:`detection_probability` is the
headline product rule 1 - (1/4)^n. The ``exact_*`` functions enumerate the
simulated strategies with rational Born weights and give what the simulator
should actually observe; the two differ for the single-qubit schemes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np

from . import protocol2, protocol3, qcore

HALF = Fraction(1, 2)
STATES = ("0", "1", "+", "-")
AUTH_STATE = {0: "0", 1: "-"}
QUOTED_MIN_KEY_BITS = {1: 6, 2: 10, 3: 6}


def overlap(a: str, b: str) -> Fraction:
    """|<a|b>|^2 for BB84 labels."""
    if a == b:
        return Fraction(1)
    if qcore.basis_of(a) == qcore.basis_of(b):
        return Fraction(0)
    return HALF


def outcomes(basis: str) -> tuple[str, str]:
    return qcore.BASIS_LABELS[basis]


def detection_probability(protocol: int, n: int) -> float:
    """Product-rule detection probability 1 - (1/4)^n."""
    _check_protocol(protocol)
    if n < 0:
        raise ValueError("n must be non-negative")
    return 1.0 - 0.25**n


def _check_protocol(protocol: int) -> None:
    if protocol not in (1, 2, 3):
        raise ValueError(f"protocol must be 1, 2 or 3, got {protocol!r}")


# Exact per-round survival of the simulated attacks ----------------------------

def p1_impersonation_survival() -> Fraction:
    """Per-block survival of the uniform-guess forger against the strict decoy check."""
    total = Fraction(0)
    weight = Fraction(1, 4 * 2 * 2 * 4)
    for k1, k2 in product((0, 1), repeat=2):
        p = k1 ^ k2
        dbasis = "ZX"[k2]
        for swap, auth, decoy in product((False, True), AUTH_STATE.values(), STATES):
            # Eve's block is (decoy, auth) unless swapped; Bob reads it with his own layout
            eve_block = [auth, decoy] if swap else [decoy, auth]
            bob_decoy, bob_auth = (eve_block[0], eve_block[1]) if p == 0 else (eve_block[1], eve_block[0])
            auth_ok = overlap(bob_auth, AUTH_STATE[p])
            decoy_ok = overlap(bob_decoy, decoy) if qcore.basis_of(decoy) == dbasis else Fraction(0)
            total += weight * auth_ok * decoy_ok
    return total


def p2_impersonation_survival() -> Fraction:
    total = Fraction(0)
    for k1, k2 in product((0, 1), repeat=2):
        target = protocol2.particle_label(k1, k2)
        for g1, g2 in product((0, 1), repeat=2):
            total += Fraction(1, 16) * overlap(protocol2.particle_label(g1, g2), target)
    return total


def _as_fraction(x: float) -> Fraction:
    f = Fraction(x).limit_denominator(1 << 12)
    if abs(float(f) - x) > 1e-9:
        raise ArithmeticError(f"{x!r} is not a small rational")
    return f


def p3_impersonation_survival() -> Fraction:
    acc = 0.0
    for k, g in product(qcore.BELL_CODES, repeat=2):
        for c, t in product(protocol3.CONTROLS, protocol3.TARGETS):
            acc += protocol3.pass_probability(g, k, c, t) / 64
    return _as_fraction(acc)


def impersonation_survival(protocol: int) -> Fraction:
    """Exact per-round pass probability of the simulated impersonator."""
    _check_protocol(protocol)
    return {1: p1_impersonation_survival, 2: p2_impersonation_survival, 3: p3_impersonation_survival}[protocol]()


def resend_pass(state: str, target: str) -> Fraction:
    """Pass probability when Eve measures ``state`` in a random basis and Bob expects ``target``."""
    total = Fraction(0)
    for basis in "ZX":
        for o in outcomes(basis):
            total += HALF * overlap(state, o) * overlap(o, target)
    return total


def measure_resend_survival(protocol: int) -> Fraction:
    """Per-round pass probability with every forward-leg qubit measured and resent.

    For the three-party scheme this is the swapping check alone; decoys on
    the attacked hop add a factor 3/4 each.
    """
    _check_protocol(protocol)
    if protocol == 1:
        auth = sum((HALF * resend_pass(AUTH_STATE[p], AUTH_STATE[p]) for p in (0, 1)), Fraction(0))
        decoy = sum((Fraction(1, 4) * resend_pass(s, s) for s in STATES), Fraction(0))
        return auth * decoy
    if protocol == 2:
        return sum((Fraction(1, 4) * resend_pass(s, s) for s in STATES), Fraction(0))
    return _as_fraction(p3_measure_resend_pass())


def p3_measure_resend_pass() -> float:
    """Swapping-check pass rate after particle 2 is measured in Z or X on the way to Charlie."""
    acc = 0.0
    for k in qcore.BELL_CODES:
        base = qcore.tensor(qcore.prepare_bell(k), qcore.prepare_bell(k))
        for basis in "ZX":
            for o in outcomes(basis):
                p, post = qcore.project(base, 1, o)
                if not p:
                    continue
                for c, t in product(protocol3.CONTROLS, protocol3.TARGETS):
                    acc += 0.5 * p * _p3_pass_from(post, k, c, t) / 16
    return acc


def _p3_pass_from(state4: qcore.PureState, key: str, control: str, target: str) -> float:
    s = qcore.tensor(state4, qcore.prepare_basis_state(control))
    s = qcore.apply_cnot(s, 4, 1 if target == "2" else 3)
    s = qcore.apply_1q(qcore.apply_1q(s, 0, key), 2, key)
    return _pass_mass(s, (0, 3), (1, 2), 4)


def _pass_mass(s: qcore.PureState, pa, pb, z) -> float:
    total = 0.0
    for r14 in qcore.BELL_CODES:
        p1, s1 = qcore.bell_project(s, *pa, r14)
        if not p1:
            continue
        for r23 in qcore.BELL_CODES:
            p2, s2 = qcore.bell_project(s1, *pb, r23)
            if not p2:
                continue
            x = qcore.xor_codes(r14, r23)
            for r5 in (0, 1):
                if protocol3.xor_rule(r5, x):
                    total += p1 * p2 * qcore.project(s2, z, str(r5))[0]
    return total


def forge_survival(protocol: int, policy: str = "uniform") -> Fraction:
    """Per-round pass probability when every in-flight qubit is replaced by ``policy``."""
    if protocol not in (1, 2):
        raise ValueError("forging is modelled for the single-qubit schemes")
    sent = STATES if policy == "uniform" else (policy,)
    w = Fraction(1, len(sent))
    if protocol == 2:
        return sum((w * Fraction(1, 4) * overlap(f, s) for f in sent for s in STATES), Fraction(0))
    auth = sum((w * HALF * overlap(f, AUTH_STATE[p]) for f in sent for p in (0, 1)), Fraction(0))
    decoy = sum((w * Fraction(1, 4) * overlap(f, d) for f in sent for d in STATES), Fraction(0))
    return auth * decoy


def forge_auth_pass(policy: str) -> Fraction:
    """Per authentication qubit pass rate under ``policy`` averaged over the key parity."""
    sent = STATES if policy == "uniform" else (policy,)
    return sum((Fraction(1, len(sent)) * HALF * overlap(f, AUTH_STATE[p]) for f in sent for p in (0, 1)),
               Fraction(0))


# Ancilla forging ----------------------------------------------------------------

def _branch0(coefficients) -> tuple:
    br = getattr(coefficients, "branch0", coefficients)
    br = tuple(complex(x) for x in br)[:4]
    norm = sum(abs(x) ** 2 for x in br)
    if len(br) != 4 or abs(norm - 1) > 1e-9:
        raise ValueError("branch-0 coefficients must be four numbers with unit norm")
    return br


def eve_success_p3(coefficients) -> float:
    """Headline success formula 1/4 (|b0|^2 + |c0|^2) + 1/8."""
    a, b, c, d = _branch0(coefficients)
    return 0.25 * (abs(b) ** 2 + abs(c) ** 2) + 0.125


def eve_failure_p3(coefficients) -> float:
    """Headline failure formula 1/4 (|a0|^2 + |d0|^2 + 1) + 3/8."""
    a, b, c, d = _branch0(coefficients)
    return 0.25 * (abs(a) ** 2 + abs(d) ** 2 + 1) + 0.375


def ancilla_forge_success(coefficients) -> float:
    """Coherent pass probability for key pair 10: 1/4 (|b0 - c0|^2 + |b1 - c1|^2)."""
    a0, b0, c0, d0 = coefficients.branch0
    a1, b1, c1, d1 = coefficients.branch1
    return 0.25 * (abs(b0 - c0) ** 2 + abs(b1 - c1) ** 2)


def ancilla_forge_exact(coefficients, key: str = "10") -> float:
    """Dense enumeration of the ancilla forge, averaged over Charlie's choices.

    Qubits: 0..3 are particles 1..4, 4 is Eve's ancilla, 5 is particle 5.
    Eve Bell-measures (e, 4); Bob applies his Pauli and measures (2, 3).
    """
    v = coefficients.matrix()
    acc = 0.0
    for c, t in product(protocol3.CONTROLS, protocol3.TARGETS):
        s = qcore.tensor(qcore.prepare_bell(key), qcore.prepare_bell(key))
        s = qcore.apply_isometry(s, 1, v)
        s = qcore.tensor(s, qcore.prepare_basis_state(c))
        s = qcore.apply_cnot(s, 5, 1 if t == "2" else 3)
        s = qcore.apply_1q(s, 2, key)
        acc += _pass_mass(s, (4, 3), (1, 2), 5) / 4
    return acc


# Joint distributions and information --------------------------------------------

@dataclass(frozen=True)
class JointDistribution:
    labels_a: tuple[str, ...]
    labels_b: tuple[str, ...]
    probs: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if len(self.probs) != len(self.labels_a) or any(len(r) != len(self.labels_b) for r in self.probs):
            raise ValueError("probability matrix does not match the labels")
        if any(p < 0 for r in self.probs for p in r):
            raise ValueError("probabilities must be non-negative")
        if abs(float(sum(sum(r) for r in self.probs)) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    def p(self, a: str, b: str) -> Fraction:
        return self.probs[self.labels_a.index(a)][self.labels_b.index(b)]

    def marginal_a(self) -> tuple:
        return tuple(sum(r) for r in self.probs)

    def marginal_b(self) -> tuple:
        return tuple(sum(col) for col in zip(*self.probs))


def _joint(labels_a, labels_b, weight) -> JointDistribution:
    return JointDistribution(tuple(labels_a), tuple(labels_b),
                             tuple(tuple(weight(a, b) for b in labels_b) for a in labels_a))


def joint_measure_resend(protocol: int, party: str) -> JointDistribution:
    """Exact joint distribution of Alice's state and Bob's (or Eve's) outcome.

    Outcomes are labelled by the resulting basis state, so Bob's Z result 0 and
    X result + are different labels.
    """
    if protocol not in (1, 2):
        raise ValueError("joint distributions are defined for the single-qubit schemes")
    party = party.lower()
    if party not in ("bob", "eve"):
        raise ValueError("party must be 'bob' or 'eve'")
    if protocol == 1:
        prior = {AUTH_STATE[0]: HALF, AUTH_STATE[1]: HALF}
        bob_basis = {s: qcore.basis_of(s) for s in prior}
    else:
        prior = {s: Fraction(1, 4) for s in STATES}
        bob_basis = {s: qcore.basis_of(s) for s in STATES}

    def weight(a, b):
        total = Fraction(0)
        for eb in "ZX":
            for eo in outcomes(eb):
                w = prior[a] * HALF * overlap(a, eo)
                if party == "eve":
                    total += w * (eo == b)
                elif qcore.basis_of(b) == bob_basis[a]:
                    total += w * overlap(eo, b)
        return total

    return _joint(prior, STATES, weight)


def shannon(probs: Sequence) -> float:
    return -sum(float(p) * math.log2(float(p)) for p in probs if p > 0)


@dataclass(frozen=True)
class InfoReport:
    h_a: float
    h_b: float
    h_b_given_a: float
    mutual_ab: float
    holevo_bound: float | None


def info_report(dist: JointDistribution, holevo_ensemble=None) -> InfoReport:
    h_a = shannon(dist.marginal_a())
    h_b = shannon(dist.marginal_b())
    h_ab = shannon([p for r in dist.probs for p in r])
    h_b_given_a = h_ab - h_a
    chi = qcore.holevo(holevo_ensemble) if holevo_ensemble is not None else None
    return InfoReport(h_a, h_b, h_b_given_a, h_b - h_b_given_a, chi)


def source_ensemble(protocol: int) -> list[tuple[float, qcore.PureState]]:
    """The states Alice puts on the channel, with their prior weights."""
    if protocol == 1:
        return [(0.5, qcore.prepare_basis_state(AUTH_STATE[p])) for p in (0, 1)]
    if protocol == 2:
        return [(0.25, qcore.prepare_basis_state(s)) for s in STATES]
    raise ValueError("use holevo_p3_travel for the three-party scheme")


def holevo_p3_travel(particle: int = 2, keys: Sequence[str] = qcore.BELL_CODES) -> float:
    """Holevo quantity of the travelling particle (2 or 4) over uniformly drawn key pairs."""
    if particle not in (2, 4):
        raise ValueError("the travelling particles are 2 and 4")
    # particle 2 (or 4) is the second qubit of its own pair
    ens = [(1 / len(keys), qcore.partial_trace(qcore.prepare_bell(k), [1])) for k in keys]
    return qcore.holevo(ens)


def p3_particle_state(particle: int, key: str) -> qcore.DensityMatrix:
    pair = qcore.tensor(qcore.prepare_bell(key), qcore.prepare_bell(key))
    return qcore.partial_trace(pair, [particle - 1])


@lru_cache(maxsize=None)
def info_values() -> dict[tuple[int, str], float]:
    """Every closed-form information quantity, keyed by (protocol, name)."""
    out = {}
    for proto in (1, 2):
        bob = info_report(joint_measure_resend(proto, "bob"))
        eve = info_report(joint_measure_resend(proto, "eve"), source_ensemble(proto))
        out[(proto, "H(B|A)")] = bob.h_b_given_a
        out[(proto, "H(B)")] = bob.h_b
        out[(proto, "I(A:B)")] = bob.mutual_ab
        out[(proto, "H(E|A)")] = eve.h_b_given_a
        out[(proto, "H(E)")] = eve.h_b
        out[(proto, "I(A:E)")] = eve.mutual_ab
        out[(proto, "Holevo")] = eve.holevo_bound
    out[(3, "chi(rho2)")] = holevo_p3_travel(2)
    out[(3, "chi(rho4)")] = holevo_p3_travel(4)
    return out


# Detection and key sizing ---------------------------------------------------------

def survival(protocol: int, attack: str, *, policy: str = "uniform", coefficients=None) -> Fraction | float:
    """Per-round pass probability of ``attack`` as simulated."""
    if attack == "none":
        return Fraction(1)
    if attack == "impersonation":
        return impersonation_survival(protocol)
    if attack == "measure-resend":
        return measure_resend_survival(protocol)
    if attack == "forge":
        return forge_survival(protocol, policy)
    if attack == "ancilla-forge":
        if protocol != 3:
            raise ValueError("ancilla forging applies to the three-party scheme")
        return ancilla_forge_exact(coefficients)
    raise ValueError(f"unknown attack {attack!r}")


def exact_detection_probability(
    protocol: int, attack: str, n: int, *, decoys_per_hop: int | None = None, **kw
) -> float:
    """Probability that the simulated run rejects, attack on the forward leg only."""
    if n < 0:
        raise ValueError("n must be non-negative")
    s = survival(protocol, attack, **kw)
    extra = 1.0
    if protocol == 3 and attack == "measure-resend":
        d = n if decoys_per_hop is None else decoys_per_hop
        extra = 0.75**d
    return 1.0 - float(s) ** n * extra


def rounds_for_bits(protocol: int, bits: int) -> int:
    return bits // 4 if protocol == 2 else bits // 2


def min_key_bits(protocol: int, detect_threshold: float = 0.98) -> int:
    """Smallest key length whose rounds reach ``detect_threshold`` under 1 - (1/4)^n."""
    _check_protocol(protocol)
    if not 0.0 < detect_threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    unit = 4 if protocol == 2 else 2
    bits = unit
    while detection_probability(protocol, rounds_for_bits(protocol, bits)) < detect_threshold:
        bits += unit
    return bits


@dataclass(frozen=True)
class KeySizeRow:
    protocol: int
    threshold: float
    bits: int
    rounds: int
    quoted: int
    reproducible: bool
    note: str


def min_key_bits_report(detect_threshold: float = 0.98) -> list[KeySizeRow]:
    rows = []
    for proto in (1, 2, 3):
        bits = min_key_bits(proto, detect_threshold)
        quoted = QUOTED_MIN_KEY_BITS[proto]
        ok = bits == quoted
        note = "" if ok else (
            f"quoted {quoted} bits is not reachable: keys come in multiples of "
            f"{4 if proto == 2 else 2} bits and {quoted} bits give n={rounds_for_bits(proto, quoted)}"
        )
        rows.append(KeySizeRow(proto, detect_threshold, bits, rounds_for_bits(proto, bits), quoted, ok, note))
    return rows


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one trial")
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def grid_branch0(step: float = 0.05) -> list[tuple[float, float, float, float]]:
    """Non-negative real branch-0 points on the unit sphere from a simplex grid of |.|^2."""
    m = round(1 / step)
    pts = []
    for i in range(m + 1):
        for j in range(m + 1 - i):
            for k in range(m + 1 - i - j):
                w = (i * step, j * step, k * step, max(0.0, 1 - (i + j + k) * step))
                pts.append(tuple(math.sqrt(x) for x in w))
    return pts


def as_array(dist: JointDistribution) -> np.ndarray:
    return np.array([[float(p) for p in r] for r in dist.probs])
