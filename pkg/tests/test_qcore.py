import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qia_sim import qcore
from qia_sim.qcore import PureState

S = 1 / math.sqrt(2)
CASES = settings(max_examples=1000, deadline=None)


def random_state(seed: int, n: int) -> PureState:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return PureState(z / np.linalg.norm(z))


def random_unitary(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


def dense_1q(n: int, qubit: int, m: np.ndarray) -> np.ndarray:
    ops = [np.eye(2)] * n
    ops[qubit] = m
    out = np.array([[1.0]])
    for o in ops:
        out = np.kron(out, o)
    return out


def dense_cnot(n: int, c: int, t: int) -> np.ndarray:
    dim = 1 << n
    u = np.zeros((dim, dim))
    for i in range(dim):
        bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[c]:
            bits[t] ^= 1
        j = int("".join(map(str, bits)), 2)
        u[j, i] = 1
    return u


# preparation ---------------------------------------------------------------

@pytest.mark.parametrize("label, amps", [
    ("0", [1, 0]),
    ("1", [0, 1]),
    ("+", [S, S]),
    ("-", [S, -S]),
])
def test_basis_states(label, amps):
    assert np.allclose(qcore.prepare_basis_state(label).amps, amps)


def test_plus_measured_in_x_is_deterministic():
    rng = np.random.default_rng(0)
    for _ in range(200):
        out, _ = qcore.measure(qcore.prepare_basis_state("+"), 0, "X", rng)
        assert out == "+"


@pytest.mark.parametrize("code, amps", [
    ("00", [S, 0, 0, S]),
    ("01", [S, 0, 0, -S]),
    ("10", [0, S, S, 0]),
    ("11", [0, S, -S, 0]),
])
def test_bell_table(code, amps):
    assert np.allclose(qcore.prepare_bell(code).amps, amps)


def test_pauli_matrices_are_the_listed_ones():
    assert np.array_equal(qcore.PAULI["00"], np.eye(2))
    assert np.array_equal(qcore.PAULI["01"], [[0, 1], [1, 0]])
    assert np.array_equal(qcore.PAULI["10"], [[0, 1], [-1, 0]])
    assert np.array_equal(qcore.PAULI["11"], [[1, 0], [0, -1]])
    assert np.isrealobj(qcore.PAULI["10"]) or np.all(qcore.PAULI["10"].imag == 0)


@pytest.mark.parametrize("bad", ["2", "", "00", "x"])
def test_bad_labels(bad):
    with pytest.raises(ValueError):
        qcore.prepare_basis_state(bad)


@pytest.mark.parametrize("bad", ["2", "0", "100", "ab"])
def test_bad_codes(bad):
    with pytest.raises(ValueError):
        qcore.prepare_bell(bad)


def test_state_validation():
    with pytest.raises(ValueError):
        PureState([1, 1])
    with pytest.raises(ValueError):
        PureState([1, 0, 0])
    with pytest.raises(ValueError):
        PureState([np.nan, 0])
    with pytest.raises(qcore.RegisterOverflowError):
        PureState(np.eye(1, 128).ravel())
    s = PureState([1, 0])
    with pytest.raises(ValueError):
        s.amps[0] = 0


def test_tensor_examples():
    s = qcore.tensor(qcore.prepare_basis_state("0"), qcore.prepare_basis_state("1"))
    assert np.allclose(s.amps, [0, 1, 0, 0])
    s = qcore.tensor(qcore.prepare_bell("00"), qcore.prepare_basis_state("-"))
    assert np.allclose(s.amps, np.array([1, -1, 0, 0, 0, 0, 1, -1]) / 2)


def test_tensor_overflow():
    big = qcore.tensor_all([qcore.prepare_bell("00")] * 3)
    with pytest.raises(qcore.RegisterOverflowError):
        qcore.tensor(big, qcore.prepare_basis_state("0"))


def test_pre_cnot_five_particle_state():
    # (|01>+|10>)(|01>+|10>)(|0>-|1>) / (2 sqrt 2), expanded by hand
    s = qcore.tensor_all([qcore.prepare_bell("10"), qcore.prepare_bell("10"), qcore.prepare_basis_state("-")])
    expect = np.zeros(32)
    for a in ("01", "10"):
        for b in ("01", "10"):
            expect[int(a + b + "0", 2)] += 1
            expect[int(a + b + "1", 2)] -= 1
    assert np.allclose(s.amps, expect / (2 * math.sqrt(2)))


# gates -----------------------------------------------------------------------

def test_isy_on_zero():
    assert np.allclose(qcore.apply_1q(qcore.prepare_basis_state("0"), 0, "10").amps, [0, -1])


def test_isy_on_psi_plus_gives_phi_minus():
    oracle = np.kron(qcore.PAULI["10"], np.eye(2)) @ qcore.BELL_VECTORS["10"]
    got = qcore.apply_1q(qcore.prepare_bell("10"), 0, "10")
    assert np.allclose(got.amps, oracle)
    assert qcore.equal_up_to_phase(got, qcore.prepare_bell("01"))


def test_identity_is_noop():
    s = random_state(3, 4)
    assert np.allclose(qcore.apply_1q(s, 2, "00").amps, s.amps)


def test_cnot_examples():
    s = qcore.tensor(qcore.prepare_basis_state("1"), qcore.prepare_basis_state("0"))
    assert np.allclose(qcore.apply_cnot(s, 0, 1).amps, [0, 0, 0, 1])
    s = qcore.tensor_all([qcore.prepare_basis_state("0"), qcore.prepare_bell("10")])
    for t in (1, 2):
        assert np.allclose(qcore.apply_cnot(s, 0, t).amps, s.amps)


# one-Pauli orbit of phi+: p on qubit 0 gives the Bell state with this code
ORBIT = {"00": "00", "01": "10", "10": "11", "11": "01"}


@pytest.mark.parametrize("pauli", qcore.BELL_CODES)
def test_pauli_bell_orbit(pauli):
    dense = np.kron(qcore.PAULI[pauli], np.eye(2)) @ qcore.BELL_VECTORS["00"]
    got = qcore.apply_1q(qcore.prepare_bell("00"), 0, pauli)
    assert np.allclose(got.amps, dense)
    for code in qcore.BELL_CODES:
        same = qcore.equal_up_to_phase(got, qcore.prepare_bell(code))
        assert same == (code == ORBIT[pauli])


@pytest.mark.parametrize("n, q1, q2", [(2, 0, 1), (3, 2, 0), (5, 1, 4), (6, 5, 3)])
def test_cnot_matches_dense(n, q1, q2):
    s = random_state(n * 7 + q1, n)
    assert np.allclose(qcore.apply_cnot(s, q1, q2).amps, dense_cnot(n, q1, q2) @ s.amps)


def test_index_errors():
    s = random_state(1, 3)
    with pytest.raises(IndexError):
        qcore.apply_1q(s, 3, "01")
    with pytest.raises(ValueError):
        qcore.apply_cnot(s, 1, 1)
    with pytest.raises(ValueError):
        qcore.apply_1q(s, 0, np.ones((2, 2)))


def test_isometry_appends_ancilla():
    v = np.zeros((4, 2))
    v[0, 0] = v[3, 1] = 1  # copy Z value into the ancilla
    s = qcore.apply_isometry(qcore.prepare_basis_state("+"), 0, v)
    assert np.allclose(s.amps, qcore.BELL_VECTORS["00"])
    with pytest.raises(ValueError):
        qcore.apply_isometry(qcore.prepare_basis_state("0"), 0, np.zeros((4, 2)))


# measurement -------------------------------------------------------------------

def test_measure_zero_in_z():
    rng = np.random.default_rng(1)
    out, post = qcore.measure(qcore.prepare_basis_state("0"), 0, "Z", rng)
    assert out == "0" and np.allclose(post.amps, [1, 0])


def test_measure_zero_in_x_frequency():
    rng = np.random.default_rng(2024)
    ones = sum(qcore.measure(qcore.prepare_basis_state("0"), 0, "X", rng)[0] == "+" for _ in range(10_000))
    assert abs(ones / 10_000 - 0.5) <= 0.02


def test_collapse_of_phi_plus():
    rng = np.random.default_rng(5)
    seen = set()
    for _ in range(50):
        out, post = qcore.measure(qcore.prepare_bell("00"), 0, "Z", rng)
        seen.add(out)
        expect = [0, 0, 0, 1] if out == "1" else [1, 0, 0, 0]
        assert np.allclose(post.amps, expect)
    assert seen == {"0", "1"}


def test_invalid_basis():
    with pytest.raises(ValueError):
        qcore.measure(qcore.prepare_basis_state("0"), 0, "Y", np.random.default_rng(0))
    with pytest.raises(ValueError):
        qcore.outcome_probabilities(qcore.prepare_bell("00"), 0, "B")


def test_bell_measure_phi_plus():
    rng = np.random.default_rng(0)
    assert all(qcore.bell_measure(qcore.prepare_bell("00"), 0, 1, rng)[0] == "00" for _ in range(100))


def test_swapped_pairs_agree_on_phi_plus_product():
    # projector oracle: |B_a>_{14} |B_b>_{23} components of phi+ (x) phi+
    s = qcore.tensor(qcore.prepare_bell("00"), qcore.prepare_bell("00"))
    t = s.amps.reshape(2, 2, 2, 2).transpose(0, 3, 1, 2).reshape(4, 4)
    for a in qcore.BELL_CODES:
        for b in qcore.BELL_CODES:
            amp = qcore.BELL_VECTORS[a].conj() @ t @ qcore.BELL_VECTORS[b].conj()
            assert (abs(amp) > 1e-12) == (a == b)
    rng = np.random.default_rng(9)
    for _ in range(200):
        a, post = qcore.bell_measure(s, 0, 3, rng)
        b, _ = qcore.bell_measure(post, 1, 2, rng)
        assert a == b


def test_zero_on_charlie_gives_xor_00():
    from qia_sim.protocol3 import round_state

    s = round_state("10", "10", "-", "2")
    p, s0 = qcore.project(s, 4, "0")
    assert p == pytest.approx(0.5)
    rng = np.random.default_rng(11)
    for _ in range(200):
        a, post = qcore.bell_measure(s0, 0, 3, rng)
        b, _ = qcore.bell_measure(post, 1, 2, rng)
        assert qcore.xor_codes(a, b) == "00"


@pytest.mark.parametrize("code", qcore.BELL_CODES)
def test_bell_round_trip(code):
    rng = np.random.default_rng(int(code, 2))
    probs = qcore.bell_probabilities(qcore.prepare_bell(code), 0, 1)
    assert probs[code] == pytest.approx(1.0)
    assert all(qcore.bell_measure(qcore.prepare_bell(code), 0, 1, rng)[0] == code for _ in range(50))


def test_project_matches_probabilities():
    s = random_state(4, 3)
    pz = qcore.outcome_probabilities(s, 1, "X")
    for lab in ("+", "-"):
        p, post = qcore.project(s, 1, lab)
        assert p == pytest.approx(pz[lab])
        assert qcore.outcome_probabilities(post, 1, "X")[lab] == pytest.approx(1.0)


# partial trace, entropy, holevo ------------------------------------------------------

def test_partial_trace_examples():
    rho = qcore.partial_trace(qcore.prepare_bell("00"), [0])
    assert np.allclose(rho.matrix, np.eye(2) / 2)
    s = random_state(8, 2)
    assert np.allclose(qcore.partial_trace(s, [0, 1]).matrix, np.outer(s.amps, s.amps.conj()))
    with pytest.raises(ValueError):
        qcore.partial_trace(s, [])
    with pytest.raises(IndexError):
        qcore.partial_trace(s, [2])


def test_traveling_particle_is_maximally_mixed():
    from qia_sim.protocol3 import round_state

    rho = qcore.partial_trace(round_state("10", "10", "-", "2"), [1])
    assert np.allclose(rho.matrix, np.eye(2) / 2, atol=1e-12)


def test_entropy_examples():
    assert qcore.von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1.0)
    assert qcore.von_neumann_entropy(qcore.DensityMatrix.from_state(random_state(2, 3))) == pytest.approx(0, abs=1e-9)
    mix = qcore.DensityMatrix.mixture([(0.5, qcore.prepare_basis_state("0")), (0.5, qcore.prepare_basis_state("-"))])
    assert qcore.von_neumann_entropy(mix) == pytest.approx(0.600876, abs=1e-5)


def test_holevo_examples():
    b = qcore.prepare_basis_state
    assert qcore.holevo([(0.5, b("0")), (0.5, b("-"))]) == pytest.approx(0.600876, abs=1e-5)
    assert qcore.holevo([(0.25, b(s)) for s in "01+-"]) == pytest.approx(1.0, abs=1e-9)
    assert qcore.holevo([(1.0, b("+"))]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        qcore.holevo([(0.7, b("0")), (0.7, b("1"))])


def test_density_validation():
    with pytest.raises(ValueError):
        qcore.DensityMatrix(np.array([[1, 0], [0, 1]]))
    with pytest.raises(ValueError):
        qcore.DensityMatrix(np.array([[1.5, 0], [0, -0.5]]))
    with pytest.raises(ValueError):
        qcore.DensityMatrix(np.array([[0.5, 1], [0, 0.5]]))


# properties -----------------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@CASES
@given(seed=seeds, n=st.integers(1, 6), data=st.data())
def test_gates_preserve_norm(seed, n, data):
    s = random_state(seed, n)
    q = data.draw(st.integers(0, n - 1))
    op = data.draw(st.sampled_from(list(qcore.BELL_CODES) + ["H", "U"]))
    u = random_unitary(seed) if op == "U" else op
    out = qcore.apply_1q(s, q, u)
    assert out.norm() == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(out.amps, dense_1q(n, q, qcore._operator(u)) @ s.amps)
    if n >= 2:
        c, t = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
        assert qcore.apply_cnot(s, c, t).norm() == pytest.approx(1.0, abs=1e-9)


@CASES
@given(seed=seeds, n=st.integers(1, 6), data=st.data())
def test_measurement_completeness(seed, n, data):
    s = random_state(seed, n)
    q = data.draw(st.integers(0, n - 1))
    for basis in ("Z", "X"):
        assert sum(qcore.outcome_probabilities(s, q, basis).values()) == pytest.approx(1.0, abs=1e-9)
    if n >= 2:
        a, b = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
        assert sum(qcore.bell_probabilities(s, a, b).values()) == pytest.approx(1.0, abs=1e-9)
        code, post = qcore.bell_measure(s, a, b, np.random.default_rng(seed))
        assert post.norm() == pytest.approx(1.0, abs=1e-9)


@CASES
@given(seed=seeds, data=st.data())
def test_bell_round_trip_embedded(seed, data):
    # a Bell pair tensored with junk on either side still reads back its code
    code = data.draw(st.sampled_from(qcore.BELL_CODES))
    left = data.draw(st.integers(0, 2))
    right = data.draw(st.integers(0, 2))
    parts = ([random_state(seed, left)] if left else []) + [qcore.prepare_bell(code)]
    parts += [random_state(seed + 1, right)] if right else []
    s = qcore.tensor_all(parts)
    assert qcore.bell_measure(s, left, left + 1, np.random.default_rng(seed))[0] == code


@CASES
@given(seed=seeds, na=st.integers(1, 3), nb=st.integers(1, 3))
def test_partial_trace_of_product(seed, na, nb):
    a, b = random_state(seed, na), random_state(seed ^ 0xABCDEF, nb)
    rho = qcore.partial_trace(qcore.tensor(a, b), range(na))
    assert np.allclose(rho.matrix, np.outer(a.amps, a.amps.conj()), atol=1e-9)
    rho_b = qcore.partial_trace(qcore.tensor(a, b), range(na, na + nb))
    assert np.allclose(rho_b.matrix, np.outer(b.amps, b.amps.conj()), atol=1e-9)


@CASES
@given(seed=seeds, n=st.integers(1, 4), rank=st.integers(1, 4))
def test_entropy_bounds(seed, n, rank):
    rng = np.random.default_rng(seed)
    dim = 1 << n
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    rho = qcore.DensityMatrix(m / np.trace(m).real)
    s = qcore.von_neumann_entropy(rho)
    assert -1e-12 <= s <= n + 1e-12
    assert s <= math.log2(rank) + 1e-9
