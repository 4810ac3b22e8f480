"""Dense state-vector kernel for registers of at most six qubits.

Amplitudes are indexed big-endian: qubit 0 is the most significant bit, so
the ket ``|10001>`` has qubit 0 in ``|1>`` and qubit 4 in ``|1>``.

Bell codes and Pauli codes are two-character strings::

    "00" -> phi+ / I      "01" -> phi- / sigma_x
    "10" -> psi+ / i*sigma_y (real: |0><1| - |1><0|)
    "11" -> psi- / sigma_z
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 6
NORM_TOL = 1e-9

_S = 1 / math.sqrt(2)

BASIS_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([_S, _S], dtype=complex),
    "-": np.array([_S, -_S], dtype=complex),
}
BASIS_LABELS = {"Z": ("0", "1"), "X": ("+", "-")}

BELL_CODES = ("00", "01", "10", "11")
BELL_NAMES = {"00": "phi+", "01": "phi-", "10": "psi+", "11": "psi-"}
BELL_VECTORS = {
    "00": np.array([_S, 0, 0, _S], dtype=complex),
    "01": np.array([_S, 0, 0, -_S], dtype=complex),
    "10": np.array([0, _S, _S, 0], dtype=complex),
    "11": np.array([0, _S, -_S, 0], dtype=complex),
}
# rows are <bell| so that BELL_BRA @ pair_amplitudes gives the four overlaps
BELL_BRA = np.array([BELL_VECTORS[c].conj() for c in BELL_CODES])

PAULI = {
    "00": np.array([[1, 0], [0, 1]], dtype=complex),
    "01": np.array([[0, 1], [1, 0]], dtype=complex),
    "10": np.array([[0, 1], [-1, 0]], dtype=complex),
    "11": np.array([[1, 0], [0, -1]], dtype=complex),
}
HADAMARD = np.array([[_S, _S], [_S, -_S]], dtype=complex)


class RegisterOverflowError(ValueError):
    """Raised when an operation would exceed ``MAX_QUBITS``."""


def basis_of(label: str) -> str:
    """Return ``"Z"`` for ``0``/``1`` and ``"X"`` for ``+``/``-``."""
    if label in ("0", "1"):
        return "Z"
    if label in ("+", "-"):
        return "X"
    raise ValueError(f"unknown basis-state label {label!r}")


def xor_codes(a: str, b: str) -> str:
    return f"{int(a[0]) ^ int(b[0])}{int(a[1]) ^ int(b[1])}"


def check_code(code: str) -> str:
    if code not in BELL_CODES:
        raise ValueError(f"two-bit code must be one of {BELL_CODES}, got {code!r}")
    return code


class PureState:
    """Normalized amplitude vector over ``num_qubits`` qubits.

    Instances are treated as immutable; every gate returns a new state.
    """

    __slots__ = ("amps", "num_qubits")

    def __init__(self, amps: Sequence[complex] | np.ndarray, *, check: bool = True):
        arr = np.array(amps, dtype=complex).reshape(-1)
        n = arr.size.bit_length() - 1
        if check:
            if arr.size < 2 or 1 << n != arr.size:
                raise ValueError(f"amplitude count {arr.size} is not a power of two >= 2")
            if n > MAX_QUBITS:
                raise RegisterOverflowError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")
            if not np.all(np.isfinite(arr)):
                raise ValueError("amplitudes must be finite")
            norm = float(np.vdot(arr, arr).real)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        arr.setflags(write=False)
        self.amps = arr
        self.num_qubits = n

    def __repr__(self) -> str:
        terms = []
        for idx, a in enumerate(self.amps):
            if abs(a) > 1e-12:
                terms.append(f"({a:.4g})|{idx:0{self.num_qubits}b}>")
        return "PureState(" + " + ".join(terms) + ")"

    def norm(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def probability(self, bitstring: str) -> float:
        return float(abs(self.amps[int(bitstring, 2)]) ** 2)


def _fresh(arr: np.ndarray) -> PureState:
    # trusted path: caller guarantees normalization and owns ``arr``
    st = object.__new__(PureState)
    arr.setflags(write=False)
    st.amps = arr
    st.num_qubits = arr.size.bit_length() - 1
    return st


@lru_cache(maxsize=None)
def _front_perm(n: int, qubits: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays moving ``qubits`` to the most significant positions and back."""
    order = list(qubits) + [q for q in range(n) if q not in qubits]
    idx = np.arange(1 << n).reshape((2,) * n).transpose(order).reshape(-1)
    inv = np.empty_like(idx)
    inv[idx] = np.arange(idx.size)
    idx.setflags(write=False)
    inv.setflags(write=False)
    return idx, inv


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n)
    cbit, tbit = 1 << (n - 1 - control), 1 << (n - 1 - target)
    perm = np.where(idx & cbit, idx ^ tbit, idx)
    perm.setflags(write=False)
    return perm


_BASIS_CACHE = {k: _fresh(v.copy()) for k, v in BASIS_STATES.items()}
_BELL_CACHE = {k: _fresh(v.copy()) for k, v in BELL_VECTORS.items()}


def _measure_single(state: PureState, basis: str, rng: np.random.Generator) -> tuple[str, PureState]:
    # one-qubit fast path in plain Python; the post-state is the eigenstate itself
    a0, a1 = state.amps.tolist()
    if basis == "X":
        a0, a1 = (a0 + a1) * _S, (a0 - a1) * _S
    p0 = a0.real * a0.real + a0.imag * a0.imag
    label = BASIS_LABELS[basis][0 if rng.random() < p0 else 1]
    return label, _BASIS_CACHE[label]


def _check_index(state: PureState, *qubits: int) -> None:
    for q in qubits:
        if not 0 <= q < state.num_qubits:
            raise IndexError(f"qubit {q} out of range for a {state.num_qubits}-qubit state")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"qubit indices must be distinct, got {qubits}")


def equal_up_to_phase(a: PureState, b: PureState, tol: float = 1e-9) -> bool:
    """True when ``a`` and ``b`` differ only by a global phase."""
    if a.num_qubits != b.num_qubits:
        return False
    return abs(abs(np.vdot(a.amps, b.amps)) - 1.0) <= tol


def prepare_basis_state(label: str) -> PureState:
    # states are immutable, so the shared instances are safe to hand out
    try:
        return _BASIS_CACHE[label]
    except KeyError:
        raise ValueError(f"label must be one of 0, 1, +, -; got {label!r}") from None


def prepare_bell(code: str) -> PureState:
    return _BELL_CACHE[check_code(code)]


def tensor(a: PureState, b: PureState) -> PureState:
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise RegisterOverflowError(
            f"{a.num_qubits}+{b.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit limit"
        )
    return _fresh(np.multiply.outer(a.amps, b.amps).reshape(-1))


def tensor_all(states: Iterable[PureState]) -> PureState:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def _operator(op) -> np.ndarray:
    if isinstance(op, str):
        if op == "H":
            return HADAMARD
        return PAULI[check_code(op)]
    m = np.asarray(op, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError("single-qubit operator must be 2x2")
    if not np.allclose(m.conj().T @ m, np.eye(2), atol=1e-9):
        raise ValueError("single-qubit operator must be unitary")
    return m


def apply_1q(state: PureState, qubit: int, op) -> PureState:
    """Apply a Pauli code, ``"H"`` or a 2x2 unitary to one qubit."""
    _check_index(state, qubit)
    m = _operator(op)
    v = state.amps.reshape(1 << qubit, 2, -1)
    return _fresh((m @ v).reshape(-1))


def apply_cnot(state: PureState, control: int, target: int) -> PureState:
    _check_index(state, control, target)
    return _fresh(state.amps[_cnot_perm(state.num_qubits, control, target)])


def _front(state: PureState, qubits: Sequence[int]) -> np.ndarray:
    """Reshape to (2**len(qubits), rest) with ``qubits`` leading, in order."""
    idx, _ = _front_perm(state.num_qubits, tuple(qubits))
    return state.amps[idx].reshape(1 << len(qubits), -1)


def _unfront(mat: np.ndarray, n: int, qubits: Sequence[int]) -> np.ndarray:
    _, inv = _front_perm(n, tuple(qubits))
    return mat.reshape(-1)[inv]


def apply_2q(state: PureState, q1: int, q2: int, unitary) -> PureState:
    """Apply a 4x4 unitary to the ordered pair ``(q1, q2)``."""
    _check_index(state, q1, q2)
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (4, 4) or not np.allclose(u.conj().T @ u, np.eye(4), atol=1e-9):
        raise ValueError("two-qubit operator must be a 4x4 unitary")
    m = _front(state, (q1, q2))
    return _fresh(_unfront(u @ m, state.num_qubits, (q1, q2)))


def apply_isometry(state: PureState, qubit: int, v) -> PureState:
    """Map ``qubit`` into (qubit, new ancilla) with the 4x2 matrix ``v``.

    Column ``j`` of ``v`` is the image of ``|j>`` in the ordered basis
    ``|00>, |01>, |10>, |11>`` of (qubit, ancilla). The ancilla is appended
    as the last qubit. The map need not be an isometry in general, but it
    must preserve the norm of this particular state.
    """
    _check_index(state, qubit)
    n = state.num_qubits
    if n + 1 > MAX_QUBITS:
        raise RegisterOverflowError(f"appending an ancilla exceeds {MAX_QUBITS} qubits")
    v = np.asarray(v, dtype=complex)
    if v.shape != (4, 2):
        raise ValueError("isometry must be a 4x2 matrix")
    m = _front(state, (qubit,))  # (2, rest)
    image = v @ m  # (4, rest) over (qubit, ancilla)
    t = image.reshape((2, 2) + (2,) * (n - 1))
    # (qubit, ancilla, others...) -> qubit back in place, ancilla last
    t = np.moveaxis(t, 1, -1)
    t = np.moveaxis(t, 0, qubit)
    out = t.reshape(-1)
    norm = float(np.vdot(out, out).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"map does not preserve the norm of this state (norm^2 = {norm:.12g})")
    return _fresh(out)


def outcome_probabilities(state: PureState, qubit: int, basis: str) -> dict[str, float]:
    _check_index(state, qubit)
    if basis not in BASIS_LABELS:
        raise ValueError(f"basis must be 'Z' or 'X' (use bell_measure for Bell), got {basis!r}")
    v = state.amps.reshape(1 << qubit, 2, -1)
    if basis == "X":
        v = HADAMARD @ v
    p0 = float(np.vdot(v[:, 0, :], v[:, 0, :]).real)
    lo, hi = BASIS_LABELS[basis]
    return {lo: p0, hi: max(0.0, 1.0 - p0)}


@lru_cache(maxsize=None)
def _bit_masks(n: int, qubit: int) -> tuple[np.ndarray, np.ndarray]:
    bit = (np.arange(1 << n) >> (n - 1 - qubit)) & 1
    m1 = bit.astype(float)
    m0 = 1.0 - m1
    m0.setflags(write=False)
    m1.setflags(write=False)
    return m0, m1


def measure(state: PureState, qubit: int, basis: str, rng: np.random.Generator) -> tuple[str, PureState]:
    """Projective single-qubit measurement in Z or X, sampled by the Born rule."""
    _check_index(state, qubit)
    if basis not in BASIS_LABELS:
        raise ValueError(f"basis must be 'Z' or 'X' (use bell_measure for Bell), got {basis!r}")
    if state.num_qubits == 1:
        return _measure_single(state, basis, rng)
    amps = state.amps
    if basis == "X":
        amps = (HADAMARD @ amps.reshape(1 << qubit, 2, -1)).reshape(-1)
    m0, m1 = _bit_masks(state.num_qubits, qubit)
    p0 = float(np.dot(amps.real**2 + amps.imag**2, m0))
    if rng.random() < p0:
        bit, post = 0, amps * (m0 / math.sqrt(p0))
    else:
        bit, post = 1, amps * (m1 / math.sqrt(1.0 - p0))
    if basis == "X":
        post = (HADAMARD @ post.reshape(1 << qubit, 2, -1)).reshape(-1)
    return BASIS_LABELS[basis][bit], _fresh(post)


def bell_probabilities(state: PureState, q1: int, q2: int) -> dict[str, float]:
    _check_index(state, q1, q2)
    c = BELL_BRA @ _front(state, (q1, q2))
    probs = np.einsum("ij,ij->i", c.conj(), c).real
    return dict(zip(BELL_CODES, map(float, probs)))


def bell_measure(state: PureState, q1: int, q2: int, rng: np.random.Generator) -> tuple[str, PureState]:
    """Project the ordered pair ``(q1, q2)`` onto the four Bell states."""
    _check_index(state, q1, q2)
    c = BELL_BRA @ _front(state, (q1, q2))  # (4, rest)
    probs = (c.real**2 + c.imag**2).sum(axis=1)
    u = rng.random() * probs.sum()
    k, acc = 0, probs[0]
    while u >= acc and k < 3:
        k += 1
        acc += probs[k]
    rest = c[k] / math.sqrt(probs[k])
    code = BELL_CODES[k]
    post = np.outer(BELL_VECTORS[code], rest)
    return code, _fresh(_unfront(post, state.num_qubits, (q1, q2)))


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix of power-of-two size."""

    __slots__ = ("matrix", "num_qubits")

    def __init__(self, matrix, *, check: bool = True):
        m = np.array(matrix, dtype=complex)
        dim = m.shape[0]
        n = dim.bit_length() - 1
        if check:
            if m.ndim != 2 or m.shape[0] != m.shape[1] or 1 << n != dim:
                raise ValueError("density matrix must be square with power-of-two size")
            if not np.allclose(m, m.conj().T, atol=1e-9):
                raise ValueError("density matrix must be Hermitian")
            if abs(np.trace(m).real - 1.0) > 1e-9:
                raise ValueError("density matrix must have unit trace")
            if np.linalg.eigvalsh(m).min() < -1e-9:
                raise ValueError("density matrix must be positive semidefinite")
        m.setflags(write=False)
        self.matrix = m
        self.num_qubits = n

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_state(cls, state: PureState) -> "DensityMatrix":
        return cls(np.outer(state.amps, state.amps.conj()), check=False)

    @classmethod
    def mixture(cls, weighted: Iterable[tuple[float, "DensityMatrix | PureState"]]) -> "DensityMatrix":
        total = None
        for p, rho in weighted:
            m = as_density(rho).matrix * p
            total = m if total is None else total + m
        return cls(total)


def as_density(rho) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        return rho
    if isinstance(rho, PureState):
        return DensityMatrix.from_state(rho)
    return DensityMatrix(rho)


def partial_trace(state: PureState | DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (returned in ascending qubit order)."""
    keep = sorted(set(keep))
    n = state.num_qubits
    if not keep:
        raise ValueError("keep must name at least one qubit")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"keep {keep} out of range for {n} qubits")
    if isinstance(state, PureState):
        m = _front(state, keep)
        return DensityMatrix(m @ m.conj().T, check=False)
    t = state.matrix.reshape((2,) * (2 * n))
    row = list(range(n))
    col = [q + n if q in keep else q for q in range(n)]
    out_idx = keep + [q + n for q in keep]
    reduced = np.einsum(t, row + col, out_idx)
    d = 1 << len(keep)
    return DensityMatrix(reduced.reshape(d, d), check=False)


def von_neumann_entropy(rho) -> float:
    """-Tr(rho log2 rho) in bits, with 0 log 0 taken as 0."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if not np.allclose(m, m.conj().T, atol=1e-9):
        raise ValueError("entropy requires a Hermitian matrix")
    lam = np.linalg.eigvalsh(m)
    lam = lam[lam > 1e-15]
    return max(0.0, float(-(lam * np.log2(lam)).sum()))


def holevo(ensemble: Sequence[tuple[float, DensityMatrix | PureState]]) -> float:
    """Holevo quantity S(sum p_i rho_i) - sum p_i S(rho_i) in bits."""
    if not ensemble:
        raise ValueError("ensemble must be non-empty")
    probs = np.array([p for p, _ in ensemble], dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("ensemble probabilities must be non-negative and sum to 1")
    rhos = [as_density(r) for _, r in ensemble]
    avg = sum(p * r.matrix for p, r in zip(probs, rhos))
    return von_neumann_entropy(avg) - float(sum(p * von_neumann_entropy(r) for p, r in zip(probs, rhos)))


def project(state: PureState, qubit: int, label: str) -> tuple[float, PureState | None]:
    """Born probability of single-qubit outcome ``label`` and the normalized post-state."""
    _check_index(state, qubit)
    basis = basis_of(label)
    bit = BASIS_LABELS[basis].index(label)
    amps = state.amps
    if basis == "X":
        amps = (HADAMARD @ amps.reshape(1 << qubit, 2, -1)).reshape(-1)
    mask = _bit_masks(state.num_qubits, qubit)[bit]
    post = amps * mask
    p = float(np.vdot(post, post).real)
    if p < 1e-15:
        return 0.0, None
    post = post / math.sqrt(p)
    if basis == "X":
        post = (HADAMARD @ post.reshape(1 << qubit, 2, -1)).reshape(-1)
    return p, _fresh(post)


def bell_project(state: PureState, q1: int, q2: int, code: str) -> tuple[float, PureState | None]:
    """Born probability of Bell outcome ``code`` on ``(q1, q2)`` and the post-state."""
    _check_index(state, q1, q2)
    k = BELL_CODES.index(check_code(code))
    rest = BELL_BRA[k] @ _front(state, (q1, q2))
    p = float(np.vdot(rest, rest).real)
    if p < 1e-15:
        return 0.0, None
    post = np.outer(BELL_VECTORS[code], rest / math.sqrt(p))
    return p, _fresh(_unfront(post, state.num_qubits, (q1, q2)))
