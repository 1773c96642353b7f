"""Two-qubit states, measurement operators, and trace-rule probabilities.

Measurement settings are unit vectors on the Bloch sphere; each setting yields
a pair of rank-1 projectors that sum to the identity.  Joint outcome
probabilities follow from the trace rule applied to a 4x4 density matrix.

The density matrix is parametrized for optimization as rho = L L^dag / Tr(L L^dag)
with L complex lower triangular (16 real numbers, one overall scale redundant),
so every real parameter vector maps to a valid state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
PROJECTOR_TOL = 1e-10
UNIT_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

# Lower-triangular off-diagonal positions, row-major.
_TRIL_OFFDIAG = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def validate_density(rho: np.ndarray) -> np.ndarray:
    """Check the density-matrix invariants; return rho as a complex array.

    Raises InvalidInputError if rho is not 4x4 Hermitian, trace-1,
    positive semi-definite (up to numerical slack).
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidInputError(f"density matrix must be 4x4, got {rho.shape}")
    if not is_hermitian(rho):
        raise InvalidInputError("density matrix is not Hermitian within 1e-12")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
        raise InvalidInputError("density matrix trace differs from 1 by more than 1e-12")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < -PSD_TOL:
        raise InvalidInputError(f"density matrix has eigenvalue {eigs.min():.3e} < -1e-10")
    return rho


def measurement_operators(direction) -> tuple[np.ndarray, np.ndarray]:
    """Projectors (P0, P1) for a spin measurement along a unit 3-vector.

    P0 = (I + n.sigma)/2 corresponds to result 0, P1 = (I - n.sigma)/2 to
    result 1; they are orthogonal rank-1 projectors summing to I.
    """
    n = np.asarray(direction, dtype=float)
    if n.shape != (3,):
        raise InvalidInputError(f"direction must be a 3-vector, got shape {n.shape}")
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"direction must be a unit vector, |n| = {np.linalg.norm(n)!r}")
    n_dot_sigma = np.tensordot(n, PAULI, axes=1)
    p0 = 0.5 * (I2 + n_dot_sigma)
    p1 = 0.5 * (I2 - n_dot_sigma)
    return p0, p1


@dataclass(frozen=True)
class ExperimentGeometry:
    """Measurement operators for one experiment.

    alice_ops[i, j] and bob_ops[k, l] are the 2x2 projectors for setting
    i (k) and result j (l); theta is Alice's bias angle in radians.
    """

    theta: float
    alice_ops: np.ndarray  # (2, 2, 2, 2) complex, indexed [setting, result]
    bob_ops: np.ndarray    # (2, 2, 2, 2) complex

    def coincidence_ops(self) -> np.ndarray:
        """Tensor-product operators kron(A_ij, B_kl), shape (2, 2, 2, 2, 4, 4)."""
        out = np.empty((2, 2, 2, 2, 4, 4), dtype=complex)
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    for l in range(2):
                        out[i, j, k, l] = np.kron(self.alice_ops[i, j], self.bob_ops[k, l])
        return out


def alice_directions(theta: float) -> np.ndarray:
    """Alice's two measurement directions for bias angle theta (radians)."""
    return np.array([
        [np.sin(theta), 0.0, np.cos(theta)],
        [np.sin(theta - np.pi / 2), 0.0, np.cos(theta - np.pi / 2)],
    ])


BOB_DIRECTIONS = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0]])


def geometry_for_experiment(theta: float) -> ExperimentGeometry:
    """Build Alice's and Bob's projectors for one experiment.

    Alice measures along (sin theta, 0, cos theta) for setting 0 and the
    same at theta - pi/2 for setting 1; Bob measures along (0,0,1) and
    (-1,0,0) in every experiment.
    """
    if not np.isfinite(theta):
        raise InvalidInputError("theta must be finite")
    alice = np.empty((2, 2, 2, 2), dtype=complex)
    bob = np.empty((2, 2, 2, 2), dtype=complex)
    for i, d in enumerate(alice_directions(theta)):
        alice[i, 0], alice[i, 1] = measurement_operators(d / np.linalg.norm(d))
    for k, d in enumerate(BOB_DIRECTIONS):
        bob[k, 0], bob[k, 1] = measurement_operators(d)
    return ExperimentGeometry(theta=theta, alice_ops=alice, bob_ops=bob)


@dataclass(frozen=True)
class QuantumProbs:
    """Trace-rule probabilities for one experiment.

    qa[i, j]: Alice gets result j under setting i; qb[k, l]: same for Bob;
    qc[i, j, k, l]: joint outcome in quadrant (i, k).
    """

    qa: np.ndarray  # (2, 2)
    qb: np.ndarray  # (2, 2)
    qc: np.ndarray  # (2, 2, 2, 2)


def probs_from_coincidence_ops(ops: np.ndarray, rho: np.ndarray) -> QuantumProbs:
    """Probabilities from precomputed kron(A, B) operators (no validation).

    ops may carry leading batch axes; the last five axes must be
    (..., 2, 2, 2, 2, 4, 4).
    """
    qc = np.einsum('...ab,ba->...', ops, rho).real
    qa = qc[..., :, :, 0, 0] + qc[..., :, :, 0, 1]  # sum over Bob's results at k=0
    qb = qc[..., 0, 0, :, :] + qc[..., 0, 1, :, :]
    return QuantumProbs(qa=qa, qb=qb, qc=qc)


def quantum_probs(rho: np.ndarray, geom: ExperimentGeometry) -> QuantumProbs:
    """Singles and coincidence probabilities for a state and geometry."""
    rho = validate_density(rho)
    return probs_from_coincidence_ops(geom.coincidence_ops(), rho)


def decode_density(params) -> np.ndarray:
    """Map 16 real parameters to a valid density matrix.

    The first 4 entries are the real diagonal of a lower-triangular factor L,
    the remaining 12 the (re, im) pairs of its 6 off-diagonal entries; the
    result is L L^dag normalized to unit trace, hence Hermitian, PSD, trace 1
    for every nonzero input.
    """
    p = np.asarray(params, dtype=float)
    if p.shape != (16,):
        raise InvalidInputError(f"expected 16 real parameters, got shape {p.shape}")
    if not np.any(p):
        raise DegenerateInputError("all-zero parameter vector yields no state")
    L = np.zeros((4, 4), dtype=complex)
    L[np.diag_indices(4)] = p[:4]
    for idx, (r, c) in enumerate(_TRIL_OFFDIAG):
        L[r, c] = p[4 + 2 * idx] + 1j * p[5 + 2 * idx]
    rho = L @ L.conj().T
    tr = np.trace(rho).real
    if tr <= 0.0:
        raise DegenerateInputError("parameter vector yields zero-trace factor")
    return rho / tr


def encode_density(rho: np.ndarray) -> np.ndarray:
    """Inverse of decode_density up to trace normalization.

    Eigenvalues are clamped at zero and a tiny jitter added before the
    Cholesky factorization, so rank-deficient states (pure states) encode
    cleanly; decode(encode(rho)) reproduces rho / Tr(rho).
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4) or not is_hermitian(rho, tol=1e-9):
        raise InvalidInputError("encode_density needs a 4x4 Hermitian matrix")
    w, v = np.linalg.eigh(rho)
    if w.min() < -1e-6:
        raise InvalidInputError(f"matrix is not PSD (eigenvalue {w.min():.3e})")
    rho_plus = (v * np.clip(w, 0.0, None)) @ v.conj().T
    L = np.linalg.cholesky(rho_plus + 1e-14 * np.trace(rho_plus).real * np.eye(4))
    params = np.empty(16)
    params[:4] = np.diag(L).real
    for idx, (r, c) in enumerate(_TRIL_OFFDIAG):
        params[4 + 2 * idx] = L[r, c].real
        params[5 + 2 * idx] = L[r, c].imag
    return params


def singlet_state() -> np.ndarray:
    """Density matrix of the two-qubit singlet (|01> - |10>)/sqrt(2)."""
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = rho[2, 2] = 0.5
    rho[1, 2] = rho[2, 1] = -0.5
    return rho


def maximally_mixed_state() -> np.ndarray:
    return np.eye(4, dtype=complex) / 4.0


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """Half the sum of absolute eigenvalues of rho1 - rho2."""
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(np.asarray(rho1) - np.asarray(rho2)))))


def density_to_json(rho: np.ndarray) -> list:
    """4x4 nested lists of [re, im] pairs."""
    rho = np.asarray(rho, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in rho]


def density_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape != (4, 4, 2):
        raise InvalidInputError(f"expected a 4x4 array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]
