"""Two-qubit Werner states, Bloch-vector measurements, and joint outcome tables.

Conventions used throughout the package:

* computational basis = sigma_z eigenbasis,
* the maximally entangled reference state is the singlet (|01> - |10>)/sqrt(2),
* measurement outcomes are labelled +1 / -1 and a projective qubit measurement
  along unit vector ``u`` has effects (1 +/- u.sigma)/2.

With these choices the singlet correlation law is
``<u.sigma (x) v.sigma> = -u.v``, which fixes every closed form downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ATOL = 1e-12

OUTCOMES = (1, -1)

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)

X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])

#: Singlet state vector (|01> - |10>)/sqrt(2) in the computational basis.
SINGLET_KET = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)


def as_unit_vector(v, atol: float = 1e-12) -> np.ndarray:
    """Return ``v`` as a float array, rejecting non-unit-norm vectors."""
    vec = np.asarray(v, dtype=float)
    if vec.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {vec.shape}")
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"measurement direction must be unit norm, got |v| = {norm}")
    return vec


def werner_state(mu: float) -> np.ndarray:
    """Return the 4x4 density matrix mu |psi_s><psi_s| + (1 - mu)/4 I."""
    mu = float(mu)
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mixing probability must lie in [0, 1], got {mu}")
    singlet = np.outer(SINGLET_KET, SINGLET_KET.conj())
    return mu * singlet + (1.0 - mu) / 4.0 * np.eye(4, dtype=complex)


def validate_density_matrix(rho, atol: float = 1e-12, eig_atol: float = 1e-10) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity of a 4x4 density matrix."""
    mat = np.asarray(rho, dtype=complex)
    if mat.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {mat.shape}")
    if not np.allclose(mat, mat.conj().T, atol=atol, rtol=0.0):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(mat).real - 1.0) > atol:
        raise ValueError(f"density matrix trace is {np.trace(mat).real}, expected 1")
    eigs = np.linalg.eigvalsh(mat)
    if eigs.min() < -eig_atol:
        raise ValueError(f"density matrix has negative eigenvalue {eigs.min()}")
    return mat


def singlet_fidelity(rho) -> float:
    """Overlap <psi_s| rho |psi_s>; equals (1 + 3 mu)/4 for a Werner state."""
    mat = np.asarray(rho, dtype=complex)
    return float(np.real(SINGLET_KET.conj() @ mat @ SINGLET_KET))


def mu_from_fidelity(fidelity: float) -> float:
    """Invert the Werner singlet fidelity: mu = (4 F - 1)/3."""
    return (4.0 * float(fidelity) - 1.0) / 3.0


def fidelity_from_mu(mu: float) -> float:
    """Werner singlet fidelity F = (1 + 3 mu)/4."""
    return (1.0 + 3.0 * float(mu)) / 4.0


def bloch_projector(u, outcome: int) -> np.ndarray:
    """Projector (1 + outcome * u.sigma)/2 onto the ``outcome`` eigenspace."""
    vec = as_unit_vector(u)
    if outcome not in OUTCOMES:
        raise ValueError(f"outcome must be +1 or -1, got {outcome}")
    u_dot_sigma = sum(c * p for c, p in zip(vec, PAULIS))
    return 0.5 * (np.eye(2, dtype=complex) + outcome * u_dot_sigma)


@dataclass(frozen=True)
class JointTable:
    """2x2 joint outcome probabilities p(a, b) for one measurement setting.

    Row index 0/1 is Alice's outcome +1/-1, column index likewise for Bob.
    """

    probs: np.ndarray
    setting: int | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (2, 2):
            raise ValueError(f"joint table must be 2x2, got shape {probs.shape}")
        if probs.min() < -ATOL or probs.max() > 1.0 + ATOL:
            raise ValueError(f"joint table entries must lie in [0, 1], got {probs}")
        if abs(probs.sum() - 1.0) > ATOL:
            raise ValueError(f"joint table entries sum to {probs.sum()}, expected 1")
        probs = np.clip(probs, 0.0, 1.0)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def prob(self, a: int, b: int) -> float:
        """Probability of Alice outcome ``a`` and Bob outcome ``b`` (each +1/-1)."""
        if a not in OUTCOMES or b not in OUTCOMES:
            raise ValueError(f"outcomes must be +1 or -1, got ({a}, {b})")
        return float(self.probs[OUTCOMES.index(a), OUTCOMES.index(b)])

    @property
    def marginal_a(self) -> np.ndarray:
        """Alice's marginal (p(+1), p(-1))."""
        return self.probs.sum(axis=1)

    @property
    def marginal_b(self) -> np.ndarray:
        """Bob's marginal (p(+1), p(-1))."""
        return self.probs.sum(axis=0)

    @property
    def correlation(self) -> float:
        """Expectation value <a b> = sum_ab a b p(a, b)."""
        signs = np.array([[1.0, -1.0], [-1.0, 1.0]])
        return float((signs * self.probs).sum())


def joint_table_trace(rho, a_vec, b_vec, setting: int | None = None) -> JointTable:
    """Joint table via the Born rule, p(a, b) = tr[(P_a (x) P_b) rho]."""
    mat = validate_density_matrix(rho)
    probs = np.empty((2, 2))
    for i, a in enumerate(OUTCOMES):
        proj_a = bloch_projector(a_vec, a)
        for j, b in enumerate(OUTCOMES):
            proj_b = bloch_projector(b_vec, b)
            probs[i, j] = np.real(np.trace(np.kron(proj_a, proj_b) @ mat))
    return JointTable(probs, setting=setting)


def joint_table_closed(mu: float, a_vec, b_vec, setting: int | None = None) -> JointTable:
    """Werner-state joint table in closed form, p(a, b) = (1 - a b mu u.v)/4."""
    mu = float(mu)
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mixing probability must lie in [0, 1], got {mu}")
    overlap = float(np.dot(as_unit_vector(a_vec), as_unit_vector(b_vec)))
    probs = np.empty((2, 2))
    for i, a in enumerate(OUTCOMES):
        for j, b in enumerate(OUTCOMES):
            probs[i, j] = (1.0 - a * b * mu * overlap) / 4.0
    return JointTable(probs, setting=setting)


def mub_settings(m: int, alpha_deg: float = 0.0, phi_deg: float = 0.0):
    """Mutually orthogonal measurement directions with Alice misaligned.

    Bob's directions are fixed: (z, x) for ``m=2`` and (z, y, x) for ``m=3``.
    Alice's plane is rotated in-plane by ``alpha_deg`` and tilted by
    ``phi_deg`` (her in-plane x axis is rotated towards y, x' = cos(phi) x +
    sin(phi) y).  Pairing order matches Bob's, producing the diagonal overlap
    pattern (cos(alpha), [cos(phi)], cos(phi) cos(alpha)).

    Returns ``(alice, bob)``, each a tuple of unit vectors.
    """
    if m not in (2, 3):
        raise ValueError(f"settings count must be 2 or 3, got {m}")
    alpha = np.radians(float(alpha_deg))
    phi = np.radians(float(phi_deg))
    x_tilted = np.cos(phi) * X_AXIS + np.sin(phi) * Y_AXIS
    a_first = np.cos(alpha) * Z_AXIS + np.sin(alpha) * x_tilted
    a_last = -np.sin(alpha) * Z_AXIS + np.cos(alpha) * x_tilted
    if m == 2:
        return (a_first, a_last), (Z_AXIS.copy(), X_AXIS.copy())
    a_mid = np.cos(phi) * Y_AXIS - np.sin(phi) * X_AXIS
    return (a_first, a_mid, a_last), (Z_AXIS.copy(), Y_AXIS.copy(), X_AXIS.copy())


def nom_settings(m: int):
    """Fixed non-orthogonal directions for Alice, orthogonal ones for Bob.

    Alice's directions are u1 = (0, 0, 1), u2 = (sqrt(3)/2, 0, 1/2) and, for
    ``m=3``, u3 = (1/(2 sqrt(3)), sqrt(2/3), 1/2); pairwise overlaps are all
    1/2.  Bob measures along the coordinate axes.  The pairing order is chosen
    so that each of Alice's directions is tested against the Bob axis it is
    most correlated with, giving per-setting overlaps
    (1, sqrt(3)/2) for ``m=2`` and (1, sqrt(3)/2, sqrt(2/3)) for ``m=3``.
    """
    if m not in (2, 3):
        raise ValueError(f"settings count must be 2 or 3, got {m}")
    u1 = np.array([0.0, 0.0, 1.0])
    u2 = np.array([np.sqrt(3.0) / 2.0, 0.0, 0.5])
    u3 = np.array([1.0 / (2.0 * np.sqrt(3.0)), np.sqrt(2.0 / 3.0), 0.5])
    if m == 2:
        return (u1, u2), (Z_AXIS.copy(), X_AXIS.copy())
    return (u1, u2, u3), (Z_AXIS.copy(), X_AXIS.copy(), Y_AXIS.copy())


def correlation_matrix(mu: float, alice, bob) -> np.ndarray:
    """Full correlation matrix E[x, y] = -mu (u_x . v_y) for a Werner state."""
    mu = float(mu)
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mixing probability must lie in [0, 1], got {mu}")
    alice = [as_unit_vector(u) for u in alice]
    bob = [as_unit_vector(v) for v in bob]
    if len(alice) != len(bob):
        raise ValueError(f"settings counts differ: {len(alice)} vs {len(bob)}")
    return np.array([[-mu * float(np.dot(u, v)) for v in bob] for u in alice])
