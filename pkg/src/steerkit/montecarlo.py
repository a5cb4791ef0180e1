"""Violation probabilities of the determinant criterion under random measurements.

Sampling schemes
----------------

``dihedral``
    Random orthogonal pairs (two settings only).  Bob keeps the fixed pair
    (z, x); Alice's measurement plane is drawn with its normal at a dihedral
    angle gamma ~ Uniform[0, 90] degrees from Bob's plane normal, uniform
    azimuth, and uniform in-plane orientation of her pair.
``haar``
    Random orthogonal pairs/triads for both parties from independent
    isotropic rotations.  For pairs this makes |cos gamma| uniform on [0, 1],
    which is *not* the same measure as ``dihedral`` (gamma itself uniform);
    the two give different violation probabilities.  Default for triads.
``isotropic``
    Completely random (generally non-orthogonal) measurements: every
    direction is an independent isotropic unit vector.

Determinism
-----------

The engine consumes samples in fixed-size chunks; chunk ``c`` draws from a
dedicated Philox stream keyed by ``(seed, c)``, and per-chunk integer counts
are merged in chunk order.  Results are therefore bit-identical for a given
seed no matter how many worker threads are used.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .criteria import DB_VECTOR_THRESHOLD

ROM_SCHEMES = ("dihedral", "haar")
CRM_SCHEMES = ("isotropic",)
SCHEMES = ROM_SCHEMES + CRM_SCHEMES

#: Samples per RNG chunk.  Fixed: changing it changes which Philox stream a
#: given sample draws from, and hence the (deterministic) estimates.
CHUNK_SIZE = 1 << 16


def measurement_class(scheme: str) -> str:
    """'rom' for orthogonal-measurement schemes, 'crm' for isotropic vectors."""
    if scheme in ROM_SCHEMES:
        return "rom"
    if scheme in CRM_SCHEMES:
        return "crm"
    raise ValueError(f"unknown sampling scheme {scheme!r}")


@dataclass(frozen=True)
class MCConfig:
    """Configuration of one violation-probability run."""

    m: int
    scheme: str
    mu_grid: tuple
    n_samples: int
    bound_factor: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.m not in (2, 3):
            raise ValueError(f"settings count must be 2 or 3, got {self.m}")
        measurement_class(self.scheme)  # validates the scheme name
        if self.scheme == "dihedral" and self.m != 2:
            raise ValueError("the dihedral scheme is a two-setting construction; use haar for m = 3")
        mu_grid = tuple(float(mu) for mu in self.mu_grid)
        if not mu_grid:
            raise ValueError("mu grid must be non-empty")
        for mu in mu_grid:
            if not 0.0 <= mu <= 1.0:
                raise ValueError(f"mixing probability must lie in [0, 1], got {mu}")
        object.__setattr__(self, "mu_grid", mu_grid)
        if self.n_samples < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n_samples}")
        if self.bound_factor <= 0.0:
            raise ValueError(f"bound factor must be positive, got {self.bound_factor}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class MCEstimate:
    """Estimated violation probability for one (scenario, threshold) cell."""

    m: int
    scheme: str
    mu: float
    bound_factor: float
    n_samples: int
    p_violation: float
    stderr: float


@dataclass(frozen=True)
class ViolationHistogram:
    """Density of the violation amount, conditioned on violating samples."""

    m: int
    scheme: str
    mu: float
    bound_factor: float
    n_samples: int
    n_violations: int
    bin_edges: np.ndarray
    density: np.ndarray


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Counter-based generator for one chunk; distinct keys, independent streams."""
    key = np.array([seed, chunk_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _rotations_from_quaternions(quat: np.ndarray) -> np.ndarray:
    """Rotation matrices (n, 3, 3) from unnormalised quaternions (n, 4).

    Normalised 4D Gaussians are uniform on the 3-sphere, so the resulting
    rotations are isotropic (Haar) on SO(3).
    """
    q = quat / np.linalg.norm(quat, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    rot = np.empty((q.shape[0], 3, 3))
    rot[:, 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    rot[:, 0, 1] = 2.0 * (x * y - w * z)
    rot[:, 0, 2] = 2.0 * (x * z + w * y)
    rot[:, 1, 0] = 2.0 * (x * y + w * z)
    rot[:, 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    rot[:, 1, 2] = 2.0 * (y * z - w * x)
    rot[:, 2, 0] = 2.0 * (x * z - w * y)
    rot[:, 2, 1] = 2.0 * (y * z + w * x)
    rot[:, 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return rot


def _dihedral_pairs(uniforms: np.ndarray) -> np.ndarray:
    """Alice pairs (n, 2, 3) from uniforms (n, 3) in the dihedral scheme.

    Columns of ``uniforms`` map to gamma/(pi/2), psi/(2 pi), chi/(2 pi):
    the dihedral angle from Bob's plane normal (y), the azimuth of Alice's
    plane normal around y, and Alice's in-plane orientation.
    """
    gamma = uniforms[:, 0] * (np.pi / 2.0)
    psi = uniforms[:, 1] * (2.0 * np.pi)
    chi = uniforms[:, 2] * (2.0 * np.pi)
    # Orthonormal basis of Alice's plane for normal n = cos(g) y + sin(g) d,
    # d = cos(psi) z + sin(psi) x: e1 = -sin(psi) z + cos(psi) x, e2 = n x e1.
    e1 = np.stack([np.cos(psi), np.zeros_like(psi), -np.sin(psi)], axis=1)
    e2 = np.stack(
        [-np.cos(gamma) * np.sin(psi), np.sin(gamma), -np.cos(gamma) * np.cos(psi)], axis=1
    )
    cos_c, sin_c = np.cos(chi)[:, None], np.sin(chi)[:, None]
    pairs = np.empty((uniforms.shape[0], 2, 3))
    pairs[:, 0] = cos_c * e1 + sin_c * e2
    pairs[:, 1] = -sin_c * e1 + cos_c * e2
    return pairs


def sample_unit_vector(rng: np.random.Generator) -> np.ndarray:
    """Isotropic unit vector (normalised 3-component Gaussian)."""
    g = rng.standard_normal(3)
    return g / np.linalg.norm(g)


def sample_orthogonal_pair(rng: np.random.Generator, scheme: str = "haar"):
    """One orthonormal measurement pair under a ROM scheme."""
    if scheme == "dihedral":
        pair = _dihedral_pairs(rng.random((1, 3)))[0]
    elif scheme == "haar":
        rot = _rotations_from_quaternions(rng.standard_normal((1, 4)))[0]
        pair = rot[:, :2].T
    else:
        raise ValueError(f"orthogonal pairs come from 'dihedral' or 'haar', got {scheme!r}")
    return pair[0], pair[1]


def sample_orthogonal_triad(rng: np.random.Generator):
    """Right-handed orthonormal triad from an isotropic rotation."""
    rot = _rotations_from_quaternions(rng.standard_normal((1, 4)))[0]
    return rot[:, 0], rot[:, 1], rot[:, 2]


# ---------------------------------------------------------------------------
# vectorised chunk engine
# ---------------------------------------------------------------------------

_BOB_PAIR_NORMAL = np.array([0.0, 1.0, 0.0])  # plane normal of Bob's fixed (z, x) pair


def _chunk_geometry(scheme: str, m: int, seed: int, chunk_index: int, n: int) -> np.ndarray:
    """Geometric factor per sample: the vector-form LHS at mu = 1.

    Draw layout per chunk is fixed (one array per party in scheme order), so
    a sample's value depends only on (seed, chunk index, position in chunk).
    """
    rng = chunk_rng(seed, chunk_index)
    if scheme == "dihedral":
        alice = _dihedral_pairs(rng.random((n, 3)))
        normals = np.cross(alice[:, 0], alice[:, 1])
        return np.abs(normals @ _BOB_PAIR_NORMAL)
    if scheme == "haar":
        rot_a = _rotations_from_quaternions(rng.standard_normal((n, 4)))
        rot_b = _rotations_from_quaternions(rng.standard_normal((n, 4)))
        if m == 2:
            n_a = np.cross(rot_a[:, :, 0], rot_a[:, :, 1])
            n_b = np.cross(rot_b[:, :, 0], rot_b[:, :, 1])
            return np.abs(np.einsum("ij,ij->i", n_a, n_b))
        det_a = np.einsum("ij,ij->i", rot_a[:, :, 0], np.cross(rot_a[:, :, 1], rot_a[:, :, 2]))
        det_b = np.einsum("ij,ij->i", rot_b[:, :, 0], np.cross(rot_b[:, :, 1], rot_b[:, :, 2]))
        return np.abs(det_a) * np.abs(det_b)
    if scheme == "isotropic":
        vecs_a = rng.standard_normal((n, m, 3))
        vecs_b = rng.standard_normal((n, m, 3))
        vecs_a /= np.linalg.norm(vecs_a, axis=2, keepdims=True)
        vecs_b /= np.linalg.norm(vecs_b, axis=2, keepdims=True)
        if m == 2:
            n_a = np.cross(vecs_a[:, 0], vecs_a[:, 1])
            n_b = np.cross(vecs_b[:, 0], vecs_b[:, 1])
            return np.abs(np.einsum("ij,ij->i", n_a, n_b))
        det_a = np.einsum("ij,ij->i", vecs_a[:, 0], np.cross(vecs_a[:, 1], vecs_a[:, 2]))
        det_b = np.einsum("ij,ij->i", vecs_b[:, 0], np.cross(vecs_b[:, 1], vecs_b[:, 2]))
        return np.abs(det_a) * np.abs(det_b)
    raise ValueError(f"unknown sampling scheme {scheme!r}")


def _chunk_plan(n_samples: int):
    n_chunks = (n_samples + CHUNK_SIZE - 1) // CHUNK_SIZE
    return [
        (c, min(CHUNK_SIZE, n_samples - c * CHUNK_SIZE))
        for c in range(n_chunks)
    ]


def _map_chunks(task, plan, n_workers: int):
    if n_workers <= 1:
        return [task(c, size) for c, size in plan]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(task, c, size) for c, size in plan]
        return [f.result() for f in futures]


def _geometry_thresholds(cfg: MCConfig) -> np.ndarray:
    """Per-mu thresholds in geometry space: factor * T_m / mu^m (inf at mu = 0)."""
    base = cfg.bound_factor * DB_VECTOR_THRESHOLD[cfg.m]
    return np.array(
        [base / mu ** cfg.m if mu > 0.0 else math.inf for mu in cfg.mu_grid]
    )


def violation_probability(cfg: MCConfig, n_workers: int = 1):
    """Estimate the violation probability for each mu in the grid.

    Returns one :class:`MCEstimate` per grid point.  A configuration's
    violation counts are bit-identical across worker counts.
    """
    thresholds = _geometry_thresholds(cfg)
    plan = _chunk_plan(cfg.n_samples)

    def task(chunk_index, size):
        geom = _chunk_geometry(cfg.scheme, cfg.m, cfg.seed, chunk_index, size)
        return (geom[None, :] > thresholds[:, None]).sum(axis=1)

    counts = sum(_map_chunks(task, plan, n_workers))
    estimates = []
    for mu, count in zip(cfg.mu_grid, counts):
        p = count / cfg.n_samples
        stderr = math.sqrt(p * (1.0 - p) / cfg.n_samples)
        estimates.append(
            MCEstimate(cfg.m, cfg.scheme, mu, cfg.bound_factor, cfg.n_samples, p, stderr)
        )
    return estimates


def violation_histogram(cfg: MCConfig, bins: int = 50, n_workers: int = 1) -> ViolationHistogram:
    """Histogram of the violation amount (LHS minus bound) as a density.

    Requires a single-mu configuration.  Bins are uniform over the attainable
    violation range (0, mu^m - factor * T_m]; the density integrates to 1
    over the violating samples.
    """
    if len(cfg.mu_grid) != 1:
        raise ValueError("violation_histogram needs a single-mu configuration")
    if bins < 1:
        raise ValueError(f"need at least one bin, got {bins}")
    mu = cfg.mu_grid[0]
    bound = cfg.bound_factor * DB_VECTOR_THRESHOLD[cfg.m]
    max_violation = mu ** cfg.m - bound
    if max_violation <= 0.0:
        raise ValueError(
            f"no attainable violation at mu = {mu} with bound factor {cfg.bound_factor}"
        )
    edges = np.linspace(0.0, max_violation, bins + 1)
    plan = _chunk_plan(cfg.n_samples)

    def task(chunk_index, size):
        geom = _chunk_geometry(cfg.scheme, cfg.m, cfg.seed, chunk_index, size)
        amounts = mu ** cfg.m * geom - bound
        counts, _ = np.histogram(amounts[amounts > 0.0], bins=edges)
        return counts

    counts = sum(_map_chunks(task, plan, n_workers))
    n_violations = int(counts.sum())
    if n_violations == 0:
        raise ValueError("no violating samples; cannot normalise a density")
    width = edges[1] - edges[0]
    density = counts / (n_violations * width)
    return ViolationHistogram(
        cfg.m,
        cfg.scheme,
        mu,
        cfg.bound_factor,
        cfg.n_samples,
        n_violations,
        edges,
        density,
    )


#: Row layout of the raised-bound study: (settings, scheme) per row.
RAISED_BOUND_ROWS = ((2, "dihedral"), (3, "haar"), (2, "isotropic"), (3, "isotropic"))


def raised_bound_table(
    factors=(1.0, 1.1, 1.2),
    mu: float = 1.0,
    n_samples: int = 1_000_000,
    seed: int = 0,
    n_workers: int = 1,
):
    """Violation probabilities under raised classical bounds.

    Four rows (2/3 settings x orthogonal/completely-random sampling) times
    one estimate per bound factor, all at the same ``mu``.  Each row reuses
    one set of geometry samples across the factors.
    """
    factors = tuple(float(f) for f in factors)
    table = []
    for m, scheme in RAISED_BOUND_ROWS:
        plan = _chunk_plan(n_samples)
        thresholds = np.array(
            [f * DB_VECTOR_THRESHOLD[m] / mu ** m if mu > 0.0 else math.inf for f in factors]
        )

        def task(chunk_index, size, m=m, scheme=scheme, thresholds=thresholds):
            geom = _chunk_geometry(scheme, m, seed, chunk_index, size)
            return (geom[None, :] > thresholds[:, None]).sum(axis=1)

        counts = sum(_map_chunks(task, plan, n_workers))
        row = []
        for factor, count in zip(factors, counts):
            p = count / n_samples
            stderr = math.sqrt(p * (1.0 - p) / n_samples)
            row.append(MCEstimate(m, scheme, mu, factor, n_samples, p, stderr))
        table.append(row)
    return table


def dihedral_violation_probability(mu: float, bound_factor: float = 1.0) -> float:
    """Analytic violation probability of the two-setting dihedral scheme.

    P = acos(x)/(pi/2) with x = factor/(2 mu^2), clamped to [0, 1]; the
    Monte Carlo estimator converges to this value.
    """
    if mu <= 0.0:
        return 0.0
    x = bound_factor / (2.0 * mu ** 2)
    if x >= 1.0:
        return 0.0
    return math.acos(x) / (math.pi / 2.0)


MC_CSV_HEADER = ["m", "scheme", "mu", "bound_factor", "n_samples", "p_violation", "stderr"]


def estimates_to_csv(estimates, stream) -> None:
    """Write Monte Carlo estimates as CSV (stable column order)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(MC_CSV_HEADER)
    for est in estimates:
        writer.writerow(
            [
                est.m,
                est.scheme,
                f"{est.mu:.12g}",
                f"{est.bound_factor:.12g}",
                est.n_samples,
                f"{est.p_violation:.12g}",
                f"{est.stderr:.12g}",
            ]
        )


HISTOGRAM_CSV_HEADER = ["bin_left", "bin_right", "density"]


def histogram_to_csv(hist: ViolationHistogram, stream) -> None:
    """Write a violation-amount density as CSV."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(HISTOGRAM_CSV_HEADER)
    for left, right, dens in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.density):
        writer.writerow([f"{left:.12g}", f"{right:.12g}", f"{dens:.12g}"])
