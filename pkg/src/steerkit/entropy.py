"""Generalised entropies and the uncertainty bounds used by the steering tests.

All entropies are in nats.  Order parameters are plain floats: ``q = 1`` /
``r = 1`` select the Shannon limit and ``r = math.inf`` the min-entropy limit;
both limits get dedicated branches rather than large-finite approximations.
The conventions ``0^q = 0`` and ``0 * log(0) = 0`` hold throughout.
"""

from __future__ import annotations

import math

import numpy as np

from .qcore import JointTable

DIST_ATOL = 1e-10


def _as_distribution(p) -> np.ndarray:
    probs = np.asarray(p, dtype=float).ravel()
    if probs.size == 0:
        raise ValueError("distribution must be non-empty")
    if probs.min() < -DIST_ATOL:
        raise ValueError(f"distribution has negative entry {probs.min()}")
    total = probs.sum()
    if abs(total - 1.0) > DIST_ATOL:
        raise ValueError(f"distribution sums to {total}, expected 1")
    return np.clip(probs, 0.0, None)


def _check_tsallis_order(q: float) -> float:
    q = float(q)
    if not math.isfinite(q) or q < 1.0:
        raise ValueError(f"Tsallis order must satisfy q >= 1 (q = 1 is the Shannon limit), got {q}")
    return q


def _check_renyi_order(r: float) -> float:
    r = float(r)
    if r != math.inf and (not math.isfinite(r) or r < 0.5):
        raise ValueError(f"Renyi order must satisfy r >= 1/2 (inf allowed), got {r}")
    return r


def q_log(x: float, q: float) -> float:
    """Deformed logarithm ln_q(x) = (x^(1-q) - 1)/(1 - q); ln_1 = ln."""
    x = float(x)
    if x <= 0.0:
        raise ValueError(f"q-logarithm requires x > 0, got {x}")
    q = float(q)
    if not math.isfinite(q):
        raise ValueError(f"q-logarithm order must be finite, got {q}")
    if q == 1.0:
        return math.log(x)
    return (x ** (1.0 - q) - 1.0) / (1.0 - q)


def shannon_entropy(p) -> float:
    """Shannon entropy -sum p ln p in nats."""
    probs = _as_distribution(p)
    nz = probs[probs > 0.0]
    return float(-(nz * np.log(nz)).sum())


def tsallis_entropy(p, q: float) -> float:
    """Tsallis entropy -sum p^q ln_q(p) = (1 - sum p^q)/(q - 1)."""
    q = _check_tsallis_order(q)
    probs = _as_distribution(p)
    if q == 1.0:
        return shannon_entropy(probs)
    return float((1.0 - (probs ** q).sum()) / (q - 1.0))


def renyi_entropy(p, r: float) -> float:
    """Renyi entropy ln(sum p^r)/(1 - r); Shannon at r = 1, -ln(max p) at r = inf."""
    r = _check_renyi_order(r)
    probs = _as_distribution(p)
    if r == 1.0:
        return shannon_entropy(probs)
    if r == math.inf:
        return float(-np.log(probs.max()))
    return float(np.log((probs ** r).sum()) / (1.0 - r))


def _joint_minus_marginal(table: JointTable) -> float:
    # Shannon conditional H(B|A) = H(A,B) - H(A), with 0 log 0 = 0.
    joint = table.probs.ravel()
    return shannon_entropy(joint) - shannon_entropy(table.marginal_a)


def tsallis_directed_term(table: JointTable, q: float) -> float:
    """Conditional Tsallis term (1/(q-1)) [1 - sum_ab p_ab^q / p_a^(q-1)].

    This is the per-setting contribution subtracted from the uncertainty
    bound in the Tsallis steering parameter.  Cells with zero Alice marginal
    contribute nothing; ``q = 1`` returns the Shannon conditional entropy.
    """
    q = _check_tsallis_order(q)
    if q == 1.0:
        return _joint_minus_marginal(table)
    probs = table.probs
    marg = table.marginal_a
    inner = 0.0
    for i in range(2):
        if marg[i] <= 0.0:
            continue
        inner += (probs[i, :] ** q).sum() / marg[i] ** (q - 1.0)
    return float((1.0 - inner) / (q - 1.0))


def arimoto_conditional_renyi(table: JointTable, r: float) -> float:
    """Arimoto conditional Renyi entropy of Bob given Alice.

    H_r(B|A) = (r/(1-r)) ln sum_a [sum_b p(a,b)^r]^(1/r), with the Shannon
    conditional at r = 1 and -ln sum_a max_b p(a,b) at r = inf.  For the
    2x2 Werner tables used here it evaluates to (1/(1-r)) ln f_r(x) with
    x the state-measurement overlap, which is what the closed-form steering
    expressions require.
    """
    r = _check_renyi_order(r)
    probs = table.probs
    if r == 1.0:
        return _joint_minus_marginal(table)
    if r == math.inf:
        return float(-np.log(probs.max(axis=1).sum()))
    row_norms = (probs ** r).sum(axis=1) ** (1.0 / r)
    return float(r / (1.0 - r) * np.log(row_norms.sum()))


def eur_bound_tsallis(q: float, m: int | None = None, override: float | None = None) -> float:
    """Tsallis entropic-uncertainty bound for m orthogonal qubit measurements.

    Returns ln_q(2) for two settings and 2 ln_q(2) for three.  Other
    measurement sets need a caller-supplied ``override`` bound.
    """
    q = _check_tsallis_order(q)
    if override is not None:
        return float(override)
    if m not in (2, 3):
        raise ValueError(f"no built-in bound for m = {m}; supply an override")
    return (m - 1) * q_log(2.0, q)


def eur_bound_renyi2() -> float:
    """Order-independent Renyi bound for two orthogonal qubit measurements: ln 2."""
    return math.log(2.0)
