"""Steering criteria: entropic parameters, determinant witnesses, solvers.

Every criterion is normalised so that a positive value certifies steering
(the classical bound of the normalised parameter is 0).  Two independent
evaluation routes are provided for each criterion:

* :func:`evaluate` builds per-setting joint tables (or measurement vectors)
  and feeds them through the generic estimators, exactly as one would with
  measured data;
* :func:`closed_form` evaluates the analytic Werner-state expression.

The two routes agree to ~1e-12 on valid scenarios and the test-suite pins
that equivalence.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass

import numpy as np

from . import entropy as ent
from . import qcore

#: Separable bound of the vector-form determinant criterion (violation means
#: the left-hand side exceeds this).
DB_VECTOR_THRESHOLD = {2: 0.5, 3: math.sqrt(3.0) / 9.0}


def db_bound(m: int, d_a: int = 2) -> float:
    """Separable bound on |det D|: (1/sqrt(d_A)) ((sqrt(2 d_A) - 1)/(m sqrt(d_A)))^m."""
    if m < 2:
        raise ValueError(f"need at least two settings, got m = {m}")
    if d_a < 2:
        raise ValueError(f"untrusted-side dimension must be >= 2, got {d_a}")
    return (1.0 / math.sqrt(d_a)) * ((math.sqrt(2.0 * d_a) - 1.0) / (m * math.sqrt(d_a))) ** m


#: Scale factor mapping the vector-form LHS onto |det D| for qubits, fixed by
#: requiring the determinant and vector forms to be the same inequality:
#: c_m = db_bound(m, 2) / DB_VECTOR_THRESHOLD[m].  See docs/db_normalization.md.
DB_SCALE = {m: db_bound(m, 2) / DB_VECTOR_THRESHOLD[m] for m in (2, 3)}


@dataclass(frozen=True)
class Criterion:
    """A steering criterion identifier plus its order parameters."""

    kind: str  # shannon | tsallis | renyi | db
    q: float | None = None
    r: float | None = None
    s: float | None = None

    def __post_init__(self):
        if self.kind not in ("shannon", "tsallis", "renyi", "db"):
            raise ValueError(f"unknown criterion {self.kind!r}")
        if self.kind == "tsallis" and (self.q is None or self.q < 1.0):
            raise ValueError("tsallis criterion needs an order q >= 1")
        if self.kind == "renyi":
            r = 0.5 if self.r is None else self.r
            s = math.inf if self.s is None else self.s
            object.__setattr__(self, "r", float(r))
            object.__setattr__(self, "s", float(s))

    @classmethod
    def parse(cls, token: str) -> "Criterion":
        """Parse a CLI token: shannon, tsallisQ, renyi, renyi(R,S) or db."""
        token = token.strip()
        if token == "shannon":
            return cls("shannon")
        if token == "db":
            return cls("db")
        if token == "renyi":
            return cls("renyi", r=0.5, s=math.inf)
        match = re.fullmatch(r"renyi\(([^,]+),([^)]+)\)", token)
        if match:
            return cls("renyi", r=_parse_order(match.group(1)), s=_parse_order(match.group(2)))
        match = re.fullmatch(r"tsallis([0-9.]+)", token)
        if match:
            return cls("tsallis", q=float(match.group(1)))
        raise ValueError(
            f"cannot parse criterion {token!r}; expected shannon, tsallisQ, renyi, renyi(R,S) or db"
        )

    def order_label(self, m: int | None = None) -> str:
        if self.kind == "shannon":
            return "q=1"
        if self.kind == "tsallis":
            return f"q={self.q:g}"
        if self.kind == "renyi":
            return f"r={_fmt_order(self.r)},s={_fmt_order(self.s)}"
        return f"m={m}" if m is not None else ""


def _parse_order(text: str) -> float:
    text = text.strip()
    if text in ("inf", "infinity", "oo"):
        return math.inf
    return float(text)


def _fmt_order(x: float) -> str:
    return "inf" if x == math.inf else f"{x:g}"


@dataclass(frozen=True)
class SteeringResult:
    """Outcome of one steering test; positive ``value`` certifies steering."""

    criterion: str
    order: str
    value: float
    bound: float = 0.0

    @property
    def steerable(self) -> bool:
        return self.value > self.bound


@dataclass(frozen=True)
class Scenario:
    """A Werner-state measurement scenario (state + measurement geometry)."""

    mu: float
    alpha_deg: float = 0.0
    phi_deg: float = 0.0
    m: int = 2
    mode: str = "mub"  # mub | nom | explicit
    alice: tuple | None = None
    bob: tuple | None = None

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mixing probability must lie in [0, 1], got {self.mu}")
        if self.m not in (2, 3):
            raise ValueError(f"settings count must be 2 or 3, got {self.m}")
        if self.mode not in ("mub", "nom", "explicit"):
            raise ValueError(f"unknown measurement mode {self.mode!r}")
        if self.mode == "explicit":
            if self.alice is None or self.bob is None:
                raise ValueError("explicit mode needs alice and bob vectors")
            alice = tuple(qcore.as_unit_vector(u) for u in self.alice)
            bob = tuple(qcore.as_unit_vector(v) for v in self.bob)
            if len(alice) != self.m or len(bob) != self.m:
                raise ValueError("explicit vectors must match the settings count")
            object.__setattr__(self, "alice", alice)
            object.__setattr__(self, "bob", bob)

    def settings(self):
        """Measurement directions ``(alice, bob)`` for this scenario."""
        if self.mode == "mub":
            return qcore.mub_settings(self.m, self.alpha_deg, self.phi_deg)
        if self.mode == "nom":
            return qcore.nom_settings(self.m)
        return self.alice, self.bob

    def tables(self):
        """Per-setting Werner joint tables (closed-form Born rule)."""
        alice, bob = self.settings()
        return [
            qcore.joint_table_closed(self.mu, u, v, setting=i + 1)
            for i, (u, v) in enumerate(zip(alice, bob))
        ]

    def overlaps(self) -> np.ndarray:
        """Diagonal state-measurement overlaps mu * (u_m . v_m)."""
        alice, bob = self.settings()
        return np.array([self.mu * float(np.dot(u, v)) for u, v in zip(alice, bob)])


# ---------------------------------------------------------------------------
# table- / vector-based estimators (the measurement pipeline)
# ---------------------------------------------------------------------------


def tsallis_steering(tables, q: float, bound: float | None = None) -> SteeringResult:
    """Tsallis steering parameter: bound minus summed conditional terms.

    ``bound`` defaults to the built-in uncertainty bound for len(tables)
    settings; pass an explicit value for other measurement sets.  ``q = 1``
    gives the Shannon criterion.
    """
    tables = list(tables)
    if bound is None:
        bound = ent.eur_bound_tsallis(q, m=len(tables))
    value = float(bound) - sum(ent.tsallis_directed_term(t, q) for t in tables)
    criterion = "shannon" if q == 1.0 else "tsallis"
    order = "q=1" if q == 1.0 else f"q={q:g}"
    return SteeringResult(criterion, order, value)


def renyi_steering(tables, r: float, s: float) -> SteeringResult:
    """Renyi steering parameter ln 2 - H_r(B|A)_1 - H_s(B|A)_2.

    Only defined for exactly two settings, with conjugate orders
    1/r + 1/s = 2 and r, s >= 1/2.  Table 1 is evaluated at order ``r``,
    table 2 at order ``s``.
    """
    tables = list(tables)
    if len(tables) != 2:
        raise ValueError(f"the Renyi criterion needs exactly two settings, got {len(tables)}")
    r, s = float(r), float(s)
    for order in (r, s):
        if order != math.inf and order < 0.5:
            raise ValueError(f"Renyi orders must be >= 1/2, got ({r}, {s})")
    inv = (0.0 if r == math.inf else 1.0 / r) + (0.0 if s == math.inf else 1.0 / s)
    if abs(inv - 2.0) > 1e-9:
        raise ValueError(f"Renyi orders must satisfy 1/r + 1/s = 2, got 1/r + 1/s = {inv}")
    value = (
        ent.eur_bound_renyi2()
        - ent.arimoto_conditional_renyi(tables[0], r)
        - ent.arimoto_conditional_renyi(tables[1], s)
    )
    return SteeringResult("renyi", f"r={_fmt_order(r)},s={_fmt_order(s)}", value)


def db_lhs(alice, bob, mu: float) -> float:
    """Vector-form determinant left-hand side.

    For two settings: mu^2 |(a1 x a2).(b1 x b2)|; for three:
    mu^3 |a1.(a2 x a3)| |b1.(b2 x b3)|.  Vectors need not be orthogonal.
    Violation of the underlying inequality means the returned value exceeds
    ``DB_VECTOR_THRESHOLD[m]``.
    """
    alice = [qcore.as_unit_vector(u) for u in alice]
    bob = [qcore.as_unit_vector(v) for v in bob]
    if len(alice) != len(bob):
        raise ValueError(f"settings counts differ: {len(alice)} vs {len(bob)}")
    m = len(alice)
    mu = float(mu)
    if m == 2:
        return mu ** 2 * abs(float(np.dot(np.cross(alice[0], alice[1]), np.cross(bob[0], bob[1]))))
    if m == 3:
        det_a = abs(float(np.dot(alice[0], np.cross(alice[1], alice[2]))))
        det_b = abs(float(np.dot(bob[0], np.cross(bob[1], bob[2]))))
        return mu ** 3 * det_a * det_b
    raise ValueError(f"vector-form criterion supports m = 2 or 3, got {m}")


def db_steering(alice, bob, mu: float, m: int | None = None) -> SteeringResult:
    """Normalised dimension-bounded parameter |det D| - db_bound(m, 2).

    |det D| equals ``DB_SCALE[m] * db_lhs``; the scale factor preserves the
    zero crossing of the vector-form inequality.
    """
    alice = list(alice)
    if m is None:
        m = len(alice)
    if m not in (2, 3):
        raise ValueError(f"settings count must be 2 or 3, got {m}")
    if len(alice) != m:
        raise ValueError(f"got {len(alice)} Alice vectors for m = {m}")
    value = DB_SCALE[m] * db_lhs(alice, bob, mu) - db_bound(m, 2)
    return SteeringResult("db", f"m={m}", value)


def evaluate(scenario: Scenario, criterion: Criterion) -> SteeringResult:
    """Evaluate a criterion on a scenario through the measurement pipeline."""
    if criterion.kind == "db":
        alice, bob = scenario.settings()
        return db_steering(alice, bob, scenario.mu, scenario.m)
    tables = scenario.tables()
    if criterion.kind == "shannon":
        return tsallis_steering(tables, 1.0)
    if criterion.kind == "tsallis":
        return tsallis_steering(tables, criterion.q)
    return renyi_steering(tables, criterion.r, criterion.s)


# ---------------------------------------------------------------------------
# closed forms (the analytic route)
# ---------------------------------------------------------------------------


def _f(y: float, x: float) -> float:
    """f_y(x) = ((1-x)/2)^y + ((1+x)/2)^y."""
    return ((1.0 - x) / 2.0) ** y + ((1.0 + x) / 2.0) ** y


def _binary_shannon(p: float) -> float:
    out = 0.0
    for t in (p, 1.0 - p):
        if t > 0.0:
            out -= t * math.log(t)
    return out


def _renyi_term(order: float, x: float) -> float:
    # Conditional Renyi entropy of a Werner table with overlap x.
    if order == 1.0:
        return _binary_shannon((1.0 + x) / 2.0)
    if order == math.inf:
        return math.log(2.0) - math.log(1.0 + abs(x))
    return math.log(_f(order, x)) / (1.0 - order)


def closed_form(scenario: Scenario, criterion: Criterion) -> float:
    """Analytic Werner-state value of a criterion (no table construction).

    Supported: shannon/tsallis for m in {2, 3}, renyi for m = 2, and db, in
    the mub and nom measurement modes.  Explicit-vector scenarios have no
    closed form and are rejected.
    """
    if scenario.mode == "explicit":
        raise ValueError("no closed form for explicit-vector scenarios; use evaluate()")
    mu, m = scenario.mu, scenario.m
    alpha = math.radians(scenario.alpha_deg)
    phi = math.radians(scenario.phi_deg)

    if criterion.kind == "db":
        if scenario.mode == "mub":
            if m == 2:
                return (2.0 * mu ** 2 * abs(math.cos(phi)) - 1.0) / (8.0 * math.sqrt(2.0))
            return (mu ** 3 / math.sqrt(3.0) - 1.0 / 9.0) / 12.0
        if m == 2:
            return (math.sqrt(3.0) * mu ** 2 - 1.0) / (8.0 * math.sqrt(2.0))
        return (mu ** 3 / math.sqrt(6.0) - 1.0 / 9.0) / 12.0

    if scenario.mode == "mub":
        if m == 2:
            overlaps = [mu * math.cos(alpha), mu * math.cos(phi) * math.cos(alpha)]
        else:
            overlaps = [
                mu * math.cos(alpha),
                mu * math.cos(phi),
                mu * math.cos(phi) * math.cos(alpha),
            ]
    else:
        if m == 2:
            overlaps = [mu, math.sqrt(3.0) / 2.0 * mu]
        else:
            overlaps = [mu, math.sqrt(3.0) / 2.0 * mu, math.sqrt(2.0 / 3.0) * mu]

    if criterion.kind in ("shannon", "tsallis"):
        q = 1.0 if criterion.kind == "shannon" else criterion.q
        if q == 1.0:
            return (m - 1) * math.log(2.0) - sum(
                _binary_shannon((1.0 + x) / 2.0) for x in overlaps
            )
        # = (1/(1-q)) [1 + 2^(1-q) - sum f_q] for m=2, [1 + 2^(2-q) - sum f_q] for m=3
        return ((m - 1) * (2.0 ** (1.0 - q) - 1.0) + m - sum(_f(q, x) for x in overlaps)) / (
            1.0 - q
        )

    if criterion.kind == "renyi":
        if m != 2:
            raise ValueError("the Renyi criterion is only defined for two settings")
        return (
            math.log(2.0)
            - _renyi_term(criterion.r, overlaps[0])
            - _renyi_term(criterion.s, overlaps[1])
        )

    raise ValueError(f"unsupported criterion {criterion.kind!r}")


# ---------------------------------------------------------------------------
# threshold solvers and sweeps
# ---------------------------------------------------------------------------


def critical_mu(alpha_deg: float, phi_deg: float) -> float:
    """Critical visibility 1/(cos(alpha) sqrt(1 + cos^2(phi))).

    Above this value both the q=2 Tsallis and the (1/2, inf) Renyi
    two-setting criteria turn positive.  A result above 1 means the state is
    undetectable at any physical visibility.  Requires cos(alpha) > 0.
    """
    cos_a = math.cos(math.radians(alpha_deg))
    if cos_a <= 1e-12:
        raise ValueError(f"critical visibility needs cos(alpha) > 0, got alpha = {alpha_deg} deg")
    cos_p = math.cos(math.radians(phi_deg))
    return 1.0 / (cos_a * math.sqrt(1.0 + cos_p ** 2))


def critical_alpha(
    criterion: Criterion,
    mu: float,
    phi_deg: float = 0.0,
    m: int = 2,
    iterations: int = 60,
) -> float | None:
    """In-plane misalignment at which a closed-form criterion crosses zero.

    Bisection on alpha in [0, 90] degrees; returns ``None`` when the value
    does not change sign on that interval (criterion everywhere positive,
    everywhere non-positive, or independent of alpha).
    """

    def value(alpha_deg: float) -> float:
        return closed_form(
            Scenario(mu=mu, alpha_deg=alpha_deg, phi_deg=phi_deg, m=m), criterion
        )

    lo, hi = 0.0, 90.0
    f_lo, f_hi = value(lo), value(hi)
    if not (f_lo > 0.0 > f_hi):
        return None
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if value(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SweepRow:
    mu: float
    alpha_deg: float
    phi_deg: float
    m: int
    criterion: str
    order: str
    value: float
    steerable: bool


def sweep(mu: float, alpha_grid, phi_deg: float, m: int, criteria, mode: str = "mub"):
    """Evaluate criteria over a grid of in-plane angles.

    Returns one :class:`SweepRow` per (alpha, criterion) pair, alpha-major,
    in deterministic order.
    """
    rows = []
    for alpha_deg in alpha_grid:
        scenario = Scenario(mu=mu, alpha_deg=float(alpha_deg), phi_deg=phi_deg, m=m, mode=mode)
        for criterion in criteria:
            result = evaluate(scenario, criterion)
            rows.append(
                SweepRow(
                    mu=mu,
                    alpha_deg=float(alpha_deg),
                    phi_deg=phi_deg,
                    m=m,
                    criterion=result.criterion,
                    order=result.order,
                    value=result.value,
                    steerable=result.steerable,
                )
            )
    return rows


SWEEP_CSV_HEADER = ["mu", "alpha_deg", "phi_deg", "m", "criterion", "order", "value", "steerable"]


def sweep_rows_to_csv(rows, stream) -> None:
    """Write sweep rows as CSV (stable column order, header first)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER)
    for row in rows:
        writer.writerow(
            [
                f"{row.mu:.12g}",
                f"{row.alpha_deg:.12g}",
                f"{row.phi_deg:.12g}",
                row.m,
                row.criterion,
                row.order,
                f"{row.value:.12g}",
                "true" if row.steerable else "false",
            ]
        )
