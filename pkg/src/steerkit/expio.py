"""Coincidence-count ingestion and criterion evaluation with error budgets.

Counts file format (CSV, header required)::

    setting,a,b,counts[,ax,ay,az,bx,by,bz]

``setting`` numbers the measurement settings contiguously from 1; ``a`` and
``b`` are the +1/-1 outcomes; ``counts`` is a non-negative integer.  The six
optional columns attach the measurement directions of the setting (required
for the determinant criterion and for systematic-error estimation) and must
be identical on all four rows of a setting.

Error model: the statistical error is a parametric Poisson bootstrap over the
observed counts; the systematic error re-evaluates each criterion with Bob's
measurement directions perturbed by Gaussian angular jitter, using a Werner
model with the visibility fitted from the observed correlations.  The total
is the quadrature sum of the two.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from .criteria import Criterion, SteeringResult, db_steering, renyi_steering, tsallis_steering
from .qcore import JointTable


class CountsFormatError(ValueError):
    """Raised when a counts file cannot be parsed or validated."""


@dataclass(frozen=True)
class CountsRecord:
    """Coincidence counts for one measurement setting."""

    setting: int
    counts: np.ndarray  # 2x2 ints, rows Alice outcome +1/-1, cols Bob
    alice_vec: np.ndarray | None = None
    bob_vec: np.ndarray | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (2, 2):
            raise ValueError(f"counts must be 2x2, got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        total = int(counts.sum())
        if total < 1:
            raise ValueError(f"setting {self.setting} has zero total counts")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        for name in ("alice_vec", "bob_vec"):
            vec = getattr(self, name)
            if vec is not None:
                object.__setattr__(self, name, qcore.as_unit_vector(vec))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ErrorBudget:
    """Statistical and systematic one-sigma errors; total in quadrature."""

    stat: float
    sys: float

    @property
    def total(self) -> float:
        return math.hypot(self.stat, self.sys)


_OUTCOME_INDEX = {1: 0, -1: 1}
_VECTOR_COLUMNS = ("ax", "ay", "az", "bx", "by", "bz")


def _parse_outcome(text: str, line_no: int, column: str) -> int:
    text = text.strip()
    if text in ("+1", "1"):
        return 1
    if text == "-1":
        return -1
    raise CountsFormatError(f"line {line_no}: {column} must be +1 or -1, got {text!r}")


def load_counts(path) -> list[CountsRecord]:
    """Parse and validate a counts CSV; see the module docstring for the format."""
    with open(path, newline="") as stream:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise CountsFormatError(f"{path}: empty counts file") from None
        header = [h.strip() for h in header]
        if header[:4] != ["setting", "a", "b", "counts"]:
            raise CountsFormatError(
                f"{path}: header must start with setting,a,b,counts, got {','.join(header)}"
            )
        has_vectors = len(header) > 4
        if has_vectors and tuple(header[4:]) != _VECTOR_COLUMNS:
            raise CountsFormatError(
                f"{path}: optional vector columns must be {','.join(_VECTOR_COLUMNS)}"
            )

        cells: dict[int, np.ndarray] = {}
        seen: set[tuple[int, int, int]] = set()
        vectors: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            expected = 10 if has_vectors else 4
            if len(row) != expected:
                raise CountsFormatError(
                    f"line {line_no}: expected {expected} fields, got {len(row)}"
                )
            try:
                setting = int(row[0])
            except ValueError:
                raise CountsFormatError(
                    f"line {line_no}: setting must be an integer, got {row[0]!r}"
                ) from None
            if setting < 1:
                raise CountsFormatError(f"line {line_no}: settings are numbered from 1")
            a = _parse_outcome(row[1], line_no, "a")
            b = _parse_outcome(row[2], line_no, "b")
            try:
                count = int(row[3])
            except ValueError:
                raise CountsFormatError(
                    f"line {line_no}: counts must be an integer, got {row[3]!r}"
                ) from None
            if count < 0:
                raise CountsFormatError(f"line {line_no}: negative counts ({count})")
            key = (setting, a, b)
            if key in seen:
                raise CountsFormatError(
                    f"line {line_no}: duplicate entry for setting {setting}, outcomes ({a}, {b})"
                )
            seen.add(key)
            cells.setdefault(setting, np.zeros((2, 2), dtype=np.int64))
            cells[setting][_OUTCOME_INDEX[a], _OUTCOME_INDEX[b]] = count
            if has_vectors:
                try:
                    values = [float(c) for c in row[4:]]
                except ValueError:
                    raise CountsFormatError(
                        f"line {line_no}: vector components must be numbers"
                    ) from None
                pair = (np.array(values[:3]), np.array(values[3:]))
                if setting in vectors:
                    prev = vectors[setting]
                    if not (np.allclose(prev[0], pair[0]) and np.allclose(prev[1], pair[1])):
                        raise CountsFormatError(
                            f"line {line_no}: vectors differ within setting {setting}"
                        )
                else:
                    vectors[setting] = pair

    if not cells:
        raise CountsFormatError(f"{path}: no count rows found")
    settings = sorted(cells)
    if settings != list(range(1, len(settings) + 1)):
        raise CountsFormatError(
            f"{path}: settings must be contiguous from 1, got {settings}"
        )
    missing = [
        (m, a, b)
        for m in settings
        for a in (1, -1)
        for b in (1, -1)
        if (m, a, b) not in seen
    ]
    if missing:
        raise CountsFormatError(f"{path}: missing outcome rows {missing}")

    records = []
    for m in settings:
        alice_vec, bob_vec = vectors.get(m, (None, None))
        try:
            records.append(
                CountsRecord(m, cells[m], alice_vec=alice_vec, bob_vec=bob_vec)
            )
        except ValueError as exc:
            raise CountsFormatError(f"{path}: {exc}") from None
    return records


def write_counts(records, path) -> None:
    """Write counts records in the CSV format accepted by :func:`load_counts`."""
    records = list(records)
    has_vectors = any(rec.alice_vec is not None for rec in records)
    with open(path, "w", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        header = ["setting", "a", "b", "counts"]
        if has_vectors:
            header += list(_VECTOR_COLUMNS)
        writer.writerow(header)
        for rec in records:
            for a in (1, -1):
                for b in (1, -1):
                    row = [rec.setting, f"{a:+d}", f"{b:+d}",
                           int(rec.counts[_OUTCOME_INDEX[a], _OUTCOME_INDEX[b]])]
                    if has_vectors:
                        if rec.alice_vec is None or rec.bob_vec is None:
                            raise ValueError(
                                f"setting {rec.setting} lacks vectors but others have them"
                            )
                        row += [f"{c:.17g}" for c in rec.alice_vec]
                        row += [f"{c:.17g}" for c in rec.bob_vec]
                    writer.writerow(row)


def counts_to_table(record: CountsRecord) -> JointTable:
    """Maximum-likelihood joint table p = n / sum(n)."""
    return JointTable(record.counts / record.total, setting=record.setting)


def synthesize_counts(mu, alice, bob, total_per_setting, seed=None) -> list[CountsRecord]:
    """Generate counts from a Werner scenario (the test oracle for this module).

    With ``seed=None`` the expected counts are rounded deterministically;
    with an integer seed each cell is an independent Poisson draw with the
    expected count as its mean.
    """
    rng = None if seed is None else np.random.default_rng(seed)
    records = []
    for i, (u, v) in enumerate(zip(alice, bob)):
        table = qcore.joint_table_closed(mu, u, v)
        expected = table.probs * float(total_per_setting)
        counts = np.rint(expected).astype(np.int64) if rng is None else rng.poisson(expected)
        records.append(CountsRecord(i + 1, counts, alice_vec=u, bob_vec=v))
    return records


# ---------------------------------------------------------------------------
# evaluation with error budgets
# ---------------------------------------------------------------------------


def fit_visibility(records) -> float:
    """Least-squares Werner visibility from the observed correlations.

    Minimises sum_m (E_m + mu u_m.v_m)^2 over mu, using the per-setting
    correlations E_m and the recorded measurement directions.
    """
    num = 0.0
    den = 0.0
    for rec in records:
        if rec.alice_vec is None or rec.bob_vec is None:
            raise ValueError(f"setting {rec.setting} carries no measurement vectors")
        overlap = float(np.dot(rec.alice_vec, rec.bob_vec))
        corr = counts_to_table(rec).correlation
        num += -corr * overlap
        den += overlap ** 2
    if den == 0.0:
        raise ValueError("all measurement overlaps vanish; visibility is unidentifiable")
    return num / den


def _evaluate_criterion(criterion: Criterion, tables, records, mu_fit) -> SteeringResult:
    if criterion.kind == "db":
        alice = [rec.alice_vec for rec in records]
        bob = [rec.bob_vec for rec in records]
        return db_steering(alice, bob, mu_fit, len(records))
    if criterion.kind == "shannon":
        return tsallis_steering(tables, 1.0)
    if criterion.kind == "tsallis":
        return tsallis_steering(tables, criterion.q)
    return renyi_steering(tables, criterion.r, criterion.s)


def _check_requirements(criterion: Criterion, records) -> None:
    m = len(records)
    if criterion.kind == "renyi" and m != 2:
        raise ValueError(f"the Renyi criterion needs exactly 2 settings, got {m}")
    if criterion.kind in ("shannon", "tsallis") and m not in (2, 3):
        raise ValueError(f"entropic criteria need 2 or 3 settings, got {m}")
    if criterion.kind == "db":
        if m not in (2, 3):
            raise ValueError(f"the determinant criterion needs 2 or 3 settings, got {m}")
        if any(rec.alice_vec is None or rec.bob_vec is None for rec in records):
            raise ValueError("the determinant criterion needs measurement vectors on every setting")


def _jittered_vector(vec, sigma_rad, rng) -> np.ndarray:
    # Rotate vec by a N(0, sigma) angle about a random axis orthogonal to it.
    g = rng.standard_normal(3)
    axis = g - np.dot(g, vec) * vec
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        return vec
    axis /= norm
    angle = rng.normal(0.0, sigma_rad)
    return math.cos(angle) * vec + math.sin(angle) * np.cross(axis, vec)


def evaluate_with_errors(
    records,
    criteria,
    bootstrap: int = 1000,
    jitter_deg: float = 0.1,
    seed: int = 0,
):
    """Point estimates plus error budgets for a list of criteria.

    Returns ``[(SteeringResult, ErrorBudget), ...]`` in the order given.
    ``bootstrap`` Poisson replicates feed the statistical error; the same
    number of jittered-vector replicates feeds the systematic error (skipped
    when ``jitter_deg`` is 0).  Deterministic for a given seed.
    """
    records = sorted(records, key=lambda rec: rec.setting)
    criteria = list(criteria)
    needs_fit = any(c.kind == "db" for c in criteria) or jitter_deg > 0.0
    for criterion in criteria:
        _check_requirements(criterion, records)
    if needs_fit and any(rec.alice_vec is None or rec.bob_vec is None for rec in records):
        raise ValueError(
            "systematic jitter and the determinant criterion need measurement vectors; "
            "attach them to the counts file or the records"
        )

    tables = [counts_to_table(rec) for rec in records]
    mu_fit = fit_visibility(records) if needs_fit else None
    if mu_fit is not None:
        mu_fit = min(max(mu_fit, 0.0), 1.0)
    point = [_evaluate_criterion(c, tables, records, mu_fit) for c in criteria]

    rng = np.random.default_rng(seed)
    stat_errors = [0.0] * len(criteria)
    sys_errors = [0.0] * len(criteria)

    if bootstrap > 0:
        raw = np.stack([rec.counts for rec in records])  # (m, 2, 2)
        draws = rng.poisson(lam=raw, size=(bootstrap,) + raw.shape)
        samples = [[] for _ in criteria]
        for rep in draws:
            if np.any(rep.sum(axis=(1, 2)) == 0):
                continue  # unnormalisable replicate; only possible at tiny counts
            rep_records = [
                CountsRecord(rec.setting, cells, rec.alice_vec, rec.bob_vec)
                for rec, cells in zip(records, rep)
            ]
            rep_tables = [counts_to_table(r) for r in rep_records]
            rep_mu = fit_visibility(rep_records) if needs_fit else None
            if rep_mu is not None:
                rep_mu = min(max(rep_mu, 0.0), 1.0)
            for k, criterion in enumerate(criteria):
                samples[k].append(
                    _evaluate_criterion(criterion, rep_tables, rep_records, rep_mu).value
                )
        stat_errors = [
            float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0 for vals in samples
        ]

    if jitter_deg > 0.0 and bootstrap > 0:
        sigma = math.radians(jitter_deg)
        samples = [[] for _ in criteria]
        alice = [rec.alice_vec for rec in records]
        for _ in range(bootstrap):
            jittered = [_jittered_vector(rec.bob_vec, sigma, rng) for rec in records]
            model_tables = [
                qcore.joint_table_closed(mu_fit, u, v, setting=i + 1)
                for i, (u, v) in enumerate(zip(alice, jittered))
            ]
            model_records = [
                CountsRecord(rec.setting, rec.counts, rec.alice_vec, v)
                for rec, v in zip(records, jittered)
            ]
            for k, criterion in enumerate(criteria):
                samples[k].append(
                    _evaluate_criterion(criterion, model_tables, model_records, mu_fit).value
                )
        sys_errors = [
            float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0 for vals in samples
        ]

    return [
        (res, ErrorBudget(stat=stat, sys=sys_err))
        for res, stat, sys_err in zip(point, stat_errors, sys_errors)
    ]


def results_to_json_records(evaluated) -> list[dict]:
    """JSON-serialisable records {criterion, order, value, stat_err, sys_err, ...}."""
    out = []
    for result, budget in evaluated:
        out.append(
            {
                "criterion": result.criterion,
                "order": result.order,
                "value": result.value,
                "stat_err": budget.stat,
                "sys_err": budget.sys,
                "total_err": budget.total,
                "steerable": result.steerable,
            }
        )
    return out
