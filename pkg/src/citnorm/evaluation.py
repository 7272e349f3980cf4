"""How well a normalization equalizes citation distributions.

A normalization has corrected for field and age differences exactly when
every (publication year, field) combination shows the same score
distribution. To measure how far a score column is from that ideal:

1. expand publications to one row per (publication, field) under an
   evaluation classification (multi-assignment systems repeat rows);
2. within each (year, field) cell, rank rows by score ascending (ties by
   publication id) and assign rank k of a size-s cell to quantile
   interval q = ceil(k * Q / s), with Q intervals;
3. per interval q, compute the Theil inequality of the cell means
   mu(q, year, field) weighted by the cell-interval populations; a value
   of 0 means every field-year looks alike at that position of the
   distribution.

The same grouping yields an exact three-part split of the overall Theil
inequality of the expanded rows,

    I = W + S + IDCP,

where W is the weighted within-(cell, interval) inequality, S the
inequality across interval means, and IDCP the weighted average of the
per-interval indices: the inequality attributable to field and year
differences in citation practices. Natural logarithms throughout;
0 log 0 = 0; intervals with zero mean have undefined inequality and
carry zero weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classification import ClassificationSystem
from .normalization import SCORE_COLUMNS, ScoreTable

ADDITIVITY_TOL = 1e-9


class UndefinedInequalityError(ValueError):
    """Raised when an inequality measure is requested for zero-mean data."""


def theil(values, weights=None) -> float | None:
    """Theil index of non-negative values with optional counts.

    Returns 0.0 exactly when all values are equal, None when the weighted
    mean is 0 (index undefined). Natural log; zero values contribute 0.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return None
    if np.any(v < 0):
        raise ValueError("theil requires non-negative values")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != v.shape:
        raise ValueError("weights must match values")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    keep = w > 0
    v, w = v[keep], w[keep]
    if v.size == 0:
        return None
    if np.all(v == v[0]):
        return 0.0 if v[0] > 0 else None
    n = w.sum()
    mu = float((w * v).sum() / n)
    if mu == 0.0:
        return None
    pos = v > 0
    ratio = v[pos] / mu
    return float((w[pos] * ratio * np.log(ratio)).sum() / n)


@dataclass
class CellStats:
    """Population and mean score per (year, field, quantile interval)."""

    column: str
    quantiles: int
    entries: dict[tuple, tuple[int, float]]  # (year, field, q) -> (n, mu)
    skipped_unassigned: int = 0
    skipped_undefined: int = 0

    def by_interval(self) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        """Per interval q: (counts, means) over the (year, field) cells."""
        ordered = sorted(self.entries.items(), key=lambda kv: (kv[0][2], kv[0][0], str(kv[0][1])))
        grouped: dict[int, tuple[list, list]] = {}
        for (year, field_id, q), (n, mu) in ordered:
            grouped.setdefault(q, ([], []))[0].append(n)
            grouped[q][1].append(mu)
        return {
            q: (np.array(ns, dtype=float), np.array(mus, dtype=float))
            for q, (ns, mus) in grouped.items()
        }


@dataclass
class QuantileAggregate:
    """Per-interval population, mean, and inequality (None = undefined)."""

    column: str
    quantiles: int
    n: np.ndarray
    mu: np.ndarray
    inequality: list[float | None]


@dataclass
class DecompositionResult:
    column: str
    quantiles: int
    system: str
    n: int
    mu: float
    total: float
    within: float
    between_intervals: float
    idcp: float

    @property
    def residual(self) -> float:
        return self.total - (self.within + self.between_intervals + self.idcp)


class _Expansion:
    """Rows (publication x field) of a score table under a system."""

    def __init__(self, table: ScoreTable, system: ClassificationSystem,
                 years: tuple[int, int]):
        lo, hi = years
        rows_idx: list[int] = []
        rows_field: list = []
        skipped = 0
        for i in range(len(table)):
            pid = int(table.pub_ids[i])
            year = int(table.years[i])
            if not lo <= year <= hi:
                continue
            fields_ = system.assignment.get(pid)
            if not fields_:
                skipped += 1
                continue
            for f in sorted(fields_, key=str):
                rows_idx.append(i)
                rows_field.append(f)
        self.table_idx = np.array(rows_idx, dtype=np.int64)
        self.years = table.years[self.table_idx] if rows_idx else np.array([], dtype=np.int64)
        field_ids = sorted(set(rows_field), key=str)
        self.field_of_code = field_ids
        code = {f: i for i, f in enumerate(field_ids)}
        self.field_code = np.array([code[f] for f in rows_field], dtype=np.int64)
        self.skipped_unassigned = skipped


def _ranked_groups(exp: _Expansion, table: ScoreTable, column: str, quantiles: int):
    """Sort valid rows by (year, field, score, pub id); return per-row
    cell codes, interval assignment, and scores."""
    scores = table.column(column).astype(float)[exp.table_idx]
    valid = np.isfinite(scores)
    years = exp.years[valid]
    fields_ = exp.field_code[valid]
    scores = scores[valid]
    pub_ids = table.pub_ids[exp.table_idx[valid]]
    if len(scores) == 0:
        return None
    n_fields = int(fields_.max()) + 1 if len(fields_) else 1
    cell = (years - years.min()) * n_fields + fields_
    order = np.lexsort((pub_ids, scores, cell))
    cell = cell[order]
    scores = scores[order]
    # rank within each cell, 1-based; cells are contiguous after the sort
    boundaries = np.flatnonzero(np.diff(cell)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [len(cell)]))
    rank = np.arange(len(cell), dtype=np.int64)
    sizes = np.zeros(len(cell), dtype=np.int64)
    for s, e in zip(starts, ends):
        rank[s:e] -= s - 1
        sizes[s:e] = e - s
    q = (rank * quantiles + sizes - 1) // sizes  # ceil(k*Q/s)
    return {
        "cell": cell,
        "q": q,
        "scores": scores,
        "years": years[order],
        "fields": fields_[order],
        "n_invalid": int((~valid).sum()),
    }


def assign_quantiles(
    table: ScoreTable,
    column: str,
    system: ClassificationSystem,
    years: tuple[int, int],
    quantiles: int = 100,
) -> CellStats:
    """Quantile-interval statistics for one score column.

    Rows with an undefined score (NaN) are excluded from that column's
    evaluation; cells smaller than the interval count leave intervals
    empty.
    """
    if quantiles < 1:
        raise ValueError("quantiles must be >= 1")
    exp = _Expansion(table, system, years)
    ranked = _ranked_groups(exp, table, column, quantiles)
    entries: dict[tuple, tuple[int, float]] = {}
    if ranked is not None:
        key = ranked["cell"] * (quantiles + 1) + ranked["q"]
        order = np.argsort(key, kind="stable")
        key_sorted = key[order]
        scores = ranked["scores"][order]
        years_s = ranked["years"][order]
        fields_s = ranked["fields"][order]
        qs = ranked["q"][order]
        boundaries = np.flatnonzero(np.diff(key_sorted)) + 1
        starts = np.concatenate(([0], boundaries))
        ends = np.concatenate((boundaries, [len(key_sorted)]))
        for s, e in zip(starts, ends):
            entry_key = (int(years_s[s]), exp.field_of_code[int(fields_s[s])], int(qs[s]))
            entries[entry_key] = (int(e - s), float(scores[s:e].mean()))
    return CellStats(
        column=column,
        quantiles=quantiles,
        entries=entries,
        skipped_unassigned=exp.skipped_unassigned,
        skipped_undefined=ranked["n_invalid"] if ranked else 0,
    )


def inequality_curve(cells: CellStats) -> QuantileAggregate:
    """Per-interval Theil inequality over the field-year cell means."""
    by_q = cells.by_interval()
    quantiles = cells.quantiles
    n = np.zeros(quantiles, dtype=np.int64)
    mu = np.full(quantiles, np.nan)
    inequality: list[float | None] = [None] * quantiles
    for q, (ns, mus) in by_q.items():
        total = ns.sum()
        n[q - 1] = int(total)
        if total > 0:
            mu[q - 1] = float((ns * mus).sum() / total)
        inequality[q - 1] = theil(mus, ns)
    return QuantileAggregate(column=cells.column, quantiles=quantiles, n=n, mu=mu,
                             inequality=inequality)


def decompose(
    table: ScoreTable,
    column: str,
    system: ClassificationSystem,
    years: tuple[int, int],
    quantiles: int = 100,
) -> DecompositionResult:
    """Split the overall Theil inequality into within / between / IDCP.

    The three parts are computed independently of the overall index and
    must rebuild it exactly; a residual above 1e-9 raises, since it would
    mean the grouping logic is broken, not the data.
    """
    exp = _Expansion(table, system, years)
    ranked = _ranked_groups(exp, table, column, quantiles)
    if ranked is None:
        raise UndefinedInequalityError(f"no defined {column} scores to decompose")
    scores = ranked["scores"]
    n = len(scores)
    mu = float(scores.sum() / n)
    if mu == 0.0:
        raise UndefinedInequalityError(f"column {column} has zero mean; "
                                       "inequality undefined")

    pos = scores > 0
    ratio = scores[pos] / mu
    total = float((ratio * np.log(ratio)).sum() / n)

    # group rows by (cell, interval)
    group_key = ranked["cell"] * (quantiles + 1) + ranked["q"]
    uniq, inverse = np.unique(group_key, return_inverse=True)
    g_n = np.bincount(inverse, minlength=len(uniq)).astype(float)
    g_sum = np.bincount(inverse, weights=scores, minlength=len(uniq))
    g_mu = g_sum / g_n

    # within component: weighted Theil inside each group
    w_row = np.zeros(n)
    nz = g_mu[inverse] > 0
    rr = np.zeros(n)
    rr[nz] = scores[nz] / g_mu[inverse][nz]
    pos_rows = rr > 0
    w_row[pos_rows] = rr[pos_rows] * np.log(rr[pos_rows])
    t_g = np.bincount(inverse, weights=w_row, minlength=len(uniq)) / g_n
    within = float((g_n * g_mu * t_g).sum() / (n * mu))

    # interval-level aggregates
    g_q = uniq % (quantiles + 1)
    q_n = np.bincount(g_q, weights=g_n, minlength=quantiles + 1)
    q_sum = np.bincount(g_q, weights=g_n * g_mu, minlength=quantiles + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        q_mu = np.where(q_n > 0, q_sum / np.maximum(q_n, 1), 0.0)

    # IDCP: weighted per-interval Theil of the group means
    i_q = np.zeros(quantiles + 1)
    for q in range(1, quantiles + 1):
        sel = g_q == q
        if not sel.any() or q_mu[q] == 0.0:
            continue
        m = g_mu[sel]
        w = g_n[sel]
        p = m > 0
        r = m[p] / q_mu[q]
        i_q[q] = float((w[p] * r * np.log(r)).sum() / q_n[q])
    idcp = float((q_n * q_mu * i_q).sum() / (n * mu))

    # between-interval component
    qp = q_mu > 0
    between = float((q_n[qp] * q_mu[qp] * np.log(q_mu[qp] / mu)).sum() / (n * mu))

    result = DecompositionResult(
        column=column, quantiles=quantiles, system=system.name,
        n=n, mu=mu, total=total, within=within,
        between_intervals=between, idcp=idcp,
    )
    if abs(result.residual) > ADDITIVITY_TOL:
        raise AssertionError(
            f"Theil decomposition lost additivity: residual {result.residual!r}"
        )
    return result


@dataclass
class YearlyMeans:
    """Mean score per publication year and column, expansion-aware."""

    years: list[int]
    # column -> year -> (row count, mean); mean is nan for empty groups
    means: dict[str, dict[int, tuple[int, float]]]

    def series(self, column: str) -> list[float]:
        return [self.means[column][y][1] for y in self.years]


def yearly_means(
    table: ScoreTable,
    years: tuple[int, int],
    system: ClassificationSystem | None = None,
) -> YearlyMeans:
    """Average of every score column per publication year.

    With a classification system, rows expand to one per (publication,
    field) first, matching the expansion used everywhere else; undefined
    scores are excluded column-wise.
    """
    lo, hi = years
    if system is not None:
        exp = _Expansion(table, system, years)
        idx = exp.table_idx
    else:
        idx = np.flatnonzero((table.years >= lo) & (table.years <= hi))
    year_list = list(range(lo, hi + 1))
    out: dict[str, dict[int, tuple[int, float]]] = {}
    row_years = table.years[idx]
    for column in SCORE_COLUMNS:
        scores = table.column(column).astype(float)[idx]
        valid = np.isfinite(scores)
        col: dict[int, tuple[int, float]] = {}
        for y in year_list:
            sel = valid & (row_years == y)
            cnt = int(sel.sum())
            col[y] = (cnt, float(scores[sel].mean()) if cnt else float("nan"))
        out[column] = col
    return YearlyMeans(years=year_list, means=out)


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def write_curve_csv(curves: dict[str, QuantileAggregate], path) -> None:
    """Long-format per-interval curve; log10 column mirrors the usual
    log-scale inequality axis (empty when undefined or zero)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("score,q,n,mu,i_q,log10_i\n")
        for column in SCORE_COLUMNS:
            curve = curves.get(column)
            if curve is None:
                continue
            for q in range(1, curve.quantiles + 1):
                i_q = curve.inequality[q - 1]
                log_i = math.log10(i_q) if (i_q is not None and i_q > 0) else None
                fh.write(
                    f"{column},{q},{int(curve.n[q - 1])},{_fmt(float(curve.mu[q - 1]))},"
                    f"{_fmt(i_q)},{_fmt(log_i)}\n"
                )


def write_decomposition_csv(results: dict[str, DecompositionResult], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("score,n,mu,W,S,IDCP,I\n")
        for column in SCORE_COLUMNS:
            r = results.get(column)
            if r is None:
                continue
            fh.write(
                f"{column},{r.n},{_fmt(r.mu)},{_fmt(r.within)},"
                f"{_fmt(r.between_intervals)},{_fmt(r.idcp)},{_fmt(r.total)}\n"
            )


def write_yearly_csv(ym: YearlyMeans, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("score,year,n,mean\n")
        for column in SCORE_COLUMNS:
            for year in ym.years:
                cnt, mean = ym.means[column][year]
                fh.write(f"{column},{year},{cnt},{_fmt(mean)}\n")
