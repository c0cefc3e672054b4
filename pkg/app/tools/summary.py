"""
Tables of the ISE benchmark and their CSV / markdown files.

The mean table holds the mean and standard deviation of the ISE per (distribution,
estimator, n); the difference table holds the difference of each mean to the best mean of its
(distribution, n) row, with per-(estimator, n) totals.
"""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.tools.distributions import study_law
from app.tools.errors import DomainError, PartialSummaryError, ReportError
from app.tools.estimators import EstimatorKind
from app.tools.simulation import CurveRow, IseRecord

RECORD_COLUMNS = [
    "dist_index", "dist_name", "estimator_index", "estimator_name", "n", "replicate", "bandwidth", "ise", "flag",
]
SUMMARY_COLUMNS = ["dist_index", "estimator_index", "n", "mean_ise", "std_ise", "diff_to_best", "is_best"]
FLAGGED_COLUMNS = ["dist_index", "estimator_index", "n", "flagged"]
CURVE_COLUMNS = ["dist_index", "estimator_index", "n", "x", "estimate", "truth"]
SCALE = 1e4

PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# file helpers
# ---------------------------------------------------------------------------

def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as exc:
        raise ReportError(str(path), exc)
    return path


def _write_text(text: str, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(str(path), exc)
    return path


def _read_frame(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip", keep_default_na=False, na_values=[""])
    except (OSError, pd.errors.ParserError) as exc:
        raise ReportError(str(path), exc)


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

def records_frame(records: Iterable[IseRecord]) -> pd.DataFrame:
    """Records in (i, j, n, k) order with the fixed record columns."""
    rows = [
        {
            "dist_index": r.dist_index,
            "dist_name": study_law(r.dist_index).name,
            "estimator_index": int(r.estimator),
            "estimator_name": r.estimator.label,
            "n": r.n,
            "replicate": r.replicate,
            "bandwidth": np.nan if r.bandwidth is None else r.bandwidth,
            "ise": r.ise,
            "flag": r.flag,
        }
        for r in sorted(records, key=lambda r: r.key)
    ]
    return pd.DataFrame(rows, columns=RECORD_COLUMNS)


def write_records(records: Iterable[IseRecord], path: PathLike) -> Path:
    return _write_frame(records_frame(records), Path(path))


def read_records(path: PathLike) -> List[IseRecord]:
    frame = _read_frame(path)
    if list(frame.columns) != RECORD_COLUMNS:
        raise ReportError(str(path), ValueError(f"unexpected header {list(frame.columns)}"))
    out = []
    for row in frame.itertuples(index=False):
        flag = "" if isinstance(row.flag, float) else str(row.flag)
        bandwidth = None if pd.isna(row.bandwidth) else float(row.bandwidth)
        out.append(IseRecord(int(row.dist_index), EstimatorKind(int(row.estimator_index)), int(row.n),
                             int(row.replicate), float(row.ise), bandwidth, 0.0, flag))
    return out


# ---------------------------------------------------------------------------
# summary
# ---------------------------------------------------------------------------

@dataclass
class SummaryTable:
    """
    ``cells``: one row per (dist_index, estimator_index, n) with mean_ise,
    std_ise, diff_to_best, is_best, replicates and flagged.
    ``totals``: sum of diff_to_best per (estimator_index, n).
    """
    cells: pd.DataFrame
    totals: pd.DataFrame

    @property
    def estimators(self) -> List[int]:
        return sorted(self.cells["estimator_index"].unique().tolist())

    @property
    def sizes(self) -> List[int]:
        return sorted(self.cells["n"].unique().tolist())

    def summary_frame(self) -> pd.DataFrame:
        return self.cells[SUMMARY_COLUMNS].reset_index(drop=True)

    def flagged_frame(self) -> pd.DataFrame:
        return self.cells[FLAGGED_COLUMNS].reset_index(drop=True)

    def cell(self, dist_index: int, estimator: Union[int, EstimatorKind], n: int) -> pd.Series:
        c = self.cells
        hit = c[(c["dist_index"] == dist_index) & (c["estimator_index"] == int(estimator)) & (c["n"] == n)]
        if hit.empty:
            raise KeyError((dist_index, int(estimator), n))
        return hit.iloc[0]


def diff_to_best(cells: pd.DataFrame) -> pd.DataFrame:
    """Add diff_to_best and is_best; every tied row minimum is marked best."""
    out = cells.copy()
    best = out.groupby(["dist_index", "n"])["mean_ise"].transform("min")
    out["diff_to_best"] = out["mean_ise"] - best
    out["is_best"] = out["diff_to_best"] == 0.0
    return out


def _gaps(frame: pd.DataFrame, distributions, estimators, sizes, replicates: int) -> List[Tuple[int, int, int]]:
    counts = frame.groupby(["dist_index", "estimator_index", "n"])["replicate"].nunique()
    gaps = []
    for i in distributions:
        for j in estimators:
            for n in sizes:
                if counts.get((i, int(j), n), 0) < replicates:
                    gaps.append((i, int(j), n))
    return gaps


def summarize(records: Sequence[IseRecord], distributions: Optional[Sequence[int]] = None,
              estimators: Optional[Sequence[int]] = None, sizes: Optional[Sequence[int]] = None,
              replicates: Optional[int] = None) -> SummaryTable:
    """
    The mean and difference tables from ISE records.

    Flagged records are left out of the means and counted in ``flagged``; a
    cell whose records are all flagged has a NaN mean and never counts as best.

    Args:
        records: ISE records
        distributions, estimators, sizes, replicates: Expected grid; when
            given, any cell short of ``replicates`` records raises
            PartialSummaryError

    Returns:
        SummaryTable
    """
    frame = records_frame(records)
    if frame.empty:
        raise PartialSummaryError([])
    if replicates is not None:
        gaps = _gaps(frame,
                     distributions or sorted(frame["dist_index"].unique()),
                     estimators or sorted(frame["estimator_index"].unique()),
                     sizes or sorted(frame["n"].unique()),
                     replicates)
        if gaps:
            raise PartialSummaryError(gaps)
    keys = ["dist_index", "estimator_index", "n"]
    frame["flagged"] = frame["flag"] != ""
    usable = frame[~frame["flagged"]]
    stats = usable.groupby(keys)["ise"].agg(mean_ise="mean", std_ise=lambda s: s.std(ddof=1), replicates="count")
    flagged = frame.groupby(keys)["flagged"].sum().astype(int)
    cells = flagged.to_frame().join(stats, how="left").reset_index()
    cells["replicates"] = cells["replicates"].fillna(0).astype(int)
    cells = diff_to_best(cells)
    cells = cells.sort_values(keys).reset_index(drop=True)
    totals = cells.groupby(["estimator_index", "n"])["diff_to_best"].sum(min_count=1).rename("total").reset_index()
    return SummaryTable(cells=cells[SUMMARY_COLUMNS + ["replicates", "flagged"]], totals=totals)


def is_best(table: SummaryTable, dist_index: int, estimator: Union[int, EstimatorKind], n: int) -> bool:
    return bool(table.cell(dist_index, estimator, n)["is_best"])


# ---------------------------------------------------------------------------
# soft checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderingCheck:
    check: str
    dist_index: int
    n: int
    observed: float
    threshold: float
    passed: bool


def _standard_error(row: dict) -> float:
    if row["replicates"] < 2 or pd.isna(row["std_ise"]):
        return math.nan
    return float(row["std_ise"]) / math.sqrt(row["replicates"])


def ordering_checks(table: SummaryTable, pairing_tolerance: float = 0.02) -> List[OrderingCheck]:
    """
    Qualitative findings checked per (distribution, n).

    * ``edf_not_better``: EDF mean >= best asymmetric-kernel mean - 3 combined SEs.
    * ``ln_bs_pairing``: |mean(LN) - mean(BS)| / mean(LN) <= ``pairing_tolerance``.
    """
    checks = []
    cells = table.cells.dropna(subset=["mean_ise"])
    for (i, n), row in cells.groupby(["dist_index", "n"]):
        by_kind = {EstimatorKind(int(j)): r for j, r in zip(row["estimator_index"], row.to_dict("records"))}
        asym = [r for k, r in by_kind.items() if k.is_asymmetric]
        if EstimatorKind.EDF in by_kind and asym:
            edf = by_kind[EstimatorKind.EDF]
            best = min(asym, key=lambda r: r["mean_ise"])
            se = math.hypot(_standard_error(edf), _standard_error(best))
            margin = edf["mean_ise"] - best["mean_ise"]
            checks.append(OrderingCheck("edf_not_better", int(i), int(n), margin, -3.0 * se,
                                        bool(math.isnan(se) or margin >= -3.0 * se)))
        if EstimatorKind.LN in by_kind and EstimatorKind.BS in by_kind:
            ln, bs = by_kind[EstimatorKind.LN]["mean_ise"], by_kind[EstimatorKind.BS]["mean_ise"]
            ratio = abs(ln - bs) / ln if ln > 0 else math.inf
            checks.append(OrderingCheck("ln_bs_pairing", int(i), int(n), ratio, pairing_tolerance,
                                        ratio <= pairing_tolerance))
    return checks


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def scaled(value: float) -> str:
    """Value times 10^4 with two decimals, as printed in the tables."""
    return "" if value is None or pd.isna(value) else f"{value * SCALE:.2f}"


def _pivot(table: SummaryTable, column: str, n: int) -> pd.DataFrame:
    sub = table.cells[table.cells["n"] == n]
    return sub.pivot(index="dist_index", columns="estimator_index", values=column)


def markdown_tables(table: SummaryTable) -> str:
    """Mean table (mean, std, row-best marker) and difference table (differences, totals) for every n, ISE x 10^4."""
    labels = {int(k): k.label for k in EstimatorKind}
    parts = []
    for n in table.sizes:
        sub = table.cells[table.cells["n"] == n].copy()
        sub.insert(0, "distribution", [study_law(int(i)).name for i in sub["dist_index"]])
        sub["estimator"] = [labels[int(j)] for j in sub["estimator_index"]]
        t1 = pd.DataFrame({
            "distribution": sub["distribution"],
            "estimator": sub["estimator"],
            "mean": [scaled(v) for v in sub["mean_ise"]],
            "std": [scaled(v) for v in sub["std_ise"]],
            "best": ["*" if b else "" for b in sub["is_best"]],
            "flagged": sub["flagged"].astype(int),
        })
        parts.append(f"## Mean and standard deviation of ISE x 10^4, n = {n}\n")
        parts.append(t1.to_markdown(index=False))
        diffs = _pivot(table, "diff_to_best", n)
        t2 = diffs.apply(lambda col: col.map(scaled))
        t2.index = [study_law(int(i)).name for i in diffs.index]
        totals = table.totals[table.totals["n"] == n].set_index("estimator_index")["total"]
        t2.loc["Total"] = [scaled(totals.get(j)) for j in diffs.columns]
        t2.columns = [labels[int(j)] for j in diffs.columns]
        parts.append(f"\n\n## Difference to the lowest mean ISE x 10^4, n = {n}\n")
        parts.append(t2.to_markdown())
        parts.append("\n\n")
    return "\n".join(parts)


def emit(table: SummaryTable, formats: Union[str, Sequence[str]], out_dir: PathLike) -> List[Path]:
    """
    Write the summary files.

    ``csv`` writes summary.csv, totals.csv and flagged.csv; ``markdown``
    writes tables.md. Nothing is written when the table has no estimators.
    """
    if table.cells.empty or not table.estimators:
        raise DomainError("the summary has no estimators; nothing to emit")
    formats = [formats] if isinstance(formats, str) else list(formats)
    unknown = [f for f in formats if f not in ("csv", "markdown")]
    if unknown:
        raise DomainError(f"unknown output format(s) {unknown}")
    out = Path(out_dir)
    written = []
    if "csv" in formats:
        written.append(_write_frame(table.summary_frame(), out / "summary.csv"))
        written.append(_write_frame(table.totals, out / "totals.csv"))
        written.append(_write_frame(table.flagged_frame(), out / "flagged.csv"))
    if "markdown" in formats:
        written.append(_write_text(markdown_tables(table), out / "tables.md"))
    return written


def read_summary(path: PathLike) -> pd.DataFrame:
    frame = _read_frame(path)
    if list(frame.columns) != SUMMARY_COLUMNS:
        raise ReportError(str(path), ValueError(f"unexpected header {list(frame.columns)}"))
    frame["is_best"] = frame["is_best"].astype(bool)
    return frame


def emit_curves(rows: Iterable[CurveRow], out_dir: PathLike) -> Path:
    frame = pd.DataFrame(
        [(r.dist_index, int(r.estimator), r.n, r.x, r.estimate, r.truth) for r in rows], columns=CURVE_COLUMNS
    )
    frame = frame.sort_values(["dist_index", "n", "estimator_index", "x"], kind="stable")
    return _write_frame(frame, Path(out_dir) / "curves.csv")


def write_rows(rows: Iterable[Sequence], columns: Sequence[str], path: PathLike) -> Path:
    """Plain CSV table, used for the verification report."""
    return _write_frame(pd.DataFrame(list(rows), columns=list(columns)), Path(path))
