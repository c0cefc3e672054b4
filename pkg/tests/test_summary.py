import math

import pandas as pd
import pytest

from app.tools.errors import DomainError, PartialSummaryError, ReportError
from app.tools.estimators import EstimatorKind
from app.tools.simulation import IseRecord
from app.tools.summary import (
    SUMMARY_COLUMNS,
    SummaryTable,
    emit,
    is_best,
    markdown_tables,
    ordering_checks,
    read_records,
    read_summary,
    scaled,
    summarize,
    write_records,
)

GAM, LN, BS, EDF = EstimatorKind.GAM, EstimatorKind.LN, EstimatorKind.BS, EstimatorKind.EDF


def _records(dist, kind, n, values, flags=None):
    flags = flags or [""] * len(values)
    return [IseRecord(dist, kind, n, k, v, None if kind == EDF else 0.1, 0.0, f)
            for k, (v, f) in enumerate(zip(values, flags))]


@pytest.fixture
def toy():
    return _records(1, GAM, 10, [1.0, 2.0, 3.0]) + _records(1, EDF, 10, [4.0, 4.0, 4.0])


def test_mean_std_and_diff_to_best(toy):
    table = summarize(toy)
    gam = table.cell(1, GAM, 10)
    assert gam["mean_ise"] == pytest.approx(2.0)
    assert gam["std_ise"] == pytest.approx(1.0)
    assert gam["diff_to_best"] == 0.0 and gam["is_best"]
    edf = table.cell(1, EDF, 10)
    assert edf["std_ise"] == 0.0
    assert edf["diff_to_best"] == pytest.approx(2.0)
    assert not is_best(table, 1, EDF, 10)


def test_ties_are_all_best():
    table = summarize(_records(2, GAM, 10, [1.0, 3.0]) + _records(2, LN, 10, [2.0, 2.0]))
    assert is_best(table, 2, GAM, 10) and is_best(table, 2, LN, 10)


def test_single_estimator_has_zero_differences():
    table = summarize(_records(1, GAM, 10, [1.0, 2.0]) + _records(3, GAM, 10, [5.0, 6.0]))
    assert (table.cells["diff_to_best"] == 0.0).all()
    assert table.totals["total"].tolist() == [0.0]


def test_totals_are_column_sums():
    records = (_records(1, GAM, 10, [1.0]) + _records(1, EDF, 10, [3.0])
               + _records(2, GAM, 10, [5.0]) + _records(2, EDF, 10, [4.0]))
    table = summarize(records)
    totals = table.totals.set_index("estimator_index")["total"]
    assert totals[int(GAM)] == pytest.approx(1.0)
    assert totals[int(EDF)] == pytest.approx(2.0)


def test_flagged_records_are_excluded_and_counted():
    records = _records(1, GAM, 10, [1.0, math.nan, 3.0], ["", "quadrature", ""]) + _records(1, EDF, 10, [9.0, 9.0, 9.0])
    table = summarize(records, replicates=3)
    gam = table.cell(1, GAM, 10)
    assert gam["mean_ise"] == pytest.approx(2.0)
    assert gam["flagged"] == 1 and gam["replicates"] == 2
    assert table.flagged_frame()["flagged"].tolist() == [1, 0]


def test_fully_flagged_cell_is_never_best():
    records = _records(1, GAM, 10, [math.nan], ["selection"]) + _records(1, EDF, 10, [9.0])
    table = summarize(records)
    assert math.isnan(table.cell(1, GAM, 10)["mean_ise"])
    assert not is_best(table, 1, GAM, 10)
    assert is_best(table, 1, EDF, 10)


def test_missing_cells_raise_partial_summary(toy):
    with pytest.raises(PartialSummaryError) as info:
        summarize(toy, distributions=[1, 2], replicates=3)
    assert info.value.gaps == [(2, int(GAM), 10), (2, int(EDF), 10)]
    with pytest.raises(PartialSummaryError):
        summarize(toy, replicates=4)
    with pytest.raises(PartialSummaryError):
        summarize([])


def test_scaled_formatting():
    assert scaled(0.001574) == "15.74"
    assert scaled(0.0) == "0.00"
    assert scaled(math.nan) == ""


def test_emit_csv_and_markdown(tmp_path, toy):
    table = summarize(_records(1, GAM, 10, [0.001574, 0.001574]) + _records(1, EDF, 10, [0.002, 0.002]))
    written = emit(table, ["csv", "markdown"], tmp_path)
    assert sorted(p.name for p in written) == ["flagged.csv", "summary.csv", "tables.md", "totals.csv"]
    header = (tmp_path / "summary.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == ",".join(SUMMARY_COLUMNS)
    assert (tmp_path / "flagged.csv").read_text(encoding="utf-8").splitlines()[0] == "dist_index,estimator_index,n,flagged"
    summary = read_summary(tmp_path / "summary.csv")
    assert summary["is_best"].tolist() == [True, False]
    text = (tmp_path / "tables.md").read_text(encoding="utf-8")
    assert "15.74" in text and "Total" in text and "Burr" in markdown_tables(table)


def test_emit_empty_table_writes_nothing(tmp_path):
    empty = SummaryTable(cells=pd.DataFrame(columns=SUMMARY_COLUMNS + ["replicates", "flagged"]),
                         totals=pd.DataFrame(columns=["estimator_index", "n", "total"]))
    with pytest.raises(DomainError):
        emit(empty, "csv", tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_records_csv_round_trip(tmp_path):
    records = _records(4, GAM, 256, [0.1 / 3, 2e-5]) + _records(4, EDF, 256, [0.5, math.nan], ["", "domain"])
    path = write_records(records, tmp_path / "records.csv")
    back = read_records(path)
    assert len(back) == 4
    assert back[0] == records[0] and back[1] == records[1]
    assert back[2].bandwidth is None and back[3].flag == "domain" and math.isnan(back[3].ise)
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ReportError):
        read_records(path)


def test_ordering_checks():
    records = (_records(1, GAM, 10, [1.0, 1.1]) + _records(1, EDF, 10, [2.0, 2.1])
               + _records(1, LN, 10, [1.0, 1.0]) + _records(1, BS, 10, [1.01, 1.01])
               + _records(2, GAM, 10, [5.0, 5.1]) + _records(2, EDF, 10, [1.0, 1.1]))
    checks = {(c.check, c.dist_index): c for c in ordering_checks(summarize(records))}
    assert checks[("edf_not_better", 1)].passed
    assert not checks[("edf_not_better", 2)].passed
    assert checks[("ln_bs_pairing", 1)].passed
    assert ("ln_bs_pairing", 2) not in checks
