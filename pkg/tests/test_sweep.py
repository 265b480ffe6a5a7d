import csv
import io
import math
from dataclasses import replace

import numpy as np
import pytest

from iwatsuka.asymptotics import predicted_gap_flat
from iwatsuka.errors import DomainError
from iwatsuka.field import Constant, FlatContact, InfiniteContact, PiecewiseConstant, PowerTail
from iwatsuka.sweep import (
    BAND_CSV_HEADER,
    BandTable,
    check_monotone,
    default_k_grid,
    format_float,
    limits_check,
    loglog_fit,
    sweep,
    worker_count,
)

FLAT = FlatContact(0.5, 1.0, p=1, c=1.0, x_inf=0.0)


def test_constant_field_example():
    table = sweep(Constant(b0=1.0), [-5.0, 0.0, 5.0], 2)
    assert [(r.n, r.k) for r in table.rows] == [(1, -5.0), (1, 0.0), (1, 5.0), (2, -5.0), (2, 0.0), (2, 5.0)]
    for r in table.rows:
        assert abs(r.E - (2 * r.n - 1)) <= 1e-8
        assert abs(r.E_prime) <= 1e-8
        assert r.predicted_gap is None and r.ratio is None
    assert check_monotone(table) == []


def test_flat_gap_negative_and_shrinking():
    ks = np.linspace(2.0, 4.5, 6)
    table = sweep(FLAT, ks, 2)
    for n in (1, 2):
        gaps = table.column("gap", n)
        assert np.all(gaps < 0)
        assert np.all(np.diff(np.abs(gaps)) < 0)
    assert check_monotone(table) == []


def test_empty_and_invalid_inputs():
    assert sweep(FLAT, [], 3).rows == []
    assert sweep(FLAT, [], 3).to_csv() == ",".join(BAND_CSV_HEADER) + "\n"
    with pytest.raises(DomainError):
        sweep(FLAT, [1.0, 0.0], 1)
    with pytest.raises(DomainError):
        sweep(FLAT, [1.0, 1.0], 1)
    with pytest.raises(DomainError):
        sweep(FLAT, [1.0], 9)


def test_rows_inside_threshold_interval():
    for prof in (FLAT, PowerTail(0.5, 1.0, M=2.0), InfiniteContact(0.5, 1.0), PiecewiseConstant(0.5, 1.0)):
        table = sweep(prof, np.linspace(-3, 3, 7), 3)
        for r in table.rows:
            # deep in the b_minus region the true gap is below the error estimate
            lam = 2 * r.n - 1
            slack = 2 * r.err_est
            assert prof.b_minus * lam - slack < r.E < prof.b_plus * lam
        assert check_monotone(table) == []


def test_csv_header_and_format():
    table = sweep(FLAT, [2.0, 3.0, 6.0], 1)
    text = table.to_csv()
    lines = text.splitlines()
    assert lines[0] == "n,k,E,E_prime,gap,predicted_gap,ratio,err_est,flags"
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 3
    for r, row in zip(rows, table.rows):
        assert float(r["E"]) == row.E  # shortest round-trip decimal
    assert rows[-1]["flags"] == "unresolved" and rows[-1]["ratio"] == ""
    assert rows[0]["ratio"] != ""
    assert format_float(None) == "" and format_float(0.1) == "0.1"


def test_determinism_and_parallel_soundness():
    ks = np.linspace(-2.0, 4.0, 9)
    a = sweep(FLAT, ks, 3, workers=1).to_csv()
    b = sweep(FLAT, ks, 3, workers=1).to_csv()
    c = sweep(FLAT, ks, 3, workers=4).to_csv()
    assert a == b == c


def test_write_csv(tmp_path):
    table = sweep(Constant(b0=2.0), [0.0], 1)
    path = tmp_path / "bands.csv"
    table.write_csv(path)
    assert path.read_text() == table.to_csv()
    assert "timestamp" in table.metadata and "Constant" in table.metadata["profile"]


def test_worker_count(monkeypatch):
    monkeypatch.setenv("IWATSUKA_THREADS", "3")
    assert worker_count() == 3
    for bad in ("0", "-2", "many"):
        monkeypatch.setenv("IWATSUKA_THREADS", bad)
        with pytest.raises(ValueError):
            worker_count()
    monkeypatch.delenv("IWATSUKA_THREADS")
    assert worker_count() >= 1


def test_corrupted_table_has_one_violation():
    # in the flat tail consecutive rows differ by far less than 1e-3
    table = sweep(FLAT, FLAT.a_inf + np.linspace(2.0, 5.0, 6), 1)
    rows = list(table.rows)
    rows[3] = replace(rows[3], E=rows[3].E - 1e-3)
    bad = check_monotone(BandTable(rows, table.metadata))
    assert bad == [(1, rows[2].k, rows[3].k)]


def test_limits_examples():
    table = sweep(Constant(b0=1.0), [-10.0, 10.0], 2)
    assert all(c.passed and c.deviation <= 1e-9 for c in limits_check(table, 1e-12, Constant(b0=1.0)))

    table = sweep(FLAT, [-10.0, FLAT.a_inf + 6.0], 1)
    report = {c.side: c for c in limits_check(table, 1e-8, FLAT)}
    assert report["+"].passed and abs(report["+"].E - 1.0) < 1e-8
    assert report["-"].passed

    prof = PowerTail(0.5, 1.0, M=2.0)
    table = sweep(prof, [-10.0, 100.0], 1)
    plus = {c.side: c for c in limits_check(table, 1e-6, prof)}["+"]
    assert not plus.passed
    assert plus.deviation == pytest.approx(1e-4, rel=0.1)

    with pytest.raises(DomainError):
        limits_check(table, 1e-6)


def test_default_k_grid():
    ks = default_k_grid(FLAT, count=5)
    assert ks[0] == pytest.approx(FLAT.a_inf + 1.0) and ks[-1] == pytest.approx(FLAT.a_inf + 6.0)
    assert np.allclose(np.diff(np.log(np.array(ks) - FLAT.a_inf)), math.log(6) / 4)
    assert default_k_grid(PowerTail(0.5, 1.0), count=3) == [-10.0, 0.0, 10.0]


def test_flat_ratio_converges_in_trend():
    # |gap| within [1e-9, 1e-4]
    ks = FLAT.a_inf + np.array([2.5, 2.875, 3.25, 3.625, 4.0])
    table = sweep(FLAT, ks, 1)
    ratios = table.column("ratio", 1)
    devs = np.abs(ratios - 1)
    assert np.all(np.diff(devs) < 0)
    assert ratios[0] == pytest.approx(table.rows[0].gap / predicted_gap_flat(FLAT, ks[0], 1).predicted_gap)


def test_power_slope():
    prof = PowerTail(0.5, 1.0, M=2.0)
    ks = np.geomspace(20, 200, 7)
    table = sweep(prof, ks, 1)
    fit = loglog_fit(ks, table.column("gap", 1))
    assert fit.slope == pytest.approx(-2.0, rel=0.05)


def test_loglog_fit():
    x = np.array([1.0, 2.0, 4.0])
    fit = loglog_fit(x, -3.0 * x**-1.5)
    assert fit.slope == pytest.approx(-1.5) and fit.intercept == pytest.approx(math.log(3.0))
    assert fit.residual < 1e-12
    with pytest.raises(DomainError):
        loglog_fit([1.0], [1.0])
