import numpy as np

from src.core.sequences import ExtractionScore
from src.processing import reports
from src.processing.diagnostics import FluxClass, RidgeSegment


def test_cell_formatting(tmp_path):
    path = reports.write_csv(tmp_path / "cells.csv", ["a", "b", "c", "d", "e"],
                             [(True, np.int64(3), 0.5, FluxClass.FINITE, "x")])
    lines = path.read_text().splitlines()
    assert lines == ["a,b,c,d,e", "true,3,5.000000000000e-01,finite,x"]


def test_read_back(tmp_path):
    path = reports.write_sequence(tmp_path / "seq" / "p.csv", [-1, 0, 1], [-2, 0, 1], [None, 2, 1])
    rows = reports.read_csv(path)
    assert [r["p"] for r in rows] == ["-2", "0", "1"]
    assert rows[1]["gap"] == "2"


def test_scores_and_flux(tmp_path):
    scores = reports.read_csv(reports.write_sequence_scores(
        tmp_path / "scores.csv", [ExtractionScore(n=29, score=41, total=41)]))
    assert scores == [{"n": "29", "score": "41", "total": "41", "perfect": "true"}]
    flux = reports.read_csv(reports.write_flux(tmp_path / "flux.csv", [(0.0, 1.0, FluxClass.MINUS_INFINITY)]))
    assert flux[0]["class"] == "u->-inf"


def test_ridges(tmp_path):
    ridge = RidgeSegment(start=(0.0, 0.1), end=(0.5, 0.1), cells=4, max_gradient=0.999)
    rows = reports.read_csv(reports.write_ridges(tmp_path / "ridges.csv", [ridge]))
    assert float(rows[0]["x1"]) == 0.5
    assert rows[0]["cells"] == "4"


def test_summary_format(tmp_path):
    path = reports.write_summary(tmp_path / "summary.txt", {
        "domain": {"ell": 0.6, "p": (0, 3)},
        "result": {"exit_code": 0, "verified": False},
    })
    assert path.read_text().splitlines() == [
        "[domain]",
        "ell = 6.000000000000e-01",
        "p = 0, 3",
        "",
        "[result]",
        "exit_code = 0",
        "verified = false",
    ]
