import csv
import json
import math

import pytest

from chronoml.benchmark import average_ranks, benchmark, impute_failures, tabulate
from chronoml.engine import RunConfig
from chronoml.synth import trend_season


def test_impute_failures():
    assert impute_failures([1.0, None, 3.0, math.nan]) == [1.0, 3.0 + 1e-6, 3.0, 3.0 + 1e-6]
    assert impute_failures([None, None]) == [math.inf, math.inf]


def test_average_ranks_ties():
    assert average_ranks([2.0, 1.0, 2.0]) == [2.5, 1.0, 2.5]


def test_tabulate_ranks_failed_cells_last():
    raw = {("d", 0): {"A": 1.0, "B": None, "C": 2.0}, ("d", 1): {"A": 5.0, "B": 0.5, "C": None}}
    rows, summary = tabulate(raw, ["A", "B", "C"])
    by = {(r["seed"], r["mode"]): r for r in rows}
    assert by[(0, "B")]["metric"] == 5.0 + 1e-6 and by[(0, "B")]["rank"] == 3.0
    assert by[(1, "C")]["rank"] == 3.0 and by[(1, "B")]["rank"] == 1.0
    assert summary["B"]["n_imputed"] == 1


def test_benchmark_writes_tables(tmp_path):
    datasets = [trend_season(seed=0, length=60, name="a")]

    def fake_cell(ds, mode, seed, rc, kb):
        return None if mode == "TEMPLATES_MF" else 1.0 + seed

    rows, summary = benchmark(datasets, ["ONLY", "MF"], RunConfig(), seeds=[0, 1],
                              out_dir=tmp_path, cell_fn=fake_cell)
    assert summary["TEMPLATES_MF"]["mean_rank"] == 2.0
    with open(tmp_path / "results.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4
    assert "per_dataset" in json.loads((tmp_path / "summary.json").read_text())
    with pytest.raises(ValueError):
        benchmark([], ["ONLY"], RunConfig())
