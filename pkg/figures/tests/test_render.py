import csv
from pathlib import Path

import numpy as np
import pytest

from boundfigs import ColumnMismatchError, FigureSpec, preset, read_sweep_table, render_figure
from boundfigs.cli import main

REPO_ROOT = Path(__file__).resolve().parents[2]
DATA = REPO_ROOT / "data"

SHIPPED = {
    "fig2": DATA / "fig2_qubit_sweep.csv",
    "fig3a": DATA / "fig3a_maser_currents_sweep.csv",
    "fig3b": DATA / "fig3b_maser_counts_sweep.csv",
}


def synthetic_csv(tmp_path, shuffle=False, drop=None):
    header = [
        "sweep_value", "lhs_det", "lhs_se", "k12", "k12_se", "half_k1k2",
        "corr_coeff", "A1", "A2", "Q1", "Q2", "F12", "phi1", "phi2", "flags",
    ]
    rows = []
    for i, omega in enumerate([0.25, 0.5, 1.0, 2.0]):
        rows.append({
            "sweep_value": omega, "lhs_det": 0.01 * (i + 1), "lhs_se": 1e-4,
            "k12": 0.005 / (i + 1), "k12_se": 1e-5, "half_k1k2": 0.002 / (i + 1),
            "corr_coeff": 0.9 - 0.1 * i, "A1": 6.0, "A2": 8.0, "Q1": 1.0, "Q2": 2.0,
            "F12": 3.0, "phi1": -0.3, "phi2": -0.2, "flags": "ok",
        })
    if shuffle:
        header = header[::-1]
    if drop:
        header = [h for h in header if h != drop]
    path = tmp_path / ("shuffled.csv" if shuffle else "plain.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in header})
    return path


class TestShippedData:
    @pytest.mark.parametrize("kind", ["fig2", "fig3a", "fig3b"])
    def test_renders_from_shipped_csv(self, kind, tmp_path):
        out = tmp_path / f"{kind}.png"
        result = render_figure(preset(kind, SHIPPED[kind], out))
        assert result.exists()
        assert result.stat().st_size > 10_000

    def test_fig3a_saturation_visible(self):
        table = read_sweep_table(SHIPPED["fig3a"])
        corr2 = table["corr_coeff"] ** 2
        product = table["lhs_det"] / (1 - corr2)
        bound = table["k12"] + product * corr2
        ratio = product / bound
        assert np.all(ratio < 1.5)
        assert np.all(ratio > 0.8)

    def test_bound_ordering_visible(self):
        # the joint bound curve sits above the per-observable product bound everywhere
        for kind in ("fig2", "fig3a", "fig3b"):
            table = read_sweep_table(SHIPPED[kind])
            corr2 = table["corr_coeff"] ** 2
            product = table["lhs_det"] / (1 - corr2)
            joint = table["k12"] + product * corr2
            split = table["half_k1k2"] + 0.5 * product * corr2
            assert np.all(joint >= split)

    def test_fig3b_not_saturated_and_slowly_loosening(self):
        table = read_sweep_table(SHIPPED["fig3b"])
        corr2 = table["corr_coeff"] ** 2
        product = table["lhs_det"] / (1 - corr2)
        bound = table["k12"] + product * corr2
        ratio = product / bound
        assert np.all(ratio > 1.1)  # visibly above the bound
        assert ratio[-1] > ratio[0]  # and the gap widens with the drive


class TestRobustness:
    def test_shuffled_columns_identical_output(self, tmp_path):
        a = render_figure(preset("fig2", synthetic_csv(tmp_path), tmp_path / "a.png"))
        b = render_figure(preset("fig2", synthetic_csv(tmp_path, shuffle=True), tmp_path / "b.png"))
        assert a.read_bytes() == b.read_bytes()

    def test_deterministic_bytes(self, tmp_path):
        csv_path = synthetic_csv(tmp_path)
        a = render_figure(preset("fig3a", csv_path, tmp_path / "a.png"))
        b = render_figure(preset("fig3a", csv_path, tmp_path / "b.png"))
        assert a.read_bytes() == b.read_bytes()

    def test_missing_column_reports_diff(self, tmp_path):
        path = synthetic_csv(tmp_path, drop="corr_coeff")
        with pytest.raises(ColumnMismatchError) as err:
            render_figure(preset("fig2", path, tmp_path / "x.png"))
        assert "corr_coeff" in str(err.value)

    def test_raw_column_spec(self, tmp_path):
        spec = FigureSpec(
            input_csv=synthetic_csv(tmp_path),
            x_column="sweep_value",
            point_series=(("lhs_det", "lhs_det"),),
            curve_series=(("k12", "k12"), ("half_k1k2", "half_k1k2")),
            output=tmp_path / "raw.png",
        )
        assert render_figure(spec).exists()


class TestCli:
    def test_cli_success(self, tmp_path):
        rc = main(["--csv", str(synthetic_csv(tmp_path)), "--kind", "fig2", "--out", str(tmp_path / "o.png")])
        assert rc == 0
        assert (tmp_path / "o.png").exists()

    def test_cli_missing_column(self, tmp_path, capsys):
        path = synthetic_csv(tmp_path, drop="k12")
        rc = main(["--csv", str(path), "--kind", "fig2", "--out", str(tmp_path / "o.png")])
        assert rc == 1
        assert "k12" in capsys.readouterr().err
