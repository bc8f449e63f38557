import csv
import xml.etree.ElementTree as ET

import matplotlib
import pytest

from nomftn import plotting
from nomftn.cli import main
from nomftn.errors import ConfigurationError, CsvParseError

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _write_ini(tmp_path, body, name="c.ini"):
    p = tmp_path / name
    p.write_text(body)
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


FAST = """
[plan]
profile = 3
alpha = 0.9
[frame]
n_payload = 10
[channel]
preset = paper-20km
noise_psd = 0.02
[run]
frames = 2
[sweep]
parameter = l_bands
values = 2, 3, 5
"""


class TestCommands:
    def test_run_writes_csv(self, tmp_path, capsys):
        cfg = _write_ini(tmp_path, FAST)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        rows = _rows(tmp_path / "o" / "run.csv")
        assert len(rows) == 1 and rows[0]["plan"] == "[16,8,4]"
        assert "BER" in capsys.readouterr().out

    def test_sweep_rows_and_aggregation(self, tmp_path):
        cfg = _write_ini(tmp_path, FAST.replace("n_payload = 10", "n_payload = 200"))
        out = tmp_path / "o"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        rows = _rows(out / "sweep.csv")
        assert [r["value"] for r in rows] == ["2", "3", "5"]
        for r in rows:
            assert abs(float(r["line_rate_gbps"]) - 32.23) < 0.01
            k = sum(1 for c in r if c.startswith("errors_band") and r[c] != "")
            errors = [int(r[f"errors_band{i}"]) for i in range(1, k + 1)]
            bits = [int(r[f"bits_band{i}"]) for i in range(1, k + 1)]
            assert sum(errors) == int(r["errors"]) and sum(bits) == int(r["bits"])
            assert float(r["ber"]) == float(f"{sum(errors) / sum(bits):.5e}")
        assert (out / "sweep.svg").stat().st_size > 0
        ET.parse(out / "sweep.svg")

    def test_csv_dialect(self, tmp_path):
        cfg = _write_ini(tmp_path, FAST)
        main(["sweep", "--config", cfg, "--out", str(tmp_path), "--no-plot"])
        raw = (tmp_path / "sweep.csv").read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")
        ber = _rows(tmp_path / "sweep.csv")[0]["ber"]
        mantissa = ber.split("e")[0].replace(".", "").lstrip("-")
        assert len(mantissa) == 6
        assert not (tmp_path / "sweep.svg").exists()

    def test_overrides(self, tmp_path):
        cfg = _write_ini(tmp_path, FAST)
        main(["run", "--config", cfg, "--out", str(tmp_path), "--frames", "1", "--seed", "7"])
        assert int(_rows(tmp_path / "run.csv")[0]["bits"]) == 10 * 360

    def test_shipped_config_by_name(self, tmp_path):
        assert main(["run", "--config", "multiband-l3", "--frames", "1", "--out", str(tmp_path)]) == 0

    def test_complexity(self, tmp_path, capsys):
        assert main(["complexity", "--out", str(tmp_path)]) == 0
        rows = {r["profile"]: r for r in _rows(tmp_path / "complexity.csv")}
        assert rows["3"]["reduction_cm_pct"] == "97.28"
        assert rows["2"]["reduction_ca_pct"] == "89.92"
        assert rows["1"]["reduction_cm_pct"] == "0.00"

    def test_spectrum_edge(self, tmp_path, capsys):
        cfg = _write_ini(tmp_path, FAST.replace("alpha = 0.9", "alpha = 0.8"))
        assert main(["spectrum", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert "-10 dB edge" in capsys.readouterr().out
        rows = _rows(tmp_path / "spectrum.csv")
        f = [float(r["frequency_hz"]) for r in rows]
        db = [float(r["power_db"]) for r in rows]
        edge = max(fi for fi, d in zip(f, db) if d >= -10.0)
        assert abs(edge - 9.75e9) <= 26e9 / 256
        ET.parse(tmp_path / "spectrum.svg")

    def test_profiles(self, capsys):
        assert main(["profiles"]) == 0
        text = capsys.readouterr().out
        assert "paper-20km" in text and "[16, 8, 4]" in text and "chow.ini" in text


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none"), "--out", str(tmp_path)]) == 2

    def test_bad_value(self, tmp_path):
        cfg = _write_ini(tmp_path, "[plan]\nalpha = 1.5\n")
        assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_bad_seed(self, tmp_path):
        cfg = _write_ini(tmp_path, FAST)
        assert main(["run", "--config", cfg, "--seed", str(2 ** 64), "--out", str(tmp_path)]) == 2

    def test_runtime_failure(self, tmp_path):
        (tmp_path / "dead.txt").write_text("0 -400\n13e9 -400\n")
        body = "[plan]\nprofile=3\n[frame]\nn_payload=5\n[channel]\nkind=tabulated\ntable=dead.txt\n"
        cfg = _write_ini(tmp_path, body)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


class TestPlots:
    def _sweep_csv(self, path, bers):
        lines = ["param,value,ber,ber_band1,ber_band2"]
        for v, b in zip((1.0, 0.9, 0.8), bers):
            lines.append(f"alpha,{v},{b[0]:.5e},{b[1]:.5e},{b[2]:.5e}")
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_three_rows_make_valid_svg(self, tmp_path):
        p = self._sweep_csv(tmp_path / "s.csv", [(1e-2, 2e-2, 5e-3), (1e-3, 1e-3, 1e-3), (5e-3, 4e-3, 6e-3)])
        out = plotting.emit_plot(p, "ber_alpha")
        assert out == tmp_path / "s.svg" and out.stat().st_size > 0
        root = ET.parse(out).getroot()
        assert root.tag.endswith("svg")

    def test_same_csv_same_bytes(self, tmp_path):
        p = self._sweep_csv(tmp_path / "s.csv", [(1e-2, 2e-2, 5e-3), (0, 0, 0), (5e-3, 4e-3, 6e-3)])
        a = plotting.emit_plot(p, "ber_rop", tmp_path / "a.svg").read_bytes()
        b = plotting.emit_plot(p, "ber_rop", tmp_path / "b.svg").read_bytes()
        assert a == b

    def test_zero_ber_drawn_at_floor(self):
        header = ["param", "value", "ber"]
        rows = [{"param": "rop", "value": "-2", "ber": "1e-3"},
                {"param": "rop", "value": "0", "ber": "0"}]
        assert plotting.ber_floor([1e-3, 0]) == 1e-4
        assert plotting.ber_floor([0, 0]) == plotting.BER_FLOOR_DEFAULT
        fig, ax = plt.subplots()
        try:
            plotting._plot_ber(ax, header, rows, "rop")
            assert ax.get_yscale() == "log" and ax.get_ylim()[0] == 1e-4
            markers = [ln for ln in ax.get_lines() if ln.get_marker() == "v"]
            assert len(markers) == 1
            assert list(markers[0].get_xdata()) == [0.0] and list(markers[0].get_ydata()) == [1e-4]
        finally:
            plt.close(fig)

    def test_malformed_csv_reports_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("param,value,ber\nalpha,1.0,1e-3\nalpha,0.9\n")
        with pytest.raises(CsvParseError, match="line 3"):
            plotting.emit_plot(p, "ber_alpha")
        p.write_text("param,value,ber\nalpha,1.0,oops\n")
        with pytest.raises(CsvParseError, match="line 2"):
            plotting.emit_plot(p, "ber_alpha")
        p.write_text("param,value,ber\n")
        with pytest.raises(CsvParseError):
            plotting.emit_plot(p, "ber_alpha")

    def test_unknown_kind(self, tmp_path):
        p = self._sweep_csv(tmp_path / "s.csv", [(1e-2, 1e-2, 1e-2)] * 3)
        with pytest.raises(ConfigurationError):
            plotting.emit_plot(p, "waterfall")

    def test_psd_plot(self, tmp_path):
        p = tmp_path / "psd.csv"
        p.write_text("frequency_hz,power_db\n0,0\n5e9,-1\n1e10,-30\n")
        ET.parse(plotting.emit_plot(p, "psd"))
        with pytest.raises(CsvParseError):
            plotting.emit_plot(self._sweep_csv(tmp_path / "s.csv", [(1e-2,) * 3] * 3), "psd")
