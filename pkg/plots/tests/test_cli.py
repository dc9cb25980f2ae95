"""Command-line and producer-integration tests."""

import subprocess
import sys

import pytest

from tdeplots.cli import main

from test_figures import write_ingest_csv, write_sweep_csv


class TestCli:
    def test_sweep_chart(self, tmp_path):
        path = write_sweep_csv(tmp_path / "s.csv")
        out = tmp_path / "s.png"
        assert main(["sweep", str(path), "-o", str(out)]) == 0
        assert out.is_file()

    def test_sweep_defaults_to_first_column(self, tmp_path):
        # no --x given; the swept-parameter column is read from the file
        path = write_sweep_csv(tmp_path / "s.csv")
        out = tmp_path / "s.png"
        assert main(["sweep", str(path), "-o", str(out), "--log"]) == 0
        assert out.is_file()

    def test_boxplot_chart(self, tmp_path):
        path = write_ingest_csv(tmp_path / "m.csv")
        out = tmp_path / "m.svg"
        assert main(["boxplot", str(path), "-o", str(out)]) == 0
        assert out.is_file()

    def test_missing_input_exits_2(self, tmp_path, capsys):
        code = main(["sweep", str(tmp_path / "gone.csv"),
                     "-o", str(tmp_path / "x.png")])
        assert code == 2
        assert "not found" in capsys.readouterr().err

    def test_missing_column_exits_2(self, tmp_path, capsys):
        path = write_sweep_csv(tmp_path / "s.csv")
        code = main(["sweep", str(path), "-o", str(tmp_path / "x.png"),
                     "--value", "nope"])
        assert code == 2
        assert "nope" in capsys.readouterr().err

    def test_unwritable_output_exits_1(self, tmp_path):
        path = write_sweep_csv(tmp_path / "s.csv")
        out = tmp_path / "no" / "such" / "dir" / "x.png"
        assert main(["sweep", str(path), "-o", str(out)]) == 1


@pytest.mark.skipif(
    subprocess.run(
        [sys.executable, "-c", "import tdeloc"], capture_output=True
    ).returncode != 0,
    reason="producer package not installed",
)
class TestProducerIntegration:
    """Render CSVs emitted by the producer tool itself.

    The producer is driven only through its command line, never imported,
    so this exercises the actual cross-package contract: the CSV schema.
    """

    def produce(self, tmp_path, name, *args):
        out = tmp_path / name
        cmd = [sys.executable, "-m", "tdeloc.cli", *args, "-o", str(out)]
        done = subprocess.run(cmd, capture_output=True, text=True)
        assert done.returncode == 0, done.stderr
        return out

    def test_every_sweep_kind_renders(self, tmp_path):
        grids = {
            "rate_hz": "[4000, 8000, 16000]",
            "factor": "[1, 20, 200]",
            "snr_db": "[0, 20, 40]",
            "s": "[1, 9, 32]",
        }
        for parameter, values in grids.items():
            csv_path = self.produce(
                tmp_path, f"{parameter}.csv", "sweep",
                "--set", f"parameter={parameter}",
                "--set", f"values={values}",
                "--set", "num_sources=3",
                "--set", "methods=sinc,whittaker_shannon",
            )
            out = render_target = tmp_path / f"{parameter}.png"
            assert main(["sweep", str(csv_path), "-o", str(out)]) == 0
            assert render_target.is_file()

    def test_per_source_table_renders_as_boxplot(self, tmp_path):
        csv_path = self.produce(
            tmp_path, "sim.csv", "simulate",
            "--set", "num_sources=8",
        )
        out = tmp_path / "sim.png"
        assert main(["boxplot", str(csv_path), "-o", str(out),
                     "--x", "method", "--log"]) == 0
        assert out.is_file()
