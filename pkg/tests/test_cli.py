"""Command-line entry point."""
import math
import shutil
import subprocess

import numpy as np
import pytest

from primeq.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, main
from primeq.io import read_diag, read_snapshot


def rows_of(text):
    lines = text.strip().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('resolution = 8\ndt = 0.01\nt_end = 0.04\ninitial = "random"\nseed = 2\nsnapshot_stride = 2\n')
    return p


class TestSpectrum:
    def test_first_values(self, capsys):
        assert main(["spectrum", "--bc", "neumann", "--h", "1", "--count", "6", "--res", "8"]) == EXIT_OK
        header, rows = rows_of(capsys.readouterr().out)
        assert header[0] == "index"
        ie, im = header.index("eigenvalue"), header.index("multiplicity")
        vals = [float(r[ie]) for r in rows for _ in range(int(r[im]))]
        assert vals[0] == 0.0
        np.testing.assert_allclose(vals[:6], [0.0] * 2 + [math.pi**2] * 2 + [4 * math.pi**2] * 2, rtol=1e-13)

    def test_writes_file(self, tmp_path, capsys):
        assert main(["spectrum", "--bc", "dirichlet", "--count", "3", "--res", "8", "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "spectrum.csv").read_text().startswith("index,")

    def test_bad_bc(self, capsys):
        assert main(["spectrum", "--bc", "slippery"]) == EXIT_ERROR
        err = capsys.readouterr().err
        assert err.startswith("error: ") and err.count("\n") == 1


class TestRun:
    def test_run_writes_outputs(self, tmp_path, config, capsys):
        out = tmp_path / "out"
        assert main(["run", str(config), "--out", str(out)]) == EXIT_OK
        assert capsys.readouterr().out.startswith("ok t_end=0.04 snapshots=3")
        header, rows = read_diag(out / "diagnostics.csv")
        assert header[:2] == ["time", "energy"] and rows.shape[0] == 3
        assert len(list(out.glob("snap_*.hydro"))) == 3

    def test_byte_identical_reruns(self, tmp_path, config):
        for name in ("a", "b"):
            assert main(["run", str(config), "--out", str(tmp_path / name)]) == EXIT_OK
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_missing_config(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.toml")]) == EXIT_ERROR
        assert "config not found" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"dt": 0.03, "t_end": 0.1}')
        assert main(["run", str(p), "--out", str(tmp_path / "o")]) == EXIT_ERROR
        assert "error: config:" in capsys.readouterr().err


class TestFieldCommands:
    def test_roughdata_norms_project(self, tmp_path, capsys):
        assert main(["roughdata", "--p", "4", "--q", "4", "--theta", "0.25", "--seed", "1", "--res", "8",
                     "--out", str(tmp_path)]) == EXIT_OK
        path = capsys.readouterr().out.strip()
        hdr, _ = read_snapshot(path)
        assert hdr.extra["theta"] == 0.25

        assert main(["norms", path, "--norm", "besov:s=0.5,p=4,q=4", "--norm", "lp:p=2"]) == EXIT_OK
        header, rows = rows_of(capsys.readouterr().out)
        assert header == ["norm", "value"]
        assert rows[0][0] == "B0.5_44" and float(rows[0][1]) == pytest.approx(1.0, rel=1e-12)

        out = tmp_path / "p.hydro"
        assert main(["project", path, str(out)]) == EXIT_OK
        assert "defect_after" in capsys.readouterr().out
        np.testing.assert_allclose(read_snapshot(out)[1], read_snapshot(path)[1], atol=1e-12)

    def test_threshold_warning_printed(self, tmp_path, capsys):
        assert main(["roughdata", "--theta", "0.125", "--res", "8", "--out", str(tmp_path)]) == EXIT_OK
        assert "warning: theta" in capsys.readouterr().err

    def test_unsupported_norm(self, tmp_path, capsys):
        main(["roughdata", "--res", "8", "--out", str(tmp_path)])
        path = capsys.readouterr().out.strip()
        assert main(["norms", path, "--norm", "sobolev:s=1,p=3"]) == EXIT_ERROR
        assert "error: " in capsys.readouterr().err

    def test_corrupt_snapshot(self, tmp_path, capsys):
        p = tmp_path / "junk.hydro"
        p.write_bytes(b"not a snapshot")
        assert main(["norms", str(p), "--norm", "lp:p=2"]) == EXIT_ERROR
        assert "error: snapshot: bad magic" in capsys.readouterr().err


class TestVerifyAndUsage:
    def test_verify_fast_suite(self, tmp_path, capsys):
        assert main(["verify", "projection", "--res", "8", "--out", str(tmp_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[0].startswith("PASS projection.")
        header, rows = rows_of((tmp_path / "verify_projection.csv").read_text())
        assert header == ["check", "value", "target", "passed"] and all(r[-1] == "1" for r in rows)

    def test_verify_reports_failure(self, capsys):
        # the separable eigenvalue list omits the constrained branch once a Dirichlet end is present
        assert main(["verify", "spectrum", "--res", "8"]) == EXIT_FAILED
        assert "FAIL spectrum." in capsys.readouterr().out

    @pytest.mark.parametrize("argv", [[], ["explode"], ["verify", "nosuch"], ["spectrum", "--count", "0"]])
    def test_usage_errors(self, argv, capsys):
        assert main(argv) == EXIT_ERROR
        assert capsys.readouterr().err.startswith("error: usage:")

    @pytest.mark.skipif(shutil.which("primeq") is None, reason="console script not installed")
    def test_console_script(self):
        proc = subprocess.run(["primeq", "spectrum", "--count", "2", "--res", "8"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.startswith("index,")
