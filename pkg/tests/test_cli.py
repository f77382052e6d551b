import json
import os

import numpy as np
import pytest

from fragmellin.cli import main
from fragmellin.config import parse_config

EXACT_CONFIG = """
[grid]
x_min = 1e-4
x_max = 60.0
n = 512

[kernel]
kind = uniform

[rate]
alpha = 1.0
gamma = 1.0

[solver]
dt = 5e-4
t_end = 1.0
output_times = 0.5 1.0

[run]
seed = 11
output_dir = {outdir}
"""


@pytest.fixture
def exact_config(tmp_path):
    path = tmp_path / "exact.cfg"
    path.write_text(EXACT_CONFIG.format(outdir=tmp_path / "runs"))
    return str(path)


class TestConfig:
    def test_parse_sections(self, exact_config):
        cfg = parse_config(exact_config)
        assert cfg.n == 512
        assert cfg.dt == 5e-4
        assert cfg.output_times == (0.5, 1.0)
        assert cfg.kernel_kind == "uniform"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[grid]\nx_min = 1\nbogus = 2\n")
        with pytest.raises(ValueError, match="bogus"):
            parse_config(str(path))

    def test_missing_kernel_file(self, tmp_path):
        path = tmp_path / "k.cfg"
        path.write_text("[kernel]\npath = /does/not/exist.json\n")
        with pytest.raises(FileNotFoundError):
            parse_config(str(path))


class TestCommands:
    def test_simulate_writes_outputs(self, exact_config, tmp_path):
        outdir = str(tmp_path / "sim")
        rc = main(["simulate", exact_config, "--output-dir", outdir])
        assert rc == 0
        assert os.path.exists(os.path.join(outdir, "moments.csv"))
        assert os.path.exists(os.path.join(outdir, "run.json"))
        run = json.load(open(os.path.join(outdir, "run.json")))
        assert run["config"]["dt"] == 5e-4
        assert run["mass_drift"] < 1e-3

    def test_simulate_unstable_dt_exit_3(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(EXACT_CONFIG.format(outdir=tmp_path / "runs").replace("dt = 5e-4", "dt = 10.0"))
        rc = main(["simulate", str(path), "--output-dir", str(tmp_path / "o")])
        assert rc == 3

    def test_bad_config_exit_2(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[rate]\nalpha = -1\ngamma = 1\n")
        rc = main(["simulate", str(path), "--output-dir", str(tmp_path / "o")])
        assert rc == 2

    def test_mellin_command(self, tmp_path):
        from fragmellin.grids import GridFunction, make_log_grid

        g = make_log_grid(1e-3, 30.0, 128)
        f = GridFunction(g, np.exp(-g.nodes))
        src = tmp_path / "f.csv"
        src.write_text(f.to_csv())
        out = tmp_path / "m.csv"
        rc = main(["mellin", str(src), "--u", "2.5", "--V", "5", "--dv", "0.5", "--output", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# u=2.5")
        assert lines[1] == "v,re,im"

    def test_profile_spectral(self, exact_config, tmp_path):
        outdir = str(tmp_path / "prof")
        rc = main(["profile", exact_config, "--method", "spectral", "--output-dir", outdir])
        assert rc == 0
        assert os.path.exists(os.path.join(outdir, "profile_spectral.csv"))

    @pytest.mark.slow
    def test_estimate_from_profile_csv(self, exact_config, tmp_path):
        from fragmellin.grids import GridFunction, make_log_grid

        g = make_log_grid(1e-4, 60.0, 512)
        f = GridFunction(g, np.exp(-g.nodes))
        prof = tmp_path / "g.csv"
        prof.write_text(f.to_csv())
        outdir = str(tmp_path / "est")
        rc = main(["estimate", exact_config, "--profile", str(prof), "--output-dir", outdir])
        assert rc == 0
        run = json.load(open(os.path.join(outdir, "run.json")))
        assert abs(run["gamma_hat"] - 1.0) < 0.02
        assert abs(run["alpha_hat"] - 1.0) < 0.02
        assert os.path.exists(os.path.join(outdir, "k0_hat.csv"))

    @pytest.mark.slow
    def test_roundtrip_command_and_determinism(self, tmp_path):
        cfg_text = EXACT_CONFIG.format(outdir=tmp_path / "runs") + "\n[estimation]\nnoise = 0.01\n"
        path = tmp_path / "rt.cfg"
        path.write_text(cfg_text)
        out1, out2 = str(tmp_path / "rt1"), str(tmp_path / "rt2")
        assert main(["roundtrip", str(path), "--output-dir", out1]) == 0
        assert main(["roundtrip", str(path), "--output-dir", out2]) == 0
        a = open(os.path.join(out1, "k0_hat.csv"), "rb").read()
        b = open(os.path.join(out2, "k0_hat.csv"), "rb").read()
        assert a == b  # identical config + seed -> byte-identical output
        report = json.load(open(os.path.join(out1, "report.json")))
        assert report["diagnostics"]["gamma_error"] < 0.1
