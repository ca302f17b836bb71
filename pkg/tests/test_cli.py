import csv

import numpy as np
import pytest
import scipy.io

from eddypar.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_STABILITY,
    ConfigError,
    default_config_path,
    load_config,
    main,
    observable,
    run_experiment,
    write_config,
)

SMALL = """
[excitation]
f_pwm = 1000.0

[time]
t_end = 0.008

[solver]
type = "{solver}"
n_windows = 2
h_fine = 5e-6
h_implicit = 5e-6
stride = 200
"""


def write_small(tmp_path, solver="parareal", extra=""):
    path = tmp_path / "small.toml"
    path.write_text(SMALL.format(solver=solver) + extra)
    return path


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


class TestObservable:
    def test_zero_state(self, desk_problem):
        _, sys, _ = desk_problem
        a = np.zeros(sys.n_dof)
        for kind in ("energy", "flux_linkage", "dof_probe"):
            assert observable(sys, a, kind) == 0.0

    def test_energy_of_unit_vector(self, desk_problem):
        _, sys, _ = desk_problem
        j = 17
        e = np.zeros(sys.n_dof)
        e[j] = 1.0
        assert observable(sys, e, "energy") == pytest.approx(0.5 * sys.K_nu[j, j])

    def test_flux_linkage_linearity(self, desk_problem):
        _, sys, _ = desk_problem
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((2, sys.n_dof))
        assert observable(sys, a + b, "flux_linkage") == pytest.approx(
            observable(sys, a, "flux_linkage") + observable(sys, b, "flux_linkage"))

    def test_probe_out_of_range(self, desk_problem):
        _, sys, _ = desk_problem
        with pytest.raises(IndexError):
            observable(sys, np.zeros(sys.n_dof), "dof_probe", probe_index=10**6)

    def test_unknown_kind(self, desk_problem):
        _, sys, _ = desk_problem
        with pytest.raises(ValueError):
            observable(sys, np.zeros(sys.n_dof), "volume")


class TestConfig:
    def test_bundled_config_loads(self):
        cfg = load_config(default_config_path())
        assert cfg["solver"]["type"] == "parareal"
        assert cfg["time"]["t_end"] == 0.04
        assert cfg["solver"]["reltol"] == 1e-4
        assert cfg["solver"]["abstol"] == 1e-10

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/nowhere.toml")

    def test_malformed(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[solver\noops")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[solver]\nturbo = true\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_bad_solver_type(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text('[solver]\ntype = "magic"\n')
        with pytest.raises(ConfigError):
            load_config(p)

    def test_write_round_trips(self, tmp_path):
        cfg = load_config(default_config_path())
        out = tmp_path / "echo.toml"
        write_config(cfg, out)
        assert load_config(out) == cfg


class TestRunExperiment:
    def test_desk_scale_outputs(self, tmp_path):
        status = run_experiment(default_config_path(), output=tmp_path / "out")
        assert status == EXIT_OK
        header, data = read_csv(tmp_path / "out" / "observable.csv")
        assert header == ["t", "flux_linkage"]
        assert data.shape == (11, 2)
        header, jumps = read_csv(tmp_path / "out" / "jumps.csv")
        assert header == ["iteration", "window", "jump_norm"]
        report = (tmp_path / "out" / "report.txt").read_text()
        assert "theoretical speedup" in report

    def test_stability_refusal(self, tmp_path):
        cfg = write_small(tmp_path)
        text = cfg.read_text().replace("h_fine = 5e-6", "h_fine = 0.02")
        cfg.write_text(text)
        status = run_experiment(cfg, output=tmp_path / "out")
        assert status == EXIT_STABILITY
        assert not (tmp_path / "out" / "observable.csv").exists()

    def test_config_error_exit(self, tmp_path):
        assert run_experiment(tmp_path / "missing.toml") == EXIT_CONFIG
        bad = tmp_path / "bad.toml"
        bad.write_text("[solver]\nturbo = 1\n")
        assert run_experiment(bad, output=tmp_path / "out") == EXIT_CONFIG

    def test_seq_implicit_matches_parareal_at_boundaries(self, tmp_path):
        cfg_p = write_small(tmp_path)
        assert run_experiment(cfg_p, output=tmp_path / "par") == EXIT_OK
        cfg_s = tmp_path / "seq.toml"
        cfg_s.write_text(SMALL.format(solver="seq-implicit"))
        assert run_experiment(cfg_s, output=tmp_path / "seq") == EXIT_OK
        _, par = read_csv(tmp_path / "par" / "observable.csv")
        _, seq = read_csv(tmp_path / "seq" / "observable.csv")
        scale = np.abs(seq[:, 1]).max()
        for t, v in par:
            j = np.argmin(np.abs(seq[:, 0] - t))
            assert abs(seq[j, 0] - t) < 1e-9
            assert abs(v - seq[j, 1]) <= 1e-10 + 1e-4 * scale

    def test_config_round_trip_outputs(self, tmp_path):
        cfg = write_small(tmp_path)
        assert run_experiment(cfg, output=tmp_path / "a") == EXIT_OK
        effective = tmp_path / "a" / "effective_config.toml"
        assert run_experiment(effective, output=tmp_path / "b") == EXIT_OK
        assert ((tmp_path / "a" / "observable.csv").read_bytes()
                == (tmp_path / "b" / "observable.csv").read_bytes())

    def test_energy_observable_non_negative(self, tmp_path):
        cfg = write_small(tmp_path, extra='\n[output]\nobservable = "energy"\n')
        assert run_experiment(cfg, output=tmp_path / "out") == EXIT_OK
        _, data = read_csv(tmp_path / "out" / "observable.csv")
        assert np.all(data[:, 1] >= 0.0)

    def test_seq_explicit_runs(self, tmp_path):
        cfg = write_small(tmp_path, solver="seq-explicit")
        assert run_experiment(cfg, output=tmp_path / "out") == EXIT_OK
        header, data = read_csv(tmp_path / "out" / "observable.csv")
        assert header[0] == "t"
        assert data[-1, 0] == pytest.approx(0.008)

    def test_matrix_dump(self, tmp_path, desk_problem):
        _, sys, _ = desk_problem
        status = run_experiment(default_config_path(), output=tmp_path / "out", dump=True)
        assert status == EXIT_OK
        K = scipy.io.mmread(tmp_path / "out" / "K_nu.mtx").tocsr()
        scale = abs(sys.K_nu).max()
        assert abs(K - sys.K_nu).max() <= 1e-12 * scale
        M = scipy.io.mmread(tmp_path / "out" / "M_sigma.mtx")
        assert np.allclose(np.asarray(M.todense()).diagonal(), sys.M_sigma,
                           rtol=1e-12, atol=0.0)


class TestMain:
    def test_run_subcommand(self, tmp_path):
        cfg = write_small(tmp_path)
        assert main(["run", str(cfg), "--output", str(tmp_path / "out"),
                     "--workers", "2"]) == EXIT_OK

    def test_excitation_subcommand(self, tmp_path):
        out = tmp_path / "i.csv"
        assert main(["excitation", default_config_path(), "--output", str(out),
                     "--samples", "100"]) == EXIT_OK
        header, data = read_csv(out)
        assert header == ["t", "i"]
        assert data.shape == (100, 2)
        assert set(np.unique(data[:, 1])) <= {-10.0, 10.0}
