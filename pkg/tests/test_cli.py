import json

import numpy as np
import pytest

from symbreak.cli import RunConfig, UsageError, main, parse_config_file
from symbreak.field_core import read_snapshot

STAGES = ("solve2d", "lift", "pump", "certify")


def run(*argv):
    return main([str(a) for a in argv])


def pipeline(out, ic, *extra, stages=STAGES):
    codes = []
    for stage in stages:
        flags = ["--ic", ic] if stage == "solve2d" else []
        codes.append(run(stage, "--out", out, *flags, *extra))
    return codes


SMALL = ("--n", 16, "--dt", 0.01, "--t-end", 0.2, "--stride", 10)


class TestPipeline:
    def test_clean_run(self, tmp_path, tg_ic_file, capsys):
        out = tmp_path / "run"
        assert pipeline(out, tg_ic_file, *SMALL) == [0, 0, 0, 0]
        report = json.loads((out / "report.json").read_text())
        assert [c["status"] for c in report["checks"]] == ["pass"] * 6
        assert "PASS" in capsys.readouterr().out
        assert run("report", "--out", out) == 0
        assert run("budget", "--out", out) == 0
        assert (out / "budget.json").exists()

    def test_energy_log(self, tmp_path, tg_ic_file):
        out = tmp_path / "run"
        pipeline(out, tg_ic_file, *SMALL, stages=("solve2d",))
        rows = [json.loads(l) for l in (out / "energy.jsonl").read_text().splitlines()]
        e2 = np.array([r["E2"] for r in rows])
        assert set(rows[0]) == {"t", "E2", "enstrophy"}
        assert np.max(np.abs(e2 - e2[0])) / e2[0] < 1e-8
        man = json.loads((out / "run.json").read_text())
        assert [s["t"] for s in man["snapshots"]] == pytest.approx([0.0, 0.1, 0.2])

    def test_log_is_json_lines(self, tmp_path, tg_ic_file):
        out = tmp_path / "run"
        pipeline(out, tg_ic_file, *SMALL, stages=("solve2d",))
        events = [json.loads(l)["event"] for l in (out / "log.jsonl").read_text().splitlines()]
        assert events[0] == "solve2d.start"

    def test_eta_zero_fails_certification(self, tmp_path, tg_ic_file):
        out = tmp_path / "run"
        codes = pipeline(out, tg_ic_file, *SMALL, "--eta", 0)
        assert codes == [0, 0, 0, 1]
        report = json.loads((out / "report.json").read_text())
        status = {c["name"]: c["status"] for c in report["checks"]}
        assert status["strict_subsolution"] == "fail"

    def test_zero_initial_data(self, tmp_path):
        ic = tmp_path / "zero.txt"
        ic.write_text("# no modes\n")
        out = tmp_path / "run"
        assert pipeline(out, ic, *SMALL, stages=("solve2d",)) == [0]
        for name in ("v_t0000.fld", "u_t0002.fld", "q_t0001.fld"):
            assert not read_snapshot(out / name).data.any()

    def test_deterministic(self, tmp_path, tg_ic_file):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            pipeline(d, tg_ic_file, *SMALL)
        files = sorted(p.name for p in dirs[0].iterdir() if p.suffix == ".fld")
        assert files
        for name in files:
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
        reps = [json.loads((d / "report.json").read_text()) for d in dirs]
        for r in reps:
            r["meta"].pop("timestamp")
        assert reps[0] == reps[1]

    def test_pump_sweep_monotone(self, tmp_path, tg_ic_file):
        out = tmp_path / "run"
        cfg = tmp_path / "pump.cfg"
        cfg.write_text("pump_sweep = 2, 4, 8, 16\n")
        codes = pipeline(out, tg_ic_file, "--n", 64, "--dt", 0.005, "--t-end", 0.005,
                         "--config", cfg, stages=("solve2d", "lift", "pump"))
        assert codes == [0, 0, 0]
        rows = [json.loads(l) for l in (out / "pump_sweep.jsonl").read_text().splitlines()]
        assert [r["n_osc"] for r in rows] == [2, 4, 8, 16]
        hm1 = [r["defect_hm1"] for r in rows]
        assert all(a > b for a, b in zip(hm1, hm1[1:]))


class TestErrors:
    def test_cfl(self, tmp_path, tg_ic_file, capsys):
        code = run("solve2d", "--out", tmp_path / "r", "--ic", tg_ic_file, "--n", 16, "--dt", 0.1)
        assert code == 2
        assert "CFL" in capsys.readouterr().err

    def test_missing_stage_outputs(self, tmp_path, capsys):
        code = run("lift", "--out", tmp_path / "empty")
        assert code == 2
        assert "run.json" in capsys.readouterr().err

    def test_certify_before_pump(self, tmp_path, tg_ic_file, capsys):
        out = tmp_path / "run"
        pipeline(out, tg_ic_file, *SMALL, stages=("solve2d", "lift"))
        assert run("certify", "--out", out) == 2
        assert "pump.json" in capsys.readouterr().err

    def test_missing_ic(self, tmp_path):
        assert run("solve2d", "--out", tmp_path / "r") == 2

    def test_bad_tolerance(self, tmp_path, tg_ic_file):
        args = ("solve2d", "--out", tmp_path / "r", "--ic", tg_ic_file, *SMALL)
        assert run(*args, "--tolerance", "nonsense=1") == 2
        assert run(*args, "--tolerance", "energy_budget") == 2

    def test_unaligned_t_end(self, tmp_path, tg_ic_file):
        assert run("solve2d", "--out", tmp_path / "r", "--ic", tg_ic_file,
                   "--n", 16, "--dt", 0.03, "--t-end", 0.1) == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["explode"])
        assert exc.value.code == 2

    def test_tolerance_override_flips_verdict(self, tmp_path, tg_ic_file):
        out = tmp_path / "run"
        pipeline(out, tg_ic_file, *SMALL)
        assert run("certify", "--out", out, "--tolerance", "initial_closeness=-0.5") == 1


class TestConfig:
    def test_eta_from_epsilon(self):
        cfg = RunConfig(epsilon=0.2).resolve()
        assert cfg.eta == pytest.approx(0.02)

    def test_defaults(self):
        cfg = RunConfig().resolve()
        assert (cfg.n, cfg.stride, cfg.eta, cfg.pump_n_osc) == (64, 10, 0.1, 8)

    def test_file(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("n = 32  # grid\ntolerance.energy_budget = 1e-9\npump_xi = 1 1\n")
        d = parse_config_file(p)
        assert d["n"] == "32" and d["tolerance"] == {"energy_budget": 1e-9}

    def test_file_unknown_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("colour = red\n")
        with pytest.raises(UsageError):
            parse_config_file(p)

    def test_flags_override_file(self, tmp_path, tg_ic_file):
        p = tmp_path / "c.cfg"
        p.write_text("n = 32\nstride = 5\n")
        out = tmp_path / "r"
        assert run("solve2d", "--config", p, "--n", 16, "--dt", 0.01, "--t-end", 0.1,
                   "--out", out, "--ic", tg_ic_file) == 0
        cfg = json.loads((out / "run.json").read_text())["config"]
        assert (cfg["n"], cfg["stride"]) == (16, 5)
