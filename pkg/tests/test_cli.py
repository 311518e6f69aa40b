import csv
import json

import pytest

from lsnn.artifacts import CROSS_HEADER, HISTORY_HEADER, LINES_HEADER, METRICS_HEADER
from lsnn.cli import main
from lsnn.config import ConfigError, RunConfig, load_config, parse_config, resolve_rho
from lsnn.network import Architecture, param_count_paper
from lsnn.reproduce import COMPARE_HEADER, TABLES, reproduce, scale_spec
from lsnn.trainer import RunSpec

TRAIN_CFG = """\
# two-layer vline run
mode = train
problem = vline
arch = 2-4-1
iterations = 40
schedule = fixed:0.003
rho = h/2
seeds = 0,1
output_dir = out
"""


def _header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))[1:]


@pytest.mark.parametrize("text,h,expect", [
    ("0.005", 0.01, 0.005), ("h/2", 0.01, 0.005), ("h*0.1", 0.01, 0.001), ("0.1h", 0.01, 0.001),
    ("1/10*h", 0.01, 0.001), ("H / 4", 0.02, 0.005), (None, 0.01, None),
])
def test_resolve_rho(text, h, expect):
    assert resolve_rho(text, h) == pytest.approx(expect) if expect else resolve_rho(text, h) is None


def test_parse_config_fields():
    cfg = parse_config(TRAIN_CFG + "k = 3\nboundary_weight = 10\nscale_by_speed = no\n")
    assert cfg.problem == "vline" and cfg.arch == "2-4-1" and cfg.iterations == 40
    assert cfg.seed_list() == [0, 1, 2]
    assert cfg.boundary_weight == 10.0 and cfg.scale_by_speed is False
    assert cfg.rho_value() == pytest.approx(0.005)
    spec = cfg.run_spec()
    assert spec.rho == pytest.approx(0.005) and spec.iterations == 40
    assert cfg.text.startswith("# two-layer")


def test_seed_alias_and_stages():
    cfg = parse_config("mode = continuation\nseed = 7\nstage = sectors:2 2-5-5-1 10 fixed:0.003\n"
                       "stage = rotational 2-6-6-1 10 fixed:0.003\n").validate()
    assert cfg.seed_list() == [7] and len(cfg.stages) == 2


@pytest.mark.parametrize("extra,field", [
    ("rho = 0.02\n", "rho"),
    ("rho = 2h\n", "rho"),
    ("h = 0.03\n", "h"),
    ("arch = 2-4-2\n", "arch"),
    ("schedule = step:0.01,0.004,10\n", "schedule"),
    ("mode = fly\n", "mode"),
    ("problem = moon\n", "problem"),
    ("k = 0\n", "k"),
    ("boundary_weight = -1\n", "boundary_weight"),
])
def test_invalid_configs_name_the_field(extra, field):
    text = "\n".join(l for l in TRAIN_CFG.splitlines() if not l.startswith(extra.split("=")[0].strip()))
    with pytest.raises(ConfigError) as err:
        parse_config(text + "\n" + extra).validate()
    assert err.value.field == field
    assert str(err.value).startswith(field + ":")


def test_parse_errors():
    with pytest.raises(ConfigError):
        parse_config("colour = red\n")
    with pytest.raises(ConfigError):
        parse_config("arch = 2-4-1\narch = 2-6-1\n")
    with pytest.raises(ConfigError):
        parse_config("no equals sign\n")
    with pytest.raises(ConfigError):
        parse_config("iterations = many\n")


def test_defaults_validate():
    RunConfig().validate()


def test_run_end_to_end(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LSNN_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "run.cfg"
    cfg.write_text(TRAIN_CFG)
    assert main(["run", str(cfg), "--dump-init"]) == 0
    out = tmp_path / "out"
    assert _header(out / "metrics.csv") == METRICS_HEADER
    rows = _rows(out / "metrics.csv")
    assert [r[2] for r in rows] == ["0", "1"] and all(r[-1] == "ok" for r in rows)
    assert (out / "best_seed.txt").read_text().strip() in ("0", "1")
    for seed in ("seed_0", "seed_1"):
        d = out / seed
        assert _header(d / "history.csv") == HISTORY_HEADER
        assert _header(d / "cross_section.csv") == CROSS_HEADER
        assert _header(d / "breaking_lines.csv") == LINES_HEADER
        assert (d / "checkpoint.ckpt").exists() and (d / "summary.json").exists()
    init = _rows(out / "init_system.csv")
    assert _header(out / "init_system.csv") == ["row", "A0", "A1", "A2", "A3", "A4", "F", "c"]
    assert len(init) == 5
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"] == TRAIN_CFG and man["seeds"] == [0, 1] and man["status"] == 0
    assert "best seed" in capsys.readouterr().out


def test_run_rejects_bad_rho_with_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(TRAIN_CFG.replace("rho = h/2", "rho = 0.02"))
    assert main(["run", str(cfg)]) == 2
    assert "rho" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_verify_gradient_suite(tmp_path, capsys):
    assert main(["verify", "--suite", "gradient", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "gradient: 15 passed, 0 failed" in text
    assert _header(tmp_path / "verify.csv") == ["suite", "check", "passed", "detail"]


def test_report_and_inspection_commands(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LSNN_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "run.cfg"
    cfg.write_text(TRAIN_CFG.replace("seeds = 0,1", "seeds = 0"))
    assert main(["run", str(cfg)]) == 0
    ckpt = tmp_path / "out" / "seed_0" / "checkpoint.ckpt"
    rep = tmp_path / "report.cfg"
    rep.write_text(f"mode = report\nproblem = vline\narch = 2-4-1\ncheckpoint = {ckpt}\noutput_dir = rep\n")
    assert main(["run", str(rep)]) == 0
    assert _rows(tmp_path / "rep" / "metrics.csv")[0][:2] == ["vline", "2-4-1"]
    assert (tmp_path / "rep" / "cross_section.csv").exists()
    capsys.readouterr()
    assert main(["cross-section", str(ckpt), "y=0.5", "--problem", "vline", "--samples", "11"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == ",".join(CROSS_HEADER) and len(lines) == 12
    assert main(["breaking-lines", str(ckpt), "--problem", "vline", "--out", str(tmp_path / "bl.csv")]) == 0
    assert _header(tmp_path / "bl.csv") == LINES_HEADER
    assert main(["cross-section", str(ckpt), "y=9", "--problem", "vline"]) == 1


def test_scale_spec_shortens_schedule():
    spec = RunSpec("rotational", "2-40-40-1", 150000, "halving:0.005,50000")
    s = scale_spec(spec, 0.01)
    assert s.iterations == 1500 and s.schedule == "halving:0.005,500"
    assert scale_spec(spec, 1.0) is spec


def test_table_presets():
    assert [r.spec.arch for r in TABLES[1]] == ["2-4-1", "2-200-1"]
    assert [r.spec.arch for r in TABLES[6]] == ["2-40-40-1", "2-30-30-30-1"]
    assert all(r.spec.iterations == 150000 and r.spec.schedule == "halving:0.005,50000" for r in TABLES[6])
    for rows in TABLES.values():
        for r in rows:
            assert param_count_paper(Architecture.parse(r.spec.arch)) == r.paper[3]


def test_reproduce_writes_comparison(tmp_path):
    out = reproduce(1, tmp_path, iters_scale=0.001)
    assert _header(out / "comparison.csv") == COMPARE_HEADER
    rows = _rows(out / "comparison.csv")
    assert [r[2] for r in rows] == ["2-4-1", "2-200-1"]
    assert [r[-1] for r in rows] == ["13", "601"]
    assert len(_rows(out / "metrics.csv")) == 6
    with pytest.raises(ValueError):
        reproduce(9, tmp_path)


def test_load_config_validates(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("arch = 2-4-1\nrho = 0.5\n")
    with pytest.raises(ConfigError, match="rho"):
        load_config(p)
