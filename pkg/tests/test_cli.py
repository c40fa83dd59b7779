import json
import textwrap

import pytest

from rvstar.cli import load_experiment, main, run
from rvstar.errors import ConfigError, TaskError, UnknownSuite
from rvstar.verify import run_suite

MINIMAL = """
[run]
n = 10000
seed = 3
tasks = ["simulate", "hill"]

[space]
kind = "euclidean"
dim = 1

[model]
kind = "iid_pareto"
alpha = 1.0
"""


def write(tmp_path, text, name="exp.toml"):
    f = tmp_path / name
    f.write_text(textwrap.dedent(text))
    return f


def test_minimal_config(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL)
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["status"] == "ok"
    assert report["version"] == "0.1.0"
    assert len(report["config_hash"]) == 64
    hill = next(t for t in report["tasks"] if t["task"] == "hill")
    assert abs(hill["summary"]["alpha_hat"] - 1.0) < 0.15
    assert json.loads(capsys.readouterr().out)["status"] == "ok"


def test_same_config_twice_gives_identical_csvs(tmp_path):
    cfg = write(tmp_path, MINIMAL.replace('["simulate", "hill"]', '["simulate", "extremogram", "tailmeasure"]'))
    run(cfg, output_dir=str(tmp_path / "a"))
    run(cfg, output_dir=str(tmp_path / "b"))
    csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert len(csvs) >= 4
    for name in csvs:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_overrides_and_env(tmp_path, monkeypatch):
    cfg = write(tmp_path, MINIMAL)
    monkeypatch.setenv("RVSTAR_OUTPUT_DIR", str(tmp_path / "env"))
    report = run(cfg, ["run.n=2000", "model.alpha=2.0"])
    assert (tmp_path / "env" / "series.csv").exists()
    assert report.tasks[0]["summary"]["n"] == 2000


def test_undefined_model_names_the_field(tmp_path, capsys):
    cfg = write(tmp_path, """
        [run]
        tasks = ["simulate"]
        model = "missing"
    """)
    with pytest.raises(ConfigError) as info:
        load_experiment(cfg)
    assert info.value.field == "run.model"
    assert info.value.line == 4
    assert main(["run", str(cfg)]) == 2
    assert "run.model" in capsys.readouterr().err


def test_named_model_and_space_blocks(tmp_path):
    cfg = write(tmp_path, """
        [run]
        n = 500
        tasks = ["simulate", "validate_space"]
        model = "ar"
        space = "plane"

        [spaces.plane]
        kind = "euclidean"
        dim = 2

        [models.ar]
        kind = "ar1_positive"
        phi = 0.5
        alpha = 2.0

        [task.validate_space]
        n_samples = 500
    """)
    exp = load_experiment(cfg)
    assert exp.model.space.dim == 2
    report = run(cfg, output_dir=str(tmp_path / "o"))
    assert [t["status"] for t in report.tasks] == ["ok", "ok"]


@pytest.mark.parametrize(
    "text, field",
    [
        ("[run]\ntasks = ['dance']\n", "run.tasks"),
        ("[run]\ntasks = ['simulate']\nn = -4\n[model]\nkind = 'iid_pareto'\nalpha = 1\n", "run.n"),
        ("[run]\ntasks = ['simulate']\n[model]\nkind = 'iid_pareto'\nalpha = -1\n", "model"),
        ("[run]\ntasks = ['hill']\n", "run.tasks"),
        ("[run]\ntasks = ['simulate']\n[model]\nkind = 'iid_pareto'\nalpha = 1\n[task.simulate]\nfoo = 1\n",
         "task.simulate.foo"),
        ("[run]\ntasks = ['verify_nuk']\n[model]\nkind = 'iid_pareto'\nalpha = 1\n[task.verify_nuk]\nf = 'x('\n",
         "task.verify_nuk.f"),
    ],
)
def test_config_errors_are_raised_before_work(tmp_path, text, field):
    cfg = write(tmp_path, text)
    with pytest.raises(ConfigError) as info:
        run(cfg, output_dir=str(tmp_path / "never"))
    assert info.value.field == field
    assert not (tmp_path / "never").exists()


def test_toml_syntax_error_has_line(tmp_path):
    cfg = write(tmp_path, "[run]\ntasks = [\n")
    with pytest.raises(ConfigError) as info:
        load_experiment(cfg)
    assert info.value.line is not None


def test_failing_task_leaves_partial_report(tmp_path):
    cfg = write(tmp_path, MINIMAL.replace('["simulate", "hill"]', '["simulate", "hill", "extremogram"]')
                .replace("n = 10000", "n = 10").replace("[run]", "[run]\nthreshold = { k = 50 }"))
    with pytest.raises(TaskError) as info:
        run(cfg, output_dir=str(tmp_path / "o"))
    assert info.value.task == "extremogram"
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert [t["status"] for t in report["tasks"]] == ["ok", "ok", "failed"]
    assert report["status"] == "failed"


def test_verify_suite_exit_codes(capsys):
    assert main(["verify", "axioms", "--scale", "smoke"]) == 0
    summary = json.loads(capsys.readouterr().out)
    flagged = [c for c in summary["suites"][0]["checks"] if "weighted_hilbert" in c["name"]]
    assert flagged and flagged[0]["pass"]
    assert main(["verify", "timechange"]) == 0
    assert main(["verify", "bogus"]) == 2


def test_unknown_suite_raises():
    with pytest.raises(UnknownSuite):
        run_suite("bogus")


def test_ingest_command(tmp_path, capsys):
    good = tmp_path / "g.csv"
    good.write_text("x0,x1\n3,4\n6,8\n")
    out = tmp_path / "copy.csv"
    assert main(["ingest", str(good), "--space", '{ kind = "euclidean", dim = 2 }', "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 2 and summary["modulus_max"] == 10.0
    assert out.read_text().startswith("# space = ")
    bad = tmp_path / "b.csv"
    bad.write_text("x0,x1\n3,4\nnan,8\n")
    assert main(["ingest", str(bad), "--space", '{ kind = "euclidean", dim = 2 }']) == 2
    assert "row 2" in capsys.readouterr().err
    assert main(["ingest", str(good), "--space", '{ kind = "euclidean", dim = 3 }']) == 2
