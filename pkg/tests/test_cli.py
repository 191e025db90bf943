import csv
import json
import subprocess
import sys

import pytest

from phex.cli import main

SUBSUMPTION_GRAPH = {
    "labels": ["animal", "dog"],
    "edges": [{"kind": "subsumption", "parent": "animal", "child": "dog", "u": 2.0}],
}


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def files(tmp_path):
    return {
        "plain": write(tmp_path / "plain.json", json.dumps({"labels": ["a", "b"], "edges": []})),
        "sub": write(tmp_path / "sub.json", json.dumps(SUBSUMPTION_GRAPH)),
        "zeros": write(tmp_path / "zeros.csv", "a,b\n0,0\n"),
        "sub_scores": write(tmp_path / "s.csv", "dog,animal\n0,0\n0.3,-1.2\n"),
        "dir": tmp_path,
    }


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_infer_edgeless_half(files, capsys):
    code, out, _ = run(["infer", "--graph", files["plain"], "--scores", files["zeros"], "--method", "exact"], capsys)
    assert code == 0
    assert json.loads(out)[0]["marginals"] == {"a": 0.5, "b": 0.5}


def test_infer_lbp_clamp_matches_exact(files, capsys):
    res = {}
    for method in ("exact", "lbp"):
        code, out, _ = run(
            ["infer", "--graph", files["sub"], "--scores", files["sub_scores"], "--method", method, "--clamp", "dog=+1"],
            capsys,
        )
        assert code == 0
        res[method] = json.loads(out)
    for e, l in zip(res["exact"], res["lbp"]):
        assert abs(e["marginals"]["animal"] - l["marginals"]["animal"]) <= 1e-6
        assert l["marginals"]["dog"] == 1.0


def test_compile_dump(files, capsys):
    code, out, _ = run(["compile", "--graph", files["sub"]], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["J"] == [[0, 1, -2.0]] and doc["h"] == [-2.0, 2.0]


def test_gradcheck(files, capsys):
    code, out, _ = run(["gradcheck", "--graph", files["sub"], "--scores", files["sub_scores"], "--target", "dog=+1"], capsys)
    assert code == 0
    assert all(r["max_rel_error"] <= 1e-6 for r in json.loads(out))


@pytest.fixture(scope="module")
def task_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("task")
    argv = ["synth", "--task", "zeroshot", "--seed", "3", "--out-dir", str(d / "z")]
    assert main(argv) == 0
    return d / "z"


def test_synth_writes_dataset(task_dir):
    names = sorted(p.name for p in task_dir.iterdir())
    assert names == ["graph.json", "task.json", "test.jsonl", "train.jsonl", "val.jsonl"]
    meta = json.loads((task_dir / "task.json").read_text())
    assert meta["eval_labels"] == ["class10", "class11", "class12"]


def test_train_eval_pipeline(task_dir, tmp_path, capsys):
    model = tmp_path / "m.json"
    argv = ["train", "--graph", task_dir / "graph.json", "--data", task_dir / "train.jsonl", "--out", model, "--u", "0.5", "--epochs", "2"]
    assert run(argv, capsys)[0] == 0
    code, out, _ = run(
        ["eval", "--graph", task_dir / "graph.json", "--model", model, "--data", task_dir / "test.jsonl", "--u", "0.5",
         "--candidates", "class10,class11,class12"],
        capsys,
    )
    rep = json.loads(out)
    assert code == 0 and rep["n"] == 300
    assert 0 <= rep["top1"] <= rep["top5"] <= 1


def test_sweep_rows_per_u(task_dir, capsys):
    code, out, _ = run(["sweep", "--data-dir", task_dir, "--u", "0,0.1,0.3,0.5,0.7,1.0,1.5", "--epochs", "1", "--no-hard"], capsys)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0
    assert [float(r["u"]) for r in rows] == [0, 0.1, 0.3, 0.5, 0.7, 1.0, 1.5]
    assert sum(int(r["selected"]) for r in rows) == 1


def test_exit_code_validation_errors(files, capsys):
    bad = write(files["dir"] / "bad.json", '{"labels": ["a", "a"], "edges": []}')
    for argv in (
        ["infer", "--graph", bad, "--scores", files["zeros"]],
        ["infer", "--graph", files["plain"], "--scores", files["zeros"], "--clamp", "zzz=+1"],
        ["infer", "--graph", files["plain"], "--scores", files["zeros"], "--clamp", "a=2"],
        ["infer", "--graph", files["sub"], "--scores", files["zeros"]],
        ["compile", "--graph", files["dir"] / "missing.json"],
        ["gradcheck", "--graph", files["plain"], "--scores", files["zeros"]],
    ):
        code, out, err = run(argv, capsys)
        assert code == 1 and err.startswith("phex: error")


def test_exit_code_numerical_failure(files, capsys):
    data = write(files["dir"] / "d.jsonl", '{"x": [1e300], "targets": [{"label": "a", "state": 1}]}\n')
    argv = ["train", "--graph", files["plain"], "--data", data, "--out", files["dir"] / "m.json", "--lr", "1e300"]
    code, _, err = run(argv, capsys)
    assert code == 2 and "numerical failure" in err


def test_hard_edges_with_lbp_is_exit_1(files, capsys):
    g = write(files["dir"] / "h.json", json.dumps({"labels": ["a", "b"], "edges": [{"kind": "exclusion", "a": "a", "b": "b", "hard": True}]}))
    code, _, err = run(["infer", "--graph", g, "--scores", files["zeros"], "--method", "lbp"], capsys)
    assert code == 1 and "hard" in err
    code, out, _ = run(["infer", "--graph", g, "--scores", files["zeros"], "--method", "hex"], capsys)
    assert code == 0 and json.loads(out)[0]["marginals"]["a"] == pytest.approx(1 / 3)


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "phex.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sweep" in res.stdout
