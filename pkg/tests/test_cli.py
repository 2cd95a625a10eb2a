import csv
import json

import pytest

from regent.automata import build_tomita, deserialize, minimize, serialize
from regent.cli import main
from regent.datagen import read_dataset


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_dfa_build_minimize_accepts(tmp_path, capsys):
    f = tmp_path / "t4.dfa"
    assert run(capsys, "dfa", "build", "--family", "tomita", "--id", 4, "--out", f)[0] == 0
    assert deserialize(f.read_text()) == minimize(build_tomita(4))
    rc, out, _ = run(capsys, "dfa", "minimize", f)
    assert rc == 0 and out == f.read_text()
    rc, out, _ = run(capsys, "dfa", "minimize", f, "--dot")
    assert out.startswith("digraph")
    assert run(capsys, "dfa", "accepts", f, "0100")[1].strip() == "accept"
    assert run(capsys, "dfa", "accepts", f, "1000", "--status")[0] == 1
    assert run(capsys, "dfa", "accepts", f, "ε")[1].strip() == "accept"


def test_build_other_families(tmp_path, capsys):
    for argv in (["--family", "sl4"], ["--family", "sp8"], ["--family", "sl", "--alphabet", "ab", "--factors", "aa,^b"],
                 ["--family", "random", "--states", 6, "--alphabet-size", 3]):
        rc, out, _ = run(capsys, "dfa", "build", *argv)
        assert rc == 0 and out.startswith("dfa v1")
    assert run(capsys, "dfa", "build", "--family", "tomita")[0] == 2


def test_entropy_classify_rings(tmp_path, capsys):
    f = tmp_path / "t3.dfa"
    f.write_text(serialize(minimize(build_tomita(3))))
    rc, out, _ = run(capsys, "entropy", f, "--nmax", 48)
    data = json.loads(out)
    assert data["class"] == "Exponential" and data["curve"][48]["N"] == 48
    rc, out, _ = run(capsys, "classify", f)
    assert out.splitlines()[0] == "class: Exponential"
    rc, _, _ = run(capsys, "rings", f, "--nmax", 3, "--out", tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert len(rows) == 1 + 1 + 2 + 4 + 8


def test_classify_large_alphabet_needs_flag(tmp_path, capsys):
    f = tmp_path / "sl4.dfa"
    run(capsys, "dfa", "build", "--family", "sl4", "--out", f)
    assert run(capsys, "classify", f)[0] == 2
    assert run(capsys, "classify", f, "--generalized")[0] == 0


def test_gen_construct_eval(tmp_path, capsys):
    d = tmp_path / "d"
    assert run(capsys, "gen", "--family", "tomita", "--id", 3, "--protocol", "tomita", "--seed", 1, "--out", d)[0] == 0
    tr = read_dataset(d / "train.ds")
    assert tr.dfa_ref == "grammar.dfa" and len(tr) > 0
    first = (d / "train.ds").read_bytes()
    run(capsys, "gen", "--family", "tomita", "--id", 3, "--protocol", "tomita", "--seed", 1, "--out", d)
    assert (d / "train.ds").read_bytes() == first
    m = tmp_path / "m.json"
    assert run(capsys, "construct", d / "grammar.dfa", "--out", m)[0] == 0
    rc, out, _ = run(capsys, "eval", "--model", m, "--data", d / "test.ds")
    assert json.loads(out)["test"]["f1"] == 1.0
    rc, out, _ = run(capsys, "fit-first-order", d / "grammar.dfa", "--mode", "srn")
    assert json.loads(out)["residual"] > 0.1


def test_gen_other_protocols(tmp_path, capsys):
    rc, out, _ = run(capsys, "gen", "--family", "sp8", "--protocol", "slsp", "--train-size", 1000, "--out", tmp_path / "s")
    assert rc == 0 and len(read_dataset(tmp_path / "s" / "test2.ds")) == 2000
    rc, _, _ = run(capsys, "gen", "--family", "random", "--states", 8, "--alphabet-size", 12, "--protocol", "sparse",
                   "--sparsity", 0.125, "--out", tmp_path / "r")
    assert rc == 0
    assert len(read_dataset(tmp_path / "r" / "train.ds")) == 2000


def test_train_norms_and_exit_codes(tmp_path, capsys):
    d = tmp_path / "d"
    run(capsys, "gen", "--family", "tomita", "--id", 2, "--out", d)
    (tmp_path / "run.cfg").write_text("kind = RNN2\nbudget = SRN:10\nepochs = 2\ntrain = d/train.ds\ntest = d/test.ds\n")
    rc, out, _ = run(capsys, "train", "--config", tmp_path / "run.cfg", "--out", tmp_path / "o")
    assert rc == 0 and json.loads(out)["n_h"] == 7
    for name in ("report.json", "trace.csv", "model.json"):
        assert (tmp_path / "o" / name).exists()
    rc, out, _ = run(capsys, "norms", tmp_path / "o" / "report.json", "--csv", tmp_path / "t.csv")
    assert rc == 0 and json.loads(out)["dominant"] in ("W", "b")
    (tmp_path / "bad.cfg").write_text("kind = RNN2\nn_h = two\n")
    assert run(capsys, "train", "--config", tmp_path / "bad.cfg")[0] == 2
    (tmp_path / "div.cfg").write_text("kind = RNN2\nn_h = 4\nactivation = linear\ninit_low = -1e30\n"
                                      "init_high = 1e30\nepochs = 1\ntrain = d/train.ds\n")
    assert run(capsys, "train", "--config", tmp_path / "div.cfg")[0] == 3
    assert run(capsys, "dfa", "minimize", tmp_path / "missing.dfa")[0] == 2
    (tmp_path / "broken.dfa").write_text("dfa v1\nalphabet 0 1\nstates x\n")
    rc, _, err = run(capsys, "dfa", "minimize", tmp_path / "broken.dfa")
    assert rc == 2 and "line 3" in err


def test_grid_cli(tmp_path, capsys):
    (tmp_path / "g.cfg").write_text("grammars = tomita1\nkinds = SRN, UNI\nanchor = SRN:10\nepochs = 1\n")
    rc, out, _ = run(capsys, "grid", "--config", tmp_path / "g.cfg", "--out", tmp_path / "res")
    assert rc == 0 and len(out.strip().splitlines()) == 2
    rows = list(csv.DictReader(open(tmp_path / "res" / "results.csv")))
    assert [r["kind"] for r in rows] == ["SRN", "UNI"] and rows[1]["n_h"] == "6"


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
