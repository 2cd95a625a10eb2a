import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regent.automata import Alphabet, build_tomita, minimize, serialize
from regent.datagen import LabeledDataset, sample_split, tomita_protocol, write_dataset
from regent.harness import (
    ConfigError,
    GridConfig,
    Metrics,
    NumericalFailure,
    RunReport,
    TrainConfig,
    evaluate,
    grid,
    norm_trace_report,
    resolve_grammar,
    train,
)
from regent.harness import metrics_from
from regent.neural import construct_2rnn


def test_metric_examples():
    m = Metrics.from_confusion(3, 1, 2, 4)
    assert m.f1 == pytest.approx(2 * (3 / 4) * (3 / 5) / ((3 / 4) + (3 / 5)))
    assert m.f1 == pytest.approx(2 / 3)
    assert m.bcr == pytest.approx((3 / 5 + 4 / 5) / 2)
    perfect = metrics_from([True, False, True], [True, False, True])
    assert perfect.f1 == perfect.bcr == perfect.accuracy == 1.0
    neg = metrics_from([False] * 10, [True] * 5 + [False] * 5)
    assert neg.f1 == 0.0 and neg.bcr == 0.5
    # no positives at all: nothing to get wrong on the positive class
    assert metrics_from([False] * 4, [False] * 4).f1 == 1.0
    assert metrics_from([True, False], [False, False]).f1 == 0.0
    assert metrics_from([True, True], [True, True]).bcr == 1.0


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60), st.randoms())
@settings(max_examples=60, deadline=None)
def test_metrics_permutation_invariant_and_bounded(pairs, rnd):
    p, y = zip(*pairs)
    a = metrics_from(p, y)
    idx = list(range(len(pairs)))
    rnd.shuffle(idx)
    b = metrics_from([p[i] for i in idx], [y[i] for i in idx])
    assert a == b
    for v in (a.f1, a.bcr, a.accuracy):
        assert 0.0 <= v <= 1.0


@pytest.mark.parametrize("k", range(1, 8))
def test_construction_scores_perfectly(k):
    d = minimize(build_tomita(k))
    tr, te = tomita_protocol(d, 0, train_cap=100, test_cap=200)
    m = construct_2rnn(d)
    assert evaluate(m, tr).f1 == 1.0
    assert evaluate(m, te).f1 == 1.0
    rev = list(reversed(te.items))
    assert evaluate(m, rev) == evaluate(m, te)


def _tiny_train(k=4, cap=20, seed=0):
    d = minimize(build_tomita(k))
    return tomita_protocol(d, seed, train_cap=cap, test_cap=50)


def test_constant_label_problem():
    items = [((0,) * L, True) for L in range(1, 30)] + [((1,) * L, True) for L in range(1, 30)]
    ds = LabeledDataset(Alphabet(("0", "1")), items)
    rep = train(TrainConfig(kind="SRN", n_h=4, epochs=30, seed=1), ds, {"self": ds})
    assert rep.history[-1]["train_f1"] == 1.0
    assert rep.metrics["self"]["f1"] == 1.0


def test_determinism_and_trace_integrity():
    tr, te = _tiny_train()
    cfg = TrainConfig(kind="UNI", n_h=4, epochs=4, batch_size=16, seed=3)
    a = train(cfg, tr, {"test": te})
    b = train(cfg, tr, {"test": te})
    da, db = a.to_dict(with_trace=True), b.to_dict(with_trace=True)
    da.pop("wall_time"), db.pop("wall_time")
    assert da == db
    n_fit = len(tr) - round(len(tr) * 0.1)
    assert a.steps == len(a.trace) == math.ceil(n_fit / 16) * a.epochs_run
    assert a.groups == ["W", "U", "V", "b"]
    rows = list(csv.reader(a.trace_csv().splitlines()))
    assert rows[0] == ["step", "W", "U", "V", "b"] and len(rows) == a.steps + 1


def test_best_checkpoint_keeps_perfect_train_f1():
    tr, te = tomita_protocol(minimize(build_tomita(1)), 0)
    rep = train(TrainConfig(kind="UNI", n_h=8, epochs=60, seed=0), tr, {"test": te})
    reached = [h for h in rep.history if h.get("train_f1") == 1.0]
    assert reached
    fit_f1 = [h for h in rep.history if h["epoch"] == rep.best_epoch][0]["train_f1"]
    assert fit_f1 == 1.0
    # early stop: the run ended at most `patience` epochs after the streak began
    assert rep.epochs_run < 60


def test_numerical_failure_keeps_partial_trace():
    tr, _ = _tiny_train(cap=40)
    cfg = TrainConfig(kind="RNN2", n_h=6, activation="linear", epochs=3, seed=0, init_low=-1e30, init_high=1e30)
    with pytest.raises(NumericalFailure) as exc:
        train(cfg, tr, {})
    rep = exc.value.report
    assert rep.status == "diverged"
    assert len(rep.trace) == rep.steps


def test_norm_trace_report_cases():
    base = dict(config={}, spec={}, param_count=0, metrics={}, history=[], epochs_run=1, best_epoch=1, wall_time=0.0)
    flat = RunReport(groups=["W", "b"], trace=[[1.0, 2.0]] * 4, initial_norms=[1.0, 2.0], steps=4, **base)
    s = norm_trace_report(flat)
    assert s.degenerate and s.ratio is None
    only_w = RunReport(groups=["W", "b"], trace=[[1.1, 2.0], [1.3, 2.0], [1.2, 2.0]], initial_norms=[1.0, 2.0],
                       steps=3, **base)
    s = norm_trace_report(only_w)
    assert s.dominant == "W" and s.ratio == 1.0
    assert s.variation["W"] == pytest.approx(0.1 + 0.2 + 0.1)
    rep = train(TrainConfig(kind="SRN", n_h=3, epochs=2, lr=0.0), *_tiny_train()[:1], {})
    assert norm_trace_report(rep).degenerate


def test_config_parsing(tmp_path):
    d = minimize(build_tomita(2))
    (tmp_path / "g.dfa").write_text(serialize(d))
    tr, te = tomita_protocol(d, 0, train_cap=30, test_cap=30)
    tr.dfa_ref = te.dfa_ref = "g.dfa"
    write_dataset(tr, tmp_path / "train.ds")
    write_dataset(te, tmp_path / "test.ds")
    (tmp_path / "run.cfg").write_text(
        "kind = rnn2\nbudget = SRN:10   # anchor\nepochs = 2\ntrain = train.ds\ntest = test.ds\nseed = 4\n")
    cfg = TrainConfig.from_file(tmp_path / "run.cfg")
    assert cfg.kind == "RNN2" and cfg.hidden_size(2) == 7
    assert cfg.train == str(tmp_path / "train.ds")
    rep = train(cfg)
    assert set(rep.metrics) == {"test"} and rep.spec["n_h"] == 7
    (tmp_path / "bad.cfg").write_text("kind = SRN\nn_h = 3\nlearning = 1\n")
    with pytest.raises(ConfigError):
        TrainConfig.from_file(tmp_path / "bad.cfg")
    with pytest.raises(ConfigError):
        TrainConfig(kind="SRN", n_h=3, batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(kind="SRN")
    with pytest.raises(ConfigError):
        TrainConfig.from_file(tmp_path / "missing.cfg")


def test_label_verification_against_header(tmp_path):
    d = minimize(build_tomita(2))
    (tmp_path / "g.dfa").write_text(serialize(d))
    ds = sample_split(d, [2, 3], 8, seed=0)
    ds.items[0] = (ds.items[0][0], not ds.items[0][1])
    ds.dfa_ref = "g.dfa"
    write_dataset(ds, tmp_path / "bad.ds")
    with pytest.raises(ValueError):
        train(TrainConfig(kind="SRN", n_h=2, epochs=1, train=str(tmp_path / "bad.ds")))


def test_resolve_grammar():
    assert resolve_grammar("tomita3").n == 5
    assert resolve_grammar("Tomita-6").n == 3
    assert len(resolve_grammar("sl4").alphabet) == 4
    with pytest.raises(ConfigError):
        resolve_grammar("nonsense")


def test_grid_budget_mode_and_ordering(tmp_path):
    gc = GridConfig.from_mapping({
        "grammars": "tomita4, tomita1", "kinds": "RNN2, SRN", "seeds": "1, 0",
        "anchor": "SRN:10", "epochs": "1", "batch_size": "200",
    })
    res = grid(gc, tmp_path)
    keys = [k for k, _ in res]
    assert keys == sorted(keys)
    assert len(keys) == 2 * 2 * 2
    assert {k[2] for k in keys if k[1] == "RNN2"} == {7}
    rows = list(csv.DictReader(open(tmp_path / "results.csv")))
    assert [r["grammar"] for r in rows] == sorted(r["grammar"] for r in rows)
    full = json.loads((tmp_path / "results.json").read_text())
    assert len(full) == 8
    assert (tmp_path / "runs" / "tomita1_RNN2_7_0" / "trace.csv").exists()


@pytest.mark.slow
def test_grid_cardinality_and_parallel_equals_sequential():
    raw = {"grammars": "tomita1, tomita2, tomita6", "kinds": "SRN, MIRNN, MRNN, RNN2, LSTM, GRU, UNI",
           "sizes": "3", "seeds": "0", "epochs": "1", "batch_size": "500"}
    seq = grid(GridConfig.from_mapping(raw))
    assert len(seq) == 21
    par = grid(GridConfig.from_mapping(dict(raw, workers="3")))
    strip = lambda r: {k: v for k, v in r.to_dict(with_trace=True).items() if k != "wall_time"}  # noqa: E731
    assert [(k, strip(r)) for k, r in seq] == [(k, strip(r)) for k, r in par]


def test_grid_config_errors():
    with pytest.raises(ConfigError):
        GridConfig.from_mapping({"kinds": "SRN", "sizes": "3"})
    with pytest.raises(ConfigError):
        GridConfig.from_mapping({"grammars": "tomita1", "kinds": "SRN"})
    with pytest.raises(ConfigError):
        GridConfig.from_mapping({"grammars": "tomita1", "kinds": "SRN", "sizes": "3", "bogus": "1"})
