import math
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regent.automata import build_random, build_tomita, sl4, sp8
from regent.complexity import count_accepted
from regent.datagen import (
    DatasetParseError,
    LabeledDataset,
    TOMITA_TEST_LENGTHS,
    TOMITA_TRAIN_LENGTHS,
    format_dataset,
    parse_dataset,
    read_dataset,
    sample_split,
    slsp_protocol,
    sparse_protocol,
    tomita_protocol,
    write_dataset,
)


def test_small_length_is_enumerated():
    ds = sample_split(build_tomita(1), [5], 1000, balance=False, seed=0)
    assert len(ds) == 32
    assert ds.positives() == count_accepted(build_tomita(1), 5) == 1


def test_cap_one_empty_string():
    ds = sample_split(build_tomita(4), [0], 1, seed=3)
    assert ds.items == [((), True)]


def test_no_duplicates_and_labels_sound():
    d = build_tomita(3)
    ds = sample_split(d, [3, 10, 20, 40], 200, balance=True, seed=4)
    assert len(set(ds.strings)) == len(ds)
    ds.verify(d)
    for L, items in ds.by_length().items():
        assert len(items) == min(200, 2 ** L)


def test_balance_pads_from_majority():
    d = build_tomita(1)
    ds = sample_split(d, [10], 100, balance=True, seed=0)
    # one positive exists at each length; the rest come from the negatives
    assert ds.positives() == 1 and len(ds) == 100
    d3 = build_tomita(3)
    ds = sample_split(d3, [12], 300, balance=True, seed=0)
    assert ds.positives() == 150


def test_canonical_order():
    ds = sample_split(build_tomita(5), [7, 2, 4], 20, seed=1)
    keys = [(len(s), s) for s in ds.strings]
    assert keys == sorted(keys)


def test_determinism_byte_identical(tmp_path):
    d = build_tomita(6)
    a, _ = tomita_protocol(d, seed=9)
    b, _ = tomita_protocol(d, seed=9)
    write_dataset(a, tmp_path / "a.txt")
    write_dataset(b, tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    c, _ = tomita_protocol(d, seed=10)
    assert format_dataset(c) != format_dataset(a)


def test_tomita_protocol_lengths():
    train, test = tomita_protocol(build_tomita(3), seed=2)
    tl = {len(s) for s in train.strings}
    assert tl == set(TOMITA_TRAIN_LENGTHS)
    assert 14 not in tl and 15 not in tl
    by = test.by_length()
    assert set(by) <= set(TOMITA_TEST_LENGTHS)
    assert max(by) == 28
    assert all(len(v) <= 1000 for v in by.values())
    assert not set(train.strings) & set(test.strings)
    # lengths 1 and 4 are fully covered by train, so nothing is left for test
    assert 1 not in by and 4 not in by


def test_uniformity_of_unbalanced_positive_fraction():
    d = build_tomita(4)
    L, cap = 20, 400
    p = count_accepted(d, L) / 2 ** L
    fracs = [sample_split(d, [L], cap, seed=s).positives() / cap for s in range(10)]
    se = math.sqrt(p * (1 - p) / cap) / math.sqrt(10)
    assert abs(statistics.mean(fracs) - p) < 3 * se


@pytest.mark.parametrize("make", [sl4, sp8])
def test_slsp_protocol_sizes(make):
    d = make()
    train, t1, t2 = slsp_protocol(d, seed=0, train_size=10_000)
    assert len(train) == 10_000
    assert len(t1) == len(t2) == 2000
    assert {len(s) for s in train.strings} <= set(range(1, 26))
    assert {len(s) for s in t1.strings} <= set(range(1, 26))
    assert min(len(s) for s in t2.strings) >= 26 and max(len(s) for s in t2.strings) <= 50
    seen = set(train.strings)
    assert not seen & set(t1.strings) and not seen & set(t2.strings)
    import random

    rng = random.Random(0)
    for s, y in rng.sample(train.items, 1000):
        assert (d.run(s) in d.accepting) == y


def test_sparse_protocol_split():
    d = build_random(12, [f"s{i}" for i in range(50)], 0.5, seed=1)
    sizes = {}
    for sp in (0.125, 1.0):
        train, test = sparse_protocol(d, sp, seed=0)
        n = len(train) + len(test)
        sizes[sp] = n
        assert abs(len(train) - 4 * len(test)) <= 5
        assert not set(train.strings) & set(test.strings)
        train.verify(d)
        test.verify(d)
        assert all(1 <= len(s) <= 30 for s in train.strings)
    assert sizes[0.125] == 2500 and sizes[1.0] == 20000
    with pytest.raises(ValueError):
        sparse_protocol(d, 0.3)


def test_file_roundtrip_and_epsilon(tmp_path):
    train, _ = tomita_protocol(build_tomita(2), seed=0, train_cap=20)
    train.dfa_ref = "t2.dfa"
    p = tmp_path / "train.txt"
    write_dataset(train, p)
    lines = p.read_text(encoding="utf-8").splitlines()
    assert lines[:3] == ["dataset v1", "alphabet 0 1", "dfa t2.dfa"]
    assert "1\tε" in lines
    back = read_dataset(p)
    assert back.items == train.items and back.meta == train.meta
    assert back.items[0] == ((), True)


def test_multichar_rows():
    d = build_random(5, ["go", "stop"], 0.5, seed=2)
    ds = sample_split(d, [0, 3], 8, seed=0)
    text = format_dataset(ds)
    assert "go stop" in text or "stop go" in text or "go go" in text
    assert parse_dataset(text).items == ds.items


@pytest.mark.parametrize(
    "text, line",
    [
        ("dataset v2\n", 1),
        ("dataset v1\nalphabet 0 1\nnope\n", 3),
        ("dataset v1\nalphabet 0 1\ndfa -\n1\t01\n0\t012\n", 5),
        ("dataset v1\nalphabet 0 1\ndfa -\n2\t01\n", 4),
        ("dataset v1\nalphabet 0 1\ndfa -\n1 01\n", 4),
    ],
)
def test_parse_errors(text, line):
    with pytest.raises(DatasetParseError) as exc:
        parse_dataset(text)
    assert exc.value.line == line


@given(seed=st.integers(0, 10_000), n=st.integers(1, 8), cap=st.integers(1, 40),
       balance=st.booleans(), lengths=st.lists(st.integers(0, 16), min_size=1, max_size=4))
@settings(max_examples=40, deadline=None)
def test_sample_split_invariants(seed, n, cap, balance, lengths):
    d = build_random(n, "ab", 0.5, seed)
    ds = sample_split(d, lengths, cap, balance, seed)
    ds.verify(d)
    assert len(set(ds.strings)) == len(ds)
    by = ds.by_length()
    for L in set(lengths):
        assert len(by.get(L, [])) == min(cap, 2 ** L)
    assert set(by) <= set(lengths)
    assert parse_dataset(format_dataset(ds)).items == ds.items
