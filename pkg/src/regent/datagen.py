"""Labelled string datasets drawn from a DFA.

Sampling is exact and uniform without replacement.  For each length the
number of completions from every state is tabulated, so the ``r``-th string
(in lexicographic order) of a given length and label can be unranked
directly.  Small pools are enumerated; large ones are sampled by drawing
random ranks and discarding repeats.  Random streams are derived from
``(seed, split, length, label)`` so output never depends on iteration order.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .automata import Alphabet, Dfa

__all__ = [
    "DatasetParseError",
    "LabeledDataset",
    "TOMITA_TEST_LENGTHS",
    "TOMITA_TRAIN_LENGTHS",
    "read_dataset",
    "sample_split",
    "slsp_protocol",
    "sparse_protocol",
    "tomita_protocol",
    "write_dataset",
]

TOMITA_TRAIN_LENGTHS = tuple(range(14)) + (16, 19, 22)
TOMITA_TEST_LENGTHS = tuple(range(1, 29, 3))
TOMITA_TRAIN_CAP = 300
TOMITA_TEST_CAP = 1000
SPARSITIES = (0.125, 0.25, 0.5, 1.0)
EPSILON = "ε"

Item = tuple[tuple[int, ...], bool]


@dataclass
class LabeledDataset:
    alphabet: Alphabet
    items: list[Item]
    meta: dict = field(default_factory=dict)
    dfa_ref: str = "-"

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def strings(self) -> list[tuple[int, ...]]:
        return [s for s, _ in self.items]

    @property
    def labels(self) -> list[bool]:
        return [y for _, y in self.items]

    def positives(self) -> int:
        return sum(self.labels)

    def by_length(self) -> dict[int, list[Item]]:
        out: dict[int, list[Item]] = {}
        for s, y in self.items:
            out.setdefault(len(s), []).append((s, y))
        return out

    def verify(self, dfa: Dfa) -> None:
        """Raise if any label disagrees with ``dfa``."""
        for s, y in self.items:
            if (dfa.run(s) in dfa.accepting) != y:
                raise ValueError(f"label mismatch for {self.alphabet.join(self.alphabet.decode(s))!r}")

    def canonical(self) -> "LabeledDataset":
        items = sorted(set(self.items), key=lambda it: (len(it[0]), it[0]))
        return LabeledDataset(self.alphabet, items, dict(self.meta), self.dfa_ref)


def _canonical(items: Iterable[Item]) -> list[Item]:
    return sorted(items, key=lambda it: (len(it[0]), it[0]))


# --- exact uniform sampling ------------------------------------------------------

class _Sampler:
    """Completion counts for one DFA; unranks strings by (length, label)."""

    def __init__(self, dfa: Dfa):
        self.dfa = dfa
        self.I = len(dfa.alphabet)
        acc = dfa.accepting
        self._tables = {
            True: [[1 if s in acc else 0 for s in range(dfa.n)]],
            False: [[0 if s in acc else 1 for s in range(dfa.n)]],
        }

    def table(self, label: bool, r: int) -> list[int]:
        """Number of length-``r`` continuations from each state ending with ``label``."""
        tab = self._tables[label]
        delta = self.dfa.delta
        while len(tab) <= r:
            prev = tab[-1]
            tab.append([sum(prev[t] for t in row) for row in delta])
        return tab[r]

    def count(self, L: int, label: bool | None) -> int:
        if label is None:
            return self.I ** L
        return self.table(label, L)[self.dfa.start]

    def unrank(self, L: int, label: bool | None, rank: int) -> tuple[int, ...]:
        if label is None:
            digits = []
            for _ in range(L):
                rank, d = divmod(rank, self.I)
                digits.append(d)
            return tuple(reversed(digits))
        q = self.dfa.start
        out = []
        delta = self.dfa.delta
        for pos in range(L):
            tab = self.table(label, L - pos - 1)
            for a in range(self.I):
                c = tab[delta[q][a]]
                if rank < c:
                    out.append(a)
                    q = delta[q][a]
                    break
                rank -= c
            else:  # pragma: no cover - rank out of range
                raise IndexError("rank out of range")
        return tuple(out)

    def draw(self, L: int, label: bool | None, k: int, rng: random.Random,
             exclude: set | frozenset = frozenset()) -> list[tuple[int, ...]]:
        """Up to ``k`` distinct strings of length ``L`` with ``label``, avoiding ``exclude``."""
        if k <= 0:
            return []
        total = self.count(L, label)
        excl = [s for s in exclude if len(s) == L and (label is None or (self.dfa.run(s) in self.dfa.accepting) == label)]
        avail = total - len(excl)
        if avail <= 0:
            return []
        if avail <= k or (total <= 4 * (k + len(excl)) and total <= 1_000_000):
            pool = [w for w in (self.unrank(L, label, r) for r in range(total)) if w not in exclude]
            return pool if len(pool) <= k else rng.sample(pool, k)
        if not excl and total <= 2 ** 62:
            return [self.unrank(L, label, r) for r in rng.sample(range(total), k)]
        got: dict[tuple[int, ...], None] = {}
        while len(got) < k:
            w = self.unrank(L, label, rng.randrange(total))
            if w not in exclude:
                got[w] = None
        return list(got)


def _rng(seed: int, *parts) -> random.Random:
    return random.Random(":".join(str(p) for p in (seed,) + parts))


def _balanced_quota(take: int, pos_avail: int, neg_avail: int) -> tuple[int, int]:
    """Half of ``take`` per label where possible, padding from the other label."""
    tp = min(pos_avail, take // 2)
    tn = min(neg_avail, take - tp)
    tp = min(pos_avail, take - tn)
    return tp, tn


def _draw_length(sampler: _Sampler, L: int, take: int, balance: bool, rng_for,
                 exclude: set | frozenset = frozenset()) -> list[Item]:
    dfa = sampler.dfa
    if not balance:
        words = sampler.draw(L, None, take, rng_for(None), exclude)
        return [(w, dfa.run(w) in dfa.accepting) for w in words]
    ex_pos = sum(1 for s in exclude if len(s) == L and dfa.run(s) in dfa.accepting)
    ex_neg = sum(1 for s in exclude if len(s) == L) - ex_pos
    tp, tn = _balanced_quota(take, sampler.count(L, True) - ex_pos, sampler.count(L, False) - ex_neg)
    pos = sampler.draw(L, True, tp, rng_for(True), exclude)
    neg = sampler.draw(L, False, tn, rng_for(False), exclude)
    return [(w, True) for w in pos] + [(w, False) for w in neg]


def sample_split(dfa: Dfa, lengths: Sequence[int], per_length_cap: int, balance: bool = False,
                 seed: int = 0, split: str = "split", exclude: Iterable[Sequence[int]] = (),
                 grammar: str | None = None) -> LabeledDataset:
    """``min(cap, I^L)`` distinct uniform strings per length, optionally label-balanced."""
    if per_length_cap < 1:
        raise ValueError("per_length_cap must be >= 1")
    if any(L < 0 for L in lengths):
        raise ValueError("lengths must be non-negative")
    sampler = _Sampler(dfa)
    exclude = {tuple(s) for s in exclude}
    items: list[Item] = []
    for L in sorted(set(lengths)):
        take = min(per_length_cap, sampler.I ** L)
        items += _draw_length(sampler, L, take, balance, lambda lab, L=L: _rng(seed, split, L, lab), exclude)
    items = _canonical(items)
    meta = {
        "grammar": grammar,
        "split": split,
        "seed": seed,
        "lengths": sorted(set(lengths)),
        "per_length_cap": per_length_cap,
        "balance": balance,
        "positive_ratio": (sum(y for _, y in items) / len(items)) if items else None,
    }
    return LabeledDataset(dfa.alphabet, items, meta)


def tomita_protocol(dfa: Dfa, seed: int = 0, train_cap: int = TOMITA_TRAIN_CAP,
                    test_cap: int = TOMITA_TEST_CAP, grammar: str | None = None):
    """Balanced train over lengths 0..13, 16, 19, 22; uniform test over 1, 4, ..., 28."""
    train = sample_split(dfa, TOMITA_TRAIN_LENGTHS, train_cap, True, seed, "train", grammar=grammar)
    test = sample_split(dfa, TOMITA_TEST_LENGTHS, test_cap, False, seed, "test",
                        exclude=train.strings, grammar=grammar)
    return train, test


def _fill_quotas(n: int, lengths: Sequence[int], avail: dict[int, int]) -> dict[int, int]:
    """Spread ``n`` items as evenly as possible over ``lengths`` subject to availability."""
    quota = {L: 0 for L in lengths}
    remaining = n
    open_ = [L for L in lengths if avail[L] > 0]
    while remaining > 0 and open_:
        share, extra = divmod(remaining, len(open_))
        nxt = []
        for i, L in enumerate(sorted(open_, reverse=True)):
            want = share + (1 if i < extra else 0)
            give = min(want, avail[L] - quota[L])
            quota[L] += give
            remaining -= give
            if quota[L] < avail[L]:
                nxt.append(L)
        if len(nxt) == len(open_) and remaining > 0 and share == 0 and extra == 0:
            break
        open_ = nxt
    return quota


def _sized_split(dfa: Dfa, sampler: _Sampler, size: int, lengths: Sequence[int], seed: int, split: str,
                 balance: bool, exclude: set, grammar: str | None) -> LabeledDataset:
    by_len: dict[int, int] = {}
    for s in exclude:
        by_len[len(s)] = by_len.get(len(s), 0) + 1
    avail = {L: sampler.I ** L - by_len.get(L, 0) for L in lengths}
    quota = _fill_quotas(size, lengths, avail)
    items: list[Item] = []
    for L in lengths:
        items += _draw_length(sampler, L, quota[L], balance, lambda lab, L=L: _rng(seed, split, L, lab), exclude)
    items = _canonical(items)
    meta = {
        "grammar": grammar,
        "split": split,
        "seed": seed,
        "lengths": [min(lengths), max(lengths)],
        "size": size,
        "balance": balance,
        "positive_ratio": (sum(y for _, y in items) / len(items)) if items else None,
    }
    return LabeledDataset(dfa.alphabet, items, meta)


def slsp_protocol(dfa: Dfa, seed: int = 0, train_size: int = 100_000, test_size: int = 2000,
                  balance: bool = True, grammar: str | None = None):
    """Train on lengths 1-25; T-1 over 1-25 and T-2 over 26-50, both disjoint from train."""
    sampler = _Sampler(dfa)
    short = list(range(1, 26))
    long = list(range(26, 51))
    train = _sized_split(dfa, sampler, train_size, short, seed, "train", balance, set(), grammar)
    seen = set(train.strings)
    t1 = _sized_split(dfa, sampler, test_size, short, seed, "test1", balance, seen, grammar)
    t2 = _sized_split(dfa, sampler, test_size, long, seed, "test2", balance, seen, grammar)
    return train, t1, t2


def sparse_protocol(dfa: Dfa, sparsity: float, seed: int = 0, full_pool: int = 20_000, max_len: int = 30,
                    grammar: str | None = None):
    """Pool of random-walk positives and uniform negatives, split 8:2.

    The pool size is ``full_pool * sparsity``; half of it are positives
    generated by walks over the DFA graph that keep an accepting state
    reachable, the other half uniform random strings the DFA rejects.
    """
    if sparsity not in SPARSITIES:
        raise ValueError(f"sparsity must be one of {SPARSITIES}")
    size = round(full_pool * sparsity)
    sampler = _Sampler(dfa)
    rng = _rng(seed, "sparse", sparsity)
    lens_pos = [L for L in range(1, max_len + 1) if sampler.count(L, True) > 0]
    lens_neg = [L for L in range(1, max_len + 1) if sampler.count(L, False) > 0]
    delta = dfa.delta
    pool: dict[tuple[int, ...], bool] = {}

    def walk(L: int, label: bool) -> tuple[int, ...]:
        q = dfa.start
        out = []
        for pos in range(L):
            tab = sampler.table(label, L - pos - 1)
            choices = [a for a in range(sampler.I) if tab[delta[q][a]] > 0]
            a = rng.choice(choices)
            out.append(a)
            q = delta[q][a]
        return tuple(out)

    budget = 50 * size
    n_pos = size // 2
    while lens_pos and sum(pool.values()) < n_pos and budget > 0:
        budget -= 1
        pool.setdefault(walk(rng.choice(lens_pos), True), True)
    while lens_neg and len(pool) < size and budget > 0:
        budget -= 1
        L = rng.choice(lens_neg)
        w = tuple(rng.randrange(sampler.I) for _ in range(L))
        if dfa.run(w) in dfa.accepting:
            # uniform negatives first; guided walk once rejection is rare
            if budget % 4:
                continue
            w = walk(L, False)
        pool.setdefault(w, False)
    items = sorted(pool.items(), key=lambda it: (len(it[0]), it[0]))
    rng.shuffle(items)
    cut = round(len(items) * 0.8)
    meta = {"grammar": grammar, "seed": seed, "sparsity": sparsity, "pool": len(items), "max_len": max_len}
    train = LabeledDataset(dfa.alphabet, _canonical(items[:cut]), dict(meta, split="train"))
    test = LabeledDataset(dfa.alphabet, _canonical(items[cut:]), dict(meta, split="test"))
    return train, test


# --- files ---------------------------------------------------------------------------

class DatasetParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def format_dataset(ds: LabeledDataset) -> str:
    a = ds.alphabet
    lines = ["dataset v1", "alphabet " + " ".join(a.symbols), f"dfa {ds.dfa_ref}"]
    if ds.meta:
        lines.append("# meta " + json.dumps(ds.meta, sort_keys=True, ensure_ascii=False))
    for s, y in ds.items:
        body = a.join(a.decode(s)) if s else EPSILON
        lines.append(f"{int(y)}\t{body}")
    return "\n".join(lines) + "\n"


def write_dataset(ds: LabeledDataset, path: str | Path) -> None:
    Path(path).write_text(format_dataset(ds), encoding="utf-8")


def parse_dataset(text: str) -> LabeledDataset:
    raw = text.splitlines()
    if not raw or raw[0].strip() != "dataset v1":
        raise DatasetParseError("expected 'dataset v1' header", 1)
    if len(raw) < 2 or not raw[1].startswith("alphabet "):
        raise DatasetParseError("expected 'alphabet <sym> ...'", 2)
    try:
        alphabet = Alphabet(tuple(raw[1].split()[1:]))
    except ValueError as e:
        raise DatasetParseError(str(e), 2) from None
    if len(raw) < 3 or not raw[2].startswith("dfa "):
        raise DatasetParseError("expected 'dfa <path or ->'", 3)
    dfa_ref = raw[2][4:].strip()
    meta: dict = {}
    items: list[Item] = []
    for lineno, ln in enumerate(raw[3:], start=4):
        if not ln.strip():
            continue
        if ln.startswith("#"):
            if ln.startswith("# meta "):
                meta = json.loads(ln[len("# meta "):])
            continue
        label, sep, body = ln.partition("\t")
        if not sep or label not in ("0", "1"):
            raise DatasetParseError("expected '<0|1>\\t<string>'", lineno)
        body = body.strip()
        if body == EPSILON:
            syms: tuple[str, ...] = ()
        elif " " in body or not alphabet.single_char:
            syms = tuple(body.split())
        else:
            syms = tuple(body)
        try:
            items.append((tuple(alphabet.index(s) for s in syms), label == "1"))
        except ValueError as e:
            raise DatasetParseError(str(e), lineno) from None
    return LabeledDataset(alphabet, items, meta, dfa_ref)


def read_dataset(path: str | Path) -> LabeledDataset:
    return parse_dataset(Path(path).read_text(encoding="utf-8"))
