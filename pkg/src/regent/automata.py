"""Deterministic finite automata for the grammar families used throughout.

A :class:`Dfa` is immutable and total: ``delta[state][symbol_index]`` is
defined for every pair.  Builders return automata that are not necessarily
minimal; :func:`minimize` trims, merges equivalent states and renumbers them
canonically (BFS from the start state, symbols in alphabet order), so two
routes to the same language serialize to identical text.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Alphabet",
    "Dfa",
    "DfaParseError",
    "Factor",
    "TransitionMatrices",
    "absorbing_count",
    "accepts",
    "build_random",
    "build_sl",
    "build_sp",
    "build_tomita",
    "deserialize",
    "minimize",
    "parse_factor",
    "serialize",
    "sl4",
    "sp8",
    "to_dot",
    "transition_matrices",
    "trim",
]

BINARY = ("0", "1")
START_MARK = "⋉"
END_MARK = "⋊"


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of symbols; the order fixes the symbol index everywhere."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        syms = tuple(str(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if not syms:
            raise ValueError("alphabet must contain at least one symbol")
        if len(set(syms)) != len(syms):
            raise ValueError(f"duplicate symbols in alphabet {syms!r}")
        for s in syms:
            if not s or any(ch.isspace() for ch in s) or s == "ε":
                raise ValueError(f"invalid alphabet symbol {s!r}")

    @classmethod
    def of(cls, symbols: Iterable[str] | str) -> "Alphabet":
        if isinstance(symbols, Alphabet):
            return symbols
        return cls(tuple(symbols))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    @property
    def single_char(self) -> bool:
        return all(len(s) == 1 for s in self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self._lookup[symbol]
        except KeyError:
            raise ValueError(f"symbol {symbol!r} not in alphabet {self.symbols!r}") from None

    @property
    def _lookup(self) -> dict[str, int]:
        cache = self.__dict__.get("_cache")
        if cache is None:
            cache = {s: i for i, s in enumerate(self.symbols)}
            object.__setattr__(self, "_cache", cache)
        return cache

    def encode(self, string: Sequence[str] | str) -> tuple[int, ...]:
        """Map a symbol sequence (or a plain str for one-character alphabets) to indices."""
        return tuple(self.index(s) for s in self.split(string))

    def split(self, string: Sequence[str] | str) -> tuple[str, ...]:
        if isinstance(string, str):
            if not string:
                return ()
            if self.single_char:
                return tuple(string)
            return tuple(string.split())
        return tuple(string)

    def decode(self, indices: Iterable[int]) -> tuple[str, ...]:
        return tuple(self.symbols[i] for i in indices)

    def join(self, symbols: Sequence[str]) -> str:
        return "".join(symbols) if self.single_char else " ".join(symbols)


@dataclass(frozen=True)
class Dfa:
    n: int
    alphabet: Alphabet
    start: int
    accepting: frozenset[int]
    delta: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "alphabet", Alphabet.of(self.alphabet))
        object.__setattr__(self, "accepting", frozenset(int(a) for a in self.accepting))
        object.__setattr__(self, "delta", tuple(tuple(int(t) for t in row) for row in self.delta))
        if self.n < 1:
            raise ValueError("a DFA needs at least one state")
        if not 0 <= self.start < self.n:
            raise ValueError(f"start state {self.start} out of range")
        if any(not 0 <= a < self.n for a in self.accepting):
            raise ValueError("accepting state out of range")
        if len(self.delta) != self.n:
            raise ValueError("delta must have one row per state")
        I = len(self.alphabet)
        for s, row in enumerate(self.delta):
            if len(row) != I:
                raise ValueError(f"state {s}: transition row is not total")
            if any(not 0 <= t < self.n for t in row):
                raise ValueError(f"state {s}: transition target out of range")

    @property
    def size(self) -> int:
        return self.n

    def run(self, indices: Iterable[int]) -> int:
        q = self.start
        delta = self.delta
        for i in indices:
            q = delta[q][i]
        return q

    def accepts(self, string: Sequence[str] | str) -> bool:
        return accepts(self, string)

    def __contains__(self, string) -> bool:
        return accepts(self, string)

    def sink_states(self) -> list[int]:
        """States that self-loop on every symbol."""
        return [s for s, row in enumerate(self.delta) if all(t == s for t in row)]

    def live_size(self) -> int:
        """State count once a rejecting sink is dropped (partial-DFA convention)."""
        dead = [s for s in self.sink_states() if s not in self.accepting]
        return self.n - len(dead)


def accepts(dfa: Dfa, string: Sequence[str] | str) -> bool:
    """Run ``string`` from the start state; the empty string is accepted iff the start is."""
    return dfa.run(dfa.alphabet.encode(string)) in dfa.accepting


# --- builders ---------------------------------------------------------------

_TOMITA_TABLES: dict[int, tuple[int, tuple[int, ...], tuple[tuple[int, int], ...]]] = {
    # k: (start, accepting, rows of (on "0", on "1"))
    # 1*  -- state 1 is dead
    1: (0, (0,), ((1, 0), (1, 1))),
    # (10)*  -- 0 = between pairs, 1 = saw "1", 2 dead
    2: (0, (0,), ((2, 1), (0, 2), (2, 2))),
    # no odd run of 1s followed by an odd run of 0s
    # 0 even 1-run / free, 1 odd 1-run, 2 odd 0-run after odd 1-run, 3 even 0-run after odd 1-run, 4 dead
    3: (0, (0, 1, 3), ((0, 1), (2, 0), (3, 4), (2, 1), (4, 4))),
    # no "000": state = trailing zeros, 3 dead
    4: (0, (0, 1, 2), ((1, 0), (2, 0), (3, 0), (3, 3))),
    # parity of 0s x parity of 1s, state = 2*p0 + p1
    5: (0, (0,), ((2, 1), (3, 0), (0, 3), (1, 2))),
    # (#0 - #1) mod 3
    6: (0, (0,), ((1, 2), (2, 0), (0, 1))),
    # 0*1*0*1*: phase counter, 4 dead
    7: (0, (0, 1, 2, 3), ((0, 1), (2, 1), (2, 3), (4, 3), (4, 4))),
}


def build_tomita(k: int) -> Dfa:
    """DFA over {0, 1} for Tomita grammar ``k`` (1..7)."""
    if k not in _TOMITA_TABLES:
        raise ValueError(f"Tomita grammar id must be in 1..7, got {k!r}")
    start, acc, rows = _TOMITA_TABLES[k]
    return Dfa(len(rows), Alphabet(BINARY), start, frozenset(acc), rows)


@dataclass(frozen=True)
class Factor:
    """A forbidden factor, optionally anchored at the start and/or end of the string."""

    symbols: tuple[str, ...]
    at_start: bool = False
    at_end: bool = False

    def __str__(self):
        body = "".join(self.symbols) if all(len(s) == 1 for s in self.symbols) else " ".join(self.symbols)
        return (START_MARK if self.at_start else "") + body + (END_MARK if self.at_end else "")


def parse_factor(text: str | Factor, alphabet: Alphabet | None = None) -> Factor:
    """Parse ``"⋉bbb"``, ``"aaa⋊"``, ``"aaaa"``; ``^``/``$`` are accepted as ASCII anchors."""
    if isinstance(text, Factor):
        return text
    body = text.strip()
    at_start = body.startswith((START_MARK, "^"))
    if at_start:
        body = body[1:]
    at_end = body.endswith((END_MARK, "$"))
    if at_end:
        body = body[:-1]
    if alphabet is not None and not alphabet.single_char:
        syms = tuple(body.split())
    else:
        syms = tuple(body.replace(" ", ""))
    return Factor(syms, at_start, at_end)


def _check_symbols(seqs: Iterable[Sequence[str]], alphabet: Alphabet, what: str):
    for seq in seqs:
        if not seq:
            raise ValueError(f"empty {what}")
        for s in seq:
            if s not in alphabet._lookup:
                raise ValueError(f"{what} {''.join(seq)!r} uses symbol {s!r} outside the alphabet")


def build_sl(forbidden_factors: Iterable[Factor | str], alphabet: Alphabet | Iterable[str]) -> Dfa:
    """Strictly-local acceptor: reject strings containing any forbidden factor.

    Start-anchored factors must match a prefix, end-anchored ones a suffix,
    unanchored ones anywhere.  Anchors are compiled into the automaton and
    are never input symbols.
    """
    alphabet = Alphabet.of(alphabet)
    factors = [parse_factor(f, alphabet) for f in forbidden_factors]
    _check_symbols((f.symbols for f in factors), alphabet, "factor")
    width = max((len(f.symbols) for f in factors), default=1)

    def violates_so_far(whole: bool, window: tuple[str, ...]) -> bool:
        # checked after each symbol; `window` is the full string when `whole`
        for f in factors:
            k = len(f.symbols)
            if f.at_end:
                continue
            if f.at_start:
                if whole and len(window) == k and window == f.symbols:
                    return True
            elif len(window) >= k and window[-k:] == f.symbols:
                return True
        return False

    def final_reject(whole: bool, window: tuple[str, ...]) -> bool:
        for f in factors:
            if not f.at_end:
                continue
            k = len(f.symbols)
            if f.at_start:
                if whole and window == f.symbols:
                    return True
            elif len(window) >= k and window[-k:] == f.symbols:
                return True
        return False

    # state key: (whole, window) where whole means the window is the entire
    # input read so far; once longer than `width`, keep only the last `width` symbols
    dead = ("dead",)
    start = (True, ())
    index: dict = {start: 0}
    order = [start]
    rows: list[list[int]] = []
    queue = deque([start])
    while queue:
        key = queue.popleft()
        row = []
        for sym in alphabet.symbols:
            if key is dead:
                nxt = dead
            else:
                whole, window = key
                w2 = window + (sym,)
                if violates_so_far(whole, w2):
                    nxt = dead
                elif whole and len(w2) <= width:
                    nxt = (True, w2)
                else:
                    nxt = (False, w2[-width:])
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(index[nxt])
        rows.append(row)
    accepting = {
        i for i, key in enumerate(order) if key is not dead and not final_reject(*key)
    }
    return Dfa(len(order), alphabet, 0, frozenset(accepting), rows)


def build_sp(forbidden_subsequences: Iterable[Sequence[str] | str], alphabet: Alphabet | Iterable[str]) -> Dfa:
    """Strictly-piecewise acceptor: reject strings containing any listed subsequence.

    Progress automaton; a state records the matched prefix length of every
    forbidden sequence.  Completing any sequence moves to the dead state.
    """
    alphabet = Alphabet.of(alphabet)
    seqs = [alphabet.split(s) if isinstance(s, str) else tuple(s) for s in forbidden_subsequences]
    _check_symbols(seqs, alphabet, "subsequence")
    dead = None
    start = tuple(0 for _ in seqs)
    index = {start: 0}
    order: list = [start]
    rows = []
    queue = deque([start])
    while queue:
        key = queue.popleft()
        row = []
        for sym in alphabet.symbols:
            if key is dead:
                nxt = dead
            else:
                prog = tuple(p + 1 if seq[p] == sym else p for p, seq in zip(key, seqs))
                nxt = dead if any(p == len(seq) for p, seq in zip(prog, seqs)) else prog
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(index[nxt])
        rows.append(row)
    accepting = {i for i, key in enumerate(order) if key is not dead}
    return Dfa(len(order), alphabet, 0, frozenset(accepting), rows)


ABCD = ("a", "b", "c", "d")
SL4_FACTORS = ("⋉bbb", "aaaa", "bbbb", "aaa⋊")
SP8_SEQUENCES = ("abbaabba",)


def sl4() -> Dfa:
    return build_sl(SL4_FACTORS, ABCD)


def sp8() -> Dfa:
    return build_sp(SP8_SEQUENCES, ABCD)


def build_random(n_states: int, alphabet: Alphabet | Iterable[str], accept_fraction: float = 0.5, seed: int = 0) -> Dfa:
    """Uniformly random total DFA, trimmed to its reachable part."""
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    if not 0.0 <= accept_fraction <= 1.0:
        raise ValueError("accept_fraction must lie in [0, 1]")
    alphabet = Alphabet.of(alphabet)
    rng = np.random.default_rng(seed)
    delta = rng.integers(0, n_states, size=(n_states, len(alphabet)))
    accepting = np.flatnonzero(rng.random(n_states) < accept_fraction)
    return trim(Dfa(n_states, alphabet, 0, frozenset(accepting.tolist()), delta.tolist()))


# --- structure --------------------------------------------------------------

def _bfs_order(dfa: Dfa, start: int | None = None) -> list[int]:
    start = dfa.start if start is None else start
    seen = {start: None}
    order = [start]
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in dfa.delta[s]:
            if t not in seen:
                seen[t] = None
                order.append(t)
                queue.append(t)
    return order


def _renumber(dfa: Dfa, order: list[int]) -> Dfa:
    """Relabel the states listed in ``order`` as 0..len-1."""
    new = {s: i for i, s in enumerate(order)}
    rows = [[new[t] for t in dfa.delta[s]] for s in order]
    acc = {new[s] for s in order if s in dfa.accepting}
    return Dfa(len(order), dfa.alphabet, new[dfa.start], frozenset(acc), rows)


def trim(dfa: Dfa) -> Dfa:
    """Drop states unreachable from the start state (BFS renumbering)."""
    return _renumber(dfa, _bfs_order(dfa))


def minimize(dfa: Dfa) -> Dfa:
    """Minimal total DFA with canonical numbering.

    Trims, then runs Moore partition refinement; the quotient is renumbered
    in BFS order from the start state, taking symbols in alphabet order.
    """
    d = trim(dfa)
    n, I = d.n, len(d.alphabet)
    block = [1 if s in d.accepting else 0 for s in range(n)]
    n_blocks = len(set(block))
    while True:
        sigs: dict[tuple, int] = {}
        new_block = []
        for s in range(n):
            sig = (block[s],) + tuple(block[d.delta[s][a]] for a in range(I))
            new_block.append(sigs.setdefault(sig, len(sigs)))
        block = new_block
        if len(sigs) == n_blocks:
            break
        n_blocks = len(sigs)
    rep: dict[int, int] = {}
    for s in range(n):
        rep.setdefault(block[s], s)
    rows = [[block[d.delta[rep[b]][a]] for a in range(I)] for b in range(n_blocks)]
    acc = {block[s] for s in d.accepting}
    quotient = Dfa(n_blocks, d.alphabet, block[d.start], frozenset(acc), rows)
    return trim(quotient)


@dataclass(frozen=True)
class TransitionMatrices:
    per_symbol: tuple[np.ndarray, ...]
    summed: np.ndarray = field(repr=False)

    @property
    def alphabet_size(self) -> int:
        return len(self.per_symbol)


def transition_matrices(dfa: Dfa) -> TransitionMatrices:
    """0/1 matrices with ``T_i[delta(j, i), j] = 1``; columns of ``T_i`` sum to one."""
    n, I = dfa.n, len(dfa.alphabet)
    mats = []
    cols = np.arange(n)
    for i in range(I):
        t = np.zeros((n, n), dtype=np.int64)
        t[[dfa.delta[j][i] for j in range(n)], cols] = 1
        t.setflags(write=False)
        mats.append(t)
    summed = np.sum(mats, axis=0)
    summed.setflags(write=False)
    return TransitionMatrices(tuple(mats), summed)


def absorbing_count(tm: TransitionMatrices | Dfa) -> int:
    """Number of states that self-loop on every symbol (diagonal entries of T equal to I)."""
    if isinstance(tm, Dfa):
        tm = transition_matrices(tm)
    return int(np.count_nonzero(np.diag(tm.summed) == tm.alphabet_size))


# --- text formats -----------------------------------------------------------

class DfaParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def serialize(dfa: Dfa) -> str:
    lines = [
        "dfa v1",
        "alphabet " + " ".join(dfa.alphabet.symbols),
        f"states {dfa.n}",
        f"start {dfa.start}",
        " ".join(["accepting"] + [str(a) for a in sorted(dfa.accepting)]),
    ]
    for s in range(dfa.n):
        for i, sym in enumerate(dfa.alphabet.symbols):
            lines.append(f"trans {s} {sym} {dfa.delta[s][i]}")
    return "\n".join(lines) + "\n"


def _int(tok: str, lineno: int, what: str) -> int:
    if not re.fullmatch(r"\d+", tok):
        raise DfaParseError(f"expected a non-negative integer for {what}, got {tok!r}", lineno)
    return int(tok)


def deserialize(text: str) -> Dfa:
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise DfaParseError("empty input", 1)

    def header(pos: int, keyword: str) -> tuple[int, list[str]]:
        if pos >= len(lines):
            last = lines[-1][0] if lines else 1
            raise DfaParseError(f"missing '{keyword}' line", last + 1)
        lineno, ln = lines[pos]
        toks = ln.split()
        if toks[0] != keyword:
            raise DfaParseError(f"expected '{keyword}', got {toks[0]!r}", lineno)
        return lineno, toks[1:]

    lineno, rest = header(0, "dfa")
    if rest != ["v1"]:
        raise DfaParseError(f"unsupported version {' '.join(rest)!r}", lineno)
    lineno, syms = header(1, "alphabet")
    try:
        alphabet = Alphabet(tuple(syms))
    except ValueError as e:
        raise DfaParseError(str(e), lineno) from None
    lineno, rest = header(2, "states")
    if len(rest) != 1:
        raise DfaParseError("expected 'states <n>'", lineno)
    n = _int(rest[0], lineno, "state count")
    if n < 1:
        raise DfaParseError("state count must be positive", lineno)
    lineno, rest = header(3, "start")
    if len(rest) != 1:
        raise DfaParseError("expected 'start <idx>'", lineno)
    start = _int(rest[0], lineno, "start")
    if start >= n:
        raise DfaParseError("start state out of range", lineno)
    lineno, rest = header(4, "accepting")
    accepting = set()
    for tok in rest:
        a = _int(tok, lineno, "accepting state")
        if a >= n:
            raise DfaParseError(f"accepting state {a} out of range", lineno)
        accepting.add(a)
    table: dict[tuple[int, int], int] = {}
    for lineno, ln in lines[5:]:
        toks = ln.split()
        if toks[0] != "trans" or len(toks) != 4:
            raise DfaParseError("expected 'trans <state> <symbol> <state>'", lineno)
        src = _int(toks[1], lineno, "source state")
        dst = _int(toks[3], lineno, "target state")
        if src >= n or dst >= n:
            raise DfaParseError("state index out of range", lineno)
        try:
            sym = alphabet.index(toks[2])
        except ValueError as e:
            raise DfaParseError(str(e), lineno) from None
        if (src, sym) in table:
            raise DfaParseError(f"duplicate transition for ({src}, {toks[2]})", lineno)
        table[(src, sym)] = dst
    missing = [(s, alphabet.symbols[i]) for s, i in product(range(n), range(len(alphabet))) if (s, i) not in table]
    if missing:
        raise DfaParseError(f"transition function not total, missing {missing[0]}", lines[-1][0])
    rows = [[table[(s, i)] for i in range(len(alphabet))] for s in range(n)]
    return Dfa(n, alphabet, start, frozenset(accepting), rows)


def to_dot(dfa: Dfa, name: str = "dfa") -> str:
    """Graphviz source with one labelled edge per (state, symbol)."""
    out = [f"digraph {name} {{", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for s in range(dfa.n):
        shape = "doublecircle" if s in dfa.accepting else "circle"
        out.append(f"  q{s} [shape={shape}, label=\"{s}\"];")
    out.append(f"  __start -> q{dfa.start};")
    for s in range(dfa.n):
        for i, sym in enumerate(dfa.alphabet.symbols):
            out.append(f'  q{s} -> q{dfa.delta[s][i]} [label="{sym}"];')
    out.append("}")
    return "\n".join(out) + "\n"


def enumerate_strings(alphabet: Alphabet, length: int):
    """All index tuples of ``length`` in lexicographic (alphabet-index) order."""
    return product(range(len(alphabet)), repeat=length)
