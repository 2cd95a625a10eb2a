"""Independent reference definitions used by the tests.

Nothing here touches the automata built by the package: languages are
plain predicates on strings, and minimal sizes are counted as Myhill-Nerode
classes by brute force.
"""

import re
from itertools import product


def tomita(k):
    def t1(w):
        return set(w) <= {"1"}

    def t2(w):
        return re.fullmatch("(10)*", w) is not None

    def t3(w):
        runs = [(m.group()[0], len(m.group())) for m in re.finditer(r"0+|1+", w)]
        for (a, la), (b, lb) in zip(runs, runs[1:]):
            if a == "1" and la % 2 == 1 and b == "0" and lb % 2 == 1:
                return False
        return True

    def t4(w):
        return "000" not in w

    def t5(w):
        return w.count("0") % 2 == 0 and w.count("1") % 2 == 0

    def t6(w):
        return (w.count("0") - w.count("1")) % 3 == 0

    def t7(w):
        return re.fullmatch("0*1*0*1*", w) is not None

    return {1: t1, 2: t2, 3: t3, 4: t4, 5: t5, 6: t6, 7: t7}[k]


def sl_predicate(factors):
    """factors: strings with optional leading '^' / trailing '$' anchors."""

    def ok(w):
        for f in factors:
            start, end = f.startswith("^"), f.endswith("$")
            body = f.strip("^$")
            if start and end:
                bad = w == body
            elif start:
                bad = w.startswith(body)
            elif end:
                bad = w.endswith(body)
            else:
                bad = body in w
            if bad:
                return False
        return True

    return ok


def has_subsequence(w, seq):
    it = iter(w)
    return all(c in it for c in seq)


def sp_predicate(seqs):
    return lambda w: not any(has_subsequence(w, s) for s in seqs)


SL4 = sl_predicate(["^bbb", "aaaa", "bbbb", "aaa$"])
SP8 = sp_predicate(["abbaabba"])


def strings(alphabet, max_len):
    for L in range(max_len + 1):
        for p in product(alphabet, repeat=L):
            yield "".join(p)


def nerode_count(pred, alphabet, prefix_len, suffix_len):
    """Number of distinct residual languages, probed by suffixes up to ``suffix_len``."""
    sufs = list(strings(alphabet, suffix_len))
    sigs = {tuple(pred(w + s) for s in sufs) for w in strings(alphabet, prefix_len)}
    return len(sigs)


def brute_count(dfa, N):
    """Accepted strings of length N, by running every string through the DFA at once."""
    import numpy as np

    I = len(dfa.alphabet)
    total = I ** N
    delta = np.asarray(dfa.delta, dtype=np.int64)
    idx = np.arange(total, dtype=np.int64)
    states = np.full(total, dfa.start, dtype=np.int64)
    for p in range(N):
        sym = (idx // I ** (N - 1 - p)) % I
        states = delta[states, sym]
    acc = np.zeros(dfa.n, dtype=bool)
    acc[list(dfa.accepting)] = True
    return int(acc[states].sum())
