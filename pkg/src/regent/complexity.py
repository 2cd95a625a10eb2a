"""Entropy of regular grammars: exact counting and the transition spectrum.

The data-driven route counts accepted strings ``m_p(N)`` exactly and turns
them into the expected number of label flips between lexicographically
adjacent strings, ``E[F_N] = 2 m_p m_n / I^N``; ``H^N = log_I(E[F_N]) / N``.
The spectral route reads the class straight off the minimal DFA: the number
of absorbing states and the moduli of the eigenvalues of ``T = sum_i T_i``.

Logarithms are taken base ``I`` (the alphabet size), which coincides with
``log_2`` for binary grammars and keeps ``H`` in ``[0, 1]`` otherwise.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .automata import Dfa, absorbing_count, minimize, transition_matrices
from .eigen import eigen_moduli

__all__ = [
    "Classification",
    "CountCurve",
    "EntropyReport",
    "GrammarClass",
    "UnsupportedAlphabetError",
    "classify_empirical",
    "classify_spectral",
    "count_accepted",
    "count_accepted_bruteforce",
    "count_curve",
    "entropy_curve",
    "entropy_kclass",
    "entropy_report",
    "expected_flips",
    "log_expected_flips",
    "ring_csv",
    "ring_data",
]

BRUTEFORCE_MAX_N = 20
RING_MAX_N = 16
SPECTRAL_TOL = 1e-8
POLY_THRESHOLD = 0.05
PROP_THRESHOLD = 0.95


class GrammarClass(str, enum.Enum):
    POLYNOMIAL = "Polynomial"
    EXPONENTIAL = "Exponential"
    PROPORTIONAL = "Proportional"
    DEGENERATE = "Degenerate"


class UnsupportedAlphabetError(ValueError):
    pass


@dataclass(frozen=True)
class Classification:
    cls: GrammarClass
    entropy: float | None
    base: float | None = None
    growth: float | None = None
    oscillating: bool = False

    def to_dict(self) -> dict:
        return {
            "class": self.cls.value,
            "entropy": self.entropy,
            "base": self.base,
            "growth": self.growth,
            "oscillating": self.oscillating,
        }


# --- counting ---------------------------------------------------------------

def _count_vectors(dfa: Dfa, n_max: int):
    """Yield, for N = 0..n_max, the exact number of length-N strings ending in each state."""
    v = [0] * dfa.n
    v[dfa.start] = 1
    yield v
    delta = dfa.delta
    for _ in range(n_max):
        nv = [0] * dfa.n
        for s, c in enumerate(v):
            if c:
                for t in delta[s]:
                    nv[t] += c
        v = nv
        yield v


def count_accepted(dfa: Dfa, N: int) -> int:
    """Exact number of accepted strings of length ``N`` (iterates ``v <- T v``)."""
    if N < 0:
        raise ValueError("N must be non-negative")
    for v in _count_vectors(dfa, N):
        pass
    return sum(v[a] for a in dfa.accepting)


def count_accepted_bruteforce(dfa: Dfa, N: int) -> int:
    """Enumerate all ``I^N`` strings; refuses ``N > 20``."""
    if N < 0:
        raise ValueError("N must be non-negative")
    if N > BRUTEFORCE_MAX_N:
        raise ValueError(f"brute force refused for N={N} > {BRUTEFORCE_MAX_N}")
    acc = dfa.accepting
    return sum(dfa.run(w) in acc for w in product(range(len(dfa.alphabet)), repeat=N))


@dataclass(frozen=True)
class CountCurve:
    """``m_p(N)`` for N = 0..N_max, exact."""

    alphabet_size: int
    counts: tuple[int, ...]

    @property
    def n_max(self) -> int:
        return len(self.counts) - 1

    def total(self, N: int) -> int:
        return self.alphabet_size ** N

    def negatives(self, N: int) -> int:
        return self.total(N) - self.counts[N]

    def defined(self, N: int) -> bool:
        return 0 < self.counts[N] < self.total(N)


def count_curve(dfa: Dfa, n_max: int) -> CountCurve:
    acc = dfa.accepting
    counts = tuple(sum(v[a] for a in acc) for v in _count_vectors(dfa, n_max))
    return CountCurve(len(dfa.alphabet), counts)


# --- flips and entropy ------------------------------------------------------

def expected_flips(m_p: int, N: int, I: int = 2) -> float:
    """``2 m_p (I^N - m_p) / I^N``, evaluated in log space so large N cannot overflow."""
    total = I ** N
    if not 0 <= m_p <= total:
        raise ValueError(f"m_p={m_p} outside [0, {I}^{N}]")
    if m_p == 0 or m_p == total:
        return 0.0
    try:
        return math.exp(log_expected_flips(m_p, N, I, base=math.e))
    except OverflowError:
        return math.inf


def log_expected_flips(m_p: int, N: int, I: int = 2, base: float | None = None) -> float:
    """``log(E[F_N])`` in the given base (default ``I``); ``-inf`` when no flips are possible."""
    total = I ** N
    m_n = total - m_p
    if m_p <= 0 or m_n <= 0:
        return -math.inf
    # math.log is exact-ish on arbitrary-precision ints
    ln = math.log(2) + math.log(m_p) + math.log(m_n) - N * math.log(I)
    return ln / math.log(I if base is None else base)


def entropy_curve(dfa: Dfa, n_max: int) -> tuple[CountCurve, list[float | None]]:
    """``(curve, hN)`` with ``hN[N] = log_I(E[F_N]) / N``, ``None`` where undefined."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    curve = count_curve(dfa, n_max)
    I = curve.alphabet_size
    hN: list[float | None] = [None]
    for N in range(1, n_max + 1):
        if curve.defined(N):
            hN.append(log_expected_flips(curve.counts[N], N, I) / N)
        else:
            hN.append(None)
    return curve, hN


def limsup_estimate(hN: Sequence[float | None]) -> float | None:
    """Max of ``H^N`` over the last ``ceil(N_max / 4)`` defined lengths."""
    defined = [h for h in hN[1:] if h is not None]
    if not defined:
        return None
    k = math.ceil((len(hN) - 1) / 4)
    return max(defined[-k:])


def entropy_kclass(counts: Sequence[int], N: int, I: int = 2) -> float | None:
    """k-class entropy: ``log_I(I^N - sum m_i^2 / I^N) / N``; ``None`` when no flips occur."""
    counts = [int(c) for c in counts]
    if len(counts) < 2:
        raise ValueError("need at least two classes")
    if any(c < 0 for c in counts):
        raise ValueError("class counts must be non-negative")
    total = I ** N
    if sum(counts) != total:
        raise ValueError(f"class counts sum to {sum(counts)}, expected {I}^{N}={total}")
    # I^N - sum m_i^2 / I^N  ==  (I^2N - sum m_i^2) / I^N, exact in integers
    num = total * total - sum(c * c for c in counts)
    if num <= 0 or N == 0:
        return None
    return (math.log(num) - N * math.log(I)) / math.log(I) / N


# --- empirical classification -------------------------------------------------

def _classify_growth(beta: float, I: int) -> Classification:
    if beta < POLY_THRESHOLD:
        return Classification(GrammarClass.POLYNOMIAL, 0.0, growth=beta)
    if beta > PROP_THRESHOLD:
        return Classification(GrammarClass.PROPORTIONAL, 1.0, growth=beta)
    return Classification(GrammarClass.EXPONENTIAL, beta, base=I ** beta, growth=beta)


def classify_empirical(curve: CountCurve, N1: int = 24, N2: int = 48) -> Classification:
    """Class from the growth of the minority count ``min(m_p, m_n)`` between N1 and N2.

    The growth exponent (log base I) is the ``N`` coefficient of a least
    squares fit ``log m = c + d log N + b N`` over the lengths in ``[N1, N2]``
    with the parity of ``N1``; the ``log N`` term absorbs polynomial
    prefactors that a bare two-point slope would mistake for growth.  When
    one endpoint is degenerate but not the other, the nearest defined lengths
    of matching parity are used; if there are none the grammar is reported
    as degenerate-oscillating.
    """
    if not N2 > N1 >= 1:
        raise ValueError("need N2 > N1 >= 1")
    if N2 > curve.n_max:
        raise ValueError(f"curve only reaches N={curve.n_max}")
    I = curve.alphabet_size

    def minority(N):
        return min(curve.counts[N], curve.negatives(N))

    d1, d2 = curve.defined(N1), curve.defined(N2)
    if not d1 and not d2:
        between = any(curve.defined(N) for N in range(N1, N2 + 1))
        return Classification(GrammarClass.DEGENERATE, None, oscillating=between)
    oscillating = False
    if not (d1 and d2):
        oscillating = True
        # same parity as the defined endpoint, scanning inwards
        if d1:
            cand = [N for N in range(N2, N1, -1) if (N - N1) % 2 == 0 and curve.defined(N)]
            N2 = cand[0] if cand else None
        else:
            cand = [N for N in range(N1, N2) if (N2 - N) % 2 == 0 and curve.defined(N)]
            N1 = cand[0] if cand else None
        if N1 is None or N2 is None or N2 - N1 < 2:
            return Classification(GrammarClass.DEGENERATE, None, oscillating=True)
    Ns = [N for N in range(N1, N2 + 1) if (N - N1) % 2 == 0 and curve.defined(N)]
    logs = np.array([math.log(minority(N)) / math.log(I) for N in Ns])
    x = np.array(Ns, dtype=float)
    if len(Ns) >= 4:
        design = np.column_stack([np.ones_like(x), np.log(x), x])
        coef, *_ = np.linalg.lstsq(design, logs, rcond=None)
        beta = float(coef[2])
    else:
        beta = float((logs[-1] - logs[0]) / (x[-1] - x[0]))
    result = _classify_growth(beta, I)
    if oscillating:
        result = Classification(result.cls, result.entropy, result.base, result.growth, oscillating=True)
    return result


def two_point_slope(curve: CountCurve, N1: int, N2: int) -> float | None:
    """Plain ``(log_I m(N2) - log_I m(N1)) / (N2 - N1)`` on the minority count."""
    I = curve.alphabet_size
    a = min(curve.counts[N1], curve.negatives(N1))
    b = min(curve.counts[N2], curve.negatives(N2))
    if a <= 0 or b <= 0:
        return None
    return (math.log(b) - math.log(a)) / math.log(I) / (N2 - N1)


# --- spectral classification --------------------------------------------------

@dataclass(frozen=True)
class SpectralResult:
    classification: Classification
    k: int
    moduli: tuple[float, ...]
    lambda2: float | None


def classify_spectral(dfa: Dfa, generalized: bool = False) -> SpectralResult:
    """Class and entropy from absorbing-state count and the spectrum of ``T``.

    ``k = 0`` or ``k = 2`` absorbing states: proportional, ``H = 1``.  With one
    absorbing state, ``|lambda_2|`` (largest modulus once the Perron root
    ``I`` is removed) decides: ``<= 1`` polynomial, otherwise exponential with
    ``H = log_I |lambda_2|`` (a second root of modulus ``I`` means a closed
    non-absorbing component and ``H = 1``).  Alphabets larger than two need
    ``generalized=True``.
    """
    m = minimize(dfa)
    I = len(m.alphabet)
    if I > 2 and not generalized:
        raise UnsupportedAlphabetError(
            f"spectral classification is exact only for binary alphabets (|Σ|={I}); pass generalized=True"
        )
    tm = transition_matrices(m)
    k = absorbing_count(tm)
    moduli = tuple(eigen_moduli(tm.summed))
    if m.n == 1:
        return SpectralResult(Classification(GrammarClass.DEGENERATE, None), k, moduli, None)
    if abs(moduli[0] - I) > SPECTRAL_TOL:
        raise ArithmeticError(f"Perron root {moduli[0]!r} differs from |Σ|={I}")
    rest = list(moduli[1:])
    lam2 = max(rest) if rest else 0.0
    if k != 1:
        cls = Classification(GrammarClass.PROPORTIONAL, 1.0, base=float(I))
    elif lam2 <= 1.0 + SPECTRAL_TOL:
        cls = Classification(GrammarClass.POLYNOMIAL, 0.0, base=1.0)
    elif lam2 >= I - SPECTRAL_TOL:
        cls = Classification(GrammarClass.PROPORTIONAL, 1.0, base=float(I))
    else:
        cls = Classification(GrammarClass.EXPONENTIAL, math.log(lam2) / math.log(I), base=lam2)
    return SpectralResult(cls, k, moduli, lam2)


# --- reports ------------------------------------------------------------------

@dataclass
class EntropyReport:
    curve: CountCurve
    hN: list[float | None]
    entropy_estimate: float | None
    empirical: Classification
    spectral: Classification | None = None
    spectral_entropy: float | None = None
    lambda_moduli: list[float] = field(default_factory=list)
    absorbing: int | None = None

    @property
    def cls(self) -> GrammarClass:
        return (self.spectral or self.empirical).cls

    def to_dict(self) -> dict:
        return {
            "class": self.cls.value,
            "spectral_entropy": self.spectral_entropy,
            "lambda_moduli": list(self.lambda_moduli),
            "absorbing": self.absorbing,
            "empirical": self.empirical.to_dict(),
            "spectral": self.spectral.to_dict() if self.spectral else None,
            "entropy_estimate": self.entropy_estimate,
            "curve": [
                {"N": N, "m_p": str(m), "hN": self.hN[N]}
                for N, m in enumerate(self.curve.counts)
            ],
        }


def entropy_report(dfa: Dfa, n_max: int = 48, N1: int | None = None, N2: int | None = None,
                   generalized: bool = False) -> EntropyReport:
    """Empirical curve plus both classifications.

    ``N1``/``N2`` default to 24/48 when the curve reaches that far, else to
    ``n_max // 2`` and ``n_max``.
    """
    curve, hN = entropy_curve(dfa, n_max)
    if N2 is None:
        N2 = 48 if n_max >= 48 else n_max
    if N1 is None:
        N1 = 24 if N2 == 48 else max(1, N2 // 2)
    empirical = classify_empirical(curve, N1, N2)
    report = EntropyReport(curve, hN, limsup_estimate(hN), empirical)
    I = curve.alphabet_size
    if I <= 2 or generalized:
        spec = classify_spectral(dfa, generalized=generalized)
        report.spectral = spec.classification
        report.spectral_entropy = spec.classification.entropy
        report.lambda_moduli = list(spec.moduli)
        report.absorbing = spec.k
    return report


# --- ring data ----------------------------------------------------------------

def ring_data(dfa: Dfa, n_max: int) -> list[str]:
    """For N = 0..n_max, acceptance bits of all ``I^N`` strings in lexicographic order."""
    if n_max > RING_MAX_N:
        raise ValueError(f"ring data refused for N_max={n_max} > {RING_MAX_N}")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    I = len(dfa.alphabet)
    acc = dfa.accepting
    rings = []
    # states reached by every string of the previous length, in lexicographic order
    layer = [dfa.start]
    rings.append("1" if dfa.start in acc else "0")
    for _ in range(n_max):
        layer = [dfa.delta[s][i] for s in layer for i in range(I)]
        rings.append("".join("1" if s in acc else "0" for s in layer))
    return rings


def ring_csv(dfa: Dfa, n_max: int) -> str:
    """CSV rows ``N,index,string,accepted`` for external plotting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "index", "string", "accepted"])
    alphabet = dfa.alphabet
    for N, bits in enumerate(ring_data(dfa, n_max)):
        for idx, (word, bit) in enumerate(zip(product(alphabet.symbols, repeat=N), bits)):
            w.writerow([N, idx, alphabet.join(word) or "ε", bit])
    return buf.getvalue()
