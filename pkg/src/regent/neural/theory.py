"""Links between DFAs and linear recurrent cells.

A DFA's per-symbol transition matrices act on one-hot state vectors, so a
linear second-order cell with ``W_k = T_k`` tracks the automaton exactly.
First-order cells can only share one recurrent matrix across symbols; the
fits here measure how far that leaves them from the automaton.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..automata import Dfa, transition_matrices
from .cells import CellSpec
from .model import Model

MC_SAMPLES = 10_000


def construct_2rnn(dfa: Dfa) -> Model:
    """Linear 2-RNN whose hidden state is the one-hot DFA state."""
    tm = transition_matrices(dfa)
    n, I = dfa.n, len(dfa.alphabet)
    spec = CellSpec("RNN2", I, n, activation="linear")
    w_out = np.zeros(n)
    w_out[sorted(dfa.accepting)] = 1.0
    params = {
        "W": np.stack([t.astype(float) for t in tm.per_symbol]),
        "b": np.zeros(n),
        "w_out": w_out,
        "b_out": np.array([-0.5]),
    }
    h0 = np.zeros(n)
    h0[dfa.start] = 1.0
    return Model(spec, params, h0, dfa.alphabet.symbols, {"source": "construct_2rnn"})


def _mc_l1(mats: list[np.ndarray], offsets: list[np.ndarray] | None, n: int, samples: int, seed: int):
    """Mean and standard error of sum_i |A_i h + c_i|_1 for h uniform in [-1, 1]^n."""
    rng = np.random.default_rng(seed)
    h = rng.uniform(-1.0, 1.0, size=(samples, n))
    total = np.zeros(samples)
    for i, a in enumerate(mats):
        r = h @ a.T
        if offsets is not None:
            r = r + offsets[i]
        total += np.abs(r).sum(axis=1)
    return float(total.mean()), float(total.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0


def second_order_residual(dfa: Dfa, W: np.ndarray, samples: int = MC_SAMPLES, seed: int = 0) -> float:
    """Monte-Carlo value of the 2-RNN objective: sum_i |T_i h - W_i h|."""
    tm = transition_matrices(dfa)
    return _mc_l1([t - w for t, w in zip(tm.per_symbol, W)], None, dfa.n, samples, seed)[0]


@dataclass
class FirstOrderFit:
    model: Model
    residual: float
    stderr: float
    mode: str


def first_order_fit(dfa: Dfa, mode: str, samples: int = MC_SAMPLES, seed: int = 0) -> FirstOrderFit:
    """Uniform-weight solution ``V = mean_i T_i`` and its residual.

    SRN: residual of sum_i |T_i h - V h + c_i| with c_i = 0, averaged over
    the cube.  MIRNN: U is all ones, so every slice reduces to V and the
    integrand no longer depends on h; the residual is sum_i |T_i - V|_1.
    """
    mode = mode.upper()
    tm = transition_matrices(dfa)
    n, I = dfa.n, len(dfa.alphabet)
    T = [t.astype(float) for t in tm.per_symbol]
    V = sum(T) / I
    if mode == "SRN":
        spec = CellSpec("SRN", I, n, activation="linear")
        params = {"U": np.zeros((n, I)), "V": V, "b": np.zeros(n)}
        res, se = _mc_l1([t - V for t in T], [np.zeros(n)] * I, n, samples, seed)
    elif mode == "MIRNN":
        spec = CellSpec("MIRNN", I, n, activation="linear")
        U = np.ones((n, I))
        params = {"U": U, "V": V, "b": np.zeros(n), "alpha": np.ones(n),
                  "beta1": np.zeros(n), "beta2": np.zeros(n)}
        # (1_n kron U_i^T) has every row equal to U_i^T
        res = float(sum(np.abs(t - np.outer(np.ones(n), U[:, i]) * V).sum() for i, t in enumerate(T)))
        se = 0.0
    else:
        raise ValueError("mode must be SRN or MIRNN")
    params["w_out"] = np.zeros(n)
    params["w_out"][sorted(dfa.accepting)] = 1.0
    params["b_out"] = np.array([-0.5])
    h0 = np.zeros(n)
    h0[dfa.start] = 1.0
    model = Model(spec, params, h0, dfa.alphabet.symbols, {"source": f"first_order_fit:{mode}"})
    return FirstOrderFit(model, res, se, mode)


def configure_unified(target: str, spec: CellSpec, params: dict) -> tuple[CellSpec, dict]:
    """UNI parameters that reproduce a SRN, MIRNN or RNN2 exactly."""
    target = target.upper()
    if target != spec.kind:
        raise ValueError(f"spec kind {spec.kind} does not match target {target}")
    H, I = spec.n_h, spec.n_x
    uni = CellSpec("UNI", I, H, activation=spec.activation)
    if target == "SRN":
        out = {"W": np.zeros((I, H, H)), "U": params["U"].copy(), "V": params["V"].copy(), "b": params["b"].copy()}
    elif target == "MIRNN":
        U, V, a = params["U"], params["V"], params["alpha"]
        # W'_{ijk} = alpha_j U_{ji} V_{jk}
        W = np.einsum("j,ji,jk->ijk", a, U, V)
        out = {"W": W, "U": params["beta2"][:, None] * U, "V": params["beta1"][:, None] * V, "b": params["b"].copy()}
    elif target == "RNN2":
        # keep the bias so a biased 2-RNN is reproduced too
        out = {"W": params["W"].copy(), "U": np.zeros((H, I)), "V": np.zeros((H, H)), "b": params["b"].copy()}
    else:
        raise ValueError(f"cannot configure UNI from {target}")
    for k in ("w_out", "b_out"):
        if k in params:
            out[k] = params[k].copy()
    return uni, out


def mi_switch_property_check(params: dict, tol: float = 1e-9) -> bool:
    """W'_{ijk} W'_{njm} == W'_{ijm} W'_{njk} for every index tuple.

    Equivalent to each slice ``W'[:, j, :]`` having rank at most one.
    """
    W = np.asarray(params["W"] if isinstance(params, dict) else params, dtype=float)
    prod = np.einsum("ijk,njm->jiknm", W, W)
    swapped = prod.transpose(0, 1, 4, 3, 2)
    scale = max(1.0, float(np.abs(W).max()) ** 2)
    return bool(np.abs(prod - swapped).max() <= tol * scale)
