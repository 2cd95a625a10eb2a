"""Recurrent cells with hand-derived gradients.

All arrays are float64 and batched along the first axis.  A hidden state is
a row vector, so ``U x`` for a column-vector input becomes ``x @ U.T`` here.
Mixed-length batches are left-padded; a padded step copies the state
through unchanged, which makes a batch exactly equivalent to unrolling each
string on its own.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "KINDS",
    "BatchTrace",
    "CellSpec",
    "ForwardTrace",
    "backward",
    "forward",
    "forward_batch",
    "init_params",
    "logits",
    "loss_and_grads",
    "match_budget",
    "param_count",
    "param_shapes",
]

KINDS = ("SRN", "MIRNN", "MRNN", "RNN2", "LSTM", "GRU", "UNI")
ACTIVATIONS = ("tanh", "linear")
READOUT = ("w_out", "b_out")


@dataclass(frozen=True)
class CellSpec:
    kind: str
    n_x: int
    n_h: int
    n_f: int | None = None
    activation: str = "tanh"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown cell kind {self.kind!r}; expected one of {KINDS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.n_x < 1 or self.n_h < 1:
            raise ValueError("n_x and n_h must be >= 1")
        if self.kind == "MRNN":
            # factor size defaults to the hidden size
            if self.n_f is None:
                object.__setattr__(self, "n_f", self.n_h)
            elif self.n_f < 1:
                raise ValueError("n_f must be >= 1")
        elif self.n_f is not None:
            raise ValueError("n_f is only meaningful for MRNN")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CellSpec":
        return cls(d["kind"], int(d["n_x"]), int(d["n_h"]), d.get("n_f"), d.get("activation", "tanh"))


def param_shapes(spec: CellSpec, readout: bool = True) -> dict[str, tuple[int, ...]]:
    H, I, F = spec.n_h, spec.n_x, spec.n_f
    k = spec.kind
    if k == "SRN":
        s = {"U": (H, I), "V": (H, H), "b": (H,)}
    elif k == "MIRNN":
        s = {"U": (H, I), "V": (H, H), "b": (H,), "alpha": (H,), "beta1": (H,), "beta2": (H,)}
    elif k == "MRNN":
        s = {"W_hf": (H, F), "W_fx": (F, I), "W_fh": (F, H), "W_hx": (H, I), "b": (H,)}
    elif k == "RNN2":
        s = {"W": (I, H, H), "b": (H,)}
    elif k == "UNI":
        s = {"W": (I, H, H), "U": (H, I), "V": (H, H), "b": (H,)}
    elif k == "LSTM":
        s = {}
        for g in "ifog":
            s.update({f"U_{g}": (H, I), f"V_{g}": (H, H), f"b_{g}": (H,)})
    else:  # GRU
        s = {}
        for g in "zrh":
            s.update({f"U_{g}": (H, I), f"V_{g}": (H, H), f"b_{g}": (H,)})
    if readout:
        s.update({"w_out": (H,), "b_out": (1,)})
    return s


def param_count(spec: CellSpec) -> int:
    """Recurrent-layer parameters; the readout is not counted."""
    return int(sum(np.prod(shp) for shp in param_shapes(spec, readout=False).values()))


def match_budget(kind: str, budget: int, n_x: int, activation: str = "tanh") -> int:
    """Largest hidden size whose recurrent parameter count fits in ``budget``."""
    if param_count(CellSpec(kind, n_x, 1, activation=activation)) > budget:
        raise ValueError(f"budget {budget} is below the smallest {kind} cell")
    h = 1
    while param_count(CellSpec(kind, n_x, h + 1, activation=activation)) <= budget:
        h += 1
    return h


def init_params(spec: CellSpec, seed: int, low: float = -0.02, high: float = 0.02) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {name: rng.uniform(low, high, size=shp) for name, shp in param_shapes(spec).items()}


def check_params(spec: CellSpec, params: dict[str, np.ndarray]) -> None:
    want = param_shapes(spec)
    missing = set(want) - set(params)
    if missing:
        raise ValueError(f"missing parameters: {sorted(missing)}")
    for name, shp in want.items():
        if np.shape(params[name]) != shp:
            raise ValueError(f"{name}: shape {np.shape(params[name])} != {shp}")


# --- activations -----------------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _act(kind: str, z):
    return np.tanh(z) if kind == "tanh" else z


def _dact(kind: str, y):
    """Derivative expressed through the activation's output."""
    return 1.0 - y * y if kind == "tanh" else np.ones_like(y)


# --- per-kind steps --------------------------------------------------------------
# step(p, x, state, act) -> (new_state, cache); back(p, cache, gstate, grads, act) -> gstate_prev

def _srn_step(p, x, st, act):
    (h,) = st
    y = _act(act, x @ p["U"].T + h @ p["V"].T + p["b"])
    return (y,), (x, h, y)


def _srn_back(p, cache, gst, g, act):
    x, h, y = cache
    ga = gst[0] * _dact(act, y)
    g["U"] += ga.T @ x
    g["V"] += ga.T @ h
    g["b"] += ga.sum(0)
    return (ga @ p["V"],)


def _mi_step(p, x, st, act):
    (h,) = st
    ux = x @ p["U"].T
    vh = h @ p["V"].T
    y = _act(act, p["alpha"] * ux * vh + p["beta1"] * vh + p["beta2"] * ux + p["b"])
    return (y,), (x, h, ux, vh, y)


def _mi_back(p, cache, gst, g, act):
    x, h, ux, vh, y = cache
    ga = gst[0] * _dact(act, y)
    g["alpha"] += (ga * ux * vh).sum(0)
    g["beta1"] += (ga * vh).sum(0)
    g["beta2"] += (ga * ux).sum(0)
    g["b"] += ga.sum(0)
    gux = ga * (p["alpha"] * vh + p["beta2"])
    gvh = ga * (p["alpha"] * ux + p["beta1"])
    g["U"] += gux.T @ x
    g["V"] += gvh.T @ h
    return (gvh @ p["V"],)


def _mrnn_step(p, x, st, act):
    (h,) = st
    fx = x @ p["W_fx"].T
    fh = h @ p["W_fh"].T
    m = fx * fh
    y = _act(act, m @ p["W_hf"].T + x @ p["W_hx"].T + p["b"])
    return (y,), (x, h, fx, fh, m, y)


def _mrnn_back(p, cache, gst, g, act):
    x, h, fx, fh, m, y = cache
    ga = gst[0] * _dact(act, y)
    g["W_hf"] += ga.T @ m
    g["W_hx"] += ga.T @ x
    g["b"] += ga.sum(0)
    gm = ga @ p["W_hf"]
    g["W_fx"] += (gm * fh).T @ x
    gfh = gm * fx
    g["W_fh"] += gfh.T @ h
    return (gfh @ p["W_fh"],)


def _second_order(p, x, h):
    # sum_k x_k W_k, one matrix per batch row
    wx = np.einsum("bk,kij->bij", x, p["W"])
    return wx, np.einsum("bij,bj->bi", wx, h)


def _rnn2_step(p, x, st, act):
    (h,) = st
    wx, a = _second_order(p, x, h)
    y = _act(act, a + p["b"])
    return (y,), (x, h, wx, y)


def _rnn2_back(p, cache, gst, g, act):
    x, h, wx, y = cache
    ga = gst[0] * _dact(act, y)
    g["W"] += np.einsum("bk,bi,bj->kij", x, ga, h, optimize=True)
    g["b"] += ga.sum(0)
    return (np.einsum("bij,bi->bj", wx, ga),)


def _uni_step(p, x, st, act):
    (h,) = st
    wx, a = _second_order(p, x, h)
    y = _act(act, a + x @ p["U"].T + h @ p["V"].T + p["b"])
    return (y,), (x, h, wx, y)


def _uni_back(p, cache, gst, g, act):
    x, h, wx, y = cache
    ga = gst[0] * _dact(act, y)
    g["W"] += np.einsum("bk,bi,bj->kij", x, ga, h, optimize=True)
    g["U"] += ga.T @ x
    g["V"] += ga.T @ h
    g["b"] += ga.sum(0)
    return (np.einsum("bij,bi->bj", wx, ga) + ga @ p["V"],)


def _lstm_step(p, x, st, act):
    h, c = st
    z = {s: x @ p[f"U_{s}"].T + h @ p[f"V_{s}"].T + p[f"b_{s}"] for s in "ifog"}
    i, f, o = _sigmoid(z["i"]), _sigmoid(z["f"]), _sigmoid(z["o"])
    gg = _act(act, z["g"])
    c_new = c * f + gg * i
    tc = _act(act, c_new)
    h_new = tc * o
    return (h_new, c_new), (x, h, c, i, f, o, gg, tc)


def _lstm_back(p, cache, gst, g, act):
    x, h, c, i, f, o, gg, tc = cache
    gh, gc = gst
    go = gh * tc
    gc = gc + gh * o * _dact(act, tc)
    gz = {
        "i": gc * gg * i * (1 - i),
        "f": gc * c * f * (1 - f),
        "o": go * o * (1 - o),
        "g": gc * i * _dact(act, gg),
    }
    gh_prev = 0.0
    for s, gs in gz.items():
        g[f"U_{s}"] += gs.T @ x
        g[f"V_{s}"] += gs.T @ h
        g[f"b_{s}"] += gs.sum(0)
        gh_prev = gh_prev + gs @ p[f"V_{s}"]
    return (gh_prev, gc * f)


def _gru_step(p, x, st, act):
    (h,) = st
    z = _sigmoid(x @ p["U_z"].T + h @ p["V_z"].T + p["b_z"])
    r = _sigmoid(x @ p["U_r"].T + h @ p["V_r"].T + p["b_r"])
    hr = h * r
    gg = _act(act, x @ p["U_h"].T + hr @ p["V_h"].T + p["b_h"])
    h_new = (1 - z) * gg + z * h
    return (h_new,), (x, h, z, r, hr, gg)


def _gru_back(p, cache, gst, g, act):
    x, h, z, r, hr, gg = cache
    gh = gst[0]
    gag = gh * (1 - z) * _dact(act, gg)
    gaz = gh * (h - gg) * z * (1 - z)
    g["U_h"] += gag.T @ x
    g["V_h"] += gag.T @ hr
    g["b_h"] += gag.sum(0)
    ghr = gag @ p["V_h"]
    gar = ghr * h * r * (1 - r)
    for s, ga in (("z", gaz), ("r", gar)):
        g[f"U_{s}"] += ga.T @ x
        g[f"V_{s}"] += ga.T @ h
        g[f"b_{s}"] += ga.sum(0)
    return (gh * z + ghr * r + gaz @ p["V_z"] + gar @ p["V_r"],)


_CELLS = {
    "SRN": (_srn_step, _srn_back),
    "MIRNN": (_mi_step, _mi_back),
    "MRNN": (_mrnn_step, _mrnn_back),
    "RNN2": (_rnn2_step, _rnn2_back),
    "UNI": (_uni_step, _uni_back),
    "LSTM": (_lstm_step, _lstm_back),
    "GRU": (_gru_step, _gru_back),
}


# --- batched unrolling -------------------------------------------------------------

@dataclass
class BatchTrace:
    spec: CellSpec
    states: list[tuple[np.ndarray, ...]]  # T+1 entries, states[0] is the initial state
    caches: list
    masks: np.ndarray  # (T, B) 1.0 on real steps
    logits: np.ndarray  # (B,)

    @property
    def hidden(self) -> np.ndarray:
        """(T+1, B, N_h) hidden states including h^0."""
        return np.stack([s[0] for s in self.states])


def encode_batch(seqs: Sequence[Sequence[int]], n_x: int) -> tuple[np.ndarray, np.ndarray]:
    """Left-padded one-hot inputs (T, B, n_x) and step masks (T, B)."""
    B = len(seqs)
    T = max((len(s) for s in seqs), default=0)
    x = np.zeros((T, B, n_x))
    mask = np.zeros((T, B))
    for b, s in enumerate(seqs):
        off = T - len(s)
        if len(s):
            idx = np.asarray(s, dtype=np.int64)
            if idx.min() < 0 or idx.max() >= n_x:
                raise ValueError(f"symbol index out of range for n_x={n_x}")
            x[off + np.arange(len(s)), b, idx] = 1.0
            mask[off:, b] = 1.0
    return x, mask


def _initial_state(spec: CellSpec, B: int, h0) -> tuple[np.ndarray, ...]:
    h = np.zeros((B, spec.n_h))
    if h0 is not None:
        h0 = np.asarray(h0, dtype=float)
        if h0.shape != (spec.n_h,):
            raise ValueError(f"h0 must have shape ({spec.n_h},)")
        h = h + h0
    if spec.kind == "LSTM":
        return (h, np.zeros((B, spec.n_h)))
    return (h,)


def forward_batch(spec: CellSpec, params: dict, seqs: Sequence[Sequence[int]], h0=None) -> BatchTrace:
    x, mask = encode_batch(seqs, spec.n_x)
    step, _ = _CELLS[spec.kind]
    act = spec.activation
    st = _initial_state(spec, len(seqs), h0)
    states, caches = [st], []
    for t in range(x.shape[0]):
        new, cache = step(params, x[t], st, act)
        m = mask[t][:, None]
        if m.all():
            st = new
        else:
            st = tuple(m * a + (1 - m) * b for a, b in zip(new, st))
        states.append(st)
        caches.append(cache)
    out = st[0] @ params["w_out"] + params["b_out"][0]
    return BatchTrace(spec, states, caches, mask, out)


def logits(spec: CellSpec, params: dict, seqs: Sequence[Sequence[int]], h0=None) -> np.ndarray:
    return forward_batch(spec, params, seqs, h0).logits


def _backward_from(trace: BatchTrace, params: dict, glogit: np.ndarray) -> dict[str, np.ndarray]:
    spec = trace.spec
    _, back = _CELLS[spec.kind]
    grads = {k: np.zeros_like(v, dtype=float) for k, v in params.items() if k in param_shapes(spec)}
    hT = trace.states[-1][0]
    grads["w_out"] += glogit @ hT
    grads["b_out"] += glogit.sum(keepdims=True)
    gst = tuple(np.zeros_like(s) for s in trace.states[-1])
    gst = (np.outer(glogit, params["w_out"]),) + gst[1:]
    for t in range(len(trace.caches) - 1, -1, -1):
        m = trace.masks[t][:, None]
        if m.all():
            gst = back(params, trace.caches[t], gst, grads, spec.activation)
        else:
            inner = back(params, trace.caches[t], tuple(m * g for g in gst), grads, spec.activation)
            gst = tuple(a + (1 - m) * g for a, g in zip(inner, gst))
    return grads


def loss_and_grads(spec: CellSpec, params: dict, seqs: Sequence[Sequence[int]], labels: Sequence[bool],
                   h0=None, reduce: str = "mean") -> tuple[float, dict[str, np.ndarray]]:
    """Binary cross-entropy on the final logit and its exact gradient."""
    trace = forward_batch(spec, params, seqs, h0)
    y = np.asarray(labels, dtype=float)
    z = trace.logits
    # softplus(z) - y z, written to stay finite for large |z|
    losses = np.logaddexp(0.0, z) - y * z
    glogit = _sigmoid(z) - y
    if reduce == "mean":
        scale = 1.0 / max(len(seqs), 1)
    elif reduce == "sum":
        scale = 1.0
    else:
        raise ValueError("reduce must be 'mean' or 'sum'")
    grads = _backward_from(trace, params, glogit * scale)
    return float(losses.sum() * scale), grads


# --- single-string interface ---------------------------------------------------------

@dataclass
class ForwardTrace:
    spec: CellSpec
    inputs: tuple[int, ...]
    hidden: np.ndarray  # (len+1, N_h), row 0 is h^0
    cells: np.ndarray | None  # LSTM cell states, same layout
    logit: float
    batch: BatchTrace

    def __len__(self):
        return len(self.hidden)


def forward(spec: CellSpec, params: dict, string: Sequence[int], h0=None) -> ForwardTrace:
    check_params(spec, params)
    tr = forward_batch(spec, params, [tuple(string)], h0)
    cells = np.stack([s[1][0] for s in tr.states]) if spec.kind == "LSTM" else None
    return ForwardTrace(spec, tuple(string), tr.hidden[:, 0, :], cells, float(tr.logits[0]), tr)


def backward(spec: CellSpec, params: dict, trace: ForwardTrace, label: bool) -> dict[str, np.ndarray]:
    """Gradient of the single-string cross-entropy loss."""
    glogit = np.array([_sigmoid(trace.logit) - float(label)])
    return _backward_from(trace.batch, params, glogit)


def bce(logit: float, label: bool) -> float:
    return float(np.logaddexp(0.0, logit) - float(label) * logit)
