"""Training, evaluation and experiment grids."""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .automata import Dfa, build_tomita, deserialize, minimize, sl4, sp8
from .datagen import LabeledDataset, read_dataset, slsp_protocol, tomita_protocol
from .neural import CellSpec, Model, init_params, loss_and_grads, match_budget, param_count, rmsprop_step

__all__ = [
    "ConfigError",
    "GridConfig",
    "Metrics",
    "NormSummary",
    "NumericalFailure",
    "RunReport",
    "TrainConfig",
    "evaluate",
    "grid",
    "norm_trace_report",
    "resolve_grammar",
    "train",
]


class ConfigError(ValueError):
    pass


class NumericalFailure(ArithmeticError):
    def __init__(self, message: str, report: "RunReport"):
        super().__init__(message)
        self.report = report


# --- configuration -------------------------------------------------------------------

def _read_flat(text: str, source: str = "<config>") -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[run]\n" + text, source=source)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    return dict(cp["run"])


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.replace(";", ",").split(",") if v.strip()]


@dataclass
class TrainConfig:
    kind: str = "SRN"
    n_h: int | None = None
    budget: str | None = None  # "SRN:10" or a plain integer
    activation: str = "tanh"
    lr: float = 0.01
    batch_size: int = 100
    epochs: int = 100
    seed: int = 0
    patience: int = 5
    eval_every: int = 1
    val_fraction: float = 0.1
    init_low: float = -0.02
    init_high: float = 0.02
    h0: str = "auto"  # zero, onehot, or auto (onehot for RNN2 only)
    train: str | None = None
    test: list[str] = field(default_factory=list)
    dfa: str | None = None
    out: str | None = None

    def __post_init__(self):
        self.kind = self.kind.upper()
        try:
            CellSpec(self.kind, 1, 1, activation=self.activation)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.patience < 1 or self.eval_every < 1:
            raise ConfigError("patience and eval_every must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("val_fraction must be in [0, 1)")
        if self.h0 not in ("auto", "zero", "onehot"):
            raise ConfigError("h0 must be auto, zero or onehot")
        if self.n_h is None and self.budget is None:
            raise ConfigError("one of n_h or budget is required")
        if self.n_h is not None and self.n_h < 1:
            raise ConfigError("n_h must be >= 1")

    def initial_state(self, n_h: int) -> np.ndarray | None:
        mode = self.h0
        if mode == "auto":
            # a pure second-order cell started from zero never sees the first symbol
            mode = "onehot" if self.kind == "RNN2" else "zero"
        if mode == "zero":
            return None
        h0 = np.zeros(n_h)
        h0[0] = 1.0
        return h0

    def hidden_size(self, n_x: int) -> int:
        if self.n_h is not None:
            return self.n_h
        return budget_hidden_size(self.kind, self.budget, n_x, self.activation)

    @classmethod
    def from_mapping(cls, raw: dict[str, str], base: Path | None = None) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        kw: dict = {}
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                if key in ("n_h", "batch_size", "epochs", "seed", "patience", "eval_every"):
                    kw[key] = int(value)
                elif key in ("lr", "val_fraction", "init_low", "init_high"):
                    kw[key] = float(value)
                elif key == "test":
                    kw[key] = _split_list(value)
                else:
                    kw[key] = value.strip()
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        cfg = cls(**kw)
        if base is not None:
            rel = lambda p: str((base / p)) if p and not Path(p).is_absolute() else p  # noqa: E731
            cfg.train = rel(cfg.train)
            cfg.dfa = rel(cfg.dfa)
            cfg.out = rel(cfg.out)
            cfg.test = [rel(p) for p in cfg.test]
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        return cls.from_mapping(_read_flat(text, str(path)), path.parent)

    def to_dict(self) -> dict:
        return asdict(self)


def budget_hidden_size(kind: str, budget: str | int | None, n_x: int, activation: str = "tanh") -> int:
    """Hidden size for ``kind`` matching ``budget`` (an int, or ``KIND:N_h`` anchor)."""
    if budget is None:
        raise ConfigError("budget missing")
    text = str(budget).strip()
    try:
        if ":" in text:
            anchor_kind, anchor_h = text.split(":", 1)
            count = param_count(CellSpec(anchor_kind.strip().upper(), n_x, int(anchor_h), activation=activation))
        else:
            count = int(text)
        return match_budget(kind, count, n_x, activation)
    except ValueError as e:
        raise ConfigError(f"bad budget {budget!r}: {e}") from None


# --- metrics ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    f1: float
    bcr: float
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_confusion(cls, tp: int, fp: int, fn: int, tn: int) -> "Metrics":
        # no positives anywhere, predicted or true: nothing was gotten wrong
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else (1.0 if fp + fn == 0 else 0.0)
        # a class with no items counts as perfectly recalled
        tpr = tp / (tp + fn) if tp + fn else 1.0
        tnr = tn / (tn + fp) if tn + fp else 1.0
        n = tp + fp + fn + tn
        return cls(f1, (tpr + tnr) / 2, (tp + tn) / n if n else 1.0, tp, fp, fn, tn)

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_from(pred: Sequence[bool], truth: Sequence[bool]) -> Metrics:
    p = np.asarray(pred, dtype=bool)
    y = np.asarray(truth, dtype=bool)
    return Metrics.from_confusion(int((p & y).sum()), int((p & ~y).sum()), int((~p & y).sum()), int((~p & ~y).sum()))


def evaluate(model: Model, dataset: LabeledDataset | Sequence[tuple[Sequence[int], bool]]) -> Metrics:
    items = dataset.items if isinstance(dataset, LabeledDataset) else list(dataset)
    if not items:
        return Metrics.from_confusion(0, 0, 0, 0)
    # length-sorted batches keep padding small; metrics do not depend on order
    order = sorted(range(len(items)), key=lambda i: len(items[i][0]))
    seqs = [items[i][0] for i in order]
    pred = model.predict(seqs)
    return metrics_from(pred, [items[i][1] for i in order])


def mean_bce(model: Model, items: Sequence[tuple[Sequence[int], bool]]) -> float:
    if not items:
        return 0.0
    z = model.logits([s for s, _ in items])
    y = np.array([lab for _, lab in items], dtype=float)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


# --- training ---------------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    spec: dict
    param_count: int
    metrics: dict[str, dict]
    groups: list[str]
    trace: list[list[float]]  # one row of group norms per optimizer step
    initial_norms: list[float]
    history: list[dict]
    epochs_run: int
    steps: int
    best_epoch: int
    wall_time: float
    status: str = "ok"
    model: Model | None = field(default=None, repr=False, compare=False)

    def to_dict(self, with_trace: bool = False) -> dict:
        d = {k: v for k, v in asdict(replace(self, model=None)).items() if k not in ("model", "trace", "initial_norms")}
        if with_trace:
            d["trace"] = self.trace
            d["initial_norms"] = self.initial_norms
        return d

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step"] + self.groups)
        for i, row in enumerate(self.trace, start=1):
            w.writerow([i] + [repr(x) for x in row])
        return buf.getvalue()


def _group_norms(params: dict, groups: list[str]) -> list[float]:
    return [float(np.linalg.norm(params[g])) for g in groups]


def _all_finite(loss: float, grads: dict) -> bool:
    return math.isfinite(loss) and all(np.isfinite(g).all() for g in grads.values())


def _load_checked(path: str, dfa_path: str | None) -> LabeledDataset:
    try:
        ds = read_dataset(path)
    except OSError as e:
        raise ConfigError(f"cannot read dataset: {e}") from None
    ref = dfa_path
    if ref is None and ds.dfa_ref not in ("", "-"):
        ref = str(Path(path).parent / ds.dfa_ref)
    if ref is not None:
        try:
            dfa = deserialize(Path(ref).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read DFA {ref}: {e}") from None
        ds.verify(dfa)
    return ds


def train(config: TrainConfig, train_set: LabeledDataset | None = None,
          test_sets: dict[str, LabeledDataset] | None = None) -> RunReport:
    """Mini-batch RMSprop on binary cross-entropy.

    Datasets come from the config paths unless passed directly.  The best
    epoch is picked by (train F1 reached 1.0, validation F1, train F1) and
    its weights are the ones evaluated and returned.
    """
    t0 = time.perf_counter()
    if train_set is None:
        if not config.train:
            raise ConfigError("no training set given")
        train_set = _load_checked(config.train, config.dfa)
    if test_sets is None:
        test_sets = {Path(p).stem: _load_checked(p, config.dfa) for p in config.test}
    n_x = len(train_set.alphabet)
    spec = CellSpec(config.kind, n_x, config.hidden_size(n_x), activation=config.activation)
    params = init_params(spec, config.seed, config.init_low, config.init_high)
    groups = [g for g in params if g not in ("w_out", "b_out")]

    rng = np.random.default_rng(config.seed)
    items = list(train_set.items)
    perm = rng.permutation(len(items))
    n_val = int(round(len(items) * config.val_fraction)) if len(items) >= 10 else 0
    val = [items[i] for i in perm[:n_val]]
    fit = [items[i] for i in perm[n_val:]]
    if not fit:
        raise ConfigError("training set is empty")

    h0 = config.initial_state(spec.n_h)
    model = Model(spec, params, h0, train_set.alphabet.symbols, {"seed": config.seed})
    state: dict = {}
    initial = _group_norms(params, groups)
    trace: list[list[float]] = []
    history: list[dict] = []
    best_key, best_params, best_epoch = None, None, 0
    streak = 0
    epochs_run = 0

    def report(status: str, final: Model) -> RunReport:
        metrics = {name: evaluate(final, ds).to_dict() for name, ds in test_sets.items()}
        return RunReport(config.to_dict(), spec.to_dict(), param_count(spec), metrics, groups, trace, initial,
                         history, epochs_run, len(trace), best_epoch, time.perf_counter() - t0, status, final)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(fit))
        losses = []
        for start in range(0, len(fit), config.batch_size):
            batch = [fit[i] for i in order[start:start + config.batch_size]]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_grads(spec, params, [s for s, _ in batch], [y for _, y in batch], h0)
            if not _all_finite(loss, grads):
                epochs_run = epoch
                raise NumericalFailure(f"non-finite loss or gradient at epoch {epoch}", report("diverged", model))
            rmsprop_step(params, grads, state, lr=config.lr)
            if not all(np.isfinite(p).all() for p in params.values()):
                epochs_run = epoch
                raise NumericalFailure(f"non-finite parameters at epoch {epoch}", report("diverged", model))
            trace.append(_group_norms(params, groups))
            losses.append(loss)
        epochs_run = epoch
        if epoch % config.eval_every and epoch != config.epochs:
            history.append({"epoch": epoch, "loss": float(np.mean(losses))})
            continue
        tr = evaluate(model, fit)
        va = evaluate(model, val) if val else tr
        vl = mean_bce(model, val if val else fit)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "train_f1": tr.f1, "val_f1": va.f1,
                        "val_loss": vl})
        key = (tr.f1 == 1.0, va.f1, tr.f1, -vl)
        if best_key is None or key > best_key:
            best_key, best_epoch = key, epoch
            best_params = {k: v.copy() for k, v in params.items()}
        streak = streak + 1 if tr.f1 == 1.0 else 0
        if streak >= config.patience:
            break
    final = Model(spec, best_params if best_params is not None else params, h0,
                  train_set.alphabet.symbols, {"seed": config.seed, "epoch": best_epoch})
    return report("ok", final)


# --- norm traces ----------------------------------------------------------------------

@dataclass
class NormSummary:
    variation: dict[str, float]
    dominant: str | None
    ratio: float | None

    @property
    def degenerate(self) -> bool:
        return self.ratio is None

    def to_dict(self) -> dict:
        return {"variation": self.variation, "dominant": self.dominant, "ratio": self.ratio,
                "degenerate": self.degenerate}


def norm_trace_report(run: RunReport) -> NormSummary:
    """Total variation of each group's norm and the largest group's share."""
    rows = np.asarray([run.initial_norms] + run.trace, dtype=float) if run.initial_norms else np.asarray(run.trace)
    if rows.ndim != 2 or len(rows) < 2:
        tv = np.zeros(len(run.groups))
    else:
        tv = np.abs(np.diff(rows, axis=0)).sum(axis=0)
    variation = {g: float(v) for g, v in zip(run.groups, tv)}
    total = float(tv.sum())
    if total <= 0:
        return NormSummary(variation, None, None)
    i = int(np.argmax(tv))
    return NormSummary(variation, run.groups[i], float(tv[i] / total))


# --- grids -------------------------------------------------------------------------------

def resolve_grammar(name: str) -> Dfa:
    """Builder names (tomita1..7, sl4, sp8) or a path to a DFA file."""
    key = name.strip().lower().replace("-", "")
    if key.startswith("tomita") and key[6:].isdigit():
        return minimize(build_tomita(int(key[6:])))
    if key == "sl4":
        return minimize(sl4())
    if key == "sp8":
        return minimize(sp8())
    p = Path(name)
    if p.exists():
        return deserialize(p.read_text(encoding="utf-8"))
    raise ConfigError(f"unknown grammar {name!r}")


@dataclass
class GridConfig:
    grammars: list[str]
    kinds: list[str]
    seeds: list[int] = field(default_factory=lambda: [0])
    sizes: list[int] = field(default_factory=list)
    anchor: str | None = None  # "SRN:10" switches on budget mode
    data_seed: int = 0
    train_size: int = 10_000
    workers: int = 1
    template: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "GridConfig":
        path = Path(path)
        try:
            raw = _read_flat(path.read_text(encoding="utf-8"), str(path))
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict[str, str]) -> "GridConfig":
        raw = dict(raw)
        try:
            grammars = _split_list(raw.pop("grammars"))
            kinds = [k.upper() for k in _split_list(raw.pop("kinds"))]
        except KeyError as e:
            raise ConfigError(f"missing grid key {e}") from None
        try:
            seeds = [int(s) for s in _split_list(raw.pop("seeds", "0"))]
            sizes = [int(s) for s in _split_list(raw.pop("sizes", ""))]
            data_seed = int(raw.pop("data_seed", "0"))
            train_size = int(raw.pop("train_size", "10000"))
            workers = int(raw.pop("workers", "1"))
        except ValueError as e:
            raise ConfigError(str(e)) from None
        anchor = raw.pop("anchor", None)
        if not sizes and not anchor:
            raise ConfigError("grid needs sizes or an anchor")
        # whatever is left must be a valid TrainConfig key
        TrainConfig.from_mapping(dict(raw, kind=kinds[0] if kinds else "SRN", n_h="1"))
        return cls(grammars, kinds, seeds, sizes, anchor, data_seed, train_size, workers, raw)


def _grammar_data(name: str, data_seed: int, train_size: int):
    dfa = resolve_grammar(name)
    if len(dfa.alphabet) == 2:
        tr, te = tomita_protocol(dfa, data_seed, grammar=name)
        return tr, {"test": te}
    tr, t1, t2 = slsp_protocol(dfa, data_seed, train_size=train_size, grammar=name)
    return tr, {"test1": t1, "test2": t2}


def _grid_cell(args) -> tuple[tuple, RunReport]:
    key, cfg, train_set, tests = args
    try:
        rep = train(cfg, train_set, tests)
    except NumericalFailure as e:
        rep = e.report
    rep.model = None
    return key, rep


def grid(gc: GridConfig, out: str | Path | None = None) -> list[tuple[tuple, RunReport]]:
    """Run every (grammar, kind, size, seed) cell; results in canonical order."""
    jobs = []
    for g in gc.grammars:
        train_set, tests = _grammar_data(g, gc.data_seed, gc.train_size)
        n_x = len(train_set.alphabet)
        for kind in gc.kinds:
            if gc.anchor:
                hs = [budget_hidden_size(kind, gc.anchor, n_x, gc.template.get("activation", "tanh"))]
            else:
                hs = gc.sizes
            for h in hs:
                for s in gc.seeds:
                    raw = dict(gc.template, kind=kind, n_h=str(h), seed=str(s))
                    cfg = TrainConfig.from_mapping(raw)
                    jobs.append(((g, kind, h, s), cfg, train_set, tests))
    if gc.workers > 1:
        with ProcessPoolExecutor(gc.workers) as ex:
            results = list(ex.map(_grid_cell, jobs))
    else:
        results = [_grid_cell(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    if out is not None:
        write_grid(results, out)
    return results


GRID_COLUMNS = ["grammar", "kind", "n_h", "seed", "params", "epochs", "steps", "status", "split", "f1", "bcr", "accuracy"]


def grid_rows(results) -> list[dict]:
    rows = []
    for (g, kind, h, s), rep in results:
        for split in sorted(rep.metrics):
            m = rep.metrics[split]
            rows.append({"grammar": g, "kind": kind, "n_h": h, "seed": s, "params": rep.param_count,
                         "epochs": rep.epochs_run, "steps": rep.steps, "status": rep.status, "split": split,
                         "f1": m["f1"], "bcr": m["bcr"], "accuracy": m["accuracy"]})
    return rows


def write_grid(results, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=GRID_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(grid_rows(results))
    full = []
    for (g, kind, h, s), rep in results:
        d = rep.to_dict()
        d["key"] = {"grammar": g, "kind": kind, "n_h": h, "seed": s}
        d["norms"] = norm_trace_report(rep).to_dict()
        full.append(d)
        run_dir = out / "runs" / f"{g}_{kind}_{h}_{s}"
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "trace.csv").write_text(rep.trace_csv(), encoding="utf-8")
    (out / "results.json").write_text(json.dumps(full, indent=1) + "\n", encoding="utf-8")
