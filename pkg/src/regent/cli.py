"""Command-line entry point: ``regent <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .automata import (
    Alphabet,
    DfaParseError,
    accepts,
    build_random,
    build_sl,
    build_sp,
    build_tomita,
    deserialize,
    minimize,
    serialize,
    sl4,
    sp8,
    to_dot,
)
from .complexity import UnsupportedAlphabetError, entropy_report, ring_csv
from .datagen import DatasetParseError, read_dataset, sample_split, slsp_protocol, sparse_protocol, tomita_protocol, write_dataset
from .harness import (
    ConfigError,
    GridConfig,
    NumericalFailure,
    TrainConfig,
    evaluate,
    grid,
    grid_rows,
    norm_trace_report,
    train,
)
from .neural import construct_2rnn, first_order_fit, load_model, save_model

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _read_dfa(path: str):
    try:
        return deserialize(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _alphabet_arg(args) -> Alphabet | None:
    if getattr(args, "alphabet", None):
        syms = args.alphabet.split() if " " in args.alphabet.strip() else list(args.alphabet.strip())
        return Alphabet(tuple(syms))
    size = getattr(args, "alphabet_size", None)
    if size:
        return Alphabet(tuple(str(i) for i in range(size)) if size <= 10 else tuple(f"s{i}" for i in range(size)))
    return None


def _build(args):
    fam = args.family
    if fam == "tomita":
        if args.id is None:
            raise UsageError("--id is required for the tomita family")
        return build_tomita(args.id)
    if fam == "sl4":
        return sl4()
    if fam == "sp8":
        return sp8()
    if fam in ("sl", "sp"):
        alpha = _alphabet_arg(args)
        if alpha is None or not args.factors:
            raise UsageError(f"--alphabet and --factors are required for the {fam} family")
        parts = [f.strip() for f in args.factors.split(",") if f.strip()]
        return build_sl(parts, alpha) if fam == "sl" else build_sp(parts, alpha)
    if fam == "random":
        alpha = _alphabet_arg(args) or Alphabet(("0", "1"))
        return build_random(args.states, alpha, args.accept_fraction, args.seed)
    raise UsageError(f"unknown family {fam}")


def _add_family_args(p):
    p.add_argument("--family", required=True, choices=["tomita", "sl4", "sp8", "sl", "sp", "random"])
    p.add_argument("--id", type=int, help="Tomita grammar number 1-7")
    p.add_argument("--alphabet", help="symbols, e.g. 'abcd' or 'go stop'")
    p.add_argument("--alphabet-size", type=int)
    p.add_argument("--factors", help="comma separated forbidden factors or subsequences")
    p.add_argument("--states", type=int, default=10)
    p.add_argument("--accept-fraction", type=float, default=0.5)


# --- commands --------------------------------------------------------------------------

def cmd_dfa_build(args):
    d = _build(args)
    if not args.no_minimize:
        d = minimize(d)
    _emit(to_dot(d) if args.dot else serialize(d), args.out)


def cmd_dfa_minimize(args):
    d = minimize(_read_dfa(args.file))
    _emit(to_dot(d) if args.dot else serialize(d), args.out)


def cmd_dfa_accepts(args):
    d = _read_dfa(args.file)
    text = "" if args.string in ("ε", "") else args.string
    syms = text.split() if (" " in text or not d.alphabet.single_char) else text
    ok = accepts(d, syms)
    print("accept" if ok else "reject")
    return EXIT_OK if ok or not args.status else 1


def cmd_entropy(args):
    rep = entropy_report(_read_dfa(args.file), args.nmax, args.n1, args.n2, args.generalized)
    _emit(json.dumps(rep.to_dict(), indent=1) + "\n", args.out)


def cmd_classify(args):
    d = _read_dfa(args.file)
    if len(d.alphabet) > 2 and not args.generalized:
        raise UnsupportedAlphabetError("spectral route needs --generalized for alphabets larger than 2")
    rep = entropy_report(d, args.nmax, generalized=args.generalized)
    print(f"class: {rep.cls.value}")
    if rep.spectral is not None:
        print(f"spectral: {rep.spectral.cls.value} H={rep.spectral.entropy} absorbing={rep.absorbing}")
    emp = rep.empirical
    print(f"empirical: {emp.cls.value} H={emp.entropy} growth={emp.growth}" + (" (oscillating)" if emp.oscillating else ""))


def cmd_rings(args):
    _emit(ring_csv(_read_dfa(args.file), args.nmax), args.out)


def cmd_gen(args):
    d = minimize(_build(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "grammar.dfa").write_text(serialize(d), encoding="utf-8")
    name = f"{args.family}{args.id or ''}"
    proto = args.protocol
    if proto == "tomita":
        tr, te = tomita_protocol(d, args.seed, grammar=name)
        splits = {"train": tr, "test": te}
    elif proto == "slsp":
        tr, t1, t2 = slsp_protocol(d, args.seed, train_size=args.train_size, grammar=name)
        splits = {"train": tr, "test1": t1, "test2": t2}
    elif proto == "sparse":
        tr, te = sparse_protocol(d, args.sparsity, args.seed, grammar=name)
        splits = {"train": tr, "test": te}
    else:
        lengths = [int(x) for x in args.lengths.split(",")]
        splits = {"data": sample_split(d, lengths, args.cap, args.balance, args.seed, "data", grammar=name)}
    for split, ds in splits.items():
        ds.dfa_ref = "grammar.dfa"
        write_dataset(ds, out / f"{split}.ds")
        print(f"{split}: {len(ds)} strings, {ds.positives()} positive -> {out / (split + '.ds')}")


def cmd_construct(args):
    m = construct_2rnn(minimize(_read_dfa(args.file)))
    save_model(m, args.out)
    print(f"RNN2 with {m.spec.n_h} hidden units -> {args.out}")


def cmd_fit_first_order(args):
    fit = first_order_fit(minimize(_read_dfa(args.file)), args.mode, args.samples, args.seed)
    if args.out:
        save_model(fit.model, args.out)
    print(json.dumps({"mode": fit.mode, "residual": fit.residual, "stderr": fit.stderr}))


def _write_run(rep, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(rep.to_dict(with_trace=True), indent=1) + "\n", encoding="utf-8")
    (out / "trace.csv").write_text(rep.trace_csv(), encoding="utf-8")
    if rep.model is not None:
        save_model(rep.model, out / "model.json")


def cmd_train(args):
    cfg = TrainConfig.from_file(args.config)
    out = args.out or cfg.out
    try:
        rep = train(cfg)
    except NumericalFailure as e:
        if out:
            _write_run(e.report, Path(out))
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    if out:
        _write_run(rep, Path(out))
    summary = {"epochs": rep.epochs_run, "best_epoch": rep.best_epoch, "n_h": rep.spec["n_h"],
               "params": rep.param_count, "metrics": rep.metrics, "norms": norm_trace_report(rep).to_dict()}
    print(json.dumps(summary, indent=1))


def cmd_eval(args):
    m = load_model(args.model)
    res = {}
    for path in args.data:
        ds = read_dataset(path)
        if m.alphabet is not None and tuple(ds.alphabet.symbols) != tuple(m.alphabet):
            raise ConfigError(f"{path}: alphabet {ds.alphabet.symbols} does not match the model's {m.alphabet}")
        res[Path(path).stem] = evaluate(m, ds).to_dict()
    print(json.dumps(res, indent=1))


def cmd_grid(args):
    gc = GridConfig.from_file(args.config)
    if args.workers:
        gc.workers = args.workers
    results = grid(gc, args.out)
    for row in grid_rows(results):
        print(f"{row['grammar']:>8} {row['kind']:>5} N_h={row['n_h']:<3} seed={row['seed']} "
              f"{row['split']}: f1={row['f1']:.4f} bcr={row['bcr']:.4f}")


def cmd_norms(args):
    data = json.loads(Path(args.report).read_text(encoding="utf-8"))
    from .harness import RunReport

    keep = {k: data[k] for k in RunReport.__dataclass_fields__ if k in data and k != "model"}
    rep = RunReport(**keep)
    print(json.dumps(norm_trace_report(rep).to_dict(), indent=1))
    if args.csv:
        Path(args.csv).write_text(rep.trace_csv(), encoding="utf-8")


# --- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regent", description="Regular grammar complexity and recurrent cell experiments.")
    ap.add_argument("--version", action="version", version=f"regent {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    dfa = sub.add_parser("dfa", help="build, minimize and query automata")
    dsub = dfa.add_subparsers(dest="dfa_command", required=True)
    p = dsub.add_parser("build")
    _add_family_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-minimize", action="store_true")
    p.add_argument("--dot", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dfa_build)
    p = dsub.add_parser("minimize")
    p.add_argument("file")
    p.add_argument("--dot", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dfa_minimize)
    p = dsub.add_parser("accepts")
    p.add_argument("file")
    p.add_argument("string", help="symbols; space separated for multi-character alphabets, ε for empty")
    p.add_argument("--status", action="store_true", help="exit 1 on rejection")
    p.set_defaults(func=cmd_dfa_accepts)

    p = sub.add_parser("entropy", help="count curve, entropy estimate and classes as JSON")
    p.add_argument("file")
    p.add_argument("--nmax", type=int, default=48)
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--generalized", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("classify", help="print the complexity class")
    p.add_argument("file")
    p.add_argument("--nmax", type=int, default=48)
    p.add_argument("--generalized", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("rings", help="ring plot data as CSV")
    p.add_argument("file")
    p.add_argument("--nmax", type=int, default=8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rings)

    p = sub.add_parser("gen", help="generate labelled datasets")
    _add_family_args(p)
    p.add_argument("--protocol", choices=["tomita", "slsp", "sparse", "split"], default="tomita")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-size", type=int, default=100_000)
    p.add_argument("--sparsity", type=float, default=1.0)
    p.add_argument("--lengths", default="1,2,3,4,5,6,7,8")
    p.add_argument("--cap", type=int, default=100)
    p.add_argument("--balance", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("construct", help="exact linear 2-RNN for a DFA")
    p.add_argument("file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("fit-first-order", help="first-order fit of a DFA and its residual")
    p.add_argument("file")
    p.add_argument("--mode", type=str.upper, choices=["SRN", "MIRNN"], default="SRN")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_first_order)

    p = sub.add_parser("train", help="train one cell from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, nargs="+")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="run a grid of trainings")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("norms", help="weight-norm dominance summary of a run report")
    p.add_argument("report")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_norms)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = args.func(args)
    except NumericalFailure as e:
        print(f"regent: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConfigError, DfaParseError, DatasetParseError, UnsupportedAlphabetError, ValueError, OSError) as e:
        print(f"regent: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if rc is None else rc


if __name__ == "__main__":
    sys.exit(main())
