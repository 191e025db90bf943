"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .exact import ClampSet
from .experiments import (
    DEFAULT_TRAIN,
    HARD_LIMIT_U,
    RELABEL_TRAIN,
    ZEROSHOT_TRAIN,
    evaluate_scorer,
    relabel_spec,
    sweep_task,
    zeroshot_spec,
)
from .graph import LabelGraph, normalize_mece
from .inference import marginals
from .ising import compile_graph
from .lbp import LBPOptions
from .learning import DEFAULT_U_GRID, LinearScorer, finite_difference_check, load_instances, save_instances, train_linear
from .synth import SyntheticTaskSpec, Task, build_attribute_task, build_hierarchy_task

log = logging.getLogger("phex")

TASKS = {"hierarchy": build_hierarchy_task, "zeroshot": build_attribute_task}
PRESETS = {"hierarchy": (relabel_spec, RELABEL_TRAIN), "zeroshot": (zeroshot_spec, ZEROSHOT_TRAIN)}


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def read_scores(path, graph: LabelGraph) -> np.ndarray:
    """CSV with a header of label names and one row of scores per instance."""
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty scores file")
    header = [h.strip() for h in rows[0]]
    missing = set(graph.labels) - set(header)
    if missing:
        raise ValueError(f"{path}: no score column for labels {sorted(missing)}")
    cols = [header.index(name) for name in graph.labels]
    out = []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            out.append([float(row[c]) for c in cols])
        except (ValueError, IndexError):
            raise ValueError(f"{path}:{line}: malformed score row") from None
    return np.array(out).reshape(-1, graph.n)


def parse_assignments(items, graph: LabelGraph) -> dict:
    """``name=+1`` / ``name=-1`` pairs to a label-id -> state map."""
    out = {}
    for item in items or []:
        name, sep, state = item.rpartition("=")
        if not sep or state.strip() not in ("+1", "1", "-1"):
            raise ValueError(f"expected LABEL=+1 or LABEL=-1, got {item!r}")
        out[graph.index(name.strip())] = -1 if state.strip() == "-1" else 1
    return out


def _lbp_opts(args) -> LBPOptions:
    return LBPOptions(args.max_iters, args.tol, args.damping)


def _graph(args) -> LabelGraph:
    g = LabelGraph.load(args.graph)
    if getattr(args, "u", None) is not None:
        g = g.with_uniform(args.u)
    elif getattr(args, "scale", None) is not None:
        g = g.scaled(args.scale)
    return g


def cmd_compile(args):
    graph = normalize_mece(LabelGraph.load(args.graph))
    _write(compile_graph(graph).dumps(), args.out)


def cmd_infer(args):
    graph = _graph(args)
    Z = read_scores(args.scores, graph)
    clamps = ClampSet(parse_assignments(args.clamp, graph))
    opts = _lbp_opts(args)
    results = []
    for z in Z:
        table = marginals(graph, z, clamps, args.method, opts)
        results.append(table.to_dict(graph.labels))
    _write(_dump(results), args.out)


def cmd_gradcheck(args):
    graph = _graph(args)
    Z = read_scores(args.scores, graph)
    targets = list(parse_assignments(args.target, graph).items())
    if not targets:
        raise ValueError("gradcheck needs at least one --target")
    reports = []
    for z in Z:
        rep = finite_difference_check(graph, z, targets, args.eps, args.method, _lbp_opts(args))
        reports.append(rep.to_dict())
    _write(_dump(reports), args.out)


def _train_kwargs(args, base=None):
    kw = dict(DEFAULT_TRAIN)
    kw.update(base or {})
    for name in ("lr", "epochs", "batch_size"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    kw["seed"] = args.seed
    return kw


def cmd_train(args):
    graph = _graph(args)
    data = load_instances(args.data, graph.labels)
    if not data:
        raise ValueError(f"{args.data}: no training instances")
    scorer = LinearScorer.zeros(graph.n, data[0].x.shape[0], graph.labels)
    history = []
    kw = _train_kwargs(args)
    fitted = train_linear(scorer, data, graph, inference=args.method, opts=_lbp_opts(args), history=history, **kw)
    for epoch, loss in enumerate(history):
        log.info("epoch %d loss %.6f", epoch, loss)
    fitted.save(args.out)


def _task_from_dir(path) -> Task:
    path = Path(path)
    meta = json.loads((path / "task.json").read_text(encoding="utf-8"))
    graph = LabelGraph.load(path / "graph.json")
    split = {name: load_instances(path / f"{name}.jsonl", graph.labels) for name in ("train", "val", "test")}
    eval_labels = tuple(graph.index(n) for n in meta["eval_labels"])
    return Task(graph, split["train"], split["val"], split["test"], eval_labels, SyntheticTaskSpec.from_dict(meta["spec"]))


def cmd_synth(args):
    if args.preset:
        spec = PRESETS[args.task][0](args.seed)
    else:
        spec = SyntheticTaskSpec(seed=args.seed)
    overrides = {
        "relabel_fraction": args.relabel,
        "parent_noise": args.parent_noise,
        "n_classes": args.classes,
        "n_attributes": args.attributes,
    }
    spec = SyntheticTaskSpec.from_dict({**spec.to_dict(), **{k: v for k, v in overrides.items() if v is not None}})
    task = TASKS[args.task](spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    task.graph.save(out / "graph.json")
    for name in ("train", "val", "test"):
        save_instances(out / f"{name}.jsonl", getattr(task, name), task.graph.labels)
    meta = {
        "task": args.task,
        "spec": task.spec.to_dict(),
        "eval_labels": [task.graph.labels[i] for i in task.eval_labels],
    }
    (out / "task.json").write_text(_dump(meta), encoding="utf-8")


def cmd_eval(args):
    graph = _graph(args)
    scorer = LinearScorer.load(args.model)
    data = load_instances(args.data, graph.labels)
    if args.candidates:
        cands = [graph.index(n.strip()) for n in args.candidates.split(",")]
    elif graph.mece is not None:
        cands = list(graph.mece.members)
    else:
        cands = list(range(graph.n))
    meta = {"method": args.method, "u": args.u, "scale": args.scale}
    rep = evaluate_scorer(scorer, graph, data, cands, args.method, _lbp_opts(args), meta)
    _write(_dump(rep.to_dict(graph.labels)), args.out)


def cmd_sweep(args):
    if args.data_dir:
        task = _task_from_dir(args.data_dir)
        base = {}
    else:
        spec_fn, base = PRESETS[args.task]
        task = TASKS[args.task](spec_fn(args.seed))
    candidates = _floats(args.u_grid) if args.u_grid else list(DEFAULT_U_GRID)
    outcome = sweep_task(
        task,
        candidates,
        args.mode,
        _train_kwargs(args, base),
        args.method,
        _lbp_opts(args),
        include_hard=not args.no_hard,
    )
    _write(outcome.to_csv(), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phex", description="Probabilistic label-relation graphs as Ising models")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    def lbp_flags(sp):
        sp.add_argument("--method", choices=["exact", "lbp", "hex"], default="exact")
        sp.add_argument("--max-iters", type=int, default=200)
        sp.add_argument("--tol", type=float, default=1e-6)
        sp.add_argument("--damping", type=float, default=0.5)

    def strength_flags(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--u", type=float, help="set every edge to this coupling")
        g.add_argument("--scale", type=float, help="multiply per-edge couplings by this factor")

    def train_flags(sp):
        sp.add_argument("--lr", type=float)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--batch-size", type=int)
        sp.add_argument("--seed", type=int, default=0)

    sp = command("compile", help="dump the Ising coefficients of a graph")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_compile)

    sp = command("infer", help="marginals for each row of a scores CSV")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--scores", required=True)
    sp.add_argument("--clamp", action="append", metavar="LABEL=+1")
    sp.add_argument("--out")
    lbp_flags(sp)
    strength_flags(sp)
    sp.set_defaults(func=cmd_infer)

    sp = command("gradcheck", help="analytic vs finite-difference gradient of the loss")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--scores", required=True)
    sp.add_argument("--target", action="append", metavar="LABEL=+1")
    sp.add_argument("--eps", type=float, default=1e-5)
    sp.add_argument("--out")
    lbp_flags(sp)
    strength_flags(sp)
    sp.set_defaults(func=cmd_gradcheck)

    sp = command("train", help="fit a linear scorer under the graph")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    lbp_flags(sp)
    strength_flags(sp)
    train_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = command("synth", help="write a synthetic task directory")
    sp.add_argument("--task", choices=sorted(TASKS), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--no-preset", dest="preset", action="store_false")
    sp.add_argument("--relabel", type=float)
    sp.add_argument("--parent-noise", type=float)
    sp.add_argument("--classes", type=int)
    sp.add_argument("--attributes", type=int)
    sp.set_defaults(func=cmd_synth)

    sp = command("eval", help="top-1/top-5/per-class accuracy of a scorer")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--candidates", help="comma-separated label names to rank")
    sp.add_argument("--out")
    lbp_flags(sp)
    strength_flags(sp)
    sp.set_defaults(func=cmd_eval)

    sp = command("sweep", help="accuracy vs coupling table (CSV)")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--data-dir")
    src.add_argument("--task", choices=sorted(TASKS))
    sp.add_argument("--u", dest="u_grid", help=f"comma-separated grid (default {','.join(map(str, DEFAULT_U_GRID))})")
    sp.add_argument("--mode", choices=["constant", "scale"], default="constant")
    sp.add_argument("--no-hard", action="store_true", help=f"skip the u={HARD_LIMIT_U:g} hard-limit row")
    sp.add_argument("--out")
    lbp_flags(sp)
    train_flags(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        args.func(args)
    except FloatingPointError as exc:
        print(f"phex: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"phex: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
