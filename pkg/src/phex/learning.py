"""CRF-style training of local classifier scores under a label graph.

The loss for one instance is ``-sum_j log p(y_{t_j} = s_j | z)`` over its
observed targets; unlisted labels are hidden and marginalized out. The
gradient wrt ``z`` contrasts a clamped phase (target fixed to its state)
against the unclamped phase:

    dL/dz_i = -sum_j (E[y_i | y_{t_j} = s_j, z] - E[y_i | z])
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .exact import ClampSet, InfeasibleClampError
from .inference import marginals
from .lbp import LBPOptions

log = logging.getLogger(__name__)

DEFAULT_U_GRID = (0.0, 0.1, 0.3, 0.5, 0.7, 1.0, 1.5)


def _targets(targets) -> list[tuple[int, int]]:
    out = []
    seen = set()
    for t, s in targets:
        t, s = int(t), int(s)
        if s not in (1, -1):
            raise ValueError(f"target state must be +1 or -1, got {s}")
        if t in seen:
            raise ValueError(f"label {t} listed twice as a target")
        seen.add(t)
        out.append((t, s))
    if not out:
        raise ValueError("an instance needs at least one target")
    return out


@dataclass(frozen=True)
class TrainingInstance:
    x: np.ndarray
    targets: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "targets", tuple(_targets(self.targets)))

    def to_json(self, labels) -> str:
        return json.dumps(
            {
                "x": [float(v) for v in self.x],
                "targets": [{"label": labels[t], "state": s} for t, s in self.targets],
            }
        )

    @classmethod
    def from_json(cls, line: str, labels) -> "TrainingInstance":
        d = json.loads(line)
        ids = {name: i for i, name in enumerate(labels)}
        try:
            targets = [(ids[t["label"]], int(t["state"])) for t in d["targets"]]
        except KeyError as exc:
            raise ValueError(f"unknown label or missing field {exc}") from None
        return cls(np.array(d["x"], dtype=float), tuple(targets))


def load_instances(path, labels) -> list[TrainingInstance]:
    with open(path, encoding="utf-8") as f:
        return [TrainingInstance.from_json(line, labels) for line in f if line.strip()]


def save_instances(path, data: Sequence[TrainingInstance], labels) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in data:
            f.write(inst.to_json(labels) + "\n")


@dataclass
class LinearScorer:
    """Local classifier ``z = W x + bias``."""

    W: np.ndarray
    bias: np.ndarray
    labels: Optional[tuple] = None

    @classmethod
    def zeros(cls, n: int, d: int, labels=None) -> "LinearScorer":
        return cls(np.zeros((n, d)), np.zeros(n), labels)

    def __call__(self, x) -> np.ndarray:
        return self.W @ np.asarray(x, dtype=float) + self.bias

    def copy(self) -> "LinearScorer":
        return LinearScorer(self.W.copy(), self.bias.copy(), self.labels)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels) if self.labels is not None else None,
            "W": self.W.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearScorer":
        labels = tuple(d["labels"]) if d.get("labels") is not None else None
        W = np.array(d["W"], dtype=float)
        if W.ndim != 2:
            W = W.reshape(len(d["bias"]), -1)
        return cls(W, np.array(d["bias"], dtype=float), labels)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LinearScorer":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _log_prob(p1: float, state: int) -> float:
    p = p1 if state == 1 else 1.0 - p1
    return math.log(p) if p > 0 else -math.inf


def nll_loss(model, z, targets, inference: str = "exact", opts: Optional[LBPOptions] = None) -> float:
    """Negative log-likelihood of the observed target states.

    Returns ``inf`` when some target has zero probability (possible only
    with hard constraints).
    """
    targets = _targets(targets)
    table = marginals(model, z, None, inference, opts)
    return -sum(_log_prob(table.p[t], s) for t, s in targets)


def loss_and_grad(
    model, z, targets, inference: str = "exact", opts: Optional[LBPOptions] = None
) -> tuple[float, np.ndarray]:
    targets = _targets(targets)
    free = marginals(model, z, None, inference, opts)
    loss = -sum(_log_prob(free.p[t], s) for t, s in targets)
    if not math.isfinite(loss):
        return loss, np.full(len(free.p), np.nan)
    grad = np.zeros(len(free.p))
    e_free = free.expectations
    for t, s in targets:
        clamped = marginals(model, z, ClampSet({t: s}), inference, opts)
        grad -= clamped.expectations - e_free
    return loss, grad


def grad_scores(model, z, targets, inference: str = "exact", opts: Optional[LBPOptions] = None):
    """Analytic ``dL/dz`` from the clamped and unclamped phases."""
    loss, grad = loss_and_grad(model, z, targets, inference, opts)
    if not math.isfinite(loss):
        raise InfeasibleClampError("loss is infinite; a target has zero probability")
    return grad


@dataclass
class GradReport:
    analytic: np.ndarray
    numeric: np.ndarray
    max_rel_error: float

    def to_dict(self) -> dict:
        return {
            "analytic": [float(v) for v in self.analytic],
            "numeric": [float(v) for v in self.numeric],
            "max_rel_error": float(self.max_rel_error),
        }


def relative_error(a, b) -> float:
    """``max|a - b| / max(max|a|, max|b|)``, zero when both vanish."""
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - b)) / scale)


def finite_difference_check(
    model, z, targets, eps: float = 1e-5, inference: str = "exact", opts: Optional[LBPOptions] = None
) -> GradReport:
    if eps <= 0:
        raise ValueError("eps must be > 0")
    z = np.asarray(z, dtype=float)
    analytic = grad_scores(model, z, targets, inference, opts)
    numeric = np.zeros_like(z)
    for i in range(len(z)):
        zp, zm = z.copy(), z.copy()
        zp[i] += eps
        zm[i] -= eps
        numeric[i] = (
            nll_loss(model, zp, targets, inference, opts) - nll_loss(model, zm, targets, inference, opts)
        ) / (2 * eps)
    return GradReport(analytic, numeric, relative_error(analytic, numeric))


def train_linear(
    scorer: LinearScorer,
    data: Sequence[TrainingInstance],
    model,
    lr: float = 0.1,
    epochs: int = 50,
    batch_size: int = 16,
    inference: str = "exact",
    opts: Optional[LBPOptions] = None,
    seed: int = 0,
    history: Optional[list] = None,
) -> LinearScorer:
    """Mini-batch SGD on the mean per-instance loss; returns a new scorer."""
    scorer = scorer.copy()
    if not data:
        return scorer
    if data[0].x.shape != (scorer.W.shape[1],):
        raise ValueError(f"feature dimension {data[0].x.shape} does not match scorer {scorer.W.shape}")
    rng = np.random.default_rng(seed)
    for epoch in range(epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(data), batch_size):
            batch = [data[i] for i in order[start : start + batch_size]]
            gW = np.zeros_like(scorer.W)
            gb = np.zeros_like(scorer.bias)
            for inst in batch:
                loss, g = loss_and_grad(model, scorer(inst.x), inst.targets, inference, opts)
                if not math.isfinite(loss):
                    raise FloatingPointError(
                        f"training diverged: non-finite loss at epoch {epoch}, batch starting {start}"
                    )
                total += loss
                gW += np.outer(g, inst.x)
                gb += g
            with np.errstate(over="ignore", invalid="ignore"):  # checked just below
                scorer.W -= lr * gW / len(batch)
                scorer.bias -= lr * gb / len(batch)
            if not (np.all(np.isfinite(scorer.W)) and np.all(np.isfinite(scorer.bias))):
                raise FloatingPointError(f"training diverged: non-finite parameters at epoch {epoch}")
        mean = total / len(data)
        log.debug("epoch %d mean loss %.6f", epoch, mean)
        if history is not None:
            history.append(mean)
    return scorer


def true_class(inst: TrainingInstance, candidates) -> Optional[int]:
    cands = set(candidates)
    for t, s in inst.targets:
        if s == 1 and t in cands:
            return t
    return None


def accuracy(scorer, model, data, candidates, inference="exact", opts=None) -> float:
    """Top-1 multiclass accuracy over ``candidates`` (ties to lowest id)."""
    from .lbp import predict

    hits = total = 0
    for inst in data:
        truth = true_class(inst, candidates)
        if truth is None:
            continue
        table = marginals(model, scorer(inst.x), None, inference, opts)
        hits += predict(table, "multiclass", candidates) == truth
        total += 1
    return hits / total if total else 0.0


@dataclass
class SweepResult:
    best_u: float
    rows: list = field(default_factory=list)  # (u, validation accuracy, scorer)


def grid_search_strength(
    candidates: Sequence[float],
    train: Sequence[TrainingInstance],
    val: Sequence[TrainingInstance],
    graph,
    eval_labels,
    mode: str = "constant",
    train_kwargs: Optional[dict] = None,
    inference: str = "exact",
    opts: Optional[LBPOptions] = None,
    init: Optional[Callable[[], LinearScorer]] = None,
) -> SweepResult:
    """Train once per candidate coupling and keep the best on validation.

    ``mode="constant"`` sets every edge to ``u``; ``mode="scale"``
    multiplies the graph's per-edge prior couplings by ``u``. Ties go to
    the smaller ``u``.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("need at least one candidate")
    if mode not in ("constant", "scale"):
        raise ValueError(f"unknown mode {mode!r}")
    train_kwargs = dict(train_kwargs or {})
    d = train[0].x.shape[0]
    rows = []
    for u in candidates:
        g = graph.with_uniform(u) if mode == "constant" else graph.scaled(u)
        scorer = init() if init else LinearScorer.zeros(graph.n, d, graph.labels)
        fitted = train_linear(scorer, train, g, inference=inference, opts=opts, **train_kwargs)
        acc = accuracy(fitted, g, val, eval_labels, inference, opts)
        log.info("u=%g validation accuracy %.4f", u, acc)
        rows.append((u, acc, fitted))
    best = max(rows, key=lambda r: (r[1], -r[0]))
    return SweepResult(best[0], rows)
