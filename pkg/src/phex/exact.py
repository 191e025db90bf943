"""Brute-force exact inference by enumerating label configurations.

Used as ground truth for the message-passing engine and for learning on
small graphs. Soft models are enumerated over all ``2^n`` spin states (or
``k * 2^(n-k)`` with a MECE group, one-hot over the group). The hard
variant additionally discards states that violate any hard edge.
"""

from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .graph import EXCLUSION, LabelGraph, normalize_mece
from .ising import ConditionedModel, IsingModel, compile_graph, condition, energy

MAX_EXACT_LABELS = 24
_CHUNK_BITS = 16
_CACHE_ROWS = 1 << 16


class InfeasibleClampError(ValueError):
    """No configuration satisfies the clamps and hard constraints."""


@dataclass(frozen=True)
class ClampSet:
    """Label states fixed during inference.

    ``states`` maps label id to +1/-1; ``mece_state`` fixes the group's
    multinomial state by index into the member list.
    """

    states: Mapping[int, int] = field(default_factory=dict)
    mece_state: Optional[int] = None

    def __post_init__(self):
        states = {}
        for i, s in dict(self.states).items():
            if s not in (1, -1):
                raise ValueError(f"clamp state for label {i} must be +1 or -1, got {s!r}")
            states[int(i)] = int(s)
        object.__setattr__(self, "states", dict(sorted(states.items())))

    def with_clamp(self, label: int, state: int) -> "ClampSet":
        states = dict(self.states)
        if states.get(label, state) != state:
            raise InfeasibleClampError(f"label {label} clamped to both states")
        states[label] = state
        return replace(self, states=states)

    def key(self):
        return (tuple(self.states.items()), self.mece_state)


NO_CLAMPS = ClampSet()


def resolve_clamps(clamps: Optional[ClampSet], n: int, mece) -> tuple[dict, Optional[np.ndarray]]:
    """Split clamps into binary clamps on non-members and a MECE state mask.

    A member clamped to +1 selects its group state; a member clamped to -1
    removes that state.
    """
    clamps = clamps or NO_CLAMPS
    binary = {}
    for i, s in clamps.states.items():
        if not 0 <= i < n:
            raise ValueError(f"clamp on unknown label id {i}")
        binary[i] = s
    if mece is None:
        if clamps.mece_state is not None:
            raise ValueError("MECE clamp given but the model has no MECE group")
        return binary, None
    allowed = np.ones(mece.k, dtype=bool)
    if clamps.mece_state is not None:
        if not 0 <= clamps.mece_state < mece.k:
            raise ValueError(f"MECE clamp state {clamps.mece_state} out of range")
        allowed[:] = False
        allowed[clamps.mece_state] = True
    on = []
    for m_idx, m in enumerate(mece.members):
        s = binary.pop(m, None)
        if s == 1:
            on.append(m_idx)
        elif s == -1:
            allowed[m_idx] = False
    if len(on) > 1:
        raise InfeasibleClampError("two MECE members clamped to +1")
    if on:
        keep = allowed[on[0]]
        allowed[:] = False
        allowed[on[0]] = keep
    if not allowed.any():
        raise InfeasibleClampError("clamps exclude every MECE state")
    return binary, allowed


@dataclass
class MarginalTable:
    p: np.ndarray
    mece_dist: Optional[np.ndarray] = None
    method: str = "exact"
    iterations: int = 0
    converged: bool = True
    log_partition: Optional[float] = None

    @property
    def expectations(self) -> np.ndarray:
        return 2.0 * self.p - 1.0

    def to_dict(self, labels=None) -> dict:
        if labels is None:
            labels = [str(i) for i in range(len(self.p))]
        out = {
            "marginals": {name: float(v) for name, v in zip(labels, self.p)},
            "method": self.method,
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if self.mece_dist is not None:
            out["mece"] = [float(v) for v in self.mece_dist]
        return out


def _bits(count: int, width: int, start: int = 0) -> np.ndarray:
    codes = np.arange(start, start + count, dtype=np.int64)
    return 1.0 - 2.0 * ((codes[:, None] >> np.arange(width)) & 1)


def _state_chunks(n, mece, binary, allowed):
    """Yield float spin matrices covering every state consistent with clamps."""
    members = list(mece.members) if mece is not None else []
    in_group = set(members)
    free = [i for i in range(n) if i not in in_group and i not in binary]
    group_states = [None] if mece is None else [s for s in range(mece.k) if allowed[s]]
    total = 1 << len(free)
    step = 1 << min(_CHUNK_BITS, len(free))
    for s in group_states:
        for start in range(0, total, step):
            count = min(step, total - start)
            Y = np.empty((count, n))
            Y[:, free] = _bits(count, len(free), start)
            for i, v in binary.items():
                Y[:, i] = v
            if s is not None:
                Y[:, members] = -1.0
                Y[:, members[s]] = 1.0
            yield Y


_cache: "weakref.WeakKeyDictionary[IsingModel, dict]" = weakref.WeakKeyDictionary()


def _pair_energy(base: IsingModel, Y: np.ndarray) -> np.ndarray:
    if not base.couplings:
        return np.zeros(len(Y))
    idx = np.array(list(base.couplings.keys()))
    vals = np.array(list(base.couplings.values()))
    return (Y[:, idx[:, 0]] * Y[:, idx[:, 1]]) @ vals


def _enumerated(base: IsingModel, binary, allowed):
    """Spin matrices with their pairwise energies, cached for small spaces."""
    key = (tuple(sorted(binary.items())), None if allowed is None else tuple(allowed))
    per_model = _cache.setdefault(base, {})
    if key in per_model:
        return per_model[key]
    chunks = [(Y, _pair_energy(base, Y)) for Y in _state_chunks(base.n, base.mece, binary, allowed)]
    rows = sum(len(Y) for Y, _ in chunks)
    if rows <= _CACHE_ROWS:
        Y = np.concatenate([c[0] for c in chunks])
        E = np.concatenate([c[1] for c in chunks])
        chunks = [(Y, E)]
        if len(per_model) < 256:
            per_model[key] = chunks
    return chunks


def _accumulate(chunks, fields, mece, constraints=()):
    """Stable log-sum-exp accumulation of per-label marginals."""
    n = len(fields)
    k = mece.k if mece is not None else 0
    run_max = -np.inf
    Z = 0.0
    on = np.zeros(n)
    for Y, pairE in chunks:
        logw = -(pairE + Y @ fields)
        if constraints:
            legal = np.ones(len(Y), dtype=bool)
            for kind, a, b in constraints:
                if kind == EXCLUSION:
                    legal &= ~((Y[:, a] > 0) & (Y[:, b] > 0))
                else:
                    legal &= ~((Y[:, a] < 0) & (Y[:, b] > 0))
            Y, logw = Y[legal], logw[legal]
            if len(Y) == 0:
                continue
        m = logw.max()
        if m > run_max:
            scale = np.exp(run_max - m) if np.isfinite(run_max) else 0.0
            Z *= scale
            on *= scale
            run_max = m
        w = np.exp(logw - run_max)
        Z += w.sum()
        on += w @ (Y > 0)
    if Z == 0.0:
        raise InfeasibleClampError("infeasible clamp: no legal configuration")
    p = np.clip(on / Z, 0.0, 1.0)
    dist = None
    if k:
        dist = p[list(mece.members)].copy()
        dist /= dist.sum()
    return MarginalTable(
        p=p, mece_dist=dist, method="exact", log_partition=float(run_max + np.log(Z))
    )


def _check_size(n):
    if n > MAX_EXACT_LABELS:
        raise ValueError(f"exact enumeration limited to {MAX_EXACT_LABELS} labels, got {n}")


def exact_marginals(model: ConditionedModel, clamps: Optional[ClampSet] = None) -> MarginalTable:
    """Per-label ``p(y_i = 1 | z, clamps)`` by full enumeration."""
    _check_size(model.n)
    binary, allowed = resolve_clamps(clamps, model.n, model.mece)
    chunks = _enumerated(model.base, binary, allowed)
    return _accumulate(chunks, model.fields, model.mece)


def exact_conditional(
    model: ConditionedModel, clamps: Optional[ClampSet], target: int
) -> MarginalTable:
    clamps = (clamps or NO_CLAMPS).with_clamp(target, 1)
    return exact_marginals(model, clamps)


def exact_hex_marginals(
    graph: LabelGraph, z, clamps: Optional[ClampSet] = None, harden: bool = False
) -> MarginalTable:
    """Enumeration restricted to states legal under every hard edge.

    Soft edges (if any) still contribute their Ising energy. With
    ``harden=True`` every edge is treated as hard.
    """
    _check_size(graph.n)
    graph = normalize_mece(graph)
    hard = [e for e in graph.edges if e.hard or harden]
    soft = replace(graph, edges=tuple(e for e in graph.edges if not (e.hard or harden)))
    model = condition(compile_graph(soft), z)
    binary, allowed = resolve_clamps(clamps, model.n, model.mece)
    constraints = tuple((e.kind, e.a, e.b) for e in hard)
    chunks = _enumerated(model.base, binary, allowed)
    table = _accumulate(chunks, model.fields, model.mece, constraints)
    table.method = "hex"
    return table


def joint_table(model: ConditionedModel, clamps: Optional[ClampSet] = None):
    """Full normalized joint as ``(configs, probs)`` via direct iteration.

    Deliberately simple and slow; used as an independent reference for the
    vectorized accumulator.
    """
    _check_size(model.n)
    binary, allowed = resolve_clamps(clamps, model.n, model.mece)
    members = list(model.mece.members) if model.mece is not None else []
    configs, logw = [], []
    for y in itertools.product((1, -1), repeat=model.n):
        if any(y[i] != s for i, s in binary.items()):
            continue
        if members:
            on = [s for s, m in enumerate(members) if y[m] == 1]
            if len(on) != 1 or not allowed[on[0]]:
                continue
        configs.append(y)
        logw.append(-energy(model, y))
    logw = np.array(logw)
    w = np.exp(logw - logw.max())
    return np.array(configs), w / w.sum()
