"""Loopy belief propagation on conditioned Ising models.

Binary labels are spin nodes with states ordered ``(+1, -1)``. When the
model carries a MECE group, its members collapse into one multinomial node
with ``k`` states (state ``s`` means member ``s`` is on and the rest off).
All messages and beliefs live in the log domain and are kept normalized.

Schedule: asynchronous sweeps in ascending label order (the multinomial
node sits at its smallest member id). At each node the belief is
recomputed from incoming messages, then every outgoing message is
recomputed from the cavity ``b_i / m_{j->i}`` and damped in log space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exact import ClampSet, MarginalTable, resolve_clamps
from .ising import ConditionedModel

log = logging.getLogger(__name__)

LOG_FLOOR = -700.0
SPINS = np.array([1.0, -1.0])


class NumericalFailure(FloatingPointError):
    pass


@dataclass(frozen=True)
class LBPOptions:
    max_iterations: int = 200
    tol: float = 1e-6
    damping: float = 0.5

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


NEG_INF = float("-inf")


def _lse(xs):
    m = max(xs)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(sum(math.exp(x - m) for x in xs))


def _normalize(xs):
    z = _lse(xs)
    return [x - z for x in xs]


class Problem:
    """Message-passing view of a conditioned model under clamps."""

    def __init__(self, model: ConditionedModel, clamps: Optional[ClampSet] = None):
        n = model.n
        h = model.fields
        mece = model.mece
        binary, allowed = resolve_clamps(clamps, n, mece)
        self.n = n
        self.mece = mece
        members = list(mece.members) if mece is not None else []
        member_set = set(members)

        # node ids: one per non-member label, then the multinomial node
        self.node_of = {}
        self.order_key = []
        self.unary = []
        for i in range(n):
            if i in member_set:
                continue
            self.node_of[i] = len(self.unary)
            u = [-float(h[i]), float(h[i])]
            if i in binary:
                u[1 if binary[i] == 1 else 0] = NEG_INF
            self.unary.append(u)
            self.order_key.append(i)
        self.c = None
        if mece is not None:
            self.c = len(self.unary)
            u = [-2.0 * float(h[m]) for m in members]
            for s in range(len(members)):
                if not allowed[s]:
                    u[s] = NEG_INF
            self.unary.append(u)
            self.order_key.append(min(members))
            for m in members:
                self.node_of[m] = self.c

        nodes = len(self.unary)
        self.nbrs = [[] for _ in range(nodes)]
        self.psi = {}
        group_J = {}
        for (i, j), J in model.base.couplings.items():
            if J == 0.0:
                continue
            vi, vj = self.node_of[i], self.node_of[j]
            if vi == vj:
                raise ValueError("coupling inside the MECE group; normalize the graph first")
            if vi == self.c or vj == self.c:
                other, member = (j, i) if vi == self.c else (i, j)
                vec = group_J.setdefault(self.node_of[other], np.zeros(len(members)))
                vec[members.index(member)] += J
                continue
            self._link(vi, vj, -J * np.outer(SPINS, SPINS))
        for vb, Jvec in sorted(group_J.items()):
            # rows: multinomial state s, cols: spin of the binary neighbour
            self._link(self.c, vb, np.outer(Jvec.sum() - 2.0 * Jvec, SPINS))
        self.order = sorted(range(nodes), key=lambda v: self.order_key[v])

    def _link(self, a, b, P):
        self.nbrs[a].append(b)
        self.nbrs[b].append(a)
        # psi[(src, dst)][t] lists the log-potential over source states for target state t
        self.psi[(a, b)] = [list(map(float, col)) for col in P.T]
        self.psi[(b, a)] = [list(map(float, row)) for row in P]

    @property
    def nodes(self) -> int:
        return len(self.unary)


@dataclass
class BeliefState:
    """Normalized log-beliefs per node and log-messages per directed edge."""

    beliefs: list
    messages: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, problem: Problem) -> "BeliefState":
        msgs = {}
        for a, b in problem.psi:
            k = len(problem.unary[b])
            msgs[(a, b)] = [-math.log(k)] * k
        state = cls([None] * problem.nodes, msgs)
        for v in range(problem.nodes):
            state.beliefs[v] = _belief(problem, state, v)
        return state


def _belief(problem, state, v):
    b = list(problem.unary[v])
    msgs = state.messages
    for u in problem.nbrs[v]:
        m = msgs[(u, v)]
        b = [x + y for x, y in zip(b, m)]
    return _normalize(b)


def _send(problem, state, v, w, belief, damping):
    back = state.messages[(w, v)]
    cavity = [max(b - m, LOG_FLOOR) for b, m in zip(belief, back)]
    new = _normalize([_lse([p + c for p, c in zip(col, cavity)]) for col in problem.psi[(v, w)]])
    if damping:
        old = state.messages[(v, w)]
        new = _normalize([damping * a + (1.0 - damping) * b for a, b in zip(old, new)])
    state.messages[(v, w)] = new


def update_node(problem: Problem, state: BeliefState, v: int, damping: float) -> None:
    belief = _belief(problem, state, v)
    state.beliefs[v] = belief
    for w in problem.nbrs[v]:
        _send(problem, state, v, w, belief, damping)


def run_lbp_multinomial_updates(
    state: BeliefState, problem: Problem, damping: float = 0.0
) -> BeliefState:
    """Refresh the multinomial node: messages into it, its belief, messages out."""
    c = problem.c
    if c is None:
        raise ValueError("model has no MECE group")
    for j in problem.nbrs[c]:
        _send(problem, state, j, c, _belief(problem, state, j), damping)
    update_node(problem, state, c, damping)
    return state


def _check_finite(state, it):
    for key, m in state.messages.items():
        if any(math.isnan(x) or x == math.inf for x in m):
            raise NumericalFailure(f"numerical failure in message {key} at iteration {it}")


def run_lbp(
    model: ConditionedModel,
    clamps: Optional[ClampSet] = None,
    opts: Optional[LBPOptions] = None,
) -> MarginalTable:
    opts = opts or LBPOptions()
    problem = Problem(model, clamps)
    state = BeliefState.initial(problem)
    prev = [[max(x, LOG_FLOOR) for x in b] for b in state.beliefs]
    converged = False
    it = 0
    for it in range(1, opts.max_iterations + 1):
        for v in problem.order:
            update_node(problem, state, v, opts.damping)
        _check_finite(state, it)
        cur = [[max(x, LOG_FLOOR) for x in _belief(problem, state, v)] for v in range(problem.nodes)]
        delta = 0.0
        for a, b in zip(cur, prev):
            for x, y in zip(a, b):
                delta = max(delta, abs(x - y))
        prev = cur
        if not math.isfinite(delta):
            raise NumericalFailure(f"numerical failure in beliefs at iteration {it}")
        if delta < opts.tol:
            converged = True
            break
    if not converged:
        log.debug("LBP stopped after %d sweeps without converging", it)
    return _table(problem, [_belief(problem, state, v) for v in range(problem.nodes)], it, converged)


def _table(problem, beliefs, it, converged):
    p = np.empty(problem.n)
    dist = None
    for i, v in problem.node_of.items():
        if v != problem.c:
            p[i] = math.exp(beliefs[v][0])
    if problem.c is not None:
        dist = np.exp(np.array(beliefs[problem.c]))
        dist = dist / dist.sum()
        for s, m in enumerate(problem.mece.members):
            p[m] = dist[s]
    return MarginalTable(
        p=np.clip(p, 0.0, 1.0), mece_dist=dist, method="lbp", iterations=it, converged=converged
    )


def predict(marginals: MarginalTable, mode: str = "multilabel", candidates=None, mece=None):
    """Turn marginals into labels.

    ``multilabel`` returns ids with ``p >= 0.5``. ``multiclass`` returns the
    argmax over ``candidates`` (default: the MECE members when given, else
    all labels); ties go to the lowest label id.
    """
    p = np.asarray(marginals.p)
    if mode == "multilabel":
        return [i for i in range(len(p)) if p[i] >= 0.5]
    if mode != "multiclass":
        raise ValueError(f"unknown prediction mode {mode!r}")
    if candidates is None:
        candidates = list(mece.members) if mece is not None else range(len(p))
    candidates = sorted(candidates)
    best = candidates[0]
    for i in candidates[1:]:
        if p[i] > p[best]:
            best = i
    return best
