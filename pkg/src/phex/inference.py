"""Single entry point over the exact, hard-constraint and LBP back ends."""

from __future__ import annotations

import weakref
from typing import Optional, Union

from .exact import ClampSet, MarginalTable, exact_hex_marginals, exact_marginals
from .graph import LabelGraph, normalize_mece
from .ising import IsingModel, compile_graph, condition
from .lbp import LBPOptions, run_lbp

METHODS = ("exact", "lbp", "hex")


_compiled: "weakref.WeakKeyDictionary[LabelGraph, IsingModel]" = weakref.WeakKeyDictionary()


def as_model(model: Union[IsingModel, LabelGraph]) -> IsingModel:
    """Compile (and memoize) a graph; Ising models pass through."""
    if isinstance(model, LabelGraph):
        if model not in _compiled:
            _compiled[model] = compile_graph(normalize_mece(model))
        return _compiled[model]
    return model


def marginals(
    model: Union[IsingModel, LabelGraph],
    z,
    clamps: Optional[ClampSet] = None,
    method: str = "exact",
    opts: Optional[LBPOptions] = None,
) -> MarginalTable:
    """Marginals ``p(y_i = 1 | z, clamps)``.

    ``hex`` needs a :class:`LabelGraph` and treats its hard edges as
    constraints; graphs with hard edges are routed there automatically.
    """
    if method not in METHODS:
        raise ValueError(f"unknown inference method {method!r}")
    if isinstance(model, LabelGraph) and (method == "hex" or model.has_hard_edges):
        if method == "lbp":
            raise ValueError("hard edges are not supported by LBP; use a finite coupling")
        return exact_hex_marginals(model, z, clamps)
    if method == "hex":
        raise ValueError("hex inference needs a LabelGraph")
    cond = condition(as_model(model), z)
    if method == "exact":
        return exact_marginals(cond, clamps)
    return run_lbp(cond, clamps, opts)
