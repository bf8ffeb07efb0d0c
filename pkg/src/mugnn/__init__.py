"""Graded modal mu-calculus model checking and compilation to recurrent GNNs."""

from .formula import (
    Formula,
    FormulaError,
    ParseError,
    SubformulaIndex,
    index,
    parse,
    to_text,
    well_name,
)
from .graph import (
    GraphError,
    LabeledGraph,
    disjoint_union,
    graph_from_json,
    graph_to_json,
    load_graph,
    make_graph,
    save_graph,
)
from .semantics import (
    adorn,
    evaluate,
    evaluate_adorned,
    is_jk_stable,
    is_k_stable,
    model_check_stable,
    uniform,
)
from .counting import (
    Configuration,
    ExtendedConfiguration,
    SafeguardExceeded,
    check_coherent,
    etrans_step,
    initial_configuration,
    partial_trans2,
    partial_trans3,
    run_counting,
    run_extended,
    ticks_reset_dep,
    trans1,
    trans2,
    trans3,
)
from .gnn import (
    RecurrentGnn,
    compile_formula,
    decode,
    encode,
    load_gnn,
    run_gnn,
    save_gnn,
)
from .bisim import brute_force_g_bisimilar, color_refinement, g_bisimilar

__all__ = [name for name in dir() if not name.startswith("_")]
