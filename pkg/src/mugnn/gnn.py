"""Compilation of sentences to exact-integer halting recurrent GNNs.

Each node carries its local slice of an extended configuration as a feature
vector.  The single aggregate-combine layer receives the node's own vector x
and the coordinatewise sum y of its out-neighbors' vectors, and computes the
next local state: stage "3,1" applies the restart-at-k+1 and recompute
transitions, stage "2" ticks/resets fixpoint counters, stage "r" performs one
counter decrement for variables in the residual set.  The always-1 pad
coordinate makes y's pad entry the node's out-degree, which the graded box
clause needs.  A final halt coordinate goes positive exactly when the
embedded configuration is complete, stable at this node, and has an empty
residual set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .counting import (
    Configuration,
    ExtendedConfiguration,
    SafeguardExceeded,
    safeguard,
)
from .formula import (
    AllBut,
    And,
    AtLeast,
    Formula,
    FormulaError,
    Mu,
    NegProp,
    Nu,
    Or,
    Prop,
    SubformulaIndex,
    Var,
    index,
    parse,
    to_text,
    well_name,
)
from .graph import LabeledGraph
from .rfnn import CircuitBuilder, Rfnn, rfnn_eval

MAX_WEIGHT = 2**40


class GnnError(ValueError):
    pass


class DecodeError(GnnError):
    pass


# ---------------------------------------------------------------------------
# Feature layout


@dataclass(frozen=True)
class FeatureLayout:
    """Deterministic coordinate assignment for local extended configurations."""

    props: tuple[str, ...]
    n_rsub: int
    n_fp: int
    prop_coord: tuple[int, ...]   # aligned with props
    k_coord: int
    c_coord: tuple[int, ...]      # per fixpoint
    v_coord: tuple[int, ...]      # per variable
    r_coord: tuple[int, ...]      # per subformula
    f_coord: tuple[int, ...]
    s_coord: tuple[int, ...]
    t_coord: tuple[int, ...]      # per fixpoint
    d_coord: tuple[int, ...]      # per variable
    pad_coord: int
    halt_coord: int
    dim: int


def make_layout(idx: SubformulaIndex, props) -> FeatureLayout:
    props = tuple(sorted(props))
    c = 0

    def take(n):
        nonlocal c
        out = tuple(range(c, c + n))
        c += n
        return out

    prop_coord = take(len(props))
    (k_coord,) = take(1)
    c_coord = take(idx.n_fp)
    v_coord = take(idx.n_fp)
    r_coord = take(idx.n)
    f_coord = take(idx.n)
    s_coord = take(idx.n)
    t_coord = take(idx.n_fp)
    d_coord = take(idx.n_fp)
    (pad_coord,) = take(1)
    (halt_coord,) = take(1)
    return FeatureLayout(
        props=props,
        n_rsub=idx.n,
        n_fp=idx.n_fp,
        prop_coord=prop_coord,
        k_coord=k_coord,
        c_coord=c_coord,
        v_coord=v_coord,
        r_coord=r_coord,
        f_coord=f_coord,
        s_coord=s_coord,
        t_coord=t_coord,
        d_coord=d_coord,
        pad_coord=pad_coord,
        halt_coord=halt_coord,
        dim=c,
    )


def layout_to_json(lay: FeatureLayout) -> dict:
    return {
        "props": list(lay.props),
        "n_rsub": lay.n_rsub,
        "n_fp": lay.n_fp,
        "prop": list(lay.prop_coord),
        "k": lay.k_coord,
        "c": list(lay.c_coord),
        "v": list(lay.v_coord),
        "r": list(lay.r_coord),
        "f": list(lay.f_coord),
        "s": list(lay.s_coord),
        "t": list(lay.t_coord),
        "d": list(lay.d_coord),
        "pad": lay.pad_coord,
        "halt": lay.halt_coord,
        "dim": lay.dim,
    }


def layout_from_json(data: dict) -> FeatureLayout:
    return FeatureLayout(
        props=tuple(data["props"]),
        n_rsub=data["n_rsub"],
        n_fp=data["n_fp"],
        prop_coord=tuple(data["prop"]),
        k_coord=data["k"],
        c_coord=tuple(data["c"]),
        v_coord=tuple(data["v"]),
        r_coord=tuple(data["r"]),
        f_coord=tuple(data["f"]),
        s_coord=tuple(data["s"]),
        t_coord=tuple(data["t"]),
        d_coord=tuple(data["d"]),
        pad_coord=data["pad"],
        halt_coord=data["halt"],
        dim=data["dim"],
    )


# ---------------------------------------------------------------------------
# Encoding extended configurations as per-node vectors


def encode(x: ExtendedConfiguration, layout: FeatureLayout) -> tuple:
    cfg = x.config
    idx, G = cfg.idx, cfg.G
    d_mask = 1 if not x.D else 0
    vectors = []
    for n in range(G.n):
        v = [0] * layout.dim
        for pi, p in enumerate(layout.props):
            v[layout.prop_coord[pi]] = 1 if p in G.labels[n] else 0
        v[layout.k_coord] = cfg.k
        for fi in range(idx.n_fp):
            v[layout.c_coord[fi]] = cfg.C[fi]
            v[layout.v_coord[fi]] = cfg.V[fi] >> n & 1
            v[layout.t_coord[fi]] = cfg.T[fi] >> n & 1
            v[layout.d_coord[fi]] = 1 if fi in x.D else 0
        for p in range(idx.n):
            v[layout.r_coord[p]] = cfg.R[p] >> n & 1
            v[layout.f_coord[p]] = cfg.F >> p & 1
            v[layout.s_coord[p]] = cfg.S[p] >> n & 1
        v[layout.pad_coord] = 1
        v[layout.halt_coord] = (
            (cfg.F >> idx.root & 1) & (cfg.S[idx.root] >> n & 1) & d_mask
        )
        vectors.append(tuple(v))
    return tuple(vectors)


def decode(
    vectors, layout: FeatureLayout, idx: SubformulaIndex, G: LabeledGraph
) -> ExtendedConfiguration:
    vectors = [list(v) for v in vectors]
    if len(vectors) != G.n:
        raise DecodeError("node count mismatch")

    def require_bool(val, what, n):
        if val not in (0, 1):
            raise DecodeError(f"{what} at node {n} is {val}, not a bit")
        return int(val)

    def require_global(coord, what):
        vals = {int(v[coord]) for v in vectors}
        if len(vals) > 1:
            raise DecodeError(f"{what} disagrees across nodes: {sorted(vals)}")
        return vals.pop()

    if G.n == 0:
        raise DecodeError("cannot decode an empty graph")
    k = require_global(layout.k_coord, "bound k")
    if k < 1:
        raise DecodeError(f"bound k={k} < 1")
    C = tuple(require_global(layout.c_coord[fi], f"counter {fi}") for fi in range(idx.n_fp))
    F = 0
    for p in range(idx.n):
        if require_bool(require_global(layout.f_coord[p], f"F bit {p}"), "F", 0):
            F |= 1 << p
    D = frozenset(
        fi
        for fi in range(idx.n_fp)
        if require_bool(require_global(layout.d_coord[fi], f"D bit {fi}"), "D", 0)
    )
    V = [0] * idx.n_fp
    T = [0] * idx.n_fp
    R = [0] * idx.n
    S = [0] * idx.n
    for n, vec in enumerate(vectors):
        if vec[layout.pad_coord] != 1:
            raise DecodeError(f"pad coordinate at node {n} is {vec[layout.pad_coord]}")
        for fi in range(idx.n_fp):
            if require_bool(vec[layout.v_coord[fi]], "v", n):
                V[fi] |= 1 << n
            if require_bool(vec[layout.t_coord[fi]], "t", n):
                T[fi] |= 1 << n
        for p in range(idx.n):
            if require_bool(vec[layout.r_coord[p]], "r", n):
                R[p] |= 1 << n
            if require_bool(vec[layout.s_coord[p]], "s", n):
                S[p] |= 1 << n
    cfg = Configuration(
        idx=idx, G=G, k=k, C=C, V=tuple(V), R=tuple(R), F=F, S=tuple(S), T=tuple(T)
    )
    return ExtendedConfiguration(cfg, D)


# ---------------------------------------------------------------------------
# The compiled model


@dataclass(frozen=True)
class RecurrentGnn:
    formula_text: str
    idx: SubformulaIndex
    layout: FeatureLayout
    comb: Rfnn
    hlt_index: int
    out_index: int

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def props(self) -> tuple[str, ...]:
        return self.layout.props

    def init_vector(self, labels) -> tuple:
        lay, idx = self.layout, self.idx
        v = [0] * lay.dim
        for pi, p in enumerate(lay.props):
            v[lay.prop_coord[pi]] = 1 if p in labels else 0
        v[lay.k_coord] = 1
        for fi in range(idx.n_fp):
            v[lay.v_coord[fi]] = 0 if idx.is_mu[idx.fp_positions[fi]] else 1
            v[lay.t_coord[fi]] = 1
        v[lay.pad_coord] = 1
        return tuple(v)


def compile_formula(phi: Formula | str, props=None) -> RecurrentGnn:
    if isinstance(phi, str):
        phi = parse(phi)
    phi = well_name(phi)
    idx = index(phi)
    if not idx.is_sentence:
        raise FormulaError("only sentences can be compiled")
    formula_props = {f.name for f in idx.formulas if isinstance(f, (Prop, NegProp))}
    if props is None:
        props = formula_props
    elif not formula_props <= set(props):
        raise GnnError("proposition universe must cover the formula's propositions")
    lay = make_layout(idx, props)

    b = CircuitBuilder(2 * lay.dim)
    x = [b.inp(i) for i in range(lay.dim)]
    y = [b.inp(lay.dim + i) for i in range(lay.dim)]

    n_fp = idx.n_fp
    root = idx.root
    fps = idx.fp_positions

    # ---- gates for the composite step
    d_any0 = b.bor(*(x[lay.d_coord[fi]] for fi in range(n_fp)))
    d_empty0 = 1 - d_any0
    complete0 = x[lay.f_coord[root]]
    g3 = b.band(d_empty0, complete0)     # restart at k+1 (partial type-3)
    g1 = d_empty0 - g3                   # recompute (type-1); exclusive with g3

    k_old = x[lay.k_coord]
    k1 = k_old + g3

    # ---- stage 3,1: type-3 re-initialization folded with the type-1 update.
    # Every boolean field z gets  z' = relu(z - g1 - g3) + relu(new + g1 - 1)
    # [+ init*g3]: keep when no gate fires, type-1 value under g1, fresh
    # initial value under g3.

    def gated(old, new, init_const=0):
        out = b.relu(old - g1 - g3) + b.relu(new + g1 - 1)
        if init_const:
            out = out + init_const * g3
        return out

    R1val: dict[int, object] = {}
    for p, f in enumerate(idx.formulas):
        if isinstance(f, Prop):
            val = x[lay.prop_coord[lay.props.index(f.name)]]
        elif isinstance(f, NegProp):
            val = 1 - x[lay.prop_coord[lay.props.index(f.name)]]
        elif isinstance(f, Var):
            val = x[lay.v_coord[idx.var_index[f.name]]]
        elif isinstance(f, And):
            val = b.band(x[lay.r_coord[idx.pos[f.lhs]]], x[lay.r_coord[idx.pos[f.rhs]]])
        elif isinstance(f, Or):
            val = b.bor(x[lay.r_coord[idx.pos[f.lhs]]], x[lay.r_coord[idx.pos[f.rhs]]])
        elif isinstance(f, AtLeast):
            # y's r(body) entry sums neighbor bits: |G[n] ∩ R(body)|
            val = b.geq_const(y[lay.r_coord[idx.pos[f.body]]], f.grade)
        elif isinstance(f, AllBut):
            # |G[n] \ R(body)| = degree - count < grade
            cnt = y[lay.r_coord[idx.pos[f.body]]]
            deg = y[lay.pad_coord]
            val = b.clip(cnt - deg + f.grade)
        elif isinstance(f, (Mu, Nu)):
            val = x[lay.r_coord[idx.pos[f.body]]]
        else:
            raise TypeError(f"not a formula: {f!r}")
        R1val[p] = val

    F1val: dict[int, object] = {}
    for p in range(idx.n):
        subs = [x[lay.f_coord[c]] for c in idx.sub[p]]
        val = b.band(*subs)
        if idx.is_fp[p]:
            fi = idx.fp_index[p]
            at_max = b.clip(x[lay.c_coord[fi]] - k_old + 2)  # C = k-1
            val = b.band(val, at_max)
        F1val[p] = val

    S1val: dict[int, object] = {}
    for p in range(idx.n):
        if idx.is_fp[p]:
            fi = idx.fp_index[p]
            bp = idx.body_pos[fi]
            agree = b.eqb(x[lay.v_coord[fi]], R1val[bp])
            S1val[p] = b.band(x[lay.s_coord[bp]], x[lay.t_coord[fi]], agree)
        else:
            S1val[p] = b.band(*(x[lay.s_coord[c]] for c in idx.sub[p]))

    r1 = {p: gated(x[lay.r_coord[p]], R1val[p]) for p in range(idx.n)}
    F1 = {p: gated(x[lay.f_coord[p]], F1val[p]) for p in range(idx.n)}
    s1 = {p: gated(x[lay.s_coord[p]], S1val[p]) for p in range(idx.n)}
    t1 = {fi: b.clip(x[lay.t_coord[fi]] + g3) for fi in range(n_fp)}
    v1 = {}
    for fi in range(n_fp):
        old = x[lay.v_coord[fi]]
        if idx.is_mu[fps[fi]]:
            v1[fi] = b.relu(old - g3)
        else:
            v1[fi] = b.clip(old + g3)
    D1 = {fi: b.clip(x[lay.d_coord[fi]] + g3) for fi in range(n_fp)}
    C1 = {fi: x[lay.c_coord[fi]] for fi in range(n_fp)}  # untouched so far

    # ---- stage 2: tick / reset, gated on the residual set still being empty
    g2 = 1 - b.bor(*(D1[fi] for fi in range(n_fp)))

    tick = {}
    for fi in range(n_fp):
        p = fps[fi]
        parts = [F1[c] for c in idx.sub[p]]
        parts.append(b.clip(k1 - C1[fi] - 1))                   # C < k-1
        for bj in idx.tfp[p]:
            parts.append(b.clip(C1[bj] - k1 + 2))               # C(beta) = k-1
        tick[fi] = b.band(*parts)

    # layered closure of the reset set
    delta = {fi: b.bor(*(tick[idx.var_index[z]] for z in idx.free[fps[fi]])) for fi in range(n_fp)}
    for _ in range(idx.q):
        delta = {
            fi: b.bor(
                delta[fi],
                *(delta[idx.var_index[z]] for z in idx.free[fps[fi]]),
            )
            for fi in range(n_fp)
        }
    reset = {fi: b.bor(tick[fi], delta[fi]) for fi in range(n_fp)}
    dep = {fi: b.relu(delta[fi] - tick[fi]) for fi in range(n_fp)}

    ga = {fi: b.band(g2, tick[fi]) for fi in range(n_fp)}
    gb = {fi: b.band(g2, dep[fi]) for fi in range(n_fp)}

    C2 = {fi: C1[fi] + ga[fi] for fi in range(n_fp)}  # dep counters retained
    v2 = {}
    t2 = {}
    for fi in range(n_fp):
        bp = idx.body_pos[fi]
        keep = b.relu(v1[fi] - ga[fi] - gb[fi])
        ticked = b.relu(r1[bp] + ga[fi] - 1)
        v2[fi] = keep + ticked
        if not idx.is_mu[fps[fi]]:
            v2[fi] = v2[fi] + gb[fi]
        tkeep = b.relu(t1[fi] - ga[fi] - gb[fi])
        tticked = b.relu(b.band(t1[fi], s1[bp]) + ga[fi] - 1)
        t2[fi] = tkeep + tticked + gb[fi]
    F2 = {}
    for p in range(idx.n):
        frees = [reset[idx.var_index[z]] for z in idx.free[p]]
        if frees:
            F2[p] = b.relu(F1[p] - b.band(g2, b.bor(*frees)))
        else:
            F2[p] = F1[p]
    D2 = {fi: b.relu(D1[fi] - g2) + b.relu(dep[fi] + g2 - 1) for fi in range(n_fp)}

    # ---- stage r: one decrement of residual counters
    dec = {fi: b.band(D2[fi], b.clip(C2[fi])) for fi in range(n_fp)}
    C3 = {fi: C2[fi] - dec[fi] for fi in range(n_fp)}
    D3 = {fi: b.band(D2[fi], b.clip(C2[fi] - 1)) for fi in range(n_fp)}

    halt = b.band(F2[root], s1[root], 1 - b.bor(*(D3[fi] for fi in range(n_fp))))

    outputs = [None] * lay.dim
    for pi in range(len(lay.props)):
        outputs[lay.prop_coord[pi]] = x[lay.prop_coord[pi]]
    outputs[lay.k_coord] = k1
    for fi in range(n_fp):
        outputs[lay.c_coord[fi]] = C3[fi]
        outputs[lay.v_coord[fi]] = v2[fi]
        outputs[lay.t_coord[fi]] = t2[fi]
        outputs[lay.d_coord[fi]] = D3[fi]
    for p in range(idx.n):
        outputs[lay.r_coord[p]] = r1[p]
        outputs[lay.f_coord[p]] = F2[p]
        outputs[lay.s_coord[p]] = s1[p]
    outputs[lay.pad_coord] = b.const(1)
    outputs[lay.halt_coord] = halt

    comb = b.build(outputs)
    for W, bias in comb.layers:
        for row in W:
            for w in row:
                if abs(w) > MAX_WEIGHT:
                    raise GnnError("weight magnitude bound exceeded")
        for w in bias:
            if abs(w) > MAX_WEIGHT:
                raise GnnError("weight magnitude bound exceeded")

    return RecurrentGnn(
        formula_text=to_text(phi),
        idx=idx,
        layout=lay,
        comb=comb,
        hlt_index=lay.halt_coord,
        out_index=lay.r_coord[root],
    )


# ---------------------------------------------------------------------------
# Execution


def _np_layers(gnn: RecurrentGnn):
    return [
        (np.array(W, dtype=np.int64).reshape(len(W), -1), np.array(bias, dtype=np.int64))
        for W, bias in gnn.comb.layers
    ]


def apply_layer(gnn: RecurrentGnn, G: LabeledGraph, vectors, _np_cache=None):
    """One synchronous round: every node combines (own, neighbor-sum)."""
    H = np.array(vectors, dtype=np.int64)
    A = np.zeros((G.n, G.n), dtype=np.int64)
    for a in range(G.n):
        for bnode in G.adj[a]:
            A[a, bnode] += 1
    layers = _np_cache if _np_cache is not None else _np_layers(gnn)
    Y = A @ H
    Z = np.concatenate([H, Y], axis=1)
    last = len(layers) - 1
    for li, (W, bias) in enumerate(layers):
        Z = Z @ W.T + bias
        if li != last:
            np.maximum(Z, 0, out=Z)
    if np.abs(Z).max(initial=0) >= MAX_WEIGHT:
        raise GnnError("activation magnitude bound exceeded")
    return tuple(tuple(int(v) for v in row) for row in Z)


def run_gnn(
    gnn: RecurrentGnn,
    G: LabeledGraph,
    max_steps: int | None = None,
    want_trace: bool = False,
):
    """Run to the first round where every node's halt coordinate is positive."""
    if tuple(G.props) != gnn.props:
        raise GnnError(
            f"graph universe {list(G.props)} does not match model universe {list(gnn.props)}"
        )
    limit = max_steps if max_steps is not None else safeguard(gnn.idx, G) + 1
    layers = _np_layers(gnn)
    vectors = tuple(gnn.init_vector(G.labels[n]) for n in range(G.n))
    trace = [vectors] if want_trace else None
    iters = 0
    hc = gnn.hlt_index
    while not all(v[hc] > 0 for v in vectors):
        if iters >= limit:
            raise SafeguardExceeded(f"GNN run exceeded {limit} iterations")
        vectors = apply_layer(gnn, G, vectors, _np_cache=layers)
        if want_trace:
            trace.append(vectors)
        iters += 1
    out = [bool(v[gnn.out_index] > 0) for v in vectors]
    return out, iters, trace


def eval_comb_exact(gnn: RecurrentGnn, own, neighbor_sum):
    """Pure-Python exact evaluation of the combine network for one node."""
    return rfnn_eval(gnn.comb, list(own) + list(neighbor_sum))


# ---------------------------------------------------------------------------
# Serialization


def gnn_to_json(gnn: RecurrentGnn) -> dict:
    return {
        "dim": gnn.dim,
        "formula": gnn.formula_text,
        "layout": layout_to_json(gnn.layout),
        "init": {
            "k": 1,
            "nu_vars": [
                fi for fi in range(gnn.idx.n_fp)
                if not gnn.idx.is_mu[gnn.idx.fp_positions[fi]]
            ],
        },
        "layer": [
            {
                "rows": len(W),
                "cols": len(W[0]) if W else 0,
                "weights": [list(row) for row in W],
                "bias": list(bias),
            }
            for W, bias in gnn.comb.layers
        ],
        "hlt_index": gnn.hlt_index,
        "out_index": gnn.out_index,
    }


def gnn_from_json(data: dict) -> RecurrentGnn:
    phi = well_name(parse(data["formula"]))
    idx = index(phi)
    layout = layout_from_json(data["layout"])
    layers = tuple(
        (
            tuple(tuple(int(w) for w in row) for row in layer["weights"]),
            tuple(int(w) for w in layer["bias"]),
        )
        for layer in data["layer"]
    )
    return RecurrentGnn(
        formula_text=data["formula"],
        idx=idx,
        layout=layout,
        comb=Rfnn(layers),
        hlt_index=data["hlt_index"],
        out_index=data["out_index"],
    )


def save_gnn(gnn: RecurrentGnn, path) -> None:
    with open(path, "w") as fh:
        json.dump(gnn_to_json(gnn), fh)
        fh.write("\n")


def load_gnn(path) -> RecurrentGnn:
    with open(path) as fh:
        return gnn_from_json(json.load(fh))
