"""The counting algorithm as an explicit transition system.

A configuration snapshots the whole model-checking state for a bound k:
per-fixpoint iteration counters C, the valuation V of bound variables,
per-subformula result sets R, the validity set F (subformulas whose R entry
is currently trusted), and the stability maps S (per subformula) and T
(per fixpoint, tracking stability of the iterations performed so far).

Transitions:
  type 1  recompute R/F/S bottom-up for the current valuation;
  type 2  advance ("tick") ready fixpoint counters and reset dependents;
  type 3  restart everything at bound k+1 once the configuration is complete.

The extended system threads a residual set D of variables whose counters
are being counted back down to zero one step at a time; this is the form
a ReLU network can simulate (counters only ever change by +-1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .formula import Formula, FormulaError, SubformulaIndex, index, well_name
from .graph import LabeledGraph
from .semantics import Evaluator, adorn, uniform


class SafeguardExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Configuration:
    idx: SubformulaIndex
    G: LabeledGraph
    k: int
    C: tuple[int, ...]      # per fixpoint
    V: tuple[int, ...]      # per variable (= per fixpoint), node masks
    R: tuple[int, ...]      # per subformula, node masks
    F: int                  # bitmask over subformula positions
    S: tuple[int, ...]      # per subformula, node masks
    T: tuple[int, ...]      # per fixpoint, node masks

    @property
    def complete(self) -> bool:
        return bool(self.F >> self.idx.root & 1)

    @property
    def stable(self) -> bool:
        return self.S[self.idx.root] == self.G.full_mask

    def valuation(self) -> dict[str, int]:
        return {x: self.V[i] for i, x in enumerate(self.idx.var_names)}


@dataclass(frozen=True)
class ExtendedConfiguration:
    config: Configuration
    D: frozenset[int]       # variable indices awaiting counter rundown


def initial_configuration(idx: SubformulaIndex, G: LabeledGraph, k: int) -> Configuration:
    if k < 1:
        raise ValueError("bound k must be >= 1")
    n_fp = idx.n_fp
    # T starts at the full node set: with C = 0 there are no performed
    # iterations to certify, so every node is vacuously covered.
    return Configuration(
        idx=idx,
        G=G,
        k=k,
        C=(0,) * n_fp,
        V=tuple(0 if idx.is_mu[p] else G.full_mask for p in idx.fp_positions),
        R=(0,) * idx.n,
        F=0,
        S=(0,) * idx.n,
        T=(G.full_mask,) * n_fp,
    )


# ---------------------------------------------------------------------------
# Type-1: recompute results, validity, and stability bottom-up.


def trans1(cfg: Configuration) -> Configuration:
    idx, G = cfg.idx, cfg.G
    full = G.full_mask
    k = cfg.k

    from .formula import AllBut, And, AtLeast, Mu, NegProp, Nu, Or, Prop, Var

    # R' is one synchronous update reading only the old maps; composite
    # clauses therefore take several type-1 passes to propagate upward
    R2: list[int] = []
    for p, f in enumerate(idx.formulas):
        if isinstance(f, Prop):
            r = G.prop_mask(f.name)
        elif isinstance(f, NegProp):
            r = full & ~G.prop_mask(f.name)
        elif isinstance(f, Var):
            r = cfg.V[idx.var_index[f.name]]
        elif isinstance(f, And):
            r = cfg.R[idx.pos[f.lhs]] & cfg.R[idx.pos[f.rhs]]
        elif isinstance(f, Or):
            r = cfg.R[idx.pos[f.lhs]] | cfg.R[idx.pos[f.rhs]]
        elif isinstance(f, AtLeast):
            body = cfg.R[idx.pos[f.body]]
            r = 0
            for n in range(G.n):
                if (G.adj_masks[n] & body).bit_count() >= f.grade:
                    r |= 1 << n
        elif isinstance(f, AllBut):
            body = cfg.R[idx.pos[f.body]]
            r = 0
            for n in range(G.n):
                if (G.adj_masks[n] & ~body).bit_count() < f.grade:
                    r |= 1 << n
        elif isinstance(f, (Mu, Nu)):
            r = cfg.R[idx.pos[f.body]]
        else:
            raise TypeError(f"not a formula: {f!r}")
        R2.append(r)

    F2 = 0
    for p in range(idx.n):
        if all(cfg.F >> c & 1 for c in idx.sub[p]):
            if idx.is_fp[p] and cfg.C[idx.fp_index[p]] < k - 1:
                continue
            F2 |= 1 << p

    S2: list[int] = []
    for p, f in enumerate(idx.formulas):
        if idx.is_fp[p]:
            fi = idx.fp_index[p]
            b = idx.body_pos[fi]
            s = cfg.S[b] & cfg.T[fi] & ~(cfg.V[fi] ^ R2[b]) & full
        else:
            s = full
            for c in idx.sub[p]:
                s &= cfg.S[c]
        S2.append(s)

    return replace(cfg, R=tuple(R2), F=F2, S=tuple(S2))


# ---------------------------------------------------------------------------
# Type-2: tick ready fixpoints, reset dependents.


def ticks_reset_dep(cfg: Configuration):
    """(ticking fixpoints, reset variables, dependent fixpoints), all as index sets."""
    idx = cfg.idx
    k = cfg.k
    ticks = set()
    for fi, p in enumerate(idx.fp_positions):
        if not all(cfg.F >> c & 1 for c in idx.sub[p]):
            continue
        if cfg.C[fi] >= k - 1:
            continue
        if all(cfg.C[bj] == k - 1 for bj in idx.tfp[p]):
            ticks.add(fi)

    # least closure: a variable resets if its binder ticks or if its binder
    # mentions a resetting variable free
    reset = set(ticks)
    changed = True
    while changed:
        changed = False
        for vi, p in enumerate(idx.fp_positions):
            if vi in reset:
                continue
            if idx.free[p] & {idx.var_names[r] for r in reset}:
                reset.add(vi)
                changed = True
    dep = reset - ticks
    return frozenset(ticks), frozenset(reset), frozenset(dep)


def _trans2(cfg: Configuration, keep_dep_counters: bool):
    idx, G = cfg.idx, cfg.G
    ticks, reset, dep = ticks_reset_dep(cfg)
    if not ticks:
        return cfg, frozenset()
    C2 = list(cfg.C)
    V2 = list(cfg.V)
    T2 = list(cfg.T)
    for fi in ticks:
        b = idx.body_pos[fi]
        C2[fi] = cfg.C[fi] + 1
        V2[fi] = cfg.R[b]
        T2[fi] = cfg.T[fi] & cfg.S[b]
    for fi in dep:
        if not keep_dep_counters:
            C2[fi] = 0
        V2[fi] = 0 if idx.is_mu[idx.fp_positions[fi]] else G.full_mask
        T2[fi] = G.full_mask
    reset_names = {idx.var_names[r] for r in reset}
    F2 = cfg.F
    for p in range(idx.n):
        if F2 >> p & 1 and idx.free[p] & reset_names:
            F2 &= ~(1 << p)
    cfg2 = replace(cfg, C=tuple(C2), V=tuple(V2), F=F2, T=tuple(T2))
    return cfg2, dep


def trans2(cfg: Configuration) -> Configuration:
    return _trans2(cfg, keep_dep_counters=False)[0]


def partial_trans2(cfg: Configuration) -> ExtendedConfiguration:
    cfg2, dep = _trans2(cfg, keep_dep_counters=True)
    return ExtendedConfiguration(cfg2, dep)


# ---------------------------------------------------------------------------
# Type-3: restart at k+1 once complete.


def trans3(cfg: Configuration) -> Configuration:
    if not cfg.complete:
        return cfg
    return initial_configuration(cfg.idx, cfg.G, cfg.k + 1)


def partial_trans3(cfg: Configuration) -> ExtendedConfiguration:
    if not cfg.complete:
        return ExtendedConfiguration(cfg, frozenset())
    fresh = initial_configuration(cfg.idx, cfg.G, cfg.k + 1)
    kept = replace(fresh, C=cfg.C)
    return ExtendedConfiguration(kept, frozenset(range(cfg.idx.n_fp)))


# ---------------------------------------------------------------------------
# Extended system: one synchronous step of 3;1;2;reset.


def etrans_step(x: ExtendedConfiguration) -> ExtendedConfiguration:
    cfg, D = x.config, x.D
    if not D and cfg.complete:
        ext = partial_trans3(cfg)
        cfg, D = ext.config, ext.D
    if not D:
        cfg = trans1(cfg)
    if not D:
        ext = partial_trans2(cfg)
        cfg, D = ext.config, ext.D
    if D:
        C2 = list(cfg.C)
        D2 = set()
        for vi in D:
            c = cfg.C[vi]
            if c > 0:
                C2[vi] = c - 1
            if c - 1 > 0:
                D2.add(vi)
        cfg = replace(cfg, C=tuple(C2))
        D = frozenset(D2)
    return ExtendedConfiguration(cfg, D)


# ---------------------------------------------------------------------------
# Coherence diagnosis.


def check_coherent(cfg: Configuration, ev: Evaluator | None = None) -> str | None:
    """None when coherent, otherwise a description of the first violation."""
    idx, G, k = cfg.idx, cfg.G, cfg.k
    if ev is None:
        ev = Evaluator(G)
    V = cfg.valuation()

    for fi, p in enumerate(idx.fp_positions):
        if not 0 <= cfg.C[fi] <= k - 1:
            return f"counter C({idx.var_names[fi]})={cfg.C[fi]} outside [0,{k-1}]"
        expect = ev.evaluate(adorn(idx.formulas[p], cfg.C[fi], k), V)
        if cfg.V[fi] != expect:
            return (
                f"soundness: V({idx.var_names[fi]})={cfg.V[fi]:b} but "
                f"iteration {cfg.C[fi]} of its binder gives {expect:b}"
            )

    for p, f in enumerate(idx.formulas):
        if not cfg.F >> p & 1:
            continue
        expect = ev.evaluate(uniform(f, k), V)
        if cfg.R[p] != expect:
            return f"consistency: R at position {p} is {cfg.R[p]:b}, expected {expect:b}"
        if not all(cfg.F >> c & 1 for c in idx.sub[p]):
            return f"consistency: position {p} valid but a direct subformula is not"
        if idx.is_fp[p] and cfg.C[idx.fp_index[p]] != k - 1:
            return f"consistency: valid fixpoint at position {p} has counter < k-1"

    for p, f in enumerate(idx.formulas):
        if not cfg.F >> p & 1:
            continue
        expect = ev.stable_set(f, V, k)
        if cfg.S[p] != expect:
            return f"stability: S at position {p} is {cfg.S[p]:b}, expected {expect:b}"
    for fi, p in enumerate(idx.fp_positions):
        expect = ev.jk_stable_set(idx.formulas[p], cfg.C[fi], k, V)
        if cfg.T[fi] != expect:
            return (
                f"stability: T({idx.var_names[fi]})={cfg.T[fi]:b}, "
                f"expected {expect:b} at ({cfg.C[fi]},{k})"
            )
    return None


# ---------------------------------------------------------------------------
# Runners.


def safeguard(idx: SubformulaIndex, G: LabeledGraph) -> int:
    return 16 * (idx.n + 2) * (G.n + 2) ** (idx.n_fp + 2)


def _prepare(phi: Formula) -> SubformulaIndex:
    idx = phi if isinstance(phi, SubformulaIndex) else index(well_name(phi))
    if not idx.is_sentence:
        raise FormulaError("a sentence (no free variables) is required")
    return idx


def run_counting(phi, G: LabeledGraph, on_config=None, max_steps: int | None = None):
    """Iterate 3;1;2 from bound 1 until complete and stable.

    on_config, when given, is called as on_config(kind, cfg) after every
    individual transition ('t3', 't1', 't2').
    """
    idx = _prepare(phi)
    limit = max_steps if max_steps is not None else safeguard(idx, G)
    cfg = initial_configuration(idx, G, 1)
    if on_config:
        on_config("init", cfg)
    steps = 0
    while not (cfg.complete and cfg.stable):
        if steps >= limit:
            raise SafeguardExceeded(f"counting run exceeded {limit} steps")
        cfg = trans3(cfg)
        if on_config:
            on_config("t3", cfg)
        cfg = trans1(cfg)
        if on_config:
            on_config("t1", cfg)
        cfg = trans2(cfg)
        if on_config:
            on_config("t2", cfg)
        steps += 1
    return cfg, steps


def run_extended(phi, G: LabeledGraph, on_config=None, max_steps: int | None = None):
    """Iterate the extended step until complete, stable, and D empty."""
    idx = _prepare(phi)
    limit = max_steps if max_steps is not None else safeguard(idx, G)
    x = ExtendedConfiguration(initial_configuration(idx, G, 1), frozenset())
    if on_config:
        on_config("init", x)
    steps = 0
    while not (x.config.complete and x.config.stable and not x.D):
        if steps >= limit:
            raise SafeguardExceeded(f"extended run exceeded {limit} steps")
        x = etrans_step(x)
        if on_config:
            on_config("estep", x)
        steps += 1
    return x, steps
