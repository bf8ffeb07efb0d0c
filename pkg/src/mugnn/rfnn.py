"""Exact-arithmetic ReLU feedforward networks and a circuit builder.

An Rfnn is a chain of integer affine layers with ReLU between consecutive
layers (not after the last).  The CircuitBuilder lets the compiler write
arithmetic over named inputs (linear combinations plus explicit relu
nodes, hash-consed) and then lays the resulting DAG out as an Rfnn:
each relu node gets a depth level, values still needed later are carried
forward through identity rows (safe because every carried value here is
nonnegative).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Rfnn:
    layers: tuple  # ((weights: rows x cols, bias: rows), ...)

    @property
    def input_width(self) -> int:
        return len(self.layers[0][0][0]) if self.layers[0][0] else 0

    @property
    def output_width(self) -> int:
        return len(self.layers[-1][1])


def rfnn_eval(f: Rfnn, x) -> list:
    """Exact evaluation; works for ints, Fractions, floats alike."""
    v = list(x)
    last = len(f.layers) - 1
    for li, (W, b) in enumerate(f.layers):
        if W and len(W[0]) != len(v):
            raise ValueError(f"layer {li}: width {len(W[0])} vs input {len(v)}")
        v = [sum(w * xi for w, xi in zip(row, v)) + bi for row, bi in zip(W, b)]
        if li != last:
            v = [max(0, a) if not isinstance(a, float) else max(0.0, a) for a in v]
    return v


# ---------------------------------------------------------------------------
# Composition


def _mat_mul(A, B):
    # A: p x q, B: q x r
    return tuple(
        tuple(sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]) if B else 0))
        for i in range(len(A))
    )


def _mat_vec(A, v):
    return tuple(sum(A[i][k] * v[k] for k in range(len(v))) for i in range(len(A)))


def sequential(f: Rfnn, g: Rfnn) -> Rfnn:
    """g after f; the boundary affine layers are fused (no stray ReLU)."""
    if f.output_width != g.input_width:
        raise ValueError("width mismatch in sequential composition")
    Wf, bf = f.layers[-1]
    Wg, bg = g.layers[0]
    fused_W = _mat_mul(Wg, Wf)
    fused_b = tuple(a + c for a, c in zip(_mat_vec(Wg, bf), bg))
    return Rfnn(f.layers[:-1] + ((fused_W, fused_b),) + g.layers[1:])


def _pad_to_depth(f: Rfnn, depth: int) -> Rfnn:
    """Append identity affine layers; only sound if f's outputs are nonnegative
    whenever the padding crosses a ReLU boundary."""
    layers = list(f.layers)
    w = f.output_width
    ident = (tuple(tuple(1 if i == j else 0 for j in range(w)) for i in range(w)), (0,) * w)
    while len(layers) < depth:
        layers.append(ident)
    return Rfnn(tuple(layers))


def parallel(f: Rfnn, g: Rfnn) -> Rfnn:
    """Run f and g side by side on a concatenated input vector."""
    depth = max(len(f.layers), len(g.layers))
    f = _pad_to_depth(f, depth)
    g = _pad_to_depth(g, depth)
    layers = []
    for (Wf, bf), (Wg, bg) in zip(f.layers, g.layers):
        rows = []
        fcols = len(Wf[0]) if Wf else 0
        gcols = len(Wg[0]) if Wg else 0
        for row in Wf:
            rows.append(tuple(row) + (0,) * gcols)
        for row in Wg:
            rows.append((0,) * fcols + tuple(row))
        layers.append((tuple(rows), tuple(bf) + tuple(bg)))
    return Rfnn(tuple(layers))


def concatenation(f: Rfnn, g: Rfnn) -> Rfnn:
    """Feed the same input to f and g, concatenating their outputs."""
    if f.input_width != g.input_width:
        raise ValueError("width mismatch in concatenation")
    depth = max(len(f.layers), len(g.layers))
    f = _pad_to_depth(f, depth)
    g = _pad_to_depth(g, depth)
    layers = []
    for li, ((Wf, bf), (Wg, bg)) in enumerate(zip(f.layers, g.layers)):
        if li == 0:
            rows = [tuple(row) for row in Wf] + [tuple(row) for row in Wg]
        else:
            fcols = len(Wf[0]) if Wf else 0
            gcols = len(Wg[0]) if Wg else 0
            rows = [tuple(row) + (0,) * gcols for row in Wf]
            rows += [(0,) * fcols + tuple(row) for row in Wg]
        layers.append((tuple(rows), tuple(bf) + tuple(bg)))
    return Rfnn(tuple(layers))


# ---------------------------------------------------------------------------
# Circuit builder


class LinExpr:
    """Integer linear combination of atoms plus a constant."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: dict, const: int = 0):
        self.terms = terms
        self.const = const

    def __add__(self, other):
        if isinstance(other, int):
            return LinExpr(self.terms, self.const + other)
        t = dict(self.terms)
        for a, c in other.terms.items():
            t[a] = t.get(a, 0) + c
            if t[a] == 0:
                del t[a]
        return LinExpr(t, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({a: -c for a, c in self.terms.items()}, -self.const)

    def __sub__(self, other):
        if isinstance(other, int):
            return LinExpr(self.terms, self.const - other)
        return self + (-other)

    def __rsub__(self, other):  # int - expr
        return (-self) + other

    def __mul__(self, c: int):
        if c == 0:
            return LinExpr({}, 0)
        return LinExpr({a: co * c for a, co in self.terms.items()}, self.const * c)

    __rmul__ = __mul__

    def key(self):
        return (tuple(sorted(self.terms.items())), self.const)


class CircuitBuilder:
    def __init__(self, n_inputs: int, nonneg_inputs: bool = True):
        self.n_inputs = n_inputs
        self.nonneg_inputs = nonneg_inputs
        # atom i < n_inputs is input coordinate i; others are relu nodes
        self.relu_exprs: list[LinExpr] = []
        self.levels: list[int] = [0] * n_inputs
        self._relu_cache: dict = {}

    def inp(self, i: int) -> LinExpr:
        if not 0 <= i < self.n_inputs:
            raise ValueError(f"input {i} out of range")
        return LinExpr({i: 1})

    def const(self, c: int) -> LinExpr:
        return LinExpr({}, c)

    def relu(self, e: LinExpr) -> LinExpr:
        if not e.terms:
            return LinExpr({}, max(0, e.const))
        key = e.key()
        aid = self._relu_cache.get(key)
        if aid is None:
            aid = self.n_inputs + len(self.relu_exprs)
            self.relu_exprs.append(e)
            self.levels.append(1 + max(self.levels[a] for a in e.terms))
            self._relu_cache[key] = aid
        return LinExpr({aid: 1})

    # -- boolean / arithmetic gates (arguments are 0/1 unless noted)

    def clip(self, e: LinExpr) -> LinExpr:
        """min(1, relu(x)) for any integer x."""
        return self.relu(e) - self.relu(e - 1)

    def band(self, *es) -> LinExpr:
        es = [e for e in es]
        if not es:
            return self.const(1)
        if len(es) == 1:
            return es[0]
        s = es[0]
        for e in es[1:]:
            s = s + e
        return self.relu(s - (len(es) - 1))

    def bor(self, *es) -> LinExpr:
        if not es:
            return self.const(0)
        if len(es) == 1:
            return es[0]
        s = es[0]
        for e in es[1:]:
            s = s + e
        return self.clip(s)

    def bnot(self, e: LinExpr) -> LinExpr:
        return 1 - e

    def eqb(self, a: LinExpr, b: LinExpr) -> LinExpr:
        """1 iff booleans a and b agree."""
        return 1 - a - b + 2 * self.band(a, b)

    def geq_const(self, e: LinExpr, c: int) -> LinExpr:
        """1 iff natural-valued x >= c."""
        return self.clip(e - (c - 1))

    def exmux(self, default: LinExpr, cases) -> LinExpr:
        """Select among boolean values by mutually exclusive boolean gates."""
        gates = [g for g, _ in cases]
        gsum = self.const(0)
        for g in gates:
            gsum = gsum + g
        out = self.relu(default - gsum)
        for g, v in cases:
            out = out + self.relu(v + g - 1)
        return out

    # -- layout as an Rfnn

    def build(self, outputs: list[LinExpr]) -> Rfnn:
        n_in = self.n_inputs
        n_atoms = n_in + len(self.relu_exprs)
        needed = [False] * n_atoms
        stack = []
        for e in outputs:
            stack.extend(e.terms)
        while stack:
            a = stack.pop()
            if needed[a]:
                continue
            needed[a] = True
            if a >= n_in:
                stack.extend(self.relu_exprs[a - n_in].terms)

        L = max((self.levels[a] for a in range(n_atoms) if needed[a]), default=0)

        last_use = [self.levels[a] for a in range(n_atoms)]
        for a in range(n_in, n_atoms):
            if not needed[a]:
                continue
            for dep in self.relu_exprs[a - n_in].terms:
                last_use[dep] = max(last_use[dep], self.levels[a] - 1)
        for e in outputs:
            for a in e.terms:
                last_use[a] = max(last_use[a], L)

        if not self.nonneg_inputs:
            for a in range(n_in):
                if needed[a] and last_use[a] > 0:
                    raise ValueError("cannot carry a possibly-negative input across ReLU")

        # slots per level; level 0 is all inputs so widths line up with callers
        slots = [list(range(n_in))]
        slot_pos = [{a: a for a in range(n_in)}]
        for t in range(1, L + 1):
            atoms = [
                a
                for a in range(n_atoms)
                if needed[a] and self.levels[a] <= t <= last_use[a]
            ]
            slots.append(atoms)
            slot_pos.append({a: i for i, a in enumerate(atoms)})

        layers = []
        for t in range(1, L + 1):
            prev = slot_pos[t - 1]
            width = len(slots[t - 1])
            rows = []
            bias = []
            for a in slots[t]:
                row = [0] * width
                if self.levels[a] == t:
                    e = self.relu_exprs[a - n_in]
                    for dep, c in e.terms.items():
                        row[prev[dep]] = c
                    bias.append(e.const)
                else:
                    row[prev[a]] = 1
                    bias.append(0)
                rows.append(tuple(row))
            layers.append((tuple(rows), tuple(bias)))

        prev = slot_pos[L]
        width = len(slots[L])
        rows = []
        bias = []
        for e in outputs:
            row = [0] * width
            for a, c in e.terms.items():
                row[prev[a]] = c
            rows.append(tuple(row))
            bias.append(e.const)
        layers.append((tuple(rows), tuple(bias)))
        return Rfnn(tuple(layers))


# ---------------------------------------------------------------------------
# Standalone gadget networks


def clip_net() -> Rfnn:
    b = CircuitBuilder(1, nonneg_inputs=False)
    return b.build([b.clip(b.inp(0))])


def gt_net() -> Rfnn:
    b = CircuitBuilder(2, nonneg_inputs=False)
    return b.build([b.clip(b.inp(0) - b.inp(1))])


def geq_net() -> Rfnn:
    b = CircuitBuilder(2, nonneg_inputs=False)
    return b.build([1 - b.clip(b.inp(1) - b.inp(0))])


def and_net() -> Rfnn:
    b = CircuitBuilder(2)
    return b.build([b.band(b.inp(0), b.inp(1))])


def or_net() -> Rfnn:
    b = CircuitBuilder(2)
    return b.build([b.bor(b.inp(0), b.inp(1))])


def not_net() -> Rfnn:
    b = CircuitBuilder(1)
    return b.build([1 - b.inp(0)])


def mux_net() -> Rfnn:
    """(g, a, b) -> a if g else b, for boolean a, b."""
    b = CircuitBuilder(3)
    g, x, y = b.inp(0), b.inp(1), b.inp(2)
    return b.build([b.relu(x + g - 1) + b.relu(y - g)])


def add_net() -> Rfnn:
    b = CircuitBuilder(2, nonneg_inputs=False)
    return b.build([b.inp(0) + b.inp(1)])


def sub_net() -> Rfnn:
    b = CircuitBuilder(2, nonneg_inputs=False)
    return b.build([b.inp(0) - b.inp(1)])


def const_net(c: int, width: int = 1) -> Rfnn:
    b = CircuitBuilder(width, nonneg_inputs=False)
    return b.build([b.const(c)])


def gadgets() -> dict:
    return {
        "clip": clip_net(),
        "gt": gt_net(),
        "geq": geq_net(),
        "and": and_net(),
        "or": or_net(),
        "not": not_net(),
        "mux": mux_net(),
        "add": add_net(),
        "sub": sub_net(),
        "const": const_net,
    }
