import json
import random

import pytest

from mugnn.counting import (
    ExtendedConfiguration,
    etrans_step,
    initial_configuration,
    run_extended,
)
from mugnn.formula import index, parse, to_text, well_name
from mugnn.gen import path_graph, random_formula, random_graph
from mugnn.gnn import (
    DecodeError,
    GnnError,
    apply_layer,
    compile_formula,
    decode,
    encode,
    eval_comb_exact,
    gnn_from_json,
    gnn_to_json,
    load_gnn,
    run_gnn,
    save_gnn,
)
from mugnn.graph import make_graph
from mugnn.semantics import evaluate


def out_mask(out):
    return sum(1 << n for n, bit in enumerate(out) if bit)


def random_reachable_ext(rng, phi, G, steps=None):
    idx = index(phi)
    x = ExtendedConfiguration(initial_configuration(idx, G, 1), frozenset())
    _, total = run_extended(phi, G)
    cut = rng.randint(0, total) if steps is None else steps
    for _ in range(cut):
        x = etrans_step(x)
    return x


def test_encode_initial(g1, phi_reach):
    gnn = compile_formula(phi_reach, props=g1.props)
    x = ExtendedConfiguration(initial_configuration(gnn.idx, g1, 1), frozenset())
    vecs = encode(x, gnn.layout)
    for v in vecs:
        assert v[gnn.layout.k_coord] == 1
        assert v[gnn.layout.c_coord[0]] == 0
        assert v[gnn.layout.v_coord[0]] == 0
        assert v[gnn.layout.pad_coord] == 1
    assert vecs == tuple(gnn.init_vector(g1.labels[n]) for n in range(3))


def test_encode_decode_roundtrip_random():
    rng = random.Random(51)
    for _ in range(100):
        phi = random_formula(rng, max_size=12)
        G = random_graph(rng, max_nodes=5)
        gnn = compile_formula(phi, props=G.props)
        x = random_reachable_ext(rng, phi, G)
        vecs = encode(x, gnn.layout)
        assert decode(vecs, gnn.layout, gnn.idx, G) == x


def test_decode_rejects_global_disagreement(g1, phi_reach):
    gnn = compile_formula(phi_reach, props=g1.props)
    x = ExtendedConfiguration(initial_configuration(gnn.idx, g1, 1), frozenset())
    vecs = [list(v) for v in encode(x, gnn.layout)]
    vecs[1][gnn.layout.k_coord] = 2
    with pytest.raises(DecodeError):
        decode(vecs, gnn.layout, gnn.idx, g1)


def test_decode_rejects_non_boolean(g1, phi_reach):
    gnn = compile_formula(phi_reach, props=g1.props)
    x = ExtendedConfiguration(initial_configuration(gnn.idx, g1, 1), frozenset())
    vecs = [list(v) for v in encode(x, gnn.layout)]
    vecs[0][gnn.layout.r_coord[0]] = 2
    with pytest.raises(DecodeError):
        decode(vecs, gnn.layout, gnn.idx, g1)


def test_compile_atom(g1):
    gnn = compile_formula(parse("p"), props=g1.props)
    out, iters, _ = run_gnn(gnn, g1)
    assert out_mask(out) == evaluate(parse("p"), g1)
    assert iters >= 1


def test_compile_reach_fixture(g1, phi_reach):
    gnn = compile_formula(phi_reach, props=g1.props)
    out, iters, _ = run_gnn(gnn, g1)
    assert out == [True, True, True]
    _, esteps = run_extended(phi_reach, g1)
    assert iters == esteps


def test_compile_mu_self_loop(g1):
    gnn = compile_formula(parse("mu X.X"), props=g1.props)
    out, _, _ = run_gnn(gnn, g1)
    assert out == [False, False, False]


def test_compile_paper_nested_formula():
    phi = well_name(parse("mu Y.((p | <>Y) | mu X.(q & <>(Y | <>X)))"))
    rng = random.Random(52)
    for _ in range(50):
        G = random_graph(rng, max_nodes=8, props=("p", "q"))
        gnn = compile_formula(phi, props=G.props)
        out, _, _ = run_gnn(gnn, G)
        assert out_mask(out) == evaluate(phi, G)


def test_universe_mismatch_rejected(g1):
    gnn = compile_formula(parse("p"), props=["p"])
    with pytest.raises(GnnError):
        run_gnn(gnn, g1)


def test_compile_rejects_open_formula():
    from mugnn.formula import FormulaError

    with pytest.raises(FormulaError):
        compile_formula(parse("X | p"))


def test_lockstep_simulation():
    rng = random.Random(53)
    for _ in range(20):
        phi = random_formula(rng, max_size=14)
        G = random_graph(rng, max_nodes=5)
        gnn = compile_formula(phi, props=G.props)
        x = ExtendedConfiguration(initial_configuration(gnn.idx, G, 1), frozenset())
        _, esteps = run_extended(phi, G)
        for _ in range(esteps):
            got = apply_layer(gnn, G, encode(x, gnn.layout))
            x = etrans_step(x)
            assert got == encode(x, gnn.layout)


def test_trace_decodes_to_extended_run(g1, phi_reach):
    gnn = compile_formula(phi_reach, props=g1.props)
    _, iters, snaps = run_gnn(gnn, g1, want_trace=True)
    xs = []
    run_extended(phi_reach, g1, on_config=lambda kind, x: xs.append(x))
    assert len(snaps) == iters + 1
    assert len(xs) == len(snaps)
    for snap, x in zip(snaps, xs):
        assert decode(snap, gnn.layout, gnn.idx, g1) == x


def test_numpy_path_matches_exact_eval(g1, phi_reach):
    gnn = compile_formula(phi_reach, props=g1.props)
    _, _, snaps = run_gnn(gnn, g1, want_trace=True)
    for snap, nxt in list(zip(snaps, snaps[1:]))[:6]:
        sums = [
            tuple(sum(snap[m][i] for m in g1.adj[n]) for i in range(gnn.dim))
            for n in range(g1.n)
        ]
        for n in range(g1.n):
            assert tuple(eval_comb_exact(gnn, snap[n], sums[n])) == nxt[n]


def test_integrality_and_bounds():
    rng = random.Random(54)
    for _ in range(10):
        phi = random_formula(rng, max_size=12)
        G = random_graph(rng, max_nodes=5)
        gnn = compile_formula(phi, props=G.props)
        _, _, snaps = run_gnn(gnn, G, want_trace=True)
        for snap in snaps:
            for v in snap:
                assert all(isinstance(a, int) for a in v)
                k = v[gnn.layout.k_coord]
                assert k <= G.n + 1
                for fi in range(gnn.idx.n_fp):
                    assert v[gnn.layout.c_coord[fi]] <= k - 1 <= G.n


def test_run_on_empty_graph():
    G = make_graph(["p"], [], [], [])
    gnn = compile_formula(parse("mu X.(p | <>X)"), props=["p"])
    out, iters, _ = run_gnn(gnn, G)
    assert out == [] and iters == 0


def test_halting_monotone_on_paths(phi_reach):
    iters_by_n = []
    for n in range(2, 13):
        G = path_graph(n)
        gnn = compile_formula(phi_reach, props=G.props)
        out, iters, _ = run_gnn(gnn, G)
        assert out == [True] * n
        iters_by_n.append(iters)
    assert iters_by_n == sorted(iters_by_n)


def test_serialization_roundtrip(tmp_path, g1, phi_reach):
    gnn = compile_formula(phi_reach, props=g1.props)
    path = tmp_path / "model.json"
    save_gnn(gnn, path)
    loaded = load_gnn(path)
    assert loaded.comb == gnn.comb
    assert loaded.layout == gnn.layout
    assert loaded.hlt_index == gnn.hlt_index and loaded.out_index == gnn.out_index
    out1, it1, _ = run_gnn(gnn, g1)
    out2, it2, _ = run_gnn(loaded, g1)
    assert (out1, it1) == (out2, it2)
    # bit-exact JSON round trip
    assert gnn_to_json(gnn_from_json(gnn_to_json(gnn))) == gnn_to_json(gnn)


def test_model_json_shape(g1, phi_reach):
    data = gnn_to_json(compile_formula(phi_reach, props=g1.props))
    assert set(data) >= {"dim", "layout", "init", "layer", "hlt_index", "out_index"}
    json.dumps(data)  # serializable
    for layer in data["layer"]:
        assert layer["rows"] == len(layer["weights"])
