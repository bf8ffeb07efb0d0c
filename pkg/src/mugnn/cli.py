"""Command-line surface: check, compile, run, compare, trace, generators."""

from __future__ import annotations

import json
import random
import sys
import time

import click

from .counting import SafeguardExceeded, run_counting, run_extended
from .formula import FormulaError, parse, to_text, well_name
from .gen import random_formula, random_graph
from .gnn import (
    GnnError,
    compile_formula,
    decode,
    gnn_to_json,
    load_gnn,
    run_gnn,
    save_gnn,
)
from .graph import GraphError, graph_to_json, load_graph
from .semantics import evaluate, model_check_stable

EXIT_PARSE = 2
EXIT_GRAPH = 3
EXIT_SAFEGUARD = 4

ENGINES = ("oracle", "stable", "counting", "extended", "gnn")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(formula_text, graph_path):
    try:
        phi = well_name(parse(formula_text))
    except FormulaError as e:
        _fail(EXIT_PARSE, str(e))
    try:
        G = load_graph(graph_path)
    except GraphError as e:
        _fail(EXIT_GRAPH, str(e))
    return phi, G


def _run_engine(phi, G, engine, max_steps=None):
    """Returns (mask, k_used or None, iterations or None)."""
    if engine == "oracle":
        return evaluate(phi, G), None, None
    if engine == "stable":
        mask, k = model_check_stable(phi, G)
        return mask, k, None
    if engine == "counting":
        cfg, steps = run_counting(phi, G, max_steps=max_steps)
        return cfg.R[cfg.idx.root], cfg.k, steps
    if engine == "extended":
        x, steps = run_extended(phi, G, max_steps=max_steps)
        cfg = x.config
        return cfg.R[cfg.idx.root], cfg.k, steps
    if engine == "gnn":
        gnn = compile_formula(phi, props=G.props)
        out, iters, _ = run_gnn(gnn, G, max_steps=max_steps)
        mask = 0
        for n, bit in enumerate(out):
            if bit:
                mask |= 1 << n
        return mask, None, iters
    raise ValueError(f"unknown engine {engine!r}")


def _report(phi, G, graph_path, engine, mask, k_used, iterations, elapsed):
    return {
        "formula": to_text(phi),
        "graph": str(graph_path),
        "engine": engine,
        "output": {nid: bool(mask >> i & 1) for i, nid in enumerate(G.node_ids)},
        "k_used": k_used,
        "iterations": iterations,
        "wall_time_s": elapsed,
    }


def _emit(obj, pretty):
    click.echo(json.dumps(obj, indent=2 if pretty else None, sort_keys=False))


@click.group()
def main():
    """Graded modal mu-calculus model checking and GNN compilation."""


@main.command()
@click.argument("formula")
@click.argument("graph", type=click.Path())
@click.option("--engine", type=click.Choice(ENGINES), default="oracle")
@click.option("--max-steps", type=int, default=None)
@click.option("--json", "pretty", is_flag=True, help="pretty-print the JSON report")
def check(formula, graph, engine, max_steps, pretty):
    """Evaluate FORMULA on GRAPH with the chosen engine."""
    phi, G = _load(formula, graph)
    t0 = time.perf_counter()
    try:
        mask, k_used, iters = _run_engine(phi, G, engine, max_steps)
    except SafeguardExceeded as e:
        _fail(EXIT_SAFEGUARD, str(e))
    except (FormulaError, GnnError) as e:
        _fail(EXIT_PARSE, str(e))
    _emit(_report(phi, G, graph, engine, mask, k_used, iters, time.perf_counter() - t0), pretty)


@main.command(name="compile")
@click.argument("formula")
@click.argument("out", type=click.Path())
@click.option("--props", default=None, help="comma-separated proposition universe")
def compile_cmd(formula, out, props):
    """Compile FORMULA to a GNN model file."""
    try:
        phi = well_name(parse(formula))
        universe = props.split(",") if props else None
        gnn = compile_formula(phi, props=universe)
    except (FormulaError, GnnError) as e:
        _fail(EXIT_PARSE, str(e))
    save_gnn(gnn, out)
    click.echo(f"wrote model ({gnn.dim} features, {len(gnn.comb.layers)} layers) to {out}")


@main.command()
@click.argument("model", type=click.Path())
@click.argument("graph", type=click.Path())
@click.option("--max-steps", type=int, default=None)
@click.option("--json", "pretty", is_flag=True)
def run(model, graph, max_steps, pretty):
    """Run a saved GNN model on GRAPH."""
    try:
        gnn = load_gnn(model)
    except (OSError, KeyError, ValueError) as e:
        _fail(EXIT_PARSE, f"cannot load model: {e}")
    try:
        G = load_graph(graph)
    except GraphError as e:
        _fail(EXIT_GRAPH, str(e))
    t0 = time.perf_counter()
    try:
        out, iters, _ = run_gnn(gnn, G, max_steps=max_steps)
    except SafeguardExceeded as e:
        _fail(EXIT_SAFEGUARD, str(e))
    except GnnError as e:
        _fail(EXIT_GRAPH, str(e))
    mask = 0
    for n, bit in enumerate(out):
        if bit:
            mask |= 1 << n
    phi = well_name(parse(gnn.formula_text))
    _emit(_report(phi, G, graph, "gnn", mask, None, iters, time.perf_counter() - t0), pretty)


@main.command()
@click.argument("formula", required=False)
@click.argument("graph", type=click.Path(), required=False)
@click.option("--trials", type=int, default=None, help="compare on random instances instead")
@click.option("--seed", type=int, default=0)
@click.option("--max-steps", type=int, default=None)
def compare(formula, graph, trials, seed, max_steps):
    """Run every engine and report agreement."""
    instances = []
    if trials is not None:
        rng = random.Random(seed)
        for _ in range(trials):
            instances.append((random_formula(rng), random_graph(rng)))
    else:
        if formula is None or graph is None:
            _fail(EXIT_PARSE, "compare needs FORMULA and GRAPH, or --trials")
        phi, G = _load(formula, graph)
        instances.append((phi, G))

    disagreements = 0
    for phi, G in instances:
        results = {}
        try:
            for engine in ENGINES:
                results[engine], _, _ = _run_engine(phi, G, engine, max_steps)
        except SafeguardExceeded as e:
            _fail(EXIT_SAFEGUARD, str(e))
        baseline = results["oracle"]
        bad = {e: m for e, m in results.items() if m != baseline}
        if bad:
            disagreements += 1
            diff_engine, diff_mask = next(iter(bad.items()))
            first_node = (baseline ^ diff_mask).bit_length() - 1
            click.echo(
                json.dumps(
                    {
                        "verdict": "disagree",
                        "formula": to_text(phi),
                        "engine": diff_engine,
                        "first_differing_node": G.node_ids[first_node],
                    }
                )
            )
        else:
            click.echo(json.dumps({"verdict": "agree", "formula": to_text(phi)}))
    if disagreements:
        sys.exit(1)


def _summary_counting(kind, cfg, step):
    return {
        "step": step,
        "kind": kind,
        "k": cfg.k,
        "C": list(cfg.C),
        "F_size": bin(cfg.F).count("1"),
        "D": [],
        "R": {to_text(cfg.idx.formulas[p]): cfg.R[p].bit_count() for p in range(cfg.idx.n)},
        "S": {to_text(cfg.idx.formulas[p]): cfg.S[p].bit_count() for p in range(cfg.idx.n)},
    }


@main.command()
@click.argument("formula")
@click.argument("graph", type=click.Path())
@click.option("--engine", type=click.Choice(("counting", "extended", "gnn")), default="counting")
@click.option("--max-steps", type=int, default=None)
def trace(formula, graph, engine, max_steps):
    """Stream one JSON line per step of the chosen engine."""
    phi, G = _load(formula, graph)
    lines = []
    try:
        if engine == "counting":
            counter = {"i": 0}

            def on_config(kind, cfg):
                lines.append(_summary_counting(kind, cfg, counter["i"]))
                counter["i"] += 1

            run_counting(phi, G, on_config=on_config, max_steps=max_steps)
        elif engine == "extended":
            counter = {"i": 0}

            def on_config(kind, x):
                entry = _summary_counting(kind, x.config, counter["i"])
                entry["D"] = sorted(x.config.idx.var_names[vi] for vi in x.D)
                lines.append(entry)
                counter["i"] += 1

            run_extended(phi, G, on_config=on_config, max_steps=max_steps)
        else:
            gnn = compile_formula(phi, props=G.props)
            _, iters, snaps = run_gnn(gnn, G, max_steps=max_steps, want_trace=True)
            for i, vecs in enumerate(snaps):
                x = decode(vecs, gnn.layout, gnn.idx, G)
                entry = _summary_counting("gnn", x.config, i)
                entry["D"] = sorted(gnn.idx.var_names[vi] for vi in x.D)
                lines.append(entry)
    except SafeguardExceeded as e:
        _fail(EXIT_SAFEGUARD, str(e))
    for entry in lines:
        click.echo(json.dumps(entry))


@main.command(name="gen-formula")
@click.option("--seed", type=int, default=0)
@click.option("--max-size", type=int, default=25)
@click.option("--max-fixpoints", type=int, default=3)
@click.option("--max-grade", type=int, default=3)
@click.option("--props", default="p,q,r")
def gen_formula_cmd(seed, max_size, max_fixpoints, max_grade, props):
    """Print a random sentence."""
    rng = random.Random(seed)
    phi = random_formula(
        rng,
        props=props.split(","),
        max_size=max_size,
        max_fixpoints=max_fixpoints,
        max_grade=max_grade,
    )
    click.echo(to_text(phi))


@main.command(name="gen-graph")
@click.option("--seed", type=int, default=0)
@click.option("--max-nodes", type=int, default=10)
@click.option("--edge-prob", type=float, default=0.3)
@click.option("--props", default="p,q,r")
def gen_graph_cmd(seed, max_nodes, edge_prob, props):
    """Print a random graph as JSON."""
    rng = random.Random(seed)
    G = random_graph(rng, max_nodes=max_nodes, edge_prob=edge_prob, props=props.split(","))
    click.echo(json.dumps(graph_to_json(G)))


if __name__ == "__main__":
    main()
