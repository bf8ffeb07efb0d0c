import random

import pytest

from mugnn.formula import (
    AllBut,
    And,
    AtLeast,
    FormulaError,
    Mu,
    NegProp,
    Nu,
    Or,
    ParseError,
    Prop,
    Var,
    ast_size,
    free_vars,
    index,
    is_well_named,
    parse,
    to_text,
    well_name,
)
from mugnn.gen import random_formula


def test_parse_reach():
    assert parse("mu X.(p | <>X)") == Mu("X", Or(Prop("p"), AtLeast(1, Var("X"))))


def test_parse_nested_two_fixpoints():
    got = parse("mu Y.((p | <>Y) | mu X.(q & <>(Y | <>X)))")
    want = Mu(
        "Y",
        Or(
            Or(Prop("p"), AtLeast(1, Var("Y"))),
            Mu("X", And(Prop("q"), AtLeast(1, Or(Var("Y"), AtLeast(1, Var("X")))))),
        ),
    )
    assert got == want


def test_parse_negation_on_compound_rejected():
    with pytest.raises(ParseError):
        parse("~(p & q)")


def test_parse_precedence_and_tighter_than_or():
    assert parse("p & q | r") == Or(And(Prop("p"), Prop("q")), Prop("r"))
    assert parse("p | q & r") == Or(Prop("p"), And(Prop("q"), Prop("r")))


def test_parse_fixpoint_scope_maximal_right():
    assert parse("mu X.p | <>X") == parse("mu X.(p | <>X)")


def test_parse_grades():
    assert parse("<3>p") == AtLeast(3, Prop("p"))
    assert parse("[2]p") == AllBut(2, Prop("p"))
    assert parse("<>p") == AtLeast(1, Prop("p"))
    assert parse("[]p") == AllBut(1, Prop("p"))


def test_parse_grade_zero_rejected():
    with pytest.raises(ParseError):
        parse("<0>p")


def test_parse_huge_grade_rejected():
    with pytest.raises(ParseError):
        parse(f"<{2**31}>p")


def test_parse_errors_have_position():
    with pytest.raises(ParseError) as ei:
        parse("p |")
    assert ei.value.position == 3


def test_parse_trailing_garbage():
    with pytest.raises(ParseError):
        parse("p q")


def test_well_name_noop_when_clean():
    phi = parse("mu X.(p | <>X)")
    assert well_name(phi) == phi


def test_well_name_duplicate_binders():
    got = well_name(parse("(mu X.<>X) | (mu X.p)"))
    assert got == parse("(mu X.<>X) | (mu X1.p)")


def test_well_name_nested_duplicate():
    got = well_name(parse("mu X.(X | mu X.p)"))
    assert got == parse("mu X.(X | mu X1.p)")


def test_well_name_free_bound_clash():
    # free X elsewhere forces the binder to rename
    phi = Or(Var("X"), Mu("X", Prop("p")))
    got = well_name(phi)
    assert got == Or(Var("X"), Mu("X1", Prop("p")))


def test_well_name_idempotent_random():
    rng = random.Random(1)
    for _ in range(200):
        phi = random_formula(rng, max_size=15)
        named = well_name(phi)
        assert is_well_named(named)
        assert well_name(named) == named


def test_print_parse_roundtrip_random():
    rng = random.Random(2)
    for _ in range(1000):
        phi = random_formula(rng, max_size=20)
        assert parse(to_text(phi)) == phi


def test_index_tsub_dedup():
    # ~p | (X & <1>q): distinct subformulas counted once
    phi = Or(NegProp("p"), And(Var("X"), AtLeast(1, Prop("q"))))
    idx = index(phi)
    texts = {to_text(f) for f in idx.formulas}
    assert texts == {"~p", "X", "q", "<>q", "X & <>q", "~p | X & <>q"}


def test_index_atom_has_no_subs():
    idx = index(parse("p"))
    assert idx.sub[idx.root] == ()


def test_index_single_binder(phi_reach):
    idx = index(phi_reach)
    assert idx.fp_positions == (idx.root,)
    assert idx.var_names == ("X",)
    assert idx.q == 1
    assert idx.is_sentence


def test_index_requires_well_named():
    with pytest.raises(FormulaError):
        index(parse("(mu X.<>X) | (mu X.p)"))


def test_index_postorder_children_first():
    rng = random.Random(3)
    for _ in range(100):
        idx = index(random_formula(rng, max_size=20))
        for p in range(idx.n):
            assert all(c < p for c in idx.sub[p])
        assert idx.root == idx.n - 1
        assert idx.n <= ast_size(idx.formulas[idx.root])


def test_index_binder_bijection():
    rng = random.Random(4)
    for _ in range(100):
        idx = index(random_formula(rng, max_size=20))
        assert len(set(idx.var_names)) == idx.n_fp
        for fi, p in enumerate(idx.fp_positions):
            assert idx.formulas[p].var == idx.var_names[fi]


def test_free_vars():
    assert free_vars(parse("mu X.(X | Y)")) == {"Y"}
    assert free_vars(parse("mu X.(p | <>X)")) == set()
