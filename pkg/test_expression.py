"""Tests for translation, constant binding, linking and evaluation."""

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expression import (BOOLEAN_FUNCTIONS, Linker, UnboundTerminalError, bind_constants, eval_boolean,
                        eval_numeric, express, format_tree, link, parse_linker, sub_trees,
                        to_kexpression, translate)
from genome import Chromosome, gene_layout, parse_karva, random_chromosome
from problems import ALGEBRA_TABLE, CA_V1_TABLE, CONSTANTS_TABLE, GP_RULE_TABLE, MUX_TABLE, NEIGHBORHOOD, REGRESSION_TABLE

DC_TEXT = ("*?*?*+?aa??a?a?63852085"
           "[−0.004,0.839,−0.503,0.05,−0.49,−0.556,0.43,−0.899,0.576,−0.256]")


def _naive_boolean(tree, index, row):
    """Plain recursive evaluation with Python booleans."""
    node = tree.nodes[index]
    if node.arity == 0:
        return row[node.symbol]
    args = [_naive_boolean(tree, child, row) for child in node.children]
    symbol = node.symbol
    if symbol == "N":
        return not args[0]
    if symbol == "A":
        return args[0] and args[1]
    if symbol == "O":
        return args[0] or args[1]
    if symbol == "X":
        return args[0] != args[1]
    if symbol == "D":
        return not (args[0] and args[1])
    if symbol == "R":
        return not (args[0] or args[1])
    if symbol == "I":
        return args[1] if args[0] else args[2]
    return sum(args) >= 2


def test_translate_square_root_example():
    """Q*+-abcd reads as sqrt((a + b) * (c - d))."""
    tree = translate("Q*+-abcd", ALGEBRA_TABLE)
    assert tree.root.symbol == "Q"
    assert len(tree) == 8
    assert eval_numeric(tree, {"a": 3, "b": 1, "c": 5, "d": 1}) == 4.0


def test_translate_terminal_root():
    """A terminal at position 0 gives a one-node tree."""
    tree = translate("a+*aaaaa", ALGEBRA_TABLE)
    assert len(tree) == 1
    assert eval_numeric(tree, {"a": 7}) == 7.0


def test_kexpression_of_tree():
    """Breadth-first reading of a tree gives back its K-expression."""
    assert to_kexpression(translate("Q*+-abcd", ALGEBRA_TABLE)) == "Q*+-abcd"
    assert to_kexpression(translate("a", ALGEBRA_TABLE)) == "a"


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_kexpression_round_trip(seed):
    """translate(to_kexpression(t)) == t."""
    layout = gene_layout(8, GP_RULE_TABLE)
    gene = random_chromosome(layout, GP_RULE_TABLE, 1, None, np.random.default_rng(seed)).gene(0)
    tree = translate(gene, GP_RULE_TABLE)
    assert translate(to_kexpression(tree), GP_RULE_TABLE) == tree


@given(seed=st.integers(0, 2 ** 32 - 1), offset=st.integers(0, 20))
def test_noncoding_region_is_silent(seed, offset):
    """Changing a symbol downstream of the ORF leaves the tree unchanged."""
    rng = np.random.default_rng(seed)
    layout = gene_layout(6, CA_V1_TABLE)
    gene = random_chromosome(layout, CA_V1_TABLE, 1, None, rng).gene(0)
    tree = translate(gene, CA_V1_TABLE)
    position = len(tree) + offset
    if position >= layout.coding_len:
        return
    changed = gene[:position] + ("a" if gene[position] != "a" else "b") + gene[position + 1:]
    assert translate(changed, CA_V1_TABLE) == tree


def test_parsimonious_regression_gene():
    """*++/**aaaaaaa computes a^4 + a^3 + a^2 + a; at a = 2 that is 30."""
    tree = translate("*++/**aaaaaaa", REGRESSION_TABLE)
    assert eval_numeric(tree, {"a": 2}) == 30.0


def test_division_by_zero_is_a_value():
    """a / (a - a) evaluates to a non-finite value instead of raising."""
    tree = translate("/a-aa", REGRESSION_TABLE)
    assert not np.all(np.isfinite(eval_numeric(tree, {"a": 1})))
    values = eval_numeric(tree, {"a": np.array([1.0, 2.0])})
    assert values.shape == (2,)
    assert not np.all(np.isfinite(values))


def test_square_root_of_negative_is_non_finite():
    """Q(a - b) with a < b is NaN."""
    assert not np.all(np.isfinite(eval_numeric(translate("Q-ab", ALGEBRA_TABLE), {"a": 1, "b": 2})))


def test_unbound_terminal_raises():
    """A terminal without a value is a failure."""
    with pytest.raises(UnboundTerminalError):
        eval_numeric(translate("+ab", ALGEBRA_TABLE), {"a": 1})


def test_bind_constants_in_breadth_first_order():
    """Placeholders take A[6], A[3], A[8] in that order."""
    layout = gene_layout(7, CONSTANTS_TABLE, dc_enabled=True)
    chromosome = parse_karva(DC_TEXT, CONSTANTS_TABLE, layout)
    tree = sub_trees(chromosome, layout, CONSTANTS_TABLE)[0]
    values = [node.value for node in tree.nodes if node.value is not None]
    assert values == [0.43, 0.05, 0.576]
    expected = 0.43 * (0.05 * ((1 + 1) * 0.576))
    assert eval_numeric(tree, {"a": 1}) == pytest.approx(expected)


def test_bind_constants_without_placeholders():
    """A tree with no placeholder is returned unchanged."""
    tree = translate("+aa", CONSTANTS_TABLE)
    assert bind_constants(tree, "0123", tuple(range(10)), CONSTANTS_TABLE) is tree


def test_function_linker():
    """Two sub-trees under + share one new root."""
    left = translate("*aa", REGRESSION_TABLE)
    right = translate("a", REGRESSION_TABLE)
    linked = link([left, right], parse_linker("+"))
    assert linked.root.symbol == "+"
    assert to_kexpression(linked) == "+*aaa"
    assert eval_numeric(linked, {"a": 3}) == 12.0


def test_function_linker_folds_left():
    """Three genes under - read ((g1 - g2) - g3)."""
    trees = [translate(s, REGRESSION_TABLE) for s in ("a", "*aa", "a")]
    assert eval_numeric(link(trees, parse_linker("-")), {"a": 3}) == 3 - 9 - 3


def test_single_sub_tree_links_to_itself():
    """One gene needs no linking."""
    tree = translate("*aa", REGRESSION_TABLE)
    assert link([tree], parse_linker("I")) is tree


def test_cascade_of_27_terminals():
    """27 one-node genes linked 3 by 3 with IF: 40 nodes, depth 4, the first 13 are IF."""
    trees = [translate(symbol, MUX_TABLE) for symbol in "abc12345678abc12345678abc12"]
    linked = link(trees, parse_linker("cascade:I:3"))
    assert len(linked) == 40
    assert linked.depth() == 4
    assert [node.symbol for node in linked.nodes[:13]] == ["I"] * 13
    assert all(node.arity == 0 for node in linked.nodes[13:])


def test_incompatible_gene_counts_are_rejected():
    """Folds and cascades need compatible gene counts."""
    trees = [translate("a", MUX_TABLE)] * 2
    with pytest.raises(ValueError):
        link(trees, parse_linker("I"))
    with pytest.raises(ValueError):
        link([translate("a", MUX_TABLE)] * 4, parse_linker("cascade:I:3"))
    with pytest.raises(ValueError):
        parse_linker("cascade:I")
    with pytest.raises(ValueError):
        parse_linker("%")


def test_linker_text_round_trip():
    """Linkers print the way they are parsed."""
    for text in ("+", "I", "cascade:I:3", "sequential"):
        assert str(parse_linker(text)) == text
    assert parse_linker("sequential") == Linker("sequential", None, 0)


def test_sequential_linker_keeps_gene_order():
    """Sequential linking hangs the sub-plans under one root in gene order."""
    trees = [translate(s, MUX_TABLE) for s in "abc"]
    linked = link(trees, parse_linker("sequential"))
    assert to_kexpression(linked) == ";abc"


@pytest.mark.parametrize("x, y, z", list(itertools.product([False, True], repeat=3)))
def test_if_and_majority(x, y, z):
    """I(x, y, z) = y if x else z; M is the majority of three."""
    bindings = {"c": x, "b": y, "a": z}
    assert eval_boolean(translate("Icba", GP_RULE_TABLE), bindings) == (y if x else z)
    assert eval_boolean(translate("Mcba", GP_RULE_TABLE), bindings) == (x + y + z >= 2)


def test_boolean_function_set_is_complete():
    """All eight boolean functions are available."""
    assert set(BOOLEAN_FUNCTIONS) == set("NAOXDRIM")


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_boolean_evaluation_matches_naive_evaluator(seed):
    """Vectorised evaluation equals plain recursion on all 128 rows."""
    layout = gene_layout(10, GP_RULE_TABLE)
    gene = random_chromosome(layout, GP_RULE_TABLE, 1, None, np.random.default_rng(seed)).gene(0)
    tree = translate(gene, GP_RULE_TABLE)
    index = np.arange(128)
    bindings = {s: ((index >> (6 - k)) & 1).astype(bool) for k, s in enumerate(NEIGHBORHOOD)}
    outputs = np.broadcast_to(eval_boolean(tree, bindings), (128,))
    for row in range(128):
        values = {s: bool(bindings[s][row]) for s in NEIGHBORHOOD}
        assert bool(outputs[row]) == bool(_naive_boolean(tree, 0, values))


@pytest.mark.parametrize("linker_text", ["O", "A", "+", "*"])
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_commutative_linker_ignores_gene_order(linker_text, seed):
    """With OR, AND, + or * as linker, permuting genes never changes the outputs."""
    rng = np.random.default_rng(seed)
    linker = parse_linker(linker_text)
    if linker_text in "OA":
        table, layout = GP_RULE_TABLE, gene_layout(5, GP_RULE_TABLE)
        index = np.arange(128)
        bindings = {s: ((index >> (6 - k)) & 1).astype(bool) for k, s in enumerate(NEIGHBORHOOD)}
        evaluate = eval_boolean
    else:
        table, layout = REGRESSION_TABLE, gene_layout(6, REGRESSION_TABLE)
        bindings = {"a": np.linspace(-3.7, 19.3, 128)}
        evaluate = eval_numeric
    chromosome = random_chromosome(layout, table, 4, None, rng)
    permuted = chromosome.with_genes([chromosome.gene(i) for i in rng.permutation(4)])
    original = evaluate(express(chromosome, layout, table, linker), bindings)
    shuffled = evaluate(express(permuted, layout, table, linker), bindings)
    assert np.array_equal(np.broadcast_to(original, (128,)), np.broadcast_to(shuffled, (128,)),
                          equal_nan=linker_text in "+*")


def test_format_tree_indents_children():
    """The printed tree starts at the root and indents each level."""
    text = format_tree(translate("Q*+-abcd", ALGEBRA_TABLE))
    lines = text.splitlines()
    assert lines[0] == "Q"
    assert lines[1] == "  *"
    assert "      a" in lines


def test_express_multigene_chromosome():
    """A three-gene regression chromosome sums its sub-trees."""
    layout = gene_layout(6, REGRESSION_TABLE)
    chromosome = Chromosome("*++/**aaaaaaa" + "-aaaaaaaaaaaa" * 2, 3)
    tree = express(chromosome, layout, REGRESSION_TABLE, parse_linker("+"))
    assert eval_numeric(tree, {"a": 2}) == 30.0
