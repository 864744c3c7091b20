"""Translation of genes into expression trees, constant binding, linking and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from genome import orf_length

SEQUENCE_SYMBOL = ";"


class UnboundTerminalError(KeyError):
    pass


# -------------------- FUNCTION SETS --------------------
def _nand(x, y):
    return np.logical_not(np.logical_and(x, y))


def _nor(x, y):
    return np.logical_not(np.logical_or(x, y))


def _if(x, y, z):
    return np.where(x, y, z)


def _majority(x, y, z):
    return np.logical_or(np.logical_and(x, y), np.logical_and(z, np.logical_or(x, y)))


NUMERIC_FUNCTIONS = {
    "+": (2, np.add),
    "-": (2, np.subtract),
    "*": (2, np.multiply),
    "/": (2, np.divide),
    "Q": (1, np.sqrt),
}

BOOLEAN_FUNCTIONS = {
    "N": (1, np.logical_not),
    "A": (2, np.logical_and),
    "O": (2, np.logical_or),
    "X": (2, np.logical_xor),
    "D": (2, _nand),
    "R": (2, _nor),
    "I": (3, _if),
    "M": (3, _majority),
}


# -------------------- TREES --------------------
@dataclass(frozen=True)
class Node:
    symbol: str
    arity: int
    children: tuple = ()
    value: float | None = None
    linked: bool = False  # joins sub-ETs; set by link()


@dataclass(frozen=True)
class ExprTree:
    """Nodes in breadth-first order; node 0 is the root."""

    nodes: tuple

    def __len__(self):
        return len(self.nodes)

    @property
    def root(self):
        return self.nodes[0]

    def depth(self):
        """Number of levels."""
        levels = [1] * len(self.nodes)
        for i, node in enumerate(self.nodes):
            for child in node.children:
                levels[child] = levels[i] + 1
        return max(levels)


def _to_nested(tree, index=0):
    node = tree.nodes[index]
    return node.symbol, node.value, [_to_nested(tree, c) for c in node.children], node.linked


def _from_nested(nested):
    queue = [nested]
    nodes = []
    next_child = 1
    for symbol, value, kids, linked in queue:
        children = tuple(range(next_child, next_child + len(kids)))
        next_child += len(kids)
        queue.extend(kids)
        nodes.append(Node(symbol, len(kids), children, value, linked))
    return ExprTree(tuple(nodes))


def translate(gene, symbol_table):
    """Breadth-first construction of the sub-ET coded by the gene's ORF."""
    orf = orf_length(gene, symbol_table)
    nodes = []
    next_child = 1
    for symbol in gene[:orf.length]:
        arity = symbol_table.arity(symbol)
        nodes.append(Node(symbol, arity, tuple(range(next_child, next_child + arity))))
        next_child += arity
    return ExprTree(tuple(nodes))


def bind_constants(tree, dc, constants, symbol_table):
    """Replace placeholders, top to bottom and left to right, with the constants named in Dc."""
    placeholder = symbol_table.constant_placeholder
    if placeholder is None:
        return tree
    nodes = list(tree.nodes)
    used = 0
    for i, node in enumerate(nodes):
        if node.symbol != placeholder:
            continue
        assert used < len(dc), "more placeholders than Dc symbols"
        name = dc[used]
        used += 1
        nodes[i] = Node(name, 0, (), constants[symbol_table.constant_index(name)])
    return ExprTree(tuple(nodes)) if used else tree


def to_kexpression(tree):
    return "".join(node.symbol for node in tree.nodes)


def format_tree(tree, index=0, indent=0):
    node = tree.nodes[index]
    label = node.symbol if node.value is None else f"{node.symbol}={node.value:g}"
    lines = ["  " * indent + label]
    for child in node.children:
        lines.append(format_tree(tree, child, indent + 1))
    return "\n".join(lines)


# -------------------- LINKING --------------------
LINKER_ARITIES = {"+": 2, "-": 2, "*": 2, "/": 2, "A": 2, "O": 2, "X": 2, "I": 3, "M": 3}


@dataclass(frozen=True)
class Linker:
    kind: str = "function"
    symbol: str | None = "+"
    arity: int = 2

    def __post_init__(self):
        if self.kind not in ("function", "cascade", "sequential"):
            raise ValueError(f"Unknown linker kind {self.kind!r}")
        if self.kind != "sequential" and self.arity < 2:
            raise ValueError("Linking functions take at least two arguments")

    def check(self, num_genes):
        if num_genes == 1 or self.kind == "sequential":
            return
        if self.kind == "function" and (num_genes - 1) % (self.arity - 1):
            raise ValueError(
                f"{num_genes} genes cannot be folded by the {self.arity}-argument linker {self.symbol!r}"
            )
        if self.kind == "cascade":
            count = num_genes
            while count > 1:
                if count % self.arity:
                    raise ValueError(f"{num_genes} genes cannot be cascaded {self.arity} by {self.arity}")
                count //= self.arity

    def __str__(self):
        if self.kind == "sequential":
            return "sequential"
        if self.kind == "cascade":
            return f"cascade:{self.symbol}:{self.arity}"
        return self.symbol


def parse_linker(text):
    """'+', 'I', 'cascade:I:3' or 'sequential'."""
    text = text.strip()
    if text == "sequential":
        return Linker("sequential", None, 0)
    if text.startswith("cascade:"):
        try:
            _, symbol, k = text.split(":")
            return Linker("cascade", symbol, int(k))
        except ValueError:
            raise ValueError(f"Malformed cascade linker {text!r}, expected 'cascade:<symbol>:<k>'")
    if text not in LINKER_ARITIES:
        raise ValueError(f"Unknown linking function {text!r}")
    return Linker("function", text, LINKER_ARITIES[text])


def _combine(symbol, nested_children):
    return symbol, None, list(nested_children), True


def link(sub_trees, linker):
    if not sub_trees:
        raise ValueError("Nothing to link")
    if len(sub_trees) == 1:
        return sub_trees[0]
    linker.check(len(sub_trees))
    parts = [_to_nested(tree) for tree in sub_trees]

    if linker.kind == "sequential":
        return _from_nested(_combine(SEQUENCE_SYMBOL, parts))
    if linker.kind == "function":
        m = linker.arity
        linked = _combine(linker.symbol, parts[:m])
        for start in range(m, len(parts), m - 1):
            linked = _combine(linker.symbol, [linked] + parts[start:start + m - 1])
        return _from_nested(linked)

    k = linker.arity
    while len(parts) > 1:
        parts = [_combine(linker.symbol, parts[i:i + k]) for i in range(0, len(parts), k)]
    return _from_nested(parts[0])


def sub_trees(chromosome, layout, symbol_table):
    trees = []
    for g, gene in enumerate(chromosome.genes):
        tree = translate(gene, symbol_table)
        if layout.dc_len:
            tree = bind_constants(tree, gene[layout.coding_len:], chromosome.gene_constants(g), symbol_table)
        trees.append(tree)
    return trees


def express(chromosome, layout, symbol_table, linker):
    """Phenotype of a chromosome: translated, constant-bound and linked sub-ETs."""
    return link(sub_trees(chromosome, layout, symbol_table), linker)


# -------------------- EVALUATION --------------------
# Linking functions whose result must not depend on gene order.
ORDER_FREE_LINKERS = {"+": np.add, "*": np.multiply}


def _linked_operands(nodes, index, symbol):
    node = nodes[index]
    if not (node.linked and node.symbol == symbol):
        return [index]
    return [leaf for child in node.children for leaf in _linked_operands(nodes, child, symbol)]


def _evaluate(tree, bindings, functions, convert, order_free=None):
    values = {symbol: convert(value) for symbol, value in bindings.items()}
    nodes = tree.nodes
    order_free = order_free or {}

    def visit(index):
        node = nodes[index]
        if node.arity == 0:
            if node.value is not None:
                return convert(node.value)
            try:
                return values[node.symbol]
            except KeyError:
                raise UnboundTerminalError(f"Terminal {node.symbol!r} is not bound")
        if node.linked and node.symbol in order_free:
            # sorted per case before folding, so any gene permutation rounds the same way
            operands = np.broadcast_arrays(*(visit(i) for i in _linked_operands(nodes, index, node.symbol)))
            return order_free[node.symbol].reduce(np.sort(np.stack(operands), axis=0), axis=0)
        function = functions[node.symbol][1]
        return function(*(visit(child) for child in node.children))

    return visit(0)


def _as_float(value):
    return np.asarray(value, dtype=float)


def _as_bool(value):
    return np.asarray(value, dtype=bool)


def eval_numeric(tree, bindings):
    """Evaluate over reals; scalars or arrays of fitness cases. Non-finite results are returned, not raised."""
    with np.errstate(all="ignore"):
        result = _evaluate(tree, bindings, NUMERIC_FUNCTIONS, _as_float, ORDER_FREE_LINKERS)
    if np.ndim(result) == 0:
        return float(result)
    return np.asarray(result, dtype=float)


def eval_boolean(tree, bindings):
    result = _evaluate(tree, bindings, BOOLEAN_FUNCTIONS, _as_bool)
    if np.ndim(result) == 0:
        return bool(result)
    return np.asarray(result, dtype=bool)

