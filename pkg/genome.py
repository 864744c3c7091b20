"""Chromosome structure: symbol tables, head/tail/Dc layout, genesis, ORFs and Karva text."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

GENE_DELIMITER = "|"
MINUS_SIGNS = {"−": "-"}


class KarvaError(ValueError):
    """Malformed Karva text; ``position`` is the offending character offset."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


# -------------------- SYMBOL TABLE --------------------
@dataclass(frozen=True)
class SymbolTable:
    functions: tuple = ()
    terminals: tuple = ()
    constant_placeholder: str | None = None
    constant_symbols: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple((s, int(n)) for s, n in self.functions))
        object.__setattr__(self, "terminals", tuple(self.terminals))
        object.__setattr__(self, "constant_symbols", tuple(self.constant_symbols))

        symbols = [s for s, _ in self.functions] + list(self.terminals) + list(self.constant_symbols)
        if self.constant_placeholder is not None:
            symbols.append(self.constant_placeholder)
        for symbol in symbols:
            if not isinstance(symbol, str) or len(symbol) != 1:
                raise ValueError(f"Symbols must be single characters, got {symbol!r}")
        if len(set(symbols)) != len(symbols):
            raise ValueError("Symbols must be distinct across functions, terminals and constants")
        for symbol, arity in self.functions:
            if arity < 1:
                raise ValueError(f"Function {symbol!r} must take at least one argument")
        if (self.constant_placeholder is None) != (not self.constant_symbols):
            raise ValueError("Constant placeholder and constant symbols must be given together")
        if not self.terminals and self.constant_placeholder is None:
            raise ValueError("A symbol table needs at least one terminal")

    @cached_property
    def arities(self):
        arities = {symbol: arity for symbol, arity in self.functions}
        for symbol in self.terminals + self.constant_symbols:
            arities[symbol] = 0
        if self.constant_placeholder is not None:
            arities[self.constant_placeholder] = 0
        return arities

    @property
    def function_symbols(self):
        return tuple(s for s, _ in self.functions)

    @property
    def max_arity(self):
        if not self.functions:
            raise ValueError("max_arity is undefined for an empty function set")
        return max(n for _, n in self.functions)

    @property
    def dc_enabled(self):
        return self.constant_placeholder is not None

    @cached_property
    def tail_alphabet(self):
        placeholder = (self.constant_placeholder,) if self.dc_enabled else ()
        return self.terminals + placeholder

    @cached_property
    def head_alphabet(self):
        return self.function_symbols + self.tail_alphabet

    def arity(self, symbol):
        return self.arities[symbol]

    def is_function(self, symbol):
        return self.arities.get(symbol, 0) > 0

    def constant_index(self, symbol):
        return self.constant_symbols.index(symbol)


# -------------------- LAYOUT --------------------
@dataclass(frozen=True)
class GeneLayout:
    head_len: int
    tail_len: int
    dc_len: int = 0

    @property
    def coding_len(self):
        return self.head_len + self.tail_len

    @property
    def gene_len(self):
        return self.head_len + self.tail_len + self.dc_len

    def chromosome_len(self, num_genes):
        return num_genes * self.gene_len

    def region(self, offset):
        if offset < self.head_len:
            return "head"
        if offset < self.coding_len:
            return "tail"
        return "dc"


def tail_length(h, max_arity):
    """t = h(n - 1) + 1."""
    if h < 1 or max_arity < 1:
        raise ValueError("Head length and maximum arity must be at least 1")
    return h * (max_arity - 1) + 1


def gene_layout(h, symbol_table, dc_enabled=False):
    if h < 1:
        raise ValueError(f"Head length must be at least 1, got {h}")
    if dc_enabled and not symbol_table.dc_enabled:
        raise ValueError("Dc domain requested but the symbol table has no constant symbols")
    if not symbol_table.functions:
        # terminal-only genes: the whole gene is a head of terminals
        return GeneLayout(head_len=h, tail_len=0, dc_len=0)
    t = tail_length(h, symbol_table.max_arity)
    return GeneLayout(head_len=h, tail_len=t, dc_len=t if dc_enabled else 0)


# -------------------- CONSTANTS --------------------
@dataclass(frozen=True)
class ConstantRange:
    low: float = -1.0
    high: float = 1.0
    integer: bool = False

    def __post_init__(self):
        if self.high < self.low:
            raise ValueError(f"Constant range is empty: [{self.low}, {self.high}]")

    def sample(self, rng, size):
        if self.integer:
            values = rng.integers(int(self.low), int(self.high) + 1, size=size)
        else:
            values = rng.uniform(self.low, self.high, size=size)
        return tuple(float(v) for v in values)

    def contains(self, value):
        return self.low <= value <= self.high


# -------------------- CHROMOSOME --------------------
@dataclass(frozen=True)
class Chromosome:
    symbols: str
    num_genes: int = 1
    constants: tuple = field(default=())

    def __post_init__(self):
        if self.num_genes < 1:
            raise ValueError("A chromosome needs at least one gene")
        if len(self.symbols) % self.num_genes:
            raise ValueError(
                f"Chromosome of length {len(self.symbols)} cannot hold {self.num_genes} equal genes"
            )
        constants = tuple(tuple(float(c) for c in array) for array in self.constants)
        if constants and len(constants) != self.num_genes:
            raise ValueError("There must be one constant array per gene")
        object.__setattr__(self, "constants", constants)

    def __len__(self):
        return len(self.symbols)

    @property
    def gene_len(self):
        return len(self.symbols) // self.num_genes

    def gene(self, index):
        start = index * self.gene_len
        return self.symbols[start:start + self.gene_len]

    @property
    def genes(self):
        return tuple(self.gene(i) for i in range(self.num_genes))

    def gene_constants(self, index):
        return self.constants[index] if self.constants else ()

    def with_genes(self, genes, constants=None):
        genes = tuple(genes)
        if constants is None:
            constants = self.constants
        return Chromosome("".join(genes), len(genes), tuple(constants))


@dataclass(frozen=True)
class Orf:
    gene_index: int
    length: int


def random_gene(layout, symbol_table, rng):
    head = rng.choice(list(symbol_table.head_alphabet), size=layout.head_len)
    parts = ["".join(head)]
    if layout.tail_len:
        parts.append("".join(rng.choice(list(symbol_table.tail_alphabet), size=layout.tail_len)))
    if layout.dc_len:
        parts.append("".join(rng.choice(list(symbol_table.constant_symbols), size=layout.dc_len)))
    return "".join(parts)


def random_chromosome(layout, symbol_table, num_genes, constant_range, rng):
    """Uniformly random legal chromosome; constant arrays drawn once per gene."""
    genes = [random_gene(layout, symbol_table, rng) for _ in range(num_genes)]
    constants = ()
    if layout.dc_len:
        constant_range = constant_range or ConstantRange()
        size = len(symbol_table.constant_symbols)
        constants = tuple(constant_range.sample(rng, size) for _ in range(num_genes))
    return Chromosome("".join(genes), num_genes, constants)


def region_alphabet(layout, symbol_table, offset):
    """Region name and legal symbols at a gene offset."""
    region = layout.region(offset)
    if region == "head":
        return region, symbol_table.head_alphabet
    if region == "tail":
        return region, symbol_table.tail_alphabet
    return region, symbol_table.constant_symbols


def validate(chromosome, layout, symbol_table):
    """List of region-rule violations; empty when the chromosome is valid."""
    expected = layout.chromosome_len(chromosome.num_genes)
    if len(chromosome.symbols) != expected:
        return [f"length {len(chromosome.symbols)} != {chromosome.num_genes} x {layout.gene_len}"]

    violations = []
    for g, gene in enumerate(chromosome.genes):
        for offset, symbol in enumerate(gene):
            region, alphabet = region_alphabet(layout, symbol_table, offset)
            if symbol not in alphabet:
                violations.append(f"gene {g} offset {offset}: {symbol!r} not allowed in {region}")
    if layout.dc_len:
        size = len(symbol_table.constant_symbols)
        if len(chromosome.constants) != chromosome.num_genes:
            violations.append("missing constant arrays")
        for g, array in enumerate(chromosome.constants):
            if len(array) != size:
                violations.append(f"gene {g}: constant array has {len(array)} entries, expected {size}")
    elif chromosome.constants:
        violations.append("constant arrays present without a Dc domain")
    return violations


def orf_length(gene, symbol_table, gene_index=0):
    needed = 1
    for position, symbol in enumerate(gene):
        needed += symbol_table.arity(symbol) - 1
        if needed == 0:
            return Orf(gene_index, position + 1)
    raise ValueError(f"Gene {gene_index} does not code a complete expression tree")


# -------------------- KARVA TEXT --------------------
def _parse_constants(body, position):
    for sign, ascii_sign in MINUS_SIGNS.items():
        body = body.replace(sign, ascii_sign)
    if not body.strip():
        return ()
    values = []
    for item in body.split(","):
        try:
            values.append(float(item.strip()))
        except ValueError:
            raise KarvaError(f"Malformed constant {item.strip()!r}", position)
    return tuple(values)


def _split_genes(text, layout):
    """Chunks of (offset, gene text, constants text or None)."""
    if GENE_DELIMITER not in text and "[" not in text and layout is not None:
        if layout.gene_len and len(text) % layout.gene_len == 0 and len(text) > layout.gene_len:
            size = layout.gene_len
            return [(i, text[i:i + size], None) for i in range(0, len(text), size)]

    chunks = []
    offset = 0
    for chunk in text.split(GENE_DELIMITER):
        if "[" in chunk:
            bracket = chunk.index("[")
            if not chunk.endswith("]"):
                raise KarvaError("Constant array must end with ']'", offset + len(chunk))
            chunks.append((offset, chunk[:bracket], (offset + bracket, chunk[bracket + 1:-1])))
        else:
            chunks.append((offset, chunk, None))
        offset += len(chunk) + 1
    return chunks


def parse_karva(text, symbol_table, layout=None):
    """Parse genes separated by '|', each optionally followed by '[c0,c1,...]'."""
    text = "".join(text.split())
    if not text:
        raise KarvaError("Empty chromosome text", 0)

    genes, arrays = [], []
    for offset, gene, constants in _split_genes(text, layout):
        if not gene:
            raise KarvaError("Empty gene", offset)
        for i, symbol in enumerate(gene):
            if symbol not in symbol_table.arities:
                raise KarvaError(f"Unknown symbol {symbol!r}", offset + i)
        if layout is not None:
            if len(gene) != layout.gene_len:
                raise KarvaError(
                    f"Gene {len(genes)} has length {len(gene)}, expected {layout.gene_len}", offset
                )
            for i, symbol in enumerate(gene):
                region, alphabet = region_alphabet(layout, symbol_table, i)
                if symbol not in alphabet:
                    raise KarvaError(f"Symbol {symbol!r} not allowed in {region}", offset + i)
        genes.append(gene)
        if constants is not None:
            arrays.append(_parse_constants(constants[1], constants[0]))

    if len({len(g) for g in genes}) != 1:
        raise KarvaError("All genes must have the same length")
    if arrays and len(arrays) != len(genes):
        raise KarvaError("Either every gene or no gene carries a constant array")
    if symbol_table.dc_enabled and layout is not None and layout.dc_len:
        size = len(symbol_table.constant_symbols)
        if not arrays:
            raise KarvaError("Dc genes need constant arrays")
        for g, array in enumerate(arrays):
            if len(array) != size:
                raise KarvaError(f"Gene {g} constant array has {len(array)} entries, expected {size}")
    return Chromosome("".join(genes), len(genes), tuple(arrays))


def format_karva(chromosome):
    parts = []
    for g, gene in enumerate(chromosome.genes):
        if chromosome.constants:
            values = ",".join(repr(float(c)) for c in chromosome.constants[g])
            gene = f"{gene}[{values}]"
        parts.append(gene)
    return GENE_DELIMITER.join(parts)
