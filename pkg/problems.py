"""Benchmark problems: symbolic regression, sequence induction, block stacking,
density classification with cellular automata, and boolean concept learning.

Each problem owns its symbol table, its default linker, the way it draws
fitness cases (once, or afresh every generation) and the way it scores an
expressed chromosome against them.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from joblib import Parallel, delayed

from expression import ExprTree, eval_boolean, eval_numeric, express, parse_linker, sub_trees
from fitness import FitnessCase, FitnessSpec, fitness_hits
from genome import ConstantRange, SymbolTable

logger = logging.getLogger(__name__)

SUCCESS_TOLERANCE = 1e-6

# ===================== SYMBOL TABLES =====================
ARITHMETIC = (("+", 2), ("-", 2), ("*", 2), ("/", 2))
NEIGHBORHOOD = ("c", "b", "a", "u", "1", "2", "3")
MUX_ADDRESS = ("a", "b", "c")
MUX_DATA = ("1", "2", "3", "4", "5", "6", "7", "8")

REGRESSION_TABLE = SymbolTable(functions=ARITHMETIC, terminals=("a",))
CONSTANTS_TABLE = SymbolTable(
    functions=(("+", 2), ("-", 2), ("*", 2)),
    terminals=("a",),
    constant_placeholder="?",
    constant_symbols=tuple("0123456789"),
)
BLOCKS_TABLE = SymbolTable(functions=(("C", 1), ("R", 1), ("N", 1), ("A", 2)), terminals=("u", "t", "p"))
CA_V1_TABLE = SymbolTable(functions=(("A", 2), ("O", 2), ("N", 1), ("I", 3)), terminals=NEIGHBORHOOD)
CA_RANKED_TABLE = SymbolTable(functions=(("I", 3), ("M", 3)), terminals=NEIGHBORHOOD)
GP_RULE_TABLE = SymbolTable(
    functions=(("N", 1), ("A", 2), ("O", 2), ("X", 2), ("D", 2), ("R", 2), ("I", 3), ("M", 3)),
    terminals=NEIGHBORHOOD,
)
MUX_TABLE = SymbolTable(functions=(), terminals=MUX_ADDRESS + MUX_DATA)
# free-form arithmetic for inspecting chromosomes outside any benchmark
ALGEBRA_TABLE = SymbolTable(functions=ARITHMETIC + (("Q", 1),), terminals=("a", "b", "c", "d"))

# ===================== FITNESS CASES =====================
REGRESSION_INPUTS = (2.81, 6, 7.043, 8, 10, 11.38, 12, 14, 15, 20)
SEQUENCE_INPUTS = tuple(range(1, 11))


def regression_target(a):
    """y = a^4 + a^3 + a^2 + a."""
    return a ** 4 + a ** 3 + a ** 2 + a


def sequence_target(a):
    """N = 5a^4 + 4a^3 + 3a^2 + 2a + 1."""
    return 5 * a ** 4 + 4 * a ** 3 + 3 * a ** 2 + 2 * a + 1


# -------------------- PROBLEM BASE --------------------
class Problem:
    """A benchmark: symbol table, linker, fitness cases and scoring."""

    name = ""
    static_cases = True
    max_fitness = 0.0

    def __init__(self, table, linker):
        self.table = table
        self.linker = parse_linker(linker) if isinstance(linker, str) else linker

    def sample_cases(self, rng):
        raise NotImplementedError

    def case_count(self, cases):
        return len(cases)

    def evaluate(self, chromosome, layout, cases):
        raise NotImplementedError

    def express(self, chromosome, layout):
        return express(chromosome, layout, self.table, self.linker)

    def is_solution(self, fitness):
        return fitness >= self.max_fitness - SUCCESS_TOLERANCE


# ===================== SYMBOLIC REGRESSION / SEQUENCE INDUCTION =====================
class RegressionProblem(Problem):
    def __init__(self, name, table, cases, fitness, linker="+", constant_range=None):
        super().__init__(table, linker)
        self.name = name
        self.cases = tuple(cases)
        self.fitness = fitness
        self.constant_range = constant_range
        self.bindings = {"a": np.asarray([case.inputs["a"] for case in self.cases], dtype=float)}
        self.targets = np.asarray([case.target for case in self.cases], dtype=float)
        self.max_fitness = fitness.max_fitness(len(self.cases))

    def sample_cases(self, rng):
        return self.cases

    def evaluate(self, chromosome, layout, cases):
        outputs = eval_numeric(self.express(chromosome, layout), self.bindings)
        return self.fitness.score(outputs, self.targets)


def make_regression_problem(fitness=None, linker="+"):
    cases = [FitnessCase({"a": a}, regression_target(a)) for a in REGRESSION_INPUTS]
    fitness = fitness or FitnessSpec("absolute", 100.0, 0.01)
    return RegressionProblem("sr", REGRESSION_TABLE, cases, fitness, linker)


def make_sequence_problem(with_constants=False, fitness=None, linker="+", constant_range=None):
    cases = [FitnessCase({"a": a}, sequence_target(a)) for a in SEQUENCE_INPUTS]
    fitness = fitness or FitnessSpec("relative", 20.0, 0.0)
    if with_constants:
        constant_range = constant_range or ConstantRange(0, 3, integer=True)
        return RegressionProblem("si-rnc", CONSTANTS_TABLE, cases, fitness, linker, constant_range)
    return RegressionProblem("si", REGRESSION_TABLE, cases, fitness, linker)


# ===================== BLOCK STACKING =====================
GOAL_WORD = "universal"
LOOP_LIMIT = 20


@dataclass
class BlockWorld:
    goal: str
    stack: list = field(default_factory=list)
    table: Counter = field(default_factory=Counter)

    @classmethod
    def scattered(cls, goal, stacked=()):
        """World with ``stacked`` (bottom to top) on the stack and the remaining goal letters on the table."""
        table = Counter(goal)
        table.subtract(stacked)
        if any(n < 0 for n in table.values()):
            raise ValueError(f"Stack {''.join(stacked)!r} uses letters not in {goal!r}")
        return cls(goal, list(stacked), +table)

    def copy(self):
        return BlockWorld(self.goal, list(self.stack), Counter(self.table))

    def letters(self):
        return Counter(self.stack) + self.table

    def is_correct(self):
        return self.stack == list(self.goal[:len(self.stack)])

    def is_complete(self):
        return "".join(self.stack) == self.goal

    def top(self):
        return self.stack[-1] if self.stack else False

    def next_needed(self):
        if not self.is_correct() or self.is_complete():
            return False
        return self.goal[len(self.stack)]

    def move_to_stack(self, label):
        if isinstance(label, str) and self.table[label] > 0:
            self.table[label] -= 1
            self.table = +self.table
            self.stack.append(label)
            return True
        return False

    def remove_from_stack(self, label):
        if self.stack and isinstance(label, str) and label == self.stack[-1]:
            self.table[self.stack.pop()] += 1
            return True
        return False


def _truthy(value):
    return value is not False and value is not None


class _PlanRun:
    """One execution of a sub-plan; each loop node runs once, deepest loops first."""

    def __init__(self, tree, world):
        self.tree = tree
        self.world = world
        self.loops = {}

    def execute(self):
        for index in self._loop_order():
            self.loops[index] = self._loop(index)
        return self._visit(0)

    def _loop_order(self):
        depth = [0] * len(self.tree.nodes)
        for i, node in enumerate(self.tree.nodes):
            for child in node.children:
                depth[child] = depth[i] + 1
        loops = [i for i, node in enumerate(self.tree.nodes) if node.symbol == "A"]
        return sorted(loops, key=lambda i: (-depth[i], i))

    def _loop(self, index):
        body, predicate = self.tree.nodes[index].children
        for _ in range(LOOP_LIMIT):
            self._visit(body)
            if _truthy(self._visit(predicate)):
                return True
        return False

    def _visit(self, index):
        node = self.tree.nodes[index]
        world = self.world
        symbol = node.symbol
        if symbol == "u":
            return world.top()
        if symbol == "t":
            return world.is_correct()
        if symbol == "p":
            return world.next_needed()
        if symbol == "A":
            return self.loops[index]
        argument = self._visit(node.children[0])
        if symbol == "C":
            return world.move_to_stack(argument)
        if symbol == "R":
            return world.remove_from_stack(argument)
        if symbol == "N":
            return not _truthy(argument)
        raise ValueError(f"Unknown plan symbol {symbol!r}")


def execute_plan(sub_trees_, world):
    """Run the sub-plans in gene order against a copy of the world."""
    world = world.copy()
    for tree in sub_trees_:
        _PlanRun(tree, world).execute()
    return world


def block_score(world):
    if not world.stack:
        return 1
    if world.is_complete():
        return 3
    if world.is_correct():
        return 2
    return 0


def block_fitness(plan, cases):
    return float(sum(block_score(execute_plan(plan, world)) for world in cases))


def random_block_cases(goal, rng):
    """An empty stack plus one configuration with k stacked letters for each k = 1..len(goal)."""
    cases = [BlockWorld.scattered(goal)]
    for k in range(1, len(goal) + 1):
        order = rng.permutation(len(goal))[:k]
        cases.append(BlockWorld.scattered(goal, [goal[i] for i in order]))
    return cases


class BlockStackingProblem(Problem):
    name = "blocks"
    static_cases = False

    def __init__(self, goal=GOAL_WORD, linker="sequential"):
        super().__init__(BLOCKS_TABLE, linker)
        self.goal = goal
        self.max_fitness = 3.0 * len(goal) + 3.0

    def sample_cases(self, rng):
        return random_block_cases(self.goal, rng)

    def evaluate(self, chromosome, layout, cases):
        return block_fitness(sub_trees(chromosome, layout, self.table), cases)


# ===================== CELLULAR AUTOMATA =====================
LATTICE_SIZE = 149
RADIUS = 3
CHUNK_SIZE = 1000


@dataclass(frozen=True)
class RuleTable:
    """128 output bits in lexicographic neighborhood order (c b a u 1 2 3, c most significant)."""

    bits: str

    def __post_init__(self):
        bits = "".join(self.bits.split())
        if len(bits) != 128 or set(bits) - {"0", "1"}:
            raise ValueError("A rule table is 128 characters of 0 and 1 (16 octets may be space separated)")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_array(cls, outputs):
        return cls("".join("1" if bit else "0" for bit in np.asarray(outputs, dtype=bool)))

    @cached_property
    def array(self):
        return np.frombuffer(self.bits.encode(), dtype=np.uint8) - ord("0")

    def output(self, neighborhood):
        return int(self.bits[neighborhood])

    def to_string(self, grouped=True):
        if not grouped:
            return self.bits
        return " ".join(self.bits[i:i + 8] for i in range(0, 128, 8))


def neighborhood_bindings():
    index = np.arange(128)
    return {symbol: ((index >> (6 - k)) & 1).astype(bool) for k, symbol in enumerate(NEIGHBORHOOD)}


def tree_to_rule_table(tree):
    outputs = eval_boolean(tree, neighborhood_bindings())
    return RuleTable.from_array(np.broadcast_to(outputs, (128,)))


def _rule_from_function(function):
    bits = neighborhood_bindings()
    values = {s: bits[s].astype(int) for s in NEIGHBORHOOD}
    return RuleTable.from_array(function(values))


def gkl_rule_table():
    """Gacs-Kurdyumov-Levin: majority of (u, a, c) when u is 0, of (u, 1, 3) when u is 1."""
    return _rule_from_function(
        lambda v: np.where(v["u"] == 0, v["a"] & v["c"], v["1"] | v["3"])
    )


def majority_rule_table():
    return _rule_from_function(lambda v: sum(v[s] for s in NEIGHBORHOOD) >= 4)


KNOWN_RULES = {
    "gep1": RuleTable(
        "00010001 00000000 01010101 00000000 00010001 00001111 01010101 00001111 "
        "00010001 11111111 01010101 11111111 00010001 11111111 01010101 11111111"
    ),
    "gep2": RuleTable(
        "00000000 01010101 00000000 01110111 00000000 01010101 00000000 01110111 "
        "00001111 01010101 00001111 01110111 11111111 01010101 11111111 01110111"
    ),
    "gp": RuleTable(
        "00000101 00000000 01010101 00000101 00000101 00000000 01010101 00000101 "
        "01010101 11111111 01010101 11111111 01010101 11111111 01010101 11111111"
    ),
    "gkl": gkl_rule_table(),
    "majority": majority_rule_table(),
}


@dataclass(frozen=True, eq=False)
class CaState:
    cells: np.ndarray

    @property
    def size(self):
        return len(self.cells)

    def density(self):
        return float(np.mean(self.cells))


@dataclass(frozen=True, eq=False)
class CaOutcome:
    final: np.ndarray
    classification: str
    alternator: bool


def _step(table, states):
    padded = np.concatenate([states[:, -RADIUS:], states, states[:, :RADIUS]], axis=1)
    n = states.shape[1]
    index = np.zeros_like(states)
    for k in range(2 * RADIUS + 1):
        index |= padded[:, k:k + n] << (2 * RADIUS - k)
    return table[index]


def simulate(table, states, steps):
    """States after ``steps`` synchronous updates and after one more (to spot alternation)."""
    states = np.asarray(states, dtype=np.uint8)
    for _ in range(steps):
        following = _step(table, states)
        if np.array_equal(following, states):
            return states, following
        states = following
    return states, _step(table, states)


def _classify(finals, following):
    ones = finals.all(axis=1)
    zeros = ~finals.any(axis=1)
    alternators = (ones & ~following.any(axis=1)) | (zeros & following.all(axis=1))
    return ones, zeros, alternators


def _as_rule(rule):
    return tree_to_rule_table(rule) if isinstance(rule, ExprTree) else rule


def ca_run(rule, ic, steps=None):
    cells = ic.cells if isinstance(ic, CaState) else np.asarray(ic)
    steps = 2 * len(cells) if steps is None else steps
    finals, following = simulate(_as_rule(rule).array, cells[None, :], steps)
    ones, zeros, alternators = _classify(finals, following)
    classification = "ones" if ones[0] else "zeros" if zeros[0] else "unconverged"
    return CaOutcome(finals[0], classification, bool(alternators[0]))


def ca_spacetime(rule, ic, steps=None):
    """(steps + 1) x N matrix of states, initial configuration first."""
    cells = np.asarray(ic.cells if isinstance(ic, CaState) else ic, dtype=np.uint8)[None, :]
    steps = 2 * cells.shape[1] if steps is None else steps
    table = _as_rule(rule).array
    rows = [cells[0]]
    for _ in range(steps):
        cells = _step(table, cells)
        rows.append(cells[0])
    return np.vstack(rows)


def random_ics(count, size, rng):
    """Unbiased initial configurations: every cell a fair coin."""
    return rng.integers(0, 2, size=(count, size), dtype=np.uint8)


def ca_fitness(rule, ics, variant="v1", steps=None):
    """Score a rule on a batch of ICs, rewarding rules that classify both majorities."""
    ics = np.asarray(ics, dtype=np.uint8)
    count, size = ics.shape
    steps = 2 * size if steps is None else steps
    finals, following = simulate(_as_rule(rule).array, ics, steps)
    ones, zeros, alternators = _classify(finals, following)
    if alternators.any():
        return 0.0
    if ones.all() or zeros.all():
        return 1.0

    majority = 2 * ics.sum(axis=1) > size
    correct = (ones & majority) | (zeros & ~majority)
    hits = int(correct.sum())
    both = bool((correct & majority).any() and (correct & ~majority).any())
    if both:
        if variant == "v1":
            return float(hits + count)
        bonuses = 3 if hits > 17 * count / 20 else 2 if hits > 3 * count / 4 else 1
        return float(hits + bonuses * count)
    if hits:
        return 2.0 if variant == "v1" else float(hits)
    return 1.0


def _correct_in_chunk(table, count, seed, size, steps):
    rng = np.random.default_rng(seed)
    ics = random_ics(count, size, rng)
    finals, _ = simulate(table, ics, steps)
    majority = 2 * ics.sum(axis=1) > size
    correct = (majority & finals.all(axis=1)) | (~majority & ~finals.any(axis=1))
    return int(correct.sum())


def rule_performance(rule, num_ics, rng, size=LATTICE_SIZE, steps=None, n_jobs=1):
    """Fraction of unbiased ICs driven to the correct uniform state."""
    if num_ics < 1:
        raise ValueError("At least one initial configuration is needed")
    if size % 2 == 0:
        raise ValueError("Lattice size must be odd so that every IC has a strict majority")
    steps = 2 * size if steps is None else steps
    table = _as_rule(rule).array
    counts = [CHUNK_SIZE] * (num_ics // CHUNK_SIZE)
    if num_ics % CHUNK_SIZE:
        counts.append(num_ics % CHUNK_SIZE)
    seeds = np.random.SeedSequence(int(rng.integers(2 ** 63))).spawn(len(counts))
    logger.info(f"Measuring rule performance over {num_ics} ICs ({size}x{steps})")
    correct = Parallel(n_jobs=n_jobs)(
        delayed(_correct_in_chunk)(table, count, seed, size, steps) for count, seed in zip(counts, seeds)
    )
    return sum(correct) / num_ics


class CellularAutomatonProblem(Problem):
    static_cases = False

    def __init__(self, variant="v1", num_ics=None, size=LATTICE_SIZE, steps=None, linker=None):
        if variant not in ("v1", "ranked"):
            raise ValueError(f"Unknown density-classification variant {variant!r}")
        table = CA_V1_TABLE if variant == "v1" else CA_RANKED_TABLE
        super().__init__(table, linker or "I")
        self.name = f"ca-{variant}"
        self.variant = variant
        self.num_ics = num_ics or (25 if variant == "v1" else 100)
        self.size = size
        self.steps = 2 * size if steps is None else steps
        bonuses = 1 if variant == "v1" else 3
        self.max_fitness = float(self.num_ics * (1 + bonuses))

    def sample_cases(self, rng):
        return random_ics(self.num_ics, self.size, rng)

    def evaluate(self, chromosome, layout, cases):
        rule = tree_to_rule_table(self.express(chromosome, layout))
        return ca_fitness(rule, cases, self.variant, self.steps)


# ===================== BOOLEAN CONCEPT LEARNING =====================
MUX_SAMPLES_PER_ADDRESS = 20
MUX_BLOCK_BONUS = 180


def mux11(address_bits, data_bits):
    """Value of the data register selected by the 3-bit address (a0 most significant).

    Works on single cases or on arrays of cases, with the 8 data bits on the last axis.
    """
    a0, a1, a2 = (np.asarray(bit, dtype=int) for bit in address_bits)
    selected = (4 * a0 + 2 * a1 + a2)[..., None]
    return np.take_along_axis(np.asarray(data_bits), selected, axis=-1)[..., 0]


class GpRuleProblem(Problem):
    name = "gp-rule"

    def __init__(self, target=None, linker="O"):
        super().__init__(GP_RULE_TABLE, linker)
        self.target = target or KNOWN_RULES["gp"]
        self.bindings = neighborhood_bindings()
        self.targets = self.target.array.astype(bool)
        self.max_fitness = 128.0

    def sample_cases(self, rng):
        return self.targets

    def evaluate(self, chromosome, layout, cases):
        return fitness_hits(eval_boolean(self.express(chromosome, layout), self.bindings), cases)


@dataclass(frozen=True, eq=False)
class MuxCases:
    bindings: dict
    targets: np.ndarray

    def __len__(self):
        return len(self.targets)


class MultiplexerProblem(Problem):
    name = "mux11"
    static_cases = False

    def __init__(self, linker="cascade:I:3"):
        super().__init__(MUX_TABLE, linker)
        self.max_fitness = float(8 * (MUX_SAMPLES_PER_ADDRESS + MUX_BLOCK_BONUS))

    def sample_cases(self, rng):
        n = MUX_SAMPLES_PER_ADDRESS
        address = np.repeat(np.arange(8), n)
        data = rng.integers(0, 2, size=(8 * n, 8)).astype(bool)
        bindings = {
            "a": (address >> 2 & 1).astype(bool),
            "b": (address >> 1 & 1).astype(bool),
            "c": (address & 1).astype(bool),
        }
        for k, symbol in enumerate(MUX_DATA):
            bindings[symbol] = data[:, k]
        return MuxCases(bindings, mux11((bindings["a"], bindings["b"], bindings["c"]), data))

    def score(self, outputs, cases):
        correct = np.broadcast_to(outputs, cases.targets.shape) == cases.targets
        blocks = correct.reshape(8, MUX_SAMPLES_PER_ADDRESS).all(axis=1)
        return float(correct.sum() + MUX_BLOCK_BONUS * blocks.sum())

    def evaluate(self, chromosome, layout, cases):
        return self.score(eval_boolean(self.express(chromosome, layout), cases.bindings), cases)


def make_boolean_problem(kind):
    if kind in ("gp_rule", "gp-rule"):
        return GpRuleProblem()
    if kind == "mux11":
        return MultiplexerProblem()
    raise ValueError(f"Unknown boolean problem {kind!r}")


# ===================== REGISTRY =====================
PROBLEM_IDS = ("sr", "si", "si-rnc", "blocks", "ca-v1", "ca-ranked", "gp-rule", "mux11")


def make_problem(problem_id, fitness=None, linker=None, constant_range=None,
                 num_cases=None, lattice_size=LATTICE_SIZE, ca_steps=None):
    """Build a problem by id; ``None`` options keep the problem's own defaults."""
    linked = {"linker": linker} if linker else {}
    if problem_id == "sr":
        return make_regression_problem(fitness, **linked)
    if problem_id in ("si", "si-rnc"):
        return make_sequence_problem(problem_id == "si-rnc", fitness, constant_range=constant_range, **linked)
    if problem_id == "blocks":
        return BlockStackingProblem(**linked)
    if problem_id in ("ca-v1", "ca-ranked"):
        variant = problem_id.split("-", 1)[1]
        return CellularAutomatonProblem(variant, num_cases, lattice_size, ca_steps, linker)
    if problem_id in ("gp-rule", "mux11"):
        problem = make_boolean_problem(problem_id)
        if linker:
            problem.linker = parse_linker(linker)
        return problem
    raise ValueError(f"Unknown problem {problem_id!r}; choose one of {', '.join(PROBLEM_IDS)}")
