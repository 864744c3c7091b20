"""Evolutionary loop, run configuration and multi-run experiments."""

from __future__ import annotations

import configparser
import logging
from dataclasses import dataclass, fields, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from fitness import FitnessSpec, best_index, roulette_select
from genome import ConstantRange, gene_layout, random_chromosome, validate
from operators import OperatorRates, reproduce_generation
from problems import LATTICE_SIZE, PROBLEM_IDS, make_problem
from settings import thread_count

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


# ===================== RUN CONFIGURATION =====================
@dataclass(frozen=True)
class RunConfig:
    problem: str = "sr"
    population_size: int = 30
    generations: int = 50
    head_len: int = 6
    num_genes: int = 3
    linker: str | None = None
    rates: OperatorRates = OperatorRates()
    fitness: FitnessSpec | None = None
    seed: int = 0
    stop_on_success: bool = True
    point_mutations: float | None = None
    num_cases: int | None = None
    lattice_size: int = LATTICE_SIZE
    ca_steps: int | None = None
    constant_low: float | None = None
    constant_high: float | None = None

    def __post_init__(self):
        if self.problem not in PROBLEM_IDS:
            raise ConfigError(f"Unknown problem {self.problem!r}; choose one of {', '.join(PROBLEM_IDS)}")
        if self.population_size < 1:
            raise ConfigError("Population size must be at least 1")
        if self.generations < 1:
            raise ConfigError("Number of generations must be at least 1")
        if self.head_len < 1:
            raise ConfigError("Head length must be at least 1")
        if self.num_genes < 1:
            raise ConfigError("Number of genes must be at least 1")
        if self.num_cases is not None and self.num_cases < 1:
            raise ConfigError("Number of fitness cases must be at least 1")
        if self.point_mutations is not None and self.point_mutations < 0:
            raise ConfigError("Point mutations per chromosome must not be negative")
        if (self.constant_low is None) != (self.constant_high is None):
            raise ConfigError("constant_low and constant_high must be given together")


def _rates(mutation, one_point=0.0, two_point=0.0, gene_recombination=0.0, transposition=0.0,
           gene_transposition=0.0, lengths=(1, 2, 3), **extra):
    return OperatorRates(
        mutation=mutation,
        one_point=one_point,
        two_point=two_point,
        gene_recombination=gene_recombination,
        is_transposition=transposition,
        ris_transposition=transposition,
        gene_transposition=gene_transposition,
        is_lengths=lengths,
        ris_lengths=lengths,
        **extra,
    )


# Published parameter sets; gp-rule is a reconstruction (h = 15 gives the printed 46-symbol solutions).
PRESETS = {
    "sr": dict(population_size=30, generations=50, head_len=6, num_genes=3, linker="+",
               fitness=FitnessSpec("absolute", 100.0, 0.01),
               rates=_rates(0.051, 0.2, 0.5, 0.1, 0.1, 0.1)),
    "si": dict(population_size=50, generations=100, head_len=6, num_genes=7, linker="+",
               fitness=FitnessSpec("relative", 20.0, 0.0),
               rates=_rates(0.022, 0.7, 0.1, 0.1, 0.1, 0.1)),
    "si-rnc": dict(population_size=50, generations=100, head_len=7, num_genes=8, linker="+",
                   fitness=FitnessSpec("relative", 20.0, 0.0), constant_low=0, constant_high=3,
                   rates=_rates(0.011, 0.5, 0.2, 0.1, 0.1, 0.1, lengths=(1,),
                                dc_mutation=0.01, dc_is_transposition=0.013)),
    "blocks": dict(population_size=30, generations=100, head_len=4, num_genes=3, linker="sequential",
                   rates=_rates(0.074, 0.1, 0.0, 0.7, 0.1, lengths=(1,))),
    "mux11": dict(population_size=250, generations=400, head_len=1, num_genes=27, linker="cascade:I:3",
                  rates=_rates(0.074, 0.7)),
    "ca-v1": dict(population_size=30, generations=50, head_len=17, num_genes=1, num_cases=25,
                  rates=OperatorRates(mutation=0.038, one_point=0.5, is_transposition=0.2,
                                      ris_transposition=0.1)),
    "ca-ranked": dict(population_size=50, generations=50, head_len=4, num_genes=3, linker="I",
                      num_cases=100, rates=_rates(0.051, 0.7)),
    "gp-rule": dict(population_size=30, generations=50, head_len=15, num_genes=1,
                    rates=_rates(0.043, 0.3, 0.3, transposition=0.1)),
}


def default_config(problem_id, seed=0):
    if problem_id not in PRESETS:
        raise ConfigError(f"Unknown problem {problem_id!r}; choose one of {', '.join(PROBLEM_IDS)}")
    return RunConfig(problem=problem_id, seed=seed, **PRESETS[problem_id])


# -------------------- OVERRIDES --------------------
def _parse_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_lengths(value):
    if isinstance(value, str):
        return tuple(int(item) for item in value.replace(",", " ").split())
    return tuple(int(item) for item in value)


def _parse_int(value):
    number = float(value)
    if not number.is_integer():
        raise ValueError(f"not an integer: {value!r}")
    return int(number)


RUN_KEYS = {
    "problem": str,
    "population_size": _parse_int,
    "generations": _parse_int,
    "head_len": _parse_int,
    "num_genes": _parse_int,
    "linker": str,
    "seed": _parse_int,
    "stop_on_success": _parse_bool,
    "point_mutations": float,
    "num_cases": _parse_int,
    "lattice_size": _parse_int,
    "ca_steps": _parse_int,
    "constant_low": float,
    "constant_high": float,
}
RATE_KEYS = {f.name: (_parse_lengths if f.name.endswith("_lengths") else float) for f in fields(OperatorRates)}
FITNESS_KEYS = {"fitness_mode": ("mode", str), "selection_range": ("selection_range", float),
                "precision": ("precision", float)}
CONFIG_KEYS = tuple(RUN_KEYS) + tuple(RATE_KEYS) + tuple(FITNESS_KEYS)


def apply_overrides(config, mapping):
    """New config with flat ``key -> value`` overrides; values may be strings from a file."""
    run, rates, fitness = {}, {}, {}
    for key, value in mapping.items():
        if value is None:
            continue
        try:
            if key in RUN_KEYS:
                run[key] = RUN_KEYS[key](value)
            elif key in RATE_KEYS:
                rates[key] = RATE_KEYS[key](value)
            elif key in FITNESS_KEYS:
                name, convert = FITNESS_KEYS[key]
                fitness[name] = convert(value)
            else:
                raise ConfigError(f"Unknown configuration key {key!r}")
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Bad value for {key}: {e}")

    if run.get("problem", config.problem) != config.problem:
        raise ConfigError("Changing the problem needs a fresh default_config")
    try:
        if rates:
            run["rates"] = replace(config.rates, **rates)
        if fitness:
            if config.fitness is None:
                raise ConfigError(f"Problem {config.problem!r} has a fixed fitness function")
            run["fitness"] = replace(config.fitness, **fitness)
        return replace(config, **run)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e))


def read_config_file(path):
    """``key = value`` lines (``#`` comments) into a flat mapping of strings."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_string("[run]\n" + handle.read(), source=str(path))
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse {path}: {e}")
    return dict(parser["run"])


def load_config(problem=None, path=None, overrides=None):
    """Problem defaults, then file keys, then explicit overrides."""
    mapping = read_config_file(path) if path else {}
    mapping.update({k: v for k, v in (overrides or {}).items() if v is not None})
    problem = problem or mapping.get("problem") or "sr"
    mapping.pop("problem", None)
    return apply_overrides(default_config(problem), mapping)


# -------------------- ABLATION --------------------
ABLATION_PRESETS = {
    "all": None,
    "mutation": dict(mutation=0.051),
    "gene-shuffle": dict(gene_recombination=0.7, gene_transposition=0.2),
    "one-point": dict(one_point=0.7),
    "two-point": dict(two_point=0.7),
    "gene-recombination": dict(gene_recombination=0.7),
}


def ablation_config(config, preset):
    """Switch on only the operators of one preset; 'all' keeps the config's rates."""
    if preset not in ABLATION_PRESETS:
        raise ConfigError(f"Unknown ablation preset {preset!r}; choose one of {', '.join(ABLATION_PRESETS)}")
    rates = ABLATION_PRESETS[preset]
    if rates is None:
        return config
    only = OperatorRates(is_lengths=config.rates.is_lengths, ris_lengths=config.rates.ris_lengths, **rates)
    return replace(config, rates=only)


# ===================== RESULTS =====================
@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    avg_fitness: float


@dataclass(frozen=True)
class RunResult:
    problem: str
    seed: int
    max_fitness: float
    stats: tuple
    best: object
    best_fitness: float
    success: bool
    success_generation: int | None
    evaluations: int
    case_evaluations: int

    def to_frame(self):
        return pd.DataFrame(
            [(s.generation, s.best_fitness, s.avg_fitness) for s in self.stats],
            columns=["generation", "best_fitness", "avg_fitness"],
        )


# ===================== EVOLUTION =====================
@dataclass(frozen=True)
class PreparedRun:
    problem: object
    layout: object
    rates: OperatorRates
    constant_range: ConstantRange | None


def build_problem(config):
    constant_range = None
    if config.constant_low is not None:
        integer = config.problem == "si-rnc"
        constant_range = ConstantRange(config.constant_low, config.constant_high, integer=integer)
    return make_problem(
        config.problem,
        fitness=config.fitness,
        linker=config.linker,
        constant_range=constant_range,
        num_cases=config.num_cases,
        lattice_size=config.lattice_size,
        ca_steps=config.ca_steps,
    )


def prepare(config):
    """Problem, layout and effective rates; inconsistencies surface as ConfigError."""
    try:
        problem = build_problem(config)
        layout = gene_layout(config.head_len, problem.table, dc_enabled=problem.table.dc_enabled)
        problem.linker.check(config.num_genes)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e))

    rates = config.rates
    if config.point_mutations is not None:
        length = layout.chromosome_len(config.num_genes)
        rates = replace(rates, mutation=min(1.0, config.point_mutations / length))
    if (rates.dc_mutation or rates.dc_is_transposition) and not layout.dc_len:
        logger.warning(f"Dc operator rates ignored: {config.problem} has no Dc domain")
    return PreparedRun(problem, layout, rates, getattr(problem, "constant_range", None))


def run(config, initial_population=None):
    """One seeded run of the evolutionary loop."""
    prepared = prepare(config)
    problem, layout = prepared.problem, prepared.layout
    rng = np.random.default_rng(config.seed)
    size = config.population_size

    if initial_population is None:
        population = [
            random_chromosome(layout, problem.table, config.num_genes, prepared.constant_range, rng)
            for _ in range(size)
        ]
    else:
        population = list(initial_population)
        if len(population) != size:
            raise ConfigError(f"Initial population has {len(population)} chromosomes, expected {size}")
        for i, chromosome in enumerate(population):
            violations = validate(chromosome, layout, problem.table)
            if violations or chromosome.num_genes != config.num_genes:
                raise ConfigError(f"Initial chromosome {i} is invalid: {violations or 'wrong gene count'}")

    logger.info(f"Run {config.problem} seed={config.seed} P={size} G={config.generations}")
    stats = []
    best, best_fitness = None, -np.inf
    success_generation = None
    evaluations = case_evaluations = 0
    cases = None

    for generation in range(config.generations):
        if cases is None or not problem.static_cases:
            cases = problem.sample_cases(rng)
        fitnesses = [problem.evaluate(c, layout, cases) for c in population]
        evaluations += size
        case_evaluations += size * problem.case_count(cases)

        top = best_index(fitnesses)
        stats.append(GenerationStats(generation, float(fitnesses[top]), float(np.mean(fitnesses))))
        logger.debug(f"gen {generation}: best={fitnesses[top]:.4f} avg={np.mean(fitnesses):.4f}")
        if fitnesses[top] > best_fitness:
            best, best_fitness = population[top], float(fitnesses[top])

        if success_generation is None and problem.is_solution(fitnesses[top]):
            success_generation = generation
            best, best_fitness = population[top], float(fitnesses[top])
            logger.info(f"Solution found in generation {generation}")
            if config.stop_on_success:
                break
        if generation == config.generations - 1:
            break

        selected = roulette_select(population, fitnesses, rng)
        population = reproduce_generation(
            selected, prepared.rates, layout, problem.table, rng, prepared.constant_range, protected=1
        )

    return RunResult(
        problem=config.problem,
        seed=config.seed,
        max_fitness=float(problem.max_fitness),
        stats=tuple(stats),
        best=best,
        best_fitness=best_fitness,
        success=success_generation is not None,
        success_generation=success_generation,
        evaluations=evaluations,
        case_evaluations=case_evaluations,
    )


# ===================== EXPERIMENTS =====================
SWEEP_AXES = {
    "head_length": "head_len",
    "num_genes": "num_genes",
    "population": "population_size",
    "generations": "generations",
}


def run_seed(master_seed, index):
    """Seed of run ``index`` derived from the experiment's master seed."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1)[0])


def run_many(config, num_runs, n_jobs=None):
    if num_runs < 1:
        raise ConfigError("At least one run is needed")
    prepare(config)
    configs = [replace(config, seed=run_seed(config.seed, i)) for i in range(num_runs)]
    logger.info(f"Experiment {config.problem}: {num_runs} runs")
    return Parallel(n_jobs=n_jobs or thread_count())(delayed(run)(c) for c in configs)


def experiment(config, num_runs, n_jobs=None):
    """Success rate over ``num_runs`` independent runs."""
    results = run_many(config, num_runs, n_jobs)
    return sum(r.success for r in results) / len(results)


def runs_frame(results):
    return pd.DataFrame(
        [(i, r.seed, r.success, r.success_generation, r.best_fitness) for i, r in enumerate(results)],
        columns=["run", "seed", "success", "success_generation", "best_fitness"],
    )


def sweep(config, axis, values, num_runs, n_jobs=None):
    """(value, success rate) at each value of one axis, everything else fixed."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"Unknown sweep axis {axis!r}; choose one of {', '.join(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ConfigError("A sweep needs at least one value")
    points = []
    for value in values:
        point = replace(config, **{SWEEP_AXES[axis]: int(value)})
        rate = experiment(point, num_runs, n_jobs)
        logger.info(f"{axis}={value}: success rate {rate:.2f}")
        points.append((value, rate))
    return points
