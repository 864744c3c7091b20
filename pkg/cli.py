"""Command line: runs, experiments, sweeps, chromosome inspection and CA rule measurements.

Usage:
    python cli.py run --problem sr --seed 42 --out-dir results
    python cli.py experiment --problem si --runs 100
    python cli.py sweep --problem sr --axis num_genes --values 1,2,3,4,5 --runs 100
    python cli.py express "Q*+-abcd" --set a=3 --set b=1 --set c=5 --set d=1
    python cli.py rule-perf gep1 --ics 10000
    python cli.py spacetime gkl --seed 3
"""

import functools
import logging
import math
import os
import sys

import click
import numpy as np
import pandas as pd

from engine import (ABLATION_PRESETS, SWEEP_AXES, ConfigError, ablation_config, load_config,
                    prepare, run as run_evolution, run_many, runs_frame, sweep as run_sweep)
from expression import eval_numeric, format_tree, link, parse_linker, to_kexpression, translate
from genome import format_karva, orf_length, parse_karva
from problems import (ALGEBRA_TABLE, KNOWN_RULES, LATTICE_SIZE, PROBLEM_IDS, RuleTable, ca_spacetime,
                      random_ics, rule_performance, tree_to_rule_table)
from settings import configure_logging, thread_count

logger = logging.getLogger("gep.cli")

RULE_PROBLEMS = ("ca-v1", "ca-ranked", "gp-rule")
EXIT_SUCCESS, EXIT_EXHAUSTED, EXIT_CONFIG = 0, 1, 2


def reports_errors(command):
    """Turn configuration and parse errors into exit status 2."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ValueError as e:
            logger.error(str(e))
            click.echo(f"❌ {e}", err=True)
            sys.exit(EXIT_CONFIG)

    return wrapper


def _out_path(out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _config_from_options(problem, config_path, seed, generations, population, full=False, ablation=None):
    overrides = {"seed": seed, "generations": generations, "population_size": population}
    if full:
        overrides["stop_on_success"] = False
    config = load_config(problem, config_path, overrides)
    if ablation:
        config = ablation_config(config, ablation)
    return config


def run_options(command):
    options = [
        click.option("--problem", type=click.Choice(PROBLEM_IDS), default=None, help="Benchmark problem id."),
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="key = value run configuration file."),
        click.option("--seed", type=int, default=None, help="Seed (master seed for experiments)."),
        click.option("--generations", type=int, default=None),
        click.option("--population", type=int, default=None),
        click.option("--out-dir", default="results", show_default=True),
    ]
    for option in reversed(options):
        command = option(command)
    return command


# ===================== COMMANDS =====================
@click.group()
@click.option("--verbose", is_flag=True, help="Log run progress.")
def cli(verbose):
    """Gene expression programming benchmarks."""
    configure_logging("INFO" if verbose else None)


@cli.command()
@run_options
@click.option("--full", is_flag=True, help="Keep evolving after a solution is found.")
@click.option("--ablation", type=click.Choice(list(ABLATION_PRESETS)), default=None,
              help="Run with one operator preset only.")
@reports_errors
def run(problem, config_path, seed, generations, population, out_dir, full, ablation):
    """One run; writes stats.csv and best.karva."""
    config = _config_from_options(problem, config_path, seed, generations, population, full, ablation)
    result = run_evolution(config)

    result.to_frame().to_csv(_out_path(out_dir, "stats.csv"), index=False)
    with open(_out_path(out_dir, "best.karva"), "w", encoding="utf-8") as handle:
        handle.write(format_karva(result.best) + "\n")

    if result.success:
        click.echo(f"✅ {config.problem}: solution in generation {result.success_generation} "
                   f"(fitness {result.best_fitness:g} of {result.max_fitness:g})")
        sys.exit(EXIT_SUCCESS)
    click.echo(f"❌ {config.problem}: no solution in {len(result.stats)} generations "
               f"(best fitness {result.best_fitness:g} of {result.max_fitness:g})")
    sys.exit(EXIT_EXHAUSTED)


@cli.command()
@run_options
@click.option("--runs", type=click.IntRange(min=1), default=100, show_default=True)
@reports_errors
def experiment(problem, config_path, seed, generations, population, out_dir, runs):
    """Success rate over independent runs; writes runs.csv."""
    config = _config_from_options(problem, config_path, seed, generations, population)
    results = run_many(config, runs)
    frame = runs_frame(results)
    frame.to_csv(_out_path(out_dir, "runs.csv"), index=False)
    click.echo(f"{config.problem}: success rate {frame['success'].mean():.2f} over {runs} runs")


@cli.command()
@run_options
@click.option("--runs", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--axis", type=click.Choice(list(SWEEP_AXES)), required=True)
@click.option("--values", required=True, help="Comma separated axis values, e.g. 1,2,3.")
@reports_errors
def sweep(problem, config_path, seed, generations, population, out_dir, runs, axis, values):
    """Success rate along one parameter axis; writes sweep.csv."""
    config = _config_from_options(problem, config_path, seed, generations, population)
    try:
        points = [int(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be integers, got {values!r}")
    rates = run_sweep(config, axis, points, runs)
    frame = pd.DataFrame(rates, columns=[axis, "success_rate"])
    frame.to_csv(_out_path(out_dir, "sweep.csv"), index=False)
    for value, rate in rates:
        click.echo(f"{axis}={value}: {rate:.2f}")


def _parse_bindings(items):
    bindings = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"Bindings look like a=3, got {item!r}")
        bindings[name.strip()] = float(value)
    return bindings


@cli.command()
@click.argument("karva")
@click.option("--problem", type=click.Choice(PROBLEM_IDS), default=None,
              help="Interpret with a benchmark's alphabet and layout (free arithmetic otherwise).")
@click.option("--head-len", type=int, default=None, help="Head length (defaults to the problem's).")
@click.option("--linker", default=None, help="Linker for free arithmetic (default +).")
@click.option("--set", "assignments", multiple=True, help="Terminal value for free arithmetic, e.g. a=3.")
@click.option("--seed", type=int, default=0, help="Seed for problems that sample fitness cases.")
@reports_errors
def express(karva, problem, head_len, linker, assignments, seed):
    """Print the expression tree of a chromosome and what it computes."""
    if problem is None:
        chromosome = parse_karva(karva, ALGEBRA_TABLE)
        trees = [translate(gene, ALGEBRA_TABLE) for gene in chromosome.genes]
        for g, gene in enumerate(chromosome.genes):
            click.echo(f"gene {g}: {to_kexpression(trees[g])} (ORF length {orf_length(gene, ALGEBRA_TABLE).length})")
        tree = link(trees, parse_linker(linker or "+"))
        click.echo(format_tree(tree))
        if assignments:
            click.echo(f"value = {eval_numeric(tree, _parse_bindings(assignments)):g}")
        return

    config = load_config(problem, overrides={"head_len": head_len})
    prepared = prepare(config)
    table, layout = prepared.problem.table, prepared.layout
    chromosome = parse_karva(karva, table, layout)
    for g, gene in enumerate(chromosome.genes):
        orf = orf_length(gene[:layout.coding_len], table, g)
        click.echo(f"gene {g}: {gene[:orf.length]} (ORF length {orf.length})")
    tree = prepared.problem.express(chromosome, layout)
    click.echo(format_tree(tree))
    if problem in RULE_PROBLEMS:
        click.echo(f"rule: {tree_to_rule_table(tree).to_string()}")
    cases = prepared.problem.sample_cases(np.random.default_rng(seed))
    fitness = prepared.problem.evaluate(chromosome, layout, cases)
    click.echo(f"fitness: {fitness:g} of {prepared.problem.max_fitness:g}")


def _resolve_rule(rule, problem, head_len):
    if rule in KNOWN_RULES:
        return KNOWN_RULES[rule]
    if set(rule) <= set("01 "):
        return RuleTable(rule)
    config = load_config(problem, overrides={"head_len": head_len})
    prepared = prepare(config)
    chromosome = parse_karva(rule, prepared.problem.table, prepared.layout)
    return tree_to_rule_table(prepared.problem.express(chromosome, prepared.layout))


def rule_options(command):
    options = [
        click.argument("rule"),
        click.option("--problem", type=click.Choice(RULE_PROBLEMS), default="ca-v1", show_default=True,
                     help="Alphabet for rules given as chromosomes."),
        click.option("--head-len", type=int, default=None),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--lattice-size", type=int, default=LATTICE_SIZE, show_default=True),
        click.option("--steps", type=int, default=None, help="Time steps (default 2 x lattice size)."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@cli.command("rule-perf")
@rule_options
@click.option("--ics", type=click.IntRange(min=1), default=10000, show_default=True,
              help="Number of unbiased initial configurations.")
@reports_errors
def rule_perf(rule, problem, head_len, seed, lattice_size, steps, ics):
    """Density-classification accuracy of a rule (name, 128-bit table or chromosome)."""
    table = _resolve_rule(rule, problem, head_len)
    rng = np.random.default_rng(seed)
    accuracy = rule_performance(table, ics, rng, size=lattice_size, steps=steps, n_jobs=thread_count())
    margin = 1.96 * math.sqrt(accuracy * (1 - accuracy) / ics)
    click.echo(f"rule: {table.to_string()}")
    click.echo(f"accuracy: {accuracy:.4f} ± {margin:.4f} over {ics} ICs")


@cli.command()
@rule_options
@click.option("--out-dir", default="results", show_default=True)
@reports_errors
def spacetime(rule, problem, head_len, seed, lattice_size, steps, out_dir):
    """Space-time diagram of one random IC; writes spacetime.csv."""
    table = _resolve_rule(rule, problem, head_len)
    ic = random_ics(1, lattice_size, np.random.default_rng(seed))[0]
    matrix = ca_spacetime(table, ic, steps)
    pd.DataFrame(matrix).to_csv(_out_path(out_dir, "spacetime.csv"), index_label="step")
    final = "ones" if matrix[-1].all() else "zeros" if not matrix[-1].any() else "unconverged"
    click.echo(f"density {ic.mean():.4f} -> {final} after {len(matrix) - 1} steps")


if __name__ == "__main__":
    cli()
