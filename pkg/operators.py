"""Genetic operators and the per-generation reproduction pipeline.

Every operator returns new chromosomes of the same length whose region rules
still hold: heads take any symbol, tails take terminals, Dc takes constant
symbols.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from genome import Chromosome, ConstantRange, region_alphabet

DC_IS_LENGTHS = (1, 2, 3)


@dataclass(frozen=True)
class OperatorRates:
    mutation: float = 0.0
    is_transposition: float = 0.0
    ris_transposition: float = 0.0
    gene_transposition: float = 0.0
    one_point: float = 0.0
    two_point: float = 0.0
    gene_recombination: float = 0.0
    dc_mutation: float = 0.0
    dc_is_transposition: float = 0.0
    is_lengths: tuple = (1, 2, 3)
    ris_lengths: tuple = (1, 2, 3)

    def __post_init__(self):
        for name in ("mutation", "is_transposition", "ris_transposition", "gene_transposition",
                     "one_point", "two_point", "gene_recombination", "dc_mutation",
                     "dc_is_transposition"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"Rate {name} must be between 0 and 1, got {rate}")
        for name in ("is_lengths", "ris_lengths"):
            lengths = tuple(int(n) for n in getattr(self, name))
            if not lengths or min(lengths) < 1:
                raise ValueError(f"{name} must be a non-empty set of positive lengths")
            object.__setattr__(self, name, lengths)


# -------------------- HELPERS --------------------
def insert_into_head(gene, element, position, head_len):
    """Insert at ``position`` of the head; the head keeps its length by losing its last symbols."""
    head = gene[:head_len]
    head = (head[:position] + element + head[position:])[:head_len]
    return head + gene[head_len:]


def move_gene_to_front(chromosome, index):
    genes = list(chromosome.genes)
    order = [index] + [g for g in range(chromosome.num_genes) if g != index]
    constants = [chromosome.constants[g] for g in order] if chromosome.constants else ()
    return chromosome.with_genes([genes[g] for g in order], constants)


def swap_segment(parent1, parent2, start, end, layout):
    """Exchange symbols in [start, end); a gene's constant array follows the majority of its Dc."""
    s1 = parent1.symbols[:start] + parent2.symbols[start:end] + parent1.symbols[end:]
    s2 = parent2.symbols[:start] + parent1.symbols[start:end] + parent2.symbols[end:]
    c1, c2 = list(parent1.constants), list(parent2.constants)
    if c1 and layout.dc_len:
        for g in range(parent1.num_genes):
            dc_start = g * layout.gene_len + layout.coding_len
            dc_end = (g + 1) * layout.gene_len
            swapped = max(0, min(end, dc_end) - max(start, dc_start))
            if 2 * swapped > layout.dc_len:
                c1[g], c2[g] = c2[g], c1[g]
    n = parent1.num_genes
    return Chromosome(s1, n, tuple(c1)), Chromosome(s2, n, tuple(c2))


def select_for_operator(rate, population_size, rng, protected=0):
    """Distinct indices of the int(rate * P) chromosomes an operator modifies.

    The first ``protected`` slots are never chosen; the count is still taken over all P slots.
    """
    count = min(int(rate * population_size + 1e-9), population_size - protected)
    if count <= 0:
        return []
    return [protected + int(i) for i in rng.choice(population_size - protected, size=count, replace=False)]


# -------------------- MUTATION --------------------
def mutate(chromosome, p_m, layout, symbol_table, rng):
    """Each symbol changes with probability p_m into another symbol legal in its region."""
    if p_m <= 0:
        return chromosome
    symbols = list(chromosome.symbols)
    hits = np.flatnonzero(rng.random(len(symbols)) < p_m)
    if not len(hits):
        return chromosome
    for position in hits:
        _, alphabet = region_alphabet(layout, symbol_table, position % layout.gene_len)
        others = [s for s in alphabet if s != symbols[position]]
        if others:
            symbols[position] = others[rng.integers(len(others))]
    return Chromosome("".join(symbols), chromosome.num_genes, chromosome.constants)


# -------------------- TRANSPOSITION --------------------
def is_transpose(chromosome, lengths, layout, rng):
    h = layout.head_len
    if h < 2:
        return chromosome
    genes = list(chromosome.genes)
    coding = "".join(gene[:layout.coding_len] for gene in genes)
    length = min(int(rng.choice(lengths)), h - 1)
    start = int(rng.integers(0, len(coding) - length + 1))
    element = coding[start:start + length]
    target = int(rng.integers(chromosome.num_genes))
    position = int(rng.integers(1, h))
    genes[target] = insert_into_head(genes[target], element, position, h)
    return chromosome.with_genes(genes)


def ris_transpose(chromosome, lengths, layout, symbol_table, rng):
    h = layout.head_len
    genes = list(chromosome.genes)
    target = int(rng.integers(chromosome.num_genes))
    gene = genes[target]
    start = int(rng.integers(0, h))
    for first in range(start, h):
        if symbol_table.is_function(gene[first]):
            break
    else:
        return chromosome
    length = min(int(rng.choice(lengths)), h)
    element = gene[first:min(first + length, layout.coding_len)]
    genes[target] = insert_into_head(gene, element, 0, h)
    return chromosome.with_genes(genes)


def gene_transpose(chromosome, rng):
    if chromosome.num_genes < 2:
        return chromosome
    return move_gene_to_front(chromosome, int(rng.integers(1, chromosome.num_genes)))


# -------------------- RECOMBINATION --------------------
def recombine_one_point(parent1, parent2, layout, rng):
    cut = int(rng.integers(0, len(parent1.symbols)))
    return swap_segment(parent1, parent2, cut, len(parent1.symbols), layout)


def recombine_two_point(parent1, parent2, layout, rng):
    start, end = sorted(int(c) for c in rng.integers(0, len(parent1.symbols) + 1, size=2))
    return swap_segment(parent1, parent2, start, end, layout)


def recombine_gene(parent1, parent2, layout, rng):
    g = int(rng.integers(parent1.num_genes))
    return swap_segment(parent1, parent2, g * layout.gene_len, (g + 1) * layout.gene_len, layout)


# -------------------- Dc OPERATORS --------------------
def dc_mutate_constants(chromosome, rate, constant_range, rng):
    if not chromosome.constants:
        raise ValueError("Random constant mutation needs chromosomes with a Dc domain")
    if rate <= 0:
        return chromosome
    constant_range = constant_range or ConstantRange()
    arrays = []
    for array in chromosome.constants:
        hits = rng.random(len(array)) < rate
        fresh = constant_range.sample(rng, len(array))
        arrays.append(tuple(f if hit else v for v, f, hit in zip(array, fresh, hits)))
    return Chromosome(chromosome.symbols, chromosome.num_genes, tuple(arrays))


def dc_is_transpose(chromosome, layout, rng, lengths=DC_IS_LENGTHS):
    size = layout.dc_len
    if size < 2:
        return chromosome
    genes = list(chromosome.genes)
    target = int(rng.integers(chromosome.num_genes))
    gene = genes[target]
    dc = gene[layout.coding_len:]
    length = min(int(rng.choice(lengths)), size - 1)
    start = int(rng.integers(0, size - length + 1))
    element = dc[start:start + length]
    position = int(rng.integers(1, size))
    dc = (dc[:position] + element + dc[position:])[:size]
    genes[target] = gene[:layout.coding_len] + dc
    return chromosome.with_genes(genes)


# -------------------- PIPELINE --------------------
def reproduce_generation(population, rates, layout, symbol_table, rng, constant_range=None, protected=0):
    """Mutation, IS, RIS, gene transposition, one-point, two-point, gene recombination, Dc operators.

    The first ``protected`` chromosomes (the cloned elite) pass through untouched. Operator counts
    stay int(rate * P) over the whole population and are drawn from the remaining slots.
    """
    population = list(population)
    size = len(population)

    if rates.mutation > 0:
        population[protected:] = [mutate(c, rates.mutation, layout, symbol_table, rng)
                                  for c in population[protected:]]

    transpositions = (
        (rates.is_transposition, lambda c: is_transpose(c, rates.is_lengths, layout, rng)),
        (rates.ris_transposition, lambda c: ris_transpose(c, rates.ris_lengths, layout, symbol_table, rng)),
        (rates.gene_transposition, lambda c: gene_transpose(c, rng)),
    )
    for rate, operator in transpositions:
        for i in select_for_operator(rate, size, rng, protected):
            population[i] = operator(population[i])

    recombinations = (
        (rates.one_point, recombine_one_point),
        (rates.two_point, recombine_two_point),
        (rates.gene_recombination, recombine_gene),
    )
    for rate, operator in recombinations:
        chosen = select_for_operator(rate, size, rng, protected)
        for a, b in zip(chosen[0::2], chosen[1::2]):
            population[a], population[b] = operator(population[a], population[b], layout, rng)

    if layout.dc_len:
        if rates.dc_mutation > 0:
            population[protected:] = [dc_mutate_constants(c, rates.dc_mutation, constant_range, rng)
                                      for c in population[protected:]]
        for i in select_for_operator(rates.dc_is_transposition, size, rng, protected):
            population[i] = dc_is_transpose(population[i], layout, rng)
    return population
