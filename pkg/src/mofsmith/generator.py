"""Genetic-algorithm inverse design over a gene-keyed lookup pool.

Genes are ``topology+block1+block2`` strings. Each topology runs its own
generational loop: parents come from the base pool ranked by an
IQR-normalized fitness, children recombine the parents' building blocks
(never mixing slots), and elitism keeps the best k of parents ∪ children
as the next parent set. Property values for new genes come from a
gene-keyed surrogate callable, so the whole loop is deterministic given
(plan, config, pool, seed).
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import subprocess
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

from .core import Gene, MofsmithError, Objective, ObjectiveKind, parse_gene
from .dataset import Registry, Table
from .predictor import ModelMiss, UnknownProperty
from .query import quantile_linear

DEFAULT_TOPOLOGIES = ("pcu", "dia", "acs", "rtl", "cds", "srs", "ths", "bcu", "fsc")
IQR_FLOOR = 1e-9


class MalformedPlan(MofsmithError):
    pass


class ObjectiveCountMismatch(MofsmithError):
    def __init__(self, n_properties: int, n_objectives: int):
        super().__init__(f"{n_properties} properties but {n_objectives} objectives")


class NoParents(MofsmithError):
    """No pool entry satisfies the objective even after window widening."""


class ExhaustedSpace(MofsmithError):
    """No unseen block combination is left for this parent set."""


class BuilderUnavailable(MofsmithError):
    pass


class BuilderFailed(MofsmithError):
    def __init__(self, gene: Gene, message: str):
        super().__init__(f"builder failed for {gene}: {message}")
        self.gene = gene


@dataclass
class GenPlan:
    properties: list[str]
    objectives: list[Objective]

    def __post_init__(self):
        if len(self.properties) != len(self.objectives):
            raise ObjectiveCountMismatch(len(self.properties), len(self.objectives))
        if not self.properties:
            raise MalformedPlan("plan needs at least one property")


@dataclass(frozen=True)
class GAConfig:
    cycles: int = 3
    topologies: tuple[str, ...] = DEFAULT_TOPOLOGIES
    parents_per_topology: int = 100
    children_per_topology: int = 100
    base_pool_size: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.cycles < 0:
            raise ValueError("cycles must be >= 0")
        if min(self.parents_per_topology, self.children_per_topology,
               self.base_pool_size) < 1:
            raise ValueError("population counts must be >= 1")
        if not self.topologies:
            raise ValueError("at least one topology required")


@dataclass(frozen=True)
class EvaluatedGene:
    gene: Gene
    values: tuple[float, ...]
    fitness: float


@dataclass
class Generation:
    index: int
    members: list[EvaluatedGene]  # generation 0: parents; later: that cycle's children
    elite_best: EvaluatedGene     # best of the elitist parent set after this generation

    def value_mean(self, prop_index: int = 0) -> Optional[float]:
        if not self.members:
            return None
        return sum(m.values[prop_index] for m in self.members) / len(self.members)

    def value_std(self, prop_index: int = 0) -> Optional[float]:
        n = len(self.members)
        if n < 2:
            return None
        mean = self.value_mean(prop_index)
        return math.sqrt(sum((m.values[prop_index] - mean) ** 2 for m in self.members) / (n - 1))


@dataclass
class TopologyRun:
    topology: str
    generations: list[Generation]
    discarded: int = 0  # children dropped on surrogate misses


@dataclass
class GAResult:
    plan: GenPlan
    config: GAConfig
    runs: list[TopologyRun]
    best: EvaluatedGene

    @property
    def best_gene(self) -> Gene:
        return self.best.gene


# --- plan parsing ----------------------------------------------------------

_OBJECTIVE_WORD = {"max": ObjectiveKind.MAX, "min": ObjectiveKind.MIN}


def parse_objective(text: str) -> Objective:
    parts = text.strip().split()
    if not parts:
        raise MalformedPlan("empty objective")
    head = parts[0].casefold()
    if head in _OBJECTIVE_WORD:
        if len(parts) != 1:
            raise MalformedPlan(f"objective {head!r} takes no argument")
        return Objective(kind=_OBJECTIVE_WORD[head])
    try:
        if head == "near" and len(parts) == 2:
            return Objective(kind=ObjectiveKind.NEAR, target=float(parts[1]))
        if head == "range" and len(parts) == 3:
            return Objective(kind=ObjectiveKind.RANGE,
                             low=float(parts[1]), high=float(parts[2]))
    except ValueError:
        raise MalformedPlan(f"bad objective argument in {text!r}") from None
    raise MalformedPlan(f"unrecognized objective {text!r}")


def parse_gen_plan(text: str, registry: Registry) -> GenPlan:
    """Parse Property/Objective lines; both lists align positionally.

    Every property must resolve to a gene-keyed surrogate registration.
    Other plan lines (look-up table, genetic algorithm, final thought) are
    free text and are ignored here.
    """
    properties: Optional[list[str]] = None
    objectives: Optional[list[Objective]] = None
    for line in text.splitlines():
        stripped = line.strip()
        lowered = stripped.casefold()
        if lowered.startswith("property:"):
            raw = stripped.split(":", 1)[1]
            properties = [part.strip().strip("`") for part in raw.split(",") if part.strip()]
        elif lowered.startswith("objective:"):
            raw = stripped.split(":", 1)[1]
            objectives = [parse_objective(part) for part in raw.split(",") if part.strip()]
    if not properties or not objectives:
        raise MalformedPlan("plan needs Property and Objective lines")

    known = registry.property_names()
    by_fold = {name.casefold(): name for name in known}
    canonical = []
    for prop in properties:
        name = by_fold.get(prop.casefold())
        if name is None:
            raise UnknownProperty(prop, known)
        registration = registry.lookup(name)
        if registration.material_kind.value != "gene":
            raise UnknownProperty(prop, [n for n in known
                                         if registry.lookup(n).material_kind.value == "gene"])
        canonical.append(name)
    return GenPlan(properties=canonical, objectives=objectives)


# --- fitness ---------------------------------------------------------------

def iqr(values: list[float]) -> float:
    """Interquartile range with a small floor so division stays finite."""
    xs = sorted(values)
    if not xs:
        return IQR_FLOOR
    spread = quantile_linear(xs, 0.75) - quantile_linear(xs, 0.25)
    return max(spread, IQR_FLOOR)


def objective_score(value: float, objective: Objective, normalizer: float) -> float:
    if objective.kind is ObjectiveKind.MAX:
        return -value / normalizer
    if objective.kind is ObjectiveKind.MIN:
        return value / normalizer
    if objective.kind is ObjectiveKind.NEAR:
        return abs(value - objective.target) / normalizer
    if value < objective.low:
        return (objective.low - value) / normalizer
    if value > objective.high:
        return (value - objective.high) / normalizer
    return 0.0


def fitness(values: tuple[float, ...], objectives: list[Objective],
            normalizers: list[float]) -> float:
    """Sum of per-objective scores; lower is better."""
    return sum(objective_score(v, o, n)
               for v, o, n in zip(values, objectives, normalizers))


def pool_normalizers(pool: Table, properties: list[str]) -> list[float]:
    """One IQR per property, measured over every non-null pool value."""
    normalizers = []
    for prop in properties:
        values = [v for v in pool.column_values(prop) if v is not None]
        normalizers.append(iqr(values))
    return normalizers


def pool_entries(pool: Table, properties: list[str], topology: str) -> list[EvaluatedGene]:
    """The pool rows for one topology, with fitness left at 0 (scored later).

    Rows whose gene fails to parse or that lack any required property value
    are skipped.
    """
    positions = [pool.column_position(p) for p in properties]
    entries = []
    for key, row in zip(pool.keys(), pool.rows):
        try:
            gene = parse_gene(key)
        except MofsmithError:
            continue
        if gene.topology != topology:
            continue
        raw = [row[pos] for pos in positions]
        if any(v is None for v in raw):
            continue
        entries.append(EvaluatedGene(gene=gene, values=tuple(float(v) for v in raw),
                                     fitness=0.0))
    return entries


# --- parent selection ------------------------------------------------------

def _windows(objectives: list[Objective], normalizers: list[float],
             widening: int) -> list[Optional[tuple[float, float]]]:
    """Acceptance interval per objective after `widening` doublings.

    max/min impose no window. near starts at ±IQR/2; range starts at the
    interval itself and widens by IQR/2 before doubling.
    """
    out: list[Optional[tuple[float, float]]] = []
    for objective, normalizer in zip(objectives, normalizers):
        if objective.kind is ObjectiveKind.NEAR:
            half = (normalizer / 2.0) * (2 ** widening)
            out.append((objective.target - half, objective.target + half))
        elif objective.kind is ObjectiveKind.RANGE:
            extra = 0.0 if widening == 0 else (normalizer / 2.0) * (2 ** (widening - 1))
            out.append((objective.low - extra, objective.high + extra))
        else:
            out.append(None)
    return out


def select_parents(entries: list[EvaluatedGene], objectives: list[Objective],
                   k: int, normalizers: list[float],
                   widen_attempts: int = 3) -> list[EvaluatedGene]:
    """Pick the k fittest pool entries, fittest first.

    For near/range objectives the candidates must sit inside every
    acceptance window; too few candidates doubles the windows up to
    ``widen_attempts`` times, after which the nearest k win regardless.
    max/min objectives always succeed on a nonempty pool.
    """
    if not entries:
        raise NoParents("empty pool")
    scored = [EvaluatedGene(e.gene, e.values, fitness(e.values, objectives, normalizers))
              for e in entries]
    windowed = any(o.kind in (ObjectiveKind.NEAR, ObjectiveKind.RANGE) for o in objectives)
    if not windowed:
        ranked = sorted(scored, key=lambda e: e.fitness)
        return ranked[: min(k, len(ranked))]

    if len(scored) < k:
        raise NoParents(f"pool has {len(scored)} usable entries, need {k}")
    candidates = scored
    for widening in range(widen_attempts + 1):
        windows = _windows(objectives, normalizers, widening)
        inside = [e for e in scored
                  if all(w is None or (w[0] <= v <= w[1])
                         for v, w in zip(e.values, windows))]
        if len(inside) >= k:
            candidates = inside
            break
    ranked = sorted(candidates, key=lambda e: e.fitness)
    return ranked[:k]


# --- child proposal --------------------------------------------------------

def _ordered_unique(parts: list[str]) -> list[str]:
    seen = set()
    out = []
    for part in parts:
        if part not in seen:
            seen.add(part)
            out.append(part)
    return out


def _weighted_index(rng: random.Random, cumulative: list[float]) -> int:
    return bisect_right(cumulative, rng.random() * cumulative[-1])


Proposer = Callable[[list[Gene], int], list[Gene]]


def propose_children(parents: list[Gene], k: int, rng: random.Random,
                     exclude: frozenset[Gene] = frozenset(),
                     proposer: Optional[Proposer] = None) -> list[Gene]:
    """Recombine parent blocks into min(k, remaining) novel genes.

    ``parents`` must be ordered fittest first: block draws are weighted
    (n - rank) so fitter parents contribute more. block1 values only ever
    come from parents' block1 slot, block2 from block2. Children never
    collide with parents, ``exclude``, or each other. Raises
    ExhaustedSpace when zero new combinations exist.
    """
    if not parents:
        raise ExhaustedSpace("no parents")
    topology = parents[0].topology
    if any(p.topology != topology for p in parents):
        raise ValueError("parents must share one topology")
    taboo = set(parents) | set(exclude)

    block1_order = _ordered_unique([p.block1 for p in parents])
    block2_order = _ordered_unique([p.block2 for p in parents])
    remaining = [Gene(topology, b1, b2)
                 for b1 in block1_order for b2 in block2_order
                 if Gene(topology, b1, b2) not in taboo]
    if not remaining:
        raise ExhaustedSpace(f"all {len(block1_order)}x{len(block2_order)} "
                             f"combinations for {topology} already used")
    want = min(k, len(remaining))

    children: list[Gene] = []
    emitted: set[Gene] = set()
    if proposer is not None:
        # model-backed mode: validate, drop invalid/duplicate, top up below
        for gene in proposer(parents, k):
            if (gene.topology == topology and gene.block1 in set(block1_order)
                    and gene.block2 in set(block2_order)
                    and gene not in taboo and gene not in emitted):
                children.append(gene)
                emitted.add(gene)
            if len(children) == want:
                return children

    n = len(parents)
    weights = [float(n - rank) for rank in range(n)]
    cumulative = []
    total = 0.0
    for w in weights:
        total += w
        cumulative.append(total)

    attempts = 0
    cap = max(20 * want, 100)
    while len(children) < want and attempts < cap:
        attempts += 1
        b1 = parents[_weighted_index(rng, cumulative)].block1
        b2 = parents[_weighted_index(rng, cumulative)].block2
        child = Gene(topology, b1, b2)
        if child in taboo or child in emitted:
            continue
        children.append(child)
        emitted.add(child)
    if len(children) < want:
        # deterministic fill in rank order so the batch is always exact
        for gene in remaining:
            if gene not in emitted:
                children.append(gene)
                emitted.add(gene)
            if len(children) == want:
                break
    return children


# --- generational loop -----------------------------------------------------

Surrogate = Callable[[str, list[str]], list[float]]


def registry_surrogate(registry: Registry) -> Surrogate:
    """Adapt the prediction registry to the gene surrogate callable."""
    from .predictor import predict

    def lookup(property_name: str, ids: list[str]) -> list[float]:
        return predict(property_name, ids, registry).values

    return lookup


def _run_topology(plan: GenPlan, config: GAConfig, topology: str,
                  entries: list[EvaluatedGene], normalizers: list[float],
                  surrogate: Surrogate, rng: random.Random) -> TopologyRun:
    parents = select_parents(entries, plan.objectives, config.parents_per_topology,
                             normalizers)
    seen = {p.gene for p in parents}
    discarded = 0
    generations = [Generation(index=0, members=list(parents), elite_best=parents[0])]

    for cycle in range(1, config.cycles + 1):
        try:
            child_genes = propose_children([p.gene for p in parents],
                                           config.children_per_topology, rng,
                                           exclude=frozenset(seen))
        except ExhaustedSpace:
            child_genes = []
        evaluated = []
        for gene in child_genes:
            seen.add(gene)
            try:
                values = tuple(surrogate(prop, [str(gene)])[0] for prop in plan.properties)
            except ModelMiss:
                discarded += 1
                continue
            evaluated.append(EvaluatedGene(
                gene=gene, values=values,
                fitness=fitness(values, plan.objectives, normalizers)))
        merged = sorted(parents + evaluated, key=lambda e: e.fitness)
        parents = merged[: config.parents_per_topology]
        generations.append(Generation(index=cycle, members=evaluated,
                                      elite_best=parents[0]))
    return TopologyRun(topology=topology, generations=generations, discarded=discarded)


def run_ga(plan: GenPlan, config: GAConfig, pool: Table,
           surrogate: Surrogate) -> GAResult:
    """Full inverse-design run: per-topology elitist loops, global best.

    Reproducible: the per-topology RNG is seeded with seed XOR the
    topology's position, so topologies could run in parallel without
    changing results.
    """
    normalizers = pool_normalizers(pool, plan.properties)
    runs = []
    for index, topology in enumerate(config.topologies):
        entries = pool_entries(pool, plan.properties, topology)
        rng = random.Random(config.seed ^ index)
        runs.append(_run_topology(plan, config, topology, entries, normalizers,
                                  surrogate, rng))
    best = min((gen.elite_best for run in runs for gen in run.generations),
               key=lambda e: e.fitness)
    return GAResult(plan=plan, config=config, runs=runs, best=best)


# --- export ----------------------------------------------------------------

def _objective_to_json(objective: Objective) -> dict:
    out = {"kind": objective.kind.value}
    if objective.kind is ObjectiveKind.NEAR:
        out["target"] = objective.target
    if objective.kind is ObjectiveKind.RANGE:
        out["low"] = objective.low
        out["high"] = objective.high
    return out


def result_to_json(result: GAResult) -> dict:
    return {
        "plan": {
            "properties": result.plan.properties,
            "objectives": [_objective_to_json(o) for o in result.plan.objectives],
        },
        "config": {
            "cycles": result.config.cycles,
            "topologies": list(result.config.topologies),
            "parents_per_topology": result.config.parents_per_topology,
            "children_per_topology": result.config.children_per_topology,
            "base_pool_size": result.config.base_pool_size,
            "seed": result.config.seed,
        },
        "best": {
            "gene": str(result.best.gene),
            "values": list(result.best.values),
            "fitness": result.best.fitness,
        },
        "topologies": [
            {
                "topology": run.topology,
                "discarded": run.discarded,
                "generations": [
                    {
                        "index": gen.index,
                        "elite_best_fitness": gen.elite_best.fitness,
                        "members": [
                            {"gene": str(m.gene), "values": list(m.values),
                             "fitness": m.fitness}
                            for m in gen.members
                        ],
                    }
                    for gen in run.generations
                ],
            }
            for run in result.runs
        ],
    }


def write_result_json(result: GAResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result_to_json(result), indent=2) + "\n", encoding="utf-8")
    return path


def write_generation_csv(result: GAResult, path: Union[str, Path]) -> Path:
    """Per-generation summary rows: one per (topology, generation, property)."""
    import csv as _csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["topology", "generation", "property", "count",
                         "mean", "std", "elite_best_fitness"])
        for run in result.runs:
            for gen in run.generations:
                for j, prop in enumerate(result.plan.properties):
                    mean = gen.value_mean(j)
                    std = gen.value_std(j)
                    writer.writerow([
                        run.topology, gen.index, prop, len(gen.members),
                        "" if mean is None else mean,
                        "" if std is None else std,
                        gen.elite_best.fitness,
                    ])
    return path


# --- structure building ----------------------------------------------------

@dataclass(frozen=True)
class BuilderConfig:
    command: str
    args: tuple[str, ...] = ()          # "{gene}" placeholders substituted
    output_template: str = "{gene}.cif"


@dataclass(frozen=True)
class StructureRef:
    gene: Gene
    source: str  # "stub" | "command"
    cell: tuple[float, float, float, float, float, float]
    path: Optional[str] = None


def build_structure(gene: Gene, builder: Optional[BuilderConfig] = None) -> StructureRef:
    """Stub builder: a deterministic placeholder cell derived from the gene.

    With a BuilderConfig, runs the external command instead and records the
    produced path; nonzero exit raises BuilderFailed.
    """
    if builder is None:
        digest = hashlib.sha256(str(gene).encode("utf-8")).digest()
        lengths = tuple(5.0 + (digest[i] / 255.0) * 20.0 for i in range(3))
        return StructureRef(gene=gene, source="stub",
                            cell=(*lengths, 90.0, 90.0, 90.0))
    if not builder.command:
        raise BuilderUnavailable("builder command not configured")
    args = [builder.command] + [a.format(gene=str(gene)) for a in builder.args]
    try:
        proc = subprocess.run(args, capture_output=True, text=True, timeout=300)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise BuilderFailed(gene, str(exc)) from None
    if proc.returncode != 0:
        raise BuilderFailed(gene, proc.stderr.strip() or f"exit {proc.returncode}")
    out_path = builder.output_template.format(gene=str(gene))
    return StructureRef(gene=gene, source="command",
                        cell=(0.0, 0.0, 0.0, 0.0, 0.0, 0.0), path=out_path)
