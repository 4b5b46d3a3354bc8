"""Two-stage genetic algorithm for rigid registration.

A chromosome holds six genes ``[tx, ty, tz, alpha, beta, psi]`` (mm and
degrees). In full mode all six evolve. When the rotation is known in advance
(e.g. from an inertial sensor) the search runs in reduced mode: the angles are
pinned to the known values and only the three translation genes are free.

The coarse stage seeds its population from random anchor correspondences and
evolves it for a fixed number of generations with elitism, rank selection,
two-point crossover and fixed-size mutation. The fine stage inherits the best
individuals and keeps refining them while the mutation probability rises and
the mutation step shrinks on a fixed schedule.

Random numbers come from one ``numpy.random.Generator`` consumed in a fixed
order (selection, crossover, mutation, per offspring in population order), so
a seed fully determines a run. Fitness evaluation does not consume random
numbers and may run on several threads without affecting results.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .exceptions import EmptyPopulationError, InvariantViolation
from .fitness import FitnessKind, FitnessReport, evaluate_motion, overlap_threshold_default, score_motions
from .geometry import (
    Aabb,
    EulerAngles,
    RigidMotion,
    as_cloud,
    bounding_box,
    centroid,
    downsample,
    euler_to_matrix,
    normalize_angle,
)
from .spatial import KDTree
from .validation import check_count, check_probability

GENE_NAMES = ("tx", "ty", "tz", "alpha", "beta", "psi")


@dataclass(frozen=True)
class Full6Dof:
    """Search all three translations and all three angles."""

    free_genes = (0, 1, 2, 3, 4, 5)
    name = "full"


@dataclass(frozen=True)
class ReducedTranslationOnly:
    """Rotation known a priori; search the translation only."""

    known: EulerAngles = field(default_factory=EulerAngles)

    free_genes = (0, 1, 2)
    name = "reduced"

    def __post_init__(self):
        if not isinstance(self.known, EulerAngles):
            object.__setattr__(self, "known", EulerAngles(*self.known))


SearchMode = Union[Full6Dof, ReducedTranslationOnly]


@dataclass(frozen=True)
class Chromosome:
    genes: tuple
    fitness: float | None = None

    def __post_init__(self):
        if len(self.genes) != 6:
            raise ValueError("a chromosome has exactly six genes")

    @property
    def translation(self) -> tuple:
        return self.genes[:3]

    @property
    def angles(self) -> EulerAngles:
        return EulerAngles(*self.genes[3:])

    @property
    def motion(self) -> RigidMotion:
        return RigidMotion(self.angles, self.translation)

    def with_fitness(self, fitness: float) -> "Chromosome":
        return Chromosome(self.genes, float(fitness))


@dataclass
class Population:
    individuals: list
    generation: int = 0

    def __len__(self):
        return len(self.individuals)

    @property
    def best(self) -> Chromosome:
        return self.individuals[0]


@dataclass
class FitnessTrace:
    """Per-generation record of one GA stage.

    Entry 0 describes the starting population, entry ``g`` the population
    after ``g`` rounds of reproduction. ``composition`` holds, per round, the
    number of (elites, crossover offspring, mutation-only offspring).
    """

    stage: str
    best_fitness: list = field(default_factory=list)
    best: list = field(default_factory=list)
    population_size: list = field(default_factory=list)
    composition: list = field(default_factory=list)
    evaluations: int = 0

    @property
    def generations(self) -> int:
        return max(0, len(self.best_fitness) - 1)

    def record(self, population: list, composition=None):
        self.best_fitness.append(population[0].fitness)
        self.best.append(population[0])
        self.population_size.append(len(population))
        if composition is not None:
            self.composition.append(composition)


@dataclass(frozen=True)
class GaConfig:
    coarse_population: int = 100
    coarse_generations: int = 250
    fine_population: int = 50
    fine_generations: int = 250
    coarse_mutation_prob: float = 0.16
    fine_mutation_prob_initial: float = 0.20
    schedule_period: int = 25
    schedule_prob_increment: float = 0.05
    schedule_step_decay: float = 0.8
    elite_count: int = 2
    fine_crossover_offspring: int = 44
    fine_mutation_only_offspring: int = 4
    stagnation_window: int = 150
    stagnation_epsilon: float = 1e-3
    translation_step_fraction: float = 0.1
    angle_step: float = 10.0
    bound_dilation: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("coarse_population", "coarse_generations", "fine_population",
                     "fine_generations", "schedule_period", "elite_count",
                     "stagnation_window"):
            check_count(getattr(self, name), name)
        for name in ("fine_crossover_offspring", "fine_mutation_only_offspring"):
            check_count(getattr(self, name), name, minimum=0)
        for name in ("coarse_mutation_prob", "fine_mutation_prob_initial",
                     "schedule_prob_increment"):
            check_probability(getattr(self, name), name)
        if not 0.0 < self.schedule_step_decay <= 1.0:
            raise ValueError("schedule_step_decay must lie in (0, 1]")
        if self.fine_crossover_offspring % 2:
            raise ValueError("fine_crossover_offspring must be even (offspring come in pairs)")
        total = self.elite_count + self.fine_crossover_offspring + self.fine_mutation_only_offspring
        if total != self.fine_population:
            raise ValueError(
                f"elite_count + fine_crossover_offspring + fine_mutation_only_offspring = {total}"
                f" must equal fine_population = {self.fine_population}")
        if self.elite_count >= self.coarse_population:
            raise ValueError("elite_count must be smaller than coarse_population")
        if self.stagnation_epsilon < 0 or self.translation_step_fraction <= 0 or self.angle_step <= 0:
            raise ValueError("step sizes must be positive and stagnation_epsilon non-negative")

    def replace(self, **changes) -> "GaConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def quick(cls, **changes) -> "GaConfig":
        """Small populations and short runs, for smoke tests and demos."""
        base = dict(coarse_population=30, coarse_generations=40, fine_population=20,
                    fine_generations=40, fine_crossover_offspring=14,
                    fine_mutation_only_offspring=4, stagnation_window=15)
        base.update(changes)
        return cls(**base)


@dataclass(frozen=True)
class GeneBounds:
    """Box the moved source centroid must stay in; limits translation genes."""

    box: Aabb
    source_centroid: np.ndarray

    @classmethod
    def from_clouds(cls, source, target, dilation: float = 0.5) -> "GeneBounds":
        tbox = bounding_box(target)
        # floor keeps flat (zero-extent) axes from pinning the translation
        return cls(tbox.dilated(dilation, floor=0.1 * tbox.diagonal), centroid(source))

    def translation_limits(self, angles) -> tuple[np.ndarray, np.ndarray]:
        rc = euler_to_matrix(angles) @ self.source_centroid
        return self.box.min - rc, self.box.max - rc


def initial_step_sizes(target, config: GaConfig) -> np.ndarray:
    """Base mutation steps: a fraction of the target diagonal for translations, fixed degrees for angles."""
    diag = bounding_box(target).diagonal
    t_step = config.translation_step_fraction * diag
    if t_step <= 0:
        t_step = config.translation_step_fraction
    return np.array([t_step] * 3 + [config.angle_step] * 3)


def _pinned_angles(mode: SearchMode, angles):
    if isinstance(mode, ReducedTranslationOnly):
        return mode.known.as_tuple()
    return tuple(normalize_angle(a) for a in angles)


def init_coarse_population(source, target, mode: SearchMode, config: GaConfig,
                           rng: np.random.Generator) -> Population:
    """Seed the coarse population from random anchor correspondences.

    The source point nearest the source centroid is the anchor. Each
    individual pairs it with a random target point and takes the translation
    that maps the anchor exactly onto that point under the individual's
    rotation. In full mode that rotation is a single random angle about one
    random axis; in reduced mode it is the known rotation.
    """
    source = as_cloud(source).require_nonempty()
    target = as_cloud(target).require_nonempty()
    src = source.points
    c = centroid(source)
    d2 = ((src - c) ** 2).sum(axis=1)
    anchor = src[int(np.argmin(d2))]

    individuals = []
    for _ in range(config.coarse_population):
        b = target.points[int(rng.integers(len(target)))]
        if isinstance(mode, ReducedTranslationOnly):
            angles = mode.known.as_tuple()
        else:
            axis = int(rng.integers(3))
            angles = [0.0, 0.0, 0.0]
            angles[axis] = normalize_angle(rng.uniform(-180.0, 180.0))
            angles = tuple(angles)
        t = b - euler_to_matrix(angles) @ anchor
        individuals.append(Chromosome(tuple(float(v) for v in t) + tuple(angles)))
    return Population(individuals, generation=0)


def crossover(parent_a: Chromosome, parent_b: Chromosome, mode: SearchMode,
              rng: np.random.Generator, cuts=None) -> tuple[Chromosome, Chromosome]:
    """Two-point crossover over the free genes.

    Two distinct interior boundaries ``i < j`` of the free-gene vector are
    drawn (or taken from ``cuts``) and the segment between them is swapped.
    Pinned genes are never touched.
    """
    free = mode.free_genes
    if cuts is None:
        cuts = rng.choice(np.arange(1, len(free)), size=2, replace=False)
    i, j = sorted(int(c) for c in cuts)
    if not 1 <= i < j <= len(free) - 1:
        raise ValueError(f"invalid cut positions {cuts} for {len(free)} free genes")
    ga = list(parent_a.genes)
    gb = list(parent_b.genes)
    for k in free[i:j]:
        ga[k], gb[k] = gb[k], ga[k]
    return Chromosome(tuple(ga)), Chromosome(tuple(gb))


def mutate(c: Chromosome, per_gene_prob: float, max_step, mode: SearchMode,
           rng: np.random.Generator, bounds: GeneBounds | None = None) -> Chromosome:
    """Add or subtract a random amount in ``(0, max_step]`` to each free gene with probability ``per_gene_prob``.

    Per free gene the stream yields: gate draw, then (if mutating) sign draw
    and magnitude draw. Mutated angles are wrapped to [-180, 180); mutated
    translation genes are clamped to ``bounds``.
    """
    genes = list(c.genes)
    changed_t = []
    changed = False
    for g in mode.free_genes:
        if rng.random() < per_gene_prob:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            genes[g] += sign * float(max_step[g]) * (1.0 - rng.random())
            changed = True
            if g < 3:
                changed_t.append(g)
    if not changed:
        return c
    for g in (3, 4, 5):
        genes[g] = normalize_angle(genes[g])
    if bounds is not None and changed_t:
        lo, hi = bounds.translation_limits(genes[3:])
        for g in changed_t:
            genes[g] = float(min(max(genes[g], lo[g]), hi[g]))
    return Chromosome(tuple(genes))


def mutation_schedule(generation: int, config: GaConfig) -> tuple[float, float]:
    """Fine-stage mutation probability and step scale for a generation.

    Every ``schedule_period`` generations the probability rises by
    ``schedule_prob_increment`` (capped at 1) and the step scale is multiplied
    by ``schedule_step_decay``.
    """
    if generation < 0:
        raise ValueError("generation must be >= 0")
    k = generation // config.schedule_period
    prob = min(1.0, config.fine_mutation_prob_initial + config.schedule_prob_increment * k)
    return prob, config.schedule_step_decay ** k


def rank_probabilities(size: int) -> np.ndarray:
    """Selection probability proportional to ``size - rank`` (rank 0 = best)."""
    w = np.arange(size, 0, -1, dtype=float)
    return w / w.sum()


class _Evaluator:
    """Scores chromosomes in batches; one score per distinct gene vector."""

    def __init__(self, source: np.ndarray, target_index: KDTree, kind):
        self.source = np.ascontiguousarray(source)
        self.index = target_index
        self.kind = FitnessKind(kind)
        self.calls = 0
        self._known = {}

    def __call__(self, individuals: list) -> list:
        pending = []
        for c in individuals:
            if c.fitness is None and c.genes not in self._known and c.genes not in pending:
                pending.append(c.genes)
        if pending:
            rot = np.stack([euler_to_matrix(g[3:]) for g in pending])
            trans = np.array([g[:3] for g in pending])
            scores = score_motions(rot, trans, self.source, self.index, self.kind)
            self.calls += len(pending)
            for g, s in zip(pending, scores):
                self._known[g] = float(s)
        out = [c if c.fitness is not None else c.with_fitness(self._known[c.genes]) for c in individuals]
        # keep the cache to the genes still alive so memory stays bounded
        self._known = {c.genes: c.fitness for c in out}
        return out


def _sorted(individuals: list) -> list:
    return sorted(individuals, key=lambda c: c.fitness)


def _select_pair(population: list, probs: np.ndarray, rng) -> tuple[Chromosome, Chromosome]:
    ia, ib = rng.choice(len(population), size=2, p=probs)
    return population[int(ia)], population[int(ib)]


@dataclass
class _Context:
    source: np.ndarray
    index: KDTree
    mode: SearchMode
    config: GaConfig
    rng: np.random.Generator
    bounds: GeneBounds
    base_step: np.ndarray
    evaluator: _Evaluator


def _context(source, target_index, mode, config, rng, kind, bounds=None, base_step=None, evaluator=None):
    source = as_cloud(source).require_nonempty()
    target = target_index.cloud
    if bounds is None:
        bounds = GeneBounds.from_clouds(source, target, config.bound_dilation)
    if base_step is None:
        base_step = initial_step_sizes(target, config)
    if evaluator is None:
        evaluator = _Evaluator(source.points, target_index, kind)
    return _Context(source.points, target_index, mode, config, rng, bounds, base_step, evaluator)


def _check_mode(individuals, mode):
    if isinstance(mode, ReducedTranslationOnly):
        known = mode.known.as_tuple()
        for c in individuals:
            if c.genes[3:] != known:
                raise InvariantViolation("pinned rotation genes changed in reduced mode")


def coarse_ga(source, target_index: KDTree, mode: SearchMode, config: GaConfig,
              rng: np.random.Generator, kind=FitnessKind.MEAN, *, bounds=None,
              base_step=None, initial: Population | None = None,
              _evaluator=None) -> tuple[Population, FitnessTrace]:
    """Run the coarse stage for exactly ``config.coarse_generations`` rounds.

    Each round keeps the ``elite_count`` best unchanged and fills the rest
    with rank-selected pairs passed through crossover and then mutation at
    ``coarse_mutation_prob`` with the base step sizes. Returns the final
    population sorted best-first and the trace.
    """
    ctx = _context(source, target_index, mode, config, rng, kind, bounds, base_step, _evaluator)
    if initial is None:
        initial = init_coarse_population(ctx.source, target_index.cloud, mode, config, rng)
    pop = _sorted(ctx.evaluator(list(initial.individuals)))
    size = len(pop)
    if size == 0:
        raise EmptyPopulationError("coarse population is empty")
    elites = min(config.elite_count, size)
    probs = rank_probabilities(size)
    trace = FitnessTrace("coarse")
    trace.record(pop)

    for _ in range(config.coarse_generations):
        children = []
        while len(children) < size - elites:
            pa, pb = _select_pair(pop, probs, rng)
            for child in crossover(pa, pb, mode, rng):
                children.append(mutate(child, config.coarse_mutation_prob, ctx.base_step,
                                       mode, rng, ctx.bounds))
        children = children[: size - elites]
        pop = _sorted(ctx.evaluator(pop[:elites] + children))
        trace.record(pop, (elites, len(children), 0))
    _check_mode(pop, mode)
    trace.evaluations = ctx.evaluator.calls
    return Population(pop, generation=config.coarse_generations), trace


def _stagnated(best: list, window: int, epsilon: float) -> bool:
    return len(best) > window and best[-1 - window] - best[-1] < epsilon


def fine_ga(initial: Population, source, target_index: KDTree, mode: SearchMode,
            config: GaConfig, rng: np.random.Generator, kind=FitnessKind.MEAN, *,
            bounds=None, base_step=None, _evaluator=None) -> tuple[Chromosome, FitnessTrace]:
    """Refine an inherited population; returns the best chromosome found.

    Each round: the ``elite_count`` best survive, ``fine_crossover_offspring``
    come from rank-selected pairs via crossover then mutation, and
    ``fine_mutation_only_offspring`` are mutated copies of uniformly chosen
    non-elite individuals. Mutation probability and step follow
    :func:`mutation_schedule`. Stops after ``fine_generations`` rounds, or
    earlier when the best fitness improved by less than
    ``stagnation_epsilon`` over the last ``stagnation_window`` rounds.
    """
    if initial is None or len(initial) == 0:
        raise EmptyPopulationError("fine stage needs a non-empty initial population")
    ctx = _context(source, target_index, mode, config, rng, kind, bounds, base_step, _evaluator)
    inherited = _sorted(ctx.evaluator(list(initial.individuals)))
    size = config.fine_population
    pop = [inherited[i % len(inherited)] for i in range(size)]
    elites = config.elite_count
    n_cross = config.fine_crossover_offspring
    n_mut = config.fine_mutation_only_offspring
    probs = rank_probabilities(size)
    trace = FitnessTrace("fine")
    trace.record(pop)

    for gen in range(config.fine_generations):
        prob, scale = mutation_schedule(gen, config)
        step = ctx.base_step * scale
        crossed = []
        while len(crossed) < n_cross:
            pa, pb = _select_pair(pop, probs, rng)
            for child in crossover(pa, pb, mode, rng):
                crossed.append(mutate(child, prob, step, mode, rng, ctx.bounds))
        mutated = []
        for _ in range(n_mut):
            donor = pop[int(rng.integers(elites, size))]
            mutated.append(mutate(donor, prob, step, mode, rng, ctx.bounds))
        pop = _sorted(ctx.evaluator(pop[:elites] + crossed + mutated))
        trace.record(pop, (elites, len(crossed), len(mutated)))
        if _stagnated(trace.best_fitness, config.stagnation_window, config.stagnation_epsilon):
            break
    _check_mode(pop, mode)
    trace.evaluations = ctx.evaluator.calls
    return pop[0], trace


@dataclass
class RegistrationResult:
    """Outcome of :func:`register`.

    Equality covers the serialisable fields only; ``wall_time`` is kept out
    of comparisons because it is the one non-deterministic value.
    """

    motion: RigidMotion
    fitness: float
    overlap_percent: float
    fitness_kind: FitnessKind
    overlap_threshold: float
    coarse_generations: int
    fine_generations: int
    mode: SearchMode
    config: GaConfig
    downsample: int
    wall_time: float = field(default=0.0, compare=False)
    report: FitnessReport | None = field(default=None, compare=False, repr=False)
    coarse_trace: FitnessTrace | None = field(default=None, compare=False, repr=False)
    fine_trace: FitnessTrace | None = field(default=None, compare=False, repr=False)

    @property
    def generations_used(self) -> int:
        return self.coarse_generations + self.fine_generations

    @property
    def seed(self) -> int:
        return self.config.seed


def register(source, target, mode: SearchMode | None = None, config: GaConfig | None = None,
             *, kind=FitnessKind.MEAN, downsample_to: int = 2000,
             overlap_threshold: float | None = None) -> RegistrationResult:
    """Find the rigid motion that maps ``source`` onto ``target``.

    Both clouds are downsampled to ``downsample_to`` points, the coarse and
    fine stages run against a KD-tree of the downsampled target, and the
    final score and overlap are computed on the full-resolution clouds.
    """
    start = time.perf_counter()
    mode = Full6Dof() if mode is None else mode
    config = GaConfig() if config is None else config
    kind = FitnessKind(kind)
    source = as_cloud(source, "source").require_nonempty()
    target = as_cloud(target, "target").require_nonempty()

    src = downsample(source, downsample_to, seed=config.seed)
    tgt = downsample(target, downsample_to, seed=config.seed + 1)
    index = KDTree(tgt)
    rng = np.random.default_rng(config.seed)
    bounds = GeneBounds.from_clouds(src, tgt, config.bound_dilation)
    step = initial_step_sizes(tgt, config)
    evaluator = _Evaluator(src.points, index, kind)

    population, ctrace = coarse_ga(src, index, mode, config, rng, kind, bounds=bounds,
                                   base_step=step, _evaluator=evaluator)
    best, ftrace = fine_ga(population, src, index, mode, config, rng, kind, bounds=bounds,
                           base_step=step, _evaluator=evaluator)

    full_index = index if tgt is target else KDTree(target)
    if overlap_threshold is None:
        overlap_threshold = overlap_threshold_default(target)
    report = evaluate_motion(best.motion, source, full_index, kind, overlap_threshold)
    return RegistrationResult(
        motion=best.motion,
        fitness=report.score,
        overlap_percent=report.overlap_percent,
        fitness_kind=kind,
        overlap_threshold=float(overlap_threshold),
        coarse_generations=ctrace.generations,
        fine_generations=ftrace.generations,
        mode=mode,
        config=config,
        downsample=int(downsample_to),
        wall_time=time.perf_counter() - start,
        report=report,
        coarse_trace=ctrace,
        fine_trace=ftrace,
    )


def translation_error(estimate: RigidMotion, truth: RigidMotion) -> np.ndarray:
    """Absolute per-axis translation error (mm)."""
    return np.abs(estimate.vector - truth.vector)


def rotation_error(estimate: RigidMotion, truth: RigidMotion) -> tuple[np.ndarray, float]:
    """Per-axis absolute Euler differences and the geodesic angle between rotations (degrees)."""
    per_axis = np.array([abs(normalize_angle(a - b)) for a, b in
                         zip(estimate.rotation.as_tuple(), truth.rotation.as_tuple())])
    rel = truth.matrix.T @ estimate.matrix
    cos = min(1.0, max(-1.0, (np.trace(rel) - 1.0) / 2.0))
    return per_axis, math.degrees(math.acos(cos))
