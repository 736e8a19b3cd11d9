"""Variable-length differential evolution over layer-address genomes.

A genome is a 1-D float vector, one scalar per network layer, every scalar in
[0, 8191]. Lengths differ across the population, so the classic fixed-length
operators are adapted by trimming: mutation trims its three donors to their
shortest length, and the binomial crossover trims the trial to the parent's
length (indices past a shorter trial keep the parent's values). Depth changes
come from a separate cut-and-swap pass run on random disjoint pairs after the
per-slot selection; its children concatenate complementary slices of the two
parents, so candidate lengths can grow and shrink while total length is
conserved within each pair.

All random draws for the operators happen on the driver in a fixed order;
fitness evaluations are the only part that may run on worker threads, which
keeps seeded runs fully reproducible at any worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .encoding import MAX_VALUE
from .exceptions import ConfigError, EvaluationError

DIM_MIN = 0.0
DIM_MAX = float(MAX_VALUE)


@dataclass
class EvolutionConfig:
    """Search hyperparameters. Defaults follow the reference configuration."""

    population_size: int = 30
    generations: int = 20
    differential_rate: float = 0.6   # scale of the donor difference vector
    crossover_rate: float = 0.45     # per-dimension probability of taking the trial
    init_length_mean: float = 10.0   # center of the initial-depth Gaussian
    init_length_std: float = 1.0     # its standard deviation
    cut_std: float = 2.0             # spread of cut points around each parent's midpoint
    min_length: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ConfigError("population_size must be >= 4 (mutation draws 3 distinct others)")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if self.differential_rate <= 0:
            raise ConfigError("differential_rate must be > 0")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigError("crossover_rate must lie in [0, 1]")
        if self.init_length_std <= 0:
            raise ConfigError("init_length_std must be > 0")
        if self.cut_std <= 0:
            raise ConfigError("cut_std must be > 0")
        if self.min_length < 1:
            raise ConfigError("min_length must be >= 1")


@dataclass
class Individual:
    genome: np.ndarray
    fitness: float | None = None


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    mean_length: float
    best_genome: np.ndarray


@dataclass
class EvolutionTrace:
    """Per-generation summaries; index 0 is the evaluated initial population."""

    records: list[GenerationRecord] = field(default_factory=list)

    def best_fitness_series(self) -> list[float]:
        return [r.best_fitness for r in self.records]

    def final(self) -> GenerationRecord:
        return self.records[-1]


def sample_length(mean: float, std: float, min_length: int, rng) -> int:
    """Genome length drawn from a rounded Gaussian, clamped below."""
    draw = rng.normal(mean, std)
    return max(min_length, int(np.rint(draw)))


def init_population(config: EvolutionConfig, rng) -> list[Individual]:
    """Random genomes with Gaussian lengths and uniform dimension values."""
    population = []
    for _ in range(config.population_size):
        length = sample_length(config.init_length_mean, config.init_length_std,
                               config.min_length, rng)
        population.append(Individual(rng.uniform(DIM_MIN, DIM_MAX, size=length)))
    return population


def mutate(x_r0: np.ndarray, x_r1: np.ndarray, x_r2: np.ndarray,
           differential_rate: float) -> np.ndarray:
    """Donor combination x_r0 + F*(x_r1 - x_r2), trimmed to the shortest donor."""
    length = min(len(x_r0), len(x_r1), len(x_r2))
    trial = x_r0[:length] + differential_rate * (x_r1[:length] - x_r2[:length])
    return np.clip(trial, DIM_MIN, DIM_MAX)


def de_crossover(parent: np.ndarray, trial: np.ndarray, crossover_rate: float,
                 rng) -> np.ndarray:
    """Binomial crossover; the result always has the parent's length.

    One forced index j_rand guarantees at least one trial dimension crosses
    over (when the trial reaches that index); past the trial's end the
    parent's dimensions are kept unconditionally.
    """
    length = len(parent)
    trial = trial[:length]
    j_rand = int(rng.integers(length))
    take = rng.random(length) < crossover_rate
    take[j_rand] = True
    take[len(trial):] = False
    result = parent.copy()
    result[np.flatnonzero(take)] = trial[np.flatnonzero(take)]
    return result


def de_select(parent: Individual, trial: Individual) -> Individual:
    """Keep the fitter of parent and trial; ties go to the trial."""
    if parent.fitness is None or trial.fitness is None:
        raise ValueError("selection requires evaluated individuals")
    return trial if trial.fitness >= parent.fitness else parent


def second_crossover(p1: np.ndarray, p2: np.ndarray, cut_std: float,
                     rng) -> tuple[np.ndarray, np.ndarray]:
    """Cut-and-swap pair crossover; cut points cluster around each midpoint.

    Each parent's cut index is a rounded Gaussian centered on half its length,
    clamped so both slices are non-empty. Children swap tails, so their
    lengths generally differ from the parents' while the pair total is
    conserved.
    """
    cuts = []
    for parent in (p1, p2):
        draw = int(np.rint(rng.normal(len(parent) / 2.0, cut_std)))
        cuts.append(min(max(draw, 1), len(parent) - 1))
    c1 = np.concatenate([p1[:cuts[0]], p2[cuts[1]:]])
    c2 = np.concatenate([p2[:cuts[1]], p1[cuts[0]:]])
    return c1, c2


def second_selection(p1: Individual, p2: Individual, c1: Individual,
                     c2: Individual) -> tuple[Individual, Individual]:
    """Two fittest of {parents, children}; ties prefer children, then order."""
    contenders = [c1, c2, p1, p2]
    if any(ind.fitness is None for ind in contenders):
        raise ValueError("selection requires evaluated individuals")
    ranked = sorted(contenders, key=lambda ind: -ind.fitness)  # stable
    return ranked[0], ranked[1]


def _evaluate(individuals, evaluator, workers):
    """Fill in missing fitnesses, optionally on a thread pool.

    Results are assigned back in list order, so worker count never changes
    the outcome for a deterministic evaluator.
    """
    pending = [ind for ind in individuals if ind.fitness is None]

    def call(ind):
        try:
            fitness = float(evaluator(ind.genome))
        except Exception as exc:
            raise EvaluationError(f"evaluator failed on candidate {ind.genome!r}: {exc}",
                                  genome=ind.genome) from exc
        if not np.isfinite(fitness) or not 0.0 <= fitness <= 1.0:
            raise EvaluationError(f"evaluator returned fitness {fitness} outside [0, 1] "
                                  f"for candidate {ind.genome!r}", genome=ind.genome)
        return fitness

    if workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fitnesses = list(pool.map(call, pending))
    else:
        fitnesses = [call(ind) for ind in pending]
    for ind, fitness in zip(pending, fitnesses):
        ind.fitness = fitness


def _record(trace, generation, population):
    best = max(population, key=lambda ind: ind.fitness)
    trace.records.append(GenerationRecord(
        generation=generation,
        best_fitness=best.fitness,
        mean_fitness=float(np.mean([ind.fitness for ind in population])),
        mean_length=float(np.mean([len(ind.genome) for ind in population])),
        best_genome=best.genome.copy(),
    ))
    return best


def evolve(config: EvolutionConfig, evaluator, workers: int = 1):
    """Run the full search; returns (best individual, trace).

    Each generation: (a) every slot builds a trial via mutation + binomial
    crossover against the generation-start population, trials are evaluated,
    and each slot keeps the fitter of parent and trial; (b) survivors are
    shuffled into disjoint pairs, eligible pairs (both parents length >= 2)
    produce two children by cut-and-swap, and the two fittest of each
    pair-plus-children quartet take the pair's slots. The best individual can
    never be displaced by a worse one, so best fitness is non-decreasing.
    """
    rng = np.random.default_rng(config.seed)
    population = init_population(config, rng)
    _evaluate(population, evaluator, workers)

    trace = EvolutionTrace()
    best_ever = _record(trace, 0, population)

    n = config.population_size
    for generation in range(1, config.generations + 1):
        # (a) per-slot DE step, synchronous against the generation-start population
        trials = []
        for i in range(n):
            others = np.delete(np.arange(n), i)
            r0, r1, r2 = rng.choice(others, size=3, replace=False)
            donor = mutate(population[r0].genome, population[r1].genome,
                           population[r2].genome, config.differential_rate)
            trials.append(Individual(de_crossover(population[i].genome, donor,
                                                  config.crossover_rate, rng)))
        _evaluate(trials, evaluator, workers)
        population = [de_select(population[i], trials[i]) for i in range(n)]

        # (b) cut-and-swap on random disjoint pairs
        order = rng.permutation(n)
        eligible = []
        children = []
        for k in range(n // 2):
            a, b = int(order[2 * k]), int(order[2 * k + 1])
            if len(population[a].genome) < 2 or len(population[b].genome) < 2:
                continue
            g1, g2 = second_crossover(population[a].genome, population[b].genome,
                                      config.cut_std, rng)
            eligible.append((a, b))
            children.append((Individual(g1), Individual(g2)))
        _evaluate([c for pair in children for c in pair], evaluator, workers)
        for (a, b), (c1, c2) in zip(eligible, children):
            population[a], population[b] = second_selection(population[a], population[b],
                                                            c1, c2)

        generation_best = _record(trace, generation, population)
        if generation_best.fitness > best_ever.fitness:
            best_ever = generation_best

    return best_ever, trace
