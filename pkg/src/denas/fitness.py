"""Fitness evaluation: genome decoding, shape validation, and the scorers.

A candidate decodes one layer per genome dimension (values rounded, then run
through the address codec). Architectures whose shapes collapse, or that put
spatial layers after the first fully-connected one, score 0.0 rather than
being repaired. Valid candidates are scored by training a small CNN and
measuring held-out accuracy; two deterministic surrogate landscapes stand in
for the trainer when exercising the search engine.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import cnn
from .encoding import (
    MAX_VALUE,
    ConvLayer,
    FullyConnectedLayer,
    LayerGene,
    PoolLayer,
    decode_interface,
    format_layer,
)
from .exceptions import ConfigError, TrainingDiverged


@dataclass
class EvalConfig:
    """Trainer settings for CNN-backed fitness evaluation."""

    epochs: int = 5
    fitness_fraction: float = 0.1   # held-out share sized against the train subset
    batch_size: int = 32
    learning_rate: float = 0.01
    train_subset: int | None = 2000  # None trains on everything but the held-out share
    dtype: str = "float64"           # training precision; float32 halves cost

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0.0 < self.fitness_fraction <= 1.0:
            raise ConfigError("fitness_fraction must lie in (0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.train_subset is not None and self.train_subset < 1:
            raise ConfigError("train_subset must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")


@dataclass
class FitnessReport:
    """Score plus decode/validity diagnostics for one candidate."""

    fitness: float
    layers: list
    valid: bool
    failure_reason: str | None = None

    def layer_texts(self) -> list[str]:
        return [format_layer(gene) for gene in self.layers]


@dataclass
class ArchitectureCheck:
    valid: bool
    shapes: list[tuple]  # input shape first, then one entry per layer
    reason: str | None = None


def decode_genome(genome) -> list[LayerGene]:
    """One layer per dimension: round to nearest address, clamp, decode."""
    values = np.clip(np.rint(np.asarray(genome, dtype=np.float64)), 0, MAX_VALUE)
    return [decode_interface(int(v)) for v in values]


def validate_architecture(layers, input_shape) -> ArchitectureCheck:
    """Simulate the shape chain; reject collapsed or misordered stacks."""
    shapes = [tuple(input_shape)]
    flattened = False
    for index, gene in enumerate(layers):
        if isinstance(gene, FullyConnectedLayer):
            shapes.append((gene.neurons,))
            flattened = True
            continue
        if flattened:
            kind = "conv" if isinstance(gene, ConvLayer) else "pool"
            return ArchitectureCheck(False, shapes,
                                     f"{kind} after flatten at layer {index + 1}")
        h, w, c = shapes[-1]
        if isinstance(gene, ConvLayer):
            window, stride, channels = gene.filter_size, gene.stride, gene.feature_maps
            kind = "conv filter"
        else:
            window, stride, channels = gene.kernel_size, gene.stride, c
            kind = "pool kernel"
        if window > h or window > w:
            return ArchitectureCheck(False, shapes,
                                     f"{kind} {window} exceeds {h}x{w} at layer {index + 1}")
        shapes.append(((h - window) // stride + 1, (w - window) // stride + 1, channels))
    return ArchitectureCheck(True, shapes)


def _genome_seed(genome, base_seed: int) -> int:
    """Stable per-candidate seed: same rounded genome, same training run."""
    values = np.clip(np.rint(np.asarray(genome, dtype=np.float64)), 0, MAX_VALUE)
    digest = hashlib.blake2b(values.astype(np.int64).tobytes(),
                             key=str(base_seed).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def evaluate_cnn(genome, config: EvalConfig, split, base_seed: int = 0) -> FitnessReport:
    """Decode, validate, train for the configured epochs, score held-out accuracy.

    Invalid architectures score 0.0 with the validation reason; runs whose
    loss goes non-finite score 0.0 with reason "diverged". The candidate's
    weight init and batch shuffling derive from its own rounded genome plus
    ``base_seed``, so repeat evaluations are identical and evaluations of
    distinct candidates can run concurrently.
    """
    layers = decode_genome(genome)
    input_shape = split.train.images.shape[1:]
    check = validate_architecture(layers, input_shape)
    if not check.valid:
        return FitnessReport(0.0, layers, False, check.reason)
    rng = np.random.default_rng(_genome_seed(genome, base_seed))
    network = cnn.build_network(layers, input_shape, split.train.classes, rng,
                                dtype=config.dtype)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            cnn.train(network, split.train.images, split.train.labels,
                      config.epochs, config.batch_size, config.learning_rate, rng)
    except TrainingDiverged:
        return FitnessReport(0.0, layers, True, "diverged")
    score = cnn.accuracy(network, split.fitness.images, split.fitness.labels)
    return FitnessReport(score, layers, True)


def surrogate_target(genome, target) -> float:
    """1 / (1 + d): d mixes scaled prefix-dim distance and length mismatch.

    Maximal (1.0) exactly when the genome equals the target.
    """
    g = np.asarray(genome, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    prefix = min(len(g), len(t))
    d = float(np.mean(np.abs(g[:prefix] - t[:prefix]))) / MAX_VALUE
    d += abs(len(g) - len(t))
    return 1.0 / (1.0 + d)


def surrogate_length(genome, ideal: int) -> float:
    """1 / (1 + |len - ideal|); dimension values are ignored."""
    if ideal < 1:
        raise ConfigError("ideal length must be >= 1")
    return 1.0 / (1.0 + abs(len(genome) - ideal))


@dataclass
class CnnEvaluator:
    """Engine-facing callable around evaluate_cnn, with per-genome memoization.

    Safe for concurrent calls on distinct candidates: the dataset split is
    read-only and every evaluation builds its own network and RNG.
    """

    split: object
    config: EvalConfig
    base_seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def report(self, genome) -> FitnessReport:
        key = np.clip(np.rint(np.asarray(genome, dtype=np.float64)),
                      0, MAX_VALUE).astype(np.int64).tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = evaluate_cnn(genome, self.config, self.split, self.base_seed)
            self._cache[key] = hit
        return hit

    def __call__(self, genome) -> float:
        return self.report(genome).fitness
