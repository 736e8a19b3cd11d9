"""A miniature end-to-end architecture search (about a minute of CPU).

Evolves CNN architectures on a small synthetic digit problem, then compares
the winner against randomly sampled valid architectures trained identically.
Scale everything up (population, generations, data) for real runs; this demo
keeps sizes tiny so it finishes quickly.
"""

import numpy as np

from denas import (
    EvalConfig,
    EvolutionConfig,
    CnnEvaluator,
    Split,
    decode_genome,
    evaluate_cnn,
    evolve,
    format_layer,
    make_split,
    synth_digits,
    validate_architecture,
)
from denas.engine import sample_length

rng_seed = 0
train_pool = synth_digits(660, seed=42)
test_set = synth_digits(300, seed=43)
split = make_split(train_pool, fitness_fraction=60 / 660, subset_size=660,
                   seed=0, test=test_set)
eval_config = EvalConfig(epochs=2, batch_size=64, learning_rate=0.1,
                         train_subset=None, dtype="float32")

config = EvolutionConfig(population_size=6, generations=3,
                         init_length_mean=4.0, seed=rng_seed)
evaluator = CnnEvaluator(split, eval_config, base_seed=rng_seed)
best, trace = evolve(config, evaluator)

print("gen  best   mean   mean_len")
for record in trace.records:
    print(f"{record.generation:3d}  {record.best_fitness:.3f}  "
          f"{record.mean_fitness:.3f}  {record.mean_length:5.2f}")

print("\nEvolved best:")
for gene in decode_genome(best.genome):
    print(f"  {format_layer(gene)}")

retrained = evaluate_cnn(best.genome, eval_config,
                         Split(split.train, split.test), base_seed=rng_seed)
print(f"test accuracy {retrained.fitness:.3f}")

print("\nRandom valid architectures trained identically:")
rng = np.random.default_rng(1000)
scores = []
while len(scores) < 4:
    genome = rng.uniform(0.0, 8191.0, sample_length(4.0, 1.0, 1, rng))
    if not validate_architecture(decode_genome(genome), (28, 28, 1)).valid:
        continue
    report = evaluate_cnn(genome, eval_config, Split(split.train, split.test),
                          base_seed=rng_seed)
    scores.append(report.fitness)
    print(f"  {report.fitness:.3f}  " +
          " | ".join(format_layer(g) for g in report.layers))

print(f"\nevolved {retrained.fitness:.3f} vs random mean {np.mean(scores):.3f}")
