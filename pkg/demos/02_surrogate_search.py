"""Watch the engine pull a population onto a target genome.

The surrogate landscape peaks (fitness 1.0) at a fixed 4-layer target, mixing
per-dimension distance with a strong length penalty, so the run shows both
kinds of adaptation: lengths collapse from ~10 to 4, then the dimensions
slide into the right subnets.
"""

import numpy as np

from denas import EvolutionConfig, decode_genome, evolve, format_layer, genome_ips, surrogate_target

target = np.array([2068.0, 6162.0, 4215.0, 4179.0])  # conv, pool, fc, fc
print("Target architecture:")
for gene in decode_genome(target):
    print(f"  {format_layer(gene)}")

config = EvolutionConfig(seed=7)  # reference defaults: pop 30, 20 generations
best, trace = evolve(config, lambda g: surrogate_target(g, target))

print("\ngen  best     mean     mean_len")
for record in trace.records:
    print(f"{record.generation:3d}  {record.best_fitness:.4f}  "
          f"{record.mean_fitness:.4f}  {record.mean_length:5.2f}")

print(f"\nBest fitness {best.fitness:.4f} with genome {genome_ips(best.genome)}")
print("Decoded best:")
for gene in decode_genome(best.genome):
    print(f"  {format_layer(gene)}")
