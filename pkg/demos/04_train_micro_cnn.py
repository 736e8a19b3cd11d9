"""Train the built-in CNN directly, outside the evolutionary loop.

Builds a small conv/pool/dense stack on the synthetic digit set, trains it
with plain SGD, and roundtrips the weights through the debug checkpoint
format.
"""

import tempfile
from pathlib import Path

import numpy as np

from denas import ConvLayer, FullyConnectedLayer, PoolLayer, PoolType, make_split, synth_digits
from denas.cnn import accuracy, build_network, load_checkpoint, save_checkpoint, train

data = synth_digits(1500, seed=3)
split = make_split(data, fitness_fraction=0.2, seed=0)
print(f"{len(split.train)} training / {len(split.fitness)} held-out digit images")

genes = [ConvLayer(5, 8, 1), PoolLayer(2, 2, PoolType.MAX), FullyConnectedLayer(64)]
net = build_network(genes, (28, 28, 1), classes=10, rng=np.random.default_rng(0))
print("shape chain:", " -> ".join(str(s) for s in net.shape_trace()))

for epoch in range(1, 4):
    train(net, split.train.images, split.train.labels, epochs=1,
          batch_size=64, lr=0.1, rng=np.random.default_rng(epoch))
    score = accuracy(net, split.fitness.images, split.fitness.labels)
    print(f"epoch {epoch}: held-out accuracy {score:.3f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "weights.bin"
    save_checkpoint(net, path)
    restored = load_checkpoint(path)
    same = accuracy(restored, split.fitness.images, split.fitness.labels)
    print(f"checkpoint roundtrip: {path.stat().st_size} bytes, accuracy {same:.3f}")
