"""denas: variable-length differential evolution for CNN architecture search.

The package splits into small layers:

``encoding``
    Bit-exact codec between layer descriptions and 2-byte address values.
``engine``
    The variable-length differential-evolution loop and its operators.
``fitness``
    Genome decoding, architecture validation, CNN-backed and surrogate
    fitness functions.
``cnn``
    Minimal float64 conv/pool/dense network with exact backprop and SGD.
``datasets``
    Benchmark file loaders (text-matrix and IDX), deterministic splits,
    synthetic data generators.
``stats`` / ``experiment`` / ``cli``
    t-test comparisons, seeded campaign persistence, and the command line.
"""

from .encoding import (
    ConvLayer,
    FullyConnectedLayer,
    PoolLayer,
    PoolType,
    Subnet,
    canonicalize,
    decode_interface,
    encode_layer,
    format_ip,
    format_layer,
    parse_ip,
    parse_layer,
    subnet_of,
)
from .engine import (
    EvolutionConfig,
    EvolutionTrace,
    GenerationRecord,
    Individual,
    de_crossover,
    de_select,
    evolve,
    init_population,
    mutate,
    sample_length,
    second_crossover,
    second_selection,
)
from .exceptions import ConfigError, DataError, EvaluationError, TrainingDiverged
from .fitness import (
    CnnEvaluator,
    EvalConfig,
    FitnessReport,
    decode_genome,
    evaluate_cnn,
    surrogate_length,
    surrogate_target,
    validate_architecture,
)
from .datasets import (
    LabeledDataset,
    Split,
    load_amat,
    load_idx,
    make_split,
    synth_blobs,
    synth_digits,
    take_stratified,
)
from .stats import TTestResult, one_sample_t, two_sample_t
from .experiment import (
    CampaignResult,
    DataConfig,
    RunConfig,
    genome_ips,
    load_campaign,
    report,
    run_campaign,
    run_single,
)

__version__ = "0.1.0"
