"""Multi-run campaigns, persisted records, and the comparison table.

Runs two small surrogate campaigns with different generation budgets into a
temporary directory, then builds the report (mean/std/best error plus a Welch
p-value against the first campaign). The same flow drives the CLI:

    denas campaign --config my.yaml
    denas report results/a results/b --csv table.csv
"""

import tempfile
from pathlib import Path

from denas import RunConfig, one_sample_t, report, run_campaign, two_sample_t

with tempfile.TemporaryDirectory() as tmp:
    base = {
        "evaluator": "surrogate_target",
        "target": ["8.20", "28.10", "16.99"],
        "runs": 8,
        "evolution": {"population_size": 10, "generations": 6,
                      "init_length_mean": 5.0, "seed": 0},
    }
    fast = RunConfig.from_dict({**base, "name": "six-gens",
                                "output": str(Path(tmp) / "a")})
    slow = RunConfig.from_dict({**base, "name": "one-gen",
                                "output": str(Path(tmp) / "b"),
                                "evolution": {**base["evolution"], "generations": 1}})

    result_fast = run_campaign(fast)
    result_slow = run_campaign(slow)
    print(report([Path(tmp) / "a", Path(tmp) / "b"]))

    t, p = two_sample_t(result_fast.errors, result_slow.errors)
    print(f"\nWelch t between the campaigns: t={t:.3f}, p={p:.4f}")

    t, p = one_sample_t(result_fast.errors, 0.5)
    print(f"six-gens errors vs a reference error of 0.5: t={t:.3f}, p={p:.4g}")
