"""Run-level comparison statistics: one-sample and Welch two-sample t-tests.

Both return the signed statistic together with a two-sided p-value from the
t-distribution. The two-sample test is Welch's: no equal-variance assumption,
Welch-Satterthwaite degrees of freedom.
"""

from typing import NamedTuple

import numpy as np
from scipy import stats as sps


class TTestResult(NamedTuple):
    statistic: float
    p_value: float


def _clean(sample, name):
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"{name} needs at least 2 values")
    return x


def one_sample_t(sample, reference: float) -> TTestResult:
    """t = (mean - reference) / (s / sqrt(n)), df = n - 1, two-sided p."""
    x = _clean(sample, "sample")
    s = x.std(ddof=1)
    if s == 0.0:
        raise ValueError("sample variance is zero")
    t = (x.mean() - reference) / (s / np.sqrt(x.size))
    p = 2.0 * sps.t.sf(abs(t), x.size - 1)
    return TTestResult(float(t), float(p))


def two_sample_t(a, b) -> TTestResult:
    """Welch's unequal-variance t with Welch-Satterthwaite df, two-sided p."""
    x, y = _clean(a, "first sample"), _clean(b, "second sample")
    vx, vy = x.var(ddof=1), y.var(ddof=1)
    sx, sy = vx / x.size, vy / y.size
    if sx + sy == 0.0:
        raise ValueError("both samples have zero variance")
    t = (x.mean() - y.mean()) / np.sqrt(sx + sy)
    df = (sx + sy) ** 2 / (sx ** 2 / (x.size - 1) + sy ** 2 / (y.size - 1))
    p = 2.0 * sps.t.sf(abs(t), df)
    return TTestResult(float(t), float(p))
