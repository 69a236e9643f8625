"""Self-contained verification suites behind the `check` CLI command.

Three suites, each a list of named pass/fail results:

* ``oracles`` - recomputes transition probabilities by routes that share no
  code with the production path (closed forms, the hypoexponential identity,
  and a vectorized Monte-Carlo simulation of the pairwise-merge process) and
  compares.  The probability function under test is injectable (`g_fn`) so a
  deliberately perturbed implementation can be shown to fail.
* ``dominance`` - the stochastic-order statements the balanced bound rests
  on: even splits dominate uneven ones, the balanced shape dominates every
  enumerated topology, pmfs are ultra-log-concave, transition rows are
  likelihood-ratio ordered, and simulated Yule root counts stay below the
  balanced reference (one-sided Kolmogorov-Smirnov).
* ``asymptotics`` - regime checks: the small- and large-time shapes of
  g(k, 1, T), the three sample-size regimes, the gap law toward the limit
  distribution, and the limit density's consistency with its CDF.

`run_suite` dispatches on suite name ("all" concatenates the three).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import coalescent
from .asymptotics import (
    HypoexponentialSpec,
    f_infinity,
    g_large_T_approx,
    g_small_T_approx,
    hypoexp_cdf,
    m_o_asymptotics,
    s_infinity,
)
from .bounds import balanced_lineage_distributions
from .coalescent import LineageDistribution, convolve, evolve
from .errors import DomainError
from .mscsim import root_lineage_distribution, sample_root_entry_counts
from .treegen import balanced, enumerate_topologies, shape_key, yule

SUITES = ("oracles", "dominance", "asymptotics", "all")

_MC_SEED = 20240811
_KS_SEED = 977003


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _result(name: str, worst: float, limit: float, scale: str) -> CheckResult:
    return CheckResult(name, worst <= limit, f"worst {scale} {worst:.3e} (limit {limit:.1e})")


# --------------------------------------------------------------------------
# oracles


def _mc_lineage_frequencies(i: int, T: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Frequencies of surviving counts 1..i from `n` direct simulations.

    Independent route: per trial, accumulate the exponential waiting times of
    the pairwise-merge process (mean 2/(m(m-1)) while m lineages remain) and
    count how many merges finish within T.
    """
    elapsed = np.zeros(n)
    merges = np.zeros(n, dtype=np.int64)
    for m in range(i, 1, -1):
        elapsed += rng.exponential(scale=2.0 / (m * (m - 1)), size=n)
        merges += elapsed <= T
    counts = i - merges
    return np.bincount(counts, minlength=i + 1)[1:] / n


def check_oracles(g_fn: Callable[[int, int, float], float] | None = None) -> list[CheckResult]:
    g = g_fn or coalescent.g
    out = []

    worst = 0.0
    for T in (0.05, 0.3, 1.0, 2.5, 7.0):
        worst = max(worst, abs(g(2, 1, T) - (1.0 - math.exp(-T))))
    worst = max(
        worst,
        abs(g(3, 1, 1.0) - (1.0 - 1.5 * math.exp(-1.0) + 0.5 * math.exp(-3.0))),
    )
    out.append(_result("two- and three-lineage closed forms", worst, 1e-12, "abs error"))

    worst = 0.0
    for i in range(1, 11):
        for j in range(1, i + 1):
            expected = 1.0 if i == j else 0.0
            worst = max(worst, abs(g(i, j, 0.0) - expected))
    out.append(_result("zero-time identity kernel", worst, 0.0, "abs error"))

    worst = 0.0
    for k in range(2, 31):
        spec = HypoexponentialSpec.kingman(k)
        for T in (0.05, 0.2, 1.0, 5.0):
            worst = max(worst, abs(g(k, 1, T) - hypoexp_cdf(spec, T)))
    out.append(_result("hypoexponential CDF identity (k <= 30)", worst, 1e-9, "abs error"))

    n = 10**6
    rng = np.random.default_rng(_MC_SEED)
    worst = 0.0
    for i, T in ((5, 0.3), (10, 1.0), (20, 0.1)):
        freqs = _mc_lineage_frequencies(i, T, n, rng)
        for j in range(1, i + 1):
            p = g(i, j, T)
            se = math.sqrt(p * (1.0 - p) / n)
            gap = abs(freqs[j - 1] - p)
            worst = max(worst, gap - 4.0 * se)
    out.append(
        CheckResult(
            "Monte-Carlo agreement (10^6 trials, 4 SE per bin)",
            worst <= 0.0,
            f"worst excess over 4 SE {worst:.3e}",
        )
    )

    worst = 0.0
    for T in (0.01, 0.1, 0.5, 1.0, 5.0):
        for i in range(2, 61):
            total = math.fsum(g(i, j, T) for j in range(1, i + 1))
            worst = max(worst, abs(total - 1.0))
    out.append(_result("row stochasticity", worst, 1e-10, "abs error"))

    return out


# --------------------------------------------------------------------------
# dominance


def _cdf_on(dist: LineageDistribution, hi: int) -> np.ndarray:
    """CDF evaluated at 1..hi."""
    out = np.zeros(hi)
    acc = 0.0
    for count in range(1, hi + 1):
        acc += dist.prob(count)
        out[count - 1] = acc
    return out


def _split_sum(k: int, i: int, T: float) -> LineageDistribution:
    left = evolve(LineageDistribution.point(i), T)
    right = evolve(LineageDistribution.point(k - i), T)
    return convolve(left, right)


def _ulc_violation(dist: LineageDistribution) -> float:
    worst = 0.0
    for j, p in dist.items():
        below, above = dist.prob(j - 1), dist.prob(j + 1)
        worst = max(worst, (j + 1) * below * above - j * p * p)
    return worst


def check_dominance() -> list[CheckResult]:
    out = []

    worst = 0.0
    for T in (0.05, 0.2, 1.0, 5.0):
        for k in range(2, 17):
            sums = {i: _split_sum(k, i, T) for i in range(1, k // 2 + 1)}
            for i in range(1, k // 2 + 1):
                for j in range(i + 1, k // 2 + 1):
                    less_even = _cdf_on(sums[i], k)
                    more_even = _cdf_on(sums[j], k)
                    worst = max(worst, float(np.max(more_even - less_even)))
    out.append(_result("even splits dominate uneven splits (k <= 16)", worst, 1e-12, "CDF excess"))

    worst = 0.0
    for k in range(4, 9):
        reference = _cdf_on(balanced_lineage_distributions(k, 1.0).entering[k], k)
        seen = set()
        for tree in enumerate_topologies(k):
            key = shape_key(tree)
            if key in seen:
                continue
            seen.add(key)
            candidate = _cdf_on(root_lineage_distribution(tree), k)
            worst = max(worst, float(np.max(reference - candidate)))
    out.append(
        _result("balanced shape dominates all topologies (k <= 8)", worst, 1e-12, "CDF excess")
    )

    worst = 0.0
    for T in (0.05, 0.2, 1.0):
        tables = balanced_lineage_distributions(64, T)
        for ell in range(2, 65):
            worst = max(worst, _ulc_violation(tables.entering[ell]))
            worst = max(worst, _ulc_violation(tables.surviving[ell]))
    out.append(_result("ultra-log-concavity of subtree pmfs (l <= 64)", worst, 1e-14, "violation"))

    worst = 0.0
    for T in (0.2, 1.0, 5.0):
        for i in range(1, 21):
            for j in range(i, 21):
                for m in range(1, i + 1):
                    for n_ in range(m, i + 1):
                        cross = coalescent.g(i, n_, T) * coalescent.g(j, m, T)
                        straight = coalescent.g(i, m, T) * coalescent.g(j, n_, T)
                        worst = max(worst, cross - straight)
    out.append(
        _result("likelihood-ratio order of transition rows (i <= j <= 20)", worst, 1e-14, "violation")
    )

    n = 10**5
    alpha = 1e-3
    crit = math.sqrt(-math.log(alpha) / (2.0 * n))
    reference = _cdf_on(balanced_lineage_distributions(8, 1.0).entering[8], 8)
    worst = 0.0
    for replicate in range(20):
        tree = yule(8, 1.0, seed=_KS_SEED + replicate)
        draws = np.asarray(sample_root_entry_counts(tree, n, seed=_KS_SEED * 31 + replicate))
        empirical = np.cumsum(np.bincount(draws, minlength=9)[1:]) / n
        worst = max(worst, float(np.max(reference - empirical)))
    out.append(
        CheckResult(
            "Yule root counts below balanced reference (one-sided KS)",
            worst <= crit,
            f"worst CDF excess {worst:.4f} (critical {crit:.4f} at alpha {alpha})",
        )
    )

    return out


# --------------------------------------------------------------------------
# asymptotics


def _ratio_window(pairs: Sequence[tuple[float, float]], lo: float, hi: float) -> tuple[bool, str]:
    ratios = [a / b for a, b in pairs]
    return (
        all(lo <= r <= hi for r in ratios),
        f"ratios {', '.join(f'{r:.4f}' for r in ratios)} (window [{lo}, {hi}])",
    )


def check_asymptotics() -> list[CheckResult]:
    out = []

    pairs = []
    for k in (2, 5, 10):
        for T in (20.0, 25.0):
            pairs.append((1.0 - coalescent.g(k, 1, T), 1.0 - g_large_T_approx(k, T)))
    ok, detail = _ratio_window(pairs, 0.98, 1.02)
    out.append(CheckResult("large-time tail shape (T >= 20)", ok, detail))

    pairs = []
    # Probes keep k**2 * T <= 0.05 while g(k, 1, T) stays large enough
    # (>= ~1e-10) to evaluate with small relative error.
    for k, T in ((3, 5e-3), (4, 3e-3), (5, 2e-3)):
        pairs.append((coalescent.g(k, 1, T), g_small_T_approx(k, T)))
    ok, detail = _ratio_window(pairs, 0.98, 1.02)
    out.append(CheckResult("small-time power shape (k^2 T <= 0.05)", ok, detail))

    regime_cases = [
        ("large-T", 6, 30.0, 0.9, (0.95, 1.05)),
        ("small-T", 6, 1e-3, 0.9, (0.9, 1.1)),
        ("large-k", 400, 1.0, 0.9, (0.95, 1.05)),
    ]
    for regime, k, T, q, (lo, hi) in regime_cases:
        report = m_o_asymptotics(k, T, q, regime)
        out.append(
            CheckResult(
                f"sample-size regime {regime}",
                lo <= report.ratio <= hi,
                f"ratio {report.ratio:.4f} (window [{lo}, {hi}])",
            )
        )

    limit = f_infinity(1.0)
    gaps = [
        (k + 1) / 2.0 * (coalescent.g(k, 1, 1.0) - s_infinity(1.0)) for k in (100, 200, 400)
    ]
    closer = abs(gaps[2] - limit) < abs(gaps[1] - limit) < abs(gaps[0] - limit)
    above = all(a > limit for a in gaps)
    out.append(
        CheckResult(
            "gap law converges to the limit density",
            closer and above,
            f"scaled gaps {gaps[0]:.5f}, {gaps[1]:.5f}, {gaps[2]:.5f} -> {limit:.5f}",
        )
    )

    worst = 0.0
    h = 1e-5
    for T in np.linspace(0.2, 5.0, 25):
        t = float(T)
        numeric = (s_infinity(t + h) - s_infinity(t - h)) / (2.0 * h)
        worst = max(worst, abs(numeric - f_infinity(t)))
    out.append(_result("limit density matches CDF derivative", worst, 1e-5, "abs error"))

    return out


def run_suite(name: str, g_fn: Callable[[int, int, float], float] | None = None) -> list[CheckResult]:
    """Run one named suite ("all" for every suite) and return its results."""
    if name not in SUITES:
        raise DomainError(f"suite must be one of {SUITES}")
    results: list[CheckResult] = []
    if name in ("oracles", "all"):
        results.extend(check_oracles(g_fn))
    if name in ("dominance", "all"):
        results.extend(check_dominance())
    if name in ("asymptotics", "all"):
        results.extend(check_asymptotics())
    return results
