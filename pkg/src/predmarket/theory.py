"""Closed forms and bounds relating data purchase to user-experienced quality.

For the 0/1 correctness quality, a user's softmax choice at temperature
alpha gives the selected model an expected quality that depends on the
per-point average quality Z = N_correct / M alone:

    k(z, alpha) = z e^alpha / (z e^alpha + (1 - z))

so QoE = E[k(Z, alpha)] >= E[Z] = overall quality, with equality at alpha=0.

Comparing two markets with Z-distributions Z1, Z2 on the lattice
{0, 1/M, ..., 1} (means mu1 <= mu2), define

    c_low = M (e^a - 1) / ((M-1) e^a + 1)
    c_upp = M (e^a - 1) / (e^a + M - 1)
    c1    = c_low / c_upp = (e^a + M - 1) / ((M-1) e^a + 1)  <= 1
    c2    = -c1 mu1 (1-mu1) + (mu2 - mu1)/c_upp + mu2 (1-mu2)

Then c_low z(1-z) <= k(z) - z <= c_upp z(1-z) on the lattice, and

    Var[Z2] >= c1 Var[Z1] + c2   =>   QoE(Z2) <= QoE(Z1)

even though mu2 >= mu1: the higher-overall-quality market can deliver a
worse experience. c_alpha is the temperature above which the c2 term is
non-negative, making the weaker published condition Var[Z2] >= c1 Var[Z1]
insufficient on its own; the checker evaluates the full inequality and
reports both forms.

For general non-negative qualities there is no such closed form, but the
softmax expectation is non-decreasing in alpha and sandwiched between the
per-point mean and the per-point max.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

LATTICE_TOLERANCE = 1e-9


def k_closed_form(z, alpha):
    """Expected selected-model quality given average correctness z:
    k(z, alpha) = z e^alpha / (z e^alpha + (1 - z)).

    Accepts scalars or arrays; k(0, a) = 0 and k(1, a) = 1 exactly.
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0.0) or np.any(z > 1.0):
        raise ValueError("z must lie in [0, 1]")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    # divide in the e^{-alpha} form so large alpha cannot overflow
    ea = math.exp(-float(alpha))
    out = z / (z + (1.0 - z) * ea)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DynamicsSummary:
    """Sufficient statistics of one market's average-quality distribution:
    M, alpha, the Z samples (multiples of 1/M in [0,1]), their mean and
    population variance."""

    n_predictors: int
    alpha: float
    z_samples: np.ndarray
    mu: float
    var: float

    def __post_init__(self):
        z = np.asarray(self.z_samples, dtype=np.float64)
        object.__setattr__(self, "z_samples", z)
        if self.n_predictors < 2:
            raise ValueError("need at least 2 predictors")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if z.size == 0:
            raise ValueError("need at least one Z sample")
        if np.any(z < 0.0) or np.any(z > 1.0):
            raise ValueError("Z values must lie in [0, 1]")
        lattice = np.rint(z * self.n_predictors)
        if np.max(np.abs(z * self.n_predictors - lattice)) > LATTICE_TOLERANCE:
            raise ValueError("Z values must be multiples of 1/M")
        if not 0.0 <= self.mu <= 1.0 or self.var < 0.0:
            raise ValueError("inconsistent moments")

    @classmethod
    def from_samples(cls, n_predictors: int, alpha: float, z_samples) -> "DynamicsSummary":
        """Summary of an empirical list of Z values (population moments)."""
        z = np.asarray(z_samples, dtype=np.float64)
        return cls(
            n_predictors=n_predictors,
            alpha=alpha,
            z_samples=z,
            mu=float(z.mean()),
            var=float(z.var()),
        )

    @classmethod
    def from_counts(cls, n_predictors: int, alpha: float, counts) -> "DynamicsSummary":
        """Summary of a distribution given by integer masses on the lattice
        {0, 1/M, ..., 1}; mean and variance are computed in exact rational
        arithmetic before conversion to float."""
        counts = list(counts)
        M = n_predictors
        if len(counts) != M + 1:
            raise ValueError(f"counts must have length M+1 = {M + 1}")
        if any(c < 0 for c in counts) or sum(counts) == 0:
            raise ValueError("counts must be non-negative with positive total")
        total = sum(counts)
        mu = sum(Fraction(j, M) * c for j, c in enumerate(counts)) / total
        second = sum(Fraction(j, M) ** 2 * c for j, c in enumerate(counts)) / total
        var = second - mu * mu
        z = np.repeat(np.arange(M + 1) / M, counts)
        return cls(
            n_predictors=M,
            alpha=alpha,
            z_samples=z,
            mu=float(mu),
            var=float(var),
        )


def qoe_from_lemma(summary: DynamicsSummary) -> float:
    """QoE of a market from its Z samples alone: mean of k(Z, alpha)."""
    return float(k_closed_form(summary.z_samples, summary.alpha).mean())


def softmax_expectation(qualities, alpha: float) -> float:
    """Direct evaluation of sum_j p_j q_j with p_j proportional to
    exp(alpha q_j) — the selection-rule expectation with no closed form."""
    q = np.asarray(qualities, dtype=np.float64)
    scaled = alpha * q
    e = np.exp(scaled - scaled.max())
    return float((e / e.sum() * q).sum())


def theorem3_bounds(per_point_qualities, alpha: float):
    """Mean/softmax/max sandwich for a general non-negative quality.

    ``per_point_qualities`` is an (n, M) array of q values. Returns
    (lower, value, upper): the mean over points of the per-point average,
    of the softmax-weighted expectation at temperature alpha, and of the
    per-point maximum. Always lower <= value <= upper, with value
    non-decreasing in alpha and value = lower at alpha = 0.
    """
    q = np.asarray(per_point_qualities, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] < 2:
        raise ValueError("need an (n, M) array with M >= 2")
    if np.any(q < 0.0) or not np.all(np.isfinite(q)):
        raise ValueError("qualities must be finite and non-negative")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    lower = float(q.mean(axis=1).mean())
    scaled = alpha * q
    e = np.exp(scaled - scaled.max(axis=1, keepdims=True))
    weights = e / e.sum(axis=1, keepdims=True)
    value = float((weights * q).sum(axis=1).mean())
    upper = float(q.max(axis=1).mean())
    return lower, value, upper


@dataclass(frozen=True)
class TheoremOneConstants:
    """Explicit constants of the two-market comparison at (M, alpha) with
    means (mu1, mu2). ``c_alpha`` is +inf when its defining ratio has a
    non-positive denominator and 0 when the ratio is at most 1."""

    c_low: float
    c_upp: float
    c1: float
    c2: float
    c_alpha: float


def theorem1_constants(M: int, alpha: float, mu1: float, mu2: float) -> TheoremOneConstants:
    """Compute (c_low, c_upp, c1, c2, c_alpha); requires M >= 2, alpha > 0,
    and both means strictly inside (0, 1)."""
    if M < 2:
        raise ValueError("M must be >= 2")
    if alpha <= 0:
        raise ValueError("alpha must be positive (constants degenerate at 0)")
    if not (0.0 < mu1 < 1.0 and 0.0 < mu2 < 1.0):
        raise ValueError("means must lie strictly inside (0, 1)")
    ea = math.exp(alpha)
    c_low = M * (ea - 1.0) / ((M - 1) * ea + 1.0)
    c_upp = M * (ea - 1.0) / (ea + M - 1.0)
    c1 = (ea + M - 1.0) / ((M - 1) * ea + 1.0)
    s1 = mu1 * (1.0 - mu1)
    s2 = mu2 * (1.0 - mu2)
    c2 = -c1 * s1 + (mu2 - mu1) / c_upp + s2
    num = (M - 1) * s1 - s2
    den = (M - 1) * s2 - s1
    if den <= 0.0:
        c_alpha = math.inf
    elif num <= den:
        c_alpha = 0.0
    else:
        c_alpha = math.log(num / den)
    return TheoremOneConstants(c_low=c_low, c_upp=c_upp, c1=c1, c2=c2, c_alpha=c_alpha)


@dataclass(frozen=True)
class TheoremOneVerdict:
    """Outcome of the sufficient-condition check on a market pair.

    ``holds`` is the full inequality Var[Z2] >= c1 Var[Z1] + c2 together
    with alpha >= c_alpha; when true, QoE(second) <= QoE(first) is
    guaranteed. ``statement_holds`` is the weaker published form
    Var[Z2] >= c1 Var[Z1] (same alpha gate) and carries no guarantee by
    itself. QoE values are computed from the Z samples for reference.
    """

    holds: bool
    statement_holds: bool
    constants: TheoremOneConstants
    qoe_first: float
    qoe_second: float


def theorem1_condition(s1: DynamicsSummary, s2: DynamicsSummary) -> TheoremOneVerdict:
    """Check whether the purchase-rich market (s2, the one with the larger
    mean) is guaranteed a lower QoE than s1 despite its higher overall
    quality."""
    if s1.n_predictors != s2.n_predictors:
        raise ValueError("market pair must share M")
    if s1.alpha != s2.alpha:
        raise ValueError("market pair must share alpha")
    if s2.mu < s1.mu:
        raise ValueError("expected s2.mu >= s1.mu (relabel the pair)")
    constants = theorem1_constants(s1.n_predictors, s1.alpha, s1.mu, s2.mu)
    alpha_ok = s1.alpha >= constants.c_alpha
    full = alpha_ok and s2.var >= constants.c1 * s1.var + constants.c2
    stated = alpha_ok and s2.var >= constants.c1 * s1.var
    return TheoremOneVerdict(
        holds=full,
        statement_holds=stated,
        constants=constants,
        qoe_first=qoe_from_lemma(s1),
        qoe_second=qoe_from_lemma(s2),
    )


# ------------------------------------------------------------------
# verification battery (behind the verify-theory CLI subcommand)
# ------------------------------------------------------------------

BATTERY_TOLERANCE = 1e-12
_BATTERY_ALPHAS = (0.0, 0.5, 1.0, 2.0, 4.0)
_SWEEP_ALPHAS = (0.5, 1.0, 2.0, 4.0, 8.0)
_SWEEP_MS = (3, 4, 5, 10)


def _random_counts(rng, M: int) -> np.ndarray:
    """Integer masses over the lattice {0..M}; half the time polarized
    toward the endpoints so the sufficient condition actually fires."""
    if rng.random() < 0.5:
        counts = rng.integers(0, 10, size=M + 1)
    else:
        counts = np.zeros(M + 1, dtype=np.int64)
        counts[0] = rng.integers(1, 12)
        counts[M] = rng.integers(1, 12)
        counts[rng.integers(0, M + 1)] += rng.integers(0, 3)
    if counts.sum() == 0:
        counts[rng.integers(0, M + 1)] = 1
    return counts


def _mid_counts(rng, M: int) -> np.ndarray:
    """Masses concentrated on the interior of the lattice (low variance)."""
    counts = np.zeros(M + 1, dtype=np.int64)
    lo = max(1, M // 3)
    hi = M - lo
    for j in range(lo, hi + 1):
        counts[j] = rng.integers(1, 10)
    if counts.sum() == 0:
        counts[M // 2] = 1
    return counts


def run_verification_battery(seed: int = 0, n_vectors: int = 1000,
                             n_instances: int = 500,
                             n_pairs: int = 10_000) -> dict:
    """Machine-readable self-check of the closed form, the general-quality
    bounds, and the two-market sufficient condition.

    Returns a JSON-ready dict with one entry per check and an ``all_pass``
    flag; see the verify-theory CLI subcommand.
    """
    rng = np.random.default_rng(seed)
    checks = []

    # closed form vs direct softmax expectation on 0/1 quality vectors
    worst = 0.0
    for _ in range(n_vectors):
        M = int(rng.integers(2, 7))
        vec = (rng.random(M) < rng.random()).astype(np.float64)
        for alpha in _BATTERY_ALPHAS:
            direct = softmax_expectation(vec, alpha)
            closed = k_closed_form(vec.mean(), alpha)
            worst = max(worst, abs(direct - closed))
    checks.append({
        "name": "closed_form_matches_direct_expectation",
        "cases": n_vectors * len(_BATTERY_ALPHAS),
        "max_abs_error": worst,
        "pass": worst < BATTERY_TOLERANCE,
    })

    # sandwich bounds and monotonicity in alpha for general qualities
    worst_bound = 0.0
    worst_mono = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(1, 40))
        M = int(rng.integers(2, 9))
        q = rng.random((n, M)) * rng.choice((1.0, 5.0))
        prev = None
        for alpha in _BATTERY_ALPHAS + (8.0,):
            lower, value, upper = theorem3_bounds(q, alpha)
            worst_bound = max(worst_bound, lower - value, value - upper)
            if prev is not None:
                worst_mono = max(worst_mono, prev - value)
            prev = value
    checks.append({
        "name": "general_quality_bounds_and_monotonicity",
        "cases": n_instances,
        "worst_bound_violation": worst_bound,
        "worst_monotonicity_violation": worst_mono,
        "pass": worst_bound < BATTERY_TOLERANCE and worst_mono < BATTERY_TOLERANCE,
    })

    # sufficient-condition soundness sweep over random market pairs
    violations = 0
    fired = 0
    worst_margin = -math.inf
    example = None
    for M in _SWEEP_MS:
        for _ in range(n_pairs):
            alpha = float(rng.choice(_SWEEP_ALPHAS))
            low_var = DynamicsSummary.from_counts(M, alpha, _mid_counts(rng, M))
            high_var = DynamicsSummary.from_counts(M, alpha, _random_counts(rng, M))
            first, second = ((low_var, high_var)
                             if high_var.mu >= low_var.mu else (high_var, low_var))
            if not (0.0 < first.mu < 1.0 and 0.0 < second.mu < 1.0):
                continue
            verdict = theorem1_condition(first, second)
            if verdict.holds:
                fired += 1
                margin = verdict.qoe_second - verdict.qoe_first
                worst_margin = max(worst_margin, margin)
                if margin > BATTERY_TOLERANCE:
                    violations += 1
                if example is None:
                    example = {
                        "n_predictors": M,
                        "alpha": alpha,
                        "mu": [first.mu, second.mu],
                        "var": [first.var, second.var],
                        "constants": {
                            "c_low": verdict.constants.c_low,
                            "c_upp": verdict.constants.c_upp,
                            "c1": verdict.constants.c1,
                            "c2": verdict.constants.c2,
                            "c_alpha": verdict.constants.c_alpha,
                        },
                        "holds": verdict.holds,
                        "statement_holds": verdict.statement_holds,
                        "qoe_first": verdict.qoe_first,
                        "qoe_second": verdict.qoe_second,
                        "qoe_first_direct": float(np.mean([
                            softmax_expectation(
                                np.concatenate([np.ones(int(round(z * M))),
                                                np.zeros(M - int(round(z * M)))]),
                                alpha,
                            )
                            for z in first.z_samples
                        ])),
                    }
    checks.append({
        "name": "two_market_condition_soundness",
        "pairs_per_market_size": n_pairs,
        "market_sizes": list(_SWEEP_MS),
        "condition_fired": fired,
        "violations": violations,
        "worst_margin": None if worst_margin == -math.inf else worst_margin,
        "pass": violations == 0 and fired > 0,
    })

    return {
        "seed": seed,
        "tolerance": BATTERY_TOLERANCE,
        "checks": checks,
        "example_verdict": example,
        "all_pass": all(c["pass"] for c in checks),
    }
