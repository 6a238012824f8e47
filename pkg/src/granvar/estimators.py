"""Closed-form variance estimators for particulate sampling.

Two families are implemented.  The moment-based family predicts the
variance of the sample concentration from per-class deviations around the
sample concentration; its first term is the classical Gy model and the
dependence-weighted double sum is a correction for non-independent pair
selection.  The Horvitz-Thompson family weights class totals by inverse
inclusion probabilities and is exact under constant sample mass and
correct sampling; it admits a general form (explicit first/second-order
inclusion probabilities), a finite-batch form, and an infinite-batch form.

All accumulations use compensated summation, so the algebraic identities
between the forms hold to near machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDependenceError, FeasibilityError, NonIdentifiableError
from .model import BatchSpec, ClassTable, DependenceMatrix, ExpectationSummary, SampleSummary
from .util import fsum

#: Canonical grid over which the single-class dependence solution is tabulated.
GRID_N_K = (10, 100, 1000, 10000)
GRID_RATIO = (0.1, 0.2, 0.4, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class VarianceResult:
    """A variance value together with its two constituent terms.

    For the moment-based estimators ``value = gy_term - correction_term``
    where ``gy_term`` is the dependence-free (Gy) part.  For the
    Horvitz-Thompson estimator the same fields hold the diagonal sum and
    the dependence-weighted double sum: ``value = gy_term - correction_term``
    still, but ``gy_term`` is the inverse-probability diagonal term rather
    than the Gy model value.
    """

    value: float
    gy_term: float
    correction_term: float

    def __post_init__(self):
        residual = abs(self.value - (self.gy_term - self.correction_term))
        scale = max(abs(self.gy_term), abs(self.correction_term), abs(self.value))
        if residual > 1e-12 * max(scale, 1e-300):
            raise ValueError("value must equal gy_term - correction_term")


@dataclass(frozen=True)
class EmpiricalVarianceInput:
    """An empirically determined concentration variance and the count of
    analyte-bearing particles it refers to."""

    v_e: float
    n_k: float

    def __post_init__(self):
        if self.v_e < 0:
            raise ValueError(f"empirical variance must be >= 0, got {self.v_e}")
        if self.n_k < 1:
            raise ValueError(f"particle count must be >= 1, got {self.n_k}")


@dataclass(frozen=True)
class DependenceSolution:
    """Solved single-class dependence value; ``infeasible`` marks values >= 1
    (which no selection mechanism can realize but a user may legitimately
    obtain from inconsistent variance inputs)."""

    value: float
    infeasible: bool


def second_order_inclusion(q_i: float, q_j: float, c_ij: float) -> float:
    """Pair inclusion probability q_i * q_j * (1 - c_ij).

    Raises FeasibilityError when the result leaves [0, min(q_i, q_j)]:
    no selection design can give a pair a probability above either
    member's own inclusion probability.
    """
    if not (0.0 < q_i <= 1.0 and 0.0 < q_j <= 1.0):
        raise ValueError(f"first-order probabilities must be in (0, 1], got {q_i}, {q_j}")
    if not c_ij < 1.0:
        raise DegenerateDependenceError(f"dependence value must be < 1, got {c_ij}")
    pi_ij = q_i * q_j * (1.0 - c_ij)
    if pi_ij < 0.0 or pi_ij > min(q_i, q_j):
        raise FeasibilityError(
            f"pair probability {pi_ij} outside [0, {min(q_i, q_j)}] "
            f"for q_i={q_i}, q_j={q_j}, c_ij={c_ij}"
        )
    return pi_ij


def _as_dependence(c, k: int) -> np.ndarray:
    if isinstance(c, DependenceMatrix):
        arr = c.values
    else:
        arr = np.asarray(c, dtype=float)
    if arr.shape != (k, k):
        raise ValueError(f"dependence matrix must be {k}x{k}, got {arr.shape}")
    return arr


def _moment_variance(
    counts: np.ndarray, mass: float, conc: float, table: ClassTable, c: np.ndarray
) -> VarianceResult:
    m = table.masses
    dev = table.concentrations - conc
    inv_m2 = 1.0 / (mass * mass)
    gy = fsum(counts * m * m * dev * dev) * inv_m2
    a = counts * m * dev  # per-class deviation weight
    k = len(counts)
    corr = fsum(c[i, j] * a[i] * a[j] for i in range(k) for j in range(k)) * inv_m2
    return VarianceResult(gy - corr, gy, corr)


def variance_expected(
    exp: ExpectationSummary, table: ClassTable, c: DependenceMatrix | np.ndarray
) -> VarianceResult:
    """Variance of the sample concentration from expected class counts.

    value = (1/M'^2) * sum_i N'_i m_i^2 (c_i - c'_s)^2
          - (1/M'^2) * sum_ij C_ij N'_i N'_j m_i m_j (c_i - c'_s)(c_j - c'_s)

    The first term alone is the classical Gy prediction; the double sum is
    the dependent-selection correction, reported separately.
    """
    cm = _as_dependence(c, table.k)
    return _moment_variance(exp.counts_array, exp.mass, exp.concentration, table, cm)


def variance_sample(
    s: SampleSummary, table: ClassTable, c: DependenceMatrix | np.ndarray
) -> VarianceResult:
    """Plug-in estimator: same form as variance_expected with observed
    sample quantities in place of expectations."""
    cm = _as_dependence(c, table.k)
    return _moment_variance(s.counts_array, s.mass, s.concentration, table, cm)


def variance_gy(s: SampleSummary, table: ClassTable) -> float:
    """Classical Gy estimate: the dependence-free term of variance_sample.

    Distinct from :func:`gy_reference_variance`, which is the single-class
    reference value c_s * c_k * m_k / M_s used by the dependence solver.
    """
    return variance_sample(s, table, np.zeros((table.k, table.k))).gy_term


def gy_reference_variance(c_s: float, c_k: float, m_k: float, sample_mass: float) -> float:
    """Reference variance c_s * c_k * m_k / M_s for the single-analyte-class
    case: the value of the empirical variance at which the solved
    dependence parameter is exactly zero.

    Not the same quantity as :func:`variance_gy` (the dependence-free term
    of the moment estimator); for the canonical one-analyte sample the two
    differ, and both are exposed deliberately.
    """
    if not sample_mass > 0:
        raise ValueError(f"sample mass must be > 0, got {sample_mass}")
    return c_s * c_k * m_k / sample_mass


def variance_ht(
    s: SampleSummary, table: ClassTable, c: DependenceMatrix | np.ndarray
) -> VarianceResult:
    """Horvitz-Thompson variance estimator (infinite batch).

    value = (1/M_s^2) sum_i N_i m_i^2 c_i^2 / (1 - C_ii)
          - (1/M_s^2) sum_ij C_ij N_i N_j c_i c_j m_i m_j / (1 - C_ij)

    Assumes constant sample mass and correct sampling.  Any C_ij >= 1
    raises DegenerateDependenceError.
    """
    cm = _as_dependence(c, table.k)
    if np.any(cm >= 1.0):
        raise DegenerateDependenceError("all dependence values must be < 1")
    counts = s.counts_array
    m = table.masses
    conc = table.concentrations
    inv_m2 = 1.0 / (s.mass * s.mass)
    k = table.k
    first = fsum(
        counts[i] * m[i] ** 2 * conc[i] ** 2 / (1.0 - cm[i, i]) for i in range(k)
    ) * inv_m2
    w = counts * m * conc
    second = fsum(
        cm[i, j] * w[i] * w[j] / (1.0 - cm[i, j]) for i in range(k) for j in range(k)
    ) * inv_m2
    return VarianceResult(first - second, first, second)


def ht_single_class(
    c_s: float, c_k: float, m_k: float, sample_mass: float, n_k: float, c_kk: float
) -> float:
    """Horvitz-Thompson variance when only class k carries analyte.

    Equals (1/M_s) * c_s * (1 - N_k C_kk) * c_k * m_k / (1 - C_kk); the
    masses of the analyte-free classes drop out entirely.
    """
    if not c_kk < 1.0:
        raise DegenerateDependenceError(f"dependence value must be < 1, got {c_kk}")
    if not sample_mass > 0:
        raise ValueError(f"sample mass must be > 0, got {sample_mass}")
    return c_s * (1.0 - n_k * c_kk) * c_k * m_k / ((1.0 - c_kk) * sample_mass)


def solve_single_class_dependence(
    e: EmpiricalVarianceInput, v_gy: float
) -> DependenceSolution:
    """Invert the single-class estimator for the dependence parameter.

    Given an empirical variance V_e and the reference value
    v_gy = c_s * c_k * m_k / M_s, returns
    (V_e - v_gy) / (V_e - N_k * v_gy).  The solution round-trips through
    ht_single_class.  A zero denominator raises NonIdentifiableError;
    solutions >= 1 are returned with the infeasible flag set rather than
    raised, since inconsistent empirical inputs can legitimately produce
    them.
    """
    if not v_gy > 0:
        raise ValueError(f"reference variance must be > 0, got {v_gy}")
    denom = e.v_e - e.n_k * v_gy
    if denom == 0.0:
        raise NonIdentifiableError(
            f"V_e == N_k * v_gy ({e.v_e}): dependence value is not identifiable"
        )
    value = (e.v_e - v_gy) / denom + 0.0  # + 0.0 normalizes -0.0
    return DependenceSolution(value, infeasible=value >= 1.0)


def dependence_grid(
    n_k_values: Sequence[float] = GRID_N_K,
    ratio_values: Sequence[float] = GRID_RATIO,
) -> np.ndarray:
    """Single-class dependence solutions over an (N_k, V_e/v_gy) grid.

    Rows follow ``n_k_values``, columns ``ratio_values``; each cell is the
    solved dependence value at unit reference variance.
    """
    grid = np.empty((len(n_k_values), len(ratio_values)))
    for a, n_k in enumerate(n_k_values):
        for b, r in enumerate(ratio_values):
            grid[a, b] = solve_single_class_dependence(
                EmpiricalVarianceInput(v_e=float(r), n_k=float(n_k)), v_gy=1.0
            ).value
    return grid


def pi_expanded_concentration(
    s: SampleSummary, table: ClassTable, batch: BatchSpec
) -> float:
    """Inverse-probability-weighted estimate of the batch concentration:
    sum_i N_i m_i c_i / (M_batch * pi_i).

    When every pi_i equals M_s / M_batch this reduces to the sample
    concentration c_s.
    """
    if batch.k != table.k:
        raise ValueError(f"batch has {batch.k} classes, table has {table.k}")
    q = batch.q
    if np.any(q <= 0):
        raise ValueError("all first-order probabilities must be > 0")
    counts = s.counts_array
    return fsum(
        counts * table.masses * table.concentrations / (batch.batch_mass * q)
    )


def variance_ht_general(
    s: SampleSummary,
    table: ClassTable,
    pi: Sequence[float],
    pi_pair: np.ndarray,
    batch: BatchSpec,
) -> float:
    """Horvitz-Thompson variance with explicit inclusion probabilities.

    value = sum_ij N_i N_j (1/(pi_i pi_j) - 1/pi_ij) m_i m_j c_i c_j / M_batch^2
          + sum_i  N_i (1/pi_ii - 1/pi_i) m_i^2 c_i^2 / M_batch^2

    The pair weight vanishes when pi_ij = pi_i * pi_j, so independent
    selection contributes only through the diagonal sum.  A zero pi in a
    denominator whose coefficient is non-zero raises FeasibilityError.
    """
    k = table.k
    pi = np.asarray(pi, dtype=float)
    pi_pair = np.asarray(pi_pair, dtype=float)
    if pi.shape != (k,) or pi_pair.shape != (k, k):
        raise ValueError("pi must be length K and pi_pair K x K")
    if np.any(pi <= 0):
        raise FeasibilityError("all first-order probabilities must be > 0")
    counts = s.counts_array
    w = counts * table.masses * table.concentrations
    inv_mb2 = 1.0 / (batch.batch_mass * batch.batch_mass)
    terms = []
    for i in range(k):
        for j in range(k):
            coeff = w[i] * w[j]
            if coeff == 0.0:
                continue
            if pi_pair[i, j] <= 0:
                raise FeasibilityError(
                    f"pair probability pi[{i},{j}] must be > 0 for occupied classes"
                )
            terms.append(coeff * (1.0 / (pi[i] * pi[j]) - 1.0 / pi_pair[i, j]))
    pair_sum = fsum(terms) * inv_mb2
    terms = []
    for i in range(k):
        coeff = counts[i] * table.masses[i] ** 2 * table.concentrations[i] ** 2
        if coeff == 0.0:
            continue
        if pi_pair[i, i] <= 0:
            raise FeasibilityError(f"pair probability pi[{i},{i}] must be > 0")
        terms.append(coeff * (1.0 / pi_pair[i, i] - 1.0 / pi[i]))
    diag_sum = fsum(terms) * inv_mb2
    return pair_sum + diag_sum


def variance_ht_finite_batch(
    s: SampleSummary,
    table: ClassTable,
    c: DependenceMatrix | np.ndarray,
    batch: BatchSpec,
) -> float:
    """Horvitz-Thompson variance for a finite batch under correct sampling.

    value = sum_ij N_i N_j (1 - 1/(1-C_ij)) m_i m_j c_i c_j / M_s^2
          + sum_i (1/(1-C_ii) - M_s/M_batch) N_i m_i^2 c_i^2 / M_s^2

    Converges to variance_ht as M_s / M_batch -> 0; the difference is
    exactly (M_s/M_batch) * sum_i N_i m_i^2 c_i^2 / M_s^2.
    """
    cm = _as_dependence(c, table.k)
    if np.any(cm >= 1.0):
        raise DegenerateDependenceError("all dependence values must be < 1")
    if batch.batch_mass < s.mass:
        raise ValueError("batch mass must be at least the sample mass")
    counts = s.counts_array
    m = table.masses
    conc = table.concentrations
    inv_ms2 = 1.0 / (s.mass * s.mass)
    k = table.k
    w = counts * m * conc
    pair_sum = fsum(
        w[i] * w[j] * (1.0 - 1.0 / (1.0 - cm[i, j])) for i in range(k) for j in range(k)
    ) * inv_ms2
    ratio = s.mass / batch.batch_mass
    diag_sum = fsum(
        (1.0 / (1.0 - cm[i, i]) - ratio) * counts[i] * m[i] ** 2 * conc[i] ** 2
        for i in range(k)
    ) * inv_ms2
    return pair_sum + diag_sum
