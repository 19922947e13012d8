"""Monte Carlo verification of the limiting spike predictions.

``run`` draws seeded replicas of a spiked model, reads off the eigenvalues
and eigenvector overlaps at the spike ranks, and aggregates them next to
the limiting values from the analytic layer.  Spikes that do not generate
an outlier must be flagged explicitly; for those the ranked eigenvalues
are checked against the limiting support edges instead of an outlier
location.  Replicas run on independent child streams spawned from a single
seed and are aggregated in replica order, so the result is byte-identical
whatever the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import free_additive, free_multiplicative
from .ensemble import EnsembleSample, SpikedModelSpec, draw_sample, overlaps, wishart_p
from .errors import NumericalError, SpecError, TheoryError
from .verdicts import SupportIntervals

# Desk-scale agreement tolerances behind the report-level pass flags.
RHO_TOL = 0.1
TAU_TOL = 0.05
EDGE_TOL = 0.05

UNIT_SLACK = 1e-8


@dataclass(frozen=True)
class SpikeOutcome:
    """Aggregated empirical against limiting numbers for one spike block.

    ``rho`` and ``tau`` are present exactly for outlier spikes; sticking
    spikes instead carry ``edge_distance`` (mean distance of the ranked
    eigenvalues to the nearest support edge) and ``edge_excess`` (largest
    excursion outside the support seen in any replica).  ``margin_above``
    and ``margin_below`` are the mean gaps between rho and the nearest
    eigenvalues ranked outside the block; a missing side means no
    eigenvalue is ranked there.  ``leakage`` is the mean over replicas of
    the largest normalized summed overlap onto any other spike block.
    """

    theta: float
    multiplicity: int
    is_outlier: bool
    rho: float | None
    tau: float | None
    eigenvalue_mean: float
    eigenvalue_stderr: float
    overlap_mean: float
    overlap_stderr: float
    overlap_sum_mean: float
    overlap_sum_stderr: float
    margin_above: float | None
    margin_below: float | None
    leakage: float
    edge_distance: float | None
    edge_excess: float | None

    def __post_init__(self):
        for name in ("eigenvalue_stderr", "overlap_stderr", "overlap_sum_stderr"):
            if getattr(self, name) < 0.0:
                raise SpecError(f"{name} must be nonnegative")
        for name in ("overlap_mean", "overlap_sum_mean", "leakage"):
            value = getattr(self, name)
            if not -1e-12 <= value <= 1.0 + UNIT_SLACK:
                raise SpecError(f"{name}={value!r} is outside [0, 1]")
        has_limits = self.rho is not None and self.tau is not None
        if self.is_outlier != has_limits:
            raise SpecError("rho and tau must be present iff the spike is an outlier")
        has_edges = self.edge_distance is not None and self.edge_excess is not None
        if self.is_outlier == has_edges:
            raise SpecError("edge statistics must be present iff the spike sticks")


@dataclass(frozen=True)
class VerificationResult:
    """Cross-replica aggregate for one model size, ready to serialize."""

    kind: str
    N: int
    reps: int
    seed: int
    aspect_ratio: float | None
    support: SupportIntervals
    spikes: tuple[SpikeOutcome, ...]

    def __post_init__(self):
        if self.reps < 1:
            raise SpecError(f"reps must be >= 1, got {self.reps!r}")
        if self.N < 1:
            raise SpecError(f"N must be >= 1, got {self.N!r}")
        object.__setattr__(self, "spikes", tuple(self.spikes))


def _theory(spec: SpikedModelSpec):
    """Limiting verdicts and support for a finite model.

    The multiplicative theory is evaluated at the realized aspect ratio
    N/p rather than the requested c, matching what the samples actually
    see after p is rounded to an integer.
    """
    if spec.kind == "additive_wigner":
        ctx = free_additive.AdditiveContext(spec.nu, spec.sigma2)
        verdicts = tuple(free_additive.classify_spike(ctx, t, k) for t, k in spec.spikes)
        return None, free_additive.support(ctx), verdicts
    aspect = spec.N / wishart_p(spec.N, spec.c)
    ctx = free_multiplicative.MultiplicativeContext(spec.nu, aspect)
    verdicts = tuple(free_multiplicative.classify_spike(ctx, t, k) for t, k in spec.spikes)
    return aspect, free_multiplicative.support(ctx), verdicts


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        raw = os.environ.get("SPIKELAB_THREADS", "1")
        try:
            workers = int(raw)
        except ValueError:
            raise SpecError(f"SPIKELAB_THREADS must be an integer, got {raw!r}") from None
    if workers < 1:
        raise SpecError(f"worker count must be >= 1, got {workers!r}")
    return workers


def _mean_stderr(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def _rep_record(spec, seed_child, verdicts, sup):
    """Per-spike statistics of one replica, as plain floats."""
    sample = draw_sample(spec, np.random.default_rng(seed_child))
    lam = sample.eigenvalues
    n_spikes = len(spec.spikes)
    per_vec_all = [
        [overlaps(sample, j, l) for l in range(n_spikes)] for j in range(n_spikes)
    ]
    records = []
    for j, verdict in enumerate(verdicts):
        ranks = sample.spike_ranks[j]
        k = len(ranks)
        block = lam[[r - 1 for r in ranks]]
        per_vec, summed = per_vec_all[j][j]
        for n in range(k):
            total = sum(per_vec_all[j][l][0][n] for l in range(n_spikes))
            if total > 1.0 + UNIT_SLACK:
                raise NumericalError(
                    f"overlaps of outlier vector at rank {ranks[n]} sum to {total}"
                )
        leak = 0.0
        if n_spikes > 1:
            leak = max(per_vec_all[j][l][1] / k for l in range(n_spikes) if l != j)
        rec = {
            "eig": float(block.mean()),
            "pv": float(np.mean(per_vec)),
            "sum": summed / k,
            "leak": leak,
        }
        n_prev = ranks[0] - 1
        idx_below = n_prev + k
        if verdict.is_outlier:
            if n_prev >= 1:
                rec["above"] = float(lam[n_prev - 1]) - verdict.rho
            if idx_below < lam.size:
                rec["below"] = verdict.rho - float(lam[idx_below])
        else:
            rec["edist"] = float(np.mean([sup.distance_to_edge(float(x)) for x in block]))
            rec["excess"] = max(
                0.0 if sup.contains(float(x)) else sup.distance_to_edge(float(x))
                for x in block
            )
        records.append(rec)
    return records


def run(
    spec: SpikedModelSpec,
    reps: int,
    *,
    expect_sticking=(),
    workers: int | None = None,
) -> VerificationResult:
    """Draw ``reps`` replicas of ``spec`` and aggregate spike statistics.

    Every spike must either generate an outlier or be flagged in
    ``expect_sticking`` (0-based positions into ``spec.spikes``); a
    mismatch in either direction raises TheoryError before any sampling.
    ``workers`` defaults to the SPIKELAB_THREADS environment variable (1
    when unset); replicas are independent, so threads only change wall
    time, never the result.
    """
    if not isinstance(spec, SpikedModelSpec):
        raise SpecError("spec must be a SpikedModelSpec")
    if not isinstance(reps, int) or isinstance(reps, bool) or reps < 1:
        raise SpecError(f"reps must be a positive integer, got {reps!r}")
    flagged = frozenset(int(i) for i in expect_sticking)
    for i in sorted(flagged):
        if not 0 <= i < len(spec.spikes):
            raise SpecError(f"expect_sticking index {i} is out of range")
    workers = _resolve_workers(workers)

    aspect, sup, verdicts = _theory(spec)
    for j, verdict in enumerate(verdicts):
        if verdict.is_outlier and j in flagged:
            raise TheoryError(
                f"spike theta={verdict.theta} generates an outlier"
                " but was flagged expect_sticking"
            )
        if not verdict.is_outlier and j not in flagged:
            raise TheoryError(
                f"spike theta={verdict.theta} does not generate an outlier;"
                " flag its index in expect_sticking to verify sticking instead"
            )

    children = np.random.SeedSequence(spec.seed).spawn(reps)
    if workers == 1:
        records = [_rep_record(spec, child, verdicts, sup) for child in children]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(
                pool.map(lambda child: _rep_record(spec, child, verdicts, sup), children)
            )

    outcomes = []
    for j, verdict in enumerate(verdicts):
        reps_j = [rec[j] for rec in records]
        eig_mean, eig_err = _mean_stderr([r["eig"] for r in reps_j])
        pv_mean, pv_err = _mean_stderr([r["pv"] for r in reps_j])
        sum_mean, sum_err = _mean_stderr([r["sum"] for r in reps_j])
        margin_above = margin_below = edge_distance = edge_excess = None
        if verdict.is_outlier:
            if "above" in reps_j[0]:
                margin_above = float(np.mean([r["above"] for r in reps_j]))
            if "below" in reps_j[0]:
                margin_below = float(np.mean([r["below"] for r in reps_j]))
        else:
            edge_distance = float(np.mean([r["edist"] for r in reps_j]))
            edge_excess = max(r["excess"] for r in reps_j)
        outcomes.append(
            SpikeOutcome(
                theta=verdict.theta,
                multiplicity=verdict.multiplicity,
                is_outlier=verdict.is_outlier,
                rho=verdict.rho,
                tau=verdict.tau,
                eigenvalue_mean=eig_mean,
                eigenvalue_stderr=eig_err,
                overlap_mean=pv_mean,
                overlap_stderr=pv_err,
                overlap_sum_mean=sum_mean,
                overlap_sum_stderr=sum_err,
                margin_above=margin_above,
                margin_below=margin_below,
                leakage=float(np.mean([r["leak"] for r in reps_j])),
                edge_distance=edge_distance,
                edge_excess=edge_excess,
            )
        )
    return VerificationResult(
        kind=spec.kind,
        N=spec.N,
        reps=reps,
        seed=spec.seed,
        aspect_ratio=aspect,
        support=sup,
        spikes=tuple(outcomes),
    )


def expected_sticking(spec: SpikedModelSpec) -> frozenset[int]:
    """Indices of the spikes the theory predicts will not detach."""
    _, _, verdicts = _theory(spec)
    return frozenset(j for j, verdict in enumerate(verdicts) if not verdict.is_outlier)


def separation_check(sample: EnsembleSample, spike_j: int, rho: float, delta: float) -> bool:
    """True when the block at spike_j sits delta-separated around rho.

    Checks that the eigenvalue ranked directly above the block exceeds
    rho + delta and the one directly below falls under rho - delta, with
    the conventions lambda_0 = +inf and lambda_{N+1} = -inf at the ends
    of the spectrum.
    """
    lam = sample.eigenvalues
    ranks = sample.spike_ranks[spike_j]
    n_prev = ranks[0] - 1
    above = float(lam[n_prev - 1]) if n_prev >= 1 else math.inf
    idx_below = n_prev + len(ranks)
    below = float(lam[idx_below]) if idx_below < lam.size else -math.inf
    return bool(above > rho + delta and below < rho - delta)


def empirical_density(samples, bins):
    """Bulk spectral histogram pooled over samples, as probability masses.

    The eigenvalues at each sample's spike ranks are removed before
    binning; the masses are counts divided by the pooled bulk size, so
    they sum to 1 exactly when every bulk eigenvalue lands inside the
    bins.  Returns (masses, bin_edges) with np.histogram bin semantics.
    """
    pooled = []
    for sample in samples:
        lam = np.asarray(sample.eigenvalues, dtype=float)
        keep = np.ones(lam.size, dtype=bool)
        for block in sample.spike_ranks:
            for rank in block:
                keep[rank - 1] = False
        pooled.append(lam[keep])
    flat = np.concatenate(pooled) if pooled else np.empty(0)
    if flat.size == 0:
        raise SpecError("no bulk eigenvalues to bin")
    counts, edges = np.histogram(flat, bins=bins)
    return counts.astype(float) / flat.size, edges


def outcome_passes(outcome: SpikeOutcome) -> bool:
    """Report-level agreement flag at the desk-scale tolerances."""
    if outcome.is_outlier:
        return (
            abs(outcome.eigenvalue_mean - outcome.rho) <= RHO_TOL
            and abs(outcome.overlap_sum_mean - outcome.tau) <= TAU_TOL
        )
    return outcome.edge_excess <= EDGE_TOL


def to_json_dict(result: VerificationResult) -> dict:
    """JSON-ready dict mirroring the result, with per-spike pass flags."""
    spikes = []
    for outcome in result.spikes:
        spikes.append(
            {
                "theta": outcome.theta,
                "multiplicity": outcome.multiplicity,
                "verdict": "outlier" if outcome.is_outlier else "sticking",
                "rho": outcome.rho,
                "tau": outcome.tau,
                "eigenvalue_mean": outcome.eigenvalue_mean,
                "eigenvalue_stderr": outcome.eigenvalue_stderr,
                "overlap_mean": outcome.overlap_mean,
                "overlap_stderr": outcome.overlap_stderr,
                "overlap_sum_mean": outcome.overlap_sum_mean,
                "overlap_sum_stderr": outcome.overlap_sum_stderr,
                "margin_above": outcome.margin_above,
                "margin_below": outcome.margin_below,
                "leakage": outcome.leakage,
                "edge_distance": outcome.edge_distance,
                "edge_excess": outcome.edge_excess,
                "pass": outcome_passes(outcome),
            }
        )
    return {
        "kind": result.kind,
        "N": result.N,
        "reps": result.reps,
        "seed": result.seed,
        "aspect_ratio": result.aspect_ratio,
        "support": [[lo, hi] for lo, hi in result.support.intervals],
        "spikes": spikes,
        "pass": all(entry["pass"] for entry in spikes),
    }


CSV_HEADER = (
    "kind",
    "N",
    "reps",
    "seed",
    "aspect_ratio",
    "spike",
    "theta",
    "multiplicity",
    "verdict",
    "rho",
    "tau",
    "eigenvalue_mean",
    "eigenvalue_stderr",
    "overlap_mean",
    "overlap_stderr",
    "overlap_sum_mean",
    "overlap_sum_stderr",
    "margin_above",
    "margin_below",
    "leakage",
    "edge_distance",
    "edge_excess",
    "pass",
)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def to_csv_text(result: VerificationResult) -> str:
    """Flat table, one row per spike: '.' decimals, ',' separators, LF."""
    lines = [",".join(CSV_HEADER)]
    for j, outcome in enumerate(result.spikes):
        verdict = "outlier" if outcome.is_outlier else "sticking"
        cells = (
            result.kind,
            result.N,
            result.reps,
            result.seed,
            result.aspect_ratio,
            j,
            outcome.theta,
            outcome.multiplicity,
            verdict,
            outcome.rho,
            outcome.tau,
            outcome.eigenvalue_mean,
            outcome.eigenvalue_stderr,
            outcome.overlap_mean,
            outcome.overlap_stderr,
            outcome.overlap_sum_mean,
            outcome.overlap_sum_stderr,
            outcome.margin_above,
            outcome.margin_below,
            outcome.leakage,
            outcome.edge_distance,
            outcome.edge_excess,
            outcome_passes(outcome),
        )
        lines.append(",".join(_csv_cell(cell) for cell in cells))
    return "\n".join(lines) + "\n"
