"""Finite-N spiked models: deterministic perturbation, noise sampling, spectra.

The perturbation A_N is always diagonal: spike eigenvalues (with multiplicity)
plus deterministic quantiles of the bulk limit nu, sorted descending.  That
makes each spike's eigenspace a coordinate subspace, so spike projectors are
exact index sets and the eigenvector observables reduce to coordinate sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, SpecError
from .measure import MERGE_TOL, AtomicMeasure, quantile_discretize

KINDS = ("additive_wigner", "multiplicative_wishart")
ENTRY_LAWS = ("gaussian", "rademacher")
FIELDS = ("real_symmetric", "complex_hermitian")

EIGEN_RESIDUAL_TOL = 1e-7
GRAM_TOL = 1e-8


@dataclass(frozen=True)
class SpikedModelSpec:
    """Complete description of one finite-N spiked random matrix model."""

    kind: str
    nu: AtomicMeasure
    spikes: tuple[tuple[float, int], ...]
    N: int
    seed: int
    sigma2: float | None = None
    c: float | None = None
    entry_law: str = "gaussian"
    field: str = "complex_hermitian"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not isinstance(self.nu, AtomicMeasure):
            raise SpecError("nu must be an AtomicMeasure")
        if self.entry_law not in ENTRY_LAWS:
            raise SpecError(f"entry_law must be one of {ENTRY_LAWS}, got {self.entry_law!r}")
        if self.field not in FIELDS:
            raise SpecError(f"field must be one of {FIELDS}, got {self.field!r}")
        if not isinstance(self.N, int) or self.N < 1:
            raise SpecError(f"N must be a positive integer, got {self.N!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise SpecError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

        spikes = []
        for entry in self.spikes:
            try:
                theta, mult = entry
            except (TypeError, ValueError):
                raise SpecError(f"each spike must be a (theta, multiplicity) pair, got {entry!r}")
            theta = float(theta)
            if not math.isfinite(theta):
                raise SpecError(f"spike theta must be finite, got {theta!r}")
            if not isinstance(mult, int) or isinstance(mult, bool) or mult < 1:
                raise SpecError(f"spike multiplicity must be a positive integer, got {mult!r}")
            if self.nu.distance_to_support(theta) <= MERGE_TOL:
                raise SpecError(f"spike theta={theta!r} lies in the support of nu")
            spikes.append((theta, mult))
        thetas = [t for t, _ in spikes]
        if any(nxt >= prev for nxt, prev in zip(thetas[1:], thetas)):
            raise SpecError("spike thetas must be strictly decreasing")
        r = sum(k for _, k in spikes)
        if r > self.N:
            raise SpecError(f"total spike multiplicity {r} exceeds N={self.N}")
        object.__setattr__(self, "spikes", tuple(spikes))

        if self.kind == "additive_wigner":
            if self.sigma2 is None:
                raise SpecError("additive model requires sigma2")
            if self.c is not None:
                raise SpecError("additive model does not take an aspect ratio c")
            s2 = float(self.sigma2)
            if not math.isfinite(s2) or s2 <= 0.0:
                raise SpecError(f"sigma2 must be a finite positive number, got {self.sigma2!r}")
            object.__setattr__(self, "sigma2", s2)
        else:
            if self.c is None:
                raise SpecError("multiplicative model requires an aspect ratio c")
            if self.sigma2 is not None:
                raise SpecError("multiplicative model does not take sigma2")
            c = float(self.c)
            if not math.isfinite(c) or c <= 0.0:
                raise SpecError(f"c must be a finite positive number, got {self.c!r}")
            object.__setattr__(self, "c", c)
            if any(t <= 0.0 for t, _ in spikes):
                raise SpecError("multiplicative spikes must be positive")
            if any(loc < 0.0 for loc, _ in self.nu.atoms):
                raise SpecError("multiplicative model requires nu supported on [0, inf)")

    @property
    def rank(self) -> int:
        return sum(k for _, k in self.spikes)


@dataclass(frozen=True, eq=False)
class EnsembleSample:
    """One diagonalized draw: spectrum plus spike bookkeeping.

    spike_ranks are 1-based positions of each spike among the descending
    eigenvalues of A_N; spike_projectors are the 0-based coordinate indices
    spanning Ker(theta_j I - A_N).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    spike_ranks: tuple[tuple[int, ...], ...]
    spike_projectors: tuple[tuple[int, ...], ...]


def build_perturbation(spec: SpikedModelSpec):
    """Diagonal of A_N (descending) plus spike ranks and coordinate projectors."""
    r = spec.rank
    bulk = quantile_discretize(spec.nu, spec.N - r) if spec.N > r else np.empty(0)
    spike_vals = np.concatenate(
        [np.full(k, t) for t, k in spec.spikes] + [np.empty(0)]
    ) if spec.spikes else np.empty(0)
    vals = np.concatenate([spike_vals, np.asarray(bulk, dtype=float)])
    order = np.argsort(-vals, kind="stable")
    diag = vals[order]
    position = np.empty(spec.N, dtype=int)
    position[order] = np.arange(spec.N)

    ranks = []
    projectors = []
    offset = 0
    for _, k in spec.spikes:
        coords = position[offset : offset + k]
        coords = np.sort(coords)
        ranks.append(tuple(int(i) + 1 for i in coords))
        projectors.append(tuple(int(i) for i in coords))
        offset += k
    return diag, tuple(ranks), tuple(projectors)


def _draw(entry_law: str, rng: np.random.Generator, size) -> np.ndarray:
    if entry_law == "gaussian":
        return rng.standard_normal(size)
    return (rng.integers(0, 2, size=size) * 2 - 1).astype(float)


def sample_wigner(N: int, field: str, entry_law: str, rng: np.random.Generator) -> np.ndarray:
    """Unit-scale Wigner matrix X = W/sqrt(N), semicircle limit on [-2, 2].

    Convention: diagonal entries of W have variance 1 (complex case) or 2
    (real case); off-diagonal entries have total variance 1.  Callers scale by
    sigma to reach variance sigma^2.
    """
    if field not in FIELDS:
        raise SpecError(f"field must be one of {FIELDS}, got {field!r}")
    if entry_law not in ENTRY_LAWS:
        raise SpecError(f"entry_law must be one of {ENTRY_LAWS}, got {entry_law!r}")
    iu = np.triu_indices(N, 1)
    n_off = iu[0].size
    if field == "complex_hermitian":
        diag = _draw(entry_law, rng, N)
        off = (_draw(entry_law, rng, n_off) + 1j * _draw(entry_law, rng, n_off)) / math.sqrt(2.0)
        W = np.zeros((N, N), dtype=complex)
        W[iu] = off
        W = W + W.conj().T
        W[np.diag_indices(N)] = diag
    else:
        diag = math.sqrt(2.0) * _draw(entry_law, rng, N)
        off = _draw(entry_law, rng, n_off)
        W = np.zeros((N, N), dtype=float)
        W[iu] = off
        W = W + W.T
        W[np.diag_indices(N)] = diag
    return W / math.sqrt(N)


def sample_wishart_factor(
    N: int, p: int, field: str, entry_law: str, rng: np.random.Generator
) -> np.ndarray:
    """N x p factor B with i.i.d. standardized entries (unit variance each)."""
    if field not in FIELDS:
        raise SpecError(f"field must be one of {FIELDS}, got {field!r}")
    if entry_law not in ENTRY_LAWS:
        raise SpecError(f"entry_law must be one of {ENTRY_LAWS}, got {entry_law!r}")
    if field == "complex_hermitian":
        return (
            _draw(entry_law, rng, (N, p)) + 1j * _draw(entry_law, rng, (N, p))
        ) / math.sqrt(2.0)
    return _draw(entry_law, rng, (N, p))


def wishart_p(N: int, c: float) -> int:
    """Sample dimension p = round(N/c), at least 1; theory runs at N/p."""
    return max(1, round(N / c))


def assemble(spec: SpikedModelSpec, A: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """M = X + A (additive) or A^{1/2} (BB*/p) A^{1/2} (multiplicative)."""
    A = np.asarray(A, dtype=float)
    if spec.kind == "additive_wigner":
        return noise + np.diag(A)
    if np.any(A < 0.0):
        raise SpecError("multiplicative perturbation requires a nonnegative diagonal")
    p = noise.shape[1]
    root = np.sqrt(A)
    inner = noise @ noise.conj().T / p
    return root[:, None] * inner * root[None, :]


def diagonalize(M: np.ndarray):
    """Descending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    Delegates to LAPACK and then verifies the output: per-pair residual
    ||Mv - lambda v|| <= 1e-7 (1 + ||M||) and Gram deviation <= 1e-8,
    raising NumericalError otherwise (also catches non-Hermitian input,
    since only one triangle is read).
    """
    M = np.asarray(M)
    lam, V = np.linalg.eigh(M)
    lam = lam[::-1].copy()
    V = V[:, ::-1].copy()
    norm = float(max(abs(lam[0]), abs(lam[-1])))
    residual = np.linalg.norm(M @ V - V * lam[None, :], axis=0)
    if np.max(residual) > EIGEN_RESIDUAL_TOL * (1.0 + norm):
        raise NumericalError(
            f"eigenpair residual {float(np.max(residual)):.3e} exceeds "
            f"{EIGEN_RESIDUAL_TOL * (1.0 + norm):.3e}"
        )
    gram_dev = np.max(np.abs(V.conj().T @ V - np.eye(M.shape[0])))
    if gram_dev > GRAM_TOL:
        raise NumericalError(f"eigenvector Gram deviation {float(gram_dev):.3e} exceeds {GRAM_TOL}")
    return lam, V


def overlaps(sample: EnsembleSample, spike_j: int, spike_l: int):
    """Squared projections of spike-j outlier eigenvectors onto spike-l's eigenspace.

    Returns (per_vector, summed) where per_vector[n] = ||P_l xi_n(j)||^2 for
    the eigenvector at descending rank spike_ranks[j][n].
    """
    ranks = sample.spike_ranks[spike_j]
    coords = np.asarray(sample.spike_projectors[spike_l], dtype=int)
    per = []
    for rank in ranks:
        vec = sample.eigenvectors[:, rank - 1]
        per.append(float(np.sum(np.abs(vec[coords]) ** 2)))
    return per, float(sum(per))


def draw_sample(spec: SpikedModelSpec, rng: np.random.Generator | None = None) -> EnsembleSample:
    """Build A_N, draw the noise, assemble and diagonalize one replica.

    The additive noise is sqrt(sigma2) times a unit Wigner matrix, giving
    entry variance sigma2.  With rng=None a fresh deterministic stream is
    derived from spec.seed; verification passes per-replica spawned streams.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    A, ranks, projectors = build_perturbation(spec)
    if spec.kind == "additive_wigner":
        noise = math.sqrt(spec.sigma2) * sample_wigner(spec.N, spec.field, spec.entry_law, rng)
    else:
        p = wishart_p(spec.N, spec.c)
        noise = sample_wishart_factor(spec.N, p, spec.field, spec.entry_law, rng)
    M = assemble(spec, A, noise)
    lam, V = diagonalize(M)
    return EnsembleSample(
        eigenvalues=lam, eigenvectors=V, spike_ranks=ranks, spike_projectors=projectors
    )
