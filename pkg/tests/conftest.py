"""Session-wide fixtures: the heavy N=1000, 20-replica simulations shared
by the acceptance criteria, each computed once."""

import numpy as np
import pytest

from spikelab import verify
from spikelab.ensemble import EnsembleSample, SpikedModelSpec, draw_sample
from spikelab.measure import AtomicMeasure

TWO_POINT = AtomicMeasure(((1.0, 0.5), (-1.0, 0.5)))
DELTA0 = AtomicMeasure(((0.0, 1.0),))
DELTA1 = AtomicMeasure(((1.0, 1.0),))

PAPER_SPEC = SpikedModelSpec(
    kind="additive_wigner",
    nu=TWO_POINT,
    spikes=((2.0, 1), (1.5, 1), (0.0, 1)),
    N=1000,
    seed=20260814,
    sigma2=0.5,
)

BBP_SPEC = SpikedModelSpec(
    kind="multiplicative_wishart",
    nu=DELTA1,
    spikes=((3.0, 1),),
    N=1000,
    seed=31337,
    c=1.0,
)

PHASE_SPEC = SpikedModelSpec(
    kind="additive_wigner",
    nu=DELTA0,
    spikes=((1.5, 1),),
    N=1000,
    seed=271828,
    sigma2=1.0,
)


@pytest.fixture(scope="session")
def paper_sim():
    return verify.run(PAPER_SPEC, 20, expect_sticking={1})


@pytest.fixture(scope="session")
def bbp_sim():
    return verify.run(BBP_SPEC, 20)


@pytest.fixture(scope="session")
def phase_sim():
    return verify.run(PHASE_SPEC, 20)


def _slim_samples(spec, reps):
    """Replica spectra with the eigenvector matrices dropped, keeping
    20 x N^2 complex entries out of resident memory."""
    out = []
    for child in np.random.SeedSequence(spec.seed).spawn(reps):
        full = draw_sample(spec, np.random.default_rng(child))
        out.append(
            EnsembleSample(
                eigenvalues=full.eigenvalues,
                eigenvectors=np.empty((0, 0)),
                spike_ranks=full.spike_ranks,
                spike_projectors=full.spike_projectors,
            )
        )
    return out


@pytest.fixture(scope="session")
def paper_samples():
    return _slim_samples(PAPER_SPEC, 20)


@pytest.fixture(scope="session")
def bbp_samples():
    return _slim_samples(BBP_SPEC, 20)
