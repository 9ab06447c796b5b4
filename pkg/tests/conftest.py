import numpy as np
import pytest

from sic_lab import frontend, model as mdl, strategies as st
from sic_lab.waveform import OfdmConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_setup():
    """Shared small front end + corpus for graph-level tests (2 x 512)."""
    ofdm = OfdmConfig()
    pa = st.calibrate_pa(frontend.PaModel(), ofdm)
    channel = frontend.make_si_channel([99, 0], 32, 35.0, 0.15)
    corpus = st.make_training_corpus(ofdm, pa, channel, -77.0, 2, 512, [99, 1])
    return dict(ofdm=ofdm, pa=pa, channel=channel, corpus=corpus)


@pytest.fixture
def small_model():
    m = mdl.model_init([99, 2], hidden=4, fir_len=8)
    rng = np.random.default_rng(5)
    for p in m.parameters():
        p.value[...] = 0.1 * rng.standard_normal(p.value.shape)
    return m
