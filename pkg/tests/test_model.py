import numpy as np
import pytest

from sic_lab import autodiff as ad
from sic_lab import model as mdl
from sic_lab import strategies as st
from sic_lab.dsp import power_dbm
from sic_lab.frontend import AdcSpec
from helpers import finite_diff_check


def test_fresh_model_predicts_zero_and_residual_sits_at_si_level(small_setup):
    m = mdl.model_init([0, 1])
    seq = small_setup["corpus"][0]
    assert np.all(mdl.model_predict(m, seq.s) == 0)
    assert power_dbm(seq.y_a - mdl.model_predict(m, seq.s)) == pytest.approx(-15.0, abs=0.4)


def test_same_seed_same_parameters():
    a, b = mdl.model_init([5, 6]), mdl.model_init([5, 6])
    for pa, pb in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(pa.value, pb.value)


def test_model_init_rejects_degenerate_sizes():
    with pytest.raises(ValueError):
        mdl.model_init(0, hidden=0)
    with pytest.raises(ValueError):
        mdl.model_init(0, fir_len=0)


def test_fir_path_with_unit_impulse_taps(rng):
    m = mdl.model_init(1, fir_len=8)
    m.fir_re.value[0] = 1.0 / m.fir_scale  # effective tap exactly 1
    assert m.fir_taps[0] == 1.0
    s = rng.standard_normal(128) + 1j * rng.standard_normal(128)
    np.testing.assert_allclose(mdl.fir_path(m, s), m.output_scale * s, rtol=1e-12, atol=1e-15)


def test_forward_tape_matches_predict(small_setup, small_model):
    seq = small_setup["corpus"][0]
    tape = ad.Tape()
    yr, yi = mdl.model_forward(small_model, seq.feats, tape)
    np.testing.assert_array_equal(yr.value + 1j * yi.value, mdl.model_predict(small_model, seq.s))


def test_output_power_gradient_matches_finite_differences(rng, small_model):
    s = (rng.standard_normal(96) + 1j * rng.standard_normal(96)) / np.sqrt(2)
    feats = mdl.features(s)

    def graph(tape):
        yr, yi = mdl.model_forward(small_model, feats, tape)
        return ad.mse_loss(yr, yi)

    tape = ad.Tape()
    loss = graph(tape)
    ad.zero_grads(small_model.parameters())
    tape.backward(loss)
    grads = [p.grad.copy() for p in small_model.parameters()]
    finite_diff_check(
        small_model.parameters(), grads, lambda: graph(ad.Tape()).value, rng, n_coords=100, rel_tol=1e-4
    )


def test_forward_is_causal(rng, small_model):
    s = rng.standard_normal(200) + 1j * rng.standard_normal(200)
    full = mdl.model_predict(small_model, s)
    for k in (1, 17, 100):
        np.testing.assert_allclose(mdl.model_predict(small_model, s[:k]), full[:k], rtol=1e-12, atol=1e-15)


def test_output_scale_never_trains(small_setup):
    m = mdl.model_init([0, 7])
    scale_before = m.output_scale
    cfg = st.TrainConfig(st.StrategyKind.STE, adc=AdcSpec(), lna_gain_db=30.0, epochs=50)
    st.train(cfg, m, small_setup["corpus"])
    assert m.output_scale == scale_before


def test_checkpoint_roundtrip_bit_exact(tmp_path, small_model):
    path = tmp_path / "model.npz"
    mdl.save_checkpoint(small_model, path, meta={"label": "unit", "lna_gain_db": 30.0})
    loaded, meta = mdl.load_checkpoint(path)
    assert meta["label"] == "unit" and meta["lna_gain_db"] == 30.0
    for a, b in zip(small_model.parameters(), loaded.parameters()):
        np.testing.assert_array_equal(a.value, b.value)
    assert loaded.output_scale == small_model.output_scale


@pytest.mark.slow
def test_capacity_on_linear_pa(small_setup):
    """With the PA reduced to a pure gain the plant is linear; a least-squares
    FIR fit bounds what is achievable, and training must get below -60 dBm."""
    from sic_lab.frontend import PaModel, make_si_channel

    pa = PaModel(a1=1.0, a3=0.0, a5=0.0)
    channel = make_si_channel([99, 0], 32, 35.0, 0.15)
    corpus = st.make_training_corpus(small_setup["ofdm"], pa, channel, -77.0, 10, 4096, [99, 1])

    # oracle: exact LS solution of y on lagged copies of s
    seq = corpus[0]
    L = 64
    lagged = np.zeros((seq.s.size, L), dtype=complex)
    for m in range(L):
        lagged[m:, m] = seq.s[: seq.s.size - m]
    resid = seq.y_a - lagged @ np.linalg.lstsq(lagged, seq.y_a, rcond=None)[0]
    assert power_dbm(resid) < -70.0  # noise-floor limited

    m = mdl.model_init([99, 2])
    cfg = st.TrainConfig(st.StrategyKind.STE, adc=AdcSpec(), lna_gain_db=30.0, epochs=2000)
    log = st.train(cfg, m, corpus)
    assert log.residual_dbm_analog[-1] < -60.0
