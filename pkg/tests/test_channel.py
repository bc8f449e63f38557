import numpy as np
import pytest

from nomftn import channel as ch
from nomftn.errors import ConfigurationError
from nomftn.modem import BandPlan, FrameConfig
from nomftn.sim import build_payload, probe_snr_db, transmit

FS = 26e9
CFG = FrameConfig()


def test_flat_gain():
    p = ch.ChannelProfile("flat")
    assert np.all(ch.profile_gain(np.linspace(0, 13e9, 7), p) == 1)


def test_gaussian_gain_at_corner():
    p = ch.ChannelProfile("gaussian_lowpass", f_3db=10e9)
    assert abs(abs(ch.profile_gain(10e9, p)) ** 2 - 0.5) < 1e-12
    assert ch.profile_gain(0.0, p) == 1


def test_tabulated_midpoint_and_clamp():
    p = ch.ChannelProfile("tabulated", table=((0, 0), (10e9, 0), (13e9, -20)))
    assert abs(20 * np.log10(abs(ch.profile_gain(11.5e9, p))) + 10) < 1e-12
    assert abs(20 * np.log10(abs(ch.profile_gain(20e9, p))) + 20) < 1e-12
    assert np.isrealobj(ch.profile_gain(5e9, p).real)


def test_table_validation():
    with pytest.raises(ConfigurationError):
        ch.ChannelProfile("tabulated", table=((0, 0), (0, -1)))
    with pytest.raises(ConfigurationError):
        ch.ChannelProfile("tabulated", table=((0, 0), (1e9, float("nan"))))
    with pytest.raises(ConfigurationError):
        ch.ChannelProfile("flat", noise_psd=-1)
    with pytest.raises(ConfigurationError):
        ch.ChannelProfile("bandpass")


def test_parse_table_text(tmp_path):
    text = "# f gain\n0 0\n1e9, -1.5  # comment\n\n2e9\t-3\n"
    assert ch.parse_table(text) == ((0.0, 0.0), (1e9, -1.5), (2e9, -3.0))
    with pytest.raises(ConfigurationError, match=":2"):
        ch.parse_table("0 0\n1e9 x\n")
    with pytest.raises(ConfigurationError, match=":1"):
        ch.parse_table("0 0 0\n")
    f = tmp_path / "t.txt"
    f.write_text(text)
    assert ch.load_table(f)[1] == (1e9, -1.5)


def test_presets():
    for name in ch.PRESET_DESCRIPTIONS:
        p = ch.preset(name, noise_psd=0.1, rop_dbm=-2)
        assert p.noise_psd == 0.1 and p.rop_dbm == -2
    p = ch.preset("paper-20km")
    db = 20 * np.log10(np.abs(ch.profile_gain(np.array([5e9, 10e9, 12e9]), p)))
    # gentle slope below 10 GHz, steeper beyond
    assert (db[0] - db[1]) / 5 < (db[1] - db[2]) / 2
    with pytest.raises(ConfigurationError):
        ch.preset("nope")


def test_identity_channel():
    x = np.random.default_rng(0).normal(size=1000)
    assert np.allclose(ch.apply_channel(x, ch.ChannelProfile("flat"), 1), x, atol=1e-10)


def test_noise_variance_concentration():
    n, var = 200_000, 0.3
    y = ch.apply_channel(np.zeros(n), ch.ChannelProfile("flat", noise_psd=var), 5)
    assert abs(np.var(y) - var) < 3 * var * np.sqrt(2 / n)


def test_same_seed_same_output():
    p = ch.preset("lowpass-10g", noise_psd=0.1)
    x = np.random.default_rng(1).normal(size=2000)
    assert np.array_equal(ch.apply_channel(x, p, 9), ch.apply_channel(x, p, 9))
    assert not np.array_equal(ch.apply_channel(x, p, 9), ch.apply_channel(x, p, 10))


@pytest.mark.parametrize("name", ["flat", "lowpass-10g", "paper-20km"])
def test_linearity(name):
    p = ch.preset(name, rop_dbm=-1.5)
    x = np.random.default_rng(2).normal(size=3000)
    assert np.allclose(ch.apply_channel(2.5 * x, p, 0), 2.5 * ch.apply_channel(x, p, 0), atol=1e-9)


def test_rop_gain_is_amplitude():
    x = np.random.default_rng(3).normal(size=100)
    y = ch.apply_channel(x, ch.ChannelProfile("flat", rop_dbm=-3.0), 0)
    assert np.allclose(y, x * 10 ** (-0.3))


def test_filter_acts_per_frequency():
    t = np.arange(2048)
    k = 400
    x = np.cos(2 * np.pi * k * t / 2048)
    p = ch.preset("lowpass-10g")
    y = ch.apply_channel(x, p, 0, FS)
    g = ch.profile_gain(k * FS / 2048, p).real
    assert np.allclose(y, g * x, atol=1e-10)


class TestSpectrum:
    def test_tone_peak(self):
        t = np.arange(256 * 40)
        for k in (10, 57, 100):
            f, db = ch.measure_spectrum(np.cos(2 * np.pi * k * t / 256), FS)
            assert abs(f[np.argmax(db)] - k * FS / 256) <= FS / 256

    def test_too_short(self):
        with pytest.raises(ConfigurationError):
            ch.measure_spectrum(np.zeros(255), FS)

    def test_white_noise_flat(self):
        x = np.random.default_rng(4).normal(size=256 * 400)
        f, db = ch.measure_spectrum(x, FS)
        assert db.max() == 0
        assert np.all(db[1:-1] > -2.0)

    @pytest.mark.parametrize("alpha,edge_ghz", [(1.0, 12.1875), (0.9, 10.96875), (0.8, 9.75)])
    def test_rolloff_edge(self, alpha, edge_ghz):
        plan = BandPlan.uniform(120, alpha, [16, 8, 4])
        bits = np.random.default_rng(5).integers(0, 2, size=(200, 360), dtype=np.uint8)
        record, _ = transmit(plan, CFG, bits)
        f, db = ch.measure_spectrum(record, FS)
        edge = ch.rolloff_edge(f, db, -10.0)
        assert abs(edge - edge_ghz * 1e9) <= FS / 256 + 1e-3


def _mean_sigma2(plan, profile, seeds):
    from nomftn.modem import ofdm_demodulate, ofdm_modulate, place_bins, training_symbols
    from nomftn.receiver import estimate_channel
    from nomftn.sim import tx_scale

    ts = training_symbols(CFG.n_ts, plan.b_total)
    rec = ofdm_modulate(place_bins(ts, CFG.n_fft), CFG).reshape(-1) * tx_scale(plan, CFG)
    acc = np.zeros(plan.b_total)
    for s in seeds:
        rx = ch.apply_channel(rec, profile, s, FS).reshape(CFG.n_ts, -1)
        acc += estimate_channel(ofdm_demodulate(rx, CFG, plan.b_total, CFG.cp_len // 2), ts, plan).sigma2
    return acc / len(seeds)


def test_snr_decreases_with_frequency_on_lowpass():
    plan = BandPlan.uniform(120, 1.0, [4] * 120)
    s2 = _mean_sigma2(plan, ch.preset("lowpass-10g", noise_psd=0.01), range(100))
    grouped = -10 * np.log10(s2.reshape(10, 12).mean(axis=1))
    assert np.all(np.diff(grouped) < 0)


def test_rop_slope_two_db_per_db():
    plan = BandPlan.uniform(120, 1.0, [4] * 120)
    snr = []
    for rop in (-1.0, 0.0):
        s2 = _mean_sigma2(plan, ch.preset("flat", noise_psd=0.05, rop_dbm=rop), range(100))
        snr.append(-10 * np.log10(s2.mean()))
    assert abs((snr[1] - snr[0]) - 2.0) < 0.2


def test_probe_snr_shape():
    plan = BandPlan.uniform(120, 1.0, [4] * 120)
    snr = probe_snr_db(plan, CFG, ch.preset("flat", noise_psd=0.01), 1)
    assert snr.shape == (120,) and np.all(np.isfinite(snr))
