from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photon_recycling import (
    ConfigError,
    EstimateUndefinedError,
    InputConfig,
    LossModel,
    ProbabilityTable,
    SampleLedger,
    draw_samples,
    estimate_probability,
    haar_unitary,
    ideal_distribution,
    lossy_conditional_distribution,
    sector_weights,
)
from photon_recycling.loss import estimate_sector, shard_seed, splitmix64
from photon_recycling.masks import rank, sector_masks


@pytest.fixture(scope="module")
def ideal83():
    return ideal_distribution(haar_unitary(8, 5), InputConfig(8, 3))


def brute_lossy(ideal, k):
    """Enumerate (ideal outcome, lost subset) pairs; condition on |lost| = k."""
    m, n = ideal.m, ideal.sector
    out = np.zeros(comb(m, n - k))
    for bits, p in ideal.as_dict().items():
        modes = [i for i in range(m) if bits >> i & 1]
        for lost in combinations(modes, k):
            s = bits & ~sum(1 << i for i in lost)
            out[rank([s], m, n - k)[0]] += p / comb(n, k)
    return out


def test_sector_weights_examples():
    assert sector_weights(3, 0.0) == [1, 0, 0, 0]
    assert sector_weights(2, 0.5) == pytest.approx([0.25, 0.5, 0.25])
    assert sector_weights(10, 0.8)[0] == pytest.approx(1.024e-7, rel=1e-12)
    with pytest.raises(ConfigError):
        sector_weights(3, 1.5)


@given(n=st.integers(0, 30), eta=st.floats(0, 1))
def test_sector_weights_sum_to_one(n, eta):
    assert abs(sum(sector_weights(n, eta)) - 1) < 1e-12


def test_lossy_k0_identity(ideal83):
    assert lossy_conditional_distribution(ideal83, 0) is ideal83


def test_lossy_uniform_stays_uniform():
    u = ProbabilityTable(6, 3, np.full(20, 1 / 20))
    t = lossy_conditional_distribution(u, 1)
    np.testing.assert_allclose(t.values, 1 / 15, rtol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_lossy_matches_brute_force(ideal83, k):
    t = lossy_conditional_distribution(ideal83, k)
    np.testing.assert_allclose(t.values, brute_lossy(ideal83, k), rtol=1e-12, atol=1e-16)
    assert abs(t.mass - 1) < 1e-9


def test_lossy_composes_over_single_losses(ideal83):
    """Losing two photons = losing one, then another (uniformly among survivors)."""
    one = lossy_conditional_distribution(ideal83, 1)
    two_direct = lossy_conditional_distribution(ideal83, 2)
    # treat the 2-photon table as a new "ideal" of sector 2 and lose one more
    step = lossy_conditional_distribution(ProbabilityTable(8, 2, one.values), 1)
    np.testing.assert_allclose(step.values, two_direct.values, rtol=1e-12)


def test_draw_lossless(ideal83):
    led = draw_samples(ideal83, LossModel(0.0), 1000, 1)
    assert led.totals_per_k == [1000, 0, 0, 0]
    freq = led.counts[0] / 1000
    # Hoeffding at delta = 1e-6 per entry
    assert np.max(np.abs(freq - ideal83.values)) < np.sqrt(np.log(2e6) / 2000)


def test_draw_total_loss(ideal83):
    led = draw_samples(ideal83, LossModel(1.0), 500, 1)
    assert led.totals_per_k == [0, 0, 0, 500]
    assert led.count(3, 0) == 500


def test_draw_sector_totals_binomial(ideal83):
    N = 10**6
    led = draw_samples(ideal83, LossModel(0.6), N, 7)
    for k, w in enumerate(sector_weights(3, 0.6)):
        sd = np.sqrt(N * w * (1 - w))
        assert abs(led.totals_per_k[k] - N * w) < 4 * sd


def test_draw_deterministic_and_shard_dependent(ideal83):
    a = draw_samples(ideal83, LossModel(0.3), 5000, 42, shards=3)
    b = draw_samples(ideal83, LossModel(0.3), 5000, 42, shards=3)
    c = draw_samples(ideal83, LossModel(0.3), 5000, 42, shards=1)
    for k in range(4):
        np.testing.assert_array_equal(a.counts[k], b.counts[k])
    assert a.total == c.total == 5000
    assert any(not np.array_equal(a.counts[k], c.counts[k]) for k in range(4))


def test_draw_zero_shots(ideal83):
    led = draw_samples(ideal83, LossModel(0.5), 0, 0)
    assert led.total == 0
    with pytest.raises(EstimateUndefinedError) as e:
        estimate_probability(led, 0b11, 1)
    assert e.value.k == 1


def test_splitmix_known_vector():
    # reference output of splitmix64 from state 0 (first draw)
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert shard_seed(5, 0) == splitmix64(5)


def test_estimate_ratio_and_absent():
    counts = {1: np.zeros(comb(6, 2), dtype=np.int64)}
    counts[1][rank([0b11], 6, 2)[0]] = 50
    counts[1][rank([0b101], 6, 2)[0]] = 950
    led = SampleLedger(6, 3, counts)
    assert estimate_probability(led, 0b11, 1) == 0.05
    assert estimate_probability(led, 0b110000, 1) == 0.0
    with pytest.raises(ConfigError):
        estimate_probability(led, 0b111, 1)


def test_estimates_converge_to_lossy_distribution(ideal83):
    led = draw_samples(ideal83, LossModel(0.5), 10**7, 3)
    for k in (1, 2):
        est = estimate_sector(led, k).values
        assert np.max(np.abs(est - lossy_conditional_distribution(ideal83, k).values)) < 5e-3


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), eta=st.floats(0.05, 0.95), N=st.integers(1, 3000))
def test_sector_estimates_sum_to_one(ideal83, seed, eta, N):
    led = draw_samples(ideal83, LossModel(eta), N, seed)
    assert sum(led.totals_per_k) == led.total == N
    for k in range(4):
        if led.totals_per_k[k]:
            assert sum(led.counts[k]) == led.totals_per_k[k]
            assert estimate_sector(led, k).values.sum() == pytest.approx(1.0, abs=1e-12)


def test_ledger_roundtrip(tmp_path, ideal83):
    led = draw_samples(ideal83, LossModel(0.4), 20000, 9, shards=2)
    led.save(tmp_path / "l.csv")
    back = SampleLedger.load(tmp_path / "l.csv")
    assert (back.m, back.n, back.eta, back.seed, back.shards) == (8, 3, 0.4, 9, 2)
    for k in range(4):
        np.testing.assert_array_equal(back.counts[k], led.counts[k])
    header = (tmp_path / "l.csv").read_text().splitlines()[0]
    assert header == "k,mask_hex,count"


def test_divide_sample_groups(ideal83):
    led = draw_samples(ideal83, LossModel(0.5), 56 * 400, 2, keep_shots=True)
    G = comb(8, 3)
    mask = int(led.counts[1].argmax())
    bits = int(sector_masks(8, 2)[mask])
    ks, masks = led.shots
    g = rank([bits], 8, 2)[0] % G
    sel = (np.arange(len(ks)) % G == g) & (ks == 1)
    want = np.sum(masks[sel] == bits) / sel.sum()
    assert estimate_probability(led, bits, 1, divide_sample_groups=True) == pytest.approx(want)
    with pytest.raises(ConfigError):
        estimate_probability(draw_samples(ideal83, LossModel(0.5), 100, 2), bits, 1, True)
