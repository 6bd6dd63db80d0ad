from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photon_recycling import (
    CapacityError,
    ConfigError,
    InputConfig,
    Interferometer,
    OccupationMask,
    RegimeError,
    fill_ancestors,
    haar_unitary,
    ideal_distribution,
    loss_descendants,
    permanent,
)
from photon_recycling.masks import ancestor_index, descendant_index, rank, sector_masks
from photon_recycling.permanent import permanent_batch, permanent_naive


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------- permanent


def test_permanent_identity_and_ones():
    assert permanent(np.eye(4)) == pytest.approx(1 + 0j)
    assert permanent(np.ones((5, 5))) == pytest.approx(120)


def test_permanent_matches_naive_on_random_6x6():
    rng = np.random.default_rng(11)
    for _ in range(100):
        a = rand_c(rng, 6, 6)
        ref = permanent_naive(a)
        assert abs(permanent(a) - ref) / abs(ref) < 1e-10


def test_permanent_2x2_closed_form():
    a = np.array([[1 + 2j, 3], [4j, -1]])
    assert permanent(a) == pytest.approx(a[0, 0] * a[1, 1] + a[0, 1] * a[1, 0])


def test_permanent_capacity_guard():
    with pytest.raises(CapacityError):
        permanent(np.zeros((25, 25)))


def test_permanent_rejects_non_square():
    with pytest.raises(ConfigError):
        permanent(np.zeros((2, 3)))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 2**32 - 1))
def test_permanent_ryser_equals_naive_property(n, seed):
    a = rand_c(np.random.default_rng(seed), n, n)
    ref = permanent_naive(a)
    assert abs(permanent(a) - ref) <= 1e-10 * max(abs(ref), 1e-300) + 1e-13


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_permanent_batch_equals_scalar(n, seed):
    a = rand_c(np.random.default_rng(seed), 4, n, n)
    np.testing.assert_allclose(permanent_batch(a), [permanent(x) for x in a], rtol=1e-12, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 2**32 - 1))
def test_permanent_invariant_under_row_and_column_permutation(n, seed):
    rng = np.random.default_rng(seed)
    a = rand_c(rng, n, n)
    b = a[rng.permutation(n)][:, rng.permutation(n)]
    assert permanent(a) == pytest.approx(permanent(b), rel=1e-10)


# ---------------------------------------------------------------------- masks


def test_mask_invariants():
    s = OccupationMask(0b1011, 6)
    assert s.photons == 3
    assert s.modes() == (0, 1, 3)
    with pytest.raises(ConfigError):
        OccupationMask(1 << 6, 6)
    assert OccupationMask.from_string(str(s)) == s


def test_loss_descendants_worked_example():
    # "111000" read mode 0 first: photons in modes 0, 1, 2
    s = OccupationMask.from_string("111000")
    got = {str(d) for d in loss_descendants(s, 1)}
    assert got == {"110000", "101000", "011000"}


def test_loss_descendants_k0_and_bad_k():
    s = OccupationMask(0b10110, 5)
    assert loss_descendants(s, 0) == {s}
    with pytest.raises(ConfigError):
        loss_descendants(s, 4)


def test_loss_descendants_n5_k2_subsets():
    s = OccupationMask(0b1010110001, 10)
    out = loss_descendants(s, 2)
    assert len(out) == 10
    assert all(d.bits & ~s.bits == 0 and d.photons == 3 for d in out)


def test_fill_ancestors_example_and_errors():
    s = OccupationMask.from_string("110000")
    out = fill_ancestors(s, 1, 6)
    assert len(out) == 4
    assert all(t.bits & s.bits == s.bits and t.photons == 3 for t in out)
    with pytest.raises(ConfigError):
        fill_ancestors(OccupationMask(0b111111, 6), 0, 6)
    with pytest.raises(ConfigError):
        fill_ancestors(OccupationMask(0b111110, 6), 2, 6)


def test_duality_exhaustive_m7_n3_k1():
    m, n, k = 7, 3, 1
    for t_bits in sector_masks(m, n).tolist():
        t = OccupationMask(t_bits, m)
        for s_bits in sector_masks(m, n - k).tolist():
            s = OccupationMask(s_bits, m)
            assert (t in fill_ancestors(s, k, m)) == (s in loss_descendants(t, k))


@pytest.mark.parametrize("m", range(2, 11))
def test_set_cardinalities_exhaustive(m):
    for n in range(1, min(m, 5) + 1):
        for k in range(1, n + 1):
            for bits in sector_masks(m, n).tolist()[:40]:
                assert len(loss_descendants(OccupationMask(bits, m), k)) == comb(n, k)
            for bits in sector_masks(m, n - k).tolist()[:40]:
                assert len(fill_ancestors(OccupationMask(bits, m), k, m)) == comb(m - n + k, k)


@pytest.mark.parametrize("m,n,k", [(6, 3, 1), (8, 3, 2), (8, 4, 2), (7, 2, 1)])
def test_index_tables_match_set_operations(m, n, k):
    lo = sector_masks(m, n - k)
    hi = sector_masks(m, n)
    desc = descendant_index(m, n, k)
    anc = ancestor_index(m, n, k)
    for i, bits in enumerate(hi.tolist()):
        want = {d.bits for d in loss_descendants(OccupationMask(bits, m), k)}
        assert set(lo[desc[i]].tolist()) == want
    for i, bits in enumerate(lo.tolist()):
        want = {a.bits for a in fill_ancestors(OccupationMask(bits, m), k, m)}
        assert set(hi[anc[i]].tolist()) == want


def test_sector_masks_are_colex_ranked():
    masks = sector_masks(9, 4)
    assert len(masks) == comb(9, 4)
    np.testing.assert_array_equal(rank(masks, 9, 4), np.arange(len(masks)))
    # colex rank = sum_i C(pos_i, i+1)
    for r, bits in enumerate(masks.tolist()):
        pos = [i for i in range(9) if bits >> i & 1]
        assert sum(comb(p, i + 1) for i, p in enumerate(pos)) == r


# -------------------------------------------------------------- interferometer


def test_haar_unitarity_and_determinism():
    u = haar_unitary(8, 1).entries
    assert np.max(np.abs(u @ u.conj().T - np.eye(8))) < 1e-12
    np.testing.assert_array_equal(u, haar_unitary(8, 1).entries)


def test_haar_first_moment_m2():
    vals = [abs(haar_unitary(2, s).entries[0, 0]) ** 2 for s in range(10_000)]
    assert abs(np.mean(vals) - 0.5) < 0.02


def test_haar_phase_fix_makes_distribution_invariant():
    # without the phase fix the diagonal of Q is biased toward the positive real axis
    phases = np.array([np.angle(haar_unitary(3, s).entries[0, 0]) for s in range(4000)])
    assert abs(np.mean(np.cos(phases))) < 0.05


def test_interferometer_json_roundtrip(tmp_path):
    u = haar_unitary(5, 9)
    u.save(tmp_path / "u.json")
    v = Interferometer.load(tmp_path / "u.json")
    np.testing.assert_array_equal(u.entries, v.entries)
    assert v.provenance == {"kind": "haar", "seed": 9}


def test_interferometer_rejects_non_unitary():
    with pytest.raises(ConfigError):
        Interferometer(np.ones((3, 3)))


# --------------------------------------------------------------------- ideal


def test_identity_passes_photons_straight_through():
    t = ideal_distribution(Interferometer(np.eye(6)), InputConfig(6, 3))
    assert t[0b111] == 1.0
    assert t.mass == pytest.approx(1.0)
    assert np.count_nonzero(t.values) == 1


def test_ideal_normalised_nonneg():
    t = ideal_distribution(haar_unitary(6, 4), InputConfig(6, 2))
    assert abs(t.mass - 1) < 1e-12
    assert np.all(t.values >= 0)
    assert 0 < t.meta["raw_mass"] <= 1


def test_ideal_matches_naive_minors_m8_n3():
    U = haar_unitary(8, 21)
    t = ideal_distribution(U, InputConfig(8, 3))
    raw = {}
    for cols in combinations(range(8), 3):
        raw[sum(1 << c for c in cols)] = abs(permanent_naive(U.entries[np.ix_([0, 1, 2], cols)])) ** 2
    total = sum(raw.values())
    for bits, v in raw.items():
        assert t[bits] == pytest.approx(v / total, rel=1e-10, abs=1e-15)
    assert t.meta["raw_mass"] == pytest.approx(total, rel=1e-12)


def test_ideal_respects_input_modes():
    U = haar_unitary(6, 2)
    t = ideal_distribution(U, InputConfig(6, 2, (4, 1)))
    a = U.entries[np.ix_([1, 4], [0, 3])]
    raw = t.meta["raw_mass"]
    assert t[0b1001] * raw == pytest.approx(abs(permanent_naive(a)) ** 2, rel=1e-10)


def test_reject_policy_raises_regime_error():
    with pytest.raises(RegimeError):
        ideal_distribution(haar_unitary(8, 1), InputConfig(8, 3), "reject-if-mass-low", mass_floor=0.99)


def test_input_config_validation():
    with pytest.raises(ConfigError):
        InputConfig(4, 2, (1, 1))
    with pytest.raises(ConfigError):
        InputConfig(4, 2, (0, 4))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), perm_seed=st.integers(0, 10_000))
def test_ideal_permutation_covariance(seed, perm_seed):
    m, n = 7, 3
    U = haar_unitary(m, seed)
    perm = np.random.default_rng(perm_seed).permutation(m)
    P = np.eye(m)[:, perm]
    V = Interferometer(U.entries @ P)
    t, tv = ideal_distribution(U, InputConfig(m, n)), ideal_distribution(V, InputConfig(m, n))
    # column j of V is column perm[j] of U
    for bits in t.masks.tolist()[:20]:
        out_modes = [j for j in range(m) if bits >> j & 1]
        src = sum(1 << int(perm[j]) for j in out_modes)
        assert tv[bits] == pytest.approx(t[src], rel=1e-9, abs=1e-15)
