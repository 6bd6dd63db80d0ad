import hashlib
import json
from math import comb, log, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photon_recycling import ConfigError, InputConfig, ProbabilityTable, haar_unitary, ideal_distribution
from photon_recycling.cli import main
from photon_recycling.harness import (
    ComparisonReport,
    ExperimentConfig,
    expectation_value,
    interference_deviation_sweep,
    kl_divergence,
    minor_flatness,
    run_experiment,
    total_variation,
)
from photon_recycling.masks import sector_masks

# ------------------------------------------------------------------ metrics


def test_kl_examples():
    p = np.array([0.5, 0.5])
    assert kl_divergence(p, p) == 0
    assert kl_divergence(p, np.array([0.75, 0.25])) == pytest.approx(0.143841, abs=1e-6)
    u = np.full(4, 0.25)
    point = np.array([1.0, 0, 0, 0])
    v = kl_divergence(u, point)
    assert np.isfinite(v) and v > 0
    assert v == pytest.approx(0.25 * log(0.25) + 0.75 * log(0.25 / 1e-12))
    # reverse direction only sees the candidate's support
    assert kl_divergence(u, point, reverse=True) == pytest.approx(log(4))
    with pytest.raises(ConfigError):
        kl_divergence(p, np.ones(3) / 3)


@settings(max_examples=50)
@given(st.integers(0, 10**6), st.integers(2, 30))
def test_kl_nonnegative_and_tvd_bounded(seed, size):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(size)), rng.dirichlet(np.ones(size))
    assert kl_divergence(p, q) >= -1e-12
    assert kl_divergence(p, q, reverse=True) == pytest.approx(kl_divergence(q, p))
    t = total_variation(p, q)
    assert 0 <= t <= 1
    # Pinsker
    assert t <= sqrt(kl_divergence(p, q) / 2) + 1e-12


def test_tvd_examples():
    assert total_variation([0.3, 0.7], [0.3, 0.7]) == 0
    assert total_variation([1, 0], [0, 1]) == 1
    assert total_variation([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.1)


def test_expectation_value():
    t = ideal_distribution(haar_unitary(6, 3), InputConfig(6, 2))
    masks = sector_masks(6, 2).tolist()
    assert expectation_value(t, {b: 1.0 for b in masks}) == pytest.approx(t.mass)
    assert expectation_value(t, {masks[4]: 1.0}) == t[masks[4]]
    rng = np.random.default_rng(0)
    w = {b: float(rng.standard_normal()) for b in masks[::2]}
    assert expectation_value(t, w) == pytest.approx(sum(w[b] * t.values[masks.index(b)] for b in w))


def test_minor_flatness():
    d = minor_flatness(haar_unitary(8, 0), InputConfig(8, 3), [1, 4, 6])
    assert 0 < d["ratio"] <= 1
    assert d["ratio"] == pytest.approx(d["h_inf"] / d["spectral_norm"])


# ------------------------------------------------------------------- config


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(m=3, n=4)
    with pytest.raises(ConfigError):
        ExperimentConfig(seeds=[])
    with pytest.raises(ConfigError):
        ExperimentConfig(methods=["magic"])
    with pytest.raises(ConfigError):
        ExperimentConfig(sweep={"axis": "m", "grid": [1]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"m": 8, "n": 3, "seeds": [1]}))
    cfg = ExperimentConfig.load(p)
    assert cfg.n_d == 2 and cfg.digest() == ExperimentConfig.load(p).digest()


def _small(**kw):
    base = dict(m=8, n=3, eta=0.6, N_tot=20_000, seeds=[0, 1], k_list=[1], n_d=2,
                methods=["postselect", "linsolve", "linsolve_dep", "extrap_linear", "extrap_exp", "richardson"])
    base.update(kw)
    return ExperimentConfig(**base)


def _hashes(d):
    return {str(p.relative_to(d)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.rglob("*")) if p.is_file()}


def test_full_run_determinism_and_manifest(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    ra = run_experiment(_small(), a)
    run_experiment(_small(), b)
    assert _hashes(a) == _hashes(b)
    man = json.loads((a / "manifest.json").read_text())
    listed = man["files"]
    on_disk = {k: v for k, v in _hashes(a).items() if k != "manifest.json"}
    assert listed == on_disk
    assert man["config_sha256"] == _small().digest()
    for meth, rows in ra.aggregate("kl").items():
        assert rows[0]["min"] >= 0
    for rows in ra.aggregate("tvd").values():
        assert 0 <= rows[0]["max"] <= 1


def test_lossless_sanity():
    cfg = _small(eta=0.0, N_tot=50_000, seeds=[3])
    rep = run_experiment(cfg, persist=False)
    assert set(rep.per_seed) == {"postselect", "richardson"}
    # frequencies are within the Hoeffding envelope of the ideal table
    tvd = rep.per_seed["postselect"][0][0]["tvd"]
    assert tvd <= 0.5 * comb(8, 3) * sqrt(log(2 / 1e-6) / (2 * 50_000))


def test_sweep_and_crossover():
    rep = ComparisonReport("N_tot", [1e3, 1e5], {
        "postselect": [[{"kl": 1.0, "tvd": 0}], [{"kl": 0.1, "tvd": 0}]],
        "x": [[{"kl": 0.5, "tvd": 0}], [{"kl": 0.3, "tvd": 0}]],
    }, [0])
    # method minus baseline: -0.5, then +0.2
    assert rep.crossover("x") == pytest.approx(np.exp(np.log(1e3) + 0.5 / 0.7 * (np.log(1e5) - np.log(1e3))))
    assert rep.wins("x", point=0) == 1 and rep.wins("x", point=1) == 0
    rep2 = run_experiment(_small(seeds=[0], sweep={"axis": "eta", "grid": [0.3, 0.7]}), persist=False)
    assert len(rep2.per_seed["linsolve"]) == 2


def test_stage_annotated_error(tmp_path):
    haar_unitary(5, 0).save(tmp_path / "u.json")
    cfg = _small(unitary={"path": str(tmp_path / "u.json")})
    with pytest.raises(ConfigError, match=r"\[stage=ideal, seed=0\]"):
        run_experiment(cfg, persist=False)


def test_interference_sweep_uniform_and_csv(tmp_path):
    rows = interference_deviation_sweep(3, 8, 3, [1, 2], 0, uniform=True)
    assert all(r["mean_abs_dev"] < 1e-15 for r in rows)
    rows = interference_deviation_sweep(2, 8, 3, [1, 2], 0, out=tmp_path / "i.csv")
    assert len(rows) == 4
    assert (tmp_path / "i.csv").read_text().splitlines()[0] == "unitary,k,mean_abs_dev,scaled"


# ---------------------------------------------------------------------- CLI


def _cli(tmp_path, cmd, cfg):
    p = tmp_path / f"{cmd}.json"
    p.write_text(json.dumps(cfg))
    return main([cmd, "--config", str(p), "--out", str(tmp_path / cmd)])


def test_cli_success_paths(tmp_path):
    assert _cli(tmp_path, "gen-unitary", {"m": 5, "seeds": [1, 2]}) == 0
    assert (tmp_path / "gen-unitary" / "unitary_m5_seed1.json").exists()
    assert _cli(tmp_path, "simulate", {"m": 6, "n": 3, "k_list": [1]}) == 0
    assert _cli(tmp_path, "sample", {"m": 6, "n": 3, "eta": 0.5, "N_tot": 20000, "seed": 1}) == 0
    ledger = tmp_path / "sample" / "ledger.csv"
    assert _cli(tmp_path, "mitigate", {"ledger": str(ledger), "k": 1, "n_d": 2}) == 0
    assert _cli(tmp_path, "bound", {"calc": "regime_max", "m": 100, "n": 10, "k": 1, "eta": 0.8}) == 0
    res = json.loads((tmp_path / "bound" / "bound.json").read_text())
    assert res["N_max"] == pytest.approx(2.4265e11, rel=1e-4)
    assert _cli(tmp_path, "zne-nogo", {"values": [3], "trials": 100}) == 0
    assert _cli(tmp_path, "gauss-lab", {"n": 2, "N": 8, "trials": 500}) == 0
    assert _cli(tmp_path, "compare", {"m": 6, "n": 3, "eta": 0.5, "N_tot": 5000, "seeds": [0], "n_d": 2}) == 0
    assert "manifest.json" in {p.name for p in (tmp_path / "compare").iterdir()}


def test_cli_config_errors(tmp_path):
    assert main(["bound", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["bound", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 2
    assert _cli(tmp_path, "bound", {"calc": "nonsense"}) == 2
    assert _cli(tmp_path, "sample", {"m": 6}) == 2
    assert _cli(tmp_path, "compare", {"m": 6, "n": 3, "methods": ["magic"]}) == 2


def test_cli_regime_errors(tmp_path):
    cfg = {"m": 8, "n": 3, "collision_policy": "reject-if-mass-low", "mass_floor": 0.99}
    assert _cli(tmp_path, "simulate", cfg) == 3
    assert _cli(tmp_path, "gauss-lab", {"n": 13, "trials": 1}) == 3


def test_uniform_table_helpers():
    u = ProbabilityTable(5, 2, np.full(10, 0.1))
    assert kl_divergence(u, u) == 0 and total_variation(u, u) == 0
