import numpy as np
import pytest

from tvstokes.decomposition import DdConfig, DdProblem
from tvstokes.images import NoiseSpec, add_noise, phantom
from tvstokes.metrics import best_index, mssim, psnr
from tvstokes.pipeline import (DdSettings, PipelineConfig, dd_experiment, reconstruct, run_tvstokes,
                               smooth_tangent, sweep)
from tvstokes.solvers import SolverConfig


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(variant="irv3")
    with pytest.raises(ValueError):
        PipelineConfig(deltas=())


@pytest.mark.parametrize("variant", ["irv1", "irv2"])
def test_constant_image_is_preserved(variant):
    d0 = np.full((12, 10), 0.37)
    res = run_tvstokes(d0, PipelineConfig(variant=variant))
    np.testing.assert_allclose(res.d, d0, atol=1e-12)
    assert not res.tau.any()
    assert set(res.traces) == {"tfs", variant}


@pytest.mark.parametrize("variant,alpha", [("irv1", 10.0), ("irv2", 10.0)])
def test_denoising_improves_psnr(variant, alpha):
    gt = phantom("disk-stripes", 64)
    noisy = add_noise(gt, NoiseSpec(0.0025, seed=1))
    cfg = PipelineConfig(solver=SolverConfig(delta=0.04, alpha=alpha, epsilon=1e-3), variant=variant)
    res = run_tvstokes(noisy, cfg)
    assert psnr(res.d, gt) > psnr(noisy, gt)


@pytest.mark.slow
def test_decomposed_and_plain_tangent_fields_agree():
    gt = phantom("gradient-edges", 24)
    noisy = add_noise(gt, NoiseSpec(0.01, seed=2))
    solver = SolverConfig(delta=0.15, tol=1e-12, max_it=200_000)
    plain_tau, plain_trace = smooth_tangent(noisy, PipelineConfig(solver=solver))
    dd = DdSettings(2, 2, 3, 3, DdConfig(max_it=3000, outer_tol=1e-14))
    dd_tau, dd_trace = smooth_tangent(noisy, PipelineConfig(solver=solver, dd=dd))
    assert abs(dd_trace.final - plain_trace.final) <= 1e-4 * plain_trace.final
    assert np.linalg.norm(dd_tau - plain_tau) <= 1e-2 * np.linalg.norm(plain_tau)


def test_decomposed_reconstruction_runs_on_primal_grid():
    gt = phantom("disk-stripes", 24)
    noisy = add_noise(gt, NoiseSpec(0.01, seed=2))
    tau, _ = smooth_tangent(noisy, PipelineConfig())
    dd = DdSettings(2, 2, 3, 3, DdConfig(max_it=200, outer_tol=0.0))
    for variant in ("irv1", "irv2"):
        plain, _, _ = reconstruct(noisy, tau, PipelineConfig(), variant)
        d, trace, _ = reconstruct(noisy, tau, PipelineConfig(dd=dd), variant)
        assert trace.iterations == 200
        assert d.shape == noisy.shape
        assert np.linalg.norm(d - plain) <= 0.05 * np.linalg.norm(plain)


def _small_cfg(**kw):
    base = dict(deltas=(0.15,), irv1_alphas=(10.0,), epsilons=(1e-3,), irv2_alphas=(10.0,))
    base.update(kw)
    return PipelineConfig(solver=SolverConfig(max_it=2000), **base)


def test_single_point_sweep_rows():
    gt = phantom("disk-stripes", 16)
    res = sweep(gt, (0.01,), _small_cfg(), seed=0, image_id="p")
    methods = [r[2] for r in res.rows]
    assert methods == ["noisy", "tfs", "irv1", "irv2"]
    assert res.selected_delta == {0.01: 0.15}
    assert res.best[(0.01, "irv1")] is res.rows[2]


def test_sweep_selects_best_delta_and_best_rows():
    gt = phantom("gradient-edges", 16)
    cfg = _small_cfg(deltas=(0.01, 0.08, 1.2), irv2_alphas=(1.0, 10.0, 100.0))
    res = sweep(gt, (0.0025, 0.01), cfg, seed=4)
    for var in (0.0025, 0.01):
        tfs = [r for r in res.rows if r[1] == var and r[2] == "tfs"]
        perf = [r[3]["perf"] for r in tfs]
        assert res.selected_delta[var] == tfs[best_index(perf)][3]["delta"]
        irv2 = [r for r in res.rows if r[1] == var and r[2] == "irv2"]
        assert res.best[(var, "irv2")][4] == max(r[4] for r in irv2)


def test_sweep_csv_is_deterministic():
    gt = phantom("disk-stripes", 16)
    a = sweep(gt, (0.01,), _small_cfg(), seed=7).to_csv()
    b = sweep(gt, (0.01,), _small_cfg(), seed=7).to_csv()
    assert a == b
    assert a.splitlines()[0] == "image_id,noise_variance,method,params,psnr,mssim"


def test_sweep_noisy_row_matches_metrics():
    gt = phantom("disk-stripes", 16)
    res = sweep(gt, (0.01,), _small_cfg(), seed=3)
    noisy = add_noise(gt, NoiseSpec(0.01, 3))
    assert res.rows[0][4:] == (psnr(noisy, gt), mssim(noisy, gt))


def test_dd_experiment_outputs(tmp_path):
    gt = phantom("disk-stripes", 16)
    cfg = PipelineConfig(solver=SolverConfig(delta=0.15, alpha=10.0, epsilon=1e-3),
                         dd=DdSettings(2, 2, 3, 3, DdConfig(max_it=30, outer_tol=0.0)))
    exp = dd_experiment(gt, cfg, reference_it=20_000, out_dir=tmp_path)
    assert set(exp.traces) == {"tfs", "irv1_from_ref", "irv1_from_dd", "irv2_from_ref", "irv2_from_dd"}
    assert set(exp.reference) == {"tfs", "irv1", "irv2"}
    names = sorted(p.name for p in exp.files)
    assert "dd_energy_tfs.csv" in names and "dd_energy_irv2.svg" in names
    for p in exp.files:
        assert p.exists()
    lines = (tmp_path / "dd_energy_tfs.csv").read_text().splitlines()
    assert lines[0] == "n,energy,relative_gap" and len(lines) == 32
    assert (tmp_path / "dd_energy_tfs.svg").read_text().startswith("<svg")
    for key, tr in exp.traces.items():
        assert tr.iterations == 30
        assert exp.relative_gap(key) >= 0


@pytest.mark.slow
def test_dd_experiment_known_references_and_stop_gap():
    gt = phantom("disk-stripes", 16)
    cfg = PipelineConfig(solver=SolverConfig(delta=0.15, alpha=10.0, epsilon=1e-3),
                         dd=DdSettings(2, 2, 3, 3, DdConfig(max_it=400, outer_tol=0.0)))
    exp = dd_experiment(gt, cfg, reference_it=20_000, stop_gap=1e-2)
    for key in ("tfs", "irv1_from_ref", "irv2_from_ref"):
        assert exp.relative_gap(key) < 1e-2
    assert exp.traces["irv1_from_dd"].iterations == exp.traces["irv1_from_ref"].iterations
    fixed = dd_experiment(gt, cfg, reference_it=20_000, stop_gap=1e-2,
                          reference_energies={"irv1": 1.0, "irv2": 2.0})
    assert fixed.reference["irv1"] == 1.0 and fixed.reference["irv2"] == 2.0
