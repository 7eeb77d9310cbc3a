import hashlib
import io
import json

import numpy as np
import pytest

from patchrec.bench import (SynthSpec, bench_grid, build_dct_dictionary, dct_basis_1d,
                            generate_synthetic, recovery_rate, run_synth_bench,
                            sample_training_patches, write_report_csv, write_report_json)
from patchrec.dictlearn import LearnConfig, random_dictionary


def test_recovery_rate_invariances(rng):
    D = random_dictionary(10, 8, rng)
    assert recovery_rate(D, D) == 100.0
    perm = D[:, rng.permutation(8)] * rng.choice([-1.0, 1.0], 8) * 3.0
    assert recovery_rate(D, perm) == 100.0
    assert recovery_rate(D, perm[:, :4]) == 50.0


def test_recovery_rate_threshold_boundary():
    a = np.array([[1.0], [0.0]])
    theta = np.arccos(0.99)
    inside = np.array([[np.cos(theta * 0.999)], [np.sin(theta * 0.999)]])
    outside = np.array([[np.cos(theta * 1.01)], [np.sin(theta * 1.01)]])
    assert recovery_rate(a, inside) == 100.0
    assert recovery_rate(a, outside) == 0.0


def test_recovery_rate_random_is_low(rng):
    rates = [recovery_rate(random_dictionary(16, 32, rng), random_dictionary(16, 32, rng))
             for _ in range(20)]
    assert np.mean(rates) < 5.0


def test_recovery_rate_zero_atoms(rng):
    D = random_dictionary(5, 3, rng)
    Z = D.copy()
    Z[:, 1] = 0
    with pytest.warns(UserWarning):
        assert recovery_rate(D, Z) == pytest.approx(200 / 3)
    with pytest.raises(ValueError):
        recovery_rate(D, np.ones((4, 3)))


def test_synthetic_samples_lie_in_support(rng):
    spec = SynthSpec(n=12, K=20, p=40, r=3)
    D, X, S = generate_synthetic(spec, rng, return_support=True)
    np.testing.assert_allclose(np.linalg.norm(D, axis=0), 1.0)
    for j in range(spec.p):
        assert len(set(S[:, j])) == 3
        A = D[:, S[:, j]]
        coef, *_ = np.linalg.lstsq(A, X[:, j], rcond=None)
        assert np.linalg.norm(A @ coef - X[:, j]) <= 1e-10 * np.linalg.norm(X[:, j])


def test_synth_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(K=4, r=5)
    with pytest.warns(UserWarning):
        SynthSpec(K=4, r=4)


def test_bench_small_cell_is_deterministic():
    spec = SynthSpec(n=8, K=12, p=80, r=2, num_trials=2, seed=1)
    a = run_synth_bench(spec, LearnConfig(lam=0.5 / np.sqrt(8), max_iters=50))
    b = run_synth_bench(spec, LearnConfig(lam=0.5 / np.sqrt(8), max_iters=50))
    assert a["rates"] == b["rates"]
    assert 0 <= a["mean_rate_pct"] <= 100


def test_grid_shapes():
    assert len(bench_grid("desk")) == 12
    paper = bench_grid("paper")
    assert len(paper) == 15 and paper[0].n == 36 and paper[0].num_trials == 50
    with pytest.raises(ValueError):
        bench_grid("huge")


def test_report_writers():
    rows = [{"n": 16, "K": 32, "p": 320, "r": 3, "trials": 2, "mean_rate_pct": 93.75,
             "mean_time_s": 0.5, "mean_iterations": 100.0, "rates": [90.0, 97.5]}]
    buf = io.StringIO()
    write_report_csv(rows, buf, timing=False)
    assert buf.getvalue() == "cell_id,K,p,r,mean_rate_pct,mean_time_s,trials\n0,32,320,3,93.75,,2\n"
    buf = io.StringIO()
    write_report_json(rows, buf, timing=False)
    cell = json.loads(buf.getvalue())["cells"][0]
    assert "mean_time_s" not in cell and cell["cell_id"] == 0


def test_dct_basis():
    B = dct_basis_1d(8, 16)
    assert B.shape == (8, 16)
    np.testing.assert_allclose(np.linalg.norm(B, axis=0), 1.0)
    np.testing.assert_allclose(B[:, 1:].sum(axis=0), 0.0, atol=1e-12)


def test_dct_dictionary(data_dir):
    D = build_dct_dictionary(8, 8, 257)
    assert D.atoms.shape == (64, 257) and D.has_dc
    np.testing.assert_allclose(np.linalg.norm(D.atoms, axis=0), 1.0)
    # separable: every non-DC atom reshaped is rank one
    assert all(np.linalg.matrix_rank(D.atoms[:, k].reshape(8, 8), tol=1e-10) == 1
               for k in range(1, 257, 17))
    digest = hashlib.sha256(D.to_bytes()).hexdigest()
    assert digest == (data_dir / "dct_8x8_257.sha256").read_text().split()[0]
    with pytest.raises(ValueError):
        build_dct_dictionary(8, 8, 256)


def test_training_patches(rng):
    imgs = [rng.uniform(0, 255, (20, 20)), rng.uniform(0, 255, (4, 4))]
    with pytest.warns(UserWarning):
        X = sample_training_patches(imgs, 30, 8, 8, rng)
    assert X.shape == (64, 30)
    np.testing.assert_allclose(X.mean(axis=0), 0.0, atol=1e-10)
    a = sample_training_patches(imgs[:1], 5, 8, 8, 7)
    np.testing.assert_array_equal(a, sample_training_patches(imgs[:1], 5, 8, 8, 7))
