import math

import numpy as np
import pytest

import rfimp


def paper_data(n=200, seed=1):
    cfg = rfimp.ScenarioConfig()
    cfg.n_obs = n
    full = rfimp.generate(cfg, rfimp.Rng(seed))
    ac = rfimp.AmputeConfig()
    ac.pattern_columns = ["X", "XZ"]
    ac.prop = 0.5
    ac.rng_seed = seed + 1
    return full, rfimp.ampute(full, ac)


def test_dataset_round_trip():
    ds = rfimp.Dataset({"a": np.array([1.0, np.nan, 3.0]), "b": np.array([4.0, 5.0, 6.0])})
    assert ds.n_rows == 3
    assert ds.names == ["a", "b"]
    assert ds.n_missing() == 1
    assert ds.missing_mask("a") == [False, True, False]
    d = ds.to_dict()
    assert math.isnan(d["a"][1]) and d["b"][2] == 6.0


def test_csv_round_trip(tmp_path):
    full, amputed = paper_data()
    path = tmp_path / "amputed.csv"
    rfimp.write_csv(amputed, path)
    back = rfimp.read_csv(path)
    assert back == amputed


def test_forest_and_error_pool():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 2))
    y = x[:, 0] - 2 * x[:, 1] + rng.normal(size=200)
    params = rfimp.ForestParams()
    params.n_trees = 20
    params.rng_seed = 3
    f = rfimp.Forest.fit(x, y, params=params)
    assert f.n_trees == 20
    assert f.predict(x).shape == (200,)
    pool = rfimp.ErrorDistribution.build(f, x, y)
    assert len(pool.errors) + pool.n_excluded == 200
    assert pool.oob_mse == pytest.approx(np.mean(pool.errors ** 2), rel=1e-12)


def test_impute_and_pool():
    full, amputed = paper_data()
    cfg = rfimp.ImputationConfig.uniform(amputed, rfimp.Method.EmpiricalRF)
    cfg.n_imputations = 3
    cfg.n_iterations = 2
    cfg.rng_seed = 7
    res = rfimp.impute(amputed, cfg)
    assert len(res.completed) == 3
    x_in = amputed.column("X")
    for ds in res.completed:
        assert ds.n_missing() == 0
        x_out = ds.column("X")
        obs = ~np.isnan(x_in)
        assert np.array_equal(x_out[obs], x_in[obs])
    pooled = rfimp.pool([rfimp.fit_interaction_model(ds) for ds in res.completed])
    lo, hi = pooled.coefficient("XZ").ci
    assert lo < hi


def test_ols_exact():
    cfg = rfimp.ScenarioConfig()
    cfg.n_obs = 100
    cfg.noise_sd = 0.0
    fit = rfimp.fit_interaction_model(rfimp.generate(cfg, rfimp.Rng(2)))
    assert fit.names == ["(Intercept)", "X", "Z", "XZ"]
    assert np.allclose(fit.estimates, [0, 1, 1, -1], atol=1e-8)


def test_errors_surface_as_exceptions():
    ds = rfimp.Dataset({"a": np.array([np.nan, np.nan])})
    with pytest.raises(rfimp.Error):
        rfimp.initialize_chain(ds, rfimp.Rng(1))


def test_run_study_smoke():
    cfg = rfimp.ScenarioConfig()
    cfg.n_obs = 150
    cfg.n_reps = 1
    cfg.n_imputations = 2
    cfg.n_iterations = 2
    cfg.rng_seed = 5
    r = rfimp.run_study(cfg)
    assert r.n_failed == 0
    assert r.row("Original", "X").n_reps == 1


def test_classification_probabilities():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(120, 2))
    y = (x[:, 0] > 0).astype(float)
    f = rfimp.Forest.fit(x, y, task=rfimp.Task.Classification, n_classes=2)
    p = f.predict_proba(x)
    assert p.shape == (120, 2)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.mean(np.argmax(p, axis=1) == y) > 0.9
