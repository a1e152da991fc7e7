"""Gibbs sampler: retention, determinism, conjugate oracles, diagnostics."""

import numpy as np
import pytest

from conftest import fast_cfg, write_study
from coverr.errors import ConfigError, DimensionMismatch
from coverr.gibbs import (
    ChainConfig,
    convergence_report,
    effective_sample_size,
    predict,
    run_chain,
    split_rhat,
)
from coverr.ingest import IngestConfig, load_dataset
from coverr.model import ParameterState
from coverr.pipeline import prepare_spatial
from coverr.synthetic import generate


def two_area_dataset(tmp_path, y=(1.0, 3.0), sd=(1.0, 1.0),
                     large=("S1", "S1")):
    areas = [("C01", "one", large[0], 40.0, -100.0),
             ("C02", "two", large[1], 40.0, -99.0)]
    estimates = [("C01", 0, y[0], sd[0]), ("C02", 0, y[1], sd[1])]
    covariates = [("C01", 2020, 0.5), ("C02", 2020, -0.5)]
    adjacency = [("C01", "C02")]
    paths = write_study(tmp_path, areas, estimates, covariates, adjacency)
    return load_dataset(paths["areas"], paths["estimates"],
                        paths["covariates"], paths["adjacency"], IngestConfig())


# ------------------------------------------------------------ configuration

def test_chain_config_validation():
    assert ChainConfig(iterations=7, burn_in=2, thin=2).n_retained_per_chain == 2
    with pytest.raises(ConfigError):
        ChainConfig(iterations=10, burn_in=10)
    with pytest.raises(ConfigError):
        ChainConfig(iterations=10, burn_in=5, thin=6)
    with pytest.raises(ConfigError):
        ChainConfig(thin=0)
    with pytest.raises(ConfigError):
        ChainConfig(n_chains=0)
    with pytest.raises(ConfigError):
        ChainConfig(rho_grid_size=5)


def test_retention_floor(tmp_path):
    ds = two_area_dataset(tmp_path)
    draws = run_chain(ds, None, "VII",
                      config=ChainConfig(iterations=7, burn_in=2, thin=2,
                                         n_chains=3, seed=1))
    assert draws.mu.shape == (3, 2)
    assert draws.theta.shape == (3, 2, 2)
    assert draws.n_retained_per_chain == 2


# ------------------------------------------------------------- determinism

def test_same_seed_same_draws(tmp_path):
    ds = two_area_dataset(tmp_path)
    cfg = fast_cfg(seed=99, n_chains=2)
    a = run_chain(ds, None, "VII", config=cfg)
    b = run_chain(ds, None, "VII", config=cfg)
    assert np.array_equal(a.mu, b.mu)
    assert np.array_equal(a.theta, b.theta)
    c = run_chain(ds, None, "VII", config=fast_cfg(seed=100, n_chains=2))
    assert not np.array_equal(a.mu, c.mu)


def test_chains_are_independent_streams(tmp_path):
    ds = two_area_dataset(tmp_path)
    draws = run_chain(ds, None, "VII", config=fast_cfg(n_chains=2))
    assert not np.array_equal(draws.mu[0], draws.mu[1])


def test_input_row_order_does_not_change_draws(tmp_path):
    truth = generate(2, 2, n_large=2, variant="V", seed=5)
    from coverr.synthetic import write_csvs

    p1 = write_csvs(truth, tmp_path / "a")
    p2 = write_csvs(truth, tmp_path / "b")
    est = (tmp_path / "b" / "estimates.csv").read_text().splitlines()
    shuffled = [est[0]] + est[1:][::-1]
    (tmp_path / "b" / "estimates.csv").write_text("\n".join(shuffled) + "\n")
    cfg = fast_cfg(iterations=120, burn_in=20, seed=3)
    out = []
    for paths in (p1, p2):
        ds = load_dataset(paths["areas"], paths["estimates"],
                          paths["covariates"], paths["adjacency"], IngestConfig())
        out.append(run_chain(ds, None, "V", config=cfg))
    assert np.array_equal(out[0].theta, out[1].theta)
    assert np.array_equal(out[0].beta_coef, out[1].beta_coef)


# ------------------------------------------------------- conjugate oracles

def test_intercept_only_posterior_matches_closed_form(tmp_path):
    # flat prior, y = (1, 3), unit variances: mu | y ~ N(2, 1/2)
    ds = two_area_dataset(tmp_path)
    draws = run_chain(ds, None, "VII",
                      config=ChainConfig(iterations=6000, burn_in=1000, seed=7))
    mu = draws.pooled("mu")
    ess = effective_sample_size(draws.mu)
    mcse = np.sqrt(0.5 / ess)
    assert abs(mu.mean() - 2.0) < 4.0 * mcse
    assert abs(mu.var(ddof=1) - 0.5) < 0.12 * 0.5


def test_group_mean_contrast_matches_closed_form(tmp_path):
    # one area per group: lam_1 - lam_2 | y ~ N(-2, 2)
    ds = two_area_dataset(tmp_path, large=("S1", "S2"))
    draws = run_chain(ds, None, "VI",
                      config=ChainConfig(iterations=6000, burn_in=1000, seed=8))
    lam = draws.pooled("lam")
    contrast = lam[:, 0] - lam[:, 1]
    ess = effective_sample_size(contrast.reshape(1, -1))
    mcse = np.sqrt(2.0 / ess)
    assert abs(contrast.mean() - (-2.0)) < 4.0 * mcse
    assert abs(contrast.var(ddof=1) - 2.0) < 0.12 * 2.0
    # the group means themselves reproduce the observations on average
    theta = draws.pooled("theta")
    assert np.allclose(theta.mean(axis=0), [1.0, 3.0], atol=0.15)


def test_theta_is_the_linear_predictor(tmp_path):
    ds = two_area_dataset(tmp_path, large=("S1", "S2"))
    d7 = run_chain(ds, None, "VII", config=fast_cfg())
    assert np.array_equal(d7.theta[..., 0], d7.mu)
    assert np.array_equal(d7.theta[..., 1], d7.mu)
    d6 = run_chain(ds, None, "VI", config=fast_cfg())
    assert np.allclose(d6.theta[..., 0], d6.mu + d6.lam[..., 0], atol=1e-12)
    assert np.allclose(d6.theta[..., 1], d6.mu + d6.lam[..., 1], atol=1e-12)


def test_loglik_matches_normal_density(tmp_path):
    ds = two_area_dataset(tmp_path)
    draws = run_chain(ds, None, "VII", config=fast_cfg())
    expected = -0.5 * (np.log(2 * np.pi * draws.design_var)
                       + (draws.y - draws.theta) ** 2 / draws.design_var)
    assert np.allclose(draws.loglik, expected, atol=1e-12)


# ----------------------------------------------------------- active blocks

def test_inactive_blocks_stay_none(tmp_path):
    ds = two_area_dataset(tmp_path)
    d7 = run_chain(ds, None, "VII", config=fast_cfg())
    for name in ("lam", "beta_coef", "beta_re", "tau2", "gamma",
                 "sigma2_gamma", "phi", "sigma2_u", "rho", "delta",
                 "sigma2_delta"):
        assert getattr(d7, name) is None, name
    assert set(d7.scalar_blocks()) == {"mu"}

    d5 = run_chain(ds, None, "V", config=fast_cfg())
    assert d5.lam is not None and d5.beta_re is not None
    assert d5.beta_coef.shape[-1] == 1 and d5.tau2 is not None
    for name in ("gamma", "sigma2_gamma", "phi", "sigma2_u", "rho",
                 "delta", "sigma2_delta"):
        assert getattr(d5, name) is None, name
    assert set(d5.scalar_blocks()) == {"mu", "tau2"}


def test_single_time_collapse(tmp_path):
    ds = two_area_dataset(tmp_path)
    restricted, system = prepare_spatial(ds)
    for requested, effective in (("I", "IV"), ("II", "IV"), ("III", "V")):
        with pytest.warns(UserWarning):
            draws = run_chain(restricted, system, requested, config=fast_cfg())
        assert draws.requested_variant.id == requested
        assert draws.variant.id == effective
        assert draws.collapsed
    draws = run_chain(ds, None, "V", config=fast_cfg())
    assert not draws.collapsed and draws.variant.id == "V"


def test_full_variant_runs_with_time_and_space():
    truth = generate(3, 3, n_large=2, n_times=3, variant="I",
                     design_sd=0.8, seed=21)
    restricted, system = prepare_spatial(truth.dataset)
    draws = run_chain(restricted, system, "I",
                      config=fast_cfg(iterations=150, burn_in=50, rho_grid_size=51))
    assert not draws.collapsed
    for name in ("lam", "beta_re", "gamma", "phi", "rho", "delta"):
        assert getattr(draws, name) is not None, name
    assert draws.gamma.shape[-1] == 3
    assert np.all(np.abs(draws.rho) < 1.0)
    # variance draws stay positive
    for name in ("tau2", "sigma2_gamma", "sigma2_u", "sigma2_delta"):
        assert np.all(draws.pooled(name) > 0.0), name


# -------------------------------------------------------------------- init

def test_init_shape_is_checked(tmp_path):
    ds = two_area_dataset(tmp_path)
    bad = ParameterState.initial(m=5, L=1, p=1, T=1, n_spatial=5)
    with pytest.raises(DimensionMismatch):
        run_chain(ds, None, "V", config=fast_cfg(), init=bad)


def test_init_list_length_is_checked(tmp_path):
    ds = two_area_dataset(tmp_path)
    good = ParameterState.initial(m=2, L=1, p=1, T=1, n_spatial=2)
    with pytest.raises(ConfigError):
        run_chain(ds, None, "V", config=fast_cfg(n_chains=2),
                  init=[good, good, good])


def test_overdispersed_starts_are_flagged(tmp_path):
    # mu and the covariate random effects form a flat ridge: shifting
    # mass between them leaves theta unchanged, so compensated starts at
    # +/-1000 mix very slowly and a short run must fail the rhat check
    ds = two_area_dataset(tmp_path)
    inits = []
    for sign in (1.0, -1.0):
        s = ParameterState.initial(m=2, L=1, p=1, T=1, n_spatial=2,
                                   mu=sign * 1000.0)
        s.beta_re = np.full(2, -sign * 1000.0)
        inits.append(s)
    draws = run_chain(ds, None, "V",
                      config=ChainConfig(iterations=10, burn_in=0, thin=1,
                                         n_chains=2, seed=12),
                      init=inits)
    report = convergence_report(draws)
    assert "mu" in report.flagged
    assert not report.converged


# -------------------------------------------------------------- prediction

def test_predict_table(tmp_path):
    ds = two_area_dataset(tmp_path)
    draws = run_chain(ds, None, "VII", config=fast_cfg(seed=2))
    frame = predict(draws)
    assert list(frame.columns) == ["area_id", "y", "design_sd", "theta_hat",
                                   "posterior_sd", "ci_low", "ci_high",
                                   "model_id"]
    assert list(frame["area_id"]) == ["C01", "C02"]
    assert (frame["ci_low"] <= frame["theta_hat"]).all()
    assert (frame["theta_hat"] <= frame["ci_high"]).all()
    assert (frame["model_id"] == "VII").all()
    # complete pooling shrinks both predictions toward the middle
    assert (frame["posterior_sd"] < frame["design_sd"]).all()


def test_predict_needs_enough_draws(tmp_path):
    ds = two_area_dataset(tmp_path)
    draws = run_chain(ds, None, "VII", config=fast_cfg(iterations=120, burn_in=70))
    assert draws.n_retained_per_chain == 50
    with pytest.raises(ConfigError):
        predict(draws)


def test_predict_variant_cross_check(tmp_path):
    ds = two_area_dataset(tmp_path)
    with pytest.warns(UserWarning):
        draws = run_chain(ds, None, "III", config=fast_cfg())
    assert draws.variant.id == "V"
    predict(draws, "III")
    predict(draws, "V")
    with pytest.raises(ConfigError):
        predict(draws, "II")


# ------------------------------------------------------------- diagnostics

def test_split_rhat_identical_chains():
    rng = np.random.default_rng(0)
    seq = rng.normal(size=1000)
    assert split_rhat(np.vstack([seq, seq])) < 1.01


def test_split_rhat_separated_chains():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(1000.0, 1.0, 200), rng.normal(-1000.0, 1.0, 200)])
    assert split_rhat(x) > 10.0


def test_split_rhat_detects_trend_within_one_chain():
    # splitting catches a drifting single chain
    assert split_rhat(np.linspace(0.0, 50.0, 400).reshape(1, -1)) > 1.5


def test_effective_sample_size_scales_with_autocorrelation():
    rng = np.random.default_rng(2)
    iid = rng.normal(size=(4, 500))
    assert effective_sample_size(iid) > 1000.0
    ar = np.empty((2, 1000))
    ar[:, 0] = 0.0
    for t in range(1, 1000):
        ar[:, t] = 0.95 * ar[:, t - 1] + rng.normal(size=2)
    assert effective_sample_size(ar) < 400.0


def test_convergence_report_on_a_clean_run(tmp_path):
    ds = two_area_dataset(tmp_path)
    draws = run_chain(ds, None, "VII",
                      config=ChainConfig(iterations=2000, burn_in=500,
                                         n_chains=2, seed=4))
    report = convergence_report(draws)
    names = [r.name for r in report.rows]
    assert "mu" in names
    assert report.converged
    assert all(r.ess > 0 for r in report.rows)
    frame = report.to_frame()
    assert list(frame.columns) == ["parameter", "rhat", "ess"]
