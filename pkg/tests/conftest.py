"""Shared fixtures: tiny studies on disk, fabricated draws, a CLI runner."""

import csv
import hashlib
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from coverr.gibbs import ChainConfig, PosteriorDraws
from coverr.model import Hyperpriors, ModelVariant

AREAS_HEADER = ["area_id", "name", "large_area_id", "latitude", "longitude"]
ESTIMATES_HEADER = ["area_id", "time_index", "rate_pct", "design_sd_pct"]
ADJACENCY_HEADER = ["area_id_a", "area_id_b"]

# verdict lines appended by the acceptance tests, echoed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def fast_cfg(**kw) -> ChainConfig:
    """Small chain settings for tests that only need the machinery to run."""
    base = dict(iterations=400, burn_in=100, thin=1, n_chains=1, seed=0)
    base.update(kw)
    return ChainConfig(**base)


def write_study(dirpath, areas, estimates, covariates, adjacency,
                covariate_names=("x1",)):
    """Write the four input files from plain row tuples; returns their paths.

    areas: (area_id, name, large_id, lat, lon)
    estimates: (area_id, time_index, rate, design_sd)
    covariates: (area_id, year, *values)
    adjacency: (id_a, id_b)
    """
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    paths = {}
    for fname, header, rows in (
        ("areas.csv", AREAS_HEADER, areas),
        ("estimates.csv", ESTIMATES_HEADER, estimates),
        ("covariates.csv", ["area_id", "year", *covariate_names], covariates),
        ("adjacency.csv", ADJACENCY_HEADER, adjacency),
    ):
        path = dirpath / fname
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        paths[fname.split(".")[0]] = path
    return paths


def fake_draws(y, design_var, theta, variant_id="VII"):
    """A PosteriorDraws holding exactly the given theta draws.

    theta may be (n,) for a point mass, (S, n), or (C, S, n).  loglik is
    filled in from the normal likelihood so the selection code sees a
    self-consistent object.  Only the fields the scoring code touches are
    populated with care; sampler-only blocks stay None.
    """
    y = np.asarray(y, float)
    v = np.asarray(design_var, float)
    theta = np.asarray(theta, float)
    if theta.ndim == 1:
        theta = theta[None, None, :]
    elif theta.ndim == 2:
        theta = theta[None, :, :]
    c, s, n = theta.shape
    if n != y.size:
        raise ValueError("theta draws do not match y")
    loglik = -0.5 * (np.log(2.0 * np.pi * v) + (y - theta) ** 2 / v)
    variant = ModelVariant.from_id(variant_id)
    ids = tuple(f"A{i:04d}" for i in range(n))
    return PosteriorDraws(
        variant=variant,
        requested_variant=variant,
        config=ChainConfig(iterations=s, burn_in=0, thin=1, n_chains=c, seed=0),
        hyperpriors=Hyperpriors(),
        collapsed=False,
        area_ids=ids,
        large_ids=("S00",),
        covariate_names=(),
        time_indices=(0,),
        target_time_pos=0,
        y=y,
        design_var=v,
        obs_area=np.arange(n),
        obs_time=np.zeros(n, dtype=int),
        mu=theta.mean(axis=2),
        lam=None, beta_coef=None, beta_re=None, tau2=None,
        gamma=None, sigma2_gamma=None, phi=None, sigma2_u=None,
        rho=None, delta=None, sigma2_delta=None,
        theta=theta,
        loglik=loglik,
    )


def run_cli(args, env_extra=None, cwd=None):
    """Invoke the CLI exactly as a user would and capture everything."""
    env = dict(os.environ)
    env.setdefault("SOURCE_DATE_EPOCH", "1700000000")
    env["MPLBACKEND"] = "Agg"
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "coverr.cli", *[str(a) for a in args]],
        capture_output=True, text=True, env=env, cwd=cwd,
    )


def tree_hashes(root) -> dict:
    root = Path(root)
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


@pytest.fixture()
def study_paths(tmp_path):
    """A loadable 3x3 synthetic study on disk (two time points)."""
    from coverr.synthetic import generate, write_csvs

    truth = generate(3, 3, n_large=2, n_times=2, n_covariates=2,
                     variant="II", beta_coef=(0.8, -0.3), seed=11)
    paths = write_csvs(truth, tmp_path / "study")
    paths["truth_obj"] = truth
    return paths
