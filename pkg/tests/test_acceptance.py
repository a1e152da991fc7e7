"""Acceptance gate: every shipped guarantee, one printed PASS/FAIL line each.

Each test exercises one numbered guarantee end to end at its stated
tolerance and prints a single line to the real stdout so the verdicts
are visible even under pytest's capture.  Runtime limits are asserted
where a guarantee states one.
"""

import math
import sys
from contextlib import contextmanager
from time import perf_counter

import numpy as np
import pytest
from scipy import integrate, stats

import conftest
from conftest import run_cli, tree_hashes, write_study
from coverr.errors import AllPruned
from coverr.gibbs import ChainConfig, effective_sample_size, run_chain
from coverr.ingest import IngestConfig, load_dataset
from coverr.model import invgamma_mean, invgamma_update, rho_log_prior
from coverr.pipeline import compare_models, prepare_spatial
from coverr.selection import cpo
from coverr.spatial import (
    WeightSystem,
    build_weight_system,
    car_covariance,
    car_precision,
    contiguity_matrix,
    distance_matrix,
    morans_i,
)
from coverr.synthetic import generate

import dataclasses


@contextmanager
def criterion(label):
    verdict = {"ok": False, "detail": ""}
    try:
        yield verdict
    except Exception as exc:
        conftest.ACCEPTANCE_LINES.append(f"FAIL {label}: raised {exc!r}")
        raise
    line = f"{'PASS' if verdict['ok'] else 'FAIL'} {label}: {verdict['detail']}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line, file=sys.__stdout__, flush=True)
    assert verdict["ok"], line


def two_obs_dataset(tmp_path, y=(1.0, 3.0), sd=(1.0, 1.0), large=("S1", "S1")):
    areas = [("C01", "one", large[0], 40.0, -100.0),
             ("C02", "two", large[1], 40.0, -99.0)]
    estimates = [("C01", 0, y[0], sd[0]), ("C02", 0, y[1], sd[1])]
    covariates = [("C01", 2020, 0.5), ("C02", 2020, -0.5)]
    paths = write_study(tmp_path, areas, estimates, covariates, [("C01", "C02")])
    return load_dataset(paths["areas"], paths["estimates"],
                        paths["covariates"], paths["adjacency"], IngestConfig())


def _fixed_point_prune(w_star):
    keep = list(range(w_star.shape[0]))
    while True:
        sub = w_star[np.ix_(keep, keep)]
        alive = [k for k, s in zip(keep, sub.sum(axis=1)) if s > 0.0]
        if alive == keep:
            return keep
        keep = alive


def test_c1_weight_system_correctness():
    with criterion("C1") as c:
        t0 = perf_counter()
        rng = np.random.default_rng(101)
        ok, built = True, 0
        for _ in range(1000):
            n = int(rng.integers(2, 16))
            ids = [f"A{i:02d}" for i in range(n)]
            coords = rng.uniform(-2.0, 2.0, (n, 2))
            rates = rng.normal(size=n)
            rates[rng.random(n) < 0.15] = 0.0
            pairs = [(ids[i], ids[j]) for i in range(n)
                     for j in range(i + 1, n) if rng.random() < 0.4]
            dist = distance_matrix(coords)
            contig = contiguity_matrix(pairs, ids, dict(zip(ids, rates)))
            full = np.exp(-dist) * contig
            survivors = _fixed_point_prune(full)
            one_pass = [k for k in range(n) if full[k].sum() > 0.0]
            ok &= survivors == one_pass  # symmetry makes one pass the fixed point
            try:
                system = build_weight_system(dist, contig, ids)
            except AllPruned:
                ok &= not survivors
                continue
            built += 1
            ok &= bool(np.allclose(system.w.sum(axis=1), 1.0, atol=1e-12))
            ok &= bool(np.array_equal(system.w_star, system.w_star.T))
            ok &= [ids[k] for k in survivors] == list(system.kept_ids)

        hand = build_weight_system(
            distance_matrix(np.array([(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)])),
            contiguity_matrix([("A", "B"), ("B", "C")], ["A", "B", "C"],
                              {"A": 1.0, "B": 2.0, "C": -1.0}),
            ["A", "B", "C"])
        hand_ok = (hand.kept_ids == ("A", "B")
                   and abs(hand.w_star[0, 1] - math.exp(-1.0)) < 1e-15
                   and hand.pruned[0][0] == "C")
        elapsed = perf_counter() - t0
        c["ok"] = ok and hand_ok and built >= 500 and elapsed < 5.0
        c["detail"] = (f"1000 instances ({built} built), row sums 1 +/- 1e-12, "
                       f"pruning fixed point = one pass, hand example ok, "
                       f"{elapsed:.2f}s < 5s")


def test_c2_car_law():
    with criterion("C2") as c:
        t0 = perf_counter()
        rng = np.random.default_rng(202)
        ok, worst = True, 0.0
        for _ in range(1000):
            n = int(rng.integers(2, 11))
            upper = np.triu(rng.uniform(0.1, 1.0, (n, n)) *
                            (rng.random((n, n)) < 0.6), 1)
            w_star = upper + upper.T
            for i in range(n):  # guarantee positive row sums
                if w_star[i].sum() == 0.0:
                    j = (i + 1) % n
                    w_star[i, j] = w_star[j, i] = 0.5
            system = WeightSystem.from_star([f"A{i}" for i in range(n)], w_star)
            sigma2 = float(rng.lognormal(0.0, 0.7))
            rho = float(rng.uniform(-0.99, 0.99))
            q = car_precision(system, sigma2, rho)
            ok &= bool(np.array_equal(q, q.T))
            try:
                np.linalg.cholesky(q)
            except np.linalg.LinAlgError:
                ok = False
            resid = np.abs(q @ car_covariance(system, sigma2, rho) - np.eye(n)).max()
            worst = max(worst, float(resid))
        ok &= worst < 1e-10

        two = WeightSystem.from_star(["A", "B"], np.array([[0.0, 0.5], [0.5, 0.0]]))
        example_ok = np.array_equal(car_precision(two, 1.0, 0.5),
                                    np.array([[0.5, -0.25], [-0.25, 0.5]]))
        elapsed = perf_counter() - t0
        c["ok"] = ok and example_ok and elapsed < 10.0
        c["detail"] = (f"1000 draws symmetric PD, max |Q Sigma - I| = {worst:.2e} "
                       f"< 1e-10, 2-area example exact, {elapsed:.2f}s < 10s")


def test_c3_morans_i_oracle():
    with criterion("C3") as c:
        rng = np.random.default_rng(303)
        ok, worst = True, 0.0
        for _ in range(200):
            n = int(rng.integers(2, 13))
            z = rng.normal(size=n)
            w = rng.uniform(0.0, 1.0, (n, n)) * (rng.random((n, n)) < 0.7)
            np.fill_diagonal(w, 0.0)
            if w.sum() == 0.0:
                w[0, 1] = 1.0
            res = morans_i(z, w)
            zc = z - z.mean()
            num = sum(w[i, j] * zc[i] * zc[j]
                      for i in range(n) for j in range(n))
            brute = (n / w.sum()) * num / float(zc @ zc)
            worst = max(worst, abs(res.I - brute))
            ok &= res.expected_I == -1.0 / (n - 1)
        ok &= worst < 1e-12
        anti = morans_i([1.0, 3.0], [[0.0, 1.0], [1.0, 0.0]])
        ok &= anti.I == -1.0 and math.isnan(anti.sd_I)
        c["ok"] = ok
        c["detail"] = (f"200 instances, max |I - brute force| = {worst:.2e} "
                       f"< 1e-12, E(I) exact, antithetic pair gives I = -1")


def test_c4_sampler_oracles(tmp_path):
    with criterion("C4") as c:
        t0 = perf_counter()
        ds = two_obs_dataset(tmp_path / "a")
        vii = run_chain(ds, None, "VII",
                        config=ChainConfig(iterations=21000, burn_in=1000, seed=41))
        mu = vii.pooled("mu")
        mcse = math.sqrt(0.5 / effective_sample_size(vii.mu))
        mu_err = abs(mu.mean() - 2.0)
        var_rel = abs(mu.var(ddof=1) - 0.5) / 0.5
        vii_ok = mu.size == 20000 and mu_err < 3.0 * mcse and var_rel < 0.10

        ds2 = two_obs_dataset(tmp_path / "b", large=("S1", "S2"))
        vi = run_chain(ds2, None, "VI",
                       config=ChainConfig(iterations=21000, burn_in=1000, seed=42))
        lam = vi.pooled("lam")
        contrast = lam[:, 0] - lam[:, 1]
        mcse2 = math.sqrt(2.0 / effective_sample_size(contrast.reshape(1, -1)))
        con_err = abs(contrast.mean() + 2.0)
        con_var_rel = abs(contrast.var(ddof=1) - 2.0) / 2.0
        vi_ok = con_err < 3.0 * mcse2 and con_var_rel < 0.10
        elapsed = perf_counter() - t0
        c["ok"] = vii_ok and vi_ok and elapsed < 30.0
        c["detail"] = (f"intercept mean off {mu_err:.4f} < 3 MCSE ({3 * mcse:.4f}), "
                       f"var off {100 * var_rel:.1f}% < 10%; contrast mean off "
                       f"{con_err:.4f} < {3 * mcse2:.4f}, var off "
                       f"{100 * con_var_rel:.1f}%; {elapsed:.1f}s < 30s")


def test_c5_prior_machinery():
    with criterion("C5") as c:
        integral, _ = integrate.quad(lambda r: math.exp(rho_log_prior(r)),
                                     -1.0, 1.0, limit=200)
        integral_ok = abs(integral - 0.5) < 1e-6

        upd = invgamma_update(0.025, 0.025, 2, 2.0)
        mean = invgamma_mean(*upd)
        ig_ok = (upd == pytest.approx((1.025, 1.025), abs=1e-15)
                 and abs(mean - 41.0) < 1e-12)

        # near-flat likelihood: tiny constant rates with enormous design
        # variance leave the spatial dependence draw at its prior
        truth = generate(4, 4, n_large=1, n_covariates=0, variant="IV",
                         design_sd=1.0, n_times=1, sigma2_u=0.5, rho=0.5,
                         seed=9)
        flat = dataclasses.replace(
            truth.dataset,
            y=np.full(16, 1e-3),
            design_var=np.full(16, 1e12),
        )
        _, system = prepare_spatial(flat)
        draws = run_chain(flat, system, "IV",
                          config=ChainConfig(iterations=55000, burn_in=5000,
                                             seed=20260816, rho_grid_size=4001))
        rho_draws = draws.pooled("rho")
        ks = stats.kstest(rho_draws,
                          lambda x: np.arcsin(np.clip(x, -1, 1)) / np.pi + 0.5
                          ).statistic
        ks_ok = rho_draws.size == 50000 and ks < 0.02
        c["ok"] = integral_ok and ig_ok and ks_ok
        c["detail"] = (f"prior integral {integral:.8f} = 0.5 +/- 1e-6 "
                       f"(unnormalized by design), IG update (1.025, 1.025) "
                       f"mean 41, KS = {ks:.4f} < 0.02 at 50000 draws")


def test_c6_synthetic_recovery():
    with criterion("C6") as c:
        t0 = perf_counter()
        n_reps = 200
        cover = {"mu": 0, "b1": 0, "b2": 0, "tau2": 0}
        hb_wins = 0
        # design noise comparable to tau2 keeps every parameter identified;
        # with much larger noise the variance posterior is prior-dominated
        # and fixed-truth coverage is not a meaningful calibration check
        cfg_kw = dict(iterations=3000, burn_in=1000, thin=1, n_chains=1)
        for rep in range(n_reps):
            truth = generate(20, 10, n_large=4, n_covariates=2, variant="V",
                             beta_coef=(1.0, -0.5), design_sd=0.5,
                             n_times=1, seed=rep)
            ds = truth.dataset
            draws = run_chain(ds, None, "V",
                              config=ChainConfig(seed=rep, **cfg_kw))

            def covers(pooled, target):
                lo, hi = np.quantile(pooled, [0.025, 0.975])
                return bool(lo <= target <= hi)

            cover["mu"] += covers(draws.pooled("mu"), 2.0)
            beta = draws.pooled("beta_coef")
            cover["b1"] += covers(beta[:, 0], 1.0)
            cover["b2"] += covers(beta[:, 1], -0.5)
            cover["tau2"] += covers(draws.pooled("tau2"), 0.25)

            theta_hat = draws.pooled("theta").mean(axis=0)
            mse_hb = float(np.mean((theta_hat - truth.theta_target) ** 2))
            mse_direct = float(np.mean((ds.y - truth.theta_target) ** 2))
            hb_wins += mse_hb <= mse_direct
        elapsed = perf_counter() - t0
        rates = {k: v / n_reps for k, v in cover.items()}
        c["ok"] = (all(r >= 0.90 for r in rates.values())
                   and hb_wins >= 0.80 * n_reps and elapsed < 600.0)
        c["detail"] = (f"coverage mu {rates['mu']:.3f}, beta ({rates['b1']:.3f}, "
                       f"{rates['b2']:.3f}), tau2 {rates['tau2']:.3f} all >= 0.90; "
                       f"model beats direct MSE in {hb_wins}/{n_reps} >= 80%; "
                       f"{elapsed:.0f}s < 600s")


def test_c7_selection_sanity(tmp_path):
    with criterion("C7") as c:
        prefer = {"II": {"dic": 0, "lpml": 0}, "V": {"dic": 0, "lpml": 0}}
        n_reps = 100
        for rep in range(n_reps):
            truth2 = generate(5, 5, n_large=2, n_covariates=2, variant="II",
                              beta_coef=(1.0, -0.5), design_sd=0.7, n_times=3,
                              sigma2_u=0.5, rho=0.8, sigma2_gamma=0.3, seed=rep)
            cmp2 = compare_models(
                truth2.dataset, ("II", "VII"),
                chain_config=ChainConfig(iterations=900, burn_in=300,
                                         rho_grid_size=101, seed=rep))
            prefer["II"]["dic"] += (cmp2.fits["II"].score.dic
                                    < cmp2.fits["VII"].score.dic)
            prefer["II"]["lpml"] += (cmp2.fits["II"].score.lpml
                                     > cmp2.fits["VII"].score.lpml)

            truth5 = generate(5, 5, n_large=2, n_covariates=2, variant="V",
                              beta_coef=(1.0, -0.5), design_sd=0.7,
                              n_times=1, seed=rep)
            cmp5 = compare_models(
                truth5.dataset, ("V", "VII"),
                chain_config=ChainConfig(iterations=900, burn_in=300, seed=rep))
            prefer["V"]["dic"] += (cmp5.fits["V"].score.dic
                                   < cmp5.fits["VII"].score.dic)
            prefer["V"]["lpml"] += (cmp5.fits["V"].score.lpml
                                    > cmp5.fits["VII"].score.lpml)
        pref_ok = all(prefer[v][m] >= 0.80 * n_reps
                      for v in ("II", "V") for m in ("dic", "lpml"))

        # leave-one-out oracle: the harmonic-mean estimator is heavy-tailed
        # on this posterior, so the 5% check gets a long chain
        ds = two_obs_dataset(tmp_path)
        draws = run_chain(ds, None, "VII",
                          config=ChainConfig(iterations=205000, burn_in=5000,
                                             seed=51))
        exact = math.exp(-1.0) / math.sqrt(4.0 * math.pi)
        rel = np.abs(np.exp(cpo(draws).log_cpo) - exact) / exact
        cpo_ok = bool(np.all(rel < 0.05))
        c["ok"] = pref_ok and cpo_ok
        c["detail"] = (f"preferred over the null in II: DIC {prefer['II']['dic']}"
                       f"/100, LPML {prefer['II']['lpml']}/100; V: DIC "
                       f"{prefer['V']['dic']}/100, LPML {prefer['V']['lpml']}/100 "
                       f"(all >= 80); CPO rel err {rel.max():.4f} < 5%")


def test_c8_car_sampling_validation():
    with criterion("C8") as c:
        n_draws = 10000
        phis = np.empty((n_draws, 5))
        system = None
        for k in range(n_draws):
            truth = generate(1, 5, n_large=1, n_covariates=0, variant="IV",
                             sigma2_u=0.5, rho=0.98, coord_step=0.1, seed=k)
            phis[k] = truth.state.phi
            system = truth.weight_system
        target = car_covariance(system, 0.5, 0.98)
        emp = np.cov(phis, rowvar=False)
        rel = np.abs(emp - target) / np.abs(target)
        c["ok"] = bool(np.all(rel < 0.05))
        c["detail"] = (f"10000 field draws on a 5-area chain, max entrywise "
                       f"covariance error {rel.max() * 100:.2f}% < 5%")


def test_c9_cli_determinism(tmp_path):
    with criterion("C9") as c:
        synth_args = ["synth", "--rows", 3, "--cols", 3, "--large", 2,
                      "--times", 2, "--n-covariates", 2, "--model", "II",
                      "--design-sd", 0.7]
        s1, s2 = tmp_path / "s1", tmp_path / "s2"
        for out in (s1, s2):
            res = run_cli(["--out", out, "--seed", 11, *synth_args])
            assert res.returncode == 0, res.stderr
        results = {"synth": tree_hashes(s1) == tree_hashes(s2)}

        data = [s1 / "areas.csv", s1 / "estimates.csv",
                s1 / "covariates.csv", s1 / "adjacency.csv"]
        chain = ["--iters", 300, "--burnin", 100, "--rho-grid", 51]
        for name, args in (
            ("diagnose", ["diagnose", *data]),
            ("fit", ["fit", *data, "--model", "II", *chain]),
            ("compare", ["compare", *data, "--variants", "V,VII", *chain]),
            ("predict", ["predict", *data, "--model", "V", *chain]),
        ):
            a, b = tmp_path / f"{name}_a", tmp_path / f"{name}_b"
            for out in (a, b):
                res = run_cli(["--out", out, "--seed", 7, *args])
                assert res.returncode == 0, res.stderr
            results[name] = tree_hashes(a) == tree_hashes(b)
        c["ok"] = all(results.values())
        c["detail"] = ("byte-identical reruns: "
                       + ", ".join(f"{k} {'yes' if v else 'NO'}"
                                   for k, v in results.items()))
