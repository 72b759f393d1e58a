"""Acceptance suite: one test per acceptance criterion, at stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion.
"""

import hashlib
import math
import os
import shutil
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import pearsonr

from cascade_influence import change_detect as CD
from cascade_influence import citation_eval as CE
from cascade_influence import fixtures
from cascade_influence import hawkes as H
from cascade_influence import influence as I
from cascade_influence import pipeline as pl
from cascade_influence import sense_classifier as SC
from cascade_influence import store as S
from cascade_influence.sense_classifier import Cascade

from test_change_detect import brute_force_score, moments_from_arrays
from test_hawkes import naive_loglik, random_instance


def _report(name):
    print(f"\nACCEPTANCE PASS: {name}")


class TestHawkesRecovery:
    def test_simulate_then_fit_recovers_influence(self):
        # 500 cascades, 30 years, known tiered alpha, fit at the true gamma
        rng = np.random.default_rng(11)
        years = list(range(1990, 2020))
        P = 2 * len(years)
        alpha_true = np.array([[0.6, 1.2, 2.4][p % 3] for p in range(P)])
        c_true = rng.uniform(0.4, 0.9, size=500)
        cascades = H.simulate(alpha_true, c_true, gamma=1.0, docs_per_year=2,
                              years=years, seed=12)
        t0 = time.perf_counter()
        fit = H.fit(cascades, gamma=1.0, year_range=(1990, 2019), max_iter=3000)
        elapsed = time.perf_counter() - t0
        # alphas of docs never marked before the final year are absent from
        # the likelihood; evaluate recovery over the identifiable ones
        idx = sorted({p for c in cascades for (t, p) in c.events if t < 2019})
        a_true = alpha_true[idx]
        a_hat = np.array([fit.model.alpha.get(p, 0.0) for p in idx])
        r = pearsonr(a_true, a_hat).statistic
        med_rel = float(np.median(np.abs(a_hat - a_true) / a_true))
        assert r >= 0.9, f"pearson r {r:.3f} < 0.9"
        assert med_rel <= 0.15, f"median relative error {med_rel:.3f} > 0.15"
        assert elapsed <= 60.0, f"fit took {elapsed:.1f}s > 60s"
        _report(f"hawkes recovery (r={r:.3f}, med rel err={med_rel:.3f}, "
                f"{elapsed:.1f}s)")


class TestGradientCorrectness:
    def test_gradient_and_loglik_against_oracles(self):
        rng = np.random.default_rng(50)
        h = 1e-5
        for _ in range(50):
            model, cascades = random_instance(rng)
            # LL against the naive double-loop oracle, 1e-10
            ll = H.log_likelihood(model, cascades)
            assert ll == pytest.approx(naive_loglik(model, cascades), rel=1e-10)
            # analytic gradient against central finite differences, 1e-4
            grad_alpha, grad_base = H.gradient(model, cascades)
            for p, g in grad_alpha.items():
                up_model = H.HawkesModel(dict(model.alpha), dict(model.base),
                                         model.gamma, model.year_range)
                dn_model = H.HawkesModel(dict(model.alpha), dict(model.base),
                                         model.gamma, model.year_range)
                up_model.alpha[p] += h
                dn_model.alpha[p] -= h
                fd = (H.log_likelihood(up_model, cascades)
                      - H.log_likelihood(dn_model, cascades)) / (2 * h)
                assert g == pytest.approx(fd, rel=1e-4, abs=1e-7)
            for w, g in grad_base.items():
                up_model = H.HawkesModel(dict(model.alpha), dict(model.base),
                                         model.gamma, model.year_range)
                dn_model = H.HawkesModel(dict(model.alpha), dict(model.base),
                                         model.gamma, model.year_range)
                up_model.base[w] += h
                dn_model.base[w] -= h
                fd = (H.log_likelihood(up_model, cascades)
                      - H.log_likelihood(dn_model, cascades)) / (2 * h)
                assert g == pytest.approx(fd, rel=1e-4, abs=1e-7)
        _report("gradient correctness (50 instances, FD 1e-4, LL oracle 1e-10)")


class TestBandwidthSelection:
    def test_fast_decay_data_selects_adjacent_gamma(self):
        scale = math.exp(10.0)
        levels = [0.3 * scale, 0.6 * scale, 1.2 * scale]
        hits = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            years = list(range(1990, 2020))
            P = 2 * len(years)
            alpha_true = np.array([levels[p % 3] for p in range(P)])
            c_true = rng.uniform(0.4, 0.9, size=250)
            cascades = H.simulate(alpha_true, c_true, gamma=10.0,
                                  docs_per_year=2, years=years, seed=seed + 100)
            best, _fits = H.select_bandwidth(
                cascades, grid=H.DEFAULT_GAMMA_GRID, year_range=(1990, 2019),
                heldout_fraction=0.1, seed=seed)
            hits += best in (10.0, 100.0)
        assert hits >= 9, f"only {hits}/10 seeds selected gamma in {{10, 100}}"
        _report(f"bandwidth selection ({hits}/10 seeds in {{10, 100}})")


class TestSemanticChangeDetection:
    def test_injected_drifts_rank_top_and_changepoints_match(self):
        rng = np.random.default_rng(77)
        years = np.repeat(np.arange(2000, 2010), 6)
        moments_map = {}
        shift_year = {}
        raw = {}
        for wid in range(520):
            if wid < 20:
                tau = int(rng.integers(2002, 2008))
                shift_year[wid] = tau
                vecs = np.where(
                    (years <= tau)[:, None],
                    rng.normal(0.0, 1.0, size=(len(years), 4)),
                    rng.normal(2.5, 1.0, size=(len(years), 4)),
                )
            else:
                vecs = rng.normal(0.0, 1.0, size=(len(years), 4))
            raw[wid] = vecs
            moments_map[wid] = moments_from_arrays(wid, years, vecs)
        candidate = CD.candidate_years((2000, 2009))
        top = CD.rank_semantic_changes(moments_map, candidate, k=30)
        top_ids = {c.word_id for c in top}
        assert set(range(20)) <= top_ids, \
            f"missing drift words: {set(range(20)) - top_ids}"
        for c in top:
            if c.word_id < 20:
                assert abs(c.t_star - shift_year[c.word_id]) <= 1, \
                    f"word {c.word_id}: t*={c.t_star}, true {shift_year[c.word_id]}"
        # score op against the brute-force partition oracle, 1e-8 relative
        for wid in (0, 5, 100, 300):
            for t in candidate:
                got = CD.semantic_change_score(moments_map[wid], t)
                want = brute_force_score(years, raw[wid], t)
                assert got == pytest.approx(want, rel=1e-8)
        _report("semantic change detection (20/20 in top 30, t* within ±1, "
                "oracle 1e-8)")


class TestScoreInvariances:
    def test_shift_scale_quantile_and_z_invariances(self):
        rng = np.random.default_rng(88)
        years = np.repeat(np.arange(2000, 2008), 8)
        base = rng.integers(-8, 9, size=(64, 4)).astype(np.float64)
        m0 = moments_from_arrays(0, years, base)
        m_shift = moments_from_arrays(0, years, base + 7.0)
        m_scale = moments_from_arrays(0, years, base * 2.0)
        # the balanced split keeps every float op exact: bitwise equality
        assert CD.semantic_change_score(m0, 2003) == CD.semantic_change_score(m_shift, 2003)
        for t in range(2001, 2007):
            assert CD.semantic_change_score(m0, t) == CD.semantic_change_score(m_scale, t)

        scores = {f"P{i:03d}": float(rng.normal()) for i in range(80)}
        bins = I.quantile_bins(scores)
        monotone = {d: math.exp(2.0 * v) - 5.0 for d, v in scores.items()}
        assert I.quantile_bins(monotone) == bins

        docs = [f"P{i}" for i in range(200)]
        values = {d: float(rng.normal(3.0, 2.0)) for d in docs}
        doc_years = {d: int(rng.integers(2000, 2006)) for d in docs}
        z = I.z_normalize_by_year(values, doc_years)
        for year in range(2000, 2006):
            zs = np.array([z[d] for d in docs if doc_years[d] == year])
            assert abs(zs.mean()) <= 1e-10
            assert abs(zs.var() - 1.0) <= 1e-10
        _report("score invariances (shift/scale exact, quantile monotone, "
                "z mean/var 1e-10)")


class TestClassifierLabeling:
    def test_two_gaussian_senses_4sigma(self):
        rng = np.random.default_rng(99)
        n = 200
        t_star = 2005
        years = np.concatenate([
            rng.integers(2000, t_star + 1, n), rng.integers(t_star + 1, 2010, n)])
        truth_new = np.concatenate([np.zeros(n, bool), np.ones(n, bool)])
        vectors = np.where(
            truth_new[:, None],
            rng.normal(4.0, 1.0, size=(2 * n, 6)),  # 4 sigma separation
            rng.normal(0.0, 1.0, size=(2 * n, 6)),
        )
        result = SC.cv_label_usages(
            0, np.arange(2 * n), years, np.zeros(2 * n, dtype=int), vectors, t_star)
        assert not result.fallback
        agree = np.mean([
            (lab.label == SC.NEW) == truth
            for lab, truth in zip(result.labels, truth_new)
        ])
        assert agree >= 0.99, f"label agreement {agree:.4f} < 0.99"
        _report(f"classifier labeling (agreement {agree:.3f} >= 0.99)")


class TestRegressionStack:
    def test_ols_lrt_chi2_and_online_protocol(self):
        rng = np.random.default_rng(111)
        # OLS vs the explicit normal-equation oracle, 1e-8
        X = rng.normal(size=(300, 6))
        X[:, 0] = 1.0
        y = X @ rng.normal(size=6) + 0.4 * rng.normal(size=300)
        fit = CE.fit_ols(X, y)
        beta = np.linalg.inv(X.T @ X) @ (X.T @ y)
        np.testing.assert_allclose(fit.coefficients, beta, rtol=1e-8, atol=1e-10)

        # LRT of identical nested fits
        stat, p = CE.likelihood_ratio_test(fit, fit, df=3)
        assert stat == 0.0 and p == 1.0

        # chi-squared(3) tail at 7.815 = 0.05 within 1e-4 (quadrature oracle)
        density = lambda u: u ** 0.5 * math.exp(-u / 2) / (
            2 ** 1.5 * math.gamma(1.5))
        tail, _ = integrate.quad(density, 7.815, np.inf)
        p_val = CE.chi2_sf(7.815, 3)
        assert p_val == pytest.approx(0.05, abs=1e-4)
        assert p_val == pytest.approx(tail, abs=1e-10)

        # online protocol admits no training row beyond test year - 3
        rows = []
        for i in range(300):
            year = 2000 + i % 12
            rows.append(CE.FeatureRow(
                doc_id=f"P{i}", year=year, z_short=float(rng.normal()),
                topics=rng.dirichlet(np.ones(3)),
                lex_quantile="Q1", sem_quantile="Q1",
                z_lex_by_gamma={1.0: float(rng.normal())},
                z_sem_by_gamma={1.0: float(rng.normal())},
                target=float(rng.normal())))
        for t in range(2004, 2012):
            train = [r for r in rows if r.year <= t - 3]
            assert train and max(r.year for r in train) <= t - 3
        report = CE.online_predict(rows, models=("M1", "M4"),
                                   years=range(2004, 2012))
        assert report.n_examples > 0
        _report("regression stack (OLS 1e-8, LRT exact, chi2 tail 1e-4, "
                "no online leakage)")


class TestEndToEndFixture:
    CONFIG = """
[paths]
corpus = "{d}/inputs/corpus.jsonl"
store = "{d}/inputs/embeddings.cemb"
workdir = "{d}/artifacts"
[corpus]
year_range = [2000, 2019]
min_count = 5
max_df = 0.99
[changes]
k_semantic = 120
k_lexical = 24
[hawkes]
gamma_grid = [1.0]
heldout_fraction = 0.1
seed = 13
[eval]
citations = "{d}/inputs/citations.csv"
topics = "{d}/inputs/topics.csv"
models = ["M1", "M2", "M3", "M4"]
online_years = [2006, 2014]
min_pub_year = 2000
"""

    def _run(self, d):
        fixtures.generate_fixture(os.path.join(d, "inputs"), seed=13)
        cfg_path = os.path.join(d, "pipeline.toml")
        with open(cfg_path, "w") as fh:
            fh.write(self.CONFIG.format(d=d))
        runner = pl.StageRunner(pl.load_config(cfg_path), log=lambda *a: None)
        runner.run_all()

    def _hashes(self, workdir):
        out = {}
        for root, _dirs, files in os.walk(workdir):
            for f in sorted(files):
                path = os.path.join(root, f)
                out[os.path.relpath(path, workdir)] = hashlib.sha256(
                    open(path, "rb").read()).hexdigest()
        return out

    def test_deterministic_fast_and_planted_effect_recovered(self, tmp_path):
        d = str(tmp_path / "run")
        os.makedirs(d)
        t0 = time.perf_counter()
        self._run(d)
        elapsed = time.perf_counter() - t0
        assert elapsed <= 60.0, f"end-to-end run took {elapsed:.1f}s > 60s"

        h1 = self._hashes(os.path.join(d, "artifacts"))
        shutil.rmtree(os.path.join(d, "artifacts"))
        self._run(d)
        h2 = self._hashes(os.path.join(d, "artifacts"))
        assert h1 == h2, "artifact hashes differ between seeded runs"

        online = open(os.path.join(d, "artifacts", "online.tsv")).read()
        last = online.strip().splitlines()[-1].split("\t")
        assert last[0] == "All Years"
        m1, m2, m3, m4 = (float(x) for x in last[1:])
        assert m4 < m3, f"M4 micro MSE {m4:.4f} not below M3 {m3:.4f}"
        _report(f"end-to-end fixture ({elapsed:.1f}s, identical hashes, "
                f"M4 {m4:.4f} < M3 {m3:.4f})")
