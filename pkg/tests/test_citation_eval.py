import math

import numpy as np
import pytest
from scipy import integrate, stats

from cascade_influence import citation_eval as CE


class TestCitationWindows:
    def test_paper_2012_windows(self):
        # short-term 2012-2014, long-term 2015-2017
        counts = {2012: 1, 2013: 2, 2014: 4, 2015: 8, 2016: 16, 2017: 32, 2018: 64}
        rec = CE.CitationRecord("P", 2012, counts)
        assert CE.short_citations(rec) == 7
        assert CE.future_citations(rec, horizon=2017) == 56

    def test_zero_future_citations_log_floor(self):
        rec = CE.CitationRecord("P", 2000, {})
        assert CE.future_citations(rec, horizon=2010) == 0
        assert math.log1p(0) == 0.0

    def test_immature_paper_excluded(self):
        rec = CE.CitationRecord("P", 2014, {2015: 3})
        with pytest.raises(CE.ImmaturePaper):
            CE.future_citations(rec, horizon=2018)

    def test_synthetic_windows_match_manual(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pub = int(rng.integers(2000, 2010))
            counts = {int(y): int(rng.integers(0, 9))
                      for y in range(pub, pub + 8)}
            rec = CE.CitationRecord("P", pub, counts)
            manual_short = sum(counts.get(y, 0) for y in (pub, pub + 1, pub + 2))
            manual_future = sum(counts.get(y, 0) for y in (pub + 3, pub + 4, pub + 5))
            assert CE.short_citations(rec) == manual_short
            assert CE.future_citations(rec, horizon=pub + 5) == manual_future

    def test_targets_z_normalized_per_year(self):
        rng = np.random.default_rng(1)
        records = []
        for i in range(60):
            pub = 2000 + i % 3
            counts = {y: int(rng.integers(0, 30)) for y in range(pub, pub + 6)}
            records.append(CE.CitationRecord(f"P{i:02d}", pub, counts))
        targets, z_short = CE.citation_targets(records, horizon=2010)
        assert set(targets) == {r.doc_id for r in records}
        for year in (2000, 2001, 2002):
            zs = np.array([targets[r.doc_id] for r in records if r.year == year])
            assert abs(zs.mean()) <= 1e-10


def make_rows(n, seed=0, k_topics=4, gammas=(0.1, 1.0), effect=0.0, noise=0.1):
    """Feature rows whose target is a linear function of the design."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        topics = rng.dirichlet(np.ones(k_topics))
        z_short = float(rng.normal())
        z_sem = {g: float(rng.normal()) for g in gammas}
        z_lex = {g: float(rng.normal()) for g in gammas}
        sem_q = rng.choice(["Q1", "Q2", "Q3", "Q4"])
        target = 0.5 * z_short + effect * z_sem[gammas[0]] + noise * rng.normal()
        rows.append(CE.FeatureRow(
            doc_id=f"P{i:04d}", year=2000 + i % 10, z_short=z_short,
            topics=topics, lex_quantile=str(rng.choice(["Q1", "Q2", "Q3", "Q4"])),
            sem_quantile=str(sem_q), z_lex_by_gamma=z_lex, z_sem_by_gamma=z_sem,
            target=float(target)))
    return rows


class TestDesignMatrix:
    def test_m1_two_columns(self):
        X, y, cols = CE.build_design_matrix("M1", make_rows(10))
        assert cols == ["const", "z_short"]
        assert X.shape == (10, 2)
        np.testing.assert_array_equal(X[:, 0], 1.0)

    def test_m4_column_arithmetic_k20(self):
        rows = make_rows(40, k_topics=20)
        X, y, cols = CE.build_design_matrix("M4", rows)
        # 2 + 19 topics (drop one) + 3 lex dummies + 3 sem dummies = 27
        assert len(cols) == 27
        assert X.shape == (40, 27)

    def test_quantile_dummies_at_most_one_active(self):
        rows = make_rows(30)
        X, y, cols = CE.build_design_matrix("M4", rows)
        lex_cols = [i for i, c in enumerate(cols) if c.startswith("lex_")]
        sem_cols = [i for i, c in enumerate(cols) if c.startswith("sem_")]
        assert X[:, lex_cols].sum(axis=1).max() <= 1
        assert X[:, sem_cols].sum(axis=1).max() <= 1

    def test_per_gamma_features(self):
        rows = make_rows(25, gammas=(0.1, 1.0, 10.0))
        X, y, cols = CE.build_design_matrix("M4", rows, influence_features="per_gamma")
        assert "z_lex_g0.1" in cols and "z_sem_g10" in cols
        assert len(cols) == 2 + 3 + 3 + 3

    def test_rank_deficient_design_flagged(self):
        X = np.ones((10, 2))  # duplicated constant column
        with pytest.raises(CE.DesignError, match="rank-deficient"):
            CE.fit_ols(X, np.arange(10.0), columns=["const", "const_dup"])


class TestFitOls:
    def test_exact_fit_coefficient_and_zero_se(self):
        x = np.linspace(-3, 3, 20)
        X = x[:, None]
        fit = CE.fit_ols(X, 2.0 * x)
        assert fit.coefficients[0] == pytest.approx(2.0, abs=1e-12)
        assert fit.standard_errors[0] == pytest.approx(0.0, abs=1e-10)

    def test_matches_normal_equation_oracle(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(200, 5))
        X[:, 0] = 1.0
        beta_true = rng.normal(size=5)
        y = X @ beta_true + 0.3 * rng.normal(size=200)
        fit = CE.fit_ols(X, y)
        # independent route: explicit normal equations
        beta_ne = np.linalg.inv(X.T @ X) @ (X.T @ y)
        np.testing.assert_allclose(fit.coefficients, beta_ne, rtol=1e-8, atol=1e-10)
        resid = y - X @ beta_ne
        sigma2 = float(resid @ resid) / len(y)
        se_ne = np.sqrt(np.diag(sigma2 * np.linalg.inv(X.T @ X)))
        np.testing.assert_allclose(fit.standard_errors, se_ne, rtol=1e-8)
        ll_ne = -0.5 * len(y) * (math.log(2 * math.pi * sigma2) + 1.0)
        assert fit.log_likelihood == pytest.approx(ll_ne, rel=1e-10)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(150, 4))
        y = rng.normal(size=150)
        fit = CE.fit_ols(X, y)
        resid = y - X @ fit.coefficients
        assert np.abs(X.T @ resid).max() <= 1e-8

    def test_adding_column_never_decreases_ll(self):
        rows = make_rows(120, k_topics=5)
        lls = []
        for model in CE.MODEL_TAGS:
            X, y, cols = CE.build_design_matrix(model, rows)
            lls.append(CE.fit_ols(X, y, cols, model_tag=model).log_likelihood)
        for smaller, larger in zip(lls, lls[1:]):
            assert larger >= smaller - 1e-9

    def test_more_columns_than_rows(self):
        with pytest.raises(CE.DesignError):
            CE.fit_ols(np.ones((3, 5)), np.zeros(3))


class TestChiSquared:
    def test_reference_quantile_against_quadrature(self):
        # chi2(3) upper tail at 7.815 should be 0.05 within 1e-4;
        # oracle: numerical integration of the density
        df = 3
        x = 7.815
        density = lambda u: u ** (df / 2 - 1) * math.exp(-u / 2) / (
            2 ** (df / 2) * math.gamma(df / 2))
        tail, _err = integrate.quad(density, x, np.inf)
        p = CE.chi2_sf(x, df)
        assert p == pytest.approx(tail, abs=1e-10)
        assert p == pytest.approx(0.05, abs=1e-4)

    def test_against_scipy_across_range(self):
        for df in (1, 2, 3, 5, 10, 30):
            for x in (0.0, 0.5, 2.0, 7.815, 20.0, 80.0):
                assert CE.chi2_sf(x, df) == pytest.approx(
                    stats.chi2.sf(x, df), rel=1e-10, abs=1e-300)


class TestLikelihoodRatio:
    def test_identical_fits(self):
        rows = make_rows(60)
        X, y, cols = CE.build_design_matrix("M2", rows)
        fit = CE.fit_ols(X, y, cols)
        stat, p = CE.likelihood_ratio_test(fit, fit, df=3)
        assert stat == 0.0 and p == 1.0

    def test_nested_fits_nonnegative(self):
        rows = make_rows(150, effect=0.4)
        X3, y, c3 = CE.build_design_matrix("M3", rows)
        X4, _, c4 = CE.build_design_matrix("M4", rows)
        f3 = CE.fit_ols(X3, y, c3, model_tag="M3")
        f4 = CE.fit_ols(X4, y, c4, model_tag="M4")
        stat, p = CE.likelihood_ratio_test(f3, f4, df=3)
        assert stat >= 0.0
        assert 0.0 <= p <= 1.0

    def test_nesting_violation_detected(self):
        rows = make_rows(60)
        X, y, cols = CE.build_design_matrix("M2", rows)
        good = CE.fit_ols(X, y, cols)
        worse = CE.RegressionFit(
            model_tag="bad", columns=cols, coefficients=good.coefficients,
            standard_errors=good.standard_errors,
            log_likelihood=good.log_likelihood - 5.0, sigma2=good.sigma2, n=good.n)
        with pytest.raises(ValueError, match="nesting"):
            CE.likelihood_ratio_test(good, worse, df=1)


class TestOnlinePredict:
    def test_no_training_leakage(self):
        rows = make_rows(400, seed=5)
        # structural property enforced inside online_predict by assertion;
        # verify the split rule directly as well
        for t in range(2004, 2010):
            train = [r for r in rows if r.year <= t - 3]
            assert all(r.year <= t - 3 for r in train)
        report = CE.online_predict(rows, models=("M1", "M2"),
                                   years=range(2004, 2010))
        assert report.n_examples == sum(1 for r in rows if 2004 <= r.year <= 2009)

    def test_realizable_target_reaches_zero_mse(self):
        rows = make_rows(300, seed=6, effect=0.0, noise=0.0)
        report = CE.online_predict(rows, models=("M1",), years=range(2005, 2010))
        assert report.micro["M1"] <= 1e-20

    def test_generator_ablation(self):
        rows_effect = make_rows(600, seed=7, effect=0.6, noise=0.1)
        rep = CE.online_predict(rows_effect, models=("M3", "M4"),
                                years=range(2005, 2010))
        assert rep.micro["M4"] < rep.micro["M3"]

        rows_null = make_rows(600, seed=8, effect=0.0, noise=0.1)
        rep0 = CE.online_predict(rows_null, models=("M3", "M4"),
                                 years=range(2005, 2010))
        # no planted effect: M4 is within noise of M3
        assert abs(rep0.micro["M4"] - rep0.micro["M3"]) <= 0.02

    def test_micro_average_is_total_se_over_total_examples(self):
        rows = make_rows(200, seed=9, effect=0.3)
        report = CE.online_predict(rows, models=("M1",), years=range(2005, 2010))
        total_se, total_n = 0.0, 0
        for t, mses in report.per_year.items():
            n_t = sum(1 for r in rows if r.year == t)
            total_se += mses["M1"] * n_t
            total_n += n_t
        assert report.micro["M1"] == pytest.approx(total_se / total_n, rel=1e-12)

    def test_skips_empty_years(self):
        rows = [r for r in make_rows(100, seed=10) if r.year != 2005]
        report = CE.online_predict(rows, models=("M1",), years=range(2004, 2008))
        assert 2005 in report.skipped_years


class TestReaders:
    def test_citations_round_trip(self, tmp_path):
        path = tmp_path / "cites.csv"
        path.write_text("# schema: citations/v1\ndoc_id,year,count\n"
                        "P1,2000,3\nP1,2001,5\nP2,2003,1\n")
        counts = CE.read_citations_csv(path)
        assert counts == {"P1": {2000: 3, 2001: 5}, "P2": {2003: 1}}
        records = CE.build_citation_records(counts, {"P1": 2000, "P2": 2001, "P3": 2002})
        assert [r.doc_id for r in records] == ["P1", "P2", "P3"]
        assert records[2].counts == {}

    def test_topics_reader(self, tmp_path):
        path = tmp_path / "topics.csv"
        path.write_text("doc_id,p1,p2,p3\nP1,0.2,0.3,0.5\nP2,1,0,0\n")
        topics = CE.read_topics_csv(path)
        np.testing.assert_allclose(topics["P1"], [0.2, 0.3, 0.5])
        assert topics["P1"].sum() == pytest.approx(1.0, abs=1e-6)
