import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremal_spectra.diagnostics import (
    Constants,
    audit_failures,
    check_additivity,
    check_bounds,
    component_counts,
    density_curve,
    diagnose,
    extremal_ratio_ranks,
    generator_ranks,
    largest_scale,
    log_density,
    per_k_columns,
    propagation_check,
    rows,
    split_consistency,
    trichotomy_report,
    weyl_fit,
    write_diagnostics,
)
from extremal_spectra.extremal import ExtremalTable, maximize_neumann, minimize_dirichlet
from extremal_spectra.spectra import DIRICHLET, NEUMANN, GeneratorSpec, Spectrum, build_spectrum

PI = math.pi
PI2 = PI**2


def spectrum(token, bc, n):
    return build_spectrum(GeneratorSpec.from_token(token, bc), n)


def explicit(values, bc=DIRICHLET):
    g = GeneratorSpec("explicit", bc, 2, path="synthetic.txt", label="synthetic")
    values = np.asarray(values, dtype=float)
    return Spectrum(g, values, complete_below=float(values[-1]))


@pytest.fixture(scope="module")
def sq6():
    return minimize_dirichlet([spectrum("square", DIRICHLET, 6)], 6)


@pytest.fixture(scope="module")
def sq_d():
    return minimize_dirichlet([spectrum("square", DIRICHLET, 3000)], 3000)


@pytest.fixture(scope="module")
def sq_n():
    return maximize_neumann([spectrum("square", NEUMANN, 3001)], 3000)


@pytest.fixture(scope="module")
def tiny():
    return minimize_dirichlet([explicit([1.0] + [1e6] * 40)], 40)


def test_constants_in_the_plane():
    c = Constants.for_dimension(2)
    assert (c.omega_d, c.polya_power, c.bly_power, c.kroger_power) == pytest.approx((PI, 4 * PI, 2 * PI, 8 * PI))
    c3 = Constants.for_dimension(3)
    assert c3.polya_power == pytest.approx((2 * PI) ** 3 / (4 * PI / 3))
    assert c3.bly_power == pytest.approx((3 / 5) ** 1.5 * c3.polya_power)


class TestGeneratorRanks:
    def test_square(self, sq6):
        assert generator_ranks(sq6).tolist() == [1, 3, 6]

    def test_only_rank_one(self, tiny):
        assert generator_ranks(tiny).tolist() == [1]

    def test_kmax_one(self):
        t = minimize_dirichlet([spectrum("disk", DIRICHLET, 1)], 1)
        assert generator_ranks(t).tolist() == [1]

    def test_quadratic_growth_keeps_only_rank_one(self):
        # lambda_k = k^2 grows too fast for any k > 1 to beat k copies of rank 1
        t = minimize_dirichlet([explicit(np.arange(1, 19) ** 2)], 18)
        assert generator_ranks(t).tolist() == [1]


class TestLogDensity:
    def test_examples(self):
        assert log_density(range(1, 101), 100) == 1.0
        assert log_density([], 100) == 0.0
        assert log_density([k * k for k in range(1, 11)], 100) == pytest.approx(0.5, abs=1e-15)

    def test_rejects_small_x(self):
        with pytest.raises(ValueError):
            log_density([1], 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.sets(st.integers(1, 500), max_size=100), st.integers(2, 500))
    def test_range(self, J, x):
        J = [j for j in J if j <= x]
        f = log_density(J, x)
        assert 0.0 <= f <= 1.0
        assert density_curve(np.array(sorted(J), dtype=np.int64), [float(x)])[0] == pytest.approx(f)


class TestScales:
    def test_examples(self, sq6):
        assert largest_scale(sq6, 1) == (1.0, 1)
        r, j = largest_scale(sq6, 2)
        assert (r, j) == (pytest.approx(0.7071067811865476, abs=1e-15), 1)
        r, j = largest_scale(sq6, 4)
        assert (r, j) == (pytest.approx(math.sqrt(5 / 7), abs=1e-15), 3)
        assert math.sqrt(5 / 7) == pytest.approx(0.845154, abs=1e-6)

    @pytest.mark.parametrize("name", ["sq_d", "sq_n"])
    def test_row_invariants(self, name, request):
        t = request.getfixturevalue(name)
        cols = per_k_columns(t)
        gen = cols["is_generator"]
        assert np.array_equal(gen, cols["nu"] == 1)
        assert np.all((cols["r_max"] > 0) & (cols["r_max"] <= 1))
        assert np.array_equal(cols["r_max"] == 1.0, gen)
        assert np.all(cols["largest_part_rank"] <= cols["k"])
        assert np.array_equal(cols["largest_part_rank"] == cols["k"], gen)
        # r_max^2 powers[k] = powers[j_1] in d = 2
        lhs = cols["r_max"] ** 2 * t.powers[1:]
        np.testing.assert_allclose(lhs, t.powers[cols["largest_part_rank"]], rtol=1e-12)

    def test_matches_reconstruct(self, sq_d):
        cols = per_k_columns(sq_d)
        for k in (5, 77, 1000, 2999):
            r, j = largest_scale(sq_d, k)
            assert cols["r_max"][k - 1] == pytest.approx(r, rel=1e-14)
            assert cols["largest_part_rank"][k - 1] == j

    def test_rows(self, sq6):
        rs = rows(sq6)
        assert [r.k for r in rs] == list(range(1, 7))
        assert [r.is_generator for r in rs] == [True, False, True, False, False, True]
        assert rs[1].power_ratio == pytest.approx(2 * PI2)


class TestComponents:
    def test_square(self, sq6):
        nu, hist = component_counts(sq6)
        assert nu[1:].tolist() == [1, 2, 1, 2, 3, 1]
        assert hist == {1: 3, 2: 2, 3: 1}

    def test_tiny(self, tiny):
        nu, hist = component_counts(tiny)
        assert nu[1:].tolist() == list(range(1, 41))
        assert hist == {n: 1 for n in range(1, 41)}


class TestBounds:
    def test_square_examples(self, sq6):
        a = check_bounds(sq6)
        assert a.ok and a.bound == "berezin-li-yau"
        assert a.constant == pytest.approx(2 * PI)
        assert sq6.ratio()[1] - a.constant == pytest.approx(2 * PI2 - 2 * PI)

    def test_neumann(self, sq_n):
        a = check_bounds(sq_n)
        assert a.ok and a.bound == "kroger"
        assert sq_n.powers[1] == pytest.approx(PI2)
        assert a.worst_slack > 0

    def test_violation_reported(self):
        t = minimize_dirichlet([explicit([1.0, 2.0, 3.0])], 3)
        a = check_bounds(t)
        assert a.violations == [1, 2, 3]
        assert not a.ok

    @pytest.mark.parametrize("name", ["sq_d", "sq_n"])
    def test_fekete_envelopes(self, name, request):
        t = request.getfixturevalue(name)
        c = Constants.for_dimension(2)
        r = t.ratio()[1:]
        if t.bc == DIRICHLET:
            env = np.minimum.accumulate(r)
            assert np.all(np.diff(env) <= 0) and np.all(env >= c.bly_power)
        else:
            env = np.maximum.accumulate(r)
            assert np.all(np.diff(env) >= 0) and np.all(env <= c.kroger_power)


class TestAdditivity:
    def test_examples(self, sq6):
        a = check_additivity(sq6, [(1, 1), (1, 2), (3, 3)])
        assert a.ok and a.pairs_checked == 3
        p = sq6.exact_powers
        assert p[1] + p[1] == p[2]
        assert p[1] + p[2] > p[3]
        assert p[3] + p[3] == p[6]

    def test_exhaustive(self, sq_d, sq_n):
        for t in (sq_d, sq_n):
            a = check_additivity(t, exhaustive_limit=3000)
            assert a.exhaustive and a.ok
            assert a.pairs_checked == sum(k // 2 for k in range(2, 3001))

    def test_sampled_is_seeded(self, sq_d):
        a = check_additivity(sq_d, exhaustive_limit=10, n_samples=5000, seed=3)
        b = check_additivity(sq_d, exhaustive_limit=10, n_samples=5000, seed=3)
        assert not a.exhaustive and a.ok and a.pairs_checked == 5000
        assert a.worst_excess == b.worst_excess

    def test_detects_corruption(self, sq_d):
        p = sq_d.exact_powers.copy()
        p[100] += 1000
        bad = ExtremalTable(**{**sq_d.__dict__, "exact_powers": p})
        a = check_additivity(bad)
        assert not a.ok and a.violation_count > 0
        assert split_consistency(bad)
        assert split_consistency(sq_d) == []

    def test_pair_validation(self, sq6):
        with pytest.raises(ValueError):
            check_additivity(sq6, [(3, 4)])


class TestWeylFit:
    def test_square(self):
        s = spectrum("square", DIRICHLET, 20000)
        fit = weyl_fit(s, (2000, 20000))
        assert fit.c1 == pytest.approx(4 * PI, rel=0.01)
        # two-term count with perimeter 4 inverts to lambda_k ~ 4 pi k + 8 sqrt(pi) sqrt(k)
        assert fit.c2 == pytest.approx(8 * math.sqrt(PI), rel=0.05)
        assert not fit.non_weyl

    def test_quadratic_is_flagged(self):
        s = explicit(np.arange(1, 401, dtype=float) ** 2)
        fit = weyl_fit(s, (1, 400))
        assert fit.non_weyl

    def test_range_checks(self):
        s = spectrum("square", DIRICHLET, 500)
        with pytest.raises(ValueError):
            weyl_fit(s, (1, 50))
        with pytest.raises(ValueError):
            weyl_fit(s, (1, s.count + 1))


class TestPropagation:
    def test_examples(self, sq6, tiny):
        assert propagation_check(sq6, 1, 2)
        assert not propagation_check(sq6, 1, 3)
        assert all(propagation_check(tiny, 1, n) for n in range(1, 41))
        with pytest.raises(IndexError):
            propagation_check(sq6, 2, 4)

    def test_minimisers_propagate(self, sq_d):
        _, ranks = extremal_ratio_ranks(sq_d)
        for k in ranks:
            assert all(propagation_check(sq_d, k, n) for n in range(1, sq_d.k_max // k + 1))


class TestRatios:
    def test_tiny_attains_everywhere(self, tiny):
        ratio, ranks = extremal_ratio_ranks(tiny)
        assert ratio == 1.0 and ranks == list(range(1, 41))

    def test_neumann_is_max(self, sq_n):
        ratio, _ = extremal_ratio_ranks(sq_n)
        assert ratio == pytest.approx(np.max(sq_n.ratio()[1:]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 8), st.lists(st.floats(0.2, 3.0), min_size=1, max_size=7))
    def test_minimum_over_finite_J(self, n_low, gaps):
        # a handful of moderate eigenvalues, then values so large that no rank past them is a generator
        low = np.cumsum([1.0] + gaps)[:n_low]
        vals = np.concatenate([low, np.full(40, 1e9)])
        t = minimize_dirichlet([explicit(vals)], 40)
        J = generator_ranks(t)
        assert J.max() <= low.size
        ratio, _ = extremal_ratio_ranks(t)
        assert ratio == pytest.approx(min(t.powers[j] / j for j in J), rel=1e-12)

    def test_min_not_always_at_largest_J(self):
        t = minimize_dirichlet([explicit([1.0, 1.8, 2.75] + [1e9] * 20)], 20)
        assert generator_ranks(t).tolist() == [1, 2, 3]
        _, ranks = extremal_ratio_ranks(t)
        assert ranks[0] == 2


class TestTrichotomy:
    def test_square(self, sq_d):
        rep = trichotomy_report(sq_d)
        assert rep["extremal_ratio"] > 4 * PI
        assert rep["signatures"]["J_keeps_growing"]
        assert rep["extremal_ratio"] == pytest.approx(np.min(sq_d.ratio()[1:]))
        assert "finite-range evidence" in rep["note"]

    def test_tiny(self, tiny):
        rep = trichotomy_report(tiny)
        assert rep["signatures"]["finite_J"]
        assert rep["signatures"]["extremal_ratio_attained_repeatedly"]
        assert rep["extremal_ratio_rank_count"] == 40
        assert rep["signatures"]["polya_bound_crossed_in_range"]


def test_diagnose_bundle(tmp_path, sq_d):
    s = spectrum("square", DIRICHLET, 3000)
    diag = diagnose(sq_d, s, seed=1)
    assert audit_failures(diag) == []
    assert diag["J"] == generator_ranks(sq_d).tolist()
    assert diag["weyl_fit"]["c1"] == pytest.approx(4 * PI, rel=0.02)
    assert diag["metadata"]["mode"] == "exact"
    paths = write_diagnostics(diag, tmp_path / "diag")
    back = json.loads(paths["json"].read_text())
    assert set(back) >= {"constants", "J", "per_k", "histogram", "bounds_audit", "weyl_fit",
                         "propagation_samples", "trichotomy_evidence"}
    header = paths["per_k"].read_text().splitlines()[0]
    assert header == "k,ratio,is_generator,nu,r_max,largest_part_rank"
    assert len(paths["per_k"].read_text().splitlines()) == 3001


def test_disk_metadata_carries_tolerance():
    t = minimize_dirichlet([spectrum("disk", DIRICHLET, 200)], 200)
    diag = diagnose(t)
    assert diag["metadata"]["tie_tolerance"] == 1e-12
    assert diag["metadata"]["mode"] == "float"
    assert diag["weyl_fit"] is None


def test_audit_failures_lists_violations():
    t = minimize_dirichlet([explicit([1.0, 2.0, 3.0])], 3)
    msgs = audit_failures(diagnose(t))
    assert any("berezin-li-yau" in m for m in msgs)
