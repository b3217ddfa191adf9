import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from kmeansnet.errors import ShapeError
from kmeansnet.metrics import (
    accuracy_hungarian,
    ami,
    ari,
    clustering_report,
    confusion,
    contingency,
    expected_mutual_info,
    nmi,
    purity,
)

labelings = st.integers(1, 30).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n)))


class TestConfusion:
    def test_examples(self):
        np.testing.assert_array_equal(confusion([0, 1], [0, 1]), [[1, 0], [0, 1]])
        np.testing.assert_array_equal(confusion([0, 0, 1, 1], [0, 1, 1, 1]), [[1, 1], [0, 2]])
        assert confusion([0, 0, 1, 1], [0, 1, 1, 1])[1, 0] == 0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            confusion([0, 1], [0])

    def test_contingency_drops_unused(self):
        np.testing.assert_array_equal(contingency(["a", "b"], [5, 9]), [[1, 0], [0, 1]])


class TestAccuracy:
    def test_examples(self):
        assert accuracy_hungarian([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
        assert accuracy_hungarian([0, 0, 1, 1], [0, 1, 1, 1]) == 0.75
        assert accuracy_hungarian([0, 0, 1, 1], [0, 0, 0, 0]) == 0.5

    def test_purity_differs_from_matched(self):
        # two clusters dominated by the same class
        y, p = [0, 0, 0, 1], [0, 0, 1, 1]
        assert purity(y, p) == 0.75
        assert accuracy_hungarian(y, p) == 0.75
        y, p = [0, 0, 0, 0, 1, 1], [0, 0, 1, 1, 2, 2]
        assert purity(y, p) == 1.0
        assert accuracy_hungarian(y, p) == pytest.approx(4 / 6)


class TestReport:
    def test_perfect(self):
        r = clustering_report([0, 1, 1, 2], [2, 0, 0, 1])
        for name in ("accuracy", "nmi", "ari", "ami", "homogeneity", "completeness", "v_measure"):
            assert getattr(r, name) == pytest.approx(1.0, abs=1e-15)

    def test_constant_prediction(self):
        r = clustering_report([0, 0, 1, 1], [0, 0, 0, 0])
        assert (r.homogeneity, r.completeness, r.v_measure, r.nmi, r.ari) == (0, 1, 0, 0, 0)

    def test_example_values(self):
        y, p = [0, 0, 1, 1], [0, 1, 1, 1]
        assert ari(y, p) == 0.0
        assert nmi(y, p) == pytest.approx(0.3437110184854508, abs=1e-15)
        assert clustering_report(y, p).as_dict()["confusion"] == [[1, 1], [0, 2]]

    def test_matches_oracle_on_examples(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 25))
            y, p = rng.integers(0, 4, n), rng.integers(0, 4, n)
            want = oracles.all_metrics(y, p)
            got = clustering_report(y, p)
            for name, value in want.items():
                assert getattr(got, name) == pytest.approx(value, abs=1e-10), name


class TestEMI:
    @pytest.mark.parametrize("y,p", [([0, 0, 1, 1], [0, 1, 1, 1]),
                                     ([0, 0, 1, 2, 2], [1, 0, 0, 1, 2]),
                                     ([0, 0, 0, 1, 1, 2], [0, 1, 1, 1, 2, 2])])
    def test_against_permutation_average(self, y, p):
        got = expected_mutual_info(contingency(y, p))
        assert got == pytest.approx(oracles.emi_by_permutation(y, p), abs=1e-12)
        assert oracles.emi(y, p) == pytest.approx(oracles.emi_by_permutation(y, p), abs=1e-12)

    def test_ami_of_identical_singletons(self):
        assert ami([0, 1, 2, 3], [3, 2, 1, 0]) == 1.0


class TestProperties:
    @settings(max_examples=300, deadline=None)
    @given(labelings)
    def test_symmetric_metrics(self, yp):
        y, p = yp
        a, b = clustering_report(y, p), clustering_report(p, y)
        for name in ("nmi", "ari", "ami", "v_measure", "accuracy"):
            assert getattr(a, name) == getattr(b, name), name
        assert a.homogeneity == b.completeness

    @settings(max_examples=300, deadline=None)
    @given(labelings, st.permutations(range(5)), st.randoms(use_true_random=False))
    def test_relabel_and_reorder_invariance(self, yp, relabel, rnd):
        y, p = map(np.asarray, yp)
        base = clustering_report(y, p).as_dict()
        q = np.asarray(relabel)[p]
        order = list(range(len(y)))
        rnd.shuffle(order)
        for other in (clustering_report(y, q), clustering_report(y[order], p[order])):
            other = other.as_dict()
            for name in ("accuracy", "nmi", "ari", "ami", "homogeneity", "completeness", "v_measure"):
                assert other[name] == base[name], name

    @settings(max_examples=300, deadline=None)
    @given(labelings)
    def test_ranges(self, yp):
        r = clustering_report(*yp)
        for name in ("accuracy", "nmi", "homogeneity", "completeness", "v_measure"):
            assert 0.0 <= getattr(r, name) <= 1.0
        assert r.ari <= 1.0 and r.ami <= 1.0 + 1e-12
