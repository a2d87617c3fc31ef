import numpy as np
import pytest
from scipy import stats as scipy_stats

from coverbench.agreement import (
    AgreementReport,
    AlphaLevel,
    agreement_report,
    kendall_tau,
    krippendorff_alpha,
)
from coverbench.errors import DataMismatchError
from coverbench.model import RelevanceLabel

V = RelevanceLabel.VERSION
NV = RelevanceLabel.NON_VERSION


class TestKendallTau:
    def test_identical_with_distinct_values(self):
        assert kendall_tau([0, 1, 2, 3], [0, 1, 2, 3]) == 1.0

    def test_reversed_strict_order(self):
        assert kendall_tau([0, 1, 2, 3], [3, 2, 1, 0]) == -1.0

    def test_worked_six_item_example_with_ties(self):
        # hand count: 15 pairs, concordant 10, discordant 1,
        # ties-in-x-only 2, ties-in-y-only 2 -> tau_b = 9 / sqrt(13 * 13)
        x = [0, 1, 2, 2, 3, 1]
        y = [0, 2, 1, 2, 3, 1]
        assert kendall_tau(x, y) == pytest.approx(9 / 13, abs=1e-15)

    def test_accepts_relevance_labels(self):
        x = [RelevanceLabel.NO_MUSIC, V, RelevanceLabel.MATCH]
        assert kendall_tau(x, x) == 1.0

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        x = list(rng.integers(0, 4, size=30))
        y = list(rng.integers(0, 4, size=30))
        assert kendall_tau(x, y) == pytest.approx(kendall_tau(y, x), abs=1e-15)

    def test_matches_scipy_on_random_label_vectors(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(5, 60))
            x = rng.integers(0, 4, size=n)
            y = rng.integers(0, 4, size=n)
            if len(set(x.tolist())) < 2 or len(set(y.tolist())) < 2:
                continue
            expected = scipy_stats.kendalltau(x, y).statistic
            assert kendall_tau(list(x), list(y)) == pytest.approx(expected, abs=1e-12)

    def test_constant_side_rejected(self):
        with pytest.raises(DataMismatchError):
            kendall_tau([1, 1, 1], [0, 1, 2])
        with pytest.raises(DataMismatchError):
            kendall_tau([0, 1, 2], [2, 2, 2])

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataMismatchError):
            kendall_tau([1, 2], [1, 2, 3])

    def test_too_short_rejected(self):
        with pytest.raises(DataMismatchError):
            kendall_tau([1], [1])

    def test_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rng.integers(0, 4, size=20)
            y = rng.integers(0, 4, size=20)
            if len(set(x.tolist())) < 2 or len(set(y.tolist())) < 2:
                continue
            assert -1.0 <= kendall_tau(list(x), list(y)) <= 1.0


class TestKrippendorffAlpha:
    def test_perfect_agreement_two_distinct_labels(self):
        matrix = [[0, 0], [3, 3], [2, 2], [0, 0]]
        assert krippendorff_alpha(matrix, AlphaLevel.ORDINAL) == 1.0
        assert krippendorff_alpha(matrix, AlphaLevel.NOMINAL) == 1.0

    def test_hand_computed_nominal_toy(self):
        # items (2,2), (1,1), (2,1), (1,1):
        # coincidences: o(2,2)=2, o(1,1)=4, o(2,1)=o(1,2)=1; n_2=3, n_1=5, n=8
        # D_o = 2/8, D_e = 30/56 -> alpha = 1 - 14/30 = 8/15
        matrix = [[2, 2], [1, 1], [2, 1], [1, 1]]
        assert krippendorff_alpha(matrix, AlphaLevel.NOMINAL) == pytest.approx(
            8 / 15, abs=1e-15
        )

    def test_hand_computed_ordinal_toy(self):
        # exact value via rational arithmetic over the coincidence matrix: 67/100
        matrix = [[0, 0], [0, 1], [2, 3], [3, 3], [1, 1], [0, 2]]
        assert krippendorff_alpha(matrix, AlphaLevel.ORDINAL) == pytest.approx(
            0.67, abs=1e-12
        )

    def test_missing_cells_ignored(self):
        matrix = [[0, 0, None], [3, None, 3], [None, None, 2], [1, 1, 1]]
        assert krippendorff_alpha(matrix) == 1.0

    def test_single_rater_rejected(self):
        with pytest.raises(DataMismatchError, match="single rater"):
            krippendorff_alpha([[1], [2], [3]])

    def test_no_pairable_values_rejected(self):
        with pytest.raises(DataMismatchError):
            krippendorff_alpha([[1, None], [None, 2]])

    def test_all_identical_returns_one(self):
        assert krippendorff_alpha([[1, 1], [1, 1]]) == 1.0

    def test_accepts_relevance_labels(self):
        matrix = [[V, V], [NV, NV]]
        assert krippendorff_alpha(matrix) == 1.0

    def test_random_ratings_concentrate_near_zero(self):
        rng = np.random.default_rng(20240202)
        matrix = rng.integers(0, 4, size=(1000, 3)).tolist()
        alpha = krippendorff_alpha(matrix, AlphaLevel.ORDINAL)
        assert abs(alpha) < 0.05
        alpha_nominal = krippendorff_alpha(matrix, AlphaLevel.NOMINAL)
        assert abs(alpha_nominal) < 0.05

    def test_upper_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            matrix = rng.integers(0, 4, size=(30, 3)).tolist()
            assert krippendorff_alpha(matrix) <= 1.0


class TestAgreementReport:
    def test_report_fields(self):
        worker = [[0, 0, 1], [2, 2, 2], [3, 3, None], [1, 0, 1]]
        aggregated = [0, 2, 3, None]
        expert = [0, 2, 3, 1]
        report = agreement_report(worker, aggregated, expert)
        assert isinstance(report, AgreementReport)
        assert report.kendall_tau == 1.0
        assert report.n_items == 4
        assert report.n_raters == 3
        assert -1.0 <= report.krippendorff_alpha <= 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataMismatchError):
            agreement_report([[0, 0]], [0, 1], [0])


def _alpha_pair_reference(rows, metric):
    """Independent pair-enumeration formulation of alpha (no coincidence
    matrix): D_o from within-unit pairs, D_e from all cross-unit pairs."""
    units = [
        [v for v in row if v is not None] for row in rows
    ]
    units = [u for u in units if len(u) >= 2]
    n = sum(len(u) for u in units)
    observed = 0.0
    for unit in units:
        within = sum(metric(a, b) for a in unit for b in unit)
        observed += within / (len(unit) - 1)
    observed /= n
    if observed == 0.0:
        return 1.0
    expected = 0.0
    for u1 in units:
        for a in u1:
            for u2 in units:
                for b in u2:
                    expected += metric(a, b)
    expected /= n * (n - 1)
    return 1.0 - observed / expected


class TestAlphaAgainstPairReference:
    def test_matches_on_random_matrices_with_missing_cells(self):
        rng = np.random.default_rng(77)
        for _ in range(30):
            n_items = int(rng.integers(3, 25))
            n_raters = int(rng.integers(2, 6))
            rows = []
            for _ in range(n_items):
                row = [
                    int(rng.integers(0, 4)) if rng.random() > 0.25 else None
                    for _ in range(n_raters)
                ]
                rows.append(row)
            pairable = [len([v for v in r if v is not None]) >= 2 for r in rows]
            if not any(pairable):
                continue
            for level, metric in [
                (AlphaLevel.NOMINAL, lambda a, b: float(a != b)),
                (AlphaLevel.ORDINAL, lambda a, b: float((a - b) ** 2)),
            ]:
                got = krippendorff_alpha(rows, level)
                want = _alpha_pair_reference(rows, metric)
                assert got == pytest.approx(want, abs=1e-10), (level, rows)
