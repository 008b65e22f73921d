import pytest
from hypothesis import given, strategies as st

from polyroute.languages import (
    CatalogError,
    DistanceTable,
    LanguageCatalog,
    LanguageDistance,
    LanguageInfo,
    PivotConfig,
    relevance_score,
    select_pivot,
    similar_languages,
)


def info(code, cls, latin=False, name=None):
    return LanguageInfo(code=code, name=name or code, resource_class=cls, is_latin_script=latin)


def dist(src, tgt, mean):
    return LanguageDistance(src, tgt, {"syntactic": mean, "genetic": mean, "geographic": mean})


CFG = PivotConfig()


class TestRelevanceScore:
    def test_latin_candidate(self):
        assert relevance_score(0.4, info("x", 4, latin=True), CFG) == pytest.approx(0.09, abs=1e-12)

    def test_non_latin_candidate(self):
        assert relevance_score(0.5, info("x", 5), CFG) == pytest.approx(0.10, abs=1e-12)

    def test_zero_distance(self):
        assert relevance_score(0.0, info("x", 3, latin=True), CFG) == 0.0

    def test_class_zero_rejected(self):
        with pytest.raises(ZeroDivisionError):
            relevance_score(0.4, info("x", 0), CFG)

    def test_distance_out_of_range(self):
        with pytest.raises(ValueError):
            relevance_score(1.5, info("x", 3), CFG)

    @given(st.floats(0.001, 1.0), st.floats(0.0, 0.999))
    def test_monotone_in_distance(self, d_hi, frac):
        d_lo = d_hi * frac
        candidate = info("x", 4, latin=True)
        assert relevance_score(d_lo, candidate, CFG) < relevance_score(d_hi, candidate, CFG)

    @given(st.floats(0.0, 1.0), st.integers(1, 5))
    def test_latin_scores_no_higher(self, d, cls):
        assert relevance_score(d, info("x", cls, latin=True), CFG) <= relevance_score(
            d, info("y", cls, latin=False), CFG
        )


class TestSimilarLanguages:
    def test_class_threshold_filters(self):
        catalog = LanguageCatalog([info("src", 3), info("X", 4, latin=True), info("Y", 2)])
        table = DistanceTable([dist("src", "X", 0.2), dist("src", "Y", 0.1)])
        assert similar_languages("src", catalog, table) == [("X", pytest.approx(0.045))]

    def test_source_never_returned(self):
        catalog = LanguageCatalog([info("src", 5, latin=True)])
        table = DistanceTable([dist("src", "src", 0.0)])
        assert similar_languages("src", catalog, table) == []

    def test_english_excluded_by_default(self):
        catalog = LanguageCatalog([info("src", 3), info("en", 5, latin=True)])
        table = DistanceTable([dist("src", "en", 0.3)])
        assert similar_languages("src", catalog, table) == []
        permissive = PivotConfig(exclude_english=False)
        assert [c for c, _ in similar_languages("src", catalog, table, permissive)] == ["en"]

    def test_distance_threshold_filters(self):
        catalog = LanguageCatalog([info("src", 3), info("X", 3)])
        table = DistanceTable([dist("src", "X", 0.9)])
        tight = PivotConfig(dist_threshold=0.2)
        assert similar_languages("src", catalog, table, tight) == []

    def test_candidates_without_distance_rows_skipped(self):
        catalog = LanguageCatalog([info("src", 3), info("X", 4)])
        assert similar_languages("src", catalog, DistanceTable([])) == []

    def test_unknown_source(self):
        with pytest.raises(CatalogError):
            similar_languages("zz", LanguageCatalog([info("a", 3)]), DistanceTable([]))

    def test_sorted_ascending_with_code_ties(self):
        catalog = LanguageCatalog([info("src", 3), info("b", 4), info("a", 4), info("c", 4)])
        table = DistanceTable([dist("src", "b", 0.2), dist("src", "a", 0.2), dist("src", "c", 0.1)])
        assert [c for c, _ in similar_languages("src", catalog, table)] == ["c", "a", "b"]


class TestSelectPivot:
    def test_empty_set_is_none(self):
        catalog = LanguageCatalog([info("src", 3), info("Y", 2)])
        assert select_pivot("src", catalog, DistanceTable([dist("src", "Y", 0.1)])) is None

    def test_singleton(self):
        catalog = LanguageCatalog([info("src", 3), info("X", 4)])
        assert select_pivot("src", catalog, DistanceTable([dist("src", "X", 0.2)])) == "X"

    def test_tie_breaks_lexicographically(self):
        catalog = LanguageCatalog([info("src", 3), info("zz", 4), info("aa", 4)])
        table = DistanceTable([dist("src", "zz", 0.2), dist("src", "aa", 0.2)])
        assert select_pivot("src", catalog, table) == "aa"

    def test_deterministic(self, catalog, distances):
        picks = {select_pivot("hi", catalog, distances) for _ in range(10)}
        assert len(picks) == 1


class TestBundledData:
    def test_paperlike_na_languages(self, catalog, distances):
        # ta (IndicQA) and ar/sw (TyDiQA) have no qualifying pivot
        for lang in ("ta", "ar", "sw"):
            assert select_pivot(lang, catalog, distances) is None

    def test_pivot_available_for_most_languages(self, catalog, distances):
        for lang in ("hi", "bn", "fi", "ko", "en", "te"):
            assert select_pivot(lang, catalog, distances) is not None

    def test_self_distance_is_zero(self, distances):
        assert distances.lookup("hi", "hi").mean == 0.0

    def test_mean_is_arithmetic_mean(self, distances):
        d = distances.lookup("hi", "ur")
        assert d.mean == pytest.approx(sum(d.per_feature.values()) / 3)
