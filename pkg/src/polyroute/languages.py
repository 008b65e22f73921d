"""Language metadata, pairwise distances, and pivot-language selection.

The pivot rule: among candidate languages of resource class >= a threshold,
score each one by ``w * d / class`` where ``d`` is the mean of the syntactic,
genetic, and geographic distances to the source language, ``w`` discounts
Latin-script candidates, and lower is better. The lowest-scoring candidate
under the distance threshold becomes the pivot for round-trip translation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

DISTANCE_FEATURES = ("syntactic", "genetic", "geographic")


class CatalogError(KeyError):
    """Unknown language code or malformed catalog/distance data."""


@dataclass(frozen=True)
class LanguageInfo:
    code: str
    name: str
    resource_class: int
    is_latin_script: bool

    def __post_init__(self):
        if not 0 <= self.resource_class <= 5:
            raise ValueError(f"resource_class out of range for {self.code}: {self.resource_class}")


@dataclass(frozen=True)
class LanguageDistance:
    source: str
    target: str
    per_feature: dict[str, float]

    @property
    def mean(self) -> float:
        return sum(self.per_feature[f] for f in DISTANCE_FEATURES) / len(DISTANCE_FEATURES)


@dataclass(frozen=True)
class PivotConfig:
    cls_threshold: int = 3
    dist_threshold: float = 0.5
    w_latin: float = 0.9
    exclude_english: bool = True
    extra_exclusions: frozenset[str] = frozenset()

    def __post_init__(self):
        if not 0 < self.w_latin <= 1:
            raise ValueError(f"w_latin must be in (0, 1]: {self.w_latin}")
        if self.dist_threshold <= 0:
            raise ValueError(f"dist_threshold must be positive: {self.dist_threshold}")

    def exclusions(self, source: str) -> set[str]:
        out = {source} | set(self.extra_exclusions)
        if self.exclude_english:
            out.add("en")
        return out


class LanguageCatalog:
    """Immutable lookup of per-language metadata."""

    def __init__(self, infos: list[LanguageInfo]):
        self._by_code: dict[str, LanguageInfo] = {}
        for info in infos:
            if info.code in self._by_code:
                raise CatalogError(f"duplicate language code: {info.code}")
            self._by_code[info.code] = info

    def __contains__(self, code: str) -> bool:
        return code in self._by_code

    def __iter__(self):
        return iter(self._by_code.values())

    def __len__(self) -> int:
        return len(self._by_code)

    def get(self, code: str) -> LanguageInfo:
        try:
            return self._by_code[code]
        except KeyError:
            raise CatalogError(f"unknown language code: {code}") from None

    def name_of(self, code: str) -> str:
        return self.get(code).name


class DistanceTable:
    """Pairwise per-feature language distances; missing pairs are unavailable."""

    def __init__(self, distances: list[LanguageDistance]):
        self._pairs: dict[tuple[str, str], LanguageDistance] = {}
        for d in distances:
            self._pairs[(d.source, d.target)] = d

    def lookup(self, source: str, target: str) -> LanguageDistance | None:
        if source == target:
            return LanguageDistance(source, target, {f: 0.0 for f in DISTANCE_FEATURES})
        return self._pairs.get((source, target)) or self._pairs.get((target, source))


def relevance_score(d: float, info: LanguageInfo, cfg: PivotConfig) -> float:
    """Latin-weighted distance-over-class score; lower means a better pivot."""
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"mean distance out of [0,1]: {d}")
    if info.resource_class == 0:
        raise ZeroDivisionError(f"resource class 0 for {info.code}")
    w = cfg.w_latin if info.is_latin_script else 1.0
    return w * d / info.resource_class


def similar_languages(
    source: str,
    catalog: LanguageCatalog,
    distances: DistanceTable,
    cfg: PivotConfig | None = None,
) -> list[tuple[str, float]]:
    """Candidate pivots for `source`, sorted ascending by score (ties by code).

    A candidate qualifies when its resource class meets the threshold, it is
    not excluded (the source itself, and English by default), a distance to
    the source is available, and its relevance score is under the threshold.
    """
    cfg = cfg or PivotConfig()
    src = catalog.get(source)  # raises CatalogError for unknown codes
    excluded = cfg.exclusions(src.code)
    scored = []
    for info in catalog:
        if info.code in excluded or info.resource_class < cfg.cls_threshold:
            continue
        dist = distances.lookup(source, info.code)
        if dist is None:
            continue
        score = relevance_score(dist.mean, info, cfg)
        if score <= cfg.dist_threshold:
            scored.append((info.code, score))
    scored.sort(key=lambda cs: (cs[1], cs[0]))
    return scored


def select_pivot(
    source: str,
    catalog: LanguageCatalog,
    distances: DistanceTable,
    cfg: PivotConfig | None = None,
) -> str | None:
    """Best pivot language for `source`, or None when no candidate qualifies."""
    candidates = similar_languages(source, catalog, distances, cfg)
    return candidates[0][0] if candidates else None


def load_catalog(path: str | Path | None = None) -> LanguageCatalog:
    """Load a catalog TSV (code, name, resource_class, latin_script)."""
    text = _read_data("language_catalog.tsv", path)
    infos = []
    for row in csv.DictReader(text.splitlines(), delimiter="\t"):
        try:
            infos.append(
                LanguageInfo(
                    code=row["code"],
                    name=row["name"],
                    resource_class=int(row["resource_class"]),
                    is_latin_script=bool(int(row["latin_script"])),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"bad catalog row {row!r}: {exc}") from exc
    return LanguageCatalog(infos)


def load_distances(path: str | Path | None = None) -> DistanceTable:
    """Load a distance TSV (source, target, syntactic, genetic, geographic)."""
    text = _read_data("language_distances.tsv", path)
    rows = []
    for row in csv.DictReader(text.splitlines(), delimiter="\t"):
        try:
            per_feature = {f: float(row[f]) for f in DISTANCE_FEATURES}
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"bad distance row {row!r}: {exc}") from exc
        for f, v in per_feature.items():
            if not 0.0 <= v <= 1.0:
                raise CatalogError(f"distance {f}={v} out of [0,1] for {row['source']}->{row['target']}")
        rows.append(LanguageDistance(row["source"], row["target"], per_feature))
    return DistanceTable(rows)


def _read_data(default_name: str, path: str | Path | None) -> str:
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    return resources.files("polyroute.data").joinpath(default_name).read_text(encoding="utf-8")
