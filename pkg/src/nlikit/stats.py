"""Descriptive statistics of word length, sentence length and syntax depth.

Summaries aggregate the same observation streams the statistical feature
families encode, grouped by label or by an externally supplied grouping such
as proficiency bands, always with an overall row appended.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import LabeledDataset
from .errors import DataError
from .features import STAT_FAMILIES, statistical_units

OVERALL_GROUP = "(All)"


@dataclass(frozen=True)
class StatSummary:
    group: str
    kind: str
    mean: float
    count: int


@dataclass(frozen=True)
class StatHistogram:
    group: str
    kind: str
    bins: tuple[tuple[int, float], ...]

    @property
    def mass(self) -> float:
        return sum(v for _, v in self.bins)


def _check_kind(kind: str) -> None:
    if kind not in STAT_FAMILIES:
        raise DataError(f"unknown statistical family {kind!r}")


def _group_values(
    groups: Mapping[str, LabeledDataset], kind: str
) -> dict[str, list[int]]:
    values: dict[str, list[int]] = {}
    for name, dataset in groups.items():
        acc: list[int] = []
        for doc in dataset.documents:
            acc.extend(statistical_units(doc, kind))
        values[name] = acc
    return values


def _as_groups(
    data: LabeledDataset | Mapping[str, LabeledDataset]
) -> Mapping[str, LabeledDataset]:
    if isinstance(data, LabeledDataset):
        return {
            label: LabeledDataset(
                documents=tuple(d for d in data.documents if d.label == label),
                label_space=data.label_space,
            )
            for label in data.label_space
        }
    return data


def mean_stat(
    data: LabeledDataset | Mapping[str, LabeledDataset], kind: str
) -> list[StatSummary]:
    """Group means plus the overall mean.

    A LabeledDataset is grouped by label; a mapping is taken as-is in its
    iteration order (e.g. proficiency bands). Groups without observations
    are omitted; an overall row over every observation is appended and must
    be non-empty.
    """
    _check_kind(kind)
    values = _group_values(_as_groups(data), kind)
    out: list[StatSummary] = []
    all_values: list[int] = []
    for name, vals in values.items():
        all_values.extend(vals)
        if vals:
            out.append(
                StatSummary(
                    group=name, kind=kind, mean=sum(vals) / len(vals), count=len(vals)
                )
            )
    if not all_values:
        raise DataError(f"no {kind} observations in any group")
    out.append(
        StatSummary(
            group=OVERALL_GROUP,
            kind=kind,
            mean=sum(all_values) / len(all_values),
            count=len(all_values),
        )
    )
    return out


def histogram(
    data: LabeledDataset | Mapping[str, LabeledDataset],
    kind: str,
    normalize: bool = True,
) -> list[StatHistogram]:
    """Per-group value histograms, sorted by value.

    Normalized histograms sum to 1 per group; raw ones hold counts. Groups
    without observations are omitted.
    """
    _check_kind(kind)
    values = _group_values(_as_groups(data), kind)
    out: list[StatHistogram] = []
    for name, vals in values.items():
        if not vals:
            continue
        counted = Counter(vals)
        total = sum(counted.values())
        bins = tuple(
            (value, counted[value] / total if normalize else float(counted[value]))
            for value in sorted(counted)
        )
        out.append(StatHistogram(group=name, kind=kind, bins=bins))
    if not out:
        raise DataError(f"no {kind} observations in any group")
    return out


def means_csv(data: LabeledDataset | Mapping[str, LabeledDataset]) -> str:
    """CSV of group means for all three kinds: group,avg_wl,avg_sl,avg_dd."""
    rows: dict[str, dict[str, float]] = {}
    order: list[str] = []
    for kind in STAT_FAMILIES:
        for summary in mean_stat(data, kind):
            if summary.group not in rows:
                rows[summary.group] = {}
                order.append(summary.group)
            rows[summary.group][kind] = summary.mean
    lines = ["group,avg_wl,avg_sl,avg_dd"]
    for group in order:
        cells = [group]
        for kind in STAT_FAMILIES:
            value = rows[group].get(kind)
            cells.append("" if value is None else f"{value:.6f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def histograms_csv(
    data: LabeledDataset | Mapping[str, LabeledDataset], normalize: bool = True
) -> str:
    """CSV of histograms for all three kinds: group,kind,value,mass."""
    lines = ["group,kind,value,mass"]
    for kind in STAT_FAMILIES:
        for hist in histogram(data, kind, normalize):
            for value, mass in hist.bins:
                lines.append(f"{hist.group},{kind},{value},{mass:.10g}")
    return "\n".join(lines) + "\n"
