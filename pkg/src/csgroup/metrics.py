"""Grouping accuracy: separable-variable accuracy (SA) and non-separable
group accuracy (NA)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .problem import FeLedger, GroupingResult


def sa(truth: GroupingResult, result: GroupingResult) -> float | None:
    """|true separables found separable| / |true separables|; None if there are none."""
    sep_true = truth.separable
    if not sep_true:
        return None
    return len(sep_true & result.separable) / len(sep_true)


def na(
    truth: GroupingResult, result: GroupingResult, order: str = "size"
) -> float | None:
    """Greedy max-overlap matching of true groups to formed groups.

    Each formed group can be claimed once. True groups are visited by
    descending size (ties: smallest member first) unless ``order='given'``.
    Overlap ties go to the smaller formed group, then to the one with the
    lexicographically smallest members, so the result does not depend on
    the order of the formed groups. Returns None when the truth has no
    non-separable groups.
    """
    true_groups = [set(g) for g in truth.nonseparable_groups]
    if not true_groups:
        return None
    if order == "size":
        true_groups.sort(key=lambda g: (-len(g), min(g)))
    elif order != "given":
        raise ValueError(f"unknown order {order!r}")
    formed = [set(g) for g in sorted(sorted(g) for g in result.nonseparable_groups)]
    used = [False] * len(formed)
    hit = 0
    for g in true_groups:
        best, best_k = 0, -1
        for k, h in enumerate(formed):
            if used[k]:
                continue
            ov = len(g & h)
            if ov > best or (ov == best and ov > 0 and len(h) < len(formed[best_k])):
                best, best_k = ov, k
        if best_k >= 0:
            used[best_k] = True
            hit += best
    return hit / sum(len(g) for g in true_groups)


@dataclass
class AccuracyReport:
    sa: float | None
    na: float | None
    fe_total: int
    fe_by_stage: dict[str, int] = field(default_factory=dict)

    @classmethod
    def build(cls, truth: GroupingResult, result: GroupingResult, ledger: FeLedger) -> "AccuracyReport":
        stages = ledger.as_dict()
        total = stages.pop("total")
        return cls(sa(truth, result), na(truth, result), total, stages)

    def to_json(self) -> dict:
        return {"sa": self.sa, "na": self.na, "fe_total": self.fe_total, "fe_by_stage": dict(self.fe_by_stage)}

    def table_row(self) -> dict[str, str]:
        """SA / NA / FEs cells in percentage layout; '-' for undefined metrics."""

        def pct(v):
            return "-" if v is None else f"{100.0 * v:.1f}%"

        return {"SA": pct(self.sa), "NA": pct(self.na), "FEs": str(self.fe_total)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["SA", "NA", "FEs"], lineterminator="\n")
        w.writeheader()
        w.writerow(self.table_row())
        return buf.getvalue()
