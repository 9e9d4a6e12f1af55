"""Two-stage cohort funnel: filters, relevance sifter, diagnostic CNN."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .convnet import CnnModel
from .corpus import Post
from .relevance import TfIdfLogisticModel
from .sift import FilterConfig, FilterReport, apply_filters


@dataclass
class CohortResult:
    filter_report: FilterReport
    relevant: list[Post]
    diagnostic: list[Post]
    per_user: dict[str, int] = field(default_factory=dict)

    @property
    def funnel(self) -> dict[str, int]:
        return {
            "input": self.filter_report.input_count,
            "sifted": self.filter_report.kept_count,
            "relevant": len(self.relevant),
            "diagnostic": len(self.diagnostic),
            "users": len(self.per_user),
        }


def run_cohort(posts, logistic: TfIdfLogisticModel, cnn: CnnModel,
               config: FilterConfig = FilterConfig()) -> CohortResult:
    kept, report = apply_filters(posts, config)
    if kept:
        p_rel = logistic.predict_proba_many(p.text for p in kept)
        relevant = [p for p, pr in zip(kept, p_rel) if pr >= 0.5]
    else:
        relevant = []
    if relevant:
        probs = cnn.predict_proba_many(p.text for p in relevant)
        diagnostic = [p for p, pr in zip(relevant, probs) if pr[0] > pr[1]]
    else:
        diagnostic = []
    per_user = Counter(p.user_id for p in diagnostic)
    return CohortResult(report, relevant, diagnostic, dict(sorted(per_user.items())))


def cohort_profiles(result: CohortResult) -> np.ndarray:
    """Post counts of the cohort's users, largest first."""
    return np.array(sorted(result.per_user.values(), reverse=True), dtype=np.int64)
