"""Inter-annotator agreement statistics on the ordinal relevance scale."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataMismatchError

_MISSING = None


def _as_ranks(values: Sequence) -> np.ndarray:
    return np.asarray([int(v) for v in values], dtype=np.int64)


def kendall_tau(x: Sequence, y: Sequence) -> float:
    """Kendall's tau-b (tie-corrected) between two label sequences.

    Values may be RelevanceLabel members or plain integers.  Undefined when
    either side is constant (the tie correction empties a denominator).
    """
    xs = _as_ranks(x)
    ys = _as_ranks(y)
    if xs.shape != ys.shape:
        raise DataMismatchError(
            f"kendall_tau requires equal lengths, got {len(xs)} and {len(ys)}"
        )
    n = len(xs)
    if n < 2:
        raise DataMismatchError("kendall_tau requires at least 2 items")
    dx = np.sign(xs[:, None] - xs[None, :])
    dy = np.sign(ys[:, None] - ys[None, :])
    upper = np.triu_indices(n, k=1)
    prod = dx[upper] * dy[upper]
    concordant = int(np.sum(prod > 0))
    discordant = int(np.sum(prod < 0))
    ties_x = int(np.sum(dx[upper] == 0))
    ties_y = int(np.sum(dy[upper] == 0))
    n0 = n * (n - 1) // 2
    denom_x = n0 - ties_x
    denom_y = n0 - ties_y
    if denom_x == 0 or denom_y == 0:
        raise DataMismatchError(
            "kendall_tau is undefined for a constant sequence (all pairs tied)"
        )
    return (concordant - discordant) / math.sqrt(denom_x * denom_y)


class AlphaLevel(enum.Enum):
    NOMINAL = "nominal"
    ORDINAL = "ordinal"


def krippendorff_alpha(
    ratings: Sequence[Sequence], level: AlphaLevel = AlphaLevel.ORDINAL
) -> float:
    """Krippendorff's alpha over an item-by-rater matrix with missing cells.

    ``ratings`` rows are items, columns raters; ``None`` marks a missing
    cell.  The ordinal metric is the squared rank distance on the label
    scale, the nominal metric is 0/1.  Only items with at least two ratings
    enter the coincidence matrix.  Returns exactly 1.0 under perfect
    agreement; all-identical ratings also count as perfect.
    """
    units: list[list[int]] = []
    for row in ratings:
        present = [int(v) for v in row if v is not _MISSING]
        if len(present) >= 2:
            units.append(present)
    if not units:
        raise DataMismatchError(
            "krippendorff_alpha has no pairable values (need >= 2 ratings on "
            ">= 1 item, so a single rater is never enough)"
        )

    if level is AlphaLevel.NOMINAL:
        delta = lambda c, k: 0.0 if c == k else 1.0
    else:
        delta = lambda c, k: float(c - k) ** 2

    coincidence: dict[tuple[int, int], float] = {}
    totals: dict[int, float] = {}
    for unit in units:
        m = len(unit)
        weight = 1.0 / (m - 1)
        for i, c in enumerate(unit):
            for j, k in enumerate(unit):
                if i == j:
                    continue
                coincidence[(c, k)] = coincidence.get((c, k), 0.0) + weight
                totals[c] = totals.get(c, 0.0) + weight

    n = sum(totals.values())
    observed = sum(w * delta(c, k) for (c, k), w in coincidence.items())
    expected = sum(
        totals[c] * totals[k] * delta(c, k) for c in totals for k in totals
    )
    if expected == 0.0:
        return 1.0
    return 1.0 - (n - 1.0) * observed / expected


@dataclass(frozen=True)
class AgreementReport:
    """Agreement summary: aggregated-vs-expert tau and worker alpha."""

    kendall_tau: float
    krippendorff_alpha: float
    n_items: int
    n_raters: int


def agreement_report(
    worker_ratings: Sequence[Sequence],
    aggregated: Sequence,
    expert: Sequence,
    level: AlphaLevel = AlphaLevel.ORDINAL,
) -> AgreementReport:
    """Tau between aggregated worker labels and expert labels, alpha among workers.

    ``aggregated`` and ``expert`` may contain ``None`` for missing entries;
    only positions where both sides are present enter the tau.
    """
    pairs = [
        (a, e) for a, e in zip(aggregated, expert) if a is not None and e is not None
    ]
    if len(aggregated) != len(expert):
        raise DataMismatchError(
            "aggregated and expert label lists must have equal length"
        )
    tau = kendall_tau([p[0] for p in pairs], [p[1] for p in pairs])
    alpha = krippendorff_alpha(worker_ratings, level=level)
    n_raters = max((len(row) for row in worker_ratings), default=0)
    return AgreementReport(
        kendall_tau=tau,
        krippendorff_alpha=alpha,
        n_items=len(worker_ratings),
        n_raters=n_raters,
    )
