"""Target-sample acquisition.

Detective selection runs in two stages: over-select the ``N_hat`` most
uncertain unlabeled samples, then drop the densest candidates (in backbone
feature space) until exactly the round budget remains.  Every ordering
breaks ties by ascending sample id.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UsageError
from .evidence import entropy
from .prng import XorShift64Star

log = logging.getLogger(__name__)

DENSITY_EPS = 1e-8
BASELINES = ("random", "entropy", "margin")


@dataclass(frozen=True)
class ScheduleConfig:
    lambda_u: float = 0.01
    tau: float = 1.0

    def __post_init__(self):
        if self.lambda_u < 0:
            raise ConfigError(f"lambda_u must be >= 0, got {self.lambda_u}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")


class BudgetState:
    """Labeling bookkeeping across ``rounds`` selection rounds.

    Each round gets ``total // rounds`` labels; the last round also takes the
    remainder so the budget is spent exactly.
    """

    def __init__(self, total, rounds, unlabeled):
        if total < 0 or rounds < 1:
            raise ConfigError(f"need total >= 0 and rounds >= 1, got ({total}, {rounds})")
        self.total = int(total)
        self.rounds = int(rounds)
        self.per_round = self.total // self.rounds
        self.round = 0
        self.labeled = []
        self.unlabeled = list(unlabeled)
        if self.total > len(self.unlabeled):
            raise ConfigError(f"budget {self.total} exceeds the unlabeled pool of {len(self.unlabeled)}")

    def round_budget(self, r):
        if not 1 <= r <= self.rounds:
            raise UsageError(f"round {r} outside 1..{self.rounds}")
        if r == self.rounds:
            return self.total - (self.rounds - 1) * self.per_round
        return self.per_round

    @property
    def remaining(self):
        return self.total - len(self.labeled)

    def commit(self, ids):
        """Move ``ids`` from unlabeled to labeled and advance the round counter."""
        ids = [int(i) for i in ids]
        pool = set(self.unlabeled)
        if len(set(ids)) != len(ids):
            raise UsageError("duplicate ids in one selection")
        missing = [i for i in ids if i not in pool]
        if missing:
            raise UsageError(f"ids not in the unlabeled pool: {missing[:5]}")
        if len(ids) > self.remaining:
            raise UsageError("selection exceeds the remaining budget")
        chosen = set(ids)
        self.labeled.extend(ids)
        self.unlabeled = [i for i in self.unlabeled if i not in chosen]
        self.round += 1


def candidate_count(cfg, n_budget, r, R, pool_size):
    """Over-selection size ``n_budget + lambda_u * pool_size * (r / R) ** tau``.

    ``pool_size`` is the current number of unlabeled target samples.  The
    result is floored and clamped to ``[n_budget, pool_size]``.
    """
    if not 1 <= r <= R:
        raise UsageError(f"round {r} outside 1..{R}")
    t = r / R
    # the 1e-9 keeps exact products such as 11.999999999999998 from flooring down
    n_hat = math.floor(n_budget + cfg.lambda_u * pool_size * t**cfg.tau + 1e-9)
    return int(min(max(n_hat, n_budget), max(pool_size, n_budget)))


def _order_desc(ids, values):
    ids = np.asarray(ids, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    # lexsort: last key is primary
    return np.lexsort((ids, -values))


def rank_by_uncertainty(scores, n):
    """Ids of the ``n`` highest scores; ``scores`` maps id to score."""
    if n > len(scores):
        log.warning("requested %d candidates from a pool of %d; clamping", n, len(scores))
        n = len(scores)
    ids = np.fromiter(scores.keys(), dtype=np.int64, count=len(scores))
    vals = np.fromiter(scores.values(), dtype=np.float64, count=len(scores))
    order = _order_desc(ids, vals)[:n]
    return [int(i) for i in ids[order]]


def pairwise_distances(features):
    f = np.asarray(features, dtype=np.float64)
    sq = (f * f).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * f @ f.T
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def knn_density(features, k=10):
    """Inverse mean distance to the ``k`` nearest other points, plus eps."""
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n = len(f)
    if n < 2:
        return np.zeros(n)
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    k = min(k, n - 1)
    dist = pairwise_distances(f)
    np.fill_diagonal(dist, np.inf)
    nearest = np.sort(dist, axis=1)[:, :k]
    return 1.0 / (nearest.mean(axis=1) + DENSITY_EPS)


@dataclass
class CandidateSet:
    ids: list
    scores: np.ndarray = None
    features: np.ndarray = None
    densities: np.ndarray = field(default=None)

    def with_densities(self, k=10):
        self.densities = knn_density(self.features, k)
        return self


def cdc_filter(candidates, b):
    """Drop the densest ``len(candidates) - b`` candidates; keep candidate order.

    Among equal densities the higher id is dropped first.
    """
    ids = list(candidates.ids)
    if b < 0 or b > len(ids):
        raise UsageError(f"cannot keep {b} of {len(ids)} candidates")
    if b == 0:
        return []
    n_drop = len(ids) - b
    if n_drop == 0:
        return ids
    dens = np.asarray(candidates.densities, dtype=np.float64)
    drop_order = np.lexsort((-np.asarray(ids), -dens))[:n_drop]
    dropped = {ids[i] for i in drop_order}
    return [i for i in ids if i not in dropped]


def margin(p):
    p = np.sort(np.atleast_2d(p), axis=1)
    return p[:, -1] - p[:, -2]


def baseline_select(strategy, ids, prob, b, seed=0):
    """Random, max-entropy or min-margin selection of ``b`` pool ids.

    ``prob`` holds the model's expected class probabilities for ``ids``
    (ignored by ``random``).
    """
    if strategy not in BASELINES:
        raise ConfigError(f"unknown baseline strategy {strategy!r}; expected one of {BASELINES}")
    ids = [int(i) for i in ids]
    if b > len(ids):
        raise UsageError(f"cannot select {b} from a pool of {len(ids)}")
    if strategy == "random":
        return XorShift64Star(seed).sample(ids, b)
    if strategy == "entropy":
        order = _order_desc(ids, entropy(prob))
    else:
        order = _order_desc(ids, -margin(prob))
    return [ids[i] for i in order[:b]]


def detective_select(scores, features, b, n_hat, k=10, use_cdc=True):
    """Uncertainty over-selection of ``n_hat`` ids followed by density pruning to ``b``.

    ``scores`` and ``features`` map pool ids to score and feature vector.
    Returns ``(selected, candidates)``.
    """
    if not use_cdc:
        n_hat = b
    cand_ids = rank_by_uncertainty(scores, n_hat)
    cand = CandidateSet(
        ids=cand_ids,
        scores=np.array([scores[i] for i in cand_ids]),
        features=np.array([features[i] for i in cand_ids]),
    )
    if use_cdc and len(cand_ids) >= 2:
        cand.with_densities(k)
    else:
        cand.densities = np.zeros(len(cand_ids))
    return cdc_filter(cand, b), cand
