"""Per-input active-set construction: hash-table negative sampling plus
the baseline schemes (uniform, log-uniform, frequency, top-k, full).

All samplers produce an ``ActiveSet``: the true labels of the input plus a
set of negative class ids, deduplicated and size-normalized to a fixed
negative budget so different schemes are comparable at equal compute.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from lshsoftmax.errors import DegenerateInputError
from lshsoftmax.vectors import is_all_zero

log = logging.getLogger(__name__)

SAMPLER_KINDS = (
    "full",
    "lns_label",
    "lns_embedding",
    "uniform",
    "log_uniform",
    "frequency",
    "top_k",
)


@dataclass(frozen=True)
class SamplerKind:
    """Which sampling scheme to run and its size knobs.

    ``n_samples`` is the negative budget (ignored by full/top_k);
    ``k`` is the activation count kept by top_k.
    """

    name: str
    n_samples: int = 64
    k: int = 10

    def __post_init__(self):
        if self.name not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler {self.name!r}; expected one of {SAMPLER_KINDS}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class ActiveSet:
    """The class ids actually computed and updated for one input.

    ``ids`` are unique, true labels first; ``true_mask`` flags them.
    ``logit_adjust``, when present, is subtracted from the raw logits
    (sampled-softmax correction; zero when correction is off).
    """

    ids: np.ndarray
    true_mask: np.ndarray
    logit_adjust: np.ndarray | None = None

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.true_mask = np.asarray(self.true_mask, dtype=bool)
        if self.ids.shape != self.true_mask.shape:
            raise ValueError("ids and true_mask must have identical shape")
        if np.unique(self.ids).size != self.ids.size:
            raise ValueError("active set contains duplicate ids")
        if not self.true_mask.any():
            raise ValueError("active set must contain at least one true label")

    @classmethod
    def of(cls, true_ids, negative_ids, logit_adjust=None) -> "ActiveSet":
        true_ids = np.asarray(true_ids, dtype=np.int64)
        negative_ids = np.asarray(negative_ids, dtype=np.int64)
        ids = np.concatenate([true_ids, negative_ids])
        mask = np.zeros(ids.size, dtype=bool)
        mask[: true_ids.size] = True
        return cls(ids, mask, logit_adjust)

    @property
    def true_ids(self) -> np.ndarray:
        return self.ids[self.true_mask]

    @property
    def negative_ids(self) -> np.ndarray:
        return self.ids[~self.true_mask]

    def __len__(self) -> int:
        return int(self.ids.size)


class FrequencyTable:
    """Per-class training-set occurrence counts with O(1) weighted draws.

    Draws use Walker's alias structure built over the count distribution;
    classes with zero count are never drawn.
    """

    def __init__(self, counts):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 1 or (counts < 0).any():
            raise ValueError("counts must be a 1-D array of non-negative integers")
        self.counts = counts
        self.total = int(counts.sum())
        self._alias = None

    @property
    def num_classes(self) -> int:
        return self.counts.size

    @property
    def probabilities(self) -> np.ndarray:
        if self.total == 0:
            raise ValueError("frequency table is empty; cannot normalize")
        return self.counts / self.total

    def _ensure_alias(self):
        if self._alias is not None:
            return
        p = self.probabilities * self.num_classes
        accept = np.zeros(self.num_classes)
        alias = np.zeros(self.num_classes, dtype=np.int64)
        small = [i for i in range(self.num_classes) if p[i] < 1.0]
        large = [i for i in range(self.num_classes) if p[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            accept[s] = p[s]
            alias[s] = g
            p[g] = p[g] - (1.0 - p[s])
            (small if p[g] < 1.0 else large).append(g)
        for i in large + small:
            accept[i] = 1.0
        self._alias = (accept, alias)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws with replacement, each marginal proportional to its count."""
        self._ensure_alias()
        accept, alias = self._alias
        idx = rng.integers(self.num_classes, size=size)
        take_alias = rng.random(size) >= accept[idx]
        return np.where(take_alias, alias[idx], idx)

    def sample(self, n: int, exclude, rng: np.random.Generator) -> np.ndarray:
        """n distinct ids proportional to counts, rejecting ``exclude``."""
        exclude = frozenset(int(e) for e in exclude)
        eligible = [i for i in np.flatnonzero(self.counts) if i not in exclude]
        if len(eligible) < n:
            raise ValueError(
                f"cannot draw {n} distinct classes: only {len(eligible)} have mass left"
            )
        chosen: list[int] = []
        seen = set(exclude)
        for _ in range(200):
            for c in self.draw(rng, size=max(2 * n, 32)):
                c = int(c)
                if c not in seen:
                    seen.add(c)
                    chosen.append(c)
                    if len(chosen) == n:
                        return np.asarray(chosen, dtype=np.int64)
        # pathological exclusion pattern: finish with an exact weighted draw
        remaining = np.asarray([i for i in eligible if i not in seen], dtype=np.int64)
        w = self.counts[remaining].astype(np.float64)
        extra = rng.choice(remaining, size=n - len(chosen), replace=False, p=w / w.sum())
        return np.asarray(chosen + [int(e) for e in extra], dtype=np.int64)


def sample_uniform(n: int, num_classes: int, exclude, rng: np.random.Generator) -> np.ndarray:
    """n distinct ids drawn uniformly from the classes outside ``exclude``."""
    exclude = frozenset(int(e) for e in exclude)
    avail = num_classes - len(exclude)
    if n > avail:
        raise ValueError(f"cannot draw {n} distinct classes from {avail} available")
    if avail <= 2 * n or num_classes < 1024:
        pool = np.setdiff1d(np.arange(num_classes, dtype=np.int64),
                            np.fromiter(exclude, dtype=np.int64, count=len(exclude)))
        return rng.choice(pool, size=n, replace=False)
    chosen: list[int] = []
    seen = set(exclude)
    while len(chosen) < n:
        for c in rng.integers(num_classes, size=2 * (n - len(chosen)) + 8):
            c = int(c)
            if c not in seen:
                seen.add(c)
                chosen.append(c)
                if len(chosen) == n:
                    break
    return np.asarray(chosen, dtype=np.int64)


def log_uniform_mass(num_classes: int) -> np.ndarray:
    """Mass of each frequency rank r under P(r) proportional to log((r+2)/(r+1))."""
    r = np.arange(num_classes, dtype=np.float64)
    return np.log((r + 2.0) / (r + 1.0)) / np.log(num_classes + 1.0)


def sample_log_uniform(
    n: int,
    num_classes: int,
    exclude,
    rng: np.random.Generator,
    classes_by_rank: np.ndarray | None = None,
) -> np.ndarray:
    """n distinct ids, rank r drawn with mass log((r+2)/(r+1)) / log(N+1).

    ``classes_by_rank[r]`` maps a frequency rank to a class id; identity by
    default (ids already sorted by descending training frequency).
    """
    exclude = frozenset(int(e) for e in exclude)
    avail = num_classes - len(exclude)
    if n > avail:
        raise ValueError(f"cannot draw {n} distinct classes from {avail} available")
    chosen: list[int] = []
    seen = set(exclude)
    for _ in range(200):
        u = rng.random(max(2 * n, 32))
        ranks = np.minimum(
            ((num_classes + 1.0) ** u).astype(np.int64) - 1, num_classes - 1
        )
        ids = ranks if classes_by_rank is None else np.asarray(classes_by_rank)[ranks]
        for c in ids:
            c = int(c)
            if c not in seen:
                seen.add(c)
                chosen.append(c)
                if len(chosen) == n:
                    return np.asarray(chosen, dtype=np.int64)
    # heavy exclusion: finish with an exact draw over the remaining ranks
    mass = log_uniform_mass(num_classes)
    all_ids = np.arange(num_classes, dtype=np.int64) if classes_by_rank is None \
        else np.asarray(classes_by_rank, dtype=np.int64)
    keep = np.asarray([i for i in range(num_classes) if int(all_ids[i]) not in seen])
    w = mass[keep]
    extra_ranks = rng.choice(keep, size=n - len(chosen), replace=False, p=w / w.sum())
    return np.asarray(chosen + [int(all_ids[r]) for r in extra_ranks], dtype=np.int64)


def sample_frequency(n: int, freq: FrequencyTable, exclude, rng: np.random.Generator) -> np.ndarray:
    """n distinct ids with marginals proportional to training frequency."""
    return freq.sample(n, exclude, rng)


def sample_lns_label(true_ids, tables, weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Query the tables with the weight row of one uniformly chosen true label.

    Returns the retrieved candidates minus the true labels. For multi-label
    inputs a single true label is chosen per call, keeping the per-input
    cost at K*L hash evaluations.
    """
    true_ids = np.asarray(true_ids, dtype=np.int64)
    if true_ids.size == 0:
        raise ValueError("need at least one true label to query with")
    y_star = int(true_ids[rng.integers(true_ids.size)])
    candidates = tables.query(weights[y_star])
    return np.setdiff1d(candidates, true_ids, assume_unique=False)


def sample_lns_embedding(
    embedding: np.ndarray,
    true_ids,
    tables,
    rng: np.random.Generator,
    n_fallback: int,
    num_classes: int | None = None,
) -> tuple[np.ndarray, bool]:
    """Query the tables with the input's hidden embedding.

    Returns (candidates minus true labels, fell_back). An all-zero
    embedding cannot be hashed; in that case ``n_fallback`` uniform
    negatives are drawn instead and ``fell_back`` is True.
    """
    true_ids = np.asarray(true_ids, dtype=np.int64)
    if is_all_zero(embedding):
        if num_classes is None:
            ids = tables.stored_ids()
            if ids.size == 0:
                raise DegenerateInputError("cannot fall back to uniform: tables are empty")
            num_classes = int(ids[-1]) + 1
        fallback = sample_uniform(n_fallback, num_classes, true_ids, rng)
        return fallback, True
    candidates = tables.query(embedding)
    return np.setdiff1d(candidates, true_ids, assume_unique=False), False


def top_k_candidates(logits: np.ndarray, k: int, true_ids) -> ActiveSet:
    """True labels plus the k highest-activation classes, ties to lower id."""
    logits = np.asarray(logits, dtype=np.float64)
    n = logits.size
    if k < 1 or k > n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    order = np.argsort(-logits, kind="stable")[:k]
    true_ids = np.asarray(true_ids, dtype=np.int64)
    negatives = order[~np.isin(order, true_ids)]
    return ActiveSet.of(true_ids, negatives)


def finalize_active_set(
    candidates,
    true_ids,
    n_target: int,
    num_classes: int,
    rng: np.random.Generator,
) -> ActiveSet:
    """Normalize raw candidates to exactly ``n_target`` negatives plus truths.

    Deduplicates, drops true labels, uniformly subsamples an oversized
    candidate pool, and pads an undersized one with uniform random
    non-true classes.
    """
    true_ids = np.unique(np.asarray(true_ids, dtype=np.int64))
    if n_target >= num_classes - true_ids.size:
        raise ValueError(
            f"n_target={n_target} must be smaller than the {num_classes - true_ids.size}"
            " non-true classes"
        )
    negs = np.setdiff1d(np.asarray(candidates, dtype=np.int64), true_ids)
    if negs.size > n_target:
        negs = rng.choice(negs, size=n_target, replace=False)
        negs.sort()
    elif negs.size < n_target:
        exclude = np.concatenate([true_ids, negs])
        pad = sample_uniform(n_target - negs.size, num_classes, exclude, rng)
        negs = np.concatenate([negs, pad])
    return ActiveSet.of(true_ids, negs)


@dataclass
class SamplerStats:
    fallbacks: int = 0
    padded: int = 0
    invocations: int = 0


class NegativeSampler:
    """Dispatch facade: one object per training run, stateless across calls
    apart from its RNG stream and diagnostic counters."""

    def __init__(
        self,
        kind: SamplerKind,
        num_classes: int,
        rng: np.random.Generator,
        freq: FrequencyTable | None = None,
        classes_by_rank: np.ndarray | None = None,
        logit_correction: bool = False,
    ):
        if kind.name == "frequency" and freq is None:
            raise ValueError("frequency sampler needs a FrequencyTable")
        self.kind = kind
        self.num_classes = num_classes
        self.rng = rng
        self.freq = freq
        self.classes_by_rank = classes_by_rank
        self.logit_correction = logit_correction
        self.stats = SamplerStats()
        self._all_ids = np.arange(num_classes, dtype=np.int64)

    @property
    def needs_tables(self) -> bool:
        return self.kind.name in ("lns_label", "lns_embedding")

    @property
    def needs_full_logits(self) -> bool:
        return self.kind.name == "top_k"

    def active_set(
        self,
        true_ids,
        *,
        embedding: np.ndarray | None = None,
        weights: np.ndarray | None = None,
        tables=None,
        full_logits: np.ndarray | None = None,
        candidates: np.ndarray | None = None,
    ) -> ActiveSet:
        """Build the active set for one input.

        ``candidates`` short-circuits the retrieval step (used by the
        batched trainer, which hashes a whole batch at once).
        """
        self.stats.invocations += 1
        name = self.kind.name
        true_ids = np.unique(np.asarray(true_ids, dtype=np.int64))
        n = self.kind.n_samples

        if name == "full":
            mask = np.zeros(self.num_classes, dtype=bool)
            mask[true_ids] = True
            return ActiveSet(self._all_ids, mask)
        if name == "top_k":
            if full_logits is None:
                raise ValueError("top_k sampling needs the full logit vector")
            return top_k_candidates(full_logits, self.kind.k, true_ids)
        if name == "uniform":
            negs = sample_uniform(n, self.num_classes, true_ids, self.rng)
            return self._finish(true_ids, negs)
        if name == "log_uniform":
            negs = sample_log_uniform(n, self.num_classes, true_ids, self.rng, self.classes_by_rank)
            return self._finish(true_ids, negs)
        if name == "frequency":
            negs = sample_frequency(n, self.freq, true_ids, self.rng)
            return self._finish(true_ids, negs)

        # hash-table schemes
        if candidates is None:
            if tables is None:
                raise ValueError(f"{name} sampling needs built tables")
            if name == "lns_label":
                if weights is None:
                    raise ValueError("lns_label sampling needs the output weight matrix")
                candidates = sample_lns_label(true_ids, tables, weights, self.rng)
            else:
                candidates, fell_back = sample_lns_embedding(
                    embedding, true_ids, tables, self.rng, n, self.num_classes
                )
                if fell_back:
                    self.stats.fallbacks += 1
                    log.debug("degenerate embedding: fell back to uniform negatives")
        if candidates.size < n:
            self.stats.padded += 1
        active = finalize_active_set(candidates, true_ids, n, self.num_classes, self.rng)
        return self._with_adjust(active)

    def _finish(self, true_ids, negs) -> ActiveSet:
        return self._with_adjust(ActiveSet.of(true_ids, negs))

    def _with_adjust(self, active: ActiveSet) -> ActiveSet:
        if self.logit_correction:
            active.logit_adjust = self._expected_count_log(active)
        return active

    def _expected_count_log(self, active: ActiveSet) -> np.ndarray:
        """log E[count] per active id under the scheme's proposal, for the
        standard sampled-softmax logit correction. True labels are always
        included (probability one), so their adjustment is zero."""
        n = self.kind.n_samples
        name = self.kind.name
        adjust = np.zeros(len(active))
        negs = ~active.true_mask
        n_true = int(active.true_mask.sum())
        if name in ("uniform", "lns_label", "lns_embedding"):
            # retrieval probabilities for the hash schemes are input- and
            # parameter-dependent; after size normalization the draw is
            # uniform over the retrieved pool, so the uniform proposal is
            # the tractable surrogate shared by all three
            q = n / max(self.num_classes - n_true, 1)
            adjust[negs] = np.log(q)
        elif name == "log_uniform":
            mass = log_uniform_mass(self.num_classes)
            ranks = active.ids[negs] if self.classes_by_rank is None else np.searchsorted(
                np.argsort(self.classes_by_rank), active.ids[negs]
            )
            p = mass[ranks]
            adjust[negs] = np.log1p(-np.power(1.0 - p, n))
        elif name == "frequency":
            p = self.freq.probabilities[active.ids[negs]]
            adjust[negs] = np.log1p(-np.power(1.0 - np.minimum(p, 1.0 - 1e-12), n))
        return adjust
