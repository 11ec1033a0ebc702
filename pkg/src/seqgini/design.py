"""Sampling frame, two-phase cluster draw and household weights.

A frame holds S strata, each split into clusters, each cluster split into
an affluent (1) and a non-affluent (2) sub-stratum.  Clusters are drawn
with probability proportional to household count, with replacement; inside
a drawn cluster ``k`` households are taken from each sub-stratum by simple
random sampling without replacement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import FrameError, ParameterError

AFFLUENT, NON_AFFLUENT = 1, 2


# --------------------------------------------------------------------------
# income laws

_FAMILIES = ("gamma", "pareto", "lognormal")


@dataclass(frozen=True)
class IncomeLaw:
    """Household income distribution.

    gamma(shape, scale), pareto(x_m, a) with density a x_m^a / x^(a+1) on
    [x_m, inf), lognormal(meanlog, sdlog).
    """

    family: str
    params: tuple

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if fam not in _FAMILIES:
            raise ParameterError(f"unsupported income family {self.family!r}")
        if len(self.params) != 2 or not all(np.isfinite(self.params)):
            raise ParameterError(f"{fam} takes two finite parameters, got {self.params}")
        a, b = self.params
        if fam == "gamma" and (a <= 0 or b <= 0):
            raise ParameterError("gamma shape and scale must be positive")
        if fam == "pareto" and (a <= 0 or b <= 1):
            raise ParameterError("pareto needs x_m > 0 and tail index a > 1")
        if fam == "lognormal" and b <= 0:
            raise ParameterError("lognormal sdlog must be positive")

    @classmethod
    def parse(cls, text: str) -> "IncomeLaw":
        """Parse ``family:p1,p2`` such as ``gamma:2.649,0.84``."""
        try:
            fam, rest = text.split(":", 1)
            params = tuple(float(v) for v in rest.split(","))
        except ValueError:
            raise ParameterError(f"cannot parse distribution {text!r}; expected family:p1,p2")
        return cls(fam.strip(), params)

    def __str__(self):
        return "%s(%s)" % (self.family, ",".join("%g" % p for p in self.params))

    @property
    def frozen(self):
        a, b = self.params
        if self.family == "gamma":
            return stats.gamma(a, scale=b)
        if self.family == "pareto":
            return stats.pareto(b, scale=a)
        return stats.lognorm(b, scale=np.exp(a))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        a, b = self.params
        if self.family == "gamma":
            return rng.gamma(a, b, size)
        if self.family == "pareto":
            return a * (1.0 + rng.pareto(b, size))
        return rng.lognormal(a, b, size)

    def sample_truncated(self, rng, size, threshold, upper: bool) -> np.ndarray:
        """Draws conditioned on x >= threshold (upper) or x < threshold."""
        law = self.frozen
        p = float(law.cdf(threshold))
        lo, hi = (p, 1.0) if upper else (0.0, p)
        u = rng.uniform(lo, hi, size)
        x = law.ppf(u)
        if upper:
            return np.maximum(x, threshold)
        return np.minimum(x, np.nextafter(threshold, -np.inf))


@dataclass(frozen=True)
class PopulationSpec:
    """Recipe for a synthetic sampling frame.

    Each cluster's household total is uniform on
    ``[2 * household_range[0], 2 * household_range[1]]``.  ``dispersion``
    in [0, 1) controls how strongly clusters differ in internal inequality
    (0 gives i.i.d. households); it rearranges households between clusters
    and never changes the pooled incomes.
    """

    law: IncomeLaw
    strata_sizes: tuple = (750, 750)
    household_range: tuple = (50, 150)
    q_aff: float = 0.55
    k: int = 2
    dispersion: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "strata_sizes", tuple(int(h) for h in self.strata_sizes))
        object.__setattr__(self, "household_range", tuple(int(v) for v in self.household_range))
        if not self.strata_sizes:
            raise FrameError("at least one stratum is required")
        if min(self.strata_sizes) < 2:
            raise FrameError(f"every stratum needs at least 2 clusters, got {self.strata_sizes}")
        lo, hi = self.household_range
        if not (1 <= lo <= hi):
            raise ParameterError(f"bad household range {self.household_range}")
        if not 0.0 < self.q_aff < 1.0:
            raise ParameterError("q_aff must lie in (0, 1)")
        if self.k < 1:
            raise ParameterError("k must be at least 1")
        if not 0.0 <= self.dispersion < 1.0:
            raise ParameterError("dispersion must lie in [0, 1)")

    @property
    def allocation(self) -> tuple:
        H = sum(self.strata_sizes)
        return tuple(h / H for h in self.strata_sizes)

    @property
    def H(self) -> int:
        return sum(self.strata_sizes)


# --------------------------------------------------------------------------
# frame

@dataclass(frozen=True, eq=False)
class StratumFrame:
    """One stratum: per-cluster sub-stratum counts and optional incomes.

    ``counts[c, b]`` is the household count of sub-stratum ``b + 1`` in
    cluster ``c``.  For generated frames ``incomes`` holds every household,
    laid out cluster by cluster with the affluent block first;
    ``offsets[c, b]`` is where each block starts.  Real frames carry counts
    only.
    """

    stratum_id: object
    cluster_ids: tuple
    counts: np.ndarray
    incomes: Optional[np.ndarray] = None
    offsets: Optional[np.ndarray] = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[1] != 2:
            raise FrameError("counts must have shape (clusters, 2)")
        if counts.shape[0] == 0:
            raise FrameError(f"stratum {self.stratum_id!r} has no clusters")
        if np.any(counts < 0):
            raise FrameError(f"negative household count in stratum {self.stratum_id!r}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "cluster_ids", tuple(self.cluster_ids))
        if len(self.cluster_ids) != counts.shape[0]:
            raise FrameError("cluster_ids and counts disagree in length")
        sizes = counts.sum(axis=1)
        sizes.setflags(write=False)
        object.__setattr__(self, "_sizes", sizes)
        object.__setattr__(self, "_total", int(sizes.sum()))

    @property
    def n_clusters(self) -> int:
        return self.counts.shape[0]

    @property
    def cluster_sizes(self) -> np.ndarray:
        return self._sizes

    @property
    def total_households(self) -> int:
        return self._total

    def substratum_incomes(self, cluster: int, substratum: int) -> np.ndarray:
        if self.incomes is None:
            raise FrameError("frame carries household counts only")
        start = self.offsets[cluster, substratum - 1]
        return self.incomes[start:start + self.counts[cluster, substratum - 1]]

    def cluster_incomes(self, cluster: int) -> np.ndarray:
        if self.incomes is None:
            raise FrameError("frame carries household counts only")
        start = self.offsets[cluster, 0]
        return self.incomes[start:start + self._sizes[cluster]]


@dataclass(frozen=True, eq=False)
class PopulationFrame:
    strata: tuple

    def __post_init__(self):
        object.__setattr__(self, "strata", tuple(self.strata))
        if not self.strata:
            raise FrameError("frame has no strata")

    @property
    def S(self) -> int:
        return len(self.strata)

    @property
    def strata_sizes(self) -> tuple:
        return tuple(st.n_clusters for st in self.strata)

    @property
    def H(self) -> int:
        return sum(self.strata_sizes)

    @property
    def allocation(self) -> tuple:
        H = self.H
        return tuple(h / H for h in self.strata_sizes)

    @property
    def stratum_ids(self) -> tuple:
        return tuple(st.stratum_id for st in self.strata)

    @property
    def has_incomes(self) -> bool:
        return all(st.incomes is not None for st in self.strata)

    def all_incomes(self) -> np.ndarray:
        return np.concatenate([st.incomes for st in self.strata])


def _couple(x, cluster, side, eta, rho, rng, sign):
    """Reassign the incomes of ``side`` households among their clusters.

    Households are matched to slots by rank, the slot key being
    ``sign * sqrt(rho) * eta[cluster] + sqrt(1 - rho) * noise``: clusters
    with large ``eta`` get richer affluent (sign +1) and poorer
    non-affluent (sign -1) households.
    """
    idx = np.flatnonzero(side)
    key = sign * np.sqrt(rho) * eta[cluster[idx]] + np.sqrt(1.0 - rho) * rng.standard_normal(idx.size)
    x[idx[np.argsort(key)]] = np.sort(x[idx])


def generate_pseudo_population(spec: PopulationSpec, seed) -> PopulationFrame:
    """Build a synthetic frame; a deterministic function of ``(spec, seed)``.

    Household incomes are i.i.d. draws from ``spec.law``.  Those at or above
    the pooled ``q_aff`` quantile form sub-stratum 1.  Any sub-stratum with
    fewer than ``k`` households is topped up from the law truncated to that
    side of the threshold.  Finally, with ``dispersion > 0``, incomes are
    permuted between clusters within each stratum and sub-stratum type, so
    the pooled incomes and every sub-stratum count are left unchanged.
    """
    rng = np.random.default_rng(seed)
    lo, hi = spec.household_range
    sizes = [rng.integers(2 * lo, 2 * hi, size=h, endpoint=True) for h in spec.strata_sizes]
    incomes = [spec.law.sample(rng, int(m.sum())) for m in sizes]
    threshold = float(np.quantile(np.concatenate(incomes), spec.q_aff))

    strata = []
    for s, (m, x) in enumerate(zip(sizes, incomes)):
        H_s = len(m)
        cluster = np.repeat(np.arange(H_s), m)
        key = 2 * cluster + (x < threshold)
        counts = np.bincount(key, minlength=2 * H_s)
        short = np.flatnonzero(counts < spec.k)
        if short.size:
            pads, pad_keys = [], []
            for cell in short:
                need = spec.k - counts[cell]
                pads.append(spec.law.sample_truncated(rng, need, threshold, upper=cell % 2 == 0))
                pad_keys.append(np.full(need, cell))
            x = np.concatenate([x] + pads)
            key = np.concatenate([key] + pad_keys)
            cluster = key // 2
            counts = np.bincount(key, minlength=2 * H_s)
        if spec.dispersion > 0:
            eta = rng.standard_normal(H_s)
            affluent = key % 2 == 0
            _couple(x, cluster, affluent, eta, spec.dispersion, rng, +1)
            _couple(x, cluster, ~affluent, eta, spec.dispersion, rng, -1)
        # small unsigned keys get numpy's radix sort
        kdt = np.uint16 if 2 * H_s <= np.iinfo(np.uint16).max else np.int64
        x = x[np.argsort(key.astype(kdt), kind="stable")]
        counts = counts.reshape(H_s, 2)
        offsets = np.concatenate(([0], np.cumsum(counts.ravel())[:-1])).reshape(H_s, 2)
        x.setflags(write=False)
        strata.append(StratumFrame(s + 1, tuple(range(1, H_s + 1)), counts, x, offsets))
    return PopulationFrame(tuple(strata))


# --------------------------------------------------------------------------
# draws

@dataclass(frozen=True, eq=False)
class HouseholdGroup:
    """Households selected from one sub-stratum (or a whole cluster).

    ``size`` is the group's household count in the frame; the selection
    probability of each member is ``len(incomes) / size``.
    """

    substratum: int
    size: int
    incomes: np.ndarray
    indices: Optional[np.ndarray] = None
    take_all: bool = False


@dataclass(frozen=True, eq=False)
class ClusterDraw:
    stratum: int
    cluster: int
    draw_index: int
    cluster_size: int
    stratum_size: int
    groups: tuple

    def pps_probability(self, n_s: int) -> float:
        return n_s * self.cluster_size / self.stratum_size


def _pps_cdf(stratum: StratumFrame) -> np.ndarray:
    sizes = stratum.cluster_sizes
    if sizes.size == 0:
        raise FrameError(f"stratum {stratum.stratum_id!r} is empty")
    if np.any(sizes <= 0):
        raise FrameError(f"stratum {stratum.stratum_id!r} has a cluster with no households")
    cdf = np.cumsum(sizes, dtype=float)
    return cdf / cdf[-1]


def _pps_indices(cdf, count, rng) -> np.ndarray:
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    return np.minimum(idx, len(cdf) - 1)


def pps_sample_clusters(frame: PopulationFrame, stratum: int, n_s: int, rng) -> list:
    """Draw ``n_s`` clusters from stratum index ``stratum`` (0-based), PPSWR.

    Returns ``(cluster_id, p)`` pairs with ``p = n_s * M_c / sum(M)``, which
    may exceed one for a dominant cluster.
    """
    if n_s < 1:
        raise ParameterError("n_s must be at least 1")
    st = frame.strata[stratum]
    idx = _pps_indices(_pps_cdf(st), n_s, rng)
    total = st.total_households
    return [(st.cluster_ids[i], n_s * int(st.cluster_sizes[i]) / total) for i in idx]


def srs_households(frame: PopulationFrame, stratum: int, cluster: int,
                   substratum: int, k: int, rng):
    """Indices of ``k`` households drawn without replacement.

    Returns ``(indices, take_all)``; when the sub-stratum holds ``k`` or
    fewer households every one of them is returned and ``take_all`` is set.
    """
    if k < 1:
        raise ParameterError("k must be at least 1")
    M = int(frame.strata[stratum].counts[cluster, substratum - 1])
    return _srs(M, k, rng)


def _srs(M, k, rng):
    if M <= 0:
        raise FrameError("cannot sample from an empty sub-stratum")
    if M <= k:
        return np.arange(M), M < k
    # the k smallest of M uniforms index a uniformly random k-subset
    return np.sort(np.argpartition(rng.random(M), k - 1)[:k]), False


class FrameSource:
    """Cluster source drawing from a frame that carries incomes.

    Cluster selection and household selection use separate per-stratum
    streams, so two sources built from the same seed select the same
    clusters even when ``substratify`` differs.  With
    ``substratify=False`` each cluster is treated as one group and ``2k``
    households are drawn from it.
    """

    def __init__(self, frame: PopulationFrame, k: int, seed, substratify: bool = True):
        if not frame.has_incomes:
            raise FrameError("FrameSource needs a frame with household incomes")
        if k < 1:
            raise ParameterError("k must be at least 1")
        self.frame = frame
        self.k = k
        self.substratify = substratify
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        # built from the key rather than ss.spawn(), which would advance ss
        children = [np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,))
                    for i in range(2 * frame.S)]
        self._cluster_rng = [np.random.default_rng(c) for c in children[:frame.S]]
        self._household_rng = [np.random.default_rng(c) for c in children[frame.S:]]
        self._cdf = [_pps_cdf(st) for st in frame.strata]
        self._next = [0] * frame.S

    def capacity(self, stratum: int) -> int:
        return self.frame.strata[stratum].n_clusters

    def draw(self, stratum: int, count: int) -> list:
        if count <= 0:
            return []
        st = self.frame.strata[stratum]
        rng = self._household_rng[stratum]
        idx = _pps_indices(self._cdf[stratum], count, self._cluster_rng[stratum])
        out = []
        for c in idx:
            c = int(c)
            if self.substratify:
                groups = []
                for b in (AFFLUENT, NON_AFFLUENT):
                    M = int(st.counts[c, b - 1])
                    if M == 0:
                        continue
                    sel, take_all = _srs(M, self.k, rng)
                    groups.append(HouseholdGroup(b, M, st.substratum_incomes(c, b)[sel], sel, take_all))
            else:
                M = int(st.cluster_sizes[c])
                sel, take_all = _srs(M, 2 * self.k, rng)
                groups = [HouseholdGroup(0, M, st.cluster_incomes(c)[sel], sel, take_all)]
            out.append(ClusterDraw(stratum, c, self._next[stratum], int(st.cluster_sizes[c]),
                                   st.total_households, tuple(groups)))
            self._next[stratum] += 1
        return out


# --------------------------------------------------------------------------
# weights

@dataclass(frozen=True, eq=False)
class WeightedSample:
    """Flat view of a realized draw.

    ``stratum`` holds 0-based stratum indices and ``draw`` a cluster-draw
    id that is unique across strata.
    """

    x: np.ndarray
    W: np.ndarray
    w: np.ndarray
    stratum: np.ndarray
    draw: np.ndarray
    substratum: np.ndarray
    n_s: np.ndarray
    draw_stratum: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return int(self.n_s.sum())

    @property
    def W_total(self) -> float:
        return float(self.W.sum())

    def __len__(self):
        return len(self.x)

    def scaled(self, c: float) -> "WeightedSample":
        return WeightedSample(self.x * c, self.W, self.w, self.stratum, self.draw,
                              self.substratum, self.n_s, self.draw_stratum)


def base_weight(draw: ClusterDraw, group: HouseholdGroup) -> float:
    """``sum(M) * M_group / (M_cluster * selected)``; divide by n_s for W."""
    return draw.stratum_size * group.size / (draw.cluster_size * len(group.incomes))


def compute_weights(frame: PopulationFrame, draws: Sequence[ClusterDraw]) -> WeightedSample:
    """Raw and normalized weights for every selected household.

    Draws are numbered in the order given; ``n_s`` counts draws per stratum.
    """
    n_s = np.zeros(frame.S, dtype=np.int64)
    for d in draws:
        n_s[d.stratum] += 1
    xs, bs, ss, ds, subs = [], [], [], [], []
    draw_stratum = np.empty(len(draws), dtype=np.int64)
    for j, d in enumerate(draws):
        draw_stratum[j] = d.stratum
        for g in d.groups:
            m = len(g.incomes)
            if m == 0:
                continue
            xs.append(g.incomes)
            bs.append(np.full(m, base_weight(d, g) / n_s[d.stratum]))
            ss.append(np.full(m, d.stratum))
            ds.append(np.full(m, j))
            subs.append(np.full(m, g.substratum))
    if not xs:
        raise FrameError("no households selected")
    W = np.concatenate(bs)
    total = W.sum()
    if not total > 0:
        raise FrameError("total weight is zero")
    return WeightedSample(
        x=np.concatenate(xs).astype(float), W=W, w=W / total,
        stratum=np.concatenate(ss), draw=np.concatenate(ds),
        substratum=np.concatenate(subs), n_s=n_s, draw_stratum=draw_stratum,
    )


def sample_from_arrays(x, w, stratum=None, draw=None, n_strata=None) -> WeightedSample:
    """Wrap plain arrays as a sample; weights are renormalized.

    Without labels every observation is its own draw in a single stratum.
    """
    x = np.asarray(x, dtype=float)
    W = np.asarray(w, dtype=float)
    if stratum is None:
        stratum = np.zeros(len(x), dtype=np.int64)
    if draw is None:
        draw = np.arange(len(x))
    stratum = np.asarray(stratum, dtype=np.int64)
    draw = np.asarray(draw, dtype=np.int64)
    n_draws = int(draw.max()) + 1 if len(draw) else 0
    draw_stratum = np.zeros(n_draws, dtype=np.int64)
    draw_stratum[draw] = stratum
    S = n_strata or (int(stratum.max()) + 1 if len(stratum) else 1)
    n_s = np.bincount(draw_stratum, minlength=S)
    return WeightedSample(x, W, W / W.sum(), stratum, draw,
                          np.zeros(len(x), dtype=np.int64), n_s, draw_stratum)
