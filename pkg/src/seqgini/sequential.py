"""Pilot sizing and the purely sequential and two-stage cluster procedures.

Both engines pull cluster draws from a *cluster source*: any object with

    draw(stratum: int, count: int) -> list[ClusterDraw]
    capacity(stratum: int) -> int

``design.FrameSource`` samples a synthetic frame; ``survey.ReplaySource``
replays ingested survey clusters in a seeded order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .design import PopulationFrame, WeightedSample, base_weight
from .errors import ParameterError, SourceError
from .estimators import (cdf_and_tail, confidence_interval, gini_from_sorted, has_ties,
                         scores_from_sorted, variance_from_scores, z_quantile)

PURELY_SEQUENTIAL = "purely-sequential"
TWO_STAGE = "two-stage"


@dataclass(frozen=True)
class StoppingConfig:
    alpha: float
    omega: float
    delta: float
    allocation: tuple
    caps: tuple
    m_prime: int = 1
    k: int = 2

    def __post_init__(self):
        object.__setattr__(self, "allocation", tuple(float(a) for a in self.allocation))
        object.__setattr__(self, "caps", tuple(int(h) for h in self.caps))
        z_quantile(self.alpha)
        if not self.omega > 0:
            raise ParameterError("omega must be positive")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if self.m_prime < 1 or self.k < 1:
            raise ParameterError("m_prime and k must be at least 1")
        if len(self.allocation) != len(self.caps) or not self.allocation:
            raise ParameterError("allocation and caps must have one entry per stratum")
        if any(a <= 0 for a in self.allocation) or abs(math.fsum(self.allocation) - 1.0) > 1e-12:
            raise ParameterError(f"allocation {self.allocation} must be positive and sum to 1")
        if min(self.caps) < 2:
            raise ParameterError("every stratum cap must be at least 2")

    @classmethod
    def for_frame(cls, frame: PopulationFrame, alpha=0.05, omega=0.015, delta=2.0,
                  m_prime=1, k=2) -> "StoppingConfig":
        return cls(alpha, omega, delta, frame.allocation, frame.strata_sizes, m_prime, k)

    @property
    def H(self) -> int:
        return sum(self.caps)

    @property
    def S(self) -> int:
        return len(self.caps)

    @property
    def scale(self) -> float:
        """``4 z^2 / omega^2``."""
        z = z_quantile(self.alpha)
        return 4.0 * z * z / self.omega ** 2


class Pilot(NamedTuple):
    m: int          # single total formula
    m_s: tuple      # per-stratum formula; the engines use sum(m_s)

    @property
    def realized(self) -> int:
        return sum(self.m_s)


def pilot_sizes(alpha, omega, delta, allocation, caps) -> Pilot:
    if not omega > 0 or not delta > 0:
        raise ParameterError("omega and delta must be positive")
    base = (2.0 * z_quantile(alpha) / omega) ** (2.0 / (delta + 1.0))
    H = sum(caps)
    m = min(H, max(2, math.ceil(base)))
    m_s = tuple(min(h, max(2, math.ceil(base * a))) for a, h in zip(allocation, caps))
    return Pilot(m, m_s)


class StopCheck(NamedTuple):
    stop: bool
    C_hat: float
    C_s: tuple
    deficient: tuple


def stopping_check(n, n_s, v2, config: StoppingConfig) -> StopCheck:
    """Stop iff ``n >= C_hat`` and ``n_s >= C_hat a_s`` for every stratum."""
    C_hat = config.scale * (v2 + n ** (-config.delta))
    C_s = tuple(C_hat * a for a in config.allocation)
    deficient = tuple(s for s, (m, c) in enumerate(zip(n_s, C_s)) if m < c)
    return StopCheck(n >= C_hat and not deficient, C_hat, C_s, deficient)


def two_stage_final_size(t, v2_t, config: StoppingConfig) -> tuple:
    """``Q = min(H, max(t, ceil(4 z^2 V_t^2 / omega^2)))`` and per-stratum ``Q_s``."""
    Q = min(config.H, max(t, math.ceil(config.scale * v2_t)))
    Q_s = tuple(min(h, math.ceil(Q * a)) for a, h in zip(config.allocation, config.caps))
    return Q, Q_s


@dataclass(eq=False)
class SequentialOutcome:
    procedure: str
    final_n: int
    n_s: tuple
    pilot: int
    pilot_s: tuple
    g_hat: float
    mu_hat: float
    v2: float
    alpha: float
    ci_low: float
    ci_high: float
    width: float
    hit_cap: bool
    trajectory: list = field(default_factory=list)     # (n, V^2, target, n_s) per check
    sample: Optional[WeightedSample] = None

    @property
    def se(self) -> float:
        return math.sqrt(self.v2 / self.final_n)


class SampleAccumulator:
    """Growing sample kept sorted by income.

    Weights depend on draws only through ``1/n_s`` per stratum, so each
    household stores ``n_s * W`` in append-only buffers; a sorted copy of the
    incomes and the matching permutation are updated by merging new draws in
    place rather than re-sorting.
    """

    def __init__(self, S: int):
        self.S = S
        self.n_s = np.zeros(S, dtype=np.int64)
        self.draws = []
        self._draw_stratum = []
        self._raw = {"base": [], "stratum": [], "draw": [], "sub": []}
        self._cols = None
        self.x = np.empty(0)
        self.order = np.empty(0, dtype=np.int64)
        self._size = 0

    @property
    def n(self) -> int:
        return int(self.n_s.sum())

    def add(self, draws):
        xs = []
        raw = self._raw
        for d in draws:
            j = len(self.draws)
            self.draws.append(d)
            self._draw_stratum.append(d.stratum)
            self.n_s[d.stratum] += 1
            for g in d.groups:
                m = len(g.incomes)
                if m == 0:
                    continue
                xs.append(g.incomes)
                raw["base"].append(np.full(m, base_weight(d, g)))
                raw["stratum"].append(np.full(m, d.stratum))
                raw["draw"].append(np.full(m, j))
                raw["sub"].append(np.full(m, g.substratum))
        if not xs:
            return
        self._cols = None
        x = np.concatenate(xs).astype(float)
        idx = np.argsort(x, kind="stable")
        x = x[idx]
        pos = np.searchsorted(self.x, x, side="right")
        self.x = np.insert(self.x, pos, x)
        self.order = np.insert(self.order, pos, idx + self._size)
        self._size += len(x)

    def _columns(self):
        if self._cols is None:
            cols = {k: np.concatenate(v) for k, v in self._raw.items()}
            for k, v in cols.items():
                self._raw[k] = [v]
            self._cols = {k: v[self.order] for k, v in cols.items()}
        return self._cols

    def weights(self):
        cols = self._columns()
        W = cols["base"] / self.n_s[cols["stratum"]]
        return W, W / W.sum()

    def estimate(self):
        """``(g_hat, mu_hat, V^2)`` on everything accumulated so far."""
        _, w = self.weights()
        mu, wx, F, T = cdf_and_tail(self.x, w, has_ties(self.x))
        g = gini_from_sorted(mu, wx, F)
        draw_stratum = np.asarray(self._draw_stratum, dtype=np.int64)
        u = scores_from_sorted(self.x, w, self._columns()["draw"], len(draw_stratum), g, mu, F, T)
        v2, _ = variance_from_scores(u, draw_stratum, self.n_s)
        return g, mu, v2

    def to_sample(self) -> WeightedSample:
        W, w = self.weights()
        cols = self._columns()
        return WeightedSample(self.x.copy(), W, w, cols["stratum"].copy(), cols["draw"].copy(),
                              cols["sub"].copy(), self.n_s.copy(),
                              np.asarray(self._draw_stratum, dtype=np.int64))


def _pull(source, stratum: int, count: int) -> list:
    if count <= 0:
        return []
    got = source.draw(stratum, count)
    if len(got) < count:
        raise SourceError(f"stratum {stratum}: requested {count} clusters, source gave {len(got)}")
    return got


def _check_source(source, config):
    for s, h in enumerate(config.caps):
        if source.capacity(s) < h:
            raise SourceError(f"stratum {s}: cap {h} exceeds the source's {source.capacity(s)} clusters")


def _outcome(procedure, acc, pilot_s, config, hit_cap, trajectory, keep_sample, est=None):
    g, mu, v2 = est if est is not None else acc.estimate()
    lo, hi, width = confidence_interval(g, v2, acc.n, config.alpha)
    return SequentialOutcome(
        procedure=procedure, final_n=acc.n, n_s=tuple(int(m) for m in acc.n_s),
        pilot=sum(pilot_s), pilot_s=tuple(pilot_s), g_hat=g, mu_hat=mu, v2=v2,
        alpha=config.alpha, ci_low=lo, ci_high=hi, width=width, hit_cap=hit_cap,
        trajectory=trajectory, sample=acc.to_sample() if keep_sample else None,
    )


def run_purely_sequential(source, config: StoppingConfig, keep_sample=False) -> SequentialOutcome:
    """Pilot, then add ``m_prime`` clusters to every deficient stratum until
    ``n >= C_hat`` and each ``n_s >= C_hat a_s``, or the deficient strata are
    all at their caps."""
    _check_source(source, config)
    pilot = pilot_sizes(config.alpha, config.omega, config.delta, config.allocation, config.caps)
    acc = SampleAccumulator(config.S)
    acc.add([d for s, m in enumerate(pilot.m_s) for d in _pull(source, s, m)])
    trajectory = []
    hit_cap = False
    while True:
        est = acc.estimate()
        check = stopping_check(acc.n, acc.n_s, est[2], config)
        trajectory.append((acc.n, est[2], check.C_hat, tuple(int(m) for m in acc.n_s)))
        if check.stop:
            break
        # n < C_hat with no deficient stratum only happens through rounding in sum(a_s)
        wanting = check.deficient or tuple(range(config.S))
        grow = [s for s in wanting if acc.n_s[s] < config.caps[s]]
        if not grow:
            hit_cap = True
            break
        acc.add([d for s in grow
                 for d in _pull(source, s, min(config.m_prime, config.caps[s] - int(acc.n_s[s])))])
    return _outcome(PURELY_SEQUENTIAL, acc, pilot.m_s, config, hit_cap, trajectory, keep_sample, est)


def run_two_stage(source, config: StoppingConfig, keep_sample=False) -> SequentialOutcome:
    """Pilot of ``t = sum(m_s)``, one variance estimate, one top-up to ``Q_s``."""
    _check_source(source, config)
    pilot = pilot_sizes(config.alpha, config.omega, config.delta, config.allocation, config.caps)
    acc = SampleAccumulator(config.S)
    acc.add([d for s, m in enumerate(pilot.m_s) for d in _pull(source, s, m)])
    t = acc.n
    _, _, v2_t = acc.estimate()
    Q, Q_s = two_stage_final_size(t, v2_t, config)
    wanted = config.scale * v2_t
    hit_cap = wanted > config.H or any(
        math.ceil(Q * a) > h for a, h in zip(config.allocation, config.caps))
    trajectory = [(t, v2_t, wanted, tuple(int(m) for m in acc.n_s))]
    acc.add([d for s, q in enumerate(Q_s) for d in _pull(source, s, q - int(acc.n_s[s]))])
    est = acc.estimate()
    trajectory.append((acc.n, est[2], config.scale * est[2], tuple(int(m) for m in acc.n_s)))
    return _outcome(TWO_STAGE, acc, pilot.m_s, config, hit_cap, trajectory, keep_sample, est)
