"""Seeded replication studies: coverage, final sizes, widths, the xi^2 oracle
and the with/without sub-stratum comparison.

Seeding: replication ``r`` of a study with root seed ``seed`` uses
``SeedSequence(seed, spawn_key=(stream, r))``, where ``stream`` is 0 for
engine replications, 1 for the xi^2 oracle and 2 for fixed-n comparisons.
That sequence spawns one child for the pseudo-population and one for the
cluster source, so results never depend on how replications are spread
over workers.
"""
from __future__ import annotations

import math
import multiprocessing as mp
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln, ndtr

from .design import FrameSource, IncomeLaw, PopulationSpec, compute_weights, generate_pseudo_population
from .errors import ParameterError, SeqGiniError
from .estimators import estimate, optimal_C, split_clusters
from .sequential import (PURELY_SEQUENTIAL, TWO_STAGE, StoppingConfig, pilot_sizes,
                         run_purely_sequential, run_two_stage)

REPLICATION_STREAM, ORACLE_STREAM, FIXED_STREAM = 0, 1, 2

ENGINES = {PURELY_SEQUENTIAL: run_purely_sequential, TWO_STAGE: run_two_stage}


def analytic_gini(law: IncomeLaw) -> float:
    a, b = law.params
    if law.family == "lognormal":
        return float(2.0 * ndtr(b / math.sqrt(2.0)) - 1.0)
    if law.family == "pareto":
        return 1.0 / (2.0 * b - 1.0)
    if law.family == "gamma":
        return float(np.exp(gammaln(a + 0.5) - gammaln(a + 1.0)) / math.sqrt(math.pi))
    raise ParameterError(f"no closed-form Gini for {law.family!r}")


def rep_seeds(seed, stream: int, r: int):
    """(population seed, source seed) for replication ``r``."""
    pop, src = np.random.SeedSequence(seed, spawn_key=(stream, r)).spawn(2)
    return pop, src


def stopping_config(spec: PopulationSpec, alpha=0.05, omega=0.015, delta=2.0, m_prime=1) -> StoppingConfig:
    return StoppingConfig(alpha, omega, delta, spec.allocation, spec.strata_sizes, m_prime, spec.k)


# --------------------------------------------------------------------------
# xi^2 oracle

@dataclass(frozen=True)
class OracleSet:
    law: str
    analytic_gini: float
    xi2: float
    xi2_se: float
    n_large: int
    reps: int
    alpha: float
    omega: float
    C: int

    def C_band(self, k_se: float = 2.0) -> tuple:
        """C at ``xi2 -/+ k_se * se``; the honest spread of the oracle."""
        lo = max(self.xi2 - k_se * self.xi2_se, 1e-300)
        return optimal_C(lo, self.alpha, self.omega), optimal_C(self.xi2 + k_se * self.xi2_se, self.alpha, self.omega)


def _fixed_draw(frame, n, src_seed, k, substratify, alpha):
    src = FrameSource(frame, k, src_seed, substratify)
    n_s = split_clusters(n, frame.allocation)
    draws = [d for s, m in enumerate(n_s) for d in src.draw(s, m)]
    return estimate(compute_weights(frame, draws), alpha)


def _one_oracle(task):
    spec, n_large, seed, r, substratify, alpha = task
    pop, src = rep_seeds(seed, ORACLE_STREAM, r)
    frame = generate_pseudo_population(spec, pop)
    return _fixed_draw(frame, n_large, src, spec.k, substratify, alpha).v_n2


def estimate_xi2(spec: PopulationSpec, n_large: int = 2000, reps: int = 50, seed=0,
                 alpha: float = 0.05, omega: float = 0.015, substratify: bool = True,
                 workers: int = 1) -> OracleSet:
    """Mean of ``V^2`` at ``n_large`` cluster draws over ``reps`` fresh frames."""
    if n_large < 1000:
        raise ParameterError("n_large must be at least 1000 clusters")
    if reps < 2:
        raise ParameterError("the oracle needs at least 2 frames for its standard error")
    tasks = [(spec, n_large, seed, r, substratify, alpha) for r in range(reps)]
    v2 = np.array(_map(_one_oracle, tasks, workers))
    xi2 = float(v2.mean())
    se = float(v2.std(ddof=1) / math.sqrt(reps))
    return OracleSet(str(spec.law), analytic_gini(spec.law), xi2, se, n_large, reps,
                     alpha, omega, optimal_C(xi2, alpha, omega))


# --------------------------------------------------------------------------
# replications

@dataclass(frozen=True)
class ReplicationRecord:
    rep: int
    final_n: int
    pilot: int
    g_hat: float
    v2: float
    ci_low: float
    ci_high: float
    width: float
    covered: bool
    exceeded: bool
    hit_cap: bool


def _se_prop(p, R):
    return math.sqrt(p * (1.0 - p) / R)


def _sd(a):
    return float(np.std(a, ddof=1)) if len(a) > 1 else 0.0


@dataclass(frozen=True, eq=False)
class MonteCarloReport:
    procedure: str
    law: str
    design: str
    alpha: float
    omega: float
    delta: float
    pilot: int
    analytic_gini: float
    xi2: float
    C: int
    reps: int
    mean_final_size: float
    sd_final_size: float
    mean_g_hat: float
    ratio_size_to_C: float
    mean_v2_over_xi2: float
    coverage: float
    coverage_se: float
    mean_width: float
    sd_width: float
    exceed_rate: float
    exceed_se: float
    capped: int
    records: tuple = field(default=(), repr=False)

    @classmethod
    def from_records(cls, records, procedure, law, design, config: StoppingConfig,
                     gini: float, oracle: Optional[OracleSet]) -> "MonteCarloReport":
        R = len(records)
        if R == 0:
            raise ParameterError("no replications to aggregate")
        n = np.array([r.final_n for r in records], dtype=float)
        v2 = np.array([r.v2 for r in records])
        width = np.array([r.width for r in records])
        cov = sum(r.covered for r in records) / R
        exc = sum(r.exceeded for r in records) / R
        xi2 = oracle.xi2 if oracle is not None else float("nan")
        C = oracle.C if oracle is not None else 0
        pilot = pilot_sizes(config.alpha, config.omega, config.delta, config.allocation, config.caps)
        return cls(
            procedure=procedure, law=law, design=design, alpha=config.alpha, omega=config.omega,
            delta=config.delta, pilot=pilot.realized, analytic_gini=gini, xi2=xi2, C=C, reps=R,
            mean_final_size=float(n.mean()), sd_final_size=_sd(n),
            mean_g_hat=float(np.mean([r.g_hat for r in records])),
            ratio_size_to_C=float(n.mean() / C) if C else float("nan"),
            mean_v2_over_xi2=float(v2.mean() / xi2),
            coverage=cov, coverage_se=_se_prop(cov, R),
            mean_width=float(width.mean()), sd_width=_sd(width),
            exceed_rate=exc, exceed_se=_se_prop(exc, R),
            capped=sum(r.hit_cap for r in records), records=tuple(records),
        )


def _one_replication(task):
    procedure, spec, config, seed, r, substratify, gini = task
    pop, src = rep_seeds(seed, REPLICATION_STREAM, r)
    try:
        frame = generate_pseudo_population(spec, pop)
        out = ENGINES[procedure](FrameSource(frame, config.k, src, substratify), config)
    except SeqGiniError as exc:
        raise type(exc)(f"replication {r}: {exc}") from exc
    return ReplicationRecord(
        rep=r, final_n=out.final_n, pilot=out.pilot, g_hat=out.g_hat, v2=out.v2,
        ci_low=out.ci_low, ci_high=out.ci_high, width=out.width,
        covered=bool(out.ci_low < gini < out.ci_high),
        exceeded=bool(out.width > config.omega), hit_cap=out.hit_cap,
    )


def _map(fn, tasks, workers: int):
    """Ordered map; a pool only when more than one worker is requested."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    chunk = max(1, len(tasks) // (4 * workers))
    with ctx.Pool(workers) as pool:
        return pool.map(fn, tasks, chunksize=chunk)


def run_replications(procedure: str, spec: PopulationSpec, config: StoppingConfig, R: int, seed,
                     workers: int = 1, oracle: Optional[OracleSet] = None,
                     substratify: bool = True) -> MonteCarloReport:
    """``R`` independent runs of one engine, each on a fresh pseudo-population."""
    if procedure not in ENGINES:
        raise ParameterError(f"unknown procedure {procedure!r}; choose from {sorted(ENGINES)}")
    if R < 1:
        raise ParameterError("R must be at least 1")
    if tuple(config.caps) != spec.strata_sizes:
        raise ParameterError("config caps must equal the population's strata sizes")
    if config.k != spec.k:
        raise ParameterError("config k must equal the population's k")
    gini = analytic_gini(spec.law)
    tasks = [(procedure, spec, config, seed, r, substratify, gini) for r in range(R)]
    records = _map(_one_replication, tasks, workers)
    design = "sub-strata" if substratify else "no-sub-strata"
    return MonteCarloReport.from_records(records, procedure, str(spec.law), design, config, gini, oracle)


# --------------------------------------------------------------------------
# design comparison

@dataclass(frozen=True, eq=False)
class FixedComparison:
    n_fixed: int
    v2_proposed: np.ndarray
    v2_comparator: np.ndarray
    g_proposed: np.ndarray
    g_comparator: np.ndarray

    @property
    def mean_v2(self) -> tuple:
        return float(self.v2_proposed.mean()), float(self.v2_comparator.mean())

    @property
    def mean_g(self) -> tuple:
        return float(self.g_proposed.mean()), float(self.g_comparator.mean())

    @property
    def diff_se(self) -> float:
        """Standard error of the paired mean difference in V^2."""
        d = self.v2_proposed - self.v2_comparator
        return _sd(d) / math.sqrt(len(d))


@dataclass(frozen=True, eq=False)
class DesignComparison:
    law: str
    sequential: tuple       # (proposed, comparator) MonteCarloReport
    two_stage: tuple
    fixed: FixedComparison


def _one_fixed(task):
    spec, n_fixed, seed, r, alpha = task
    pop, src = rep_seeds(seed, FIXED_STREAM, r)
    frame = generate_pseudo_population(spec, pop)
    a = _fixed_draw(frame, n_fixed, src, spec.k, True, alpha)
    b = _fixed_draw(frame, n_fixed, src, spec.k, False, alpha)
    return a.v_n2, b.v_n2, a.g_hat, b.g_hat


def fixed_comparison(spec: PopulationSpec, n_fixed: int, R: int, seed, alpha=0.05, workers=1) -> FixedComparison:
    if n_fixed < 2 * len(spec.strata_sizes):
        raise ParameterError("n_fixed must give each stratum at least 2 clusters")
    rows = np.array(_map(_one_fixed, [(spec, n_fixed, seed, r, alpha) for r in range(R)], workers))
    return FixedComparison(n_fixed, rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3])


def compare_designs(spec: PopulationSpec, n_fixed: int = 1200, R: int = 100, seed=0,
                    config: Optional[StoppingConfig] = None, workers: int = 1,
                    oracle: Optional[OracleSet] = None, engines=(PURELY_SEQUENTIAL, TWO_STAGE)) -> DesignComparison:
    """Sub-stratified design against ``2k`` households per cluster by plain SRS.

    Both arms of every replication share the pseudo-population and the
    cluster-selection stream; only household selection differs.
    """
    if n_fixed > spec.H:
        raise ParameterError(f"n_fixed = {n_fixed} exceeds H = {spec.H}")
    config = config or stopping_config(spec)
    out = {}
    for proc in (PURELY_SEQUENTIAL, TWO_STAGE):
        if proc in engines:
            out[proc] = tuple(run_replications(proc, spec, config, R, seed, workers, oracle, sub)
                              for sub in (True, False))
        else:
            out[proc] = None
    fixed = fixed_comparison(spec, n_fixed, R, seed, config.alpha, workers)
    return DesignComparison(str(spec.law), out[PURELY_SEQUENTIAL], out[TWO_STAGE], fixed)
