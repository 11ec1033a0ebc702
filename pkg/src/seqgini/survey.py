"""Survey microdata files: validation, loading, replay and writing.

Frame file, one row per cluster::

    stratum_id,cluster_id,m_sub1,m_sub2

Households file, one row per surveyed household::

    stratum_id,cluster_id,substratum_id,household_id,income

Comma separated, header row, UTF-8, dot decimal.  Row numbers in error
messages are file line numbers (the header is row 1).  Strata keep the order
in which they first appear in the frame file.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import (AFFLUENT, NON_AFFLUENT, ClusterDraw, HouseholdGroup, PopulationFrame,
                     StratumFrame)
from .errors import FrameError, ParameterError, SourceError, SurveyFormatError

FRAME_COLUMNS = ("stratum_id", "cluster_id", "m_sub1", "m_sub2")
HOUSEHOLD_COLUMNS = ("stratum_id", "cluster_id", "substratum_id", "household_id", "income")


@dataclass(frozen=True)
class SurveyFiles:
    frame: Path
    households: Path

    def __post_init__(self):
        object.__setattr__(self, "frame", Path(self.frame))
        object.__setattr__(self, "households", Path(self.households))


def _rows(path: Path, columns):
    """Yield ``(line_number, record)`` after checking the header."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise SurveyFormatError(path, 0, f"cannot open: {exc.strerror}")
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        row = raw[:exc.start].count(b"\n") + 1
        raise SurveyFormatError(path, row, f"unreadable row: not UTF-8 at byte {exc.start}")
    with io.StringIO(text, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SurveyFormatError(path, 1, "file is empty")
        except csv.Error as exc:
            raise SurveyFormatError(path, 1, f"unreadable header: {exc}")
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise SurveyFormatError(path, 1, f"missing columns {missing}; expected {list(columns)}")
        pos = [header.index(c) for c in columns]
        while True:
            try:
                rec = next(reader)
            except StopIteration:
                return
            except csv.Error as exc:
                raise SurveyFormatError(path, reader.line_num, f"unreadable row: {exc}")
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise SurveyFormatError(path, reader.line_num,
                                        f"expected {len(header)} fields, found {len(rec)}")
            yield reader.line_num, [rec[i].strip() for i in pos]


def _count(path, row, name, text):
    try:
        v = int(text)
    except ValueError:
        raise SurveyFormatError(path, row, f"{name} {text!r} is not an integer")
    if v < 0:
        raise SurveyFormatError(path, row, f"{name} is negative ({v})")
    return v


def _id(path, row, name, text):
    if not text:
        raise SurveyFormatError(path, row, f"{name} is empty")
    return text


def read_frame_file(path):
    """``{stratum_id: [(cluster_id, m1, m2), ...]}`` in file order."""
    path = Path(path)
    strata = {}
    seen = {}
    for row, (s, c, m1, m2) in _rows(path, FRAME_COLUMNS):
        s = _id(path, row, "stratum_id", s)
        c = _id(path, row, "cluster_id", c)
        m1 = _count(path, row, "m_sub1", m1)
        m2 = _count(path, row, "m_sub2", m2)
        if m1 + m2 == 0:
            raise SurveyFormatError(path, row, f"cluster {c!r} has no households")
        if (s, c) in seen:
            raise SurveyFormatError(path, row, f"cluster {c!r} of stratum {s!r} repeats row {seen[s, c]}")
        seen[s, c] = row
        strata.setdefault(s, []).append((c, m1, m2))
    if not strata:
        raise SurveyFormatError(path, 2, "no cluster rows")
    return strata


def read_households_file(path, clusters: dict):
    """Group household incomes by ``(stratum, cluster, substratum)``.

    ``clusters`` maps ``(stratum_id, cluster_id)`` to ``(m1, m2)`` and is
    used to reject orphans and over-full sub-strata.
    """
    path = Path(path)
    groups = {}
    ids = set()
    for row, (s, c, b, h, x) in _rows(path, HOUSEHOLD_COLUMNS):
        if (s, c) not in clusters:
            raise SurveyFormatError(path, row, f"household refers to unknown cluster {c!r} in stratum {s!r}")
        if b not in ("1", "2"):
            raise SurveyFormatError(path, row, f"substratum_id must be 1 or 2, got {b!r}")
        b = int(b)
        h = _id(path, row, "household_id", h)
        if (s, c, h) in ids:
            raise SurveyFormatError(path, row, f"household {h!r} repeated in cluster {c!r}")
        ids.add((s, c, h))
        try:
            v = float(x)
        except ValueError:
            raise SurveyFormatError(path, row, f"income {x!r} is not a number")
        if not math.isfinite(v):
            raise SurveyFormatError(path, row, f"income {x!r} is not finite")
        if v < 0:
            raise SurveyFormatError(path, row, f"income {x!r} is negative")
        g = groups.setdefault((s, c, b), [])
        if len(g) >= clusters[s, c][b - 1]:
            raise SurveyFormatError(path, row, f"more surveyed households than the frame's "
                                               f"m_sub{b} = {clusters[s, c][b - 1]} for cluster {c!r}")
        g.append(v)
    if not groups:
        raise SurveyFormatError(path, 2, "no household rows")
    return groups


class ReplaySource:
    """Cluster source over surveyed clusters, revealed in a seeded order.

    Every surveyed cluster is served once per stratum, in a permutation fixed
    by ``seed``; the households recorded for it are its sub-stratum samples.
    """

    def __init__(self, frame: PopulationFrame, surveyed: list, seed=0):
        self.frame = frame
        self.surveyed = surveyed        # per stratum: {cluster index: {b: incomes}}
        self._order = []
        for s, clusters in enumerate(surveyed):
            idx = np.array(sorted(clusters), dtype=np.int64)
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(s,)))
            self._order.append([int(c) for c in rng.permutation(idx)])
        self._next = [0] * frame.S

    def capacity(self, stratum: int) -> int:
        return len(self._order[stratum])

    @property
    def caps(self) -> tuple:
        return tuple(self.capacity(s) for s in range(self.frame.S))

    @property
    def allocation(self) -> tuple:
        H = sum(self.caps)
        return tuple(h / H for h in self.caps)

    def order(self, stratum: int) -> list:
        return list(self._order[stratum])

    def _draw_for(self, stratum: int, c: int, draw_index: int) -> ClusterDraw:
        st = self.frame.strata[stratum]
        groups = []
        for b in (AFFLUENT, NON_AFFLUENT):
            x = self.surveyed[stratum][c].get(b)
            if x is None or len(x) == 0:
                continue
            M = int(st.counts[c, b - 1])
            groups.append(HouseholdGroup(b, M, x, None, len(x) == M))
        return ClusterDraw(stratum, c, draw_index, int(st.cluster_sizes[c]),
                           st.total_households, tuple(groups))

    def draw(self, stratum: int, count: int) -> list:
        start = self._next[stratum]
        if start + count > len(self._order[stratum]):
            raise SourceError(f"stratum {self.frame.stratum_ids[stratum]!r}: asked for "
                              f"{count} more clusters, {len(self._order[stratum]) - start} left")
        out = [self._draw_for(stratum, c, start + i)
               for i, c in enumerate(self._order[stratum][start:start + count])]
        self._next[stratum] += count
        return out

    def order_draws(self, stratum: int, count: int) -> list:
        """The first ``count`` clusters of the replay order; does not advance it."""
        if count > len(self._order[stratum]):
            raise SourceError(f"stratum {self.frame.stratum_ids[stratum]!r} has only "
                              f"{len(self._order[stratum])} surveyed clusters")
        return [self._draw_for(stratum, c, i) for i, c in enumerate(self._order[stratum][:count])]

    def all_draws(self) -> list:
        """Every surveyed cluster once, in file order; does not advance the replay."""
        return [self._draw_for(s, c, i)
                for s, clusters in enumerate(self.surveyed)
                for i, c in enumerate(sorted(clusters))]


def load_survey(files: SurveyFiles, seed=0):
    """Parse and validate both files; returns ``(frame, ReplaySource)``."""
    strata = read_frame_file(files.frame)
    counts = {(s, c): (m1, m2) for s, rows in strata.items() for c, m1, m2 in rows}
    groups = read_households_file(files.households, counts)

    frames, surveyed = [], []
    for s, rows in strata.items():
        if len(rows) < 2:
            raise FrameError(f"stratum {s!r} lists {len(rows)} cluster; at least 2 are required")
        frames.append(StratumFrame(s, [c for c, _, _ in rows], [[m1, m2] for _, m1, m2 in rows]))
        index = {c: i for i, (c, _, _) in enumerate(rows)}
        got = {}
        for (gs, c, b), xs in groups.items():
            if gs == s:
                got.setdefault(index[c], {})[b] = np.array(xs, dtype=float)
        surveyed.append(got)
    frame = PopulationFrame(tuple(frames))
    for st, got in zip(frame.strata, surveyed):
        if len(got) < 2:
            raise FrameError(f"stratum {st.stratum_id!r} has {len(got)} surveyed cluster; need at least 2")
    return frame, ReplaySource(frame, surveyed, seed)


def write_survey_files(frame: PopulationFrame, draws, files: SurveyFiles):
    """Write a frame and the households of ``draws`` (each cluster once).

    Incomes are written with ``repr`` so a reload is exact.  A frame without
    incomes needs draws whose groups carry them.
    """
    if not draws:
        raise ParameterError("no draws to write")
    files.frame.parent.mkdir(parents=True, exist_ok=True)
    files.households.parent.mkdir(parents=True, exist_ok=True)
    with open(files.frame, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_COLUMNS)
        for st in frame.strata:
            for cid, (m1, m2) in zip(st.cluster_ids, st.counts):
                w.writerow([st.stratum_id, cid, int(m1), int(m2)])
    done = set()
    with open(files.households, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOUSEHOLD_COLUMNS)
        for d in draws:
            if (d.stratum, d.cluster) in done:
                continue
            done.add((d.stratum, d.cluster))
            st = frame.strata[d.stratum]
            cid = st.cluster_ids[d.cluster]
            for g in d.groups:
                if g.substratum not in (AFFLUENT, NON_AFFLUENT):
                    raise ParameterError("only sub-stratified draws can be written")
                idx = g.indices if g.indices is not None else range(len(g.incomes))
                for h, x in zip(idx, g.incomes):
                    w.writerow([st.stratum_id, cid, g.substratum, f"{cid}-{g.substratum}-{int(h) + 1}", repr(float(x))])
