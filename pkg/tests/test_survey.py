import numpy as np
import pytest

from conftest import GAMMA
from seqgini.design import FrameSource, PopulationSpec, compute_weights, generate_pseudo_population
from seqgini.errors import FrameError, SourceError, SurveyFormatError
from seqgini.estimators import estimate
from seqgini.sequential import StoppingConfig, run_purely_sequential
from seqgini.survey import SurveyFiles, load_survey, read_frame_file, write_survey_files

FRAME = """stratum_id,cluster_id,m_sub1,m_sub2
A,c1,3,5
A,c2,2,4
"""
HOUSEHOLDS = """stratum_id,cluster_id,substratum_id,household_id,income
A,c1,1,h1,500.5
A,c1,1,h2,410
A,c1,2,h3,20.25
A,c1,2,h4,31
A,c2,1,h5,700
A,c2,1,h6,650
A,c2,2,h7,12
A,c2,2,h8,0
"""


def write(tmp_path, frame=FRAME, households=HOUSEHOLDS):
    f = tmp_path / "frame.csv"
    h = tmp_path / "hh.csv"
    f.write_bytes(frame.encode() if isinstance(frame, str) else frame)
    h.write_bytes(households.encode() if isinstance(households, str) else households)
    return SurveyFiles(f, h)


def test_toy_fixture_counts_match_file(tmp_path):
    frame, src = load_survey(write(tmp_path))
    st = frame.strata[0]
    assert frame.S == 1 and st.stratum_id == "A" and st.cluster_ids == ("c1", "c2")
    assert st.counts.tolist() == [[3, 5], [2, 4]]
    assert src.caps == (2,)
    d = {x.cluster: x for x in src.all_draws()}
    assert d[0].groups[0].incomes.tolist() == [500.5, 410.0]
    assert d[1].groups[1].incomes.tolist() == [12.0, 0.0]
    # sub-stratum of 2 households fully surveyed
    assert d[1].groups[0].take_all and not d[0].groups[0].take_all


def test_weights_use_frame_counts(tmp_path):
    frame, src = load_survey(write(tmp_path))
    s = compute_weights(frame, src.all_draws())
    # W = sum M * M_b / (n_s * M_c * k_b), sum M = 14, n_s = 2
    want = {(0, 1): 14 * 3 / (2 * 8 * 2), (0, 2): 14 * 5 / (2 * 8 * 2),
            (1, 1): 14 * 2 / (2 * 6 * 2), (1, 2): 14 * 4 / (2 * 6 * 2)}
    got = {(int(c), int(b)): W for c, b, W in zip(s.draw, s.substratum, s.W)}
    assert got.keys() == want.keys()
    for key in want:
        assert got[key] == pytest.approx(want[key], rel=1e-14)


BAD = [
    ("frame", FRAME.replace("m_sub2", "m2"), 1, "missing columns"),
    ("frame", FRAME + "A,c3,4\n", 4, "expected 4 fields"),
    ("frame", FRAME + "A,c3,x,1\n", 4, "not an integer"),
    ("frame", FRAME + "A,c3,-1,1\n", 4, "negative"),
    ("frame", FRAME + "A,c3,0,0\n", 4, "no households"),
    ("frame", FRAME + "A,c1,1,1\n", 4, "repeats row 2"),
    ("frame", FRAME + ",c9,1,1\n", 4, "stratum_id is empty"),
    ("frame", "stratum_id,cluster_id,m_sub1,m_sub2\n", 2, "no cluster rows"),
    ("frame", "", 1, "empty"),
    ("frame", b"stratum_id,cluster_id,m_sub1,m_sub2\nA,c1,3,5\nA,\xff,2,4\n", 3, "unreadable"),
    ("households", HOUSEHOLDS + "A,c7,1,h9,3\n", 10, "unknown cluster"),
    ("households", HOUSEHOLDS + "B,c1,1,h9,3\n", 10, "unknown cluster"),
    ("households", HOUSEHOLDS + "A,c1,3,h9,3\n", 10, "substratum_id must be 1 or 2"),
    ("households", HOUSEHOLDS + "A,c1,2,h3,3\n", 10, "repeated"),
    ("households", HOUSEHOLDS + "A,c1,2,h9,-3\n", 10, "negative"),
    ("households", HOUSEHOLDS + "A,c1,2,h9,abc\n", 10, "not a number"),
    ("households", HOUSEHOLDS + "A,c1,2,h9,nan\n", 10, "not finite"),
    ("households", HOUSEHOLDS + "A,c1,2,h9,inf\n", 10, "not finite"),
    ("households", HOUSEHOLDS + "A,c1,1,h9,3\nA,c1,1,h10,3\n", 11, "m_sub1 = 3"),
    ("households", HOUSEHOLDS + "A,c1,2,h9\n", 10, "expected 5 fields"),
    ("households", "stratum_id,cluster_id,substratum_id,household_id,income\n", 2, "no household rows"),
]


@pytest.mark.parametrize("which,text,row,msg", BAD)
def test_malformed_fixtures_get_row_diagnostics(tmp_path, which, text, row, msg):
    files = write(tmp_path, **{which: text})
    with pytest.raises(SurveyFormatError, match=msg) as info:
        load_survey(files)
    assert info.value.row == row
    assert str(info.value).startswith(f"{getattr(files, which)}: row {row}:")


def test_structural_errors(tmp_path):
    with pytest.raises(FrameError, match="at least 2"):
        load_survey(write(tmp_path, frame=FRAME + "B,d1,3,3\n",
                          households=HOUSEHOLDS + "B,d1,1,h9,5\n"))
    only_one = "\n".join(l for l in HOUSEHOLDS.splitlines() if ",c2," not in l) + "\n"
    with pytest.raises(FrameError, match="surveyed cluster"):
        load_survey(write(tmp_path, households=only_one))
    with pytest.raises(SurveyFormatError, match="cannot open"):
        load_survey(SurveyFiles(tmp_path / "nope.csv", tmp_path / "nope2.csv"))


def test_header_may_reorder_columns_and_blank_lines_are_skipped(tmp_path):
    frame = "m_sub2,m_sub1,cluster_id,stratum_id\n5,3,c1,A\n\n4,2,c2,A\n"
    strata = read_frame_file(write(tmp_path, frame=frame).frame)
    assert strata == {"A": [("c1", 3, 5), ("c2", 2, 4)]}


@pytest.fixture(scope="module")
def generated():
    spec = PopulationSpec(GAMMA, strata_sizes=(30, 20), household_range=(5, 15))
    frame = generate_pseudo_population(spec, 4)
    src = FrameSource(frame, 2, 8)
    draws = src.draw(0, 25) + src.draw(1, 18)
    return frame, draws


def test_write_then_load_is_lossless(tmp_path, generated):
    frame, draws = generated
    files = SurveyFiles(tmp_path / "f.csv", tmp_path / "h.csv")
    write_survey_files(frame, draws, files)
    back, src = load_survey(files)
    assert back.strata_sizes == frame.strata_sizes
    for a, b in zip(frame.strata, back.strata):
        assert np.array_equal(a.counts, b.counts)
        assert [str(c) for c in a.cluster_ids] == list(b.cluster_ids)
    first = {}
    for d in draws:
        first.setdefault((d.stratum, d.cluster), d)
    replayed = {(d.stratum, d.cluster): d for d in src.all_draws()}
    assert replayed.keys() == first.keys()
    for key, d in first.items():
        for g, h in zip(d.groups, replayed[key].groups):
            assert g.substratum == h.substratum and g.size == h.size
            assert np.array_equal(g.incomes, h.incomes)
    # weights on the distinct clusters agree between generated and reloaded frames
    uniq = list(first.values())
    e1 = estimate(compute_weights(frame, uniq), 0.05)
    e2 = estimate(compute_weights(back, [replayed[d.stratum, d.cluster] for d in uniq]), 0.05)
    assert e1.g_hat == pytest.approx(e2.g_hat, rel=1e-12) and e1.v_n2 == pytest.approx(e2.v_n2, rel=1e-12)


def test_replay_is_a_seeded_permutation(tmp_path, generated):
    frame, draws = generated
    files = SurveyFiles(tmp_path / "f.csv", tmp_path / "h.csv")
    write_survey_files(frame, draws, files)
    _, a = load_survey(files, seed=3)
    _, b = load_survey(files, seed=3)
    _, c = load_survey(files, seed=4)
    for s in range(2):
        got = [d.cluster for d in a.draw(s, a.capacity(s))]
        assert sorted(got) == sorted(a.surveyed[s])
        assert len(set(got)) == len(got)
        assert got == b.order(s)
        assert [d.draw_index for d in b.order_draws(s, 3)] == [0, 1, 2]
    assert any(a.order(s) != c.order(s) for s in range(2))
    with pytest.raises(SourceError):
        a.draw(0, 1)
    with pytest.raises(SourceError):
        b.order_draws(0, b.capacity(0) + 1)


def test_sequential_run_over_replay(tmp_path, generated):
    frame, draws = generated
    files = SurveyFiles(tmp_path / "f.csv", tmp_path / "h.csv")
    write_survey_files(frame, draws, files)
    back, src = load_survey(files, seed=1)
    c = StoppingConfig(0.05, 0.2, 2.0, src.allocation, src.caps, 1, 2)
    out = run_purely_sequential(src, c)
    assert out.final_n <= sum(src.caps)
    assert all(m <= cap for m, cap in zip(out.n_s, src.caps))


def test_shipped_fixture_loads():
    import os
    root = os.path.join(os.path.dirname(__file__), "..", "data")
    frame, src = load_survey(SurveyFiles(os.path.join(root, "survey_frame.csv"),
                                         os.path.join(root, "survey_households.csv")))
    assert frame.H == 1008 and src.caps == (504, 504)
    e = estimate(compute_weights(frame, src.all_draws()), 0.1)
    assert 0 < e.g_hat < 1


def test_byte_order_mark_is_accepted(tmp_path):
    files = write(tmp_path, frame=b"\xef\xbb\xbf" + FRAME.encode())
    frame, _ = load_survey(files)
    assert frame.strata[0].counts.tolist() == [[3, 5], [2, 4]]
