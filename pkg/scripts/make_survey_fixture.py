"""Write the synthetic survey fixture under data/.

Two strata of 504 clusters (H = 1008), every cluster surveyed, k = 2
households per sub-stratum.  Monthly household expenditure is lognormal with
sdlog 0.562 on a rupee-like scale.  The real microdata is not redistributable;
this file has the same layout so the ingestion commands can be exercised.

    python3 scripts/make_survey_fixture.py [--out data] [--seed 64]
"""
import argparse
from pathlib import Path

import numpy as np

from seqgini.design import (ClusterDraw, HouseholdGroup, IncomeLaw, PopulationSpec,
                            generate_pseudo_population, srs_households)
from seqgini.survey import SurveyFiles, write_survey_files


def census_draws(frame, k, seed):
    """One draw per cluster with k households from each sub-stratum."""
    rng = np.random.default_rng(seed)
    draws = []
    for s, st in enumerate(frame.strata):
        for c in range(st.n_clusters):
            groups = []
            for b in (1, 2):
                sel, take_all = srs_households(frame, s, c, b, k, rng)
                groups.append(HouseholdGroup(b, int(st.counts[c, b - 1]),
                                             st.substratum_incomes(c, b)[sel], sel, take_all))
            draws.append(ClusterDraw(s, c, c, int(st.cluster_sizes[c]), st.total_households, tuple(groups)))
    return draws


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=64)
    ap.add_argument("--clusters", default="504,504")
    ap.add_argument("--k", type=int, default=2)
    args = ap.parse_args()

    sizes = tuple(int(v) for v in args.clusters.split(","))
    spec = PopulationSpec(IncomeLaw("lognormal", (8.0, 0.562)), strata_sizes=sizes, k=args.k)
    frame = generate_pseudo_population(spec, args.seed)
    out = Path(args.out)
    files = SurveyFiles(out / "survey_frame.csv", out / "survey_households.csv")
    write_survey_files(frame, census_draws(frame, args.k, args.seed + 1), files)
    print(f"wrote {files.frame} and {files.households}")


if __name__ == "__main__":
    main()
