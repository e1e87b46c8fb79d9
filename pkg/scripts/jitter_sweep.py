#!/usr/bin/env python3
"""How often do oracle answers flip as per-frame jitter grows?

Jitter is expressed as a fraction of the significance tolerances. Below 0.5
no answer should change; above it, static tracks start to look like they move.
"""

import argparse
import random

from spatialqa import benchmark as bm
from spatialqa.motion import Tolerances
from spatialqa.synth import perturb_scene, synth_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description="answer stability under jitter")
    ap.add_argument("--clips", type=int, default=100)
    ap.add_argument("--draws", type=int, default=3)
    ap.add_argument("--fractions", default="0.25,0.49,0.75,1.0,2.0")
    args = ap.parse_args()

    tol = Tolerances()
    scenes = synth_corpus(args.clips, seed=0)
    clean = []
    for s in scenes:
        items, _ = bm.generate_qa(s, bm.ALL_CATEGORIES, tol, 0)
        clean.append((items, [bm.answer_query(s, it.query, tol) for it in items]))

    print("fraction_of_tol  changed/total  by_category")
    for frac in (float(x) for x in args.fractions.split(",")):
        changed, total, per_cat = 0, 0, {}
        for i, (s, (items, answers)) in enumerate(zip(scenes, clean)):
            for d in range(args.draws):
                noisy = perturb_scene(s, random.Random(f"{frac}-{i}-{d}"), frac * tol.doa_deg, frac * tol.dist_m)
                for it, a in zip(items, answers):
                    flipped = bm.answer_query(noisy, it.query, tol) != a
                    changed += flipped
                    total += 1
                    per_cat[it.category.value] = per_cat.get(it.category.value, 0) + flipped
        print(f"{frac:15.2f}  {changed:6d}/{total:<6d}  {per_cat}")


if __name__ == "__main__":
    main()
