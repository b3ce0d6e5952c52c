"""Compare the 1/sqrt(n) width law with constant peak widths.

For each law it prints the quality of the published-gap model and the
165 -> 872 nH quality improvements. It then prints the minimum-L_k
extrapolation next to the reference numbers. The point is to show which
quantities depend on the width law and by how much.

    python scripts/width_law_comparison.py
"""

import argparse
import math

import numpy as np

from pnrkit import build_model_from_gaps, fit_sqrt_coefficient, fwhm_to_sigma, pnr_quality, quality_vs_lk
from pnrkit.sweep import UnreachableError, min_lk_for_quality

REF_Q = {1: 0.96, 4: 0.49}
REF_DQ = [0.12, 0.31, 0.23]
REF_LK = [1200.0, 3500.0, 7000.0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mu", type=float, default=1.5)
    ap.add_argument("--jitter-fwhm", type=float, default=33.0)
    args = ap.parse_args()
    sigma1 = fwhm_to_sigma(args.jitter_fwhm)
    a_two = fit_sqrt_coefficient([(165.0, 21.0), (872.0, 47.0)])
    a_one = 47.0 / math.sqrt(872.0)

    for law in ("inverse_sqrt", "constant"):
        print(f"== width law: {law}")
        q = pnr_quality(build_model_from_gaps(2.66, [49.0, 23.0, 15.0], 16.3, width_law=law)).quality
        print("  published-gap model: Q = " + ", ".join(f"{x:.3f}" for x in q)
              + f"   (reference Q_1 {REF_Q[1]}, Q_4 {REF_Q[4]})")
        r = quality_vs_lk(a_two, sigma1, args.mu, [165.0, 872.0], width_law=law)
        dq = r.quality_per_n[:3, 1] - r.quality_per_n[:3, 0]
        print(f"  dQ 165->872 nH: {np.round(dq, 3).tolist()}   (reference {REF_DQ})")
        lks = []
        for n in (1, 2, 3):
            try:
                lks.append(min_lk_for_quality(0.99, n, a_one, sigma1, args.mu, width_law=law))
            except UnreachableError:
                lks.append(float("nan"))
        print(f"  min L_k for Q >= 0.99 (nH): {lks}   (reference {REF_LK})")
        # gap/sigma between peaks n and n+1, the quantity that sets overlap
        gaps = a_one * math.sqrt(872.0) / np.sqrt(np.arange(1, 4))
        sig = sigma1 / np.sqrt(np.arange(1, 5)) if law == "inverse_sqrt" else np.full(4, sigma1)
        ratio = gaps / np.maximum(sig[:-1], sig[1:])
        print(f"  gap/sigma_wider at 872 nH for n=1..3: {np.round(ratio, 2).tolist()}")


if __name__ == "__main__":
    main()
