#!/usr/bin/env python3
"""Exercise the inequality validators and print worst-case ratios."""

import numpy as np

from epdecay import (
    BumpProfile,
    Grid,
    RealField,
    SpectralField,
    besov_interpolation_bound,
    check_besov_interpolation,
    check_hls_embedding,
    check_neg_sobolev_interpolation,
    to_spectral,
)
from epdecay.norms import BesovPartition


def main() -> None:
    g = Grid(16)
    part = BesovPartition(g)
    print(f"partition of unity defect: {part.partition_defect():.2e}")

    rng = np.random.default_rng(0)
    cut = 5 * 2.0 * np.pi / g.box_length
    x1, x2, x3 = g.wavenumbers
    mask = ((np.abs(x1) <= cut) & (np.abs(x2) <= cut) & (np.abs(x3) <= cut))
    mask[0, 0, 0] = False

    worst_sob = 0.0
    worst_bes = {}
    for _ in range(400):
        F = to_spectral(RealField(g, rng.standard_normal(g.shape)))
        F = SpectralField(g, F.coefficients * mask)
        for l in (0, 1, 2):
            for s in (0.0, 0.5, 1.0, 1.5):
                worst_sob = max(worst_sob, check_neg_sobolev_interpolation(F, l, s))
                if s > 0:
                    r = check_besov_interpolation(F, l, s)
                    key = (l, s)
                    worst_bes[key] = max(worst_bes.get(key, 0.0), r)
    print(f"neg-Sobolev interpolation: worst ratio {worst_sob:.12f} (bound 1)")
    for (l, s), r in sorted(worst_bes.items()):
        print(f"Besov interpolation l={l} s={s:g}: worst {r:.3f} "
              f"(frozen bound {besov_interpolation_bound(l, s):.3f})")

    hls_grid = Grid(128)
    for p, moments in ((1.5, 2), (1.2, 1)):
        prof = BumpProfile(width=hls_grid.box_length / 24.0, moments=moments)
        ratios, used = check_hls_embedding(prof, p, (1.0, 2.0), hls_grid)
        spread = abs(ratios[0] - ratios[1]) / ratios[0]
        print(f"HLS p={p:g}: ratios {ratios[0]:.8f} {ratios[1]:.8f} "
              f"(dilations {used}, spread {spread:.1e})")


if __name__ == "__main__":
    main()
