"""Norms and executable inequality validators.

Covers the norm families the decay analysis needs: Lp by rectangle-rule
quadrature (spectrally accurate on the torus for smooth integrands),
Sobolev H^k and homogeneous Hdot^s for any real s on the frequency side,
and the negative-index Besov norm built on a dyadic Littlewood-Paley
partition.  On top of those sit validators for the interpolation and
embedding inequalities used to close the decay estimates:

* Hdot interpolation  |grad^l f| <= |grad^{l+1} f|^{1-th} |f|_{Hdot^-s}^th,
  th = 1/(l+s+1).  Frequency-side Hoelder with constant exactly 1 and
  equality on single shells, so the validator asserts ratio <= 1.
* Besov interpolation with |f|_{Bdot^-s} in the denominator.  No constant-1
  statement exists here; a rigorous partition-derived bound is computed once
  (``besov_interpolation_bound``) and used as the test ceiling.
* Hardy-Littlewood-Sobolev embedding Lp -> Hdot^{-s}, s = 3(1/p - 1/2),
  exercised through the dilation invariance of the norm ratio.
* Gagliardo-Nirenberg ratios as finite sanity checks.

The dyadic partition uses the standard smooth radial cut
eta(r) = S(2-r)/(S(2-r)+S(r-1)) with S(t) = exp(-1/t), which is exactly 1
on [0,1] and exactly 0 on [2,inf); the block range is truncated to the
indices that carry lattice points, where the telescoping partition of
unity is exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .spectral import (
    Grid,
    RealField,
    SpectralField,
    to_real,
    _as_spectral,
)

__all__ = [
    "NormSpec",
    "BesovPartition",
    "DyadicBlock",
    "BumpProfile",
    "NormDomainError",
    "lp_norm",
    "hdot_norm",
    "sobolev_norm",
    "besov_norm",
    "besov_block_l2_norm",
    "derivative_magnitude",
    "check_neg_sobolev_interpolation",
    "check_besov_interpolation",
    "besov_interpolation_bound",
    "besov_embedding_factor",
    "check_hls_embedding",
    "gagliardo_nirenberg_ratio",
]


class NormDomainError(ValueError):
    """Norm undefined or infinite for the given field/index combination."""


def _spectrum_and_mag2(f) -> tuple[SpectralField, np.ndarray]:
    F = _as_spectral(f)
    mag2 = np.abs(F.coefficients) ** 2
    if F.rank == 3:
        mag2 = mag2.sum(axis=0)
    return F, mag2


def _pointwise_magnitude(f: RealField) -> np.ndarray:
    v = f.values
    return np.abs(v) if f.rank == 1 else np.sqrt((v**2).sum(axis=0))


def lp_norm(f: RealField, p: float) -> float:
    """Rectangle-rule L^p norm on the torus; p = inf gives the max norm."""
    if not (p >= 1.0):
        raise NormDomainError(f"p must be in [1, inf], got {p}")
    mag = _pointwise_magnitude(f)
    if np.isinf(p):
        return float(mag.max())
    h3 = f.grid.spacing**3
    return float((h3 * np.sum(mag**p)) ** (1.0 / p))


def hdot_norm(f, s: float) -> float:
    """Homogeneous Sobolev norm: l2 of |xi|^s-weighted coefficients.

    s = 0 includes the zero mode (multiplier 1) and coincides with the L2
    norm; s < 0 requires a zero-mean field, since the torus norm is
    otherwise infinite.
    """
    F, mag2 = _spectrum_and_mag2(f)
    k2 = F.grid.k_squared
    if s == 0:
        return float(np.sqrt(mag2.sum()))
    if s < 0:
        scale = math.sqrt(float(mag2.sum()))
        if scale > 0 and math.sqrt(float(mag2[0, 0, 0])) > 1e-10 * scale:
            raise NormDomainError(
                "Hdot norm with s < 0 needs a zero-mean field on the torus"
            )
    w = np.zeros_like(k2)
    np.power(k2, s, where=k2 > 0, out=w)
    return float(np.sqrt(np.sum(w * mag2)))


def sobolev_norm(f, k: int) -> float:
    """H^k norm: sqrt of the sum over 0 <= j <= k of |grad^j f|_{L2}^2."""
    if k < 0:
        raise NormDomainError("Sobolev index must be a nonnegative integer")
    F, mag2 = _spectrum_and_mag2(f)
    k2 = F.grid.k_squared
    w = sum(k2**j for j in range(k + 1))
    return float(np.sqrt(np.sum(w * mag2)))


@dataclass(frozen=True)
class NormSpec:
    """One norm request: which family, its index, and a derivative order."""

    kind: str              # "lp" | "sobolev" | "hom_sobolev" | "besov_neg"
    param: float
    derivative_order: int = 0

    def __post_init__(self):
        if self.kind not in ("lp", "sobolev", "hom_sobolev", "besov_neg"):
            raise NormDomainError(f"unknown norm kind {self.kind!r}")
        if self.derivative_order < 0:
            raise NormDomainError("derivative_order must be >= 0")
        if self.kind == "lp" and not self.param >= 1.0:
            raise NormDomainError("Lp norm needs p in [1, inf]")
        if self.kind == "sobolev" and (self.param < 0 or self.param != int(self.param)):
            raise NormDomainError("Sobolev norm needs integer k >= 0")
        if self.kind == "hom_sobolev" and not self.param > -1.5:
            raise NormDomainError("Hdot^s norm needs s > -3/2")
        if self.kind == "besov_neg" and not (0.0 < self.param <= 1.5):
            raise NormDomainError("Bdot^-s norm needs s in (0, 3/2]")

    @property
    def label(self) -> str:
        base = {
            "lp": f"L{self.param:g}",
            "sobolev": f"H{self.param:g}",
            "hom_sobolev": f"Hdot{self.param:+g}",
            "besov_neg": f"Bdot-{self.param:g}",
        }[self.kind]
        return base if self.derivative_order == 0 else f"grad{self.derivative_order}_{base}"

    def evaluate(self, f) -> float:
        l = self.derivative_order
        if self.kind == "lp":
            g = f if l == 0 else derivative_magnitude(f, l)
            if isinstance(g, SpectralField):
                g = to_real(g)
            return lp_norm(g, self.param)
        if self.kind == "sobolev":
            F = _as_spectral(f)
            if l:
                F = _weighted(F, l)
            return sobolev_norm(F, int(self.param))
        if self.kind == "hom_sobolev":
            return hdot_norm(f, self.param + l)
        # besov_neg
        F = _as_spectral(f)
        if l:
            F = _weighted(F, l)
        return besov_norm(F, self.param)


def _weighted(F: SpectralField, l: int) -> SpectralField:
    """|xi|^l multiplier (radial weight of the full order-l derivative tensor)."""
    w = F.grid.k_magnitude**l
    return SpectralField(F.grid, F.coefficients * w)


def derivative_magnitude(f, l: int) -> RealField:
    """Pointwise Euclidean magnitude of the full order-l derivative tensor.

    Sums (l!/alpha!) |d^alpha f|^2 over multi-indices, which matches the
    frequency-side |xi|^{2l} weight under Parseval.
    """
    F = _as_spectral(f)
    if F.rank != 1:
        raise NormDomainError("derivative_magnitude expects a scalar field")
    if l == 0:
        return to_real(F)
    g = F.grid
    x1, x2, x3 = g.wavenumbers
    mask = g.nyquist_mask
    total = np.zeros(g.shape)
    for alpha in itertools.product(range(l + 1), repeat=3):
        if sum(alpha) != l:
            continue
        mult = math.factorial(l) // (
            math.factorial(alpha[0]) * math.factorial(alpha[1]) * math.factorial(alpha[2])
        )
        sym = (1j * x1) ** alpha[0] * (1j * x2) ** alpha[1] * (1j * x3) ** alpha[2]
        comp = to_real(SpectralField(g, F.coefficients * sym * mask))
        total += mult * comp.values**2
    return RealField(g, np.sqrt(total))


# ---------------------------------------------------------------------------
# Littlewood-Paley partition
# ---------------------------------------------------------------------------

def _bump_s(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def eta_profile(r) -> np.ndarray:
    """Radial cut: 1 on [0,1], 0 on [2,inf), smooth and nonincreasing."""
    r = np.asarray(r, dtype=float)
    a = _bump_s(2.0 - r)
    b = _bump_s(r - 1.0)
    den = np.where(a + b > 0, a + b, 1.0)
    return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, 0.0, a / den))


def phi_profile(r) -> np.ndarray:
    """Annular bump eta(r) - eta(2r), supported on [1/2, 2]."""
    return eta_profile(r) - eta_profile(2.0 * np.asarray(r, dtype=float))


@dataclass(frozen=True)
class DyadicBlock:
    """One frequency-localized piece: index j and the filtered field."""

    index: int
    field: SpectralField


@dataclass(frozen=True)
class BesovPartition:
    """Dyadic partition restricted to the block range a grid can represent.

    Blocks outside [j_min, j_max] carry no lattice points, so the truncated
    telescoping sum equals 1 exactly on every nonzero lattice frequency.
    """

    grid: Grid

    @property
    def j_min(self) -> int:
        return int(np.floor(np.log2(2.0 * np.pi / self.grid.box_length))) - 1

    @property
    def j_max(self) -> int:
        return int(np.ceil(np.log2(np.pi * self.grid.n_points / self.grid.box_length))) + 1

    @property
    def indices(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def block_multiplier(self, j: int) -> np.ndarray:
        return phi_profile(self.grid.k_magnitude / 2.0**j)

    def partition_defect(self) -> float:
        """max over nonzero lattice points of |sum_j phi_j - 1|."""
        total = np.zeros(self.grid.shape)
        for j in self.indices:
            total += self.block_multiplier(j)
        nz = self.grid.k_squared > 0
        return float(np.max(np.abs(total[nz] - 1.0)))

    def blocks(self, F: SpectralField) -> list[DyadicBlock]:
        return [
            DyadicBlock(j, SpectralField(self.grid, F.coefficients * self.block_multiplier(j)))
            for j in self.indices
        ]


@lru_cache(maxsize=32)
def _partition_for(grid: Grid) -> BesovPartition:
    return BesovPartition(grid)


def _block_l2_profile(f) -> tuple[BesovPartition, np.ndarray]:
    F, mag2 = _spectrum_and_mag2(f)
    scale = math.sqrt(float(mag2.sum()))
    if scale > 0 and math.sqrt(float(mag2[0, 0, 0])) > 1e-10 * scale:
        raise NormDomainError("negative Besov norm needs a zero-mean field")
    part = _partition_for(F.grid)
    vals = np.array([
        math.sqrt(float(np.sum(part.block_multiplier(j) ** 2 * mag2)))
        for j in part.indices
    ])
    return part, vals

def besov_norm(f, s: float) -> float:
    """Bdot^{-s}_{2,inf} norm: sup over blocks of 2^{-s j} |block|_{L2}."""
    if not (0.0 < s <= 1.5):
        raise NormDomainError(f"besov_norm needs s in (0, 3/2], got {s}")
    part, vals = _block_l2_profile(f)
    js = np.array(list(part.indices), dtype=float)
    return float(np.max(2.0 ** (-s * js) * vals))


def besov_block_l2_norm(f, s: float) -> float:
    """l2-over-blocks companion norm (the r = 2 member of the same family)."""
    part, vals = _block_l2_profile(f)
    js = np.array(list(part.indices), dtype=float)
    return float(np.sqrt(np.sum((2.0 ** (-s * js) * vals) ** 2)))


@lru_cache(maxsize=64)
def besov_embedding_factor(grid: Grid, s: float) -> float:
    """Tightest lattice constant with block-l2 norm <= factor * Hdot^{-s} norm.

    Computed as the sup over nonzero lattice points of
    sqrt(sum_j 2^{-2sj} phi_j(xi)^2) * |xi|^s.
    """
    part = _partition_for(grid)
    k2 = grid.k_squared
    total = np.zeros(grid.shape)
    for j in part.indices:
        total += 2.0 ** (-2.0 * s * j) * part.block_multiplier(j) ** 2
    nz = k2 > 0
    return float(np.sqrt(np.max(total[nz] * k2[nz] ** s)))


def check_neg_sobolev_interpolation(f, l: int, s: float) -> float:
    """Ratio |grad^l f| / (|grad^{l+1} f|^{1-th} |f|_{Hdot^-s}^th), th = 1/(l+s+1).

    Frequency-side Hoelder makes this <= 1 with equality exactly on single
    shells; any excess beyond roundoff is a defect.
    """
    if l < 0 or s < 0:
        raise NormDomainError("need l >= 0 and s >= 0")
    num = hdot_norm(f, float(l))
    if num == 0.0:
        raise NormDomainError("interpolation ratio undefined for the zero field")
    theta = 1.0 / (l + s + 1.0)
    hi = hdot_norm(f, float(l + 1))
    lo = hdot_norm(f, -s)
    return num / (hi ** (1.0 - theta) * lo**theta)


@lru_cache(maxsize=64)
def besov_interpolation_bound(k: int, s: float) -> float:
    """Rigorous ceiling for the Besov interpolation ratio, from the dyadic split.

    Splitting |grad^k f|^2 <= 2 sum_j |grad^k block_j|^2 at an integer block
    index J, bounding low blocks by the Besov norm (geometric sum) and high
    blocks by |grad^{k+1} f|, then optimizing J, gives
    N <= C(k,s) D^{1-th} B^th with th = 1/(k+1+s).  The integer-J penalty is
    maximized numerically over the split offset.
    """
    p = k + s
    if p <= 0:
        raise NormDomainError("need k + s > 0")
    a = 2.0 ** (2 * k) / (1.0 - 2.0 ** (-2.0 * p))
    c_p = (p + 1.0) * p ** (-p / (p + 1.0))
    offsets = np.linspace(1.0, 4.0, 4001)
    worst = 0.0
    for u in offsets:
        cands = [(u * 4.0**j) ** p + p / (u * 4.0**j) for j in (-1, 0, 1)]
        worst = max(worst, min(cands) / (1.0 + p))
    return math.sqrt(2.0 * c_p * a ** (1.0 / (p + 1.0)) * worst)


def check_besov_interpolation(f, k: int, s: float) -> float:
    """Ratio |grad^k f| / (|grad^{k+1} f|^{1-th} |f|_{Bdot^-s}^th), th = 1/(k+1+s)."""
    if k < 0 or not s > 0:
        raise NormDomainError("need k >= 0 and s > 0")
    num = hdot_norm(f, float(k))
    if num == 0.0:
        raise NormDomainError("interpolation ratio undefined for the zero field")
    theta = 1.0 / (k + 1.0 + s)
    hi = hdot_norm(f, float(k + 1))
    lo = besov_norm(f, s)
    return num / (hi ** (1.0 - theta) * lo**theta)


# ---------------------------------------------------------------------------
# Dilation families for the Hardy-Littlewood-Sobolev check
# ---------------------------------------------------------------------------

def _flat_bump(t: np.ndarray) -> np.ndarray:
    """C-infinity compactly supported even bump, 1 at 0, 0 outside |t| >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


@dataclass(frozen=True)
class BumpProfile:
    """Radial zero-mean profile built from sign-separated smooth shells.

    A Gaussian ball plus one or two Gaussian annuli (flat-cut in their
    exponentially small tails) with amplitudes solving moment conditions.
    All sign changes happen inside the flat gaps, so |f|^p keeps full
    smoothness and the rectangle rule stays spectrally accurate -- the
    property the dilation-invariance contract leans on.

    width: Gaussian core scale of the inner ball (the annuli scale with it).
    moments: 1 cancels the mean; 2 additionally cancels the r^4 moment,
    pushing the low-frequency content of the transform one order down.
    """

    width: float
    moments: int = 1

    _ANN = ((5.0, 0.75), (8.0, 0.75))   # (center, core width) in units of width

    def __post_init__(self):
        if self.moments not in (1, 2):
            raise NormDomainError("moments must be 1 or 2")
        if not self.width > 0:
            raise NormDomainError("width must be positive")

    @property
    def support_radius(self) -> float:
        c, d = self._ANN[self.moments - 1]
        return (c + 3.0 * d) * self.width

    @property
    def min_feature_width(self) -> float:
        return min(self.width, self._ANN[0][1] * self.width)

    def _shells(self):
        w = self.width
        shells = [lambda r, w=w: np.exp(-(r / w) ** 2) * _flat_bump(r / (4.0 * w))]
        for c, d in self._ANN[: self.moments]:
            shells.append(
                lambda r, c=c * w, d=d * w: np.exp(-((r - c) / d) ** 2)
                * _flat_bump((r - c) / (3.0 * d))
            )
        return shells

    def _radial_moment(self, fn, power: int) -> float:
        hi = self.support_radius
        val, _ = quad(lambda r: float(fn(np.array([r]))[0]) * r**power, 0.0, hi,
                      epsrel=1e-12, limit=200)
        return val

    @property
    def amplitudes(self) -> tuple[float, ...]:
        shells = self._shells()
        if self.moments == 1:
            m_ball = self._radial_moment(shells[0], 2)
            m_ann = self._radial_moment(shells[1], 2)
            return (1.0, -m_ball / m_ann)
        m2 = [self._radial_moment(s, 2) for s in shells]
        m4 = [self._radial_moment(s, 4) for s in shells]
        A = np.array([[m2[1], -m2[2]], [m4[1], -m4[2]]])
        k1, k2 = np.linalg.solve(A, np.array([m2[0], m4[0]]))
        return (1.0, -k1, k2)

    def radial(self, r: np.ndarray, dilation: float = 1.0) -> np.ndarray:
        out = np.zeros_like(np.asarray(r, dtype=float))
        for amp, shell in zip(self.amplitudes, self._shells()):
            out = out + amp * shell(np.asarray(r, dtype=float) * dilation)
        return out

    def build(self, grid: Grid, dilation: float = 1.0) -> RealField:
        """Sample the dilated profile, centered off-lattice, residual mean removed."""
        X, Y, Z = grid.coordinates
        c = grid.box_length / 2.0 + grid.spacing / 2.0
        r = np.sqrt((X - c) ** 2 + (Y - c) ** 2 + (Z - c) ** 2)
        v = self.radial(r, dilation)
        return RealField(grid, v - v.mean())


def check_hls_embedding(profile: BumpProfile, p: float, dilations, grid: Grid):
    """Ratios |f_lam|_{Hdot^-s} / |f_lam|_{Lp} with s = 3(1/p - 1/2).

    Returns (ratios, used_dilations); dilations whose finest feature drops
    under 2 grid spacings or whose core width exceeds L/8 are excluded as
    unresolved.  The embedding demands p > 1 strictly.
    """
    if not (1.0 < p <= 2.0):
        raise NormDomainError(f"HLS check needs p in (1, 2], got {p}")
    s = 3.0 * (1.0 / p - 0.5)
    ratios, used = [], []
    for lam in dilations:
        if profile.min_feature_width / lam < 2.0 * grid.spacing:
            continue
        if profile.width / lam > grid.box_length / 8.0:
            continue
        f = profile.build(grid, lam)
        num = hdot_norm(f, -s) if s > 0 else hdot_norm(f, 0.0)
        den = lp_norm(f, p)
        ratios.append(num / den)
        used.append(lam)
    return ratios, used


def gagliardo_nirenberg_ratio(f, k: int, m: int, l: int,
                              p: float, q: float, r: float) -> float:
    """|grad^k f|_Lp / (|grad^m f|_Lq^{1-th} |grad^l f|_Lr^th) with balanced th.

    th solves the 3D exponent balance
    1/p - k/3 = (1-th)(1/q - m/3) + th (1/r - l/3); no solution in [0,1]
    is an exponent mismatch.  The identity case k = m = l, p = q = r gives
    ratio 1 for any th.
    """
    def lhs(pp, kk):
        return (0.0 if np.isinf(pp) else 1.0 / pp) - kk / 3.0

    a, b, c = lhs(p, k), lhs(q, m), lhs(r, l)
    if abs(c - b) < 1e-14:
        if abs(a - b) < 1e-14:
            theta = 0.5  # degenerate: any theta balances
        else:
            raise NormDomainError("exponent balance has no solution")
    else:
        theta = (a - b) / (c - b)
        if not (-1e-12 <= theta <= 1.0 + 1e-12):
            raise NormDomainError(f"exponent balance needs theta in [0,1], got {theta}")
        theta = min(max(theta, 0.0), 1.0)

    def deriv_lp(order, pp):
        g = to_real(_as_spectral(f)) if order == 0 else derivative_magnitude(f, order)
        return lp_norm(g, pp)

    num = deriv_lp(k, p)
    den = deriv_lp(m, q) ** (1.0 - theta) * deriv_lp(l, r) ** theta
    if den == 0.0:
        raise NormDomainError("ratio undefined for the zero field")
    return num / den
