"""Frequency-band ergodic estimators and strength reconstruction.

The central object is the band correlation

    4 sqrt(2 pi) (1/K) sum_j w(k_j) conj(u_inf(xhat, k_j)) u_inf(xhat, k_j + s) delta

over the midpoint mesh of [K, 2K), which estimates the transform mu_hat of
the rough strength at tau * xhat. For passive source data the weight is
w = k^m and the shift is s = tau. For active backscatter data the measured
spectrum lives at spatial frequency 2k, so the shift is s = tau/2 and the
weight uses the effective frequency, w = (2k)^m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DataCoverageError, RscatError
from .fields import GridSpec, ScalarField, _ifftn_raw
from .forward import FarFieldSet

PREFACTOR = 4.0 * math.sqrt(2.0 * math.pi)

_EQUATOR_TOL = 1e-12


@dataclass(frozen=True)
class CorrelationEstimate:
    """One band-averaged two-frequency correlation, approximating mu_hat(tau * dir)."""

    tau: float
    dir: tuple
    band: tuple
    value: complex
    n_terms: int

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigurationError("tau must be nonnegative")
        d = np.asarray(self.dir, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ConfigurationError("correlation direction must be unit length")
        object.__setattr__(self, "dir", tuple(float(c) for c in d))
        object.__setattr__(self, "band", tuple(float(b) for b in self.band))
        object.__setattr__(self, "value", complex(self.value))


def _band_midpoint_indices(ff: FarFieldSet, K: float, shift: float):
    """Mesh indices of the [K, 2K) midpoints and of their shifted partners."""
    delta = ff.delta
    n_terms = int(round(K / delta))
    if abs(n_terms * delta - K) > 1e-9 * K:
        raise ConfigurationError(
            f"band start K={K} is not an integer multiple of the mesh spacing {delta}"
        )
    if n_terms < 16:
        raise ConfigurationError(
            f"band [K, 2K) holds only {n_terms} mesh points; at least 16 required"
        )
    steps = shift / delta
    if abs(steps - round(steps)) > 1e-6:
        raise ConfigurationError(
            f"frequency shift {shift} is not a multiple of the mesh spacing {delta}"
        )
    kj = K + (np.arange(n_terms) + 0.5) * delta
    base = ff.freq_indices(kj, what="band")
    shifted = ff.freq_indices(kj + shift, what="shifted band")
    return kj, base, shifted, n_terms, delta


def _band_estimate(ff, dir_index, weights_of, tau, shift, K):
    kj, base, shifted, n_terms, delta = _band_midpoint_indices(ff, K, shift)
    row = ff.values[dir_index]
    if shift == 0.0:
        # real arithmetic keeps the zero-shift estimate exactly real and >= 0
        total = complex(np.sum(np.abs(row[base]) ** 2 * weights_of(kj)))
    else:
        total = np.sum((np.conj(row[base]) * row[shifted]) * weights_of(kj))
    value = PREFACTOR * (delta / K) * total
    return value, n_terms


def band_correlation(ff: FarFieldSet, m: float, tau: float, direction, K: float) -> CorrelationEstimate:
    """Passive-data band correlation with weight k^m and shift tau.

    At tau = 0 the value is real and nonnegative by construction.
    """
    if tau < 0:
        raise ConfigurationError("tau must be nonnegative")
    d_idx = ff.dir_index(direction)
    value, n_terms = _band_estimate(ff, d_idx, lambda k: k ** m, tau, tau, K)
    return CorrelationEstimate(
        tau=float(tau), dir=tuple(np.asarray(direction, dtype=float)),
        band=(K, 2 * K), value=value, n_terms=n_terms,
    )


def backscatter_band_correlation(ff: FarFieldSet, m_q: float, tau: float, direction, K: float) -> CorrelationEstimate:
    """Backscatter band correlation: shift tau/2 and effective-frequency weight (2k)^m.

    Backscatter data samples the medium spectrum at 2 k xhat, so a data shift
    of tau/2 moves the sampled spatial frequency by tau, and the frequency
    weight must use the sampled frequency 2k for the band average to settle
    on mu_hat rather than 2^(-m) mu_hat.
    """
    if tau < 0:
        raise ConfigurationError("tau must be nonnegative")
    d_idx = ff.dir_index(direction)
    value, n_terms = _band_estimate(ff, d_idx, lambda k: (2.0 * k) ** m_q, tau, tau / 2.0, K)
    return CorrelationEstimate(
        tau=float(tau), dir=tuple(np.asarray(direction, dtype=float)),
        band=(K, 2 * K), value=value, n_terms=n_terms,
    )


def hermitian_complete(samples: Sequence[CorrelationEstimate], normal) -> list:
    """Extend hemisphere samples (dir . n >= 0) to the full sphere by conjugate reflection.

    Samples at dir . n > 0 gain a partner conj(value) at -dir. Equatorial
    samples are averaged with their conjugate mirror when the mirror
    direction is present, and must have a mirror partner at the same tau.
    """
    n = np.asarray(normal, dtype=np.float64)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ConfigurationError("completion normal must be unit length")
    for s in samples:
        if np.dot(s.dir, n) < -_EQUATOR_TOL:
            raise ConfigurationError(
                f"sample direction {s.dir} lies in the open negative hemisphere"
            )

    def key(tau, d):
        return (round(tau, 9), tuple(round(c, 9) for c in d))

    index = {key(s.tau, s.dir): s for s in samples}
    out = []
    for s in samples:
        dn = np.dot(s.dir, n)
        mirror_dir = tuple(-c for c in s.dir)
        if abs(dn) <= _EQUATOR_TOL:
            partner = index.get(key(s.tau, mirror_dir))
            if partner is None:
                raise DataCoverageError(
                    f"equatorial sample at tau={s.tau}, dir={s.dir} is missing its mirror partner"
                )
            avg = 0.5 * (s.value + np.conj(partner.value))
            out.append(CorrelationEstimate(s.tau, s.dir, s.band, avg, s.n_terms))
        else:
            out.append(s)
            out.append(
                CorrelationEstimate(s.tau, mirror_dir, s.band, np.conj(s.value), s.n_terms)
            )
    return out


# ---------------------------------------------------------------------------
# polar lattice -> Cartesian spectrum -> strength field
# ---------------------------------------------------------------------------

def _scatter_polar_samples(samples, grid: GridSpec):
    """Trilinear scatter of polar samples onto the grid's dual lattice.

    Returns the averaged spectrum (zero where nothing lands and beyond the
    largest sampled radius) and the fraction of in-ball cells touched.
    """
    dims = grid.dims
    num = np.zeros(dims, dtype=np.complex128)
    den = np.zeros(dims)
    dxi = tuple(2.0 * np.pi / (d * grid.spacing) for d in dims)
    pts = np.array([np.asarray(s.dir) * s.tau for s in samples])
    vals = np.array([s.value for s in samples])
    tau_max = max(float(s.tau) for s in samples)
    if tau_max >= grid.nyquist:
        raise ConfigurationError(
            f"largest sampled radius {tau_max:.4g} reaches the reconstruction "
            f"lattice Nyquist {grid.nyquist:.4g}; the scatter would alias"
        )
    frac = pts / np.asarray(dxi)[None, :]
    i0 = np.floor(frac).astype(int)
    w = frac - i0
    for corner in range(8):
        off = np.array([(corner >> b) & 1 for b in range(3)])
        wgt = np.prod(np.where(off[None, :], w, 1.0 - w), axis=1)
        ii = (i0 + off[None, :]) % np.asarray(dims)[None, :]
        np.add.at(num, (ii[:, 0], ii[:, 1], ii[:, 2]), wgt * vals)
        np.add.at(den, (ii[:, 0], ii[:, 1], ii[:, 2]), wgt)
    filled = den > 1e-12
    spec = np.zeros(dims, dtype=np.complex128)
    spec[filled] = num[filled] / den[filled]
    mag = grid.frequency_magnitude()
    ball = mag <= tau_max + max(dxi)
    spec[~ball] = 0.0
    coverage = float(np.count_nonzero(filled & ball)) / max(int(np.count_nonzero(ball)), 1)
    return spec, tau_max, coverage


def _hermitian_symmetrize(spec: np.ndarray) -> np.ndarray:
    ix = [(-np.arange(n)) % n for n in spec.shape]
    mirrored = np.conj(spec[ix[0]][:, ix[1]][:, :, ix[2]])
    return 0.5 * (spec + mirrored)


def _inverse_strength_transform(spec: np.ndarray, grid: GridSpec):
    """Inverse transform with the (2 pi)^(-3/2) convention, on the grid's x lattice."""
    dims = grid.dims
    phases = []
    for a in range(3):
        phases.append(np.exp(1j * grid.axis_frequencies(a) * grid.origin[a]))
    full = spec * phases[0][:, None, None] * phases[1][None, :, None] * phases[2][None, None, :]
    dxi3 = np.prod([2.0 * np.pi / (d * grid.spacing) for d in dims])
    mu = (2.0 * np.pi) ** -1.5 * dxi3 * grid.n_cells * _ifftn_raw(full)
    re = np.ascontiguousarray(mu.real)
    residue = float(np.linalg.norm(mu.imag) / max(np.linalg.norm(re), 1e-300))
    return re, residue


@dataclass(frozen=True)
class RecoveryReport:
    """Reconstructed strength plus error metrics against optional ground truth."""

    mu_hat_samples: tuple
    mu_rec: ScalarField                 # nonnegative (clipped) reconstruction
    mu_rec_unclipped: ScalarField
    ground_truth: Optional[ScalarField] = None
    rel_l2_error: Optional[float] = None    # unclipped, over the true support
    metrics: dict = dc_field(default_factory=dict)

    def save(self, prefix):
        from .rsgf import write_field

        prefix = str(prefix)
        write_field(prefix + "_mu.rsgf", self.mu_rec)
        write_field(prefix + "_mu_raw.rsgf", self.mu_rec_unclipped)
        fmt = lambda x: f"{float(x):.17g}"
        with open(prefix + "_samples.csv", "w") as fh:
            fh.write("tau,dir_x,dir_y,dir_z,re,im\n")
            for s in self.mu_hat_samples:
                fh.write(
                    f"{fmt(s.tau)},{fmt(s.dir[0])},{fmt(s.dir[1])},{fmt(s.dir[2])},"
                    f"{fmt(s.value.real)},{fmt(s.value.imag)}\n"
                )
        with open(prefix + "_summary.txt", "w") as fh:
            if self.rel_l2_error is not None:
                fh.write(f"rel_l2_error={fmt(self.rel_l2_error)}\n")
            for key in sorted(self.metrics):
                fh.write(f"{key}={fmt(self.metrics[key])}\n")


def _assemble_report(samples, grid, ground_truth, extra_metrics):
    spec, tau_max, coverage = _scatter_polar_samples(samples, grid)
    spec = _hermitian_symmetrize(spec)
    rec, residue = _inverse_strength_transform(spec, grid)
    if residue >= 0.05:
        raise RscatError(
            f"imaginary residue {residue:.3e} of the reconstruction exceeds 5% "
            "of its real norm; the completed spectrum is not Hermitian"
        )
    rel = None
    if ground_truth is not None:
        supp = ground_truth.support_mask()
        denom = float(np.linalg.norm(ground_truth.data[supp]))
        rel = float(np.linalg.norm((rec - ground_truth.data)[supp])) / max(denom, 1e-300)
    clipped = np.maximum(rec, 0.0)
    metrics = {
        "imag_residue": residue,
        "tau_max": tau_max,
        "cartesian_coverage": coverage,
        "n_samples": len(samples),
    }
    if ground_truth is not None:
        supp = ground_truth.support_mask()
        denom = float(np.linalg.norm(ground_truth.data[supp]))
        metrics["rel_l2_error_clipped"] = float(
            np.linalg.norm((clipped - ground_truth.data)[supp])
        ) / max(denom, 1e-300)
    metrics.update(extra_metrics)
    return RecoveryReport(
        mu_hat_samples=tuple(samples),
        mu_rec=ScalarField(grid, clipped),
        mu_rec_unclipped=ScalarField(grid, rec),
        ground_truth=ground_truth,
        rel_l2_error=rel,
        metrics=metrics,
    )


def _select_dirs(ff, dirs, normal_n):
    if dirs is None:
        chosen = [tuple(d) for d in ff.dirs]
    else:
        chosen = [tuple(ff.dirs[ff.dir_index(d)]) for d in np.atleast_2d(np.asarray(dirs))]
    if normal_n is None:
        return chosen, None
    n = np.asarray(normal_n, dtype=np.float64)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ConfigurationError("hemisphere mode requires a unit separating normal")
    kept = [d for d in chosen if np.dot(d, n) >= -_EQUATOR_TOL]
    if not kept:
        raise ConfigurationError("no data directions lie on the requested hemisphere")
    return kept, n


def recover_source_strength(ff: FarFieldSet, m: float, tau_list, dirs, K: float,
                            normal_n=None, *, grid: GridSpec,
                            ground_truth: Optional[ScalarField] = None) -> RecoveryReport:
    """Reconstruct the source rough strength from passive far-field data.

    Band correlations sample mu_hat on the polar lattice {tau * xhat}; with a
    separating normal the estimates are formed on the hemisphere
    xhat . n >= 0 and completed by conjugate reflection, otherwise on the
    full sphere. The samples are scattered onto the Cartesian dual lattice,
    symmetrized, and inverse transformed; negative values are clipped after
    the error metrics are taken on the unclipped field.
    """
    if ff.kind != "passive":
        raise ConfigurationError(f"source recovery needs passive data, got kind={ff.kind!r}")
    chosen, n = _select_dirs(ff, dirs, normal_n)
    samples = [
        band_correlation(ff, m, float(tau), d, K)
        for d in chosen
        for tau in tau_list
    ]
    if n is not None:
        samples = hermitian_complete(samples, n)
    return _assemble_report(samples, grid, ground_truth, {"band_lo": K, "order": m})


def recover_potential_strength(ff: FarFieldSet, m_q: float, tau_list, dirs, K: float,
                               normal_n=None, *, grid: GridSpec,
                               ground_truth: Optional[ScalarField] = None) -> RecoveryReport:
    """Reconstruct the potential rough strength from active backscatter data.

    Identical assembly to the source branch except that mu_hat(tau * xhat)
    is sampled through the k + tau/2 data shift with the (2k)^m weight.
    """
    if ff.kind != "active-backscatter":
        raise ConfigurationError(
            f"potential recovery needs active-backscatter data, got kind={ff.kind!r}"
        )
    chosen, n = _select_dirs(ff, dirs, normal_n)
    samples = [
        backscatter_band_correlation(ff, m_q, float(tau), d, K)
        for d in chosen
        for tau in tau_list
    ]
    if n is not None:
        samples = hermitian_complete(samples, n)
    return _assemble_report(samples, grid, ground_truth, {"band_lo": K, "order": m_q})


# ---------------------------------------------------------------------------
# near-field second moment
# ---------------------------------------------------------------------------

def nearfield_second_moment(samples, m: float) -> float:
    """Band average (1/(K-1)) sum_j k_j^(1+m) |u_sc(x, k_j)|^2 delta over [1, K].

    ``samples`` is a sequence of (k, complex scattered value) on a uniform
    midpoint mesh of [1, K]. The comparison against the Newtonian potential
    of the strength carries an unstated universal constant, so callers
    compare ratios across configurations rather than absolute values.
    """
    pts = sorted((float(k), complex(v)) for k, v in samples)
    if len(pts) < 2:
        raise DataCoverageError("near-field estimate needs at least 2 mesh points")
    ks = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])
    d = np.diff(ks)
    delta = float(d[0])
    if np.max(np.abs(d - delta)) > 1e-9 * delta:
        raise DataCoverageError("near-field mesh must be uniform", gaps=list(ks[1:][np.abs(d - delta) > 1e-9 * delta]))
    lo = ks[0] - delta / 2.0
    if abs(lo - 1.0) > 1e-6:
        raise DataCoverageError(f"near-field mesh must start at 1 (midpoints from 1 + delta/2), got {lo}")
    K = ks[-1] + delta / 2.0
    return float(np.sum(ks ** (1.0 + m) * np.abs(vals) ** 2) * delta / (K - 1.0))


# ---------------------------------------------------------------------------
# ergodic convergence diagnostics and synthetic band processes
# ---------------------------------------------------------------------------

def midpoint_mesh(k_lo: float, k_hi: float, delta: float) -> np.ndarray:
    """Midpoint frequency mesh covering [k_lo, k_hi] with spacing delta."""
    n = int(round((k_hi - k_lo) / delta))
    if n < 1:
        raise ConfigurationError("empty frequency mesh")
    return k_lo + (np.arange(n) + 0.5) * delta


@dataclass(frozen=True)
class IndependentPowerLawProcess:
    """Synthetic far-field values, independent complex Gaussians per mesh point.

    E[conj(u(k)) u(k)] = c0 * k^(-m); distinct mesh points are independent.
    """

    c0: float
    m: float

    def draw(self, seed, freqs):
        rng = np.random.default_rng(seed)
        z = (rng.standard_normal(len(freqs)) + 1j * rng.standard_normal(len(freqs))) / np.sqrt(2.0)
        return np.sqrt(self.c0) * np.asarray(freqs, float) ** (-self.m / 2.0) * z


@dataclass(frozen=True)
class DeterministicProcess:
    """Seed-independent synthetic process (zero ergodic spread by construction)."""

    fn: object

    def draw(self, seed, freqs):
        return np.asarray([self.fn(k) for k in freqs], dtype=np.complex128)


def make_farfield_set(dirs, freqs, values, kind="passive", **meta) -> FarFieldSet:
    """Assemble a FarFieldSet from raw arrays (synthetic data entry point)."""
    base = {"m": None, "m_f": None, "m_q": None, "seed": None,
            "band_lo": None, "band_hi": None, "delta": None}
    base.update(meta)
    return FarFieldSet(dirs=np.atleast_2d(dirs), freqs=freqs,
                       values=np.atleast_2d(values), kind=kind, meta=base)


@dataclass(frozen=True)
class BandDiagnostic:
    band_lo: float
    delta: float
    n_terms: int
    spread: float
    n_rep: int


_DIAG_DIR = (0.0, 0.0, 1.0)


def ergodic_diagnostic(source, m: float, tau: float, bands, *, direction=None,
                       n_rep: int = 50, seed0: int = 0, known_mean=None) -> list:
    """Convergence profile of the band estimator across bands.

    With a resampleable synthetic process (an object with ``draw(seed, freqs)``)
    the spread is the RMS deviation of the estimate from its known mean over
    n_rep fresh repetitions per band. With a FarFieldSet the bands are read
    from the single realization at the given direction (default: the first),
    and every row carries the spread of the per-band estimates across the
    disjoint bands (diagnostic only, no pass/fail).
    """
    if len(bands) < 3:
        raise ConfigurationError("ergodic diagnostic needs at least 3 bands")
    out = []
    if isinstance(source, FarFieldSet):
        d_idx = 0 if direction is None else source.dir_index(direction)
        estimates = []
        for K, delta in bands:
            n_terms = int(round(K / delta))
            est, _ = _band_estimate(source, d_idx, lambda k: k ** m, tau, tau, K)
            estimates.append(est)
            out.append(BandDiagnostic(float(K), float(delta), n_terms, 0.0, 1))
        spread = float(np.std(np.asarray(estimates)))
        return [
            BandDiagnostic(b.band_lo, b.delta, b.n_terms, spread, 1) for b in out
        ]
    for K, delta in bands:
        n_terms = int(round(K / delta))
        if n_terms < 16:
            raise ConfigurationError(
                f"band starting at {K} holds only {n_terms} mesh points; 16 required"
            )
        freqs = midpoint_mesh(K, 2.0 * K + tau, delta)
        devs = np.empty(n_rep)
        ests = np.empty(n_rep, dtype=np.complex128)
        for r in range(n_rep):
            values = source.draw(seed0 + r, freqs)
            ff = make_farfield_set([_DIAG_DIR], freqs, values[None, :], kind="passive")
            ests[r] = band_correlation(ff, m, tau, _DIAG_DIR, K).value
        center = known_mean if known_mean is not None else np.mean(ests)
        devs = np.abs(ests - center)
        out.append(
            BandDiagnostic(float(K), float(delta), n_terms,
                           float(np.sqrt(np.mean(devs ** 2))), n_rep)
        )
    return out
