"""Built-in invariant suite: fast oracle cross-checks runnable from the CLI.

Each check returns (name, passed, detail). The suite covers the per-module
invariants: transform unitarity and ordering, container roundtrips, synthesis
support/reality/symmetry/scaling, kernel anchors, solver identities,
dual-path far fields, estimator positivity and scaling, and reconstruction
reality after completion.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from . import oracles
from .errors import FieldFormatError
from .fields import (ComplexField, GridSpec, ScalarField, fft_forward,
                     fft_inverse, frequency_lattice)
from .forward import (ResolventOperator, ScatteringConfig, far_field,
                      fundamental_solution, incident_plane_wave,
                      lippmann_schwinger_solve)
from .migr import MigrSpec, empirical_covariance, gaussian_bump_field, synthesize_migr
from .recovery import (CorrelationEstimate, band_correlation,
                       hermitian_complete, make_farfield_set,
                       _assemble_report)
from .rsgf import read_field, write_field

_G16 = GridSpec.centered(16, 2.0 / 16)


def _bump_spec(grid=_G16, m=2.5, amplitude=1.0, width=0.14):
    mu = gaussian_bump_field(grid, (0.0, 0.0, 0.0), amplitude, width, cutoff_radii=3.0)
    return MigrSpec(order=m, strength=mu)


def check_fft_unitarity():
    rng = np.random.default_rng(11)
    data = rng.standard_normal(_G16.dims) + 1j * rng.standard_normal(_G16.dims)
    f = ComplexField(_G16, data)
    spec = fft_forward(f)
    back = fft_inverse(spec)
    r1 = np.linalg.norm(back.data - f.data) / np.linalg.norm(f.data)
    r2 = abs(np.linalg.norm(spec.data) - np.linalg.norm(f.data)) / np.linalg.norm(f.data)
    ok = r1 < 1e-12 and r2 < 1e-12
    return ok, f"roundtrip {r1:.2e}, Parseval drift {r2:.2e}"


def check_fft_shift_ordering():
    rng = np.random.default_rng(12)
    data = rng.standard_normal(_G16.dims) + 1j * rng.standard_normal(_G16.dims)
    shift = (2, 3, 5)
    xi = frequency_lattice(_G16).reshape(_G16.dims + (3,))
    a = np.asarray(shift) * _G16.spacing
    phase = np.exp(1j * (xi @ a))
    spec = fft_forward(ComplexField(_G16, data)).data
    rolled = fft_inverse(ComplexField(_G16, spec * phase)).data
    expect = np.roll(data, tuple(-s for s in shift), axis=(0, 1, 2))
    err = np.max(np.abs(rolled - expect))
    return err < 1e-12, f"cyclic-shift identity error {err:.2e}"


def check_rsgf_roundtrip():
    rng = np.random.default_rng(13)
    g = GridSpec.centered(8, 0.25)
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "f.rsgf")
        for _ in range(32):
            f = ScalarField(g, rng.standard_normal(g.dims))
            write_field(path, f)
            back = read_field(path)
            if back.data.tobytes() != f.data.tobytes():
                return False, "payload bytes changed in roundtrip"
        write_field(path, ScalarField(g, rng.standard_normal(g.dims)))
        with open(path, "rb") as fh:
            blob = fh.read()
        with open(path, "wb") as fh:
            fh.write(blob[:-8])
        try:
            read_field(path)
            return False, "truncated file was accepted"
        except FieldFormatError:
            pass
    return True, "bit-exact roundtrips, truncation rejected"


def check_synthesis_support_reality():
    spec = _bump_spec()
    r1 = synthesize_migr(spec, 42)
    r2 = synthesize_migr(spec, 42)
    if r1.field.data.tobytes() != r2.field.data.tobytes():
        return False, "same (spec, seed) produced different bytes"
    outside = ~spec.strength.support_mask()
    if np.any(r1.field.data[outside] != 0.0):
        return False, "realization leaks outside the strength support"
    return True, "deterministic, supported, real"


def check_covariance_symmetry_scaling():
    spec1 = _bump_spec(amplitude=1.0)
    spec2 = _bump_spec(amplitude=2.0)
    x, y = (0.05, 0.0, 0.0), (-0.05, 0.05, 0.0)
    e_xy = empirical_covariance(spec1, [(x, y), (y, x)], 200, 7)
    if abs(e_xy[0].value - e_xy[1].value) > 3.0 * (e_xy[0].std_error + e_xy[1].std_error) + 1e-12:
        return False, "covariance estimates not symmetric in (x, y)"
    c1 = empirical_covariance(spec1, [(x, x)], 200, 7)[0]
    c2 = empirical_covariance(spec2, [(x, x)], 200, 7)[0]
    ratio = c2.value / c1.value
    ok = 1.8 <= ratio <= 2.2
    return ok, f"doubling strength scaled covariance by {ratio:.3f}"


def check_riesz_anchor():
    errs = []
    for r in (0.2, 0.35):
        v = oracles.riesz_kernel(2.0, r)
        errs.append(abs(v * 4.0 * np.pi * r - 1.0))
    v1 = oracles.riesz_kernel(2.5, 0.3)
    v2 = oracles.riesz_kernel(2.5, 0.6)
    hom = abs(v2 / v1 - 2.0 ** (2.5 - 3.0))
    ok = max(errs) < 5e-3 and hom < 1e-3
    return ok, f"closed-form error {max(errs):.2e}, homogeneity drift {hom:.2e}"


def check_resolvent_point_response():
    g = _G16
    k = 3.0
    data = np.zeros(g.dims)
    c = (8, 8, 8)
    data[c] = 1.0 / g.cell_volume
    out = ResolventOperator(g, k).apply(data.astype(complex))
    xs, ys, zs = g.coords()
    errs = []
    for off in ((3, 0, 0), (0, 4, 2), (5, 5, 5)):
        idx = tuple(c[i] + off[i] for i in range(3))
        r = np.linalg.norm([xs[idx[0]] - xs[c[0]], ys[idx[1]] - ys[c[1]], zs[idx[2]] - zs[c[2]]])
        errs.append(abs(out[idx] - fundamental_solution(k, r)))
    ok = max(errs) < 1e-12
    return ok, f"point response error {max(errs):.2e}"


def check_outgoing_phase():
    g = _G16
    k = 4.0
    data = np.zeros(g.dims)
    data[8, 8, 8] = 1.0 / g.cell_volume
    out = ResolventOperator(g, k).apply(data.astype(complex))
    drift = []
    for n in (3, 4, 5, 6):
        r = n * g.spacing
        expect = k * r
        got = np.angle(out[8 + n, 8, 8]) % (2 * np.pi)
        drift.append(abs(np.exp(1j * got) - np.exp(1j * expect)))
    ok = max(drift) < 1e-10
    return ok, f"outgoing phase drift {max(drift):.2e}"


def check_solver_truncation():
    g = _G16
    f = gaussian_bump_field(g, (0.0, 0.0, 0.0), 1.0, 0.15, cutoff_radii=3.0)
    cfg = ScatteringConfig(grid=g, k=3.0, source=f)
    u, rep = lippmann_schwinger_solve(cfg)
    ok = rep.converged and rep.update_norms[-1] <= 1e-14
    zero_cfg = ScatteringConfig(grid=g, k=3.0)
    u0, _ = lippmann_schwinger_solve(zero_cfg)
    ok = ok and float(np.max(np.abs(u0.data))) == 0.0
    return ok, f"truncation update {rep.update_norms[-1]:.1e}, zero RHS stays zero"


def check_farfield_dual_path():
    g = _G16
    f = gaussian_bump_field(g, (0.1, 0.0, -0.1), 1.0, 0.15, cutoff_radii=3.0)
    cfg = ScatteringConfig(grid=g, k=3.0, source=f)
    u = np.zeros(g.dims, dtype=complex)
    dirs = np.array([[1.0, 0, 0], [0, 0.6, 0.8], [-1 / np.sqrt(3)] * 3])
    fast = far_field(cfg, u, dirs)
    slow = np.array([oracles.direct_farfield(f, 3.0, d) for d in dirs])
    err = np.max(np.abs(fast - slow)) / np.max(np.abs(slow))
    return err < 1e-12, f"separable vs direct summation {err:.2e}"


def check_farfield_point_source():
    g = _G16
    data = np.zeros(g.dims)
    data[8, 8, 8] = 1.0 / g.cell_volume
    f = ScalarField(g, data)
    x0 = np.array([g.axis_coords(0)[8], g.axis_coords(1)[8], g.axis_coords(2)[8]])
    errs = []
    for k in (1.0, 4.0):
        cfg = ScatteringConfig(grid=g, k=k, source=f)
        dirs = np.array([[0.0, 0, 1], [0.6, 0.8, 0]])
        vals = far_field(cfg, np.zeros(g.dims, dtype=complex), dirs)
        expect = np.exp(-1j * k * dirs @ x0) / (4 * np.pi)
        errs.append(np.max(np.abs(vals - expect)))
    ok = max(errs) < 1e-12
    return ok, f"point-source far field error {max(errs):.2e}"


def check_born_reciprocity():
    g = _G16
    q = gaussian_bump_field(g, (0.05, -0.05, 0.0), 0.5, 0.18, cutoff_radii=3.0)
    k = 3.0
    xhat = np.array([0.6, 0.8, 0.0])
    d = np.array([0.0, 0.0, 1.0])

    def born(out_dir, inc_dir):
        u_in = incident_plane_wave(k, inc_dir, g)
        gq = ComplexField(g, q.data * u_in.data)
        return oracles.direct_farfield(gq, k, out_dir)

    a = born(xhat, d)
    b = born(-d, -xhat)
    err = abs(a - b) / abs(a)
    return err < 1e-12, f"reciprocity defect {err:.2e}"


def check_estimator_positivity_scaling():
    freqs = 8.0 + (np.arange(32) + 0.5) * 0.25
    rng = np.random.default_rng(3)
    vals = rng.standard_normal(len(freqs)) + 1j * rng.standard_normal(len(freqs))
    ff1 = make_farfield_set([(0.0, 0.0, 1.0)], freqs, vals[None, :])
    ff3 = make_farfield_set([(0.0, 0.0, 1.0)], freqs, 3.0 * vals[None, :])
    e1 = band_correlation(ff1, 0.0, 0.0, (0.0, 0.0, 1.0), 8.0).value
    e3 = band_correlation(ff3, 0.0, 0.0, (0.0, 0.0, 1.0), 8.0).value
    ok = e1.imag == 0.0 and e1.real >= 0.0 and abs(e3 / e1 - 9.0) < 1e-12
    return ok, f"tau=0 value real>=0, power scaling drift {abs(e3 / e1 - 9.0):.2e}"


def check_hermitian_reality():
    rng = np.random.default_rng(5)
    grid = _G16
    n = (0.0, 0.0, 1.0)
    samples = []
    # equatorial directions appear in +/- pairs so completion can average them
    for d in ((0.0, 0.0, 1.0), (0.6, 0.8, 0.0), (-0.6, -0.8, 0.0),
              (0.8, -0.6, 0.0), (-0.8, 0.6, 0.0), (0.6, 0.0, 0.8)):
        for tau in (0.0, 4.0, 8.0):
            v = rng.standard_normal() + 1j * rng.standard_normal()
            samples.append(CorrelationEstimate(tau, d, (8.0, 16.0), v, 16))
    completed = hermitian_complete(samples, n)
    report = _assemble_report(completed, grid, None, {})
    residue = report.metrics["imag_residue"]
    return residue < 1e-10, f"reconstruction imaginary residue {residue:.2e}"


CHECKS = (
    ("fft-unitarity", check_fft_unitarity),
    ("fft-shift-ordering", check_fft_shift_ordering),
    ("rsgf-roundtrip", check_rsgf_roundtrip),
    ("synthesis-support-reality", check_synthesis_support_reality),
    ("covariance-symmetry-scaling", check_covariance_symmetry_scaling),
    ("riesz-kernel-anchor", check_riesz_anchor),
    ("resolvent-point-response", check_resolvent_point_response),
    ("outgoing-phase", check_outgoing_phase),
    ("solver-truncation", check_solver_truncation),
    ("farfield-dual-path", check_farfield_dual_path),
    ("farfield-point-source", check_farfield_point_source),
    ("born-reciprocity", check_born_reciprocity),
    ("estimator-positivity-scaling", check_estimator_positivity_scaling),
    ("hermitian-reality", check_hermitian_reality),
)


def run_all(stream=None):
    """Run every check; returns True when all pass, printing one line per check."""
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as e:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(e).__name__}: {e}"
        all_ok &= ok
        line = f"{'PASS' if ok else 'FAIL'}  {name:<32} {detail}"
        print(line, file=stream)
    return all_ok
