"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (visible with
``pytest -s``); the terminal summary repeats them in all modes.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate as sint

from krein2d.bounds import (
    certificate_ch,
    certificate_generic,
    diagonal_lower_bound,
    generic_validity_nu,
    holmgren_norm,
    neumann_gate,
    offdiag_norm_bound_generic,
    offdiag_term_generic,
)
from krein2d.geometry import (
    Configuration,
    Flat,
    GenericBounds,
    Hyperbolic,
    hex_lattice,
    hyperbolic_level_packing,
    level_count,
    min_pairwise_distance,
    packing_count_bound_exact,
    packing_count_bound_relaxed,
)
from krein2d.principal import (
    assemble,
    phi_diagonal,
    regularized_coupling,
    regularized_phi_diagonal,
    split,
)
from krein2d.special import digamma, frullani_sinh_integral
from krein2d.spectrum import ground_state, truncation_study


def report(n, ok, detail=""):
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def _laplace(f, scale):
    # int_0^inf f(t) dt over log-spaced panels around the natural time scale
    knots = [0.0] + list(scale * np.logspace(-8, 4, 13)) + [np.inf]
    return sum(sint.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0] for a, b in zip(knots[:-1], knots[1:]))


def test_criterion_1_single_center_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    for model in (Flat(), Hyperbolic(1.0)):
        for mu in (0.5, 1.0, 3.0):
            cfg = Configuration(model, [[0.0, 0.0]], [mu], 1.0)
            e = ground_state(cfg).energy
            worst = max(worst, abs(e + mu * mu) / (mu * mu))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-9 and elapsed < 1.0, f"max rel err {worst:.2e}, {elapsed:.3f} s")


def test_criterion_2_flat_closed_forms():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20)
    worst = 0.0
    for nu, mu, d in rng.uniform([0.2, 0.2, 0.1], [4.0, 4.0, 3.0], (50, 3)):
        cfg = Configuration(Flat(), [[0.0, 0.0], [d, 0.0]], [mu, mu], d)
        pm = assemble(cfg, nu).entries
        # Phi_ii = int (e^{-mu^2 t} - e^{-nu^2 t}) K_t(0), Phi_ij = -int e^{-nu^2 t} K_t(d); K_t(r) = e^{-r^2/4t}/(4 pi t)
        diag = _laplace(lambda t: -math.expm1(-(nu * nu - mu * mu) * t) * math.exp(-mu * mu * t) / (4 * math.pi * t)
                        if nu > mu else
                        math.expm1(-(mu * mu - nu * nu) * t) * math.exp(-nu * nu * t) / (4 * math.pi * t),
                        1 / max(nu, mu) ** 2)
        off = -_laplace(lambda t: math.exp(-nu * nu * t - d * d / (4 * t)) / (4 * math.pi * t), d / nu)
        worst = max(worst, abs(pm[0, 0] - diag) / abs(diag), abs(pm[1, 1] - diag) / abs(diag),
                    abs(pm[0, 1] - off) / abs(off), abs(pm[1, 0] - off) / abs(off))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-8 and elapsed < 10.0, f"max rel err {worst:.2e}, {elapsed:.2f} s")


def test_criterion_3_hyperbolic_diagonal_oracle():
    rng = np.random.default_rng(30)
    worst = 0.0
    for _ in range(100):
        a = rng.uniform(0.01, 50)
        b = a + rng.uniform(1e-3, 100)
        ref = digamma((1 + b) / 2) - digamma((1 + a) / 2)
        worst = max(worst, abs(frullani_sinh_integral(a, b) - ref) / abs(ref))
    violations = 0
    for kappa in (0.01, 0.1, 0.5, 1.0, 4.0, 10.0):
        for mu in (0.1, 0.5, 1.0, 3.0):
            for ratio in (1.0, 1.01, 1.5, 3.0, 10.0, 100.0):
                nu = mu * ratio
                if diagonal_lower_bound(kappa, nu, mu) > phi_diagonal(Hyperbolic(kappa), nu, mu) + 1e-15:
                    violations += 1
    report(3, worst <= 1e-9 and violations == 0, f"max rel err {worst:.2e}, bound violations {violations}")


def test_criterion_4_packing_anchors():
    flat_n1 = packing_count_bound_exact(0.0, 1.0, 1)
    violations = 0
    for kappa in (1e-12, 0.5, 1.0, 4.0):
        for d in (0.5, 1.0, 2.0):
            for lev in range(1, 21):
                relaxed = packing_count_bound_relaxed(kappa, d, lev)
                exact = packing_count_bound_exact(kappa, d, lev)
                greedy = level_count(kappa, d, lev)
                if not relaxed >= exact >= greedy:
                    violations += 1
    # the constructed packings honour d_min
    spaced = all(min_pairwise_distance(hyperbolic_level_packing(k, 1.0, 3)) >= 1.0 - 1e-9 for k in (0.5, 1.0, 4.0))
    report(4, flat_n1 == 6.0 and violations == 0 and spaced,
           f"n(1) = {flat_n1!r}, ordering violations {violations}")


def test_criterion_5_holmgren_soundness():
    rng = np.random.default_rng(50)
    violations = 0
    for _ in range(200):
        n = int(rng.integers(2, 51))
        b = rng.normal(size=(n, n)) * rng.uniform(0.01, 100)
        a = (b + b.T) / 2
        np.fill_diagonal(a, 0.0)
        if holmgren_norm(a) < np.linalg.norm(a, 2) * (1 - 1e-14):
            violations += 1
    report(5, violations == 0, f"violations {violations}/200")


def _end_to_end(family, cert):
    study = truncation_study(family, nu_star=cert.nu_star)
    gates = [neumann_gate(split(assemble(cfg, cert.nu_star))) for cfg in family]
    margins = study.energies + cert.nu_star ** 2
    return study, gates, margins


def test_criterion_6_certificate_flat():
    t0 = time.perf_counter()
    cert = certificate_ch(0.0, 2.0, 1.0, A=2.0, B=5.0)
    family = [hex_lattice(2.0, lev) for lev in (0, 1, 2, 3, 4, 7)]
    study, gates, margins = _end_to_end(family, cert)
    elapsed = time.perf_counter() - t0
    ok = (study.sizes.tolist() == [1, 7, 19, 37, 61, 169] and study.monotone and study.certified
          and max(gates) < 1 and elapsed < 120)
    report(6, ok, f"nu* = {cert.nu_star:.10f}, E_gr = {np.round(study.energies, 6).tolist()}, "
                  f"max gate {max(gates):.3g}, {elapsed:.1f} s")


def test_criterion_7_certificate_hyperbolic():
    cert = certificate_ch(1.0, 2.0, 1.0, A=2.0, B=5.0)
    family = [hyperbolic_level_packing(1.0, 2.0, lev) for lev in range(5)]
    study, gates, margins = _end_to_end(family, cert)
    ok = study.monotone and study.certified and min(margins) > 0 and max(gates) < 1
    report(7, ok, f"sizes {study.sizes.tolist()}, nu* = {cert.nu_star:.10f}, "
                  f"E_gr = {np.round(study.energies, 6).tolist()}, min margin {min(margins):.4g}")


def test_criterion_8_generic_consistency():
    p = GenericBounds(C=1.0, D=1.0, rho=1.0, n_star=6, kappa=1.0)
    d, nu, l = 1.0, 2.0, 1
    dist = l * d

    def integrand(t):
        weight = (1 + dist * dist / t) ** 2 * math.exp(-nu * nu * t - dist * dist / (4 * t)) / (4 * math.pi)
        return weight * (p.C / t + p.D / p.rho ** 2)

    quad = _laplace(integrand, dist / (2 * nu))
    tint_err = abs(offdiag_term_generic(l, p, d, nu) - quad) / quad
    dominated = all(b.closed_form >= b.series
                    for b in (offdiag_norm_bound_generic(p, d, x) for x in (1.7918, 1.8, 2, 3, 5, 10, 30)))
    cert = certificate_generic(p, d, 1.0)
    margin = cert.margin()
    valid = cert.validity and cert.nu_star >= generic_validity_nu(p, d)
    report(8, tint_err <= 1e-8 and dominated and margin > 0 and valid,
           f"tint rel err {tint_err:.2e}, nu* = {cert.nu_star:.6f}, margin {margin:.3g}")


def test_criterion_9_renormalization_flow():
    eps = (1e-2, 1e-3, 1e-4)
    ok = True
    details = []
    for model in (Flat(), Hyperbolic(1.0)):
        limit = phi_diagonal(model, 2.0, 1.0)
        gaps = [abs(regularized_phi_diagonal(model, e, 2.0, 1.0) - limit) for e in eps]
        lams = [regularized_coupling(model, e, 1.0) for e in eps]
        ok &= gaps[0] > gaps[1] > gaps[2] and lams[0] > lams[1] > lams[2] > 0
        details.append(f"{model.kind} gaps {[f'{g:.2e}' for g in gaps]}")
    report(9, ok, "; ".join(details))


def test_criterion_10_divergence():
    e = {d: ground_state(Configuration(Flat(), [[0.0, 0.0], [d, 0.0]], [1.0, 1.0], d)).energy
         for d in (1.0, 0.1, 0.01)}
    ok = e[0.01] < e[0.1] < e[1.0] and e[0.1] / e[1.0] > 2 and e[0.01] / e[0.1] > 2
    report(10, ok, f"E_gr(1, 0.1, 0.01) = {e[1.0]:.5g}, {e[0.1]:.5g}, {e[0.01]:.5g}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
