import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sint

from krein2d.bounds import (
    Certificate,
    certificate_ch,
    certificate_generic,
    diagonal_lower_bound,
    generic_validity_nu,
    holmgren_norm,
    neumann_gate,
    offdiag_norm_bound_generic,
    offdiag_rowsum_bound_ch,
    offdiag_term_generic,
    verify_certificate,
)
from krein2d.errors import (
    ContractViolation,
    IncompatibleCertificateError,
    ThresholdError,
    ValidityError,
)
from krein2d.geometry import (
    Configuration,
    Flat,
    GenericBounds,
    Hyperbolic,
    PhysicalConstants,
    hex_lattice,
    hyperbolic_level_packing,
)
from krein2d.principal import assemble, phi_diagonal, split
from krein2d.spectrum import count_bound_states_below, ground_state
from krein2d.special import bessel_k0

# mpmath findroot of the certificate equality (natural units, A=2, B=5, mu*=1)
CERT_FLAT_D1 = 5.9387728405560
CERT_FLAT_D2 = 3.529280661728
CERT_HYP_K1_D2 = 4.73292241348


def random_symmetric_zero_diag(rng, n):
    b = rng.normal(size=(n, n)) * rng.uniform(0.1, 10)
    a = (b + b.T) / 2
    np.fill_diagonal(a, 0)
    return a


class TestHolmgren:
    def test_tight_pair(self):
        assert holmgren_norm(np.array([[0.0, -1.0], [-1.0, 0.0]])) == 1.0

    def test_zero(self):
        assert holmgren_norm(np.zeros((4, 4))) == 0.0

    def test_dominates_spectral_norm(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            a = random_symmetric_zero_diag(rng, 8)
            assert holmgren_norm(a) >= np.linalg.norm(a, 2) * (1 - 1e-14)

    def test_rejects_diagonal(self):
        with pytest.raises(ContractViolation):
            holmgren_norm(np.eye(2))


class TestGate:
    def test_single_center(self):
        cfg = Configuration(Flat(), [[0, 0]], [1.0], 1.0)
        assert neumann_gate(split(assemble(cfg, 2.0))) == 0.0

    def test_two_center_closed_form(self):
        # D_ii = (1/4 pi) ln 9, |O_12| = (1/2 pi) K0(3)
        cfg = Configuration(Flat(), [[0, 0], [1, 0]], [1, 1], 1.0)
        gate = neumann_gate(split(assemble(cfg, 3.0)))
        assert gate == pytest.approx(2 * bessel_k0(3.0) / math.log(9), rel=1e-14)
        assert gate == pytest.approx(0.0316213, abs=1e-7)

    def test_sentinel(self):
        cfg = Configuration(Flat(), [[0, 0], [1, 0]], [1, 1], 1.0)
        assert neumann_gate(split(assemble(cfg, 0.9))) == math.inf

    def test_gate_implies_no_bound_state(self):
        rng = np.random.default_rng(2024)
        closed = 0
        for k in range(100):
            model = Flat() if k % 2 == 0 else Hyperbolic(float(rng.uniform(0.2, 3)))
            n = int(rng.integers(2, 9))
            while True:
                if isinstance(model, Flat):
                    pts = rng.uniform(-2, 2, (n, 2))
                else:
                    r = np.sqrt(rng.uniform(0, 0.7, n))
                    th = rng.uniform(0, 2 * np.pi, n)
                    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
                try:
                    cfg = Configuration(model, pts, rng.uniform(0.5, 2, n), 0.3)
                    break
                except Exception:
                    continue
            for nu in cfg.mu_star * np.array([1.05, 1.5, 2, 4, 8]):
                if neumann_gate(split(assemble(cfg, nu))) < 1:
                    closed += 1
                    assert count_bound_states_below(cfg, nu) == 0
        assert closed > 100


class TestDiagonalBound:
    def test_flat(self):
        assert diagonal_lower_bound(0.0, math.e, 1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-15)

    def test_hyperbolic_value(self):
        val = diagonal_lower_bound(4.0, math.sqrt(3), 1.0)
        assert val == pytest.approx(math.log(3 / (1 + math.sqrt(2))) / (2 * math.pi), rel=1e-14)
        assert val <= phi_diagonal(Hyperbolic(4.0), math.sqrt(3), 1.0)

    def test_equal(self):
        assert diagonal_lower_bound(1.0, 1.3, 1.3) == 0.0
        assert diagonal_lower_bound(0.0, 1.3, 1.3) == 0.0

    @settings(max_examples=150, deadline=None)
    @given(st.floats(0.01, 10), st.floats(0.05, 5), st.floats(1.0, 30))
    def test_below_exact(self, kappa, mu, ratio):
        nu = mu * ratio
        assert diagonal_lower_bound(kappa, nu, mu) <= phi_diagonal(Hyperbolic(kappa), nu, mu) + 1e-15


class TestRowSum:
    def test_flat_closed_form(self):
        assert offdiag_rowsum_bound_ch(0.0, 1.0, 5.0).closed_form == pytest.approx(0.4, rel=1e-15)

    @pytest.mark.parametrize("kappa", [0.0, 0.25, 1.0, 4.0])
    def test_series_below_closed(self, kappa):
        crit = math.sqrt(5.0 * kappa)
        for d in (0.5, 1.0, 2.0):
            for nu in (crit + 0.1, crit + 1, 2 * crit + 3, 10 + crit):
                b = offdiag_rowsum_bound_ch(kappa, d, nu)
                assert 0 < b.series <= b.closed_form

    def test_threshold(self):
        with pytest.raises(ThresholdError) as info:
            offdiag_rowsum_bound_ch(1.0, 1.0, 2.0)
        assert info.value.critical_nu == pytest.approx(math.sqrt(5.0))

    def test_pole(self):
        crit = math.sqrt(5.0)
        vals = [offdiag_rowsum_bound_ch(1.0, 1.0, crit + h).closed_form for h in (1e-1, 1e-4, 1e-8)]
        assert vals[0] < vals[1] < vals[2] and vals[2] > 1e6

    def test_dominates_actual_rowsum(self):
        cfg = hex_lattice(1.0, 6)
        pm = assemble(cfg, 3.0)
        off = split(pm).offdiag
        assert holmgren_norm(off) <= offdiag_rowsum_bound_ch(0.0, 1.0, 3.0).closed_form


class TestCertificateCH:
    def test_flat_values(self):
        c1 = certificate_ch(0.0, 1.0, 1.0)
        c2 = certificate_ch(0.0, 2.0, 1.0)
        assert c1.regime == "flat_limit"
        assert c1.nu_star == pytest.approx(CERT_FLAT_D1, rel=2e-10)
        assert c2.nu_star == pytest.approx(CERT_FLAT_D2, rel=2e-10)
        assert c1.nu_star >= CERT_FLAT_D1 * (1 - 1e-12)

    def test_flat_equation(self):
        # 20 pi / nu^2 = ln nu with hbar^2/2m d^2 = 1
        nu = certificate_ch(0.0, 1.0, 1.0).nu_star
        assert 20 * math.pi / nu ** 2 == pytest.approx(math.log(nu), rel=1e-9)

    def test_hyperbolic_value(self):
        c = certificate_ch(1.0, 2.0, 1.0)
        assert c.regime == "cartan_hadamard"
        assert c.nu_star == pytest.approx(CERT_HYP_K1_D2, rel=2e-10)

    @pytest.mark.parametrize("kappa", [0.0, 0.3, 1.0, 4.0])
    def test_strict_margin(self, kappa):
        c = certificate_ch(kappa, 1.5, 1.2)
        assert c.margin() > 0
        lhs, rhs = c.sides(c.nu_star * (1 - 1e-8))
        assert lhs >= rhs
        assert c.energy_lower_bound == -c.nu_star ** 2

    def test_monotonicity(self):
        base = dict(kappa=1.0, d_min=2.0, mu_star=1.0, A=2.0, B=5.0)
        nu = lambda **kw: certificate_ch(**{**base, **kw}).nu_star
        ref = nu()
        assert nu(d_min=2.5) < ref < nu(d_min=1.5)
        assert nu(A=1.5) < ref < nu(A=3.0)
        assert nu(B=4.5) < ref < nu(B=6.0)
        assert nu(kappa=0.5) < ref < nu(kappa=2.0)
        assert ref < nu(mu_star=1.5)

    def test_units(self):
        c = PhysicalConstants(hbar=2.0, mass=0.5)
        cert = certificate_ch(0.0, 1.0, 1.0, constants=c)
        # hbar^2/2m = 4
        assert 2 * math.pi * 10 * 4 / cert.nu_star ** 2 == pytest.approx(math.log(cert.nu_star), rel=1e-9)

    def test_gate_on_hex(self):
        cert = certificate_ch(0.0, 2.0, 1.0)
        for lev in range(5):
            cfg = hex_lattice(2.0, lev)
            assert neumann_gate(split(assemble(cfg, cert.nu_star))) < 1

    def test_invalid(self):
        from krein2d.errors import DomainError
        with pytest.raises(DomainError):
            certificate_ch(1.0, 1.0, 1.0, B=4.0)
        with pytest.raises(DomainError):
            certificate_ch(-1.0, 1.0, 1.0)


def generic_term_quadrature(l, p, d_min, nu):
    # t-integrals of the extended small-t (C) and large-t (D) integrands, natural units
    d = l * d_min

    def c_part(t):
        return p.C / (4 * math.pi * t) * (1 + d * d / t) ** 2 * math.exp(-nu * nu * t - d * d / (4 * t))

    def d_part(t):
        return p.D / (4 * math.pi * p.rho ** 2) * (1 + d * d / t) ** 2 * math.exp(-nu * nu * t - d * d / (4 * t))

    peak = d / (2 * nu)
    total = 0.0
    for f in (c_part, d_part):
        for a, b in [(0, peak), (peak, 20 * peak + 50 / nu ** 2), (20 * peak + 50 / nu ** 2, np.inf)]:
            total += sint.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    return total


class TestGeneric:
    P = GenericBounds(C=1.0, D=1.0, rho=1.0, n_star=6, kappa=1.0)

    def test_term_vs_quadrature(self):
        assert offdiag_term_generic(1, self.P, 1.0, 2.0) == pytest.approx(
            generic_term_quadrature(1, self.P, 1.0, 2.0), rel=1e-8)
        p = GenericBounds(C=0.7, D=2.5, rho=0.6, n_star=4)
        for l, nu in [(1, 0.5), (2, 1.3), (5, 3.0)]:
            assert offdiag_term_generic(l, p, 0.8, nu) == pytest.approx(
                generic_term_quadrature(l, p, 0.8, nu), rel=1e-8)

    def test_term_decreasing(self):
        vals = [offdiag_term_generic(l, self.P, 1.0, 2.5) for l in range(1, 15)]
        assert np.all(np.diff(vals) < 0)

    def test_term_zero(self):
        assert offdiag_term_generic(3, GenericBounds(C=0.0, D=0.0), 1.0, 2.0) == 0.0

    def test_validity_threshold(self):
        assert generic_validity_nu(self.P, 1.0) == pytest.approx(math.log(6), rel=1e-15)
        with pytest.raises(ValidityError) as info:
            offdiag_norm_bound_generic(self.P, 1.0, 1.7)
        assert info.value.critical_nu == pytest.approx(math.log(6))

    def test_decreasing_on_valid_ray(self):
        nus = np.linspace(math.log(6) + 0.05, 40, 60)
        vals = [offdiag_norm_bound_generic(self.P, 1.0, nu).closed_form for nu in nus]
        assert np.all(np.diff(vals) < 0)

    @pytest.mark.parametrize("nu", [1.7918, 1.8, 2.0, 3.0, 5.0, 10.0])
    def test_closed_dominates_series(self, nu):
        b = offdiag_norm_bound_generic(self.P, 1.0, nu)
        assert b.closed_form >= b.series > 0

    def test_certificate(self):
        c = certificate_generic(self.P, 1.0, 1.0)
        assert c.regime == "generic" and c.validity
        assert c.nu_star == pytest.approx(31.1156, abs=1e-3)
        assert c.margin() > 0
        assert c.nu_star * 1.0 >= math.log(6)

    def test_degenerate(self):
        p0 = GenericBounds(C=0.0, D=0.0, n_star=6, kappa=1.0)
        assert certificate_generic(p0, 1.0, 1.0).nu_star == pytest.approx(math.log(6), rel=1e-15)
        assert certificate_generic(p0, 1.0, 3.0).nu_star == pytest.approx(3.0, rel=1e-9)

    def test_increasing_in_n_star(self):
        vals = [certificate_generic(dataclasses.replace(self.P, n_star=n), 1.0, 1.0).nu_star for n in (2, 4, 6, 10)]
        assert np.all(np.diff(vals) > 0)

    def test_gap_tightens(self):
        with_gap = certificate_generic(dataclasses.replace(self.P, lambda_gap=0.5), 1.0, 1.0)
        assert with_gap.nu_star < certificate_generic(self.P, 1.0, 1.0).nu_star
        assert with_gap.margin() > 0


class TestVerify:
    def test_single_center(self):
        cfg = Configuration(Flat(), [[0, 0]], [1.0], 1.0)
        rep = verify_certificate(cfg, certificate_ch(0.0, 1.0, 1.0))
        assert rep.ok and rep.energy == pytest.approx(-1.0)

    def test_hex_61(self):
        cfg = hex_lattice(2.0, 4)
        rep = verify_certificate(cfg, certificate_ch(0.0, 2.0, 1.0))
        assert rep.status == "verified" and rep.margin > 0 and rep.gate < 1 and rep.size == 61

    def test_hyperbolic(self):
        cfg = hyperbolic_level_packing(1.0, 2.0, 3)
        rep = verify_certificate(cfg, certificate_ch(1.0, 2.0, 1.0))
        assert rep.ok

    def test_corrupted_inconclusive(self):
        cfg = hex_lattice(2.0, 4)
        cert = certificate_ch(0.0, 2.0, 1.0)
        bad = dataclasses.replace(cert, nu_star=cert.nu_star / 2)
        rep = verify_certificate(cfg, bad)
        assert rep.status == "inconclusive" and rep.certificate_margin < 0 and not rep.ok

    def test_corrupted_failed(self):
        cfg = hex_lattice(1.0, 1)
        cert = certificate_ch(0.0, 1.0, 1.0)
        e = ground_state(cfg).energy
        bad = dataclasses.replace(cert, nu_star=math.sqrt(-e) * 0.9)
        rep = verify_certificate(cfg, bad)
        assert rep.status == "failed" and rep.margin < 0

    def test_incompatible(self):
        flat_cert = certificate_ch(0.0, 2.0, 1.0)
        with pytest.raises(IncompatibleCertificateError):
            verify_certificate(hyperbolic_level_packing(1.0, 2.0, 1), flat_cert)
        with pytest.raises(IncompatibleCertificateError):
            verify_certificate(hyperbolic_level_packing(2.0, 2.0, 1), certificate_ch(1.0, 2.0, 1.0))
        with pytest.raises(IncompatibleCertificateError):
            verify_certificate(hex_lattice(1.0, 1), flat_cert)
        with pytest.raises(IncompatibleCertificateError):
            verify_certificate(hex_lattice(2.0, 1, mu=1.5), flat_cert)

    def test_as_dict(self):
        d = certificate_ch(1.0, 2.0, 1.0).as_dict()
        assert d["regime"] == "cartan_hadamard" and d["A"] == 2.0
        assert isinstance(certificate_generic(TestGeneric.P, 1.0, 1.0).as_dict()["validity"], bool)
        assert isinstance(certificate_ch(0, 1, 1), Certificate)
