import math

import numpy as np
import pytest

from triblock.coreshell_opt import (
    QUAD_RTOL,
    CoreShellGeometry,
    Placement,
    I11,
    I12,
    I22,
    dI12_dt,
    disk_self_interaction,
    f0,
    f0_csv_row,
    log_potential_of_disk,
    offset_objective,
)
from triblock.energy import InteractionMatrix, SurfaceTensions
from triblock.grid_spectral import green_regular_part_origin
from triblock.sharp import MassPair

SIG = SurfaceTensions(1.0, 2.0, 1.0)


def geom(t=0.0, m1=0.3, m2=0.15):
    return CoreShellGeometry.from_masses(m1, m2, t)


class TestGeometry:
    def test_from_masses(self):
        g = geom()
        assert g.r1 == pytest.approx(math.sqrt(0.45 / math.pi))
        assert g.r2 == pytest.approx(math.sqrt(0.15 / math.pi))
        assert g.m1 == pytest.approx(0.3) and g.m2 == pytest.approx(0.15)

    @pytest.mark.parametrize("r1, r2, t", [(1.0, 1.0, 0.0), (1.0, 0.0, 0.0), (1.0, 0.5, 0.6)])
    def test_validation(self, r1, r2, t):
        with pytest.raises(ValueError):
            CoreShellGeometry(r1, r2, t)


class TestI22:
    def test_closed_form(self):
        for r in (0.1, 0.5, 1.0, 2.0):
            assert I22(r) == pytest.approx(math.pi * r**4 / 8 * (1 - 4 * math.log(r)), rel=1e-12)

    def test_scaling_identity(self):
        r, lam = 0.3, 2.0
        lhs = I22(lam * r)
        rhs = lam**4 * (I22(r) - math.log(lam) * (math.pi * r * r) ** 2 / (2 * math.pi))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_monte_carlo(self):
        rng = np.random.default_rng(12345)
        N, chunk = 10_000_000, 1_000_000
        total, total_sq = 0.0, 0.0
        for _ in range(N // chunk):
            def disk(k):
                r = np.sqrt(rng.random(k))
                a = 2 * np.pi * rng.random(k)
                return r * np.cos(a), r * np.sin(a)

            x1, y1 = disk(chunk)
            x2, y2 = disk(chunk)
            v = -0.5 * np.log((x1 - x2) ** 2 + (y1 - y2) ** 2)
            total += v.sum()
            total_sq += (v * v).sum()
        mean = total / N
        se = math.sqrt((total_sq / N - mean**2) / N)
        scale = math.pi**2 / (2 * math.pi)  # |B|^2 / 2pi
        assert abs(I22(1.0) - scale * mean) <= 3 * scale * se

    def test_positive_small_disk(self):
        assert I22(0.2) > 0

    def test_disk_potential(self):
        r = 0.4
        for s in (0.0, 0.1, 0.3, 0.4):
            assert log_potential_of_disk(r, s) == pytest.approx(
                math.pi * r * r * (0.5 - math.log(r)) - math.pi * s * s / 2, rel=1e-14)
        # outside: mean value property
        assert log_potential_of_disk(r, 0.9) == pytest.approx(-math.pi * r * r * math.log(0.9), rel=1e-14)
        assert disk_self_interaction(r) == pytest.approx(I22(r), rel=1e-12)


class TestI12:
    def test_concentric_radial(self):
        g = geom()
        r1 = g.r1
        whole = math.pi * r1**2 * (0.5 - math.log(r1))
        assert I12(g) == pytest.approx(g.m2 / (2 * math.pi) * whole - I22(g.r2), rel=1e-12)

    def test_closed_form_in_t(self):
        # The inner disk centre stays inside B1, so the disk potential gives I12 exactly.
        base = geom()
        for frac in (0.0, 0.3, 0.7, 1.0):
            g = base.with_offset(frac * base.t_max)
            expect = g.m2 / (2 * math.pi) * log_potential_of_disk(g.r1, g.t) - I22(g.r2)
            assert I12(g) == pytest.approx(expect, rel=1e-11)

    def test_even(self):
        base = geom()
        for t in (0.05, 0.1, base.t_max):
            assert I12(base.with_offset(t)) == pytest.approx(I12(base.with_offset(-t)), rel=1e-13)

    def test_strictly_decreasing(self):
        base = geom()
        ts = np.linspace(0.0, base.t_max, 21)
        vals = np.array([I12(base.with_offset(t)) for t in ts])
        margins = -np.diff(vals)
        assert np.all(margins > 10 * QUAD_RTOL * np.abs(vals[1:]))

    def test_continuous_at_tangency(self):
        base = geom()
        a = I12(base.with_offset(base.t_max))
        b = I12(base.with_offset(base.t_max * (1 - 1e-9)))
        assert a == pytest.approx(b, rel=1e-9)

    def test_partition_identity(self):
        base = geom()
        whole = disk_self_interaction(base.r1)
        for t in np.linspace(0, base.t_max, 5):
            g = base.with_offset(t)
            assert I11(g) + 2 * I12(g) + I22(g.r2) == pytest.approx(whole, abs=1e-7)


class TestDerivative:
    def test_zero_at_centre(self):
        assert dI12_dt(geom()) == 0.0

    def test_negative(self):
        base = geom()
        for t in np.linspace(0, base.t_max, 8)[1:]:
            assert dI12_dt(base.with_offset(t)) < 0

    def test_finite_differences(self):
        base = geom()
        t = base.t_max / 2
        h = 1e-5
        fd = (I12(base.with_offset(t + h)) - I12(base.with_offset(t - h))) / (2 * h)
        assert dI12_dt(base.with_offset(t)) == pytest.approx(fd, abs=1e-6)

    def test_closed_form(self):
        base = geom()
        for t in (0.01, 0.05, base.t_max):
            g = base.with_offset(t)
            assert dI12_dt(g) == pytest.approx(-g.m2 * t / 2, rel=1e-10)


class TestF0:
    m = MassPair(0.3, 0.15)

    def test_concentric(self):
        res = f0(self.m, SIG, InteractionMatrix(5.0, 1.0, 3.0))
        assert res.tag is Placement.CONCENTRIC and res.t == 0.0

    def test_tangent(self):
        res = f0(self.m, SIG, InteractionMatrix(1.0, 5.0, 3.0))
        assert res.tag is Placement.TANGENT
        assert res.t == pytest.approx(res.geometry.r1 - res.geometry.r2)

    def test_indifferent(self):
        G = InteractionMatrix(2.0, 2.0, 3.0)
        res = f0(self.m, SIG, G)
        assert res.tag is Placement.INDIFFERENT
        base = CoreShellGeometry.from_masses(self.m.m1, self.m.m2)
        a = offset_objective(base, G)
        b = offset_objective(base.with_offset(base.t_max), G)
        assert a == pytest.approx(b, abs=10 * QUAD_RTOL * abs(a))

    def test_objective_affine_in_I12(self):
        G = InteractionMatrix(4.0, 1.5, 3.0)
        base = CoreShellGeometry.from_masses(self.m.m1, self.m.m2)
        ts = np.linspace(0, base.t_max, 7)
        obj = np.array([offset_objective(base.with_offset(t), G) for t in ts])
        lin = np.array([-(G.g11 - G.g12) * I12(base.with_offset(t)) for t in ts])
        resid = (obj - lin) - (obj - lin)[0]
        assert np.max(np.abs(resid)) <= 1e-7

    def test_optimal_over_offsets(self):
        for G in (InteractionMatrix(5.0, 1.0, 3.0), InteractionMatrix(1.0, 5.0, 3.0)):
            res = f0(self.m, SIG, G)
            base = CoreShellGeometry.from_masses(self.m.m1, self.m.m2)
            R0 = green_regular_part_origin()
            const = 0.5 * R0 * (G.g11 * 0.09 + 2 * G.g12 * 0.045 + G.g22 * 0.0225)
            for t in np.linspace(0, base.t_max, 9):
                assert res.value <= offset_objective(base.with_offset(t), G) + const + 1e-12

    def test_single_species_disk(self):
        G = InteractionMatrix(3.0, 0.0, 0.0)
        res = f0(MassPair(0.2, 0.0), SIG, G)
        r = math.sqrt(0.2 / math.pi)
        R0 = green_regular_part_origin()
        assert res.tag is Placement.DISK
        assert res.value == pytest.approx(1.5 * (I22(r) + 0.04 * R0), rel=1e-12)

    def test_relabel_asymmetry(self):
        G = InteractionMatrix(5.0, 1.0, 3.0)
        a = f0(MassPair(0.3, 0.15), SIG, G).value
        b = f0(MassPair(0.15, 0.3), SIG, InteractionMatrix(3.0, 1.0, 5.0)).value
        assert a != pytest.approx(b, rel=1e-6)

    def test_outside_core_shell_regime(self):
        with pytest.raises(NotImplementedError):
            f0(self.m, SurfaceTensions(1, 1, 1), InteractionMatrix(1, 0, 1))

    def test_csv_row(self):
        G = InteractionMatrix(5.0, 1.0, 3.0)
        res = f0(self.m, SIG, G)
        row = f0_csv_row(self.m, G, res)
        assert row["tag"] == "Concentric" and row["f0"] == res.value
