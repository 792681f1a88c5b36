"""Tests for the Galerkin projection and the mechanical Newton solver."""
import numpy as np
import pytest

from ductile import tensors as tn
from ductile.errors import KrylovError, NewtonError
from ductile.grid import (
    FrequencyScheme,
    GridSpec,
    build_frequencies,
    forward_transform,
    inverse_transform,
    symmetric_gradient_spectral,
)
from ductile.gurson import GTNParams, GursonMaterial
from ductile.lemaitre import LemaitreMaterial, LemaitreParams
from ductile.materials import ElasticMaterial, ElasticModuli, MaterialMap
from ductile.mechanics import (
    ControlMode,
    MacroLoad,
    NewtonConfig,
    build_projection,
    newton_solve,
    residual_norm,
)
from ductile.microstructure import generate_rve_2d

STRAIN, STRESS = ControlMode.STRAIN, ControlMode.STRESS


def uniaxial(e11):
    """E11 prescribed, every other component stress free."""
    return MacroLoad.from_modes({"11": STRAIN}, {"11": e11})


def solve(grid, index, materials, load, cfg, scheme=FrequencyScheme.CONTINUOUS):
    freq = build_frequencies(grid, scheme)
    op = build_projection(grid, freq, load.stress_mask)
    mmap = MaterialMap(index, materials)
    names = mmap.nonlocal_variables
    zeros = {v: np.zeros(grid.cells) for v in names}
    eps0 = np.zeros(grid.cells + (3, 3))
    return newton_solve(mmap, mmap.initial_states(), eps0, zeros, zeros, load, op, cfg)


class TestMacroLoad:
    """Test MacroLoad construction."""

    def test_from_modes(self):
        """Test masks and targets from component names."""
        load = MacroLoad.from_modes({"11": STRAIN, "12": "strain", "22": STRESS}, {"11": 0.01, "22": 5.0})
        assert load.strain[0, 0] == 0.01
        assert load.stress[1, 1] == 5.0
        assert not load.stress_controlled[0, 1] and not load.stress_controlled[1, 0]
        assert load.stress_controlled[2, 2]
        np.testing.assert_array_equal(load.strain_mask + load.stress_mask, np.ones((3, 3)))

    def test_invalid(self):
        """Test shape and symmetry checks."""
        with pytest.raises(ValueError):
            MacroLoad(np.zeros((2, 2)), np.zeros((3, 3)), np.zeros((3, 3)))
        mask = np.zeros((3, 3), dtype=bool)
        mask[0, 1] = True
        with pytest.raises(ValueError):
            MacroLoad(mask, np.zeros((3, 3)), np.zeros((3, 3)))

    def test_newton_config(self):
        """Test NewtonConfig validation."""
        with pytest.raises(ValueError):
            NewtonConfig(tolerance=0.0)
        with pytest.raises(ValueError):
            NewtonConfig(max_iterations=0)


class TestProjection:
    """Test the closed-form projection operator."""

    def setup_method(self):
        self.grid = GridSpec((6, 5, 4), (1.0, 0.8, 0.7))
        self.freq = build_frequencies(self.grid)
        self.rng = np.random.default_rng(11)

    def random_tensor_field(self):
        return tn.sym(self.rng.standard_normal(self.grid.cells + (3, 3)))

    def test_idempotent(self):
        """Test that projecting twice changes nothing."""
        op = build_projection(self.grid, self.freq)
        once = op.apply(self.random_tensor_field())
        np.testing.assert_allclose(op.apply(once), once, atol=1e-12)
        np.testing.assert_allclose(once, tn.sym(once), atol=1e-14)

    def test_compatible_field_is_kept(self):
        """Test that a symmetric displacement gradient passes unchanged."""
        op = build_projection(self.grid, self.freq)
        u = self.rng.standard_normal(self.grid.cells + (3,))
        eps = inverse_transform(symmetric_gradient_spectral(forward_transform(u, self.grid), self.freq), self.grid)
        np.testing.assert_allclose(op.apply(eps), eps, atol=1e-10)

    def test_zero_mode_mask(self):
        """Test that only stress-controlled averages pass the zero frequency."""
        mask = np.zeros((3, 3))
        mask[1, 1] = mask[2, 2] = 1.0
        op = build_projection(self.grid, self.freq, mask)
        tau = np.broadcast_to(tn.sym(self.rng.standard_normal((3, 3))), self.grid.cells + (3, 3))
        out = op.apply(np.ascontiguousarray(tau))
        np.testing.assert_allclose(out, np.broadcast_to(mask * tau[0, 0, 0], out.shape), atol=1e-12)

    def test_dense_tensor(self):
        """Test that the per-mode operator tensor reproduces apply_hat."""
        op = build_projection(self.grid, self.freq)
        tau_hat = forward_transform(self.random_tensor_field(), self.grid)
        dense = np.einsum("...ijkl,...kl->...ij", op.tensor(), tau_hat)
        np.testing.assert_allclose(dense, op.apply_hat(tau_hat), atol=1e-10)

    def test_grid_mismatch(self):
        """Test that a frequency table of another grid is refused."""
        with pytest.raises(ValueError):
            build_projection(GridSpec.square(4), self.freq)


class TestNewton:
    """Test equilibrium solves."""

    def test_homogeneous_uniaxial_stress(self):
        """Test the lateral contraction of a homogeneous elastic cell."""
        moduli = ElasticModuli(200000.0, 0.3)
        grid = GridSpec.square(4)
        result = solve(grid, np.zeros(grid.cells, dtype=np.uint8), {0: ElasticMaterial(moduli)},
                       uniaxial(1e-3), NewtonConfig(tolerance=1e-10, cg_tolerance=1e-12))
        mean_eps = result.strain.mean(axis=(0, 1, 2))
        mean_sig = result.stress.mean(axis=(0, 1, 2))
        assert mean_eps[1, 1] == pytest.approx(-0.3e-3, rel=1e-8)
        assert mean_eps[2, 2] == pytest.approx(-0.3e-3, rel=1e-8)
        assert mean_sig[0, 0] == pytest.approx(200.0, rel=1e-8)
        assert result.iterations == 1

    @pytest.mark.parametrize("scheme", [FrequencyScheme.CONTINUOUS, FrequencyScheme.WILLOT])
    def test_laminate(self, scheme):
        """Test the closed-form response of a layered elastic cell."""
        grid = GridSpec((9, 1, 1), (1.0, 1.0 / 9.0, 1.0 / 9.0))
        index = np.zeros(grid.cells, dtype=np.uint8)
        index[:4] = 1
        a, b = ElasticModuli(400000.0, 0.3), ElasticModuli(100000.0, 0.25)
        materials = {0: ElasticMaterial(b), 1: ElasticMaterial(a)}
        # plane strain in 33 and no shear, sigma22 free on average
        modes = {name: STRAIN for name in tn.COMPONENT_NAMES}
        modes["22"] = STRESS
        load = MacroLoad.from_modes(modes, {"11": 1e-3})
        result = solve(grid, index, materials, load, NewtonConfig(tolerance=1e-10, cg_tolerance=1e-12), scheme)

        def lame(m):
            return m.K - 2.0 * m.mu / 3.0, m.mu

        (la, ma), (lb, mb) = lame(a), lame(b)
        fa, fb = 4.0 / 9.0, 5.0 / 9.0
        # unknowns: e11 in a, e11 in b, shared e22
        A = np.array([
            [la + 2.0 * ma, -(lb + 2.0 * mb), la - lb],
            [fa, fb, 0.0],
            [fa * la, fb * lb, fa * (la + 2.0 * ma) + fb * (lb + 2.0 * mb)],
        ])
        e11a, e11b, e22 = np.linalg.solve(A, [0.0, 1e-3, 0.0])
        eps = result.strain[:, 0, 0]
        np.testing.assert_allclose(eps[:4, 0, 0], e11a, rtol=1e-7)
        np.testing.assert_allclose(eps[4:, 0, 0], e11b, rtol=1e-7)
        np.testing.assert_allclose(eps[:, 1, 1], e22, rtol=1e-7)
        sigma = result.stress[:, 0, 0]
        np.testing.assert_allclose(sigma[:, 0, 0], sigma[0, 0, 0], rtol=1e-7)
        assert abs(sigma[:, 1, 1].mean()) < 1e-7 * abs(sigma[0, 0, 0])

    def test_rve_modulus_between_bounds(self):
        """Test that the disc RVE modulus lies between the Reuss and Voigt bounds."""
        grid = GridSpec.square(32)
        index = generate_rve_2d(grid, 0.1).phase_index
        matrix, inclusion = ElasticModuli(300000.0, 0.3), ElasticModuli(900000.0, 0.3)
        load = MacroLoad.from_modes({name: STRAIN for name in tn.COMPONENT_NAMES}, {"11": 1e-3})
        result = solve(grid, index, {0: ElasticMaterial(matrix), 1: ElasticMaterial(inclusion)}, load,
                       NewtonConfig(tolerance=1e-10, cg_tolerance=1e-12))
        modulus = result.stress.mean(axis=(0, 1, 2))[0, 0] / 1e-3

        c = float(index.mean())
        assert 0.09 < c < 0.11
        voigt_K = (1.0 - c) * matrix.K + c * inclusion.K
        voigt_mu = (1.0 - c) * matrix.mu + c * inclusion.mu
        reuss_K = 1.0 / ((1.0 - c) / matrix.K + c / inclusion.K)
        reuss_mu = 1.0 / ((1.0 - c) / matrix.mu + c / inclusion.mu)
        assert reuss_K + 4.0 * reuss_mu / 3.0 < modulus < voigt_K + 4.0 * voigt_mu / 3.0

    def test_newton_error(self):
        """Test that a step with power-law hardening needs more than one linearization."""
        grid = GridSpec.square(2)
        material = GursonMaterial(ElasticModuli(300000.0, 0.3), GTNParams())
        with pytest.raises(NewtonError) as info:
            solve(grid, np.zeros(grid.cells, dtype=np.uint8), {0: material}, uniaxial(0.01),
                  NewtonConfig(tolerance=1e-10, max_iterations=1))
        assert info.value.iterations == 1

    def test_plastic_convergence(self):
        """Test that the power-law hardening cell reaches equilibrium in a few iterations."""
        grid = GridSpec.square(2)
        material = GursonMaterial(ElasticModuli(300000.0, 0.3), GTNParams())
        result = solve(grid, np.zeros(grid.cells, dtype=np.uint8), {0: material}, uniaxial(0.01),
                       NewtonConfig(tolerance=1e-8))
        mean_sig = result.stress.mean(axis=(0, 1, 2))
        assert abs(mean_sig[1, 1]) < 1e-5 * mean_sig[0, 0]
        assert mean_sig[0, 0] > 1000.0
        assert 1 < result.iterations <= 10

    def test_linear_hardening_single_step(self):
        """Test that a homogeneous linear-hardening cell converges in one linearization."""
        grid = GridSpec.square(2)
        material = LemaitreMaterial(ElasticModuli(300000.0, 0.3), LemaitreParams())
        result = solve(grid, np.zeros(grid.cells, dtype=np.uint8), {0: material}, uniaxial(0.01),
                       NewtonConfig(tolerance=1e-8))
        assert result.iterations == 1

    def test_heterogeneous_plastic_convergence(self):
        """Test equilibrium of a plastic matrix around a stiff elastic inclusion."""
        grid = GridSpec.square(8)
        index = np.zeros(grid.cells, dtype=np.uint8)
        index[3:5, 3:5] = 1
        materials = {0: LemaitreMaterial(ElasticModuli(300000.0, 0.3), LemaitreParams()),
                     1: ElasticMaterial(ElasticModuli(900000.0, 0.3))}
        result = solve(grid, index, materials, uniaxial(0.01), NewtonConfig(tolerance=1e-8))
        mean_sig = result.stress.mean(axis=(0, 1, 2))
        assert abs(mean_sig[1, 1]) < 1e-5 * mean_sig[0, 0]
        assert result.iterations > 1
        assert result.residual <= 1e-8

    def test_krylov_error(self):
        """Test that the inner CG cap raises KrylovError."""
        grid = GridSpec((9, 1, 1), (1.0, 1.0 / 9.0, 1.0 / 9.0))
        index = np.zeros(grid.cells, dtype=np.uint8)
        index[:4] = 1
        materials = {0: ElasticMaterial(ElasticModuli(100000.0, 0.25)),
                     1: ElasticMaterial(ElasticModuli(400000.0, 0.3))}
        with pytest.raises(KrylovError) as info:
            solve(grid, index, materials, uniaxial(1e-3), NewtonConfig(cg_tolerance=1e-14, cg_max_iterations=1))
        assert info.value.solver == "mechanics"

    def test_residual_norm_floor(self):
        """Test the normalization floor for an unloaded cell."""
        r = np.ones((2, 2, 1, 3, 3))
        assert residual_norm(r, np.zeros_like(r), 1000.0) == pytest.approx(3.0 / 1.0)
