"""Tests for the Lemaitre damage model."""
import math

import numpy as np
import pytest

from ductile import tensors as tn
from ductile.lemaitre import LemaitreMaterial, LemaitreParams, damage_law
from ductile.materials import ElasticModuli, consistent_tangent_fd

MODULI = ElasticModuli(300000.0, 0.3)


def shear_strain(gamma):
    eps = np.zeros((1, 3, 3))
    eps[0, 0, 1] = eps[0, 1, 0] = gamma
    return eps


class TestLemaitreParams:
    """Test LemaitreParams validation."""

    def test_invalid(self):
        """Test rejection of inconsistent parameters."""
        with pytest.raises(ValueError):
            LemaitreParams(eps_C=0.3, eps_R=0.2)
        with pytest.raises(ValueError):
            LemaitreParams(k=-1.0)
        with pytest.raises(ValueError):
            LemaitreParams(D_max=1.0)


class TestDamageLaw:
    """Test the linear damage law."""

    def test_values(self):
        """Test the plateau, the ramp and the cap."""
        p = LemaitreParams()
        mid = 0.5 * (p.eps_C + p.eps_R)
        np.testing.assert_allclose(damage_law([0.0, p.eps_C, mid, p.eps_R, 1.0], p),
                                   [0.0, 0.0, 0.5, p.D_max, p.D_max])


class TestLemaitreUpdate:
    """Test the Lemaitre return mapping."""

    def setup_method(self):
        self.material = LemaitreMaterial(MODULI, LemaitreParams())
        self.zero = {"eps_p_eq": np.zeros(1)}

    def test_radial_return_matches_j2(self):
        """Test the plastic increment of the undamaged matrix in shear."""
        gamma = 0.01
        _, _, state = self.material.update(self.material.initial_state(1), shear_strain(gamma),
                                           self.zero, self.zero)
        mu, k = MODULI.mu, self.material.params.k
        q_tr = math.sqrt(3.0) * 2.0 * mu * gamma
        expected = (q_tr - 1000.0) / (3.0 * mu + k)
        assert state.get("eps_p_eq")[0] == pytest.approx(expected, rel=1e-10)
        assert abs(self.material.yield_value(state)[0]) < 1e-8
        assert state.get("active")[0] == 1.0

    def test_damage_scales_stress(self):
        """Test sigma = (1 - D) sigma_tilde with D from the non-local strain."""
        eps = shear_strain(0.01)
        state_n = self.material.initial_state(1)
        undamaged, _, _ = self.material.update(state_n, eps, self.zero, self.zero)
        bar = {"eps_p_eq": np.array([0.115])}
        sigma, tangent, state = self.material.update(state_n, eps, bar, self.zero)
        assert state.get("D")[0] == pytest.approx(0.5)
        np.testing.assert_allclose(sigma, 0.5 * undamaged)
        np.testing.assert_allclose(state.get("sigma_tilde"), undamaged)

    def test_damage_never_decreases(self):
        """Test that a lower non-local strain keeps the stored damage."""
        state_n = self.material.initial_state(1)
        state_n.internal["D"][:] = 0.4
        _, _, state = self.material.update(state_n, shear_strain(1e-4), self.zero, self.zero)
        assert state.get("D")[0] == pytest.approx(0.4)

    def test_elastic_unloading(self):
        """Test that unloading from a plastic state is elastic."""
        _, _, loaded = self.material.update(self.material.initial_state(1), shear_strain(0.01),
                                            self.zero, self.zero)
        sigma, tangent, state = self.material.update(loaded, shear_strain(0.009), self.zero, self.zero)
        assert state.get("active")[0] == 0.0
        assert state.get("eps_p_eq")[0] == pytest.approx(loaded.get("eps_p_eq")[0])
        np.testing.assert_allclose(tangent[0], MODULI.stiffness())

    @pytest.mark.parametrize("eps_bar", [0.0, 0.1])
    def test_consistent_tangent(self, eps_bar):
        """Test the analytical tangent against finite differences."""
        eps = np.array([[0.008, 0.003, 0.0], [0.003, -0.002, 0.001], [0.0, 0.001, -0.001]])[None]
        bar = {"eps_p_eq": np.array([eps_bar])}
        state_n = self.material.initial_state(1)
        _, tangent, _ = self.material.update(state_n, eps, bar, self.zero)
        fd = consistent_tangent_fd(self.material, state_n, eps, bar, self.zero, h=1e-6)
        assert np.linalg.norm(tangent - fd) / np.linalg.norm(fd) < 1e-6

    def test_tangent_major_symmetry(self):
        """Test that the Lemaitre tangent is major symmetric."""
        _, tangent, _ = self.material.update(self.material.initial_state(1), shear_strain(0.01),
                                             self.zero, self.zero)
        np.testing.assert_allclose(tangent, tn.major_sym(tangent), atol=1e-8)

    def test_local_sources(self):
        """Test that the equivalent plastic strain drives the Helmholtz equation."""
        _, _, state = self.material.update(self.material.initial_state(1), shear_strain(0.01),
                                           self.zero, self.zero)
        sources = self.material.local_sources(state)
        assert list(sources) == ["eps_p_eq"]
        assert sources["eps_p_eq"][0] > 0.0


class TestLemaitreRandomPaths:
    """Test the undamaged Lemaitre update along random multi-step strain paths."""

    def setup_method(self):
        self.material = LemaitreMaterial(MODULI, LemaitreParams())
        rng = np.random.default_rng(21)
        self.path = np.cumsum(tn.sym(rng.standard_normal((5, 1000, 3, 3))) * 2e-3, axis=0)
        self.zero = {"eps_p_eq": np.zeros(1000)}

    def j2_linear_hardening(self):
        """Closed-form radial return with dp = (q_tr - sigma0) / (3 mu + k)."""
        K, mu = MODULI.K, MODULI.mu
        sigma_Y, k = self.material.params.sigma_Y, self.material.params.k
        eps_p = np.zeros((1000, 3, 3))
        p = np.zeros(1000)
        stresses = []
        for eps in self.path:
            eps_e = eps - eps_p
            s_tr = 2.0 * mu * tn.dev(eps_e)
            q_tr = np.sqrt(1.5 * tn.ddot22(s_tr, s_tr))
            dp = np.maximum(q_tr - (sigma_Y + k * p), 0.0) / (3.0 * mu + k)
            direction = 1.5 * s_tr / np.where(q_tr > 0.0, q_tr, 1.0)[:, None, None]
            eps_p = eps_p + dp[:, None, None] * direction
            p = p + dp
            stresses.append(K * tn.trace(eps_e)[:, None, None] * tn.I2 + s_tr
                            - 2.0 * mu * dp[:, None, None] * direction)
        return np.array(stresses)

    def test_matches_j2_oracle(self):
        """Test the stress history against linear-hardening J2 plasticity."""
        expected = self.j2_linear_hardening()
        state = self.material.initial_state(1000)
        for step, eps in enumerate(self.path):
            sigma, _, state = self.material.update(state, eps, self.zero, self.zero)
            np.testing.assert_allclose(sigma, expected[step], rtol=1e-10, atol=1e-10 * 1000.0)
            assert np.all(state.get("D") == 0.0)

    def test_yield_consistency(self):
        """Test that plastic updates end on the yield surface and elastic ones inside it."""
        state = self.material.initial_state(1000)
        plastic_updates = 0
        for eps in self.path:
            _, _, state = self.material.update(state, eps, self.zero, self.zero)
            phi = self.material.yield_value(state)
            active = state.get("active") == 1.0
            plastic_updates += int(np.sum(active))
            assert np.max(np.abs(phi[active]), initial=0.0) <= 1e-8 * 1000.0
            assert np.max(phi) <= 1e-8 * 1000.0
        assert plastic_updates > 1000
