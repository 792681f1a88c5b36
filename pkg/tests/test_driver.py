"""Tests for load histories and the staggered driver."""
import numpy as np
import pytest

from ductile.driver import (
    IncrementRecord,
    LoadComponent,
    LoadHistory,
    SimulationHistory,
    SimulationState,
    StaggeredConfig,
    StaggeredSolver,
    staggered_error,
)
from ductile.errors import StaggeredError, StepTooSmallError
from ductile.grid import GridSpec
from ductile.helmholtz import length_squared_field
from ductile.lemaitre import LemaitreMaterial, LemaitreParams
from ductile.materials import ElasticMaterial, ElasticModuli, MaterialMap
from ductile.mechanics import ControlMode, NewtonConfig


def record(increment, time, e11=0.0, s11=0.0, cutbacks=0):
    strain = np.zeros((3, 3))
    stress = np.zeros((3, 3))
    strain[0, 0], stress[0, 0] = e11, s11
    return IncrementRecord(increment, time, strain, stress, 1, 1, 1, cutbacks=cutbacks)


def make_solver(material, load, ell=0.05, cells=(4, 4, 1), staggered=None):
    grid = GridSpec(cells, (1.0, 1.0, 1.0 / cells[0]))
    index = np.zeros(grid.cells, dtype=np.uint8)
    mmap = MaterialMap(index, {0: material})
    ell2 = length_squared_field(index, {0: ell})
    return StaggeredSolver(grid, mmap, ell2, load, staggered=staggered,
                           newton=NewtonConfig(tolerance=1e-9, cg_tolerance=1e-10))


class TestLoadHistory:
    """Test LoadComponent and LoadHistory."""

    def test_component_forms(self):
        """Test linear and piecewise-linear targets."""
        assert LoadComponent(ControlMode.STRAIN, rate=1e-4, value=0.01).at(100.0) == pytest.approx(0.02)
        ramp = LoadComponent("stress", points=[(0.0, 0.0), (10.0, 100.0), (20.0, 50.0)])
        assert ramp.mode is ControlMode.STRESS
        assert ramp.at(5.0) == pytest.approx(50.0)
        assert ramp.at(15.0) == pytest.approx(75.0)
        assert ramp.at(30.0) == pytest.approx(50.0)

    def test_component_errors(self):
        """Test rejection of mixed and unordered definitions."""
        with pytest.raises(ValueError):
            LoadComponent(rate=1.0, points=[(0.0, 0.0)])
        with pytest.raises(ValueError):
            LoadComponent(points=[(1.0, 0.0), (0.0, 1.0)])

    def test_uniaxial_plane_strain(self):
        """Test the default modes of a plane-strain tension test."""
        load = LoadHistory.uniaxial(1e-4, 100.0, 1.0, plane_strain=True)
        assert load.components["11"].mode is ControlMode.STRAIN
        assert load.components["22"].mode is ControlMode.STRESS
        assert load.components["33"].mode is ControlMode.STRAIN
        assert load.components["12"].mode is ControlMode.STRESS
        assert load.dt_max == 1.0
        macro = load.macro_load(50.0)
        assert macro.strain[0, 0] == pytest.approx(5e-3)
        assert load.stress_mask[1, 1] == 1.0 and load.stress_mask[2, 2] == 0.0
        assert load.strain_increment(0.0, 10.0) == pytest.approx(1e-3)

    def test_invalid_history(self):
        """Test validation of times, steps and component names."""
        with pytest.raises(ValueError):
            LoadHistory({"44": LoadComponent()}, t_final=1.0, dt=0.1)
        with pytest.raises(ValueError):
            LoadHistory({}, t_final=0.0, dt=0.1)
        with pytest.raises(ValueError):
            LoadHistory({}, t_final=1.0, dt=0.0)
        with pytest.raises(ValueError):
            LoadHistory({}, t_final=1.0, dt=0.1, dt_max=0.05)


class TestSimulationHistory:
    """Test SimulationHistory class."""

    def test_append_and_columns(self):
        """Test ordered appends and component extraction."""
        history = SimulationHistory()
        history.append(record(1, 1.0, 1e-4, 20.0))
        history.append(record(2, 2.0, 2e-4, 40.0, cutbacks=2))
        assert len(history) == 2
        np.testing.assert_allclose(history.times(), [1.0, 2.0])
        np.testing.assert_allclose(history.strain("11"), [1e-4, 2e-4])
        np.testing.assert_allclose(history.stress(), [20.0, 40.0])
        assert history[1].increment == 2
        assert history.total_cutbacks == 2

    def test_times_must_increase(self):
        """Test that a record may not go back in time."""
        history = SimulationHistory()
        history.append(record(1, 1.0))
        with pytest.raises(ValueError):
            history.append(record(2, 1.0))


class TestStaggeredError:
    """Test the staggered convergence measure."""

    def test_relative(self):
        """Test the largest relative change over strain and non-local fields."""
        eps_old = np.zeros((2, 2, 1, 3, 3))
        eps_old[..., 0, 0] = 1.0
        eps_new = eps_old.copy()
        eps_new[0, 0, 0, 0, 0] = 1.1
        bar_old = {"a": np.ones((2, 2, 1))}
        bar_new = {"a": np.ones((2, 2, 1))}
        err = staggered_error(eps_new, eps_old, bar_new, bar_old)
        assert err == pytest.approx(0.1 / np.linalg.norm(eps_new.mean(axis=(0, 1, 2))))
        bar_new["a"] = 2.0 * bar_old["a"]
        assert staggered_error(eps_new, eps_old, bar_new, bar_old) == pytest.approx(0.5)

    def test_absolute_floor(self):
        """Test the absolute measure for vanishing fields."""
        z = np.zeros((2, 2, 1, 3, 3))
        zb = {"a": np.zeros((2, 2, 1))}
        assert staggered_error(z, z, zb, {"a": np.zeros((2, 2, 1))}) == 0.0

    def test_config(self):
        """Test defaults and validation of the staggered controls."""
        assert StaggeredConfig(tol=1e-3).helmholtz_tol == pytest.approx(1e-5)
        with pytest.raises(ValueError):
            StaggeredConfig(cutback=1.5)
        with pytest.raises(ValueError):
            StaggeredConfig(tol=0.0)


class TestStaggeredSolver:
    """Test StaggeredSolver runs."""

    def test_elastic_run_and_step_growth(self):
        """Test linear response and the step growth after a streak of successes."""
        material = ElasticMaterial(ElasticModuli(200000.0, 0.3))
        load = LoadHistory.uniaxial(1e-5, 60.0, 10.0, dt_max=20.0)
        history = make_solver(material, load).run()
        np.testing.assert_allclose(history.times(), [10.0, 20.0, 32.0, 44.0, 58.4, 60.0])
        np.testing.assert_allclose(history.stress(), 200000.0 * history.strain(), rtol=1e-7)
        assert all(r.staggered_iterations == 1 for r in history)

    def test_damage_is_monotone(self):
        """Test that the damage field never decreases over increments."""
        material = LemaitreMaterial(ElasticModuli(300000.0, 0.3), LemaitreParams(eps_C=0.0))
        load = LoadHistory.uniaxial(1e-3, 10.0, 1.0)
        solver = make_solver(material, load)
        peaks = []
        solver.run(callback=lambda state, rec: peaks.append(float(solver.material_map.damage(state.states).max())))
        assert len(peaks) == 10
        assert np.all(np.diff(peaks) >= 0.0)
        assert peaks[-1] > 0.0

    def test_cutback_then_recovery(self, monkeypatch):
        """Test that a failed increment is retried with half the step."""
        material = ElasticMaterial(ElasticModuli(200000.0, 0.3))
        load = LoadHistory.uniaxial(1e-5, 20.0, 10.0)
        solver = make_solver(material, load)
        original = solver.staggered_step
        calls = {"n": 0}

        def flaky(state, t_np1, load=None):
            calls["n"] += 1
            if calls["n"] == 1:
                raise StaggeredError(100, 1.0)
            return original(state, t_np1, load)

        monkeypatch.setattr(solver, "staggered_step", flaky)
        history = solver.run()
        assert history[0].time == pytest.approx(5.0)
        assert history[0].cutbacks == 1
        assert history.total_cutbacks == 1
        assert history[-1].time == pytest.approx(20.0)

    def test_step_too_small(self, monkeypatch):
        """Test that repeated failures end with StepTooSmallError."""
        material = ElasticMaterial(ElasticModuli(200000.0, 0.3))
        load = LoadHistory.uniaxial(1e-4, 20.0, 1.0)
        solver = make_solver(material, load)
        calls = {"n": 0}

        def failing(state, t_np1, load=None):
            calls["n"] += 1
            raise StaggeredError(100, 1.0)

        monkeypatch.setattr(solver, "staggered_step", failing)
        history = SimulationHistory()
        with pytest.raises(StepTooSmallError) as info:
            solver.run(history=history)
        assert calls["n"] == 4
        assert info.value.strain_increment < 1e-5
        assert len(history) == 0

    def test_check(self):
        """Test the zero-load increment."""
        material = LemaitreMaterial(ElasticModuli(300000.0, 0.3), LemaitreParams())
        diag = make_solver(material, LoadHistory.uniaxial(1e-4, 100.0, 10.0)).check()
        assert diag.staggered_iterations == 1
        assert diag.errors == [0.0]

    def test_staggered_iteration_cap(self):
        """Test StaggeredError when the iterations cannot reach the tolerance."""
        material = LemaitreMaterial(ElasticModuli(300000.0, 0.3), LemaitreParams(eps_C=0.0))
        load = LoadHistory.uniaxial(1e-3, 10.0, 10.0)
        solver = make_solver(material, load, staggered=StaggeredConfig(tol=1e-12, max_iterations=1))
        with pytest.raises(StaggeredError):
            solver.staggered_step(solver.initial_state(), 10.0)


def make_two_phase_solver(matrix, ell, load, staggered=None, newton=None):
    """8x8 cell with a stiff elastic 2x2 inclusion."""
    grid = GridSpec.square(8)
    index = np.zeros(grid.cells, dtype=np.uint8)
    index[3:5, 3:5] = 1
    mmap = MaterialMap(index, {0: matrix, 1: ElasticMaterial(ElasticModuli(900000.0, 0.3))})
    ell2 = length_squared_field(index, {0: ell, 1: ell})
    newton = newton or NewtonConfig(tolerance=1e-9, cg_tolerance=1e-10)
    return StaggeredSolver(grid, mmap, ell2, load, staggered=staggered, newton=newton)


class TestTwoPhaseSteps:
    """Test staggered increments on a matrix with an inclusion."""

    def test_elastic_load_path_independence(self):
        """Test that one large elastic step equals many small ones."""
        load = LoadHistory.uniaxial(1e-4, 100.0, 10.0, plane_strain=True)
        solver = make_two_phase_solver(ElasticMaterial(ElasticModuli(300000.0, 0.3)), 0.05, load,
                                       newton=NewtonConfig(tolerance=1e-11, cg_tolerance=1e-13))
        one, _ = solver.staggered_step(solver.initial_state(), 100.0)
        many = solver.initial_state()
        for t in np.linspace(10.0, 100.0, 10):
            many, _ = solver.staggered_step(many, t)
        assert np.max(np.abs(one.strain - many.strain)) <= 1e-10 * np.max(np.abs(one.strain))
        assert np.max(np.abs(one.stress - many.stress)) <= 1e-10 * np.max(np.abs(one.stress))
        assert np.ptp(one.strain[..., 0, 0]) > 0.0

    def test_local_limit(self):
        """Test that lengths below the voxel size return the local plastic strain."""
        load = LoadHistory.uniaxial(1e-4, 100.0, 100.0, plane_strain=True)
        solver = make_two_phase_solver(LemaitreMaterial(ElasticModuli(300000.0, 0.3), LemaitreParams()),
                                       1e-5, load)
        state, _ = solver.staggered_step(solver.initial_state(), 100.0)
        alpha = solver.material_map.local_sources(state.states)["eps_p_eq"]
        bar = state.nonlocal_fields["eps_p_eq"]
        assert np.linalg.norm(alpha) > 0.0
        assert np.linalg.norm(bar - alpha) / np.linalg.norm(alpha) < 1e-3

    def test_converged_increment_is_a_fixed_point(self):
        """Test that restarting an increment from its converged fields changes nothing."""
        staggered = StaggeredConfig(tol=1e-6)
        load = LoadHistory.uniaxial(1e-3, 10.0, 10.0, plane_strain=True)
        material = LemaitreMaterial(ElasticModuli(300000.0, 0.3), LemaitreParams(eps_C=0.0))
        solver = make_two_phase_solver(material, 0.2, load, staggered=staggered)
        state_n = solver.initial_state()
        converged, diag = solver.staggered_step(state_n, 10.0)
        assert diag.staggered_iterations > 1
        assert solver.material_map.damage(converged.states).max() > 0.0

        sources = solver.material_map.local_sources(converged.states)
        assert solver.helmholtz.residual(converged.nonlocal_fields["eps_p_eq"], sources["eps_p_eq"]) < 10.0 * staggered.helmholtz_tol

        restart = SimulationState(state_n.time, converged.strain, converged.stress, state_n.states,
                                  {v: f.copy() for v, f in converged.nonlocal_fields.items()})
        again, _ = solver.staggered_step(restart, 10.0)
        assert staggered_error(again.strain, converged.strain, again.nonlocal_fields,
                               converged.nonlocal_fields) < staggered.tol
