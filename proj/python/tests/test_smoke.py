from pathlib import Path

import numpy as np
import pytest

import ligm

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def burgers():
    return ligm.make_model("synthetic", ligm.ModelParams(kappa=0.0))


def test_model_flux_and_speeds():
    model = ligm.make_model("isothermal", ligm.ModelParams(sound_speed=0.5))
    assert model.state_dim == 2
    rho, m = 2.0, 1.0
    assert model.flux([1.0], [rho, m]) == pytest.approx([m, m * m / rho + 0.25 * rho])
    v = m / rho
    assert model.wave_speeds([1.0], [rho, m]) == pytest.approx([v - 0.5, v + 0.5])


def test_burgers_shock_fan():
    fan = ligm.solve_riemann(burgers(), [1.0], [1.0], [0.0])
    (wave,) = fan.waves
    assert wave.type == ligm.WaveType.shock
    assert wave.left_speed == pytest.approx(0.5)
    assert fan.sample(0.49) == [1.0]
    assert fan.sample(0.51) == [0.0]
    assert fan.average(-1.0, 1.0, 1.0) == pytest.approx([0.75])


def test_inadmissible_state_raises():
    model = ligm.make_model("isothermal", ligm.ModelParams(sound_speed=0.5))
    with pytest.raises(ligm.Error):
        ligm.solve_riemann(model, [1.0], [-1.0, 0.0], [1.0, 0.0])


def test_solver_conserves_mass_in_flat_limit():
    mesh = ligm.Mesh(0.0, 1.0, 99)
    options = ligm.SchemeOptions()
    options.t_end = 0.1
    options.boundary_metric = [1.0]
    solver = ligm.Solver(burgers(), mesh, options)
    x = np.array([mesh.center(i) for i in range(mesh.cell_count)])
    u0 = np.where((x > 0.3) & (x < 0.6), 1.0, 0.5)
    traj = ligm.run(solver, solver.initial_state(u0))
    final = traj.final_state
    assert final.time == pytest.approx(0.1)
    assert final.u.shape == (mesh.cell_count, 1)
    # Boundary states are constant, so the only mass change is boundary flux.
    assert final.u.sum() * mesh.dx == pytest.approx(u0.sum() * mesh.dx, abs=1e-12)


def test_config_run_and_checkpoint(tmp_path):
    config = ligm.load_config(CONFIGS / "synthetic_run.yaml")
    traj = ligm.run_config(config)
    assert traj.final_state.time == pytest.approx(config.t_end)
    assert np.isfinite(traj.stats.dilation_constant)

    ligm.checkpoint(tmp_path / "c.bin", config, traj.final_state)
    assert ligm.restore(tmp_path / "c.bin", config) == traj.final_state


def test_config_errors_name_the_field():
    text = (CONFIGS / "burgers_shock.yaml").read_text().replace("cfl: 0.45", "cfl: -1.0")
    with pytest.raises(ligm.ConfigError, match="cfl"):
        ligm.parse_config(text)


def test_average_bound():
    rng = np.random.default_rng(5)
    for _ in range(200):
        samples = rng.uniform(-1, 1, size=(rng.integers(1, 10), 2))
        result = ligm.check_average_bound(samples)
        assert result.passed
        assert result.deviation <= result.oscillation <= result.total_variation + 1e-12


def test_small_study():
    text = (CONFIGS / "synthetic_study.yaml").read_text()
    text = text.replace("[99, 199, 399, 799]", "[24, 49, 99, 199]")
    report = ligm.study(ligm.parse_config(text))
    assert len(report.dx) == 4
    assert len(report.epsilon_fits) == len(report.function_names)
    assert report.text()
    assert report.dt_dx_spread < 0.2
