"""The experiment drivers, each at a small size."""
from qsdw.experiments import (EquationConfig, ExperimentConfig, GridConfig, InitialConfig,
                              TimeConfig, run_experiment)


def show(res):
    print(f"== {res.experiment}: {'pass' if res.passed else 'FAIL ' + str(res.failed)}")
    for c in res.checks:
        print(f"   {c.name:<28} measured={c.measured:.4g} threshold={c.threshold:.4g}")
    for name, fit in res.fits.items():
        print(f"   fit {name}: {fit}")


eq = EquationConfig(p=3.0, q=2.0)

# %% trajectories from three energy magnitudes all enter a small ball
show(run_experiment(ExperimentConfig(
    "dissipativity", equation=eq, grid=GridConfig(N=32), time=TimeConfig(dt=1e-2, T=30.0),
    options={"magnitudes": [0.1, 1.0, 10.0]})))

# %% Lipschitz dependence on the initial data
show(run_experiment(ExperimentConfig(
    "lipschitz", equation=eq, grid=GridConfig(N=32), time=TimeConfig(dt=1e-3, T=1.0))))

# %% instant H^1 smoothing of a rough velocity
show(run_experiment(ExperimentConfig(
    "smoothing", equation=eq, grid=GridConfig(N=64),
    time=TimeConfig(dt=1e-4, T=1.0, cadence=100),
    initial=InitialConfig("rough_velocity", seed=7))))

# %% u = v + w with w bounded in H^2 and v decaying in H^1
show(run_experiment(ExperimentConfig(
    "splitting", equation=eq, grid=GridConfig(N=32),
    time=TimeConfig(dt=1e-3, T=10.0, cadence=100))))
