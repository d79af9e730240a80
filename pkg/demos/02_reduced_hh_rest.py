"""Silencing a spiking reduced Hodgkin-Huxley neuron.

The model is bistable between a spiking orbit (period 14.9 ms) and a rest
state; the learned ON/OFF current steers trajectories inside the unstable
orbit so the neuron settles at rest, at a tiny fraction of the energy a
full-state feedback needs.
"""

from pathlib import Path

import numpy as np

import banglearn as bl
from banglearn.baselines import find_limit_cycle, unstable_orbit_period
from banglearn.closedloop import run_closed_loop
from banglearn.integrate import write_trajectory_csv
from banglearn.scenarios import build_policy, energy_comparison, scenario_config

out = Path("demo_output/reduced_hh")
out.mkdir(parents=True, exist_ok=True)

model = bl.reduced_hh()  # baseline current 6.69 (the bistable regime)
rest = bl.reduced_hh_rest_state()
print(f"rest state: v = {rest[0]:.2f} mV, n = {rest[1]:.3f}")

cycle = find_limit_cycle(model)
print(f"stable orbit period: {cycle.period:.2f} ms")
t_unstable, _ = unstable_orbit_period(model, rest, cycle.points[0])
print(f"unstable orbit period (bisection between basins): {t_unstable:.2f} ms")

cfg = scenario_config("reduced_hh")
bundle = build_policy(cfg)
print(f"policy: {int(np.sum(bundle.training_set.labels > 0))} of "
      f"{bundle.training_set.n} samples ON; the ON blob sits in the slow "
      f"corridor left of the rest state")

traj, metrics = run_closed_loop(bundle.model, bundle.classifier,
                                np.asarray(cfg.run_x0), cfg.dt, cfg.duration,
                                target=bundle.target, radius=cfg.radius,
                                metric_scale=bundle.metric_scale)
write_trajectory_csv(traj, out / "capture.csv")
print(f"capture: inside the target ball at t = {metrics.convergence_time:.1f} ms "
      f"with {metrics.control_energy:.1f} units of control energy")

comparison = energy_comparison(cfg, bundle=bundle)
print(f"fully actuated feedback (gain {cfg.baseline_gain:g}) needs "
      f"{comparison['baseline_energy']:.3g} units for the same capture: "
      f"{comparison['energy_ratio']:.0f}x more")
