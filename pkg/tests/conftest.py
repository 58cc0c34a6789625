import pytest

MINI_CONFIG = """\
seed: 4242
scenario:
  area:
    x: [-2000.0, 2000.0]
    y: [0.0, 4000.0]
  regions:
    - {center: [0.0, 1500.0], radius: 200.0}
  kappa: 3.1622776601683795
  steps: 40
  waypoints:
    - {pos: [-1500.0, 3000.0], step: 0}
    - {pos: [0.0, 1500.0], step: 20}
    - {pos: [1500.0, 2500.0], step: 39}
  T: 1.0
  process_noise_on: true
  process_noise_intensity: 10.0
  paper_literal_B: false
  sensor:
    position: [0.0, 0.0]
    bearing_std_deg: 0.5
    range_std_m: 30.0
  safe_grid: {nx: 6, ny: 6, std_factor: 0.4}
model:
  labels: [safe, potential danger, danger]
  transition:
    - [0.90, 0.10, 0.00]
    - [0.05, 0.90, 0.05]
    - [0.00, 0.10, 0.90]
  n_mc: 300
  n_particles: 400
  ess_threshold: 0.5
  init: {kind: measurement, velocity_std: 130.0, widen: 2.0}
  initial_situation: uniform
  degeneracy_tolerance: 1.0
  transition_margin: 2
"""


@pytest.fixture(scope="session")
def mini_config_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "mini.yaml"
    path.write_text(MINI_CONFIG)
    return path
