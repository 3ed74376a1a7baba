"""Regenerate the bundled benchmark data files under src/polygrid/data.

Everything here is an editable assumption, committed so the provenance of
the shipped files is reviewable:

* line_configs.json - untransposed overhead line constants adapted from
  the IEEE 34-node radial test feeder configurations 300 and 301
  (phase-frame 3x3 matrices with the neutral already folded in),
  converted from per-mile to per-km values.
* test_grid.json - 116-node feeder: slack S, five laterals of twenty
  zero-injection chain nodes each, with generator/load/compensator taps
  at chain positions 5/10/15. All segments 5 km. Chains alternate between
  the two construction codes per lateral; taps use IEEE-301. Line model
  "pi": the configured shunt admittance is split onto the end nodes.
* test_devices.json - slack source: positive-sequence 1 pu behind
  0.1 pu impedance with R/X = 0.1 (100 MVA short-circuit level on the
  10 MW base); resource nodes: quadratic voltage-dependence models with
  mildly unbalanced per-phase reference powers.
* profiles.csv - synthetic 24-hour loading-factor curves (sums of
  sinusoids plus seeded noise, clipped to [0.2, 1.0]); compensators
  pinned at 1.

Run from the repository root:  python tools/generate_data.py
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "polygrid" / "data"

MILE_PER_KM = 1.609344

# IEEE 34-node feeder overhead configurations, ohm/mile and microsiemens/mile.
CONFIG_300_Z = [
    [1.3368 + 1.3343j, 0.2101 + 0.5779j, 0.2130 + 0.5015j],
    [0.2101 + 0.5779j, 1.3238 + 1.3569j, 0.2066 + 0.4591j],
    [0.2130 + 0.5015j, 0.2066 + 0.4591j, 1.3294 + 1.3471j],
]
CONFIG_300_B = [
    [5.3350, -1.5313, -0.9943],
    [-1.5313, 5.0979, -0.6212],
    [-0.9943, -0.6212, 4.8880],
]
CONFIG_301_Z = [
    [1.9300 + 1.4115j, 0.2327 + 0.6442j, 0.2359 + 0.5691j],
    [0.2327 + 0.6442j, 1.9157 + 1.4281j, 0.2288 + 0.5238j],
    [0.2359 + 0.5691j, 0.2288 + 0.5238j, 1.9219 + 1.4209j],
]
CONFIG_301_B = [
    [5.1207, -1.4364, -0.9402],
    [-1.4364, 4.9055, -0.5951],
    [-0.9402, -0.5951, 4.7154],
]

BASE_POWER_W = 10e6
BASE_VOLTAGE_V = 24.9e3
SC_POWER_VA = 100e6
R_OVER_X = 0.1
LINE_LENGTH_KM = 5.0

N_LATERALS = 5
CHAIN_LENGTH = 20
TAP_POSITIONS = {"G": 5, "L": 10, "C": 15}

PROFILE_SEED = 20260809
N_HOURS = 24

# Three-phase reference powers in MW / MVAr (positive = injection) and the
# per-phase unbalance weights (sum 3).
GENERATOR_MW = [1.2, 1.5, 1.0, 1.8, 1.4]
LOAD_MW = [-4.0, -3.2, -4.5, -3.6, -4.2]
LOAD_POWER_FACTOR = 0.95
COMPENSATOR_MVAR = [0.6, 0.5, 0.8, 0.5, 0.6]
UNBALANCE = [1.06, 0.95, 0.99]

# Quadratic/linear/constant splits per load (active and reactive parts).
LOAD_COEFFS_RE = [
    (0.10, 0.15, 0.75),
    (0.12, 0.08, 0.80),
    (0.08, 0.17, 0.75),
    (0.15, 0.10, 0.75),
    (0.10, 0.12, 0.78),
]
LOAD_COEFFS_IM = [
    (0.15, 0.10, 0.75),
    (0.18, 0.07, 0.75),
    (0.12, 0.13, 0.75),
    (0.20, 0.05, 0.75),
    (0.16, 0.09, 0.75),
]


def matrix_json(m):
    return [[[round(v.real, 10), round(v.imag, 10)] for v in row] for row in np.asarray(m, dtype=complex)]


def per_km(per_mile):
    return np.asarray(per_mile, dtype=complex) / MILE_PER_KM


def write_line_configs():
    payload = {
        "notes": (
            "Untransposed overhead line constants adapted from the IEEE 34-node "
            "radial test feeder configurations 300 and 301 (3x3 phase-frame "
            "matrices, neutral folded in). Converted from ohm/mile and "
            "microsiemens/mile to per-km values. Editable assumptions."
        ),
        "configs": {
            "IEEE-300": {
                "z_ohm_per_km": matrix_json(per_km(CONFIG_300_Z)),
                "y_s_per_km": matrix_json(per_km(np.asarray(CONFIG_300_B) * 1e-6 * 1j)),
            },
            "IEEE-301": {
                "z_ohm_per_km": matrix_json(per_km(CONFIG_301_Z)),
                "y_s_per_km": matrix_json(per_km(np.asarray(CONFIG_301_B) * 1e-6 * 1j)),
            },
        },
    }
    (DATA_DIR / "line_configs.json").write_text(json.dumps(payload, indent=1) + "\n")


def lateral_nodes(lateral):
    offset = lateral * CHAIN_LENGTH
    return [f"Z{offset + k}" for k in range(1, CHAIN_LENGTH + 1)]


def write_grid():
    nodes = [{"id": "S", "role": "slack"}]
    for kind in ("G", "L", "C"):
        nodes += [{"id": f"{kind}{i + 1}", "role": "resource"} for i in range(N_LATERALS)]
    for lateral in range(N_LATERALS):
        nodes += [{"id": z, "role": "zero"} for z in lateral_nodes(lateral)]

    branches = []
    for lateral in range(N_LATERALS):
        chain = lateral_nodes(lateral)
        trunk_code = "IEEE-300" if lateral % 2 == 0 else "IEEE-301"
        previous = "S"
        for z in chain:
            branches.append(
                {"from": previous, "to": z, "config_code": trunk_code, "length_km": LINE_LENGTH_KM}
            )
            previous = z
        for kind, pos in TAP_POSITIONS.items():
            branches.append(
                {
                    "from": chain[pos - 1],
                    "to": f"{kind}{lateral + 1}",
                    "config_code": "IEEE-301",
                    "length_km": LINE_LENGTH_KM,
                }
            )

    payload = {
        "notes": (
            "116-node benchmark feeder: slack S feeding five laterals of "
            "twenty zero-injection chain nodes each; generator, load, and "
            "compensator taps at chain positions 5, 10, 15. The construction "
            "code assignment (alternating trunk codes, IEEE-301 taps) is an "
            "editable assumption. line_model 'pi' adds each configured "
            "line's charging as half-shunts on its end nodes."
        ),
        "per_unit": {"Pb_W": BASE_POWER_W, "Vb_V": BASE_VOLTAGE_V},
        "phases": 3,
        "line_model": "pi",
        "nodes": nodes,
        "branches": branches,
        "shunts": [],
    }
    (DATA_DIR / "test_grid.json").write_text(json.dumps(payload, indent=1) + "\n")


def phase_split(total_pu):
    return [round(total_pu * w / 3.0, 8) for w in UNBALANCE]


def write_devices():
    x = SC_POWER_VA and (BASE_POWER_W / SC_POWER_VA) / math.sqrt(1.0 + R_OVER_X**2)
    r = R_OVER_X * x
    z = [[r + 1j * x if i == j else 0j for j in range(3)] for i in range(3)]
    thevenin = [
        {
            "node": "S",
            "v_source_polar_pu_deg": [[1.0, 0.0], [1.0, -120.0], [1.0, 120.0]],
            "z_pu": matrix_json(z),
        }
    ]

    polynomial = []
    for i in range(N_LATERALS):
        p_gen = phase_split(GENERATOR_MW[i] * 1e6 / BASE_POWER_W)
        q_gen = phase_split(0.15 * GENERATOR_MW[i] * 1e6 / BASE_POWER_W)
        polynomial.append(
            {
                "node": f"G{i + 1}",
                "phases": [
                    {
                        "p0": p_gen[p],
                        "q0": q_gen[p],
                        "v0": 1.0,
                        "alpha_re": 0.0,
                        "beta_re": 0.0,
                        "gamma_re": 1.0,
                        "alpha_im": 0.0,
                        "beta_im": 0.0,
                        "gamma_im": 1.0,
                    }
                    for p in range(3)
                ],
            }
        )
    tan_phi = math.tan(math.acos(LOAD_POWER_FACTOR))
    for i in range(N_LATERALS):
        p_load = phase_split(LOAD_MW[i] * 1e6 / BASE_POWER_W)
        q_load = [round(p * tan_phi, 8) for p in p_load]
        a_re, b_re, g_re = LOAD_COEFFS_RE[i]
        a_im, b_im, g_im = LOAD_COEFFS_IM[i]
        polynomial.append(
            {
                "node": f"L{i + 1}",
                "phases": [
                    {
                        "p0": p_load[p],
                        "q0": q_load[p],
                        "v0": 1.0,
                        "alpha_re": a_re,
                        "beta_re": b_re,
                        "gamma_re": g_re,
                        "alpha_im": a_im,
                        "beta_im": b_im,
                        "gamma_im": g_im,
                    }
                    for p in range(3)
                ],
            }
        )
    for i in range(N_LATERALS):
        q_comp = phase_split(COMPENSATOR_MVAR[i] * 1e6 / BASE_POWER_W)
        polynomial.append(
            {
                "node": f"C{i + 1}",
                "phases": [
                    {
                        "p0": 0.0,
                        "q0": q_comp[p],
                        "v0": 1.0,
                        "alpha_re": 0.0,
                        "beta_re": 0.0,
                        "gamma_re": 1.0,
                        "alpha_im": 1.0,
                        "beta_im": 0.0,
                        "gamma_im": 0.0,
                    }
                    for p in range(3)
                ],
            }
        )

    payload = {
        "notes": (
            "Benchmark device parameters (editable assumptions): slack source "
            "0.1 pu impedance magnitude with R/X = 0.1; generators inject "
            "constant power; loads are mildly voltage-dependent quadratic "
            "models at 0.95 power factor; compensators are constant-impedance "
            "reactive injections. Per-phase powers carry a fixed unbalance."
        ),
        "thevenin": thevenin,
        "polynomial": polynomial,
    }
    (DATA_DIR / "test_devices.json").write_text(json.dumps(payload, indent=1) + "\n")


def write_profiles():
    rng = np.random.default_rng(PROFILE_SEED)
    hours = np.arange(N_HOURS)
    rows = []
    for i in range(N_LATERALS):
        solar = np.clip(np.sin(np.pi * (hours - 6.0) / 12.0), 0.0, None) ** 2
        lam = 0.2 + 0.75 * solar + rng.normal(0.0, 0.02, N_HOURS)
        lam = np.clip(lam, 0.2, 1.0)
        rows += [(int(t), f"G{i + 1}", round(float(v), 4)) for t, v in zip(hours, lam)]
    for i in range(N_LATERALS):
        lam = (
            0.55
            + 0.25 * np.sin(2.0 * np.pi * (hours - 9.0) / 24.0)
            + 0.12 * np.sin(4.0 * np.pi * (hours - 7.0) / 24.0)
            + rng.normal(0.0, 0.02, N_HOURS)
        )
        lam = np.clip(lam, 0.2, 1.0)
        rows += [(int(t), f"L{i + 1}", round(float(v), 4)) for t, v in zip(hours, lam)]
    for i in range(N_LATERALS):
        rows += [(int(t), f"C{i + 1}", 1.0) for t in hours]

    with (DATA_DIR / "profiles.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "node", "lambda"])
        writer.writerows(rows)


def main():
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    write_line_configs()
    write_grid()
    write_devices()
    write_profiles()
    print(f"wrote data files to {DATA_DIR}")


if __name__ == "__main__":
    main()
