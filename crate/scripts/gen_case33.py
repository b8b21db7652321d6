#!/usr/bin/env python3
"""Writes the bundled 33-bus case, its 24-h profiles, and a price file.

Branch impedances and nominal loads are the standard 33-bus feeder data
(ohms, kW, kvar). Load and PV shapes are synthetic.

usage: gen_case33.py OUT_DIR
"""
import json
import math
import sys
from pathlib import Path

V_BASE_KV = 12.66
S_BASE_KVA = 10_000.0
Z_BASE = V_BASE_KV**2 / (S_BASE_KVA / 1000.0)

BRANCHES = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
]

LOADS = {
    2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20),
    7: (200, 100), 8: (200, 100), 9: (60, 20), 10: (60, 20), 11: (45, 30),
    12: (60, 35), 13: (60, 35), 14: (120, 80), 15: (60, 10), 16: (60, 20),
    17: (60, 20), 18: (90, 40), 19: (90, 40), 20: (90, 40), 21: (90, 40),
    22: (90, 40), 23: (90, 50), 24: (420, 200), 25: (420, 200), 26: (60, 25),
    27: (60, 25), 28: (60, 20), 29: (120, 70), 30: (200, 600), 31: (150, 70),
    32: (210, 100), 33: (60, 40),
}

# per-unit of nominal load, hours 1..24
LOAD_SHAPE = [
    0.62, 0.58, 0.56, 0.55, 0.57, 0.63, 0.72, 0.80, 0.84, 0.86, 0.87, 0.88,
    0.87, 0.86, 0.86, 0.88, 0.92, 0.98, 1.00, 0.98, 0.93, 0.85, 0.76, 0.68,
]
PEAK_SCALE = 1.165

# kW of PV capacity per bus
PV_CAPACITY = {
    13: 300.0, 16: 250.0, 18: 300.0, 22: 250.0, 25: 400.0, 31: 300.0, 33: 350.0,
}


def pv_shape(hour):
    """Clear-sky bell between 06:00 and 19:00."""
    if hour <= 6 or hour >= 19:
        return 0.0
    return math.sin(math.pi * (hour - 6) / 13.0) ** 1.5


ENERGY_MWH = [
    27.1, 22.4, 18.9, 15.6, 17.0, 24.3, 33.8, 36.2, 24.5, 12.1, 7.4, 5.8,
    6.3, 8.9, 16.4, 29.7, 45.8, 62.9, 66.7, 61.2, 54.0, 47.3, 40.8, 32.8,
]


def shifted_to_mean(series, mean):
    """Shifts all but the extreme values so the series has the given mean."""
    lo, hi = min(series), max(series)
    inner = [i for i, v in enumerate(series) if v not in (lo, hi)]
    c = (mean * len(series) - sum(series)) / len(inner)
    return [v + c if i in inner else v for i, v in enumerate(series)]


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    case = {
        "network": {
            "s_base_kva": S_BASE_KVA,
            "v_base_kv": V_BASE_KV,
            "u_min": 0.95**2,
            "u_max": 1.05**2,
            "buses": list(range(1, 34)),
            "lines": [
                {"from": f, "to": t, "r_pu": round(r / Z_BASE, 10), "x_pu": round(x / Z_BASE, 10)}
                for f, t, r, x in BRANCHES
            ],
        },
        "generators": [{
            "bus": 5, "p_min_kw": 80.0, "p_max_kw": 215.0, "q_min_kvar": 0.0, "q_max_kvar": 0.0,
            "ramp_up_kw": 100.0, "ramp_down_kw": 100.0, "p_init_kw": 150.0, "cost_per_kwh": 0.0145,
        }],
        "storages": [
            {"bus": b, "p_max_kw": 12.5, "e_min_kwh": 0.0, "e_max_kwh": 50.0, "e_init_kwh": 25.0, "kappa": 1.0}
            for b in (10, 13, 14, 24)
        ],
        "horizon": {"steps": 24, "dt_hours": 1.0},
        "profiles_csv": "case33_profiles.csv",
    }
    (out / "case33.json").write_text(json.dumps(case, indent=2) + "\n")

    rows = ["t,bus,load_p_kw,load_q_kvar,pv_p_kw"]
    for t in range(1, 25):
        k = LOAD_SHAPE[t - 1] * PEAK_SCALE
        for bus in range(1, 34):
            p, q = LOADS.get(bus, (0.0, 0.0))
            pv = PV_CAPACITY.get(bus, 0.0) * pv_shape(t)
            rows.append(f"{t},{bus},{p * k:.4f},{q * k:.4f},{pv:.4f}")
    (out / "case33_profiles.csv").write_text("\n".join(rows) + "\n")

    energy = shifted_to_mean(ENERGY_MWH, 32.4)
    avg = sum(energy) / len(energy)
    prices = ["t,energy_per_kwh,reserve_up_per_kw,reserve_dn_per_kw,frp_per_kw"]
    for t, e in enumerate(energy, start=1):
        prices.append(f"{t},{e / 1000:.6f},0.020000,0.020000,0.005440")
    (out / "prices.csv").write_text("\n".join(prices) + "\n")
    print(f"energy price range {min(energy):.1f}..{max(energy):.1f} $/MWh, mean {avg:.2f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data")
