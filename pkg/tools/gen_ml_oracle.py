"""Freeze arbitrary-precision Mittag-Leffler reference values into tests/data.

    python tools/gen_ml_oracle.py            # writes tests/data/ml_oracle.json
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from ml_oracle import reference_ml

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "ml_oracle.json"
THETAS = [0.5, 0.8, 1.0, 1.2, 1.5, 1.8, 1.9]


def main() -> int:
    grid = np.linspace(-50.0, 0.0, 200)
    rows = []
    for theta in THETAS:
        for theta2 in (1.0, theta + 1.0):
            for z in grid:
                value, bound = reference_ml(theta, theta2, float(z))
                rows.append({"theta1": theta, "theta2": theta2, "z": float(z), "value": value, "bound": bound})
            print(f"grid theta={theta} theta2={theta2} done", flush=True)

    rng = np.random.default_rng(20190601)
    random_rows = []
    for _ in range(50):
        theta1 = float(rng.uniform(0.6, 1.95))
        theta2 = float(rng.uniform(0.2, 3.0))
        z = float(rng.uniform(-50.0, 0.0))
        value, bound = reference_ml(theta1, theta2, z)
        random_rows.append({"theta1": theta1, "theta2": theta2, "z": z, "value": value, "bound": bound})
    print("random done", flush=True)

    extra = []
    for theta1, theta2, z in [(1.5, 2.5, -10.0), (1.8, 1.0, -5.0), (0.5, 1.0, -100.0),
                              (0.8, 1.8, -5.0), (0.5, 1.0, -1.0)]:
        value, bound = reference_ml(theta1, theta2, z)
        extra.append({"theta1": theta1, "theta2": theta2, "z": z, "value": value, "bound": bound})

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"grid": rows, "random": random_rows, "extra": extra}, indent=1))
    print(f"wrote {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
