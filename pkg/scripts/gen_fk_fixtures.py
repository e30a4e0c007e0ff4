"""Regenerate the frontend FK cross-check fixtures.

Samples assemblable joint configurations for every station mechanism and
records the tactor position from the reference implementation. The
frontend test suite replays these through its own FK and must agree to
within 0.01 mm. Run from the repo root:

    python3 scripts/gen_fk_fixtures.py
"""

import json
import math
import random
from pathlib import Path

from tactorsim.config import FINGERS, station
from tactorsim.geometry import JointAngles, NoAssembly, forward_kinematics

OUT = Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures" / "fk_cases.json"
N_PER_MECH = 40


def main() -> None:
    rng = random.Random(417)
    cases = []
    for finger in FINGERS:
        st = station(finger)
        for level in ("lower", "upper"):
            geom = getattr(st, level)
            kept = 0
            while kept < N_PER_MECH:
                q = JointAngles(rng.uniform(0.0, math.pi),
                                rng.uniform(0.0, math.pi))
                try:
                    p = forward_kinematics(geom, q)
                except NoAssembly:
                    continue
                cases.append({
                    "station": finger,
                    "mech": level,
                    "theta1_deg": math.degrees(q.theta1),
                    "theta2_deg": math.degrees(q.theta2),
                    "x_mm": p.x,
                    "y_mm": p.y,
                })
                kept += 1
    # the worked example from the design notes, as an anchor
    p = forward_kinematics(station("index").lower,
                           JointAngles(math.pi / 2, math.pi / 2))
    cases.append({"station": "index", "mech": "lower",
                  "theta1_deg": 90.0, "theta2_deg": 90.0,
                  "x_mm": p.x, "y_mm": p.y})
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(cases, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
