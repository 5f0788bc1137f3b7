"""Regenerate panel.csv: three synthetic economies over 2007-2021.

Every bundled indicator gets a positive log-random-walk around a per-country
base level, so the index pipeline has something to chew on without any
external data.
"""
import json
import math
import random
import sys
from pathlib import Path

here = Path(__file__).resolve().parent
codes = [d["code"] for d in json.loads((here.parent / "crates/core/data/indicators.json").read_text())]
countries = {"XA": 0.8, "XB": 1.0, "XC": 1.25}
rng = random.Random(int(sys.argv[1]) if len(sys.argv) > 1 else 1)

rows = []
for country, scale in countries.items():
    for code in codes:
        level = math.log(scale * rng.uniform(5.0, 50.0))
        drift = rng.uniform(-0.005, 0.005)
        vol = 0.05 if code == "gdp-per-capita" else rng.uniform(0.02, 0.06)
        for year in range(2007, 2022):
            rows.append((country, code, year, f"{math.exp(level):.6f}"))
            level += drift + vol * rng.gauss(0.0, 1.0)

with open(here / "panel.csv", "w") as f:
    f.write("country,indicator,year,value\n")
    for r in rows:
        f.write(",".join(map(str, r)) + "\n")
