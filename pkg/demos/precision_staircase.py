"""How many fractional bits does the datapath need?

Runs the fixed-point reservoir over a range of fractional widths and prints
the test error next to the floating-point reference that uses the same
piecewise-linear node.
"""

from edgedfr.config import resolve
from edgedfr.runner import run_eval, run_sweep

pwl = {"variant": "pwl", "segments": 32}
ref = run_eval(resolve({"reservoir": {"nonlinearity": pwl}}))
print(f"float reference        nmse {ref.metrics.nmse:.4f}")

cfg = resolve({"mode": "quantized", "reservoir": {"nonlinearity": pwl},
               "sweep": {"frac_bits": [6, 8, 10, 12, 16, 20]}})
_, rows = run_sweep(cfg, threads=2)
for row in rows:
    gap = 100 * (row["nmse"] - ref.metrics.nmse) / ref.metrics.nmse
    print(f"frac_bits {row['frac_bits']:>2}  {row['status']:>8}  nmse {row['nmse']:.4f}  ({gap:+.1f}%)")
