"""
Lifespan scaling in eps
=======================

For p = 2 and a = 0 the lifespan should scale like eps^{-(p-1)/(1-a)} = eps^{-1}.
A coarse scan is enough to see the slope; the acceptance suite uses a
finer grid and more points.
"""
from pathlib import Path

from lifespan_lab import ProblemSpec
from lifespan_lab import harness as hs

out = Path(__file__).with_name("out")
spec = ProblemSpec(p=2.0, a=0.0, eps=0.1, preset="bump_both")
grid = hs.geometric_grid(0.2, 2 ** 0.5, 6)

table = hs.lifespan_scan(spec, grid, 0.04, t_max=300.0)
for row in table.rows:
    print(f"eps={row.eps:.4f}  t*={row.t_star:.3f}  [{row.t_lo:.3f}, {row.t_hi:.3f}]")

fit = hs.fit_exponent(table, hs.POWER)
print(f"slope {fit.slope:.4f} (predicted {fit.predicted_slope:g}), passed={fit.passed}")
print("slope change without the largest eps:", round(hs.slope_shift(table), 4))

# CSV and SVG are byte-for-byte reproducible
for path in hs.emit(table, out, fit=fit, stem="scan_p2_a0"):
    print("wrote", path)
