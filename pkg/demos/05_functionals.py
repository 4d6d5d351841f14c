"""
Functionals behind the blow-up argument
=======================================

The strip functional H and the exponential moment G are computed along a
blow-up run, and the inequalities they are expected to satisfy are
checked directly on the discrete data.
"""
from pathlib import Path

import numpy as np

from lifespan_lab import ProblemSpec, evolve
from lifespan_lab import functionals as fn

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)
spec = ProblemSpec(p=2.0, a=0.0, eps=0.1, preset="bump_f")
run = evolve(spec, 1 / 50, 1e3, blow_threshold=1.6e4, store_every=5)
c = fn.constants(spec)
print(f"blow-up near t={run.t_end:.2f}; R0={c.R0}, D7={c.D7:.4g}, M6={c.M6:.4g}")

# H grows at least like D7 eps t^2 from t = 4 on
H = fn.strip_H(run, c.R0)
bound, start = fn.lower_bound("cf", c, spec.eps, spec.p, spec.a, spec.R, H.times)
m = (H.times >= start) & (H.times <= 0.9 * run.t_end)
print(f"min H / (D7 eps t^2) = {np.min(H.values[m] / bound[m]):.3f}")
print("sandwich D5 Ht <= H <= D6 Ht:", fn.sandwich_holds(run, c))

# G'' + 2G' - M6 |G|^p (1+t)^{-a} should stay above the differencing noise
F, G = fn.exp_moments(run)
res = fn.inequality_residuals((F, G), c, spec.p, spec.a)
tol = fn.calibrate_tol_fd(spec, run.delta, 5, 5.0)
keep = res.times <= 0.9 * run.t_end
print(f"min residual {np.min(res.residual[keep]):.3e}  (tol_fd {tol:.2e})")

fn.to_csv(out / "functionals_bump_f.csv", H, F, G, res)
