"""
A single blow-up run and its lifespan estimate
==============================================

max|u_x| grows without bound in finite time. The lifespan estimate
extrapolates the crossing times of three thresholds to infinity and
repeats this on three grids to get an error bracket.
"""
from lifespan_lab import ProblemSpec, estimate_lifespan, evolve

spec = ProblemSpec(p=2.0, a=0.0, eps=0.2, preset="bump_both")

run = evolve(spec, 1 / 50, 200.0, blow_threshold=1.6e4)
print(f"status={run.status}  stopped at t={run.t_end:.3f}")
for theta in (1e3, 4e3, 1.6e4):
    print(f"  max|u_x| crosses {theta:g} at t={run.crossing_time(theta):.4f}")

est = estimate_lifespan(spec, 1 / 25, t_max=200.0)
print(f"t* = {est.t_star:.4f} in [{est.t_lo:.4f}, {est.t_hi:.4f}]")
for delta, t in sorted(est.t_star_by_delta.items(), reverse=True):
    print(f"  delta={delta:.4f}  t*={t:.4f}")

# smaller data lives longer
print("eps=0.1:", round(estimate_lifespan(spec.with_eps(0.1), 1 / 25, t_max=200.0).t_star, 3))
