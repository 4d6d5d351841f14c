"""
Linear solver against d'Alembert
================================

With the nonlinearity switched off the characteristic scheme should
reproduce the free wave exactly up to second-order truncation error.
"""
import numpy as np

from lifespan_lab import ProblemSpec, evolve, free_solution

spec = ProblemSpec(p=2.0, a=0.0, eps=1.0, preset="bump_both")

# halve the step twice and watch the sup-norm error drop by ~4 each time
errors = []
for delta in (1 / 100, 1 / 200, 1 / 400):
    run = evolve(spec, delta, 2.0, nonlinear=False)
    exact = free_solution(spec.data, spec.eps, run.final.x, run.t_end)[0]
    errors.append(np.max(np.abs(run.final.u - exact)))
    print(f"delta={delta:.5f}  sup error={errors[-1]:.3e}")

orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
print("observed orders:", np.round(orders, 3))
