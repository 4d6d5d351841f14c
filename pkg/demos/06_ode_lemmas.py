"""
ODE lemmas: closed-form bounds against actual escape times
==========================================================

Each iteration lemma gives an explicit time beyond which a solution of the
differential inequality cannot exist. Integrating the equality ODE shows
how much room each bound leaves.
"""
import numpy as np

from lifespan_lab import odelab as od

print("lemma1 constant, p=2 a=0 D2=1:", od.lemma1_constant(1.0, 2.0, 0.0))
print("critical Li-Zhou constant, p=2 M2=4:", od.lizhou_constant(4.0, 2.0, 1.0))
print("R_inf / R =", od.r_inf_ratio())

for a in (-1.0, 0.0, 0.5):
    rep = od.ode_blowup("lizhou", {"p": 2.0, "a": a, "M1": 1.0, "M2": 1.0})
    print(f"lizhou a={a:+.1f}: escape {rep.t_observed:.4g}, bound {rep.t_bound:.4g},"
          f" margin {rep.margin:.3g}, step agreement {rep.step_agreement:.1e}")

# the plain lem1 ODE from tangent data can miss the bound at p = 3;
# the forced variant stays inside the lemma's hypotheses and does not
params = {"p": 3.0, "a": 0.0, "D1": 0.5, "D2": 0.5}
try:
    od.ode_blowup("lem1", params)
except od.NoBlowUp as exc:
    print("plain lem1, p=3:", exc)
print("forced lem1, p=3: margin", round(od.ode_blowup("lem1_forced", params).margin, 2))

# lifespan scaling in the initial size M1
m1 = 2.0 ** -np.arange(7)
t = [od.ode_blowup("lizhou", {"p": 2.0, "a": 0.0, "M1": m, "M2": 1 / 16}).t_observed for m in m1]
print("log-log slope in M1:", round(od.fit_loglog(m1, t)[0], 4), "(predicted -1)")

# recurrences against closed forms
for kind in ("lem1_abc", "lizhou_mk", "lizhou_hjt", "lizhou_ql"):
    print(f"{kind:11s} max rel error {od.seq_eval(kind, 2.0, 0.5, 30).max_rel_error():.1e}")
prod = od.seq_eval("products", 2.0, 0.0, 60)
print("n0 =", prod.extra["n0"], " l_inf =", prod.extra["l_inf"], " k_inf =", prod.extra["k_inf"])
