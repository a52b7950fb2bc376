"""Self-convergence of both parametric formulations at m = 0.5, t = 0.02, dt = 0.01 ds^2."""

from gbmotion.harness import load_config, run_convergence

levels = [(ds, 0.01 * ds * ds) for ds in (0.2, 0.1, 0.05)]
for form in ("pdae", "parabolic"):
    rep = run_convergence(load_config(None, formulation=form, m=0.5, tEnd=0.02), levels)
    print(form)
    print(rep.table())
