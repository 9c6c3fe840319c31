"""Drive the penalty to zero and extrapolate the limit value.

A geometric schedule produces a monotone family of leader values whose
limit is the worst-case optimum. On FS the selection never moves (the
follower objective is identically zero, so the penalty decides alone)
and the trace is flat; on QB the trace climbs toward 4.
"""

import bilevelpen as bp

schedule = bp.EpsSchedule(eps0=0.1, rho=0.5, k_max=12)

for name, target in (("FS", 2.0), ("QB", 4.0)):
    problem = bp.registry_get(name)
    trace = bp.run_continuation(problem, schedule)
    print(f"{name}: continuation over {len(trace)} penalty levels")
    for row in trace.rows[::3]:
        print(f"  eps {row.epsilon:10.6f}  value {row.v:.8f}")
    mono = bp.check_monotone(trace, slack=2e-4)
    est = bp.limit_estimate(trace)
    print(f"  monotone: {mono.ok};  extrapolated limit {est.v_limit:.8f} "
          f"(target {target}, error {abs(est.v_limit - target):.2e})")
    print()

print("optimistic continuation mirrors the approach from above (QB):")
trace = bp.run_continuation(bp.registry_get("QB"), schedule, sign=-1)
print("  values:", " ".join(f"{v:.4f}" for v in trace.values[:8]))
print("  decreasing:", bp.check_monotone(trace, slack=2e-4).ok)
