"""Solve the penalized problem at a few penalty levels.

The QB registry problem has a closed-form solution: the best leader point
is y = 1/2 and the penalized value is 4 / (1 + 4 eps), which approaches
the worst-case limit value 4 from below as the penalty shrinks. The
optimistic variant (sign = -1) approaches the same limit from above.
"""

import bilevelpen as bp

qb = bp.registry_get("QB")

print("pessimistic penalized solves on QB")
print(f"{'eps':>8} {'value':>12} {'closed form':>12} {'y':>8}")
for eps in (0.2, 0.1, 0.05, 0.01, 0.001):
    sol = bp.solve_penalized(qb, eps)
    print(f"{eps:8.3f} {sol.value:12.8f} {4 / (1 + 4 * eps):12.8f} {sol.y[0]:8.4f}")

print()
print("worst-case vs best-case tie-breaking at eps = 0.01")
pess = bp.solve_penalized(qb, 0.01, sign=+1)
opt = bp.solve_penalized(qb, 0.01, sign=-1)
print(f"  pessimistic value {pess.value:.6f}  (limit 4 approached from below)")
print(f"  optimistic  value {opt.value:.6f}  (limit 4 approached from above)")

print()
print("the follower's response moves with the penalty (QB at y = 1/2):")
for eps in (0.1, 0.01, 0.001):
    r = bp.select_response(qb, [0.5], eps)
    sigma = r.x[0] + r.x[1]
    print(f"  eps {eps:6.3f}: z1 + z2 = {sigma:.6f} "
          f"(analytic {(1 - 4 * eps) / (1 + 4 * eps):.6f}), leader value {r.leader_value:.6f}")
