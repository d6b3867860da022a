"""A walking tour of the emulated arithmetic.

Rounds a few values into toy precisions, shows that stochastic rounding
is unbiased where round-to-nearest is not, and runs one tiny summation
with its full roundoff trace printed next to the exact error identity.
"""

import numpy as np

from sumlab import (
    Precision,
    RoundingMode,
    build_sequential,
    error_via_local_products,
    round_value,
    run_tree_sum,
)

RTN = RoundingMode.NEAREST_TIES_EVEN
SR = RoundingMode.STOCHASTIC

# --- one value, several precisions -----------------------------------
# t counts significand bits including the implicit leading one, so
# u = 2^-t and representable numbers near 1 are spaced 2u apart.
value = 1.0 + 1.0 / 3.0
print(f"rounding {value!r}")
for t in (4, 8, 11, 24):
    p = Precision(t)
    r = round_value(value, p, RTN)
    print(f"  t={t:2d}  u=2^-{t:<2d}  ->  {r!r}  (off by {r - value:+.2e})")

# --- stochastic rounding averages out --------------------------------
# RTN always picks the same neighbor; SR picks the far one with
# probability proportional to the distance, so the mean converges to
# the unrounded value instead of the nearest grid point.
p = Precision(8)
rng = np.random.default_rng(7)
draws = np.array([round_value(value, p, SR, rng) for _ in range(20000)])
print()
print(f"at t=8: nearest grid point    {round_value(value, p, RTN)!r}")
print(f"        mean of 20000 SR draws {draws.mean():.6f}  (true value {value:.6f})")

# --- a tiny traced summation ------------------------------------------
# Every addition logs its relative roundoff delta; the weighted sum of
# exact partial sums, s_k * delta_k * prod(1 + later deltas), rebuilds
# the forward error bit for bit at first order and beyond.
x = np.array([0.7, 0.3, 0.9, 0.1, 0.5])
tree = build_sequential(len(x), Precision(6))
run = run_tree_sum(tree, x, RTN)
print()
print("sequential sum at t=6, one trial:")
for rec in run.trace:
    k = rec.op_id
    print(
        f"  node {k}: computed {float(run.computed[k])!r:>8}  exact {run.exact_hi[k]:.6f}"
        f"  delta {rec.delta:+.3e}  (|delta| <= {rec.bound:.3e})"
    )
err = run.error()
print(f"forward error          {err:+.6e}")
print(f"local-products oracle  {error_via_local_products(run):+.6e}")
print(f"difference             {abs(err - error_via_local_products(run)):.3e}")
