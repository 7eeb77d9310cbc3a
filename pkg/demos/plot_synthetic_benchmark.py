"""
Recovering a planted dictionary
===============================

Samples are drawn as random sparse combinations of a random unit-norm
dictionary.  A learned atom recovers a true one when their absolute cosine
is at least 0.99.
"""

from patchrec.bench import SynthSpec, run_synth_bench

for r in (2, 3, 4):
    row = run_synth_bench(SynthSpec(n=16, K=32, p=320, r=r, num_trials=5))
    print(f"r={r}: {row['mean_rate_pct']:.1f}% in {row['mean_time_s']:.2f}s per trial")

# one cell at full size
n = 36
row = run_synth_bench(SynthSpec(n=n, K=2 * n, p=20 * n, r=4, num_trials=5))
print(f"n=36 r=4: {row['mean_rate_pct']:.1f}%")
