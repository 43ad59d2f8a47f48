"""
Training DDPG agents with different replay buffers
==================================================

One 1,000-episode run per buffer variant on the synthetic environment.  The
step sizes are larger than the library defaults, which barely move in this
many episodes (see the README).  Expect about a minute on one core.
"""

from lser.harness import ExperimentConfig, final_window_ctr, run_variant_comparison

base = ExperimentConfig(variant="lser", episodes=1000, actor_lr=3e-3, critic_lr=5e-2, n_h=8)
arms = run_variant_comparison(base, ["uniform", "per", "lser", "lser_s"], seeds=[2])
for arm in arms:
    first = final_window_ctr(arm.metrics[:100], 100)
    last = final_window_ctr(arm.metrics, 100)
    extra = f" buckets={arm.buffer.bucket_count}" if hasattr(arm.buffer, "bucket_count") else ""
    print(f"{arm.config.variant:8s} CTR first 100 episodes {first:.3f}, last 100 {last:.3f}{extra}")
