"""Inspect the synthetic corpus and its planted tabular-by-text structure.

Six classes share one activity profile (only text separates them), six
other classes share one generic template pool (only signals separate
them), and "Other" is unique on both sources. The generator enumerates
its own construction to compute exact Bayes-optimal ceilings per source,
so you can see up front why a fused model must win.

Run:  python3 demos/03_synthetic_data.py
"""

from collections import Counter

from fusenet.synth import (SIGNAL_SHARED_GROUP, TEXT_SHARED_GROUP,
                           bayes_ceilings, generate_synthetic)

examples, manifest = generate_synthetic(n=390, noise=0.05, seed=5)

print("=== Corpus ===")
counts = Counter(ex.label for ex in examples)
print(f"  {len(examples)} examples, {len(counts)} classes, "
      f"{min(counts.values())}-{max(counts.values())} per class")
print()

print("=== Classes separated only by text (shared activity profile) ===")
for name in SIGNAL_SHARED_GROUP:
    sample = next(ex for ex in examples if ex.label == name)
    state = dict(sample.categorical)["account_state"]
    print(f"  {name:<34} state={state:<18} text: {sample.text[:48]}...")
print()

print("=== Classes separated only by signals (shared template pool) ===")
for name in TEXT_SHARED_GROUP:
    sample = next(ex for ex in examples if ex.label == name)
    state = dict(sample.categorical)["account_state"]
    print(f"  {name:<34} state={state:<22} text: {sample.text[:40]}...")
print()

print("=== Exact Bayes ceilings by noise level (top-3 accuracy) ===")
print(f"  {'noise':>6} {'text-only':>10} {'signals-only':>13} {'fused':>7}")
for noise in (0.0, 0.05, 0.1, 0.2):
    c = bayes_ceilings(noise)
    print(f"  {noise:>6.2f} {c['text_only_top3']:>10.3f} "
          f"{c['signals_only_top3']:>13.3f} {c['fusion_top3']:>7.3f}")
print()
print("Single sources cap out near 0.74 even with zero noise: a top-3 list")
print("cannot cover a six-way confusion. The fused model resolves both groups.")
