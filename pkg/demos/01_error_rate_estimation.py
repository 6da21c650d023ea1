# How noisy is a knowledge graph's typing data? Estimate error rates from
# small annotated samples with binomial confidence intervals.

from kgtyperr.metrics import error_rate_ci, implied_sample_size

# A manual audit of 600 coarse-grained type assertions found 163 wrong.
est = error_rate_ci(163, 600)
print(f"coarse-grained error rate: {est}")

# Small samples per fine-grained type paint a very uneven picture.
for type_name, k, n in [
    ("ProgrammingLanguage", 245, 334),
    ("President", 112, 153),
    ("Mayor", 22, 177),
    ("Governor", 11, 155),
]:
    print(f"  {type_name:20s} {error_rate_ci(k, n)}")

# The halfwidth formula can be inverted: given a published point estimate
# and interval, recover the sample size behind it.
print(f"\nimplied n for 0.272 +/- 0.0355: {implied_sample_size(0.272, 0.0355):.0f}")

# Wilson intervals behave better at the extremes.
print(f"\n1 error in 20 samples, normal: {error_rate_ci(1, 20)}")
print(f"1 error in 20 samples, wilson: {error_rate_ci(1, 20, method='wilson')}")
