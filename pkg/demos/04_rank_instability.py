"""Why an offline leaderboard does not survive contact with a clock.

All the built-in method profiles are scored four ways on synthetic
streams: offline accuracy (no clock), utility under tight fixed
arrivals, utility under a 50 ms lateness threshold, and utility under a
2 s adaptation budget.  The offline ranking is then compared with each
pressured ranking via Spearman correlation, and an insolvency check
shows how much accuracy a slow method would need just to break even
with a fast baseline.
"""

from tempora import (
    PRESETS,
    AmortisedConfig,
    DiscreteConfig,
    TraceBundle,
    accuracy_mean,
    amortised_utility,
    continuous_utility,
    cutoff,
    discrete_utility,
    gen_frozen_run,
    gen_synthetic,
    insolvency_threshold,
    overheads,
    rank,
    spearman_scores,
    utilisation_to_gamma,
)

N = 500
MS = 10**6
SEC = 10**9
BUDGET_NS = 2 * SEC

# Accuracy the frozen model still reaches, where freezing can happen
# at all inside a 2 s budget.
FROZEN_LEVELS = {
    "tent-table2": 0.001,
    "eta-table2": 0.001,
    "sar-table2": 0.001,
    "shot-im-table2": 0.322,
    "lame-table2": 0.038,
}

offline: dict[str, float] = {}
discrete: dict[str, float] = {}
continuous: dict[str, float] = {}
amortised: dict[str, float] = {}
discrete_reports = {}

for pi, name in enumerate(sorted(PRESETS)):
    profile = PRESETS[name]
    trace = gen_synthetic(profile, N, [23, pi])

    offline[name] = accuracy_mean(trace.records)

    gamma = utilisation_to_gamma(profile.lambda_ns, 1.0)
    rep = discrete_utility(trace, DiscreteConfig(gamma_ns=gamma))
    discrete[name] = rep.utility
    discrete_reports[name] = rep

    continuous[name] = continuous_utility(trace, threshold_ns=50 * MS).utility

    costs = overheads(trace.deltas_ns(), profile.lambda_ns)
    m = cutoff(costs, BUDGET_NS)
    runs = ()
    if m < N:
        runs = (gen_frozen_run(profile, trace, m, [23, pi],
                               frozen_level=FROZEN_LEVELS.get(name)),)
    bundle = TraceBundle(trace, runs)
    cfg = AmortisedConfig(budget_ns=BUDGET_NS, lambda_ns=profile.lambda_ns)
    amortised[name] = amortised_utility(bundle, cfg).utility

columns = (
    ("offline", offline),
    ("arrivals", discrete),
    ("lateness", continuous),
    ("budget", amortised),
)

print(f"Utility under each lens ({N} synthetic batches per method):")
print(f"{'method':<16}" + "".join(f"{label:>10}" for label, _ in columns))
for name in sorted(PRESETS):
    row = "".join(f"{scores[name]:10.3f}" for _, scores in columns)
    print(f"{name:<16}{row}")
print()

print("Leader and rank agreement with the offline column:")
offline_ranks = rank(offline).as_dict()
for label, scores in columns:
    leader = max(scores, key=scores.get)
    if label == "offline":
        print(f"  {label:<9} leader {leader:<16} (reference)")
        continue
    rho = spearman_scores(scores, offline)
    moved = max(
        abs(r - offline_ranks[m]) for m, r in rank(scores).as_dict().items()
    )
    print(f"  {label:<9} leader {leader:<16} Spearman {rho:+.3f}, "
          f"largest rank move {moved:.0f} places")
print()

# Insolvency: with only a fraction of the stream answered, how accurate
# would a method have to be on that fraction to match the best utility?
target = max(discrete.values())
best = max(discrete, key=discrete.get)
print(f"To match {best} at utility {target:.3f} under tight arrivals:")
for name in sorted(PRESETS):
    rep = discrete_reports[name]
    if rep.availability >= 0.999 or name == best:
        continue
    need = insolvency_threshold(target, rep.availability)
    verdict = "impossible" if need.impossible else (
        f"vs actual {rep.served_accuracy:.3f}")
    print(f"  {name:<16} answers {rep.availability:5.1%} -> needs "
          f"{need.required:6.3f} on what it serves ({verdict})")
