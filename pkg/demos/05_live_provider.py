"""Plugging a live method in over stdio.

Replay files are enough to compare recorded runs, but the engine can
also drive a running process: anything that answers a six-verb text
protocol on stdin/stdout.  This script first speaks the protocol by
hand so the wire is visible, then hands the same child command to the
engine for a full evaluation under each lens.  The child here is the
companion ``tempora-harness`` echoing a recorded fixture, so every
number must agree exactly with evaluating the file directly; swap in
your own process and the engine cannot tell the difference.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

from tempora import (
    PRESETS,
    AmortisedConfig,
    DiscreteConfig,
    ExternalProvider,
    ProviderInfo,
    TraceBundle,
    amortised_utility,
    continuous_utility,
    cutoff,
    discrete_utility,
    gen_frozen_run,
    gen_synthetic,
    overheads,
    run_amortised,
    run_continuous,
    run_discrete,
    utilisation_to_gamma,
    write_frozen_run,
    write_trace,
)

MS = 10**6
SEC = 10**9
N = 200
BUDGET_NS = 2 * SEC

workdir = Path(tempfile.mkdtemp(prefix="live-provider-"))
profile = PRESETS["tent-table2"]
trace = gen_synthetic(profile, N, [5, 0])
fixture = workdir / "tent.jsonl"
write_trace(trace, fixture)

# A frozen tail at exactly the cutoff the 2 s budget will produce.
m = cutoff(overheads(trace.deltas_ns(), profile.lambda_ns),
           BUDGET_NS)
frozen_run = gen_frozen_run(profile, trace, m, [5, 0], frozen_level=0.001)
tail_path = workdir / f"tent-m{m}.jsonl"
write_frozen_run(frozen_run, tail_path, lambda_ns=profile.lambda_ns)

child_cmd = [sys.executable, "-m", "tempora_harness", str(fixture),
             "--frozen", str(tail_path)]

print("The wire, by hand (engine side on the left):")
with subprocess.Popen(child_cmd, stdin=subprocess.PIPE,
                      stdout=subprocess.PIPE, text=True) as proc:
    def say(line):
        print(f"  -> {line}")
        proc.stdin.write(line + "\n")
        proc.stdin.flush()
        if line != "BYE":
            print(f"  <- {proc.stdout.readline().rstrip()}")

    say(f"HELLO method={trace.method} lambda_ms=39.9 n={N} "
        "protocol=amortised")
    say("STEP index=1 mode=adapt")
    say("STEP index=2 mode=adapt")
    say("BYE")
    print(f"  <- {proc.stdout.readline().rstrip()}")
print()

# Now the engine drives the very same command itself, one fresh child
# process per run, and the reports must match the file-based route.
bundle = TraceBundle(trace, (frozen_run,))
info = ProviderInfo(method=trace.method, lambda_ns=trace.lambda_ns, n=N)

gamma = utilisation_to_gamma(trace.lambda_ns, 1.0)
d_cfg = DiscreteConfig(gamma_ns=gamma)
_, live_d = run_discrete(ExternalProvider(child_cmd, info), d_cfg)
file_d = discrete_utility(trace, d_cfg)

live_c = run_continuous(ExternalProvider(child_cmd, info), 150 * MS)
file_c = continuous_utility(trace, threshold_ns=150 * MS)

a_cfg = AmortisedConfig(budget_ns=BUDGET_NS, lambda_ns=trace.lambda_ns)
live_a = run_amortised(ExternalProvider(child_cmd, info), a_cfg)
file_a = amortised_utility(bundle, a_cfg)

print("Utility, live child vs the file it echoes:")
for label, live, file in (
    ("tight arrivals", live_d.utility, file_d.utility),
    ("150 ms threshold", live_c.utility, file_c.utility),
    ("2 s budget", live_a.utility, file_a.utility),
):
    match = "identical" if live == file else "MISMATCH"
    print(f"  {label:<17} {live:.6f} vs {file:.6f}  ({match})")
print()
print(f"The budget froze the live child after batch {live_a.cutoff_m}")
print(f"(file route: batch {file_a.cutoff_m}); from there it answered "
      "from its frozen tail.")
print("Any program that speaks these six verbs can stand where the")
print("echo harness just stood.")
