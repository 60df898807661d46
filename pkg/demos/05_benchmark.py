# The three-task benchmark across all arms.
#
# Reproduces the calibration targets: roughly (39, 52, 28) without
# conditioning, (65, 73, 72) with layout conditioning, (83, 82, 86)
# with the full refinement loop. Equivalent CLI:
#
#   intentloop bench --tasks numeracy,attribute,spatial --n 100 \
#       --seed 42 --arms unconditioned,conditioned,refined \
#       --out report.json --table report.md

import time

from intentloop import BenchConfig, emit_report, run_benchmark
from intentloop.presets import load_presets

bundle = load_presets()
config = BenchConfig(n_prompts=100, seed=42, bundle=bundle)

started = time.monotonic()
result = run_benchmark(config)
elapsed = time.monotonic() - started

print(emit_report(result, "md"))
print(f"runtime: {elapsed:.1f}s for 9 cells x {config.n_prompts} prompts")

# %% The refined arm also reports how many iterations sessions took

histogram = result.cells["refined"]["numeracy"]["iterations_histogram"]
print("refined numeracy iteration counts:", histogram)

# %% Reports serialize to json and csv as well

print(emit_report(result, "csv").splitlines()[0])
