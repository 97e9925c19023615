"""Driving scenarios the way the CLI does.

Everything the `smms` command does is available as a library call:
parse a config, run the scenario, pick an exit code, and serialize the
report. This script runs a willmore check on the unit sphere and shows
the same report in all three output formats.
"""

import json

from smms.config import load_config
from smms.runner import emit_report, exit_code, run_scenario

document = {
    "scenario": "willmore-check",
    "model": {"name": "euclidean", "params": {"n": 3}},
    "surface": {"type": "sphere", "radius": 1.0},
    "numerics": {"r_max": 8.0, "r_samples": 64,
                 "schedule": [1.0, 2.0, 4.0, 8.0]},
}

config = load_config(json.dumps(document))
report = run_scenario(config)

print(f"scenario: {report.scenario}")
print(f"exit code: {exit_code(report)}")
print(f"gap: {report.results['gap']['value']:+.3e}")
for verdict in report.verdicts:
    print(f"verdict {verdict['name']}: passed={verdict['passed']}")
print()

print("--- json (truncated to the gap block) ---")
payload = json.loads(emit_report(report, format="json"))
print(json.dumps(payload["results"]["gap"], indent=2, sort_keys=True))
print()

print("--- csv ---")
csv_text = emit_report(report, format="csv").decode("utf-8")
for line in csv_text.splitlines()[:8]:
    print(line)
print("...")
print()

print("--- plotdata ---")
plot_text = emit_report(report, format="plotdata").decode("utf-8")
for line in plot_text.splitlines()[:10]:
    print(line)
print("...")
print()

print("From a shell the same run is:")
print("  smms willmore-check --config config.json --format json")
print("Exit codes: 0 ok, 2 a verdict failed, 3 certification failed,")
print("4 bad config, 1 anything else. --strict escalates warnings.")
