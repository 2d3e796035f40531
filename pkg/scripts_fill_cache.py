"""Fill the recovery-study cache used by the acceptance suite, resumably.

Safe to re-run after interruptions: completed replications are loaded from
.recovery_cache and only missing ones are computed.
"""
import logging
import sys

from iclv.draws import DrawPlan
from iclv.model import OptimizerOptions
from iclv.presets import reference_truth_config
from iclv.simulate import recovery_study

logging.basicConfig(stream=sys.stderr, level=logging.INFO)
cfg = reference_truth_config(seed=100)
report = recovery_study(cfg, replications=50, plan=DrawPlan(draws=500, seed=0),
                        options=OptimizerOptions(), n_jobs=2,
                        cache_dir="/root/pkg/.recovery_cache")
print("failures:", report.n_failures)
print("pooled 2SE coverage:", float(report.coverage().mean()))
