# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # End-to-end evaluation
#
# Build a small synthetic corpus, score it with the offline stub judge and
# render the report. The CLI equivalent is
# `vlmscore eval --gt gt.jsonl --pred pred.jsonl --judge stub --format markdown`.

# +
import tempfile

from vlmscore import EvalConfig, JudgeClient, ingest, render_report, run_eval
from vlmscore.synthetic import write_corpus

workdir = tempfile.mkdtemp()
gt_path, pred_path = write_corpus(workdir, n=40, seed=1)
data = ingest(gt_path, pred_path)
print(len(data.samples), "samples;", len(data.warnings), "warnings")
# -

config = EvalConfig(
    tasks=("objects", "humans", "logos", "ocr", "media", "nsfw", "reliability"),
    matcher="judge",
    judge=JudgeClient.stub(),
)
report = run_eval(config, data.samples, data.warnings)
print("status:", report.status, "digest:", config.digest())

print(render_report(report, "markdown").decode())

# Re-running with more workers gives the same bytes.

par = run_eval(EvalConfig(**{**config.__dict__, "parallelism": 4}), data.samples, data.warnings)
print(render_report(par, "json") == render_report(report, "json"))
