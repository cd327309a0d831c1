# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Scoring free-text descriptions
#
# A description is broken into key information units. Completeness asks how
# many annotated units the prediction covers. Faithfulness asks how many
# predicted units are backed by the annotation.

# +
from vlmscore import ExactMatcher, JudgeClient, JudgeMatcher, kiu_scores, match_kius

judge = JudgeClient.stub()
pred_text = "A woman holds a cup. The room is bright. A cat sleeps."
gt_text = "A woman holds a cup. The room is bright. Rain falls outside."
pred_units, gt_units = judge.extract_units([pred_text, gt_text])
print(pred_units)
print(gt_units)
# -

pf, gf = match_kius(pred_units, gt_units, JudgeMatcher(judge))
s = kiu_scores(pf, gf)
print(f"completeness {s.completeness:.3f}  faithfulness {s.faithfulness:.3f}  F1 {s.f1:.3f}")

# Matching is many to many, so one broad unit can cover several narrow ones.

pf, gf = match_kius(["cup", "cup", "lamp"], ["cup"], ExactMatcher())
print(pf, gf, kiu_scores(pf, gf))
