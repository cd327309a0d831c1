# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Matching entity lists
#
# Predicted and annotated entities are paired one to one, best score first.
# How forgiving the pairing is depends on the matcher.

# +
from vlmscore import JudgeClient, detection_scores, make_matcher, match_entities

pred = ["mobile phone", "couch", "coffee cup", "umbrella"]
gt = ["cellphone", "sofa", "cup", "laptop"]
# -

for kind in ("exact_normalized", "token_jaccard", "judge"):
    matcher = make_matcher(kind, threshold=0.5, judge=JudgeClient.stub())
    d = detection_scores(match_entities(pred, gt, matcher))
    print(f"{kind:17} tp={d.tp} fp={d.fp} fn={d.fn} F1={d.f1:.3f}")

# Nothing matches exactly. Token overlap pairs "coffee cup" with "cup". The
# offline stub judge knows a small synonym table, so it also accepts the
# phone and the sofa.

# Grid positions are scored with Jaccard over the nine cells.

# +
from vlmscore import jaccard, parse_grid

a = parse_grid(["top-left", "center"])
b = parse_grid(["Center", "bottom right"])
print(sorted(a), sorted(b), jaccard(a, b))
# -
