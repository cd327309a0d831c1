# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Weaving OCR blocks
#
# OCR engines and annotators rarely split text into the same blocks. Here a
# sign reading "SALE 50% OFF TODAY ONLY" is annotated as two blocks while the
# model emits three fragments in a scrambled order, plus one hallucination.

# +
from vlmscore import coverage_score, matching_blocks, sample_metrics, weave

gt = ["SALE 50% OFF", "TODAY ONLY", "Fresh Coffee"]
pred = ["OFF", "TODAY ONLY", "SALE 5O%", "zzqx"]
# -

# Coverage is the matched length over the shorter string. Matching is a
# recursive longest-common-substring split that ignores runs shorter than two.

for p in pred:
    print(f"{p!r:14}", [round(coverage_score(p, g), 3) for g in gt])

print(matching_blocks("SALE 5O%", "SALE 50% OFF"))

# The weaver groups fragments under the ground-truth block they cover best,
# orders them by where they land inside it, and reports everything it could
# not place.

w = weave(pred, gt)
for sp, sg in w.pairs:
    print(f"{sp.text.text!r:28} <-> {sg.text.text!r}")
print("unmatched pred:", [b.text.text for b in w.unmatched_pred])
print("unmatched gt:  ", [b.text.text for b in w.unmatched_gt])

# Metrics run over the woven texts. The unplaced "Fresh Coffee" lowers
# recall, and the stray "zzqx" lowers precision.

m = sample_metrics(w)
print(f"char P/R/F1 {m.char_precision:.3f} / {m.char_recall:.3f} / {m.char_f1:.3f}")
print(f"CER {m.cer:.3f}  WER {m.wer:.3f}")
