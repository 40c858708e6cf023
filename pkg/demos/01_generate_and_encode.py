"""Walk through cohort generation and feature encoding.

Draws a synthetic appointment cohort calibrated to published clinic
marginals, bins the two numeric variables, and builds the one-hot
design matrix the models consume.
"""

from noshow import synth
from noshow.dataset import build_schema, class_weights, encode_with_schema
from noshow.pipeline import default_bins

records = synth.generate_population(4000, seed=7)
print(f"cohort: {len(records)} appointments, "
      f"{records.labels.mean():.1%} no-shows")

first = next(iter(records))
print("\nfirst record:")
for field in ("record_id", "gender", "age_years", "service",
              "lead_time_days", "month", "day_of_week", "outcome"):
    print(f"  {field:15s} {getattr(first, field)}")

bins = default_bins(records)
for spec in bins:
    print(f"\n{spec.variable} bands: {', '.join(spec.labels)}")

schema = build_schema(records, bins, drop_reference=True)
design = encode_with_schema(records, schema)
print(f"\ndesign matrix: {design.X.shape[0]} x {design.X.shape[1]}")
print("columns:", ", ".join(schema.column_names[:6]), "...")

w = class_weights(design.y)
print(f"\nclass weights: show {w.w_show:.3f}, no-show {w.w_no_show:.3f}")
print("(weighted so both classes contribute equally to every loss)")
