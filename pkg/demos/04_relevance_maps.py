"""Explain individual network predictions with relevance propagation.

Trains a small network, then redistributes each patient's pre-sigmoid
output back onto the input variables. Positive relevance pushed the
prediction toward no-show, negative toward attendance, and the parts
sum back to the output (conservation).
"""

import numpy as np

from noshow import synth
from noshow.pipeline import explanation_heatmap, train_on_records

records = synth.generate_population(3000, seed=5)
result = train_on_records(records, "mlp", seed=5, folds=3, reps=1)
selection = result.selection
print(f"trained mlp: {selection['n_hidden']} hidden units, "
      f"{selection['n_iterations']} iterations, "
      f"test AUROC {result.test_metrics['auroc']:.3f}")

probe = records.take(range(6))
maps, table = explanation_heatmap(result.artifact, probe)

m = maps[0]
print(f"\npatient {m.record_id}: p(no-show) = {m.probability:.3f}")
print("relevance by variable:")
for variable, value in sorted(m.per_variable.items(),
                              key=lambda kv: -abs(kv[1])):
    print(f"  {variable:12s} {value:+.4f}")
residual = m.output_relevance - float(m.per_column.sum()) - m.absorbed
print(f"conservation residual: {residual:.2e}")

print("\ncohort heatmap (columns sorted by descending probability):")
header = "  ".join(f"{p:.3f}" for p in table.probabilities)
print(f"{'':12s} {header}")
for k, variable in enumerate(table.variables):
    cells = "  ".join(f"{v:+.2f}" for v in table.cells[k])
    print(f"{variable:12s} {cells}")
assert np.all(np.diff(table.probabilities) <= 0)
