"""Drive the HTTP service end to end, in process.

Uploads a cohort, trains a model, previews two intervention policies,
commits one, and fetches a patient explanation: the same loop the
dashboard runs, exercised against an in-process test client so no
server or port is needed.
"""

import tempfile
import warnings
from pathlib import Path

warnings.filterwarnings("ignore", message="Using `httpx`")
from starlette.testclient import TestClient  # noqa: E402

from noshow import synth
from noshow.api import create_app
from noshow.dataset import write_csv
from noshow.registry import Registry

records = synth.generate_population(2500, seed=4)

with tempfile.TemporaryDirectory() as data_dir:
    cohort_path = Path(data_dir) / "cohort.csv"
    write_csv(records, cohort_path)
    csv_bytes = cohort_path.read_bytes()
    client = TestClient(create_app(Registry(data_dir)))

    r = client.post("/datasets", files={"file": ("cohort.csv", csv_bytes)})
    dataset_id = r.json()["dataset_id"]
    print(f"uploaded {r.json()['n']} records as {dataset_id}")

    r = client.post("/models", json={"kind": "linear",
                                     "dataset_id": dataset_id,
                                     "seed": 4, "folds": 3, "reps": 1})
    model_id = r.json()["model_id"]
    print(f"trained {model_id}: cv auroc "
          f"{r.json()['cv']['mean_auroc']:.3f}, "
          f"test auroc {r.json()['test']['auroc']:.3f}")

    for fractions in ((0.3, 0.4, 0.3), (0.2, 0.3, 0.5)):
        r = client.post("/policy/preview",
                        json={"model_id": model_id,
                              "dataset_id": dataset_id,
                              "fractions": fractions})
        body = r.json()
        print(f"preview {fractions}: coverage {body['coverage']:.1%}, "
              f"risk {body['risk']:.1%}")

    client.put("/policy", json={"model_id": model_id,
                                "dataset_id": dataset_id,
                                "fractions": [0.2, 0.3, 0.5]})
    print("committed the 20/30/50 policy")

    r = client.get("/cohort", params={"model_id": model_id,
                                      "dataset_id": dataset_id,
                                      "group": "C"})
    top = r.json()["patients"][0]
    print(f"group C holds {len(r.json()['patients'])} patients; "
          f"riskiest is record {top['record_id']} "
          f"at {top['score']:.3f}")

    r = client.post("/models", json={"kind": "mlp",
                                     "dataset_id": dataset_id,
                                     "seed": 4, "folds": 2, "reps": 1})
    mlp_id = r.json()["model_id"]
    r = client.get(f"/patients/{top['record_id']}/explanation",
                   params={"model_id": mlp_id, "dataset_id": dataset_id})
    print(f"\nexplanation for record {top['record_id']} "
          f"(p = {r.json()['probability']:.3f}):")
    for variable, value in r.json()["per_variable"].items():
        print(f"  {variable:12s} {value:+.4f}")
