"""Smoke test for the qpp extension module.

Build and install first:
    pip install --no-build-isolation -e crates/py
"""

import json
import math
import os
import subprocess
import tempfile

import qpp


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    assert close(qpp.kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]), 2 / 3)
    assert close(qpp.pearson([1, 2, 3], [2, 4, 6]), 1.0)
    assert close(qpp.average_precision(["a", "b", "c"], ["a", "c"]), 0.833333, 1e-6)
    t, p = qpp.paired_t_test([1, 2, 3], [0, 0, 0])
    assert close(t, 3.4641, 1e-4) and close(p, 0.0742, 1e-3)

    scores = [9.0, 7.0, 4.0, 1.0]
    assert close(qpp.predict("sigma_k", scores, 2.0, k=4), qpp.predict("nqc", scores, 1.0, k=4))
    assert close(qpp.predict("wig", scores, 2.0, query_length=4, k=2), (7 + 5) / 2 / 2)
    try:
        qpp.predict("nqc", scores, 0.0)
    except qpp.QppError:
        pass
    else:
        raise AssertionError("zero collection score should raise")

    assert [qpp.aggregate([0.2, 0.8, 0.5], h) for h in ("max", "mean", "first")] == [0.8, 0.5, 0.2]

    with tempfile.TemporaryDirectory() as tmp:
        store = qpp.EmbeddingStore(3, "smoke")
        store.add("q1", "d1", 1, [0.5, -1.0, 2.0])
        store.add("q1", "d2", 2, [0.0, 1.0, 0.25])
        for name in ("pairs.qppe", "pairs.jsonl"):
            path = os.path.join(tmp, name)
            store.save(path)
            back = qpp.EmbeddingStore.load(path)
            assert len(back) == 2 and back.dim == 3
            assert back.get("q1", "d2") == [0.0, 1.0, 0.25]

        model = qpp.GroupwiseModel(8, n_heads=2, group_size=4, seed=1)
        group = [[0.1 * i + j for j in range(8)] for i in range(4)]
        out = model.predict_group(group)
        swapped = model.predict_group([group[2], group[0], group[3], group[1]])
        assert all(close(a, b) for a, b in zip(swapped, [out[2], out[0], out[3], out[1]]))
        path = os.path.join(tmp, "model.qppm")
        model.save(path)
        assert qpp.GroupwiseModel.load(path).predict_group(group) == out

        data = os.path.join(tmp, "data")
        qpp_bin = os.environ.get("QPP_BIN")
        if qpp_bin:
            subprocess.run([qpp_bin, "synth", "--queries", "24", "--depth", "12", "--out", data], check=True)
            config = f"""
run = "{data}/run.txt"
qrels = "{data}/qrels.txt"
embeddings = "{data}/embeddings.qppe"
collection_scores = "{data}/collection.txt"
out = "{tmp}/out"
methods = ["nqc", "nsigma"]
k = 5
n_splits = 3
"""
            report = json.loads(qpp.run_experiment(config))
            assert len(report["splits"]) == 3
            assert all(math.isfinite(m["mean_kendall"]) for m in report["methods"])

    print("qpp smoke test passed")


if __name__ == "__main__":
    main()
