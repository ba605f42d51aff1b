"""Smoke test for the glovepose_py extension module.

Build the module first:

    cargo build --release -p glovepose-py --features extension-module

then run `python3 python/smoke_test.py`. The script copies the built library
into a temporary directory under its importable name.
"""

import glob
import json
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_module():
    candidates = []
    for profile in ("release", "debug"):
        candidates += glob.glob(os.path.join(ROOT, "target", profile, "libglovepose_py.so"))
        candidates += glob.glob(os.path.join(ROOT, "target", profile, "libglovepose_py.dylib"))
    if not candidates:
        sys.exit("libglovepose_py not built; see the module docstring")
    lib = max(candidates, key=os.path.getmtime)
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(tmp, "glovepose_py.so"))
    sys.path.insert(0, tmp)
    import glovepose_py

    return glovepose_py, tmp


def main():
    gp, tmp = import_module()

    # Smooth L1 closed form with the knee at 0.5.
    for d, want in [(0.0, 0.0), (0.25, 0.0625), (0.5, 0.25), (1.0, 0.75)]:
        got = gp.smooth_l1([[d]], [[0.0]])
        assert got == want, (d, got, want)

    assert gp.taps([1.0, 1.0, 1.5, 1.5, 1.0], 1.0) == [3]
    assert gp.color(True, [False, True, False, False]) == "red"

    folds = gp.fold_assignments(100, "kfold10", 7)
    assert sorted(set(folds)) == list(range(10))
    assert all(folds.count(k) == 10 for k in range(10))

    truth = [[float(i + j) for j in range(gp.NUM_JOINTS)] for i in range(5)]
    m = json.loads(gp.metrics(truth, truth))
    assert m["avg_rmse"] == 0.0

    data = gp.Dataset.synthetic(0.5, seed=1)
    assert len(data) == 600
    feats = data.features()
    assert len(feats[0]) == gp.NUM_CHANNELS
    path = os.path.join(tmp, "session.csv")
    data.write(path)
    again = gp.Dataset.read(path)
    # Files keep nine significant digits.
    for a, b in zip(again.angles(), data.angles()):
        assert all(abs(x - y) <= 1e-7 * max(1.0, abs(y)) for x, y in zip(a, b))

    cfg = json.dumps({"hidden_size": 4, "fc1_width": 8})
    opts = json.dumps({"epochs": 2, "seed": 3})
    model = gp.Model.train(data, stride=10, config=cfg, options=opts)
    assert len(model.loss_curve()) == 2
    stream = model.predict_stream(data)
    assert len(stream) == 600 - gp.WINDOW_LENGTH + 1

    # The streaming output for the first full window equals a direct forward pass.
    first = model.predict([feats[: gp.WINDOW_LENGTH]])[0]
    assert max(abs(a - b) for a, b in zip(first, stream[0])) < 1e-9

    ckpt = os.path.join(tmp, "model.gpml")
    model.save(ckpt)
    loaded = gp.Model.load(ckpt)
    assert loaded.param_hash() == model.param_hash()

    try:
        gp.Model.load(path)
    except ValueError as e:
        assert str(e).startswith("[corrupt-checkpoint]"), e
    else:
        raise AssertionError("loading a dataset as a checkpoint must fail")

    shutil.rmtree(tmp)
    print("python smoke test passed")


if __name__ == "__main__":
    main()
