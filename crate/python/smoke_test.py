"""Smoke test for the lzrobust Python module.

Uses an installed module (maturin develop) when present, otherwise loads the
library built by `cargo build -p lzrobust-py`.
"""
import importlib
import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("lzrobust")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "liblzrobust.so"
        if lib.exists():
            tmp = Path(tempfile.mkdtemp())
            shutil.copy(lib, tmp / "lzrobust.so")
            sys.path.insert(0, str(tmp))
            return importlib.import_module("lzrobust")
    sys.exit("lzrobust module not found; run `cargo build -p lzrobust-py` first")


def main():
    lz = load()

    assert lz.encode_int(1) == "1"
    assert lz.encode_int(2) == "0100"
    assert lz.decode_int("0100111") == (2, 4)

    x = "1011010100010"
    c = lz.Coder("lz78")
    assert c.code_len(x) == 29
    assert c.decode(c.encode(x)) == x
    for spec in ("lz78-coord", "lzwin:8", "block:5", "mixture:2", "verbatim"):
        k = lz.Coder(spec)
        assert k.decode(k.encode(x)) == x, spec
    curve = c.ratio_curve(x, 4)
    assert [n for n, _, _ in curve] == [4, 8, 12]

    src = lz.Source("flip:1/10")
    assert src.prob("01") == "1/20"
    assert abs(src.entropy_rate() - 0.468995593589) < 1e-9
    s = src.sample(20000, seed=3)
    assert s == src.sample(20000, seed=3)
    assert abs(-src.log2_prob(s) / len(s) - src.entropy_rate()) < 0.02

    b = lz.Source("bernoulli:1/5").sample(50000, seed=1)
    assert abs(lz.mixture_log_loss(b, kmax=2) - 0.7219) < 0.02
    pts = lz.deficiency(b, 10000, measure="bernoulli:1/5")
    assert len(pts) == 5 and all(math.isfinite(p[3]) for p in pts)

    t = lz.Construction()
    assert t.heights() == [92, 184, 368, 368]
    assert t.delta_mass(2) == "1/512"
    assert t.stage_prob("1", 1) == "1/256"

    e = lz.Construction(h0=16, folds=[2, 2, 4, 2])
    alpha, trace = e.alpha()
    assert len(alpha) == e.heights()[-1]
    assert json.loads(trace)["length"] == len(alpha)
    assert len(lz.deficiency(alpha, 256, construction=e)) == 4
    assert len(e.sample(7, 100)) == 100

    with tempfile.TemporaryDirectory() as out:
        cfg = {
            "experiment": "universality",
            "seed": 5,
            "output_dir": out,
            "universality": {"n": 2000, "stride": 1000, "kmax": 1},
        }
        summary = json.loads(lz.run_experiment(json.dumps(cfg)))
        assert summary["universality"]["config"]["seed"] == 5
        assert (Path(out) / "universality.csv").exists()

    try:
        lz.Coder("lz77")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown coder accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
