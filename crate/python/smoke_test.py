#!/usr/bin/env python3
"""Smoke test for the conffilt_py extension module.

Locates the built cdylib under target/, stages it under the importable
name, and exercises the model loader, ranked enumeration, confidence-set
construction, membership, and the entropy estimators.

Build the extension first:  cargo build -p conffilt-py
Then run:                   python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def stage_module() -> None:
    candidates = [
        REPO / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libconffilt_py.so", "conffilt_py.so", "libconffilt_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("conffilt_py cdylib not found; run `cargo build -p conffilt-py` first")
    stage = Path(tempfile.mkdtemp(prefix="conffilt-py-"))
    shutil.copy2(built, stage / "conffilt_py.so")
    sys.path.insert(0, str(stage))


stage_module()

import conffilt_py  # noqa: E402

GOLDEN = """
{
  "alphabet": ["0", "1"],
  "signal": { "kind": "iid", "marginal": [0.9, 0.1] },
  "channel": { "kind": "erasure_unknown" }
}
"""


def approx(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(a - b) <= tol


model = conffilt_py.Model(GOLDEN)
assert model.input_alphabet == ["0", "1"]
assert model.output_alphabet == ["0", "1", "*"]
assert model.needs_surrogate

ranked = model.ranked("0*1*")
assert [seq for seq, _ in ranked] == ["0010", "0011", "0110", "0111"]
assert approx(ranked[0][1], 0.81)
assert approx(ranked[1][1], 0.09)
assert approx(ranked[2][1], 0.09)
assert approx(ranked[3][1], 0.01)

assert approx(model.log2_posterior("0*1*", "0010"), math.log2(0.81))

# gamma = 0.99: three-element deterministic core, no boundary.
cs = model.confidence_set("0*1*", 0.99)
assert [seq for seq, _ in cs.core] == ["0010", "0011", "0110"]
assert cs.boundary is None
assert cs.expected_size == 3.0
assert cs.contains("0011", u=0.7)
assert not cs.contains("0111", u=0.0)

# gamma = 0.5: empty core, one randomized boundary with p = 50/81.
cs = model.confidence_set("0*1*", 0.5)
assert cs.core == []
seq, posterior, p = cs.boundary
assert seq == "0010" and approx(posterior, 0.81) and approx(p, 50.0 / 81.0)
assert approx(cs.coverage_mass, 0.5)
assert cs.contains("0010", u=0.5)          # u < p: in
assert not cs.contains("0010", u=0.99)     # u >= p: out
assert "p=" in cs.serialize()

# Sampling is deterministic in the seed and needs the surrogate here.
x1, z1 = model.sample_path(t=16, seed=7, surrogate_pi=0.3)
x2, z2 = model.sample_path(t=16, seed=7, surrogate_pi=0.3)
assert (x1, z1) == (x2, z2)
assert len(x1) == 16 and len(z1) == 16
try:
    model.sample_path(t=4, seed=7)
    raise AssertionError("expected ValueError without surrogate_pi")
except ValueError:
    pass

# Entropy: closed form for a known-erasure variant, 0.3 * H(0.9).
known = conffilt_py.Model(
    """
{
  "alphabet": ["0", "1"],
  "signal": { "kind": "iid", "marginal": [0.9, 0.1] },
  "channel": { "kind": "erasure_known", "erasure": { "kind": "iid", "pi": 0.3 } }
}
"""
)
h = 0.3 * -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
assert approx(known.entropy_closed_form(), h)
assert approx(known.entropy_exact_block(3), h, tol=1e-9)
value, std_error = known.entropy_smb(n=2000, reps=8, seed=11)
assert std_error is not None and abs(value - h) <= 4.0 * std_error

assert conffilt_py.derive_seed(1, 2) == conffilt_py.derive_seed(1, 2)
assert conffilt_py.derive_seed(1, 2) != conffilt_py.derive_seed(1, 3)

print("conffilt_py smoke test: all assertions passed")
