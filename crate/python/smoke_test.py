"""Smoke test for the shrinkflow Python bindings.

Build and install first:

    pip install --no-build-isolation -e crates/python
"""

import math
import sys
import tempfile

import shrinkflow_py as sf


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    return ok


def main():
    results = []

    ev = sf.eigenvalues(1, 8)
    expected = [k * k / 2 - 1 for k in (0, 1, 1, 2, 2, 3, 3, 4, 4, 5)]
    results.append(check("circle eigenvalues", all(abs(a - b) < 1e-12 for a, b in zip(ev, expected))))

    ev2 = sf.eigenvalues(2, 4)
    results.append(check("sphere multiplicities", len(ev2) == 16 and ev2[1:4] == [ev2[1]] * 3))

    results.append(check("circle area", abs(sf.gaussian_area(1) - math.sqrt(2 * math.pi / math.e)) < 1e-12))
    results.append(check("sphere area", abs(sf.gaussian_area(2) - 4 / math.e) < 1e-12))

    delta = sf.certified_delta(2)
    results.append(check("sphere delta", abs(delta - 0.5 * math.log(math.cosh(1.0))) < 1e-9, f"{delta:.6f}"))

    gap = sf.choose_gap(1, l0=0.4, c0=2.0)
    results.append(check("gap choice", 0 < gap["l"] <= 0.4 and gap["b"] > gap["b_min"], f"L={gap['l']:.5f} B={gap['b']:.4f}"))

    doc = sf.spectrum(1, 6)
    results.append(check("spectrum document", doc["schema_version"] == 1 and len(doc["levels"]) == 6))

    traj = sf.evolve(1, "mode k=2 amp=1e-3", tau_end=2.0)
    n = sf.decay_order(traj["tau"], traj["distance"], 0.5)
    results.append(check("decay order", abs(n - 1.0) < 1e-3, f"{n:.6f}"))
    results.append(check("excess decreases", all(b <= a for a, b in zip(traj["excess"], traj["excess"][1:]))))

    try:
        sf.eigenvalues(3)
        results.append(check("unsupported dimension raises", False))
    except ValueError:
        results.append(check("unsupported dimension raises", True))

    with tempfile.TemporaryDirectory() as out:
        code = sf.run_cli(["--out", out, "--seed", "1", "audit", "three-annulus", "--trials", "50"])
        results.append(check("cli audit", code == 0, f"exit {code}"))

    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
