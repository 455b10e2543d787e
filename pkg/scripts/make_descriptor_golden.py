#!/usr/bin/env python3
"""Build the QED golden file for the descriptor acceptance checks.

For twenty well-characterized drugs the eight property values are pinned
from public compound records: molecular weight recomputed exactly from the
molecular formula, polar surface area as the published Ertl group sum
(sulfur/phosphorus contributions included, matching this package's
convention), atom-contribution logP from published values, and the count
properties read off the structure. The golden QED is then evaluated here
with a self-contained desirability implementation, independent of the
package's descriptor pipeline; only the published parameter table is shared
(it is data, not code).

Pinned logP values carry roughly +/-0.3 uncertainty; the acceptance
tolerance of +/-0.10 QED units absorbs that comfortably because the logP
desirability curve is broad.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
PARAMS = ROOT / "src" / "molbridge" / "data" / "qed_params.tsv"
OUT = ROOT / "tests" / "data" / "qed_golden.tsv"

# name, smiles, mw, logp, hba, hbd, tpsa, rotb, arom_rings, alerts
GOLDEN_PROPERTIES = [
    ("aspirin", "CC(=O)Oc1ccccc1C(=O)O", 180.159, 1.31, 4, 1, 63.60, 3, 1, 0),
    ("ibuprofen", "CC(C)Cc1ccc(C(C)C(=O)O)cc1", 206.285, 3.07, 2, 1, 37.30, 4, 1, 0),
    ("naproxen", "COc1ccc2cc(C(C)C(=O)O)ccc2c1", 230.263, 3.10, 3, 1, 46.53, 3, 2, 0),
    ("ketoprofen", "CC(C(=O)O)c1cccc(C(=O)c2ccccc2)c1", 254.285, 2.90, 3, 1, 54.37, 4, 2, 0),
    ("paracetamol", "CC(=O)Nc1ccc(O)cc1", 151.165, 1.35, 2, 2, 49.33, 1, 1, 0),
    ("caffeine", "Cn1cnc2c1c(=O)n(C)c(=O)n2C", 194.191, -1.03, 3, 0, 58.44, 0, 2, 0),
    ("theophylline", "Cn1c(=O)c2[nH]cnc2n(C)c1=O", 180.167, -1.30, 3, 1, 69.30, 0, 2, 0),
    ("atenolol", "CC(C)NCC(O)COc1ccc(CC(N)=O)cc1", 266.341, 0.10, 4, 3, 84.58, 8, 1, 0),
    ("propranolol", "CC(C)NCC(O)COc1cccc2ccccc12", 259.349, 2.90, 3, 2, 41.49, 6, 2, 0),
    ("metoprolol", "COCCc1ccc(OCC(O)CNC(C)C)cc1", 267.369, 1.80, 4, 2, 50.72, 9, 1, 0),
    ("lidocaine", "CCN(CC)CC(=O)Nc1c(C)cccc1C", 234.343, 2.30, 2, 1, 32.34, 5, 1, 0),
    ("warfarin", "CC(=O)CC(c1ccccc1)c1c(O)c2ccccc2oc1=O", 308.333, 3.20, 4, 1, 63.60, 4, 3, 0),
    ("celecoxib", "Cc1ccc(-c2cc(C(F)(F)F)nn2-c2ccc(S(N)(=O)=O)cc2)cc1", 381.373, 3.50, 4, 1, 86.36, 4, 3, 0),
    ("phenytoin", "O=C1NC(=O)C(c2ccccc2)(c2ccccc2)N1", 252.273, 2.20, 2, 2, 58.20, 2, 2, 0),
    ("salicylic acid", "O=C(O)c1ccccc1O", 138.122, 1.60, 3, 2, 57.53, 1, 1, 0),
    ("nicotine", "CN1CCCC1c1cccnc1", 162.236, 1.10, 2, 0, 16.13, 1, 1, 0),
    ("fluoxetine", "CNCCC(Oc1ccc(C(F)(F)F)cc1)c1ccccc1", 309.331, 4.00, 2, 1, 21.26, 6, 2, 0),
    ("imipramine", "CN(C)CCCN1c2ccccc2CCc2ccccc21", 280.415, 4.40, 2, 0, 6.48, 4, 2, 0),
    ("chlorpromazine", "CN(C)CCCN1c2ccccc2Sc2ccc(Cl)cc21", 318.871, 5.20, 2, 0, 31.78, 4, 2, 0),
    ("diphenhydramine", "CN(C)CCOC(c1ccccc1)c1ccccc1", 255.361, 3.40, 2, 0, 12.47, 6, 2, 0),
]

PROPERTY_ORDER = ["mw", "logp", "hba", "hbd", "tpsa", "rotb", "arom_rings", "alerts"]


def load_params() -> dict[str, tuple[float, ...]]:
    params = {}
    with open(PARAMS) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            name, *vals = line.split("\t")
            params[name] = tuple(float(v) for v in vals)
    return params


def desirability(x: float, p: tuple[float, ...]) -> float:
    a, b, c, d, e, f, dmax, _ = p
    v = a + b / (1 + math.exp(-(x - c + d / 2) / e)) * (
        1 - 1 / (1 + math.exp(-(x - c - d / 2) / f))
    )
    return min(v / dmax, 1.0)


def golden_qed(props: dict[str, float], params: dict[str, tuple[float, ...]]) -> float:
    num = 0.0
    den = 0.0
    for name in PROPERTY_ORDER:
        p = params[name]
        weight = p[-1]
        num += weight * math.log(desirability(props[name], p))
        den += weight
    return math.exp(num / den)


def main() -> None:
    params = load_params()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w") as fh:
        fh.write(
            "# golden property vectors (public record values) and the QED they imply\n"
            "# name\tsmiles\tmw\tlogp\thba\thbd\ttpsa\trotb\tarom_rings\talerts\tqed\n"
        )
        for name, smiles, *vals in GOLDEN_PROPERTIES:
            props = dict(zip(PROPERTY_ORDER, vals))
            q = golden_qed(props, params)
            cells = [name, smiles] + [str(v) for v in vals] + [f"{q:.4f}"]
            fh.write("\t".join(cells) + "\n")
            print(f"{name:<18} qed={q:.4f}")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
