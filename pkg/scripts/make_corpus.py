#!/usr/bin/env python3
"""Generate the bundled benchmark corpora (corpus_1k.smi, corpus_10k.smi).

Molecules are enumerated deterministically from drug-like ring scaffolds
decorated with common substituents, validated through the package's own
parser, deduplicated by canonical form, and written in a fixed order.
Re-running this script reproduces the bundled files byte for byte.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from molbridge.molgraph import SmilesError, canonicalize

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "molbridge" / "data"

# Hand-pinned structures for well-known drugs (public structure records),
# stereochemistry already stripped. The first eight are the benchmark
# reference pairs.
NAMED_DRUGS = [
    ("ibuprofen", "CC(C)Cc1ccc(C(C)C(=O)O)cc1"),
    ("naproxen", "COc1ccc2cc(C(C)C(=O)O)ccc2c1"),
    ("gefitinib", "COc1cc2ncnc(Nc3ccc(F)c(Cl)c3)c2cc1OCCCN1CCOCC1"),
    ("erlotinib", "COCCOc1cc2ncnc(Nc3cccc(C#C)c3)c2cc1OCCOC"),
    ("pazopanib", "Cc1ccc(Nc2nccc(N(C)c3ccc4c(C)n(C)nc4c3)n2)cc1S(N)(=O)=O"),
    ("sunitinib", "CCN(CC)CCNC(=O)c1c(C)[nH]c(C=C2C(=O)Nc3ccc(F)cc23)c1C"),
    ("alpelisib", "CC(C)(C(F)(F)F)c1cc(-c2sc(NC(=O)N3CCCC3C(N)=O)nc2C)ccn1"),
    ("inavolisib", "CC(C(=O)N)NC1=CC2=C(C=C1)C3=NC(=CN3CCO2)N4C(COC4=O)C(F)F"),
    ("aspirin", "CC(=O)Oc1ccccc1C(=O)O"),
    ("paracetamol", "CC(=O)Nc1ccc(O)cc1"),
    ("caffeine", "Cn1cnc2c1c(=O)n(C)c(=O)n2C"),
    ("nicotine", "CN1CCCC1c1cccnc1"),
    ("benzocaine", "CCOC(=O)c1ccc(N)cc1"),
    ("procaine", "CCN(CC)CCOC(=O)c1ccc(N)cc1"),
    ("lidocaine", "CCN(CC)CC(=O)Nc1c(C)cccc1C"),
    ("ketoprofen", "CC(C(=O)O)c1cccc(C(=O)c2ccccc2)c1"),
    ("diclofenac", "O=C(O)Cc1ccccc1Nc1c(Cl)cccc1Cl"),
    ("salicylic acid", "O=C(O)c1ccccc1O"),
    ("warfarin", "CC(=O)CC(c1ccccc1)c1c(O)c2ccccc2oc1=O"),
    ("diazepam", "CN1c2ccc(Cl)cc2C(c2ccccc2)=NCC1=O"),
    ("metronidazole", "Cc1ncc([N+](=O)[O-])n1CCO"),
    ("isoniazid", "NNC(=O)c1ccncc1"),
    ("atenolol", "CC(C)NCC(O)COc1ccc(CC(N)=O)cc1"),
    ("propranolol", "CC(C)NCC(O)COc1cccc2ccccc12"),
    ("metoprolol", "COCCc1ccc(OCC(O)CNC(C)C)cc1"),
    ("celecoxib", "Cc1ccc(-c2cc(C(F)(F)F)nn2-c2ccc(S(N)(=O)=O)cc2)cc1"),
    ("sulfanilamide", "NS(=O)(=O)c1ccc(N)cc1"),
    ("chlorpromazine", "CN(C)CCCN1c2ccccc2Sc2ccc(Cl)cc21"),
    ("imipramine", "CN(C)CCCN1c2ccccc2CCc2ccccc21"),
    ("fluoxetine", "CNCCC(Oc1ccc(C(F)(F)F)cc1)c1ccccc1"),
    ("tolbutamide", "CCCCNC(=O)NS(=O)(=O)c1ccc(C)cc1"),
    ("phenytoin", "O=C1NC(=O)C(c2ccccc2)(c2ccccc2)N1"),
    ("theophylline", "Cn1c(=O)c2[nH]cnc2n(C)c1=O"),
    ("allopurinol", "O=c1[nH]cnc2[nH]ncc12"),
    ("acyclovir", "Nc1nc(=O)c2ncn(COCCO)c2[nH]1"),
    ("trimethoprim", "COc1cc(Cc2cnc(N)nc2N)cc(OC)c1OC"),
    ("naphthalene", "c1ccc2ccccc2c1"),
    ("benzene", "c1ccccc1"),
    ("strychnine-like cage", "C1C2CC3CC1CC(C2)C3"),
]

SCAFFOLDS_ONE = [
    "c1ccc({0})cc1",
    "c1ccnc({0})c1",
    "c1ccc({0})nc1",
    "c1cnc({0})cn1",
    "c1cc({0})ncn1",
    "c1cc({0})ccc1N",
    "c1cc({0})sc1",
    "c1cc({0})oc1",
    "c1cc({0})[nH]c1",
    "c1cc({0})c[nH]1",
    "c1ccc2c(c1)cc({0})s2",
    "c1ccc2c(c1)cc({0})o2",
    "c1ccc2c(c1)cc({0})[nH]2",
    "c1ccc2c(c1)nc({0})[nH]2",
    "c1ccc2c(c1)ccc({0})n2",
    "c1ccc2c(c1)ccc({0})c2",
    "C1CCN({0})CC1",
    "C1CN({0})CCN1C",
    "C1COCCN1{0}",
    "C1CCC({0})CC1",
    "C1CCC({0})OC1",
    "C1CCN({0})C1",
    "O=C1CCCN1{0}",
    "O=C(N1CCOCC1){0}",
    "O=S(=O)(N1CCCCC1){0}",
]

SCAFFOLDS_TWO = [
    "c1cc({0})cc({1})c1",
    "c1cc({0})ccc1{1}",
    "c1c({0})cc({1})cn1",
    "c1nc({0})cc({1})n1",
    "c1cc({0})c({1})cc1C",
    "c1ccc2c(c1)c({0})cc({1})c2",
    "c1cc({0})c2nc({1})c[nH]c2c1",
    "O=C(c1ccc({0})cc1)c1ccc({1})cc1",
    "c1cc({0})ccc1Cc1ccc({1})cc1",
    "c1cc({0})ccc1Nc1ncnc({1})c1",
    "c1cc({0})ccc1OCc1ccc({1})cc1",
    "c1cc({0})ccc1NC(=O)c1ccc({1})cc1",
    "c1cc({0})ccc1-c1ccc({1})cc1",
    "c1cc({0})ccc1S(=O)(=O)Nc1ccc({1})cc1",
    "C({0})C(=O)NC({1})C(=O)O",
]

# substituent ring closures use digit 9 so they never collide with the
# scaffold templates' digits 1 and 2
SUBSTITUENTS = [
    "C", "CC", "CCC", "C(C)C", "C(C)(C)C", "O", "OC", "OCC", "N", "NC",
    "N(C)C", "F", "Cl", "Br", "I", "C#N", "C(=O)O", "C(=O)OC", "C(=O)N",
    "C(=O)NC", "C(F)(F)F", "S(=O)(=O)N", "S(=O)(=O)C", "SC", "C=C", "CO",
    "CN", "CC(=O)O", "NC(=O)C", "CCO", "CCN", "OC(F)F", "CC#N", "C(=O)C",
    "N9CCOCC9", "N9CCNCC9", "N9CCCC9", "CCCl", "OCC(=O)O", "C(N)=O",
]

COMPLEX_EXTRAS = [
    "C1CCCCCCCCCCC1",
    "O=C1CCCCCCCCCCN1",
    "C1CC2CCC1CC2",
    "C1CC2CCC1C2",
    "C1CCC2(CC1)CCCCC2",
    "C1CCC2(CC1)OCCO2",
    "C1CC2CC3CC1CC(C2)C3",
    "c1ccc2c(c1)ccc1ccccc12",
    "c1ccc2c(c1)cc1ccccc1c2",
    "O=C1c2ccccc2C(=O)c2ccccc21",
    "C1CN2CCC1CC2",
    "c1ccc2c(c1)oc1ccccc12",
    "c1ccc2c(c1)sc1ccccc12",
    "c1ccc2c(c1)[nH]c1ccccc12",
    "O=c1ccc2ccccc2o1",
    "C1CCC2(CC1)CCC1(CCCCC1)CC2",
    "O=C1CC2(CCCC2)CC(=O)N1",
    "C1CC12CC2",
    "c1cnc2[nH]ccc2c1",
    "c1cc2cccc3cccc1c23",
]


def generate(target: int) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []

    def push(smiles: str) -> None:
        try:
            canon = canonicalize(smiles, max_len=250)
        except SmilesError:
            return
        if canon not in seen:
            seen.add(canon)
            out.append(canon)

    for _, smi in NAMED_DRUGS:
        push(smi)
    for smi in COMPLEX_EXTRAS:
        push(smi)

    for template in SCAFFOLDS_ONE:
        for sub in SUBSTITUENTS:
            push(template.format(sub))
    for template in SCAFFOLDS_TWO:
        for i, sub_a in enumerate(SUBSTITUENTS):
            for sub_b in SUBSTITUENTS[i:]:
                push(template.format(sub_a, sub_b))
                if len(out) >= target:
                    return out
    return out


def main() -> None:
    mols = generate(12000)
    print(f"generated {len(mols)} unique molecules")
    DATA_DIR.mkdir(parents=True, exist_ok=True)

    # Interleave so the 1k corpus spans the full template range rather than
    # the first few scaffolds.
    stride = max(1, len(mols) // 1000)
    corpus_1k = [mols[i] for i in range(0, stride * 1000, stride)][:1000]
    corpus_10k = mols[:10000]

    for name, corpus in (("corpus_1k.smi", corpus_1k), ("corpus_10k.smi", corpus_10k)):
        path = DATA_DIR / name
        with open(path, "w") as fh:
            fh.write("# generated by scripts/make_corpus.py; SMILES<TAB>id\n")
            for i, smi in enumerate(corpus):
                fh.write(f"{smi}\tM{i:05d}\n")
        print(f"wrote {path} ({len(corpus)} molecules)")


if __name__ == "__main__":
    main()
