#!/usr/bin/env python3
"""Generate MMFF94-optimized 3D conformers for a SMILES table.

Writes an SDF (explicit hydrogens, kekulized bonds, title line = record id)
and a targets CSV with columns id,smiles,target. Used to build data/freesolv
and the small training fixtures; requires RDKit.

    python3 scripts/make_conformers.py data/freesolv/source.csv data/freesolv \
        --smiles-column smiles --target-column expt --conformers 50
"""
import argparse
import csv
import os

from rdkit import Chem
from rdkit.Chem import AllChem


def lowest_energy_conformer(smiles, n_confs, seed):
    mol = Chem.AddHs(Chem.MolFromSmiles(smiles))
    params = AllChem.ETKDGv3()
    params.randomSeed = seed
    params.pruneRmsThresh = 0.5
    cids = list(AllChem.EmbedMultipleConfs(mol, numConfs=n_confs, params=params))
    if not cids:
        params.useRandomCoords = True
        cids = list(AllChem.EmbedMultipleConfs(mol, numConfs=n_confs, params=params))
    if not cids:
        raise RuntimeError(f"embedding failed for {smiles}")
    results = AllChem.MMFFOptimizeMoleculeConfs(mol, maxIters=2000)
    energies = [e if not_conv == 0 else e + 1e6 for not_conv, e in results]
    best = cids[min(range(len(cids)), key=lambda k: energies[k])]
    keep = Chem.Conformer(mol.GetConformer(best))
    out = Chem.Mol(mol)
    out.RemoveAllConformers()
    out.AddConformer(keep, assignId=True)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("source")
    ap.add_argument("out_dir")
    ap.add_argument("--smiles-column", default="smiles")
    ap.add_argument("--target-column", default="expt")
    ap.add_argument("--prefix", default="freesolv")
    ap.add_argument("--conformers", type=int, default=50)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--limit", type=int, default=0)
    ap.add_argument("--rows", default="", help="comma-separated row indices to keep")
    args = ap.parse_args()

    with open(args.source, newline="") as fh:
        rows = list(csv.DictReader(fh))
    indices = range(len(rows))
    if args.rows:
        indices = [int(k) for k in args.rows.split(",")]
    elif args.limit:
        indices = range(min(args.limit, len(rows)))

    os.makedirs(args.out_dir, exist_ok=True)
    writer = Chem.SDWriter(os.path.join(args.out_dir, "structures.sdf"))
    writer.SetKekulize(True)
    with open(os.path.join(args.out_dir, "targets.csv"), "w", newline="") as fh:
        table = csv.writer(fh)
        table.writerow(["id", "smiles", "target"])
        for k in indices:
            row = rows[k]
            rec_id = f"{args.prefix}_{k:04d}"
            mol = lowest_energy_conformer(row[args.smiles_column], args.conformers, args.seed)
            mol.SetProp("_Name", rec_id)
            writer.write(mol)
            table.writerow([rec_id, row[args.smiles_column], row[args.target_column]])
    writer.close()


if __name__ == "__main__":
    main()
