#!/usr/bin/env python3
"""Write data/hdfail_wdc.csv (Western Digital subset of the hard drive failure data).

The `hdfail` table ships as data/hdfail.rda inside the frailtySurv source
tarball. Give a local tarball with --tarball, or let the script download
it from CRAN. Rows whose model contains "WDC" are kept; models are
numbered by first appearance. Output columns: family (model number),
rep (drive within model), time, status, temp, rer, rsc, psc.

Needs pandas and pyreadr.
"""

import argparse
import pathlib
import sys
import tarfile
import tempfile
import urllib.request

import pandas as pd
import pyreadr

CRAN = "https://cran.r-project.org/src/contrib/Archive/frailtySurv/frailtySurv_1.3.8.tar.gz"
MEMBER = "frailtySurv/data/hdfail.rda"
COVARIATES = ["temp", "rer", "rsc", "psc"]


def load(tarball):
    with tempfile.TemporaryDirectory() as tmp:
        with tarfile.open(tarball) as t:
            t.extract(MEMBER, tmp, filter="data")
        return pyreadr.read_r(str(pathlib.Path(tmp) / MEMBER))["hdfail"]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--tarball", help="path to a frailtySurv source tarball")
    ap.add_argument("--url", default=CRAN, help="download location when no tarball is given")
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "hdfail_wdc.csv"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tarball = args.tarball
        if tarball is None:
            tarball = str(pathlib.Path(tmp) / "frailtySurv.tar.gz")
            urllib.request.urlretrieve(args.url, tarball)
        df = load(tarball)

    sub = df[df["model"].astype(str).str.contains("WDC")].copy()
    sub = sub.dropna(subset=["time", "status", *COVARIATES])
    codes, _ = pd.factorize(sub["model"].astype(str))
    sub["family"] = codes + 1
    sub["rep"] = sub.groupby("family").cumcount() + 1
    out = sub[["family", "rep", "time", "status", *COVARIATES]].copy()
    out["status"] = out["status"].astype(int)
    for c in ["rer", "rsc", "psc"]:
        out[c] = out[c].astype(int)

    print(f"{len(out)} drives, {out['family'].nunique()} models, {int(out['status'].sum())} failures")
    if len(out) != 3530 or out["family"].nunique() != 40:
        print("warning: expected 3530 drives in 40 models", file=sys.stderr)
    pathlib.Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(args.out, index=False)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
